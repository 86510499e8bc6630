//! Request and response bodies. Field names follow the library's domain types.

use gridcf::case::{Case, DemandScenario};
use gridcf::ce::{CeResult, Method, SolutionRegionDcopf, SolutionRegionUc};
use gridcf::dataset::ProblemKind;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseCreated {
    pub id: String,
    pub name: String,
    pub kind: ProblemKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseDocument {
    pub id: String,
    pub name: String,
    pub kind: ProblemKind,
    pub has_dataset: bool,
    pub case: Case,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveRequest {
    /// Defaults to the case's nominal demands (network cases only).
    #[serde(default)]
    pub scenario: Option<DemandScenario>,
    #[serde(default)]
    pub time_limit_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RegionRequest {
    Dcopf(SolutionRegionDcopf),
    Uc(SolutionRegionUc),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplainRequest {
    #[serde(default)]
    pub scenario: Option<DemandScenario>,
    pub region: RegionRequest,
    pub method: Method,
    #[serde(default)]
    pub time_limit_s: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
}

/// One entry of the demand change, labelled by demand id (network) or hour (UC).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedDelta {
    pub id: String,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainJob {
    pub id: String,
    pub case_id: String,
    pub request: ExplainRequest,
    pub state: JobState,
    pub result: Option<CeResult>,
    pub deltas: Vec<NamedDelta>,
    /// Distance as a share of the attached dataset's peak demand, percent.
    pub pnd_pct: Option<f64>,
    pub error: Option<String>,
    pub submitted_ms: u64,
    pub started_ms: Option<u64>,
    pub finished_ms: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JobCreated {
    pub job_id: String,
    pub state: JobState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spread {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub case_id: String,
    pub kind: ProblemKind,
    pub seed: u64,
    pub samples: usize,
    pub peak_demand_mw: f64,
    /// Per demand (network) or per hour (UC).
    pub demand: Vec<Spread>,
    /// Mean output per generator (network) or mean commitment rate per unit (UC).
    pub generation: Vec<f64>,
}
