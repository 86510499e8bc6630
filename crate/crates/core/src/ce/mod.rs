//! Counterfactual demand explanations: shared result types, regions and the kNN1 baseline.

pub mod dcopf;
pub mod uc;

use std::fmt;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::case::{DemandScenario, NetworkCase, ScenarioError, UcCase};
use crate::dataset::{Sample, SolveDataset};
use crate::dcopf::{DcopfError, DispatchSolution};
use crate::solver::{SolverError, Tolerances};
use crate::uc::{UcError, UcSchedule};

/// Default per-question limit used by experiments at paper scale.
pub const PAPER_TIME_LIMIT: Duration = Duration::from_secs(600);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "sos1")]
    Sos1,
    #[serde(rename = "mip")]
    Mip,
    #[serde(rename = "mip+cut")]
    MipCut,
    #[serde(rename = "decomp")]
    Decomp,
    #[serde(rename = "decomp+cut")]
    DecompCut,
}

impl Method {
    pub const DCOPF: [Method; 3] = [Method::Sos1, Method::Mip, Method::MipCut];
    pub const UC: [Method; 2] = [Method::Decomp, Method::DecompCut];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Sos1 => "sos1",
            Method::Mip => "mip",
            Method::MipCut => "mip+cut",
            Method::Decomp => "decomp",
            Method::DecompCut => "decomp+cut",
        }
    }

    pub fn is_dcopf(self) -> bool {
        Self::DCOPF.contains(&self)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = CeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [Method::Sos1, Method::Mip, Method::MipCut, Method::Decomp, Method::DecompCut]
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| CeError::UnknownMethod(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CeStatus {
    Optimal,
    Infeasible,
    Timeout,
    HeuristicInfeasible,
}

impl CeStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            CeStatus::Optimal => "optimal",
            CeStatus::Infeasible => "infeasible",
            CeStatus::Timeout => "timeout",
            CeStatus::HeuristicInfeasible => "heuristic-infeasible",
        }
    }
}

/// "Why was generator g' not dispatched at P or more?"
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionRegionDcopf {
    pub generator: String,
    /// MW floor on the generator's output.
    pub threshold: f64,
}

impl SolutionRegionDcopf {
    /// Index of the generator, checking the threshold against its limits.
    pub fn resolve(&self, case: &NetworkCase) -> Result<usize, CeError> {
        let g = case
            .generator(&self.generator)
            .ok_or_else(|| CeError::UnknownGenerator(self.generator.clone()))?;
        let gen = &case.generators[g];
        if !(self.threshold >= gen.p_min && self.threshold <= gen.p_max) {
            return Err(CeError::ThresholdOutOfRange {
                generator: self.generator.clone(),
                threshold: self.threshold,
                p_min: gen.p_min,
                p_max: gen.p_max,
            });
        }
        Ok(g)
    }
}

/// "Why was unit g' not committed at hour t'?"
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionRegionUc {
    pub unit: String,
    pub hour: usize,
}

impl SolutionRegionUc {
    pub fn resolve(&self, case: &UcCase) -> Result<usize, CeError> {
        let g = case.unit(&self.unit).ok_or_else(|| CeError::UnknownGenerator(self.unit.clone()))?;
        if self.hour >= case.horizon {
            return Err(CeError::HourOutOfRange {
                hour: self.hour,
                horizon: case.horizon,
            });
        }
        Ok(g)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CeConfig {
    pub time_limit: Option<Duration>,
    pub tol: Tolerances,
}

impl Default for CeConfig {
    fn default() -> Self {
        Self {
            time_limit: Some(Duration::from_secs(60)),
            tol: Tolerances::default(),
        }
    }
}

impl CeConfig {
    pub fn with_time_limit(limit: Duration) -> Self {
        Self {
            time_limit: Some(limit),
            ..Self::default()
        }
    }
}

/// Outcome of the independent checks run on a returned counterfactual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub passed: bool,
    /// Lower-level optimum at the counterfactual demand.
    pub objective: f64,
    /// Same optimum with the region imposed.
    pub objective_in_region: f64,
    /// Largest stationarity residual of the embedded lower level (dcopf only).
    pub stationarity: Option<f64>,
    /// Largest `min(dual, slack)` over complementary pairs (dcopf only).
    pub complementarity: Option<f64>,
    /// Left side of the distance bound: demand change.
    pub demand_change: f64,
    /// Right side of the distance bound: dispatch change.
    pub dispatch_change: f64,
    pub notes: Vec<String>,
}

impl Verification {
    pub fn proposition_holds(&self, feas: f64) -> bool {
        self.demand_change <= self.dispatch_change + feas
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Counterfactual {
    Dispatch(DispatchSolution),
    Schedule(UcSchedule),
}

/// One master/subproblem round of the decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Master distance, a lower bound on the counterfactual distance.
    pub lower_bound: f64,
    pub patterns: usize,
    /// Operating cost the master claims for its schedule.
    pub master_cost: f64,
    /// True optimum of the lower level at the master's demand.
    pub subproblem_cost: f64,
    pub master_s: f64,
    pub subproblem_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CeResult {
    pub status: CeStatus,
    pub method: Method,
    pub theta: Option<DemandScenario>,
    /// `theta - factual`, per entry.
    pub deltas: Vec<f64>,
    /// l1 distance to the factual scenario, MW.
    pub distance: f64,
    /// Best proven lower bound on the distance.
    pub bound: f64,
    pub counterfactual: Option<Counterfactual>,
    pub runtime_s: f64,
    pub iterations: usize,
    pub nodes: usize,
    pub verification: Option<Verification>,
    pub trace: Vec<IterationRecord>,
}

impl CeResult {
    pub fn is_optimal(&self) -> bool {
        self.status == CeStatus::Optimal
    }

    pub(crate) fn without_solution(status: CeStatus, method: Method, bound: f64, runtime_s: f64) -> Self {
        Self {
            status,
            method,
            theta: None,
            deltas: Vec::new(),
            distance: f64::NAN,
            bound,
            counterfactual: None,
            runtime_s,
            iterations: 0,
            nodes: 0,
            verification: None,
            trace: Vec::new(),
        }
    }

    pub(crate) fn with_theta(mut self, factual: &DemandScenario, theta: DemandScenario) -> Self {
        self.deltas = theta.values.iter().zip(&factual.values).map(|(a, b)| a - b).collect();
        self.distance = theta.distance(factual);
        self.theta = Some(theta);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CeError {
    #[error("unknown generator or unit '{0}'")]
    UnknownGenerator(String),
    #[error("threshold {threshold} for '{generator}' is outside [{p_min}, {p_max}]")]
    ThresholdOutOfRange {
        generator: String,
        threshold: f64,
        p_min: f64,
        p_max: f64,
    },
    #[error("hour {hour} is outside the horizon of {horizon} hours")]
    HourOutOfRange { hour: usize, horizon: usize },
    #[error("unknown method '{0}'")]
    UnknownMethod(String),
    #[error("method {0} does not apply to this problem")]
    WrongMethod(Method),
    #[error("method {0} needs dataset hints")]
    MissingHints(Method),
    #[error("the factual scenario has no optimal solution ({0})")]
    FactualNotOptimal(String),
    #[error("the dataset is empty")]
    EmptyDataset,
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

impl From<DcopfError> for CeError {
    fn from(e: DcopfError) -> Self {
        match e {
            DcopfError::Scenario(s) => CeError::Scenario(s),
            DcopfError::Solver(s) => CeError::Solver(s),
        }
    }
}

impl From<UcError> for CeError {
    fn from(e: UcError) -> Self {
        match e {
            UcError::Scenario(s) => CeError::Scenario(s),
            UcError::Solver(s) => CeError::Solver(s),
        }
    }
}

/// Nearest recorded scenario whose solution already lies in the region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Knn1 {
    pub sample: usize,
    pub scenario: DemandScenario,
    pub distance: f64,
}

fn nearest(dataset: &SolveDataset, factual: &DemandScenario, accept: impl Fn(&Sample) -> bool) -> Option<Knn1> {
    let mut best: Option<Knn1> = None;
    for (i, s) in dataset.samples.iter().enumerate() {
        if s.theta.len() != factual.len() || !accept(s) {
            continue;
        }
        let d = s.theta.distance(factual);
        // strict comparison keeps the earliest sample on ties
        if best.as_ref().map_or(true, |b| d < b.distance) {
            best = Some(Knn1 {
                sample: i,
                scenario: s.theta.clone(),
                distance: d,
            });
        }
    }
    best
}

/// kNN1 baseline for a dispatch question (`pg[g'] >= P`).
pub fn knn1_dcopf(dataset: &SolveDataset, factual: &DemandScenario, generator: usize, threshold: f64) -> Option<Knn1> {
    nearest(dataset, factual, |s| s.pg().is_some_and(|pg| pg.get(generator).is_some_and(|p| *p >= threshold)))
}

/// kNN1 baseline for a commitment question (`u[g'][t'] = 1`).
pub fn knn1_uc(dataset: &SolveDataset, factual: &DemandScenario, unit: usize, hour: usize) -> Option<Knn1> {
    nearest(dataset, factual, |s| {
        s.commitment().is_some_and(|u| u.get(unit).and_then(|r| r.get(hour)).copied().unwrap_or(false))
    })
}
