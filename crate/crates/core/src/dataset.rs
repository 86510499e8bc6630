//! Historical solve records used for big-M values, heuristic fixings and the kNN1 baseline.

use serde::{Deserialize, Serialize};

use crate::case::{DemandScenario, NetworkCase};
use crate::dcopf::{DispatchSolution, Inequality};
use crate::uc::{Commitment, UcSchedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    Dcopf,
    Uc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SampleSolution {
    Dcopf {
        pg: Vec<f64>,
        /// Binding flags in `Inequality` order.
        active: Vec<bool>,
        /// Inequality duals in `Inequality` order.
        duals: Vec<f64>,
        objective: f64,
    },
    Uc {
        p: Vec<Vec<f64>>,
        u: Commitment,
        objective: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub theta: DemandScenario,
    pub solution: SampleSolution,
}

impl Sample {
    pub fn from_dispatch(theta: DemandScenario, case: &NetworkCase, sol: &DispatchSolution) -> Self {
        Self {
            theta,
            solution: SampleSolution::Dcopf {
                pg: sol.pg.clone(),
                active: sol.active.clone(),
                duals: Inequality::all(case).map(|q| sol.inequality_dual(q)).collect(),
                objective: sol.objective,
            },
        }
    }

    pub fn from_schedule(theta: DemandScenario, sol: &UcSchedule) -> Self {
        Self {
            theta,
            solution: SampleSolution::Uc {
                p: sol.p.clone(),
                u: sol.u.clone(),
                objective: sol.objective,
            },
        }
    }

    pub fn pg(&self) -> Option<&[f64]> {
        match &self.solution {
            SampleSolution::Dcopf { pg, .. } => Some(pg),
            SampleSolution::Uc { .. } => None,
        }
    }

    pub fn commitment(&self) -> Option<&Commitment> {
        match &self.solution {
            SampleSolution::Uc { u, .. } => Some(u),
            SampleSolution::Dcopf { .. } => None,
        }
    }

    pub fn active(&self) -> Option<&[bool]> {
        match &self.solution {
            SampleSolution::Dcopf { active, .. } => Some(active),
            SampleSolution::Uc { .. } => None,
        }
    }

    pub fn duals(&self) -> Option<&[f64]> {
        match &self.solution {
            SampleSolution::Dcopf { duals, .. } => Some(duals),
            SampleSolution::Uc { .. } => None,
        }
    }
}

/// Header record of a persisted dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub kind: ProblemKind,
    pub case_id: String,
    pub case_name: String,
    pub seed: u64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveDataset {
    pub kind: ProblemKind,
    pub case_id: String,
    pub case_name: String,
    pub seed: u64,
    pub samples: Vec<Sample>,
}

impl SolveDataset {
    pub fn header(&self) -> DatasetHeader {
        DatasetHeader {
            kind: self.kind,
            case_id: self.case_id.clone(),
            case_name: self.case_name.clone(),
            seed: self.seed,
            samples: self.samples.len(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Largest recorded |dual| per inequality.
    pub fn max_duals(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for s in &self.samples {
            if let Some(d) = s.duals() {
                out.resize(d.len().max(out.len()), 0.0);
                for (m, v) in out.iter_mut().zip(d) {
                    *m = m.max(v.abs());
                }
            }
        }
        out
    }

    /// Largest total demand over all samples (the peak-normalisation base).
    pub fn peak_demand(&self) -> f64 {
        self.samples
            .iter()
            .map(|s| match s.theta.kind {
                crate::case::ScenarioKind::DcopfNodal => s.theta.total(),
                crate::case::ScenarioKind::UcHourly => s.theta.values.iter().copied().fold(0.0, f64::max),
            })
            .fold(0.0, f64::max)
    }

    /// Serializes as one JSON record per line, header first.
    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&self.header()).expect("header serializes");
        out.push('\n');
        for s in &self.samples {
            out.push_str(&serde_json::to_string(s).expect("sample serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self, DatasetError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines.next().ok_or(DatasetError::Empty)?;
        let header: DatasetHeader =
            serde_json::from_str(first).map_err(|e| DatasetError::Record { line: 1, message: e.to_string() })?;
        let mut samples = Vec::with_capacity(header.samples);
        for (i, line) in lines {
            let s: Sample =
                serde_json::from_str(line).map_err(|e| DatasetError::Record { line: i + 1, message: e.to_string() })?;
            samples.push(s);
        }
        if samples.len() != header.samples {
            return Err(DatasetError::Count { expected: header.samples, found: samples.len() });
        }
        Ok(Self {
            kind: header.kind,
            case_id: header.case_id,
            case_name: header.case_name,
            seed: header.seed,
            samples,
        })
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DatasetError {
    #[error("dataset file is empty")]
    Empty,
    #[error("record on line {line}: {message}")]
    Record { line: usize, message: String },
    #[error("header announces {expected} samples, found {found}")]
    Count { expected: usize, found: usize },
}
