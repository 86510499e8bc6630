//! Peak-normalised distance and the kNN1 ratio.

use gridcf::case::{Case, DemandScenario};
use gridcf::ce::{knn1_dcopf, knn1_uc, CeResult, Knn1, Method};
use gridcf::dataset::SolveDataset;
use serde::{Deserialize, Serialize};

use crate::questions::QuestionRegion;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub method: Method,
    pub status: String,
    pub distance_mw: Option<f64>,
    pub pnd_pct: Option<f64>,
    /// Absent when no recorded sample satisfies the region.
    pub knn1_pct: Option<f64>,
    pub runtime_s: f64,
    pub iterations: usize,
}

/// Distance as a percentage of the dataset's peak system demand.
pub fn peak_normalised(distance: f64, peak: f64) -> Option<f64> {
    (peak > 0.0).then(|| distance / peak * 100.0)
}

/// Distance as a percentage of the kNN1 baseline distance.
pub fn knn1_ratio(distance: f64, baseline: &Knn1) -> Option<f64> {
    (baseline.distance > 0.0).then(|| distance / baseline.distance * 100.0)
}

/// kNN1 baseline for a question, if any sample satisfies its region.
pub fn knn1_for(case: &Case, dataset: &SolveDataset, factual: &DemandScenario, region: &QuestionRegion) -> Option<Knn1> {
    match (case, region) {
        (Case::Network(net), QuestionRegion::Dcopf(r)) => {
            let g = r.resolve(net).ok()?;
            knn1_dcopf(dataset, factual, g, r.threshold)
        }
        (Case::Uc(uc), QuestionRegion::Uc(r)) => {
            let g = r.resolve(uc).ok()?;
            knn1_uc(dataset, factual, g, r.hour)
        }
        _ => None,
    }
}

/// Metrics for one run. Distances are reported only for optimal results.
pub fn compute_metrics(
    result: &CeResult,
    case: &Case,
    dataset: &SolveDataset,
    factual: &DemandScenario,
    region: &QuestionRegion,
) -> MetricsRecord {
    let mut rec = MetricsRecord {
        method: result.method,
        status: result.status.as_str().to_string(),
        distance_mw: None,
        pnd_pct: None,
        knn1_pct: None,
        runtime_s: result.runtime_s,
        iterations: result.iterations,
    };
    if result.is_optimal() {
        rec.distance_mw = Some(result.distance);
        rec.pnd_pct = peak_normalised(result.distance, dataset.peak_demand());
        rec.knn1_pct = knn1_for(case, dataset, factual, region).and_then(|k| knn1_ratio(result.distance, &k));
    }
    rec
}
