//! Question selection: the generator (or unit-hour) that deviates most below its
//! dataset mean in a sample becomes that sample's "why not" question.

use gridcf::case::Case;
use gridcf::ce::{SolutionRegionDcopf, SolutionRegionUc};
use gridcf::dataset::SolveDataset;
use rand::seq::index;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::HarnessError;

/// Deviations at or below this are treated as "not below the mean".
pub const DEVIATION_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum QuestionRegion {
    Dcopf(SolutionRegionDcopf),
    Uc(SolutionRegionUc),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CeQuestion {
    pub id: usize,
    /// Index of the factual sample in the dataset.
    pub sample: usize,
    pub region: QuestionRegion,
    /// Deviation below the mean that selected this question.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionSet {
    pub questions: Vec<CeQuestion>,
    pub candidates: usize,
    pub diagnostic: Option<String>,
}

fn column_means(rows: &[&[f64]]) -> Vec<f64> {
    let width = rows.first().map_or(0, |r| r.len());
    let mut mean = vec![0.0; width];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r.iter()) {
            *m += v;
        }
    }
    let n = rows.len().max(1) as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    mean
}

/// Position and size of the largest `mean - value`, first index on ties.
fn largest_deficit(mean: &[f64], value: &[f64]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, (m, v)) in mean.iter().zip(value).enumerate() {
        let dev = m - v;
        if dev > DEVIATION_EPS && best.map_or(true, |b| dev > b.1) {
            best = Some((i, dev));
        }
    }
    best
}

fn dcopf_candidates<R: Rng>(dataset: &SolveDataset, case: &Case, rng: &mut R) -> Vec<CeQuestion> {
    let Case::Network(net) = case else {
        return Vec::new();
    };
    let rows: Vec<&[f64]> = dataset.samples.iter().filter_map(|s| s.pg()).collect();
    if rows.len() != dataset.len() {
        return Vec::new();
    }
    let mean = column_means(&rows);
    let mut out = Vec::new();
    for (i, pg) in rows.iter().enumerate() {
        let Some((g, dev)) = largest_deficit(&mean, pg) else {
            continue;
        };
        let top = rows.iter().map(|r| r[g]).fold(f64::NEG_INFINITY, f64::max);
        // uniform on (pg, top], so the factual sample always violates the region
        let threshold = if top > pg[g] { top - rng.gen_range(0.0..top - pg[g]) } else { top };
        out.push(CeQuestion {
            id: 0,
            sample: i,
            region: QuestionRegion::Dcopf(SolutionRegionDcopf {
                generator: net.generators[g].id.clone(),
                threshold,
            }),
            score: dev,
        });
    }
    out
}

fn uc_candidates(dataset: &SolveDataset, case: &Case) -> Vec<CeQuestion> {
    let Case::Uc(uc) = case else {
        return Vec::new();
    };
    let flat: Vec<Vec<f64>> = dataset
        .samples
        .iter()
        .filter_map(|s| s.commitment())
        .map(|u| u.iter().flatten().map(|&b| b as u8 as f64).collect())
        .collect();
    if flat.len() != dataset.len() {
        return Vec::new();
    }
    let rows: Vec<&[f64]> = flat.iter().map(Vec::as_slice).collect();
    let mean = column_means(&rows);
    let horizon = uc.horizon;
    let mut out = Vec::new();
    for (i, u) in rows.iter().enumerate() {
        let Some((k, dev)) = largest_deficit(&mean, u) else {
            continue;
        };
        out.push(CeQuestion {
            id: 0,
            sample: i,
            region: QuestionRegion::Uc(SolutionRegionUc {
                unit: uc.units[k / horizon].id.clone(),
                hour: k % horizon,
            }),
            score: dev,
        });
    }
    out
}

/// Up to `count` questions drawn without replacement from the per-sample
/// candidates, returned in sample order.
pub fn generate_questions(
    dataset: &SolveDataset,
    case: &Case,
    count: usize,
    seed: u64,
) -> Result<QuestionSet, HarnessError> {
    if dataset.is_empty() {
        return Err(HarnessError::NoSamples);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let candidates = match case {
        Case::Network(_) => dcopf_candidates(dataset, case, &mut rng),
        Case::Uc(_) => uc_candidates(dataset, case),
    };
    let total = candidates.len();
    if total == 0 {
        return Ok(QuestionSet {
            questions: Vec::new(),
            candidates: 0,
            diagnostic: Some("no sample has a generator or unit below its dataset mean".into()),
        });
    }
    let mut picked: Vec<usize> = if count >= total {
        (0..total).collect()
    } else {
        index::sample(&mut rng, total, count).into_vec()
    };
    picked.sort_unstable();
    let questions = picked
        .into_iter()
        .enumerate()
        .map(|(id, k)| CeQuestion {
            id,
            ..candidates[k].clone()
        })
        .collect();
    Ok(QuestionSet {
        questions,
        candidates: total,
        diagnostic: None,
    })
}
