//! Seeded demand sampling. Draws come from one sequential stream and are solved
//! in parallel batches; acceptance follows stream order, so the recorded
//! samples do not depend on the worker count.

use std::f64::consts::PI;
use std::time::Duration;

use gridcf::case::{Case, DemandScenario, NetworkCase, UcCase};
use gridcf::dataset::{ProblemKind, Sample, SolveDataset};
use gridcf::dcopf::solve_dcopf;
use gridcf::uc::solve_uc;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::HarnessError;

/// Upper end of the uniform nodal draw, as a multiple of the default demand.
pub const DCOPF_SPREAD: f64 = 1.2;
/// Total draws allowed per requested sample before giving up.
pub const DRAWS_PER_SAMPLE: usize = 100;
/// Peak draw range, as a multiple of 0.6 x installed capacity.
pub const PEAK_RANGE: (f64, f64) = (0.6, 1.4);
pub const PEAK_SHARE: f64 = 0.6;
/// Per-hour multiplicative noise half-width.
pub const PROFILE_NOISE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileOptions {
    pub noise: bool,
    /// Limit for each sample's UC solve; timed-out draws are discarded.
    pub solve_limit: Option<Duration>,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        Self {
            noise: true,
            solve_limit: Some(Duration::from_secs(60)),
        }
    }
}

/// Daily shape with a morning and an evening peak, before scaling.
pub fn profile_shape(horizon: usize) -> Vec<f64> {
    (0..horizon)
        .map(|t| {
            let x = 2.0 * PI * t as f64 / 24.0;
            1.0 - 0.25 * x.cos() - 0.15 * (2.0 * x).cos()
        })
        .collect()
}

/// Shape times optional noise, scaled so the largest hour equals `peak`.
pub fn scaled_profile<R: Rng>(horizon: usize, peak: f64, noise: Option<&mut R>) -> Vec<f64> {
    let mut shape = profile_shape(horizon);
    if let Some(rng) = noise {
        for v in &mut shape {
            *v *= 1.0 + rng.gen_range(-PROFILE_NOISE..=PROFILE_NOISE);
        }
    }
    let top = shape.iter().copied().fold(0.0, f64::max);
    if top <= 0.0 {
        return vec![0.0; horizon];
    }
    shape.iter().map(|v| v / top * peak).collect()
}

fn run_stream<D, S>(
    requested: usize,
    mut draw: D,
    solve: S,
) -> Result<Vec<Sample>, HarnessError>
where
    D: FnMut() -> DemandScenario,
    S: Fn(&DemandScenario) -> Result<Option<Sample>, HarnessError> + Sync,
{
    if requested == 0 {
        return Err(HarnessError::NoSamples);
    }
    let budget = DRAWS_PER_SAMPLE * requested;
    let mut accepted = Vec::with_capacity(requested);
    let mut draws = 0usize;
    while accepted.len() < requested {
        if draws >= budget {
            return Err(HarnessError::TooManyInfeasible {
                requested,
                accepted: accepted.len(),
                draws,
            });
        }
        let need = requested - accepted.len();
        let batch = need.min(budget - draws);
        let thetas: Vec<DemandScenario> = (0..batch).map(|_| draw()).collect();
        let solved: Vec<Result<Option<Sample>, HarnessError>> = thetas.par_iter().map(&solve).collect();
        draws += batch;
        for s in solved {
            if let Some(sample) = s? {
                accepted.push(sample);
            }
        }
    }
    Ok(accepted)
}

/// Nodal demands drawn uniformly on `[0, 1.2 x default]`; infeasible draws are
/// discarded and redrawn.
pub fn sample_dcopf_demands(case: &NetworkCase, samples: usize, seed: u64) -> Result<SolveDataset, HarnessError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = case.default_demand().values;
    let draw = || {
        DemandScenario::nodal(
            base.iter()
                .map(|&d| if d > 0.0 { rng.gen_range(0.0..=DCOPF_SPREAD * d) } else { 0.0 })
                .collect(),
        )
    };
    let solve = |theta: &DemandScenario| {
        let sol = solve_dcopf(case, theta).map_err(|e| HarnessError::Solve(e.to_string()))?;
        Ok(sol.is_optimal().then(|| Sample::from_dispatch(theta.clone(), case, &sol)))
    };
    let recorded = run_stream(samples, draw, solve)?;
    Ok(SolveDataset {
        kind: ProblemKind::Dcopf,
        case_id: Case::Network(case.clone()).content_id(),
        case_name: case.meta.name.clone(),
        seed,
        samples: recorded,
    })
}

/// Hourly profiles: peak ~ unif(0.6, 1.4) x 0.6 x capacity on the double-peak
/// shape. Profiles without an optimal schedule are discarded.
pub fn sample_uc_profiles(
    case: &UcCase,
    samples: usize,
    seed: u64,
    options: &ProfileOptions,
) -> Result<SolveDataset, HarnessError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let capacity = case.total_capacity();
    let noise = options.noise;
    let draw = || {
        let peak = rng.gen_range(PEAK_RANGE.0..=PEAK_RANGE.1) * PEAK_SHARE * capacity;
        let values = if noise {
            scaled_profile(case.horizon, peak, Some(&mut rng))
        } else {
            scaled_profile::<ChaCha8Rng>(case.horizon, peak, None)
        };
        DemandScenario::hourly(values)
    };
    let solve = |theta: &DemandScenario| {
        let sol = solve_uc(case, theta, options.solve_limit).map_err(|e| HarnessError::Solve(e.to_string()))?;
        Ok(sol.is_optimal().then(|| Sample::from_schedule(theta.clone(), &sol)))
    };
    let recorded = run_stream(samples, draw, solve)?;
    Ok(SolveDataset {
        kind: ProblemKind::Uc,
        case_id: Case::Uc(case.clone()).content_id(),
        case_name: case.meta.name.clone(),
        seed,
        samples: recorded,
    })
}
