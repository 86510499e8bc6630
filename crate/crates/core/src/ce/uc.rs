//! Counterfactual hourly demand for commitment questions by master/subproblem decomposition.
//!
//! The master chooses a demand profile and a schedule that commits the asked
//! unit. Every commitment pattern found by the subproblem so far adds a block
//! holding that pattern's economic dispatch (with penalised balance slack) and
//! its KKT conditions, so the block value is the pattern's true optimal cost at
//! the master's demand. The master schedule must be no more expensive than any
//! block. The loop stops once the subproblem confirms the master schedule is
//! optimal for the lower level.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{CeConfig, CeError, CeResult, CeStatus, Counterfactual, IterationRecord, Method, SolutionRegionUc, Verification};
use crate::case::{DemandScenario, ScenarioKind, UcCase};
use crate::dataset::SolveDataset;
use crate::solver::{solve, LinearProgram, Relation, SolveOptions, SolveStatus, Term, Tolerances, VarId};
use crate::uc::{add_uc, commitment_cost, solve_uc_with, Commitment, DemandExpr, UcMap, UcSchedule};

/// Multiplier of the elastic-balance penalty: `rho = 10 * max(c1) * sum(p_max)`.
pub const RHO_FACTOR: f64 = 10.0;

pub fn elastic_penalty(case: &UcCase) -> f64 {
    let c1 = case.units.iter().map(|u| u.c1).fold(0.0, f64::max);
    RHO_FACTOR * c1 * case.total_capacity()
}

/// Commitment entries `(unit, hour)` that never change across a dataset.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FixedBinaries {
    pub b1: BTreeSet<(usize, usize)>,
    pub b0: BTreeSet<(usize, usize)>,
}

/// Entries on (`b1`) or off (`b0`) in every sample. The asked entry, when
/// given, is dropped from `b0` so the region stays reachable.
pub fn derive_fixed_binaries(dataset: &SolveDataset, region: Option<(usize, usize)>) -> FixedBinaries {
    let mut mats = dataset.samples.iter().filter_map(|s| s.commitment());
    let Some(first) = mats.next() else {
        return FixedBinaries::default();
    };
    let mut on: Vec<Vec<bool>> = first.clone();
    let mut off: Vec<Vec<bool>> = first.iter().map(|r| r.iter().map(|x| !x).collect()).collect();
    for u in mats {
        for (g, row) in u.iter().enumerate().take(on.len()) {
            for (t, &x) in row.iter().enumerate().take(on[g].len()) {
                on[g][t] &= x;
                off[g][t] &= !x;
            }
        }
    }
    let mut out = FixedBinaries::default();
    for g in 0..on.len() {
        for t in 0..on[g].len() {
            if on[g][t] {
                out.b1.insert((g, t));
            } else if off[g][t] {
                out.b0.insert((g, t));
            }
        }
    }
    if let Some(r) = region {
        out.b0.remove(&r);
    }
    out
}

/// Dataset-derived inputs for `decomp+cut`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct UcHints {
    pub fixed: Option<FixedBinaries>,
    /// Upper bound on the distance, from the kNN1 baseline.
    pub distance_bound: Option<f64>,
}

/// Deduplicated commitment patterns already added to the master.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EnumeratedPatternSet {
    pub patterns: Vec<Commitment>,
}

impl EnumeratedPatternSet {
    /// Adds a pattern; false when it was already present.
    pub fn insert(&mut self, u: Commitment) -> bool {
        if self.patterns.contains(&u) {
            return false;
        }
        self.patterns.push(u);
        true
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }
}

/// A small LP whose rows may carry master variables on the right-hand side:
/// `lower <= coefs . y - param . theta <= upper`.
struct BlockLp {
    cols: Vec<(String, f64, f64, f64)>,
    rows: Vec<BlockRow>,
}

struct BlockRow {
    name: String,
    coefs: Vec<(usize, f64)>,
    param: Vec<(VarId, f64)>,
    lower: f64,
    upper: f64,
}

/// Adds the block's primal columns and rows to `lp` together with its
/// stationarity rows and one complementarity pair per finite bound.
/// Returns the primal columns.
fn embed_kkt(lp: &mut LinearProgram, prefix: &str, block: &BlockLp) -> Vec<VarId> {
    let cols: Vec<VarId> = block
        .cols
        .iter()
        .map(|(name, lo, hi, _)| lp.add_var(format!("{prefix}_{name}"), *lo, *hi, 0.0))
        .collect();
    let mut stat: Vec<Vec<(VarId, f64)>> = vec![Vec::new(); cols.len()];
    for row in &block.rows {
        let mut coefs: Vec<(VarId, f64)> = row.coefs.iter().map(|&(j, c)| (cols[j], c)).collect();
        coefs.extend(row.param.iter().map(|&(v, c)| (v, -c)));
        let r = lp.add_ranged_row(format!("{prefix}_{}", row.name), coefs, row.lower, row.upper);
        if row.lower == row.upper {
            let a = lp.add_var(format!("{prefix}_dual_{}", row.name), f64::NEG_INFINITY, f64::INFINITY, 0.0);
            for &(j, c) in &row.coefs {
                stat[j].push((a, c));
            }
            continue;
        }
        if row.lower.is_finite() {
            let a = lp.add_var(format!("{prefix}_duallo_{}", row.name), 0.0, f64::INFINITY, 0.0);
            for &(j, c) in &row.coefs {
                stat[j].push((a, c));
            }
            lp.add_pair(Term::var_lower(a), Term::row_lower(r));
        }
        if row.upper.is_finite() {
            let a = lp.add_var(format!("{prefix}_dualhi_{}", row.name), 0.0, f64::INFINITY, 0.0);
            for &(j, c) in &row.coefs {
                stat[j].push((a, -c));
            }
            lp.add_pair(Term::var_lower(a), Term::row_upper(r));
        }
    }
    for (j, (name, lo, hi, cost)) in block.cols.iter().enumerate() {
        if lo.is_finite() {
            let b = lp.add_var(format!("{prefix}_blo_{name}"), 0.0, f64::INFINITY, 0.0);
            stat[j].push((b, 1.0));
            lp.add_pair(Term::var_lower(b), Term::var_lower(cols[j]));
        }
        if hi.is_finite() {
            let b = lp.add_var(format!("{prefix}_bhi_{name}"), 0.0, f64::INFINITY, 0.0);
            stat[j].push((b, -1.0));
            lp.add_pair(Term::var_lower(b), Term::var_upper(cols[j]));
        }
        let row = std::mem::take(&mut stat[j]);
        lp.add_row(format!("{prefix}_stat_{name}"), row, Relation::Eq, *cost);
    }
    cols
}

/// Economic dispatch for a fixed commitment with elastic balance, demand
/// given by `theta`. `None` when the pattern's ramp limits alone are infeasible.
fn pattern_block(case: &UcCase, v: &Commitment, theta: &[VarId], rho: f64) -> Option<(BlockLp, Vec<(usize, f64)>)> {
    let horizon = case.horizon;
    let mut cols = Vec::new();
    let mut cost_terms = Vec::new();
    let mut col_of = vec![vec![None; horizon]; case.units.len()];
    for (g, unit) in case.units.iter().enumerate() {
        for t in 0..horizon {
            if v[g][t] {
                col_of[g][t] = Some(cols.len());
                cost_terms.push((cols.len(), unit.c1));
                cols.push((format!("y_{}_{t}", unit.id), unit.p_min, unit.p_max, unit.c1));
            }
        }
    }
    let mut rows = Vec::new();
    for t in 0..horizon {
        let up = cols.len();
        cols.push((format!("sup_{t}"), 0.0, f64::INFINITY, rho));
        let down = cols.len();
        cols.push((format!("sdown_{t}"), 0.0, f64::INFINITY, rho));
        cost_terms.push((up, rho));
        cost_terms.push((down, rho));
        let mut coefs: Vec<(usize, f64)> = (0..case.units.len()).filter_map(|g| col_of[g][t].map(|j| (j, 1.0))).collect();
        coefs.push((up, 1.0));
        coefs.push((down, -1.0));
        rows.push(BlockRow {
            name: format!("balance_{t}"),
            coefs,
            param: vec![(theta[t], 1.0)],
            lower: 0.0,
            upper: 0.0,
        });
    }
    for (g, unit) in case.units.iter().enumerate() {
        let init = &case.initial_state[g];
        for t in 0..horizon {
            // p_t - p_{t-1} within [-ramp_down, ramp_up]; off hours contribute zero
            let mut coefs = Vec::new();
            let mut constant = 0.0;
            if let Some(j) = col_of[g][t] {
                coefs.push((j, 1.0));
            }
            if t > 0 {
                if let Some(j) = col_of[g][t - 1] {
                    coefs.push((j, -1.0));
                }
            } else if init.on {
                constant = -init.output;
            } else {
                continue;
            }
            let (lo, hi) = (-unit.ramp_down - constant, unit.ramp_up - constant);
            if coefs.is_empty() {
                if lo > 1e-9 || hi < -1e-9 {
                    return None;
                }
                continue;
            }
            rows.push(BlockRow {
                name: format!("ramp_{}_{t}", unit.id),
                coefs,
                param: Vec::new(),
                lower: lo,
                upper: hi,
            });
        }
    }
    Some((BlockLp { cols, rows }, cost_terms))
}

struct Master {
    lp: LinearProgram,
    theta: Vec<VarId>,
    up: Vec<VarId>,
    down: Vec<VarId>,
    uc: UcMap,
}

fn build_master(
    case: &UcCase,
    factual: &DemandScenario,
    reference_p: &[Vec<f64>],
    target: (usize, usize),
    patterns: &EnumeratedPatternSet,
    hints: Option<&UcHints>,
) -> Master {
    let horizon = case.horizon;
    let mut lp = LinearProgram::new();
    let mut theta = Vec::with_capacity(horizon);
    let mut up = Vec::with_capacity(horizon);
    let mut down = Vec::with_capacity(horizon);
    for t in 0..horizon {
        let th = lp.add_var(format!("theta_{t}"), 0.0, f64::INFINITY, 0.0);
        let a = lp.add_var(format!("up_{t}"), 0.0, f64::INFINITY, 1.0);
        let b = lp.add_var(format!("down_{t}"), 0.0, f64::INFINITY, 1.0);
        lp.add_row(format!("dev_{t}"), vec![(th, 1.0), (a, -1.0), (b, 1.0)], Relation::Eq, factual.values[t]);
        theta.push(th);
        up.push(a);
        down.push(b);
    }
    let demand: Vec<DemandExpr> = theta
        .iter()
        .map(|&v| DemandExpr {
            terms: vec![(v, 1.0)],
            constant: 0.0,
        })
        .collect();
    let uc = add_uc(&mut lp, case, &demand, false);
    lp.set_bounds(uc.u[target.0][target.1], 1.0, 1.0);

    let mut distance: Vec<(VarId, f64)> = up.iter().chain(&down).map(|&v| (v, 1.0)).collect();
    if let Some(h) = hints {
        if let Some(fixed) = &h.fixed {
            for &(g, t) in &fixed.b1 {
                lp.set_bounds(uc.u[g][t], 1.0, 1.0);
            }
            for &(g, t) in &fixed.b0 {
                if (g, t) != target {
                    lp.set_bounds(uc.u[g][t], 0.0, 0.0);
                }
            }
        }
        if let Some(bound) = h.distance_bound {
            lp.add_row("knn1_bound", distance.clone(), Relation::Le, bound + 1e-6 * bound.max(1.0));
        }
    }

    // ||theta - factual||_1 <= ||P - P0||_1 over split output deviations
    for (g, unit) in case.units.iter().enumerate() {
        for t in 0..horizon {
            let a = lp.add_var(format!("dp_up_{}_{t}", unit.id), 0.0, f64::INFINITY, 0.0);
            let b = lp.add_var(format!("dp_down_{}_{t}", unit.id), 0.0, f64::INFINITY, 0.0);
            lp.add_row(
                format!("dp_{}_{t}", unit.id),
                vec![(uc.p[g][t], 1.0), (a, -1.0), (b, 1.0)],
                Relation::Eq,
                reference_p[g][t],
            );
            distance.push((a, -1.0));
            distance.push((b, -1.0));
        }
    }
    lp.add_row("distance_bound", distance, Relation::Le, 0.0);

    let rho = elastic_penalty(case);
    let own_cost = uc.cost_terms(case);
    for (k, v) in patterns.patterns.iter().enumerate() {
        let Some((block, cost_terms)) = pattern_block(case, v, &theta, rho) else { continue };
        let cols = embed_kkt(&mut lp, &format!("v{k}"), &block);
        // own cost - block cost <= fixed cost of v
        let mut row = own_cost.clone();
        row.extend(cost_terms.iter().map(|&(j, c)| (cols[j], -c)));
        lp.add_row(format!("optimality_v{k}"), row, Relation::Le, commitment_cost(case, v));
    }
    Master {
        lp,
        theta,
        up,
        down,
        uc,
    }
}

/// Result of one master solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MasterSolution {
    pub status: SolveStatus,
    pub theta: Option<DemandScenario>,
    pub distance: f64,
    /// Proven lower bound on the distance under the current patterns.
    pub bound: f64,
    pub p: Vec<Vec<f64>>,
    pub u: Commitment,
    /// Operating cost of the master's schedule.
    pub cost: f64,
    pub nodes: usize,
    pub seconds: f64,
}

/// Solves the decomposition master for the given patterns.
pub fn decomp_master(
    case: &UcCase,
    factual: &DemandScenario,
    reference_p: &[Vec<f64>],
    region: &SolutionRegionUc,
    patterns: &EnumeratedPatternSet,
    hints: Option<&UcHints>,
    tol: &Tolerances,
    time_limit: Option<Duration>,
) -> Result<MasterSolution, CeError> {
    let g = region.resolve(case)?;
    factual.check(ScenarioKind::UcHourly, case.horizon)?;
    let m = build_master(case, factual, reference_p, (g, region.hour), patterns, hints);
    let out = solve(
        &m.lp,
        &SolveOptions {
            tol: *tol,
            time_limit,
            node_limit: None,
        },
    )?;
    if !out.has_solution() || out.status != SolveStatus::Optimal {
        return Ok(MasterSolution {
            status: out.status,
            theta: None,
            distance: f64::NAN,
            bound: out.bound,
            p: Vec::new(),
            u: Vec::new(),
            cost: f64::NAN,
            nodes: out.nodes,
            seconds: out.seconds,
        });
    }
    let theta = DemandScenario::hourly(m.theta.iter().map(|v| out.x[v.0].max(0.0)).collect());
    let u: Commitment = m.uc.u.iter().map(|r| r.iter().map(|v| out.x[v.0] > 0.5).collect()).collect();
    let p: Vec<Vec<f64>> = m.uc.p.iter().map(|r| r.iter().map(|v| out.x[v.0]).collect()).collect();
    let variable: f64 = case
        .units
        .iter()
        .enumerate()
        .map(|(g, unit)| unit.c1 * p[g].iter().sum::<f64>())
        .sum();
    let distance = m.up.iter().chain(&m.down).map(|v| out.x[v.0]).sum();
    Ok(MasterSolution {
        status: out.status,
        cost: variable + commitment_cost(case, &u),
        theta: Some(theta),
        distance,
        bound: out.bound,
        p,
        u,
        nodes: out.nodes,
        seconds: out.seconds,
    })
}

/// Solves the lower level exactly at `theta`: the optimal commitment and its cost.
pub fn decomp_subproblem(
    case: &UcCase,
    theta: &DemandScenario,
    tol: &Tolerances,
    time_limit: Option<Duration>,
) -> Result<UcSchedule, CeError> {
    Ok(solve_uc_with(case, theta, time_limit, tol)?)
}

fn remaining(limit: Option<Duration>, started: Instant) -> Option<Duration> {
    limit.map(|l| l.saturating_sub(started.elapsed()))
}

fn out_of_time(limit: Option<Duration>, started: Instant) -> bool {
    limit.is_some_and(|l| started.elapsed() >= l)
}

/// Minimal l1 change of the hourly profile under which some optimal schedule
/// commits `region.unit` at `region.hour`.
pub fn explain_uc(
    case: &UcCase,
    factual: &DemandScenario,
    region: &SolutionRegionUc,
    method: Method,
    hints: &UcHints,
    config: &CeConfig,
) -> Result<CeResult, CeError> {
    let started = Instant::now();
    if !matches!(method, Method::Decomp | Method::DecompCut) {
        return Err(CeError::WrongMethod(method));
    }
    let target = region.resolve(case)?;
    factual.check(ScenarioKind::UcHourly, case.horizon)?;
    let tol = config.tol;
    let base = solve_uc_with(case, factual, config.time_limit, &tol)?;
    if !base.is_optimal() {
        return Err(CeError::FactualNotOptimal(format!("{:?}", base.status)));
    }
    if base.u[target][region.hour] {
        let mut r = CeResult::without_solution(CeStatus::Optimal, method, 0.0, 0.0).with_theta(factual, factual.clone());
        r.verification = Some(Verification {
            passed: true,
            objective: base.objective,
            objective_in_region: base.objective,
            stationarity: None,
            complementarity: None,
            demand_change: 0.0,
            dispatch_change: 0.0,
            notes: vec!["unit already committed in the factual schedule".into()],
        });
        r.counterfactual = Some(Counterfactual::Schedule(base));
        r.runtime_s = started.elapsed().as_secs_f64();
        return Ok(r);
    }
    let hints = match method {
        Method::DecompCut => Some(hints),
        _ => None,
    };

    let mut patterns = EnumeratedPatternSet::default();
    let mut trace = Vec::new();
    let mut nodes = 0;
    let mut last_bound = 0.0;
    loop {
        let iteration = trace.len();
        let master = decomp_master(
            case,
            factual,
            &base.p,
            region,
            &patterns,
            hints,
            &tol,
            remaining(config.time_limit, started),
        )?;
        nodes += master.nodes;
        last_bound = f64::max(last_bound, master.bound);
        let finish = |status: CeStatus, trace: Vec<IterationRecord>| {
            let mut r = CeResult::without_solution(status, method, last_bound, started.elapsed().as_secs_f64());
            r.iterations = trace.len();
            r.trace = trace;
            r.nodes = nodes;
            r
        };
        let Some(theta) = master.theta.clone() else {
            let status = match master.status {
                SolveStatus::Infeasible if method == Method::DecompCut => CeStatus::HeuristicInfeasible,
                SolveStatus::Infeasible => CeStatus::Infeasible,
                _ => CeStatus::Timeout,
            };
            return Ok(finish(status, trace));
        };
        let sub_started = Instant::now();
        let sub = decomp_subproblem(case, &theta, &tol, remaining(config.time_limit, started))?;
        let sub_s = sub_started.elapsed().as_secs_f64();
        trace.push(IterationRecord {
            iteration,
            lower_bound: master.distance,
            patterns: patterns.len(),
            master_cost: master.cost,
            subproblem_cost: sub.objective,
            master_s: master.seconds,
            subproblem_s: sub_s,
        });
        if !sub.is_optimal() {
            return Ok(finish(CeStatus::Timeout, trace));
        }
        if master.cost <= sub.objective + tol.opt * sub.objective.abs().max(1.0) {
            let mut r = finish(CeStatus::Optimal, trace).with_theta(factual, theta.clone());
            r.bound = master.distance;
            let dispatch_change = master
                .p
                .iter()
                .zip(&base.p)
                .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
                .sum();
            let (verification, schedule) =
                verify(case, &theta, target, region.hour, r.distance, dispatch_change, &sub, &tol, config.time_limit)?;
            r.verification = Some(verification);
            r.counterfactual = schedule.map(Counterfactual::Schedule);
            r.runtime_s = started.elapsed().as_secs_f64();
            return Ok(r);
        }
        if !patterns.insert(sub.u.clone()) {
            // the master already holds this pattern; its cut is violated only within tolerance
            let mut r = finish(CeStatus::Timeout, trace);
            r.verification = Some(Verification {
                passed: false,
                objective: sub.objective,
                objective_in_region: master.cost,
                stationarity: None,
                complementarity: None,
                demand_change: master.distance,
                dispatch_change: f64::NAN,
                notes: vec!["subproblem returned a pattern the master already holds".into()],
            });
            return Ok(r);
        }
        if out_of_time(config.time_limit, started) {
            return Ok(finish(CeStatus::Timeout, trace));
        }
    }
}

/// Re-solves the lower level at `theta` with and without the region imposed.
#[allow(clippy::too_many_arguments)]
fn verify(
    case: &UcCase,
    theta: &DemandScenario,
    unit: usize,
    hour: usize,
    demand_change: f64,
    dispatch_change: f64,
    free: &UcSchedule,
    tol: &Tolerances,
    time_limit: Option<Duration>,
) -> Result<(Verification, Option<UcSchedule>), CeError> {
    let model = crate::uc::build_uc(case, theta)?;
    let mut lp = model.lp;
    lp.set_bounds(model.map.u[unit][hour], 1.0, 1.0);
    let out = crate::solver::solve_milp(&lp, tol, time_limit)?;
    let within = crate::uc::extract_schedule(case, &model.map, &out);
    let mut notes = Vec::new();
    let mut passed = within.is_optimal() && free.is_optimal();
    if passed {
        let gap = within.objective - free.objective;
        if gap.abs() > tol.opt * free.objective.abs().max(1.0) {
            passed = false;
            notes.push(format!("committing the unit costs {gap} more than the optimum"));
        }
    } else {
        notes.push("re-solve at the counterfactual profile is not optimal".into());
    }
    let verification = Verification {
        passed,
        objective: free.objective,
        objective_in_region: within.objective,
        stationarity: None,
        complementarity: None,
        demand_change,
        dispatch_change,
        notes,
    };
    Ok((verification, within.is_optimal().then_some(within)))
}
