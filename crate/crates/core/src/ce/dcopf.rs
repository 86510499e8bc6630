//! Counterfactual demand for dispatch questions through the KKT conditions of the DCOPF.

use std::collections::BTreeSet;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{CeConfig, CeError, CeResult, CeStatus, Counterfactual, Method, SolutionRegionDcopf, Verification};
use crate::case::{DemandScenario, NetworkCase, ScenarioKind};
use crate::dataset::SolveDataset;
use crate::dcopf::{add_dcopf, solve_dcopf_with, solve_dcopf_with_floor, DcopfMap, Inequality};
use crate::solver::{solve, LinearProgram, Relation, RowId, SolveOptions, SolveStatus, Term, VarId};

/// Safety factor applied to the largest recorded dual.
pub const DUAL_SAFETY: f64 = 10.0;
/// Smallest admissible big-M value.
pub const M_FLOOR: f64 = 1.0;
/// Residual bound for the embedded KKT conditions of an accepted counterfactual.
pub const KKT_TOL: f64 = 1e-5;

/// Big-M values per inequality, in [`Inequality`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BigMTable {
    pub primal: Vec<f64>,
    pub dual: Vec<f64>,
}

/// Inequalities binding in every sample (`c1`) or in none (`c0`), by index.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ActiveSets {
    pub c1: BTreeSet<usize>,
    pub c0: BTreeSet<usize>,
}

/// Dataset-derived inputs for the `mip` and `mip+cut` methods.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DcopfHints {
    pub big_m: Option<BigMTable>,
    pub fixings: Option<ActiveSets>,
}

impl DcopfHints {
    pub fn from_dataset(dataset: &SolveDataset, case: &NetworkCase) -> Result<Self, CeError> {
        Ok(Self {
            big_m: Some(derive_big_m(dataset, case)?),
            fixings: Some(derive_active_sets(dataset)),
        })
    }
}

/// Dual M is ten times the largest recorded |dual| (at least 1); primal M is
/// the range the constraint's slack can span.
pub fn derive_big_m(dataset: &SolveDataset, case: &NetworkCase) -> Result<BigMTable, CeError> {
    if dataset.samples.iter().all(|s| s.duals().is_none()) {
        return Err(CeError::EmptyDataset);
    }
    let max = dataset.max_duals();
    let n = Inequality::count(case);
    let dual = (0..n)
        .map(|i| (DUAL_SAFETY * max.get(i).copied().unwrap_or(0.0)).max(M_FLOOR))
        .collect();
    let primal = Inequality::all(case)
        .map(|q| {
            let range = match q {
                Inequality::LineLower(l) | Inequality::LineUpper(l) => case.lines[l].limit.map_or(0.0, |f| 2.0 * f),
                Inequality::GenLower(g) | Inequality::GenUpper(g) => {
                    case.generators[g].p_max - case.generators[g].p_min
                }
            };
            range.max(M_FLOOR)
        })
        .collect();
    Ok(BigMTable { primal, dual })
}

pub fn derive_active_sets(dataset: &SolveDataset) -> ActiveSets {
    let mut patterns = dataset.samples.iter().filter_map(|s| s.active());
    let Some(first) = patterns.next() else {
        return ActiveSets::default();
    };
    let mut always = first.to_vec();
    let mut never: Vec<bool> = first.iter().map(|a| !a).collect();
    for p in patterns {
        for (i, &a) in p.iter().enumerate().take(always.len()) {
            always[i] &= a;
            never[i] &= !a;
        }
    }
    ActiveSets {
        c1: (0..always.len()).filter(|&i| always[i]).collect(),
        c0: (0..never.len()).filter(|&i| never[i]).collect(),
    }
}

/// Variables of the single-level model.
#[derive(Debug, Clone)]
pub struct CeDcopfMap {
    pub primal: DcopfMap,
    pub theta: Vec<VarId>,
    pub up: Vec<VarId>,
    pub down: Vec<VarId>,
    /// Nodal balance duals.
    pub lambda: Vec<VarId>,
    /// Flow-definition duals.
    pub mu: Vec<VarId>,
    /// Inequality duals in [`Inequality`] order; `None` for unlimited lines.
    pub ineq_dual: Vec<Option<VarId>>,
    /// Big-M switches in [`Inequality`] order (`mip` methods only).
    pub z: Vec<Option<VarId>>,
    pub stationarity: Vec<RowId>,
    pub region: RowId,
}

#[derive(Debug, Clone)]
pub struct CeDcopfModel {
    pub lp: LinearProgram,
    pub map: CeDcopfMap,
}

/// Slack of inequality `q` as a complementarity term on the primal columns.
fn slack_term(q: Inequality, m: &DcopfMap) -> Term {
    match q {
        Inequality::LineLower(l) => Term::var_lower(m.flow[l]),
        Inequality::LineUpper(l) => Term::var_upper(m.flow[l]),
        Inequality::GenLower(g) => Term::var_lower(m.pg[g]),
        Inequality::GenUpper(g) => Term::var_upper(m.pg[g]),
    }
}

/// Builds the KKT-based single-level model for `region` and `method`.
/// `reference_pg` is the factual optimal dispatch used by the distance bound.
pub fn build_ce_dcopf(
    case: &NetworkCase,
    factual: &DemandScenario,
    reference_pg: &[f64],
    region: &SolutionRegionDcopf,
    method: Method,
    hints: &DcopfHints,
) -> Result<CeDcopfModel, CeError> {
    if !method.is_dcopf() {
        return Err(CeError::WrongMethod(method));
    }
    factual.check(ScenarioKind::DcopfNodal, case.demands.len())?;
    let target = region.resolve(case)?;
    let big_m = match method {
        Method::Sos1 => None,
        _ => Some(hints.big_m.as_ref().ok_or(CeError::MissingHints(method))?),
    };
    let fixings = match method {
        Method::MipCut => Some(hints.fixings.as_ref().ok_or(CeError::MissingHints(method))?),
        _ => None,
    };

    let mut lp = LinearProgram::new();
    let nd = case.demands.len();
    let primal = add_dcopf(&mut lp, case, &vec![0.0; nd]);
    for &v in &primal.pg {
        lp.set_cost(v, 0.0);
    }
    // demand becomes a variable: sum(pg) - flows - sum(theta at bus) = 0
    let mut theta = Vec::with_capacity(nd);
    let mut up = Vec::with_capacity(nd);
    let mut down = Vec::with_capacity(nd);
    for (d, dem) in case.demands.iter().enumerate() {
        let th = lp.add_var(format!("theta_{}", dem.id), 0.0, f64::INFINITY, 0.0);
        let u = lp.add_var(format!("up_{}", dem.id), 0.0, f64::INFINITY, 1.0);
        let w = lp.add_var(format!("down_{}", dem.id), 0.0, f64::INFINITY, 1.0);
        lp.add_row(
            format!("dev_{}", dem.id),
            vec![(th, 1.0), (u, -1.0), (w, 1.0)],
            Relation::Eq,
            factual.values[d],
        );
        lp.rows[primal.balance[primal.demand_bus[d]].0].coefs.push((th, -1.0));
        theta.push(th);
        up.push(u);
        down.push(w);
    }

    let free = (f64::NEG_INFINITY, f64::INFINITY);
    let lambda: Vec<VarId> = case
        .buses
        .iter()
        .map(|b| lp.add_var(format!("lambda_{}", b.id), free.0, free.1, 0.0))
        .collect();
    let mu: Vec<VarId> = case
        .lines
        .iter()
        .map(|l| lp.add_var(format!("mu_{}", l.id), free.0, free.1, 0.0))
        .collect();
    let ineq_dual: Vec<Option<VarId>> = Inequality::all(case)
        .map(|q| {
            let limited = match q {
                Inequality::LineLower(l) | Inequality::LineUpper(l) => case.lines[l].limit.is_some(),
                _ => true,
            };
            limited.then(|| lp.add_var(format!("dual_{q:?}"), 0.0, f64::INFINITY, 0.0))
        })
        .collect();
    let dual_of = |q: Inequality| ineq_dual[q.index(case)];

    let index = case.bus_index();
    let reference = index[&case.reference()];
    let mut stationarity = Vec::new();
    for (g, gen) in case.generators.iter().enumerate() {
        let mut row = vec![(lambda[index[&gen.bus]], 1.0)];
        if let Some(v) = dual_of(Inequality::GenLower(g)) {
            row.push((v, 1.0));
        }
        if let Some(v) = dual_of(Inequality::GenUpper(g)) {
            row.push((v, -1.0));
        }
        stationarity.push(lp.add_row(format!("stat_pg_{}", gen.id), row, Relation::Eq, gen.cost));
    }
    for (l, line) in case.lines.iter().enumerate() {
        let mut row = vec![(lambda[index[&line.from]], 1.0), (lambda[index[&line.to]], -1.0), (mu[l], -1.0)];
        if let Some(v) = dual_of(Inequality::LineLower(l)) {
            row.push((v, -1.0));
        }
        if let Some(v) = dual_of(Inequality::LineUpper(l)) {
            row.push((v, 1.0));
        }
        stationarity.push(lp.add_row(format!("stat_pl_{}", line.id), row, Relation::Eq, 0.0));
    }
    let base = case.meta.base_mva;
    for (n, bus) in case.buses.iter().enumerate() {
        if n == reference {
            continue;
        }
        let mut row = Vec::new();
        for (l, line) in case.lines.iter().enumerate() {
            let k = base * line.susceptance;
            if index[&line.from] == n {
                row.push((mu[l], k));
            }
            if index[&line.to] == n {
                row.push((mu[l], -k));
            }
        }
        stationarity.push(lp.add_row(format!("stat_delta_{}", bus.id), row, Relation::Eq, 0.0));
    }

    let mut z = vec![None; Inequality::count(case)];
    for q in Inequality::all(case) {
        let i = q.index(case);
        let Some(dual) = ineq_dual[i] else { continue };
        let slack = slack_term(q, &primal);
        match big_m {
            None => lp.add_pair(Term::var_lower(dual), slack),
            Some(table) => {
                let zi = lp.add_binary(format!("z_{q:?}"), 0.0);
                let (md, mp) = (table.dual[i], table.primal[i]);
                lp.add_row(format!("bigm_dual_{q:?}"), vec![(dual, 1.0), (zi, -md)], Relation::Le, 0.0);
                // slack + mp*z <= mp, written on the primal column
                let (col, sign, offset) = match slack {
                    Term::Var(v, crate::solver::Side::Lower) => (v, 1.0, -lp.vars[v.0].lower),
                    Term::Var(v, _) => (v, -1.0, lp.vars[v.0].upper),
                    Term::Row(..) => unreachable!("slacks are column bounds"),
                };
                lp.add_row(
                    format!("bigm_slack_{q:?}"),
                    vec![(col, sign), (zi, mp)],
                    Relation::Le,
                    mp - offset,
                );
                if let Some(f) = fixings {
                    if f.c1.contains(&i) {
                        lp.set_bounds(zi, 1.0, 1.0);
                    } else if f.c0.contains(&i) {
                        lp.set_bounds(zi, 0.0, 0.0);
                    }
                }
                z[i] = Some(zi);
            }
        }
    }

    let region_row = lp.add_row("region", vec![(primal.pg[target], 1.0)], Relation::Ge, region.threshold);

    // ||theta - factual||_1 <= ||pg - pg0||_1 over split dispatch deviations
    let mut bound_row: Vec<(VarId, f64)> = up.iter().chain(&down).map(|&v| (v, 1.0)).collect();
    for (g, gen) in case.generators.iter().enumerate() {
        let a = lp.add_var(format!("dpg_up_{}", gen.id), 0.0, f64::INFINITY, 0.0);
        let b = lp.add_var(format!("dpg_down_{}", gen.id), 0.0, f64::INFINITY, 0.0);
        lp.add_row(
            format!("dpg_{}", gen.id),
            vec![(primal.pg[g], 1.0), (a, -1.0), (b, 1.0)],
            Relation::Eq,
            reference_pg[g],
        );
        bound_row.push((a, -1.0));
        bound_row.push((b, -1.0));
    }
    lp.add_row("distance_bound", bound_row, Relation::Le, 0.0);

    Ok(CeDcopfModel {
        lp,
        map: CeDcopfMap {
            primal,
            theta,
            up,
            down,
            lambda,
            mu,
            ineq_dual,
            z,
            stationarity,
            region: region_row,
        },
    })
}

/// Largest stationarity and complementarity residuals of the embedded lower level.
pub fn kkt_residuals(model: &CeDcopfModel, case: &NetworkCase, x: &[f64]) -> (f64, f64) {
    let lp = &model.lp;
    let stat = model
        .map
        .stationarity
        .iter()
        .map(|r| {
            let row = &lp.rows[r.0];
            (lp.row_activity(*r, x) - row.lower).abs()
        })
        .fold(0.0, f64::max);
    let comp = Inequality::all(case)
        .filter_map(|q| {
            let dual = model.map.ineq_dual[q.index(case)]?;
            let slack = lp.term_value(slack_term(q, &model.map.primal), x).max(0.0);
            Some(x[dual.0].max(0.0).min(slack))
        })
        .fold(0.0, f64::max);
    (stat, comp)
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Minimal l1 change of the nodal demands under which some optimal dispatch
/// puts `region.generator` at or above `region.threshold`.
pub fn explain_dcopf(
    case: &NetworkCase,
    factual: &DemandScenario,
    region: &SolutionRegionDcopf,
    method: Method,
    hints: &DcopfHints,
    config: &CeConfig,
) -> Result<CeResult, CeError> {
    let started = Instant::now();
    let target = region.resolve(case)?;
    let base = solve_dcopf_with(case, factual, &config.tol)?;
    if !base.is_optimal() {
        return Err(CeError::FactualNotOptimal(format!("{:?}", base.status)));
    }
    if base.pg[target] >= region.threshold {
        let mut r = CeResult::without_solution(CeStatus::Optimal, method, 0.0, 0.0)
            .with_theta(factual, factual.clone());
        r.counterfactual = Some(Counterfactual::Dispatch(base.clone()));
        r.verification = Some(Verification {
            passed: true,
            objective: base.objective,
            objective_in_region: base.objective,
            stationarity: None,
            complementarity: None,
            demand_change: 0.0,
            dispatch_change: 0.0,
            notes: vec!["region satisfied by the factual dispatch".into()],
        });
        r.runtime_s = started.elapsed().as_secs_f64();
        return Ok(r);
    }

    let model = build_ce_dcopf(case, factual, &base.pg, region, method, hints)?;
    let opts = SolveOptions {
        tol: config.tol,
        time_limit: config.time_limit.map(|t| t.saturating_sub(started.elapsed())),
        node_limit: None,
    };
    let out = solve(&model.lp, &opts)?;
    let status = match out.status {
        SolveStatus::Optimal => CeStatus::Optimal,
        SolveStatus::Infeasible if method == Method::MipCut => CeStatus::HeuristicInfeasible,
        SolveStatus::Infeasible => CeStatus::Infeasible,
        _ => CeStatus::Timeout,
    };
    if status != CeStatus::Optimal {
        let mut r = CeResult::without_solution(status, method, out.bound, started.elapsed().as_secs_f64());
        r.nodes = out.nodes;
        if out.has_solution() {
            let theta = DemandScenario::nodal(model.map.theta.iter().map(|v| out.x[v.0].max(0.0)).collect());
            r = r.with_theta(factual, theta);
        }
        return Ok(r);
    }

    let theta = DemandScenario::nodal(model.map.theta.iter().map(|v| out.x[v.0].max(0.0)).collect());
    let (stat, comp) = kkt_residuals(&model, case, &out.x);
    let pg_ce: Vec<f64> = model.map.primal.pg.iter().map(|v| out.x[v.0]).collect();
    let free = solve_dcopf_with(case, &theta, &config.tol)?;
    let within = solve_dcopf_with_floor(case, &theta, target, region.threshold, &config.tol)?;
    let mut notes = Vec::new();
    let mut passed = free.is_optimal() && within.is_optimal();
    if passed {
        let gap = (free.objective - within.objective).abs();
        if gap > config.tol.opt * free.objective.abs().max(1.0) {
            passed = false;
            notes.push(format!("region costs {gap} more than the unconstrained optimum"));
        }
    } else {
        notes.push("re-solve at the counterfactual demand is not optimal".into());
    }
    if stat > KKT_TOL || comp > KKT_TOL {
        passed = false;
        notes.push(format!("kkt residuals: stationarity {stat:e}, complementarity {comp:e}"));
    }
    let demand_change = theta.distance(factual);
    let dispatch_change = l1(&pg_ce, &base.pg);
    let verification = Verification {
        passed,
        objective: free.objective,
        objective_in_region: within.objective,
        stationarity: Some(stat),
        complementarity: Some(comp),
        demand_change,
        dispatch_change,
        notes,
    };
    let mut r = CeResult::without_solution(CeStatus::Optimal, method, out.bound, 0.0).with_theta(factual, theta);
    r.counterfactual = Some(Counterfactual::Dispatch(within));
    r.verification = Some(verification);
    r.nodes = out.nodes;
    r.iterations = out.iterations;
    r.runtime_s = started.elapsed().as_secs_f64();
    Ok(r)
}
