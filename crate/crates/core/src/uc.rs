//! Unit commitment over an hourly aggregate demand profile.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::case::{DemandScenario, ScenarioError, ScenarioKind, UcCase};
use crate::solver::{solve_milp, LinearProgram, Relation, RowId, SolveStatus, SolverError, Tolerances, VarId};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum UcError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Commitment matrix indexed `[unit][hour]`.
pub type Commitment = Vec<Vec<bool>>;

#[derive(Debug, Clone)]
pub struct UcMap {
    pub p: Vec<Vec<VarId>>,
    pub u: Vec<Vec<VarId>>,
    pub su: Vec<Vec<VarId>>,
    pub sd: Vec<Vec<VarId>>,
    pub balance: Vec<RowId>,
}

impl UcMap {
    /// `(variable, coefficient)` pairs of the operating cost.
    pub fn cost_terms(&self, case: &UcCase) -> Vec<(VarId, f64)> {
        let mut out = Vec::new();
        for (g, unit) in case.units.iter().enumerate() {
            for t in 0..case.horizon {
                out.push((self.p[g][t], unit.c1));
                out.push((self.u[g][t], unit.c0));
                out.push((self.su[g][t], unit.c_su));
                out.push((self.sd[g][t], unit.c_sd));
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct UcModel {
    pub lp: LinearProgram,
    pub map: UcMap,
}

/// Hourly demand as `sum(coef * var) + constant`, letting callers make demand a variable.
#[derive(Debug, Clone, Default)]
pub struct DemandExpr {
    pub terms: Vec<(VarId, f64)>,
    pub constant: f64,
}

impl From<f64> for DemandExpr {
    fn from(constant: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant,
        }
    }
}

/// Adds the commitment and dispatch variables and all rows of the UC model.
/// Costs are placed on the columns only when `with_cost` is set.
pub fn add_uc(lp: &mut LinearProgram, case: &UcCase, demand: &[DemandExpr], with_cost: bool) -> UcMap {
    let horizon = case.horizon;
    let ng = case.units.len();
    let mut map = UcMap {
        p: vec![Vec::with_capacity(horizon); ng],
        u: vec![Vec::with_capacity(horizon); ng],
        su: vec![Vec::with_capacity(horizon); ng],
        sd: vec![Vec::with_capacity(horizon); ng],
        balance: Vec::with_capacity(horizon),
    };
    let cost = |c: f64| if with_cost { c } else { 0.0 };
    for (g, unit) in case.units.iter().enumerate() {
        let init = &case.initial_state[g];
        // hours at the start whose state is forced by the initial minimum up/down time
        let forced_on = if init.on { unit.min_up.saturating_sub(init.hours) as usize } else { 0 };
        let forced_off = if init.on { 0 } else { unit.min_down.saturating_sub(init.hours) as usize };
        for t in 0..horizon {
            map.p[g].push(lp.add_var(format!("p_{}_{t}", unit.id), 0.0, unit.p_max, cost(unit.c1)));
            let u = lp.add_binary(format!("u_{}_{t}", unit.id), cost(unit.c0));
            if t < forced_on {
                lp.set_bounds(u, 1.0, 1.0);
            }
            if t < forced_off {
                lp.set_bounds(u, 0.0, 0.0);
            }
            map.u[g].push(u);
            map.su[g].push(lp.add_binary(format!("su_{}_{t}", unit.id), cost(unit.c_su)));
            map.sd[g].push(lp.add_binary(format!("sd_{}_{t}", unit.id), cost(unit.c_sd)));
        }
    }
    for (t, d) in demand.iter().enumerate().take(horizon) {
        let mut coefs: Vec<(VarId, f64)> = (0..ng).map(|g| (map.p[g][t], 1.0)).collect();
        coefs.extend(d.terms.iter().map(|&(v, c)| (v, -c)));
        map.balance.push(lp.add_row(format!("balance_{t}"), coefs, Relation::Eq, d.constant));
    }
    for (g, unit) in case.units.iter().enumerate() {
        let init = &case.initial_state[g];
        let (p, u, su, sd) = (&map.p[g], &map.u[g], &map.su[g], &map.sd[g]);
        for t in 0..horizon {
            let tag = format!("{}_{t}", unit.id);
            lp.add_row(format!("pmin_{tag}"), vec![(p[t], 1.0), (u[t], -unit.p_min)], Relation::Ge, 0.0);
            lp.add_row(format!("pmax_{tag}"), vec![(p[t], 1.0), (u[t], -unit.p_max)], Relation::Le, 0.0);
            if t > 0 {
                lp.add_ranged_row(
                    format!("ramp_{tag}"),
                    vec![(p[t], 1.0), (p[t - 1], -1.0)],
                    -unit.ramp_down,
                    unit.ramp_up,
                );
                lp.add_row(
                    format!("logic_{tag}"),
                    vec![(u[t], 1.0), (u[t - 1], -1.0), (su[t], -1.0), (sd[t], 1.0)],
                    Relation::Eq,
                    0.0,
                );
            } else {
                if init.on {
                    lp.add_ranged_row(
                        format!("ramp_{tag}"),
                        vec![(p[0], 1.0)],
                        init.output - unit.ramp_down,
                        init.output + unit.ramp_up,
                    );
                }
                lp.add_row(
                    format!("logic_{tag}"),
                    vec![(u[0], 1.0), (su[0], -1.0), (sd[0], 1.0)],
                    Relation::Eq,
                    if init.on { 1.0 } else { 0.0 },
                );
            }
            let up_from = (t + 1).saturating_sub(unit.min_up as usize);
            let mut row: Vec<(VarId, f64)> = (up_from..=t).map(|k| (su[k], 1.0)).collect();
            row.push((u[t], -1.0));
            lp.add_row(format!("minup_{tag}"), row, Relation::Le, 0.0);
            let down_from = (t + 1).saturating_sub(unit.min_down as usize);
            let mut row: Vec<(VarId, f64)> = (down_from..=t).map(|k| (sd[k], 1.0)).collect();
            row.push((u[t], 1.0));
            lp.add_row(format!("mindown_{tag}"), row, Relation::Le, 1.0);
        }
    }
    map
}

pub fn build_uc(case: &UcCase, profile: &DemandScenario) -> Result<UcModel, UcError> {
    profile.check(ScenarioKind::UcHourly, case.horizon)?;
    let mut lp = LinearProgram::new();
    let demand: Vec<DemandExpr> = profile.values.iter().map(|&v| v.into()).collect();
    let map = add_uc(&mut lp, case, &demand, true);
    Ok(UcModel { lp, map })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UcSchedule {
    pub status: SolveStatus,
    /// Outputs `[unit][hour]` in MW.
    pub p: Vec<Vec<f64>>,
    pub u: Commitment,
    pub su: Commitment,
    pub sd: Commitment,
    pub objective: f64,
    /// Best proven lower bound on the objective.
    pub bound: f64,
    /// Aggregate generation per hour.
    pub generation: Vec<f64>,
    pub seconds: f64,
    pub nodes: usize,
}

impl UcSchedule {
    fn failed(status: SolveStatus, bound: f64, seconds: f64, nodes: usize) -> Self {
        Self {
            status,
            p: Vec::new(),
            u: Vec::new(),
            su: Vec::new(),
            sd: Vec::new(),
            objective: f64::NAN,
            bound,
            generation: Vec::new(),
            seconds,
            nodes,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

/// Operating cost of a schedule, recomputed from its parts.
pub fn schedule_cost(case: &UcCase, p: &[Vec<f64>], u: &Commitment, su: &Commitment, sd: &Commitment) -> f64 {
    let mut total = 0.0;
    for (g, unit) in case.units.iter().enumerate() {
        for t in 0..case.horizon {
            total += unit.c1 * p[g][t];
            total += unit.c0 * u[g][t] as u8 as f64;
            total += unit.c_su * su[g][t] as u8 as f64;
            total += unit.c_sd * sd[g][t] as u8 as f64;
        }
    }
    total
}

/// Fixed cost (no-load, start-up, shut-down) implied by a commitment matrix.
pub fn commitment_cost(case: &UcCase, u: &Commitment) -> f64 {
    let mut total = 0.0;
    for (g, unit) in case.units.iter().enumerate() {
        let mut prev = case.initial_state[g].on;
        for &on in &u[g] {
            if on {
                total += unit.c0;
            }
            match (prev, on) {
                (false, true) => total += unit.c_su,
                (true, false) => total += unit.c_sd,
                _ => {}
            }
            prev = on;
        }
    }
    total
}

/// Checks the logic and minimum up/down rows of a commitment matrix on its own.
pub fn commitment_is_admissible(case: &UcCase, u: &Commitment) -> bool {
    for (g, unit) in case.units.iter().enumerate() {
        let init = &case.initial_state[g];
        let forced_on = if init.on { unit.min_up.saturating_sub(init.hours) as usize } else { 0 };
        let forced_off = if init.on { 0 } else { unit.min_down.saturating_sub(init.hours) as usize };
        let row = &u[g];
        let mut su = vec![false; row.len()];
        let mut sd = vec![false; row.len()];
        let mut prev = init.on;
        for t in 0..row.len() {
            if (t < forced_on && !row[t]) || (t < forced_off && row[t]) {
                return false;
            }
            su[t] = !prev && row[t];
            sd[t] = prev && !row[t];
            prev = row[t];
        }
        for t in 0..row.len() {
            let from = (t + 1).saturating_sub(unit.min_up as usize);
            let starts = (from..=t).filter(|&k| su[k]).count();
            if starts > row[t] as usize {
                return false;
            }
            let from = (t + 1).saturating_sub(unit.min_down as usize);
            let stops = (from..=t).filter(|&k| sd[k]).count();
            if stops + row[t] as usize > 1 {
                return false;
            }
        }
    }
    true
}

/// Start-up and shut-down indicators implied by a commitment matrix.
pub fn transitions(case: &UcCase, u: &Commitment) -> (Commitment, Commitment) {
    let mut su = Vec::with_capacity(u.len());
    let mut sd = Vec::with_capacity(u.len());
    for (g, row) in u.iter().enumerate() {
        let mut prev = case.initial_state[g].on;
        let mut a = Vec::with_capacity(row.len());
        let mut b = Vec::with_capacity(row.len());
        for &on in row {
            a.push(!prev && on);
            b.push(prev && !on);
            prev = on;
        }
        su.push(a);
        sd.push(b);
    }
    (su, sd)
}

pub fn solve_uc(case: &UcCase, profile: &DemandScenario, time_limit: Option<Duration>) -> Result<UcSchedule, UcError> {
    solve_uc_with(case, profile, time_limit, &Tolerances::default())
}

pub fn solve_uc_with(
    case: &UcCase,
    profile: &DemandScenario,
    time_limit: Option<Duration>,
    tol: &Tolerances,
) -> Result<UcSchedule, UcError> {
    let model = build_uc(case, profile)?;
    let peak = profile.values.iter().copied().fold(0.0, f64::max);
    if case.total_capacity() < peak {
        return Ok(UcSchedule::failed(SolveStatus::Infeasible, f64::INFINITY, 0.0, 0));
    }
    let out = solve_milp(&model.lp, tol, time_limit)?;
    Ok(extract_schedule(case, &model.map, &out))
}

pub(crate) fn extract_schedule(case: &UcCase, map: &UcMap, out: &crate::solver::SolveOutcome) -> UcSchedule {
    if !out.has_solution() {
        return UcSchedule::failed(out.status, out.bound, out.seconds, out.nodes);
    }
    let ng = case.units.len();
    let read = |ids: &Vec<Vec<VarId>>| -> Commitment {
        ids.iter().map(|row| row.iter().map(|v| out.x[v.0] > 0.5).collect()).collect()
    };
    let u = read(&map.u);
    let su = read(&map.su);
    let sd = read(&map.sd);
    let p: Vec<Vec<f64>> = (0..ng)
        .map(|g| {
            map.p[g]
                .iter()
                .zip(&u[g])
                .map(|(v, &on)| if on { out.x[v.0] } else { 0.0 })
                .collect()
        })
        .collect();
    let generation = (0..case.horizon).map(|t| (0..ng).map(|g| p[g][t]).sum()).collect();
    UcSchedule {
        status: out.status,
        objective: schedule_cost(case, &p, &u, &su, &sd),
        p,
        u,
        su,
        sd,
        bound: out.bound,
        generation,
        seconds: out.seconds,
        nodes: out.nodes,
    }
}
