//! DC optimal power flow: model construction, solution and dual extraction.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::case::{DemandScenario, NetworkCase, ScenarioError, ScenarioKind};
use crate::solver::{
    solve_lp, LinearProgram, Relation, RowId, SolveStatus, SolverError, Tolerances, VarId,
};

/// Slack below which an inequality counts as binding, in MW.
pub const ACTIVE_TOL: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DcopfError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// Where each quantity of the network lives inside the LP.
#[derive(Debug, Clone)]
pub struct DcopfMap {
    pub pg: Vec<VarId>,
    pub flow: Vec<VarId>,
    pub angle: Vec<VarId>,
    pub balance: Vec<RowId>,
    pub flow_def: Vec<RowId>,
    /// Bus index of every demand.
    pub demand_bus: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct DcopfModel {
    pub lp: LinearProgram,
    pub map: DcopfMap,
}

/// Inequality layout shared by the active set, big-M tables and datasets:
/// per line (lower, upper), then per generator (lower, upper).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Inequality {
    LineLower(usize),
    LineUpper(usize),
    GenLower(usize),
    GenUpper(usize),
}

impl Inequality {
    pub fn count(case: &NetworkCase) -> usize {
        2 * case.lines.len() + 2 * case.generators.len()
    }

    pub fn index(self, case: &NetworkCase) -> usize {
        let nl = case.lines.len();
        match self {
            Inequality::LineLower(l) => 2 * l,
            Inequality::LineUpper(l) => 2 * l + 1,
            Inequality::GenLower(g) => 2 * nl + 2 * g,
            Inequality::GenUpper(g) => 2 * nl + 2 * g + 1,
        }
    }

    pub fn from_index(i: usize, case: &NetworkCase) -> Self {
        let nl = case.lines.len();
        if i < 2 * nl {
            if i % 2 == 0 {
                Inequality::LineLower(i / 2)
            } else {
                Inequality::LineUpper(i / 2)
            }
        } else {
            let k = i - 2 * nl;
            if k % 2 == 0 {
                Inequality::GenLower(k / 2)
            } else {
                Inequality::GenUpper(k / 2)
            }
        }
    }

    pub fn all(case: &NetworkCase) -> impl Iterator<Item = Inequality> + '_ {
        (0..Self::count(case)).map(move |i| Self::from_index(i, case))
    }
}

/// Optimal dispatch with flows, angles, duals and the active set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchSolution {
    pub status: SolveStatus,
    pub pg: Vec<f64>,
    pub flow: Vec<f64>,
    pub angle: Vec<f64>,
    /// Nodal balance duals (locational prices), $/MW.
    pub lmp: Vec<f64>,
    /// Flow-definition duals, $/MW.
    pub kvl: Vec<f64>,
    pub line_lower: Vec<f64>,
    pub line_upper: Vec<f64>,
    pub gen_lower: Vec<f64>,
    pub gen_upper: Vec<f64>,
    pub objective: f64,
    /// Binding indicator per inequality, in [`Inequality`] order.
    pub active: Vec<bool>,
}

impl DispatchSolution {
    fn failed(status: SolveStatus) -> Self {
        Self {
            status,
            pg: Vec::new(),
            flow: Vec::new(),
            angle: Vec::new(),
            lmp: Vec::new(),
            kvl: Vec::new(),
            line_lower: Vec::new(),
            line_upper: Vec::new(),
            gen_lower: Vec::new(),
            gen_upper: Vec::new(),
            objective: f64::NAN,
            active: Vec::new(),
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    /// Dual of inequality `i`, non-negative at optimality.
    pub fn inequality_dual(&self, i: Inequality) -> f64 {
        match i {
            Inequality::LineLower(l) => self.line_lower[l],
            Inequality::LineUpper(l) => self.line_upper[l],
            Inequality::GenLower(g) => self.gen_lower[g],
            Inequality::GenUpper(g) => self.gen_upper[g],
        }
    }

    pub fn congested_lines(&self) -> Vec<usize> {
        let nl = self.flow.len();
        (0..nl).filter(|&l| self.active[2 * l] || self.active[2 * l + 1]).collect()
    }
}

/// Adds the DCOPF variables and rows to `lp`. Balance right-hand sides are the
/// given demands; callers that treat demand as a variable rewrite them.
pub fn add_dcopf(lp: &mut LinearProgram, case: &NetworkCase, demand: &[f64]) -> DcopfMap {
    let index = case.bus_index();
    let reference = index[&case.reference()];
    let pg: Vec<VarId> = case
        .generators
        .iter()
        .map(|g| lp.add_var(format!("pg_{}", g.id), g.p_min, g.p_max, g.cost))
        .collect();
    let flow: Vec<VarId> = case
        .lines
        .iter()
        .map(|l| {
            let lim = l.limit.unwrap_or(f64::INFINITY);
            lp.add_var(format!("pl_{}", l.id), -lim, lim, 0.0)
        })
        .collect();
    let angle: Vec<VarId> = case
        .buses
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let (lo, hi) = if i == reference {
                (0.0, 0.0)
            } else {
                (f64::NEG_INFINITY, f64::INFINITY)
            };
            lp.add_var(format!("delta_{}", b.id), lo, hi, 0.0)
        })
        .collect();
    let demand_bus: Vec<usize> = case.demands.iter().map(|d| index[&d.bus]).collect();
    let mut load = vec![0.0; case.buses.len()];
    for (d, &n) in demand.iter().zip(&demand_bus) {
        load[n] += d;
    }
    let mut coefs: Vec<Vec<(VarId, f64)>> = vec![Vec::new(); case.buses.len()];
    for (g, gen) in case.generators.iter().enumerate() {
        coefs[index[&gen.bus]].push((pg[g], 1.0));
    }
    for (l, line) in case.lines.iter().enumerate() {
        coefs[index[&line.from]].push((flow[l], -1.0));
        coefs[index[&line.to]].push((flow[l], 1.0));
    }
    let balance: Vec<RowId> = coefs
        .into_iter()
        .enumerate()
        .map(|(n, c)| lp.add_row(format!("kcl_{}", case.buses[n].id), c, Relation::Eq, load[n]))
        .collect();
    let base = case.meta.base_mva;
    let flow_def: Vec<RowId> = case
        .lines
        .iter()
        .enumerate()
        .map(|(l, line)| {
            let k = base * line.susceptance;
            lp.add_row(
                format!("kvl_{}", line.id),
                vec![
                    (flow[l], 1.0),
                    (angle[index[&line.from]], -k),
                    (angle[index[&line.to]], k),
                ],
                Relation::Eq,
                0.0,
            )
        })
        .collect();
    DcopfMap {
        pg,
        flow,
        angle,
        balance,
        flow_def,
        demand_bus,
    }
}

pub fn build_dcopf(case: &NetworkCase, demand: &DemandScenario) -> Result<DcopfModel, DcopfError> {
    demand.check(ScenarioKind::DcopfNodal, case.demands.len())?;
    let mut lp = LinearProgram::new();
    let map = add_dcopf(&mut lp, case, &demand.values);
    Ok(DcopfModel { lp, map })
}

pub fn solve_dcopf(case: &NetworkCase, demand: &DemandScenario) -> Result<DispatchSolution, DcopfError> {
    solve_dcopf_with(case, demand, &Tolerances::default())
}

pub fn solve_dcopf_with(
    case: &NetworkCase,
    demand: &DemandScenario,
    tol: &Tolerances,
) -> Result<DispatchSolution, DcopfError> {
    let model = build_dcopf(case, demand)?;
    solve_model(case, &model, tol)
}

/// Solves the DCOPF with the extra requirement `pg[generator] >= floor`.
pub fn solve_dcopf_with_floor(
    case: &NetworkCase,
    demand: &DemandScenario,
    generator: usize,
    floor: f64,
    tol: &Tolerances,
) -> Result<DispatchSolution, DcopfError> {
    let mut model = build_dcopf(case, demand)?;
    let pg = model.map.pg[generator];
    model.lp.add_row("region", vec![(pg, 1.0)], Relation::Ge, floor);
    solve_model(case, &model, tol)
}

fn solve_model(case: &NetworkCase, model: &DcopfModel, tol: &Tolerances) -> Result<DispatchSolution, DcopfError> {
    let out = solve_lp(&model.lp, tol)?;
    if out.status != SolveStatus::Optimal {
        return Ok(DispatchSolution::failed(out.status));
    }
    let m = &model.map;
    let pick = |ids: &[VarId]| ids.iter().map(|v| out.x[v.0]).collect::<Vec<f64>>();
    let pg = pick(&m.pg);
    let flow = pick(&m.flow);
    let angle = pick(&m.angle);
    let lmp = m.balance.iter().map(|r| out.row_duals[r.0]).collect();
    let kvl = m.flow_def.iter().map(|r| out.row_duals[r.0]).collect();
    // reduced cost d_j: positive at a lower bound, negative at an upper bound
    let split = |ids: &[VarId]| {
        let lower = ids.iter().map(|v| out.reduced_costs[v.0].max(0.0)).collect::<Vec<f64>>();
        let upper = ids.iter().map(|v| (-out.reduced_costs[v.0]).max(0.0)).collect::<Vec<f64>>();
        (lower, upper)
    };
    let (line_lower, line_upper) = split(&m.flow);
    let (gen_lower, gen_upper) = split(&m.pg);
    let mut active = Vec::with_capacity(Inequality::count(case));
    for (l, line) in case.lines.iter().enumerate() {
        let lim = line.limit.unwrap_or(f64::INFINITY);
        active.push(flow[l] + lim <= ACTIVE_TOL);
        active.push(lim - flow[l] <= ACTIVE_TOL);
    }
    for (g, gen) in case.generators.iter().enumerate() {
        active.push(pg[g] - gen.p_min <= ACTIVE_TOL);
        active.push(gen.p_max - pg[g] <= ACTIVE_TOL);
    }
    Ok(DispatchSolution {
        status: SolveStatus::Optimal,
        pg,
        flow,
        angle,
        lmp,
        kvl,
        line_lower,
        line_upper,
        gen_lower,
        gen_upper,
        objective: out.objective,
        active,
    })
}
