//! LP, MILP and complementarity solving on a built-in dense simplex.

mod branch;
mod model;
mod simplex;

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use model::{
    ComplementarityPair, Constraint, LinearProgram, Relation, RowId, Side, Term, VarId, Variable,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Primal feasibility, applied to rows scaled by their coefficient norm.
    pub feas: f64,
    /// Relative optimality gap.
    pub opt: f64,
    /// Integrality.
    pub int: f64,
    /// Complementarity: `min(a, b)` must not exceed this.
    pub comp: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            feas: 1e-6,
            opt: 1e-6,
            int: 1e-6,
            comp: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    Timeout,
    NumericalFailure,
}

/// Incumbent and global bound after a processed node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundRecord {
    pub node: usize,
    pub incumbent: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveOutcome {
    pub status: SolveStatus,
    /// Column values; empty when no solution is available.
    pub x: Vec<f64>,
    /// Row duals as objective sensitivities to the active row bound (LP only).
    pub row_duals: Vec<f64>,
    /// Reduced costs of the columns (LP only).
    pub reduced_costs: Vec<f64>,
    pub objective: f64,
    /// Best proven lower bound (equals `objective` for LPs).
    pub bound: f64,
    pub seconds: f64,
    pub nodes: usize,
    pub iterations: usize,
    pub trace: Vec<BoundRecord>,
}

impl SolveOutcome {
    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }

    pub fn has_solution(&self) -> bool {
        !self.x.is_empty()
    }

    pub(crate) fn empty(status: SolveStatus, started: Instant) -> Self {
        Self {
            status,
            x: Vec::new(),
            row_duals: Vec::new(),
            reduced_costs: Vec::new(),
            objective: f64::NAN,
            bound: f64::NEG_INFINITY,
            seconds: started.elapsed().as_secs_f64(),
            nodes: 0,
            iterations: 0,
            trace: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SolveOptions {
    pub tol: Tolerances,
    pub time_limit: Option<Duration>,
    pub node_limit: Option<usize>,
}

impl SolveOptions {
    pub fn with_time_limit(mut self, limit: Duration) -> Self {
        self.time_limit = Some(limit);
        self
    }
}

/// Seam for swapping in an external solver behind the same contract.
pub trait Backend: Send + Sync {
    fn name(&self) -> &str;
    fn solve(&self, lp: &LinearProgram, opts: &SolveOptions) -> Result<SolveOutcome, SolverError>;
}

/// Dense simplex with best-first branch-and-bound.
#[derive(Debug, Clone, Copy, Default)]
pub struct BuiltinBackend;

impl Backend for BuiltinBackend {
    fn name(&self) -> &str {
        "builtin"
    }

    fn solve(&self, lp: &LinearProgram, opts: &SolveOptions) -> Result<SolveOutcome, SolverError> {
        solve(lp, opts)
    }
}

/// Solves any supported problem: plain LP, integers, complementarity pairs or both.
pub fn solve(lp: &LinearProgram, opts: &SolveOptions) -> Result<SolveOutcome, SolverError> {
    lp.validate()?;
    if lp.has_integers() || lp.has_pairs() {
        Ok(branch::BranchAndBound::new(lp, opts).run())
    } else {
        Ok(solve_lp_unchecked(lp, &opts.tol))
    }
}

pub fn solve_lp(lp: &LinearProgram, tol: &Tolerances) -> Result<SolveOutcome, SolverError> {
    lp.validate()?;
    if lp.has_integers() || lp.has_pairs() {
        return Err(SolverError::Precondition(
            "solve_lp takes no integrality marks and no complementarity pairs".into(),
        ));
    }
    Ok(solve_lp_unchecked(lp, tol))
}

pub fn solve_milp(
    lp: &LinearProgram,
    tol: &Tolerances,
    time_limit: Option<Duration>,
) -> Result<SolveOutcome, SolverError> {
    if lp.has_pairs() {
        return Err(SolverError::Precondition(
            "solve_milp takes no complementarity pairs; encode them with big-M first".into(),
        ));
    }
    solve(lp, &SolveOptions { tol: *tol, time_limit, node_limit: None })
}

pub fn solve_with_complementarity(
    lp: &LinearProgram,
    tol: &Tolerances,
    time_limit: Option<Duration>,
) -> Result<SolveOutcome, SolverError> {
    if lp.has_integers() {
        return Err(SolverError::Precondition(
            "solve_with_complementarity takes no integrality marks".into(),
        ));
    }
    solve(lp, &SolveOptions { tol: *tol, time_limit, node_limit: None })
}

fn solve_lp_unchecked(lp: &LinearProgram, tol: &Tolerances) -> SolveOutcome {
    let started = Instant::now();
    let mut engine = simplex::Simplex::new(lp, simplex::EngineTol::default());
    let status = engine.solve();
    let mut out = match status {
        simplex::LpStatus::Optimal => {
            let n = lp.num_vars();
            let x = engine.x[..n].to_vec();
            let duals = engine.duals();
            let rc = engine.reduced_costs()[..n].to_vec();
            let obj = lp.objective_value(&x);
            SolveOutcome {
                status: SolveStatus::Optimal,
                x,
                row_duals: duals,
                reduced_costs: rc,
                objective: obj,
                bound: obj,
                seconds: 0.0,
                nodes: 0,
                iterations: engine.iterations,
                trace: Vec::new(),
            }
        }
        simplex::LpStatus::Infeasible => SolveOutcome::empty(SolveStatus::Infeasible, started),
        simplex::LpStatus::Unbounded => SolveOutcome::empty(SolveStatus::Unbounded, started),
        simplex::LpStatus::IterationLimit => SolveOutcome::empty(SolveStatus::NumericalFailure, started),
    };
    if out.status == SolveStatus::Optimal && lp.max_violation(&out.x) > tol.feas {
        out.status = SolveStatus::NumericalFailure;
    }
    out.iterations = out.iterations.max(engine.iterations);
    out.seconds = started.elapsed().as_secs_f64();
    out
}
