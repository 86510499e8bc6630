//! Best-first branch-and-bound over integrality marks and complementarity pairs.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::Arc;
use std::time::Instant;

use super::model::{LinearProgram, Side, Term};
use super::simplex::{Basis, EngineTol, LpStatus, Simplex};
use super::{BoundRecord, SolveOptions, SolveOutcome, SolveStatus};

const ROOT: usize = usize::MAX;

/// Bound tightening `(column, lower, upper)` in the engine's column space,
/// where rows occupy indices `n..n + m`.
type Change = (usize, f64, f64);

struct Node {
    id: usize,
    parent: usize,
    depth: usize,
    bound: f64,
    changes: Vec<Change>,
    basis: Option<Arc<Basis>>,
}

struct Queued(Node);

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Queued {}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Queued {
    // max-heap: "greater" pops first
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .bound
            .total_cmp(&self.0.bound)
            .then(self.0.depth.cmp(&other.0.depth))
            .then(other.0.id.cmp(&self.0.id))
    }
}

pub(crate) struct BranchAndBound<'a> {
    lp: &'a LinearProgram,
    opts: SolveOptions,
    engine: Simplex,
    root_lb: Vec<f64>,
    root_ub: Vec<f64>,
}

enum Verdict {
    Feasible,
    Branch(Change, Change),
}

impl<'a> BranchAndBound<'a> {
    pub fn new(lp: &'a LinearProgram, opts: &SolveOptions) -> Self {
        let engine = Simplex::new(lp, EngineTol::default());
        let root_lb = engine.lb.clone();
        let root_ub = engine.ub.clone();
        Self {
            lp,
            opts: *opts,
            engine,
            root_lb,
            root_ub,
        }
    }

    fn apply_bounds(&mut self, changes: &[Change]) {
        self.engine.lb.copy_from_slice(&self.root_lb);
        self.engine.ub.copy_from_slice(&self.root_ub);
        for &(j, l, u) in changes {
            self.engine.lb[j] = self.engine.lb[j].max(l);
            self.engine.ub[j] = self.engine.ub[j].min(u);
        }
    }

    fn bounds_consistent(&self) -> bool {
        self.engine
            .lb
            .iter()
            .zip(&self.engine.ub)
            .all(|(l, u)| l <= u)
    }

    fn term_index(&self, t: Term) -> (usize, Side) {
        match t {
            Term::Var(v, s) => (v.0, s),
            Term::Row(r, s) => (self.lp.num_vars() + r.0, s),
        }
    }

    fn term_value(&self, t: Term) -> f64 {
        let (j, s) = self.term_index(t);
        match s {
            Side::Lower => self.engine.x[j] - self.root_lb[j],
            Side::Upper => self.root_ub[j] - self.engine.x[j],
        }
    }

    /// Change that forces the term to zero.
    fn fix_term(&self, t: Term) -> Change {
        let (j, s) = self.term_index(t);
        match s {
            Side::Lower => (j, f64::NEG_INFINITY, self.root_lb[j]),
            Side::Upper => (j, self.root_ub[j], f64::INFINITY),
        }
    }

    fn inspect(&self) -> Verdict {
        let tol = &self.opts.tol;
        let mut best: Option<(usize, f64)> = None;
        for (j, var) in self.lp.vars.iter().enumerate() {
            if !var.integer {
                continue;
            }
            let v = self.engine.x[j];
            let frac = (v - v.floor()).min(v.ceil() - v);
            if frac > tol.int && best.map_or(true, |b| frac > b.1) {
                best = Some((j, frac));
            }
        }
        if let Some((j, _)) = best {
            let v = self.engine.x[j];
            let down = (j, f64::NEG_INFINITY, v.floor());
            let up = (j, v.ceil(), f64::INFINITY);
            return if v - v.floor() <= 0.5 {
                Verdict::Branch(down, up)
            } else {
                Verdict::Branch(up, down)
            };
        }
        let mut worst: Option<(usize, f64)> = None;
        for (k, p) in self.lp.pairs.iter().enumerate() {
            let a = self.term_value(p.first);
            let b = self.term_value(p.second);
            let viol = a.min(b);
            if viol > tol.comp && worst.map_or(true, |w| viol > w.1) {
                worst = Some((k, viol));
            }
        }
        if let Some((k, _)) = worst {
            let p = self.lp.pairs[k];
            let a = self.term_value(p.first);
            let b = self.term_value(p.second);
            let fa = self.fix_term(p.first);
            let fb = self.fix_term(p.second);
            return if a <= b {
                Verdict::Branch(fa, fb)
            } else {
                Verdict::Branch(fb, fa)
            };
        }
        Verdict::Feasible
    }

    fn cutoff(&self, incumbent: f64) -> f64 {
        if incumbent.is_finite() {
            incumbent - (self.opts.tol.opt * incumbent.abs()).max(1e-9)
        } else {
            f64::INFINITY
        }
    }

    pub fn run(mut self) -> SolveOutcome {
        let started = Instant::now();
        let n = self.lp.num_vars();
        let mut heap = BinaryHeap::new();
        heap.push(Queued(Node {
            id: 0,
            parent: ROOT,
            depth: 0,
            bound: f64::NEG_INFINITY,
            changes: Vec::new(),
            basis: None,
        }));
        let mut next_id = 1usize;
        let mut last_solved = ROOT;
        let mut incumbent = f64::INFINITY;
        let mut best_x: Option<Vec<f64>> = None;
        let mut reported_bound = f64::NEG_INFINITY;
        let mut nodes = 0usize;
        let mut trace = Vec::new();
        let mut trouble = false;
        let mut timed_out = false;

        // Depth-first until the first incumbent, then best-bound.
        let mut dive: Vec<Node> = Vec::new();
        loop {
            if incumbent.is_finite() && !dive.is_empty() {
                heap.extend(dive.drain(..).map(Queued));
            }
            let node = match dive.pop() {
                Some(n) => n,
                None => match heap.pop() {
                    Some(Queued(n)) => n,
                    None => break,
                },
            };
            if node.bound >= self.cutoff(incumbent) {
                continue;
            }
            if let Some(limit) = self.opts.time_limit {
                if started.elapsed() >= limit {
                    dive.push(node);
                    timed_out = true;
                    break;
                }
            }
            if let Some(limit) = self.opts.node_limit {
                if nodes >= limit {
                    dive.push(node);
                    timed_out = true;
                    break;
                }
            }
            nodes += 1;
            self.apply_bounds(&node.changes);
            if !self.bounds_consistent() {
                continue;
            }
            let status = if node.parent == ROOT {
                self.engine.solve()
            } else if node.parent == last_solved {
                self.engine.resolve()
            } else {
                let b = node.basis.as_ref().expect("non-root nodes carry a basis");
                self.engine.load_basis(b);
                self.engine.resolve()
            };
            let status = if status == LpStatus::IterationLimit {
                self.engine.solve()
            } else {
                status
            };
            last_solved = node.id;
            match status {
                LpStatus::Optimal => {}
                LpStatus::Infeasible => {
                    self.record(&heap, &dive, incumbent, &mut reported_bound, nodes, &mut trace);
                    continue;
                }
                LpStatus::Unbounded => {
                    if node.parent == ROOT {
                        let mut out = SolveOutcome::empty(SolveStatus::Unbounded, started);
                        out.nodes = nodes;
                        out.iterations = self.engine.iterations;
                        return out;
                    }
                    trouble = true;
                    continue;
                }
                LpStatus::IterationLimit => {
                    trouble = true;
                    last_solved = ROOT;
                    continue;
                }
            }
            let obj = self.engine.objective() + self.lp.objective_offset;
            if obj >= self.cutoff(incumbent) {
                self.record(&heap, &dive, incumbent, &mut reported_bound, nodes, &mut trace);
                continue;
            }
            match self.inspect() {
                Verdict::Feasible => {
                    let x = self.engine.x[..n].to_vec();
                    if self.lp.max_violation(&x) <= self.opts.tol.feas * 10.0 {
                        incumbent = obj;
                        best_x = Some(x);
                    } else {
                        trouble = true;
                    }
                }
                Verdict::Branch(first, second) => {
                    let basis = Arc::new(self.engine.basis());
                    let diving = !incumbent.is_finite();
                    let order = if diving { [second, first] } else { [first, second] };
                    for ch in order {
                        let mut changes = node.changes.clone();
                        changes.push(ch);
                        let child = Node {
                            id: next_id,
                            parent: node.id,
                            depth: node.depth + 1,
                            bound: obj.max(node.bound),
                            changes,
                            basis: Some(basis.clone()),
                        };
                        if diving {
                            dive.push(child);
                        } else {
                            heap.push(Queued(child));
                        }
                        next_id += 1;
                    }
                }
            }
            self.record(&heap, &dive, incumbent, &mut reported_bound, nodes, &mut trace);
        }

        let seconds = started.elapsed().as_secs_f64();
        let status = if timed_out {
            SolveStatus::Timeout
        } else if best_x.is_some() {
            if trouble {
                SolveStatus::NumericalFailure
            } else {
                SolveStatus::Optimal
            }
        } else if trouble {
            SolveStatus::NumericalFailure
        } else {
            SolveStatus::Infeasible
        };
        let bound = if timed_out {
            self.open_bound(&heap, &dive, incumbent).max(reported_bound)
        } else if best_x.is_some() {
            incumbent
        } else {
            f64::INFINITY
        };
        match best_x {
            Some(x) => SolveOutcome {
                status,
                objective: self.lp.objective_value(&x),
                x,
                row_duals: Vec::new(),
                reduced_costs: Vec::new(),
                bound: bound.min(incumbent),
                seconds,
                nodes,
                iterations: self.engine.iterations,
                trace,
            },
            None => {
                let mut out = SolveOutcome::empty(status, started);
                out.bound = bound;
                out.seconds = seconds;
                out.nodes = nodes;
                out.iterations = self.engine.iterations;
                out.trace = trace;
                out
            }
        }
    }

    fn open_bound(&self, heap: &BinaryHeap<Queued>, dive: &[Node], incumbent: f64) -> f64 {
        let h = heap.peek().map_or(incumbent, |q| q.0.bound.min(incumbent));
        dive.iter().fold(h, |b, n| b.min(n.bound))
    }

    fn record(
        &self,
        heap: &BinaryHeap<Queued>,
        dive: &[Node],
        incumbent: f64,
        reported: &mut f64,
        nodes: usize,
        trace: &mut Vec<BoundRecord>,
    ) {
        let b = self.open_bound(heap, dive, incumbent);
        if b > *reported {
            *reported = b;
        }
        if trace.len() < 100_000 {
            trace.push(BoundRecord {
                node: nodes,
                incumbent,
                bound: *reported,
            });
        }
    }
}
