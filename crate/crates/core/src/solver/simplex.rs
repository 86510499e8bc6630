//! Dense bounded-variable simplex.
//!
//! Every row `i` gets a logical column `r_i` with coefficient `-1`, so the
//! constraint system is `A x - r = 0` with bounds on both `x` and `r`. The
//! all-logical basis is always available as a starting point. The inverse of
//! the basis is kept explicitly and updated by product-form pivots; a fresh
//! inverse is built periodically by eliminating only the structural part.

use super::model::LinearProgram;

const PIVOT_TOL: f64 = 1e-9;
const SINGULAR_TOL: f64 = 1e-11;
const REFACTOR_EVERY: usize = 80;
const DEGENERATE_SWITCH: usize = 60;

#[derive(Debug, Clone, Copy)]
pub(crate) struct EngineTol {
    pub primal: f64,
    pub dual: f64,
}

impl Default for EngineTol {
    fn default() -> Self {
        Self {
            primal: 1e-8,
            dual: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

/// Basis header plus the side each nonbasic column rests on.
#[derive(Debug, Clone)]
pub(crate) struct Basis {
    pub head: Vec<usize>,
    pub at_upper: Vec<bool>,
}

pub(crate) struct Simplex {
    m: usize,
    n: usize,
    cols: Vec<Vec<(usize, f64)>>,
    col_norm2: Vec<f64>,
    cost: Vec<f64>,
    pub lb: Vec<f64>,
    pub ub: Vec<f64>,
    head: Vec<usize>,
    pos: Vec<usize>,
    at_upper: Vec<bool>,
    pub x: Vec<f64>,
    binv: Vec<f64>,
    tol: EngineTol,
    pub iterations: usize,
    since_refactor: usize,
    iteration_cap: usize,
}

const NONBASIC: usize = usize::MAX;

impl Simplex {
    pub fn new(lp: &LinearProgram, tol: EngineTol) -> Self {
        let m = lp.rows.len();
        let n = lp.vars.len();
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, row) in lp.rows.iter().enumerate() {
            for &(v, c) in &row.coefs {
                if c != 0.0 {
                    cols[v.0].push((i, c));
                }
            }
        }
        // merge duplicate entries
        for col in cols.iter_mut() {
            col.sort_by_key(|e| e.0);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(col.len());
            for &(i, c) in col.iter() {
                match merged.last_mut() {
                    Some(last) if last.0 == i => last.1 += c,
                    _ => merged.push((i, c)),
                }
            }
            merged.retain(|e| e.1 != 0.0);
            *col = merged;
        }
        let mut col_norm2: Vec<f64> = cols
            .iter()
            .map(|c| 1.0 + c.iter().map(|e| e.1 * e.1).sum::<f64>())
            .collect();
        col_norm2.extend(std::iter::repeat(2.0).take(m));
        let mut cost: Vec<f64> = lp.vars.iter().map(|v| v.cost).collect();
        cost.extend(std::iter::repeat(0.0).take(m));
        let mut lb: Vec<f64> = lp.vars.iter().map(|v| v.lower).collect();
        let mut ub: Vec<f64> = lp.vars.iter().map(|v| v.upper).collect();
        lb.extend(lp.rows.iter().map(|r| r.lower));
        ub.extend(lp.rows.iter().map(|r| r.upper));
        let mut s = Self {
            m,
            n,
            cols,
            col_norm2,
            cost,
            lb,
            ub,
            head: Vec::new(),
            pos: vec![NONBASIC; n + m],
            at_upper: vec![false; n + m],
            x: vec![0.0; n + m],
            binv: Vec::new(),
            tol,
            iterations: 0,
            since_refactor: 0,
            iteration_cap: 50 * (n + m) + 20_000,
        };
        s.slack_basis();
        s
    }

    fn slack_basis(&mut self) {
        let (m, n) = (self.m, self.n);
        self.head = (n..n + m).collect();
        self.pos = vec![NONBASIC; n + m];
        for (k, &j) in self.head.iter().enumerate() {
            self.pos[j] = k;
        }
        self.at_upper = vec![false; n + m];
        for j in 0..n {
            self.at_upper[j] = !self.lb[j].is_finite() && self.ub[j].is_finite();
        }
        self.binv = vec![0.0; m * m];
        for i in 0..m {
            self.binv[i * m + i] = -1.0;
        }
        self.since_refactor = 0;
        self.place_nonbasics();
        self.compute_basics();
    }

    pub fn basis(&self) -> Basis {
        Basis {
            head: self.head.clone(),
            at_upper: self.at_upper.clone(),
        }
    }

    pub fn load_basis(&mut self, b: &Basis) {
        self.head = b.head.clone();
        self.at_upper = b.at_upper.clone();
        self.pos = vec![NONBASIC; self.n + self.m];
        for (k, &j) in self.head.iter().enumerate() {
            self.pos[j] = k;
        }
        self.refactor();
        self.place_nonbasics();
        self.compute_basics();
    }

    fn nonbasic_value(&self, j: usize) -> f64 {
        let (l, u) = (self.lb[j], self.ub[j]);
        if l == u {
            l
        } else if self.at_upper[j] && u.is_finite() {
            u
        } else if l.is_finite() {
            l
        } else if u.is_finite() {
            u
        } else {
            0.0
        }
    }

    fn place_nonbasics(&mut self) {
        for j in 0..self.n + self.m {
            if self.pos[j] == NONBASIC {
                let v = self.nonbasic_value(j);
                self.at_upper[j] = self.ub[j].is_finite() && v == self.ub[j] && self.lb[j] != self.ub[j];
                self.x[j] = v;
            }
        }
    }

    #[inline]
    fn for_column(&self, j: usize, mut f: impl FnMut(usize, f64)) {
        if j < self.n {
            for &(i, v) in &self.cols[j] {
                f(i, v);
            }
        } else {
            f(j - self.n, -1.0);
        }
    }

    /// x_B = -B^{-1} N x_N
    fn compute_basics(&mut self) {
        let m = self.m;
        let mut r = vec![0.0; m];
        for j in 0..self.n + m {
            if self.pos[j] == NONBASIC {
                let xj = self.x[j];
                if xj != 0.0 {
                    self.for_column(j, |i, v| r[i] += v * xj);
                }
            }
        }
        for k in 0..m {
            let row = &self.binv[k * m..(k + 1) * m];
            let mut s = 0.0;
            for i in 0..m {
                s += row[i] * r[i];
            }
            self.x[self.head[k]] = -s;
        }
    }

    fn ftran(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut alpha = vec![0.0; m];
        if j < self.n {
            for &(i, v) in &self.cols[j] {
                for k in 0..m {
                    alpha[k] += self.binv[k * m + i] * v;
                }
            }
        } else {
            let i = j - self.n;
            for k in 0..m {
                alpha[k] = -self.binv[k * m + i];
            }
        }
        alpha
    }

    fn btran(&self, cb: &[f64]) -> Vec<f64> {
        let m = self.m;
        let mut y = vec![0.0; m];
        for k in 0..m {
            let c = cb[k];
            if c != 0.0 {
                let row = &self.binv[k * m..(k + 1) * m];
                for i in 0..m {
                    y[i] += c * row[i];
                }
            }
        }
        y
    }

    #[inline]
    fn dot_column(&self, y: &[f64], j: usize) -> f64 {
        if j < self.n {
            self.cols[j].iter().map(|&(i, v)| y[i] * v).sum()
        } else {
            -y[j - self.n]
        }
    }

    fn pivot(&mut self, r: usize, entering: usize, alpha: &[f64]) {
        let m = self.m;
        let leaving = self.head[r];
        let piv = alpha[r];
        {
            let row_r = &mut self.binv[r * m..(r + 1) * m];
            for v in row_r.iter_mut() {
                *v /= piv;
            }
        }
        let row_r: Vec<f64> = self.binv[r * m..(r + 1) * m].to_vec();
        for k in 0..m {
            if k != r {
                let a = alpha[k];
                if a != 0.0 {
                    let row = &mut self.binv[k * m..(k + 1) * m];
                    for i in 0..m {
                        row[i] -= a * row_r[i];
                    }
                }
            }
        }
        self.head[r] = entering;
        self.pos[entering] = r;
        self.pos[leaving] = NONBASIC;
        self.since_refactor += 1;
        self.iterations += 1;
    }

    /// Rebuilds the explicit inverse from scratch. Dependent structural columns
    /// are swapped for logicals of uncovered rows.
    pub fn refactor(&mut self) {
        loop {
            if self.try_refactor() {
                self.since_refactor = 0;
                return;
            }
        }
    }

    fn try_refactor(&mut self) -> bool {
        let (m, n) = (self.m, self.n);
        let mut tmap = vec![NONBASIC; m];
        let mut slack_row = vec![false; m];
        for &j in &self.head {
            if j >= n {
                slack_row[j - n] = true;
            }
        }
        let t_rows: Vec<usize> = (0..m).filter(|&i| !slack_row[i]).collect();
        for (q, &i) in t_rows.iter().enumerate() {
            tmap[i] = q;
        }
        let s_pos: Vec<usize> = (0..m).filter(|&k| self.head[k] < n).collect();
        let k = s_pos.len();
        debug_assert_eq!(k, t_rows.len());
        // mat[q][c] = A[t_rows[q], s_c]; aug is the identity, eliminated in step.
        let mut mat = vec![0.0; k * k];
        for (c, &p) in s_pos.iter().enumerate() {
            for &(i, v) in &self.cols[self.head[p]] {
                let q = tmap[i];
                if q != NONBASIC {
                    mat[q * k + c] = v;
                }
            }
        }
        let mut aug = vec![0.0; k * k];
        for q in 0..k {
            aug[q * k + q] = 1.0;
        }
        // Gauss-Jordan with partial pivoting; row_of[c] = pivot row for column c.
        let mut used = vec![false; k];
        let mut row_of = vec![NONBASIC; k];
        let mut dependent: Vec<usize> = Vec::new();
        for c in 0..k {
            let mut best = NONBASIC;
            let mut best_val = SINGULAR_TOL;
            for q in 0..k {
                if !used[q] {
                    let v = mat[q * k + c].abs();
                    if v > best_val {
                        best_val = v;
                        best = q;
                    }
                }
            }
            if best == NONBASIC {
                dependent.push(c);
                continue;
            }
            used[best] = true;
            row_of[c] = best;
            let piv = mat[best * k + c];
            for cc in 0..k {
                mat[best * k + cc] /= piv;
                aug[best * k + cc] /= piv;
            }
            for q in 0..k {
                if q != best {
                    let f = mat[q * k + c];
                    if f != 0.0 {
                        for cc in 0..k {
                            mat[q * k + cc] -= f * mat[best * k + cc];
                            aug[q * k + cc] -= f * aug[best * k + cc];
                        }
                    }
                }
            }
        }
        if !dependent.is_empty() {
            let free_rows: Vec<usize> = (0..k).filter(|&q| !used[q]).collect();
            for (c, q) in dependent.iter().zip(free_rows) {
                let p = s_pos[*c];
                let out = self.head[p];
                let slack = n + t_rows[q];
                self.head[p] = slack;
                self.pos[slack] = p;
                self.pos[out] = NONBASIC;
                let (l, u) = (self.lb[out], self.ub[out]);
                let xv = self.x[out];
                self.at_upper[out] = u.is_finite() && (!l.is_finite() || (u - xv).abs() < (xv - l).abs());
                self.x[out] = self.nonbasic_value(out);
            }
            return false;
        }
        // Minv[c][q] = aug[row_of[c]][q]
        let mut binv = vec![0.0; m * m];
        for (c, &p) in s_pos.iter().enumerate() {
            let src = &aug[row_of[c] * k..(row_of[c] + 1) * k];
            for q in 0..k {
                binv[p * m + t_rows[q]] = src[q];
            }
        }
        for &p in &(0..m).filter(|&p| self.head[p] >= n).collect::<Vec<_>>() {
            let i = self.head[p] - n;
            binv[p * m + i] = -1.0;
        }
        // logical rows: z_i = sum_s A[i,s] z_s - b_i
        for (c, &p) in s_pos.iter().enumerate() {
            let src = &aug[row_of[c] * k..(row_of[c] + 1) * k];
            for &(i, v) in &self.cols[self.head[p]] {
                if slack_row[i] {
                    let pr = self.pos[n + i];
                    for q in 0..k {
                        binv[pr * m + t_rows[q]] += v * src[q];
                    }
                }
            }
        }
        self.binv = binv;
        true
    }

    fn maybe_refactor(&mut self) {
        if self.since_refactor >= REFACTOR_EVERY {
            self.refactor();
            self.compute_basics();
        }
    }

    fn infeasibility(&self, k: usize) -> f64 {
        let j = self.head[k];
        let v = self.x[j];
        if v < self.lb[j] - self.tol.primal {
            self.lb[j] - v
        } else if v > self.ub[j] + self.tol.primal {
            v - self.ub[j]
        } else {
            0.0
        }
    }

    fn primal_infeasible(&self) -> bool {
        (0..self.m).any(|k| self.infeasibility(k) > 0.0)
    }

    pub fn duals(&self) -> Vec<f64> {
        let cb: Vec<f64> = self.head.iter().map(|&j| self.cost[j]).collect();
        self.btran(&cb)
    }

    pub fn reduced_costs(&self) -> Vec<f64> {
        let y = self.duals();
        (0..self.n + self.m)
            .map(|j| {
                if self.pos[j] == NONBASIC {
                    self.cost[j] - self.dot_column(&y, j)
                } else {
                    0.0
                }
            })
            .collect()
    }

    pub fn objective(&self) -> f64 {
        (0..self.n).map(|j| self.cost[j] * self.x[j]).sum()
    }

    /// Cold start from the all-logical basis.
    pub fn solve(&mut self) -> LpStatus {
        self.slack_basis();
        self.primal()
    }

    /// Re-optimise after bound changes, keeping the current basis.
    pub fn resolve(&mut self) -> LpStatus {
        self.place_nonbasics();
        self.compute_basics();
        if self.make_dual_feasible() {
            match self.dual() {
                LpStatus::Optimal => self.primal(),
                other => other,
            }
        } else {
            self.primal()
        }
    }

    /// Moves boxed nonbasics to the bound their reduced cost prefers. Returns
    /// false when a dual infeasibility cannot be repaired that way.
    fn make_dual_feasible(&mut self) -> bool {
        let y = self.duals();
        let mut moved = false;
        let mut ok = true;
        for j in 0..self.n + self.m {
            if self.pos[j] != NONBASIC || self.lb[j] == self.ub[j] {
                continue;
            }
            let d = self.cost[j] - self.dot_column(&y, j);
            let at_up = self.ub[j].is_finite() && self.x[j] == self.ub[j];
            let at_lo = self.lb[j].is_finite() && self.x[j] == self.lb[j];
            if at_lo && d < -self.tol.dual {
                if self.ub[j].is_finite() {
                    self.at_upper[j] = true;
                    self.x[j] = self.ub[j];
                    moved = true;
                } else {
                    ok = false;
                }
            } else if at_up && d > self.tol.dual {
                if self.lb[j].is_finite() {
                    self.at_upper[j] = false;
                    self.x[j] = self.lb[j];
                    moved = true;
                } else {
                    ok = false;
                }
            } else if !at_lo && !at_up && d.abs() > self.tol.dual {
                ok = false;
            }
        }
        if moved {
            self.compute_basics();
        }
        ok
    }

    /// Composite primal simplex: minimises the sum of infeasibilities first,
    /// then the true objective.
    pub fn primal(&mut self) -> LpStatus {
        let (m, n) = (self.m, self.n);
        let mut degenerate = 0usize;
        let mut bland = false;
        loop {
            if self.iterations > self.iteration_cap {
                return LpStatus::IterationLimit;
            }
            self.maybe_refactor();
            let mut phase1 = false;
            let mut cb = vec![0.0; m];
            for k in 0..m {
                let j = self.head[k];
                let v = self.x[j];
                if v < self.lb[j] - self.tol.primal {
                    cb[k] = -1.0;
                    phase1 = true;
                } else if v > self.ub[j] + self.tol.primal {
                    cb[k] = 1.0;
                    phase1 = true;
                }
            }
            if !phase1 {
                for k in 0..m {
                    cb[k] = self.cost[self.head[k]];
                }
            }
            let y = self.btran(&cb);
            // pricing
            let mut best = NONBASIC;
            let mut best_score = 0.0;
            let mut best_d = 0.0;
            for j in 0..n + m {
                if self.pos[j] != NONBASIC || self.lb[j] == self.ub[j] {
                    continue;
                }
                let cj = if phase1 { 0.0 } else { self.cost[j] };
                let d = cj - self.dot_column(&y, j);
                let can_up = self.x[j] < self.ub[j] - self.tol.primal || !self.ub[j].is_finite();
                let can_down = self.x[j] > self.lb[j] + self.tol.primal || !self.lb[j].is_finite();
                let eligible = (d < -self.tol.dual && can_up) || (d > self.tol.dual && can_down);
                if !eligible {
                    continue;
                }
                if bland {
                    best = j;
                    best_d = d;
                    break;
                }
                let score = d * d / self.col_norm2[j];
                if score > best_score {
                    best_score = score;
                    best = j;
                    best_d = d;
                }
            }
            if best == NONBASIC {
                if phase1 {
                    // confirm with a fresh factorisation before declaring infeasibility
                    if self.since_refactor > 0 {
                        self.refactor();
                        self.compute_basics();
                        if !self.primal_infeasible() {
                            continue;
                        }
                        let again = self.has_improving(true);
                        if again {
                            continue;
                        }
                    }
                    return LpStatus::Infeasible;
                }
                if self.since_refactor > 0 {
                    self.refactor();
                    self.compute_basics();
                    if self.primal_infeasible() || self.has_improving(false) {
                        continue;
                    }
                }
                return LpStatus::Optimal;
            }
            let j = best;
            let dir = if best_d < 0.0 { 1.0 } else { -1.0 };
            let alpha = self.ftran(j);
            let (step, leave) = self.primal_ratio(&alpha, j, dir, phase1, bland);
            if !step.is_finite() {
                if phase1 {
                    // cannot happen with a correct phase-1 gradient; refactor and retry
                    self.refactor();
                    self.compute_basics();
                    bland = true;
                    continue;
                }
                return LpStatus::Unbounded;
            }
            if step <= self.tol.primal {
                degenerate += 1;
                if degenerate > DEGENERATE_SWITCH {
                    bland = true;
                }
            } else {
                degenerate = 0;
                bland = false;
            }
            // apply step
            if step != 0.0 {
                for k in 0..m {
                    if alpha[k] != 0.0 {
                        let b = self.head[k];
                        self.x[b] -= alpha[k] * dir * step;
                    }
                }
                self.x[j] += dir * step;
            }
            match leave {
                None => {
                    // bound flip of the entering column
                    if dir > 0.0 {
                        self.x[j] = self.ub[j];
                        self.at_upper[j] = true;
                    } else {
                        self.x[j] = self.lb[j];
                        self.at_upper[j] = false;
                    }
                    self.iterations += 1;
                }
                Some((r, to_upper)) => {
                    let out = self.head[r];
                    self.pivot(r, j, &alpha);
                    self.at_upper[out] = to_upper;
                    self.x[out] = if to_upper { self.ub[out] } else { self.lb[out] };
                }
            }
        }
    }

    fn has_improving(&self, phase1: bool) -> bool {
        let m = self.m;
        let mut cb = vec![0.0; m];
        for k in 0..m {
            let j = self.head[k];
            let v = self.x[j];
            if phase1 {
                if v < self.lb[j] - self.tol.primal {
                    cb[k] = -1.0;
                } else if v > self.ub[j] + self.tol.primal {
                    cb[k] = 1.0;
                }
            } else {
                cb[k] = self.cost[j];
            }
        }
        let y = self.btran(&cb);
        (0..self.n + m).any(|j| {
            if self.pos[j] != NONBASIC || self.lb[j] == self.ub[j] {
                return false;
            }
            let cj = if phase1 { 0.0 } else { self.cost[j] };
            let d = cj - self.dot_column(&y, j);
            let can_up = self.x[j] < self.ub[j] - self.tol.primal || !self.ub[j].is_finite();
            let can_down = self.x[j] > self.lb[j] + self.tol.primal || !self.lb[j].is_finite();
            (d < -self.tol.dual && can_up) || (d > self.tol.dual && can_down)
        })
    }

    /// Two-pass Harris ratio test. Returns the step length and the leaving
    /// position with the bound it leaves at; `None` means a bound flip.
    fn primal_ratio(
        &self,
        alpha: &[f64],
        entering: usize,
        dir: f64,
        phase1: bool,
        bland: bool,
    ) -> (f64, Option<(usize, bool)>) {
        let tol = self.tol.primal;
        let own = self.ub[entering] - self.lb[entering];
        let mut tmax = if own.is_finite() { own } else { f64::INFINITY };
        // candidates: (k, exact ratio, to_upper, |a|)
        let mut cands: Vec<(usize, f64, bool, f64)> = Vec::new();
        for k in 0..self.m {
            let a = alpha[k] * dir;
            if a.abs() < PIVOT_TOL {
                continue;
            }
            let b = self.head[k];
            let (xv, l, u) = (self.x[b], self.lb[b], self.ub[b]);
            // x_b moves by -a per unit step
            if a > 0.0 {
                if phase1 && xv > u + tol {
                    let r = (xv - u) / a;
                    cands.push((k, r, true, a.abs()));
                    tmax = tmax.min(r + tol / a);
                } else if xv < l - tol {
                    // moving further below; unrestricted in phase 1
                } else if l.is_finite() {
                    let r = ((xv - l) / a).max(0.0);
                    cands.push((k, r, false, a.abs()));
                    tmax = tmax.min((xv - l + tol) / a);
                }
            } else {
                let a2 = -a;
                if phase1 && xv < l - tol {
                    let r = (l - xv) / a2;
                    cands.push((k, r, false, a2));
                    tmax = tmax.min(r + tol / a2);
                } else if xv > u + tol {
                } else if u.is_finite() {
                    let r = ((u - xv) / a2).max(0.0);
                    cands.push((k, r, true, a2));
                    tmax = tmax.min((u - xv + tol) / a2);
                }
            }
        }
        if !tmax.is_finite() {
            return (f64::INFINITY, None);
        }
        if own.is_finite() && own <= tmax && cands.iter().all(|c| c.1 >= own) {
            return (own, None);
        }
        let mut best: Option<(usize, f64, bool, f64)> = None;
        for c in cands {
            if c.1 <= tmax {
                let better = match best {
                    None => true,
                    Some(b) => {
                        if bland {
                            c.1 < b.1 - 1e-12 || (c.1 <= b.1 + 1e-12 && self.head[c.0] < self.head[b.0])
                        } else {
                            c.3 > b.3
                        }
                    }
                };
                if better {
                    best = Some(c);
                }
            }
        }
        match best {
            Some((k, r, up, _)) => (r, Some((k, up))),
            None => {
                if own.is_finite() {
                    (own, None)
                } else {
                    (f64::INFINITY, None)
                }
            }
        }
    }

    /// Dual simplex; assumes the current basis is dual feasible.
    pub fn dual(&mut self) -> LpStatus {
        let (m, n) = (self.m, self.n);
        loop {
            if self.iterations > self.iteration_cap {
                return LpStatus::IterationLimit;
            }
            self.maybe_refactor();
            // leaving row: largest scaled infeasibility
            let mut r = NONBASIC;
            let mut worst = 0.0;
            for k in 0..m {
                let v = self.infeasibility(k);
                if v > 0.0 {
                    let score = v * v / self.col_norm2[self.head[k]];
                    if score > worst {
                        worst = score;
                        r = k;
                    }
                }
            }
            if r == NONBASIC {
                if self.since_refactor > 0 {
                    self.refactor();
                    self.compute_basics();
                    if self.primal_infeasible() {
                        continue;
                    }
                }
                return LpStatus::Optimal;
            }
            let leaving = self.head[r];
            let increase = self.x[leaving] < self.lb[leaving];
            let target = if increase { self.lb[leaving] } else { self.ub[leaving] };
            let cb: Vec<f64> = self.head.iter().map(|&j| self.cost[j]).collect();
            let y = self.btran(&cb);
            let rho: Vec<f64> = self.binv[r * m..(r + 1) * m].to_vec();
            // dual ratio test (Harris)
            let mut cands: Vec<(usize, f64, f64)> = Vec::new();
            let mut tmax = f64::INFINITY;
            for j in 0..n + m {
                if self.pos[j] != NONBASIC || self.lb[j] == self.ub[j] {
                    continue;
                }
                let arj = self.dot_column(&rho, j);
                if arj.abs() < PIVOT_TOL {
                    continue;
                }
                let d = self.cost[j] - self.dot_column(&y, j);
                let at_lo = self.lb[j].is_finite() && self.x[j] == self.lb[j];
                let at_up = self.ub[j].is_finite() && self.x[j] == self.ub[j];
                // s = sign needed for a_rj given the direction of x_j
                let a = if increase { arj } else { -arj };
                let eligible = if at_lo {
                    a < 0.0
                } else if at_up {
                    a > 0.0
                } else {
                    true
                };
                if !eligible {
                    continue;
                }
                let dd = if at_lo {
                    d.max(0.0)
                } else if at_up {
                    (-d).max(0.0)
                } else {
                    d.abs()
                };
                let ratio = dd / a.abs();
                tmax = tmax.min((dd + self.tol.dual) / a.abs());
                cands.push((j, ratio, arj));
            }
            if cands.is_empty() {
                return LpStatus::Infeasible;
            }
            let mut best: Option<(usize, f64, f64)> = None;
            for c in cands {
                if c.1 <= tmax {
                    let better = match best {
                        None => true,
                        Some(b) => c.2.abs() > b.2.abs(),
                    };
                    if better {
                        best = Some(c);
                    }
                }
            }
            let (q, _, _) = best.expect("nonempty candidate set");
            let alpha = self.ftran(q);
            if alpha[r].abs() < PIVOT_TOL {
                self.refactor();
                self.compute_basics();
                continue;
            }
            let delta = (self.x[leaving] - target) / alpha[r];
            for k in 0..m {
                if alpha[k] != 0.0 {
                    let b = self.head[k];
                    self.x[b] -= alpha[k] * delta;
                }
            }
            self.x[q] += delta;
            self.pivot(r, q, &alpha);
            self.at_upper[leaving] = !increase;
            self.x[leaving] = target;
        }
    }
}
