use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::SolverError;

/// Index of a column in a [`LinearProgram`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VarId(pub usize);

/// Index of a row in a [`LinearProgram`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct RowId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub cost: f64,
    pub integer: bool,
}

/// A constraint `lower <= sum(coef * x) <= upper`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Constraint {
    pub name: String,
    pub coefs: Vec<(VarId, f64)>,
    pub lower: f64,
    pub upper: f64,
}

/// Which bound a complementarity term measures its distance from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Lower,
    Upper,
}

/// A nonnegative expression: the distance of a column value or a row activity
/// from one of its finite bounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Term {
    Var(VarId, Side),
    Row(RowId, Side),
}

impl Term {
    pub fn var_lower(v: VarId) -> Self {
        Term::Var(v, Side::Lower)
    }

    pub fn var_upper(v: VarId) -> Self {
        Term::Var(v, Side::Upper)
    }

    pub fn row_lower(r: RowId) -> Self {
        Term::Row(r, Side::Lower)
    }

    pub fn row_upper(r: RowId) -> Self {
        Term::Row(r, Side::Upper)
    }
}

/// At most one of the two terms may be nonzero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplementarityPair {
    pub first: Term,
    pub second: Term,
}

/// Minimisation problem with bounded columns, ranged rows, optional integrality
/// marks and optional complementarity pairs.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LinearProgram {
    pub vars: Vec<Variable>,
    pub rows: Vec<Constraint>,
    pub pairs: Vec<ComplementarityPair>,
    pub objective_offset: f64,
}

impl LinearProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_vars(&self) -> usize {
        self.vars.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn add_var(&mut self, name: impl Into<String>, lower: f64, upper: f64, cost: f64) -> VarId {
        self.vars.push(Variable {
            name: name.into(),
            lower,
            upper,
            cost,
            integer: false,
        });
        VarId(self.vars.len() - 1)
    }

    pub fn add_binary(&mut self, name: impl Into<String>, cost: f64) -> VarId {
        let id = self.add_var(name, 0.0, 1.0, cost);
        self.vars[id.0].integer = true;
        id
    }

    pub fn set_integer(&mut self, v: VarId, integer: bool) {
        self.vars[v.0].integer = integer;
    }

    pub fn set_cost(&mut self, v: VarId, cost: f64) {
        self.vars[v.0].cost = cost;
    }

    pub fn set_bounds(&mut self, v: VarId, lower: f64, upper: f64) {
        self.vars[v.0].lower = lower;
        self.vars[v.0].upper = upper;
    }

    pub fn add_row(
        &mut self,
        name: impl Into<String>,
        coefs: Vec<(VarId, f64)>,
        relation: Relation,
        rhs: f64,
    ) -> RowId {
        let (lower, upper) = match relation {
            Relation::Le => (f64::NEG_INFINITY, rhs),
            Relation::Eq => (rhs, rhs),
            Relation::Ge => (rhs, f64::INFINITY),
        };
        self.add_ranged_row(name, coefs, lower, upper)
    }

    pub fn add_ranged_row(
        &mut self,
        name: impl Into<String>,
        coefs: Vec<(VarId, f64)>,
        lower: f64,
        upper: f64,
    ) -> RowId {
        self.rows.push(Constraint {
            name: name.into(),
            coefs,
            lower,
            upper,
        });
        RowId(self.rows.len() - 1)
    }

    pub fn add_pair(&mut self, first: Term, second: Term) {
        self.pairs.push(ComplementarityPair { first, second });
    }

    pub fn has_integers(&self) -> bool {
        self.vars.iter().any(|v| v.integer)
    }

    pub fn has_pairs(&self) -> bool {
        !self.pairs.is_empty()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective_offset
            + self
                .vars
                .iter()
                .zip(x)
                .map(|(v, xv)| v.cost * xv)
                .sum::<f64>()
    }

    pub fn row_activity(&self, row: RowId, x: &[f64]) -> f64 {
        self.rows[row.0].coefs.iter().map(|(v, c)| c * x[v.0]).sum()
    }

    /// Value of a complementarity term at `x`; negative values mean the
    /// underlying bound is violated.
    pub fn term_value(&self, term: Term, x: &[f64]) -> f64 {
        match term {
            Term::Var(v, Side::Lower) => x[v.0] - self.vars[v.0].lower,
            Term::Var(v, Side::Upper) => self.vars[v.0].upper - x[v.0],
            Term::Row(r, Side::Lower) => self.row_activity(r, x) - self.rows[r.0].lower,
            Term::Row(r, Side::Upper) => self.rows[r.0].upper - self.row_activity(r, x),
        }
    }

    /// Largest violation of any bound or row, scaled by the row's coefficient norm.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (v, xv) in self.vars.iter().zip(x) {
            worst = worst.max(v.lower - xv).max(xv - v.upper);
        }
        for (i, row) in self.rows.iter().enumerate() {
            let act = self.row_activity(RowId(i), x);
            let norm = row
                .coefs
                .iter()
                .map(|(_, c)| c.abs())
                .fold(1.0_f64, f64::max);
            worst = worst
                .max((row.lower - act) / norm)
                .max((act - row.upper) / norm);
        }
        worst
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let n = self.vars.len();
        for (i, v) in self.vars.iter().enumerate() {
            if v.lower.is_nan() || v.upper.is_nan() || !v.cost.is_finite() {
                return Err(SolverError::InvalidModel(format!("column {i} ({}) has a non-numeric bound or cost", v.name)));
            }
            if v.lower > v.upper {
                return Err(SolverError::InvalidModel(format!("column {i} ({}) has lower > upper", v.name)));
            }
        }
        for (i, r) in self.rows.iter().enumerate() {
            if r.lower.is_nan() || r.upper.is_nan() || r.lower > r.upper {
                return Err(SolverError::InvalidModel(format!("row {i} ({}) has an invalid range", r.name)));
            }
            for (v, c) in &r.coefs {
                if v.0 >= n {
                    return Err(SolverError::InvalidModel(format!("row {i} ({}) references unknown column {}", r.name, v.0)));
                }
                if !c.is_finite() {
                    return Err(SolverError::InvalidModel(format!("row {i} ({}) has a non-finite coefficient", r.name)));
                }
            }
        }
        for (k, p) in self.pairs.iter().enumerate() {
            for t in [p.first, p.second] {
                let finite = match t {
                    Term::Var(v, side) => {
                        if v.0 >= n {
                            return Err(SolverError::InvalidModel(format!("pair {k} references unknown column {}", v.0)));
                        }
                        match side {
                            Side::Lower => self.vars[v.0].lower.is_finite(),
                            Side::Upper => self.vars[v.0].upper.is_finite(),
                        }
                    }
                    Term::Row(r, side) => {
                        if r.0 >= self.rows.len() {
                            return Err(SolverError::InvalidModel(format!("pair {k} references unknown row {}", r.0)));
                        }
                        match side {
                            Side::Lower => self.rows[r.0].lower.is_finite(),
                            Side::Upper => self.rows[r.0].upper.is_finite(),
                        }
                    }
                };
                if !finite {
                    return Err(SolverError::InvalidModel(format!("pair {k} measures distance from an infinite bound")));
                }
            }
        }
        Ok(())
    }

    /// Debug dump in CPLEX LP text format. Complementarity pairs are emitted as
    /// comments because the format has no native construct for them.
    pub fn to_lp_text(&self) -> String {
        let name = |i: usize| sanitize(&self.vars[i].name, 'x', i);
        let mut out = String::new();
        out.push_str("Minimize\n obj:");
        let mut any = false;
        for (i, v) in self.vars.iter().enumerate() {
            if v.cost != 0.0 {
                write_term(&mut out, v.cost, &name(i), !any);
                any = true;
            }
        }
        if !any {
            out.push_str(" 0");
        }
        out.push_str("\nSubject To\n");
        for (i, r) in self.rows.iter().enumerate() {
            let rname = sanitize(&r.name, 'r', i);
            let mut body = String::new();
            for (k, (v, c)) in r.coefs.iter().enumerate() {
                write_term(&mut body, *c, &name(v.0), k == 0);
            }
            if r.coefs.is_empty() {
                body.push_str(" 0 x_dummy");
            }
            if r.lower == r.upper {
                let _ = writeln!(out, " {rname}:{body} = {}", r.lower);
            } else {
                if r.lower.is_finite() {
                    let _ = writeln!(out, " {rname}_lo:{body} >= {}", r.lower);
                }
                if r.upper.is_finite() {
                    let _ = writeln!(out, " {rname}_up:{body} <= {}", r.upper);
                }
            }
        }
        out.push_str("Bounds\n");
        for (i, v) in self.vars.iter().enumerate() {
            let n = name(i);
            match (v.lower.is_finite(), v.upper.is_finite()) {
                (true, true) if v.lower == v.upper => {
                    let _ = writeln!(out, " {n} = {}", v.lower);
                }
                (true, true) => {
                    let _ = writeln!(out, " {} <= {n} <= {}", v.lower, v.upper);
                }
                (true, false) => {
                    if v.lower != 0.0 {
                        let _ = writeln!(out, " {n} >= {}", v.lower);
                    }
                }
                (false, true) => {
                    let _ = writeln!(out, " -inf <= {n} <= {}", v.upper);
                }
                (false, false) => {
                    let _ = writeln!(out, " {n} free");
                }
            }
        }
        let ints: Vec<String> = (0..self.vars.len())
            .filter(|&i| self.vars[i].integer)
            .map(name)
            .collect();
        if !ints.is_empty() {
            out.push_str("General\n");
            for n in ints {
                let _ = writeln!(out, " {n}");
            }
        }
        for p in &self.pairs {
            let _ = writeln!(out, "\\ complementarity: {} _|_ {}", self.describe(p.first), self.describe(p.second));
        }
        out.push_str("End\n");
        out
    }

    fn describe(&self, t: Term) -> String {
        match t {
            Term::Var(v, s) => format!("{}@{:?}", sanitize(&self.vars[v.0].name, 'x', v.0), s),
            Term::Row(r, s) => format!("{}@{:?}", sanitize(&self.rows[r.0].name, 'r', r.0), s),
        }
    }
}

fn write_term(out: &mut String, c: f64, name: &str, first: bool) {
    if c < 0.0 {
        let _ = write!(out, " - {} {name}", -c);
    } else if first {
        let _ = write!(out, " {c} {name}");
    } else {
        let _ = write!(out, " + {c} {name}");
    }
}

fn sanitize(name: &str, prefix: char, idx: usize) -> String {
    let cleaned: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
        .collect();
    format!("{prefix}{idx}_{cleaned}")
}
