//! Static grid and unit data, the native TOML case document and its validation.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BusId(pub u32);

impl fmt::Display for BusId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub name: String,
    /// Power base for the flow law `p = base_mva * b * (delta_from - delta_to)`.
    #[serde(default = "default_base")]
    pub base_mva: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_bus: Option<BusId>,
}

fn default_base() -> f64 {
    100.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: BusId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub id: String,
    pub from: BusId,
    pub to: BusId,
    /// Per-unit susceptance `1/x`.
    pub susceptance: f64,
    /// Thermal limit in MW; absent means unlimited.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub id: String,
    pub bus: BusId,
    /// Linear cost in $/MW.
    pub cost: f64,
    pub p_min: f64,
    pub p_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Demand {
    pub id: String,
    pub bus: BusId,
    /// Default value in MW.
    pub default: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkCase {
    pub meta: Meta,
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    pub generators: Vec<Generator>,
    pub demands: Vec<Demand>,
}

impl NetworkCase {
    /// The reference bus: the declared one, or the first bus.
    pub fn reference(&self) -> BusId {
        self.meta
            .reference_bus
            .or_else(|| self.buses.first().map(|b| b.id))
            .unwrap_or(BusId(0))
    }

    pub fn bus_index(&self) -> HashMap<BusId, usize> {
        self.buses.iter().enumerate().map(|(i, b)| (b.id, i)).collect()
    }

    pub fn generator(&self, id: &str) -> Option<usize> {
        self.generators.iter().position(|g| g.id == id)
    }

    pub fn default_demand(&self) -> DemandScenario {
        DemandScenario::nodal(self.demands.iter().map(|d| d.default).collect())
    }

    pub fn validate(&self) -> Vec<Violation> {
        validate_network(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UcUnit {
    pub id: String,
    /// Production cost in $/MWh.
    pub c1: f64,
    /// No-load cost in $/h while committed.
    pub c0: f64,
    pub c_su: f64,
    pub c_sd: f64,
    pub p_min: f64,
    pub p_max: f64,
    pub ramp_up: f64,
    pub ramp_down: f64,
    pub min_up: u32,
    pub min_down: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Horizon {
    pub hours: usize,
}

/// Status of a unit before hour 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialState {
    pub unit: String,
    pub on: bool,
    pub output: f64,
    /// Hours the unit has been in its current state.
    pub hours: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UcCase {
    pub meta: Meta,
    pub units: Vec<UcUnit>,
    pub horizon: usize,
    /// One entry per unit, in unit order.
    pub initial_state: Vec<InitialState>,
}

impl UcCase {
    /// Builds a case where every unit starts cold: off for `max(TU, TD)` hours.
    pub fn cold_start(meta: Meta, units: Vec<UcUnit>, horizon: usize) -> Self {
        let initial_state = units
            .iter()
            .map(|u| InitialState {
                unit: u.id.clone(),
                on: false,
                output: 0.0,
                hours: u.min_up.max(u.min_down),
            })
            .collect();
        Self {
            meta,
            units,
            horizon,
            initial_state,
        }
    }

    pub fn unit(&self, id: &str) -> Option<usize> {
        self.units.iter().position(|u| u.id == id)
    }

    pub fn total_capacity(&self) -> f64 {
        self.units.iter().map(|u| u.p_max).sum()
    }

    pub fn validate(&self) -> Vec<Violation> {
        validate_uc(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Case {
    Network(NetworkCase),
    Uc(UcCase),
}

impl Case {
    pub fn name(&self) -> &str {
        match self {
            Case::Network(c) => &c.meta.name,
            Case::Uc(c) => &c.meta.name,
        }
    }

    pub fn validate(&self) -> Vec<Violation> {
        match self {
            Case::Network(c) => c.validate(),
            Case::Uc(c) => c.validate(),
        }
    }

    /// Content hash of the canonical document, used as a stable case id.
    pub fn content_id(&self) -> String {
        let text = serialize_case(self);
        hex::encode(&Sha256::digest(text.as_bytes())[..8])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    DcopfNodal,
    UcHourly,
}

/// The mutable parameter vector: nodal demands or an hourly aggregate profile, in MW.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandScenario {
    pub kind: ScenarioKind,
    pub values: Vec<f64>,
}

impl DemandScenario {
    pub fn nodal(values: Vec<f64>) -> Self {
        Self {
            kind: ScenarioKind::DcopfNodal,
            values,
        }
    }

    pub fn hourly(values: Vec<f64>) -> Self {
        Self {
            kind: ScenarioKind::UcHourly,
            values,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// l1 distance to another scenario of the same length.
    pub fn distance(&self, other: &DemandScenario) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .sum()
    }

    pub fn check(&self, kind: ScenarioKind, len: usize) -> Result<(), ScenarioError> {
        if self.kind != kind {
            return Err(ScenarioError::Kind {
                expected: kind,
                found: self.kind,
            });
        }
        if self.values.len() != len {
            return Err(ScenarioError::Length {
                expected: len,
                found: self.values.len(),
            });
        }
        if let Some(i) = self.values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(ScenarioError::Negative {
                index: i,
                value: self.values[i],
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("scenario kind {found:?} does not match {expected:?}")]
    Kind {
        expected: ScenarioKind,
        found: ScenarioKind,
    },
    #[error("scenario has {found} entries, expected {expected}")]
    Length { expected: usize, found: usize },
    #[error("scenario entry {index} is {value}; demands must be finite and non-negative")]
    Negative { index: usize, value: f64 },
}

/// One broken invariant, with a machine-readable code and the offending field path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub code: String,
    pub path: String,
    pub message: String,
}

impl Violation {
    fn new(code: &str, path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            code: code.to_string(),
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} at {}: {}", self.code, self.path, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CaseError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid case: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Semantic(Vec<Violation>),
}

/// On-disk layout. Every section is optional at the serde level so that
/// missing sections surface as semantic violations with a path.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Document {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    meta: Option<Meta>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    buses: Vec<Bus>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    lines: Vec<Line>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    generators: Vec<Generator>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    demands: Vec<Demand>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    uc_units: Option<Vec<UcUnit>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    horizon: Option<Horizon>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    initial_state: Option<Vec<InitialState>>,
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(before.len(), |p| before.len() - p - 1) + 1;
    (line, column)
}

/// Parses and validates a native case document. A document with a
/// `uc_units` section is a unit-commitment case; otherwise it is a network.
pub fn parse_case(text: &str) -> Result<Case, CaseError> {
    let doc: Document = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((1, 1), |s| line_col(text, s.start));
        CaseError::Syntax {
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    let Some(meta) = doc.meta else {
        return Err(CaseError::Semantic(vec![Violation::new(
            "missing_section",
            "meta",
            "the meta section is required",
        )]));
    };
    let case = match doc.uc_units {
        Some(units) => {
            let Some(horizon) = doc.horizon else {
                return Err(CaseError::Semantic(vec![Violation::new(
                    "missing_section",
                    "horizon",
                    "unit-commitment cases need a horizon section",
                )]));
            };
            let initial_state = match doc.initial_state {
                Some(s) => s,
                None => UcCase::cold_start(meta.clone(), units.clone(), horizon.hours).initial_state,
            };
            Case::Uc(UcCase {
                meta,
                units,
                horizon: horizon.hours,
                initial_state,
            })
        }
        None => Case::Network(NetworkCase {
            meta,
            buses: doc.buses,
            lines: doc.lines,
            generators: doc.generators,
            demands: doc.demands,
        }),
    };
    let violations = case.validate();
    if violations.is_empty() {
        Ok(case)
    } else {
        Err(CaseError::Semantic(violations))
    }
}

pub fn serialize_case(case: &Case) -> String {
    let doc = match case.clone() {
        Case::Network(c) => Document {
            meta: Some(c.meta),
            buses: c.buses,
            lines: c.lines,
            generators: c.generators,
            demands: c.demands,
            ..Document::default()
        },
        Case::Uc(c) => Document {
            meta: Some(c.meta),
            uc_units: Some(c.units),
            horizon: Some(Horizon { hours: c.horizon }),
            initial_state: Some(c.initial_state),
            ..Document::default()
        },
    };
    toml::to_string(&doc).expect("case documents contain only finite TOML-representable values")
}

fn finite_nonneg(v: f64) -> bool {
    v.is_finite() && v >= 0.0
}

fn validate_network(case: &NetworkCase) -> Vec<Violation> {
    let mut out = Vec::new();
    if !(case.meta.base_mva.is_finite() && case.meta.base_mva > 0.0) {
        out.push(Violation::new("invalid_base", "meta.base_mva", "base must be positive"));
    }
    if case.buses.is_empty() {
        out.push(Violation::new("missing_section", "buses", "at least one bus is required"));
    }
    let mut seen = HashSet::new();
    for (i, b) in case.buses.iter().enumerate() {
        if !seen.insert(b.id) {
            out.push(Violation::new("duplicate_id", format!("buses[{i}].id"), format!("bus {} declared twice", b.id)));
        }
    }
    let known = |b: BusId| seen.contains(&b);
    if let Some(r) = case.meta.reference_bus {
        if !known(r) {
            out.push(Violation::new(
                "dangling_reference",
                "meta.reference_bus",
                format!("reference bus {r} is not declared"),
            ));
        }
    }
    let mut ids = HashSet::new();
    for (i, l) in case.lines.iter().enumerate() {
        let path = format!("lines[{i}]");
        if !ids.insert(("line", l.id.clone())) {
            out.push(Violation::new("duplicate_id", format!("{path}.id"), format!("line {} declared twice", l.id)));
        }
        for (field, b) in [("from", l.from), ("to", l.to)] {
            if !known(b) {
                out.push(Violation::new(
                    "dangling_reference",
                    format!("{path}.{field}"),
                    format!("line {} references undeclared bus {b}", l.id),
                ));
            }
        }
        if l.from == l.to {
            out.push(Violation::new("self_loop", path.clone(), format!("line {} connects bus {} to itself", l.id, l.from)));
        }
        if !(l.susceptance.is_finite() && l.susceptance != 0.0) {
            out.push(Violation::new(
                "invalid_susceptance",
                format!("{path}.susceptance"),
                format!("line {} needs a finite non-zero susceptance", l.id),
            ));
        }
        if let Some(lim) = l.limit {
            if !finite_nonneg(lim) {
                out.push(Violation::new(
                    "negative_limit",
                    format!("{path}.limit"),
                    format!("line {} has limit {lim}", l.id),
                ));
            }
        }
    }
    for (i, g) in case.generators.iter().enumerate() {
        let path = format!("generators[{i}]");
        if !ids.insert(("gen", g.id.clone())) {
            out.push(Violation::new("duplicate_id", format!("{path}.id"), format!("generator {} declared twice", g.id)));
        }
        if !known(g.bus) {
            out.push(Violation::new(
                "dangling_reference",
                format!("{path}.bus"),
                format!("generator {} references undeclared bus {}", g.id, g.bus),
            ));
        }
        if !finite_nonneg(g.cost) {
            out.push(Violation::new("negative_cost", format!("{path}.cost"), format!("generator {} has cost {}", g.id, g.cost)));
        }
        if !(g.p_min.is_finite() && g.p_max.is_finite()) {
            out.push(Violation::new("non_finite", path.clone(), format!("generator {} has non-finite limits", g.id)));
        } else if g.p_min > g.p_max {
            out.push(Violation::new(
                "gen_bounds_inverted",
                format!("{path}.p_min"),
                format!("generator {}: p_min {} > p_max {}", g.id, g.p_min, g.p_max),
            ));
        }
    }
    for (i, d) in case.demands.iter().enumerate() {
        let path = format!("demands[{i}]");
        if !ids.insert(("demand", d.id.clone())) {
            out.push(Violation::new("duplicate_id", format!("{path}.id"), format!("demand {} declared twice", d.id)));
        }
        if !known(d.bus) {
            out.push(Violation::new(
                "dangling_reference",
                format!("{path}.bus"),
                format!("demand {} references undeclared bus {}", d.id, d.bus),
            ));
        }
        if !finite_nonneg(d.default) {
            out.push(Violation::new(
                "negative_demand",
                format!("{path}.default"),
                format!("demand {} has default {}", d.id, d.default),
            ));
        }
    }
    if out.is_empty() {
        let comps = components(case);
        if comps.len() > 1 {
            let reference = case.reference();
            for comp in comps.iter().filter(|c| !c.contains(&reference)) {
                let names: Vec<String> = comp.iter().map(|b| b.to_string()).collect();
                out.push(Violation::new(
                    "graph_disconnected",
                    "lines",
                    format!("buses {{{}}} are not connected to reference bus {reference}", names.join(", ")),
                ));
            }
        }
    }
    out
}

fn components(case: &NetworkCase) -> Vec<BTreeSet<BusId>> {
    let mut adj: BTreeMap<BusId, Vec<BusId>> = case.buses.iter().map(|b| (b.id, Vec::new())).collect();
    for l in &case.lines {
        adj.entry(l.from).or_default().push(l.to);
        adj.entry(l.to).or_default().push(l.from);
    }
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for &start in adj.keys() {
        if seen.contains(&start) {
            continue;
        }
        let mut comp = BTreeSet::new();
        let mut stack = vec![start];
        while let Some(b) = stack.pop() {
            if !seen.insert(b) {
                continue;
            }
            comp.insert(b);
            stack.extend(adj[&b].iter().copied().filter(|n| !seen.contains(n)));
        }
        out.push(comp);
    }
    out
}

fn validate_uc(case: &UcCase) -> Vec<Violation> {
    let mut out = Vec::new();
    if case.horizon == 0 {
        out.push(Violation::new("invalid_horizon", "horizon.hours", "horizon must be at least one hour"));
    }
    if case.units.is_empty() {
        out.push(Violation::new("missing_section", "uc_units", "at least one unit is required"));
    }
    let mut ids = HashSet::new();
    for (i, u) in case.units.iter().enumerate() {
        let path = format!("uc_units[{i}]");
        if !ids.insert(u.id.clone()) {
            out.push(Violation::new("duplicate_id", format!("{path}.id"), format!("unit {} declared twice", u.id)));
        }
        for (field, v) in [("c1", u.c1), ("c0", u.c0), ("c_su", u.c_su), ("c_sd", u.c_sd)] {
            if !finite_nonneg(v) {
                out.push(Violation::new("negative_cost", format!("{path}.{field}"), format!("unit {} has {field} = {v}", u.id)));
            }
        }
        for (field, v) in [("ramp_up", u.ramp_up), ("ramp_down", u.ramp_down)] {
            if !finite_nonneg(v) {
                out.push(Violation::new("negative_ramp", format!("{path}.{field}"), format!("unit {} has {field} = {v}", u.id)));
            }
        }
        if !(finite_nonneg(u.p_min) && u.p_max.is_finite()) {
            out.push(Violation::new("negative_limit", path.clone(), format!("unit {} needs finite limits with p_min >= 0", u.id)));
        } else if u.p_min > u.p_max {
            out.push(Violation::new(
                "gen_bounds_inverted",
                format!("{path}.p_min"),
                format!("unit {}: p_min {} > p_max {}", u.id, u.p_min, u.p_max),
            ));
        }
        for (field, v) in [("min_up", u.min_up), ("min_down", u.min_down)] {
            if v < 1 {
                out.push(Violation::new("invalid_min_time", format!("{path}.{field}"), format!("unit {} has {field} = 0", u.id)));
            }
        }
    }
    if case.initial_state.len() != case.units.len() {
        out.push(Violation::new(
            "initial_state_mismatch",
            "initial_state",
            format!("{} entries for {} units", case.initial_state.len(), case.units.len()),
        ));
    }
    for (i, s) in case.initial_state.iter().enumerate() {
        let path = format!("initial_state[{i}]");
        let Some(u) = case.units.get(i) else { continue };
        if s.unit != u.id {
            out.push(Violation::new(
                "dangling_reference",
                format!("{path}.unit"),
                format!("entry names unit {} but unit {i} is {}", s.unit, u.id),
            ));
            continue;
        }
        let ok = if s.on {
            s.output.is_finite() && s.output >= u.p_min && s.output <= u.p_max
        } else {
            s.output == 0.0
        };
        if !ok {
            out.push(Violation::new(
                "initial_output_inconsistent",
                format!("{path}.output"),
                format!("unit {} is {} with output {}", u.id, if s.on { "on" } else { "off" }, s.output),
            ));
        }
        if s.hours < 1 {
            out.push(Violation::new("invalid_min_time", format!("{path}.hours"), "initial duration must be at least one hour"));
        }
    }
    out
}
