//! Bundled case files: the five-bus and three-unit worked examples, the
//! MATPOWER benchmark subset and the small toys used by oracle tests.

use serde::Deserialize;

use crate::case::{parse_case, Case, DemandScenario, NetworkCase, UcCase};
use crate::matpower::import_matpower;

pub const CASE5_FIG1: &str = include_str!("../data/case5_fig1.toml");
pub const CASE14_DESK: &str = include_str!("../data/case14_desk.toml");
pub const TOY3_BUS: &str = include_str!("../data/toy3_bus.toml");
pub const UC_THREE_UNIT: &str = include_str!("../data/uc_three_unit.toml");
pub const UC_THREE_UNIT_PROFILES: &str = include_str!("../data/uc_three_unit_profiles.toml");
pub const UC_TOY: &str = include_str!("../data/uc_toy.toml");

/// The MATPOWER files accepted by [`import_matpower`], by name.
pub const MATPOWER: [(&str, &str); 5] = [
    ("case5", include_str!("../data/case5.m")),
    ("case14", include_str!("../data/case14.m")),
    ("case30", include_str!("../data/case30.m")),
    ("case57", include_str!("../data/case57.m")),
    ("case118", include_str!("../data/case118.m")),
];

fn network(text: &str) -> NetworkCase {
    match parse_case(text).expect("bundled case parses") {
        Case::Network(c) => c,
        Case::Uc(_) => panic!("bundled network case parsed as unit commitment"),
    }
}

fn uc(text: &str) -> UcCase {
    match parse_case(text).expect("bundled case parses") {
        Case::Uc(c) => c,
        Case::Network(_) => panic!("bundled unit-commitment case parsed as network"),
    }
}

/// Five-bus network with the worked-example overrides.
pub fn case5_fig1() -> NetworkCase {
    network(CASE5_FIG1)
}

/// IEEE 14-bus network with the reactive-only units removed and line ratings set.
pub fn case14_desk() -> NetworkCase {
    network(CASE14_DESK)
}

pub fn toy3_bus() -> NetworkCase {
    network(TOY3_BUS)
}

/// The three-unit commitment example.
pub fn uc_three_unit() -> UcCase {
    uc(UC_THREE_UNIT)
}

pub fn uc_toy() -> UcCase {
    uc(UC_TOY)
}

#[derive(Deserialize)]
struct Profiles {
    factual: Vec<f64>,
    counterfactual: Vec<f64>,
}

fn profiles() -> Profiles {
    toml::from_str(UC_THREE_UNIT_PROFILES).expect("bundled profiles parse")
}

/// Hourly demand of the three-unit example, hours 0..24.
pub fn uc_factual_profile() -> DemandScenario {
    DemandScenario::hourly(profiles().factual)
}

/// Published counterfactual profile of the three-unit example.
pub fn uc_published_counterfactual() -> DemandScenario {
    DemandScenario::hourly(profiles().counterfactual)
}

pub fn matpower_case(name: &str) -> Option<NetworkCase> {
    MATPOWER
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(n, text)| import_matpower(text, n).expect("bundled MATPOWER file imports"))
}

/// Any bundled network case by name.
pub fn network_by_name(name: &str) -> Option<NetworkCase> {
    match name {
        "case5-fig1" => Some(case5_fig1()),
        "case14-desk" => Some(case14_desk()),
        "toy3-bus" => Some(toy3_bus()),
        _ => matpower_case(name),
    }
}

pub fn uc_by_name(name: &str) -> Option<UcCase> {
    match name {
        "uc-three-unit" => Some(uc_three_unit()),
        "uc-toy" => Some(uc_toy()),
        _ => None,
    }
}
