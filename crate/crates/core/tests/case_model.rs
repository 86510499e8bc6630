use gridcf::case::{parse_case, serialize_case, Case, CaseError, DemandScenario, ScenarioError, ScenarioKind};
use gridcf::fixtures;
use gridcf::matpower::{import_matpower, ImportError};
use proptest::prelude::*;

fn codes(text: &str) -> Vec<String> {
    match parse_case(text) {
        Err(CaseError::Semantic(v)) => v.into_iter().map(|v| v.code).collect(),
        other => panic!("expected semantic error, got {other:?}"),
    }
}

const TWO_BUS: &str = r#"
[meta]
name = "two"
reference_bus = 1

[[buses]]
id = 1

[[buses]]
id = 2

[[lines]]
id = "l"
from = 1
to = 2
susceptance = 10.0
limit = 100.0

[[generators]]
id = "g"
bus = 1
cost = 5.0
p_min = 0.0
p_max = 50.0

[[demands]]
id = "d"
bus = 2
default = 20.0
"#;

#[test]
fn five_bus_document_parses() {
    let case = fixtures::case5_fig1();
    assert_eq!(case.buses.len(), 5);
    assert_eq!(case.lines.len(), 6);
    assert_eq!(case.generators.len(), 5);
    let costs: Vec<f64> = case.generators.iter().map(|g| g.cost).collect();
    assert_eq!(costs, vec![14.0, 15.0, 30.0, 40.0, 10.0]);
    assert!(case.generators.iter().all(|g| g.p_min == 0.0 && g.p_max == 500.0));
    assert!(case.lines.iter().all(|l| l.limit == Some(240.0)));
    assert!(case.validate().is_empty());
}

#[test]
fn three_unit_document_parses() {
    let case = fixtures::uc_three_unit();
    let g1 = &case.units[0];
    let row = (
        g1.p_min, g1.p_max, g1.c1, g1.c0, g1.c_su, g1.c_sd, g1.ramp_up, g1.ramp_down, g1.min_up, g1.min_down,
    );
    assert_eq!(row, (50.0, 300.0, 10.0, 100.0, 300.0, 0.0, 10.0, 10.0, 4, 4));
    assert_eq!(case.horizon, 25);
}

#[test]
fn bundled_fixtures_are_valid() {
    for case in [fixtures::case14_desk(), fixtures::toy3_bus()] {
        assert!(case.validate().is_empty(), "{}", case.meta.name);
    }
    assert!(fixtures::uc_toy().validate().is_empty());
}

#[test]
fn dangling_bus_names_the_line() {
    let text = TWO_BUS.replace("to = 2", "to = 99");
    let err = parse_case(&text).unwrap_err();
    let CaseError::Semantic(v) = err else { panic!() };
    assert_eq!(v[0].code, "dangling_reference");
    assert!(v[0].path.starts_with("lines[0]"), "{}", v[0].path);
}

#[test]
fn inverted_generator_bounds() {
    let text = TWO_BUS.replace("p_min = 0.0\np_max = 50.0", "p_min = 10.0\np_max = 5.0");
    assert_eq!(codes(&text), vec!["gen_bounds_inverted"]);
}

#[test]
fn negative_limit_is_reported() {
    assert_eq!(codes(&TWO_BUS.replace("limit = 100.0", "limit = -1.0")), vec!["negative_limit"]);
}

#[test]
fn disconnected_bus_is_reported() {
    let text = format!("{TWO_BUS}\n[[buses]]\nid = 3\n");
    let err = parse_case(&text).unwrap_err();
    let CaseError::Semantic(v) = err else { panic!() };
    assert_eq!(v.len(), 1);
    assert_eq!(v[0].code, "graph_disconnected");
    assert!(v[0].message.contains('3'));
}

#[test]
fn syntax_errors_carry_a_position() {
    let text = "[meta]\nname = \"x\"\nbase_mva = = 3\n";
    match parse_case(text) {
        Err(CaseError::Syntax { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
}

#[test]
fn missing_initial_state_defaults_to_cold_start() {
    let text = fixtures::UC_THREE_UNIT.split("[[initial_state]]").next().unwrap();
    let Case::Uc(case) = parse_case(text).unwrap() else { panic!() };
    for (s, u) in case.initial_state.iter().zip(&case.units) {
        assert!(!s.on);
        assert_eq!(s.output, 0.0);
        assert_eq!(s.hours, u.min_up.max(u.min_down));
    }
}

#[test]
fn inconsistent_initial_output_is_reported() {
    let text = fixtures::UC_THREE_UNIT.replace("output = 216.5987", "output = 400.0");
    assert!(codes(&text).contains(&"initial_output_inconsistent".to_string()));
}

#[test]
fn unknown_sections_are_syntax_errors() {
    let text = format!("{TWO_BUS}\n[extra]\nx = 1\n");
    assert!(matches!(parse_case(&text), Err(CaseError::Syntax { .. })));
}

#[test]
fn scenario_checks() {
    let s = DemandScenario::nodal(vec![1.0, -2.0]);
    assert_eq!(
        s.check(ScenarioKind::DcopfNodal, 2),
        Err(ScenarioError::Negative { index: 1, value: -2.0 })
    );
    assert!(matches!(s.check(ScenarioKind::DcopfNodal, 3), Err(ScenarioError::Length { .. })));
    assert!(matches!(s.check(ScenarioKind::UcHourly, 2), Err(ScenarioError::Kind { .. })));
    assert_eq!(DemandScenario::nodal(vec![1.0, 5.0]).distance(&DemandScenario::nodal(vec![3.0, 4.0])), 3.0);
}

#[test]
fn content_id_is_stable() {
    let a = Case::Network(fixtures::case5_fig1());
    let b = parse_case(&serialize_case(&a)).unwrap();
    assert_eq!(a.content_id(), b.content_id());
    assert_ne!(a.content_id(), Case::Network(fixtures::toy3_bus()).content_id());
}

#[test]
fn matpower_benchmarks_import_cleanly() {
    for (name, _) in fixtures::MATPOWER {
        let case = fixtures::matpower_case(name).unwrap();
        assert!(case.validate().is_empty(), "{name}: {:?}", case.validate());
    }
}

#[test]
fn case5_susceptance_is_reciprocal_reactance() {
    // reactances of the PJM five-bus branch table
    let x = [0.0281, 0.0304, 0.0064, 0.0108, 0.0297, 0.0297];
    let case = fixtures::matpower_case("case5").unwrap();
    assert_eq!(case.lines.len(), 6);
    for (line, x) in case.lines.iter().zip(x) {
        assert!((line.susceptance - 1.0 / x).abs() < 1e-9);
    }
}

const MINI: &str = "mpc.baseMVA = 100;
mpc.bus = [
 1 3 0 0 0 0 1 1 0 0 1 1.1 0.9;
 2 1 50 0 0 0 1 1 0 0 1 1.1 0.9;
];
mpc.gen = [
 1 0 0 0 0 1 100 1 200 0;
 2 0 0 0 0 1 100 1 0 0;
];
mpc.branch = [
 1 2 0 0.1 0 100 0 0 0 0 1 -360 360;
];
mpc.gencost = [
 2 0 0 3 0.1 12 0;
 2 0 0 3 0.1 12 0;
];
";

#[test]
fn synchronous_condenser_is_dropped() {
    let case = import_matpower(MINI, "mini").unwrap();
    assert_eq!(case.generators.len(), 1);
    assert_eq!(case.generators[0].cost, 12.0);
    assert_eq!(case.demands.len(), 1);
    assert!(case.validate().is_empty());
}

#[test]
fn quadratic_only_costs_are_rejected() {
    let text = MINI.replace(" 2 0 0 3 0.1 12 0;\n 2 0 0 3 0.1 12 0;", " 2 0 0 3 0.1 0 0;\n 2 0 0 3 0.1 12 0;");
    assert_eq!(import_matpower(&text, "q"), Err(ImportError::UnsupportedCost(vec!["g1".into()])));
}

#[test]
fn missing_table_is_reported() {
    let text = MINI.replace("mpc.branch", "mpc.other");
    assert_eq!(import_matpower(&text, "m"), Err(ImportError::MissingTable("branch")));
}

fn arb_network() -> impl Strategy<Value = Case> {
    (2usize..7, 0u64..1000).prop_flat_map(|(n, seed)| {
        (
            prop::collection::vec((0.1f64..100.0, prop::option::of(0.0f64..500.0)), n - 1),
            prop::collection::vec((0usize..n, 0.0f64..60.0, 0.0f64..100.0, 0.0f64..100.0), 1..4),
            prop::collection::vec((0usize..n, 0.0f64..300.0), 0..4),
            Just((n, seed)),
        )
            .prop_map(|(lines, gens, demands, (n, seed))| {
                use gridcf::case::{Bus, BusId, Demand, Generator, Line, Meta, NetworkCase};
                // a spanning tree keeps the graph connected
                let lines = lines
                    .into_iter()
                    .enumerate()
                    .map(|(i, (b, limit))| Line {
                        id: format!("l{i}"),
                        from: BusId((seed as usize % (i + 1)) as u32 + 1),
                        to: BusId(i as u32 + 2),
                        susceptance: b,
                        limit,
                    })
                    .collect();
                Case::Network(NetworkCase {
                    meta: Meta {
                        name: format!("rand{seed}"),
                        base_mva: 100.0,
                        reference_bus: Some(BusId(1)),
                    },
                    buses: (1..=n as u32).map(|i| Bus { id: BusId(i) }).collect(),
                    lines,
                    generators: gens
                        .into_iter()
                        .enumerate()
                        .map(|(i, (bus, c, a, b))| Generator {
                            id: format!("g{i}"),
                            bus: BusId(bus as u32 + 1),
                            cost: c,
                            p_min: a.min(b),
                            p_max: a.max(b),
                        })
                        .collect(),
                    demands: demands
                        .into_iter()
                        .enumerate()
                        .map(|(i, (bus, v))| Demand {
                            id: format!("d{i}"),
                            bus: BusId(bus as u32 + 1),
                            default: v,
                        })
                        .collect(),
                })
            })
    })
}

proptest! {
    #[test]
    fn network_documents_round_trip(case in arb_network()) {
        prop_assert!(case.validate().is_empty());
        let back = parse_case(&serialize_case(&case)).unwrap();
        prop_assert_eq!(back, case);
    }

    #[test]
    fn uc_documents_round_trip(c1 in 0.0f64..80.0, ramp in 0.0f64..200.0, tu in 1u32..6, hours in 1usize..30) {
        let Case::Uc(mut case) = parse_case(fixtures::UC_THREE_UNIT).unwrap() else { unreachable!() };
        case.units[1].c1 = c1;
        case.units[2].ramp_up = ramp;
        case.units[0].min_up = tu;
        case.horizon = hours;
        let case = Case::Uc(case);
        let back = parse_case(&serialize_case(&case)).unwrap();
        prop_assert_eq!(back, case);
    }
}
