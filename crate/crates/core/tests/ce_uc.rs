use std::collections::BTreeSet;

use gridcf::case::{DemandScenario, UcCase};
use gridcf::ce::uc::{derive_fixed_binaries, elastic_penalty, explain_uc, EnumeratedPatternSet, FixedBinaries, UcHints};
use gridcf::ce::{knn1_uc, CeConfig, CeError, CeResult, CeStatus, Counterfactual, Method, SolutionRegionUc};
use gridcf::dataset::{ProblemKind, Sample, SampleSolution, SolveDataset};
use gridcf::fixtures;
use gridcf::uc::solve_uc;
use gridcf::solver::{solve_lp, LinearProgram, Relation, Tolerances};
use proptest::prelude::*;

mod common;
use common::{admissible_patterns, fixed_cost};

/// Cheapest dispatch of the on-units `on` serving `theta`, by merit order.
fn hour_cost(case: &UcCase, on: &[usize], theta: f64) -> Option<f64> {
    let lo: f64 = on.iter().map(|&g| case.units[g].p_min).sum();
    let hi: f64 = on.iter().map(|&g| case.units[g].p_max).sum();
    if theta < lo - 1e-9 || theta > hi + 1e-9 {
        return None;
    }
    let mut order = on.to_vec();
    order.sort_by(|&a, &b| case.units[a].c1.total_cmp(&case.units[b].c1));
    let mut cost: f64 = on.iter().map(|&g| case.units[g].c1 * case.units[g].p_min).sum();
    let mut rest = theta - lo;
    for g in order {
        let take = rest.min(case.units[g].p_max - case.units[g].p_min).max(0.0);
        cost += take * case.units[g].c1;
        rest -= take;
    }
    Some(cost)
}

fn on_units(u: &[Vec<bool>], t: usize) -> Vec<usize> {
    (0..u.len()).filter(|&g| u[g][t]).collect()
}

/// Exact counterfactual distance for cases whose ramp limits never bind.
///
/// Every hourly cost is piecewise linear in that hour's demand with kinks at
/// sums of unit limits, so on each box of kinks the "pattern U is no dearer
/// than every other pattern" condition is linear and one LP per (U, box)
/// finds the closest demand. The minimum over all of them is the answer.
fn cell_oracle(case: &UcCase, factual: &[f64], unit: usize, hour: usize) -> Option<f64> {
    let patterns = admissible_patterns(case);
    let ng = case.units.len();
    let mut kinks = vec![0.0];
    for mask in 0u32..(1 << ng) {
        for pick in 0u32..(1 << ng) {
            let s: f64 = (0..ng)
                .filter(|g| mask >> g & 1 == 1)
                .map(|g| if pick >> g & 1 == 1 { case.units[g].p_max } else { case.units[g].p_min })
                .sum();
            kinks.push(s);
        }
    }
    kinks.sort_by(f64::total_cmp);
    kinks.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    let cells: Vec<(f64, f64)> = kinks.windows(2).map(|w| (w[0], w[1])).collect();
    let nt = case.horizon;
    let mut best: Option<f64> = None;
    let mut idx = vec![0usize; nt];
    loop {
        let boxes: Vec<(f64, f64)> = idx.iter().map(|&i| cells[i]).collect();
        // affine cost of every pattern on this box: fixed + sum(a_t + s_t * theta_t)
        let affine: Vec<Option<(f64, Vec<f64>)>> = patterns
            .iter()
            .map(|u| {
                let mut constant = fixed_cost(case, u);
                let mut slope = Vec::with_capacity(nt);
                for t in 0..nt {
                    let on = on_units(u, t);
                    let (a, b) = boxes[t];
                    let (x0, x1) = (a + 0.25 * (b - a), a + 0.75 * (b - a));
                    let c0 = hour_cost(case, &on, x0)?;
                    let c1 = hour_cost(case, &on, x1)?;
                    let s = (c1 - c0) / (x1 - x0);
                    constant += c0 - s * x0;
                    slope.push(s);
                }
                Some((constant, slope))
            })
            .collect();
        for (k, u) in patterns.iter().enumerate() {
            if !u[unit][hour] {
                continue;
            }
            let Some((cu, su)) = &affine[k] else { continue };
            let mut lp = LinearProgram::new();
            let mut theta = Vec::new();
            for t in 0..nt {
                let th = lp.add_var(format!("t{t}"), boxes[t].0, boxes[t].1, 0.0);
                let a = lp.add_var(format!("a{t}"), 0.0, f64::INFINITY, 1.0);
                let b = lp.add_var(format!("b{t}"), 0.0, f64::INFINITY, 1.0);
                lp.add_row(format!("d{t}"), vec![(th, 1.0), (a, -1.0), (b, 1.0)], Relation::Eq, factual[t]);
                theta.push(th);
            }
            for (j, other) in affine.iter().enumerate() {
                let Some((cv, sv)) = other else { continue };
                if j == k {
                    continue;
                }
                let coefs = (0..nt).map(|t| (theta[t], su[t] - sv[t])).collect();
                lp.add_row(format!("opt{j}"), coefs, Relation::Le, cv - cu);
            }
            let out = solve_lp(&lp, &Tolerances::default()).unwrap();
            if out.is_optimal() && best.map_or(true, |b| out.objective < b) {
                best = Some(out.objective);
            }
        }
        let mut t = 0;
        loop {
            if t == nt {
                return best;
            }
            idx[t] += 1;
            if idx[t] < cells.len() {
                break;
            }
            idx[t] = 0;
            t += 1;
        }
    }
}

fn toy_question(unit: &str, hour: usize) -> SolutionRegionUc {
    SolutionRegionUc { unit: unit.into(), hour }
}

fn explain(case: &UcCase, factual: &[f64], region: &SolutionRegionUc, method: Method, hints: &UcHints) -> CeResult {
    explain_uc(case, &DemandScenario::hourly(factual.to_vec()), region, method, hints, &CeConfig::default()).unwrap()
}

/// Worst-case operating cost of any schedule, divided by the elastic penalty.
/// The elastic subproblem can overstate a pattern's cost by at most this much
/// in distance when the closest demand sits on that pattern's feasibility edge.
fn elastic_gap(case: &UcCase) -> f64 {
    let hourly: f64 = case.units.iter().map(|u| u.c1 * u.p_max + u.c0 + u.c_su + u.c_sd).sum();
    hourly * case.horizon as f64 / elastic_penalty(case)
}

#[test]
fn cost_driven_question_matches_oracle_exactly() {
    let case = fixtures::uc_toy();
    let factual = [20.0, 80.0, 20.0];
    let oracle = cell_oracle(&case, &factual, 1, 0).unwrap();
    assert!((oracle - 10.0).abs() < 1e-6);
    let r = explain(&case, &factual, &toy_question("b", 0), Method::Decomp, &UcHints::default());
    assert!(r.is_optimal());
    assert!((r.distance - oracle).abs() < 1e-6, "{}", r.distance);
    assert!((r.deltas[0] - 10.0).abs() < 1e-6);
    let v = r.verification.unwrap();
    assert!(v.passed, "{:?}", v.notes);
    assert!(v.proposition_holds(1e-6));
    match r.counterfactual {
        Some(Counterfactual::Schedule(s)) => assert!(s.u[1][0]),
        other => panic!("{other:?}"),
    }
}

#[test]
fn boundary_questions_stay_within_elastic_gap() {
    let case = fixtures::uc_toy();
    let gap = elastic_gap(&case);
    assert!(gap < 0.5, "{gap}");
    let questions: [([f64; 3], &str, usize); 5] = [
        ([30.0, 40.0, 35.0], "a", 0),
        ([30.0, 40.0, 35.0], "a", 2),
        ([40.0, 60.0, 30.0], "a", 1),
        ([50.0, 50.0, 50.0], "a", 2),
        ([20.0, 80.0, 20.0], "a", 2),
    ];
    for (factual, unit, hour) in questions {
        let g = case.unit(unit).unwrap();
        let oracle = cell_oracle(&case, &factual, g, hour).unwrap();
        let r = explain(&case, &factual, &toy_question(unit, hour), Method::Decomp, &UcHints::default());
        assert!(r.is_optimal(), "{factual:?} {unit}@{hour}: {:?}", r.status);
        assert!(r.distance >= oracle - 1e-6, "{factual:?} {unit}@{hour}: {} < {oracle}", r.distance);
        assert!(r.distance <= oracle + gap, "{factual:?} {unit}@{hour}: {} vs {oracle}", r.distance);
        assert!(r.verification.unwrap().passed);
    }
}

#[test]
fn lower_bounds_never_decrease_and_patterns_grow() {
    let case = fixtures::uc_toy();
    let r = explain(&case, &[50.0, 50.0, 50.0], &toy_question("a", 2), Method::Decomp, &UcHints::default());
    assert!(r.is_optimal());
    assert!(!r.trace.is_empty());
    for w in r.trace.windows(2) {
        assert!(w[1].lower_bound >= w[0].lower_bound - 1e-6);
        assert_eq!(w[1].patterns, w[0].patterns + 1);
    }
    let last = r.trace.last().unwrap();
    assert!(last.master_cost <= last.subproblem_cost + 1e-6 * last.subproblem_cost.max(1.0));
    assert_eq!(r.iterations, r.trace.len());
    assert!((r.bound - r.distance).abs() < 1e-6);
}

#[test]
fn committed_unit_needs_no_change() {
    let case = fixtures::uc_toy();
    let r = explain(&case, &[20.0, 80.0, 20.0], &toy_question("a", 0), Method::Decomp, &UcHints::default());
    assert!(r.is_optimal());
    assert_eq!(r.distance, 0.0);
    assert!(r.trace.is_empty());
}

#[test]
fn bad_questions_are_rejected() {
    let case = fixtures::uc_toy();
    let factual = [20.0, 80.0, 20.0];
    let hints = UcHints::default();
    let run = |region: SolutionRegionUc, method| {
        explain_uc(&case, &DemandScenario::hourly(factual.to_vec()), &region, method, &hints, &CeConfig::default())
    };
    assert!(matches!(run(toy_question("zz", 0), Method::Decomp), Err(CeError::UnknownGenerator(_))));
    assert!(matches!(run(toy_question("b", 3), Method::Decomp), Err(CeError::HourOutOfRange { .. })));
    assert!(matches!(run(toy_question("b", 0), Method::Sos1), Err(CeError::WrongMethod(Method::Sos1))));
}

fn uc_sample(theta: Vec<f64>, u: Vec<Vec<bool>>) -> Sample {
    Sample {
        theta: DemandScenario::hourly(theta),
        solution: SampleSolution::Uc { p: vec![], u, objective: 0.0 },
    }
}

fn uc_dataset(samples: Vec<Sample>) -> SolveDataset {
    SolveDataset {
        kind: ProblemKind::Uc,
        case_id: "toy".into(),
        case_name: "uc-toy".into(),
        seed: 0,
        samples,
    }
}

#[test]
fn fixed_binaries_keep_only_unanimous_entries() {
    let ds = uc_dataset(vec![
        uc_sample(vec![1.0, 1.0], vec![vec![true, false]]),
        uc_sample(vec![2.0, 2.0], vec![vec![true, true]]),
    ]);
    let fb = derive_fixed_binaries(&ds, None);
    assert_eq!(fb.b1, BTreeSet::from([(0, 0)]));
    assert!(fb.b0.is_empty());

    let single = uc_dataset(vec![uc_sample(vec![1.0, 1.0], vec![vec![true, false], vec![false, false]])]);
    let fb = derive_fixed_binaries(&single, None);
    assert_eq!(fb.b1, BTreeSet::from([(0, 0)]));
    assert_eq!(fb.b0, BTreeSet::from([(0, 1), (1, 0), (1, 1)]));
    let fb = derive_fixed_binaries(&single, Some((1, 0)));
    assert_eq!(fb.b0, BTreeSet::from([(0, 1), (1, 1)]));

    assert_eq!(derive_fixed_binaries(&uc_dataset(vec![]), None), FixedBinaries::default());
}

#[test]
fn knn1_picks_closest_committed_sample() {
    let factual = DemandScenario::hourly(vec![50.0, 50.0]);
    let ds = uc_dataset(vec![
        uc_sample(vec![90.0, 50.0], vec![vec![true, true]]),
        uc_sample(vec![50.0, 55.0], vec![vec![false, false]]),
        uc_sample(vec![55.0, 50.0], vec![vec![false, true]]),
        uc_sample(vec![45.0, 50.0], vec![vec![false, true]]),
    ]);
    let k = knn1_uc(&ds, &factual, 0, 1).unwrap();
    assert_eq!(k.sample, 2);
    assert!((k.distance - 5.0).abs() < 1e-12);
    let k = knn1_uc(&ds, &factual, 0, 0).unwrap();
    assert_eq!(k.sample, 0);
    assert!((k.distance - 40.0).abs() < 1e-12);
    assert!(knn1_uc(&uc_dataset(vec![ds.samples[1].clone()]), &factual, 0, 0).is_none());
    let own = uc_dataset(vec![uc_sample(vec![50.0, 50.0], vec![vec![true, true]])]);
    assert_eq!(knn1_uc(&own, &factual, 0, 0).unwrap().distance, 0.0);
}

#[test]
fn pattern_set_deduplicates() {
    let mut set = EnumeratedPatternSet::default();
    assert!(set.is_empty());
    assert!(set.insert(vec![vec![true, false]]));
    assert!(!set.insert(vec![vec![true, false]]));
    assert!(set.insert(vec![vec![true, true]]));
    assert_eq!(set.len(), 2);
}

#[test]
fn cut_variant_with_consistent_hints_agrees() {
    let case = fixtures::uc_toy();
    let factual = [20.0, 80.0, 20.0];
    let region = toy_question("b", 0);
    let plain = explain(&case, &factual, &region, Method::Decomp, &UcHints::default());
    // samples whose schedules all keep `a` on at hour 0, so (a, 0) lands in B1
    let samples = [[20.0, 80.0, 20.0], [30.0, 70.0, 20.0], [25.0, 90.0, 25.0]]
        .into_iter()
        .map(|d| {
            let s = solve_uc(&case, &DemandScenario::hourly(d.to_vec()), None).unwrap();
            uc_sample(d.to_vec(), s.u)
        })
        .collect();
    let ds = uc_dataset(samples);
    let fixed = derive_fixed_binaries(&ds, Some((1, 0)));
    assert!(fixed.b1.contains(&(0, 0)));
    assert!(!fixed.b0.contains(&(1, 0)));
    let hints = UcHints {
        fixed: Some(fixed),
        distance_bound: Some(plain.distance + 50.0),
    };
    let cut = explain(&case, &factual, &region, Method::DecompCut, &hints);
    assert!(cut.is_optimal(), "{:?}", cut.status);
    assert!(cut.distance >= plain.distance - 1e-6);
    assert!((cut.distance - plain.distance).abs() < 1e-6);
}

#[test]
fn tight_distance_bound_makes_cut_variant_heuristically_infeasible() {
    let case = fixtures::uc_toy();
    let hints = UcHints {
        fixed: None,
        distance_bound: Some(1.0),
    };
    let r = explain(&case, &[20.0, 80.0, 20.0], &toy_question("b", 0), Method::DecompCut, &hints);
    assert_eq!(r.status, CeStatus::HeuristicInfeasible);
    assert!(r.theta.is_none());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn engine_brackets_oracle(d in proptest::collection::vec(0.0f64..200.0, 3)) {
        let case = fixtures::uc_toy();
        let d: Vec<f64> = d.iter().map(|x| x.round()).collect();
        let s = solve_uc(&case, &DemandScenario::hourly(d.clone()), None).unwrap();
        prop_assume!(s.is_optimal());
        let Some((g, t)) = (0..2).flat_map(|g| (0..3).map(move |t| (g, t))).find(|&(g, t)| !s.u[g][t]) else {
            return Ok(());
        };
        let Some(oracle) = cell_oracle(&case, &d, g, t) else { return Ok(()) };
        let name = case.units[g].id.clone();
        let r = explain(&case, &d, &toy_question(&name, t), Method::Decomp, &UcHints::default());
        prop_assert!(r.is_optimal(), "{:?}", r.status);
        prop_assert!(r.distance >= oracle - 1e-6, "{} < {}", r.distance, oracle);
        prop_assert!(r.distance <= oracle + elastic_gap(&case), "{} vs {}", r.distance, oracle);
        let v = r.verification.unwrap();
        prop_assert!(v.passed, "{:?}", v.notes);
    }
}
