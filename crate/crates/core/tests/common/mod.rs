//! Brute-force oracles shared by the unit-commitment test targets.
#![allow(dead_code)]

use gridcf::case::UcCase;
use gridcf::solver::{solve_lp, LinearProgram, Relation, Tolerances};

/// Brute-force oracle: every binary commitment pattern that passes the
/// window rules, completed by a dispatch LP, keeping the cheapest.
pub fn brute_force(case: &UcCase, demand: &[f64]) -> Option<f64> {
    let (ng, nt) = (case.units.len(), case.horizon);
    let mut best: Option<f64> = None;
    for mask in 0u64..(1 << (ng * nt)) {
        let u: Vec<Vec<bool>> = (0..ng).map(|g| (0..nt).map(|t| mask >> (g * nt + t) & 1 == 1).collect()).collect();
        if !windows_ok(case, &u) {
            continue;
        }
        let Some(cost) = dispatch_cost(case, &u, demand) else { continue };
        let total = cost + fixed_cost(case, &u);
        if best.map_or(true, |b| total < b) {
            best = Some(total);
        }
    }
    best
}

pub fn transitions(prev: bool, row: &[bool]) -> (Vec<bool>, Vec<bool>) {
    let mut on = prev;
    let mut su = Vec::new();
    let mut sd = Vec::new();
    for &x in row {
        su.push(!on && x);
        sd.push(on && !x);
        on = x;
    }
    (su, sd)
}

pub fn windows_ok(case: &UcCase, u: &[Vec<bool>]) -> bool {
    for (g, unit) in case.units.iter().enumerate() {
        let init = &case.initial_state[g];
        // a unit must finish its initial minimum up or down time
        let lock = if init.on { unit.min_up } else { unit.min_down }.saturating_sub(init.hours) as usize;
        if u[g].iter().take(lock).any(|&x| x != init.on) {
            return false;
        }
        let (su, sd) = transitions(init.on, &u[g]);
        for t in 0..u[g].len() {
            if su[t] {
                let end = (t + unit.min_up as usize).min(u[g].len());
                if u[g][t..end].iter().any(|x| !x) {
                    return false;
                }
            }
            if sd[t] {
                let end = (t + unit.min_down as usize).min(u[g].len());
                if u[g][t..end].iter().any(|&x| x) {
                    return false;
                }
            }
        }
    }
    true
}

pub fn fixed_cost(case: &UcCase, u: &[Vec<bool>]) -> f64 {
    let mut total = 0.0;
    for (g, unit) in case.units.iter().enumerate() {
        let (su, sd) = transitions(case.initial_state[g].on, &u[g]);
        for t in 0..u[g].len() {
            total += unit.c0 * u[g][t] as u8 as f64 + unit.c_su * su[t] as u8 as f64 + unit.c_sd * sd[t] as u8 as f64;
        }
    }
    total
}

pub fn dispatch_cost(case: &UcCase, u: &[Vec<bool>], demand: &[f64]) -> Option<f64> {
    let mut lp = LinearProgram::new();
    let p: Vec<Vec<_>> = case
        .units
        .iter()
        .enumerate()
        .map(|(g, unit)| {
            (0..case.horizon)
                .map(|t| {
                    let (lo, hi) = if u[g][t] { (unit.p_min, unit.p_max) } else { (0.0, 0.0) };
                    lp.add_var(format!("p{g}_{t}"), lo, hi, unit.c1)
                })
                .collect()
        })
        .collect();
    for (t, d) in demand.iter().enumerate() {
        lp.add_row(format!("b{t}"), p.iter().map(|row| (row[t], 1.0)).collect(), Relation::Eq, *d);
    }
    for (g, unit) in case.units.iter().enumerate() {
        let init = &case.initial_state[g];
        if init.on {
            lp.add_ranged_row("r0", vec![(p[g][0], 1.0)], init.output - unit.ramp_down, init.output + unit.ramp_up);
        }
        for t in 1..case.horizon {
            lp.add_ranged_row("r", vec![(p[g][t], 1.0), (p[g][t - 1], -1.0)], -unit.ramp_down, unit.ramp_up);
        }
    }
    let out = solve_lp(&lp, &Tolerances::default()).unwrap();
    out.is_optimal().then_some(out.objective)
}


/// Every commitment matrix of the case that passes the window rules.
pub fn admissible_patterns(case: &UcCase) -> Vec<Vec<Vec<bool>>> {
    let (ng, nt) = (case.units.len(), case.horizon);
    (0u64..(1 << (ng * nt)))
        .map(|mask| (0..ng).map(|g| (0..nt).map(|t| mask >> (g * nt + t) & 1 == 1).collect()).collect())
        .filter(|u: &Vec<Vec<bool>>| windows_ok(case, u))
        .collect()
}
