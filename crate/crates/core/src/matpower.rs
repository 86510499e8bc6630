//! Importer for the `mpc.bus` / `mpc.branch` / `mpc.gen` / `mpc.gencost` subset
//! of MATPOWER case files.

use thiserror::Error;

use crate::case::{Bus, BusId, Demand, Generator, Line, Meta, NetworkCase};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ImportError {
    #[error("missing table mpc.{0}")]
    MissingTable(&'static str),
    #[error("mpc.{table} row {row}: {message}")]
    BadRow {
        table: &'static str,
        row: usize,
        message: String,
    },
    #[error("mpc.{table} line {line}: cannot parse '{token}' as a number")]
    BadNumber {
        table: &'static str,
        line: usize,
        token: String,
    },
    #[error("mpc.{0} is not closed with ']'")]
    Unterminated(&'static str),
    #[error("unsupported cost model for generators {0:?}: no linear term")]
    UnsupportedCost(Vec<String>),
    #[error("piecewise-linear cost rows are not supported (generators {0:?})")]
    PiecewiseCost(Vec<String>),
    #[error("mpc.gencost has {found} rows for {expected} generators")]
    CostRowCount { expected: usize, found: usize },
}

/// Column layout of the MATPOWER tables (zero-based).
mod col {
    pub const BUS_I: usize = 0;
    pub const BUS_TYPE: usize = 1;
    pub const PD: usize = 2;
    pub const F_BUS: usize = 0;
    pub const T_BUS: usize = 1;
    pub const BR_X: usize = 3;
    pub const RATE_A: usize = 5;
    pub const BR_STATUS: usize = 10;
    pub const GEN_BUS: usize = 0;
    pub const GEN_STATUS: usize = 7;
    pub const PMAX: usize = 8;
    pub const PMIN: usize = 9;
}

fn strip_comment(line: &str) -> &str {
    line.split('%').next().unwrap_or("")
}

/// Extracts the numeric matrix assigned to `mpc.<name>`.
fn table(text: &str, name: &'static str) -> Result<Vec<Vec<f64>>, ImportError> {
    let key = format!("mpc.{name}");
    let mut lines = text.lines().enumerate();
    let start = loop {
        let Some((i, raw)) = lines.next() else {
            return Err(ImportError::MissingTable(name));
        };
        let line = strip_comment(raw);
        if let Some(pos) = line.find(&key) {
            let rest = line[pos + key.len()..].trim_start();
            if let Some(after_eq) = rest.strip_prefix('=') {
                if let Some(b) = after_eq.find('[') {
                    break (i, after_eq[b + 1..].to_string());
                }
            }
        }
    };
    let mut rows = Vec::new();
    let mut current: Vec<f64> = Vec::new();
    let mut pending = Some(start);
    loop {
        let (line_no, body) = match pending.take() {
            Some(p) => p,
            None => match lines.next() {
                Some((i, raw)) => (i, strip_comment(raw).to_string()),
                None => return Err(ImportError::Unterminated(name)),
            },
        };
        let (body, closed) = match body.find(']') {
            Some(p) => (body[..p].to_string(), true),
            None => (body, false),
        };
        for chunk in body.split_inclusive(';') {
            let end_row = chunk.ends_with(';');
            for tok in chunk.trim_end_matches(';').split(|c: char| c.is_whitespace() || c == ',') {
                if tok.is_empty() {
                    continue;
                }
                let v = parse_number(tok).ok_or_else(|| ImportError::BadNumber {
                    table: name,
                    line: line_no + 1,
                    token: tok.to_string(),
                })?;
                current.push(v);
            }
            if end_row && !current.is_empty() {
                rows.push(std::mem::take(&mut current));
            }
        }
        // a newline also terminates a row
        if !current.is_empty() {
            rows.push(std::mem::take(&mut current));
        }
        if closed {
            return Ok(rows);
        }
    }
}

fn parse_number(tok: &str) -> Option<f64> {
    match tok {
        "Inf" | "inf" => Some(f64::INFINITY),
        "-Inf" | "-inf" => Some(f64::NEG_INFINITY),
        _ => tok.parse::<f64>().ok().filter(|v| !v.is_nan()),
    }
}

fn scalar(text: &str, name: &str) -> Option<f64> {
    let key = format!("mpc.{name}");
    text.lines().map(strip_comment).find_map(|line| {
        let pos = line.find(&key)?;
        let rest = line[pos + key.len()..].trim_start().strip_prefix('=')?;
        parse_number(rest.trim().trim_end_matches(';').trim())
    })
}

fn need(row: &[f64], idx: usize, table: &'static str, r: usize) -> Result<f64, ImportError> {
    row.get(idx).copied().ok_or_else(|| ImportError::BadRow {
        table,
        row: r + 1,
        message: format!("expected at least {} columns, found {}", idx + 1, row.len()),
    })
}

fn bus_id(v: f64, table: &'static str, r: usize) -> Result<BusId, ImportError> {
    if v.fract() == 0.0 && v >= 0.0 && v <= u32::MAX as f64 {
        Ok(BusId(v as u32))
    } else {
        Err(ImportError::BadRow {
            table,
            row: r + 1,
            message: format!("bus number {v} is not a non-negative integer"),
        })
    }
}

/// Converts a MATPOWER case into a [`NetworkCase`].
///
/// Susceptance is `1/x`; branches out of service are skipped and a zero
/// `rateA` means unlimited. Generators out of service or with `Pmax = 0`
/// (reactive-only) are dropped. Polynomial costs contribute their linear term;
/// rows whose only nonzero terms are of higher order are rejected. Every bus
/// with positive `Pd` gets one demand.
pub fn import_matpower(text: &str, name: &str) -> Result<NetworkCase, ImportError> {
    let bus = table(text, "bus")?;
    let branch = table(text, "branch")?;
    let gen = table(text, "gen")?;
    let gencost = table(text, "gencost")?;
    let base_mva = scalar(text, "baseMVA").unwrap_or(100.0);

    let mut buses = Vec::new();
    let mut demands = Vec::new();
    let mut reference = None;
    for (r, row) in bus.iter().enumerate() {
        let id = bus_id(need(row, col::BUS_I, "bus", r)?, "bus", r)?;
        buses.push(Bus { id });
        if need(row, col::BUS_TYPE, "bus", r)? == 3.0 && reference.is_none() {
            reference = Some(id);
        }
        let pd = need(row, col::PD, "bus", r)?;
        if pd > 0.0 {
            demands.push(Demand {
                id: format!("d{id}"),
                bus: id,
                default: pd,
            });
        }
    }

    let mut lines = Vec::new();
    for (r, row) in branch.iter().enumerate() {
        let status = row.get(col::BR_STATUS).copied().unwrap_or(1.0);
        if status == 0.0 {
            continue;
        }
        let x = need(row, col::BR_X, "branch", r)?;
        if x == 0.0 {
            return Err(ImportError::BadRow {
                table: "branch",
                row: r + 1,
                message: "zero reactance".into(),
            });
        }
        let rate = need(row, col::RATE_A, "branch", r)?;
        lines.push(Line {
            id: format!("l{}", lines.len() + 1),
            from: bus_id(need(row, col::F_BUS, "branch", r)?, "branch", r)?,
            to: bus_id(need(row, col::T_BUS, "branch", r)?, "branch", r)?,
            susceptance: 1.0 / x,
            limit: (rate > 0.0 && rate.is_finite()).then_some(rate),
        });
    }

    if gencost.len() < gen.len() {
        return Err(ImportError::CostRowCount {
            expected: gen.len(),
            found: gencost.len(),
        });
    }
    let mut generators = Vec::new();
    let mut no_linear = Vec::new();
    let mut piecewise = Vec::new();
    for (r, row) in gen.iter().enumerate() {
        let id = format!("g{}", r + 1);
        let status = row.get(col::GEN_STATUS).copied().unwrap_or(1.0);
        let p_max = need(row, col::PMAX, "gen", r)?;
        if status <= 0.0 || p_max == 0.0 {
            continue;
        }
        let cost_row = &gencost[r];
        let model = need(cost_row, 0, "gencost", r)?;
        if model != 2.0 {
            piecewise.push(id);
            continue;
        }
        let n = need(cost_row, 3, "gencost", r)? as usize;
        let coefs = cost_row.get(4..4 + n).ok_or_else(|| ImportError::BadRow {
            table: "gencost",
            row: r + 1,
            message: format!("declares {n} coefficients but has {}", cost_row.len().saturating_sub(4)),
        })?;
        // coefficients run from the highest order down to the constant
        let linear = if n >= 2 { coefs[n - 2] } else { 0.0 };
        let higher = coefs[..n.saturating_sub(2)].iter().any(|c| *c != 0.0);
        if linear == 0.0 && higher {
            no_linear.push(id);
            continue;
        }
        generators.push(Generator {
            id,
            bus: bus_id(need(row, col::GEN_BUS, "gen", r)?, "gen", r)?,
            cost: linear,
            p_min: need(row, col::PMIN, "gen", r)?.max(0.0),
            p_max,
        });
    }
    if !piecewise.is_empty() {
        return Err(ImportError::PiecewiseCost(piecewise));
    }
    if !no_linear.is_empty() {
        return Err(ImportError::UnsupportedCost(no_linear));
    }

    Ok(NetworkCase {
        meta: Meta {
            name: name.to_string(),
            base_mva,
            reference_bus: reference,
        },
        buses,
        lines,
        generators,
        demands,
    })
}
