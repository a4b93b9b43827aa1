//! Restricted reader for MATPOWER case files.
//!
//! Only `mpc.baseMVA`, `mpc.bus`, `mpc.branch`, `mpc.gen` and `mpc.gencost`
//! are read. Polynomial costs (model 2) of degree at most two are supported.
//! Tap-changing transformers, phase shifters, isolated buses and unlimited
//! line ratings (`rateA = 0`) are rejected. Branch resistance, line charging
//! and bus shunts are dropped with a warning.

use super::{CaseParts, GridCase};
use crate::error::{Error, Result};

struct Block {
    rows: Vec<(usize, Vec<f64>)>,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn strip_comment(line: &str) -> &str {
    line.split('%').next().unwrap_or("")
}

/// Collects the numeric rows of `mpc.<name> = [ ... ];`.
fn read_block(text: &str, name: &str) -> Result<Option<Block>> {
    let header = format!("mpc.{name}");
    let mut lines = text.lines().enumerate();
    let mut rows = Vec::new();
    let start = loop {
        match lines.next() {
            None => return Ok(None),
            Some((i, l)) => {
                let l = strip_comment(l).trim();
                if let Some(rest) = l.strip_prefix(&header) {
                    let rest = rest.trim_start();
                    if let Some(rest) = rest.strip_prefix('=') {
                        let rest = rest.trim_start();
                        if let Some(rest) = rest.strip_prefix('[') {
                            break (i, rest.to_string());
                        }
                        return Err(parse_err(i + 1, format!("{header} is not a matrix block")));
                    }
                }
            }
        }
    };

    let start_line = start.0 + 1;
    let mut current: Vec<f64> = Vec::new();
    let mut pending = Some(start);
    loop {
        let (lineno, content) = match pending.take() {
            Some(p) => p,
            None => match lines.next() {
                Some((i, l)) => (i, strip_comment(l).to_string()),
                None => return Err(parse_err(start_line, format!("unterminated {header} block"))),
            },
        };
        let (body, closed) = match content.find(']') {
            Some(pos) => (&content[..pos], true),
            None => (content.as_str(), false),
        };
        for (k, segment) in body.split(';').enumerate() {
            if k > 0 && !current.is_empty() {
                rows.push((lineno + 1, std::mem::take(&mut current)));
            }
            for tok in segment.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()) {
                let v = parse_number(tok)
                    .ok_or_else(|| parse_err(lineno + 1, format!("invalid number '{tok}' in {header}")))?;
                current.push(v);
            }
        }
        // a newline also ends a row
        if !current.is_empty() {
            rows.push((lineno + 1, std::mem::take(&mut current)));
        }
        if closed {
            break;
        }
    }
    Ok(Some(Block { rows }))
}

fn parse_number(tok: &str) -> Option<f64> {
    match tok {
        "Inf" | "inf" => Some(f64::INFINITY),
        "-Inf" | "-inf" => Some(f64::NEG_INFINITY),
        _ => tok.parse().ok(),
    }
}

fn read_base_mva(text: &str) -> Result<f64> {
    for (i, l) in text.lines().enumerate() {
        let l = strip_comment(l).trim();
        if let Some(rest) = l.strip_prefix("mpc.baseMVA") {
            let v = rest
                .trim_start()
                .strip_prefix('=')
                .map(|r| r.trim().trim_end_matches(';').trim())
                .and_then(|r| r.parse::<f64>().ok())
                .ok_or_else(|| parse_err(i + 1, "malformed mpc.baseMVA"))?;
            return Ok(v);
        }
    }
    Ok(100.0)
}

fn require_cols(line: usize, row: &[f64], n: usize, what: &str) -> Result<()> {
    if row.len() < n {
        return Err(parse_err(line, format!("{what} row has {} columns, need at least {n}", row.len())));
    }
    Ok(())
}

fn as_id(line: usize, v: f64) -> Result<u32> {
    if v >= 0.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
        Ok(v as u32)
    } else {
        Err(parse_err(line, format!("invalid bus number {v}")))
    }
}

pub fn parse_matpower(text: &str) -> Result<GridCase> {
    let base_mva = read_base_mva(text)?;
    let bus = read_block(text, "bus")?.ok_or_else(|| parse_err(0, "missing mpc.bus block"))?;
    let branch = read_block(text, "branch")?.ok_or_else(|| parse_err(0, "missing mpc.branch block"))?;
    let gen = read_block(text, "gen")?.ok_or_else(|| parse_err(0, "missing mpc.gen block"))?;
    let gencost = read_block(text, "gencost")?.ok_or_else(|| parse_err(0, "missing mpc.gencost block"))?;

    let mut parts = CaseParts {
        base_mva,
        ..Default::default()
    };

    let mut shunts = 0;
    for (line, row) in &bus.rows {
        require_cols(*line, row, 6, "bus")?;
        if row[1] as i64 == 4 {
            return Err(parse_err(*line, "isolated buses (type 4) are not supported"));
        }
        if row[4] != 0.0 || row[5] != 0.0 {
            shunts += 1;
        }
        parts.buses.push((as_id(*line, row[0])?, row[2], None));
    }

    let (mut resistive, mut skipped_branches) = (0, 0);
    for (line, row) in &branch.rows {
        require_cols(*line, row, 11, "branch")?;
        if row[10] == 0.0 {
            skipped_branches += 1;
            continue;
        }
        let (ratio, angle) = (row[8], row[9]);
        if !(ratio == 0.0 || ratio == 1.0) {
            return Err(parse_err(*line, "transformer tap ratios are not supported"));
        }
        if angle != 0.0 {
            return Err(parse_err(*line, "phase-shifting transformers are not supported"));
        }
        if row[5] == 0.0 {
            return Err(parse_err(*line, "unlimited line rating (rateA = 0) is not supported"));
        }
        if row[2] != 0.0 || row[4] != 0.0 {
            resistive += 1;
        }
        parts
            .branches
            .push((as_id(*line, row[0])?, as_id(*line, row[1])?, row[3], row[5]));
    }

    if gen.rows.len() != gencost.rows.len() {
        return Err(parse_err(
            gencost.rows.first().map_or(0, |r| r.0),
            format!("mpc.gencost has {} rows but mpc.gen has {}", gencost.rows.len(), gen.rows.len()),
        ));
    }
    let mut skipped_gens = 0;
    for ((line, row), (cline, cost)) in gen.rows.iter().zip(&gencost.rows) {
        require_cols(*line, row, 10, "gen")?;
        require_cols(*cline, cost, 4, "gencost")?;
        if cost[0] as i64 != 2 {
            return Err(parse_err(*cline, "only polynomial cost model 2 is supported"));
        }
        let ncoef = cost[3];
        if ncoef.fract() != 0.0 || !(0.0..=3.0).contains(&ncoef) {
            return Err(parse_err(*cline, "polynomial costs above degree 2 are not supported"));
        }
        let ncoef = ncoef as usize;
        require_cols(*cline, cost, 4 + ncoef, "gencost")?;
        let coeffs = &cost[4..4 + ncoef];
        let mut c = [0.0; 3];
        // highest order first
        for (k, &v) in coeffs.iter().rev().enumerate() {
            c[k] = v;
        }
        if row[7] <= 0.0 {
            skipped_gens += 1;
            continue;
        }
        parts
            .generators
            .push((as_id(*line, row[0])?, row[9], row[8], c[2], c[1], c[0]));
    }

    if shunts > 0 {
        log::warn!("ignoring shunt terms on {shunts} buses (DC model)");
    }
    if resistive > 0 {
        log::warn!("ignoring resistance and charging on {resistive} branches (DC model)");
    }
    if skipped_branches + skipped_gens > 0 {
        log::warn!("skipped {skipped_branches} out-of-service branches and {skipped_gens} generators");
    }
    GridCase::from_parts(parts)
}
