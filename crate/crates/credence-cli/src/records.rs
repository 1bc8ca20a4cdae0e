//! CSV serialization of per-sample credibility records.
//!
//! Header: `sample_id,label,status,iterations,risk,res_fixed_point,
//! res_stationarity,res_comp_slack,c_origin_0..,c_dagger_0..,softmax_0..` with one block of K
//! columns per vector. Floats carry 17 significant digits.

use std::path::Path;

use anyhow::{bail, Context, Result};

use credence_core::report::fmt_f64;
use credence_core::robustness::CredibilityRecord;
use credence_core::solver::SolverStatus;

fn status_str(s: SolverStatus) -> &'static str {
    match s {
        SolverStatus::Converged => "converged",
        SolverStatus::MaxIters => "max_iters",
        SolverStatus::Diverged => "diverged",
    }
}

fn parse_status(s: &str) -> Result<SolverStatus> {
    Ok(match s {
        "converged" => SolverStatus::Converged,
        "max_iters" => SolverStatus::MaxIters,
        "diverged" => SolverStatus::Diverged,
        other => bail!("unknown solver status '{other}'"),
    })
}

pub fn records_to_csv(records: &[CredibilityRecord]) -> Result<String> {
    let Some(first) = records.first() else {
        bail!("no records to write");
    };
    let k = first.c_dagger.len();
    let mut out = String::from("sample_id,label,status,iterations,risk,res_fixed_point,res_stationarity,res_comp_slack");
    for name in ["c_origin", "c_dagger", "softmax"] {
        for i in 0..k {
            out.push_str(&format!(",{name}_{i}"));
        }
    }
    out.push('\n');
    for r in records {
        if r.c_dagger.len() != k || r.c_origin.len() != k || r.softmax.len() != k {
            bail!("record {} has inconsistent class count", r.sample_id);
        }
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}",
            r.sample_id,
            r.label,
            status_str(r.status),
            r.iterations,
            fmt_f64(r.risk),
            fmt_f64(r.residual_fixed_point),
            fmt_f64(r.residual_stationarity),
            fmt_f64(r.residual_comp_slack),
        ));
        for block in [&r.c_origin, &r.c_dagger, &r.softmax] {
            for v in block.iter() {
                out.push(',');
                out.push_str(&fmt_f64(*v));
            }
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn records_from_csv(text: &str) -> Result<Vec<CredibilityRecord>> {
    let mut lines = text.lines();
    let header = lines.next().context("empty records file")?;
    let cols: Vec<&str> = header.split(',').collect();
    let k = cols.iter().filter(|c| c.starts_with("c_dagger_")).count();
    if k == 0 {
        bail!("records header has no c_dagger columns");
    }
    let expected = 8 + 3 * k;
    if cols.len() != expected {
        bail!("records header has {} columns, expected {expected}", cols.len());
    }
    let mut records = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != expected {
            bail!("line {}: {} fields, expected {expected}", lineno + 2, f.len());
        }
        let float = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .with_context(|| format!("line {}: bad number '{s}'", lineno + 2))
        };
        let block = |offset: usize| -> Result<Vec<f64>> {
            (0..k).map(|i| float(f[offset + i])).collect()
        };
        records.push(CredibilityRecord {
            sample_id: f[0].parse().with_context(|| format!("line {}: bad id", lineno + 2))?,
            label: f[1].parse().with_context(|| format!("line {}: bad label", lineno + 2))?,
            status: parse_status(f[2])?,
            iterations: f[3].parse().with_context(|| format!("line {}: bad iters", lineno + 2))?,
            risk: float(f[4])?,
            residual_fixed_point: float(f[5])?,
            residual_stationarity: float(f[6])?,
            residual_comp_slack: float(f[7])?,
            c_origin: block(8)?,
            c_dagger: block(8 + k)?,
            softmax: block(8 + 2 * k)?,
        });
    }
    Ok(records)
}

pub fn read_records(path: &Path) -> Result<Vec<CredibilityRecord>> {
    let body = std::fs::read_to_string(path)
        .with_context(|| format!("reading records {}", path.display()))?;
    records_from_csv(&body)
}
