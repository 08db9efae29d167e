//! CSV and summary output.

use std::fmt::Display;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use super::run::RunTrace;
use crate::error::{FrdeError, Result};

pub const CSV_HEADER: &str = "t,gamma,W,Z,err_global,err_normal,detected,flag_count";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Summary,
}

impl std::str::FromStr for OutputFormat {
    type Err = FrdeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "summary" => Ok(OutputFormat::Summary),
            other => Err(FrdeError::InvalidArgument(format!(
                "unknown format `{other}` (expected csv or summary)"
            ))),
        }
    }
}

/// Writes the time series. With `per_agent`, adds `err_<n>` and `flag_<n>`
/// columns for every agent (1-based).
pub fn write_csv<W: Write>(trace: &RunTrace, mut w: W, per_agent: bool) -> io::Result<()> {
    let n = trace.summary.n;
    write!(w, "{CSV_HEADER}")?;
    if per_agent {
        for i in 1..=n {
            write!(w, ",err_{i}")?;
        }
        for i in 1..=n {
            write!(w, ",flag_{i}")?;
        }
    }
    writeln!(w)?;
    for (k, row) in trace.rows.iter().enumerate() {
        let z = row.z.map(|z| z.to_string()).unwrap_or_default();
        write!(
            w,
            "{},{},{},{},{},{},{},{}",
            row.t,
            row.gamma,
            row.w,
            z,
            row.err_global,
            row.err_normal,
            u8::from(row.detected),
            row.flag_count
        )?;
        if per_agent {
            for e in &trace.errors.per_agent[k] {
                write!(w, ",{e}")?;
            }
            for f in &trace.flags[k] {
                write!(w, ",{}", u8::from(f.is_attack()))?;
            }
        }
        writeln!(w)?;
    }
    w.flush()
}

fn opt<T: Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_else(|| "n/a".into())
}

fn vector(v: &nalgebra::DVector<f64>) -> String {
    let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
    format!("[{}]", parts.join(", "))
}

/// Writes a `key = value` report of the run.
pub fn write_summary<W: Write>(trace: &RunTrace, mut w: W) -> io::Result<()> {
    let s = &trace.summary;
    let p = &s.params;
    let lines: Vec<(&str, String)> = vec![
        ("name", s.name.clone()),
        ("seed", s.seed.to_string()),
        ("agents", s.n.to_string()),
        ("dimension", s.dim.to_string()),
        ("adversaries", s.n_adversaries.to_string()),
        ("strategy", opt(s.strategy)),
        ("rounds", s.rounds.to_string()),
        ("noise_bound", s.noise_bound.to_string()),
        ("params_source", p.provenance.to_string()),
        ("alpha", p.alpha.to_string()),
        ("beta", p.beta.to_string()),
        ("r1", p.r1.to_string()),
        ("lambda_min_J", s.lambda_min_j.to_string()),
        ("lambda_max_J", s.lambda_max_j.to_string()),
        ("lambda_min_J_normal", opt(s.r2)),
        ("gamma_final", s.gamma_final.to_string()),
        ("gamma_limit", s.gamma_limit.to_string()),
        ("W_final", s.w_final.to_string()),
        ("W_limit", s.w_limit.to_string()),
        ("Z_final", opt(s.z_final)),
        ("Z_limit", opt(s.z_limit)),
        ("detected", s.detected.to_string()),
        ("first_detection", opt(s.first_detection)),
        ("flag_count", s.flag_count.to_string()),
        ("err_global", s.err_global.to_string()),
        ("err_normal", s.err_normal.to_string()),
        ("implied_rho_global", opt(s.implied_rho_global())),
        ("theory_rho_global", opt(s.theory_rho_global())),
        ("implied_rho_normal", opt(s.implied_rho_normal())),
        ("theory_rho_normal", opt(s.theory_rho_normal())),
        ("theta_star", vector(&s.theta_star)),
        ("theta_bar", opt(s.theta_bar.as_ref().map(vector))),
        ("mean_normal_estimate", vector(&s.mean_normal_estimate)),
    ];
    for (k, v) in lines {
        writeln!(w, "{k} = {v}")?;
    }
    w.flush()
}

/// Writes `<dir>/<name>.csv` or `<dir>/<name>.summary.txt` and returns the path.
pub fn emit(
    trace: &RunTrace,
    dir: &Path,
    format: OutputFormat,
    per_agent: bool,
) -> Result<PathBuf> {
    let io_err = |path: &Path| {
        let path = path.to_path_buf();
        move |source| FrdeError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let file = match format {
        OutputFormat::Csv => format!("{}.csv", trace.summary.name),
        OutputFormat::Summary => format!("{}.summary.txt", trace.summary.name),
    };
    let path = dir.join(file);
    let out = std::fs::File::create(&path).map_err(io_err(&path))?;
    let out = io::BufWriter::new(out);
    match format {
        OutputFormat::Csv => write_csv(trace, out, per_agent),
        OutputFormat::Summary => write_summary(trace, out),
    }
    .map_err(io_err(&path))?;
    Ok(path)
}
