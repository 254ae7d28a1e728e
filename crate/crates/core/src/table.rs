//! CSV and Markdown emission of study results.
//!
//! CSV is the machine contract: one row per cell with its parameters, every
//! error component, DoF and solver residual. Markdown reproduces the paper's
//! grid layout with three significant digits.

use std::fmt::Write as _;
use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::forward::{ForwardConfig, StudyCell};
use crate::inverse::{ControlSpace, InverseConfig};
use crate::metrics::ErrorReport;

pub const CSV_HEADER: &str = "p,ell,k,alpha2,beta2,gamma2,control_space,dof,l2,h1_semi,h2_semi,h2_full,residual,wall_time_s";

/// Whether tables show errors divided by the norms of the exact field.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum ErrorScale {
    #[default]
    Relative,
    Absolute,
}

/// One emitted cell; absent parameters are `None`.
#[derive(Clone, Debug, PartialEq)]
pub struct TableRow {
    pub p: usize,
    pub ell: u32,
    pub k: u32,
    pub alpha2: Option<f64>,
    pub beta2: Option<f64>,
    pub gamma2: Option<f64>,
    pub control_space: Option<ControlSpace>,
    pub errors: ErrorReport,
    pub residual: f64,
    pub wall_time_s: Option<f64>,
}

fn scaled<C>(cell: &StudyCell<C>, scale: ErrorScale) -> ErrorReport {
    match scale {
        ErrorScale::Relative => cell.relative(),
        ErrorScale::Absolute => cell.errors,
    }
}

impl TableRow {
    pub fn forward(cell: &StudyCell<ForwardConfig>, scale: ErrorScale, timing: bool) -> Self {
        let c = &cell.config;
        Self {
            p: c.degree,
            ell: c.level,
            k: c.k,
            alpha2: Some(c.alpha2),
            beta2: None,
            gamma2: None,
            control_space: None,
            errors: scaled(cell, scale),
            residual: cell.solve.residual_norm,
            wall_time_s: timing.then_some(cell.wall_time_s),
        }
    }

    pub fn inverse(cell: &StudyCell<InverseConfig>, scale: ErrorScale, timing: bool) -> Self {
        let c = &cell.config;
        Self {
            p: c.degree,
            ell: c.level,
            k: c.k,
            alpha2: None,
            beta2: Some(c.beta2),
            gamma2: Some(c.gamma2),
            control_space: Some(c.control),
            errors: scaled(cell, scale),
            residual: cell.solve.residual_norm,
            wall_time_s: timing.then_some(cell.wall_time_s),
        }
    }

    fn csv_line(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        let e = &self.errors;
        format!(
            "{},{},{},{},{},{},{},{},{:e},{:e},{:e},{:e},{:e},{}",
            self.p,
            self.ell,
            self.k,
            opt(self.alpha2),
            opt(self.beta2),
            opt(self.gamma2),
            self.control_space.map(|c| c.name()).unwrap_or_default(),
            e.dof,
            e.l2,
            e.h1_semi,
            e.h2_semi,
            e.h2_full,
            self.residual,
            opt(self.wall_time_s),
        )
    }
}

pub fn write_csv<W: Write>(rows: &[TableRow], mut w: W) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(w, "{}", r.csv_line())?;
    }
    Ok(())
}

pub fn to_csv(rows: &[TableRow]) -> String {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("CSV is UTF-8")
}

/// Parses CSV produced by [`write_csv`].
pub fn parse_csv(text: &str) -> Result<Vec<TableRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(Error::DegenerateInput("unexpected CSV header".into()));
    }
    let bad = |line: &str| Error::DegenerateInput(format!("malformed CSV row: {line}"));
    lines
        .filter(|l| !l.is_empty())
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 14 {
                return Err(bad(line));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(line));
            let opt = |s: &str| if s.is_empty() { Ok(None) } else { num(s).map(Some) };
            let int = |s: &str| s.parse::<u64>().map_err(|_| bad(line));
            Ok(TableRow {
                p: int(f[0])? as usize,
                ell: int(f[1])? as u32,
                k: int(f[2])? as u32,
                alpha2: opt(f[3])?,
                beta2: opt(f[4])?,
                gamma2: opt(f[5])?,
                control_space: if f[6].is_empty() { None } else { Some(f[6].parse()?) },
                errors: ErrorReport {
                    dof: int(f[7])? as usize,
                    l2: num(f[8])?,
                    h1_semi: num(f[9])?,
                    h2_semi: num(f[10])?,
                    h2_full: num(f[11])?,
                },
                residual: num(f[12])?,
                wall_time_s: opt(f[13])?,
            })
        })
        .collect()
}

/// Scientific notation with three significant digits and a two-digit
/// exponent, e.g. `9.76e-03`.
pub fn sci3(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let s = format!("{x:.2e}");
    let (mant, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mant}e{sign}{:02}", exp.abs())
}

/// Column header for a weight, written as a power of ten when it is one.
fn weight_label(x: f64) -> String {
    let e = x.log10().round();
    if x > 0.0 && (10f64.powf(e) - x).abs() <= 1e-12 * x {
        format!("1e{}", e as i32)
    } else {
        format!("{x:e}")
    }
}

fn distinct(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for v in values {
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

/// Full H² errors with rows `ℓ`, columns `α²` (in first-seen order) and a DoF column.
pub fn forward_markdown(rows: &[TableRow]) -> String {
    let levels: Vec<u32> = distinct(rows.iter().map(|r| r.ell as f64)).into_iter().map(|v| v as u32).collect();
    let alphas = distinct(rows.iter().filter_map(|r| r.alpha2));
    let mut out = String::new();
    let head: Vec<String> = alphas.iter().map(|&a| weight_label(a)).collect();
    let _ = writeln!(out, "| ℓ \\ α² | {} | DoF |", head.join(" | "));
    let _ = writeln!(out, "|---|{}---|", "---|".repeat(alphas.len()));
    for ell in levels {
        let mut cells = Vec::new();
        let mut dof = String::new();
        for &a in &alphas {
            match rows.iter().find(|r| r.ell == ell && r.alpha2 == Some(a)) {
                Some(r) => {
                    cells.push(sci3(r.errors.h2_full));
                    dof = r.errors.dof.to_string();
                }
                None => cells.push(String::new()),
            }
        }
        let _ = writeln!(out, "| {ell} | {} | {dof} |", cells.join(" | "));
    }
    out
}

/// Full H² state errors with rows `β²`, columns `γ²`, one grid per control space.
pub fn inverse_markdown(rows: &[TableRow]) -> String {
    let mut out = String::new();
    let spaces: Vec<Option<ControlSpace>> = rows.iter().fold(Vec::new(), |mut acc, r| {
        if !acc.contains(&r.control_space) {
            acc.push(r.control_space);
        }
        acc
    });
    for (n, space) in spaces.into_iter().enumerate() {
        let sub: Vec<&TableRow> = rows.iter().filter(|r| r.control_space == space).collect();
        if n > 0 {
            out.push('\n');
        }
        let name = space.map(|c| c.name()).unwrap_or("-");
        let _ = writeln!(out, "control space: {name}\n");
        let betas = distinct(sub.iter().filter_map(|r| r.beta2));
        let gammas = distinct(sub.iter().filter_map(|r| r.gamma2));
        let head: Vec<String> = gammas.iter().map(|&g| weight_label(g)).collect();
        let _ = writeln!(out, "| β² \\ γ² | {} |", head.join(" | "));
        let _ = writeln!(out, "|---|{}", "---|".repeat(gammas.len()));
        for &b in &betas {
            let cells: Vec<String> = gammas
                .iter()
                .map(|&g| {
                    sub.iter()
                        .find(|r| r.beta2 == Some(b) && r.gamma2 == Some(g))
                        .map(|r| sci3(r.errors.h2_full))
                        .unwrap_or_default()
                })
                .collect();
            let _ = writeln!(out, "| {} | {} |", weight_label(b), cells.join(" | "));
        }
    }
    out
}

/// Error cells of a Markdown grid, in reading order.
pub fn parse_markdown_values(md: &str) -> Vec<f64> {
    let lines: Vec<&str> = md.lines().collect();
    let mut out = Vec::new();
    for (i, l) in lines.iter().enumerate() {
        let is_header = lines.get(i + 1).is_some_and(|n| n.starts_with("|---"));
        if !l.starts_with('|') || l.starts_with("|---") || is_header {
            continue;
        }
        // first column is the row label, a trailing DoF column is an integer
        out.extend(
            l.trim_matches('|')
                .split('|')
                .map(str::trim)
                .skip(1)
                .filter(|c| c.contains('e'))
                .filter_map(|c| c.parse::<f64>().ok()),
        );
    }
    out
}
