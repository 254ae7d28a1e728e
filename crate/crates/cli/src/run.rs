use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use lsqiga::cases::{example1_case, example2_case};
use lsqiga::forward::{assemble_forward, forward_convergence_study, ForwardConfig};
use lsqiga::inverse::{assemble_inverse, inverse_sweep_with_case, schur_identity_check, InverseConfig, SchurCheck};
use lsqiga::metrics::observed_rates;
use lsqiga::table::{forward_markdown, inverse_markdown, sci3, to_csv, TableRow};
use lsqiga::{Error, SolveOptions};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::args::{
    Command, ExportArgs, ForwardArgs, Format, InverseArgs, OutputArgs, Prior, Problem, RatesArgs, RerunArgs,
    SchurArgs, SolverArgs,
};

/// Largest level accepted for forward runs (4356 DoF at ℓ=6, ~1M at ℓ=10).
const MAX_FORWARD_LEVEL: u32 = 10;
const MAX_INVERSE_LEVEL: u32 = 8;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid value for --{flag}: {reason}")]
    Invalid { flag: String, reason: String },
    #[error("solver failure: {0}")]
    Solver(Error),
    #[error("observation region not aligned with the mesh: {0}")]
    Misaligned(Error),
    #[error("Schur identity check failed for control space {0}")]
    Schur(String),
    #[error(transparent)]
    Core(Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("manifest {path}: {reason}")]
    Manifest { path: PathBuf, reason: String },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid { .. } => 2,
            CliError::Solver(_) => 3,
            CliError::Misaligned(_) => 4,
            CliError::Schur(_) => 5,
            _ => 1,
        }
    }

    fn invalid(flag: &str, reason: impl Into<String>) -> Self {
        CliError::Invalid {
            flag: flag.into(),
            reason: reason.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter { name, reason } => CliError::invalid(&name.replace('/', "/--"), reason),
            Error::InvalidDegree { .. } | Error::InvalidContinuity { .. } => CliError::invalid("p", e.to_string()),
            Error::MisalignedInterval { .. } | Error::MisalignedSubdomain { .. } => CliError::Misaligned(e),
            Error::NotPositiveDefinite { .. } | Error::RefinementStalled { .. } | Error::NotSymmetric { .. } => {
                CliError::Solver(e)
            }
            other => CliError::Core(other),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Everything needed to repeat a run.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub params: Value,
    pub outputs: Vec<PathBuf>,
    /// Seconds per table cell, in output order.
    pub wall_time: Vec<f64>,
}

struct Emitter<'a> {
    output: &'a OutputArgs,
    written: Vec<PathBuf>,
}

impl<'a> Emitter<'a> {
    fn new(output: &'a OutputArgs) -> Result<Self> {
        if output.formats.is_empty() {
            return Err(CliError::invalid("format", "at least one format is required"));
        }
        if let Some(dir) = &output.out {
            fs::create_dir_all(dir).map_err(|source| CliError::Io {
                path: dir.clone(),
                source,
            })?;
        }
        Ok(Self {
            output,
            written: Vec::new(),
        })
    }

    fn emit(&mut self, stem: &str, csv: &str, md: &str) -> Result<()> {
        let mut seen = Vec::new();
        for &format in &self.output.formats {
            if seen.contains(&format) {
                continue;
            }
            seen.push(format);
            let text = match format {
                Format::Csv => csv,
                Format::Md => md,
            };
            match &self.output.out {
                Some(dir) => {
                    let path = dir.join(format!("{stem}.{}", format.extension()));
                    write_file(&path, text)?;
                    self.written.push(path);
                }
                None => {
                    let mut stdout = io::stdout().lock();
                    if seen.len() > 1 {
                        let _ = writeln!(stdout);
                    }
                    let _ = stdout.write_all(text.as_bytes());
                }
            }
        }
        Ok(())
    }

    fn finish<P: Serialize>(self, command: &str, params: &P, wall_time: Vec<f64>) -> Result<()> {
        let Some(dir) = &self.output.out else { return Ok(()) };
        let manifest = RunManifest {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            params: serde_json::to_value(params).expect("parameters serialize"),
            outputs: self.written,
            wall_time,
        };
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
        write_file(&path, &(text + "\n"))?;
        eprintln!("wrote {}", path.display());
        Ok(())
    }
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn solve_options(s: &SolverArgs) -> Result<SolveOptions> {
    if !(s.tol > 0.0 && s.tol < 1.0) {
        return Err(CliError::invalid("tol", format!("{} is not in (0, 1)", s.tol)));
    }
    Ok(SolveOptions {
        tol: s.tol,
        ..SolveOptions::default()
    })
}

fn check_levels(flag: &str, levels: &[u32], max: u32) -> Result<()> {
    match levels.iter().find(|&&l| l > max) {
        Some(l) => Err(CliError::invalid(flag, format!("level {l} exceeds the supported maximum {max}"))),
        None => Ok(()),
    }
}

fn check_weights(flag: &str, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(CliError::invalid(flag, "at least one value is required"));
    }
    match values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        Some(v) => Err(CliError::invalid(flag, format!("{v} is not a positive finite weight"))),
        None => Ok(()),
    }
}

pub fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::TableForward(a) => table_forward(&a),
        Command::TableInverse(a) => table_inverse(&a),
        Command::SchurCheck(a) => schur_check(&a),
        Command::Rates(a) => rates(&a),
        Command::Rerun(a) => rerun(&a),
        Command::ExportMatrix(a) => export_matrix(&a),
    }
}

pub fn table_forward(a: &ForwardArgs) -> Result<()> {
    let levels = match a.ell {
        Some(l) => vec![l],
        None => a.ell_range.levels(),
    };
    let flag = if a.ell.is_some() { "ell" } else { "ell-range" };
    check_levels(flag, &levels, MAX_FORWARD_LEVEL)?;
    check_weights("alpha2", &a.alpha2)?;
    let opts = solve_options(&a.solver)?;
    let mut emitter = Emitter::new(&a.output)?;
    let cells = forward_convergence_study(a.p, a.k, &levels, &a.alpha2, &opts)?;
    let rows: Vec<TableRow> = cells
        .iter()
        .map(|c| TableRow::forward(c, a.output.errors.into(), a.output.timing))
        .collect();
    emitter.emit("table-forward", &to_csv(&rows), &forward_markdown(&rows))?;
    emitter.finish("table-forward", a, cells.iter().map(|c| c.wall_time_s).collect())
}

pub fn table_inverse(a: &InverseArgs) -> Result<()> {
    check_levels("ell", &[a.ell], MAX_INVERSE_LEVEL)?;
    check_weights("beta2", &a.beta2)?;
    check_weights("gamma2", &a.gamma2)?;
    let opts = solve_options(&a.solver)?;
    let mut emitter = Emitter::new(&a.output)?;
    let mut case = example2_case(a.k)?;
    if a.prior == Prior::Zero {
        case = case.without_prior();
    }
    let mut rows = Vec::new();
    let mut times = Vec::new();
    for control in a.control_space.spaces() {
        let base = InverseConfig {
            degree: a.p,
            level: a.ell,
            beta2: a.beta2[0],
            gamma2: a.gamma2[0],
            k: a.k,
            control,
            observation: a.gamma_rect.rect(),
        };
        let cells = inverse_sweep_with_case(&base, &case, &a.beta2, &a.gamma2, &opts)?;
        rows.extend(cells.iter().map(|c| TableRow::inverse(c, a.output.errors.into(), a.output.timing)));
        times.extend(cells.iter().map(|c| c.wall_time_s));
    }
    emitter.emit("table-inverse", &to_csv(&rows), &inverse_markdown(&rows))?;
    emitter.finish("table-inverse", a, times)
}

pub fn schur_check(a: &SchurArgs) -> Result<()> {
    let mut emitter = Emitter::new(&a.output)?;
    let mut results: Vec<(&str, SchurCheck)> = Vec::new();
    for control in a.control_space.spaces() {
        results.push((control.name(), schur_identity_check(a.p, a.ell, control, a.random, a.seed)?));
    }
    let mut csv = String::from("p,ell,control_space,containment,max_relative_gap,upper_bound_holds,vectors_tested,passes\n");
    let mut md = String::from("| control space | containment | max relative gap | upper bound | vectors | result |\n|---|---|---|---|---|---|\n");
    for (name, c) in &results {
        let _ = writeln!(
            csv,
            "{},{},{name},{},{:e},{},{},{}",
            a.p,
            a.ell,
            c.is_containment,
            c.max_relative_gap,
            c.upper_bound_holds,
            c.vectors_tested,
            c.passes()
        );
        let _ = writeln!(
            md,
            "| {name} | {} | {} | {} | {} | {} |",
            c.is_containment,
            sci3(c.max_relative_gap),
            if c.upper_bound_holds { "holds" } else { "violated" },
            c.vectors_tested,
            if c.passes() { "PASS" } else { "FAIL" }
        );
        if a.output.out.is_some() {
            println!("{name}: max relative gap {:e} ({})", c.max_relative_gap, if c.passes() { "pass" } else { "fail" });
        }
    }
    emitter.emit("schur-check", &csv, &md)?;
    emitter.finish("schur-check", a, Vec::new())?;
    match results.iter().find(|(_, c)| !c.passes()) {
        Some((name, _)) => Err(CliError::Schur(name.to_string())),
        None => Ok(()),
    }
}

pub fn rates(a: &RatesArgs) -> Result<()> {
    let levels = a.ell_range.levels();
    if levels.len() < 2 {
        return Err(CliError::invalid("ell-range", "rates need at least two levels"));
    }
    check_levels("ell-range", &levels, MAX_FORWARD_LEVEL)?;
    check_weights("alpha2", &[a.alpha2])?;
    let opts = solve_options(&a.solver)?;
    let mut emitter = Emitter::new(&a.output)?;
    let cells = forward_convergence_study(a.p, a.k, &levels, &[a.alpha2], &opts)?;
    let rows: Vec<TableRow> = cells
        .iter()
        .map(|c| TableRow::forward(c, a.output.errors.into(), a.output.timing))
        .collect();
    let errors: Vec<f64> = rows.iter().map(|r| r.errors.h2_full).collect();
    let rates = observed_rates(&errors)?;
    let mut csv = String::from("p,k,alpha2,ell,dof,h2_full,rate\n");
    let mut md = String::from("| ℓ | DoF | H² error | rate |\n|---|---|---|---|\n");
    for (i, r) in rows.iter().enumerate() {
        let rate = i.checked_sub(1).map(|j| rates[j]);
        let _ = writeln!(
            csv,
            "{},{},{:e},{},{},{:e},{}",
            a.p,
            a.k,
            a.alpha2,
            r.ell,
            r.errors.dof,
            r.errors.h2_full,
            rate.map(|x| format!("{x:e}")).unwrap_or_default()
        );
        let _ = writeln!(
            md,
            "| {} | {} | {} | {} |",
            r.ell,
            r.errors.dof,
            sci3(r.errors.h2_full),
            rate.map(|x| format!("{x:.3}")).unwrap_or_else(|| "-".into())
        );
    }
    emitter.emit("rates", &csv, &md)?;
    emitter.finish("rates", a, cells.iter().map(|c| c.wall_time_s).collect())
}

fn rerun(a: &RerunArgs) -> Result<()> {
    let manifest_err = |reason: String| CliError::Manifest {
        path: a.manifest.clone(),
        reason,
    };
    let text = fs::read_to_string(&a.manifest).map_err(|source| CliError::Io {
        path: a.manifest.clone(),
        source,
    })?;
    let manifest: RunManifest = serde_json::from_str(&text).map_err(|e| manifest_err(e.to_string()))?;
    fn params<T: for<'de> Deserialize<'de>>(v: Value) -> std::result::Result<T, String> {
        serde_json::from_value(v).map_err(|e| e.to_string())
    }
    let out = a.out.clone();
    let command = match manifest.command.as_str() {
        "table-forward" => {
            let mut p: ForwardArgs = params(manifest.params).map_err(manifest_err)?;
            p.output.out = out.or(p.output.out);
            Command::TableForward(p)
        }
        "table-inverse" => {
            let mut p: InverseArgs = params(manifest.params).map_err(manifest_err)?;
            p.output.out = out.or(p.output.out);
            Command::TableInverse(p)
        }
        "schur-check" => {
            let mut p: SchurArgs = params(manifest.params).map_err(manifest_err)?;
            p.output.out = out.or(p.output.out);
            Command::SchurCheck(p)
        }
        "rates" => {
            let mut p: RatesArgs = params(manifest.params).map_err(manifest_err)?;
            p.output.out = out.or(p.output.out);
            Command::Rates(p)
        }
        other => return Err(manifest_err(format!("unknown command `{other}`"))),
    };
    dispatch(command)
}

fn export_matrix(a: &ExportArgs) -> Result<()> {
    let system = match a.problem {
        Problem::Forward => {
            let cfg = ForwardConfig {
                degree: a.p,
                level: a.ell,
                alpha2: a.alpha2,
                k: a.k,
            };
            check_levels("ell", &[a.ell], MAX_FORWARD_LEVEL)?;
            let case = example1_case(a.k)?;
            assemble_forward(&cfg, case.f(), case.g())?.system
        }
        Problem::Inverse => {
            let [control] = a.control_space.spaces()[..] else {
                return Err(CliError::invalid("control-space", "choose one of max, reduced"));
            };
            let cfg = InverseConfig {
                degree: a.p,
                level: a.ell,
                beta2: a.beta2,
                gamma2: a.gamma2,
                k: a.k,
                control,
                observation: a.gamma_rect.rect(),
            };
            check_levels("ell", &[a.ell], MAX_INVERSE_LEVEL)?;
            let case = example2_case(a.k)?;
            assemble_inverse(&cfg, case.u_d(), case.f_p())?.system()?
        }
    };
    fs::create_dir_all(&a.out).map_err(|source| CliError::Io {
        path: a.out.clone(),
        source,
    })?;
    let mut buf = Vec::new();
    system.matrix().write_matrix_market(&mut buf).expect("writing to memory");
    write_file(&a.out.join("matrix.mtx"), &String::from_utf8(buf).expect("ASCII output"))?;
    let rhs = system.rhs();
    let mut text = format!("%%MatrixMarket matrix array real general\n{} 1\n", rhs.len());
    for v in rhs {
        let _ = writeln!(text, "{v:.17e}");
    }
    write_file(&a.out.join("rhs.mtx"), &text)?;
    eprintln!("wrote {} unknowns to {}", system.n(), a.out.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_error_kind() {
        let e: CliError = Error::InvalidParameter {
            name: "beta2",
            reason: "x".into(),
        }
        .into();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("--beta2"));
        let e: CliError = Error::MisalignedSubdomain { value: 0.25 }.into();
        assert_eq!(e.exit_code(), 4);
        let e: CliError = Error::NotPositiveDefinite { row: 0, pivot: -1.0 }.into();
        assert_eq!(e.exit_code(), 3);
        assert_eq!(CliError::Schur("max".into()).exit_code(), 5);
    }
}
