use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lsqiga::inverse::ControlSpace;
use lsqiga::table::ErrorScale;
use lsqiga::tensor::Rect;
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug)]
#[command(name = "lsqiga", version, about = "Weighted least-squares spline solvers for forward and inverse Poisson problems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Forward problem error table: rows ℓ, columns α².
    TableForward(ForwardArgs),
    /// Inverse problem error grid: rows β², columns γ².
    TableInverse(InverseArgs),
    /// Compares (AᵀM⁻¹A u, u) with ‖Δu‖² on small levels.
    SchurCheck(SchurArgs),
    /// Observed convergence rates of the forward full H² error.
    Rates(RatesArgs),
    /// Repeats a run from its manifest.json.
    Rerun(RerunArgs),
    /// Writes an assembled system in Matrix Market format.
    ExportMatrix(ExportArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Csv,
    Md,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Md => "md",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Errors {
    Relative,
    Absolute,
}

impl From<Errors> for ErrorScale {
    fn from(e: Errors) -> Self {
        match e {
            Errors::Relative => ErrorScale::Relative,
            Errors::Absolute => ErrorScale::Absolute,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControlChoice {
    Max,
    Reduced,
    Both,
}

impl ControlChoice {
    pub fn spaces(self) -> Vec<ControlSpace> {
        match self {
            ControlChoice::Max => vec![ControlSpace::MaxContinuity],
            ControlChoice::Reduced => vec![ControlSpace::Reduced],
            ControlChoice::Both => vec![ControlSpace::Reduced, ControlSpace::MaxContinuity],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Prior {
    /// f_p = -Δu_d
    Exact,
    Zero,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Problem {
    Forward,
    Inverse,
}

/// Inclusive level range written `lo..hi` or a single level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelRange {
    pub lo: u32,
    pub hi: u32,
}

impl LevelRange {
    pub fn levels(self) -> Vec<u32> {
        (self.lo..=self.hi).collect()
    }
}

impl FromStr for LevelRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parse = |t: &str| t.trim().parse::<u32>().map_err(|_| format!("`{s}` is not a level range like 3..6"));
        let (lo, hi) = match s.split_once("..") {
            Some((a, b)) => (parse(a)?, parse(b.trim_start_matches('='))?),
            None => {
                let l = parse(s)?;
                (l, l)
            }
        };
        if lo > hi {
            return Err(format!("empty level range {lo}..{hi}"));
        }
        Ok(Self { lo, hi })
    }
}

impl fmt::Display for LevelRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.lo, self.hi)
    }
}

/// Square observation region `[lo, hi]²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn rect(self) -> Rect {
        Rect::square(self.lo, self.hi)
    }
}

impl FromStr for Interval {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let bad = || format!("`{s}` is not an interval like 0.25,0.75");
        let (a, b) = s.split_once(',').ok_or_else(bad)?;
        let lo: f64 = a.trim().parse().map_err(|_| bad())?;
        let hi: f64 = b.trim().parse().map_err(|_| bad())?;
        Ok(Self { lo, hi })
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.lo, self.hi)
    }
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputArgs {
    /// Output formats; both are written by default.
    #[arg(long = "format", value_enum, default_values_t = [Format::Csv, Format::Md])]
    pub formats: Vec<Format>,
    /// Directory for tables and manifest.json; tables go to stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Relative errors divide by the norms of the exact field.
    #[arg(long, value_enum, default_value_t = Errors::Relative)]
    pub errors: Errors,
    /// Fill the wall_time_s column (makes CSV output run-dependent).
    #[arg(long)]
    pub timing: bool,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverArgs {
    /// Backward-error target of iterative refinement.
    #[arg(long, allow_negative_numbers = true, default_value_t = 1e-10)]
    pub tol: f64,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForwardArgs {
    #[arg(long, default_value_t = 2)]
    pub p: usize,
    #[arg(long, default_value_t = 1)]
    pub k: u32,
    /// Single level; overrides --ell-range.
    #[arg(long)]
    pub ell: Option<u32>,
    #[arg(long, default_value = "3..6")]
    pub ell_range: LevelRange,
    #[arg(long = "alpha2", allow_negative_numbers = true, default_values_t = [1e6, 1e3, 1.0, 1e-3, 1e-6])]
    pub alpha2: Vec<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InverseArgs {
    #[arg(long, default_value_t = 2)]
    pub p: usize,
    #[arg(long, default_value_t = 1)]
    pub k: u32,
    #[arg(long, default_value_t = 6)]
    pub ell: u32,
    #[arg(long = "beta2", allow_negative_numbers = true, default_values_t = [1.0, 1e-2, 1e-4])]
    pub beta2: Vec<f64>,
    #[arg(long = "gamma2", allow_negative_numbers = true, default_values_t = [1.0, 1e2, 1e4])]
    pub gamma2: Vec<f64>,
    #[arg(long, value_enum, default_value_t = ControlChoice::Reduced)]
    pub control_space: ControlChoice,
    /// Observation square `lo,hi`; its corners must lie on knot lines.
    #[arg(long, default_value = "0.25,0.75")]
    pub gamma_rect: Interval,
    #[arg(long, value_enum, default_value_t = Prior::Exact)]
    pub prior: Prior,
    #[command(flatten)]
    #[serde(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchurArgs {
    #[arg(long, default_value_t = 2)]
    pub p: usize,
    #[arg(long, default_value_t = 2)]
    pub ell: u32,
    #[arg(long, value_enum, default_value_t = ControlChoice::Both)]
    pub control_space: ControlChoice,
    /// Random vectors tested on top of the basis.
    #[arg(long, default_value_t = 32)]
    pub random: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatesArgs {
    #[arg(long, default_value_t = 2)]
    pub p: usize,
    #[arg(long, default_value_t = 1)]
    pub k: u32,
    #[arg(long, default_value = "3..6")]
    pub ell_range: LevelRange,
    #[arg(long, allow_negative_numbers = true, default_value_t = 1.0)]
    pub alpha2: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub solver: SolverArgs,
    #[command(flatten)]
    #[serde(flatten)]
    pub output: OutputArgs,
}

#[derive(Args, Clone, Debug)]
pub struct RerunArgs {
    /// Path to a manifest.json written by an earlier run.
    pub manifest: PathBuf,
    /// Output directory; defaults to the one recorded in the manifest.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExportArgs {
    #[arg(long, value_enum, default_value_t = Problem::Forward)]
    pub problem: Problem,
    #[arg(long, default_value_t = 2)]
    pub p: usize,
    #[arg(long, default_value_t = 1)]
    pub k: u32,
    #[arg(long, default_value_t = 3)]
    pub ell: u32,
    #[arg(long, allow_negative_numbers = true, default_value_t = 1.0)]
    pub alpha2: f64,
    #[arg(long, allow_negative_numbers = true, default_value_t = 1.0)]
    pub beta2: f64,
    #[arg(long, allow_negative_numbers = true, default_value_t = 1.0)]
    pub gamma2: f64,
    /// Only `max` and `reduced` are meaningful here.
    #[arg(long, value_enum, default_value_t = ControlChoice::Reduced)]
    pub control_space: ControlChoice,
    #[arg(long, default_value = "0.25,0.75")]
    pub gamma_rect: Interval,
    /// Directory receiving matrix.mtx and rhs.mtx.
    #[arg(long)]
    pub out: PathBuf,
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn level_ranges() {
        assert_eq!("3..6".parse::<LevelRange>().unwrap().levels(), vec![3, 4, 5, 6]);
        assert_eq!("3..=4".parse::<LevelRange>().unwrap().levels(), vec![3, 4]);
        assert_eq!("5".parse::<LevelRange>().unwrap().levels(), vec![5]);
        assert!("6..3".parse::<LevelRange>().is_err());
        assert!("a..b".parse::<LevelRange>().is_err());
    }

    #[test]
    fn intervals() {
        let i: Interval = "0.25, 0.75".parse().unwrap();
        assert_eq!((i.lo, i.hi), (0.25, 0.75));
        assert!("0.25".parse::<Interval>().is_err());
    }

    #[test]
    fn defaults_mirror_the_tables() {
        let cli = Cli::parse_from(["lsqiga", "table-forward"]);
        let Command::TableForward(a) = cli.command else { panic!() };
        assert_eq!(a.alpha2, vec![1e6, 1e3, 1.0, 1e-3, 1e-6]);
        assert_eq!(a.ell_range.levels(), vec![3, 4, 5, 6]);
        assert_eq!(a.output.formats, vec![Format::Csv, Format::Md]);
        let cli = Cli::parse_from(["lsqiga", "table-inverse", "--beta2", "1e-4"]);
        let Command::TableInverse(a) = cli.command else { panic!() };
        assert_eq!(a.beta2, vec![1e-4]);
        assert_eq!(a.gamma2, vec![1.0, 1e2, 1e4]);
        assert_eq!(a.ell, 6);
    }
}
