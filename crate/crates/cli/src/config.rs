//! Command-line arguments and the validated run configuration.

use crate::error::CliError;
use clap::{Parser, ValueEnum};
use parh_core::rational::{fmt_cq, fmt_q, parse_cq, parse_q, CQ, Q};
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Slope,
    Ch2,
    Stability,
    BgCheck,
    Perturb,
    Pullback,
    Descent,
    ModelMetric,
    VerifyHitchin,
    VerifyPluriharmonic,
    VerifyKl,
    SolveHe,
    ChernWeil,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Slope => "slope",
            Command::Ch2 => "ch2",
            Command::Stability => "stability",
            Command::BgCheck => "bg-check",
            Command::Perturb => "perturb",
            Command::Pullback => "pullback",
            Command::Descent => "descent",
            Command::ModelMetric => "model-metric",
            Command::VerifyHitchin => "verify-hitchin",
            Command::VerifyPluriharmonic => "verify-pluriharmonic",
            Command::VerifyKl => "verify-kl",
            Command::SolveHe => "solve-he",
            Command::ChernWeil => "chern-weil",
        }
    }
}

/// Raw command line.
#[derive(Debug, Parser)]
#[command(name = "parh", version, about = "Filtered λ-flat bundle computations with JSON reports")]
pub struct Args {
    pub command: Command,
    /// Bundle spec file (TOML).
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Intersection data file (TOML).
    #[arg(long)]
    pub intersection: Option<PathBuf>,
    /// Domain: `torus`, `torus:LX,LY` or `annulus:R_MIN,R_MAX`.
    #[arg(long)]
    pub grid: Option<String>,
    /// Comma-separated resolutions, each a power of two in 16..=512.
    #[arg(long, value_delimiter = ',')]
    pub res: Vec<usize>,
    /// Comma-separated ε values as exact rationals (`1/10`, `0.1`).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub eps: Vec<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub tol: Option<f64>,
    /// Directory for the JSON report copy and any dumps.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write field and trajectory dumps as CSV.
    #[arg(long)]
    pub dump_csv: bool,
    #[arg(long)]
    pub max_steps: Option<usize>,
    /// Ramification degree for `pullback` and `descent`.
    #[arg(long)]
    pub cover: Option<u64>,
    /// λ for `verify-pluriharmonic`, as a complex rational.
    #[arg(long, allow_hyphen_values = true)]
    pub lambda: Option<String>,
}

/// Integration domain before a resolution is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    Torus { lx: f64, ly: f64 },
    Annulus { r_min: f64, r_max: f64 },
}

impl Domain {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let bad = || CliError::Config(format!("grid {text:?} is not torus, torus:LX,LY or annulus:R_MIN,R_MAX"));
        let (kind, params) = text.split_once(':').unwrap_or((text, ""));
        let nums: Vec<f64> = if params.is_empty() {
            Vec::new()
        } else {
            params.split(',').map(|p| p.trim().parse::<f64>().map_err(|_| bad())).collect::<Result<_, _>>()?
        };
        match (kind, nums.as_slice()) {
            ("torus", []) => Ok(Domain::Torus { lx: std::f64::consts::TAU, ly: std::f64::consts::TAU }),
            ("torus", [lx, ly]) => Ok(Domain::Torus { lx: *lx, ly: *ly }),
            ("annulus", [a, b]) => Ok(Domain::Annulus { r_min: *a, r_max: *b }),
            _ => Err(bad()),
        }
    }

    pub fn build(&self, n: usize) -> Result<parh_core::grid::GridDomain, CliError> {
        Ok(match self {
            Domain::Torus { lx, ly } => parh_core::grid::GridDomain::torus(*lx, *ly, n)?,
            Domain::Annulus { r_min, r_max } => parh_core::grid::GridDomain::annulus(*r_min, *r_max, n)?,
        })
    }

    fn canonical(&self) -> String {
        match self {
            Domain::Torus { lx, ly } => format!("torus:{lx:e},{ly:e}"),
            Domain::Annulus { r_min, r_max } => format!("annulus:{r_min:e},{r_max:e}"),
        }
    }
}

/// Validated configuration of one run. Unset options take per-command defaults.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub spec: Option<PathBuf>,
    pub intersection: Option<PathBuf>,
    pub grid: Option<Domain>,
    pub resolutions: Vec<usize>,
    pub eps: Vec<Q>,
    pub tol: Option<f64>,
    pub out: Option<PathBuf>,
    pub dump_csv: bool,
    pub max_steps: Option<usize>,
    pub cover: Option<u64>,
    pub lambda: Option<CQ>,
}

impl RunConfig {
    pub fn from_args(a: Args) -> Result<Self, CliError> {
        let eps = a
            .eps
            .iter()
            .map(|t| parse_q(t).map_err(|e| CliError::Config(format!("--eps: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        let lambda = a.lambda.as_deref().map(|t| parse_cq(t).map_err(|e| CliError::Config(format!("--lambda: {e}")))).transpose()?;
        let cfg = RunConfig {
            command: a.command,
            spec: a.spec,
            intersection: a.intersection,
            grid: a.grid.as_deref().map(Domain::parse).transpose()?,
            resolutions: a.res,
            eps,
            tol: a.tol,
            out: a.out,
            dump_csv: a.dump_csv,
            max_steps: a.max_steps,
            cover: a.cover,
            lambda,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// A configuration with every option unset.
    pub fn new(command: Command) -> Self {
        RunConfig {
            command,
            spec: None,
            intersection: None,
            grid: None,
            resolutions: Vec::new(),
            eps: Vec::new(),
            tol: None,
            out: None,
            dump_csv: false,
            max_steps: None,
            cover: None,
            lambda: None,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        for &n in &self.resolutions {
            if !(n.is_power_of_two() && (16..=512).contains(&n)) {
                return Err(CliError::Config(format!("resolution {n} must be a power of two between 16 and 512")));
            }
        }
        if let Some(t) = self.tol {
            if !(t > 0.0 && t.is_finite()) {
                return Err(CliError::Config(format!("tolerance {t} must be positive and finite")));
            }
        }
        if self.eps.iter().any(|e| e < &Q::from_integer(0.into())) {
            return Err(CliError::Config("epsilon values must be non-negative".into()));
        }
        if self.max_steps == Some(0) {
            return Err(CliError::Config("max-steps must be positive".into()));
        }
        if self.cover == Some(0) {
            return Err(CliError::Config("cover degree must be positive".into()));
        }
        Ok(())
    }

    /// Options that influence the result, in a fixed textual form.
    pub fn canonical(&self) -> String {
        let eps: Vec<String> = self.eps.iter().map(fmt_q).collect();
        let res: Vec<String> = self.resolutions.iter().map(usize::to_string).collect();
        format!(
            "grid={}\nres={}\neps={}\ntol={}\nmax_steps={}\ncover={}\nlambda={}\n",
            self.grid.as_ref().map(Domain::canonical).unwrap_or_default(),
            res.join(","),
            eps.join(","),
            self.tol.map(|t| format!("{t:e}")).unwrap_or_default(),
            self.max_steps.map(|t| t.to_string()).unwrap_or_default(),
            self.cover.map(|t| t.to_string()).unwrap_or_default(),
            self.lambda.as_ref().map(fmt_cq).unwrap_or_default(),
        )
    }
}
