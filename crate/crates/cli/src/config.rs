use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use salem_core::dimension::WordSource;
use salem_core::dyadic::CantorSpec;
use salem_core::spectral::{default_tail_q, GridSpec};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::UsageError;

#[derive(Debug, Parser)]
#[command(
    name = "salem-lab",
    version,
    about = "Fourier decay experiments for Cantor sets under random walks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub args: RunArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Cantor intervals, their tree flow and the mass distribution checks.
    Cantor,
    /// A seeded walk word, its refinement ladder and incompressibility proxy.
    Walk,
    /// Transform of the walk image of a Cantor measure and its decay fit.
    Spectrum,
    /// Monte Carlo moments of |ν̂_n(u)|² against their bound.
    Moments,
    /// The Chebyshev tail chain for |ν̂_n(u)|².
    Tail,
    /// The summation-by-parts identity on random atomic measures.
    Lemma,
    /// Box, capacity and Fourier dimension estimates side by side.
    SalemReport,
    /// Box and capacity dimension of a Cantor set.
    Dims,
    /// Exact identity suites and flow checks.
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Cantor => "cantor",
            Command::Walk => "walk",
            Command::Spectrum => "spectrum",
            Command::Moments => "moments",
            Command::Tail => "tail",
            Command::Lemma => "lemma",
            Command::SalemReport => "salem-report",
            Command::Dims => "dims",
            Command::Verify => "verify",
        }
    }

    fn default_n(self) -> u32 {
        match self {
            Command::Walk => 16,
            Command::Spectrum | Command::SalemReport => 18,
            _ => 12,
        }
    }

    fn default_trials(self) -> u64 {
        match self {
            Command::Lemma | Command::Verify => 50,
            _ => 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Word {
    Random,
    Ones,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Cantor ratio as `p/q`, strictly between 0 and 1/2.
    #[arg(long, global = true, default_value = "1/4")]
    pub xi: String,
    /// Depth or walk level; the default depends on the command.
    #[arg(long, global = true)]
    pub n: Option<u32>,
    #[arg(long, global = true)]
    pub q: Option<u32>,
    #[arg(long, global = true, default_value_t = 1.0)]
    pub eps: f64,
    /// Frostman exponent; defaults to the Cantor dimension of `--xi`.
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true, default_value_t = 12.0)]
    pub u: f64,
    /// `range:LO:HI:STEP`, `log:LO:HI:PER_OCTAVE`, `thm42:LO:HI`, or bare
    /// `thm42` for `u = n, n + 1/n, ..., n + 1`.
    #[arg(
        long = "u-grid",
        alias = "grid",
        global = true,
        default_value = "range:8:2000:0.0625"
    )]
    pub u_grid: String,
    #[arg(long, global = true)]
    pub trials: Option<u64>,
    /// Walk word: seeded random bits or the all-ones control.
    #[arg(long, global = true, value_enum, default_value_t = Word::Random)]
    pub word: Word,
    #[arg(long, global = true, default_value = ".")]
    pub out: PathBuf,
    /// Comma-separated subset of csv, json, svg.
    #[arg(long, global = true, default_value = "json")]
    pub formats: String,
    /// Worker threads; defaults to the number of logical cores.
    #[arg(long, global = true, env = "SALEM_LAB_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Svg,
}

impl FromStr for Format {
    type Err = UsageError;

    fn from_str(s: &str) -> Result<Self, UsageError> {
        match s.trim() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "svg" => Ok(Format::Svg),
            other => Err(UsageError(format!(
                "unknown format '{other}' (expected csv, json or svg)"
            ))),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Svg => "svg",
        })
    }
}

/// Every parameter of a run with defaults filled in. Thread count and output
/// directory are left out: neither may change a result.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub seed: u64,
    pub xi: String,
    pub n: u32,
    pub q: u32,
    pub eps: f64,
    pub alpha: f64,
    pub u: f64,
    pub u_grid: String,
    pub trials: u64,
    pub word: &'static str,
    pub formats: BTreeSet<Format>,
    #[serde(skip)]
    pub spec: CantorSpec,
    #[serde(skip)]
    pub grid: GridSpec,
    #[serde(skip)]
    pub out: PathBuf,
}

fn usage<T>(msg: String) -> Result<T, UsageError> {
    Err(UsageError(msg))
}

impl RunConfig {
    /// Validate `args` against the preconditions of `command`.
    pub fn resolve(command: Command, args: &RunArgs) -> Result<Self, UsageError> {
        let ratio =
            CantorSpec::parse_ratio(&args.xi).map_err(|e| UsageError(format!("--xi: {e}")))?;
        let n = args.n.unwrap_or(command.default_n());
        let spec = CantorSpec::new(ratio, 0).map_err(|e| UsageError(format!("--xi: {e}")))?;
        let max_n = match command {
            Command::Cantor => 22,
            Command::Walk | Command::Spectrum | Command::SalemReport | Command::Dims => 24,
            Command::Moments | Command::Tail => 20,
            Command::Lemma | Command::Verify => u32::MAX,
        };
        if n == 0 || n > max_n {
            return usage(format!(
                "--n must lie in [1, {max_n}] for {}, got {n}",
                command.name()
            ));
        }
        if command == Command::Walk && n < 2 {
            return usage("--n must be at least 2 for walk".into());
        }
        let spec = spec.with_depth(n);

        if !(args.eps > 0.0 && args.eps.is_finite()) {
            return usage(format!("--eps must be positive, got {}", args.eps));
        }
        let q = match (args.q, command) {
            (Some(0), _) => return usage("--q must be at least 1".into()),
            (Some(q), _) => q,
            (None, Command::Tail) => default_tail_q(args.eps),
            (None, _) => 1,
        };
        let alpha = args.alpha.unwrap_or_else(|| spec.beta());
        if !(alpha > 0.0 && alpha <= 1.0) {
            return usage(format!("--alpha must lie in (0, 1], got {alpha}"));
        }
        if !(args.u > 0.0 && args.u.is_finite()) {
            return usage(format!("--u must be positive, got {}", args.u));
        }
        let grid: GridSpec = if args.u_grid.trim() == "thm42" {
            Ok(GridSpec::Thm42 { lo: n, hi: n + 1 })
        } else {
            args.u_grid.parse()
        }
        .map_err(|e| UsageError(format!("--u-grid: {e}")))?;
        grid.points()
            .map_err(|e| UsageError(format!("--u-grid: {e}")))?;
        let trials = args.trials.unwrap_or(command.default_trials());
        let min_trials = match command {
            Command::Moments | Command::Tail => 100,
            _ => 1,
        };
        if trials < min_trials {
            return usage(format!(
                "--trials must be at least {min_trials} for {}",
                command.name()
            ));
        }
        let formats = args
            .formats
            .split(',')
            .filter(|s| !s.trim().is_empty())
            .map(str::parse)
            .collect::<Result<BTreeSet<Format>, _>>()?;
        if formats.is_empty() {
            return usage("--formats must name at least one of csv, json, svg".into());
        }
        if args.threads == Some(0) {
            return usage("--threads must be at least 1".into());
        }
        Ok(RunConfig {
            command,
            seed: args.seed,
            xi: format!("{}/{}", ratio.numer(), ratio.denom()),
            n,
            q,
            eps: args.eps,
            alpha,
            u: args.u,
            u_grid: grid.to_string(),
            trials,
            word: match args.word {
                Word::Random => "random",
                Word::Ones => "ones",
            },
            formats,
            spec,
            grid,
            out: args.out.clone(),
        })
    }

    pub fn word_source(&self) -> WordSource {
        if self.word == "ones" {
            WordSource::AllOnes
        } else {
            WordSource::Random
        }
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON config.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))[..16].to_string()
    }

    /// `<command>-<seed>-<hash>`.
    pub fn stem(&self) -> String {
        format!("{}-{}-{}", self.command.name(), self.seed, self.hash())
    }

    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}
