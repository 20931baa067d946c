use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use snml_core::analysis::{Position, VarianceFunctionSpec, Verdict};
use snml_core::{FamilySpec, Interval, Strategy};

use crate::Failure;

#[derive(Parser, Debug)]
#[command(name = "snml", version, about = "Log-loss prediction strategies for one-parameter exponential families")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// KL divergence D(p_mu0 || p_mu1).
    Kl {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long)]
        mu0: f64,
        #[arg(long)]
        mu1: f64,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// One-step predictive (SNML or Bayes-Jeffreys) evaluated on a grid.
    Predict {
        #[command(flatten)]
        family: FamilyArgs,
        /// Observed history, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        history: Vec<f64>,
        #[arg(long, value_enum, default_value_t = StrategyArg::Snml)]
        strategy: StrategyArg,
        /// Points at which to evaluate: `a,b,c` or `lo..hi:count`.
        #[arg(long, allow_hyphen_values = true)]
        grid: String,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Joint probability of x_{m+1..n} given x^m.
    Joint {
        #[command(flatten)]
        family: FamilyArgs,
        #[command(flatten)]
        seq: SequenceArgs,
        #[arg(long, value_enum, default_value_t = StrategyArg::Snml)]
        strategy: StrategyArg,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Conditional regret of a strategy on a sequence.
    Regret {
        #[command(flatten)]
        family: FamilyArgs,
        #[command(flatten)]
        seq: SequenceArgs,
        #[arg(long, value_enum, default_value_t = StrategyArg::Snml)]
        strategy: StrategyArg,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Constancy of C_n(mu0) over a grid of means.
    CheckConstancy {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long)]
        n: usize,
        #[arg(long, allow_hyphen_values = true)]
        grid: String,
        #[command(flatten)]
        expect: ExpectArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Permutation invariance of SNML joints.
    CheckExchangeability {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        n: usize,
        /// Explicit sequence of length n (repeatable); otherwise all sequences
        /// for discrete families and random ones for continuous families.
        #[arg(long = "seq", allow_hyphen_values = true)]
        seqs: Vec<String>,
        /// Number of random continuations.
        #[arg(long)]
        count: Option<usize>,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[command(flatten)]
        expect: ExpectArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// The sigma ODE and the higher-order condition for a variance function.
    CheckOde {
        #[command(flatten)]
        vf: VarianceArgs,
        #[arg(long, allow_hyphen_values = true)]
        grid: Option<String>,
        #[command(flatten)]
        expect: ExpectArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Which exchangeable class a variance function belongs to, if any.
    Classify {
        #[command(flatten)]
        vf: VarianceArgs,
        #[command(flatten)]
        expect: ExpectArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Ratios C_n / sqrt(2 pi / n) against the Laplace limit.
    Laplace {
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long)]
        mu0: f64,
        #[arg(long, value_enum, default_value_t = PositionArg::Interior)]
        position: PositionArg,
        #[arg(long = "n-list", value_delimiter = ',', default_value = "2,5,10,20,50")]
        n_list: Vec<usize>,
        #[command(flatten)]
        expect: ExpectArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Draws from the Tweedie-3/2 member with mean mu, one per line.
    SampleTweedie {
        #[arg(long)]
        mu: f64,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
pub struct FamilyArgs {
    /// gaussian, gamma, tweedie32, bernoulli, poisson, or an inline JSON spec.
    #[arg(long)]
    pub family: Option<String>,
    /// Variance of the Gaussian location family.
    #[arg(long, default_value_t = 1.0)]
    pub variance: f64,
    /// Shape of the Gamma family.
    #[arg(long, default_value_t = 1.0)]
    pub shape: f64,
    /// JSON family spec file.
    #[arg(long = "family-file")]
    pub family_file: Option<PathBuf>,
    /// Restricted mean domain `lo,hi` (`inf` allowed).
    #[arg(long = "mean-domain", allow_hyphen_values = true)]
    pub mean_domain: Option<String>,
}

impl FamilyArgs {
    pub fn resolve(&self) -> Result<FamilySpec, Failure> {
        let spec = match (&self.family, &self.family_file) {
            (Some(_), Some(_)) => return Err(Failure::usage("give either --family or --family-file, not both")),
            (None, None) => return Err(Failure::usage("missing --family or --family-file")),
            (None, Some(path)) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Failure::usage(format!("--family-file {}: {e}", path.display())))?;
                FamilySpec::from_json(&text).map_err(|e| Failure::usage(format!("--family-file: {e}")))?
            }
            (Some(f), None) if f.trim_start().starts_with('{') => {
                FamilySpec::from_json(f).map_err(|e| Failure::usage(format!("--family: {e}")))?
            }
            (Some(f), None) => match f.to_ascii_lowercase().as_str() {
                "gaussian" | "normal" | "gaussian_location" => FamilySpec::gaussian_location(self.variance)
                    .map_err(|e| Failure::usage(format!("--variance: {e}")))?,
                "gamma" | "gamma_shape" => {
                    FamilySpec::gamma_shape(self.shape).map_err(|e| Failure::usage(format!("--shape: {e}")))?
                }
                "tweedie32" | "tweedie" => FamilySpec::tweedie32(),
                "bernoulli" => FamilySpec::bernoulli(),
                "poisson" => FamilySpec::poisson(),
                other => return Err(Failure::usage(format!("--family: unknown family `{other}`"))),
            },
        };
        match &self.mean_domain {
            None => Ok(spec),
            Some(text) => {
                let ends = parse_list(text).map_err(|e| Failure::usage(format!("--mean-domain: {e}")))?;
                if ends.len() != 2 {
                    return Err(Failure::usage("--mean-domain needs two endpoints"));
                }
                let closed = Interval::new(ends[0], ends[1], true, true);
                spec.clone()
                    .with_mean_domain(closed)
                    .or_else(|_| spec.with_mean_domain(Interval::open(ends[0], ends[1])))
                    .map_err(|e| Failure::usage(format!("--mean-domain: {e}")))
            }
        }
    }
}

#[derive(Args, Debug)]
pub struct SequenceArgs {
    /// Observations x_1..x_n, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub seq: Vec<f64>,
    /// Conditioning length (defaults to 0 for Bernoulli, 1 otherwise).
    #[arg(long)]
    pub m: Option<usize>,
}

#[derive(Args, Debug)]
pub struct VarianceArgs {
    /// `const:v`, `power:a,k,l,p`, `poly:c0,c1,..`, `exp:a,b` or `table:path`, with optional `@lo,hi`.
    #[arg(long = "vf", allow_hyphen_values = true)]
    pub vf: Option<String>,
    #[command(flatten)]
    pub family: FamilyArgs,
}

impl VarianceArgs {
    pub fn resolve(&self) -> Result<VarianceFunctionSpec, Failure> {
        match &self.vf {
            Some(text) => VarianceFunctionSpec::parse(text).map_err(|e| Failure::usage(format!("--vf: {e}"))),
            None => {
                let family = self.family.resolve()?;
                VarianceFunctionSpec::from_family(&family).map_err(|e| Failure::usage(format!("--family: {e}")))
            }
        }
    }
}

#[derive(Args, Debug)]
pub struct ExpectArgs {
    /// Exit with status 1 unless the verdict matches.
    #[arg(long, value_enum)]
    pub expect: Option<ExpectArg>,
}

#[derive(Args, Debug)]
pub struct OutputArgs {
    /// Write to this file instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExpectArg {
    Constant,
    Nonconstant,
}

impl ExpectArg {
    pub fn verdict(self) -> Verdict {
        match self {
            ExpectArg::Constant => Verdict::Constant,
            ExpectArg::Nonconstant => Verdict::NonConstant,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum StrategyArg {
    Snml,
    Bayes,
    Cnml,
    Nml,
}

impl From<StrategyArg> for Strategy {
    fn from(s: StrategyArg) -> Self {
        match s {
            StrategyArg::Snml => Strategy::Snml,
            StrategyArg::Bayes => Strategy::BayesJeffreys,
            StrategyArg::Cnml => Strategy::Cnml,
            StrategyArg::Nml => Strategy::Nml,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum PositionArg {
    Interior,
    Boundary,
}

impl From<PositionArg> for Position {
    fn from(p: PositionArg) -> Self {
        match p {
            PositionArg::Interior => Position::Interior,
            PositionArg::Boundary => Position::Boundary,
        }
    }
}

pub fn parse_list(text: &str) -> Result<Vec<f64>, String> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| format!("`{}` is not a number", s.trim())))
        .collect()
}

/// `a,b,c` or `lo..hi:count` (evenly spaced, endpoints included).
pub fn parse_grid(text: &str) -> Result<Vec<f64>, Failure> {
    let bad = |msg: String| Failure::usage(format!("--grid: {msg}"));
    if let Some((range, count)) = text.split_once(':') {
        let (lo, hi) = range
            .split_once("..")
            .ok_or_else(|| bad(format!("`{text}` is neither a list nor lo..hi:count")))?;
        let lo: f64 = lo.trim().parse().map_err(|_| bad(format!("`{lo}` is not a number")))?;
        let hi: f64 = hi.trim().parse().map_err(|_| bad(format!("`{hi}` is not a number")))?;
        let count: usize = count.trim().parse().map_err(|_| bad(format!("`{count}` is not a count")))?;
        if count < 2 {
            return Ok(vec![lo; count]);
        }
        return Ok((0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect());
    }
    parse_list(text).map_err(bad)
}

/// Sweep commands need at least two grid points.
pub fn parse_sweep_grid(text: &str) -> Result<Vec<f64>, Failure> {
    let grid = parse_grid(text)?;
    if grid.len() < 2 {
        return Err(Failure::usage(format!("--grid resolves to {} point(s); at least 2 are needed", grid.len())));
    }
    Ok(grid)
}
