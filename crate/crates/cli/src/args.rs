use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "mzero", version, about = "Multipoint solvers for multiple zeros of nonlinear equations")]
pub struct Cli {
    /// TOML file whose keys mirror the long flags; flags on the command line win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Working precision in bits [default: 128, corpus 2048].
    #[arg(long, global = true, env = "MZERO_PRECISION_BITS")]
    pub prec: Option<u32>,
    #[arg(long, global = true, value_enum)]
    pub out: Option<Format>,
    /// Write the report here instead of stdout.
    #[arg(long, global = true, value_name = "PATH")]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[command(subcommand)]
    pub cmd: Cmd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
pub enum Cmd {
    /// Iterate one method on f(x) = 0 from x0.
    Solve(SolveArgs),
    /// Expand a family's error in ε with exact coefficients and report the order.
    VerifyOrder(VerifyArgs),
    /// Solve for the weight derivative values that give the claimed order.
    DeriveConditions(DeriveArgs),
    /// Time m-th roots, Horner evaluation or family steps (CSV by default).
    #[command(subcommand)]
    Bench(BenchCmd),
    /// The built-in test-function corpus.
    #[command(subcommand)]
    Corpus(CorpusCmd),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Real,
    Complex,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    /// f(x), e.g. "(x-1)^2*exp(x)".
    #[arg(long = "fn", value_name = "EXPR", allow_hyphen_values = true)]
    pub function: String,
    /// f'(x); taken symbolically when omitted.
    #[arg(long, value_name = "EXPR", allow_hyphen_values = true)]
    pub deriv: Option<String>,
    #[arg(long, default_value_t = 1)]
    pub m: u32,
    #[arg(long)]
    pub family: String,
    #[arg(long, allow_hyphen_values = true)]
    pub x0: String,
    /// Known root; enables errors and the COC estimate.
    #[arg(long, allow_hyphen_values = true)]
    pub root: Option<String>,
    /// Stopping tolerance [default: 2^-(0.9 prec)].
    #[arg(long)]
    pub tol: Option<String>,
    #[arg(long, default_value_t = 100)]
    pub max_iter: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Real)]
    pub mode: ModeArg,
    /// Weight binding SLOT=SPEC, e.g. "P=king(beta=1/2)", "Q=truncated_Q(beta=0)",
    /// "P=taylor(d0=1,d1=2)" or "G=expr:x+2*x^2".
    #[arg(long = "weight", value_name = "SLOT=SPEC")]
    pub weights: Vec<String>,
    /// Family parameter: lambda, a1, a2 or r_m.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    pub params: Vec<String>,
    /// Skip the order check of the bound weights.
    #[arg(long)]
    pub unverified: bool,
    /// Keep x0 as an exact rational, so polynomial steps run exactly.
    #[arg(long)]
    pub exact: bool,
    /// Significant digits printed for iterates.
    #[arg(long, default_value_t = 40)]
    pub digits: usize,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long)]
    pub family: String,
    #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
    pub m: Vec<u32>,
    /// Override a weight derivative value, e.g. P1=0 or Quv=3/2.
    #[arg(long = "slot", value_name = "SLOT=VALUE")]
    pub slots: Vec<String>,
    #[arg(long = "param", value_name = "KEY=VALUE")]
    pub params: Vec<String>,
    #[arg(long, default_value_t = 3)]
    pub trials: usize,
    /// Truncation order of the expansion [default: 8].
    #[arg(long)]
    pub order: Option<usize>,
}

#[derive(Args, Debug)]
pub struct DeriveArgs {
    #[arg(long)]
    pub family: String,
    #[arg(long, value_delimiter = ',', default_value = "2", num_args = 1..)]
    pub m: Vec<u32>,
    /// Fix a slot in the base binding, e.g. P0=2 for fam15b.
    #[arg(long = "fix", value_name = "SLOT=VALUE")]
    pub fixed: Vec<String>,
    #[arg(long = "param", value_name = "KEY=VALUE")]
    pub params: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BenchMode {
    Real,
    Complex,
    Both,
}

#[derive(Subcommand, Debug)]
pub enum BenchCmd {
    /// ((a+ib)/(c+id))^(1/m) per m.
    Root {
        /// "1..7" or a comma list.
        #[arg(long, default_value = "1..7")]
        m: String,
        #[arg(long, value_enum, default_value_t = BenchMode::Both)]
        mode: BenchMode,
        #[arg(long, default_value_t = 1_000_000)]
        trials: usize,
    },
    /// Horner evaluation of a random real polynomial at a complex point.
    Horner {
        #[arg(long, default_value_t = 20)]
        degree: u32,
        #[arg(long, default_value_t = 1_000_000)]
        trials: usize,
    },
    /// One iteration of each family on each corpus entry, at 53 bits.
    Step {
        #[arg(long = "family", value_delimiter = ',', default_value = "fam12,fam23")]
        families: Vec<String>,
        #[arg(long = "entry", value_delimiter = ',', default_value = "exp_m3,poly_m2")]
        entries: Vec<String>,
        #[arg(long, default_value_t = 2000)]
        trials: usize,
    },
}

#[derive(Subcommand, Debug)]
pub enum CorpusCmd {
    List,
    /// COC of every (family, entry) pair.
    Run {
        /// "all" or a comma list.
        #[arg(long = "family", value_delimiter = ',', default_value = "all")]
        families: Vec<String>,
        #[arg(long = "entry", value_delimiter = ',', default_value = "all")]
        entries: Vec<String>,
        #[arg(long, default_value_t = 50)]
        max_iter: usize,
        /// Worker threads [default: all cores].
        #[arg(long)]
        jobs: Option<usize>,
    },
}
