//! `robsparse`: design, sweep and analyze sparsified feedback gains.
//!
//! Every flag can also be set through an environment variable named
//! `ROBSPARSE_<FLAG>` (upper case, dashes as underscores), e.g.
//! `ROBSPARSE_NU=10`. Flags on the command line win.

mod commands;
mod files;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "robsparse", version, about = "Sparsify a feedback gain while keeping a certified H2/H∞ distance to a reference closed loop")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the sparsifier on one problem and write K, history and a report.
    Design(DesignArgs),
    /// Run one design per (link, ρ_rel) case on a power network.
    Sweep(SweepArgs),
    /// Frequency response, deviation metrics and robustness of a given gain.
    Analyze(AnalyzeArgs),
}

#[derive(Args, Debug, Clone)]
pub struct Inputs {
    /// Uncertain LTI system file (JSON with A, B1, B2, C, D, E_A, E_B1, rho).
    #[arg(long, env = "ROBSPARSE_SYSTEM", conflicts_with = "network")]
    pub system: Option<PathBuf>,
    /// Power network file (JSON with n_gen, inertia, damping, b_kron, labels).
    #[arg(long, env = "ROBSPARSE_NETWORK")]
    pub network: Option<PathBuf>,
    /// Gain file. For `design` and `sweep` this is the reference K̂ (networks
    /// default to the LQR gain with Q = I, R = 10I); for `analyze` it is the
    /// gain under test.
    #[arg(long, env = "ROBSPARSE_GAIN")]
    pub gain: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, env = "ROBSPARSE_OUT", default_value = "robsparse-out")]
    pub out: PathBuf,
    /// Seed for uncertainty sampling.
    #[arg(long, env = "ROBSPARSE_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug, Clone)]
pub struct Tuning {
    #[arg(long, env = "ROBSPARSE_LAMBDA1", default_value_t = 0.5)]
    pub lambda1: f64,
    #[arg(long, env = "ROBSPARSE_LAMBDA2", default_value_t = 0.1)]
    pub lambda2: f64,
    #[arg(long, env = "ROBSPARSE_NU", default_value_t = 100.0)]
    pub nu: f64,
    #[arg(long, env = "ROBSPARSE_XI", default_value_t = 1e-6)]
    pub xi: f64,
    #[arg(long = "eps-star", env = "ROBSPARSE_EPS_STAR", default_value_t = 1e-2)]
    pub eps_star: f64,
    /// Entries of the final gain below this magnitude are set to zero.
    #[arg(long, env = "ROBSPARSE_TRUNCATE", default_value_t = 5e-5)]
    pub truncate: f64,
    #[arg(long = "max-outer", env = "ROBSPARSE_MAX_OUTER", default_value_t = 200)]
    pub max_outer: usize,
}

#[derive(Args, Debug)]
pub struct DesignArgs {
    #[command(flatten)]
    pub inputs: Inputs,
    #[command(flatten)]
    pub tuning: Tuning,
    /// Uncertain network link as `i-j` (1-based generator indices).
    #[arg(long, env = "ROBSPARSE_LINKS")]
    pub links: Option<String>,
    /// Relative link uncertainty as a fraction, e.g. `0.3`.
    #[arg(long = "rho-rel-list", env = "ROBSPARSE_RHO_REL_LIST")]
    pub rho_rel_list: Option<String>,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    #[command(flatten)]
    pub inputs: Inputs,
    #[command(flatten)]
    pub tuning: Tuning,
    /// Links as `i-j,k-l,...` (1-based), `all`, or empty for no cases.
    #[arg(long, env = "ROBSPARSE_LINKS", default_value = "all")]
    pub links: String,
    /// Comma-separated relative uncertainties, e.g. `0,0.1,0.2,0.3`.
    #[arg(long = "rho-rel-list", env = "ROBSPARSE_RHO_REL_LIST", default_value = "0.3")]
    pub rho_rel_list: String,
}

#[derive(Args, Debug)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub inputs: Inputs,
    /// Reference gain K̂; networks default to the LQR gain.
    #[arg(long, env = "ROBSPARSE_BASELINE")]
    pub baseline: Option<PathBuf>,
    #[arg(long, env = "ROBSPARSE_LINKS")]
    pub links: Option<String>,
    #[arg(long = "rho-rel-list", env = "ROBSPARSE_RHO_REL_LIST")]
    pub rho_rel_list: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Command::Design(a) => commands::design(&a),
        Command::Sweep(a) => commands::sweep(&a),
        Command::Analyze(a) => commands::analyze(&a),
    };
    match res {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
