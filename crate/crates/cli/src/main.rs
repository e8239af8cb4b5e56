//! `sigma-forest` command-line tool.
//!
//! Exit codes: 0 success, 1 a scientific check failed, 2 usage or
//! configuration error, 3 numerical failure.

mod commands;
mod config;
mod output;

use std::fmt;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Command, RunConfig, Settings};

#[derive(Debug)]
pub struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    pub const SCIENCE: u8 = 1;
    pub const CONFIG: u8 = 2;
    pub const NUMERICAL: u8 = 3;

    pub fn config(message: impl Into<String>) -> Self {
        CliError {
            code: Self::CONFIG,
            message: message.into(),
        }
    }

    pub fn numerical(message: impl Into<String>) -> Self {
        CliError {
            code: Self::NUMERICAL,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<sigma_forest::Error> for CliError {
    fn from(e: sigma_forest::Error) -> Self {
        use sigma_forest::Error as E;
        let code = match &e {
            e if e.is_numerical() => Self::NUMERICAL,
            E::Diagnostic(_) => Self::NUMERICAL,
            E::IdentityFailure(_) => Self::SCIENCE,
            _ => Self::CONFIG,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

#[derive(Parser)]
#[command(name = "sigma-forest", version, about = "Exact identities and Monte Carlo studies of the H^{2|2} sigma model in its spanning-forest form")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Check the exact identities against brute-force oracles.
    Verify(Flags),
    /// Run one chain and write its draws as JSON lines.
    Sample(Flags),
    /// Compare general pinning against single pinnings over an eps sweep.
    ComparePinning(Flags),
    /// Fit the decay of eps*E[G] with horizontal distance on a ladder.
    LadderDecay(Flags),
    /// Independence and invariance checks under single-site pinning.
    Independence(Flags),
}

#[derive(Args, Debug)]
struct Flags {
    /// `key = value` file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Graph file: `n m`, then `m` lines `i j beta`.
    #[arg(long, conflicts_with = "ladder_base")]
    graph: Option<String>,
    /// Base graph of a ladder, same format as --graph.
    #[arg(long = "ladder-base")]
    ladder_base: Option<String>,
    /// Ladder levels as MINUS,PLUS.
    #[arg(long = "ladder-L", value_name = "MINUS,PLUS")]
    ladder_l: Option<String>,
    #[arg(long = "beta-vertical")]
    beta_vertical: Option<f64>,
    #[arg(long = "beta-horizontal")]
    beta_horizontal: Option<f64>,
    /// Pinning profile: a uniform value, `delta:X`, or one value per vertex.
    #[arg(long, allow_hyphen_values = true)]
    pi: Option<String>,
    /// Comma-separated list of eps values.
    #[arg(long)]
    eps: Option<String>,
    /// Observed pair X,Y with 1-based labels; repeatable.
    #[arg(long)]
    pair: Vec<String>,
    /// Retained draws per chain.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long = "burn-in")]
    burn_in: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Chains per cell.
    #[arg(long)]
    chains: Option<usize>,
    /// Largest bundled graph included by `verify`.
    #[arg(long = "max-vertices")]
    max_vertices: Option<usize>,
    /// Random instances added to the `verify` corpus.
    #[arg(long)]
    random: Option<usize>,
    /// Sample a spanning forest with every draw.
    #[arg(long, conflicts_with = "no_trees")]
    trees: bool,
    #[arg(long = "no-trees")]
    no_trees: bool,
    /// Run chains and cells on one thread.
    #[arg(long)]
    sequential: bool,
    /// Output directory.
    #[arg(long)]
    out: Option<String>,
}

impl Flags {
    fn settings(&self) -> Settings {
        let mut s = Settings::default();
        let mut opt = |key: &str, v: Option<String>| {
            if let Some(v) = v {
                s.set(key, v);
            }
        };
        opt("graph", self.graph.clone());
        opt("ladder-base", self.ladder_base.clone());
        opt("ladder-l", self.ladder_l.clone());
        opt("beta-vertical", self.beta_vertical.map(|b| b.to_string()));
        opt("beta-horizontal", self.beta_horizontal.map(|b| b.to_string()));
        opt("pi", self.pi.clone());
        opt("eps", self.eps.clone());
        opt("samples", self.samples.map(|v| v.to_string()));
        opt("burn-in", self.burn_in.map(|v| v.to_string()));
        opt("thin", self.thin.map(|v| v.to_string()));
        opt("seed", self.seed.map(|v| v.to_string()));
        opt("chains", self.chains.map(|v| v.to_string()));
        opt("max-vertices", self.max_vertices.map(|v| v.to_string()));
        opt("random", self.random.map(|v| v.to_string()));
        opt("out", self.out.clone());
        if self.trees || self.no_trees {
            opt("trees", Some(self.trees.to_string()));
        }
        if self.sequential {
            opt("sequential", Some("true".into()));
        }
        s.set_all("pair", &self.pair);
        s
    }

    fn resolve(&self, command: Command) -> Result<RunConfig, CliError> {
        let file = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
                Settings::parse(&text)?
            }
            None => Settings::default(),
        };
        RunConfig::resolve(command, &self.settings().over(file))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, flags) = match &cli.command {
        Sub::Verify(f) => (Command::Verify, f),
        Sub::Sample(f) => (Command::Sample, f),
        Sub::ComparePinning(f) => (Command::ComparePinning, f),
        Sub::LadderDecay(f) => (Command::LadderDecay, f),
        Sub::Independence(f) => (Command::Independence, f),
    };
    let result = flags.resolve(command).and_then(|cfg| commands::run(&cfg));
    match result {
        Ok(outcome) => {
            for line in &outcome.summary {
                println!("{line}");
            }
            if outcome.passed {
                ExitCode::SUCCESS
            } else {
                eprintln!("error: a check failed");
                ExitCode::from(CliError::SCIENCE)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}
