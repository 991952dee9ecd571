use std::path::PathBuf;
use std::process::ExitCode;

use anderson_lab::experiment::{run, Command, ConfigSource, RunOptions};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "anderson-lab", version, about = "Localization experiments for the 1D Anderson model")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Common {
    /// JSON config (distribution, seed, params); a manifest.json also works.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for CSV tables and manifest.json.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Master seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (results do not depend on it).
    #[arg(long)]
    threads: Option<usize>,
    /// Exit with status 2 when an acceptance threshold fails.
    #[arg(long)]
    assert: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Lyapunov exponent grid.
    Gamma(Common),
    /// Large-deviation probabilities and decay rate.
    Ldt(Common),
    /// Green's function oracle and singular-box witnesses.
    GreenCheck(Common),
    /// Eigensolver audit and eigenfunction decay rates.
    Localize(Common),
    /// Semi-uniform localization constants.
    Sule(Common),
    /// Eigenfunction correlators and dynamical decay.
    Dynamics(Common),
    /// Sine-product bounds and Lebesgue constants.
    InterpCheck {
        #[command(flatten)]
        common: Common,
        /// Largest denominator in the sine-product scan.
        #[arg(long)]
        q_max: Option<u64>,
    },
    /// Uniform determinant upper bound over an energy interval.
    UniformCs(Common),
    /// Threshold lengths of the localization conditions versus shift.
    NGrowth(Common),
    /// Eigenvalue separation from deviation sets.
    Separation(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, common, q_max) = match cli.command {
        Cmd::Gamma(c) => (Command::Gamma, c, None),
        Cmd::Ldt(c) => (Command::Ldt, c, None),
        Cmd::GreenCheck(c) => (Command::GreenCheck, c, None),
        Cmd::Localize(c) => (Command::Localize, c, None),
        Cmd::Sule(c) => (Command::Sule, c, None),
        Cmd::Dynamics(c) => (Command::Dynamics, c, None),
        Cmd::InterpCheck { common, q_max } => (Command::InterpCheck, common, q_max),
        Cmd::UniformCs(c) => (Command::UniformCs, c, None),
        Cmd::NGrowth(c) => (Command::NGrowth, c, None),
        Cmd::Separation(c) => (Command::Separation, c, None),
    };
    let opts = RunOptions {
        command,
        config: common.config.map_or(ConfigSource::Defaults, ConfigSource::File),
        out: common.out,
        seed: common.seed,
        threads: common.threads,
        q_max,
    };
    let outcome = match run(&opts) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("anderson-lab {command}: {e}");
            return ExitCode::from(1);
        }
    };
    for c in outcome.checks() {
        let tag = if c.passed { "PASS" } else { "FAIL" };
        let crit = c.criterion.map_or(String::from("info"), |k| format!("criterion {k}"));
        println!("{tag} {} ({crit}): {}", c.name, c.detail);
    }
    println!("wrote {}", outcome.out_dir.join("manifest.json").display());
    if common.assert && !outcome.assertions_pass() {
        return ExitCode::from(2);
    }
    ExitCode::SUCCESS
}
