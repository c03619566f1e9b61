use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fraclab_cli::{resolve_config, run, CommandKind, RunOptions, DEFAULT_SEED};

#[derive(Parser)]
#[command(name = "fraclab", version, about = "Fractional evolution equations: calculus, solvers and regularity checks")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Mittag-Leffler function evaluation
    Ml {
        #[command(subcommand)]
        cmd: MlCmd,
    },
    /// Contour functional calculus checks
    Funcalc {
        #[command(subcommand)]
        cmd: FuncalcCmd,
    },
    /// Solve the non-autonomous problem by the shifted Neumann series
    Solve(Common),
    /// Dini-type integrability of a continuity modulus
    Dini(Common),
    /// Symbol bounds of the Volterra kernel
    Symbol(Common),
    /// Hörmander-type kernel integrals
    Hormander(Common),
    /// Remainder operator study under contour refinement
    Rstudy(Common),
    /// The counterexample without maximal regularity
    Counterexample(Common),
    /// Run one command over a grid of configs
    Sweep(Common),
}

#[derive(Subcommand)]
enum MlCmd {
    /// Evaluate at points and along the oscillatory ray
    Eval(Common),
}

#[derive(Subcommand)]
enum FuncalcCmd {
    /// Closed forms, calculus identities and decay exponents
    Verify(Common),
}

#[derive(Args)]
struct Common {
    /// JSON config; the command defaults are used when absent
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for the report and CSV files
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Worker threads
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Print the resolved config as JSON and exit
    #[arg(long)]
    print_config: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, c) = match cli.cmd {
        Cmd::Ml { cmd: MlCmd::Eval(c) } => (CommandKind::MlEval, c),
        Cmd::Funcalc { cmd: FuncalcCmd::Verify(c) } => (CommandKind::FuncalcVerify, c),
        Cmd::Solve(c) => (CommandKind::Solve, c),
        Cmd::Dini(c) => (CommandKind::Dini, c),
        Cmd::Symbol(c) => (CommandKind::Symbol, c),
        Cmd::Hormander(c) => (CommandKind::Hormander, c),
        Cmd::Rstudy(c) => (CommandKind::Rstudy, c),
        Cmd::Counterexample(c) => (CommandKind::Counterexample, c),
        Cmd::Sweep(c) => (CommandKind::Sweep, c),
    };
    if c.print_config {
        let res = c.config.as_deref().map(fraclab_cli::load_config).transpose().and_then(|v| resolve_config(kind, v));
        return match res {
            Ok(v) => {
                println!("{}", serde_json::to_string_pretty(&v).expect("config serializes"));
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("fraclab {kind}: {e}");
                ExitCode::from(e.exit_code() as u8)
            }
        };
    }
    let opts = RunOptions { out: c.out, seed: c.seed, jobs: c.jobs };
    ExitCode::from(run(kind, c.config.as_deref(), &opts) as u8)
}
