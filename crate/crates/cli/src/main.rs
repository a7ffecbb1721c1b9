use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use smix::commands::{self, KrInput, KrRequest};
use smix::{CliError, CliResult};
use smix_core::kr::{EntropicOptions, KrMethod};

#[derive(Parser)]
#[command(name = "smix", version, about = "Passive scalar mixing experiments")]
struct Cli {
    /// Worker threads for sweeps [env: SMIX_THREADS]
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (default: `[output] directory`, then a name from the command)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replaces the flow and initial-condition seeds
    #[arg(long)]
    seed: Option<u64>,
    /// `section.key=value`, repeatable
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    ExactFlow,
    Entropic,
}

#[derive(Subcommand)]
enum Command {
    /// One run: diagnostics CSV, manifest and optional snapshots
    Simulate(Common),
    /// Runs every kappa of the list and fits the rate scaling law
    Sweep(Common),
    /// KR distance of a snapshot, run directory or point CSV
    Krdist {
        /// Run directory, binary snapshot, or CSV with `x,y,mass` or `x,y,value`
        input: PathBuf,
        /// Comma-separated list
        #[arg(long, value_delimiter = ',', default_value = "0.1")]
        delta: Vec<f64>,
        #[arg(long, value_enum, default_value = "exact-flow")]
        method: Method,
        /// Block-average the field to m x m cells first
        #[arg(long)]
        coarse: Option<usize>,
        #[arg(long, default_value_t = 1e-3)]
        epsilon: f64,
        /// Directory for one transport-plan CSV per delta
        #[arg(long)]
        plan: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Plot-ready CSVs and a summary from run or sweep directories
    Report {
        /// Run or sweep directories
        dirs: Vec<PathBuf>,
        #[arg(long, default_value = "report")]
        out: PathBuf,
    },
    /// Quick invariant suite
    Check {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Simulate(c) => {
            let config = smix::load_config(&c.config, &c.overrides, c.seed)?;
            let out = smix::resolve_out(c.out.as_deref(), Some(&config), "run");
            let outcome = commands::cmd_simulate(&config, &out)?;
            println!("wrote {}", outcome.dir.display());
        }
        Command::Sweep(c) => {
            let config = smix::load_config(&c.config, &c.overrides, c.seed)?;
            let out = smix::resolve_out(c.out.as_deref(), Some(&config), "sweep");
            let env = std::env::var(smix::THREADS_ENV).ok();
            let threads = smix::resolve_threads(cli.threads, env.as_deref())?;
            let report = commands::cmd_sweep(&config, &out, threads)?;
            for e in &report.ledger {
                let tag = if e.passed { "PASS" } else { "FAIL" };
                let kappa = e.kappa.map_or(String::new(), |k| format!(" kappa={k:e}"));
                println!("{tag} {}{kappa}: measured {:.4e}, limit {:.4e}, margin {:.3e}", e.name, e.measured, e.threshold, e.margin);
            }
            if let Some(fit) = &report.scaling {
                println!("beta = {:.4} +/- {:.4}", fit.beta, fit.beta_stderr);
            }
            if !report.all_passed() {
                return Err(CliError::Invariant(format!("{} ledger rows failed", report.failures().len())));
            }
        }
        Command::Krdist { input, delta, method, coarse, epsilon, plan, out } => {
            let request = KrRequest {
                deltas: delta,
                method: match method {
                    Method::ExactFlow => KrMethod::ExactFlow,
                    Method::Entropic => KrMethod::Entropic,
                },
                coarse,
                entropic: EntropicOptions { epsilon, ..EntropicOptions::default() },
                plan_dir: plan,
            };
            let results = commands::cmd_krdist(&KrInput::load(&input)?, &request, out.as_deref())?;
            print!("{}", commands::krdist::results_json(&results));
        }
        Command::Report { dirs, out } => {
            let summary = commands::cmd_report(&dirs, &out)?;
            for f in summary.files {
                println!("wrote {}", out.join(f).display());
            }
        }
        Command::Check { config, out, overrides } => {
            let config = config.map(|p| smix::load_config(&p, &overrides, None)).transpose()?;
            let report = commands::cmd_check(config.as_ref(), out.as_deref())?;
            for line in report.lines() {
                println!("{line}");
            }
            if !report.all_passed() {
                return Err(CliError::Invariant("invariant suite failed".into()));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("smix: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

