//! `sjrp`: config-driven experiment runner.
//!
//! Exit codes: 0 success, 1 I/O or other failure, 2 usage error (including
//! an unknown subcommand), 3 invalid config, 4 missing checkpoint or input
//! artifact, 5 numerical failure (divergence, non-convergence).

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use sjrp_cli::commands::{self, Run};
use sjrp_cli::config::ExperimentConfig;
use sjrp_cli::output::{hash_outputs, sha256_hex, Manifest, Versions};
use sjrp_cli::{exit_code, CliError};

#[derive(Parser)]
#[command(name = "sjrp", version, about = "Joint replenishment experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config's master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; defaults to the config's `out`, else `runs/<name>`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Network checkpoint written by `train` and read by `extract`.
    #[arg(long, global = true)]
    checkpoint: Option<PathBuf>,
}

#[derive(Subcommand, Clone, PartialEq, Eq)]
enum Command {
    /// Tune and evaluate the benchmark heuristics.
    Bench,
    /// Solve the truncated MDP (at most two items).
    Mdp,
    /// Train the value and gradient networks.
    Train,
    /// Compute the order-up-to vector and write the neural policy.
    Extract,
    /// Simulate policy files.
    Eval {
        /// Policy files; all of `<out>/policies` when omitted.
        policies: Vec<PathBuf>,
    },
    /// Gap table against a baseline policy.
    Compare,
    /// Single-item check of the trained networks against the grid solution.
    Validate1d,
}

fn name(c: &Command) -> &'static str {
    match c {
        Command::Bench => "bench",
        Command::Mdp => "mdp",
        Command::Train => "train",
        Command::Extract => "extract",
        Command::Eval { .. } => "eval",
        Command::Compare => "compare",
        Command::Validate1d => "validate1d",
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let started = Instant::now();
    let config_path = cli.config.clone().ok_or_else(|| CliError::Config("--config is required".into()))?;
    let mut cfg = ExperimentConfig::load(&config_path).map_err(CliError::Config)?;
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    let base = config_path.parent().unwrap_or(std::path::Path::new("."));
    let out = match (&cli.out, &cfg.out) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) => base.join(o),
        (None, None) => PathBuf::from("runs").join(&cfg.name),
    };
    std::fs::create_dir_all(&out)?;
    let threads = cli.threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global().ok();

    let policies = match &cli.command {
        Command::Eval { policies } => policies.clone(),
        _ => Vec::new(),
    };
    let resolved = cfg.to_toml();
    let mut r = Run { cfg, out: out.clone(), checkpoint: cli.checkpoint.clone(), policies, files: Vec::new(), timings: Vec::new() };
    match &cli.command {
        Command::Bench => commands::bench(&mut r)?,
        Command::Mdp => commands::mdp(&mut r)?,
        Command::Train => commands::train(&mut r)?,
        Command::Extract => commands::extract(&mut r)?,
        Command::Eval { .. } => commands::eval(&mut r)?,
        Command::Compare => commands::compare(&mut r)?,
        Command::Validate1d => commands::validate1d(&mut r)?,
    }

    let manifest = Manifest {
        subcommand: name(&cli.command).into(),
        config_path,
        config_sha256: sha256_hex(resolved.as_bytes()),
        seed: r.cfg.seed,
        threads,
        versions: Versions::current(),
        config: serde_json::to_value(toml::from_str::<toml::Value>(&resolved)?)?,
        outputs: hash_outputs(&out, &r.files)?,
        wall_seconds: started.elapsed().as_secs_f64(),
        timings: r.timings,
    };
    let path = out.join(format!("manifest_{}.json", name(&cli.command)));
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
    for f in &manifest.outputs {
        println!("{}", out.join(&f.path).display());
    }
    Ok(())
}
