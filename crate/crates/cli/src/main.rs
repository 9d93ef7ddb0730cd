use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use lfrelay_cli::{execute, rerun, CliResult, ExperimentConfig, RunManifest, RunSpec};
use lfrelay_rl::AgentKind;

#[derive(Parser)]
#[command(
    name = "lfrelay",
    version,
    about = "Outage analysis and relay placement for a lossy-forward UAV relay"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML experiment config; defaults apply to anything left out.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config's seed list with a single seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum AgentArg {
    Sac,
    Ddpg,
}

#[derive(Subcommand)]
enum Command {
    /// Closed form against Monte Carlo at random UAV positions.
    Validate {
        #[command(flatten)]
        common: Common,
    },
    /// Outage of every user over a lattice of UAV positions.
    OutageMap {
        #[command(flatten)]
        common: Common,
        /// Points per axis (defaults to experiment.grid_n).
        #[arg(long)]
        grid_n: Option<usize>,
    },
    /// Train one agent and roll out its greedy policy.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "sac")]
        agent: AgentArg,
        /// Comma-separated distortion targets, one per user.
        #[arg(long, value_delimiter = ',')]
        d: Option<Vec<f64>>,
    },
    /// SAC against DDPG over every seed and distortion pair.
    Compare {
        #[command(flatten)]
        common: Common,
    },
    /// Re-execute a run from its manifest and check the outputs match.
    Rerun {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the effective configuration as TOML.
    ShowConfig {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn load(path: Option<&Path>) -> CliResult<ExperimentConfig> {
    match path {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn prepare(common: &Common, name: &str) -> CliResult<(ExperimentConfig, Vec<u64>, PathBuf)> {
    let cfg = load(common.config.as_deref())?;
    let seeds = common
        .seed
        .map(|s| vec![s])
        .unwrap_or_else(|| cfg.experiment.seeds.clone());
    let out = common
        .out
        .clone()
        .or_else(|| cfg.experiment.output_dir.as_ref().map(|d| PathBuf::from(d).join(name)))
        .unwrap_or_else(|| PathBuf::from("runs").join(name));
    Ok((cfg, seeds, out))
}

fn run(cli: Cli) -> CliResult<bool> {
    let (spec, common) = match cli.command {
        Command::Validate { common } => (RunSpec::Validate, common),
        Command::OutageMap { common, grid_n } => {
            let n = match grid_n {
                Some(n) => n,
                None => load(common.config.as_deref())?.experiment.grid_n,
            };
            (RunSpec::OutageMap { grid_n: n }, common)
        }
        Command::Train { common, agent, d } => {
            let agent = match agent {
                AgentArg::Sac => AgentKind::Sac,
                AgentArg::Ddpg => AgentKind::Ddpg,
            };
            (RunSpec::Train { agent, d_pair: d }, common)
        }
        Command::Compare { common } => (RunSpec::Compare, common),
        Command::Rerun { manifest, out } => {
            let m = RunManifest::load(&manifest)?;
            let (outcome, checks) = rerun(&m, &out)?;
            outcome.report.iter().for_each(|l| println!("{l}"));
            let mut ok = true;
            for c in &checks {
                let status = if c.matches() { "identical" } else { "DIFFERS" };
                println!("{:<22} {status}", c.file);
                ok &= c.matches();
            }
            return Ok(ok && !outcome.violation);
        }
        Command::ShowConfig { config } => {
            print!("{}", load(config.as_deref())?.to_toml_string()?);
            return Ok(true);
        }
    };
    let (cfg, seeds, out) = prepare(&common, spec.name())?;
    let outcome = execute(&spec, &cfg, &seeds, &out)?;
    outcome.report.iter().for_each(|l| println!("{l}"));
    println!("wrote {} files to {}", outcome.files.len() + 1, out.display());
    Ok(!outcome.violation)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
