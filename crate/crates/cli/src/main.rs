use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{info, warn};

use vrbip_core::capacity::{capacity_row, write_capacity_csv};
use vrbip_core::config::CapacitySpec;
use vrbip_core::matrix_io;
use vrbip_core::sim::{self, output::RUN_FILES};
use vrbip_core::{Error, ScenarioConfig};

#[derive(Parser, Debug)]
#[command(name = "vrbip", version, about = "Federated ESN prediction and BIP-aware association for wireless VR")]
struct Cli {
    /// Override the seed from the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory (created if missing).
    #[arg(long, short, global = true)]
    out: Option<PathBuf>,

    /// More log output; repeat for debug.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one scenario and write the run directory.
    Run {
        config: PathBuf,
        /// Also dump per-link rates of this slot to links.csv.
        #[arg(long)]
        links_slot: Option<usize>,
    },
    /// Empirical vs closed-form memory capacity over a grid.
    Capacity { spec: PathBuf },
    /// Traces, sharded collection and consensus training only; writes
    /// residuals and one readout per user and stage.
    Train { config: PathBuf },
    /// Run a scenario per value of one config key over several seeds.
    Sweep {
        param: String,
        /// Comma-separated values.
        values: String,
        config: PathBuf,
        #[arg(long, default_value_t = 20)]
        seeds: usize,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::Config { .. } | Error::InvalidSpec(_) => 2,
        Error::Io { .. } | Error::Csv(_) | Error::Blob(_) => 4,
        _ => 3,
    }
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<ScenarioConfig, Error> {
    let mut cfg = ScenarioConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn out_dir(cli_out: &Option<PathBuf>, default: String) -> PathBuf {
    cli_out.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn stem(p: &Path) -> String {
    p.file_stem().map_or("run".into(), |s| s.to_string_lossy().into_owned())
}

fn run(cli: &Cli) -> Result<(), Error> {
    match &cli.command {
        Command::Run { config, links_slot } => {
            let cfg = load_config(config, cli.seed)?;
            let dir = out_dir(&cli.out, format!("runs/{}-seed{}", stem(config), cfg.seed));
            let out = sim::run_scenario(&cfg)?;
            sim::write_run(&dir, &out)?;
            if let Some(slot) = links_slot {
                sim::write_link_dump(&dir, &out, *slot)?;
            }
            for a in &out.arms {
                let nrmse = a.nrmse.map_or(String::new(), |v| format!(", NRMSE {v:.4}"));
                println!("{:<12} total BIP {:8.3}, ω rate {:.3}{nrmse}", a.arm.to_string(), a.total_bip(), a.mean_omega());
            }
            info!("wrote {} to {}", RUN_FILES.join(", "), dir.display());
        }
        Command::Capacity { spec } => {
            let spec = CapacitySpec::load(spec)?;
            let mut est = spec.estimator;
            if let Some(s) = cli.seed {
                est.seed = s;
            }
            let dir = out_dir(&cli.out, "runs/capacity".into());
            std::fs::create_dir_all(&dir).map_err(|e| Error::Io {
                path: dir.clone(),
                source: e,
            })?;
            let mut rows = Vec::new();
            for q in spec.queries() {
                let row = capacity_row(&q, &est)?;
                println!(
                    "{:<12} N={:<3} w={:<5} L={} closed {:9.4} empirical {:9.4} rel {:6.2}%",
                    row.topology,
                    row.n_neurons,
                    row.ring_weight,
                    row.layers,
                    row.closed,
                    row.empirical,
                    100.0 * row.rel_err()
                );
                rows.push(row);
            }
            write_capacity_csv(&dir.join("capacity.csv"), &rows)?;
        }
        Command::Train { config } => {
            let cfg = load_config(config, cli.seed)?;
            let dir = out_dir(&cli.out, format!("runs/{}-seed{}-train", stem(config), cfg.seed));
            let trained = sim::train_scenario(&cfg)?;
            sim::output::write_training(&dir, &trained)?;
            let weights = dir.join("weights");
            std::fs::create_dir_all(&weights).map_err(|e| Error::Io {
                path: weights.clone(),
                source: e,
            })?;
            for (i, m) in trained.models.iter().enumerate() {
                for (l, w) in m.readouts.iter().enumerate() {
                    matrix_io::write_blob(&weights.join(format!("user{i}_stage{l}.esnw")), w)?;
                    matrix_io::write_csv(&weights.join(format!("user{i}_stage{l}.csv")), w)?;
                }
            }
            let open: Vec<_> = trained.reports().filter(|r| !r.converged).collect();
            println!("trained {} users; {} consensus fits short of tolerance", trained.models.len(), open.len());
            if let Some(worst) = open
                .iter()
                .filter_map(|r| r.trace.last().map(|x| (r.user, x)))
                .max_by(|a, b| a.1.max_primal.total_cmp(&b.1.max_primal))
            {
                let (user, res) = worst;
                return Err(Error::NotConverged {
                    rounds: res.round,
                    primal: res.max_primal,
                    dual: res.dual,
                })
                .inspect_err(|_| warn!("worst fit: user {user}; weights written anyway"));
            }
        }
        Command::Sweep {
            param,
            values,
            config,
            seeds,
        } => {
            let cfg = load_config(config, cli.seed)?;
            let values: Vec<String> = values.split(',').map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
            let dir = out_dir(&cli.out, format!("runs/sweep-{param}"));
            std::fs::create_dir_all(&dir).map_err(|e| Error::Io {
                path: dir.clone(),
                source: e,
            })?;
            let points = sim::run_sweep(&cfg, param, &values, *seeds)?;
            let rows = sim::summarize_sweep(param, &points);
            sim::write_sweep_csv(&dir.join("sweep.csv"), &rows)?;
            for r in &rows {
                println!("{param}={:<6} {:<12} mean {:8.3} std {:6.3}", r.value, r.arm.to_string(), r.mean_bip, r.std_bip);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
