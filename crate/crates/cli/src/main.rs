use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gp_pto::environment::{generate_gp_map, generate_map, EnvironmentMap};
use gp_pto::harness::{summarize, sweep, write_csv_file, ExperimentConfig, Policy};
use gp_pto::{Kernel, Result};

#[derive(Parser)]
#[command(name = "gp-pto", version, about = "Budgeted informative path planning with multimodal sensing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment sweep and write per-step results as CSV.
    Run(RunArgs),
    /// Generate or display environment maps.
    Map {
        #[command(subcommand)]
        command: MapCommand,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    /// TOML config file; the flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    policy: Option<Policy>,
    #[arg(long)]
    budget: Option<f64>,
    #[arg(long = "sigma-s")]
    sigma_s: Option<f64>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Draw ground truth from the GP prior instead of the smoothed grid.
    #[arg(long = "gp-map")]
    gp_map: bool,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, default_value = "results.csv")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum MapCommand {
    Generate {
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[arg(long, default_value_t = 4)]
        beta: usize,
        #[arg(long = "p-g", default_value_t = 0.95)]
        p_g: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long = "gp-map")]
        gp_map: bool,
        #[arg(long = "length-scale", default_value_t = 1.0)]
        length_scale: f64,
        #[arg(long)]
        out: PathBuf,
    },
    Show {
        path: PathBuf,
    },
}

fn run(args: RunArgs) -> Result<()> {
    let mut cfg = match &args.config {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(p) = args.policy {
        cfg.policies = vec![p];
    }
    if let Some(b) = args.budget {
        cfg.budgets = vec![b];
    }
    if let Some(s) = args.sigma_s {
        cfg.sigma_s = vec![s];
    }
    if let Some(k) = args.runs {
        cfg.runs_per_cell = k;
        cfg.seeds = None;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
        cfg.seeds = None;
    }
    if args.gp_map {
        cfg.gp_map = true;
    }
    if args.threads.is_some() {
        cfg.threads = args.threads;
    }
    cfg.validate()?;

    let records = sweep(&cfg)?;
    write_csv_file(&records, &args.out)?;
    for s in summarize(&records) {
        println!("{s}");
    }
    println!("wrote {} episodes to {}", records.len(), args.out.display());
    Ok(())
}

fn map_command(cmd: MapCommand) -> Result<()> {
    match cmd {
        MapCommand::Generate {
            n,
            beta,
            p_g,
            seed,
            gp_map,
            length_scale,
            out,
        } => {
            let map = if gp_map {
                generate_gp_map(n, beta, &Kernel::squared_exponential(length_scale, 1.0)?, seed)?
            } else {
                generate_map(n, beta, p_g, seed)?
            };
            map.write(&out)?;
            println!("wrote {n}x{n} map to {}", out.display());
        }
        MapCommand::Show { path } => {
            let map = EnvironmentMap::read(&path)?;
            let m = map.as_matrix();
            // north up
            for iy in (0..map.size_n).rev() {
                let row: Vec<String> = (0..map.size_n).map(|ix| format!("{:6.2}", m[(iy, ix)])).collect();
                println!("{}", row.join(" "));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Run(args) => run(args),
        Command::Map { command } => map_command(command),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
