use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cv2x_mode4::runner::{expand_sweep, run_sweep, SweepPlan};
use cv2x_mode4::{run_to_dir, ScenarioConfig, SchedulerVariant, SimError};

#[derive(Parser)]
#[command(name = "cv2x-sim", version, about = "C-V2X Mode 4 sidelink simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Override the scenario's master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Directory for result files.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,

    /// Parallel runs for `sweep` (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,

    /// Also write every decode verdict to receptions.csv.
    #[arg(long, global = true)]
    debug_receptions: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file.
    Run { scenario: PathBuf },
    /// Run the cartesian product of densities, schedulers and seeds.
    Sweep {
        scenario: PathBuf,
        #[arg(long, value_delimiter = ',')]
        densities: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        variants: Vec<String>,
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
    },
    /// Check a scenario file and exit.
    Validate { scenario: PathBuf },
}

fn load(cli: &Cli, path: &Path) -> Result<ScenarioConfig, SimError> {
    let mut cfg = ScenarioConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.master_seed = seed;
    }
    if cli.debug_receptions {
        cfg.output.debug_receptions = true;
    }
    if let Some(dir) = &cli.out_dir {
        cfg.output.dir = Some(dir.clone());
    }
    Ok(cfg)
}

fn out_dir(cfg: &ScenarioConfig) -> PathBuf {
    cfg.output.dir.clone().unwrap_or_else(|| PathBuf::from("results"))
}

fn execute(cli: &Cli) -> Result<(), SimError> {
    match &cli.command {
        Command::Validate { scenario } => {
            load(cli, scenario)?;
            println!("{}: ok", scenario.display());
        }
        Command::Run { scenario } => {
            let cfg = load(cli, scenario)?;
            let dir = out_dir(&cfg);
            let result = run_to_dir(&cfg, &dir)?;
            println!(
                "{} vehicles, {} subframes, mean PSSCH CBR {:.3}; results in {}",
                result.summary.vehicles,
                result.summary.subframes,
                result.summary.mean_pssch_cbr,
                dir.display()
            );
        }
        Command::Sweep { scenario, densities, variants, seeds } => {
            let cfg = load(cli, scenario)?;
            let variants = variants
                .iter()
                .map(|v| v.parse::<SchedulerVariant>())
                .collect::<Result<Vec<_>, _>>()?;
            let plan = SweepPlan { densities: densities.clone(), variants, seeds: seeds.clone() };
            let jobs = expand_sweep(&cfg, &plan, &out_dir(&cfg));
            run_sweep(&jobs, cli.workers)?;
            println!("{} runs written under {}", jobs.len(), out_dir(&cfg).display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
