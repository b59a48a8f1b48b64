//! Running scenarios and writing their result bundles.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::config::ScenarioConfig;
use crate::engine::{RunResult, Simulation};
use crate::error::{Result, SimError};
use crate::metrics::output::{
    write_cbr, write_grants, write_json, write_occupancy, write_pdr, write_receptions, CBR_FILE, GRANTS_FILE,
    MANIFEST_FILE, OCCUPANCY_FILE, PDR_FILE, RECEPTIONS_FILE, SUMMARY_FILE,
};
use crate::sched::SchedulerVariant;

#[derive(Serialize)]
struct Manifest<'a> {
    simulator: &'static str,
    version: &'static str,
    master_seed: u64,
    config: &'a ScenarioConfig,
}

/// Runs one scenario to completion in memory.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunResult> {
    let sim = Simulation::new(cfg.clone())?;
    Ok(sim.run())
}

/// File name of the per-class PDR table.
pub fn class_pdr_file(class: &str) -> String {
    format!("pdr_by_distance.{class}.csv")
}

/// Writes every result file of a run into `dir`, creating it if needed.
pub fn write_outputs(result: &RunResult, cfg: &ScenarioConfig, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| SimError::io(dir, e))?;
    write_pdr(&dir.join(PDR_FILE), &result.pdr)?;
    if result.pdr_by_class.len() > 1 {
        for (name, bins) in &result.pdr_by_class {
            write_pdr(&dir.join(class_pdr_file(name)), bins)?;
        }
    }
    write_cbr(&dir.join(CBR_FILE), &result.cbr)?;
    write_grants(&dir.join(GRANTS_FILE), &result.grants)?;
    write_occupancy(&dir.join(OCCUPANCY_FILE), &result.occupancy)?;
    if cfg.output.debug_receptions {
        write_receptions(&dir.join(RECEPTIONS_FILE), &result.receptions)?;
    }
    let manifest = Manifest {
        simulator: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        master_seed: cfg.master_seed,
        config: cfg,
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    write_json(&dir.join(SUMMARY_FILE), &result.summary)
}

/// Runs a scenario and writes its bundle.
pub fn run_to_dir(cfg: &ScenarioConfig, dir: &Path) -> Result<RunResult> {
    let result = run_scenario(cfg)?;
    write_outputs(&result, cfg, dir)?;
    Ok(result)
}

/// Cartesian product of densities, scheduler variants and seeds applied to
/// a base scenario. Empty lists keep the base value.
#[derive(Debug, Clone, Default)]
pub struct SweepPlan {
    pub densities: Vec<f64>,
    pub variants: Vec<SchedulerVariant>,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone)]
pub struct SweepJob {
    pub config: ScenarioConfig,
    pub dir: PathBuf,
}

/// Expands a sweep into jobs, each with its own output directory.
pub fn expand_sweep(base: &ScenarioConfig, plan: &SweepPlan, out_dir: &Path) -> Vec<SweepJob> {
    let densities = if plan.densities.is_empty() { vec![base.density] } else { plan.densities.clone() };
    let variants: Vec<Option<SchedulerVariant>> =
        if plan.variants.is_empty() { vec![None] } else { plan.variants.iter().copied().map(Some).collect() };
    let seeds = if plan.seeds.is_empty() { vec![base.master_seed] } else { plan.seeds.clone() };
    let mut jobs = Vec::new();
    for &density in &densities {
        for variant in &variants {
            for &seed in &seeds {
                let mut cfg = base.clone();
                cfg.density = density;
                cfg.master_seed = seed;
                let tag = match variant {
                    Some(v) => {
                        for class in &mut cfg.traffic {
                            class.scheduler = *v;
                        }
                        v.to_string()
                    }
                    None => "base".to_string(),
                };
                let dir = out_dir.join(format!("d{density}_{tag}_s{seed}"));
                cfg.output.dir = Some(dir.clone());
                jobs.push(SweepJob { config: cfg, dir });
            }
        }
    }
    jobs
}

/// Runs jobs in parallel on `workers` threads (0 means one per core).
/// Every job writes its own bundle; the first failure is returned after
/// all jobs have finished.
pub fn run_sweep(jobs: &[SweepJob], workers: usize) -> Result<()> {
    for job in jobs {
        job.config.validate()?;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| SimError::io("thread pool", std::io::Error::other(e)))?;
    let results: Vec<Result<()>> = pool.install(|| {
        jobs.par_iter()
            .map(|job| {
                log::info!("sweep: {}", job.dir.display());
                run_to_dir(&job.config, &job.dir).map(|_| ())
            })
            .collect()
    });
    results.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::TrafficClass;
    use crate::traffic::TrafficModel;

    fn tiny() -> ScenarioConfig {
        ScenarioConfig {
            density: 0.001,
            duration_s: 1.0,
            warmup_s: 0.2,
            traffic: vec![TrafficClass::new("periodic", TrafficModel::periodic(), SchedulerVariant::Sbsps, 1.0)],
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn smoke_two_vehicles_writes_all_files() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = tiny();
        let res = run_to_dir(&cfg, dir.path()).unwrap();
        assert_eq!(res.summary.vehicles, 2);
        for f in [PDR_FILE, CBR_FILE, GRANTS_FILE, OCCUPANCY_FILE, MANIFEST_FILE, SUMMARY_FILE] {
            assert!(dir.path().join(f).is_file(), "{f}");
        }
        assert!(res.pdr.bins.iter().map(|b| b.attempted).sum::<u64>() > 0);
    }

    #[test]
    fn sweep_expands_cartesian_product() {
        let plan = SweepPlan {
            densities: vec![0.06, 0.12],
            variants: vec![SchedulerVariant::Sbsps, SchedulerVariant::Random],
            seeds: vec![1, 2, 3],
        };
        let jobs = expand_sweep(&tiny(), &plan, Path::new("/tmp/x"));
        assert_eq!(jobs.len(), 12);
        assert!(jobs.iter().any(|j| j.dir.ends_with("d0.12_random_s3")));
    }

    #[test]
    fn unwritable_output_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, "x").unwrap();
        let err = run_to_dir(&tiny(), &blocker.join("sub")).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
