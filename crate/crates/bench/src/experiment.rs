//! Runs every (optimizer, seed) pair of a config and writes the results.
//!
//! Output files in the configured directory:
//! `traj_{optimizer}_seed{seed}.csv`, `sim_{optimizer}_seed{seed}.csv` (unless
//! similarity is off), `summary.csv` and `metadata.txt`. Nothing in them
//! depends on timing or thread scheduling.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use rfd_core::grf::GrfSampler;
use rfd_core::optimizers::{run, run_baseline, GrfOracle, LossOracle, OptimizerConfig, Trajectory, Variant};
use thiserror::Error;

use crate::config::{ExperimentConfig, LossKind, OptimizerSpec};
use crate::csv_io::{self, CsvError};
use crate::similarity::grad_similarity;
use crate::toy::ToyLinearLoss;

/// Noise streams are seeded from the landscape seed mixed with this constant.
const NOISE_SEED_MIX: u64 = 0xD1B5_4A32_D192_ED03;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error("cannot create output directory {path}")]
    OutputDir { path: PathBuf, source: std::io::Error },
    #[error("writing {path}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("writing {path}")]
    Csv { path: PathBuf, source: CsvError },
    #[error("{optimizer} on seed {seed} failed")]
    Numeric {
        optimizer: String,
        seed: u64,
        source: rfd_core::Error,
    },
    #[error("thread pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub optimizer: String,
    pub seed: u64,
    pub trajectory: Trajectory,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    /// Ordered by optimizer (config order), then seed (config order).
    pub runs: Vec<RunResult>,
    /// Every file written, sorted.
    pub files: Vec<PathBuf>,
}

impl ExperimentReport {
    pub fn runs_of<'a>(&'a self, optimizer: &'a str) -> impl Iterator<Item = &'a RunResult> + 'a {
        self.runs.iter().filter(move |r| r.optimizer == optimizer)
    }
}

fn build_oracle(cfg: &ExperimentConfig, seed: u64) -> rfd_core::Result<Box<dyn LossOracle + Send>> {
    match cfg.loss {
        LossKind::Grf => {
            let model = cfg.build_model();
            let jitter = cfg.jitter * model.cov(0.0);
            let sampler = GrfSampler::new(model, cfg.dim, seed)?
                .with_mean(cfg.mu)
                .with_jitter(jitter)?;
            Ok(Box::new(GrfOracle::new(sampler).with_noise(
                cfg.noise,
                seed ^ NOISE_SEED_MIX,
                cfg.independent_gradient,
            )))
        }
        LossKind::Toy => Ok(Box::new(ToyLinearLoss::new(
            seed,
            cfg.dim,
            cfg.toy.m,
            cfg.toy.sigma,
            cfg.toy.sigma_eps,
        )?)),
    }
}

/// Runs one optimizer on the landscape of one seed.
pub fn run_single(cfg: &ExperimentConfig, spec: &OptimizerSpec, seed: u64) -> rfd_core::Result<Trajectory> {
    let mut oracle = build_oracle(cfg, seed)?;
    let w0 = vec![cfg.start; cfg.dim];
    let variant = match *spec {
        OptimizerSpec::Baseline { kind, hyper } => {
            return run_baseline(kind, &hyper, oracle.as_mut(), &w0, cfg.steps);
        }
        OptimizerSpec::Rfd => Variant::Rfd,
        OptimizerSpec::RfmStar => Variant::RfmStar,
        OptimizerSpec::Conservative { epsilon } => Variant::Conservative { epsilon },
        OptimizerSpec::Regularized { reg_var } => Variant::Regularized { reg_var },
    };
    let mut opt = OptimizerConfig::new(cfg.build_model(), cfg.steps);
    opt.mu = cfg.mu;
    opt.noise = cfg.noise;
    opt.xi_ema = cfg.xi_ema;
    opt.variant = variant;
    run(oracle.as_mut(), &opt, &w0)
}

fn create(path: &Path) -> Result<BufWriter<File>, BenchError> {
    File::create(path).map(BufWriter::new).map_err(|source| BenchError::Write {
        path: path.to_path_buf(),
        source,
    })
}

fn csv_err(path: &Path) -> impl FnOnce(CsvError) -> BenchError + '_ {
    move |source| BenchError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

fn write_run(cfg: &ExperimentConfig, r: &RunResult) -> Result<Vec<PathBuf>, BenchError> {
    let mut files = Vec::new();
    let path = cfg.output_dir.join(format!("traj_{}_seed{}.csv", r.optimizer, r.seed));
    csv_io::write_trajectory(create(&path)?, &r.trajectory, cfg.dump_iterates).map_err(csv_err(&path))?;
    files.push(path);
    if cfg.similarity {
        let path = cfg.output_dir.join(format!("sim_{}_seed{}.csv", r.optimizer, r.seed));
        csv_io::write_similarity(create(&path)?, &grad_similarity(&r.trajectory)).map_err(csv_err(&path))?;
        files.push(path);
    }
    Ok(files)
}

fn metadata(cfg: &ExperimentConfig, runs: &[RunResult]) -> String {
    let mut out = String::from("[config]\n");
    out.push_str(&cfg.render());
    let mut seen = Vec::new();
    for r in runs {
        if seen.contains(&r.optimizer) {
            continue;
        }
        seen.push(r.optimizer.clone());
        out.push_str(&format!("\n[{}]\n", r.optimizer));
        for (k, v) in &r.trajectory.meta {
            out.push_str(&format!("{k} = {v}\n"));
        }
    }
    out
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport, BenchError> {
    std::fs::create_dir_all(&cfg.output_dir).map_err(|source| BenchError::OutputDir {
        path: cfg.output_dir.clone(),
        source,
    })?;
    let jobs: Vec<(&OptimizerSpec, u64)> = cfg
        .optimizers
        .iter()
        .flat_map(|o| cfg.seeds.iter().map(move |&s| (o, s)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build()
        .map_err(|e| BenchError::Pool(e.to_string()))?;

    let results: Vec<Result<(RunResult, Vec<PathBuf>), BenchError>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(spec, seed)| {
                let trajectory = run_single(cfg, spec, seed).map_err(|source| BenchError::Numeric {
                    optimizer: spec.name().into(),
                    seed,
                    source,
                })?;
                let r = RunResult {
                    optimizer: spec.name().into(),
                    seed,
                    trajectory,
                };
                let files = write_run(cfg, &r)?;
                Ok((r, files))
            })
            .collect()
    });

    let mut runs = Vec::with_capacity(results.len());
    let mut files = Vec::new();
    for res in results {
        let (r, f) = res?;
        runs.push(r);
        files.extend(f);
    }

    let mut summary = Vec::new();
    for spec in &cfg.optimizers {
        let trajs: Vec<&Trajectory> = runs
            .iter()
            .filter(|r| r.optimizer == spec.name())
            .map(|r| &r.trajectory)
            .collect();
        summary.extend(csv_io::summarize(spec.name(), &trajs));
    }
    let path = cfg.output_dir.join("summary.csv");
    csv_io::write_summary(create(&path)?, &summary).map_err(csv_err(&path))?;
    files.push(path);

    let path = cfg.output_dir.join("metadata.txt");
    let mut f = create(&path)?;
    f.write_all(metadata(cfg, &runs).as_bytes())
        .and_then(|_| f.flush())
        .map_err(|source| BenchError::Write {
            path: path.clone(),
            source,
        })?;
    files.push(path);
    files.sort();

    Ok(ExperimentReport { runs, files })
}
