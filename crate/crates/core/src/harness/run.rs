//! Drives a configured experiment through the engine and samples metrics.

use std::time::Instant;

use crate::engine::{run_round, InnerSpec, OuterOptState, ParticipationSpec, RoundReport};
use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, ProblemKind};
use crate::harness::metrics::MetricsRecord;
use crate::problems::{gen_gaussian_regression, gen_syntoken, NoiseMode, Optimum, RegressionProblem};
use crate::stream::Streams;
use crate::vectorops::Vector;

/// Generates, contaminates and shards the configured problem.
pub fn build_problem(cfg: &ExperimentConfig) -> Result<RegressionProblem<f64>> {
    let p = &cfg.problem;
    let streams = Streams::new(p.seed.unwrap_or(cfg.seed));
    let base = match p.kind {
        ProblemKind::Gaussian => gen_gaussian_regression(p.rows, p.dims, &mut streams.features())?,
        ProblemKind::SynToken => gen_syntoken(p.rows, p.dims, p.common_fraction, &mut streams.features())?,
    };
    let noisy = match p.noise_mode {
        NoiseMode::LabelContamination => base.contaminate_labels(&p.noise, &mut streams.contamination()),
        NoiseMode::AdditiveGradient => base.with_gradient_noise(p.noise),
    };
    noisy.shard_iid(cfg.nodes, &mut streams.sharding())
}

/// An experiment in progress: one call to [`Simulation::step`] per round.
pub struct Simulation {
    problem: RegressionProblem<f64>,
    optimum: Optimum<f64>,
    inner: InnerSpec<f64>,
    participation: ParticipationSpec,
    state: OuterOptState<f64>,
    streams: Streams,
    running_min: f64,
}

impl Simulation {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.inner.validate(cfg.rounds)?;
        cfg.outer.validate(cfg.rounds)?;
        cfg.participation.validate()?;
        let problem = build_problem(cfg)?;
        let optimum = problem.exact_optimum();
        let x0 = Vector::zeros(problem.dims());
        Ok(Self {
            state: OuterOptState::new(cfg.outer.clone(), x0),
            problem,
            optimum,
            inner: cfg.inner.clone(),
            participation: cfg.participation,
            streams: Streams::new(cfg.seed),
            running_min: f64::INFINITY,
        })
    }

    pub fn problem(&self) -> &RegressionProblem<f64> {
        &self.problem
    }

    pub fn optimum(&self) -> &Optimum<f64> {
        &self.optimum
    }

    pub fn state(&self) -> &OuterOptState<f64> {
        &self.state
    }

    /// Runs the next round and returns its report with the metrics of the new
    /// iterate (`wall_ms` left at zero).
    pub fn step(&mut self) -> Result<(RoundReport<f64>, MetricsRecord)> {
        let report = run_round(
            &self.problem,
            &self.inner,
            &mut self.state,
            &self.participation,
            &self.streams,
        )?;
        let x = self.state.x();
        let grad_norm_sq = self.problem.full_gradient(x)?.iter().map(|g| g * g).sum::<f64>();
        // f64::min skips NaN, so a diverged round cannot poison the minimum.
        self.running_min = self.running_min.min(grad_norm_sq);
        let record = MetricsRecord {
            round: report.round,
            objective_gap: self.problem.objective_gap(x, &self.optimum)?,
            dist_to_truth: x.sub(self.problem.w_star())?.l2_norm(),
            grad_norm_sq,
            running_min_grad_sq: self.running_min,
            delta_inf_norm: report.delta_inf_norm,
            diverged: report.diverged,
            wall_ms: 0,
        };
        Ok((report, record))
    }
}

/// Runs the experiment on the global rayon pool.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<MetricsRecord>> {
    let started = Instant::now();
    let mut sim = Simulation::new(cfg)?;
    let mut records = Vec::new();
    for t in 1..=cfg.rounds {
        let (_, mut record) = sim.step()?;
        if t % cfg.metrics_every == 0 || t == cfg.rounds || record.diverged {
            if cfg.output.wall_clock {
                record.wall_ms = started.elapsed().as_millis() as u64;
            }
            records.push(record);
        }
        if record.diverged {
            break;
        }
    }
    Ok(records)
}

/// Runs the experiment on a dedicated pool of `threads` workers.
pub fn run_experiment_with_threads(cfg: &ExperimentConfig, threads: usize) -> Result<Vec<MetricsRecord>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::contract(format!("cannot start {threads} worker threads: {e}")))?;
    pool.install(|| run_experiment(cfg))
}
