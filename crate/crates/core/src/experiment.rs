//! Simulated estimation experiments and their Monte Carlo averages.
//!
//! A run draws a true state, then measures `N` copies one at a time: sample
//! an outcome from the true state, update the posterior, read out an estimate
//! and its fidelity, and ask the strategy for the next axis. A Monte Carlo
//! batch repeats this for independent true states with one random
//! measurement path each.

use std::f64::consts::TAU;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;

use crate::baseline::BaselineTable;
use crate::bloch::{fidelity, sample_outcome, BlochPoint, Direction, Outcome};
use crate::error::{Error, Result};
use crate::posterior::{Estimate, GridGeometry, PosteriorGrid, ReadoutMode, Resolution};
use crate::rng::{state_stream, PathRng};
use crate::strategies::{DirectionSelector, StrategyKind, StrategySpec};

/// Parameters of one simulated experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Number of identically prepared qubits measured per run.
    pub n_systems: usize,
    pub strategy: StrategySpec,
    /// Radial prior exponent, used both to draw true states and as the prior.
    pub alpha: f64,
    pub readout: ReadoutMode,
    pub resolution: Resolution,
    pub seed: u64,
    /// Keep `F_1..F_N`; otherwise only `F_N` is computed.
    pub record_trajectory: bool,
}

impl RunConfig {
    pub fn new(kind: StrategyKind, n_systems: usize) -> Self {
        Self {
            n_systems,
            strategy: StrategySpec::new(kind),
            alpha: 2.0,
            readout: ReadoutMode::BlochVector,
            resolution: Resolution::default(),
            seed: 0,
            record_trajectory: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_systems == 0 {
            return Err(Error::InvalidConfig("N must be at least 1".into()));
        }
        if !self.alpha.is_finite() || self.alpha < 0.0 {
            return Err(Error::InvalidAlpha(self.alpha));
        }
        let r = self.resolution;
        Resolution::new(r.n_r, r.n_theta, r.n_phi)?;
        self.strategy.validate()
    }

    /// Measurement counts at which fidelities are reported.
    pub fn steps(&self) -> Vec<usize> {
        if self.record_trajectory {
            (1..=self.n_systems).collect()
        } else {
            vec![self.n_systems]
        }
    }
}

/// Initial direction plus the directions and outcomes actually realized.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementPath {
    pub initial_direction: Direction,
    pub directions: Vec<Direction>,
    pub outcomes: Vec<Outcome>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub true_state: BlochPoint,
    pub path: MeasurementPath,
    /// Fidelity after each reported step (see [`RunConfig::steps`]).
    pub fidelities: Vec<f64>,
    /// Readout after the last measurement.
    pub estimate: Estimate,
}

/// Cross-run statistics per reported step.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub alpha: f64,
    /// Runs that completed and enter the averages.
    pub n_runs: usize,
    /// Runs excluded after a degenerate update.
    pub aborted: usize,
    pub steps: Vec<usize>,
    pub mean_fidelity: Vec<f64>,
    /// Standard error of each mean.
    pub stderr: Vec<f64>,
    /// `1 - mean_fidelity`.
    pub error: Vec<f64>,
}

impl Aggregate {
    pub fn from_runs(alpha: f64, steps: Vec<usize>, runs: &[RunResult], aborted: usize) -> Self {
        let n = runs.len();
        let mut mean_fidelity = Vec::with_capacity(steps.len());
        let mut stderr = Vec::with_capacity(steps.len());
        for k in 0..steps.len() {
            let mean = runs.iter().map(|r| r.fidelities[k]).sum::<f64>() / n as f64;
            let se = if n > 1 {
                let ss: f64 = runs.iter().map(|r| (r.fidelities[k] - mean).powi(2)).sum();
                (ss / (n - 1) as f64).sqrt() / (n as f64).sqrt()
            } else {
                0.0
            };
            mean_fidelity.push(mean);
            stderr.push(se);
        }
        let error = mean_fidelity.iter().map(|f| 1.0 - f).collect();
        Self {
            alpha,
            n_runs: n,
            aborted,
            steps,
            mean_fidelity,
            stderr,
            error,
        }
    }

    /// Position of step `n` in the per-step vectors.
    pub fn position(&self, n: usize) -> Option<usize> {
        self.steps.iter().position(|&s| s == n)
    }

    /// Fraction of requested runs that were aborted.
    pub fn aborted_fraction(&self) -> f64 {
        let total = self.n_runs + self.aborted;
        if total == 0 {
            0.0
        } else {
            self.aborted as f64 / total as f64
        }
    }
}

/// Draws a true state with density proportional to `r^alpha sin(theta)`.
pub fn sample_true_state<R: Rng + ?Sized>(rng: &mut R, alpha: f64) -> Result<BlochPoint> {
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(Error::InvalidAlpha(alpha));
    }
    // u in (0, 1]
    let u = 1.0 - rng.gen::<f64>();
    let r = u.powf(1.0 / (alpha + 1.0)).min(1.0);
    let cos_theta = (1.0 - 2.0 * rng.gen::<f64>()).clamp(-1.0, 1.0);
    let mut phi = TAU * rng.gen::<f64>();
    if phi >= TAU {
        phi = 0.0;
    }
    BlochPoint::new(r, cos_theta.acos(), phi)
}

/// A configured experiment with its grid geometry, prior and direction
/// selector built once and shared by every run.
#[derive(Debug)]
pub struct Experiment {
    cfg: RunConfig,
    prior: PosteriorGrid,
    selector: DirectionSelector,
}

impl Experiment {
    pub fn new(cfg: RunConfig) -> Result<Self> {
        Self::with_geometry(cfg.clone(), GridGeometry::new(cfg.resolution))
    }

    /// Reuses an existing geometry; its resolution overrides `cfg.resolution`.
    pub fn with_geometry(mut cfg: RunConfig, geometry: Arc<GridGeometry>) -> Result<Self> {
        cfg.resolution = geometry.resolution();
        cfg.validate()?;
        let prior = PosteriorGrid::prior(geometry.clone(), cfg.alpha)?;
        let selector = DirectionSelector::new(&cfg.strategy, &geometry)?;
        Ok(Self {
            cfg,
            prior,
            selector,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    /// Measures `n_systems` copies of `true_state` adaptively.
    pub fn run_single(&self, true_state: &BlochPoint, rng: &mut PathRng) -> Result<RunResult> {
        let n_total = self.cfg.n_systems;
        let mut grid = self.prior.clone();
        let mut directions = Vec::with_capacity(n_total);
        let mut outcomes = Vec::with_capacity(n_total);
        let mut fidelities = Vec::with_capacity(if self.cfg.record_trajectory {
            n_total
        } else {
            1
        });

        let initial_direction = self.selector.first_direction(&mut rng.choices);
        let mut dir = initial_direction;
        let mut estimate = None;
        for n in 1..=n_total {
            let out = sample_outcome(&mut rng.outcomes, true_state, &dir);
            grid.bayes_update(&dir, out)?;
            directions.push(dir);
            outcomes.push(out);
            if self.cfg.record_trajectory || n == n_total {
                let est = grid.estimated_state(self.cfg.readout);
                fidelities.push(fidelity(true_state, &est.point));
                estimate = Some(est);
            }
            if n < n_total {
                dir = self
                    .selector
                    .next_direction(&grid, &mut rng.choices, n + 1)?;
            }
        }
        Ok(RunResult {
            true_state: *true_state,
            path: MeasurementPath {
                initial_direction,
                directions,
                outcomes,
            },
            fidelities,
            estimate: estimate.expect("at least one measurement"),
        })
    }

    /// Run `index` of the Monte Carlo batch: true state and path from the
    /// run's own substreams.
    pub fn run_indexed(&self, index: u64) -> Result<RunResult> {
        let state = sample_true_state(&mut state_stream(self.cfg.seed, index), self.cfg.alpha)?;
        self.run_single(&state, &mut PathRng::for_run(self.cfg.seed, index))
    }

    /// Runs `0..n_runs` on the current rayon pool, in index order.
    pub fn runs(&self, n_runs: usize) -> Vec<Result<RunResult>> {
        (0..n_runs as u64)
            .into_par_iter()
            .map(|i| self.run_indexed(i))
            .collect()
    }

    pub fn monte_carlo(&self, n_runs: usize) -> Result<Aggregate> {
        if n_runs == 0 {
            return Err(Error::InvalidConfig("at least one run is required".into()));
        }
        aggregate(self.cfg.alpha, self.cfg.steps(), self.runs(n_runs))
    }
}

/// Averages completed runs; aborted runs are counted and skipped. Fails only
/// if every run aborted.
pub fn aggregate(
    alpha: f64,
    steps: Vec<usize>,
    results: Vec<Result<RunResult>>,
) -> Result<Aggregate> {
    let mut completed = Vec::with_capacity(results.len());
    let mut first_error = None;
    let mut aborted = 0;
    for r in results {
        match r {
            Ok(run) => completed.push(run),
            Err(e) => {
                aborted += 1;
                first_error.get_or_insert(e);
            }
        }
    }
    if completed.is_empty() {
        return Err(first_error.unwrap_or_else(|| Error::InvalidConfig("no runs".into())));
    }
    Ok(Aggregate::from_runs(alpha, steps, &completed, aborted))
}

pub fn run_single(
    cfg: &RunConfig,
    true_state: &BlochPoint,
    rng: &mut PathRng,
) -> Result<RunResult> {
    Experiment::new(cfg.clone())?.run_single(true_state, rng)
}

pub fn monte_carlo(cfg: &RunConfig, n_runs: usize) -> Result<Aggregate> {
    Experiment::new(cfg.clone())?.monte_carlo(n_runs)
}

/// A per-step ratio; `None` where it is undefined or unavailable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRatio {
    pub n: usize,
    pub value: Option<f64>,
}

/// `gamma_n = f_n / f_n^rand`.
pub fn gamma_ratio(scheme: &Aggregate, random_baseline: &Aggregate) -> Result<Vec<StepRatio>> {
    if scheme.steps != random_baseline.steps {
        return Err(Error::Mismatch("step sets differ".into()));
    }
    if scheme.alpha != random_baseline.alpha {
        return Err(Error::Mismatch(format!(
            "alpha {} vs {}",
            scheme.alpha, random_baseline.alpha
        )));
    }
    Ok(scheme
        .steps
        .iter()
        .zip(scheme.error.iter().zip(&random_baseline.error))
        .map(|(&n, (&f, &f_rand))| StepRatio {
            n,
            value: (f_rand != 0.0).then(|| f / f_rand),
        })
        .collect())
}

/// Comparison against an optimal-scheme baseline at one `N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselineRatio {
    pub n: usize,
    /// `<F_N> / F_N^opt`.
    pub fidelity_ratio: Option<f64>,
    /// `f_N^opt / f_N`.
    pub error_ratio: Option<f64>,
}

pub fn ratio_to_baseline(
    scheme: &Aggregate,
    baseline: &BaselineTable,
) -> Result<Vec<BaselineRatio>> {
    if !baseline.has_alpha(scheme.alpha) {
        return Err(Error::AlphaMismatch(scheme.alpha));
    }
    let ratios: Vec<BaselineRatio> = scheme
        .steps
        .iter()
        .enumerate()
        .map(|(k, &n)| match baseline.optimal_fidelity(n, scheme.alpha) {
            Some(f_opt) => BaselineRatio {
                n,
                fidelity_ratio: Some(scheme.mean_fidelity[k] / f_opt),
                error_ratio: (scheme.error[k] != 0.0).then(|| (1.0 - f_opt) / scheme.error[k]),
            },
            None => BaselineRatio {
                n,
                fidelity_ratio: None,
                error_ratio: None,
            },
        })
        .collect();
    if ratios.iter().all(|r| r.fidelity_ratio.is_none()) {
        return Err(Error::MissingBaseline);
    }
    Ok(ratios)
}
