//! Probabilistic linear regression attack against several sketches of one template.
//!
//! Each outer iteration samples a linear system from the public matrices, solves it for a
//! template (or codeword) candidate and runs the threshold determinant on it.

pub mod model;
pub mod sampler;
pub mod solver;
pub mod threshold;

use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ironmask::SketchRecord;
use crate::sphere::{RandomStream, Template};

pub use model::{expected_runtime, sampler_success_prob, RateModel, SamplerOdds};
pub use sampler::{sample_equations, EquationSampler, RowSource, SampledSystem, SolverKind};
pub use solver::{
    default_residual_bound, lsa_solve, svd_null_solve, two_sketch_reduced_solve, LocalSearch,
    ZeroGuess,
};
pub use threshold::{threshold_check, ThresholdVerdict};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    pub solver: SolverKind,
    /// Equations per sampled system.
    pub k: usize,
    /// Accept threshold of the threshold determinant, radians.
    pub theta_t: f64,
    /// Residual bound for local search; `None` uses [`default_residual_bound`].
    pub d: Option<f64>,
    /// Local-search restarts per sampled system.
    pub t_th: usize,
    pub max_outer_iterations: u64,
    pub seed: u64,
    pub stream_id: u64,
}

impl AttackConfig {
    pub fn new(solver: SolverKind, k: usize, theta_t: f64) -> Self {
        Self {
            solver,
            k,
            theta_t,
            d: None,
            t_th: 1,
            max_outer_iterations: 1_000_000,
            seed: 0,
            stream_id: 0,
        }
    }

    pub fn residual_bound(&self) -> f64 {
        self.d.unwrap_or_else(|| default_residual_bound(self.k))
    }

    pub fn validate(&self, n: usize, num_sketches: usize) -> Result<()> {
        if num_sketches < 2 {
            return Err(Error::NotEnoughSketches {
                required: 2,
                actual: num_sketches,
            });
        }
        if self.k == 0 || self.t_th == 0 {
            return Err(Error::InvalidConfig("k and t_th must be at least 1".into()));
        }
        if !(self.theta_t > 0.0 && self.theta_t <= std::f64::consts::PI) {
            return Err(Error::AngleOutOfRange(self.theta_t));
        }
        if self.solver == SolverKind::Svd && self.k + 1 < n {
            return Err(Error::InvalidConfig(format!(
                "SVD solving needs k >= n - 1 = {}, got {}",
                n - 1,
                self.k
            )));
        }
        if matches!(self.d, Some(d) if !(d > 0.0)) {
            return Err(Error::InvalidConfig("d must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    Accepted { angle: f64 },
    Rejected { angle: f64 },
    /// Local search found no codeword within `d`.
    NoSolution,
    SolverFailed { reason: String },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AttackOutcome {
    pub recovered: Option<Template>,
    pub accepted: bool,
    pub outer_iterations: u64,
    pub sampler_time: f64,
    pub solver_time_total: f64,
    pub threshold_time: f64,
    pub trace: Vec<TraceEvent>,
}

impl AttackOutcome {
    fn empty() -> Self {
        Self {
            recovered: None,
            accepted: false,
            outer_iterations: 0,
            sampler_time: 0.0,
            solver_time_total: 0.0,
            threshold_time: 0.0,
            trace: Vec::new(),
        }
    }
}

/// Per-attack state shared by all iterations.
enum Plan<'a> {
    Sampled(EquationSampler<'a>),
    /// Two sketches with the SVD solver: the reduced system on `M₂M₁ᵀ`.
    Reduced(crate::sphere::RotationMatrix),
}

fn run_loop(
    sketches: &[SketchRecord],
    config: &AttackConfig,
    rng: &mut RandomStream,
    budget: u64,
    stop: Option<&AtomicBool>,
) -> Result<AttackOutcome> {
    let n = sketches[0].n();
    config.validate(n, sketches.len())?;
    let params = *sketches[0].params();
    let (m1, m2) = (&sketches[0], &sketches[1]);
    let plan = if config.solver == SolverKind::Svd && sketches.len() == 2 {
        Plan::Reduced(m2.matrix().compose_inverse(m1.matrix()))
    } else {
        Plan::Sampled(EquationSampler::new(sketches, config.solver)?)
    };
    let d = config.residual_bound();
    let mut out = AttackOutcome::empty();

    while out.outer_iterations < budget {
        if stop.is_some_and(|s| s.load(Ordering::Relaxed)) {
            break;
        }
        out.outer_iterations += 1;

        let started = Instant::now();
        let (system, guess) = match &plan {
            Plan::Sampled(sampler) => (Some(sampler.sample(config.k, rng)?), None),
            Plan::Reduced(_) => (None, Some(ZeroGuess::random(n, config.k, rng)?)),
        };
        out.sampler_time += started.elapsed().as_secs_f64();

        let started = Instant::now();
        let candidate: std::result::Result<Option<Template>, Error> = match (&plan, system, guess) {
            (Plan::Reduced(rel), _, Some(guess)) => solver::reduced_solve(m1, rel, &guess).map(Some),
            (_, Some(system), _) if config.solver == SolverKind::Svd => {
                svd_null_solve(&system).map(Some)
            }
            (_, Some(system), _) => LocalSearch::new(&system, params).and_then(|ls| {
                ls.solve(d, config.t_th, rng)
                    .map(|c| Template::normalized(m1.matrix().apply_transpose(&c.dense())))
                    .transpose()
            }),
            _ => unreachable!("plan and sample kinds agree"),
        };
        out.solver_time_total += started.elapsed().as_secs_f64();

        let candidate = match candidate {
            Ok(Some(c)) => c,
            Ok(None) => {
                out.trace.push(TraceEvent::NoSolution);
                continue;
            }
            Err(e) => {
                out.trace.push(TraceEvent::SolverFailed {
                    reason: e.to_string(),
                });
                continue;
            }
        };

        let started = Instant::now();
        let verdict = threshold_check(&candidate, m1, m2, config.theta_t)?;
        out.threshold_time += started.elapsed().as_secs_f64();
        match verdict {
            ThresholdVerdict::Accept { template, angle } => {
                out.trace.push(TraceEvent::Accepted { angle });
                out.recovered = Some(template);
                out.accepted = true;
                if let Some(s) = stop {
                    s.store(true, Ordering::Relaxed);
                }
                break;
            }
            ThresholdVerdict::Reject { angle } => out.trace.push(TraceEvent::Rejected { angle }),
        }
    }
    Ok(out)
}

/// Runs sample → solve → threshold until acceptance or `max_outer_iterations`.
///
/// With exactly two sketches the SVD solver switches to the reduced two-sketch system.
/// `sketches[0]` and `sketches[1]` serve as `M₁` and `M₂`.
pub fn run_attack(sketches: &[SketchRecord], config: &AttackConfig) -> Result<AttackOutcome> {
    if sketches.len() < 2 {
        return Err(Error::NotEnoughSketches {
            required: 2,
            actual: sketches.len(),
        });
    }
    let mut rng = RandomStream::new(config.seed, config.stream_id);
    run_loop(sketches, config, &mut rng, config.max_outer_iterations, None)
}

/// Stream id of worker `i`, disjoint from the single-threaded stream.
pub fn worker_stream_id(base: u64, worker: usize) -> u64 {
    base ^ ((worker as u64 + 1) << 32)
}

/// [`run_attack`] split over `workers` threads with independent streams. The first
/// acceptance stops the others. The budget is divided evenly.
pub fn run_attack_parallel(
    sketches: &[SketchRecord],
    config: &AttackConfig,
    workers: usize,
) -> Result<AttackOutcome> {
    if workers <= 1 {
        return run_attack(sketches, config);
    }
    if sketches.len() < 2 {
        return Err(Error::NotEnoughSketches {
            required: 2,
            actual: sketches.len(),
        });
    }
    let stop = AtomicBool::new(false);
    let per = config.max_outer_iterations.div_ceil(workers as u64);
    let results: Vec<Result<AttackOutcome>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|i| {
                let stop = &stop;
                scope.spawn(move || {
                    let mut rng =
                        RandomStream::new(config.seed, worker_stream_id(config.stream_id, i));
                    run_loop(sketches, config, &mut rng, per, Some(stop))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("attack worker panicked"))
            .collect()
    });
    let mut merged = AttackOutcome::empty();
    for r in results {
        let r = r?;
        merged.outer_iterations += r.outer_iterations;
        merged.sampler_time += r.sampler_time;
        merged.solver_time_total += r.solver_time_total;
        merged.threshold_time += r.threshold_time;
        merged.trace.extend(r.trace);
        if r.accepted && !merged.accepted {
            merged.accepted = true;
            merged.recovered = r.recovered;
        }
    }
    Ok(merged)
}
