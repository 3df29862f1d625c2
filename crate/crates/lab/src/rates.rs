//! Estimates of `r_k`, `t_k`, `p_k` and `p_f` on planted-correct systems.

use std::time::Instant;

use ironmask_core::plra::sampler::source_row_counts;
use ironmask_core::plra::{
    default_residual_bound, expected_runtime, sampler_success_prob, svd_null_solve, threshold_check,
    LocalSearch, RateModel, SamplerOdds, SolverKind, ThresholdVerdict,
};
use ironmask_core::sphere::angle;
use ironmask_core::{CodeParams, Error, RandomStream, Result, Template};
use rand::Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::parallel::{par_map, trial_stream};
use crate::planted::PlantedInstance;
use crate::stats::{mean_estimate, wilson, MeanEstimate, Proportion};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatesConfig {
    pub params: CodeParams,
    pub num_sketches: usize,
    pub solver: SolverKind,
    pub k: usize,
    pub theta_t: f64,
    /// Pairwise noise between readings, radians.
    pub theta_prime: f64,
    /// Planted instances.
    pub systems: usize,
    /// Local-search restarts per instance. SVD always solves once.
    pub restarts_per_system: usize,
    /// Extra solves timed when the main loop has fewer.
    pub timing_solves: usize,
    /// Trials of the per-row sampler simulation; 0 skips it.
    pub bernoulli_trials: u64,
    /// Residual bound; `None` uses `10⁻⁶·√k` without noise and the calibrated percentile
    /// with noise.
    pub d: Option<f64>,
    /// Instances used to calibrate `d` under noise.
    pub calibration_systems: usize,
    pub seed: u64,
    pub workers: usize,
}

impl RatesConfig {
    pub fn new(params: CodeParams, num_sketches: usize, solver: SolverKind, k: usize, theta_t: f64) -> Self {
        Self {
            params,
            num_sketches,
            solver,
            k,
            theta_t,
            theta_prime: 0.0,
            systems: 100,
            restarts_per_system: 1,
            timing_solves: 0,
            bernoulli_trials: 0,
            d: None,
            calibration_systems: 50,
            seed: 0,
            workers: 1,
        }
    }

    pub fn t_prime(&self) -> usize {
        match self.solver {
            SolverKind::Svd => self.num_sketches,
            SolverKind::Lsa => self.num_sketches - 1,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.num_sketches < 2 {
            return Err(Error::NotEnoughSketches {
                required: 2,
                actual: self.num_sketches,
            });
        }
        if self.systems == 0 || self.restarts_per_system == 0 {
            return Err(Error::InvalidConfig("systems and restarts must be positive".into()));
        }
        if self.solver == SolverKind::Svd && self.num_sketches == 2 {
            return Err(Error::InvalidConfig(
                "planted rates with two sketches and SVD are not supported; use three or more".into(),
            ));
        }
        Ok(())
    }
}

/// One planted solve (SVD) or restart (local search).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub system: usize,
    pub accepted: bool,
    /// Accepted and within `θ_t` of `±w`.
    pub correct: bool,
    /// Threshold angle in degrees, when a candidate reached the threshold.
    pub threshold_angle_deg: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RateEstimate {
    pub odds: SamplerOdds,
    /// `log₂` of the simulated sampler success rate, with its trial and hit counts.
    pub simulated_log2_p: Option<f64>,
    pub bernoulli_hits: u64,
    pub bernoulli_trials: u64,
    pub t_k: MeanEstimate,
    pub p_k: Proportion,
    /// Correct among accepted.
    pub p_f: Proportion,
    /// Accepted and correct among all trials, the product `p_k·p_f`.
    pub p_joint: Proportion,
    pub d: Option<f64>,
    pub model: RateModel,
    pub t_all: f64,
    pub records: Vec<TrialRecord>,
}

/// Smaller of the angles to `w` and `−w`.
pub fn unsigned_angle(v: &[f64], w: &[f64]) -> f64 {
    let a = angle(v, w).unwrap_or(std::f64::consts::PI);
    a.min(std::f64::consts::PI - a)
}

/// Simulates the sampler's success event row by row: `trials` draws, each succeeding when no
/// sampled row hits the support.
pub fn simulate_sampler(n: usize, alpha: usize, k: usize, t_prime: usize, trials: u64, rng: &mut RandomStream) -> u64 {
    let counts = source_row_counts(k, t_prime);
    let q = alpha as f64 / n as f64;
    if counts.iter().all(|&l| l <= 1) && alpha > 0 {
        // every row is an independent Bernoulli, so skip to the first hit
        let geo = Geometric::new(q).expect("valid probability");
        return (0..trials).filter(|_| geo.sample(rng) >= k as u64).count() as u64;
    }
    let mut hits = 0;
    'trial: for _ in 0..trials {
        for &l in &counts {
            for j in 0..l {
                let p_ok = (n - alpha - j) as f64 / (n - j) as f64;
                if !rng.gen_bool(p_ok.clamp(0.0, 1.0)) {
                    continue 'trial;
                }
            }
        }
        hits += 1;
    }
    hits
}

struct SystemResult {
    records: Vec<TrialRecord>,
    solve_time: f64,
}

fn svd_trial(inst: &mut PlantedInstance, cfg: &RatesConfig, rng: &mut RandomStream) -> Result<(bool, bool, Option<f64>, f64)> {
    let sys = inst.system(SolverKind::Svd, cfg.k, rng)?;
    let started = Instant::now();
    let solved = svd_null_solve(&sys);
    let elapsed = started.elapsed().as_secs_f64();
    let Ok(cand) = solved else {
        return Ok((false, false, None, elapsed));
    };
    let verdict = threshold_check(&cand, &inst.m1, &inst.m2, cfg.theta_t)?;
    Ok(judge(verdict, &inst.w, cfg.theta_t, elapsed))
}

fn judge(verdict: ThresholdVerdict, w: &Template, theta_t: f64, elapsed: f64) -> (bool, bool, Option<f64>, f64) {
    let ang = Some(verdict.angle().to_degrees());
    match verdict {
        ThresholdVerdict::Accept { template, .. } => {
            (true, unsigned_angle(&template, w) <= theta_t, ang, elapsed)
        }
        ThresholdVerdict::Reject { .. } => (false, false, ang, elapsed),
    }
}

fn run_system(system: usize, cfg: &RatesConfig, d: f64) -> Result<SystemResult> {
    let mut rng = RandomStream::new(cfg.seed, trial_stream(cfg.seed, system));
    let mut inst = PlantedInstance::new(cfg.params, cfg.num_sketches, cfg.theta_prime, &mut rng)?;
    let mut records = Vec::new();
    let solve_time;
    match cfg.solver {
        SolverKind::Svd => {
            let (accepted, correct, ang, t) = svd_trial(&mut inst, cfg, &mut rng)?;
            solve_time = t;
            records.push(TrialRecord {
                trial: 0,
                system,
                accepted,
                correct,
                threshold_angle_deg: ang,
            });
        }
        SolverKind::Lsa => {
            let sys = inst.system(SolverKind::Lsa, cfg.k, &mut rng)?;
            let started = Instant::now();
            let ls = LocalSearch::new(&sys, cfg.params)?;
            let mut first_restart = None;
            for r in 0..cfg.restarts_per_system {
                let found = ls.solve(d, 1, &mut rng);
                if r == 0 {
                    first_restart = Some(started.elapsed().as_secs_f64());
                }
                let (accepted, correct, ang) = match found {
                    None => (false, false, None),
                    Some(c) => {
                        let cand = Template::normalized(inst.m1.matrix().apply_transpose(&c.dense()))?;
                        let verdict = threshold_check(&cand, &inst.m1, &inst.m2, cfg.theta_t)?;
                        let (a, ok, ang, _) = judge(verdict, &inst.w, cfg.theta_t, 0.0);
                        (a, ok, ang)
                    }
                };
                records.push(TrialRecord {
                    trial: 0,
                    system,
                    accepted,
                    correct,
                    threshold_angle_deg: ang,
                });
            }
            solve_time = first_restart.unwrap_or(0.0);
        }
    }
    Ok(SystemResult { records, solve_time })
}

/// Residual bound for local search: explicit, the noiseless default, or the 99th percentile
/// of `‖A c₁‖` over planted noisy systems.
pub fn residual_bound(cfg: &RatesConfig) -> Result<f64> {
    if let Some(d) = cfg.d {
        return Ok(d);
    }
    if cfg.theta_prime == 0.0 {
        return Ok(default_residual_bound(cfg.k));
    }
    let offset = 1u64 << 40;
    let residuals = par_map(cfg.calibration_systems.max(1), cfg.workers, |i| -> Result<f64> {
        let mut rng = RandomStream::new(cfg.seed, trial_stream(cfg.seed, i) ^ offset);
        let mut inst = PlantedInstance::new(cfg.params, cfg.num_sketches, cfg.theta_prime, &mut rng)?;
        let sys = inst.system(SolverKind::Lsa, cfg.k, &mut rng)?;
        Ok(sys.residual(&inst.c1.dense()))
    });
    let mut residuals = residuals.into_iter().collect::<Result<Vec<f64>>>()?;
    residuals.sort_by(f64::total_cmp);
    let idx = ((residuals.len() as f64 * 0.99).ceil() as usize).clamp(1, residuals.len()) - 1;
    Ok(residuals[idx])
}

pub fn estimate_rates(cfg: &RatesConfig) -> Result<RateEstimate> {
    cfg.validate()?;
    let (n, alpha) = (cfg.params.n(), cfg.params.alpha());
    let odds = sampler_success_prob(n, alpha, cfg.k, cfg.t_prime())?;

    let (simulated_log2_p, bernoulli_hits) = if cfg.bernoulli_trials > 0 {
        let mut rng = RandomStream::new(cfg.seed, u64::MAX);
        let hits = simulate_sampler(n, alpha, cfg.k, cfg.t_prime(), cfg.bernoulli_trials, &mut rng);
        let p = hits as f64 / cfg.bernoulli_trials as f64;
        (Some(p.log2()), hits)
    } else {
        (None, 0)
    };

    let d = match cfg.solver {
        SolverKind::Lsa => Some(residual_bound(cfg)?),
        SolverKind::Svd => None,
    };
    let results = par_map(cfg.systems, cfg.workers, |s| run_system(s, cfg, d.unwrap_or(0.0)));
    let mut records = Vec::new();
    let mut times = Vec::new();
    for r in results {
        let r = r?;
        times.push(r.solve_time);
        records.extend(r.records);
    }
    for (i, rec) in records.iter_mut().enumerate() {
        rec.trial = i;
    }

    // top up the timing sample with extra solves on fresh instances
    let extra = cfg.timing_solves.saturating_sub(times.len());
    if extra > 0 {
        let offset = 1u64 << 41;
        let extra_times = par_map(extra, cfg.workers, |i| -> Result<f64> {
            let mut c = cfg.clone();
            c.seed = cfg.seed ^ offset;
            c.restarts_per_system = 1;
            Ok(run_system(i, &c, d.unwrap_or(0.0))?.solve_time)
        });
        for t in extra_times {
            times.push(t?);
        }
    }

    let trials = records.len() as u64;
    let accepted = records.iter().filter(|r| r.accepted).count() as u64;
    let correct = records.iter().filter(|r| r.correct).count() as u64;
    let p_k = wilson(accepted, trials);
    let p_f = if accepted == 0 {
        Proportion {
            estimate: 1.0,
            ..wilson(0, 0)
        }
    } else {
        wilson(correct, accepted)
    };
    let p_joint = wilson(correct, trials);
    let t_k = mean_estimate(&times);
    let model = RateModel {
        r_k: odds.expected_samples(),
        t_k: t_k.mean,
        p_k: if p_k.zero_successes { p_k.upper } else { p_k.estimate },
        p_f: if p_f.estimate > 0.0 { p_f.estimate } else { p_f.upper.max(f64::MIN_POSITIVE) },
    };
    Ok(RateEstimate {
        odds,
        simulated_log2_p,
        bernoulli_hits,
        bernoulli_trials: cfg.bernoulli_trials,
        t_k,
        p_k,
        p_f,
        p_joint,
        d,
        t_all: expected_runtime(&model),
        model,
        records,
    })
}
