//! Extra-noise defense: recovery rate `p_r` against the attacker-visible noise `θ_r`.
//!
//! Everything runs in the codeword frame. The sketch is uniform over matrices taking the
//! enrolled (noisy) template to `c`, so the genuine template lands at angle `θ_a` from `c` in
//! a uniform direction, and a query at `θ_i` from the template adds an independent offset.

use ironmask_core::ecc::{decode, sample_codeword};
use ironmask_core::ironmask::{defense_security_bits, DefenseParams};
use ironmask_core::sphere::{angle, random_tangent, random_unit};
use ironmask_core::{CodeParams, Error, RandomStream, Result};
use serde::{Deserialize, Serialize};

use crate::parallel::{par_map, trial_stream};
use crate::stats::{mean_estimate, wilson, MeanEstimate, Proportion};

/// Trials per chunk handed to a worker.
const CHUNK: usize = 256;

/// Mean angle between a uniform unit vector and its decoded codeword.
pub fn nearest_codeword_angle(params: &CodeParams, trials: usize, seed: u64, workers: usize) -> Result<MeanEstimate> {
    let chunks = trials.div_ceil(CHUNK);
    let parts = par_map(chunks, workers, |ch| -> Result<Vec<f64>> {
        let mut rng = RandomStream::new(seed, trial_stream(seed, ch));
        let count = CHUNK.min(trials - ch * CHUNK);
        (0..count)
            .map(|_| {
                let u = random_unit(params.n(), &mut rng)?;
                angle(&u, &decode(&u, params).dense())
            })
            .collect()
    });
    let mut angles = Vec::with_capacity(trials);
    for p in parts {
        angles.extend(p?);
    }
    Ok(mean_estimate(&angles))
}

/// `θ_a` with `cos θ_r = cos θ_i · cos² θ_a`, or `None` when `θ_i ≥ θ_r`.
pub fn solve_theta_a(theta_r: f64, theta_i: f64) -> Option<f64> {
    let c = theta_r.cos() / theta_i.cos();
    (theta_i < theta_r && c <= 1.0).then(|| c.sqrt().acos())
}

/// Moves `w` by `beta` along a uniform tangent; always draws, so streams stay aligned across
/// angles.
fn step(w: &[f64], beta: f64, rng: &mut RandomStream) -> Vec<f64> {
    let u = random_tangent(w, rng);
    let (s, c) = beta.sin_cos();
    w.iter().zip(&u).map(|(wi, ui)| c * wi + s * ui).collect()
}

/// Monte-Carlo recovery rate for enrollment noise `θ_a` and query noise `θ_i`.
///
/// A fixed `seed` gives common random numbers across calls, so the estimate is monotone in
/// both angles for a given seed.
pub fn recovery_rate(
    params: &CodeParams,
    theta_a: f64,
    theta_i: f64,
    trials: usize,
    seed: u64,
    workers: usize,
) -> Result<Proportion> {
    if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&theta_a) || !(0.0..=std::f64::consts::FRAC_PI_2).contains(&theta_i) {
        return Err(Error::AngleOutOfRange(theta_a.max(theta_i)));
    }
    if trials == 0 {
        return Err(Error::InvalidConfig("trials must be positive".into()));
    }
    let chunks = trials.div_ceil(CHUNK);
    let parts = par_map(chunks, workers, |ch| -> Result<u64> {
        let mut rng = RandomStream::new(seed, trial_stream(seed, ch));
        let count = CHUNK.min(trials - ch * CHUNK);
        let mut ok = 0;
        for _ in 0..count {
            let c = sample_codeword(params, &mut rng);
            let genuine = step(&c.dense(), theta_a, &mut rng);
            let query = step(&genuine, theta_i, &mut rng);
            if decode(&query, params) == c {
                ok += 1;
            }
        }
        Ok(ok)
    });
    let mut successes = 0;
    for p in parts {
        successes += p?;
    }
    Ok(wilson(successes, trials as u64))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefenseRow {
    pub alpha: usize,
    pub theta_i_deg: f64,
    pub theta_a_deg: f64,
    pub p_r: f64,
    pub p_r_lower: f64,
    pub p_r_upper: f64,
    pub theta_r_deg: f64,
    pub bits: f64,
    /// Row found by searching `θ_i` for the target `p_r`, rather than taken from the grid.
    pub solved: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DefenseSweepConfig {
    pub trials: usize,
    pub theta_r_trials: usize,
    /// Bisection steps for the target search.
    pub search_steps: usize,
    pub seed: u64,
    pub workers: usize,
}

impl Default for DefenseSweepConfig {
    fn default() -> Self {
        Self {
            trials: 2000,
            theta_r_trials: 2000,
            search_steps: 14,
            seed: 0,
            workers: 1,
        }
    }
}

fn row(params: &CodeParams, theta_r: f64, theta_i: f64, cfg: &DefenseSweepConfig, solved: bool) -> Result<Option<DefenseRow>> {
    let Some(theta_a) = solve_theta_a(theta_r, theta_i) else {
        return Ok(None);
    };
    let p = recovery_rate(params, theta_a, theta_i, cfg.trials, cfg.seed, cfg.workers)?;
    let defense = DefenseParams {
        theta_a,
        ..DefenseParams::NONE
    };
    Ok(Some(DefenseRow {
        alpha: params.alpha(),
        theta_i_deg: theta_i.to_degrees(),
        theta_a_deg: theta_a.to_degrees(),
        p_r: p.estimate,
        p_r_lower: p.lower,
        p_r_upper: p.upper,
        theta_r_deg: theta_r.to_degrees(),
        bits: defense_security_bits(params, &defense),
        solved,
    }))
}

/// One row per grid angle `θ_i` (skipping those at or above `θ_r`), then the row whose `θ_i`
/// brings `p_r` down to `p_r_target`.
pub fn defense_sweep(
    params: &CodeParams,
    p_r_target: f64,
    theta_grid: &[f64],
    cfg: &DefenseSweepConfig,
) -> Result<Vec<DefenseRow>> {
    if theta_grid.is_empty() {
        return Err(Error::InvalidConfig("theta grid is empty".into()));
    }
    if !(0.0..=1.0).contains(&p_r_target) {
        return Err(Error::InvalidConfig(format!("p_r target {p_r_target} outside [0, 1]")));
    }
    let theta_r = nearest_codeword_angle(params, cfg.theta_r_trials, cfg.seed ^ 0x5eed, cfg.workers)?.mean;
    let mut rows = Vec::new();
    for &theta_i in theta_grid {
        if let Some(r) = row(params, theta_r, theta_i, cfg, false)? {
            rows.push(r);
        }
    }
    if let Some(theta_i) = search_theta_i(params, theta_r, p_r_target, cfg)? {
        if let Some(r) = row(params, theta_r, theta_i, cfg, true)? {
            rows.push(r);
        }
    }
    Ok(rows)
}

/// Bisection on `θ_i ∈ [0, θ_r)`; `p_r` falls as `θ_i` grows along the `θ_r` contour.
pub fn search_theta_i(params: &CodeParams, theta_r: f64, p_r_target: f64, cfg: &DefenseSweepConfig) -> Result<Option<f64>> {
    let rate = |theta_i: f64| -> Result<f64> {
        let theta_a = solve_theta_a(theta_r, theta_i).unwrap_or(0.0);
        Ok(recovery_rate(params, theta_a, theta_i, cfg.trials, cfg.seed, cfg.workers)?.estimate)
    };
    let (mut lo, mut hi) = (0.0, theta_r * (1.0 - 1e-9));
    if rate(lo)? < p_r_target {
        return Ok(None);
    }
    if rate(hi)? >= p_r_target {
        return Ok(Some(hi));
    }
    for _ in 0..cfg.search_steps {
        let mid = 0.5 * (lo + hi);
        if rate(mid)? >= p_r_target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(lo))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn composition_inverts() {
        let theta_r = 63.8f64.to_radians();
        let a = solve_theta_a(theta_r, 0.0).unwrap();
        assert!((a.to_degrees() - 48.3).abs() < 0.1, "{}", a.to_degrees());
        let a = solve_theta_a(theta_r, 23.3f64.to_radians()).unwrap();
        assert!((a.to_degrees() - 46.1).abs() < 0.2, "{}", a.to_degrees());
        assert!(solve_theta_a(theta_r, theta_r).is_none());
    }

    #[test]
    fn zero_noise_always_recovers() {
        let params = CodeParams::new(64, 4).unwrap();
        let p = recovery_rate(&params, 0.0, 0.0, 500, 1, 1).unwrap();
        assert_eq!(p.successes, 500);
    }

    #[test]
    fn rate_is_monotone_under_common_seed() {
        let params = CodeParams::new(64, 4).unwrap();
        let mut last = 1.0;
        for deg in [0.0, 20.0, 40.0, 60.0, 80.0] {
            let p = recovery_rate(&params, f64::to_radians(deg), 0.0, 400, 3, 1).unwrap().estimate;
            assert!(p <= last, "{deg}: {p} > {last}");
            last = p;
        }
    }

    #[test]
    fn sweep_rows_follow_the_contour() {
        let params = CodeParams::new(64, 4).unwrap();
        let cfg = DefenseSweepConfig {
            trials: 300,
            theta_r_trials: 300,
            search_steps: 6,
            ..Default::default()
        };
        let rows = defense_sweep(&params, 0.5, &[0.0, 0.3], &cfg).unwrap();
        assert!(rows.len() >= 2);
        for r in &rows {
            let lhs = r.theta_r_deg.to_radians().cos();
            let rhs = r.theta_i_deg.to_radians().cos() * r.theta_a_deg.to_radians().cos().powi(2);
            assert!((lhs - rhs).abs() < 1e-12);
            assert_eq!(r.bits, ironmask_core::ecc::code_size_bits(&params));
        }
        assert!(defense_sweep(&params, 0.5, &[], &cfg).is_err());
    }
}
