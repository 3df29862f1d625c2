//! Analytic success and runtime model of the attack.

use serde::{Deserialize, Serialize};

use crate::ecc::log2_binomial;
use crate::error::{Error, Result};
use crate::plra::sampler::source_row_counts;

/// Probability that one sampled system is correct, as `log₂`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerOdds {
    /// Exact `Σ_s log₂ C(n−α, l_s)/C(n, l_s)`.
    pub log2_p: f64,
    /// `k·log₂(1 − α/(n−l+1))` with `l = ⌈k/t′⌉`, a lower bound on `log2_p`.
    pub log2_lower_bound: f64,
}

impl SamplerOdds {
    pub fn p(&self) -> f64 {
        self.log2_p.exp2()
    }

    /// Expected samples until a correct system, `r_k = 1/p_s`.
    pub fn expected_samples(&self) -> f64 {
        (-self.log2_p).exp2()
    }
}

pub fn sampler_success_prob(n: usize, alpha: usize, k: usize, t_prime: usize) -> Result<SamplerOdds> {
    if t_prime == 0 || k > t_prime * n || alpha > n {
        return Err(Error::TooManyEquations {
            requested: k,
            available: t_prime * n,
        });
    }
    let counts = source_row_counts(k, t_prime);
    let mut log2_p = 0.0;
    for &l in &counts {
        if l > n - alpha {
            log2_p = f64::NEG_INFINITY;
            break;
        }
        log2_p += log2_binomial(n - alpha, l) - log2_binomial(n, l);
    }
    let l_max = counts.first().copied().unwrap_or(0);
    let ratio = 1.0 - alpha as f64 / (n - l_max + 1) as f64;
    let log2_lower_bound = if k == 0 {
        0.0
    } else if ratio <= 0.0 {
        f64::NEG_INFINITY
    } else {
        k as f64 * ratio.log2()
    };
    Ok(SamplerOdds {
        log2_p,
        log2_lower_bound,
    })
}

/// Measured or modeled rates of the attack loop.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateModel {
    /// Expected samples to a correct system.
    pub r_k: f64,
    /// Seconds per solve.
    pub t_k: f64,
    /// Accept rate given a correct system.
    pub p_k: f64,
    /// Fraction of accepted outputs that are the true template. 1 without noise.
    pub p_f: f64,
}

impl RateModel {
    pub fn noiseless(r_k: f64, t_k: f64, p_k: f64) -> Self {
        Self { r_k, t_k, p_k, p_f: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [self.r_k, self.t_k, self.p_k, self.p_f].iter().all(|x| *x > 0.0);
        if !positive || self.p_k > 1.0 || self.p_f > 1.0 {
            return Err(Error::InvalidConfig(format!("invalid rate model {self:?}")));
        }
        Ok(())
    }
}

/// `t_all = r_k·t_k / (p_k·p_f)` seconds.
pub fn expected_runtime(model: &RateModel) -> f64 {
    model.r_k * model.t_k / (model.p_k * model.p_f)
}

/// Expected cost, in single restarts, per success when each outer iteration allows `t`
/// restarts that each succeed with probability `p_out`.
pub fn restart_cost_ratio(p_out: f64, t: u32) -> f64 {
    t as f64 / (1.0 - (1.0 - p_out).powi(t as i32))
}
