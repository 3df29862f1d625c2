//! Confidence intervals for proportions and timings.

use serde::{Deserialize, Serialize};

/// 97.5% standard normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub successes: u64,
    pub trials: u64,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    /// No successes observed; the interval is the rule-of-three bound `[0, 3/trials]`.
    pub zero_successes: bool,
}

/// Wilson score interval at 95%.
pub fn wilson(successes: u64, trials: u64) -> Proportion {
    if trials == 0 {
        return Proportion {
            successes,
            trials,
            estimate: 0.0,
            lower: 0.0,
            upper: 1.0,
            zero_successes: true,
        };
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    if successes == 0 {
        return Proportion {
            successes,
            trials,
            estimate: 0.0,
            lower: 0.0,
            upper: (3.0 / n).min(1.0),
            zero_successes: true,
        };
    }
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    Proportion {
        successes,
        trials,
        estimate: p,
        lower: (center - half).max(0.0),
        upper: (center + half).min(1.0),
        zero_successes: false,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub count: u64,
}

pub fn mean_estimate(xs: &[f64]) -> MeanEstimate {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return MeanEstimate {
            mean: 0.0,
            std_error: 0.0,
            count: 0,
        };
    }
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    MeanEstimate {
        mean,
        std_error: (var / n).sqrt(),
        count: xs.len() as u64,
    }
}
