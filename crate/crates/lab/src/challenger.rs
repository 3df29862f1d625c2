//! The multi-sketch challenger: noisy readings of one template with bounded pairwise angle.

use ironmask_core::sphere::{dot, perturb_at_angle};
use ironmask_core::{Error, RandomStream, Result, Template};

/// Resampling budget per reading.
pub const MAX_ATTEMPTS: usize = 10_000;
/// Slack on the pairwise bound before a reading is redrawn.
pub const PAIRWISE_SLACK: f64 = 0.05;

/// Offset angle `β` with `cos β = √cos θ′`, so two independent readings sit about `θ′` apart.
pub fn reading_angle(theta_prime: f64) -> f64 {
    theta_prime.cos().sqrt().acos()
}

/// `q` readings `perturb(w, β)`, each redrawn until it lies within `θ′·(1 + slack)` of every
/// earlier reading.
pub fn challenger_sample(
    w: &Template,
    q: usize,
    theta_prime: f64,
    rng: &mut RandomStream,
) -> Result<Vec<Template>> {
    if q == 0 {
        return Err(Error::InvalidConfig("q must be at least 1".into()));
    }
    if !(0.0..std::f64::consts::FRAC_PI_2).contains(&theta_prime) {
        return Err(Error::AngleOutOfRange(theta_prime));
    }
    if theta_prime == 0.0 {
        return Ok(vec![w.clone(); q]);
    }
    let beta = reading_angle(theta_prime);
    let min_cos = (theta_prime * (1.0 + PAIRWISE_SLACK)).cos();
    let mut out: Vec<Template> = Vec::with_capacity(q);
    while out.len() < q {
        let mut attempts = 0;
        let reading = loop {
            if attempts == MAX_ATTEMPTS {
                return Err(Error::InvalidConfig(format!(
                    "challenger gave up on reading {} after {MAX_ATTEMPTS} attempts",
                    out.len()
                )));
            }
            attempts += 1;
            let cand = perturb_at_angle(w, beta, rng)?;
            if out.iter().all(|o| dot(o, &cand) >= min_cos) {
                break cand;
            }
        };
        out.push(reading);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ironmask_core::sphere::{angle, random_unit};

    #[test]
    fn zero_noise_repeats_template() {
        let mut rng = RandomStream::new(1, 0);
        let w = random_unit(16, &mut rng).unwrap();
        let out = challenger_sample(&w, 4, 0.0, &mut rng).unwrap();
        assert!(out.iter().all(|o| o == &w));
    }

    #[test]
    fn readings_stay_within_theta_of_template() {
        let mut rng = RandomStream::new(2, 0);
        let w = random_unit(128, &mut rng).unwrap();
        let theta = 14f64.to_radians();
        for r in challenger_sample(&w, 20, theta, &mut rng).unwrap() {
            assert!(angle(&r, &w).unwrap() <= theta);
        }
    }

    #[test]
    fn mean_pairwise_angle_matches_noise() {
        let mut rng = RandomStream::new(3, 0);
        let w = random_unit(512, &mut rng).unwrap();
        let theta = 8.7f64.to_radians();
        let mut total = 0.0;
        let mut pairs = 0;
        for _ in 0..50 {
            let r = challenger_sample(&w, 7, theta, &mut rng).unwrap();
            for i in 0..r.len() {
                for j in 0..i {
                    total += angle(&r[i], &r[j]).unwrap();
                    pairs += 1;
                }
            }
        }
        assert!(pairs >= 1000);
        let mean = (total / pairs as f64).to_degrees();
        assert!((mean - 8.7).abs() < 0.5, "{mean}");
    }

    #[test]
    fn bad_inputs() {
        let mut rng = RandomStream::new(4, 0);
        let w = random_unit(8, &mut rng).unwrap();
        assert!(challenger_sample(&w, 0, 0.1, &mut rng).is_err());
        assert!(challenger_sample(&w, 2, 2.0, &mut rng).is_err());
    }
}
