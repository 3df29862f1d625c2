//! Threshold determinant: chains a candidate through two sketch recoveries and accepts when
//! both land on the same point.

use crate::error::Result;
use crate::ironmask::{recover, SketchRecord};
use crate::sphere::{angle, Template};

#[derive(Clone, Debug, PartialEq)]
pub enum ThresholdVerdict {
    /// `w_r1 = Rec(w_cand, M₁)`, with the angle to `Rec(w_r1, M₂)`.
    Accept { template: Template, angle: f64 },
    Reject { angle: f64 },
}

impl ThresholdVerdict {
    pub fn is_accept(&self) -> bool {
        matches!(self, Self::Accept { .. })
    }

    pub fn angle(&self) -> f64 {
        match self {
            Self::Accept { angle, .. } | Self::Reject { angle } => *angle,
        }
    }
}

pub fn threshold_check(
    w_cand: &[f64],
    m1: &SketchRecord,
    m2: &SketchRecord,
    theta_t: f64,
) -> Result<ThresholdVerdict> {
    let w_r1 = recover(w_cand, m1)?;
    let w_r2 = recover(&w_r1, m2)?;
    let theta = angle(&w_r1, &w_r2)?;
    Ok(if theta <= theta_t {
        ThresholdVerdict::Accept {
            template: w_r1,
            angle: theta,
        }
    } else {
        ThresholdVerdict::Reject { angle: theta }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ecc::CodeParams;
    use crate::ironmask::sketch;
    use crate::sphere::{dot, random_unit, RandomStream};

    #[test]
    fn true_template_and_its_negation_accept() {
        let mut rng = RandomStream::new(1, 0);
        let params = CodeParams::new(64, 4).unwrap();
        let w = random_unit(64, &mut rng).unwrap();
        let (m1, _) = sketch(&w, &params, &mut rng).unwrap();
        let (m2, _) = sketch(&w, &params, &mut rng).unwrap();
        let v = threshold_check(&w, &m1, &m2, 10f64.to_radians()).unwrap();
        assert!(v.angle() < 1e-7);
        let ThresholdVerdict::Accept { template, .. } = threshold_check(&w.negated(), &m1, &m2, 10f64.to_radians()).unwrap() else {
            panic!("negated template rejected");
        };
        assert!(dot(&template, &w) <= -1.0 + 1e-8);
    }

    #[test]
    fn random_candidates_reject() {
        let mut rng = RandomStream::new(2, 0);
        let params = CodeParams::new(64, 4).unwrap();
        let w = random_unit(64, &mut rng).unwrap();
        let (m1, _) = sketch(&w, &params, &mut rng).unwrap();
        let (m2, _) = sketch(&w, &params, &mut rng).unwrap();
        let accepted = (0..200)
            .filter(|_| {
                let cand = random_unit(64, &mut rng).unwrap();
                threshold_check(&cand, &m1, &m2, 10f64.to_radians()).unwrap().is_accept()
            })
            .count();
        assert_eq!(accepted, 0);
    }
}
