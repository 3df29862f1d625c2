//! Attack on the structured sketch `M = T·R`, where `T` is a random signed permutation and `R`
//! the plane rotation taking the template to a fixed public codeword.
//!
//! Vectors fixed by `R` are mapped to signed permutations of themselves, so sparse vectors
//! with an equally sparse image span the complement of the rotation plane. The template is
//! read off that plane.

use faer::{Mat, Side};
use rand::seq::index;
use rand::Rng;

use crate::ecc::{decode, CodeParams, Codeword};
use crate::error::{Error, Result};
use crate::plra::solver::smallest_singular_pair;
use crate::sphere::{angle, naive_rotation, norm, RandomStream, RotationMatrix, Template};

/// Entries of `M v` above this count as non-zero.
pub const SPARSITY_TOL: f64 = 1e-6;
/// Largest accepted `‖M[I,J] u‖` for a sub-block null vector.
pub const BLOCK_RESIDUAL_TOL: f64 = 1e-6;
/// Gram eigenvalues below `NULL_TOL · λ_max` span the recovered plane.
pub const NULL_TOL: f64 = 1e-9;

/// A structured sketch with its secret factors.
#[derive(Clone, Debug)]
pub struct StructuredSketch {
    pub matrix: RotationMatrix,
    pub rotation: RotationMatrix,
    /// `T` as `(row permutation, row signs)`: row `i` of `T·R` is `signs[i]·R[perm[i], :]`.
    pub perm: Vec<usize>,
    pub signs: Vec<f64>,
    pub fixed: Codeword,
}

/// The public codeword every template is rotated onto: `+1/√α` on the first `α` coordinates.
pub fn fixed_codeword(params: &CodeParams) -> Codeword {
    Codeword::new(params.n(), (0..params.alpha()).map(|i| (i, 1)).collect())
        .expect("valid parameters")
}

pub fn structured_sketch(w: &Template, params: &CodeParams, rng: &mut RandomStream) -> Result<StructuredSketch> {
    let n = params.n();
    if w.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: w.dim(),
        });
    }
    let fixed = fixed_codeword(params);
    let rotation = naive_rotation(w, &fixed.dense())?;
    let perm = index::sample(rng, n, n).into_vec();
    let signs: Vec<f64> = (0..n)
        .map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 })
        .collect();
    let r = rotation.as_mat();
    let m = Mat::from_fn(n, n, |i, j| signs[i] * r[(perm[i], j)]);
    Ok(StructuredSketch {
        matrix: RotationMatrix::from_orthogonal(m),
        rotation,
        perm,
        signs,
        fixed,
    })
}

#[derive(Clone, Debug)]
pub struct RotationOutcome {
    pub recovered: Option<Template>,
    /// Sparse vectors that passed the filter.
    pub kept: Vec<Vec<f64>>,
    /// Dimension of the numerical null space of the kept stack.
    pub null_dim: usize,
}

fn codeword_angle(mv: &[f64], params: &CodeParams) -> f64 {
    let c = decode(mv, params);
    angle(mv, &c.dense()).unwrap_or(std::f64::consts::PI)
}

/// Runs the search and also returns the kept vectors for inspection.
pub fn rotation_attack_detailed(
    m: &RotationMatrix,
    params: &CodeParams,
    m_max: usize,
    theta_t: f64,
    rng: &mut RandomStream,
) -> Result<RotationOutcome> {
    let n = params.n();
    if m.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: m.dim(),
        });
    }
    if m_max < 2 || m_max > n {
        return Err(Error::InvalidConfig(format!("m must lie in [2, n], got {m_max}")));
    }
    let mat = m.as_mat();
    let mut kept = Vec::new();
    let mut gram = Mat::<f64>::zeros(n, n);
    for k in 2..=m_max {
        for _ in 0..n {
            let rows = index::sample(rng, n, k).into_vec();
            let cols = index::sample(rng, n, k).into_vec();
            let block = Mat::from_fn(k, k, |r, c| mat[(rows[r], cols[c])]);
            let (u, block_residual) = smallest_singular_pair(block.as_ref())?;
            if block_residual > BLOCK_RESIDUAL_TOL {
                continue;
            }
            let mut v = vec![0.0; n];
            for (&j, &x) in cols.iter().zip(&u) {
                v[j] = x;
            }
            let mv = m.apply(&v);
            if mv.iter().filter(|x| x.abs() > SPARSITY_TOL).count() != k {
                continue;
            }
            for (&a, &xa) in cols.iter().zip(&u) {
                for (&b, &xb) in cols.iter().zip(&u) {
                    gram[(a, b)] += xa * xb;
                }
            }
            kept.push(v);
        }
    }
    if kept.is_empty() {
        return Ok(RotationOutcome {
            recovered: None,
            kept,
            null_dim: 0,
        });
    }
    let eig = gram
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Linalg(format!("{e:?}")))?;
    let values = eig.S().column_vector();
    let lambda_max = values[n - 1];
    let basis = eig.U();
    let null_dim = (0..n)
        .take_while(|&i| values[i] <= NULL_TOL * lambda_max)
        .count();
    let recovered = (0..null_dim).find_map(|i| {
        let v: Vec<f64> = (0..n).map(|r| basis[(r, i)]).collect();
        if norm(&v) == 0.0 {
            return None;
        }
        let mv = m.apply(&v);
        (codeword_angle(&mv, params) < theta_t).then(|| Template::normalized(v).ok()).flatten()
    });
    Ok(RotationOutcome {
        recovered,
        kept,
        null_dim,
    })
}

pub fn rotation_attack(
    m: &RotationMatrix,
    params: &CodeParams,
    m_max: usize,
    theta_t: f64,
    rng: &mut RandomStream,
) -> Result<Option<Template>> {
    Ok(rotation_attack_detailed(m, params, m_max, theta_t, rng)?.recovered)
}
