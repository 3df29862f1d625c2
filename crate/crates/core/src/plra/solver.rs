//! Regression solvers: SVD null vector, the reduced two-sketch system, and local search over
//! codewords.

use faer::{Mat, MatRef};
use rand::seq::index;

use crate::ecc::{sample_codeword, CodeParams, Codeword};
use crate::error::{Error, Result};
use crate::ironmask::SketchRecord;
use crate::plra::sampler::SampledSystem;
use crate::sphere::{RandomStream, RotationMatrix, Template};

/// Singular values below `RANK_TOL · σ_max` count as zero.
pub const RANK_TOL: f64 = 1e-10;

/// Right singular vector of `a` for its smallest singular value, and that value (zero when
/// `a` has fewer rows than columns).
pub fn smallest_singular_pair(a: MatRef<'_, f64>) -> Result<(Vec<f64>, f64)> {
    let (k, n) = (a.nrows(), a.ncols());
    if n == 0 {
        return Err(Error::DimensionTooSmall(0));
    }
    let svd = a.svd().map_err(|e| Error::Linalg(format!("{e:?}")))?;
    let s = svd.S().column_vector();
    let sigma_min = if k < n { 0.0 } else { s[n - 1] };
    let v = svd.V();
    Ok(((0..n).map(|i| v[(i, n - 1)]).collect(), sigma_min))
}

/// Unit right singular vector of `a` with the smallest singular value. Errors when the
/// numerical null space has dimension above one.
pub fn smallest_right_singular_vector(a: MatRef<'_, f64>) -> Result<Vec<f64>> {
    let (k, n) = (a.nrows(), a.ncols());
    if n == 0 {
        return Err(Error::DimensionTooSmall(0));
    }
    if k + 1 < n {
        return Err(Error::RankDeficient {
            rank: k,
            nullity: n - k,
            cols: n,
        });
    }
    let svd = a.svd().map_err(|e| Error::Linalg(format!("{e:?}")))?;
    let s = svd.S().column_vector();
    let sigma_max = if s.nrows() > 0 { s[0] } else { 0.0 };
    let rank = (0..s.nrows())
        .filter(|&i| s[i] > RANK_TOL * sigma_max)
        .count();
    if rank + 1 < n {
        return Err(Error::RankDeficient {
            rank,
            nullity: n - rank,
            cols: n,
        });
    }
    let v = svd.V();
    Ok((0..n).map(|i| v[(i, n - 1)]).collect())
}

/// Minimizes `‖A w‖` over the unit sphere.
pub fn svd_null_solve(system: &SampledSystem) -> Result<Template> {
    let v = smallest_right_singular_vector(system.rows().as_ref())?;
    Template::normalized(v)
}

/// Guessed zero coordinates: `first` of `c₁`, `second` of `c₂`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ZeroGuess {
    pub first: Vec<usize>,
    pub second: Vec<usize>,
}

impl ZeroGuess {
    /// `⌈k/2⌉` zeros of `c₁` and `⌊k/2⌋` zeros of `c₂`, uniformly.
    pub fn random(n: usize, k: usize, rng: &mut RandomStream) -> Result<Self> {
        let (a, b) = (k.div_ceil(2), k / 2);
        if a > n {
            return Err(Error::TooManyEquations {
                requested: k,
                available: 2 * n,
            });
        }
        let mut first = index::sample(rng, n, a).into_vec();
        let mut second = index::sample(rng, n, b).into_vec();
        first.sort_unstable();
        second.sort_unstable();
        Ok(Self { first, second })
    }

    pub fn is_correct(&self, c1: &Codeword, c2: &Codeword) -> bool {
        self.first.iter().all(|&i| c1.is_zero_at(i)) && self.second.iter().all(|&i| c2.is_zero_at(i))
    }
}

/// Solves `Σ_{j∉U₁} m_ij ĉ_j = 0` for `i ∈ U₂` with `m = M₂M₁ᵀ`, then returns `M₁ᵀĉ`.
pub fn reduced_solve(
    m1: &SketchRecord,
    relative: &RotationMatrix,
    guess: &ZeroGuess,
) -> Result<Template> {
    let n = m1.n();
    let mut zero = vec![false; n];
    for &i in &guess.first {
        zero[i] = true;
    }
    let free: Vec<usize> = (0..n).filter(|&j| !zero[j]).collect();
    let rel = relative.as_mat();
    let sub = Mat::from_fn(guess.second.len(), free.len(), |r, c| {
        rel[(guess.second[r], free[c])]
    });
    let u = smallest_right_singular_vector(sub.as_ref())?;
    let mut c_hat = vec![0.0; n];
    for (&j, &x) in free.iter().zip(&u) {
        c_hat[j] = x;
    }
    Template::normalized(m1.matrix().apply_transpose(&c_hat))
}

/// One draw of the reduced two-sketch solver.
pub fn two_sketch_reduced_solve(
    m1: &SketchRecord,
    m2: &SketchRecord,
    k: usize,
    rng: &mut RandomStream,
) -> Result<Template> {
    let relative = m2.matrix().compose_inverse(m1.matrix());
    let guess = ZeroGuess::random(m1.n(), k, rng)?;
    reduced_solve(m1, &relative, &guess)
}

/// Greedy descent of `‖A c‖` over `C_α` using the Gram matrix `G = AᵀA`.
pub struct LocalSearch<'a> {
    system: &'a SampledSystem,
    params: CodeParams,
    gram: Mat<f64>,
    max_steps: usize,
}

impl<'a> LocalSearch<'a> {
    pub fn new(system: &'a SampledSystem, params: CodeParams) -> Result<Self> {
        if system.n() != params.n() {
            return Err(Error::DimensionMismatch {
                expected: params.n(),
                actual: system.n(),
            });
        }
        let a = system.rows();
        let gram = a.transpose() * a;
        Ok(Self {
            system,
            params,
            gram,
            max_steps: 10 * params.n(),
        })
    }

    /// Direct `‖A c‖`.
    pub fn residual(&self, c: &Codeword) -> f64 {
        self.system.residual(&c.dense())
    }

    /// Moves to the best neighbor while that strictly lowers the objective. Returns the local
    /// minimum.
    pub fn descend(&self, start: &Codeword) -> Codeword {
        let n = self.params.n();
        let a = self.params.magnitude();
        let g = &self.gram;
        let mut support = start.support().to_vec();
        let mut signs: Vec<f64> = start.signs().iter().map(|&s| s as f64).collect();
        let mut in_support = vec![false; n];
        for &i in &support {
            in_support[i] = true;
        }
        let mut gc = vec![0.0; n];
        for (&i, &s) in support.iter().zip(&signs) {
            for (acc, &gij) in gc.iter_mut().zip(g.col_as_slice(i)) {
                *acc += s * a * gij;
            }
        }
        let objective = |support: &[usize], signs: &[f64], gc: &[f64]| -> f64 {
            support.iter().zip(signs).map(|(&i, &s)| s * a * gc[i]).sum()
        };
        let mut obj = objective(&support, &signs, &gc);

        for _ in 0..self.max_steps {
            let mut best: Option<(f64, usize, usize, f64)> = None;
            for (slot, (&p, &sp)) in support.iter().zip(&signs).enumerate() {
                let col_p = g.col_as_slice(p);
                let base = obj + a * a * g[(p, p)] - 2.0 * sp * a * gc[p];
                for q in (0..n).filter(|&q| !in_support[q]) {
                    let t = gc[q] - sp * a * col_p[q];
                    let val = base + a * a * g[(q, q)] - 2.0 * a * t.abs();
                    if best.map_or(true, |b| val < b.0) {
                        let sigma = if t > 0.0 { -1.0 } else { 1.0 };
                        best = Some((val, slot, q, sigma));
                    }
                }
            }
            let Some((val, slot, q, sigma)) = best else { break };
            if !(val < obj - 1e-12 * (1.0 + obj.abs())) {
                break;
            }
            let (p, sp) = (support[slot], signs[slot]);
            let (col_p, col_q) = (g.col_as_slice(p), g.col_as_slice(q));
            for ((acc, &gp), &gq) in gc.iter_mut().zip(col_p).zip(col_q) {
                *acc += a * (sigma * gq - sp * gp);
            }
            in_support[p] = false;
            in_support[q] = true;
            support[slot] = q;
            signs[slot] = sigma;
            obj = objective(&support, &signs, &gc);
        }
        let entries = support
            .into_iter()
            .zip(signs)
            .map(|(i, s)| (i, if s > 0.0 { 1 } else { -1 }))
            .collect();
        Codeword::new(n, entries).expect("local search keeps a valid support")
    }

    /// Up to `t_th` restarts from uniform codewords; the first local minimum with
    /// `‖A c‖ ≤ d` is returned.
    pub fn solve(&self, d: f64, t_th: usize, rng: &mut RandomStream) -> Option<Codeword> {
        (0..t_th).find_map(|_| {
            let start = sample_codeword(&self.params, rng);
            let c = self.descend(&start);
            (self.residual(&c) <= d).then_some(c)
        })
    }
}

pub fn lsa_solve(
    system: &SampledSystem,
    params: &CodeParams,
    d: f64,
    t_th: usize,
    rng: &mut RandomStream,
) -> Result<Option<Codeword>> {
    if !(d > 0.0) || t_th == 0 {
        return Err(Error::InvalidConfig("lsa_solve needs d > 0 and t_th >= 1".into()));
    }
    Ok(LocalSearch::new(system, *params)?.solve(d, t_th, rng))
}

/// Default residual bound for noiseless systems, `10⁻⁶·√k`.
pub fn default_residual_bound(k: usize) -> f64 {
    1e-6 * (k as f64).sqrt()
}
