//! The sparse spherical code `C_α`: unit vectors with exactly `α` entries equal to `±1/√α`.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphere::{RandomStream, RotationMatrix, Template};

/// Default tolerance for [`is_signed_permutation`] on numerically multiplied matrices.
pub const SIGNED_PERMUTATION_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CodeParams {
    n: usize,
    alpha: usize,
}

impl CodeParams {
    pub fn new(n: usize, alpha: usize) -> Result<Self> {
        if alpha == 0 || alpha > n {
            return Err(Error::InvalidCode { n, alpha });
        }
        Ok(Self { n, alpha })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn alpha(&self) -> usize {
        self.alpha
    }

    /// Magnitude of every non-zero entry, `1/√α`.
    pub fn magnitude(&self) -> f64 {
        1.0 / (self.alpha as f64).sqrt()
    }

    pub fn design_distance(&self) -> f64 {
        design_distance(self)
    }

    pub fn code_size_bits(&self) -> f64 {
        code_size_bits(self)
    }

    /// Number of single-move neighbours of any codeword, `2α(n - α)`.
    pub fn neighbor_count(&self) -> usize {
        2 * self.alpha * (self.n - self.alpha)
    }
}

/// A codeword stored sparsely: sorted support and the sign at each support index.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Codeword {
    n: usize,
    support: Vec<usize>,
    signs: Vec<i8>,
}

impl Codeword {
    /// Builds from `(index, sign)` pairs in any order.
    pub fn new(n: usize, mut entries: Vec<(usize, i8)>) -> Result<Self> {
        entries.sort_unstable_by_key(|e| e.0);
        let alpha = entries.len();
        if alpha == 0 || alpha > n {
            return Err(Error::InvalidCode { n, alpha });
        }
        for pair in entries.windows(2) {
            if pair[0].0 == pair[1].0 {
                return Err(Error::InvalidConfig(format!(
                    "duplicate support index {}",
                    pair[0].0
                )));
            }
        }
        if let Some(&(i, _)) = entries.last() {
            if i >= n {
                return Err(Error::InvalidConfig(format!("support index {i} >= n = {n}")));
            }
        }
        if let Some(&(_, s)) = entries.iter().find(|e| e.1 != 1 && e.1 != -1) {
            return Err(Error::InvalidConfig(format!("sign {s} is not ±1")));
        }
        let (support, signs) = entries.into_iter().unzip();
        Ok(Self { n, support, signs })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn alpha(&self) -> usize {
        self.support.len()
    }

    pub fn params(&self) -> CodeParams {
        CodeParams {
            n: self.n,
            alpha: self.alpha(),
        }
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, i8)> + '_ {
        self.support.iter().copied().zip(self.signs.iter().copied())
    }

    pub fn is_zero_at(&self, i: usize) -> bool {
        self.support.binary_search(&i).is_err()
    }

    pub fn value_at(&self, i: usize) -> f64 {
        match self.support.binary_search(&i) {
            Ok(p) => self.signs[p] as f64 / (self.alpha() as f64).sqrt(),
            Err(_) => 0.0,
        }
    }

    pub fn dense(&self) -> Vec<f64> {
        let mag = 1.0 / (self.alpha() as f64).sqrt();
        let mut v = vec![0.0; self.n];
        for (i, s) in self.entries() {
            v[i] = s as f64 * mag;
        }
        v
    }

    pub fn to_template(&self) -> Result<Template> {
        Template::normalized(self.dense())
    }

    pub fn negated(&self) -> Self {
        Self {
            n: self.n,
            support: self.support.clone(),
            signs: self.signs.iter().map(|s| -s).collect(),
        }
    }

    /// Moves the support entry at position `slot` to the zero index `to`, with sign `sign`.
    pub fn moved(&self, slot: usize, to: usize, sign: i8) -> Self {
        debug_assert!(self.is_zero_at(to));
        let mut entries: Vec<(usize, i8)> = self.entries().collect();
        entries[slot] = (to, sign);
        entries.sort_unstable_by_key(|e| e.0);
        let (support, signs) = entries.into_iter().unzip();
        Self {
            n: self.n,
            support,
            signs,
        }
    }
}

/// Uniform draw from `C_α`: uniform support subset, independent fair signs.
pub fn sample_codeword(params: &CodeParams, rng: &mut RandomStream) -> Codeword {
    let mut support = index::sample(rng, params.n, params.alpha).into_vec();
    support.sort_unstable();
    let signs = support
        .iter()
        .map(|_| if rng.gen::<bool>() { 1 } else { -1 })
        .collect();
    Codeword {
        n: params.n,
        support,
        signs,
    }
}

/// Nearest codeword to `u`: the `α` largest-magnitude coordinates (lowest index wins ties),
/// each taking the sign of `u` there (zero counts as positive).
///
/// Panics if `u.len() != params.n()`.
pub fn decode(u: &[f64], params: &CodeParams) -> Codeword {
    assert_eq!(u.len(), params.n, "decode: dimension mismatch");
    let alpha = params.alpha;
    let mut idx: Vec<usize> = (0..u.len()).collect();
    let by_strength = |a: &usize, b: &usize| {
        u[*b]
            .abs()
            .total_cmp(&u[*a].abs())
            .then_with(|| a.cmp(b))
    };
    if alpha < idx.len() {
        idx.select_nth_unstable_by(alpha - 1, by_strength);
        idx.truncate(alpha);
    }
    idx.sort_unstable();
    let signs = idx.iter().map(|&i| if u[i] < 0.0 { -1 } else { 1 }).collect();
    Codeword {
        n: params.n,
        support: idx,
        signs,
    }
}

/// Guaranteed minimum angle between distinct codewords, `½ arccos(1 - 1/α)`.
pub fn design_distance(params: &CodeParams) -> f64 {
    0.5 * (1.0 - 1.0 / params.alpha as f64).acos()
}

/// `log₂ C(n, k)` by summing logs; exact to rounding and never overflows.
pub fn log2_binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    (0..k)
        .map(|i| ((n - i) as f64).log2() - ((i + 1) as f64).log2())
        .sum()
}

/// `log₂ |C_α| = log₂ C(n, α) + α`.
pub fn code_size_bits(params: &CodeParams) -> f64 {
    log2_binomial(params.n, params.alpha) + params.alpha as f64
}

/// All codewords at distance `√2/√α`: one support index moved to a zero index, either sign.
pub fn neighbors(c: &Codeword) -> Vec<Codeword> {
    let mut out = Vec::with_capacity(2 * c.alpha() * (c.n - c.alpha()));
    for slot in 0..c.alpha() {
        for to in (0..c.n).filter(|&q| c.is_zero_at(q)) {
            for sign in [-1i8, 1] {
                out.push(c.moved(slot, to, sign));
            }
        }
    }
    out
}

/// Every codeword of `C_α`, in lexicographic support order. Only sensible at small scale.
pub fn all_codewords(params: &CodeParams) -> Vec<Codeword> {
    let (n, alpha) = (params.n, params.alpha);
    let mut out = Vec::new();
    let mut comb: Vec<usize> = (0..alpha).collect();
    loop {
        for mask in 0u64..(1u64 << alpha) {
            let signs = (0..alpha)
                .map(|b| if mask >> b & 1 == 1 { -1 } else { 1 })
                .collect();
            out.push(Codeword {
                n,
                support: comb.clone(),
                signs,
            });
        }
        let Some(i) = (0..alpha).rev().find(|&i| comb[i] != i + n - alpha) else {
            return out;
        };
        comb[i] += 1;
        for j in i + 1..alpha {
            comb[j] = comb[j - 1] + 1;
        }
    }
}

/// True iff every column of `t` is within `tol` of `±e_i`, with each `i` used once.
pub fn is_signed_permutation(t: &RotationMatrix, tol: f64) -> bool {
    let n = t.dim();
    let mut used = vec![false; n];
    for j in 0..n {
        let col = t.column(j);
        let (pivot, peak) = col
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .map(|(i, v)| (i, v.abs()))
            .unwrap_or((0, 0.0));
        if (peak - 1.0).abs() > tol || used[pivot] {
            return false;
        }
        if col
            .iter()
            .enumerate()
            .any(|(i, v)| i != pivot && v.abs() > tol)
        {
            return false;
        }
        used[pivot] = true;
    }
    true
}
