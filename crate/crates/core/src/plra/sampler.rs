//! Linear-equation sampler: stacks `k` rows drawn from the sketch matrices (SVD mode) or from
//! the relative matrices `M_{i+1} M_1ᵀ` (LSA mode).

use faer::Mat;
use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::ecc::Codeword;
use crate::error::{Error, Result};
use crate::ironmask::SketchRecord;
use crate::sphere::{dot, RandomStream, RotationMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    Svd,
    Lsa,
}

/// Where a sampled row came from. `sketch` is the index into the sketch list; in LSA mode the
/// row belongs to `M_sketch · M_0ᵀ`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct RowSource {
    pub sketch: usize,
    pub row: usize,
}

#[derive(Clone, Debug)]
pub struct SampledSystem {
    rows: Mat<f64>,
    provenance: Vec<RowSource>,
    mode: SolverKind,
}

impl SampledSystem {
    /// Assembles a system from explicit rows, e.g. planted ones.
    pub fn from_rows(rows: &[Vec<f64>], provenance: Vec<RowSource>, mode: SolverKind) -> Result<Self> {
        let n = rows.first().map_or(0, Vec::len);
        if rows.len() != provenance.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.len(),
                actual: provenance.len(),
            });
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: bad.len(),
            });
        }
        Ok(Self {
            rows: Mat::from_fn(rows.len(), n, |i, j| rows[i][j]),
            provenance,
            mode,
        })
    }

    pub fn rows(&self) -> &Mat<f64> {
        &self.rows
    }

    pub fn provenance(&self) -> &[RowSource] {
        &self.provenance
    }

    pub fn mode(&self) -> SolverKind {
        self.mode
    }

    pub fn k(&self) -> usize {
        self.rows.nrows()
    }

    pub fn n(&self) -> usize {
        self.rows.ncols()
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.n()).map(|j| self.rows[(i, j)]).collect()
    }

    /// `‖A x‖`.
    pub fn residual(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.n());
        let mut acc = vec![0.0; self.k()];
        for (j, &xj) in x.iter().enumerate() {
            if xj == 0.0 {
                continue;
            }
            for (a, &r) in acc.iter_mut().zip(self.rows.col_as_slice(j)) {
                *a += r * xj;
            }
        }
        dot(&acc, &acc).sqrt()
    }

    /// Every row sits at a zero coordinate of its source codeword. In SVD mode `codewords[i]`
    /// belongs to sketch `i`; in LSA mode the same indexing applies and sketch 0 is never a
    /// source.
    pub fn is_correct(&self, codewords: &[Codeword]) -> bool {
        self.provenance
            .iter()
            .all(|p| codewords[p.sketch].is_zero_at(p.row))
    }
}

/// Rows per source: `⌊k/t′⌋` each, plus one extra for the first `k mod t′` sources.
pub fn source_row_counts(k: usize, t_prime: usize) -> Vec<usize> {
    let (l, rem) = (k / t_prime, k % t_prime);
    (0..t_prime).map(|i| l + usize::from(i < rem)).collect()
}

/// Above this many relative matrices, LSA-mode rows are computed on demand.
const PRECOMPUTE_LIMIT: usize = 16;

pub struct EquationSampler<'a> {
    sketches: &'a [SketchRecord],
    mode: SolverKind,
    relative: Vec<RotationMatrix>,
}

impl<'a> EquationSampler<'a> {
    pub fn new(sketches: &'a [SketchRecord], mode: SolverKind) -> Result<Self> {
        if sketches.len() < 2 {
            return Err(Error::NotEnoughSketches {
                required: 2,
                actual: sketches.len(),
            });
        }
        let params = sketches[0].params();
        if sketches.iter().any(|s| s.params() != params) {
            return Err(Error::MixedParameters);
        }
        let relative = if mode == SolverKind::Lsa && sketches.len() - 1 <= PRECOMPUTE_LIMIT {
            let m1 = sketches[0].matrix();
            sketches[1..]
                .iter()
                .map(|s| s.matrix().compose_inverse(m1))
                .collect()
        } else {
            Vec::new()
        };
        Ok(Self {
            sketches,
            mode,
            relative,
        })
    }

    pub fn mode(&self) -> SolverKind {
        self.mode
    }

    pub fn n(&self) -> usize {
        self.sketches[0].n()
    }

    /// Number of row sources `t′`.
    pub fn t_prime(&self) -> usize {
        match self.mode {
            SolverKind::Svd => self.sketches.len(),
            SolverKind::Lsa => self.sketches.len() - 1,
        }
    }

    /// Sketch indices of the row sources, in source order.
    fn source_sketch(&self, source: usize) -> usize {
        match self.mode {
            SolverKind::Svd => source,
            SolverKind::Lsa => source + 1,
        }
    }

    fn source_row(&self, source: usize, row: usize) -> Vec<f64> {
        match self.mode {
            SolverKind::Svd => self.sketches[source].matrix().row(row),
            SolverKind::Lsa => match self.relative.get(source) {
                Some(m) => m.row(row),
                // row r of M_{i+1} M_1ᵀ is M_1 applied to row r of M_{i+1}
                None => self.sketches[0]
                    .matrix()
                    .apply(&self.sketches[source + 1].matrix().row(row)),
            },
        }
    }

    pub fn sample(&self, k: usize, rng: &mut RandomStream) -> Result<SampledSystem> {
        self.sample_filtered(k, rng, |_| true)
    }

    /// Like [`sample`](Self::sample), but rows are only drawn where `allowed` holds. Used to
    /// build planted systems with oracle knowledge of the codewords.
    pub fn sample_filtered<F>(&self, k: usize, rng: &mut RandomStream, allowed: F) -> Result<SampledSystem>
    where
        F: Fn(RowSource) -> bool,
    {
        let n = self.n();
        let t_prime = self.t_prime();
        if k == 0 || k > t_prime * n {
            return Err(Error::TooManyEquations {
                requested: k,
                available: t_prime * n,
            });
        }
        let mut rows = Vec::with_capacity(k);
        let mut provenance = Vec::with_capacity(k);
        for (source, count) in source_row_counts(k, t_prime).into_iter().enumerate() {
            if count == 0 {
                continue;
            }
            let sketch = self.source_sketch(source);
            let pool: Vec<usize> = (0..n)
                .filter(|&row| allowed(RowSource { sketch, row }))
                .collect();
            if count > pool.len() {
                return Err(Error::TooManyEquations {
                    requested: count,
                    available: pool.len(),
                });
            }
            for pick in index::sample(rng, pool.len(), count) {
                let row = pool[pick];
                rows.push(self.source_row(source, row));
                provenance.push(RowSource { sketch, row });
            }
        }
        SampledSystem::from_rows(&rows, provenance, self.mode)
    }
}

/// One-shot form of [`EquationSampler::sample`].
pub fn sample_equations(
    sketches: &[SketchRecord],
    mode: SolverKind,
    k: usize,
    rng: &mut RandomStream,
) -> Result<SampledSystem> {
    EquationSampler::new(sketches, mode)?.sample(k, rng)
}
