//! Oracle-planted "correct" systems: every row is drawn from a zero coordinate of its source
//! codeword.
//!
//! Only the first two sketches are materialized (the threshold determinant needs them). A
//! single row drawn from a zero coordinate of another sketch of reading `w_i` is uniform on
//! the unit sphere orthogonal to `w_i`, because the sketch distribution is invariant under
//! rotations fixing `w_i`. Sources contributing one row therefore draw that row directly;
//! sources contributing more rows get a fresh sketch.

use ironmask_core::ecc::Codeword;
use ironmask_core::ironmask::sketch;
use ironmask_core::plra::sampler::source_row_counts;
use ironmask_core::plra::{RowSource, SampledSystem, SolverKind};
use ironmask_core::sphere::{random_tangent, random_unit, RotationMatrix};
use ironmask_core::{CodeParams, Error, RandomStream, Result, SketchRecord, Template};
use rand::seq::index;

use crate::challenger::challenger_sample;

/// Row index recorded for rows drawn without materializing their sketch.
pub const SYNTHETIC_ROW: usize = usize::MAX;

pub struct PlantedInstance {
    pub params: CodeParams,
    pub w: Template,
    /// The reading behind each sketch index.
    pub readings: Vec<Template>,
    pub m1: SketchRecord,
    pub c1: Codeword,
    pub m2: SketchRecord,
    pub c2: Codeword,
    relative: Option<RotationMatrix>,
}

impl PlantedInstance {
    /// Random template, `num_sketches` challenger readings at pairwise noise `θ′`, and real
    /// sketches of the first two readings.
    pub fn new(params: CodeParams, num_sketches: usize, theta_prime: f64, rng: &mut RandomStream) -> Result<Self> {
        let w = random_unit(params.n(), rng)?;
        Self::with_template(w, params, num_sketches, theta_prime, rng)
    }

    pub fn with_template(
        w: Template,
        params: CodeParams,
        num_sketches: usize,
        theta_prime: f64,
        rng: &mut RandomStream,
    ) -> Result<Self> {
        if num_sketches < 2 {
            return Err(Error::NotEnoughSketches {
                required: 2,
                actual: num_sketches,
            });
        }
        let readings = challenger_sample(&w, num_sketches, theta_prime, rng)?;
        let (m1, c1) = sketch(&readings[0], &params, rng)?;
        let (m2, c2) = sketch(&readings[1], &params, rng)?;
        Ok(Self {
            params,
            w,
            readings,
            m1,
            c1,
            m2,
            c2,
            relative: None,
        })
    }

    pub fn num_sketches(&self) -> usize {
        self.readings.len()
    }

    fn relative(&mut self) -> &RotationMatrix {
        let (m1, m2) = (&self.m1, &self.m2);
        self.relative
            .get_or_insert_with(|| m2.matrix().compose_inverse(m1.matrix()))
    }

    /// A correct `k`-row system with the standard per-source row split.
    pub fn system(&mut self, mode: SolverKind, k: usize, rng: &mut RandomStream) -> Result<SampledSystem> {
        let n = self.params.n();
        let t_prime = match mode {
            SolverKind::Svd => self.num_sketches(),
            SolverKind::Lsa => self.num_sketches() - 1,
        };
        if k == 0 || k > t_prime * (n - self.params.alpha()) {
            return Err(Error::TooManyEquations {
                requested: k,
                available: t_prime * (n - self.params.alpha()),
            });
        }
        let mut rows = Vec::with_capacity(k);
        let mut provenance = Vec::with_capacity(k);
        for (source, count) in source_row_counts(k, t_prime).into_iter().enumerate() {
            if count == 0 {
                continue;
            }
            let idx = match mode {
                SolverKind::Svd => source,
                SolverKind::Lsa => source + 1,
            };
            let lift = |v: Vec<f64>, inst: &Self| match mode {
                SolverKind::Svd => v,
                SolverKind::Lsa => inst.m1.matrix().apply(&v),
            };
            if idx == 0 || idx == 1 {
                let c = if idx == 0 { &self.c1 } else { &self.c2 };
                let zeros: Vec<usize> = (0..n).filter(|&i| c.is_zero_at(i)).collect();
                let picks: Vec<usize> = index::sample(rng, zeros.len(), count)
                    .into_iter()
                    .map(|p| zeros[p])
                    .collect();
                for row in picks {
                    let r = match (mode, idx) {
                        (SolverKind::Svd, 0) => self.m1.matrix().row(row),
                        (SolverKind::Svd, _) => self.m2.matrix().row(row),
                        (SolverKind::Lsa, _) => self.relative().row(row),
                    };
                    rows.push(r);
                    provenance.push(RowSource { sketch: idx, row });
                }
            } else if count == 1 {
                let r = random_tangent(&self.readings[idx], rng);
                rows.push(lift(r, self));
                provenance.push(RowSource {
                    sketch: idx,
                    row: SYNTHETIC_ROW,
                });
            } else {
                let (sk, c) = sketch(&self.readings[idx], &self.params, rng)?;
                let zeros: Vec<usize> = (0..n).filter(|&i| c.is_zero_at(i)).collect();
                for p in index::sample(rng, zeros.len(), count) {
                    let row = zeros[p];
                    rows.push(lift(sk.matrix().row(row), self));
                    provenance.push(RowSource { sketch: idx, row });
                }
            }
        }
        SampledSystem::from_rows(&rows, provenance, mode)
    }
}
