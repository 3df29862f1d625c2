//! Vectors and orthogonal matrices on the unit hypersphere `S^{n-1}`.

use std::ops::Deref;

use faer::{Mat, MatRef};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum tolerated `|‖v‖ - 1|` for anything treated as a point on the sphere.
pub const UNIT_TOL: f64 = 1e-9;

/// Maximum tolerated entry of `MᵀM - I` for a [`RotationMatrix`].
pub const ORTHOGONALITY_TOL: f64 = 1e-9;

/// Seeded, splittable source of randomness.
///
/// Two streams with the same `(seed, stream_id)` produce identical draws.
/// Parallel workers must be handed distinct stream ids.
#[derive(Clone, Debug)]
pub struct RandomStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// A fresh stream with the same seed and a different id.
    pub fn fork(&self, stream_id: u64) -> Self {
        Self::new(self.seed, stream_id)
    }

    pub fn gaussian(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn gaussian_vec(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.gaussian()).collect()
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        self.rng.try_fill_bytes(dest)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn check_same_dim(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    Ok(())
}

fn check_unit(v: &[f64]) -> Result<()> {
    let dev = (norm(v) - 1.0).abs();
    if dev > UNIT_TOL {
        return Err(Error::NotUnit(dev));
    }
    Ok(())
}

/// A biometric template: a unit vector in `R^n`, `n >= 3`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Template(Vec<f64>);

impl Template {
    /// Wraps `coords`, which must already be unit norm.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 3 {
            return Err(Error::DimensionTooSmall(coords.len()));
        }
        check_unit(&coords)?;
        Ok(Self(coords))
    }

    /// Scales `coords` onto the sphere.
    pub fn normalized(mut coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 3 {
            return Err(Error::DimensionTooSmall(coords.len()));
        }
        let len = norm(&coords);
        if !(len > 0.0) || !len.is_finite() {
            return Err(Error::ZeroVector);
        }
        coords.iter_mut().for_each(|x| *x /= len);
        Ok(Self(coords))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn negated(&self) -> Self {
        Self(self.0.iter().map(|x| -x).collect())
    }

    pub fn angle_to(&self, other: &[f64]) -> Result<f64> {
        angle(&self.0, other)
    }

    /// Angle to the closer of `other` and `-other`, in `[0, π/2]`.
    pub fn unsigned_angle_to(&self, other: &[f64]) -> Result<f64> {
        let a = angle(&self.0, other)?;
        Ok(a.min(std::f64::consts::PI - a))
    }
}

impl Deref for Template {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl AsRef<[f64]> for Template {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for Template {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Template::new(v)
    }
}

impl From<Template> for Vec<f64> {
    fn from(t: Template) -> Vec<f64> {
        t.0
    }
}

/// Angle between two vectors, `arccos(⟨v, w⟩ / (‖v‖‖w‖))`, in `[0, π]`.
pub fn angle(v: &[f64], w: &[f64]) -> Result<f64> {
    check_same_dim(v, w)?;
    let denom = norm(v) * norm(w);
    if !(denom > 0.0) {
        return Err(Error::ZeroVector);
    }
    Ok((dot(v, w) / denom).clamp(-1.0, 1.0).acos())
}

/// An `n × n` orthogonal matrix. Its inverse is its transpose.
#[derive(Clone, Debug)]
pub struct RotationMatrix {
    m: Mat<f64>,
}

impl RotationMatrix {
    /// Validates squareness and orthogonality.
    pub fn new(m: Mat<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::NotSquare {
                rows: m.nrows(),
                cols: m.ncols(),
            });
        }
        let out = Self { m };
        let residual = out.orthogonality_residual();
        if !(residual <= ORTHOGONALITY_TOL) {
            return Err(Error::NotOrthogonal(residual));
        }
        Ok(out)
    }

    /// Builds from row-major entries and validates.
    pub fn from_row_major(n: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                actual: entries.len(),
            });
        }
        Self::new(Mat::from_fn(n, n, |i, j| entries[i * n + j]))
    }

    /// Skips validation; callers guarantee orthogonality by construction.
    pub(crate) fn from_orthogonal(m: Mat<f64>) -> Self {
        debug_assert_eq!(m.nrows(), m.ncols());
        Self { m }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            m: Mat::identity(n, n),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn as_mat(&self) -> MatRef<'_, f64> {
        self.m.as_ref()
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    pub fn column(&self, j: usize) -> &[f64] {
        self.m.col_as_slice(j)
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.dim()).map(|j| self.m[(i, j)]).collect()
    }

    /// `M v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.dim(), "dimension mismatch in M v");
        let mut out = vec![0.0; self.dim()];
        for (j, &vj) in v.iter().enumerate() {
            if vj == 0.0 {
                continue;
            }
            for (o, &mij) in out.iter_mut().zip(self.m.col_as_slice(j)) {
                *o += mij * vj;
            }
        }
        out
    }

    /// `Mᵀ v`, which is `M⁻¹ v`.
    pub fn apply_transpose(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.dim(), "dimension mismatch in M^T v");
        (0..self.dim())
            .map(|j| dot(self.m.col_as_slice(j), v))
            .collect()
    }

    pub fn transpose(&self) -> Self {
        Self {
            m: self.m.transpose().to_owned(),
        }
    }

    /// `self · other`.
    pub fn compose(&self, other: &RotationMatrix) -> Self {
        Self {
            m: &self.m * &other.m,
        }
    }

    /// `self · otherᵀ`, i.e. `self · other⁻¹`.
    pub fn compose_inverse(&self, other: &RotationMatrix) -> Self {
        Self {
            m: &self.m * other.m.transpose(),
        }
    }

    /// `max |MᵀM - I|`.
    pub fn orthogonality_residual(&self) -> f64 {
        let gram = self.m.transpose() * &self.m;
        let n = self.dim();
        let mut worst = 0.0f64;
        for j in 0..n {
            for i in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                let dev = (gram[(i, j)] - target).abs();
                if dev.is_nan() {
                    return f64::NAN;
                }
                worst = worst.max(dev);
            }
        }
        worst
    }

    pub fn to_row_major(&self) -> Vec<f64> {
        let n = self.dim();
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                out.push(self.m[(i, j)]);
            }
        }
        out
    }
}

/// Draws a point uniformly from `S^{n-1}`.
pub fn random_unit(n: usize, rng: &mut RandomStream) -> Result<Template> {
    if n < 3 {
        return Err(Error::DimensionTooSmall(n));
    }
    loop {
        let g = rng.gaussian_vec(n);
        if norm(&g) > 1e-12 {
            return Template::normalized(g);
        }
    }
}

/// Haar-distributed orthogonal matrix: Gaussian QR with the sign of `R`'s diagonal folded into `Q`.
pub fn haar_orthogonal(n: usize, rng: &mut RandomStream) -> RotationMatrix {
    if n == 0 {
        return RotationMatrix::from_orthogonal(Mat::zeros(0, 0));
    }
    let g = Mat::from_fn(n, n, |_, _| rng.gaussian());
    let qr = g.qr();
    let mut q = qr.compute_Q();
    let r = qr.R();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.col_as_slice_mut(j).iter_mut().for_each(|x| *x = -*x);
        }
    }
    RotationMatrix::from_orthogonal(q)
}

/// `sign · (I - scale · u uᵀ)`, an orthogonal symmetric matrix whose first column is a given unit vector.
struct Reflector {
    u: Vec<f64>,
    scale: f64,
    sign: f64,
}

impl Reflector {
    fn first_column(v: &[f64]) -> Self {
        let mut u: Vec<f64> = v.iter().map(|x| -x).collect();
        let sign = if v[0] <= 0.0 {
            u[0] += 1.0;
            1.0
        } else {
            u.iter_mut().for_each(|x| *x = -*x);
            u[0] += 1.0;
            -1.0
        };
        let scale = 2.0 / dot(&u, &u);
        Self { u, scale, sign }
    }

    /// `x ← x · H`.
    fn right_apply(&self, x: &mut Mat<f64>) {
        let n = x.nrows();
        let mut xu = vec![0.0; n];
        for (j, &uj) in self.u.iter().enumerate() {
            for (acc, &xij) in xu.iter_mut().zip(x.col_as_slice(j)) {
                *acc += xij * uj;
            }
        }
        for (j, &uj) in self.u.iter().enumerate() {
            let f = self.scale * uj;
            for (xij, &a) in x.col_as_slice_mut(j).iter_mut().zip(&xu) {
                *xij = self.sign * (*xij - f * a);
            }
        }
    }

    /// `x ← H · x`.
    fn left_apply(&self, x: &mut Mat<f64>) {
        for j in 0..x.ncols() {
            let col = x.col_as_slice_mut(j);
            let f = self.scale * dot(&self.u, col);
            for (xij, &ui) in col.iter_mut().zip(&self.u) {
                *xij = self.sign * (*xij - f * ui);
            }
        }
    }
}

/// Random orthogonal `M` with `M w = c`, uniform over that coset of `O(n)`.
///
/// `M = Q_c Q_wᵀ` where `Q_w`, `Q_c` are orthonormal bases whose first columns are `w` and `c`.
/// `Q_w` is a Householder completion; `Q_c` gets a Haar-random completion of `c^⊥`.
pub fn random_rotation_mapping(
    w: &[f64],
    c: &[f64],
    rng: &mut RandomStream,
) -> Result<RotationMatrix> {
    check_same_dim(w, c)?;
    check_unit(w)?;
    check_unit(c)?;
    let n = w.len();
    let completion = haar_orthogonal(n - 1, rng);
    let mut m = Mat::<f64>::zeros(n, n);
    m[(0, 0)] = 1.0;
    for j in 1..n {
        for i in 1..n {
            m[(i, j)] = completion.m[(i - 1, j - 1)];
        }
    }
    Reflector::first_column(w).right_apply(&mut m);
    Reflector::first_column(c).left_apply(&mut m);
    Ok(RotationMatrix::from_orthogonal(m))
}

/// `cos β · w + sin β · u` with `u` uniform on the unit sphere of the tangent space at `w`.
pub fn perturb_at_angle(w: &Template, beta: f64, rng: &mut RandomStream) -> Result<Template> {
    if !(0.0..std::f64::consts::FRAC_PI_2).contains(&beta) {
        return Err(Error::AngleOutOfRange(beta));
    }
    if beta == 0.0 {
        return Ok(w.clone());
    }
    let u = random_tangent(w, rng);
    let (s, c) = beta.sin_cos();
    Template::normalized(w.iter().zip(&u).map(|(wi, ui)| c * wi + s * ui).collect())
}

/// Uniform unit vector orthogonal to `w`.
pub fn random_tangent(w: &[f64], rng: &mut RandomStream) -> Vec<f64> {
    loop {
        let mut g = rng.gaussian_vec(w.len());
        let p = dot(&g, w);
        g.iter_mut().zip(w).for_each(|(gi, wi)| *gi -= p * wi);
        // second pass removes the rounding left by the first
        let p = dot(&g, w);
        g.iter_mut().zip(w).for_each(|(gi, wi)| *gi -= p * wi);
        let len = norm(&g);
        if len > 1e-12 {
            g.iter_mut().for_each(|x| *x /= len);
            return g;
        }
    }
}

/// Rotation by `Angle(t, c)` inside `span{t, c}` that fixes the orthogonal complement:
/// `R = I - ttᵀ - uuᵀ + (t u) R_θ (t u)ᵀ` with `u` the unit part of `c` orthogonal to `t`.
pub fn naive_rotation(t: &[f64], c: &[f64]) -> Result<RotationMatrix> {
    check_same_dim(t, c)?;
    check_unit(t)?;
    check_unit(c)?;
    let n = t.len();
    let p = dot(t, c);
    let mut u: Vec<f64> = c.iter().zip(t).map(|(ci, ti)| ci - p * ti).collect();
    let len = norm(&u);
    if len < 1e-10 {
        return Err(Error::DegeneratePlane);
    }
    u.iter_mut().for_each(|x| *x /= len);
    let theta = p.clamp(-1.0, 1.0).acos();
    let (s, cs) = theta.sin_cos();
    let m = Mat::from_fn(n, n, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        let tt = t[i] * t[j];
        let uu = u[i] * u[j];
        id - tt - uu + cs * (tt + uu) + s * (u[i] * t[j] - t[i] * u[j])
    });
    Ok(RotationMatrix::from_orthogonal(m))
}
