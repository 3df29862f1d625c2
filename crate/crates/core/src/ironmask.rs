//! Hypersphere secure sketch, fuzzy-commitment enrollment and authentication, and the two
//! hardening options: extra enrollment noise and decoy (salting) matrices.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ecc::{code_size_bits, decode, sample_codeword, CodeParams, Codeword};
use crate::error::{Error, Result};
use crate::sphere::{
    perturb_at_angle, random_rotation_mapping, random_unit, RandomStream, RotationMatrix, Template,
};

/// Public helper data of one sketch: the matrix `M` with `M w = c`.
#[derive(Clone, Debug)]
pub struct SketchRecord {
    matrix: RotationMatrix,
    params: CodeParams,
}

impl SketchRecord {
    pub fn new(matrix: RotationMatrix, params: CodeParams) -> Result<Self> {
        if matrix.dim() != params.n() {
            return Err(Error::DimensionMismatch {
                expected: params.n(),
                actual: matrix.dim(),
            });
        }
        Ok(Self { matrix, params })
    }

    pub fn matrix(&self) -> &RotationMatrix {
        &self.matrix
    }

    pub fn params(&self) -> &CodeParams {
        &self.params
    }

    pub fn n(&self) -> usize {
        self.params.n()
    }
}

/// Samples `c ← C_α` and a random orthogonal `M` with `M w = c`.
pub fn sketch(
    w: &Template,
    params: &CodeParams,
    rng: &mut RandomStream,
) -> Result<(SketchRecord, Codeword)> {
    if w.dim() != params.n() {
        return Err(Error::DimensionMismatch {
            expected: params.n(),
            actual: w.dim(),
        });
    }
    let c = sample_codeword(params, rng);
    let m = random_rotation_mapping(w, &c.dense(), rng)?;
    Ok((SketchRecord::new(m, *params)?, c))
}

/// `decode(M w')`.
pub fn recover_codeword(w_prime: &[f64], sk: &SketchRecord) -> Result<Codeword> {
    if w_prime.len() != sk.n() {
        return Err(Error::DimensionMismatch {
            expected: sk.n(),
            actual: w_prime.len(),
        });
    }
    Ok(decode(&sk.matrix.apply(w_prime), &sk.params))
}

/// `Mᵀ decode(M w')`.
pub fn recover(w_prime: &[f64], sk: &SketchRecord) -> Result<Template> {
    let c = recover_codeword(w_prime, sk)?;
    Template::normalized(sk.matrix.apply_transpose(&c.dense()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefenseParams {
    /// Angle of the extra noise applied to the template before sketching.
    pub theta_a: f64,
    /// Number of decoy matrices stored next to the true sketch.
    pub n_fake: usize,
    /// Commit to `H(c, M)` instead of `H(c)`.
    pub commit_binds_matrix: bool,
}

impl DefenseParams {
    pub const NONE: DefenseParams = DefenseParams {
        theta_a: 0.0,
        n_fake: 0,
        commit_binds_matrix: false,
    };

    pub fn validate(&self) -> Result<()> {
        if !(0.0..std::f64::consts::FRAC_PI_2).contains(&self.theta_a) {
            return Err(Error::AngleOutOfRange(self.theta_a));
        }
        Ok(())
    }
}

impl Default for DefenseParams {
    fn default() -> Self {
        Self::NONE
    }
}

/// What a server stores: the true sketch hidden among decoys, plus the commitment digest.
#[derive(Clone, Debug)]
pub struct ProtectedRecord {
    params: CodeParams,
    matrices: Vec<RotationMatrix>,
    commitment: [u8; 32],
    hash_cost: u32,
    commit_binds_matrix: bool,
}

impl ProtectedRecord {
    pub fn params(&self) -> &CodeParams {
        &self.params
    }

    pub fn matrices(&self) -> &[RotationMatrix] {
        &self.matrices
    }

    pub fn n_fake(&self) -> usize {
        self.matrices.len() - 1
    }

    pub fn commitment(&self) -> &[u8; 32] {
        &self.commitment
    }

    pub fn hash_cost(&self) -> u32 {
        self.hash_cost
    }

    pub fn commit_binds_matrix(&self) -> bool {
        self.commit_binds_matrix
    }

    /// Each stored matrix as a standalone sketch.
    pub fn sketches(&self) -> Vec<SketchRecord> {
        self.matrices
            .iter()
            .map(|m| SketchRecord {
                matrix: m.clone(),
                params: self.params,
            })
            .collect()
    }

    pub fn commitment_mut(&mut self) -> &mut [u8; 32] {
        &mut self.commitment
    }
}

/// Wire form of a codeword: per support entry, the index as big-endian `u16`, then the sign
/// byte (`0x01` for `+`, `0xFF` for `-`).
pub fn serialize_codeword(c: &Codeword) -> Vec<u8> {
    let mut out = Vec::with_capacity(3 * c.alpha());
    for (i, s) in c.entries() {
        out.extend_from_slice(&(i as u16).to_be_bytes());
        out.push(s as u8);
    }
    out
}

/// Row-major little-endian `f64` bytes.
pub fn serialize_matrix(m: &RotationMatrix) -> Vec<u8> {
    m.to_row_major()
        .iter()
        .flat_map(|x| x.to_le_bytes())
        .collect()
}

/// SHA-256 applied `cost` times (at least once) to the serialized codeword, optionally
/// followed by the serialized matrix.
pub fn commitment_digest(c: &Codeword, matrix: Option<&RotationMatrix>, cost: u32) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(serialize_codeword(c));
    if let Some(m) = matrix {
        hasher.update(serialize_matrix(m));
    }
    let mut digest: [u8; 32] = hasher.finalize().into();
    for _ in 1..cost.max(1) {
        digest = Sha256::digest(digest).into();
    }
    digest
}

/// Sketches `w` (after optional extra noise), hides the sketch among `n_fake` decoys and
/// commits to the codeword.
pub fn enroll(
    w: &Template,
    params: &CodeParams,
    defense: &DefenseParams,
    hash_cost: u32,
    rng: &mut RandomStream,
) -> Result<ProtectedRecord> {
    defense.validate()?;
    if hash_cost == 0 {
        return Err(Error::InvalidConfig("hash_cost must be positive".into()));
    }
    let enrolled = if defense.theta_a > 0.0 {
        perturb_at_angle(w, defense.theta_a, rng)?
    } else {
        w.clone()
    };
    let (sk, c) = sketch(&enrolled, params, rng)?;
    let commitment = commitment_digest(
        &c,
        defense.commit_binds_matrix.then_some(&sk.matrix),
        hash_cost,
    );
    let mut matrices = Vec::with_capacity(defense.n_fake + 1);
    matrices.push(sk.matrix);
    for _ in 0..defense.n_fake {
        let decoy_template = random_unit(params.n(), rng)?;
        let (decoy, _) = sketch(&decoy_template, params, rng)?;
        matrices.push(decoy.matrix);
    }
    matrices.shuffle(rng);
    Ok(ProtectedRecord {
        params: *params,
        matrices,
        commitment,
        hash_cost,
        commit_binds_matrix: defense.commit_binds_matrix,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AuthOutcome {
    pub accepted: bool,
    /// Record index whose recovery was closest to the query.
    pub chosen_index: usize,
    pub decode_calls: usize,
}

/// Recovers against every stored matrix, keeps the recovery closest to the query (lowest
/// index on ties) and checks its commitment.
pub fn authenticate_detailed(w_query: &[f64], record: &ProtectedRecord) -> Result<AuthOutcome> {
    let n = record.params.n();
    if w_query.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: w_query.len(),
        });
    }
    let mut best: Option<(usize, f64, Codeword)> = None;
    let mut decode_calls = 0;
    for (i, m) in record.matrices.iter().enumerate() {
        // M is an isometry, so Angle(Mᵀc', w) = Angle(c', M w)
        let v = m.apply(w_query);
        let c = decode(&v, &record.params);
        decode_calls += 1;
        let closeness: f64 = c.entries().map(|(j, s)| s as f64 * v[j]).sum();
        if best.as_ref().map_or(true, |b| closeness > b.1) {
            best = Some((i, closeness, c));
        }
    }
    let (chosen_index, _, c) = best.ok_or_else(|| Error::Format("record holds no matrices".into()))?;
    let digest = commitment_digest(
        &c,
        record
            .commit_binds_matrix
            .then_some(&record.matrices[chosen_index]),
        record.hash_cost,
    );
    Ok(AuthOutcome {
        accepted: digest == record.commitment,
        chosen_index,
        decode_calls,
    })
}

pub fn authenticate(w_query: &[f64], record: &ProtectedRecord) -> Result<bool> {
    Ok(authenticate_detailed(w_query, record)?.accepted)
}

/// Brute-force search space in bits: `log₂ |C_α| + log₂(n_fake + 1)`.
pub fn defense_security_bits(params: &CodeParams, defense: &DefenseParams) -> f64 {
    code_size_bits(params) + ((defense.n_fake + 1) as f64).log2()
}

#[derive(Debug, Serialize, Deserialize)]
struct RecordHeader {
    n: usize,
    alpha: usize,
    n_fake: usize,
    hash_cost: u32,
    commit_binds_matrix: bool,
    commitment_hex: String,
}

/// Path of the binary matrix file that accompanies a JSON record header.
pub fn sidecar_path(header: &Path) -> PathBuf {
    header.with_extension("bin")
}

impl ProtectedRecord {
    /// Writes the JSON header to `header` and the matrices to its `.bin` sidecar.
    pub fn save(&self, header: &Path) -> Result<()> {
        let h = RecordHeader {
            n: self.params.n(),
            alpha: self.params.alpha(),
            n_fake: self.n_fake(),
            hash_cost: self.hash_cost,
            commit_binds_matrix: self.commit_binds_matrix,
            commitment_hex: hex::encode(self.commitment),
        };
        fs::write(header, serde_json::to_vec_pretty(&h)?)?;
        let mut blob = Vec::with_capacity(self.matrices.len() * self.params.n().pow(2) * 8);
        for m in &self.matrices {
            blob.extend(serialize_matrix(m));
        }
        fs::write(sidecar_path(header), blob)?;
        Ok(())
    }

    pub fn load(header: &Path) -> Result<Self> {
        let h: RecordHeader = serde_json::from_slice(&fs::read(header)?)?;
        let params = CodeParams::new(h.n, h.alpha)?;
        let commitment: [u8; 32] = hex::decode(&h.commitment_hex)
            .map_err(|e| Error::Format(format!("commitment_hex: {e}")))?
            .try_into()
            .map_err(|_| Error::Format("commitment must be 32 bytes".into()))?;
        let blob = fs::read(sidecar_path(header))?;
        let per = h.n * h.n * 8;
        let count = h.n_fake + 1;
        if blob.len() != per * count {
            return Err(Error::Format(format!(
                "sidecar holds {} bytes, expected {} for {count} matrices",
                blob.len(),
                per * count
            )));
        }
        let matrices = blob
            .chunks_exact(per)
            .map(|chunk| {
                let entries: Vec<f64> = chunk
                    .chunks_exact(8)
                    .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
                    .collect();
                RotationMatrix::from_row_major(h.n, &entries)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            params,
            matrices,
            commitment,
            hash_cost: h.hash_cost,
            commit_binds_matrix: h.commit_binds_matrix,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ecc::design_distance;
    use crate::sphere::angle;

    fn setup(n: usize, alpha: usize, seed: u64) -> (CodeParams, Template, RandomStream) {
        let mut rng = RandomStream::new(seed, 0);
        let params = CodeParams::new(n, alpha).unwrap();
        let w = random_unit(n, &mut rng).unwrap();
        (params, w, rng)
    }

    #[test]
    fn sketch_maps_template_to_codeword() {
        let (params, w, mut rng) = setup(64, 4, 1);
        let (sk, c) = sketch(&w, &params, &mut rng).unwrap();
        assert_eq!(decode(&sk.matrix().apply(&w), &params), c);
        let mw = sk.matrix().apply(&w);
        let err: f64 = mw.iter().zip(c.dense()).map(|(a, b)| (a - b).powi(2)).sum();
        assert!(err.sqrt() <= 1e-8);
    }

    #[test]
    fn exactly_n_minus_alpha_rows_are_orthogonal_to_template() {
        let (params, w, mut rng) = setup(512, 16, 2);
        let (sk, _) = sketch(&w, &params, &mut rng).unwrap();
        let mw = sk.matrix().apply(&w);
        assert_eq!(mw.iter().filter(|x| x.abs() <= 1e-8).count(), 512 - 16);
    }

    #[test]
    fn distinct_streams_give_distinct_sketches() {
        let (params, w, _) = setup(32, 4, 3);
        let (a, ca) = sketch(&w, &params, &mut RandomStream::new(3, 10)).unwrap();
        let (b, cb) = sketch(&w, &params, &mut RandomStream::new(3, 11)).unwrap();
        assert_ne!(ca, cb);
        assert_ne!(a.matrix().to_row_major(), b.matrix().to_row_major());
    }

    #[test]
    fn recover_is_exact_without_noise_and_within_half_distance() {
        let (params, w, mut rng) = setup(64, 4, 4);
        let (sk, _) = sketch(&w, &params, &mut rng).unwrap();
        let back = recover(&w, &sk).unwrap();
        assert!(back.iter().zip(w.iter()).all(|(a, b)| (a - b).abs() < 1e-8));
        let beta = 0.99 * design_distance(&params) / 2.0;
        for _ in 0..100 {
            let noisy = perturb_at_angle(&w, beta, &mut rng).unwrap();
            let back = recover(&noisy, &sk).unwrap();
            assert!(angle(&back, &w).unwrap() < 1e-6);
        }
    }

    #[test]
    fn base_scheme_authenticates() {
        let (params, w, mut rng) = setup(64, 4, 5);
        let rec = enroll(&w, &params, &DefenseParams::NONE, 3, &mut rng).unwrap();
        assert_eq!(rec.matrices().len(), 1);
        assert!(authenticate(&w, &rec).unwrap());
    }

    #[test]
    fn decoys_do_not_block_the_true_sketch() {
        let (params, w, mut rng) = setup(64, 4, 6);
        let defense = DefenseParams {
            n_fake: 3,
            ..DefenseParams::NONE
        };
        let rec = enroll(&w, &params, &defense, 1, &mut rng).unwrap();
        assert_eq!(rec.matrices().len(), 4);
        let out = authenticate_detailed(&w, &rec).unwrap();
        assert!(out.accepted);
        assert_eq!(out.decode_calls, 4);
    }

    #[test]
    fn bound_commitment_authenticates_and_differs() {
        let (params, w, mut rng) = setup(32, 4, 7);
        let defense = DefenseParams {
            n_fake: 2,
            commit_binds_matrix: true,
            ..DefenseParams::NONE
        };
        let rec = enroll(&w, &params, &defense, 2, &mut rng).unwrap();
        assert!(authenticate(&w, &rec).unwrap());
        assert!(rec.commit_binds_matrix());
    }

    #[test]
    fn tampered_commitment_fails() {
        let (params, w, mut rng) = setup(32, 4, 8);
        let mut rec = enroll(&w, &params, &DefenseParams::NONE, 1, &mut rng).unwrap();
        rec.commitment_mut()[5] ^= 0x01;
        assert!(!authenticate(&w, &rec).unwrap());
    }

    #[test]
    fn codeword_wire_format() {
        let c = Codeword::new(512, vec![(300, -1), (2, 1)]).unwrap();
        assert_eq!(serialize_codeword(&c), vec![0x00, 0x02, 0x01, 0x01, 0x2c, 0xff]);
    }

    #[test]
    fn hash_cost_changes_digest() {
        let c = Codeword::new(8, vec![(1, 1)]).unwrap();
        let once = commitment_digest(&c, None, 1);
        let twice = commitment_digest(&c, None, 2);
        assert_ne!(once, twice);
        let expected: [u8; 32] = Sha256::digest(once).into();
        assert_eq!(twice, expected);
    }

    #[test]
    fn security_bits() {
        let p5 = CodeParams::new(512, 5).unwrap();
        let salted = DefenseParams {
            n_fake: 1 << 20,
            ..DefenseParams::NONE
        };
        assert!((defense_security_bits(&p5, &salted) - 63.0).abs() < 0.5);
        let p16 = CodeParams::new(512, 16).unwrap();
        assert_eq!(
            defense_security_bits(&p16, &DefenseParams::NONE),
            code_size_bits(&p16)
        );
        let p6 = CodeParams::new(512, 6).unwrap();
        assert!(defense_security_bits(&p6, &DefenseParams::NONE) <= 50.46 + 0.01);
    }

    #[test]
    fn invalid_defense_rejected() {
        let (params, w, mut rng) = setup(16, 2, 9);
        let defense = DefenseParams {
            theta_a: 2.0,
            ..DefenseParams::NONE
        };
        assert!(enroll(&w, &params, &defense, 1, &mut rng).is_err());
        assert!(enroll(&w, &params, &DefenseParams::NONE, 0, &mut rng).is_err());
    }

    #[test]
    fn record_file_round_trip() {
        let (params, w, mut rng) = setup(16, 2, 10);
        let defense = DefenseParams {
            n_fake: 2,
            ..DefenseParams::NONE
        };
        let rec = enroll(&w, &params, &defense, 4, &mut rng).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rec.json");
        rec.save(&path).unwrap();
        let header: serde_json::Value =
            serde_json::from_slice(&std::fs::read(&path).unwrap()).unwrap();
        for key in ["n", "alpha", "n_fake", "hash_cost", "commit_binds_matrix", "commitment_hex"] {
            assert!(header.get(key).is_some(), "missing {key}");
        }
        assert_eq!(
            std::fs::metadata(sidecar_path(&path)).unwrap().len(),
            3 * 16 * 16 * 8
        );
        let back = ProtectedRecord::load(&path).unwrap();
        assert_eq!(back.commitment(), rec.commitment());
        assert_eq!(back.n_fake(), 2);
        assert!(authenticate(&w, &back).unwrap());
    }

    #[test]
    fn truncated_sidecar_is_rejected() {
        let (params, w, mut rng) = setup(8, 2, 11);
        let rec = enroll(&w, &params, &DefenseParams::NONE, 1, &mut rng).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rec.json");
        rec.save(&path).unwrap();
        let side = sidecar_path(&path);
        let mut bytes = std::fs::read(&side).unwrap();
        bytes.truncate(bytes.len() - 8);
        std::fs::write(&side, bytes).unwrap();
        assert!(matches!(ProtectedRecord::load(&path), Err(Error::Format(_))));
    }
}
