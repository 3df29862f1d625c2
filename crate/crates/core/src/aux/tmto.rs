//! Time-memory trade-off: splits `√2·c₁ = a + b` over half-weight codewords and matches
//! `t_a = t_{−b}` on rows of `M₂M₁ᵀ` that are zero in `c₂`.

use std::collections::{BTreeSet, HashMap};

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::ecc::{all_codewords, code_size_bits, log2_binomial, CodeParams, Codeword};
use crate::error::{Error, Result};
use crate::ironmask::SketchRecord;
use crate::sphere::{RandomStream, RotationMatrix};

/// Largest half-weight table built in memory.
pub const MAX_TABLE_ENTRIES: u128 = 100_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TmtoConfig {
    /// Rows used for the table keys.
    pub m_rows: usize,
    /// Quantization width of the key values.
    pub bucket: f64,
    /// Fresh row draws tried while no candidate survives.
    pub max_rounds: usize,
}

impl Default for TmtoConfig {
    fn default() -> Self {
        Self {
            m_rows: 4,
            bucket: 2f64.powi(-20),
            max_rounds: 8,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TmtoOutcome {
    /// Verified codewords `c₁`, deduplicated, both global signs possible.
    pub candidates: Vec<Codeword>,
    /// Key collisions on disjoint supports, summed over rounds.
    pub collisions: u64,
    pub rounds: usize,
    /// Rows keyed in the final round.
    pub chosen_rows: Vec<usize>,
}

/// Half-weight codewords with their projections on the chosen rows.
pub struct TmtoTable {
    halves: Vec<Codeword>,
    /// `values[e * m + r]` is `t` of entry `e` on chosen row `r`.
    values: Vec<f64>,
    chosen_rows: Vec<usize>,
    bucket: f64,
    index: HashMap<i64, Vec<u32>>,
}

impl TmtoTable {
    pub fn build(relative: &RotationMatrix, half: &CodeParams, chosen_rows: Vec<usize>, bucket: f64) -> Self {
        let halves = all_codewords(half);
        let m = chosen_rows.len();
        let rel = relative.as_mat();
        let mut values = Vec::with_capacity(halves.len() * m);
        let mut index: HashMap<i64, Vec<u32>> = HashMap::new();
        let mag = half.magnitude();
        for (e, a) in halves.iter().enumerate() {
            for &i in &chosen_rows {
                values.push(a.entries().map(|(j, s)| s as f64 * mag * rel[(i, j)]).sum());
            }
            index.entry(key(values[e * m], bucket)).or_default().push(e as u32);
        }
        Self {
            halves,
            values,
            chosen_rows,
            bucket,
            index,
        }
    }

    pub fn len(&self) -> usize {
        self.halves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.halves.is_empty()
    }

    pub fn chosen_rows(&self) -> &[usize] {
        &self.chosen_rows
    }

    fn keys_close(&self, e: usize, f: usize) -> bool {
        let m = self.chosen_rows.len();
        (1..m).all(|r| {
            (key(self.values[e * m + r], self.bucket) - key(self.values[f * m + r], self.bucket)).abs() <= 1
        })
    }

    /// Unordered pairs `(e, f)` whose keys agree up to one bucket on every chosen row.
    fn colliding_pairs(&self) -> Vec<(usize, usize)> {
        let m = self.chosen_rows.len();
        let mut out = Vec::new();
        for e in 0..self.halves.len() {
            let k0 = key(self.values[e * m], self.bucket);
            for probe in k0 - 1..=k0 + 1 {
                let Some(bucket) = self.index.get(&probe) else { continue };
                for &f in bucket {
                    let f = f as usize;
                    if f > e && self.keys_close(e, f) {
                        out.push((e, f));
                    }
                }
            }
        }
        out
    }
}

fn key(t: f64, bucket: f64) -> i64 {
    (t / bucket).floor() as i64
}

fn disjoint(a: &Codeword, b: &Codeword) -> bool {
    a.support().iter().all(|&i| b.is_zero_at(i))
}

/// `(a − b)/√2` as a weight-α codeword.
fn combine(a: &Codeword, b: &Codeword) -> Codeword {
    let entries = a.entries().chain(b.entries().map(|(i, s)| (i, -s))).collect();
    Codeword::new(a.n(), entries).expect("disjoint halves combine")
}

/// `M c` lies on the code's support pattern: exactly α rows at `±√2/√α` (in the `a − b`
/// scaling) and the rest at zero.
fn verify(relative: &RotationMatrix, a: &Codeword, b: &Codeword, half_mag: f64, params: &CodeParams, tol: f64) -> bool {
    let n = params.n();
    let rel = relative.as_mat();
    let target = std::f64::consts::SQRT_2 * params.magnitude();
    let mut nonzero = 0;
    for i in 0..n {
        let t: f64 = a
            .entries()
            .map(|(j, s)| s as f64 * rel[(i, j)])
            .chain(b.entries().map(|(j, s)| -(s as f64) * rel[(i, j)]))
            .sum::<f64>()
            * half_mag;
        if t.abs() <= tol {
            continue;
        }
        if (t.abs() - target).abs() > tol {
            return false;
        }
        nonzero += 1;
        if nonzero > params.alpha() {
            return false;
        }
    }
    nonzero == params.alpha()
}

/// Number of half-weight table entries, `2^{α/2}·C(n, α/2)`, if it fits in `u128`.
fn half_table_entries(n: usize, half: usize) -> u128 {
    let mut c: u128 = 1;
    for i in 0..half {
        c = c.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    c.saturating_mul(1u128 << half)
}

pub fn tmto_attack(
    m1: &SketchRecord,
    m2: &SketchRecord,
    config: &TmtoConfig,
    rng: &mut RandomStream,
) -> Result<TmtoOutcome> {
    let params = *m1.params();
    if m2.params() != &params {
        return Err(Error::MixedParameters);
    }
    let (n, alpha) = (params.n(), params.alpha());
    if alpha % 2 != 0 {
        return Err(Error::InvalidConfig(format!("alpha must be even, got {alpha}")));
    }
    if config.m_rows == 0 || config.m_rows > n || !(config.bucket > 0.0) {
        return Err(Error::InvalidConfig(format!("invalid TMTO configuration {config:?}")));
    }
    let entries = half_table_entries(n, alpha / 2);
    if entries > MAX_TABLE_ENTRIES {
        return Err(Error::ScaleGuard {
            entries,
            limit: MAX_TABLE_ENTRIES,
        });
    }
    let half = CodeParams::new(n, alpha / 2)?;
    let relative = m2.matrix().compose_inverse(m1.matrix());
    let tol = 10.0 * config.bucket;

    let mut found = BTreeSet::new();
    let mut collisions = 0;
    let mut rounds = 0;
    let mut chosen_rows = Vec::new();
    while rounds < config.max_rounds.max(1) && found.is_empty() {
        rounds += 1;
        let rows = index::sample(rng, n, config.m_rows).into_vec();
        let table = TmtoTable::build(&relative, &half, rows, config.bucket);
        for (e, f) in table.colliding_pairs() {
            let (a, b) = (&table.halves[e], &table.halves[f]);
            if !disjoint(a, b) {
                continue;
            }
            collisions += 1;
            if verify(&relative, a, b, half.magnitude(), &params, tol) {
                found.insert(combine(a, b));
            }
        }
        chosen_rows = table.chosen_rows;
    }
    Ok(TmtoOutcome {
        candidates: found.into_iter().collect(),
        collisions,
        rounds,
        chosen_rows,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TmtoCost {
    /// Stored entries after the `√C(α, α/2)` discount, `log₂`.
    pub entries_log2: f64,
    pub storage_bytes: f64,
    pub additions_log2: f64,
    pub num_rows_m: usize,
}

/// Full-scale cost. Each entry stores `α/2` indices of `⌈log₂ n⌉` bits and `m` key values of
/// `value_bits` bits.
pub fn tmto_cost(n: usize, alpha: usize, num_rows_m: usize, value_bits: u32) -> Result<TmtoCost> {
    if alpha % 2 != 0 || alpha == 0 || alpha > n {
        return Err(Error::InvalidCode { n, alpha });
    }
    let half = CodeParams::new(n, alpha / 2)?;
    let discount = 0.5 * log2_binomial(alpha, alpha / 2);
    let half_bits = code_size_bits(&half);
    let entries_log2 = half_bits - discount;
    let index_bits = (n as f64).log2().ceil();
    let entry_bytes = (alpha / 2) as f64 * index_bits / 8.0 + num_rows_m as f64 * value_bits as f64 / 8.0;
    let storage_bytes = entries_log2.exp2() * entry_bytes;
    let growth = n as f64 / (n - alpha) as f64;
    let additions_log2 = ((alpha / 2) as f64).log2() + half_bits + (num_rows_m as f64).log2()
        + num_rows_m as f64 * growth.log2()
        - discount;
    Ok(TmtoCost {
        entries_log2,
        storage_bytes,
        additions_log2,
        num_rows_m,
    })
}
