//! ε-LDP privatization mechanisms over a finite input alphabet `{1..k}`.
//!
//! A [`Mechanism`] stores the conditional law `Q(y|x)` row by row: row `y`
//! holds `(Q(y|1), …, Q(y|k))`. Three constructions are provided:
//!
//! - [`subset_mechanism`]: outputs a weight-`d` indicator vector, boosting the
//!   subsets that contain the true symbol by `e^ε`;
//! - [`krr_mechanism`]: k-ary randomized response;
//! - [`krappor_mechanism`]: one-hot encoding with independent bit flips.
//!
//! [`reduce_alphabet`] merges outputs with proportional rows into equivalence
//! classes. Proportional outputs carry the same likelihood ratio between any
//! pair of inputs, so nothing estimation-relevant is lost.

use crate::error::{Error, Result};
use crate::numeric::binomial;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Column sums must equal one within this absolute tolerance.
pub const COLUMN_SUM_TOL: f64 = 1e-10;
/// Relative slack on `e^ε` when checking likelihood ratios.
pub const LDP_RATIO_SLACK: f64 = 1e-9;
/// Relative tolerance when deciding two normalized rows are equal.
pub const PROPORTIONAL_TOL: f64 = 1e-9;
/// Largest `k` accepted by [`subset_mechanism`].
pub const MAX_SUBSET_K: usize = 30;
/// Largest number of explicit output rows [`subset_mechanism`] will build.
pub const MAX_SUBSET_OUTPUTS: u128 = 1 << 21;
/// Largest `k` accepted by [`krappor_mechanism`] (2^k explicit outputs).
pub const MAX_RAPPOR_K: usize = 12;

const DIST_SUM_TOL: f64 = 1e-12;

/// A point of the probability simplex Δ_k.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution(
                "empty probability vector".into(),
            ));
        }
        if let Some((i, p)) = probs
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || **p < 0.0)
        {
            return Err(Error::InvalidDistribution(format!(
                "entry {i} is {p}; probabilities must be finite and non-negative"
            )));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > DIST_SUM_TOL {
            return Err(Error::InvalidDistribution(format!(
                "entries sum to {sum}, not 1"
            )));
        }
        Ok(Self { probs })
    }

    pub fn uniform(k: usize) -> Self {
        Self {
            probs: vec![1.0 / k as f64; k],
        }
    }

    pub fn point_mass(k: usize, j: usize) -> Self {
        let mut probs = vec![0.0; k];
        probs[j] = 1.0;
        Self { probs }
    }

    pub fn k(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn sum_of_squares(&self) -> f64 {
        self.probs.iter().map(|p| p * p).sum()
    }
}

impl<'de> Deserialize<'de> for Distribution {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let probs = Vec::<f64>::deserialize(de)?;
        Distribution::new(probs).map_err(serde::de::Error::custom)
    }
}

/// Which construction produced a mechanism.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MechanismLabel {
    Subset { d: usize },
    Krr,
    Rappor,
    Custom,
}

impl fmt::Display for MechanismLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MechanismLabel::Subset { d } => write!(f, "subset-d{d}"),
            MechanismLabel::Krr => f.write_str("krr"),
            MechanismLabel::Rappor => f.write_str("rappor"),
            MechanismLabel::Custom => f.write_str("custom"),
        }
    }
}

impl FromStr for MechanismLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "krr" | "rr" => Ok(MechanismLabel::Krr),
            "rappor" => Ok(MechanismLabel::Rappor),
            "custom" => Ok(MechanismLabel::Custom),
            other => other
                .strip_prefix("subset-d")
                .and_then(|d| d.parse().ok())
                .map(|d| MechanismLabel::Subset { d })
                .ok_or_else(|| Error::MalformedMechanism(format!("unknown label {other:?}"))),
        }
    }
}

/// Serialized form: `{k, epsilon, label, outputs: [[Q(y|1..k)] per y]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct MechanismRecord {
    k: usize,
    epsilon: f64,
    label: String,
    outputs: Vec<Vec<f64>>,
}

/// A conditional distribution `Q(y|x)` over a finite output alphabet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MechanismRecord", into = "MechanismRecord")]
pub struct Mechanism {
    k: usize,
    epsilon: f64,
    label: MechanismLabel,
    rows: Vec<Vec<f64>>,
}

impl TryFrom<MechanismRecord> for Mechanism {
    type Error = Error;
    fn try_from(r: MechanismRecord) -> Result<Self> {
        Mechanism::new(r.k, r.epsilon, r.label.parse()?, r.outputs)
    }
}

impl From<Mechanism> for MechanismRecord {
    fn from(m: Mechanism) -> Self {
        MechanismRecord {
            k: m.k,
            epsilon: m.epsilon,
            label: m.label.to_string(),
            outputs: m.rows,
        }
    }
}

impl Mechanism {
    /// Builds a mechanism from explicit rows, checking shape, non-negativity and
    /// that every input column sums to one.
    pub fn new(k: usize, epsilon: f64, label: MechanismLabel, rows: Vec<Vec<f64>>) -> Result<Self> {
        if k < 2 {
            return Err(Error::MalformedMechanism(format!("k={k}; need k >= 2")));
        }
        if !(epsilon.is_finite() && epsilon >= 0.0) {
            return Err(Error::MalformedMechanism(format!(
                "epsilon={epsilon} must be finite and >= 0"
            )));
        }
        if rows.is_empty() {
            return Err(Error::MalformedMechanism("no output rows".into()));
        }
        for (y, row) in rows.iter().enumerate() {
            if row.len() != k {
                return Err(Error::MalformedMechanism(format!(
                    "row {y} has {} entries, expected {k}",
                    row.len()
                )));
            }
            if row.iter().any(|q| !q.is_finite() || *q < 0.0) {
                return Err(Error::MalformedMechanism(format!(
                    "row {y} has a negative or non-finite entry"
                )));
            }
        }
        for x in 0..k {
            let s: f64 = crate::numeric::compensated_sum(rows.iter().map(|r| r[x]));
            if (s - 1.0).abs() > COLUMN_SUM_TOL {
                return Err(Error::MalformedMechanism(format!(
                    "column for input {x} sums to {s}"
                )));
            }
        }
        Ok(Self {
            k,
            epsilon,
            label,
            rows,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn label(&self) -> MechanismLabel {
        self.label
    }

    pub fn num_outputs(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn prob(&self, y: usize, x: usize) -> f64 {
        self.rows[y][x]
    }

    /// Subset size `d` when this is a subset-selection mechanism.
    pub fn subset_size(&self) -> Option<usize> {
        match self.label {
            MechanismLabel::Subset { d } => Some(d),
            _ => None,
        }
    }

    /// Indicator vectors labelling each output, for subset and RAPPOR mechanisms.
    pub fn output_bits(&self) -> Option<Vec<Vec<bool>>> {
        match self.label {
            MechanismLabel::Subset { d } => Some(subset_outputs(self.k, d)),
            MechanismLabel::Rappor => Some(rappor_outputs(self.k)),
            _ => None,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

fn check_epsilon(epsilon: f64, allow_zero: bool) -> Result<()> {
    let ok = epsilon.is_finite() && (epsilon > 0.0 || (allow_zero && epsilon == 0.0));
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "epsilon={epsilon} must be finite and {}",
            if allow_zero { ">= 0" } else { "> 0" }
        )))
    }
}

/// All weight-`d` indicator vectors of length `k`, ordered lexicographically by
/// their selected index sets: `{1}, {2}, …` for `d = 1`, i.e. `100, 010, 001`.
pub fn subset_outputs(k: usize, d: usize) -> Vec<Vec<bool>> {
    let mut out = Vec::new();
    if d == 0 || d > k {
        return out;
    }
    let mut idx: Vec<usize> = (0..d).collect();
    loop {
        let mut bits = vec![false; k];
        for &i in &idx {
            bits[i] = true;
        }
        out.push(bits);
        // advance to the next combination
        let mut pos = d;
        while pos > 0 {
            pos -= 1;
            if idx[pos] != pos + k - d {
                idx[pos] += 1;
                for j in pos + 1..d {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
            if pos == 0 {
                return out;
            }
        }
    }
}

fn rappor_outputs(k: usize) -> Vec<Vec<bool>> {
    (0..1usize << k)
        .map(|b| (0..k).map(|i| (b >> (k - 1 - i)) & 1 == 1).collect())
        .collect()
}

/// Subset-selection mechanism `Q_{k,ε,d}`.
pub fn subset_mechanism(k: usize, epsilon: f64, d: usize) -> Result<Mechanism> {
    if k < 2 || d < 1 || d >= k {
        return Err(Error::DOutOfRange { k, d });
    }
    check_epsilon(epsilon, false)?;
    if k > MAX_SUBSET_K {
        return Err(Error::AlphabetTooLarge {
            what: "subset mechanism input size",
            k,
            max: MAX_SUBSET_K,
        });
    }
    let count = binomial(k as u64, d as u64).unwrap_or(u128::MAX);
    if count > MAX_SUBSET_OUTPUTS {
        return Err(Error::AlphabetTooLarge {
            what: "subset mechanism output count C(k,d)",
            k,
            max: MAX_SUBSET_OUTPUTS as usize,
        });
    }
    let e = epsilon.exp();
    let c_hi = binomial(k as u64 - 1, d as u64 - 1).unwrap() as f64;
    let c_lo = binomial(k as u64 - 1, d as u64).unwrap() as f64;
    let norm = c_hi * e + c_lo;
    let rows = subset_outputs(k, d)
        .into_iter()
        .map(|bits| {
            bits.iter()
                .map(|&b| if b { e / norm } else { 1.0 / norm })
                .collect()
        })
        .collect();
    Mechanism::new(k, epsilon, MechanismLabel::Subset { d }, rows)
}

/// k-ary randomized response.
pub fn krr_mechanism(k: usize, epsilon: f64) -> Result<Mechanism> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("k={k}; need k >= 2")));
    }
    check_epsilon(epsilon, false)?;
    let e = epsilon.exp();
    let denom = e + k as f64 - 1.0;
    let rows = (0..k)
        .map(|y| {
            (0..k)
                .map(|x| if x == y { e / denom } else { 1.0 / denom })
                .collect()
        })
        .collect();
    Mechanism::new(k, epsilon, MechanismLabel::Krr, rows)
}

/// Bit-flip probability used by [`krappor_mechanism`].
pub fn rappor_flip_probability(epsilon: f64) -> f64 {
    1.0 / (1.0 + (epsilon / 2.0).exp())
}

/// k-RAPPOR: one-hot encode the input and flip each of the `k` bits
/// independently with probability `1 / (1 + e^{ε/2})`.
pub fn krappor_mechanism(k: usize, epsilon: f64) -> Result<Mechanism> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("k={k}; need k >= 2")));
    }
    check_epsilon(epsilon, true)?;
    if k > MAX_RAPPOR_K {
        return Err(Error::AlphabetTooLarge {
            what: "RAPPOR output alphabet 2^k",
            k,
            max: MAX_RAPPOR_K,
        });
    }
    let flip = rappor_flip_probability(epsilon);
    let keep = 1.0 - flip;
    let rows = rappor_outputs(k)
        .into_iter()
        .map(|bits| {
            (0..k)
                .map(|x| {
                    bits.iter()
                        .enumerate()
                        .map(|(i, &b)| if b == (i == x) { keep } else { flip })
                        .product()
                })
                .collect()
        })
        .collect();
    Mechanism::new(k, epsilon, MechanismLabel::Rappor, rows)
}

/// A random extremal ε-LDP mechanism with `2 * pairs` outputs.
///
/// Outputs come in complementary pairs: a random pattern over `{1, e^ε}` and its
/// flip, with a shared random weight. Every column of a pair sums to
/// `weight * (1 + e^ε)`, so the columns are balanced by construction.
pub fn random_extremal_mechanism<R: Rng>(
    k: usize,
    epsilon: f64,
    pairs: usize,
    rng: &mut R,
) -> Result<Mechanism> {
    check_epsilon(epsilon, false)?;
    if k < 2 || pairs == 0 {
        return Err(Error::InvalidParameter(format!(
            "need k >= 2 and pairs >= 1 (k={k}, pairs={pairs})"
        )));
    }
    let e = epsilon.exp();
    let weights: Vec<f64> = (0..pairs).map(|_| rng.random_range(0.1..1.0)).collect();
    let total: f64 = weights.iter().sum::<f64>() * (1.0 + e);
    let mut rows = Vec::with_capacity(2 * pairs);
    for w in weights {
        let c = w / total;
        let bits: Vec<bool> = (0..k).map(|_| rng.random_bool(0.5)).collect();
        rows.push(bits.iter().map(|&b| if b { c * e } else { c }).collect());
        rows.push(bits.iter().map(|&b| if b { c } else { c * e }).collect());
    }
    Mechanism::new(k, epsilon, MechanismLabel::Custom, rows)
}

/// Outcome of [`verify_ldp`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LdpReport {
    pub ok: bool,
    pub worst_ratio: f64,
    pub extremal: bool,
    /// Outputs with zero probability under every input; skipped, not fatal.
    pub zero_rows: Vec<usize>,
}

/// Checks the ε-LDP likelihood-ratio bound and extremality of every output row.
pub fn verify_ldp(m: &Mechanism, epsilon: f64) -> LdpReport {
    let e = epsilon.exp();
    let mut worst = 1.0_f64;
    let mut extremal = true;
    let mut zero_rows = Vec::new();
    for (y, row) in m.rows().iter().enumerate() {
        let max = row.iter().copied().fold(0.0, f64::max);
        if max == 0.0 {
            zero_rows.push(y);
            continue;
        }
        let min = row.iter().copied().fold(f64::INFINITY, f64::min);
        if min == 0.0 {
            worst = f64::INFINITY;
            extremal = false;
            continue;
        }
        worst = worst.max(max / min);
        if extremal {
            extremal = row.iter().all(|&q| {
                let r = q / min;
                (r - 1.0).abs() <= PROPORTIONAL_TOL || (r - e).abs() <= PROPORTIONAL_TOL * e
            });
        }
    }
    LdpReport {
        ok: worst <= e * (1.0 + LDP_RATIO_SLACK),
        worst_ratio: worst,
        extremal,
        zero_rows,
    }
}

/// A mechanism with proportional outputs merged into equivalence classes
/// `A_1, …, A_L`: `q_cond[i][j] = Q(A_i | j)` and `q_bar[i] = (1/k) Σ_j q_cond[i][j]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReducedMechanism {
    k: usize,
    q_cond: Vec<Vec<f64>>,
    q_bar: Vec<f64>,
    class_map: Vec<Option<usize>>,
}

impl ReducedMechanism {
    /// Wraps class rows directly (each row one class), validating stochasticity.
    pub fn from_classes(k: usize, q_cond: Vec<Vec<f64>>) -> Result<Self> {
        let m = Mechanism::new(k, 0.0, MechanismLabel::Custom, q_cond)?;
        let q_cond = m.rows;
        let q_bar: Vec<f64> = q_cond
            .iter()
            .map(|r| r.iter().sum::<f64>() / k as f64)
            .collect();
        if let Some(i) = q_bar.iter().position(|&q| q <= 0.0) {
            return Err(Error::ZeroClassMass(i));
        }
        let class_map = (0..q_cond.len()).map(Some).collect();
        Ok(Self {
            k,
            q_cond,
            q_bar,
            class_map,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of classes `L`.
    pub fn num_classes(&self) -> usize {
        self.q_cond.len()
    }

    pub fn q_cond(&self) -> &[Vec<f64>] {
        &self.q_cond
    }

    pub fn q_bar(&self) -> &[f64] {
        &self.q_bar
    }

    /// Class of each original output symbol; `None` for dropped zero rows.
    pub fn class_map(&self) -> &[Option<usize>] {
        &self.class_map
    }

    /// Re-embeds the classes as an ordinary mechanism, one output per class.
    pub fn to_mechanism(&self, epsilon: f64) -> Result<Mechanism> {
        Mechanism::new(self.k, epsilon, MechanismLabel::Custom, self.q_cond.clone())
    }
}

fn rows_match(a: &[f64], b: &[f64]) -> bool {
    a.iter()
        .zip(b)
        .all(|(x, y)| (x - y).abs() <= PROPORTIONAL_TOL * x.abs().max(y.abs()))
}

/// Merges outputs whose normalized rows agree within relative `1e-9`. Classes
/// are numbered by first appearance; all-zero rows are dropped.
pub fn reduce_alphabet(m: &Mechanism) -> ReducedMechanism {
    let k = m.k();
    let rows = m.rows();
    let normalized: Vec<Option<Vec<f64>>> = rows
        .iter()
        .map(|r| {
            let s: f64 = r.iter().sum();
            (s > 0.0).then(|| r.iter().map(|q| q / s).collect())
        })
        .collect();

    // Sweep rows in lexicographic order; a match can only sit among groups whose
    // leading entry is within tolerance of the current row's.
    let mut order: Vec<usize> = (0..rows.len())
        .filter(|&y| normalized[y].is_some())
        .collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (
            normalized[a].as_ref().unwrap(),
            normalized[b].as_ref().unwrap(),
        );
        ra.iter()
            .zip(rb)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut group_rep: Vec<usize> = Vec::new();
    let mut group_of = vec![usize::MAX; rows.len()];
    for &y in &order {
        let row = normalized[y].as_ref().unwrap();
        let mut found = None;
        for g in (0..group_rep.len()).rev() {
            let rep = normalized[group_rep[g]].as_ref().unwrap();
            if row[0] - rep[0] > PROPORTIONAL_TOL * row[0].abs().max(rep[0].abs()) {
                break;
            }
            if rows_match(row, rep) {
                found = Some(g);
                break;
            }
        }
        group_of[y] = match found {
            Some(g) => g,
            None => {
                group_rep.push(y);
                group_rep.len() - 1
            }
        };
    }

    // renumber groups by first appearance in the original output order
    let mut class_of_group = vec![usize::MAX; group_rep.len()];
    let mut next = 0;
    let mut class_map = vec![None; rows.len()];
    let mut q_cond: Vec<Vec<f64>> = Vec::new();
    for y in 0..rows.len() {
        let g = group_of[y];
        if g == usize::MAX {
            continue;
        }
        if class_of_group[g] == usize::MAX {
            class_of_group[g] = next;
            next += 1;
            q_cond.push(vec![0.0; k]);
        }
        let c = class_of_group[g];
        class_map[y] = Some(c);
        for (acc, q) in q_cond[c].iter_mut().zip(&rows[y]) {
            *acc += q;
        }
    }
    let q_bar = q_cond
        .iter()
        .map(|r| r.iter().sum::<f64>() / k as f64)
        .collect();
    ReducedMechanism {
        k,
        q_cond,
        q_bar,
        class_map,
    }
}

/// Output law `m_i = Σ_j p_j q_{ij}` over the reduced alphabet.
pub fn marginal(m: &ReducedMechanism, p: &Distribution) -> Result<Vec<f64>> {
    if p.k() != m.k() {
        return Err(Error::DimensionMismatch {
            expected: m.k(),
            got: p.k(),
        });
    }
    Ok(m.q_cond()
        .iter()
        .map(|row| row.iter().zip(p.probs()).map(|(q, pj)| q * pj).sum())
        .collect())
}
