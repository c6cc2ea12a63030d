//! Privatized sampling and distribution estimators.
//!
//! Sampling draws `X ~ p` by inverse CDF and then `Y | X` from a per-input alias
//! table, so each draw is O(log k). Every call takes an explicit seed and a
//! stream index; a trial's counts depend only on `(seed, stream)`.

use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigen, Cholesky, Matrix};
use crate::mechanisms::{Distribution, Mechanism, ReducedMechanism};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Independent generator for `(seed, stream)`. Streams of a ChaCha generator
/// never overlap, so trial `i` uses stream `i`.
pub fn trial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A finite channel `x -> y` that can be sampled.
pub trait Channel {
    fn input_size(&self) -> usize;
    fn output_size(&self) -> usize;
    fn prob(&self, y: usize, x: usize) -> f64;

    /// `q_y = (1/k) Σ_x Q(y|x)`, the output law under the uniform input.
    fn output_mass(&self) -> Vec<f64> {
        let k = self.input_size() as f64;
        (0..self.output_size())
            .map(|y| (0..self.input_size()).map(|x| self.prob(y, x)).sum::<f64>() / k)
            .collect()
    }
}

impl Channel for Mechanism {
    fn input_size(&self) -> usize {
        self.k()
    }
    fn output_size(&self) -> usize {
        self.num_outputs()
    }
    fn prob(&self, y: usize, x: usize) -> f64 {
        Mechanism::prob(self, y, x)
    }
}

impl Channel for ReducedMechanism {
    fn input_size(&self) -> usize {
        self.k()
    }
    fn output_size(&self) -> usize {
        self.num_classes()
    }
    fn prob(&self, y: usize, x: usize) -> f64 {
        self.q_cond()[y][x]
    }
    fn output_mass(&self) -> Vec<f64> {
        self.q_bar().to_vec()
    }
}

/// Walker/Vose alias table.
#[derive(Debug, Clone)]
struct AliasTable {
    prob: Vec<f64>,
    alias: Vec<usize>,
}

impl AliasTable {
    fn new(weights: &[f64]) -> Self {
        let n = weights.len();
        let total: f64 = weights.iter().sum();
        let mut scaled: Vec<f64> = weights.iter().map(|w| w * n as f64 / total).collect();
        let mut prob = vec![1.0; n];
        let mut alias: Vec<usize> = (0..n).collect();
        let (mut small, mut large): (Vec<usize>, Vec<usize>) =
            (0..n).partition(|&i| scaled[i] < 1.0);
        while let (Some(s), Some(&l)) = (small.pop(), large.last()) {
            prob[s] = scaled[s];
            alias[s] = l;
            scaled[l] -= 1.0 - scaled[s];
            if scaled[l] < 1.0 {
                large.pop();
                small.push(l);
            }
        }
        // leftovers are 1 up to rounding
        Self { prob, alias }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let i = rng.random_range(0..self.prob.len());
        if rng.random::<f64>() < self.prob[i] {
            i
        } else {
            self.alias[i]
        }
    }
}

/// Reusable sampler for `Y` where `X ~ p`, `Y | X ~ Q(·|X)`.
#[derive(Debug, Clone)]
pub struct PrivatizedSampler {
    cdf: Vec<f64>,
    per_input: Vec<AliasTable>,
    q_bar: Vec<f64>,
}

impl PrivatizedSampler {
    pub fn new<C: Channel + ?Sized>(m: &C, p: &Distribution) -> Result<Self> {
        let k = m.input_size();
        if p.k() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                got: p.k(),
            });
        }
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = p
            .probs()
            .iter()
            .map(|pj| {
                acc += pj;
                acc
            })
            .collect();
        // the last bucket must catch u arbitrarily close to 1
        let last_pos = p.probs().iter().rposition(|&q| q > 0.0).unwrap_or(k - 1);
        for c in cdf.iter_mut().skip(last_pos) {
            *c = f64::INFINITY;
        }
        let per_input = (0..k)
            .map(|x| {
                let col: Vec<f64> = (0..m.output_size()).map(|y| m.prob(y, x)).collect();
                AliasTable::new(&col)
            })
            .collect();
        Ok(Self {
            cdf,
            per_input,
            q_bar: m.output_mass(),
        })
    }

    pub fn draw<R: Rng>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let x = self.cdf.partition_point(|&c| c <= u);
        self.per_input[x].sample(rng)
    }

    pub fn counts<R: Rng>(&self, n: u64, rng: &mut R) -> CountVector {
        let mut t = vec![0u64; self.q_bar.len()];
        for _ in 0..n {
            t[self.draw(rng)] += 1;
        }
        CountVector::new(t, &self.q_bar)
    }
}

/// Per-output counts `t_i` and centered counts `v_i = t_i - n q_i`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CountVector {
    n: u64,
    t: Vec<u64>,
    #[serde(skip)]
    v: Vec<f64>,
}

impl CountVector {
    /// Builds counts against the null output law `q_bar`.
    pub fn new(t: Vec<u64>, q_bar: &[f64]) -> Self {
        assert_eq!(
            t.len(),
            q_bar.len(),
            "counts and output law differ in length"
        );
        let n: u64 = t.iter().sum();
        let v = t
            .iter()
            .zip(q_bar)
            .map(|(&ti, &qi)| ti as f64 - n as f64 * qi)
            .collect();
        Self { n, t, v }
    }

    /// Counts taken from a raw output alphabet, merged onto the reduced classes.
    pub fn for_reduced(raw: &[u64], m: &ReducedMechanism) -> Result<Self> {
        if raw.len() != m.class_map().len() {
            return Err(Error::DimensionMismatch {
                expected: m.class_map().len(),
                got: raw.len(),
            });
        }
        let mut t = vec![0u64; m.num_classes()];
        for (y, &c) in raw.iter().enumerate() {
            match m.class_map()[y] {
                Some(class) => t[class] += c,
                None if c == 0 => {}
                None => {
                    return Err(Error::InvalidParameter(format!(
                        "output {y} has zero probability but {c} observations"
                    )))
                }
            }
        }
        Ok(Self::new(t, m.q_bar()))
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn t(&self) -> &[u64] {
        &self.t
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn frequencies(&self) -> Vec<f64> {
        self.t.iter().map(|&c| c as f64 / self.n as f64).collect()
    }
}

/// Draws `n` privatized samples under `p` and tallies them per output symbol.
pub fn sample_privatized<C: Channel + ?Sized>(
    m: &C,
    p: &Distribution,
    n: u64,
    seed: u64,
) -> Result<CountVector> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    let sampler = PrivatizedSampler::new(m, p)?;
    Ok(sampler.counts(n, &mut trial_rng(seed, 0)))
}

/// Coordinate counts `T_i` of a subset-mechanism sample: how many outputs had
/// bit `i` set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsetCounts {
    n: u64,
    coords: Vec<u64>,
}

impl SubsetCounts {
    pub fn new(n: u64, coords: Vec<u64>, d: usize) -> Result<Self> {
        if coords.iter().any(|&c| c > n) {
            return Err(Error::InvalidParameter("coordinate count exceeds n".into()));
        }
        let total: u64 = coords.iter().sum();
        if total != n * d as u64 {
            return Err(Error::InvalidParameter(format!(
                "coordinate counts sum to {total}, expected n*d = {}",
                n * d as u64
            )));
        }
        Ok(Self { n, coords })
    }

    /// Aggregates output counts of a subset mechanism into coordinate counts.
    pub fn from_counts(m: &Mechanism, counts: &CountVector) -> Result<Self> {
        let d = m.subset_size().ok_or_else(|| {
            Error::EstimatorMismatch(format!("mechanism {} is not a subset mechanism", m.label()))
        })?;
        if counts.t().len() != m.num_outputs() {
            return Err(Error::DimensionMismatch {
                expected: m.num_outputs(),
                got: counts.t().len(),
            });
        }
        let mut coords = vec![0u64; m.k()];
        for (bits, &c) in m.output_bits().unwrap().iter().zip(counts.t()) {
            for (acc, &b) in coords.iter_mut().zip(bits) {
                if b {
                    *acc += c;
                }
            }
        }
        Self::new(counts.n(), coords, d)
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn coords(&self) -> &[u64] {
        &self.coords
    }
}

/// An estimate of `p`; `p_hat` may leave the simplex.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Estimate {
    pub p_hat: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub projected: Option<Vec<f64>>,
}

impl Estimate {
    pub fn raw(p_hat: Vec<f64>) -> Self {
        Self {
            p_hat,
            projected: None,
        }
    }

    /// Attaches the Euclidean projection onto the simplex.
    pub fn with_projection(mut self) -> Self {
        self.projected = Some(project_to_simplex(&self.p_hat).probs().to_vec());
        self
    }
}

/// `(a, b)` such that the subset-mechanism estimator is `p̂_i = a T_i/n - b`.
pub fn empirical_coefficients(k: usize, epsilon: f64, d: usize) -> Result<(f64, f64)> {
    if k < 2 || d < 1 || d >= k {
        return Err(Error::DOutOfRange { k, d });
    }
    let e = epsilon.exp();
    let em1 = epsilon.exp_m1();
    if em1 == 0.0 {
        return Err(Error::EpsilonZero);
    }
    let (kf, df) = (k as f64, d as f64);
    let a = ((kf - 1.0) * e + (kf - 1.0) * (kf - df) / df) / ((kf - df) * em1);
    let b = ((df - 1.0) * e + kf - df) / ((kf - df) * em1);
    Ok((a, b))
}

/// Unbiased estimator for counts produced by `subset_mechanism(k, ε, d)`.
pub fn empirical_estimate(
    counts: &SubsetCounts,
    k: usize,
    epsilon: f64,
    d: usize,
) -> Result<Estimate> {
    if counts.coords().len() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: counts.coords().len(),
        });
    }
    let (a, b) = empirical_coefficients(k, epsilon, d)?;
    let n = counts.n() as f64;
    Ok(Estimate::raw(
        counts
            .coords()
            .iter()
            .map(|&t| a * t as f64 / n - b)
            .collect(),
    ))
}

/// An affine estimator `p̂ = A f + c` of the output frequencies `f = t/n`.
#[derive(Debug, Clone)]
pub struct LinearEstimator {
    pub weights: Matrix,
    pub offset: Vec<f64>,
}

impl LinearEstimator {
    /// Least-squares fit of `f ≈ Q p` subject to `Σ p = 1`, expressed as an
    /// affine map of `f`.
    pub fn least_squares(m: &ReducedMechanism) -> Result<Self> {
        let (k, l) = (m.k(), m.num_classes());
        let q = Matrix::from_rows(m.q_cond());
        let gram = q.transpose().matmul(&q);
        let eig = symmetric_eigen(&gram);
        let (lo, hi) = (eig.values[0], eig.values[k - 1]);
        if !(lo > 1e-12 * hi) {
            return Err(Error::RankDeficient);
        }
        let chol = Cholesky::new(&gram).map_err(|_| Error::RankDeficient)?;
        let ginv_one = chol.solve(&vec![1.0; k]);
        let s: f64 = ginv_one.iter().sum();
        // columns of G⁻¹ Qᵀ
        let mut base = Matrix::zeros(k, l);
        for y in 0..l {
            let col = chol.solve(&m.q_cond()[y]);
            for i in 0..k {
                base[(i, y)] = col[i];
            }
        }
        // project out the constraint direction: (I - G⁻¹ 1 1ᵀ / s) G⁻¹ Qᵀ
        let col_sums: Vec<f64> = (0..l).map(|y| (0..k).map(|i| base[(i, y)]).sum()).collect();
        let weights = Matrix::from_fn(k, l, |i, y| base[(i, y)] - ginv_one[i] * col_sums[y] / s);
        let offset = ginv_one.iter().map(|g| g / s).collect();
        Ok(Self { weights, offset })
    }

    pub fn apply(&self, freqs: &[f64]) -> Vec<f64> {
        self.weights
            .mat_vec(freqs)
            .into_iter()
            .zip(&self.offset)
            .map(|(a, c)| a + c)
            .collect()
    }
}

/// Least-squares estimate for counts over the reduced alphabet of `m`.
pub fn least_squares_estimate(counts: &CountVector, m: &ReducedMechanism) -> Result<Estimate> {
    if counts.t().len() != m.num_classes() {
        return Err(Error::DimensionMismatch {
            expected: m.num_classes(),
            got: counts.t().len(),
        });
    }
    let est = LinearEstimator::least_squares(m)?;
    Ok(Estimate::raw(est.apply(&counts.frequencies())))
}

/// Euclidean projection onto the probability simplex (sort-and-threshold).
pub fn project_to_simplex(x: &[f64]) -> Distribution {
    let mut sorted = x.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (j, &s) in sorted.iter().enumerate() {
        cum += s;
        let t = (cum - 1.0) / (j + 1) as f64;
        if s - t > 0.0 {
            theta = t;
        }
    }
    let mut p: Vec<f64> = x.iter().map(|&v| (v - theta).max(0.0)).collect();
    // absorb rounding so the result passes the simplex check
    let s: f64 = p.iter().sum();
    if s > 0.0 {
        p.iter_mut().for_each(|v| *v /= s);
    }
    Distribution::new(p).expect("projection lands on the simplex")
}

/// Squared Euclidean loss.
pub fn l2_squared(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
