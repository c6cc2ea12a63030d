//! Computable pieces of the minimax lower bound for a fixed mechanism.
//!
//! Distributions near the uniform law are written `p = p_U + (u, -Σu)` with
//! `u ∈ R^{k-1}`. In these coordinates:
//!
//! - `Φ(n, Q) = Σ_i (n/q_i) z_i z_iᵀ`, `z_i = (q_{i,j} - q_{i,k})_{j<k}`, is the
//!   Fisher information of `n` privatized samples at `p_U`;
//! - `tr(Φ⁻¹) + 1ᵀΦ⁻¹1` is the asymptotic Bayes loss near `p_U`, and is never
//!   below `M(k, ε)/n`;
//! - `δ(Q)` is the square root of the smallest eigenvalue of `Φ(1, Q)` in the
//!   `I + J` metric, i.e. the least separation any unit perturbation achieves.
//!
//! When `δ` is below `δ₀ = (32 M)^{-1/2}` a two-point testing argument gives a
//! bound of at least `2M/n` directly ([`le_cam_two_point`]).

use crate::error::{Error, Result};
use crate::estimation::CountVector;
use crate::linalg::{generalized_min_eigen, symmetric_eigen, Cholesky, Matrix};
use crate::mechanisms::{marginal, Distribution, ReducedMechanism, PROPORTIONAL_TOL};
use crate::risk::{big_m, fmt_f64};
use serde::{Serialize, Serializer};

/// Appends `u_k = -Σ u_j`.
pub fn extend_u(u: &[f64]) -> Vec<f64> {
    let mut full = u.to_vec();
    full.push(-u.iter().sum::<f64>());
    full
}

fn check_masses(m: &ReducedMechanism) -> Result<()> {
    match m.q_bar().iter().position(|&q| !(q > 0.0)) {
        Some(i) => Err(Error::ZeroClassMass(i)),
        None => Ok(()),
    }
}

/// `Φ(n, Q)` as a `(k-1)×(k-1)` matrix.
pub fn phi_matrix(m: &ReducedMechanism, n: u64) -> Result<Matrix> {
    check_masses(m)?;
    let k = m.k();
    let mut phi = Matrix::zeros(k - 1, k - 1);
    for (row, &qi) in m.q_cond().iter().zip(m.q_bar()) {
        let z: Vec<f64> = (0..k - 1).map(|j| row[j] - row[k - 1]).collect();
        let scale = n as f64 / qi;
        for a in 0..k - 1 {
            for b in 0..k - 1 {
                phi[(a, b)] += scale * z[a] * z[b];
            }
        }
    }
    Ok(phi)
}

/// Fisher information of `n` samples at `p_U`, from the score vectors
/// `∂/∂p_j log P(y) = (q_{yj} - q_{yk}) / P(y)` averaged over outputs.
pub fn fisher_information(m: &ReducedMechanism, n: u64) -> Result<Matrix> {
    check_masses(m)?;
    let k = m.k();
    let p = Distribution::uniform(k);
    let law = marginal(m, &p)?;
    let mut info = Matrix::zeros(k - 1, k - 1);
    for (row, &py) in m.q_cond().iter().zip(&law) {
        let score: Vec<f64> = (0..k - 1).map(|j| (row[j] - row[k - 1]) / py).collect();
        for a in 0..k - 1 {
            for b in 0..k - 1 {
                info[(a, b)] += py * score[a] * score[b];
            }
        }
    }
    Ok(info.scale(n as f64))
}

/// `w_m = Σ_i (q_{im} - q_{ik}) v_i / q_i`, `m = 1..k-1`.
pub fn w_vector(m: &ReducedMechanism, counts: &CountVector) -> Result<Vec<f64>> {
    if counts.v().len() != m.num_classes() {
        return Err(Error::DimensionMismatch {
            expected: m.num_classes(),
            got: counts.v().len(),
        });
    }
    w_from_centered(m, counts.v())
}

/// [`w_vector`] for an arbitrary centered-count vector.
pub fn w_from_centered(m: &ReducedMechanism, v: &[f64]) -> Result<Vec<f64>> {
    check_masses(m)?;
    let k = m.k();
    Ok((0..k - 1)
        .map(|j| {
            m.q_cond()
                .iter()
                .zip(m.q_bar())
                .zip(v)
                .map(|((row, qi), vi)| (row[j] - row[k - 1]) * vi / qi)
                .sum()
        })
        .collect())
}

/// Relative eigenvalue floor below which Φ is treated as singular.
pub const SINGULAR_TOL: f64 = 1e-12;

/// `tr(Φ⁻¹) + 1ᵀΦ⁻¹1`, via Cholesky solves against the unit vectors and `1`.
pub fn trace_plus_quad(phi: &Matrix) -> Result<f64> {
    let dim = phi.rows();
    let eig = symmetric_eigen(phi);
    let (lo, hi) = (eig.values[0], eig.values[dim - 1]);
    if !(hi > 0.0 && lo > SINGULAR_TOL * hi) {
        return Err(Error::SingularPhi);
    }
    let chol = Cholesky::new(phi).map_err(|_| Error::SingularPhi)?;
    let mut trace = 0.0;
    let mut unit = vec![0.0; dim];
    for i in 0..dim {
        unit[i] = 1.0;
        trace += chol.solve(&unit)[i];
        unit[i] = 0.0;
    }
    let quad: f64 = chol.solve(&vec![1.0; dim]).iter().sum();
    Ok(trace + quad)
}

/// `δ(Q)` and a minimizer `ũ` with `Σ_{i≤k} ũ_i² = 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Delta {
    pub delta: f64,
    /// Minimizer in `R^{k-1}`; first nonzero coordinate positive.
    pub minimizer: Vec<f64>,
}

/// Smallest generalized eigenvalue of `Φ(1, Q)` against `I + J`, square-rooted.
pub fn delta(m: &ReducedMechanism) -> Result<Delta> {
    let k = m.k();
    if k < 2 {
        return Err(Error::InvalidParameter("k must be at least 2".into()));
    }
    let phi = phi_matrix(m, 1)?;
    let metric = Matrix::identity_plus_ones(k - 1);
    let (lambda, mut u) = generalized_min_eigen(&phi, &metric)?;
    // Φ is PSD; negative or rounding-level eigenvalues mean a null direction
    let scale = phi.trace();
    let lambda = if lambda <= 1e-14 * scale { 0.0 } else { lambda };
    if let Some(first) = u.iter().find(|x| x.abs() > 1e-300) {
        if *first < 0.0 {
            u.iter_mut().for_each(|x| *x = -*x);
        }
    }
    Ok(Delta {
        delta: lambda.sqrt(),
        minimizer: u,
    })
}

/// `δ₀ = (32 M(k, ε))^{-1/2}`.
pub fn delta0(k: usize, epsilon: f64) -> Result<f64> {
    Ok((1.0 / (32.0 * big_m(k, epsilon)?)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZacGap {
    pub lhs: f64,
    pub slack: f64,
}

/// For positive definite `A` of size `k-1`:
/// `(tr A⁻¹ + 1ᵀA⁻¹1)(Σa_ii/k - Σ_{i≠j}a_ij/(k(k-1)))`, which is at least
/// `k-1` with equality exactly on the family `a(I+J)`.
pub fn zac_gap(a: &Matrix) -> Result<ZacGap> {
    if !a.is_square() || a.rows() == 0 {
        return Err(Error::NotPD);
    }
    let dim = a.rows();
    let k = (dim + 1) as f64;
    let chol = Cholesky::new(a)?;
    let mut trace = 0.0;
    let mut unit = vec![0.0; dim];
    for i in 0..dim {
        unit[i] = 1.0;
        trace += chol.solve(&unit)[i];
        unit[i] = 0.0;
    }
    let quad: f64 = chol.solve(&vec![1.0; dim]).iter().sum();
    let diag = a.trace();
    let mut off = 0.0;
    for i in 0..dim {
        for j in 0..dim {
            if i != j {
                off += a[(i, j)];
            }
        }
    }
    let second = if dim == 1 {
        diag / k
    } else {
        diag / k - off / (k * (k - 1.0))
    };
    let lhs = (trace + quad) * second;
    Ok(ZacGap {
        lhs,
        slack: lhs - (k - 1.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RowBound {
    pub max_row_moment: f64,
    pub bound: f64,
    pub ok: bool,
}

/// Checks `Σ_j (q_{ij}/q_i)² ≤ k(1 + (e^ε-1)² d*(k-d*)/(d* e^ε + k - d*)²)` for
/// every class of an extremal mechanism.
pub fn row_bound_check(m: &ReducedMechanism, epsilon: f64) -> Result<RowBound> {
    check_masses(m)?;
    let k = m.k();
    let e = epsilon.exp();
    for row in m.q_cond() {
        let min = row.iter().copied().fold(f64::INFINITY, f64::min);
        let extremal = min > 0.0
            && row.iter().all(|&q| {
                let r = q / min;
                (r - 1.0).abs() <= PROPORTIONAL_TOL || (r - e).abs() <= PROPORTIONAL_TOL * e
            });
        if !extremal {
            return Err(Error::NotExtremal(epsilon));
        }
    }
    let max_row_moment = m
        .q_cond()
        .iter()
        .zip(m.q_bar())
        .map(|(row, qi)| row.iter().map(|q| (q / qi).powi(2)).sum::<f64>())
        .fold(0.0, f64::max);
    let d = crate::risk::optimal_d(k, epsilon)?.d_star as f64;
    let kf = k as f64;
    let denom = d * e + kf - d;
    let bound = kf * (1.0 + epsilon.exp_m1().powi(2) * d * (kf - d) / (denom * denom));
    Ok(RowBound {
        max_row_moment,
        bound,
        ok: max_row_moment <= bound * (1.0 + 1e-9),
    })
}

fn check_same_len(a: &[f64], b: &[f64]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(())
}

/// `D(a‖b) = Σ a log(a/b)` in nats, with `0 log 0 = 0`.
pub fn kl_divergence(a: &[f64], b: &[f64]) -> Result<f64> {
    check_same_len(a, b)?;
    let mut total = 0.0;
    for (i, (&x, &y)) in a.iter().zip(b).enumerate() {
        if x == 0.0 {
            continue;
        }
        if y <= 0.0 {
            return Err(Error::SupportMismatch(i));
        }
        total += x * (x / y).ln();
    }
    Ok(total.max(0.0))
}

/// Total variation distance `½ Σ |a - b|`.
pub fn tv_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    check_same_len(a, b)?;
    Ok(0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>())
}

/// Two-point bound outcome. `Unbounded` when `δ = 0`: two distributions at
/// arbitrary distance induce the same output law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LeCamBound {
    Finite {
        value: f64,
        /// n·D(m₂‖m₁) for the perturbation that was reported.
        n_kl: f64,
        /// Sign applied to the minimizer, +1 or -1.
        sign: f64,
    },
    Unbounded,
}

impl LeCamBound {
    pub fn value(&self) -> f64 {
        match self {
            LeCamBound::Finite { value, .. } => *value,
            LeCamBound::Unbounded => f64::INFINITY,
        }
    }
}

impl Serialize for LeCamBound {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            LeCamBound::Finite { value, .. } => s.serialize_f64(*value),
            LeCamBound::Unbounded => s.serialize_str("unbounded"),
        }
    }
}

/// Two-point bound between `p_U` and `p_U ± ũ/√(nδ²)`:
/// `(1/(4nδ²)) (1 - √(n D(m₂‖m₁)/2))`, evaluated for both signs of `ũ` and the
/// larger feasible value returned. This is the bound on the summed risk at the
/// two points; the minimax risk is at least half of it.
pub fn le_cam_two_point(m: &ReducedMechanism, n: u64) -> Result<LeCamBound> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    let k = m.k();
    let Delta { delta, minimizer } = delta(m)?;
    if delta == 0.0 {
        return Ok(LeCamBound::Unbounded);
    }
    let nd2 = n as f64 * delta * delta;
    let step = 1.0 / nd2.sqrt();
    let u = extend_u(&minimizer);
    let m1 = m.q_bar().to_vec();
    let mut best: Option<LeCamBound> = None;
    for sign in [1.0, -1.0] {
        let p2: Vec<f64> = u
            .iter()
            .map(|ui| 1.0 / k as f64 + sign * ui * step)
            .collect();
        if p2.iter().any(|&p| p < 0.0) {
            continue;
        }
        // renormalize away the rounding in Σ p2 before validating
        let s: f64 = p2.iter().sum();
        let p2 = Distribution::new(p2.iter().map(|p| p / s).collect())?;
        let m2 = marginal(m, &p2)?;
        let n_kl = n as f64 * kl_divergence(&m2, &m1)?;
        let value = ((1.0 - (n_kl / 2.0).sqrt()) / (4.0 * nd2)).max(0.0);
        if best.is_none_or(|b| value > b.value()) {
            best = Some(LeCamBound::Finite { value, n_kl, sign });
        }
    }
    best.ok_or(Error::SimplexViolation(n))
}

/// Which proof branch the mechanism falls in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// `δ ≥ δ₀`: Bayes loss near `p_U` governs the bound.
    Case1,
    /// `δ < δ₀`: the two-point bound alone exceeds `2M/n`.
    Case2,
}

impl std::fmt::Display for Branch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Branch::Case1 => "case1",
            Branch::Case2 => "case2",
        })
    }
}

/// Everything the lower-bound calculus reports for one mechanism and `n`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhiSummary {
    pub k: usize,
    pub epsilon: f64,
    pub n: u64,
    #[serde(skip)]
    pub phi: Matrix,
    pub delta: f64,
    pub delta0: f64,
    pub branch: Branch,
    /// `None` when Φ is singular.
    pub trace_plus_quad: Option<f64>,
    pub m_over_n: f64,
    /// `None` when the perturbed distribution leaves the simplex.
    pub le_cam_bound: Option<LeCamBound>,
}

pub const LOWER_BOUND_CSV_HEADER: &str =
    "k,epsilon,n,delta,delta0,branch,trace_plus_quad,M_over_n,le_cam_bound";

/// Computes all lower-bound quantities for `m` at privacy level `epsilon`.
pub fn phi_summary(m: &ReducedMechanism, epsilon: f64, n: u64) -> Result<PhiSummary> {
    let k = m.k();
    let phi = phi_matrix(m, n)?;
    let d = delta(m)?.delta;
    let d0 = delta0(k, epsilon)?;
    let trace_plus_quad = match trace_plus_quad(&phi) {
        Ok(v) => Some(v),
        Err(Error::SingularPhi) => None,
        Err(e) => return Err(e),
    };
    let le_cam_bound = match le_cam_two_point(m, n) {
        Ok(b) => Some(b),
        Err(Error::SimplexViolation(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(PhiSummary {
        k,
        epsilon,
        n,
        phi,
        delta: d,
        delta0: d0,
        branch: if d >= d0 {
            Branch::Case1
        } else {
            Branch::Case2
        },
        trace_plus_quad,
        m_over_n: big_m(k, epsilon)? / n as f64,
        le_cam_bound,
    })
}

impl PhiSummary {
    pub fn to_csv(&self) -> String {
        let tpq = self.trace_plus_quad.map(fmt_f64).unwrap_or_default();
        let lc = match self.le_cam_bound {
            Some(LeCamBound::Finite { value, .. }) => fmt_f64(value),
            Some(LeCamBound::Unbounded) => "unbounded".into(),
            None => String::new(),
        };
        format!(
            "{},{},{},{},{},{},{tpq},{},{lc}",
            self.k,
            fmt_f64(self.epsilon),
            self.n,
            fmt_f64(self.delta),
            fmt_f64(self.delta0),
            self.branch,
            fmt_f64(self.m_over_n)
        )
    }
}
