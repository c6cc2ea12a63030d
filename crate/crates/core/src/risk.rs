//! Closed-form and simulated `ℓ₂²` risk of the subset-selection scheme.

use crate::error::{Error, Result};
use crate::estimation::{
    empirical_estimate, l2_squared, least_squares_estimate, trial_rng, CountVector, Estimate,
    LinearEstimator, PrivatizedSampler, SubsetCounts,
};
use crate::mechanisms::{marginal, reduce_alphabet, Distribution, Mechanism};
use crate::numeric::mean_and_stderr;
use rayon::prelude::*;
use serde::Serialize;

fn check_subset_params(k: usize, epsilon: f64, d: usize, n: u64) -> Result<()> {
    if k < 2 || d < 1 || d >= k {
        return Err(Error::DOutOfRange { k, d });
    }
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon={epsilon} must be > 0"
        )));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    Ok(())
}

/// `(d e^ε + k - d)² / (d (k - d))`, the d-dependent factor of the worst-case risk.
pub fn subset_objective(k: usize, epsilon: f64, d: usize) -> f64 {
    let (kf, df) = (k as f64, d as f64);
    let num = df * epsilon.exp() + kf - df;
    num * num / (df * (kf - df))
}

/// Expected `ℓ₂²` loss of the empirical estimator under `subset_mechanism(k, ε, d)`
/// at distribution `p`.
pub fn analytic_l2_risk(k: usize, epsilon: f64, d: usize, n: u64, p: &Distribution) -> Result<f64> {
    check_subset_params(k, epsilon, d, n)?;
    if p.k() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: p.k(),
        });
    }
    let (kf, df) = (k as f64, d as f64);
    let e = epsilon.exp();
    let em1_sq = epsilon.exp_m1().powi(2);
    let t1 = (df * (kf - 2.0) + 1.0) * e * e / ((kf - df) * em1_sq);
    let t2 = 2.0 * (kf - 2.0) * e / em1_sq;
    let t3 = ((kf - 2.0) * (kf - df) + 1.0) / (df * em1_sq);
    Ok((t1 + t2 + t3 - p.sum_of_squares()) / n as f64)
}

/// Risk at the uniform distribution, the maximizer over the simplex.
pub fn worst_case_risk(k: usize, epsilon: f64, d: usize, n: u64) -> Result<f64> {
    check_subset_params(k, epsilon, d, n)?;
    let kf = k as f64;
    let lead = (kf - 1.0) * (kf - 1.0) / (n as f64 * kf * epsilon.exp_m1().powi(2));
    Ok(lead * subset_objective(k, epsilon, d))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OptimalD {
    pub d_star: usize,
    pub objective: f64,
}

/// Optimal subset size. Only `⌊k/(e^ε+1)⌋` and `⌈k/(e^ε+1)⌉` can minimize the
/// objective, so those two (clamped to `[1, k-1]`) are compared; ties go to
/// the smaller `d`.
pub fn optimal_d(k: usize, epsilon: f64) -> Result<OptimalD> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!("k={k}; need k >= 2")));
    }
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon={epsilon} must be > 0"
        )));
    }
    let ratio = k as f64 / (epsilon.exp() + 1.0);
    let clamp = |d: f64| (d as usize).clamp(1, k - 1);
    let lo = clamp(ratio.floor());
    let hi = clamp(ratio.ceil());
    let (f_lo, f_hi) = (
        subset_objective(k, epsilon, lo),
        subset_objective(k, epsilon, hi),
    );
    Ok(if f_lo <= f_hi {
        OptimalD {
            d_star: lo,
            objective: f_lo,
        }
    } else {
        OptimalD {
            d_star: hi,
            objective: f_hi,
        }
    })
}

/// `M(k, ε)`: `n` times the worst-case risk at `d*`.
pub fn big_m(k: usize, epsilon: f64) -> Result<f64> {
    let opt = optimal_d(k, epsilon)?;
    let kf = k as f64;
    Ok((kf - 1.0) * (kf - 1.0) / (kf * epsilon.exp_m1().powi(2)) * opt.objective)
}

/// Dominant term `M(k, ε)/n` of the minimax lower bound. The remainder is of
/// order `n^{-14/13}` with an unspecified constant; see [`LOWER_BOUND_REMAINDER`].
pub fn lower_bound_dominant(k: usize, epsilon: f64, n: u64) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    Ok(big_m(k, epsilon)? / n as f64)
}

/// Symbolic remainder of the lower bound. No numeric value exists for `C(k, ε)`.
pub const LOWER_BOUND_REMAINDER: &str = "- C(k,eps) * n^(-14/13)";

/// Affine map from raw output frequencies of a subset mechanism to the
/// empirical estimate. Used to cross-check the closed-form risk.
pub fn subset_linear_estimator(m: &Mechanism) -> Result<LinearEstimator> {
    let d = m
        .subset_size()
        .ok_or_else(|| Error::EstimatorMismatch("not a subset mechanism".into()))?;
    let (a, b) = crate::estimation::empirical_coefficients(m.k(), m.epsilon(), d)?;
    let bits = m.output_bits().unwrap();
    let weights =
        crate::linalg::Matrix::from_fn(
            m.k(),
            m.num_outputs(),
            |i, y| {
                if bits[y][i] {
                    a
                } else {
                    0.0
                }
            },
        );
    Ok(LinearEstimator {
        weights,
        offset: vec![-b; m.k()],
    })
}

/// Exact expected `ℓ₂²` loss of an affine estimator fed with multinomial
/// frequencies: squared bias plus `tr(A Σ Aᵀ)/n`, `Σ = diag(m) - m mᵀ`.
pub fn exact_linear_risk(est: &LinearEstimator, out_law: &[f64], p: &[f64], n: u64) -> f64 {
    let mean = est.apply(out_law);
    let bias = l2_squared(&mean, p);
    let a = &est.weights;
    let mut var = 0.0;
    for i in 0..a.rows() {
        let row = a.row(i);
        let second: f64 = row.iter().zip(out_law).map(|(w, m)| w * w * m).sum();
        let first: f64 = row.iter().zip(out_law).map(|(w, m)| w * m).sum();
        var += second - first * first;
    }
    bias + var / n as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Subset,
    LeastSquares,
}

impl std::str::FromStr for EstimatorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "subset" | "empirical" => Ok(Self::Subset),
            "least_squares" | "least-squares" | "ls" => Ok(Self::LeastSquares),
            other => Err(Error::InvalidParameter(format!(
                "unknown estimator {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskReport {
    pub analytic: f64,
    pub worst_case: f64,
    pub mc_mean: f64,
    pub mc_stderr: f64,
    pub trials: usize,
    pub n: u64,
}

/// One simulated trial: counts over the raw output alphabet, the raw estimate
/// and its `ℓ₂²` loss.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub n: u64,
    pub t: Vec<u64>,
    pub p_hat: Vec<f64>,
    pub loss: f64,
}

/// Exact expected loss of `estimator` for `m` at `p` (closed form for the subset
/// estimator, covariance trace for least squares).
pub fn exact_risk(
    m: &Mechanism,
    estimator: EstimatorKind,
    p: &Distribution,
    n: u64,
) -> Result<f64> {
    match estimator {
        EstimatorKind::Subset => {
            let d = m.subset_size().ok_or_else(|| {
                Error::EstimatorMismatch("subset estimator needs a subset mechanism".into())
            })?;
            analytic_l2_risk(m.k(), m.epsilon(), d, n, p)
        }
        EstimatorKind::LeastSquares => {
            let r = reduce_alphabet(m);
            let est = LinearEstimator::least_squares(&r)?;
            Ok(exact_linear_risk(&est, &marginal(&r, p)?, p.probs(), n))
        }
    }
}

/// Runs `trials` independent trials. Trial `i` uses stream `i` of `seed`, so the
/// output does not depend on the number of worker threads.
pub fn simulate_trials(
    m: &Mechanism,
    estimator: EstimatorKind,
    p: &Distribution,
    n: u64,
    trials: usize,
    seed: u64,
) -> Result<Vec<TrialRecord>> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    let sampler = PrivatizedSampler::new(m, p)?;
    let reduced = match estimator {
        EstimatorKind::Subset => {
            let d = m.subset_size().ok_or_else(|| {
                Error::EstimatorMismatch("subset estimator needs a subset mechanism".into())
            })?;
            crate::estimation::empirical_coefficients(m.k(), m.epsilon(), d)?;
            None
        }
        EstimatorKind::LeastSquares => {
            let r = reduce_alphabet(m);
            LinearEstimator::least_squares(&r)?;
            Some(r)
        }
    };
    (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(seed, trial as u64);
            let counts = sampler.counts(n, &mut rng);
            let est: Estimate = match &reduced {
                None => {
                    let sc = SubsetCounts::from_counts(m, &counts)?;
                    empirical_estimate(&sc, m.k(), m.epsilon(), m.subset_size().unwrap())?
                }
                Some(r) => least_squares_estimate(&CountVector::for_reduced(counts.t(), r)?, r)?,
            };
            let loss = l2_squared(&est.p_hat, p.probs());
            Ok(TrialRecord {
                trial,
                n,
                t: counts.t().to_vec(),
                p_hat: est.p_hat,
                loss,
            })
        })
        .collect()
}

/// Summarizes trial losses against the exact risk.
pub fn summarize(
    m: &Mechanism,
    estimator: EstimatorKind,
    p: &Distribution,
    n: u64,
    records: &[TrialRecord],
) -> Result<RiskReport> {
    let losses: Vec<f64> = records.iter().map(|r| r.loss).collect();
    let (mc_mean, mc_stderr) = mean_and_stderr(&losses);
    Ok(RiskReport {
        analytic: exact_risk(m, estimator, p, n)?,
        worst_case: exact_risk(m, estimator, &Distribution::uniform(m.k()), n)?,
        mc_mean,
        mc_stderr,
        trials: records.len(),
        n,
    })
}

/// Monte Carlo estimate of the expected `ℓ₂²` loss, alongside the exact value.
pub fn monte_carlo_risk(
    m: &Mechanism,
    estimator: EstimatorKind,
    p: &Distribution,
    n: u64,
    trials: usize,
    seed: u64,
) -> Result<RiskReport> {
    if trials < 2 {
        return Err(Error::InvalidParameter("trials must be at least 2".into()));
    }
    let records = simulate_trials(m, estimator, p, n, trials, seed)?;
    summarize(m, estimator, p, n, &records)
}

pub const RISK_CSV_HEADER: &str = "k,epsilon,d,n,analytic,worst_case,mc_mean,mc_stderr,trials,seed";

/// One row of the risk table; Monte Carlo columns are empty when not run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskRow {
    pub k: usize,
    pub epsilon: f64,
    pub d: usize,
    pub n: u64,
    pub analytic: f64,
    pub worst_case: f64,
    pub mc: Option<(f64, f64, usize, u64)>,
}

impl RiskRow {
    pub fn to_csv(&self) -> String {
        let mc = match self.mc {
            Some((mean, se, trials, seed)) => {
                format!("{},{},{trials},{seed}", fmt_f64(mean), fmt_f64(se))
            }
            None => ",,,".to_string(),
        };
        format!(
            "{},{},{},{},{},{},{mc}",
            self.k,
            fmt_f64(self.epsilon),
            self.d,
            self.n,
            fmt_f64(self.analytic),
            fmt_f64(self.worst_case)
        )
    }
}

/// Locale-free float formatting with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}
