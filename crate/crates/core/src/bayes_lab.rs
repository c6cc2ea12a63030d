//! Grid posteriors near the uniform distribution for `k ∈ {2, 3}`.
//!
//! With `U` uniform on the ellipsoid `B(α) = {u : uᵀ(I+J)u < α²}` and
//! `p = p_U + (u, -Σu)`, the posterior density of `U` given counts `t` is
//! proportional to `exp(g(u))` on `B(α)`, where
//! `g(u) = Σ_i t_i log(1 + Σ_j u_j q_{ij}/q_i)`. Its second-order expansion
//! `g₂` is a Gaussian log-density with mean `Φ⁻¹w` and covariance `Φ⁻¹`.
//!
//! Everything here evaluates those objects on a midpoint grid in log space.

use crate::error::{Error, Result};
use crate::estimation::{trial_rng, CountVector, PrivatizedSampler};
use crate::linalg::{Cholesky, Matrix};
use crate::lower_bound::{extend_u, phi_matrix, trace_plus_quad, w_vector};
use crate::mechanisms::{Distribution, ReducedMechanism};
use crate::numeric::{compensated_sum, log_sum_exp, mean_and_stderr};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Smallest grid resolution accepted per axis.
pub const MIN_RESOLUTION: usize = 64;

/// Uniform prior on `B(radius)` for sample size `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PriorSpec {
    pub k: usize,
    pub radius: f64,
    pub n: u64,
}

impl PriorSpec {
    /// Prior with the default radius `n^{-5/13}`.
    pub fn new(k: usize, n: u64) -> Self {
        Self {
            k,
            radius: default_radius(n),
            n,
        }
    }

    pub fn with_radius(k: usize, n: u64, radius: f64) -> Result<Self> {
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "radius={radius} must be > 0"
            )));
        }
        Ok(Self { k, radius, n })
    }

    /// `uᵀ(I+J)u < radius²`.
    pub fn contains(&self, u: &[f64]) -> bool {
        ellipsoid_norm_sq(u) < self.radius * self.radius
    }

    /// Half-width of the bounding box of `B(radius)` along each axis.
    pub fn half_width(&self) -> f64 {
        self.radius * (1.0 - 1.0 / self.k as f64).sqrt()
    }

    /// Rejection sample from the uniform law on `B(radius)`.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let h = self.half_width();
        loop {
            let u: Vec<f64> = (0..self.k - 1).map(|_| rng.random_range(-h..h)).collect();
            if self.contains(&u) {
                return u;
            }
        }
    }
}

pub fn default_radius(n: u64) -> f64 {
    (n as f64).powf(-5.0 / 13.0)
}

/// `Σ_{i≤k} u_i² = uᵀ(I+J)u` with `u_k = -Σu`.
pub fn ellipsoid_norm_sq(u: &[f64]) -> f64 {
    let s: f64 = u.iter().sum();
    u.iter().map(|x| x * x).sum::<f64>() + s * s
}

/// `x_i(u) = Σ_{j≤k} u_j q_{ij}/q_i` for every class.
fn class_shifts(m: &ReducedMechanism, u: &[f64]) -> Result<Vec<f64>> {
    if u.len() + 1 != m.k() {
        return Err(Error::DimensionMismatch {
            expected: m.k() - 1,
            got: u.len(),
        });
    }
    let full = extend_u(u);
    Ok(m.q_cond()
        .iter()
        .zip(m.q_bar())
        .map(|(row, qi)| row.iter().zip(&full).map(|(q, uj)| q * uj).sum::<f64>() / qi)
        .collect())
}

fn check_counts(m: &ReducedMechanism, counts: &CountVector) -> Result<()> {
    if counts.t().len() != m.num_classes() {
        return Err(Error::DimensionMismatch {
            expected: m.num_classes(),
            got: counts.t().len(),
        });
    }
    Ok(())
}

/// `g(u) = Σ_i (n q_i + v_i) log(1 + x_i(u))`: the log-likelihood ratio of the
/// counts at `p_U + u` against `p_U`.
pub fn log_posterior_g(m: &ReducedMechanism, counts: &CountVector, u: &[f64]) -> Result<f64> {
    check_counts(m, counts)?;
    let shifts = class_shifts(m, u)?;
    let mut terms = Vec::with_capacity(shifts.len());
    for (i, (&x, &t)) in shifts.iter().zip(counts.t()).enumerate() {
        if !(1.0 + x > 0.0) {
            return Err(Error::DomainViolation(format!(
                "1 + x_{i}(u) = {} is not positive",
                1.0 + x
            )));
        }
        terms.push(t as f64 * x.ln_1p());
    }
    Ok(compensated_sum(terms))
}

/// Quadratic expansion `g₂(u) = Σ_i v_i x_i - ½ Σ_i n q_i x_i²`.
pub fn quadratic_g2(m: &ReducedMechanism, counts: &CountVector, u: &[f64]) -> Result<f64> {
    check_counts(m, counts)?;
    let shifts = class_shifts(m, u)?;
    let n = counts.n() as f64;
    Ok(shifts
        .iter()
        .zip(counts.v())
        .zip(m.q_bar())
        .map(|((x, v), q)| v * x - 0.5 * n * q * x * x)
        .sum())
}

/// `h_v(u) = Σ_i (n/q_i) (Σ_j u_j q_{ij} - v_i/n)²`.
pub fn h_v(m: &ReducedMechanism, counts: &CountVector, u: &[f64]) -> Result<f64> {
    check_counts(m, counts)?;
    let shifts = class_shifts(m, u)?;
    let n = counts.n() as f64;
    Ok(shifts
        .iter()
        .zip(counts.v())
        .zip(m.q_bar())
        .map(|((x, v), q)| {
            let r = q * x - v / n;
            n / q * r * r
        })
        .sum())
}

/// `g₂` through the completed square: `-h_v(u)/2 + Σ_i v_i²/(2 n q_i)`.
pub fn quadratic_g2_completed(
    m: &ReducedMechanism,
    counts: &CountVector,
    u: &[f64],
) -> Result<f64> {
    let n = counts.n() as f64;
    let c: f64 = counts
        .v()
        .iter()
        .zip(m.q_bar())
        .map(|(v, q)| v * v / (2.0 * n * q))
        .sum();
    Ok(-0.5 * h_v(m, counts, u)? + c)
}

/// Gaussian approximation `N(Φ⁻¹w, Φ⁻¹)` to the posterior of `U`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianParams {
    pub mean: Vec<f64>,
    pub covariance: Matrix,
    pub precision: Matrix,
}

pub fn gaussian_params(m: &ReducedMechanism, counts: &CountVector) -> Result<GaussianParams> {
    check_counts(m, counts)?;
    let phi = phi_matrix(m, counts.n())?;
    // reuse the singularity test of the trace functional
    trace_plus_quad(&phi)?;
    let chol = Cholesky::new(&phi).map_err(|_| Error::SingularPhi)?;
    let w = w_vector(m, counts)?;
    let mean = chol.solve(&w);
    let dim = phi.rows();
    let mut covariance = Matrix::zeros(dim, dim);
    let mut unit = vec![0.0; dim];
    for j in 0..dim {
        unit[j] = 1.0;
        let col = chol.solve(&unit);
        unit[j] = 0.0;
        for i in 0..dim {
            covariance[(i, j)] = col[i];
        }
    }
    Ok(GaussianParams {
        mean,
        covariance,
        precision: phi,
    })
}

/// Posterior moments on the grid and their distance to the Gaussian approximation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridMoments {
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    /// Grid total variation between the posterior and the Gaussian restricted
    /// to `B(α)`; `None` when Φ is singular.
    pub tv_to_gaussian: Option<f64>,
    /// Log normalizer of `exp(g)` over the grid nodes inside `B(α)`.
    pub log_normalizer: f64,
}

/// Midpoint nodes of the bounding box of `B(α)` that fall inside the ellipsoid.
fn grid_nodes(prior: &PriorSpec, resolution: usize) -> Vec<Vec<f64>> {
    let h = prior.half_width();
    let step = 2.0 * h / resolution as f64;
    let axis: Vec<f64> = (0..resolution)
        .map(|i| -h + (i as f64 + 0.5) * step)
        .collect();
    match prior.k {
        2 => axis
            .iter()
            .map(|&a| vec![a])
            .filter(|u| prior.contains(u))
            .collect(),
        _ => axis
            .iter()
            .flat_map(|&a| axis.iter().map(move |&b| vec![a, b]))
            .filter(|u| prior.contains(u))
            .collect(),
    }
}

fn check_grid_args(m: &ReducedMechanism, prior: &PriorSpec, resolution: usize) -> Result<()> {
    if !(m.k() == 2 || m.k() == 3) || prior.k != m.k() {
        return Err(Error::UnsupportedK(m.k()));
    }
    if resolution < MIN_RESOLUTION {
        return Err(Error::ResolutionTooCoarse {
            got: resolution,
            min: MIN_RESOLUTION,
        });
    }
    Ok(())
}

fn normalized(logw: &[f64]) -> (Vec<f64>, f64) {
    let lse = log_sum_exp(logw);
    (logw.iter().map(|l| (l - lse).exp()).collect(), lse)
}

/// Exact-up-to-quadrature posterior mean and covariance of `U` over `B(α)`.
pub fn grid_posterior_moments(
    m: &ReducedMechanism,
    counts: &CountVector,
    prior: &PriorSpec,
    resolution: usize,
) -> Result<GridMoments> {
    check_grid_args(m, prior, resolution)?;
    check_counts(m, counts)?;
    let nodes = grid_nodes(prior, resolution);
    let logw: Vec<f64> = nodes
        .iter()
        .map(|u| match log_posterior_g(m, counts, u) {
            Ok(g) => Ok(g),
            Err(Error::DomainViolation(_)) => Ok(f64::NEG_INFINITY),
            Err(e) => Err(e),
        })
        .collect::<Result<_>>()?;
    let (w, log_normalizer) = normalized(&logw);
    let dim = prior.k - 1;
    let mean: Vec<f64> = (0..dim)
        .map(|a| compensated_sum(nodes.iter().zip(&w).map(|(u, wi)| wi * u[a])))
        .collect();
    let covariance = (0..dim)
        .map(|a| {
            (0..dim)
                .map(|b| {
                    compensated_sum(
                        nodes
                            .iter()
                            .zip(&w)
                            .map(|(u, wi)| wi * (u[a] - mean[a]) * (u[b] - mean[b])),
                    )
                })
                .collect()
        })
        .collect();
    let tv_to_gaussian = match gaussian_params(m, counts) {
        Ok(gp) => {
            let loggw: Vec<f64> = nodes
                .iter()
                .map(|u| {
                    let d: Vec<f64> = u.iter().zip(&gp.mean).map(|(a, b)| a - b).collect();
                    -0.5 * gp.precision.quad_form(&d)
                })
                .collect();
            let (gw, _) = normalized(&loggw);
            Some(0.5 * compensated_sum(w.iter().zip(&gw).map(|(a, b)| (a - b).abs())))
        }
        Err(Error::SingularPhi) => None,
        Err(e) => return Err(e),
    };
    Ok(GridMoments {
        mean,
        covariance,
        tv_to_gaussian,
        log_normalizer,
    })
}

/// Fraction of the Gaussian approximation's mass inside `B(α)`, by midpoint
/// quadrature over a ±8σ box around the mean.
pub fn gaussian_mass_in_ball(gp: &GaussianParams, prior: &PriorSpec, resolution: usize) -> f64 {
    let dim = gp.mean.len();
    let sd: Vec<f64> = (0..dim).map(|i| gp.covariance[(i, i)].sqrt()).collect();
    let axes: Vec<Vec<f64>> = (0..dim)
        .map(|a| {
            let (lo, hi) = (gp.mean[a] - 8.0 * sd[a], gp.mean[a] + 8.0 * sd[a]);
            let step = (hi - lo) / resolution as f64;
            (0..resolution)
                .map(|i| lo + (i as f64 + 0.5) * step)
                .collect()
        })
        .collect();
    let nodes: Vec<Vec<f64>> = if dim == 1 {
        axes[0].iter().map(|&a| vec![a]).collect()
    } else {
        axes[0]
            .iter()
            .flat_map(|&a| axes[1].iter().map(move |&b| vec![a, b]))
            .collect()
    };
    let logw: Vec<f64> = nodes
        .iter()
        .map(|u| {
            let d: Vec<f64> = u.iter().zip(&gp.mean).map(|(a, b)| a - b).collect();
            -0.5 * gp.precision.quad_form(&d)
        })
        .collect();
    let (w, _) = normalized(&logw);
    compensated_sum(
        nodes
            .iter()
            .zip(&w)
            .filter(|(u, _)| prior.contains(u))
            .map(|(_, wi)| *wi),
    )
}

/// Monte Carlo Bayes loss of the grid posterior mean.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BayesLoss {
    pub loss: f64,
    pub stderr: f64,
    /// `tr(Φ⁻¹) + 1ᵀΦ⁻¹1`; `None` when Φ is singular.
    pub reference: Option<f64>,
    pub ratio: Option<f64>,
    pub trials: usize,
    /// Per-trial posterior-vs-Gaussian total variation, in trial order.
    pub tv: Vec<f64>,
}

/// Draws `U` from the prior, `Yⁿ` given `U`, and scores the posterior mean with
/// loss `Σ_{i≤k} (U_i - E[U_i|Yⁿ])²`. Trial `i` uses stream `i` of `seed`.
pub fn bayes_loss_mc(
    m: &ReducedMechanism,
    prior: &PriorSpec,
    trials: usize,
    seed: u64,
    resolution: usize,
) -> Result<BayesLoss> {
    check_grid_args(m, prior, resolution)?;
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be at least 1".into()));
    }
    let k = m.k();
    let n = prior.n;
    if prior.half_width() * 2.0 > 1.0 / k as f64 {
        // keep p_U + u a probability vector for every u in the ball
        return Err(Error::InvalidParameter(format!(
            "radius {} too large for k={k}",
            prior.radius
        )));
    }
    let outcomes: Vec<(f64, Option<f64>)> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(seed, trial as u64);
            let u = prior.sample(&mut rng);
            let full = extend_u(&u);
            let p = Distribution::new(full.iter().map(|x| 1.0 / k as f64 + x).collect())?;
            let counts = PrivatizedSampler::new(m, &p)?.counts(n, &mut rng);
            let post = grid_posterior_moments(m, &counts, prior, resolution)?;
            let est = extend_u(&post.mean);
            let loss = full.iter().zip(&est).map(|(a, b)| (a - b) * (a - b)).sum();
            Ok((loss, post.tv_to_gaussian))
        })
        .collect::<Result<_>>()?;
    let losses: Vec<f64> = outcomes.iter().map(|o| o.0).collect();
    let (loss, stderr) = mean_and_stderr(&losses);
    let reference = match trace_plus_quad(&phi_matrix(m, n)?) {
        Ok(r) => Some(r),
        Err(Error::SingularPhi) => None,
        Err(e) => return Err(e),
    };
    Ok(BayesLoss {
        loss,
        stderr,
        reference,
        ratio: reference.map(|r| loss / r),
        trials,
        tv: outcomes.iter().filter_map(|o| o.1).collect(),
    })
}

/// `E|U|²` in the extended coordinates for the uniform prior on `B(α)`.
/// `uᵀ(I+J)u` is a squared norm in whitened coordinates, so its mean over a
/// `(k-1)`-dimensional ellipsoid is `α² (k-1)/(k+1)`.
pub fn prior_mean_sq_norm(prior: &PriorSpec) -> f64 {
    let dim = (prior.k - 1) as f64;
    prior.radius * prior.radius * dim / (dim + 2.0)
}

/// `2k³ / n^{2/13}`: bound on `|g - g₂|` for `u ∈ B(n^{-5/13})` and
/// `Σ|v_i| < 2k n^{8/13}`.
pub fn g_g2_bound(k: usize, n: u64) -> f64 {
    2.0 * (k as f64).powi(3) / (n as f64).powf(2.0 / 13.0)
}

/// Whether `(u, counts)` satisfy the hypotheses of [`g_g2_bound`].
pub fn g_g2_hypotheses(k: usize, counts: &CountVector, u: &[f64]) -> bool {
    let n = counts.n() as f64;
    let vsum: f64 = counts.v().iter().map(|v| v.abs()).sum();
    vsum < 2.0 * k as f64 * n.powf(8.0 / 13.0) && ellipsoid_norm_sq(u) < n.powf(-10.0 / 13.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Log1pBound {
    pub lhs: f64,
    pub rhs: f64,
    pub ok: bool,
}

/// `|log(1+x) - (x - x²/2)| ≤ |x|³` for `x ≥ -2/3`.
pub fn log1p_quadratic_bound(x: f64) -> Result<Log1pBound> {
    if !(x >= -2.0 / 3.0) || !x.is_finite() {
        return Err(Error::DomainViolation(format!("x={x} below -2/3")));
    }
    let lhs = (x.ln_1p() - (x - 0.5 * x * x)).abs();
    let rhs = x.abs().powi(3);
    Ok(Log1pBound {
        lhs,
        rhs,
        ok: lhs <= rhs,
    })
}
