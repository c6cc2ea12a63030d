//! Hand-evaluated reference values.

use ldpopt::bayes_lab::{gaussian_params, log1p_quadratic_bound, log_posterior_g};
use ldpopt::estimation::{
    empirical_coefficients, empirical_estimate, least_squares_estimate, project_to_simplex,
    sample_privatized, CountVector, SubsetCounts,
};
use ldpopt::linalg::Matrix;
use ldpopt::lower_bound::{
    delta, delta0, fisher_information, phi_matrix, row_bound_check, trace_plus_quad, w_vector,
    zac_gap,
};
use ldpopt::mechanisms::{
    krappor_mechanism, krr_mechanism, marginal, reduce_alphabet, subset_mechanism, verify_ldp,
};
use ldpopt::risk::{analytic_l2_risk, big_m, lower_bound_dominant, optimal_d, worst_case_risk};
use ldpopt::{Distribution, MechanismLabel};

const LN2: f64 = std::f64::consts::LN_2;

fn ln3() -> f64 {
    3f64.ln()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[test]
fn subset_k3_ln2_column() {
    let m = subset_mechanism(3, LN2, 1).unwrap();
    assert_eq!(m.num_outputs(), 3);
    let bits = m.output_bits().unwrap();
    assert_eq!(bits[0], vec![true, false, false]);
    assert_eq!(bits[2], vec![false, false, true]);
    let col: Vec<f64> = (0..3).map(|y| m.prob(y, 0)).collect();
    assert!(close(col[0], 0.5, 1e-15) && close(col[1], 0.25, 1e-15) && close(col[2], 0.25, 1e-15));
    let rep = verify_ldp(&m, LN2);
    assert!(rep.ok && rep.extremal);
    assert!(close(rep.worst_ratio, 2.0, 1e-12));
}

#[test]
fn subset_k2_is_binary_randomized_response() {
    let eps = 0.8_f64;
    let m = subset_mechanism(2, eps, 1).unwrap();
    let e = eps.exp();
    assert!(close(m.prob(0, 0), e / (e + 1.0), 1e-15));
    assert!(close(m.prob(1, 0), 1.0 / (e + 1.0), 1e-15));
}

#[test]
fn krr_k3_ln2() {
    let m = krr_mechanism(3, LN2).unwrap();
    assert!(close(m.prob(0, 0), 0.5, 1e-15));
    assert!(close(m.prob(1, 0), 0.25, 1e-15));
}

#[test]
fn krappor_k2_output_10_under_input_1() {
    let eps = 1.4_f64;
    let m = krappor_mechanism(2, eps).unwrap();
    assert_eq!(m.num_outputs(), 4);
    let bits = m.output_bits().unwrap();
    let y = bits.iter().position(|b| b == &vec![true, false]).unwrap();
    let h = (eps / 2.0).exp();
    assert!(close(m.prob(y, 0), (h / (1.0 + h)).powi(2), 1e-15));
    assert!(close(verify_ldp(&m, eps).worst_ratio, eps.exp(), 1e-12));
}

#[test]
fn proportional_rows_merge() {
    let m = ldpopt::Mechanism::new(
        2,
        LN2,
        MechanismLabel::Custom,
        vec![vec![0.1, 0.2], vec![0.2, 0.4], vec![0.7, 0.4]],
    )
    .unwrap();
    let r = reduce_alphabet(&m);
    assert_eq!(r.num_classes(), 2);
    assert!(close(r.q_cond()[0][0], 0.3, 1e-15) && close(r.q_cond()[0][1], 0.6, 1e-15));
}

#[test]
fn rr_marginal_by_hand() {
    let r = reduce_alphabet(&subset_mechanism(2, ln3(), 1).unwrap());
    let law = marginal(&r, &Distribution::new(vec![0.9, 0.1]).unwrap()).unwrap();
    assert!(close(law[0], 0.7, 1e-15) && close(law[1], 0.3, 1e-15));
}

#[test]
fn uniform_sampling_is_balanced() {
    let m = subset_mechanism(3, LN2, 1).unwrap();
    let c = sample_privatized(&m, &Distribution::uniform(3), 1_000_000, 11).unwrap();
    for f in c.frequencies() {
        assert!(close(f, 1.0 / 3.0, 5e-3));
    }
}

#[test]
fn empirical_estimator_k3_ln2() {
    let (a, b) = empirical_coefficients(3, LN2, 1).unwrap();
    assert!(close(a, 4.0, 1e-12) && close(b, 1.0, 1e-12));
    let counts = SubsetCounts::new(100, vec![100, 0, 0], 1).unwrap();
    let est = empirical_estimate(&counts, 3, LN2, 1)
        .unwrap()
        .with_projection();
    assert_eq!(est.p_hat.len(), 3);
    assert!(close(est.p_hat[0], 3.0, 1e-12) && close(est.p_hat[1], -1.0, 1e-12));
    let proj = est.projected.unwrap();
    assert!(close(proj[0], 1.0, 1e-15) && proj[1] == 0.0);
}

#[test]
fn least_squares_inverts_rr_channel() {
    let r = reduce_alphabet(&subset_mechanism(2, ln3(), 1).unwrap());
    let counts = CountVector::new(vec![70, 30], r.q_bar());
    let est = least_squares_estimate(&counts, &r).unwrap();
    assert!(close(est.p_hat[0], 0.9, 1e-12) && close(est.p_hat[1], 0.1, 1e-12));
}

#[test]
fn projection_of_corner_overshoot() {
    let p = project_to_simplex(&[3.0, -1.0, -1.0]);
    assert_eq!(p.probs(), &[1.0, 0.0, 0.0]);
}

#[test]
fn risk_spot_values() {
    let u3 = Distribution::uniform(3);
    assert!(close(
        analytic_l2_risk(3, LN2, 1, 1, &u3).unwrap(),
        32.0 / 3.0,
        1e-12
    ));
    assert!(close(
        worst_case_risk(10, LN2, 3, 1).unwrap(),
        13689.0 / 210.0,
        1e-11
    ));
    assert!(close(worst_case_risk(2, ln3(), 1, 1).unwrap(), 2.0, 1e-12));
    let od = optimal_d(10, LN2).unwrap();
    assert_eq!(od.d_star, 3);
    assert!(close(od.objective, 169.0 / 21.0, 1e-12));
    assert!(close(big_m(10, LN2).unwrap(), 13689.0 / 210.0, 1e-11));
    assert!(close(big_m(2, ln3()).unwrap(), 2.0, 1e-12));
    assert!(close(big_m(3, LN2).unwrap(), 32.0 / 3.0, 1e-12));
    assert!(close(
        lower_bound_dominant(10, LN2, 100_000).unwrap(),
        13689.0 / 210.0 / 1e5,
        1e-15
    ));
}

#[test]
fn rr_phi_w_and_trace_functional() {
    let r = reduce_alphabet(&subset_mechanism(2, ln3(), 1).unwrap());
    let phi = phi_matrix(&r, 1).unwrap();
    assert!(close(phi[(0, 0)], 1.0, 1e-15));
    assert!(close(
        fisher_information(&r, 1).unwrap()[(0, 0)],
        1.0,
        1e-14
    ));
    assert!(close(trace_plus_quad(&phi).unwrap(), 2.0, 1e-12));
    let counts = CountVector::new(vec![3, 1], r.q_bar());
    assert_eq!(counts.v(), &[1.0, -1.0]);
    let w = w_vector(&r, &counts).unwrap();
    assert!(close(w[0], 2.0, 1e-14));
    let gp = gaussian_params(&r, &counts).unwrap();
    assert!(close(gp.mean[0], 0.5, 1e-14));
}

#[test]
fn trace_functional_on_i_plus_j() {
    let a = Matrix::identity_plus_ones(2);
    assert!(close(trace_plus_quad(&a).unwrap(), 2.0, 1e-14));
    let gap = zac_gap(&a.scale(3.7)).unwrap();
    assert!(close(gap.lhs, 2.0, 1e-12) && gap.slack.abs() <= 1e-12);
    let diag = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 2.0]]);
    assert!(zac_gap(&diag).unwrap().slack > 0.0);
}

#[test]
fn rr_delta_and_delta0() {
    let r = reduce_alphabet(&subset_mechanism(2, ln3(), 1).unwrap());
    assert!(close(delta(&r).unwrap().delta, 0.5f64.sqrt(), 1e-12));
    assert!(close(delta0(2, ln3()).unwrap(), 0.125, 1e-14));
    assert!(close(
        delta0(10, LN2).unwrap(),
        (210.0 / (32.0 * 13689.0f64)).sqrt(),
        1e-14
    ));
}

#[test]
fn row_bound_equality_only_at_d_star() {
    for k in 3..=8 {
        for eps in [0.3, LN2, 1.5] {
            let ds = optimal_d(k, eps).unwrap().d_star;
            for d in 1..k {
                let rb =
                    row_bound_check(&reduce_alphabet(&subset_mechanism(k, eps, d).unwrap()), eps)
                        .unwrap();
                assert!(rb.ok);
                if d == ds {
                    assert!((rb.max_row_moment - rb.bound).abs() <= 1e-12, "k={k} d={d}");
                } else if ldpopt::risk::subset_objective(k, eps, d)
                    > ldpopt::risk::subset_objective(k, eps, ds)
                {
                    assert!(rb.max_row_moment < rb.bound - 1e-12, "k={k} d={d}");
                }
            }
            let krr = reduce_alphabet(&krr_mechanism(k, eps).unwrap());
            assert!(row_bound_check(&krr, eps).unwrap().ok);
        }
    }
}

#[test]
fn g_by_hand_for_rr() {
    let r = reduce_alphabet(&subset_mechanism(2, ln3(), 1).unwrap());
    let counts = CountVector::new(vec![3, 1], r.q_bar());
    // x₁ = u(q₁₁ - q₁₂)/q₁ = 0.05·(1/2)/(1/2) = 0.05, x₂ = -0.05
    let hand = 3.0 * 1.05f64.ln() + 0.95f64.ln();
    assert!(close(
        log_posterior_g(&r, &counts, &[0.05]).unwrap(),
        hand,
        1e-14
    ));
    // P(y; p) for RR with p₁ = 0.55: m = (0.75·0.55 + 0.25·0.45, …) = (0.525, 0.475)
    let direct = 3.0 * (0.525f64 / 0.5).ln() + (0.475f64 / 0.5).ln();
    assert!(close(hand, direct, 1e-14));
    assert_eq!(log_posterior_g(&r, &counts, &[0.0]).unwrap(), 0.0);
}

#[test]
fn log1p_bound_at_one_half() {
    let b = log1p_quadratic_bound(0.5).unwrap();
    assert!(close(b.lhs, (1.5f64.ln() - 0.375).abs(), 1e-15));
    assert!(close(b.lhs, 0.030_465_108_1, 1e-9));
    assert!(b.ok && close(b.rhs, 0.125, 1e-15));
    assert!(log1p_quadratic_bound(-0.7).is_err());
}
