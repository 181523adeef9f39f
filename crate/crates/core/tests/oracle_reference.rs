//! Reference values computed independently at 40 significant digits.

#![allow(clippy::excessive_precision, clippy::type_complexity)]

use condflow::oracle::{kl_p_q, kl_q_p, posteriors_in_unit_ball, solve_dimension, CounterexampleParams};
use condflow::training::required_logit_gap;

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * b.abs()
}

// (lambda1, lambda2, dim, shell, KL(q||p), KL(p||q), p(0|x), q(0|x)) for |x| < 1.
const CASES: [(f64, f64, usize, f64, f64, f64, f64, f64); 4] = [
    (0.007, 7.070707070707072e-05, 54, 0.3, 0.0070174335901022703, 0.057466031672689766, 0.99, 0.0098468765184396928),
    (0.3, 0.1, 3, 0.5, 3.2737960280529563e-5, 3.2816028976510482e-5, 0.75, 0.74766355140186915),
    (0.05, 0.5, 2, 1.0, 0.22506789456035229, 0.14409744353931385, 0.090909090909090914, 0.33333333333333333),
    (0.2, 0.01, 10, 1.0, 0.21675225345853966, 0.88667356929996409, 0.95238095238095238, 0.088967971530249109),
];

#[test]
fn closed_form_kl_matches_reference() {
    for (l1, l2, dim, shell, qp, pq, _, _) in CASES {
        let p = CounterexampleParams { lambda1: l1, lambda2: l2, shell, dim, epsilon: 1.0, delta: 0.25 };
        assert!(close(kl_q_p(&p), qp, 1e-10), "KL(q||p) {} vs {qp}", kl_q_p(&p));
        assert!(close(kl_p_q(&p), pq, 1e-10), "KL(p||q) {} vs {pq}", kl_p_q(&p));
    }
}

#[test]
fn unit_ball_posteriors_match_reference() {
    for (l1, l2, dim, shell, _, _, p0, q0) in CASES {
        let p = CounterexampleParams { lambda1: l1, lambda2: l2, shell, dim, epsilon: 1.0, delta: 0.25 };
        let (a, b) = posteriors_in_unit_ball(&p).unwrap();
        assert!(close(a, p0, 1e-12) && close(b, q0, 1e-12), "({a}, {b}) vs ({p0}, {q0})");
    }
}

#[test]
fn solver_interval_matches_reference() {
    let s = solve_dimension(0.1, 0.01, 0.3).unwrap();
    assert_eq!(s.dim, 54);
    assert!(close(s.lambda1_interval.0, 0.0068917476150402577, 1e-10));
    assert!(close(s.lambda1_interval.1, 0.0070583234939044472, 1e-10));
}

#[test]
fn logit_gap_matches_reference() {
    assert!(close(required_logit_gap(10, 1e-5, 10.0).unwrap(), 5.9999956570334661, 1e-12));
}
