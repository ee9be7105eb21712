//! Property tests of the structural invariants: algebra laws under the
//! twisted product, symmetry of the curvature functions, and consistency of
//! the modular functional calculus.

use nctorus::algebra::{AlgebraContext, TorusElement};
use nctorus::cli::s_identity_residual;
use nctorus::functions::{eval_ga, eval_gb};
use nctorus::integrate::angular_moment;
use num_complex::Complex64;
use proptest::prelude::*;

fn ctx() -> AlgebraContext {
    AlgebraContext::new(0.37, 0.2, 0.9)
}

/// A small random element with support in the band |m|, |n| ≤ 2.
fn element() -> impl Strategy<Value = TorusElement> {
    proptest::collection::vec(
        ((-2i32..=2, -2i32..=2), (-1.0f64..1.0, -1.0f64..1.0)),
        1..6,
    )
    .prop_map(|entries| {
        let mut e = TorusElement::zero();
        for ((m, n), (re, im)) in entries {
            e.coeffs.insert((m, n), Complex64::new(re, im));
        }
        e
    })
}

proptest! {
    #[test]
    fn product_is_associative(a in element(), b in element(), c in element()) {
        let x = ctx();
        let lhs = a.mul(&b, &x).mul(&c, &x);
        let rhs = a.mul(&b.mul(&c, &x), &x);
        prop_assert!(lhs.sub(&rhs).max_coeff() < 1e-10);
    }

    #[test]
    fn adjoint_is_antimultiplicative(a in element(), b in element()) {
        let x = ctx();
        let lhs = a.mul(&b, &x).adjoint(&x);
        let rhs = b.adjoint(&x).mul(&a.adjoint(&x), &x);
        prop_assert!(lhs.sub(&rhs).max_coeff() < 1e-10);
    }

    #[test]
    fn trace_is_tracial_and_adjoint_compatible(a in element(), b in element()) {
        let x = ctx();
        prop_assert!((a.mul(&b, &x).trace_phi() - b.mul(&a, &x).trace_phi()).norm() < 1e-10);
        prop_assert!((a.adjoint(&x).trace_phi() - a.trace_phi().conj()).norm() < 1e-12);
    }

    #[test]
    fn derivations_satisfy_leibniz(a in element(), b in element(), j in 1u8..=2) {
        let x = ctx();
        let lhs = a.mul(&b, &x).delta(j).unwrap();
        let rhs = a.delta(j).unwrap().mul(&b, &x).add(&a.mul(&b.delta(j).unwrap(), &x));
        prop_assert!(lhs.sub(&rhs).max_coeff() < 1e-9);
    }

    #[test]
    fn hs_norm_is_unitarily_invariant(a in element(), m in -3i32..=3, n in -3i32..=3) {
        let x = ctx();
        let u = TorusElement::monomial(m, n, Complex64::new(1.0, 0.0));
        let rotated = u.mul(&a, &x).mul(&u.adjoint(&x), &x);
        prop_assert!((rotated.hs_norm() - a.hs_norm()).abs() < 1e-10);
    }

    #[test]
    fn s_identity_holds_at_random_points(s in -2.5f64..2.5, t in -2.5f64..2.5) {
        // The two-variable functional identity behind the curvature kernels
        // must hold at arbitrary points, not only on the acceptance grid.
        prop_assert!(s_identity_residual(s, t).unwrap() < 1e-8);
    }

    #[test]
    fn ga_matches_closed_form(s1 in 0.2f64..2.5, s2 in 0.2f64..2.5) {
        // Ga(s₁,s₂) = ∫₀¹ e^{s(s₁+s₂)} (e^{(1−s)s₁} − 1)/s₁ ds
        //           = [e^{s₁}(e^{s₂}−1)/s₂ − (e^{s₁+s₂}−1)/(s₁+s₂)]/s₁,
        // an elementary closed form valid away from the removable zeros.
        let closed = ((s1.exp() * (s2.exp() - 1.0) / s2)
            - ((s1 + s2).exp() - 1.0) / (s1 + s2))
            / s1;
        prop_assert!((eval_ga(s1, s2) - closed).abs() < 1e-10 * closed.abs().max(1.0));
    }

    #[test]
    fn gb_matches_closed_form(s1 in 0.2f64..2.5, s2 in 0.2f64..2.5) {
        // Gb(s₁,s₂) = [(e^{s₁+s₂}−1)/(s₁+s₂) − (e^{s₁}−1)/s₁]/s₂.
        let closed = (((s1 + s2).exp() - 1.0) / (s1 + s2) - (s1.exp() - 1.0) / s1) / s2;
        prop_assert!((eval_gb(s1, s2) - closed).abs() < 1e-10 * closed.abs().max(1.0));
    }

    #[test]
    fn odd_angular_moments_vanish(a in 0i64..6, b in 0i64..6) {
        use num_traits::Zero;
        if a % 2 == 1 || b % 2 == 1 {
            prop_assert!(angular_moment(a, b).is_zero());
        }
    }
}
