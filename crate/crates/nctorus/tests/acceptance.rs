//! Acceptance gate: one test per criterion, each printing a single
//! `criterion N (...): PASS/FAIL` line with the measured figure of merit.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see every line.

use std::f64::consts::PI;
use std::time::Instant;

use nctorus::algebra::{AlgebraContext, MatrixElement, TorusElement};
use nctorus::cli::s_identity_residual;
use nctorus::functions::{eval_g, eval_k, eval_s};
use nctorus::integrate::{angular_integrate, ricci_density, ricci_density_pipeline, ricci_functional};
use nctorus::modular::{eigen_nabla, x_j, TruncationGrid};
use nctorus::spectral::zeta_ricci;
use nctorus::symbol::{
    b2_doubleprime, check_b2pp_golden, compose, golden_b2pp_angular, laplacian_symbol, parametrix,
    GeneratorTag, LaplacianTarget, MatPart, SymbolEvaluator, SymbolExpr, TauPoly,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

fn verdict(n: u32, name: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("criterion {n} ({name}): {tag} — {detail}");
    assert!(pass, "criterion {n} ({name}) failed: {detail}");
}

/// The noncommutative reference configuration used by criteria 4 and 5.
fn nc_reference() -> (AlgebraContext, TorusElement) {
    (AlgebraContext::new(0.37, 0.0, 1.0), TorusElement::cos_dilaton(0.3, 0.3))
}

#[test]
fn criterion_1_s_identity() {
    let t0 = Instant::now();
    let pts: Vec<f64> = (0..61).map(|i| -3.0 + 6.0 * i as f64 / 60.0).collect();
    let max_resid = pts
        .par_iter()
        .map(|&s| {
            pts.iter()
                .map(|&t| s_identity_residual(s, t).unwrap())
                .fold(0.0f64, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    let secs = t0.elapsed().as_secs_f64();
    verdict(
        1,
        "S-identity on 61×61 grid",
        max_resid < 1e-8 && secs < 30.0,
        &format!("max residual {max_resid:.3e} (tol 1e-8), {secs:.1} s (limit 30 s)"),
    );
}

#[test]
fn criterion_2_b2_golden() {
    let t0 = Instant::now();
    let multiset_ok = check_b2pp_golden().is_ok();
    let reduced = angular_integrate(&b2_doubleprime().unwrap().merge_commuting_tags());
    let want = golden_b2pp_angular().unwrap();
    let angular_ok = reduced.len() == want.len()
        && want.iter().all(|(factors, p, coef)| {
            reduced
                .iter()
                .any(|rw| rw.factors == *factors && rw.p == *p && rw.coef == *coef)
        });
    let secs = t0.elapsed().as_secs_f64();
    verdict(
        2,
        "b₂″ golden multiset + angular display",
        multiset_ok && angular_ok && secs < 10.0,
        &format!(
            "multiset {}, angular {} ({} words), {secs:.1} s (limit 10 s)",
            multiset_ok,
            angular_ok,
            reduced.len()
        ),
    );
}

#[test]
fn criterion_3_commutative_limit() {
    // θ = 0, τ = i, h = 0.5(U + U*): Ric = −(1/4π) Δ₀(log k) e^h ⊗ I₂.
    let ctx = AlgebraContext::new(0.0, 0.0, 1.0);
    let h = TorusElement::cos_dilaton(0.5, 0.0);
    let spec = eigen_nabla(&h, TruncationGrid::new(12, 0), &ctx).unwrap();
    let ric = ricci_density(&h, &spec, &ctx).unwrap();
    let ell = h.scale(Complex64::new(0.5, 0.0));
    let lap0 = ell
        .delta(1)
        .unwrap()
        .delta(1)
        .unwrap()
        .add(&ell.delta(2).unwrap().delta(2).unwrap());
    let eh = h.exp_sa(&ctx).unwrap();
    let expected = lap0.mul(&eh, &ctx).scale(Complex64::new(-1.0 / (4.0 * PI), 0.0));
    let diff = ric.value.sub(&MatrixElement::tensor_id(&expected)).max_coeff();
    verdict(
        3,
        "commutative limit θ=0",
        diff < 1e-8,
        &format!("max coefficient difference {diff:.3e} (tol 1e-8)"),
    );
}

#[test]
fn criterion_4_theorem_vs_pipeline() {
    let t0 = Instant::now();
    let (ctx, h) = nc_reference();
    let spec = eigen_nabla(&h, TruncationGrid::new(8, 0), &ctx).unwrap();
    let a = ricci_density(&h, &spec, &ctx).unwrap();
    let b = ricci_density_pipeline(&h, &spec, &ctx).unwrap();
    let diff = a
        .diagonal_part
        .sub(&b.diagonal_part)
        .max_coeff()
        .max(a.offdiag_part.sub(&b.offdiag_part).max_coeff());
    let secs = t0.elapsed().as_secs_f64();
    verdict(
        4,
        "theorem vs raw pipeline, NC reference",
        diff < 1e-8 && secs < 120.0,
        &format!("max coefficient difference {diff:.3e} (tol 1e-8), {secs:.1} s (limit 120 s)"),
    );
}

#[test]
fn criterion_5_spectral_oracle() {
    let t0 = Instant::now();
    let (ctx, h) = nc_reference();
    let spec = eigen_nabla(&h, TruncationGrid::new(10, 0), &ctx).unwrap();
    let ric = ricci_density(&h, &spec, &ctx).unwrap();
    let grid = TruncationGrid::new(16, 8);

    // F = 1 ⊗ I₂ and one random self-adjoint F = f ⊗ M.
    let mut rng = ChaCha8Rng::seed_from_u64(2026);
    let mut f_rand = TorusElement::one();
    for (m, n) in [(1, 0), (0, 1), (1, 1)] {
        let c = Complex64::new(rng.gen_range(-0.3..0.3), rng.gen_range(-0.3..0.3));
        f_rand = f_rand
            .add(&TorusElement::monomial(m, n, c))
            .add(&TorusElement::monomial(-m, -n, c.conj()));
    }
    let (d1, d2, br, bi) = (
        rng.gen_range(0.5..1.5),
        rng.gen_range(0.5..1.5),
        rng.gen_range(-0.5..0.5),
        rng.gen_range(-0.5..0.5),
    );
    let m_rand = [
        Complex64::new(d1, 0.0),
        Complex64::new(br, bi),
        Complex64::new(br, -bi),
        Complex64::new(d2, 0.0),
    ];
    let id2 = [
        Complex64::new(1.0, 0.0),
        Complex64::default(),
        Complex64::default(),
        Complex64::new(1.0, 0.0),
    ];
    let cases = [
        ("F = I₂", TorusElement::one(), id2),
        ("random F", f_rand, m_rand),
    ];
    let mut detail = String::new();
    let mut pass = true;
    for (label, f, m) in &cases {
        let zeta = zeta_ricci(&h, f, *m, grid, &ctx, 1e-6).unwrap();
        let local = ricci_functional(&ric, &MatrixElement::tensor(f, *m), &h, &ctx).unwrap();
        // The oracle's a₂ is real; measure the full complex-modulus error so
        // any spurious imaginary component of the local pairing counts
        // against the tolerance rather than being asserted away.
        let diff = (Complex64::new(zeta.a2_estimate, 0.0) - local).norm();
        if local.norm() > 1e-6 {
            let rel = diff / local.norm();
            pass &= rel < 0.05;
            detail.push_str(&format!(
                "{label}: a₂ {:.6e} vs local {:.6e}{:+.2e}i (rel {:.2e}); ",
                zeta.a2_estimate, local.re, local.im, rel
            ));
        } else {
            // The local value vanishes identically (total curvature of the
            // torus is zero), so a relative comparison is ill-defined; the
            // oracle must reproduce zero within its own fit resolution.
            pass &= diff <= (5.0 * zeta.stderr).max(1e-8);
            detail.push_str(&format!(
                "{label}: a₂ {:.3e} vs local {:.3e} (|diff| {:.2e} ≤ max(5·stderr {:.2e}, 1e-8)); ",
                zeta.a2_estimate, local.re, diff, 5.0 * zeta.stderr
            ));
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    detail.push_str(&format!("{secs:.0} s (limit 300 s)"));
    verdict(5, "spectral oracle N=16 within 5%", pass && secs < 300.0, &detail);
}

#[test]
fn criterion_6_flat_case() {
    let ctx = AlgebraContext::new(0.37, 0.0, 1.0);
    let h = TorusElement::zero();
    let spec = eigen_nabla(&h, TruncationGrid::new(4, 0), &ctx).unwrap();
    let ric = ricci_density(&h, &spec, &ctx).unwrap();
    let coeff_max = ric.value.max_coeff();
    let id2 = [
        Complex64::new(1.0, 0.0),
        Complex64::default(),
        Complex64::default(),
        Complex64::new(1.0, 0.0),
    ];
    let zeta = zeta_ricci(&h, &TorusElement::one(), id2, TruncationGrid::new(12, 4), &ctx, 1e-6)
        .unwrap();
    let a2_ok = zeta.a2_estimate.abs() <= zeta.stderr + 1e-10;
    verdict(
        6,
        "flat case h=0",
        coeff_max < 1e-12 && a2_ok,
        &format!(
            "density max coefficient {coeff_max:.3e} (tol 1e-12); spectral a₂ {:.3e} ± {:.3e}",
            zeta.a2_estimate, zeta.stderr
        ),
    );
}

#[test]
fn criterion_7_parametrix_remainder() {
    // compose(b₀+b₁+b₂, P + 1) − 1 evaluated numerically must decay at least
    // like |ξ|^{−3} (log-log slope ≤ −2.8) along every sampled ray.
    let ctx = AlgebraContext::new(0.37, 0.2, 0.9);
    let h = TorusElement::cos_dilaton(0.2, 0.1);
    let (a2, a1, a0) = laplacian_symbol(LaplacianTarget::DeRham);
    let (b0, b1, b2) = parametrix(&a2, &a1, &a0).unwrap();
    let b = b0.add(&b1).add(&b2);
    let mut p_plus = a2.add(&a1).add(&a0);
    p_plus.add_word(Vec::new(), MatPart::I, 0, 0, TauPoly::one());
    let composed = compose(&b, &p_plus, 2).unwrap();
    // Grid 6 keeps the modular-grid truncation error (~4e-6 at grid 4 for
    // this dilaton) well below the smallest remainder sampled (~6e-8).
    let eval = SymbolEvaluator::new(&h, &ctx, 6).unwrap();

    let slopes: Vec<f64> = (0..8)
        .into_par_iter()
        .map(|k| {
            let phi = 2.0 * PI * k as f64 / 8.0 + 0.2;
            let pts: Vec<(f64, f64)> = (4..=8)
                .map(|j| {
                    let r = 2f64.powi(j);
                    let norm = eval
                        .remainder_norm(&composed, (r * phi.cos(), r * phi.sin()))
                        .unwrap();
                    (r.ln(), norm.ln())
                })
                .collect();
            // Least-squares slope of ln‖remainder‖ against ln r.
            let n = pts.len() as f64;
            let sx: f64 = pts.iter().map(|p| p.0).sum();
            let sy: f64 = pts.iter().map(|p| p.1).sum();
            let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
            let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
            (n * sxy - sx * sy) / (n * sxx - sx * sx)
        })
        .collect();
    let worst_slope = slopes.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    verdict(
        7,
        "parametrix remainder decay",
        worst_slope <= -2.8,
        &format!("worst log-log slope {worst_slope:.3} over 8 rays (limit −2.8)"),
    );
}

#[test]
fn criterion_8_algebra_properties() {
    let ctx = AlgebraContext::new(0.37, 0.2, 0.9);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut random_element = |band: i32, scale: f64| {
        let mut e = TorusElement::zero();
        for m in -band..=band {
            for n in -band..=band {
                e.coeffs.insert(
                    (m, n),
                    Complex64::new(
                        rng.gen_range(-scale..scale),
                        rng.gen_range(-scale..scale),
                    ),
                );
            }
        }
        e
    };
    let tol = 1e-8;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let a = random_element(3, 1.0);
        let b = random_element(3, 1.0);
        // Leibniz rule δ_j(ab) = δ_j(a)b + aδ_j(b).
        for j in [1u8, 2u8] {
            let lhs = a.mul(&b, &ctx).delta(j).unwrap();
            let rhs = a.delta(j).unwrap().mul(&b, &ctx).add(&a.mul(&b.delta(j).unwrap(), &ctx));
            worst = worst.max(lhs.sub(&rhs).max_coeff());
        }
        // Trace property φ(ab) = φ(ba).
        worst = worst
            .max((a.mul(&b, &ctx).trace_phi() - b.mul(&a, &ctx).trace_phi()).norm());
        // Integration by parts φ(δ_j(a)b) = −φ(aδ_j(b)).
        for j in [1u8, 2u8] {
            let lhs = a.delta(j).unwrap().mul(&b, &ctx).trace_phi();
            let rhs = -a.mul(&b.delta(j).unwrap(), &ctx).trace_phi();
            worst = worst.max((lhs - rhs).norm());
        }
        // Involution (ab)* = b*a*.
        let lhs = a.mul(&b, &ctx).adjoint(&ctx);
        let rhs = b.adjoint(&ctx).mul(&a.adjoint(&ctx), &ctx);
        worst = worst.max(lhs.sub(&rhs).max_coeff());
    }
    // δ_j(k²) = k² g(∇)(δ_j log k) on random small self-adjoint dilatons.
    let mut worst_id = 0.0f64;
    for _ in 0..100 {
        // Band-1 support: the truncation error of the N = 10 grid for the
        // spectral side is then far below the tolerance.
        let c = random_element(1, 0.1);
        let h = c.add(&c.adjoint(&ctx));
        let spec = eigen_nabla(&h, TruncationGrid::new(10, 0), &ctx).unwrap();
        let k2 = h.exp_sa(&ctx).unwrap();
        for j in [1u8, 2u8] {
            let lhs = k2.delta(j).unwrap();
            let rhs = k2.mul(&spec.apply_one_var(eval_g, &x_j(&h, j).unwrap()), &ctx);
            worst_id = worst_id.max(lhs.sub(&rhs).max_coeff());
        }
    }
    verdict(
        8,
        "algebra property suite, 100 random inputs",
        worst < tol && worst_id < tol,
        &format!("max algebraic defect {worst:.3e}, max δ_j(k²) defect {worst_id:.3e} (tol 1e-8)"),
    );
}

#[test]
fn criterion_9_scalar_function_anchors() {
    let ek = eval_k(0.0);
    let es = eval_s(0.0, 0.0);
    let pass = (ek - 1.0).abs() < 1e-10 && (es - 2.0 / 3.0).abs() < 1e-10;
    verdict(
        9,
        "scalar-function anchors",
        pass,
        &format!("K(0) = {ek:.12} (want 1), S(0,0) = {es:.12} (want 2/3)"),
    );
}

// Keep unused-import lints honest for items only used in some criteria.
#[allow(dead_code)]
fn _typecheck(_: &SymbolExpr, _: &GeneratorTag) {}
