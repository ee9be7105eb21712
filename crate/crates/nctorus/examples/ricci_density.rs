//! Compute the Ricci density of a conformally curved noncommutative torus
//! through both routes — the closed-form curvature theorem and the raw
//! symbol/rearrangement pipeline — and print the leading coefficients.
//!
//! Run with `cargo run --release --example ricci_density`.

use nctorus::algebra::{AlgebraContext, TorusElement};
use nctorus::integrate::{ricci_density, ricci_density_pipeline};
use nctorus::modular::{eigen_nabla, TruncationGrid};

fn show(label: &str, e: &TorusElement) {
    println!("{label}:");
    for (&(m, n), c) in &e.coeffs {
        if c.norm() > 1e-10 {
            println!("  U^{m:+} V^{n:+}  {:+.6e} {:+.6e}i", c.re, c.im);
        }
    }
}

fn main() -> nctorus::Result<()> {
    // The noncommutative reference configuration:
    // θ = 0.37, τ = i, h = 0.3(U + U* + V + V*).
    let ctx = AlgebraContext::new(0.37, 0.0, 1.0);
    let h = TorusElement::cos_dilaton(0.3, 0.3);
    let spec = eigen_nabla(&h, TruncationGrid::new(8, 0), &ctx)?;

    let theorem = ricci_density(&h, &spec, &ctx)?;
    let pipeline = ricci_density_pipeline(&h, &spec, &ctx)?;

    show("diagonal part (⊗ I₂), theorem route", &theorem.diagonal_part);
    show("off-diagonal part (⊗ σ), theorem route", &theorem.offdiag_part);

    let diff = theorem
        .diagonal_part
        .sub(&pipeline.diagonal_part)
        .max_coeff()
        .max(theorem.offdiag_part.sub(&pipeline.offdiag_part).max_coeff());
    println!("theorem vs pipeline, max coefficient difference: {diff:.3e}");
    Ok(())
}
