//! Expand the σ-proportional parametrix term b₂″ of the de Rham Laplacian in
//! normal form, check it against the frozen golden multiset, and print the
//! four-word angular reduction that sources the antisymmetric curvature term.
//!
//! Run with `cargo run --example b2_report`.

use nctorus::integrate::angular_integrate;
use nctorus::symbol::{b2_doubleprime, check_b2pp_golden};

fn main() -> nctorus::Result<()> {
    let b2pp = b2_doubleprime()?;
    println!("b₂″ normal form: {} words", b2pp.len());
    match check_b2pp_golden() {
        Ok(()) => println!("golden multiset check: exact match"),
        Err(e) => println!("golden multiset check: MISMATCH — {e}"),
    }

    let reduced = angular_integrate(&b2pp.merge_commuting_tags());
    println!("angular reduction ({} words, overall 1/(2π Imτ) ∫ r^p dr):", reduced.len());
    for rw in &reduced {
        let labels: Vec<String> = rw.factors.iter().map(|t| t.label()).collect();
        println!("  p = {}  [{}]  coef {:?}", rw.p, labels.join(" "), rw.coef);
    }
    Ok(())
}
