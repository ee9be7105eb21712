//! Verify the rearrangement identity connecting the radial kernels F₁₁₁ and
//! F₁₂₁ to the two-variable curvature function S:
//!
//! ```text
//! F₁₁₁(e^s, e^t) g₁(e^s) g(e^t) − F₁₂₁(e^s, e^t) g₂(e^s) g(e^t) = S(s, t)
//! ```
//!
//! on a grid over [−3, 3]², reporting the maximum and mean residual.
//!
//! Run with `cargo run --release --example verify_s_identity`.

use nctorus::cli::s_identity_residual;
use rayon::prelude::*;

fn main() -> nctorus::Result<()> {
    let n = 31usize;
    let pts: Vec<f64> = (0..n).map(|i| -3.0 + 6.0 * i as f64 / (n - 1) as f64).collect();
    let residuals: Vec<f64> = pts
        .par_iter()
        .flat_map_iter(|&s| pts.iter().map(move |&t| (s, t)))
        .map(|(s, t)| s_identity_residual(s, t).unwrap())
        .collect();
    let max = residuals.iter().cloned().fold(0.0f64, f64::max);
    let mean = residuals.iter().sum::<f64>() / residuals.len() as f64;
    println!("S-identity residual over a {n}×{n} grid on [−3, 3]²:");
    println!("  max  = {max:.3e}");
    println!("  mean = {mean:.3e}");
    Ok(())
}
