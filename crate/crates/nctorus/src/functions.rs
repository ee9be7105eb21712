//! Scalar functions of the modular derivative that assemble the curvature:
//! the one-variable kernel K, the two-variable kernels H and S, the
//! divided-difference functions f and g, and the rearrangement pair
//! functions G_a, G_b.
//!
//! All the closed forms are ratios of hyperbolic expressions with removable
//! singularities on the lines s = 0, t = 0, s + t = 0.  Direct evaluation is
//! used away from those lines; a frozen degree-12 Taylor expansion covers the
//! box max(|s|,|t|) ≤ 0.1, and narrow bands around each line are bridged by
//! 6-node Lagrange interpolation transverse to the line.

use crate::error::Result;
use once_cell::sync::Lazy;
use serde::Deserialize;
use std::collections::HashMap;

/// Radius of the box around the origin where the Taylor expansion is used.
pub const TAYLOR_RADIUS: f64 = 0.1;

const SERIES_JSON: &str = include_str!("../data/series_data.json");

#[derive(Deserialize)]
struct SeriesData {
    #[serde(rename = "S_taylor")]
    s_taylor: HashMap<String, String>,
    #[serde(rename = "H_taylor")]
    h_taylor: HashMap<String, String>,
}

/// Taylor coefficients by (power of s, power of t).
struct Series(Vec<(u32, u32, f64)>);

impl Series {
    fn eval(&self, s: f64, t: f64) -> f64 {
        self.0.iter().map(|&(a, b, c)| c * s.powi(a as i32) * t.powi(b as i32)).sum()
    }
}

fn parse_ratio(s: &str) -> f64 {
    match s.split_once('/') {
        Some((num, den)) => num.parse::<f64>().unwrap() / den.parse::<f64>().unwrap(),
        None => s.parse::<f64>().unwrap(),
    }
}

static SERIES: Lazy<(Series, Series)> = Lazy::new(|| {
    let data: SeriesData = serde_json::from_str(SERIES_JSON).expect("embedded series data");
    let load = |m: &HashMap<String, String>| {
        Series(
            m.iter()
                .map(|(k, v)| {
                    let (a, b) = k.split_once(',').expect("key a,b");
                    (a.parse().unwrap(), b.parse().unwrap(), parse_ratio(v))
                })
                .collect(),
        )
    };
    (load(&data.s_taylor), load(&data.h_taylor))
});

/// One-variable curvature kernel, K(0) = 1.
pub fn eval_k(u: f64) -> f64 {
    let ratio = if u.abs() < 1e-4 {
        // sinh(u/2)/u = 1/2 + u²/48 + u⁴/3840 + …
        0.5 + u * u / 48.0
    } else {
        (0.5 * u).sinh() / u
    };
    (0.5 + ratio) / (0.25 * u).cosh().powi(2)
}

fn s_direct(s: f64, t: f64) -> f64 {
    let w = s + t;
    let num = 2.0 * (0.5 * t).sinh().powi(2) * (s.sinh() - s)
        + 2.0 * (0.5 * s).sinh().powi(2) * (t.sinh() - t);
    let den = s * t * (0.5 * s).sinh() * (0.5 * t).sinh() * (0.5 * w).sinh();
    num / den
}

fn h_direct(s: f64, t: f64) -> f64 {
    let w = s + t;
    let cs = 2.0 * (0.5 * s).sinh().powi(2);
    let ct = 2.0 * (0.5 * t).sinh().powi(2);
    let nreg = w * (t * cs - s * ct) - (s - t) * (s.sinh() * ct + t.sinh() * cs);
    let num = -2.0 * (0.25 * w).sinh().powi(2) * nreg;
    let den = s * t * w * (0.5 * s).sinh() * (0.5 * t).sinh() * (0.5 * w).sinh().powi(2);
    num / den
}

/// 6-node Lagrange interpolation of x ↦ f(x) across a removable singularity
/// at x = x0, sampling at x0 ± 0.01, ±0.02, ±0.03.
fn bridge(f: impl Fn(f64) -> f64, x0: f64, x: f64) -> f64 {
    const OFFS: [f64; 6] = [-0.03, -0.02, -0.01, 0.01, 0.02, 0.03];
    let xs: Vec<f64> = OFFS.iter().map(|&o| x0 + o).collect();
    let ys: Vec<f64> = xs.iter().map(|&xi| f(xi)).collect();
    let mut acc = 0.0;
    for i in 0..6 {
        let mut l = ys[i];
        for j in 0..6 {
            if j != i {
                l *= (x - xs[j]) / (xs[i] - xs[j]);
            }
        }
        acc += l;
    }
    acc
}

/// Symmetric two-variable kernel S; S(0,0) = 2/3.
pub fn eval_s(s: f64, t: f64) -> f64 {
    if s.abs() <= TAYLOR_RADIUS && t.abs() <= TAYLOR_RADIUS {
        return SERIES.0.eval(s, t);
    }
    // Inside the axis/antidiagonal bands the direct form divides 0/0; bridge
    // across the offending line.  The regrouped numerator keeps everything
    // else cancellation-free, so the bands can be narrow.
    if s.abs() < 1e-6 {
        return bridge(|x| eval_s(x, t), 0.0, s);
    }
    if t.abs() < 1e-6 {
        return bridge(|x| eval_s(s, x), 0.0, t);
    }
    if (s + t).abs() < 1e-3 {
        return bridge(|x| s_direct(s, x), -s, t);
    }
    s_direct(s, t)
}

/// Antisymmetric-weight two-variable kernel H; H(0,0) = 0.
pub fn eval_h(s: f64, t: f64) -> f64 {
    if s.abs() <= TAYLOR_RADIUS && t.abs() <= TAYLOR_RADIUS {
        return SERIES.1.eval(s, t);
    }
    if s.abs() < 1e-3 {
        return bridge(|x| h_direct_safe(x, t), 0.0, s);
    }
    if t.abs() < 1e-3 {
        return bridge(|x| h_direct_safe(s, x), 0.0, t);
    }
    if (s + t).abs() < 1e-3 {
        return bridge(|x| h_direct(s, x), -s, t);
    }
    h_direct(s, t)
}

// Used while bridging one line: the sample points may still sit close to a
// different singular line, so guard the remaining lines recursively.
fn h_direct_safe(s: f64, t: f64) -> f64 {
    if (s + t).abs() < 1e-3 {
        bridge(|x| h_direct(s, x), -s, t)
    } else {
        h_direct(s, t)
    }
}

/// Divided difference f(s) = 2(e^{s/2} − 1)/s, f(0) = 1.
pub fn eval_f(s: f64) -> f64 {
    if s.abs() < 1e-9 {
        1.0 + s / 4.0
    } else {
        2.0 * (0.5 * s).exp_m1() / s
    }
}

/// g(s) = 2(e^s − 1)/s, g(0) = 2: the kernel of δ_j(k²) = k² g(∇)(x_j).
pub fn eval_g(s: f64) -> f64 {
    if s.abs() < 1e-9 {
        2.0 * (1.0 + s / 2.0 + s * s / 6.0)
    } else {
        2.0 * s.exp_m1() / s
    }
}

/// Gauss–Legendre nodes and weights on [0, 1], generated by Newton iteration
/// on the Legendre recurrence.
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Chebyshev-based starting guess on [-1, 1].
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0f64, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (mut p0, mut p1) = (1.0f64, x);
        for k in 2..=n {
            let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
            p0 = p1;
            p1 = p2;
        }
        let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - i] = 0.5 * (x + 1.0);
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

static GL30: Lazy<(Vec<f64>, Vec<f64>)> = Lazy::new(|| gauss_legendre_unit(30));

/// G_a(s₁, s₂) = ∫₀¹∫₀^s e^{(v+1−s)s₁ + (1−s)s₂} dv ds, by tensor-product
/// Gauss–Legendre on the unit square after the substitution v = s·w.
pub fn eval_ga(s1: f64, s2: f64) -> f64 {
    let (n, w) = (&GL30.0, &GL30.1);
    let mut acc = 0.0;
    for (i, &s) in n.iter().enumerate() {
        for (j, &v) in n.iter().enumerate() {
            acc += s * ((s * v + 1.0 - s) * s1 + (1.0 - s) * s2).exp() * w[i] * w[j];
        }
    }
    acc
}

/// G_b(s₁, s₂) = ∫₀¹∫₀^{1−s} e^{(1−s)s₁ + v·s₂} dv ds, substituting
/// v = (1−s)·w.
pub fn eval_gb(s1: f64, s2: f64) -> f64 {
    let (n, w) = (&GL30.0, &GL30.1);
    let mut acc = 0.0;
    for (i, &s) in n.iter().enumerate() {
        for (j, &v) in n.iter().enumerate() {
            acc += (1.0 - s) * ((1.0 - s) * s1 + (1.0 - s) * v * s2).exp() * w[i] * w[j];
        }
    }
    acc
}

/// Bundle of the curvature kernels with the Taylor-box radius, for callers
/// that want a single handle to pass around.
#[derive(Debug, Clone, Copy)]
pub struct CurvatureFunctions {
    pub taylor_radius: f64,
}

impl Default for CurvatureFunctions {
    fn default() -> Self {
        Self { taylor_radius: TAYLOR_RADIUS }
    }
}

impl CurvatureFunctions {
    pub fn eval_k(&self, u: f64) -> f64 {
        eval_k(u)
    }
    pub fn eval_s(&self, s: f64, t: f64) -> f64 {
        eval_s(s, t)
    }
    pub fn eval_h(&self, s: f64, t: f64) -> f64 {
        eval_h(s, t)
    }
}

/// Force the lazy tables, reporting a parse failure as an error instead of a
/// panic; called by the CLI at startup.
pub fn warm_up() -> Result<()> {
    Lazy::force(&SERIES);
    Lazy::force(&GL30);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn anchor_values() {
        assert!((eval_k(0.0) - 1.0).abs() < 1e-12);
        assert!((eval_s(0.0, 0.0) - 2.0 / 3.0).abs() < 1e-12);
        assert!(eval_h(0.0, 0.0).abs() < 1e-12);
        assert!((eval_f(0.0) - 1.0).abs() < 1e-12);
        assert!((eval_g(0.0) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn taylor_matches_direct_on_annulus() {
        // Points inside the Taylor box but away from the singular lines —
        // both branches must agree to high accuracy there.
        for &(s, t) in &[(0.08, 0.05), (0.09, -0.04), (-0.07, -0.06), (0.05, 0.095)] {
            assert!((SERIES.0.eval(s, t) - s_direct(s, t)).abs() < 1e-13, "S at {s},{t}");
            assert!((SERIES.1.eval(s, t) - h_direct(s, t)).abs() < 1e-13, "H at {s},{t}");
        }
    }

    #[test]
    fn s_symmetry_and_bridges() {
        assert!((eval_s(0.7, -0.3) - eval_s(-0.3, 0.7)).abs() < 1e-13);
        // Band crossings: compare the bridged value against a nearby direct one.
        let on_line = eval_s(0.8, -0.8 + 1e-7);
        let near = s_direct(0.8, -0.8 + 5e-3);
        assert!((on_line - near).abs() < 1e-3);
        let h_axis = eval_h(1e-8, 0.9);
        let h_near = h_direct(5e-3, 0.9);
        assert!((h_axis - h_near).abs() < 1e-3);
    }

    #[test]
    fn ga_gb_reference_values() {
        // At s1 = s2 = 0 both integrals reduce to the area of the triangle.
        assert!((eval_ga(0.0, 0.0) - 0.5).abs() < 1e-13);
        assert!((eval_gb(0.0, 0.0) - 0.5).abs() < 1e-13);
        // Closed form at s2 = 0: Ga(s,0) = ∫₀¹ (e^{s} − e^{(1−u)s})/s du.
        let s1: f64 = 0.7;
        let want = (s1.exp() - 1.0) / s1 - (s1.exp() - 1.0 - s1) / (s1 * s1);
        assert!((eval_ga(s1, 0.0) - want).abs() < 1e-12);
    }

    #[test]
    fn gauss_legendre_exactness() {
        // n-point rule integrates monomials up to degree 2n−1 exactly.
        let (nodes, weights) = gauss_legendre_unit(8);
        for p in 0..16 {
            let got: f64 = nodes
                .iter()
                .zip(&weights)
                .map(|(&x, &w)| w * x.powi(p))
                .sum();
            assert!((got - 1.0 / (p as f64 + 1.0)).abs() < 1e-14, "degree {p}");
        }
    }
}
