//! Modular functional calculus: the inner derivation ∇ = −[h, ·] on a
//! truncated monomial grid, its spectral decomposition, and the evaluation of
//! one- and two-variable functions f(∇) and f(∇₁, ∇₂) against elements.
//!
//! ∇ is Hermitian for the φ-GNS inner product (monomials U^m V^n are
//! orthonormal there), so a single Hermitian eigendecomposition of the
//! truncated matrix gives spectral projections P_i.  Then
//!
//! ```text
//! f(∇)(a)        = Σ_i f(s_i) P_i(a)
//! f(∇₁, ∇₂)(a·b) = Σ_{ij} f(s_i, s_j) P_i(a) · P_j(b)
//! ```
//!
//! with ∇₁ acting on the left factor and ∇₂ on the right.

use crate::algebra::{AlgebraContext, TorusElement};
use crate::error::Result;
use crate::linalg;
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

/// Truncation grid |m|, |n| ≤ N for spectral work, with an optional guard
/// margin used by the heat-trace oracle.
#[derive(Debug, Clone, Copy, serde::Serialize, serde::Deserialize)]
pub struct TruncationGrid {
    pub n: i32,
    pub guard: i32,
}

impl TruncationGrid {
    pub fn new(n: i32, guard: i32) -> Self {
        Self { n, guard }
    }

    /// Side length of the core grid.
    pub fn side(&self) -> usize {
        (2 * self.n + 1) as usize
    }

    pub fn dim(&self) -> usize {
        self.side() * self.side()
    }
}

/// ∇ = −[h, ·], computed exactly on the support of h against an element.
pub fn nabla(h: &TorusElement, a: &TorusElement, ctx: &AlgebraContext) -> TorusElement {
    a.mul(h, ctx).sub(&h.mul(a, ctx))
}

/// Modular derivative applied through the exponential: Δ(a) = e^{-h} a e^{h}
/// at the element level — used only by diagnostics, the curvature pipeline
/// stays with the additive generator ∇.
pub fn modular_delta(
    h: &TorusElement,
    a: &TorusElement,
    ctx: &AlgebraContext,
) -> Result<TorusElement> {
    let eh = h.exp_sa(ctx)?;
    let emh = h.scale(Complex64::new(-1.0, 0.0)).exp_sa(ctx)?;
    Ok(emh.mul(a, ctx).mul(&eh, ctx))
}

/// Spectral data of the truncated ∇: eigenvalues and the unitary of
/// eigenvectors over the monomial basis (row-major over (m, n)).
pub struct ModularSpectrum {
    pub grid: TruncationGrid,
    pub theta: f64,
    /// Ascending eigenvalues of the symmetrized truncation.
    pub eigenvalues: Vec<f64>,
    /// Column-major eigenvector matrix (LAPACK layout), dim × dim.
    vectors: Vec<Complex64>,
    /// Hermiticity defect of the raw truncated matrix, max |M − M†|.
    pub herm_defect: f64,
}

/// Basis ordering: index = (m + N)·(2N+1) + (n + N).
fn basis_index(m: i32, n: i32, grid: &TruncationGrid) -> Option<usize> {
    let nn = grid.n;
    (m.abs() <= nn && n.abs() <= nn)
        .then(|| ((m + nn) as usize) * grid.side() + (n + nn) as usize)
}

/// Diagonalize the truncation of ∇ = −[h, ·] to the grid.
pub fn eigen_nabla(
    h: &TorusElement,
    grid: TruncationGrid,
    ctx: &AlgebraContext,
) -> Result<ModularSpectrum> {
    let d = grid.dim();
    let side = grid.side() as i32;
    let nn = grid.n;
    let mut mat = vec![Complex64::default(); d * d];
    for mj in -nn..=nn {
        for nj in -nn..=nn {
            let j = ((mj + nn) * side + (nj + nn)) as usize;
            let ek = TorusElement::monomial(mj, nj, Complex64::new(1.0, 0.0));
            let img = nabla(h, &ek, ctx);
            for (&(m, n), &c) in &img.coeffs {
                if let Some(i) = basis_index(m, n, &grid) {
                    mat[j * d + i] = c;
                }
            }
        }
    }
    let mut defect = 0.0f64;
    for i in 0..d {
        for j in 0..i {
            let delta = (mat[j * d + i] - mat[i * d + j].conj()).norm();
            defect = defect.max(delta);
            // Symmetrize before diagonalizing.
            let avg = 0.5 * (mat[j * d + i] + mat[i * d + j].conj());
            mat[j * d + i] = avg;
            mat[i * d + j] = avg.conj();
        }
    }
    let (w, v) = linalg::eigh(&mat, d)?;
    Ok(ModularSpectrum {
        grid,
        theta: ctx.theta,
        eigenvalues: w,
        vectors: v,
        herm_defect: defect,
    })
}

impl ModularSpectrum {
    fn to_vec(&self, a: &TorusElement) -> Vec<Complex64> {
        let mut v = vec![Complex64::default(); self.grid.dim()];
        for (&(m, n), &c) in &a.coeffs {
            if let Some(i) = basis_index(m, n, &self.grid) {
                v[i] = c;
            }
        }
        v
    }

    fn to_element(&self, v: &[Complex64], tol: f64) -> TorusElement {
        let nn = self.grid.n;
        let side = self.grid.side();
        let mut out = TorusElement::zero();
        for (i, &c) in v.iter().enumerate() {
            if c.norm() > tol {
                let m = (i / side) as i32 - nn;
                let n = (i % side) as i32 - nn;
                out.coeffs.insert((m, n), c);
            }
        }
        out
    }

    /// Coefficients of a in the eigenbasis: c = P† v.
    fn coords(&self, a: &TorusElement) -> Vec<Complex64> {
        let v = self.to_vec(a);
        let d = self.grid.dim();
        (0..d)
            .into_par_iter()
            .map(|i| {
                let col = &self.vectors[i * d..(i + 1) * d];
                col.iter().zip(&v).map(|(p, x)| p.conj() * x).sum()
            })
            .collect()
    }

    fn from_coords(&self, c: &[Complex64]) -> Vec<Complex64> {
        let d = self.grid.dim();
        let mut v = vec![Complex64::default(); d];
        for (i, &ci) in c.iter().enumerate() {
            if ci.norm() == 0.0 {
                continue;
            }
            let col = &self.vectors[i * d..(i + 1) * d];
            for (vj, &pj) in v.iter_mut().zip(col) {
                *vj += pj * ci;
            }
        }
        v
    }

    /// f(∇)(a) = Σ_i f(s_i) P_i(a).
    pub fn apply_one_var(&self, f: impl Fn(f64) -> f64, a: &TorusElement) -> TorusElement {
        let mut c = self.coords(a);
        for (ci, &w) in c.iter_mut().zip(&self.eigenvalues) {
            *ci *= f(w);
        }
        self.to_element(&self.from_coords(&c), 1e-16)
    }

    /// f(∇₁, ∇₂)(a·b): ∇₁ acts on the left factor, ∇₂ on the right, then the
    /// spectral components are multiplied in the algebra.
    pub fn apply_two_var(
        &self,
        f: impl Fn(f64, f64) -> f64 + Sync,
        a: &TorusElement,
        b: &TorusElement,
        ctx: &AlgebraContext,
    ) -> TorusElement {
        let ca = self.coords(a);
        let cb = self.coords(b);
        let cb_max = cb.iter().map(|c| c.norm()).fold(1e-300, f64::max);
        let active: Vec<usize> = cb
            .iter()
            .enumerate()
            .filter(|(_, c)| c.norm() > 1e-13 * cb_max)
            .map(|(j, _)| j)
            .collect();
        let d = self.grid.dim();
        let partials: Vec<TorusElement> = active
            .par_iter()
            .map(|&j| {
                let wj = self.eigenvalues[j];
                // Left factor f(·, w_j)(a) in coefficient space.
                let cfa: Vec<Complex64> = ca
                    .iter()
                    .zip(&self.eigenvalues)
                    .map(|(&c, &w)| c * f(w, wj))
                    .collect();
                let fa = self.from_coords(&cfa);
                // j-th spectral component of b.
                let col = &self.vectors[j * d..(j + 1) * d];
                let eb: Vec<Complex64> = col.iter().map(|&p| p * cb[j]).collect();
                let left = self.to_element(&fa, 1e-16);
                let right = self.to_element(&eb, 1e-16);
                left.mul(&right, ctx)
            })
            .collect();
        let mut out = TorusElement::zero();
        for p in partials {
            out = out.add(&p);
        }
        out.pruned(ctx)
    }

    /// Defect of reconstructing a from its eigen-coordinates; measures how
    /// much of a lives outside the truncation grid.
    pub fn reconstruction_error(&self, a: &TorusElement) -> f64 {
        let rebuilt = self.to_element(&self.from_coords(&self.coords(a)), 0.0);
        let mut inside = TorusElement::zero();
        for (&(m, n), &c) in &a.coeffs {
            if basis_index(m, n, &self.grid).is_some() {
                inside.coeffs.insert((m, n), c);
            }
        }
        rebuilt.sub(&inside).hs_norm()
    }
}

/// Convenience: log k = h/2 for k = e^{h/2}; x_j = δ_j(h)/2 is the element
/// the curvature kernels act on.
pub fn x_j(h: &TorusElement, j: u8) -> Result<TorusElement> {
    Ok(h.delta(j)?.scale(Complex64::new(0.5, 0.0)))
}

/// Flat-torus sanity value: for θ arbitrary and h a dilaton, ∇ of a monomial
/// U^mV^n under h = c(U+U*) has entries coupling (m, n) to (m±1, n).
pub fn expected_coupling(theta: f64, c: f64, m: i32, n: i32) -> [(i32, i32, Complex64); 2] {
    // a·h − h·a for a = U^mV^n, h = c(U + U*):
    //   coefficient at (m+1, n): c(e^{2πiθn} − 1); at (m−1, n): c(e^{-2πiθn} − 1).
    let one = Complex64::new(1.0, 0.0);
    let p = Complex64::new(0.0, 2.0 * PI * theta * n as f64).exp();
    [
        (m + 1, n, c * (p - one)),
        (m - 1, n, c * (p.conj() - one)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions;

    fn setup() -> (AlgebraContext, TorusElement, ModularSpectrum) {
        let ctx = AlgebraContext::new(0.37, 0.3, 1.1);
        let h = TorusElement::cos_dilaton(0.4, 0.25);
        let spec = eigen_nabla(&h, TruncationGrid::new(6, 0), &ctx).unwrap();
        (ctx, h, spec)
    }

    #[test]
    fn nabla_matrix_is_hermitian() {
        let (_, _, spec) = setup();
        assert!(spec.herm_defect < 1e-12);
    }

    #[test]
    fn identity_function_reproduces_nabla() {
        let (ctx, h, spec) = setup();
        let a = TorusElement::monomial(1, -1, Complex64::new(0.7, 0.2));
        let via_spec = spec.apply_one_var(|s| s, &a);
        let direct = nabla(&h, &a, &ctx);
        assert!(via_spec.sub(&direct).max_coeff() < 1e-12);
    }

    #[test]
    fn delta_of_k2_identity() {
        // δ_j(k²) = k² g(∇)(x_j) with k² = e^h, x_j = δ_j(h)/2: the first
        // structural identity of the conformal calculus.  The truncation
        // error of the grid decays factorially in N; N = 12 is well past
        // the target tolerance.
        let (ctx, h, _) = setup();
        let spec = eigen_nabla(&h, TruncationGrid::new(12, 0), &ctx).unwrap();
        let k2 = h.exp_sa(&ctx).unwrap();
        for j in [1u8, 2u8] {
            let lhs = k2.delta(j).unwrap();
            let xj = x_j(&h, j).unwrap();
            let rhs = k2.mul(&spec.apply_one_var(functions::eval_g, &xj), &ctx);
            assert!(lhs.sub(&rhs).max_coeff() < 1e-9, "direction {j}");
        }
    }

    #[test]
    fn product_function_factorizes() {
        // f(s,t) = f1(s)·f2(t) must satisfy
        // f(∇₁,∇₂)(a·b) = f1(∇)(a) · f2(∇)(b).
        let (ctx, _, spec) = setup();
        let a = TorusElement::monomial(1, 0, Complex64::new(0.4, -0.1))
            .add(&TorusElement::monomial(0, 2, Complex64::new(0.2, 0.3)));
        let b = TorusElement::monomial(-1, 1, Complex64::new(0.9, 0.0));
        let f1 = |s: f64| (0.3 * s).exp();
        let f2 = |t: f64| 1.0 / (1.0 + t * t);
        let two = spec.apply_two_var(|s, t| f1(s) * f2(t), &a, &b, &ctx);
        let split = spec.apply_one_var(f1, &a).mul(&spec.apply_one_var(f2, &b), &ctx);
        assert!(two.sub(&split).max_coeff() < 1e-11);
    }

    #[test]
    fn modular_delta_matches_spectral_exponential() {
        let (ctx, h, _) = setup();
        let spec = eigen_nabla(&h, TruncationGrid::new(12, 0), &ctx).unwrap();
        let a = TorusElement::monomial(1, 1, Complex64::new(0.5, 0.5));
        let direct = modular_delta(&h, &a, &ctx).unwrap();
        let spectral = spec.apply_one_var(|s| s.exp(), &a);
        assert!(direct.sub(&spectral).max_coeff() < 1e-9);
    }
}
