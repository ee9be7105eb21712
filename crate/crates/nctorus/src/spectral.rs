//! Brute-force spectral oracle: matrix truncations of the conformal
//! Laplacians on the monomial basis, smeared heat traces, and the small-time
//! fit that recovers the Ricci functional with no symbol calculus at all.
//!
//! The scalar operator is Δ_{h,0} = k Δ₀ k; the 1-form operator is
//! Δ_{h,1} = A ⊗ I₂ + B ⊗ J with
//!
//! ```text
//! A = δ₁L_{k²}δ₁ + τ₁(δ₁L_{k²}δ₂ + δ₂L_{k²}δ₁) + |τ|²δ₂L_{k²}δ₂
//! B = δ₁L_{k²}δ₂ − δ₂L_{k²}δ₁,     J = [[0, τ₂²], [−1, 0]].
//! ```
//!
//! Both become Hermitian after conjugating the 2×2 fiber by the square root
//! of the Gram matrix Ĝ = (1/τ₂)[[1, τ₁], [τ₁, |τ|²]]; traces of smeared
//! heat kernels are invariant under that similarity, so the fitted a₂ of
//!
//! ```text
//! D(t) = Tr(tr(F) e^{−tΔ_{h,0}}) − Tr(F̃ e^{−tΔ_{h,1}})
//! ```
//!
//! equals the Ricci functional Ric(F) directly (the t⁰ coefficient already
//! contains the kernel corrections of the zeta-function definition).

use crate::algebra::{AlgebraContext, TorusElement};
use crate::error::{NcError, Result};
use crate::linalg;
use crate::modular::TruncationGrid;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Which truncated Laplacian to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OperatorKind {
    /// k Δ₀ k on the scalar grid (dimension (2N+1)²).
    Scalar,
    /// Δ_{h,1} on the grid ⊗ ℂ² (dimension 2(2N+1)²).
    OneForm,
}

/// A truncated, symmetrized operator with its cached eigendecomposition.
pub struct OperatorMatrix {
    pub kind: OperatorKind,
    pub grid: TruncationGrid,
    /// Raw truncation (column-major, dim×dim, pre-symmetrization).
    pub matrix: Vec<Complex64>,
    /// Ĝ^{1/2} and Ĝ^{−1/2} of the 2×2 fiber Gram matrix (row-major);
    /// identity for the scalar operator.
    pub gram_sqrt: [f64; 4],
    pub gram_sqrt_inv: [f64; 4],
    /// Hermiticity defect of the symmetrized matrix before averaging.
    pub herm_defect: f64,
    /// Eigenvalues (ascending) of the symmetrized operator.
    pub eigenvalues: Vec<f64>,
    /// Eigenvectors, column-major.
    pub eigenvectors: Vec<Complex64>,
}

/// Principal square root and its inverse for the SPD 2×2 Gram matrix.
fn gram_roots(ctx: &AlgebraContext) -> ([f64; 4], [f64; 4]) {
    let t2 = ctx.tau_im;
    let g = [1.0 / t2, ctx.tau_re / t2, ctx.tau_re / t2, ctx.tau_abs2() / t2];
    let det = g[0] * g[3] - g[1] * g[2];
    let s = det.sqrt();
    let tr = g[0] + g[3];
    let d = (tr + 2.0 * s).sqrt();
    let sq = [(g[0] + s) / d, g[1] / d, g[2] / d, (g[3] + s) / d];
    let sq_det = sq[0] * sq[3] - sq[1] * sq[2];
    let inv = [sq[3] / sq_det, -sq[1] / sq_det, -sq[2] / sq_det, sq[0] / sq_det];
    (sq, inv)
}

fn core_index(m: i32, n: i32, nn: i32) -> usize {
    ((m + nn) as usize) * (2 * nn + 1) as usize + (n + nn) as usize
}

/// Δ₀ a = δ₁δ₁a + τ₁(δ₁δ₂ + δ₂δ₁)a + |τ|²δ₂δ₂a.
fn lap0(a: &TorusElement, ctx: &AlgebraContext) -> Result<TorusElement> {
    let t1 = ctx.tau_re;
    Ok(a
        .delta(1)?
        .delta(1)?
        .add(&a.delta(1)?.delta(2)?.scale(Complex64::new(2.0 * t1, 0.0)))
        .add(&a.delta(2)?.delta(2)?.scale(Complex64::new(ctx.tau_abs2(), 0.0))))
}

/// Build the truncated operator.  Columns are computed exactly in the
/// algebra (the guard sets the band cap for intermediate products) and then
/// cropped to the core grid.
pub fn build_operator(
    kind: OperatorKind,
    h: &TorusElement,
    grid: TruncationGrid,
    ctx: &AlgebraContext,
) -> Result<OperatorMatrix> {
    let mut guarded = *ctx;
    guarded.band_cap = grid.n + grid.guard;
    let nn = grid.n;
    let d = grid.dim();
    let k2 = h.exp_sa(&guarded)?;
    let k1 = h.scale(Complex64::new(0.5, 0.0)).exp_sa(&guarded)?;
    let basis: Vec<(i32, i32)> = (-nn..=nn)
        .flat_map(|m| (-nn..=nn).map(move |n| (m, n)))
        .collect();
    let (gram_sqrt, gram_sqrt_inv) = gram_roots(ctx);
    let t1 = ctx.tau_re;
    let abs2 = ctx.tau_abs2();
    let t2 = ctx.tau_im;

    let dim = match kind {
        OperatorKind::Scalar => d,
        OperatorKind::OneForm => 2 * d,
    };
    let columns: Vec<Vec<(usize, Complex64)>> = basis
        .par_iter()
        .map(|&(m, n)| -> Result<Vec<(usize, Complex64)>> {
            let e = TorusElement::monomial(m, n, Complex64::new(1.0, 0.0));
            let mut entries = Vec::new();
            match kind {
                OperatorKind::Scalar => {
                    // k Δ₀ (k e).
                    let img = k1.mul(&lap0(&k1.mul(&e, &guarded), &guarded)?, &guarded);
                    for (&(mi, ni), &c) in &img.coeffs {
                        if mi.abs() <= nn && ni.abs() <= nn {
                            entries.push((core_index(mi, ni, nn), c));
                        }
                    }
                }
                OperatorKind::OneForm => {
                    // A e and B e; the fiber index is the fastest-varying one.
                    let dd = |i: u8, j: u8| -> Result<TorusElement> {
                        Ok(k2.mul(&e.delta(j)?, &guarded).delta(i)?)
                    };
                    let a_img = dd(1, 1)?
                        .add(&dd(1, 2)?.add(&dd(2, 1)?).scale(Complex64::new(t1, 0.0)))
                        .add(&dd(2, 2)?.scale(Complex64::new(abs2, 0.0)));
                    let b_img = dd(1, 2)?.sub(&dd(2, 1)?);
                    for (img, fiber) in [(&a_img, [0usize, 1]), (&b_img, [2, 3])] {
                        for (&(mi, ni), &c) in &img.coeffs {
                            if mi.abs() <= nn && ni.abs() <= nn {
                                let row = core_index(mi, ni, nn);
                                if fiber[0] == 0 {
                                    // A ⊗ I₂.
                                    entries.push((2 * row, c));
                                    entries.push((2 * row + 1, c));
                                } else {
                                    // B ⊗ J, J = [[0, τ₂²], [−1, 0]].
                                    entries.push((2 * row + 4 * d, c * t2 * t2));
                                    entries.push((2 * row + 1 + 4 * d, -c));
                                }
                            }
                        }
                    }
                }
            }
            Ok(entries)
        })
        .collect::<Result<_>>()?;

    let mut matrix = vec![Complex64::default(); dim * dim];
    match kind {
        OperatorKind::Scalar => {
            for (j, col) in columns.iter().enumerate() {
                for &(i, c) in col {
                    matrix[j * dim + i] = c;
                }
            }
        }
        OperatorKind::OneForm => {
            // Column of basis element j with fiber component s is 2j+s.  The
            // per-element entries above encode: fiber[0]==0 entries couple
            // (row,0)←(col,0) and (row,1)←(col,1); J entries couple
            // (row,0)←(col,1) with τ₂² and (row,1)←(col,0) with −1, marked
            // by the 4d offset.
            for (j, col) in columns.iter().enumerate() {
                for &(enc, c) in col {
                    if enc < 2 * d {
                        let row = enc / 2;
                        let s = enc % 2;
                        matrix[(2 * j + s) * dim + 2 * row + s] += c;
                    } else {
                        let enc = enc - 4 * d;
                        let row = enc / 2;
                        let s = enc % 2;
                        // s = 0: (row, 0) ← (col, 1); s = 1: (row, 1) ← (col, 0).
                        let (ri, cj) = if s == 0 { (2 * row, 2 * j + 1) } else { (2 * row + 1, 2 * j) };
                        matrix[cj * dim + ri] += c;
                    }
                }
            }
        }
    }

    // Fiber similarity by Ĝ^{1/2} (identity for the scalar case), then
    // symmetrize and diagonalize.
    let mut sym = matrix.clone();
    if kind == OperatorKind::OneForm {
        let gs = gram_sqrt;
        let gi = gram_sqrt_inv;
        // S M S⁻¹ with S = I_d ⊗ Ĝ^{1/2}: left multiply each 2-row block by
        // Ĝ^{1/2}, right multiply each 2-column block by Ĝ^{−1/2}.
        for col in 0..dim {
            for blk in 0..d {
                let (i0, i1) = (col * dim + 2 * blk, col * dim + 2 * blk + 1);
                let (a, b) = (sym[i0], sym[i1]);
                sym[i0] = gs[0] * a + gs[1] * b;
                sym[i1] = gs[2] * a + gs[3] * b;
            }
        }
        for row in 0..dim {
            for blk in 0..d {
                let (j0, j1) = ((2 * blk) * dim + row, (2 * blk + 1) * dim + row);
                let (a, b) = (sym[j0], sym[j1]);
                sym[j0] = a * gi[0] + b * gi[2];
                sym[j1] = a * gi[1] + b * gi[3];
            }
        }
    }
    let mut defect = 0.0f64;
    for i in 0..dim {
        for j in 0..i {
            let delta = (sym[j * dim + i] - sym[i * dim + j].conj()).norm();
            defect = defect.max(delta);
            let avg = 0.5 * (sym[j * dim + i] + sym[i * dim + j].conj());
            sym[j * dim + i] = avg;
            sym[i * dim + j] = avg.conj();
        }
        let di = sym[i * dim + i];
        sym[i * dim + i] = Complex64::new(di.re, 0.0);
    }
    let (eigenvalues, eigenvectors) = linalg::eigh(&sym, dim)?;
    Ok(OperatorMatrix {
        kind,
        grid,
        matrix,
        gram_sqrt,
        gram_sqrt_inv,
        herm_defect: defect,
        eigenvalues,
        eigenvectors,
    })
}

impl OperatorMatrix {
    pub fn dim(&self) -> usize {
        match self.kind {
            OperatorKind::Scalar => self.grid.dim(),
            OperatorKind::OneForm => 2 * self.grid.dim(),
        }
    }

    /// Diagonal weights d_i = p_i† F p_i of a smearing operator in the
    /// eigenbasis; heat traces are then Σ d_i e^{−t λ_i}.
    pub fn smearing_weights(&self, f_matrix: &[Complex64]) -> Vec<f64> {
        let dim = self.dim();
        assert_eq!(f_matrix.len(), dim * dim);
        let fp = linalg::matmul(f_matrix, &self.eigenvectors, dim);
        (0..dim)
            .into_par_iter()
            .map(|i| {
                let p = &self.eigenvectors[i * dim..(i + 1) * dim];
                let q = &fp[i * dim..(i + 1) * dim];
                p.iter().zip(q).map(|(a, b)| (a.conj() * b).re).sum()
            })
            .collect()
    }

    /// Tr(F e^{−tΔ}) for each requested t.
    pub fn heat_trace(&self, f_matrix: &[Complex64], ts: &[f64]) -> Vec<f64> {
        let w = self.smearing_weights(f_matrix);
        ts.iter()
            .map(|&t| {
                w.iter()
                    .zip(&self.eigenvalues)
                    .map(|(&d, &l)| d * (-t * l).exp())
                    .sum()
            })
            .collect()
    }

    /// Number of (numerically) zero modes under the relative threshold.
    pub fn kernel_dim(&self, rel_threshold: f64) -> Result<usize> {
        let lmax = self.eigenvalues.last().copied().unwrap_or(1.0).abs().max(1e-300);
        let cut = rel_threshold * lmax;
        let dim = self.eigenvalues.iter().take_while(|&&l| l.abs() < cut).count();
        // The threshold must fall in a genuine spectral gap.
        if let Some(&next) = self.eigenvalues.get(dim) {
            let gap = next / lmax / rel_threshold;
            if gap < 100.0 {
                return Err(NcError::KernelThreshold { gap });
            }
        }
        Ok(dim)
    }

    /// Build the smearing matrix of F = f ⊗ M in the symmetrized frame:
    /// L_f ⊗ (Ĝ^{1/2} M Ĝ^{−1/2}) for 1-forms, tr(M)·L_f for scalars.
    pub fn smearing_matrix(
        &self,
        f: &TorusElement,
        m: [Complex64; 4],
        ctx: &AlgebraContext,
    ) -> Vec<Complex64> {
        let nn = self.grid.n;
        let d = self.grid.dim();
        let lf = lmul_matrix(f, nn, ctx);
        match self.kind {
            OperatorKind::Scalar => {
                let trm = m[0] + m[3];
                lf.iter().map(|&c| c * trm).collect()
            }
            OperatorKind::OneForm => {
                let gs = self.gram_sqrt;
                let gi = self.gram_sqrt_inv;
                // Ms = Ĝ^{1/2} M Ĝ^{−1/2} (row-major 2×2).
                let t = [
                    gs[0] * m[0] + gs[1] * m[2],
                    gs[0] * m[1] + gs[1] * m[3],
                    gs[2] * m[0] + gs[3] * m[2],
                    gs[2] * m[1] + gs[3] * m[3],
                ];
                let ms = [
                    t[0] * gi[0] + t[1] * gi[2],
                    t[0] * gi[1] + t[1] * gi[3],
                    t[2] * gi[0] + t[3] * gi[2],
                    t[2] * gi[1] + t[3] * gi[3],
                ];
                let dim = 2 * d;
                let mut out = vec![Complex64::default(); dim * dim];
                for j in 0..d {
                    for i in 0..d {
                        let c = lf[j * d + i];
                        if c.norm() == 0.0 {
                            continue;
                        }
                        for s in 0..2 {
                            for r in 0..2 {
                                out[(2 * j + s) * dim + 2 * i + r] = c * ms[2 * r + s];
                            }
                        }
                    }
                }
                out
            }
        }
    }
}

/// Left multiplication by `a` as a matrix on the core grid (column-major).
pub fn lmul_matrix(a: &TorusElement, nn: i32, ctx: &AlgebraContext) -> Vec<Complex64> {
    let side = (2 * nn + 1) as usize;
    let d = side * side;
    let mut out = vec![Complex64::default(); d * d];
    for m2 in -nn..=nn {
        for n2 in -nn..=nn {
            let col = core_index(m2, n2, nn);
            for (&(m1, n1), &c) in &a.coeffs {
                let (m, n) = (m1 + m2, n1 + n2);
                if m.abs() <= nn && n.abs() <= nn {
                    let phase = crate::algebra::e2pi(ctx.theta * n1 as f64 * m2 as f64);
                    out[col * d + core_index(m, n, nn)] += c * phase;
                }
            }
        }
    }
    out
}

/// One (t, trace) sample of the smeared heat-trace difference.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct HeatSample {
    pub t: f64,
    pub trace: f64,
}

/// Result of the small-time fit D(t) ≈ a₀/t + a₂ + a₄t + a₆t².
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HeatFit {
    pub samples: Vec<HeatSample>,
    /// Fitted model coefficients [a₀, a₂, a₄, a₆].
    pub model: Vec<f64>,
    pub a2_estimate: f64,
    pub stderr: f64,
}

/// Fit the four-term small-time model to (t, trace) samples.  Requires at
/// least 4 samples spanning a factor ≥ 4 in t.
pub fn fit_a2(samples: &[HeatSample]) -> Result<HeatFit> {
    if samples.len() < 4 {
        return Err(NcError::IllConditionedFit(format!(
            "{} heat-trace samples, need at least 4",
            samples.len()
        )));
    }
    let tmin = samples.iter().map(|s| s.t).fold(f64::INFINITY, f64::min);
    let tmax = samples.iter().map(|s| s.t).fold(0.0, f64::max);
    if tmax < 4.0 * tmin {
        return Err(NcError::IllConditionedFit(format!(
            "t range [{tmin:.3e}, {tmax:.3e}] spans less than a factor 4"
        )));
    }
    let design: Vec<Vec<f64>> = samples
        .iter()
        .map(|s| vec![1.0 / s.t, 1.0, s.t, s.t * s.t])
        .collect();
    let rhs: Vec<f64> = samples.iter().map(|s| s.trace).collect();
    let (model, se) = linalg::lstsq(&design, &rhs)?;
    Ok(HeatFit {
        samples: samples.to_vec(),
        a2_estimate: model[1],
        stderr: se[1],
        model,
    })
}

/// The t-window for the fit: t ≥ 25/λ_max keeps the traces finite-rank
/// converged at the top of the spectrum, and t ≥ 16e^{‖h‖₁}/N² keeps the
/// truncation error of the *smallest* edge modes (≈ e^{−‖h‖₁}·N²) below the
/// fit resolution (e^{−16} times the edge-mode count ≈ 1e−5 relative).
/// 12 geometric points over [t_min, 4t_min].
pub fn fit_window(
    h: &TorusElement,
    grid: TruncationGrid,
    lambda_max: f64,
) -> Vec<f64> {
    let n2 = (grid.n * grid.n) as f64;
    let tmin = (25.0 / lambda_max).max(16.0 * h.l1_norm().exp() / n2);
    let tmax = 4.0 * tmin;
    let k = 12usize;
    (0..k)
        .map(|i| tmin * (tmax / tmin).powf(i as f64 / (k - 1) as f64))
        .collect()
}

/// Report of the zeta-side Ricci functional measurement.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ZetaRicci {
    pub a2_estimate: f64,
    pub stderr: f64,
    pub kernel_dim_scalar: usize,
    pub kernel_dim_one_form: usize,
    pub samples: Vec<HeatSample>,
    pub model: Vec<f64>,
}

/// Measure Ric(F) for F = f ⊗ M spectrally: build both truncations, verify
/// the kernel dimensions (1 and 2), sample the smeared trace difference over
/// the stable window and fit a₂.
pub fn zeta_ricci(
    h: &TorusElement,
    f: &TorusElement,
    m: [Complex64; 4],
    grid: TruncationGrid,
    ctx: &AlgebraContext,
    kernel_threshold: f64,
) -> Result<ZetaRicci> {
    let op0 = build_operator(OperatorKind::Scalar, h, grid, ctx)?;
    let op1 = build_operator(OperatorKind::OneForm, h, grid, ctx)?;
    let k0 = op0.kernel_dim(kernel_threshold)?;
    let k1 = op1.kernel_dim(kernel_threshold)?;
    let lmax = op0
        .eigenvalues
        .last()
        .copied()
        .unwrap_or(1.0)
        .max(op1.eigenvalues.last().copied().unwrap_or(1.0));
    let ts = fit_window(h, grid, lmax);
    let f0 = op0.smearing_matrix(f, m, ctx);
    let f1 = op1.smearing_matrix(f, m, ctx);
    let tr0 = op0.heat_trace(&f0, &ts);
    let tr1 = op1.heat_trace(&f1, &ts);
    let samples: Vec<HeatSample> = ts
        .iter()
        .zip(tr0.iter().zip(&tr1))
        .map(|(&t, (&a, &b))| HeatSample { t, trace: a - b })
        .collect();
    let fit = fit_a2(&samples)?;
    Ok(ZetaRicci {
        a2_estimate: fit.a2_estimate,
        stderr: fit.stderr,
        kernel_dim_scalar: k0,
        kernel_dim_one_form: k1,
        samples: fit.samples,
        model: fit.model,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> AlgebraContext {
        AlgebraContext::new(0.37, 0.0, 1.0)
    }

    #[test]
    fn flat_scalar_spectrum() {
        // h = 0, τ = i: kΔ₀k = Δ₀ with eigenvalues m² + n².
        let c = ctx();
        let h = TorusElement::zero();
        let op = build_operator(OperatorKind::Scalar, &h, TruncationGrid::new(3, 2), &c).unwrap();
        assert!(op.herm_defect < 1e-12);
        let mut want: Vec<f64> = (-3..=3)
            .flat_map(|m| (-3..=3).map(move |n| (m * m + n * n) as f64))
            .collect();
        want.sort_by(f64::total_cmp);
        for (a, b) in op.eigenvalues.iter().zip(&want) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn kernel_dimensions() {
        let c = ctx();
        let h = TorusElement::cos_dilaton(0.3, 0.3);
        let op0 = build_operator(OperatorKind::Scalar, &h, TruncationGrid::new(6, 8), &c).unwrap();
        let op1 = build_operator(OperatorKind::OneForm, &h, TruncationGrid::new(6, 8), &c).unwrap();
        assert!(op0.herm_defect < 1e-9, "defect {}", op0.herm_defect);
        assert!(op1.herm_defect < 1e-9, "defect {}", op1.herm_defect);
        assert_eq!(op0.kernel_dim(1e-6).unwrap(), 1);
        assert_eq!(op1.kernel_dim(1e-6).unwrap(), 2);
    }

    #[test]
    fn heat_trace_flat_identity() {
        // h = 0, F = 1 ⊗ I₂: the scalar smearing carries tr(M) = 2, so the
        // smeared traces agree exactly at τ = i where Δ₁ = Δ₀ ⊗ I₂.
        let c = ctx();
        let h = TorusElement::zero();
        let grid = TruncationGrid::new(4, 2);
        let op0 = build_operator(OperatorKind::Scalar, &h, grid, &c).unwrap();
        let op1 = build_operator(OperatorKind::OneForm, &h, grid, &c).unwrap();
        let one = TorusElement::one();
        let id = [
            Complex64::new(1.0, 0.0),
            Complex64::default(),
            Complex64::default(),
            Complex64::new(1.0, 0.0),
        ];
        let ts = [0.5, 1.0, 2.0];
        let t0 = op0.heat_trace(&op0.smearing_matrix(&one, id, &c), &ts);
        let t1 = op1.heat_trace(&op1.smearing_matrix(&one, id, &c), &ts);
        for (a, b) in t0.iter().zip(&t1) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn fit_recovers_exact_model() {
        let ts: Vec<f64> = (0..12).map(|i| 0.1 * 1.16f64.powi(i)).collect();
        let samples: Vec<HeatSample> = ts
            .iter()
            .map(|&t| HeatSample { t, trace: 3.0 / t + 5.0 + 2.0 * t - 0.4 * t * t })
            .collect();
        let fit = fit_a2(&samples).unwrap();
        assert!((fit.a2_estimate - 5.0).abs() < 1e-9);
        assert!(fit.stderr < 1e-8);
    }

    #[test]
    fn fit_rejects_narrow_window() {
        let samples: Vec<HeatSample> = (0..6)
            .map(|i| HeatSample { t: 0.1 + 0.01 * i as f64, trace: 1.0 })
            .collect();
        assert!(fit_a2(&samples).is_err());
    }
}
