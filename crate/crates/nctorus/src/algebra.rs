//! Arithmetic of the smooth noncommutative torus A_θ^∞ in the twisted
//! Fourier model.
//!
//! An element is a finitely supported series Σ a_{mn} U^m V^n where the
//! generators satisfy VU = e^{2πiθ} UV.  Products of basis monomials carry
//! the twisting phase
//!
//! ```text
//! (U^m V^n)(U^m' V^n') = e^{2πiθ·n·m'} U^{m+m'} V^{n+n'}
//! ```
//!
//! and the adjoint phase is fixed by demanding (U^m V^n)*·(U^m V^n) = 1
//! exactly, which gives (U^m V^n)* = e^{2πiθ·m·n} U^{-m} V^{-n}.

use crate::error::{NcError, Result};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::PI;

/// Deformation parameter, modulus, and truncation policy shared by all
/// elements participating in one computation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlgebraContext {
    /// Deformation parameter θ of VU = e^{2πiθ}UV.
    pub theta: f64,
    /// Complex modulus τ with Im τ > 0.
    pub tau_re: f64,
    pub tau_im: f64,
    /// Coefficients with magnitude below `prune_tol` (relative to the largest
    /// coefficient, floored at 1) are dropped after products.
    pub prune_tol: f64,
    /// Maximum Fourier index retained after products.
    pub band_cap: i32,
}

impl AlgebraContext {
    pub fn new(theta: f64, tau_re: f64, tau_im: f64) -> Self {
        assert!(tau_im > 0.0, "Im(tau) must be positive");
        Self { theta, tau_re, tau_im, prune_tol: 1e-14, band_cap: 64 }
    }

    pub fn tau(&self) -> Complex64 {
        Complex64::new(self.tau_re, self.tau_im)
    }

    /// |τ|².
    pub fn tau_abs2(&self) -> f64 {
        self.tau_re * self.tau_re + self.tau_im * self.tau_im
    }

    pub fn compatible(&self, other: &Self) -> Result<()> {
        if (self.theta - other.theta).abs() > 0.0
            || self.tau_re != other.tau_re
            || self.tau_im != other.tau_im
        {
            return Err(NcError::ContextMismatch(format!(
                "theta {} vs {}, tau {}+{}i vs {}+{}i",
                self.theta, other.theta, self.tau_re, self.tau_im, other.tau_re, other.tau_im
            )));
        }
        Ok(())
    }
}

pub(crate) fn e2pi(x: f64) -> Complex64 {
    Complex64::new(0.0, 2.0 * PI * x).exp()
}

/// Finitely supported twisted Fourier series Σ a_{mn} U^m V^n.
///
/// Values are immutable; every operation returns a fresh element.  The
/// `loss` field accumulates the total magnitude dropped by pruning and
/// band-capping across the history of the value.
#[derive(Debug, Clone, Default)]
pub struct TorusElement {
    pub coeffs: BTreeMap<(i32, i32), Complex64>,
    pub loss: f64,
}

impl TorusElement {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::monomial(0, 0, Complex64::new(1.0, 0.0))
    }

    pub fn monomial(m: i32, n: i32, c: Complex64) -> Self {
        let mut coeffs = BTreeMap::new();
        if c != Complex64::default() {
            coeffs.insert((m, n), c);
        }
        Self { coeffs, loss: 0.0 }
    }

    /// c·(U + U*) + d·(V + V*) — the dilatons used throughout the tests.
    pub fn cos_dilaton(cu: f64, cv: f64) -> Self {
        let mut e = Self::zero();
        if cu != 0.0 {
            e.coeffs.insert((1, 0), Complex64::new(cu, 0.0));
            e.coeffs.insert((-1, 0), Complex64::new(cu, 0.0));
        }
        if cv != 0.0 {
            e.coeffs.insert((0, 1), Complex64::new(cv, 0.0));
            e.coeffs.insert((0, -1), Complex64::new(cv, 0.0));
        }
        e
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn max_coeff(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// ℓ¹ norm of the coefficients (upper bound of the operator norm).
    pub fn l1_norm(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm()).sum()
    }

    /// Hilbert–Schmidt norm under φ: sqrt(Σ |a_{mn}|²).
    pub fn hs_norm(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Largest Fourier index in either direction.
    pub fn band(&self) -> i32 {
        self.coeffs.keys().map(|&(m, n)| m.abs().max(n.abs())).max().unwrap_or(0)
    }

    /// Drop coefficients below `ctx.prune_tol` relative to the largest
    /// coefficient and outside the band cap, accumulating the loss.
    /// The cut is purely relative so that uniformly small elements (which
    /// arise as deep resolvent products at large |ξ|) keep full relative
    /// accuracy instead of being flushed to zero.
    pub fn pruned(mut self, ctx: &AlgebraContext) -> Self {
        let thresh = ctx.prune_tol * self.max_coeff();
        let cap = ctx.band_cap;
        let mut loss = 0.0;
        self.coeffs.retain(|&(m, n), c| {
            let keep = c.norm() >= thresh && m.abs() <= cap && n.abs() <= cap;
            if !keep {
                loss += c.norm();
            }
            keep
        });
        self.loss += loss;
        self
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|(&k, &v)| (k, c * v)).collect(),
            loss: self.loss,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.loss += other.loss;
        for (&k, &v) in &other.coeffs {
            let e = out.coeffs.entry(k).or_insert(Complex64::default());
            *e += v;
            if e.norm() == 0.0 {
                out.coeffs.remove(&k);
            }
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    /// Twisted convolution product.
    pub fn mul(&self, other: &Self, ctx: &AlgebraContext) -> Self {
        let mut coeffs: BTreeMap<(i32, i32), Complex64> = BTreeMap::new();
        for (&(m, n), &ca) in &self.coeffs {
            for (&(mp, np), &cb) in &other.coeffs {
                let phase = e2pi(ctx.theta * (n as f64) * (mp as f64));
                let e = coeffs.entry((m + mp, n + np)).or_insert(Complex64::default());
                *e += ca * cb * phase;
            }
        }
        Self { coeffs, loss: self.loss + other.loss }.pruned(ctx)
    }

    /// *-involution: conjugate-linear and antimultiplicative.
    pub fn adjoint(&self, ctx: &AlgebraContext) -> Self {
        Self {
            coeffs: self
                .coeffs
                .iter()
                .map(|(&(m, n), &c)| {
                    ((-m, -n), c.conj() * e2pi(ctx.theta * (m as f64) * (n as f64)))
                })
                .collect(),
            loss: self.loss,
        }
    }

    pub fn is_self_adjoint(&self, ctx: &AlgebraContext, tol: f64) -> bool {
        self.sub(&self.adjoint(ctx)).max_coeff() <= tol
    }

    /// Derivation δ_j: multiplies a_{mn} by m (j = 1) or n (j = 2).
    pub fn delta(&self, j: u8) -> Result<Self> {
        if j != 1 && j != 2 {
            return Err(NcError::BadDirection(j));
        }
        Ok(Self {
            coeffs: self
                .coeffs
                .iter()
                .filter_map(|(&(m, n), &c)| {
                    let w = if j == 1 { m } else { n };
                    (w != 0).then(|| ((m, n), c * w as f64))
                })
                .collect(),
            loss: self.loss,
        })
    }

    /// The canonical trace φ(Σ a_{mn}U^mV^n) = a_{00}.
    pub fn trace_phi(&self) -> Complex64 {
        self.coeffs.get(&(0, 0)).copied().unwrap_or_default()
    }

    /// φ-GNS inner product ⟨a,b⟩ = φ(b*·a) = Σ conj(b_{mn}) a_{mn}.
    pub fn hs_inner(&self, other: &Self) -> Complex64 {
        self.coeffs
            .iter()
            .filter_map(|(k, &a)| other.coeffs.get(k).map(|&b| b.conj() * a))
            .sum()
    }

    /// exp of a self-adjoint element by scaling-and-squaring: halve until the
    /// ℓ¹ norm estimate is below 1/2, run a 20-term power series (tail far
    /// below prune_tol at that norm), then square back.
    pub fn exp_sa(&self, ctx: &AlgebraContext) -> Result<Self> {
        if !self.is_self_adjoint(ctx, 1e-10) {
            let defect = self.sub(&self.adjoint(ctx)).max_coeff();
            return Err(NcError::NotSelfAdjoint(defect));
        }
        let norm = self.l1_norm();
        let mut squarings = 0u32;
        let mut scale = 1.0f64;
        while norm * scale >= 0.5 {
            scale *= 0.5;
            squarings += 1;
        }
        let b = self.scale(Complex64::new(scale, 0.0));
        let mut out = Self::one();
        let mut term = Self::one();
        for k in 1..=20 {
            term = term.mul(&b, ctx).scale(Complex64::new(1.0 / k as f64, 0.0));
            out = out.add(&term);
        }
        for _ in 0..squarings {
            out = out.mul(&out, ctx);
            if out.band() >= ctx.band_cap {
                return Err(NcError::SeriesDiverged(format!(
                    "support reached band cap {}; accumulated loss {:.3e}",
                    ctx.band_cap, out.loss
                )));
            }
        }
        Ok(out.pruned(ctx))
    }

    /// Evaluate at θ=0 as a function on the torus at the point
    /// (x, y) ∈ [0,1)²: Σ a_{mn} e^{2πi(mx + ny)}.
    pub fn eval_commutative(&self, x: f64, y: f64) -> Complex64 {
        self.coeffs
            .iter()
            .map(|(&(m, n), &c)| c * e2pi(m as f64 * x + n as f64 * y))
            .sum()
    }

    pub fn from_records(records: &[CoeffRecord]) -> Self {
        let mut e = Self::zero();
        for r in records {
            let c = Complex64::new(r.re, r.im);
            if c != Complex64::default() {
                let entry = e.coeffs.entry((r.m, r.n)).or_insert(Complex64::default());
                *entry += c;
            }
        }
        e
    }

    pub fn to_records(&self) -> Vec<CoeffRecord> {
        self.coeffs
            .iter()
            .map(|(&(m, n), &c)| CoeffRecord { m, n, re: c.re, im: c.im })
            .collect()
    }
}

/// Serialized form of one Fourier coefficient.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CoeffRecord {
    pub m: i32,
    pub n: i32,
    pub re: f64,
    pub im: f64,
}

/// Element of A_θ^∞ ⊗ M₂(ℂ), stored as a 2×2 array of torus elements in
/// row-major order.
#[derive(Debug, Clone, Default)]
pub struct MatrixElement {
    pub entries: [TorusElement; 4],
}

impl MatrixElement {
    pub fn zero() -> Self {
        Self::default()
    }

    /// a ⊗ M for a 2×2 complex matrix M (row-major).
    pub fn tensor(a: &TorusElement, m: [Complex64; 4]) -> Self {
        Self { entries: std::array::from_fn(|i| a.scale(m[i])) }
    }

    /// a ⊗ I₂.
    pub fn tensor_id(a: &TorusElement) -> Self {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::default();
        Self::tensor(a, [one, zero, zero, one])
    }

    /// The matrix σ of the de Rham Laplacian: σ² = 2i·Imτ·σ.
    pub fn sigma(ctx: &AlgebraContext) -> [Complex64; 4] {
        let t2 = ctx.tau_im;
        [
            Complex64::new(0.0, t2),
            Complex64::new(t2 * t2, 0.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(0.0, t2),
        ]
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { entries: std::array::from_fn(|i| self.entries[i].add(&other.entries[i])) }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self { entries: std::array::from_fn(|i| self.entries[i].sub(&other.entries[i])) }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self { entries: std::array::from_fn(|i| self.entries[i].scale(c)) }
    }

    pub fn mul(&self, other: &Self, ctx: &AlgebraContext) -> Self {
        let mut entries: [TorusElement; 4] = Default::default();
        for i in 0..2 {
            for j in 0..2 {
                let mut acc = TorusElement::zero();
                for k in 0..2 {
                    acc = acc.add(&self.entries[2 * i + k].mul(&other.entries[2 * k + j], ctx));
                }
                entries[2 * i + j] = acc;
            }
        }
        Self { entries }
    }

    /// Matrix trace tr: A_θ ⊗ M₂ → A_θ.
    pub fn mat_trace(&self) -> TorusElement {
        self.entries[0].add(&self.entries[3])
    }

    pub fn max_coeff(&self) -> f64 {
        self.entries.iter().map(|e| e.max_coeff()).fold(0.0, f64::max)
    }

    pub fn is_self_adjoint(&self, ctx: &AlgebraContext, tol: f64) -> bool {
        // (F*)_{ij} = (F_{ji})^*
        let adj = Self {
            entries: [
                self.entries[0].adjoint(ctx),
                self.entries[2].adjoint(ctx),
                self.entries[1].adjoint(ctx),
                self.entries[3].adjoint(ctx),
            ],
        };
        self.sub(&adj).max_coeff() <= tol
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(theta: f64) -> AlgebraContext {
        AlgebraContext::new(theta, 0.0, 1.0)
    }

    fn u() -> TorusElement {
        TorusElement::monomial(1, 0, Complex64::new(1.0, 0.0))
    }

    fn v() -> TorusElement {
        TorusElement::monomial(0, 1, Complex64::new(1.0, 0.0))
    }

    #[test]
    fn commutation_relation() {
        let c = ctx(0.37);
        let vu = v().mul(&u(), &c);
        let uv = u().mul(&v(), &c).scale(e2pi(0.37));
        assert!(vu.sub(&uv).max_coeff() < 1e-15);
    }

    #[test]
    fn unit_is_neutral() {
        let c = ctx(0.37);
        let a = u().add(&v().scale(Complex64::new(0.3, 0.7)));
        assert!(TorusElement::one().mul(&a, &c).sub(&a).max_coeff() < 1e-15);
    }

    #[test]
    fn commutative_square() {
        // θ=0: (U+V)² = U² + 2UV + V².
        let c = ctx(0.0);
        let s = u().add(&v());
        let sq = s.mul(&s, &c);
        let one = Complex64::new(1.0, 0.0);
        let expect = TorusElement::monomial(2, 0, one)
            .add(&TorusElement::monomial(1, 1, 2.0 * one))
            .add(&TorusElement::monomial(0, 2, one));
        assert!(sq.sub(&expect).max_coeff() < 1e-15);
    }

    #[test]
    fn adjoint_unitarity_and_involution() {
        let c = ctx(0.37);
        let mono = TorusElement::monomial(3, -2, Complex64::new(1.0, 0.0));
        let prod = mono.adjoint(&c).mul(&mono, &c);
        assert!(prod.sub(&TorusElement::one()).max_coeff() < 1e-14);
        let a = u().scale(Complex64::new(0.2, 0.5)).add(&v());
        assert!(a.adjoint(&c).adjoint(&c).sub(&a).max_coeff() < 1e-15);
    }

    #[test]
    fn exp_inverse() {
        let c = ctx(0.37);
        let h = TorusElement::cos_dilaton(0.3, 0.3);
        let eh = h.exp_sa(&c).unwrap();
        let emh = h.scale(Complex64::new(-1.0, 0.0)).exp_sa(&c).unwrap();
        let prod = eh.mul(&emh, &c);
        assert!(prod.sub(&TorusElement::one()).max_coeff() < 10.0 * c.prune_tol);
    }

    #[test]
    fn exp_commutative_oracle() {
        // θ=0, a = c(U+U*) is 2c·cos(2πx) pointwise.
        let c = ctx(0.0);
        let a = TorusElement::cos_dilaton(0.4, 0.0);
        let ea = a.exp_sa(&c).unwrap();
        for &x in &[0.0, 0.13, 0.41, 0.77] {
            let got = ea.eval_commutative(x, 0.0);
            let want = (0.8 * (2.0 * PI * x).cos()).exp();
            assert!((got.re - want).abs() < 1e-10 && got.im.abs() < 1e-12);
        }
    }
}
