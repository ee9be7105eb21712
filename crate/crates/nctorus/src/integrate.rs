//! From symbols to curvature: angular integration of b₂ words in polar
//! coordinates, resolution of the radial words into rearrangement kernels
//! (two-variable functions of the modular derivative), the radial
//! F-integrals, and the assembly of the Ricci density.
//!
//! Polar frame adapted to |ξ|²_τ: ξ₁ = r cosθ − (τ₁/τ₂) r sinθ,
//! ξ₂ = (r/τ₂) sinθ, so that |ξ|²_τ = r² and dξ = (r/τ₂) dr dθ in the
//! (2π)⁻² convention.

use crate::algebra::{AlgebraContext, MatrixElement, TorusElement};
use crate::error::{NcError, Result};
use crate::functions;
use crate::modular::ModularSpectrum;
use crate::symbol::{
    laplacian_symbol, parametrix, CRat, GeneratorTag, LaplacianTarget, MatPart, Rat, SymbolExpr,
    TauPoly,
};
use num_complex::Complex64;
use num_traits::Zero;
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::f64::consts::PI;

/// A word after angular integration: letters, matrix part, and the radial
/// power p of r^p.  The coefficient has one overall factor 2π removed.
#[derive(Debug, Clone)]
pub struct RadialWord {
    pub factors: Vec<GeneratorTag>,
    pub mat: MatPart,
    pub p: i32,
    pub coef: TauPoly,
}

fn double_factorial(mut n: i64) -> i128 {
    let mut r: i128 = 1;
    while n > 1 {
        r *= n as i128;
        n -= 2;
    }
    r
}

/// ∫₀^{2π} cos^a θ sin^b θ dθ / (2π) = (a−1)!!(b−1)!!/(a+b)!! for a, b even,
/// 0 otherwise.
pub fn angular_moment(a: i64, b: i64) -> Rat {
    if a % 2 != 0 || b % 2 != 0 {
        return Rat::zero();
    }
    Rat::new(
        double_factorial(a - 1) * double_factorial(b - 1),
        double_factorial(a + b),
    )
}

fn binomial(n: i64, k: i64) -> i128 {
    let mut r: i128 = 1;
    for i in 0..k {
        r = r * (n - i) as i128 / (i + 1) as i128;
    }
    r
}

/// Expand one ξ-monomial ξ₁^a ξ₂^b in the polar frame:
/// r^{a+b} Σ_j binom(a,j) (−τ₁/τ₂)^{a−j} τ₂^{−b} cos^j θ sin^{a−j+b} θ,
/// returned as (cos power, sin power, radial power, coefficient) terms.
pub fn to_polar(a: i64, b: i64) -> Vec<(i64, i64, i32, TauPoly)> {
    (0..=a)
        .map(|j| {
            let sign = if (a - j) % 2 == 0 { 1 } else { -1 };
            let c = CRat { re: Rat::from_integer(sign * binomial(a, j)), im: Rat::zero() };
            let coef = TauPoly::monomial((a - j) as i16, -((a - j + b) as i16), c);
            (j, a - j + b, (a + b) as i32, coef)
        })
        .collect()
}

/// Substitute the polar frame into each word and integrate out θ exactly.
/// The returned coefficients carry the Laurent τ₂-powers from the frame and
/// have the common factor 2π divided out.
pub fn angular_integrate(sym: &SymbolExpr) -> Vec<RadialWord> {
    let mut acc: BTreeMap<(Vec<GeneratorTag>, MatPart, i32), TauPoly> = BTreeMap::new();
    for w in sym.words() {
        for (cp, sp, p, coef) in to_polar(w.xi1 as i64, w.xi2 as i64) {
            let mom = angular_moment(cp, sp);
            if mom.is_zero() {
                continue;
            }
            let add = w.coef.mul(&coef).scale(CRat { re: mom, im: Rat::zero() });
            let key = (w.factors.clone(), w.mat, p);
            let e = acc.entry(key.clone()).or_default();
            e.add_assign(&add);
            if e.is_zero() {
                acc.remove(&key);
            }
        }
    }
    acc.into_iter()
        .map(|((factors, mat, p), coef)| RadialWord { factors, mat, p, coef })
        .collect()
}

/// The modular-variable slots a radial word resolves into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SlotKey {
    X(u8),
    Y(u8, u8),
}

impl SlotKey {
    pub fn label(&self) -> String {
        match self {
            SlotKey::X(i) => format!("x{i}"),
            SlotKey::Y(i, j) => format!("y{i}{j}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairFn {
    Ga,
    Gb,
}

/// One resolved integrand: coefficient × u₁^{kw₁} u₂^{kw₂} × F-integral ×
/// per-slot g factors × optional pair function × optional conjugation weight,
/// as a function of the modular variables attached to the slots.
#[derive(Debug, Clone)]
pub struct KernelDescriptor {
    /// Radial power P of r^P dr (measure r dr already absorbed).
    pub p: i32,
    /// Denominator factors of the F-integral: ((α, β), multiplicity) with
    /// weight W = u₁^α u₂^β.
    pub bfactors: Vec<((i32, i32), i32)>,
    /// Total spectral weight u₁^{kw₁} u₂^{kw₂} collected by K and D letters.
    pub kweight: (i32, i32),
    /// Slot variables in order; `true` marks a g(s) factor.
    pub slots: Vec<(SlotKey, bool)>,
    pub pairfn: Option<PairFn>,
    pub coef: Complex64,
    /// Multiply by e^{−Σsᵥ/2} (the k…k conjugation weight).
    pub conj: bool,
}

/// Resolve a radial word `coef · r^P · letters` into kernel descriptors by a
/// left-to-right scan tracking the accumulated modular weight.
pub fn resolve(factors: &[GeneratorTag], p: i32, coef: Complex64) -> Result<Vec<KernelDescriptor>> {
    struct State {
        w: (i32, i32),
        bfactors: Vec<((i32, i32), i32)>,
        kweight: (i32, i32),
        kcount: i32,
        slots: Vec<(SlotKey, bool)>,
        pairfn: Option<PairFn>,
        coef: Complex64,
    }
    let mut out = Vec::new();
    // Depth-first over the (at most 3-way) branching of second-derivative
    // letters.
    fn go(
        fs: &[GeneratorTag],
        st: State,
        p: i32,
        out: &mut Vec<KernelDescriptor>,
    ) -> Result<()> {
        let Some((f, rest)) = fs.split_first() else {
            if 2 * st.kcount != p + 1 {
                return Err(NcError::NonIntegrable { r_power: p, b0_count: st.kcount });
            }
            out.push(KernelDescriptor {
                p,
                bfactors: st.bfactors,
                kweight: st.kweight,
                slots: st.slots,
                pairfn: st.pairfn,
                coef: st.coef,
                conj: false,
            });
            return Ok(());
        };
        match f {
            GeneratorTag::B => {
                let mut bf = st.bfactors.clone();
                match bf.last_mut() {
                    Some((wt, e)) if *wt == st.w => *e += 1,
                    _ => bf.push((st.w, 1)),
                }
                go(rest, State { bfactors: bf, ..st }, p, out)
            }
            GeneratorTag::K => go(
                rest,
                State {
                    kweight: (st.kweight.0 + st.w.0, st.kweight.1 + st.w.1),
                    kcount: st.kcount + 1,
                    ..st
                },
                p,
                out,
            ),
            GeneratorTag::Delta(dirs) => match dirs.as_slice() {
                [i] => {
                    let v = st.slots.len();
                    if v > 1 {
                        return Err(NcError::TagDerivative(format!(
                            "more than two modular variables in a radial word"
                        )));
                    }
                    let mut w = st.w;
                    if v == 0 {
                        w.0 += 1;
                    } else {
                        w.1 += 1;
                    }
                    let mut slots = st.slots.clone();
                    slots.push((SlotKey::X(*i), true));
                    go(
                        rest,
                        State {
                            w,
                            kweight: (st.kweight.0 + st.w.0, st.kweight.1 + st.w.1),
                            kcount: st.kcount + 1,
                            slots,
                            ..st
                        },
                        p,
                        out,
                    )
                }
                [i, j] => {
                    let kw2 = (st.kweight.0 + st.w.0, st.kweight.1 + st.w.1);
                    // y branch: g(∇)(y_{ij}).
                    let v = st.slots.len();
                    let mut w = st.w;
                    if v == 0 {
                        w.0 += 1;
                    } else {
                        w.1 += 1;
                    }
                    let mut slots = st.slots.clone();
                    let (lo, hi) = (*i.min(j), *i.max(j));
                    slots.push((SlotKey::Y(lo, hi), true));
                    go(
                        rest,
                        State {
                            w,
                            bfactors: st.bfactors.clone(),
                            kweight: kw2,
                            kcount: st.kcount + 1,
                            slots,
                            pairfn: st.pairfn,
                            coef: st.coef,
                        },
                        p,
                        out,
                    )?;
                    // Pair branches: 4·G_a(∇₁,∇₂)(x_i x_j) + 4·G_b(∇₁,∇₂)(x_j x_i).
                    if !st.slots.is_empty() {
                        return Err(NcError::TagDerivative(
                            "second-derivative letter after an existing slot".into(),
                        ));
                    }
                    let w2 = (st.w.0 + 1, st.w.1 + 1);
                    for (pf, (a, b)) in [(PairFn::Ga, (*i, *j)), (PairFn::Gb, (*j, *i))] {
                        go(
                            rest,
                            State {
                                w: w2,
                                bfactors: st.bfactors.clone(),
                                kweight: kw2,
                                kcount: st.kcount + 1,
                                slots: vec![(SlotKey::X(a), false), (SlotKey::X(b), false)],
                                pairfn: Some(pf),
                                coef: 4.0 * st.coef,
                            },
                            p,
                            out,
                        )?;
                    }
                    Ok(())
                }
                d => Err(NcError::TagDerivative(format!(
                    "radial resolution only handles first and second derivative tags, got order {}",
                    d.len()
                ))),
            },
        }
    }
    go(
        factors,
        State {
            w: (0, 0),
            bfactors: Vec::new(),
            kweight: (0, 0),
            kcount: 0,
            slots: Vec::new(),
            pairfn: None,
            coef,
        },
        p,
        &mut out,
    )?;
    Ok(out)
}

// ---------------------------------------------------------------------------
// Radial quadrature
// ---------------------------------------------------------------------------

static QUAD_RULES: once_cell::sync::Lazy<((Vec<f64>, Vec<f64>), (Vec<f64>, Vec<f64>))> =
    once_cell::sync::Lazy::new(|| {
        (functions::gauss_legendre_unit(7), functions::gauss_legendre_unit(15))
    });

fn gl_rule(rule: &(Vec<f64>, Vec<f64>), f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let len = b - a;
    rule.0.iter().zip(&rule.1).map(|(&x, &w)| w * f(a + len * x)).sum::<f64>() * len
}

fn quad_rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> Result<f64> {
    let coarse = gl_rule(&QUAD_RULES.0, f, a, b);
    let fine = gl_rule(&QUAD_RULES.1, f, a, b);
    let err = (fine - coarse).abs();
    if err <= tol * (1.0 + fine.abs()) || (b - a) < 1e-14 {
        return Ok(fine);
    }
    if depth == 0 {
        return Err(NcError::QuadratureDiverged { est: fine, tol: err });
    }
    let mid = 0.5 * (a + b);
    Ok(quad_rec(f, a, mid, 0.5 * tol, depth - 1)? + quad_rec(f, mid, b, 0.5 * tol, depth - 1)?)
}

/// Adaptive Gauss–Legendre quadrature on [a, b], bisecting until the 7- and
/// 15-point estimates agree to `tol` (absolute plus relative).
pub fn adaptive_quad(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    quad_rec(f, a, b, tol, 40)
}

/// F(P; {(W, e)}) = ½ ∫₀^∞ v^{(P−1)/2} ∏ (W_j v + 1)^{−e_j} dv, mapped to
/// [0, 1] by v = x/(1−x) and integrated adaptively to 1e−10.
pub fn radial_integrate(p: i32, weights: &[(f64, i32)]) -> Result<f64> {
    let n = ((p - 1) / 2) as i32;
    let f = move |x: f64| {
        if x >= 1.0 {
            return 0.0;
        }
        let v = x / (1.0 - x);
        let mut val = v.powi(n);
        for &(w, e) in weights {
            val /= (w * v + 1.0).powi(e);
        }
        val / ((1.0 - x) * (1.0 - x))
    };
    Ok(0.5 * adaptive_quad(&f, 0.0, 1.0, 1e-10)?)
}

impl KernelDescriptor {
    /// Evaluate at modular variables `svec` (one entry per slot).
    pub fn eval(&self, svec: &[f64]) -> f64 {
        let u1 = svec.first().copied().unwrap_or(0.0).exp();
        let u2 = svec.get(1).copied().unwrap_or(0.0).exp();
        let weights: Vec<(f64, i32)> = self
            .bfactors
            .iter()
            .map(|&((a, b), e)| (u1.powi(a) * u2.powi(b), e))
            .collect();
        let mut val = radial_integrate(self.p, &weights).unwrap_or(f64::NAN);
        val *= u1.powi(self.kweight.0) * u2.powi(self.kweight.1);
        for (v, &(_, has_g)) in self.slots.iter().enumerate() {
            if has_g {
                val *= functions::eval_g(svec[v]);
            }
        }
        match self.pairfn {
            Some(PairFn::Ga) => val *= functions::eval_ga(svec[0], svec[1]),
            Some(PairFn::Gb) => val *= functions::eval_gb(svec[0], svec[1]),
            None => {}
        }
        if self.conj {
            val *= (-svec.iter().sum::<f64>() / 2.0).exp();
        }
        val
    }
}

/// All descriptors of one c₂ computation, grouped by slot signature.
#[derive(Debug, Clone, Default)]
pub struct RearrangementKernel {
    pub by_key: BTreeMap<Vec<SlotKey>, Vec<KernelDescriptor>>,
}

impl RearrangementKernel {
    /// Σ over descriptors with this slot signature, as a real-valued function
    /// of the modular variables; the imaginary parts of the complex
    /// coefficients pair with the variable ordering outside.
    pub fn total(&self, key: &[SlotKey], svec: &[f64]) -> Complex64 {
        self.by_key
            .get(key)
            .map(|ds| {
                ds.iter()
                    .map(|d| d.coef * d.eval(svec))
                    .sum()
            })
            .unwrap_or_default()
    }

    pub fn keys(&self) -> impl Iterator<Item = &Vec<SlotKey>> {
        self.by_key.keys()
    }
}

/// Build the rearrangement kernels of c₂ for one Laplacian and one matrix
/// part.  `conj` marks the k·Δ₀·k path where every modular variable carries
/// the extra weight e^{−s/2}.
pub fn c2_kernels(
    target: LaplacianTarget,
    mat: MatPart,
    ctx: &AlgebraContext,
) -> Result<RearrangementKernel> {
    let (a2, a1, a0) = laplacian_symbol(target);
    let (_, _, b2) = parametrix(&a2, &a1, &a0)?;
    let conj = target == LaplacianTarget::KDeltaK;
    let mut kern = RearrangementKernel::default();
    for rw in angular_integrate(&b2.part(mat)) {
        // Coefficient: angular coef (2π out) × 2π / ((2π)² τ₂) from the
        // measure, i.e. divide by 2πτ₂.
        let c = rw.coef.eval(ctx.tau_re, ctx.tau_im) / (2.0 * PI * ctx.tau_im);
        // r^p from the word, one more r from the polar measure.
        for mut d in resolve(&rw.factors, rw.p + 1, c)? {
            d.conj = conj;
            let key: Vec<SlotKey> = d.slots.iter().map(|&(k, _)| k).collect();
            kern.by_key.entry(key).or_default().push(d);
        }
    }
    Ok(kern)
}

// ---------------------------------------------------------------------------
// Element-level curvature assembly
// ---------------------------------------------------------------------------

/// Deduplicated eigenvalue list with an index map back into the full
/// spectrum, for tabulating kernel functions once per distinct value.
fn distinct_values(ws: &[f64]) -> (Vec<f64>, impl Fn(f64) -> usize + '_) {
    let mut vals: Vec<f64> = ws.to_vec();
    vals.sort_by(f64::total_cmp);
    vals.dedup_by(|a, b| (*a - *b).abs() < 1e-10);
    let lookup = {
        let vals = vals.clone();
        move |x: f64| -> usize {
            match vals.binary_search_by(|v| v.total_cmp(&x)) {
                Ok(i) => i,
                Err(i) => {
                    if i == 0 {
                        0
                    } else if i == vals.len() {
                        vals.len() - 1
                    } else if (x - vals[i - 1]).abs() <= (vals[i] - x).abs() {
                        i - 1
                    } else {
                        i
                    }
                }
            }
        }
    };
    (vals.clone(), lookup)
}

/// Apply a one-variable kernel column through the modular spectrum with the
/// function tabulated on the distinct eigenvalues.
fn apply_kernel_one(
    kern: &RearrangementKernel,
    key: &[SlotKey],
    spec: &ModularSpectrum,
    a: &TorusElement,
) -> TorusElement {
    let (vals, lookup) = distinct_values(&spec.eigenvalues);
    let table: Vec<Complex64> = vals.par_iter().map(|&s| kern.total(key, &[s])).collect();
    let re = spec.apply_one_var(|s| table[lookup(s)].re, a);
    let im = spec.apply_one_var(|s| table[lookup(s)].im, a);
    re.add(&im.scale(Complex64::new(0.0, 1.0)))
}

fn apply_kernel_two(
    kern: &RearrangementKernel,
    key: &[SlotKey],
    spec: &ModularSpectrum,
    a: &TorusElement,
    b: &TorusElement,
    ctx: &AlgebraContext,
) -> TorusElement {
    let (vals, lookup) = distinct_values(&spec.eigenvalues);
    let m = vals.len();
    let table: Vec<Complex64> = (0..m * m)
        .into_par_iter()
        .map(|ij| kern.total(key, &[vals[ij / m], vals[ij % m]]))
        .collect();
    let re = spec.apply_two_var(|s, t| table[lookup(s) * m + lookup(t)].re, a, b, ctx);
    let im = spec.apply_two_var(|s, t| table[lookup(s) * m + lookup(t)].im, a, b, ctx);
    re.add(&im.scale(Complex64::new(0.0, 1.0)))
}

/// First-derivative elements x_j = δ_j(h)/2 and second-derivative elements
/// y_{ij} = δ_iδ_j(h)/2 the kernels act on.
fn slot_element(key: SlotKey, h: &TorusElement) -> Result<TorusElement> {
    let half = Complex64::new(0.5, 0.0);
    Ok(match key {
        SlotKey::X(i) => h.delta(i)?.scale(half),
        SlotKey::Y(i, j) => h.delta(i)?.delta(j)?.scale(half),
    })
}

/// Element value of one matrix part of c₂(P): every kernel column applied to
/// its slot elements through the modular spectrum.
pub fn c2_element(
    target: LaplacianTarget,
    mat: MatPart,
    h: &TorusElement,
    spec: &ModularSpectrum,
    ctx: &AlgebraContext,
) -> Result<TorusElement> {
    let kern = c2_kernels(target, mat, ctx)?;
    let mut out = TorusElement::zero();
    for key in kern.by_key.keys() {
        match key.as_slice() {
            [k] => {
                let a = slot_element(*k, h)?;
                out = out.add(&apply_kernel_one(&kern, key, spec, &a));
            }
            [k1, k2] => {
                let a = slot_element(*k1, h)?;
                let b = slot_element(*k2, h)?;
                out = out.add(&apply_kernel_two(&kern, key, spec, &a, &b, ctx));
            }
            other => {
                return Err(NcError::TagDerivative(format!(
                    "kernel with {} slots",
                    other.len()
                )))
            }
        }
    }
    Ok(out.pruned(ctx))
}

/// Both matrix parts of c₂(P) as elements: (I₂ part, σ part).
pub fn c2(
    target: LaplacianTarget,
    h: &TorusElement,
    spec: &ModularSpectrum,
    ctx: &AlgebraContext,
) -> Result<(TorusElement, TorusElement)> {
    Ok((
        c2_element(target, MatPart::I, h, spec, ctx)?,
        c2_element(target, MatPart::G, h, spec, ctx)?,
    ))
}

/// The Ricci density split into its matrix components:
/// value = diagonal_part ⊗ I₂ + offdiag_part ⊗ σ.
#[derive(Debug, Clone)]
pub struct RicciDensity {
    pub value: MatrixElement,
    pub diagonal_part: TorusElement,
    pub offdiag_part: TorusElement,
}

/// Scalar curvature density R^γ = −(π/τ₂)(K(∇)(Δ₀ℓ) + H-part + S-part)·e^h
/// of the Gauss metric, with ℓ = log k = h/2.
pub fn r_gamma(
    h: &TorusElement,
    spec: &ModularSpectrum,
    ctx: &AlgebraContext,
) -> Result<TorusElement> {
    let t1 = ctx.tau_re;
    let t2 = ctx.tau_im;
    let abs2 = ctx.tau_abs2();
    let ell = h.scale(Complex64::new(0.5, 0.0));
    let lap0_ell = ell
        .delta(1)?
        .delta(1)?
        .add(&ell.delta(1)?.delta(2)?.scale(Complex64::new(2.0 * t1, 0.0)))
        .add(&ell.delta(2)?.delta(2)?.scale(Complex64::new(abs2, 0.0)));
    let x1 = h.delta(1)?.scale(Complex64::new(0.5, 0.0));
    let x2 = h.delta(2)?.scale(Complex64::new(0.5, 0.0));
    let k_part = spec.apply_one_var(functions::eval_k, &lap0_ell);
    let hp = |a: &TorusElement, b: &TorusElement| spec.apply_two_var(functions::eval_h, a, b, ctx);
    let sp = |a: &TorusElement, b: &TorusElement| spec.apply_two_var(functions::eval_s, a, b, ctx);
    let h_part = hp(&x1, &x1)
        .add(&hp(&x1, &x2).scale(Complex64::new(t1, 0.0)))
        .add(&hp(&x2, &x1).scale(Complex64::new(t1, 0.0)))
        .add(&hp(&x2, &x2).scale(Complex64::new(abs2, 0.0)));
    // Antisymmetric square: iτ₂ (S(∇₁,∇₂)(x₂x₁) − S(∇₁,∇₂)(x₁x₂)).
    let s_part = sp(&x2, &x1)
        .sub(&sp(&x1, &x2))
        .scale(Complex64::new(0.0, t2));
    let eh = h.exp_sa(ctx)?;
    Ok(k_part
        .add(&h_part)
        .add(&s_part)
        .mul(&eh, ctx)
        .scale(Complex64::new(-PI / t2, 0.0)))
}

/// Ricci density from the closed-form curvature theorem:
/// Ric = (Imτ/4π²) R^γ ⊗ I₂ − (1/4π) (S(∇₁,∇₂)(x₁x₂) − S(∇₁,∇₂)(x₂x₁)) e^h ⊗ σ.
pub fn ricci_density(
    h: &TorusElement,
    spec: &ModularSpectrum,
    ctx: &AlgebraContext,
) -> Result<RicciDensity> {
    let t2 = ctx.tau_im;
    let diag = r_gamma(h, spec, ctx)?.scale(Complex64::new(t2 / (4.0 * PI * PI), 0.0));
    let x1 = h.delta(1)?.scale(Complex64::new(0.5, 0.0));
    let x2 = h.delta(2)?.scale(Complex64::new(0.5, 0.0));
    let sp = |a: &TorusElement, b: &TorusElement| spec.apply_two_var(functions::eval_s, a, b, ctx);
    let eh = h.exp_sa(ctx)?;
    let offdiag = sp(&x1, &x2)
        .sub(&sp(&x2, &x1))
        .mul(&eh, ctx)
        .scale(Complex64::new(-1.0 / (4.0 * PI), 0.0));
    Ok(assemble(diag, offdiag, ctx))
}

/// Ricci density through the raw symbol pipeline:
/// Ric = Imτ (c₂(Δ_{h,0}) ⊗ I₂ − c₂(Δ_{h,1})) e^h.
pub fn ricci_density_pipeline(
    h: &TorusElement,
    spec: &ModularSpectrum,
    ctx: &AlgebraContext,
) -> Result<RicciDensity> {
    let t2 = Complex64::new(ctx.tau_im, 0.0);
    let eh = h.exp_sa(ctx)?;
    let c2_kdk = c2_element(LaplacianTarget::KDeltaK, MatPart::I, h, spec, ctx)?;
    let c2_dr_i = c2_element(LaplacianTarget::DeRham, MatPart::I, h, spec, ctx)?;
    let c2_dr_g = c2_element(LaplacianTarget::DeRham, MatPart::G, h, spec, ctx)?;
    let diag = c2_kdk.sub(&c2_dr_i).mul(&eh, ctx).scale(t2);
    let offdiag = c2_dr_g.mul(&eh, ctx).scale(-t2);
    Ok(assemble(diag, offdiag, ctx))
}

fn assemble(diag: TorusElement, offdiag: TorusElement, ctx: &AlgebraContext) -> RicciDensity {
    let sigma = MatrixElement::sigma(ctx);
    let value = MatrixElement::tensor_id(&diag).add(&MatrixElement::tensor(&offdiag, sigma));
    RicciDensity { value, diagonal_part: diag, offdiag_part: offdiag }
}

/// The Ricci functional Ric(F) = φ(tr(F·Ric) e^{−h}) / Imτ, rescaled by
/// (2π)² to the heat-trace normalization.
///
/// The density itself follows the plain-dξ writing of c₂ = ∫ b₂(ξ, −1) dξ,
/// while the heat-trace asymptotics Tr(F e^{−tΔ}) are stated with the
/// (2π)⁻²-normalized symbol-to-trace map; the fitted a₂ coefficient of the
/// spectral oracle therefore equals (2π)² times the plain functional, and
/// that factor is applied here once so that both sides are directly
/// comparable.
pub fn ricci_functional(
    ric: &RicciDensity,
    f: &MatrixElement,
    h: &TorusElement,
    ctx: &AlgebraContext,
) -> Result<Complex64> {
    let emh = h.scale(Complex64::new(-1.0, 0.0)).exp_sa(ctx)?;
    let traced = f.mul(&ric.value, ctx).mat_trace();
    let val = traced.mul(&emh, ctx).trace_phi() / ctx.tau_im;
    Ok(val * (2.0 * PI) * (2.0 * PI))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::modular::{eigen_nabla, TruncationGrid};

    #[test]
    fn moment_table() {
        // ∫cos²θ dθ = π → normalized 1/2; ∫cos²sin²= π/4 → 1/8; odd → 0.
        assert_eq!(angular_moment(2, 0), Rat::new(1, 2));
        assert_eq!(angular_moment(2, 2), Rat::new(1, 8));
        assert_eq!(angular_moment(4, 0), Rat::new(3, 8));
        assert!(angular_moment(1, 2).is_zero());
    }

    #[test]
    fn angular_golden_terms() {
        // The σ-part of b₂ reduces, after the commuting-tag merge, to the
        // frozen 4-word angular display.
        let b2pp = crate::symbol::b2_doubleprime().unwrap().merge_commuting_tags();
        let got = angular_integrate(&b2pp);
        let want = crate::symbol::golden_b2pp_angular().unwrap();
        assert_eq!(got.len(), want.len());
        for (factors, p, coef) in &want {
            let hit = got
                .iter()
                .find(|rw| rw.factors == *factors && rw.p == *p)
                .unwrap_or_else(|| panic!("missing angular word at p={p}"));
            assert_eq!(hit.coef, *coef);
        }
    }

    #[test]
    fn radial_integral_closed_form() {
        // ½∫₀^∞ v/(Wv+1)³ dv = 1/(4W²).
        let w = 1.7;
        let got = radial_integrate(3, &[((w), 3)]).unwrap();
        assert!((got - 0.25 / (w * w)).abs() < 1e-10);
    }

    #[test]
    fn sigma_kernel_is_s_function() {
        // total over the G kernels at key (x1, x2) equals S(s,t)/(4πτ₂).
        let ctx = AlgebraContext::new(0.37, 0.3, 1.1);
        let kern = c2_kernels(LaplacianTarget::DeRham, MatPart::G, &ctx).unwrap();
        for &(s, t) in &[(0.7, -0.3), (1.3, 0.8), (-1.1, 0.4)] {
            let want = functions::eval_s(s, t) / (4.0 * PI * ctx.tau_im);
            let got12 = kern.total(&[SlotKey::X(1), SlotKey::X(2)], &[s, t]);
            let got21 = kern.total(&[SlotKey::X(2), SlotKey::X(1)], &[s, t]);
            assert!((got12.re - want).abs() < 1e-8 && got12.im.abs() < 1e-12, "{s},{t}");
            assert!((got21.re + want).abs() < 1e-8 && got21.im.abs() < 1e-12, "{s},{t}");
        }
    }

    #[test]
    fn theorem_matches_pipeline_smoke() {
        // Small-grid agreement between the closed-form density and the raw
        // symbol pipeline; the acceptance suite runs the full-size version.
        let ctx = AlgebraContext::new(0.41, 0.2, 0.9);
        let h = TorusElement::cos_dilaton(0.25, 0.15);
        let spec = eigen_nabla(&h, TruncationGrid::new(5, 0), &ctx).unwrap();
        let theorem = ricci_density(&h, &spec, &ctx).unwrap();
        let pipeline = ricci_density_pipeline(&h, &spec, &ctx).unwrap();
        assert!(
            theorem.diagonal_part.sub(&pipeline.diagonal_part).max_coeff() < 1e-7,
            "diag {}",
            theorem.diagonal_part.sub(&pipeline.diagonal_part).max_coeff()
        );
        assert!(theorem.offdiag_part.sub(&pipeline.offdiag_part).max_coeff() < 1e-7);
    }
}
