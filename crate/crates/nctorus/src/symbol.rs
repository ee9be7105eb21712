//! Exact pseudodifferential symbol calculus for the conformally rescaled
//! Laplacians, at spectral parameter λ = −1.
//!
//! A symbol is a finite sum of *words*.  A word is a product of opaque
//! operator letters
//!
//! * `B` — the inverse (a₂ − λ)⁻¹ = (k²|ξ|²_τ + 1)⁻¹,
//! * `K` — k²,
//! * `Delta(dirs)` — an iterated derivative δ_{d₁}δ_{d₂}…(k²),
//!
//! together with a matrix part (I₂ or the de Rham matrix σ, σ² = 2iτ₂σ), a
//! ξ-monomial ξ₁^a ξ₂^b, and an exact scalar coefficient: a Laurent
//! polynomial in (τ₁, τ₂) with Gaussian-rational coefficients.  `K` commutes
//! with `B` and is bubbled left past `B` runs to reach a canonical form; the
//! derivative letters do not commute with anything.

use crate::algebra::{AlgebraContext, TorusElement};
use crate::error::{NcError, Result};
use crate::linalg;
use num_complex::Complex64;
use num_rational::Ratio;
use num_traits::Zero;
use std::collections::BTreeMap;

pub type Rat = Ratio<i128>;

/// Gaussian rational re + i·im.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct CRat {
    pub re: Rat,
    pub im: Rat,
}

impl CRat {
    pub fn int(n: i128) -> Self {
        Self { re: Rat::from_integer(n), im: Rat::zero() }
    }
    pub fn imag(n: i128) -> Self {
        Self { re: Rat::zero(), im: Rat::from_integer(n) }
    }
    pub fn ratio(num: i128, den: i128) -> Self {
        Self { re: Rat::new(num, den), im: Rat::zero() }
    }
    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }
    pub fn add(self, o: Self) -> Self {
        Self { re: self.re + o.re, im: self.im + o.im }
    }
    pub fn mul(self, o: Self) -> Self {
        Self { re: self.re * o.re - self.im * o.im, im: self.re * o.im + self.im * o.re }
    }
    pub fn neg(self) -> Self {
        Self { re: -self.re, im: -self.im }
    }
    pub fn to_complex(self) -> Complex64 {
        let f = |r: Rat| *r.numer() as f64 / *r.denom() as f64;
        Complex64::new(f(self.re), f(self.im))
    }
}

/// Laurent polynomial in (τ₁, τ₂): exponent pair → Gaussian rational.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TauPoly(pub BTreeMap<(i16, i16), CRat>);

impl TauPoly {
    pub fn constant(c: CRat) -> Self {
        Self::monomial(0, 0, c)
    }
    pub fn one() -> Self {
        Self::constant(CRat::int(1))
    }
    pub fn monomial(p1: i16, p2: i16, c: CRat) -> Self {
        let mut m = BTreeMap::new();
        if !c.is_zero() {
            m.insert((p1, p2), c);
        }
        Self(m)
    }
    /// |τ|² = τ₁² + τ₂².
    pub fn tau_abs2() -> Self {
        let mut p = Self::monomial(2, 0, CRat::int(1));
        p.add_assign(&Self::monomial(0, 2, CRat::int(1)));
        p
    }
    /// τ = τ₁ + iτ₂ (conj = false) or τ̄ (conj = true).
    pub fn tau(conj: bool) -> Self {
        let mut p = Self::monomial(1, 0, CRat::int(1));
        p.add_assign(&Self::monomial(0, 1, CRat::imag(if conj { -1 } else { 1 })));
        p
    }
    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }
    pub fn add_assign(&mut self, o: &Self) {
        for (&k, &c) in &o.0 {
            let e = self.0.entry(k).or_insert(CRat::int(0));
            *e = e.add(c);
            if e.is_zero() {
                self.0.remove(&k);
            }
        }
    }
    pub fn mul(&self, o: &Self) -> Self {
        let mut out = Self::default();
        for (&(a1, b1), &c1) in &self.0 {
            for (&(a2, b2), &c2) in &o.0 {
                out.add_assign(&Self::monomial(a1 + a2, b1 + b2, c1.mul(c2)));
            }
        }
        out
    }
    pub fn neg(&self) -> Self {
        Self(self.0.iter().map(|(&k, &c)| (k, c.neg())).collect())
    }
    pub fn scale(&self, c: CRat) -> Self {
        let mut out = Self::default();
        for (&k, &v) in &self.0 {
            out.add_assign(&Self::monomial(k.0, k.1, v.mul(c)));
        }
        out
    }
    pub fn eval(&self, tau1: f64, tau2: f64) -> Complex64 {
        self.0
            .iter()
            .map(|(&(p1, p2), &c)| {
                c.to_complex() * tau1.powi(p1 as i32) * tau2.powi(p2 as i32)
            })
            .sum()
    }
}

/// Letters of the word algebra.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GeneratorTag {
    /// (k²|ξ|²_τ + 1)⁻¹.
    B,
    /// k².
    K,
    /// δ_{d₁}…δ_{dₙ}(k²); the direction list is outermost first.
    Delta(Vec<u8>),
}

impl GeneratorTag {
    /// Short display form matching the frozen golden data ("B", "K", "D12" …).
    pub fn label(&self) -> String {
        match self {
            Self::B => "B".into(),
            Self::K => "K".into(),
            Self::Delta(d) => {
                let mut s = String::from("D");
                for &i in d {
                    s.push_str(&i.to_string());
                }
                s
            }
        }
    }

    pub fn from_label(s: &str) -> Result<Self> {
        match s {
            "B" => Ok(Self::B),
            "K" => Ok(Self::K),
            _ if s.starts_with('D') => {
                let dirs: Vec<u8> = s[1..]
                    .chars()
                    .map(|c| c.to_digit(10).map(|d| d as u8))
                    .collect::<Option<_>>()
                    .ok_or_else(|| NcError::TagDerivative(format!("bad tag {s}")))?;
                Ok(Self::Delta(dirs))
            }
            _ => Err(NcError::TagDerivative(format!("unknown tag {s}"))),
        }
    }
}

/// Matrix part of a word: scalar (⊗I₂) or the de Rham matrix σ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum MatPart {
    I,
    G,
}

/// Canonical word key: letters, matrix part, ξ-exponents.
pub type WordKey = (Vec<GeneratorTag>, MatPart, i32, i32);

/// One word with its exact coefficient.
#[derive(Debug, Clone)]
pub struct Word {
    pub factors: Vec<GeneratorTag>,
    pub mat: MatPart,
    pub xi1: i32,
    pub xi2: i32,
    pub coef: TauPoly,
}

/// Finite sum of words in canonical form.
#[derive(Debug, Clone, Default)]
pub struct SymbolExpr(pub BTreeMap<WordKey, TauPoly>);

/// K commutes with B: bubble every K left past B runs.
fn canon(mut f: Vec<GeneratorTag>) -> Vec<GeneratorTag> {
    let mut changed = true;
    while changed {
        changed = false;
        for i in 0..f.len().saturating_sub(1) {
            if f[i] == GeneratorTag::B && f[i + 1] == GeneratorTag::K {
                f.swap(i, i + 1);
                changed = true;
            }
        }
    }
    f
}

/// Gradient of |ξ|²_τ in direction i: list of (coef, dξ₁, dξ₂).
fn grad(i: u8) -> Vec<(TauPoly, i32, i32)> {
    match i {
        1 => vec![
            (TauPoly::constant(CRat::int(2)), 1, 0),
            (TauPoly::monomial(1, 0, CRat::int(2)), 0, 1),
        ],
        _ => vec![
            (TauPoly::monomial(1, 0, CRat::int(2)), 1, 0),
            (TauPoly::tau_abs2().scale(CRat::int(2)), 0, 1),
        ],
    }
}

/// |ξ|²_τ = ξ₁² + 2τ₁ξ₁ξ₂ + |τ|²ξ₂².
fn xi2_monomials() -> Vec<(TauPoly, i32, i32)> {
    vec![
        (TauPoly::one(), 2, 0),
        (TauPoly::monomial(1, 0, CRat::int(2)), 1, 1),
        (TauPoly::tau_abs2(), 0, 2),
    ]
}

impl SymbolExpr {
    pub fn add_word(&mut self, factors: Vec<GeneratorTag>, mat: MatPart, a: i32, b: i32, coef: TauPoly) {
        if coef.is_zero() {
            return;
        }
        let key = (canon(factors), mat, a, b);
        let e = self.0.entry(key.clone()).or_default();
        e.add_assign(&coef);
        if e.is_zero() {
            self.0.remove(&key);
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut out = self.clone();
        for ((f, m, a, b), c) in &o.0 {
            out.add_word(f.clone(), *m, *a, *b, c.clone());
        }
        out
    }

    pub fn neg(&self) -> Self {
        Self(self.0.iter().map(|(k, c)| (k.clone(), c.neg())).collect())
    }

    pub fn scale(&self, c: CRat) -> Self {
        let mut out = Self::default();
        for ((f, m, a, b), coef) in &self.0 {
            out.add_word(f.clone(), *m, *a, *b, coef.scale(c));
        }
        out
    }

    /// Word-by-word product; σ·σ contributes the extra scalar 2iτ₂.
    pub fn mul(&self, o: &Self) -> Self {
        let mut out = Self::default();
        for ((f1, m1, a1, b1), c1) in &self.0 {
            for ((f2, m2, a2, b2), c2) in &o.0 {
                let mut coef = c1.mul(c2);
                let mat = match (m1, m2) {
                    (MatPart::I, m) => *m,
                    (m, MatPart::I) => *m,
                    (MatPart::G, MatPart::G) => {
                        coef = coef.mul(&TauPoly::monomial(0, 1, CRat::imag(2)));
                        MatPart::G
                    }
                };
                let mut f = f1.clone();
                f.extend(f2.iter().cloned());
                out.add_word(f, mat, a1 + a2, b1 + b2, coef);
            }
        }
        out
    }

    /// ∂/∂ξᵢ.  The ξ-monomial differentiates in place; each `B` letter
    /// contributes −B·K·(∂ᵢ|ξ|²_τ)·B.
    pub fn xi_derivative(&self, i: u8) -> Result<Self> {
        if i != 1 && i != 2 {
            return Err(NcError::BadDirection(i));
        }
        let mut out = Self::default();
        for ((f, m, a, b), c) in &self.0 {
            if i == 1 && *a > 0 {
                out.add_word(f.clone(), *m, a - 1, *b, c.scale(CRat::int(*a as i128)));
            }
            if i == 2 && *b > 0 {
                out.add_word(f.clone(), *m, *a, b - 1, c.scale(CRat::int(*b as i128)));
            }
            for (p, fac) in f.iter().enumerate() {
                if *fac == GeneratorTag::B {
                    let mut nf: Vec<GeneratorTag> = f[..p].to_vec();
                    nf.extend([GeneratorTag::B, GeneratorTag::K, GeneratorTag::B]);
                    nf.extend(f[p + 1..].iter().cloned());
                    for (cc, da, db) in grad(i) {
                        out.add_word(nf.clone(), *m, a + da, b + db, c.mul(&cc).neg());
                    }
                }
            }
        }
        Ok(out)
    }

    /// Algebra derivation δᵢ acting through the letters: δᵢ(B) =
    /// −B·δᵢ(k²)·|ξ|²_τ·B, δᵢ(K) = Delta([i]), and δᵢ(Delta(d)) prepends i.
    /// The tag set is closed under differentiation of any order.
    pub fn delta(&self, i: u8) -> Result<Self> {
        if i != 1 && i != 2 {
            return Err(NcError::BadDirection(i));
        }
        let mut out = Self::default();
        for ((f, m, a, b), c) in &self.0 {
            for (p, fac) in f.iter().enumerate() {
                match fac {
                    GeneratorTag::B => {
                        let mut nf: Vec<GeneratorTag> = f[..p].to_vec();
                        nf.extend([GeneratorTag::B, GeneratorTag::Delta(vec![i]), GeneratorTag::B]);
                        nf.extend(f[p + 1..].iter().cloned());
                        for (cc, da, db) in xi2_monomials() {
                            out.add_word(nf.clone(), *m, a + da, b + db, c.mul(&cc).neg());
                        }
                    }
                    GeneratorTag::K => {
                        let mut nf = f.clone();
                        nf[p] = GeneratorTag::Delta(vec![i]);
                        out.add_word(nf, *m, *a, *b, c.clone());
                    }
                    GeneratorTag::Delta(d) => {
                        let mut nd = vec![i];
                        nd.extend(d.iter().copied());
                        let mut nf = f.clone();
                        nf[p] = GeneratorTag::Delta(nd);
                        out.add_word(nf, *m, *a, *b, c.clone());
                    }
                }
            }
        }
        Ok(out)
    }

    /// Replace each Delta tag by its sorted-direction representative (the
    /// derivatives δ₁, δ₂ commute), merging coefficients.
    pub fn merge_commuting_tags(&self) -> Self {
        let mut out = Self::default();
        for ((f, m, a, b), c) in &self.0 {
            let nf: Vec<GeneratorTag> = f
                .iter()
                .map(|t| match t {
                    GeneratorTag::Delta(d) => {
                        let mut d = d.clone();
                        d.sort_unstable();
                        GeneratorTag::Delta(d)
                    }
                    o => o.clone(),
                })
                .collect();
            out.add_word(nf, *m, *a, *b, c.clone());
        }
        out
    }

    /// Restrict to one matrix part.
    pub fn part(&self, mat: MatPart) -> Self {
        Self(self.0.iter().filter(|((_, m, _, _), _)| *m == mat).map(|(k, c)| (k.clone(), c.clone())).collect())
    }

    pub fn words(&self) -> impl Iterator<Item = Word> + '_ {
        self.0.iter().map(|((f, m, a, b), c)| Word {
            factors: f.clone(),
            mat: *m,
            xi1: *a,
            xi2: *b,
            coef: c.clone(),
        })
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Which operator's symbol to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LaplacianTarget {
    /// Δ_φ^{(0,1)} = (δ₁ + τδ₂) k² (δ₁ + τ̄δ₂), the scalar (0,1)-Laplacian.
    DeltaPhi,
    /// Δ₀ ∘ L_{k²}: the flat Laplacian composed with left multiplication,
    /// the symbol route to c₂(kΔ₀k).
    KDeltaK,
    /// Δ_{h,1}: the conformal de Rham Laplacian on 1-forms (I and σ parts).
    DeRham,
}

/// Degree-2/1/0 homogeneous parts (a₂, a₁, a₀) of the chosen operator.
pub fn laplacian_symbol(target: LaplacianTarget) -> (SymbolExpr, SymbolExpr, SymbolExpr) {
    let mut a2 = SymbolExpr::default();
    for (cc, a, b) in xi2_monomials() {
        a2.add_word(vec![GeneratorTag::K], MatPart::I, a, b, cc);
    }
    match target {
        LaplacianTarget::DeltaPhi => {
            let (a1, a0) = delta_phi_lower();
            (a2, a1, a0)
        }
        LaplacianTarget::KDeltaK => {
            let mut a1 = SymbolExpr::default();
            for i in [1u8, 2u8] {
                for (cc, da, db) in grad(i) {
                    a1.add_word(vec![GeneratorTag::Delta(vec![i])], MatPart::I, da, db, cc);
                }
            }
            // a₀ = Δ₀(k²) = δ₁δ₁ + 2τ₁δ₁δ₂ + |τ|²δ₂δ₂ applied to k².
            let mut a0 = SymbolExpr::default();
            a0.add_word(vec![GeneratorTag::Delta(vec![1, 1])], MatPart::I, 0, 0, TauPoly::one());
            a0.add_word(
                vec![GeneratorTag::Delta(vec![1, 2])],
                MatPart::I,
                0,
                0,
                TauPoly::monomial(1, 0, CRat::int(2)),
            );
            a0.add_word(vec![GeneratorTag::Delta(vec![2, 2])], MatPart::I, 0, 0, TauPoly::tau_abs2());
            (a2, a1, a0)
        }
        LaplacianTarget::DeRham => {
            let (mut a1, a0) = delta_phi_lower();
            // a₁″ ⊗ σ = (δ₁(k²) ξ₂ − δ₂(k²) ξ₁) ⊗ σ.
            a1.add_word(vec![GeneratorTag::Delta(vec![1])], MatPart::G, 0, 1, TauPoly::one());
            a1.add_word(
                vec![GeneratorTag::Delta(vec![2])],
                MatPart::G,
                1,
                0,
                TauPoly::one().neg(),
            );
            (a2, a1, a0)
        }
    }
}

fn delta_phi_lower() -> (SymbolExpr, SymbolExpr) {
    // a₁′ = (δ₁(k²) + τ δ₂(k²)) (ξ₁ + τ̄ ξ₂).
    let mut a1 = SymbolExpr::default();
    for (fac, cf) in [
        (GeneratorTag::Delta(vec![1]), TauPoly::one()),
        (GeneratorTag::Delta(vec![2]), TauPoly::tau(false)),
    ] {
        a1.add_word(vec![fac.clone()], MatPart::I, 1, 0, cf.clone());
        a1.add_word(vec![fac], MatPart::I, 0, 1, cf.mul(&TauPoly::tau(true)));
    }
    (a1, SymbolExpr::default())
}

/// Parametrix terms b₀, b₁, b₂ of (P − λ)⁻¹ at λ = −1; `B` stands for
/// (a₂ − λ)⁻¹.
pub fn parametrix(
    a2: &SymbolExpr,
    a1: &SymbolExpr,
    a0: &SymbolExpr,
) -> Result<(SymbolExpr, SymbolExpr, SymbolExpr)> {
    let mut b0 = SymbolExpr::default();
    b0.add_word(vec![GeneratorTag::B], MatPart::I, 0, 0, TauPoly::one());
    let mut b1 = SymbolExpr::default();
    b1 = b1.add(&b0.mul(a1).mul(&b0));
    for i in [1u8, 2u8] {
        b1 = b1.add(&b0.xi_derivative(i)?.mul(&a2.delta(i)?).mul(&b0));
    }
    let b1 = b1.neg();
    let mut b2 = b0.mul(a0).mul(&b0).add(&b1.mul(a1).mul(&b0));
    for i in [1u8, 2u8] {
        b2 = b2.add(&b0.xi_derivative(i)?.mul(&a1.delta(i)?).mul(&b0));
        b2 = b2.add(&b1.xi_derivative(i)?.mul(&a2.delta(i)?).mul(&b0));
    }
    b2 = b2.add(
        &b0.xi_derivative(1)?
            .xi_derivative(2)?
            .mul(&a2.delta(2)?.delta(1)?)
            .mul(&b0),
    );
    let half = CRat::ratio(1, 2);
    for i in [1u8, 2u8] {
        b2 = b2.add(
            &b0.xi_derivative(i)?
                .xi_derivative(i)?
                .mul(&a2.delta(i)?.delta(i)?)
                .mul(&b0)
                .scale(half),
        );
    }
    Ok((b0, b1, b2.neg()))
}

/// The σ-proportional part b₂″ of the de Rham parametrix — the source of the
/// purely noncommutative curvature term.
pub fn b2_doubleprime() -> Result<SymbolExpr> {
    let (a2, a1, a0) = laplacian_symbol(LaplacianTarget::DeRham);
    let (_, _, b2) = parametrix(&a2, &a1, &a0)?;
    Ok(b2.part(MatPart::G))
}

/// Full symbol composition σ(ρ₁ ∘ ρ₂) = Σ_α (1/α!) ∂_ξ^α ρ₁ · δ^α ρ₂ with
/// |α| ≤ `max_order_drop`.  For differential ρ₁ of degree ≤ 2 the series
/// terminates at |α| = 2 and the result is exact.
pub fn compose(rho1: &SymbolExpr, rho2: &SymbolExpr, max_order_drop: u32) -> Result<SymbolExpr> {
    let mut out = SymbolExpr::default();
    for a1 in 0..=max_order_drop {
        for a2 in 0..=(max_order_drop - a1) {
            let mut left = rho1.clone();
            for _ in 0..a1 {
                left = left.xi_derivative(1)?;
            }
            for _ in 0..a2 {
                left = left.xi_derivative(2)?;
            }
            if left.is_empty() {
                continue;
            }
            let mut right = rho2.clone();
            for _ in 0..a1 {
                right = right.delta(1)?;
            }
            for _ in 0..a2 {
                right = right.delta(2)?;
            }
            let fact = (1..=a1 as i128).product::<i128>() * (1..=a2 as i128).product::<i128>();
            out = out.add(&left.mul(&right).scale(CRat::ratio(1, fact)));
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Numeric evaluation of symbols at a concrete dilaton and frequency, used by
// the parametrix remainder decay test.
// ---------------------------------------------------------------------------

/// Evaluator caching the element values of the letters for one (h, ctx).
pub struct SymbolEvaluator {
    ctx: AlgebraContext,
    k2: TorusElement,
    grid_n: i32,
}

impl SymbolEvaluator {
    pub fn new(h: &TorusElement, ctx: &AlgebraContext, grid_n: i32) -> Result<Self> {
        Ok(Self { ctx: *ctx, k2: h.exp_sa(ctx)?, grid_n })
    }

    /// Element value of (k²|ξ|²_τ + 1)⁻¹ by a band-limited linear solve.
    #[doc(hidden)]
    pub fn b_element(&self, xi: (f64, f64)) -> Result<TorusElement> {
        let ctx = &self.ctx;
        let q = xi.0 * xi.0 + 2.0 * ctx.tau_re * xi.0 * xi.1 + ctx.tau_abs2() * xi.1 * xi.1;
        let z = self.k2.scale(Complex64::new(q, 0.0)).add(&TorusElement::one());
        let n = self.grid_n;
        let side = (2 * n + 1) as usize;
        let dim = side * side;
        let idx = |m: i32, nn: i32| ((m + n) as usize) * side + (nn + n) as usize;
        // Left-multiplication matrix of z on the band-limited grid,
        // column-major.
        let mut lmat = vec![Complex64::default(); dim * dim];
        for m2 in -n..=n {
            for n2 in -n..=n {
                let col = idx(m2, n2);
                for (&(m1, n1), &c) in &z.coeffs {
                    let (m, nn) = (m1 + m2, n1 + n2);
                    if m.abs() <= n && nn.abs() <= n {
                        let phase = crate::algebra::e2pi(ctx.theta * n1 as f64 * m2 as f64);
                        lmat[col * dim + idx(m, nn)] += c * phase;
                    }
                }
            }
        }
        let mut rhs = vec![Complex64::default(); dim];
        rhs[idx(0, 0)] = Complex64::new(1.0, 0.0);
        let sol = linalg::solve(&lmat, &rhs, dim)?;
        let mut out = TorusElement::zero();
        for m in -n..=n {
            for nn in -n..=n {
                let c = sol[idx(m, nn)];
                if c.norm() > 1e-16 {
                    out.coeffs.insert((m, nn), c);
                }
            }
        }
        Ok(out)
    }

    fn tag_element(&self, tag: &GeneratorTag, b: &TorusElement) -> Result<TorusElement> {
        Ok(match tag {
            GeneratorTag::B => b.clone(),
            GeneratorTag::K => self.k2.clone(),
            GeneratorTag::Delta(dirs) => {
                let mut e = self.k2.clone();
                // Directions are outermost-first; the order is immaterial
                // since δ₁ and δ₂ commute.
                for &d in dirs {
                    e = e.delta(d)?;
                }
                e
            }
        })
    }

    /// Evaluate a symbol at ξ, returning the I₂ and σ element parts.  Words
    /// sharing a factor list are grouped so each distinct product is formed
    /// once, with intermediate pruning to keep supports tight.
    pub fn eval(&self, sym: &SymbolExpr, xi: (f64, f64)) -> Result<(TorusElement, TorusElement)> {
        let b = self.b_element(xi)?;
        let mut grouped: std::collections::BTreeMap<(Vec<GeneratorTag>, MatPart), Complex64> =
            std::collections::BTreeMap::new();
        for w in sym.words() {
            let scalar = w.coef.eval(self.ctx.tau_re, self.ctx.tau_im)
                * xi.0.powi(w.xi1)
                * xi.1.powi(w.xi2);
            if scalar.norm() == 0.0 {
                continue;
            }
            *grouped
                .entry((w.factors.clone(), w.mat))
                .or_insert_with(Complex64::default) += scalar;
        }
        let mut out_i = TorusElement::zero();
        let mut out_g = TorusElement::zero();
        // Consecutive factor lists in the sorted grouping share long
        // prefixes; keep a stack of prefix products so each letter is
        // multiplied in at most once per distinct prefix.
        let mut stack: Vec<(GeneratorTag, TorusElement)> = Vec::new();
        for ((factors, mat), scalar) in grouped {
            if scalar.norm() == 0.0 {
                continue;
            }
            let shared = stack
                .iter()
                .zip(&factors)
                .take_while(|((tag, _), f)| tag == *f)
                .count();
            stack.truncate(shared);
            for tag in &factors[shared..] {
                let prev = stack
                    .last()
                    .map(|(_, v)| v.clone())
                    .unwrap_or_else(TorusElement::one);
                let mut next = prev.mul(&self.tag_element(tag, &b)?, &self.ctx);
                // Prune relative to the element's own magnitude: word values
                // can be very small with large ξ-power prefactors, so the
                // absolute floor of `pruned` would destroy their relative
                // accuracy.
                let cut = self.ctx.prune_tol * next.max_coeff();
                next.coeffs.retain(|_, c| c.norm() > cut);
                stack.push((tag.clone(), next));
            }
            let val = stack
                .last()
                .map(|(_, v)| v.clone())
                .unwrap_or_else(TorusElement::one)
                .scale(scalar);
            match mat {
                MatPart::I => out_i = out_i.add(&val),
                MatPart::G => out_g = out_g.add(&val),
            }
        }
        Ok((out_i.pruned(&self.ctx), out_g.pruned(&self.ctx)))
    }

    /// HS norm of σ(ρ₁ ∘ ρ₂) − 1 at ξ: the parametrix remainder size.
    pub fn remainder_norm(&self, composed: &SymbolExpr, xi: (f64, f64)) -> Result<f64> {
        let (i_part, g_part) = self.eval(composed, xi)?;
        let defect = i_part.sub(&TorusElement::one());
        Ok((defect.hs_norm().powi(2) + g_part.hs_norm().powi(2)).sqrt())
    }
}

// ---------------------------------------------------------------------------
// Golden data
// ---------------------------------------------------------------------------

#[derive(serde::Deserialize)]
struct GoldenTerm {
    coef: Vec<[i64; 6]>,
    #[serde(default)]
    xi1: i32,
    #[serde(default)]
    xi2: i32,
    factors: Vec<String>,
    #[serde(default)]
    p: Option<i32>,
}

#[derive(serde::Deserialize)]
struct GoldenFile {
    terms: Vec<GoldenTerm>,
    angular: Vec<GoldenTerm>,
}

const GOLDEN_JSON: &str = include_str!("../data/golden_b2.json");

fn poly_from_entries(entries: &[[i64; 6]]) -> TauPoly {
    let mut p = TauPoly::default();
    for &[p1, p2, rn, rd, in_, id] in entries {
        p.add_assign(&TauPoly::monomial(
            p1 as i16,
            p2 as i16,
            CRat { re: Rat::new(rn as i128, rd as i128), im: Rat::new(in_ as i128, id as i128) },
        ));
    }
    p
}

/// The frozen 76-word reference value of b₂″ as a `SymbolExpr`.
pub fn golden_b2pp() -> Result<SymbolExpr> {
    let g: GoldenFile = serde_json::from_str(GOLDEN_JSON)?;
    let mut out = SymbolExpr::default();
    for t in &g.terms {
        let factors = t
            .factors
            .iter()
            .map(|s| GeneratorTag::from_label(s))
            .collect::<Result<Vec<_>>>()?;
        out.add_word(factors, MatPart::G, t.xi1, t.xi2, poly_from_entries(&t.coef));
    }
    Ok(out)
}

/// The frozen 4-term angular reduction of b₂″: (factors, radial power) →
/// coefficient, with an overall 2π factored out.
pub fn golden_b2pp_angular() -> Result<Vec<(Vec<GeneratorTag>, i32, TauPoly)>> {
    let g: GoldenFile = serde_json::from_str(GOLDEN_JSON)?;
    g.angular
        .iter()
        .map(|t| {
            let factors = t
                .factors
                .iter()
                .map(|s| GeneratorTag::from_label(s))
                .collect::<Result<Vec<_>>>()?;
            Ok((factors, t.p.unwrap_or(0), poly_from_entries(&t.coef)))
        })
        .collect()
}

/// Exact comparison of the computed b₂″ against the frozen reference.
pub fn check_b2pp_golden() -> Result<()> {
    let engine = b2_doubleprime()?;
    let golden = golden_b2pp()?;
    if engine.0 != golden.0 {
        let diff = engine.add(&golden.neg());
        let detail: Vec<String> = diff
            .0
            .iter()
            .take(5)
            .map(|((f, _, a, b), _)| {
                format!("{} ξ1^{a} ξ2^{b}", f.iter().map(|t| t.label()).collect::<Vec<_>>().join("·"))
            })
            .collect();
        return Err(NcError::GoldenMismatch(format!(
            "b2'' disagrees with the frozen reference in {} words, e.g. {:?}",
            diff.len(),
            detail
        )));
    }
    Ok(())
}
