//! Sparse multivariate polynomials over exact (or float) coefficients, graded
//! by the homogeneous degree induced by the layer weights of the coordinates.
//!
//! Terms are kept in a canonical graded-lex order (weighted degree first, then
//! exponent vector), with no zero coefficients stored, so structural equality
//! is mathematical equality.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::{parse_rational, rational_string, Coeff, Gaussian, NumCoeff, Rat};

/// Ordered variable set. `weights[j]` is the homogeneous degree of variable
/// `j` (its layer index for group coordinates, 0 for formal parameters).
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct VarTable {
    pub names: Vec<String>,
    pub weights: Vec<u32>,
}

impl VarTable {
    pub fn new(names: Vec<String>, weights: Vec<u32>) -> Arc<Self> {
        assert_eq!(names.len(), weights.len());
        Arc::new(VarTable { names, weights })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    /// Two side-by-side copies of this table (for functions of a point pair);
    /// first-copy names get suffix `1`, second-copy names suffix `2`.
    pub fn doubled(self: &Arc<Self>) -> Arc<Self> {
        let mut names = Vec::with_capacity(2 * self.len());
        let mut weights = Vec::with_capacity(2 * self.len());
        for suffix in ["1", "2"] {
            for (n, w) in self.names.iter().zip(&self.weights) {
                names.push(format!("{n}{suffix}"));
                weights.push(*w);
            }
        }
        VarTable::new(names, weights)
    }

    /// This table extended with one extra formal variable of weight 0.
    pub fn extended(self: &Arc<Self>, name: &str) -> Arc<Self> {
        let mut names = self.names.clone();
        let mut weights = self.weights.clone();
        names.push(name.to_string());
        weights.push(0);
        VarTable::new(names, weights)
    }

    pub fn weighted_degree(&self, exps: &[u16]) -> u32 {
        exps.iter()
            .zip(&self.weights)
            .map(|(e, w)| u32::from(*e) * *w)
            .sum()
    }
}

/// A monomial: exponent vector plus its cached weighted degree.
/// The derived `Ord` is the canonical term order (degree, then lex).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub struct Mono {
    pub wdeg: u32,
    pub exps: Vec<u16>,
}

impl Mono {
    pub fn new(vars: &VarTable, exps: Vec<u16>) -> Self {
        let wdeg = vars.weighted_degree(&exps);
        Mono { wdeg, exps }
    }

    pub fn unit(vars: &VarTable) -> Self {
        Mono {
            wdeg: 0,
            exps: vec![0; vars.len()],
        }
    }

    pub fn is_constant(&self) -> bool {
        self.exps.iter().all(|&e| e == 0)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PolyError {
    #[error("polynomial refers to algebra `{got}` but `{expected}` was required")]
    AlgebraMismatch { expected: String, got: String },
    #[error("exponent vector has length {got}, expected {expected}")]
    ExponentLength { expected: usize, got: usize },
    #[error("exponent {0} out of range")]
    ExponentRange(u64),
    #[error("bad coefficient: {0}")]
    BadCoefficient(#[from] crate::scalar::ScalarError),
    #[error("malformed polynomial payload: {0}")]
    Malformed(String),
}

/// Sparse polynomial with coefficients in `C` over a fixed variable table.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Poly<C: NumCoeff> {
    vars: Arc<VarTable>,
    terms: BTreeMap<Mono, C>,
}

impl<C: NumCoeff> Poly<C> {
    pub fn zero(vars: Arc<VarTable>) -> Self {
        Poly {
            vars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(vars: Arc<VarTable>, c: C) -> Self {
        let mut p = Poly::zero(vars);
        if !c.ris_zero() {
            let unit = Mono::unit(&p.vars);
            p.terms.insert(unit, c);
        }
        p
    }

    pub fn one(vars: Arc<VarTable>) -> Self {
        Poly::constant(vars, C::num_one())
    }

    pub fn var(vars: Arc<VarTable>, j: usize) -> Self {
        assert!(j < vars.len(), "variable index out of range");
        let mut exps = vec![0u16; vars.len()];
        exps[j] = 1;
        let m = Mono::new(&vars, exps);
        let mut p = Poly::zero(vars);
        p.terms.insert(m, C::num_one());
        p
    }

    pub fn monomial(vars: Arc<VarTable>, exps: Vec<u16>, c: C) -> Self {
        assert_eq!(exps.len(), vars.len());
        let mut p = Poly::zero(vars);
        if !c.ris_zero() {
            let m = Mono::new(&p.vars, exps);
            p.terms.insert(m, c);
        }
        p
    }

    pub fn vars(&self) -> &Arc<VarTable> {
        &self.vars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Mono, &C)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.keys().all(Mono::is_constant)
    }

    /// Coefficient of the constant term (the value at the identity / origin).
    pub fn constant_term(&self) -> C {
        let unit = Mono::unit(&self.vars);
        self.terms.get(&unit).cloned().unwrap_or_else(C::num_zero)
    }

    pub fn coefficient(&self, exps: &[u16]) -> C {
        let m = Mono::new(&self.vars, exps.to_vec());
        self.terms.get(&m).cloned().unwrap_or_else(C::num_zero)
    }

    fn same_vars(&self, o: &Self) {
        assert!(
            Arc::ptr_eq(&self.vars, &o.vars) || self.vars == o.vars,
            "polynomial variable tables differ"
        );
    }

    fn insert_add(&mut self, m: Mono, c: C) {
        if c.ris_zero() {
            return;
        }
        match self.terms.get_mut(&m) {
            Some(existing) => {
                let sum = existing.radd(&c);
                if sum.ris_zero() {
                    self.terms.remove(&m);
                } else {
                    *existing = sum;
                }
            }
            None => {
                self.terms.insert(m, c);
            }
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        self.same_vars(o);
        let mut out = self.clone();
        for (m, c) in &o.terms {
            out.insert_add(m.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.same_vars(o);
        let mut out = self.clone();
        for (m, c) in &o.terms {
            out.insert_add(m.clone(), c.rneg());
        }
        out
    }

    pub fn neg(&self) -> Self {
        let mut out = Poly::zero(self.vars.clone());
        for (m, c) in &self.terms {
            out.terms.insert(m.clone(), c.rneg());
        }
        out
    }

    pub fn mul(&self, o: &Self) -> Self {
        self.same_vars(o);
        let mut out = Poly::zero(self.vars.clone());
        for (ma, ca) in &self.terms {
            for (mb, cb) in &o.terms {
                let exps: Vec<u16> = ma
                    .exps
                    .iter()
                    .zip(&mb.exps)
                    .map(|(a, b)| a.checked_add(*b).expect("exponent overflow"))
                    .collect();
                let m = Mono {
                    wdeg: ma.wdeg + mb.wdeg,
                    exps,
                };
                out.insert_add(m, ca.rmul(cb));
            }
        }
        out
    }

    pub fn scale(&self, c: &C) -> Self {
        let mut out = Poly::zero(self.vars.clone());
        if c.ris_zero() {
            return out;
        }
        for (m, a) in &self.terms {
            let prod = a.rmul(c);
            if !prod.ris_zero() {
                out.terms.insert(m.clone(), prod);
            }
        }
        out
    }

    pub fn scale_rat(&self, r: &Rat) -> Self {
        self.scale(&C::of_rat(r))
    }

    pub fn pow(&self, n: u32) -> Self {
        let mut acc = Poly::one(self.vars.clone());
        for _ in 0..n {
            acc = acc.mul(self);
        }
        acc
    }

    /// Coefficient-wise complex conjugation (coordinates are real).
    pub fn conjugate(&self) -> Self {
        let mut out = Poly::zero(self.vars.clone());
        for (m, c) in &self.terms {
            out.terms.insert(m.clone(), c.conjugate());
        }
        out
    }

    pub fn map_coeff<D: NumCoeff>(&self, f: impl Fn(&C) -> D) -> Poly<D> {
        let mut out = Poly::zero(self.vars.clone());
        for (m, c) in &self.terms {
            let d = f(c);
            if !d.ris_zero() {
                out.terms.insert(m.clone(), d);
            }
        }
        out
    }

    /// Partial derivative with respect to variable `j`.
    pub fn partial(&self, j: usize) -> Self {
        let mut out = Poly::zero(self.vars.clone());
        let w = self.vars.weights[j];
        for (m, c) in &self.terms {
            let e = m.exps[j];
            if e == 0 {
                continue;
            }
            let mut exps = m.exps.clone();
            exps[j] = e - 1;
            let nm = Mono {
                wdeg: m.wdeg - w,
                exps,
            };
            out.insert_add(nm, c.scale_rat(&Rat::from_integer(e.into())));
        }
        out
    }

    /// Total weighted degree (None for the zero polynomial).
    pub fn wdeg(&self) -> Option<u32> {
        self.terms.keys().map(|m| m.wdeg).max()
    }

    /// Split into homogeneous components keyed by weighted degree.
    pub fn homogeneous_components(&self) -> BTreeMap<u32, Self> {
        let mut out: BTreeMap<u32, Self> = BTreeMap::new();
        for (m, c) in &self.terms {
            out.entry(m.wdeg)
                .or_insert_with(|| Poly::zero(self.vars.clone()))
                .terms
                .insert(m.clone(), c.clone());
        }
        out
    }

    pub fn is_homogeneous(&self) -> bool {
        self.homogeneous_components().len() <= 1
    }

    /// Dilation z_j -> t^{w_j} z_j for a numeric factor: scales each term by
    /// t^(weighted degree).
    pub fn dilate_by(&self, t: &C) -> Self {
        let max = self.wdeg().unwrap_or(0);
        let mut powers = Vec::with_capacity(max as usize + 1);
        powers.push(C::num_one());
        for i in 1..=max {
            let prev = powers[(i - 1) as usize].clone();
            powers.push(prev.rmul(t));
        }
        let mut out = Poly::zero(self.vars.clone());
        for (m, c) in &self.terms {
            let scaled = c.rmul(&powers[m.wdeg as usize]);
            if !scaled.ris_zero() {
                out.terms.insert(m.clone(), scaled);
            }
        }
        out
    }

    /// Dilation with a formal parameter: returns the same polynomial over
    /// `vars ⧺ {t}` with each term multiplied by t^(weighted degree).
    pub fn dilate_formal(&self, t_name: &str) -> Self {
        let target = self.vars.extended(t_name);
        let t_idx = target.len() - 1;
        let mut out = Poly::zero(target.clone());
        for (m, c) in &self.terms {
            let mut exps = m.exps.clone();
            let tp = u16::try_from(m.wdeg).expect("degree too large for formal dilation");
            exps.push(tp);
            out.terms.insert(Mono::new(&target, exps), c.clone());
        }
        let _ = t_idx;
        out
    }

    /// Re-embed into `target`, sending variable `j` to `target` variable
    /// `var_map[j]`.
    pub fn embed(&self, target: Arc<VarTable>, var_map: &[usize]) -> Self {
        assert_eq!(var_map.len(), self.vars.len());
        let mut out = Poly::zero(target.clone());
        for (m, c) in &self.terms {
            let mut exps = vec![0u16; target.len()];
            for (j, e) in m.exps.iter().enumerate() {
                exps[var_map[j]] += e;
            }
            out.insert_add(Mono::new(&target, exps), c.clone());
        }
        out
    }

    /// Composition: substitute `images[j]` (a polynomial over `target`) for
    /// variable `j`.
    pub fn substitute(&self, target: Arc<VarTable>, images: &[Self]) -> Self {
        assert_eq!(images.len(), self.vars.len(), "assignment incomplete");
        for im in images {
            assert!(im.vars == target, "image over wrong variable table");
        }
        let mut cache: HashMap<(usize, u16), Poly<C>> = HashMap::new();
        let mut out = Poly::zero(target.clone());
        for (m, c) in &self.terms {
            let mut acc = Poly::constant(target.clone(), c.clone());
            for (j, &e) in m.exps.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                let p = cache
                    .entry((j, e))
                    .or_insert_with(|| images[j].pow(u32::from(e)))
                    .clone();
                acc = acc.mul(&p);
            }
            out = out.add(&acc);
        }
        out
    }

    /// Evaluate at a point (all variables assigned).
    pub fn eval(&self, point: &[C]) -> C {
        assert_eq!(point.len(), self.vars.len());
        let mut acc = C::num_zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (j, &e) in m.exps.iter().enumerate() {
                for _ in 0..e {
                    t = t.rmul(&point[j]);
                }
            }
            acc = acc.radd(&t);
        }
        acc
    }

    /// Max-norm of the coefficients as complex numbers.
    pub fn coeff_sup_norm(&self) -> f64 {
        self.terms
            .values()
            .map(|c| c.as_complex().norm())
            .fold(0.0, f64::max)
    }

    /// Leading monomial in the canonical order, if nonzero.
    pub fn leading(&self) -> Option<(&Mono, &C)> {
        self.terms.iter().next_back()
    }
}

impl Poly<Gaussian> {
    pub fn is_real(&self) -> bool {
        self.terms.values().all(|c| c.is_real())
    }

    pub fn to_float(&self) -> Poly<num_complex::Complex64> {
        self.map_coeff(|c| c.to_complex())
    }
}

/// All monomials of weighted degree exactly `n`, in descending lex order
/// (so e.g. on the first Heisenberg group and n = 2: x², xy, y², u).
pub fn monomial_basis<C: NumCoeff>(vars: &Arc<VarTable>, n: u32) -> Vec<Poly<C>> {
    let mut exps = vec![0u16; vars.len()];
    let mut monos: Vec<Mono> = Vec::new();
    enumerate_monomials(vars, 0, n, &mut exps, &mut monos);
    monos.sort();
    monos.reverse();
    monos
        .into_iter()
        .map(|m| {
            let mut p = Poly::zero(vars.clone());
            p.terms.insert(m, C::num_one());
            p
        })
        .collect()
}

/// All monomials of weighted degree at most `n` (degree 0 included), each
/// degree block in descending lex order.
pub fn monomial_basis_upto<C: NumCoeff>(vars: &Arc<VarTable>, n: u32) -> Vec<Poly<C>> {
    (0..=n).flat_map(|d| monomial_basis(vars, d)).collect()
}

fn enumerate_monomials(
    vars: &Arc<VarTable>,
    j: usize,
    remaining: u32,
    exps: &mut Vec<u16>,
    out: &mut Vec<Mono>,
) {
    if j == vars.len() {
        if remaining == 0 {
            out.push(Mono::new(vars, exps.clone()));
        }
        return;
    }
    let w = vars.weights[j];
    if w == 0 {
        // weight-0 variables do not enter graded enumeration
        enumerate_monomials(vars, j + 1, remaining, exps, out);
        return;
    }
    let max = remaining / w;
    for e in 0..=max {
        exps[j] = e as u16;
        enumerate_monomials(vars, j + 1, remaining - e * w, exps, out);
    }
    exps[j] = 0;
}

// ---------------------------------------------------------------------------
// Wire format
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct TermWire {
    exp: Vec<u64>,
    re: String,
    im: String,
}

#[derive(Serialize, Deserialize)]
struct PolyWire {
    alg: String,
    terms: Vec<TermWire>,
}

impl Poly<Gaussian> {
    /// Serialize in canonical order (leading term first).
    pub fn to_json(&self, alg_name: &str) -> serde_json::Value {
        let terms: Vec<TermWire> = self
            .terms
            .iter()
            .rev()
            .map(|(m, c)| TermWire {
                exp: m.exps.iter().map(|&e| u64::from(e)).collect(),
                re: rational_string(&c.re),
                im: rational_string(&c.im),
            })
            .collect();
        serde_json::to_value(PolyWire {
            alg: alg_name.to_string(),
            terms,
        })
        .expect("polynomial serialization cannot fail")
    }

    pub fn from_json_value(
        v: &serde_json::Value,
        expected_alg: &str,
        vars: &Arc<VarTable>,
    ) -> Result<Self, PolyError> {
        let wire: PolyWire =
            serde_json::from_value(v.clone()).map_err(|e| PolyError::Malformed(e.to_string()))?;
        if wire.alg != expected_alg {
            return Err(PolyError::AlgebraMismatch {
                expected: expected_alg.to_string(),
                got: wire.alg,
            });
        }
        let mut p = Poly::zero(vars.clone());
        for t in wire.terms {
            if t.exp.len() != vars.len() {
                return Err(PolyError::ExponentLength {
                    expected: vars.len(),
                    got: t.exp.len(),
                });
            }
            let mut exps = Vec::with_capacity(t.exp.len());
            for &e in &t.exp {
                let e16 = e.to_u16().ok_or(PolyError::ExponentRange(e))?;
                exps.push(e16);
            }
            let c = Gaussian::new(parse_rational(&t.re)?, parse_rational(&t.im)?);
            p.insert_add(Mono::new(vars, exps), c);
        }
        Ok(p)
    }

    pub fn from_json_str(
        s: &str,
        expected_alg: &str,
        vars: &Arc<VarTable>,
    ) -> Result<Self, PolyError> {
        let v: serde_json::Value =
            serde_json::from_str(s).map_err(|e| PolyError::Malformed(e.to_string()))?;
        Self::from_json_value(&v, expected_alg, vars)
    }
}

impl<C: NumCoeff> fmt::Display for Poly<C>
where
    C: fmt::Display,
{
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, c) in self.terms.iter().rev() {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            let mono: Vec<String> = m
                .exps
                .iter()
                .enumerate()
                .filter(|(_, &e)| e > 0)
                .map(|(j, &e)| {
                    if e == 1 {
                        self.vars.names[j].clone()
                    } else {
                        format!("{}^{}", self.vars.names[j], e)
                    }
                })
                .collect();
            if mono.is_empty() {
                write!(f, "{c}")?;
            } else {
                write!(f, "{}*{}", c, mono.join("*"))?;
            }
        }
        Ok(())
    }
}

// Polynomials themselves form a coefficient ring (used when evaluating the
// group law over symbolic coordinates).
impl<C: NumCoeff> Coeff for Poly<C> {
    fn zero_like(&self) -> Self {
        Poly::zero(self.vars.clone())
    }
    fn ris_zero(&self) -> bool {
        Poly::is_zero(self)
    }
    fn radd(&self, o: &Self) -> Self {
        Poly::add(self, o)
    }
    fn rsub(&self, o: &Self) -> Self {
        Poly::sub(self, o)
    }
    fn rmul(&self, o: &Self) -> Self {
        Poly::mul(self, o)
    }
    fn rneg(&self) -> Self {
        Poly::neg(self)
    }
    fn scale_rat(&self, r: &Rat) -> Self {
        Poly::scale_rat(self, r)
    }
}
