//! Left-invariant differential operators on polynomials: the basis vector
//! fields Z_j, the sub-Laplacian L = -Σ X_i², the dilation generator A, and
//! the Mehler generator N = L + A.
//!
//! A vector field Z_j acts by (Z_j f)(g) = d/dt|₀ f(g · exp t Z_j); its
//! coefficient polynomials are read off from the symbolic group law. The
//! grading gives a second, independent form of A (homogeneous components of
//! degree n are multiplied by n), kept as a cross-check against the
//! exponential-derivative form.

use std::sync::Arc;

use thiserror::Error;

use crate::group::StratifiedAlgebra;
use crate::poly::{Poly, VarTable};
use crate::scalar::{rat_i64, Gaussian, NumCoeff, Rat};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DiffOpsError {
    #[error("operation requires a polynomial with real coefficients")]
    NonRealInput,
}

/// First-order operator Σ_j c_j(z) ∂_{z_j} with polynomial coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField<C: NumCoeff> {
    vars: Arc<VarTable>,
    coeffs: Vec<Poly<C>>,
}

impl<C: NumCoeff> VectorField<C> {
    pub fn new(vars: Arc<VarTable>, coeffs: Vec<Poly<C>>) -> Self {
        assert_eq!(coeffs.len(), vars.len());
        VectorField { vars, coeffs }
    }

    pub fn coefficients(&self) -> &[Poly<C>] {
        &self.coeffs
    }

    /// Apply to a polynomial. `f` may live over an extension of the field's
    /// variable table (extra formal parameters at the end); the coefficients
    /// are embedded accordingly.
    pub fn apply(&self, f: &Poly<C>) -> Poly<C> {
        let fv = f.vars().clone();
        let mut out = Poly::zero(fv.clone());
        if *fv == *self.vars {
            for (j, c) in self.coeffs.iter().enumerate() {
                if c.is_zero() {
                    continue;
                }
                out = out.add(&c.mul(&f.partial(j)));
            }
            return out;
        }
        // prefix extension case
        assert!(
            fv.len() >= self.vars.len()
                && fv.names[..self.vars.len()] == self.vars.names[..]
                && fv.weights[..self.vars.len()] == self.vars.weights[..],
            "polynomial variables do not extend the field's variables"
        );
        let idmap: Vec<usize> = (0..self.vars.len()).collect();
        for (j, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let ce = c.embed(fv.clone(), &idmap);
            out = out.add(&ce.mul(&f.partial(j)));
        }
        out
    }

    /// Commutator [V, W] as a first-order operator.
    pub fn commutator(&self, other: &Self) -> Self {
        assert!(*self.vars == *other.vars);
        let coeffs = (0..self.vars.len())
            .map(|m| {
                self.apply(&other.coeffs[m])
                    .sub(&other.apply(&self.coeffs[m]))
            })
            .collect();
        VectorField::new(self.vars.clone(), coeffs)
    }

    pub fn scale(&self, c: &C) -> Self {
        VectorField::new(
            self.vars.clone(),
            self.coeffs.iter().map(|p| p.scale(c)).collect(),
        )
    }

    pub fn add(&self, other: &Self) -> Self {
        assert!(*self.vars == *other.vars);
        VectorField::new(
            self.vars.clone(),
            self.coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a.add(b))
                .collect(),
        )
    }
}

/// The left-invariant calculus of one algebra, for a fixed coefficient type.
pub struct DiffOps<C: NumCoeff> {
    alg: Arc<StratifiedAlgebra>,
    fields: Vec<VectorField<C>>,
}

impl<C: NumCoeff> DiffOps<C> {
    pub fn new(alg: &Arc<StratifiedAlgebra>) -> Self {
        let n = alg.dim();
        let vars = alg.coords().clone();
        let product = alg.symbolic_product();
        let fields = (0..n)
            .map(|j| {
                // coefficient on ∂_{z_m} is ∂(z·w)_m/∂w_j at w = 0
                let coeffs: Vec<Poly<C>> = (0..n)
                    .map(|m| {
                        let d = product[m].partial(n + j);
                        restrict_to_first(&d, &vars).map_coeff(C::of_gaussian)
                    })
                    .collect();
                VectorField::new(vars.clone(), coeffs)
            })
            .collect();
        DiffOps {
            alg: alg.clone(),
            fields,
        }
    }

    pub fn algebra(&self) -> &Arc<StratifiedAlgebra> {
        &self.alg
    }

    /// Left-invariant field of basis vector `j`.
    pub fn field(&self, j: usize) -> &VectorField<C> {
        &self.fields[j]
    }

    /// The horizontal fields X_1 .. X_n (first layer).
    pub fn horizontal(&self) -> &[VectorField<C>] {
        &self.fields[..self.alg.first_layer_dim()]
    }

    /// Sub-Laplacian L f = -Σ X_i² f.
    pub fn sublaplacian(&self, f: &Poly<C>) -> Poly<C> {
        let mut out = Poly::zero(f.vars().clone());
        for x in self.horizontal() {
            out = out.sub(&x.apply(&x.apply(f)));
        }
        out
    }

    /// Dilation generator by the grading: each homogeneous component of
    /// degree n is multiplied by n.
    pub fn dilation_generator(&self, f: &Poly<C>) -> Poly<C> {
        let mut out = Poly::zero(f.vars().clone());
        for (n, comp) in f.homogeneous_components() {
            out = out.add(&comp.scale_rat(&rat_i64(i64::from(n))));
        }
        out
    }

    /// Dilation generator as a left-invariant combination: the derivative of
    /// an exponential along s ↦ exp(Σ s^{d_j} z_j Z_j) at s = 1, written as
    /// Σ_j a_j(z) Z_j through the inverse differential of exp.
    pub fn dilation_field(&self) -> VectorField<C> {
        let vars = self.alg.coords().clone();
        let n = self.alg.dim();
        // Z(1) and Z'(1) as vectors of coordinate polynomials
        let z: Vec<Poly<Gaussian>> = (0..n).map(|j| Poly::var(vars.clone(), j)).collect();
        let zp: Vec<Poly<Gaussian>> = (0..n)
            .map(|j| Poly::var(vars.clone(), j).scale_rat(&rat_i64(i64::from(self.alg.degree(j)))))
            .collect();
        // a = Z' + Σ_{l≥1} (-1)^l/(l+1)! (ad Z)^l (Z')
        let mut a = zp.clone();
        let mut ad_pow = zp;
        let mut fact = 1i64;
        for l in 1..self.alg.step() as i64 {
            ad_pow = self.alg.bracket(&z, &ad_pow);
            fact *= l + 1;
            let sign: i64 = if l % 2 == 0 { 1 } else { -1 };
            let coeff = Rat::new(sign.into(), fact.into());
            for (acc, t) in a.iter_mut().zip(&ad_pow) {
                *acc = acc.add(&t.scale_rat(&coeff));
            }
        }
        // compose with the left-invariant fields: coefficients on ∂_{z_m}
        let coeffs: Vec<Poly<C>> = (0..n)
            .map(|m| {
                let mut c = Poly::zero(vars.clone());
                for (j, aj) in a.iter().enumerate() {
                    let ajc = aj.map_coeff(C::of_gaussian);
                    c = c.add(&ajc.mul(&self.fields[j].coefficients()[m]));
                }
                c
            })
            .collect();
        VectorField::new(vars, coeffs)
    }

    /// Mehler generator N f = L f + A f.
    pub fn n_op(&self, f: &Poly<C>) -> Poly<C> {
        self.sublaplacian(f).add(&self.dilation_generator(f))
    }

    /// |∇f|² = Σ (X_i f)² for real f.
    pub fn gradient_squared(&self, f: &Poly<C>) -> Result<Poly<C>, DiffOpsError> {
        if !f.terms().all(|(_, c)| c.is_real()) {
            return Err(DiffOpsError::NonRealInput);
        }
        let mut out = Poly::zero(f.vars().clone());
        for x in self.horizontal() {
            let g = x.apply(f);
            out = out.add(&g.mul(&g));
        }
        Ok(out)
    }
}

/// Keep only terms constant in the second factor of a doubled table and
/// project them onto the single-point table.
fn restrict_to_first(p: &Poly<Gaussian>, vars: &Arc<VarTable>) -> Poly<Gaussian> {
    let n = vars.len();
    let mut out = Poly::zero(vars.clone());
    for (m, c) in p.terms() {
        if m.exps[n..].iter().any(|&e| e > 0) {
            continue;
        }
        out = out.add(&Poly::monomial(
            vars.clone(),
            m.exps[..n].to_vec(),
            c.clone(),
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{monomial_basis, monomial_basis_upto};

    type QP = Poly<Gaussian>;

    fn h1_ops() -> (Arc<StratifiedAlgebra>, DiffOps<Gaussian>) {
        let alg = StratifiedAlgebra::heisenberg(1);
        let ops = DiffOps::new(&alg);
        (alg, ops)
    }

    #[test]
    fn h1_horizontal_fields() {
        let (alg, ops) = h1_ops();
        let vars = alg.coords().clone();
        let x = QP::var(vars.clone(), 0);
        let y = QP::var(vars.clone(), 1);
        // X = ∂_x + 2y ∂_u
        assert_eq!(
            ops.field(0).coefficients(),
            &[
                QP::one(vars.clone()),
                QP::zero(vars.clone()),
                y.scale_rat(&rat_i64(2)),
            ]
        );
        // Y = ∂_y - 2x ∂_u
        assert_eq!(
            ops.field(1).coefficients(),
            &[
                QP::zero(vars.clone()),
                QP::one(vars.clone()),
                x.scale_rat(&rat_i64(-2)),
            ]
        );
        // central U = ∂_u
        assert_eq!(
            ops.field(2).coefficients(),
            &[
                QP::zero(vars.clone()),
                QP::zero(vars.clone()),
                QP::one(vars),
            ]
        );
    }

    #[test]
    fn h1_commutator_matches_bracket() {
        let (_alg, ops) = h1_ops();
        let xy = ops.field(0).commutator(ops.field(1));
        let minus4u = ops.field(2).scale(&Gaussian::from_i64(-4));
        assert_eq!(xy, minus4u);
    }

    #[test]
    fn abelian_fields_are_partials() {
        let alg = StratifiedAlgebra::abelian(3);
        let ops: DiffOps<Gaussian> = DiffOps::new(&alg);
        let vars = alg.coords().clone();
        for j in 0..3 {
            for m in 0..3 {
                let expect = if j == m {
                    QP::one(vars.clone())
                } else {
                    QP::zero(vars.clone())
                };
                assert_eq!(ops.field(j).coefficients()[m], expect);
            }
        }
    }

    #[test]
    fn sublaplacian_values() {
        let (alg, ops) = h1_ops();
        let vars = alg.coords().clone();
        let x = QP::var(vars.clone(), 0);
        let u = QP::var(vars.clone(), 2);
        // L(x²) = -2
        assert_eq!(
            ops.sublaplacian(&x.pow(2)),
            QP::constant(vars.clone(), Gaussian::from_i64(-2))
        );
        // L(u) = 0
        assert!(ops.sublaplacian(&u).is_zero());
        // L(constant) = 0
        assert!(ops
            .sublaplacian(&QP::constant(vars, Gaussian::from_i64(7)))
            .is_zero());
    }

    #[test]
    fn dilation_generator_grading() {
        let (alg, ops) = h1_ops();
        let vars = alg.coords().clone();
        let x = QP::var(vars.clone(), 0);
        let u = QP::var(vars.clone(), 2);
        // A(x²u) = 4 x²u  (homogeneous degree 4)
        let f = x.pow(2).mul(&u);
        assert_eq!(ops.dilation_generator(&f), f.scale_rat(&rat_i64(4)));
        // A(1) = 0
        assert!(ops.dilation_generator(&QP::one(vars)).is_zero());
    }

    #[test]
    fn dilation_field_h1_closed_form() {
        let (alg, ops) = h1_ops();
        let vars = alg.coords().clone();
        let a = ops.dilation_field();
        // A = x ∂_x + y ∂_y + 2u ∂_u on the first Heisenberg group
        assert_eq!(
            a.coefficients(),
            &[
                QP::var(vars.clone(), 0),
                QP::var(vars.clone(), 1),
                QP::var(vars, 2).scale_rat(&rat_i64(2)),
            ]
        );
    }

    #[test]
    fn dilation_methods_agree_and_commutator_identity() {
        for alg in [
            StratifiedAlgebra::heisenberg(1),
            StratifiedAlgebra::engel(),
            StratifiedAlgebra::free_step2(3),
        ] {
            let ops: DiffOps<Gaussian> = DiffOps::new(&alg);
            let afield = ops.dilation_field();
            for f in monomial_basis_upto::<Gaussian>(alg.coords(), 5) {
                // two forms of A agree exactly
                assert_eq!(ops.dilation_generator(&f), afield.apply(&f));
                // [L, A] f = L(Af) - A(Lf) = 2 Lf
                let la = ops.sublaplacian(&ops.dilation_generator(&f));
                let al = ops.dilation_generator(&ops.sublaplacian(&f));
                let rhs = ops.sublaplacian(&f).scale_rat(&rat_i64(2));
                assert_eq!(la.sub(&al), rhs, "[L,A] = 2L fails on {f}");
            }
        }
    }

    #[test]
    fn n_op_values() {
        let (alg, ops) = h1_ops();
        let vars = alg.coords().clone();
        let x = QP::var(vars.clone(), 0);
        let one = QP::one(vars);
        // N x = x
        assert_eq!(ops.n_op(&x), x);
        // N(x² - 1) = 2(x² - 1)
        let f = x.pow(2).sub(&one);
        assert_eq!(ops.n_op(&f), f.scale_rat(&rat_i64(2)));
        // N 1 = 0
        assert!(ops.n_op(&one).is_zero());
    }

    #[test]
    fn gradient_squared_values() {
        let (alg, ops) = h1_ops();
        let vars = alg.coords().clone();
        let x = QP::var(vars.clone(), 0);
        let y = QP::var(vars.clone(), 1);
        let u = QP::var(vars.clone(), 2);
        assert_eq!(ops.gradient_squared(&x).unwrap(), QP::one(vars.clone()));
        // |∇u|² = 4(x² + y²)
        assert_eq!(
            ops.gradient_squared(&u).unwrap(),
            x.pow(2).add(&y.pow(2)).scale_rat(&rat_i64(4))
        );
        assert!(ops
            .gradient_squared(&QP::constant(vars, Gaussian::from_i64(3)))
            .unwrap()
            .is_zero());
        // complex input rejected
        let ix = x.scale(&Gaussian::i());
        assert_eq!(
            ops.gradient_squared(&ix).unwrap_err(),
            DiffOpsError::NonRealInput
        );
    }

    #[test]
    fn sublaplacian_lowers_degree_by_two() {
        let alg = StratifiedAlgebra::free_step2(3);
        let ops: DiffOps<Gaussian> = DiffOps::new(&alg);
        for n in 0..=5u32 {
            for f in monomial_basis::<Gaussian>(alg.coords(), n) {
                let lf = ops.sublaplacian(&f);
                if n < 2 {
                    assert!(lf.is_zero());
                } else {
                    for (deg, _) in lf.homogeneous_components() {
                        assert_eq!(deg, n - 2);
                    }
                }
            }
        }
    }

    #[test]
    fn scaling_identity_with_formal_parameter() {
        // L(f ∘ δ_t) = t² (Lf) ∘ δ_t with t formal
        let (alg, ops) = h1_ops();
        let vars = alg.coords().clone();
        let x = QP::var(vars.clone(), 0);
        let u = QP::var(vars, 2);
        let f = x.pow(2).mul(&u).add(&u.pow(2)).add(&x.pow(4));
        let lhs = ops.sublaplacian(&f.dilate_formal("t"));
        let ext = lhs.vars().clone();
        let t = QP::var(ext.clone(), ext.len() - 1);
        let rhs = ops.sublaplacian(&f).dilate_formal("t").mul(&t.pow(2));
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn fields_are_derivations() {
        let (alg, ops) = h1_ops();
        let vars = alg.coords().clone();
        let x = QP::var(vars.clone(), 0);
        let y = QP::var(vars.clone(), 1);
        let u = QP::var(vars, 2);
        let f = x.pow(2).add(&u.scale(&Gaussian::i()));
        let g = y.mul(&u).sub(&x.pow(3));
        for j in 0..3 {
            let v = ops.field(j);
            let lhs = v.apply(&f.mul(&g));
            let rhs = v.apply(&f).mul(&g).add(&f.mul(&v.apply(&g)));
            assert_eq!(lhs, rhs);
        }
    }
}
