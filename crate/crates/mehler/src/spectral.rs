//! The exact spectral layer: heat operators on polynomials, the eigenspaces
//! E_n = e^{L/2}(P_n) of the Mehler generator, the Mehler operator
//! δ_c ∘ e^{-s²L/2}, and heat-kernel moments through the identity
//! ∫ f p dg = (e^{-L/2} f)(identity).
//!
//! Everything here is rational arithmetic; a check that "holds exactly" means
//! structural equality of canonical polynomials, not closeness of floats.
//! Floats appear only in the Rayleigh-quotient computation, which works from
//! exactly assembled matrices.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::diffops::DiffOps;
use crate::group::StratifiedAlgebra;
use crate::poly::{monomial_basis, monomial_basis_upto, Poly};
use crate::scalar::{rat_i64, rat_to_f64, Gaussian, Rat};

pub type QPoly = Poly<Gaussian>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("({c}, {s}) is not an exact point on the unit circle")]
    NotOnCircle { c: Rat, s: Rat },
    #[error("eigenvector check failed in degree {degree} at basis index {index}")]
    EigenCheckFailed { degree: u32, index: usize },
    #[error("identity `{identity}` violated: lhs = {lhs}, rhs = {rhs}")]
    IdentityViolated {
        identity: String,
        lhs: String,
        rhs: String,
    },
    #[error("Gram matrix is degenerate (no non-constant directions)")]
    DegenerateGram,
    #[error("operation requires a polynomial with real coefficients")]
    NonRealInput,
}

/// Direction of the heat flow: `Forward` is e^{-τL/2} (smoothing; evaluates
/// moments), `Backward` is e^{+τL/2} (its inverse on polynomials).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HeatSign {
    Forward,
    Backward,
}

/// Parameterization of the Mehler operator on polynomials.
///
/// `Contraction(ρ)` is δ_ρ ∘ e^{-(1-ρ²)L/2}, i.e. T_t with ρ = e^{-t};
/// `Circle(c, s)` is the angle form cos^Nθ with (c, s) = (cos θ, sin θ) an
/// exact rational circle pair.
#[derive(Clone, Debug, PartialEq)]
pub enum MehlerMode {
    Contraction(Rat),
    Circle { c: Rat, s: Rat },
}

/// Polynomial eigenbasis of the Mehler generator in one degree:
/// the images of the degree-n monomials under e^{L/2}.
#[derive(Clone, Debug)]
pub struct EigenBasis {
    pub degree: u32,
    pub members: Vec<QPoly>,
}

/// Exact two-sided comparison of one identity instance.
#[derive(Clone, Debug)]
pub struct IdentityCheck {
    pub identity: String,
    pub input: String,
    pub lhs: String,
    pub rhs: String,
    pub equal: bool,
}

impl IdentityCheck {
    fn of_polys(identity: &str, input: &str, lhs: &QPoly, rhs: &QPoly) -> Self {
        IdentityCheck {
            identity: identity.to_string(),
            input: input.to_string(),
            lhs: lhs.to_string(),
            rhs: rhs.to_string(),
            equal: lhs == rhs,
        }
    }

    fn of_scalars(identity: &str, input: &str, lhs: &Gaussian, rhs: &Gaussian) -> Self {
        IdentityCheck {
            identity: identity.to_string(),
            input: input.to_string(),
            lhs: lhs.to_string(),
            rhs: rhs.to_string(),
            equal: lhs == rhs,
        }
    }
}

/// A witness that the Mehler generator is not symmetric for the heat-kernel
/// pairing: real monomials f, h with ⟨Nf, h⟩ ≠ ⟨f, Nh⟩.
#[derive(Clone, Debug)]
pub struct AsymmetryWitness {
    pub f: QPoly,
    pub h: QPoly,
    pub nf_h: Gaussian,
    pub f_nh: Gaussian,
}

/// Minimum Rayleigh quotient of the Dirichlet form over a centered
/// polynomial subspace: an upper bound on the best constant in the Poincaré
/// inequality restricted to polynomials.
#[derive(Clone, Debug)]
pub struct PoincareReport {
    pub degree_cap: u32,
    pub dim: usize,
    pub min_rayleigh: f64,
}

/// Exact spectral operations of one group.
pub struct Spectral {
    alg: Arc<StratifiedAlgebra>,
    ops: DiffOps<Gaussian>,
}

impl Spectral {
    pub fn new(alg: &Arc<StratifiedAlgebra>) -> Self {
        Spectral {
            alg: alg.clone(),
            ops: DiffOps::new(alg),
        }
    }

    pub fn algebra(&self) -> &Arc<StratifiedAlgebra> {
        &self.alg
    }

    pub fn ops(&self) -> &DiffOps<Gaussian> {
        &self.ops
    }

    /// e^{∓τL/2} f as a finite sum (L lowers the degree by 2).
    pub fn heat(&self, f: &QPoly, tau: &Rat, sign: HeatSign) -> QPoly {
        let c = match sign {
            HeatSign::Forward => -tau / rat_i64(2),
            HeatSign::Backward => tau / rat_i64(2),
        };
        let mut sum = f.clone();
        let mut term = f.clone();
        let mut k = 1i64;
        loop {
            term = self.ops.sublaplacian(&term);
            if term.is_zero() {
                break;
            }
            term = term.scale_rat(&(c.clone() / rat_i64(k)));
            sum = sum.add(&term);
            k += 1;
        }
        sum
    }

    /// e^{∓τL/2} f with τ a formal parameter appended to the variable table.
    pub fn heat_formal(&self, f: &QPoly, sign: HeatSign, tau_name: &str) -> QPoly {
        let ext = f.vars().extended(tau_name);
        let tj = ext.len() - 1;
        let idmap: Vec<usize> = (0..f.vars().len()).collect();
        let tau = QPoly::var(ext.clone(), tj);
        let half = match sign {
            HeatSign::Forward => crate::scalar::rat_frac(-1, 2),
            HeatSign::Backward => crate::scalar::rat_frac(1, 2),
        };
        let mut sum = f.embed(ext.clone(), &idmap);
        let mut lk = f.clone();
        let mut factor = QPoly::one(ext.clone());
        let mut k = 1i64;
        loop {
            lk = self.ops.sublaplacian(&lk);
            if lk.is_zero() {
                break;
            }
            factor = factor.mul(&tau).scale_rat(&(half.clone() / rat_i64(k)));
            sum = sum.add(&lk.embed(ext.clone(), &idmap).mul(&factor));
            k += 1;
        }
        sum
    }

    /// Generalized Hermite eigenbasis in degree n: e^{L/2} applied to the
    /// monomials, each member verified to satisfy N h = n h exactly.
    pub fn hermite_basis(&self, n: u32) -> Result<EigenBasis, SpectralError> {
        let monos = monomial_basis::<Gaussian>(self.alg.coords(), n);
        let one = Rat::one();
        let mut members = Vec::with_capacity(monos.len());
        for (index, m) in monos.iter().enumerate() {
            let h = self.heat(m, &one, HeatSign::Backward);
            let nh = self.ops.n_op(&h);
            if nh != h.scale_rat(&rat_i64(i64::from(n))) {
                return Err(SpectralError::EigenCheckFailed { degree: n, index });
            }
            // the degree-n part must be the monomial itself
            debug_assert_eq!(
                h.homogeneous_components().remove(&n),
                Some(m.clone()),
                "heat flow must preserve the leading part"
            );
            members.push(h);
        }
        Ok(EigenBasis { degree: n, members })
    }

    /// The Mehler operator on a polynomial, exactly.
    pub fn mehler(&self, f: &QPoly, mode: &MehlerMode) -> Result<QPoly, SpectralError> {
        let (rho, sin_sq) = match mode {
            MehlerMode::Contraction(rho) => (rho.clone(), Rat::one() - rho * rho),
            MehlerMode::Circle { c, s } => {
                if c * c + s * s != Rat::one() {
                    return Err(SpectralError::NotOnCircle {
                        c: c.clone(),
                        s: s.clone(),
                    });
                }
                (c.clone(), s * s)
            }
        };
        let heated = self.heat(f, &sin_sq, HeatSign::Forward);
        Ok(heated.dilate_by(&Gaussian::from_rat(rho)))
    }

    /// Exact heat-kernel moment ∫ f p dg = (e^{-L/2} f)(identity).
    pub fn moment(&self, f: &QPoly) -> Gaussian {
        self.heat(f, &Rat::one(), HeatSign::Forward).constant_term()
    }

    /// Moment of a function of an independent pair: factorizes monomial by
    /// monomial over the doubled variable table.
    pub fn moment_pair(&self, f: &QPoly) -> Gaussian {
        let n = self.alg.dim();
        assert_eq!(f.vars().len(), 2 * n, "expected a doubled variable table");
        let vars = self.alg.coords().clone();
        let mut cache: HashMap<Vec<u16>, Gaussian> = HashMap::new();
        let mut acc = Gaussian::zero();
        for (m, c) in f.terms() {
            let first = m.exps[..n].to_vec();
            let second = m.exps[n..].to_vec();
            let m1 = cache
                .entry(first.clone())
                .or_insert_with(|| {
                    self.moment(&QPoly::monomial(vars.clone(), first.clone(), Gaussian::one()))
                })
                .clone();
            if m1.is_zero() {
                continue;
            }
            let m2 = cache
                .entry(second.clone())
                .or_insert_with(|| {
                    self.moment(&QPoly::monomial(
                        vars.clone(),
                        second.clone(),
                        Gaussian::one(),
                    ))
                })
                .clone();
            acc = acc.add(&c.mul(&m1).mul(&m2));
        }
        acc
    }

    /// Both sides of the distributional rotation identity: averaging
    /// P(δ_c γ · δ_s g) over an independent heat-kernel pair (γ, g) equals
    /// the plain moment of P, whenever c² + s² = 1.
    pub fn check_rotation_identity(
        &self,
        p: &QPoly,
        c: &Rat,
        s: &Rat,
    ) -> Result<IdentityCheck, SpectralError> {
        if c * c + s * s != Rat::one() {
            return Err(SpectralError::NotOnCircle {
                c: c.clone(),
                s: s.clone(),
            });
        }
        let n = self.alg.dim();
        let dv = self.alg.doubled_coords();
        // images of the coordinates: product components with the first factor
        // dilated by c and the second by s
        let images: Vec<QPoly> = self
            .alg
            .symbolic_product()
            .iter()
            .map(|comp| dilate_pair(comp, n, c, s))
            .collect();
        let composed = p.substitute(dv, &images);
        let lhs = self.moment_pair(&composed);
        let rhs = self.moment(p);
        Ok(IdentityCheck::of_scalars(
            "E[P(dil_c(g1)·dil_s(g2))] = E[P]",
            &p.to_string(),
            &lhs,
            &rhs,
        ))
    }

    /// The invariance and energy identities for a real polynomial:
    /// ∫(Nf) p = 0 and ∫(Nf)·f p = ∫|∇f|² p.
    pub fn check_energy_identities(
        &self,
        f: &QPoly,
    ) -> Result<Vec<IdentityCheck>, SpectralError> {
        if !f.is_real() {
            return Err(SpectralError::NonRealInput);
        }
        let nf = self.ops.n_op(f);
        let inv = IdentityCheck::of_scalars(
            "E[Nf] = 0",
            &f.to_string(),
            &self.moment(&nf),
            &Gaussian::zero(),
        );
        let grad = self
            .ops
            .gradient_squared(f)
            .map_err(|_| SpectralError::NonRealInput)?;
        let energy = IdentityCheck::of_scalars(
            "E[(Nf)·f] = E[|grad f|^2]",
            &f.to_string(),
            &self.moment(&nf.mul(f)),
            &self.moment(&grad),
        );
        for chk in [&inv, &energy] {
            if !chk.equal {
                return Err(SpectralError::IdentityViolated {
                    identity: chk.identity.clone(),
                    lhs: chk.lhs.clone(),
                    rhs: chk.rhs.clone(),
                });
            }
        }
        Ok(vec![inv, energy])
    }

    /// The two operator intertwining identities, applied to one polynomial:
    /// e^{-L/2} ∘ C_θ = δ_c ∘ e^{-L/2}, and
    /// e^{-t²L/2} = δ_{1/t} ∘ e^{-L/2} ∘ δ_t for rational t ≠ 0.
    pub fn check_intertwining(
        &self,
        p: &QPoly,
        c: &Rat,
        s: &Rat,
        t: &Rat,
    ) -> Result<Vec<IdentityCheck>, SpectralError> {
        let one = Rat::one();
        let mode = MehlerMode::Circle {
            c: c.clone(),
            s: s.clone(),
        };
        let lhs1 = self.heat(&self.mehler(p, &mode)?, &one, HeatSign::Forward);
        let rhs1 = self
            .heat(p, &one, HeatSign::Forward)
            .dilate_by(&Gaussian::from_rat(c.clone()));
        let first = IdentityCheck::of_polys(
            "heat_fwd ∘ mehler = dil_c ∘ heat_fwd",
            &p.to_string(),
            &lhs1,
            &rhs1,
        );

        assert!(!t.is_zero(), "scaling identity needs t != 0");
        let lhs2 = self.heat(p, &(t * t), HeatSign::Forward);
        let rhs2 = self
            .heat(
                &p.dilate_by(&Gaussian::from_rat(t.clone())),
                &one,
                HeatSign::Forward,
            )
            .dilate_by(&Gaussian::from_rat(one.clone() / t));
        let second = IdentityCheck::of_polys(
            "heat(t^2) = dil_{1/t} ∘ heat ∘ dil_t",
            &p.to_string(),
            &lhs2,
            &rhs2,
        );

        for chk in [&first, &second] {
            if !chk.equal {
                return Err(SpectralError::IdentityViolated {
                    identity: chk.identity.clone(),
                    lhs: chk.lhs.clone(),
                    rhs: chk.rhs.clone(),
                });
            }
        }
        Ok(vec![first, second])
    }

    /// The symmetric pairing defect: (⟨Nf, h⟩, ⟨f, Nh⟩) in L²(p).
    pub fn pairing_defect(&self, f: &QPoly, h: &QPoly) -> (Gaussian, Gaussian) {
        let nf_h = self.moment(&self.ops.n_op(f).mul(h));
        let f_nh = self.moment(&f.mul(&self.ops.n_op(h)));
        (nf_h, f_nh)
    }

    /// Scan real monomial pairs of homogeneous degree 1..=max_degree for a
    /// witness of non-self-adjointness; `None` when every pairing is
    /// symmetric in that range (e.g. on abelian groups).
    pub fn asymmetry_witness(&self, max_degree: u32) -> Option<AsymmetryWitness> {
        let basis: Vec<QPoly> = (1..=max_degree)
            .flat_map(|d| monomial_basis::<Gaussian>(self.alg.coords(), d))
            .collect();
        for f in &basis {
            for h in &basis {
                let (nf_h, f_nh) = self.pairing_defect(f, h);
                if nf_h != f_nh {
                    return Some(AsymmetryWitness {
                        f: f.clone(),
                        h: h.clone(),
                        nf_h,
                        f_nh,
                    });
                }
            }
        }
        None
    }

    /// Dirichlet energy and variance of a single real polynomial.
    pub fn rayleigh_data(&self, f: &QPoly) -> Result<(Rat, Rat), SpectralError> {
        if !f.is_real() {
            return Err(SpectralError::NonRealInput);
        }
        let mean = self.moment(f);
        let var = self.moment(&f.mul(f)).sub(&mean.mul(&mean));
        let dir = self.moment(
            &self
                .ops
                .gradient_squared(f)
                .map_err(|_| SpectralError::NonRealInput)?,
        );
        Ok((dir.re, var.re))
    }

    /// Minimum Rayleigh quotient of the Dirichlet form against the centered
    /// covariance over all polynomials of homogeneous degree 1..=n. The
    /// matrices are exact; the generalized eigenvalue problem is solved in
    /// floats (reported eigenvalues are reliable to about 1e-9).
    pub fn poincare_gap(&self, n: u32) -> Result<PoincareReport, SpectralError> {
        let basis: Vec<QPoly> = (1..=n)
            .flat_map(|d| monomial_basis::<Gaussian>(self.alg.coords(), d))
            .collect();
        if basis.is_empty() {
            return Err(SpectralError::DegenerateGram);
        }
        let dim = basis.len();
        let means: Vec<Gaussian> = basis.iter().map(|f| self.moment(f)).collect();
        let grads: Vec<Vec<QPoly>> = basis
            .iter()
            .map(|f| self.ops.horizontal().iter().map(|x| x.apply(f)).collect())
            .collect();
        let mut gram = DMatrix::<f64>::zeros(dim, dim);
        let mut diri = DMatrix::<f64>::zeros(dim, dim);
        for i in 0..dim {
            for j in i..dim {
                let m2 = self.moment(&basis[i].mul(&basis[j]));
                let centered = m2.sub(&means[i].mul(&means[j]));
                let g = rat_to_f64(&centered.re);
                let mut d = Gaussian::zero();
                for (gi, gj) in grads[i].iter().zip(&grads[j]) {
                    d = d.add(&self.moment(&gi.mul(gj)));
                }
                let dv = rat_to_f64(&d.re);
                gram[(i, j)] = g;
                gram[(j, i)] = g;
                diri[(i, j)] = dv;
                diri[(j, i)] = dv;
            }
        }
        let chol = gram
            .clone()
            .cholesky()
            .ok_or(SpectralError::DegenerateGram)?;
        let l = chol.l();
        // M = L⁻¹ D L⁻ᵀ, symmetric with the same spectrum as the pencil (D, G)
        let a = l
            .solve_lower_triangular(&diri)
            .ok_or(SpectralError::DegenerateGram)?;
        let m = l
            .solve_lower_triangular(&a.transpose())
            .ok_or(SpectralError::DegenerateGram)?;
        let sym = (&m + m.transpose()) * 0.5;
        let eig = sym.symmetric_eigen();
        let min = eig
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        Ok(PoincareReport {
            degree_cap: n,
            dim,
            min_rayleigh: min,
        })
    }
}

/// Scale the first-factor variables by c^(weight) and the second-factor
/// variables by s^(weight) in a polynomial over a doubled table.
fn dilate_pair(p: &QPoly, n: usize, c: &Rat, s: &Rat) -> QPoly {
    let vars = p.vars().clone();
    let mut out = QPoly::zero(vars.clone());
    for (m, coeff) in p.terms() {
        let w1: u32 = m.exps[..n]
            .iter()
            .zip(&vars.weights[..n])
            .map(|(e, w)| u32::from(*e) * w)
            .sum();
        let w2 = m.wdeg - w1;
        let factor = pow_rat(c, w1) * pow_rat(s, w2);
        out = out.add(&QPoly::monomial(
            vars.clone(),
            m.exps.clone(),
            coeff.scale(&factor),
        ));
    }
    out
}

pub(crate) fn pow_rat(r: &Rat, e: u32) -> Rat {
    let mut acc = Rat::one();
    for _ in 0..e {
        acc *= r;
    }
    acc
}

/// All monomials of degree 0..=n (used by verification drivers).
pub fn polynomial_ball(alg: &Arc<StratifiedAlgebra>, n: u32) -> Vec<QPoly> {
    monomial_basis_upto(alg.coords(), n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rat_frac;

    fn h1_spec() -> Spectral {
        Spectral::new(&StratifiedAlgebra::heisenberg(1))
    }

    fn xyu(sp: &Spectral) -> (QPoly, QPoly, QPoly) {
        let vars = sp.algebra().coords().clone();
        (
            QPoly::var(vars.clone(), 0),
            QPoly::var(vars.clone(), 1),
            QPoly::var(vars, 2),
        )
    }

    #[test]
    fn heat_flow_basic_values() {
        let sp = h1_spec();
        let (x, _, _) = xyu(&sp);
        let one = QPoly::one(x.vars().clone());
        // e^{-L/2} x² = x² + 1
        assert_eq!(
            sp.heat(&x.pow(2), &Rat::one(), HeatSign::Forward),
            x.pow(2).add(&one)
        );
        // degree-1 polynomials are harmonic
        assert_eq!(sp.heat(&x, &rat_frac(7, 3), HeatSign::Backward), x);
        // τ = 0 is the identity
        assert_eq!(
            sp.heat(&x.pow(4), &Rat::zero(), HeatSign::Forward),
            x.pow(4)
        );
    }

    #[test]
    fn heat_forward_backward_inverse() {
        let sp = h1_spec();
        let tau = rat_frac(3, 5);
        for f in polynomial_ball(sp.algebra(), 4) {
            let roundtrip = sp.heat(
                &sp.heat(&f, &tau, HeatSign::Forward),
                &tau,
                HeatSign::Backward,
            );
            assert_eq!(roundtrip, f);
        }
    }

    #[test]
    fn heat_formal_specializes() {
        let sp = h1_spec();
        let (x, _, _) = xyu(&sp);
        let hf = sp.heat_formal(&x.pow(2), HeatSign::Forward, "s");
        // evaluate at a numeric point with s = 1 and compare
        let p = [
            Gaussian::from_frac(1, 2),
            Gaussian::from_i64(0),
            Gaussian::from_i64(0),
            Gaussian::one(),
        ];
        assert_eq!(
            hf.eval(&p),
            sp.heat(&x.pow(2), &Rat::one(), HeatSign::Forward)
                .eval(&p[..3]),
        );
    }

    #[test]
    fn hermite_basis_degree_two() {
        let sp = h1_spec();
        let (x, y, u) = xyu(&sp);
        let one = QPoly::one(x.vars().clone());
        let basis = sp.hermite_basis(2).unwrap();
        assert_eq!(
            basis.members,
            vec![
                x.pow(2).sub(&one),
                x.mul(&y),
                y.pow(2).sub(&one),
                u.clone(),
            ]
        );
        let b1 = sp.hermite_basis(1).unwrap();
        assert_eq!(b1.members, vec![x.clone(), y.clone()]);
    }

    #[test]
    fn hermite_basis_degree_three_contains_xu_minus_2y() {
        let sp = h1_spec();
        let (x, y, u) = xyu(&sp);
        let basis = sp.hermite_basis(3).unwrap();
        let target = x.mul(&u).sub(&y.scale_rat(&rat_i64(2)));
        assert!(basis.members.contains(&target));
        // and it is an exact eigenvector with eigenvalue 3
        assert_eq!(sp.ops().n_op(&target), target.scale_rat(&rat_i64(3)));
    }

    #[test]
    fn mehler_basic_values() {
        let sp = h1_spec();
        let (x, _, _) = xyu(&sp);
        let one = QPoly::one(x.vars().clone());
        let circle = MehlerMode::Circle {
            c: rat_frac(3, 5),
            s: rat_frac(4, 5),
        };
        // T x = c·x on an eigenfunction of degree 1
        assert_eq!(
            sp.mehler(&x, &circle).unwrap(),
            x.scale_rat(&rat_frac(3, 5))
        );
        // Markovian: T 1 = 1
        assert_eq!(sp.mehler(&one, &circle).unwrap(), one);
        // cos^Nθ(x²) = (9/25)x² + 16/25
        assert_eq!(
            sp.mehler(&x.pow(2), &circle).unwrap(),
            x.pow(2).scale_rat(&rat_frac(9, 25)).add(&QPoly::constant(
                x.vars().clone(),
                Gaussian::from_frac(16, 25)
            ))
        );
        // a non-circle pair is rejected
        assert!(matches!(
            sp.mehler(
                &x,
                &MehlerMode::Circle {
                    c: rat_frac(1, 2),
                    s: rat_frac(1, 2)
                }
            ),
            Err(SpectralError::NotOnCircle { .. })
        ));
    }

    #[test]
    fn moment_table_h1() {
        let sp = h1_spec();
        let (x, y, u) = xyu(&sp);
        let cases: Vec<(QPoly, i64)> = vec![
            (QPoly::one(x.vars().clone()), 1),
            (x.pow(2), 1),
            (u.clone(), 0),
            (u.pow(2), 4),
            (x.pow(4), 3),
            (x.pow(2).mul(&y.pow(2)), 1),
            (x.pow(6), 15),
            (u.mul(&x).mul(&y), 0),
        ];
        for (f, expect) in cases {
            assert_eq!(sp.moment(&f), Gaussian::from_i64(expect), "E[{f}]");
        }
        // the forward flow of u·x·y keeps no constant term
        let e = sp.heat(&u.mul(&x).mul(&y), &Rat::one(), HeatSign::Forward);
        let expect = u
            .mul(&x)
            .mul(&y)
            .sub(&x.pow(2).scale_rat(&rat_i64(2)))
            .add(&y.pow(2).scale_rat(&rat_i64(2)));
        assert_eq!(e, expect);
    }

    #[test]
    fn rotation_identity_examples() {
        let sp = h1_spec();
        let (x, _, u) = xyu(&sp);
        let c = rat_frac(3, 5);
        let s = rat_frac(4, 5);
        for (p, expect) in [
            (u.clone(), Gaussian::zero()),
            (u.pow(2), Gaussian::from_i64(4)),
            (x.pow(2), Gaussian::one()),
        ] {
            let chk = sp.check_rotation_identity(&p, &c, &s).unwrap();
            assert!(chk.equal, "{chk:?}");
            assert_eq!(chk.rhs, expect.to_string());
        }
        assert!(sp
            .check_rotation_identity(&x, &rat_frac(1, 2), &rat_frac(1, 2))
            .is_err());
    }

    #[test]
    fn energy_identity_examples() {
        let sp = h1_spec();
        let (x, _, u) = xyu(&sp);
        // f = x: both sides 1
        let checks = sp.check_energy_identities(&x).unwrap();
        assert_eq!(checks[1].lhs, "1");
        assert_eq!(checks[1].rhs, "1");
        // f = u: both sides 8
        let checks = sp.check_energy_identities(&u).unwrap();
        assert_eq!(checks[1].lhs, "8");
        assert_eq!(checks[1].rhs, "8");
        // f = 1: 0 = 0
        let checks = sp
            .check_energy_identities(&QPoly::one(x.vars().clone()))
            .unwrap();
        assert!(checks.iter().all(|c| c.equal));
        // complex input is rejected
        assert!(sp
            .check_energy_identities(&x.scale(&Gaussian::i()))
            .is_err());
    }

    #[test]
    fn intertwining_examples() {
        let sp = h1_spec();
        let (x, _, _) = xyu(&sp);
        let checks = sp
            .check_intertwining(&x.pow(2), &rat_frac(3, 5), &rat_frac(4, 5), &rat_i64(3))
            .unwrap();
        // first identity: both sides (9/25)x² + 1
        let expect1 = x
            .pow(2)
            .scale_rat(&rat_frac(9, 25))
            .add(&QPoly::one(x.vars().clone()));
        assert_eq!(checks[0].lhs, expect1.to_string());
        assert!(checks[0].equal);
        // second identity at t = 3: both sides x² + 9
        let expect2 = x
            .pow(2)
            .add(&QPoly::constant(x.vars().clone(), Gaussian::from_i64(9)));
        assert_eq!(checks[1].lhs, expect2.to_string());
        assert!(checks[1].equal);
    }

    #[test]
    fn asymmetry_pairing_frozen_example() {
        let sp = h1_spec();
        let (x, y, u) = xyu(&sp);
        // ⟨N(xu), y⟩ = -4 but ⟨xu, Ny⟩ = 0
        let (a, b) = sp.pairing_defect(&x.mul(&u), &y);
        assert_eq!(a, Gaussian::from_i64(-4));
        assert_eq!(b, Gaussian::zero());
        // the symmetric pair (u, x²) is not a witness
        let (a, b) = sp.pairing_defect(&u, &x.pow(2));
        assert_eq!(a, b);
        assert_eq!(a, Gaussian::zero());
    }

    #[test]
    fn asymmetry_witness_scan() {
        let sp = h1_spec();
        let w = sp.asymmetry_witness(4).expect("witness exists in degree 4");
        assert_ne!(w.nf_h, w.f_nh);
        // the classical Ornstein-Uhlenbeck generator is symmetric
        let ab = Spectral::new(&StratifiedAlgebra::abelian(2));
        assert!(ab.asymmetry_witness(4).is_none());
    }

    #[test]
    fn semigroup_composition_on_circle_pairs() {
        let sp = h1_spec();
        let pairs = [
            (rat_frac(3, 5), rat_frac(4, 5)),
            (rat_frac(5, 13), rat_frac(12, 13)),
        ];
        let composed = MehlerMode::Contraction(rat_frac(3, 13)); // (3/5)(5/13)
        for f in polynomial_ball(sp.algebra(), 4) {
            let step1 = sp
                .mehler(
                    &f,
                    &MehlerMode::Circle {
                        c: pairs[1].0.clone(),
                        s: pairs[1].1.clone(),
                    },
                )
                .unwrap();
            let step2 = sp
                .mehler(
                    &step1,
                    &MehlerMode::Circle {
                        c: pairs[0].0.clone(),
                        s: pairs[0].1.clone(),
                    },
                )
                .unwrap();
            assert_eq!(step2, sp.mehler(&f, &composed).unwrap());
        }
    }

    #[test]
    fn eigen_decay_on_hermite_members() {
        let sp = h1_spec();
        let mode = MehlerMode::Circle {
            c: rat_frac(3, 5),
            s: rat_frac(4, 5),
        };
        for n in 0..=3u32 {
            let factor = pow_rat(&rat_frac(3, 5), n);
            for h in sp.hermite_basis(n).unwrap().members {
                assert_eq!(sp.mehler(&h, &mode).unwrap(), h.scale_rat(&factor));
            }
        }
    }

    #[test]
    fn measure_invariance_and_long_time_limit() {
        let sp = h1_spec();
        let mode = MehlerMode::Circle {
            c: rat_frac(3, 5),
            s: rat_frac(4, 5),
        };
        for f in polynomial_ball(sp.algebra(), 4) {
            let tf = sp.mehler(&f, &mode).unwrap();
            assert_eq!(sp.moment(&tf), sp.moment(&f));
            // at c = 0 the operator collapses to the mean
            let limit = sp
                .mehler(
                    &f,
                    &MehlerMode::Circle {
                        c: Rat::zero(),
                        s: Rat::one(),
                    },
                )
                .unwrap();
            assert_eq!(limit, QPoly::constant(f.vars().clone(), sp.moment(&f)));
        }
    }

    #[test]
    fn contraction_in_l2() {
        let sp = h1_spec();
        let mode = MehlerMode::Circle {
            c: rat_frac(3, 5),
            s: rat_frac(4, 5),
        };
        // a fixed panel of real polynomials with mixed terms
        let (x, y, u) = xyu(&sp);
        let panel = vec![
            x.add(&y),
            u.sub(&x.pow(2)),
            x.mul(&u).add(&y.pow(3)),
            u.pow(2).sub(&x.mul(&y)),
        ];
        for f in panel {
            let tf = sp.mehler(&f, &mode).unwrap();
            let lhs = sp.moment(&tf.mul(&tf));
            let rhs = sp.moment(&f.mul(&f));
            assert!(lhs.re <= rhs.re, "contraction fails for {f}");
            assert!(lhs.im.is_zero() && rhs.im.is_zero());
        }
    }

    #[test]
    fn rayleigh_single_function() {
        let sp = h1_spec();
        let (x, _, _) = xyu(&sp);
        // f = x²: Dirichlet 4, variance 2
        let (d, v) = sp.rayleigh_data(&x.pow(2)).unwrap();
        assert_eq!(d, rat_i64(4));
        assert_eq!(v, rat_i64(2));
    }

    #[test]
    fn poincare_gap_degree_one_is_unity() {
        let sp = h1_spec();
        let rep = sp.poincare_gap(1).unwrap();
        assert_eq!(rep.dim, 2);
        assert!((rep.min_rayleigh - 1.0).abs() < 1e-9);
        assert!(matches!(
            sp.poincare_gap(0),
            Err(SpectralError::DegenerateGram)
        ));
    }
}
