//! Eigenfunctions from representation theory: Hermite and special Hermite
//! functions, coefficient functions of the Schrödinger representation on the
//! Heisenberg groups, their generating-function expansion into polynomial
//! eigenvectors of the Mehler generator, and the analogous construction for
//! a general step-2 group through the canonical form of the central
//! skew-symmetric bracket form.
//!
//! All coefficient functions are managed up to a nonzero scalar: overall
//! normalizations (powers of √π, ν^{-1/2} factors, Hermite norms) are
//! dropped. Every downstream statement (eigenvector property, membership,
//! colinearity) is scalar-invariant.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::diffops::DiffOps;
use crate::group::StratifiedAlgebra;
use crate::poly::{Poly, VarTable};
use crate::scalar::{rat_frac, rat_i64, rat_to_f64, Gaussian, NumCoeff, Rat};
use crate::spectral::{QPoly, Spectral};

pub type CPoly = Poly<Complex64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HermiteError {
    #[error("coefficient function failed its eigenvalue check: {0}")]
    EigenCheckFailed(String),
    #[error("the group is not a Heisenberg group in the expected presentation")]
    NotHeisenberg,
    #[error("representation data requires a step-2 group")]
    NotStepTwo,
    #[error("central covector annihilates every bracket; no generic representation")]
    ZeroRank,
    #[error("eigenvector residual {residual:.3e} exceeds tolerance {tol:.1e}")]
    EigenToleranceExceeded { residual: f64, tol: f64 },
}

/// Physicists' Hermite polynomial H_μ in one variable, by the recurrence
/// H_{μ+1} = 2ξ H_μ - 2μ H_{μ-1}.
pub fn hermite_poly(mu: u32) -> QPoly {
    let vars = VarTable::new(vec!["xi".to_string()], vec![1]);
    let xi = QPoly::var(vars.clone(), 0);
    let mut h0 = QPoly::one(vars);
    if mu == 0 {
        return h0;
    }
    let mut h1 = xi.scale_rat(&rat_i64(2));
    for m in 1..mu {
        let next = xi
            .mul(&h1)
            .scale_rat(&rat_i64(2))
            .sub(&h0.scale_rat(&rat_i64(2 * i64::from(m))));
        h0 = h1;
        h1 = next;
    }
    h1
}

/// A function P(z)·exp(S(z)) with polynomial P and polynomial exponent S.
/// The class is closed under the left-invariant vector fields.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvelopeFn<C: NumCoeff> {
    pub poly: Poly<C>,
    pub log_factor: Poly<C>,
}

impl<C: NumCoeff> EnvelopeFn<C> {
    pub fn new(poly: Poly<C>, log_factor: Poly<C>) -> Self {
        assert!(poly.vars() == log_factor.vars());
        EnvelopeFn { poly, log_factor }
    }

    /// V(P e^S) = (V(P) + P·V(S)) e^S.
    pub fn apply_field(&self, v: &crate::diffops::VectorField<C>) -> Self {
        let p = v
            .apply(&self.poly)
            .add(&self.poly.mul(&v.apply(&self.log_factor)));
        EnvelopeFn {
            poly: p,
            log_factor: self.log_factor.clone(),
        }
    }

    /// L(P e^S) with L the sub-Laplacian of `ops`; stays in the class.
    pub fn sublaplacian(&self, ops: &DiffOps<C>) -> Self {
        let mut acc = Poly::zero(self.poly.vars().clone());
        for x in ops.horizontal() {
            acc = acc.sub(&self.apply_field(x).apply_field(x).poly);
        }
        EnvelopeFn {
            poly: acc,
            log_factor: self.log_factor.clone(),
        }
    }

    pub fn scale(&self, c: &C) -> Self {
        EnvelopeFn {
            poly: self.poly.scale(c),
            log_factor: self.log_factor.clone(),
        }
    }

    pub fn mul_poly(&self, p: &Poly<C>) -> Self {
        EnvelopeFn {
            poly: self.poly.mul(p),
            log_factor: self.log_factor.clone(),
        }
    }
}

/// Gaussian integrals ∫ ξ^m e^{-ξ² + bξ} dξ = √π·Q_m(b)·e^{b²/4}, up to the
/// common factor √π: returns Q_m as a rational polynomial in b, via
/// Q_m = Q'_{m-1} + (b/2)·Q_{m-1}.
fn gaussian_moment_polys(max_m: usize) -> Vec<QPoly> {
    let vars = VarTable::new(vec!["b".to_string()], vec![1]);
    let b = QPoly::var(vars.clone(), 0);
    let mut out = vec![QPoly::one(vars)];
    for m in 1..=max_m {
        let prev = &out[m - 1];
        let next = prev.partial(0).add(&prev.mul(&b).scale_rat(&rat_frac(1, 2)));
        out.push(next);
    }
    out
}

/// Special Hermite function Φ_{μ,μ'}(x, y), up to a nonzero scalar:
/// the xi-integral of e^{iyξ} F_μ(ξ + x/2) F_{μ'}(ξ - x/2) carried out
/// symbolically, yielding (polynomial in x, y) · e^{-(x²+y²)/4}.
pub fn special_hermite(mu: u32, mup: u32) -> EnvelopeFn<Gaussian> {
    // working table (xi, x); integrate out xi afterwards
    let work = VarTable::new(vec!["xi".to_string(), "x".to_string()], vec![1, 1]);
    let xi = QPoly::var(work.clone(), 0);
    let xvar = QPoly::var(work.clone(), 1);
    let xhalf = xvar.scale_rat(&rat_frac(1, 2));

    let shifted = |m: u32, arg: &QPoly| {
        hermite_poly(m)
            .embed(work.clone(), &[0])
            .substitute(work.clone(), &[arg.clone(), xvar.clone()])
    };
    let product = shifted(mu, &xi.add(&xhalf)).mul(&shifted(mup, &xi.sub(&xhalf)));

    // integrate ξ^m against e^{-ξ² + iyξ}: coefficient polynomials Q_m(iy)
    let max_m = product
        .terms()
        .map(|(m, _)| usize::from(m.exps[0]))
        .max()
        .unwrap_or(0);
    let q = gaussian_moment_polys(max_m);

    let out_vars = VarTable::new(vec!["x".to_string(), "y".to_string()], vec![1, 1]);
    let mut poly = QPoly::zero(out_vars.clone());
    for (m, c) in product.terms() {
        let mexp = usize::from(m.exps[0]);
        let xexp = m.exps[1];
        // Q_m evaluated at b = iy, as a polynomial in y
        let mut qiy = QPoly::zero(out_vars.clone());
        for (qm, qc) in q[mexp].terms() {
            let bpow = qm.exps[0];
            let ipow = Gaussian::i_pow(bpow);
            qiy = qiy.add(&QPoly::monomial(
                out_vars.clone(),
                vec![0, bpow],
                qc.mul(&ipow),
            ));
        }
        let xmono = QPoly::monomial(out_vars.clone(), vec![xexp, 0], c.clone());
        poly = poly.add(&xmono.mul(&qiy));
    }

    // envelope e^{-x²/4 - y²/4}
    let x = QPoly::var(out_vars.clone(), 0);
    let y = QPoly::var(out_vars.clone(), 1);
    let log_factor = x
        .pow(2)
        .add(&y.pow(2))
        .scale_rat(&rat_frac(-1, 4));
    EnvelopeFn::new(poly, log_factor)
}

/// The Heisenberg-group context for the Schrödinger representation path.
pub struct SchrodingerPath {
    alg: Arc<StratifiedAlgebra>,
    ops: DiffOps<Gaussian>,
    k: usize,
}

impl SchrodingerPath {
    /// Expects the Heisenberg presentation: coordinates x1,y1,..,xk,yk,u and
    /// brackets [X_j, Y_j] = -4U.
    pub fn new(alg: &Arc<StratifiedAlgebra>) -> Result<Self, HermiteError> {
        let n = alg.dim();
        if alg.step() != 2 || n % 2 == 0 || alg.layer_dims() != [n - 1, 1] {
            return Err(HermiteError::NotHeisenberg);
        }
        let k = (n - 1) / 2;
        // verify the bracket pattern exactly
        let minus4 = rat_i64(-4);
        for i in 0..(n - 1) {
            for j in (i + 1)..(n - 1) {
                let mut e_i = vec![Rat::zero(); n];
                e_i[i] = Rat::one();
                let mut e_j = vec![Rat::zero(); n];
                e_j[j] = Rat::one();
                let br = alg.bracket(&e_i, &e_j);
                let expect_central = if j == i + 1 && i % 2 == 0 {
                    minus4.clone()
                } else {
                    Rat::zero()
                };
                if br[n - 1] != expect_central
                    || br[..n - 1].iter().any(|c| !num_traits::Zero::is_zero(c))
                {
                    return Err(HermiteError::NotHeisenberg);
                }
            }
        }
        Ok(SchrodingerPath {
            alg: alg.clone(),
            ops: DiffOps::new(alg),
            k,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Coefficient function of the Schrödinger representation against the
    /// Hermite basis: e^{-iu/4} Π_j Φ_{μ_j, μ'_j}(x_j, y_j), up to scalar.
    /// Verified to satisfy L φ = (Σ_j 2μ_j + 1) φ exactly before returning.
    pub fn coefficient(
        &self,
        mu: &[u32],
        mup: &[u32],
    ) -> Result<(EnvelopeFn<Gaussian>, Rat), HermiteError> {
        assert_eq!(mu.len(), self.k);
        assert_eq!(mup.len(), self.k);
        let vars = self.alg.coords().clone();
        let n = self.alg.dim();
        let mut poly = QPoly::one(vars.clone());
        let mut log_factor = QPoly::var(vars.clone(), n - 1)
            .scale(&Gaussian::new(Rat::zero(), rat_frac(-1, 4)));
        for j in 0..self.k {
            let phi = special_hermite(mu[j], mup[j]);
            // map (x, y) -> (x_j, y_j)
            let var_map = [2 * j, 2 * j + 1];
            poly = poly.mul(&phi.poly.embed(vars.clone(), &var_map));
            log_factor = log_factor.add(&phi.log_factor.embed(vars.clone(), &var_map));
        }
        let phi = EnvelopeFn::new(poly, log_factor);
        let lambda: i64 = mu.iter().map(|&m| 2 * i64::from(m) + 1).sum();
        let lambda = rat_i64(lambda);
        let lphi = phi.sublaplacian(&self.ops);
        if lphi.poly != phi.poly.scale_rat(&lambda) {
            return Err(HermiteError::EigenCheckFailed(format!(
                "L phi != {lambda} phi for mu={mu:?}, mu'={mup:?}"
            )));
        }
        Ok((phi, lambda))
    }

    /// Polynomial eigenvector h_n = dⁿ/dtⁿ|₀ e^{t²λ/2} φ∘δ_t of the Mehler
    /// generator (eigenvalue n), or zero.
    pub fn generating_hermite(
        &self,
        mu: &[u32],
        mup: &[u32],
        n: u32,
    ) -> Result<QPoly, HermiteError> {
        let (phi, lambda) = self.coefficient(mu, mup)?;
        let half_lambda = Gaussian::from_rat(lambda / rat_i64(2));
        Ok(generating_coefficient(&phi, &half_lambda, n))
    }
}

/// n!·[tⁿ] of P(δ_t z)·exp(t²·(λ/2) + (S∘δ_t)), computed from the weighted
/// homogeneous decomposition: S∘δ_t = t·S₁ + t²·S₂ and P∘δ_t = Σ_d t^d P_d.
/// Requires S to have components of weighted degree 1 and 2 only.
pub fn generating_coefficient<C: NumCoeff>(
    phi: &EnvelopeFn<C>,
    half_lambda: &C,
    n: u32,
) -> Poly<C> {
    let vars = phi.poly.vars().clone();
    let mut s1 = Poly::zero(vars.clone());
    let mut s2 = Poly::zero(vars.clone());
    for (d, comp) in phi.log_factor.homogeneous_components() {
        match d {
            1 => s1 = s1.add(&comp),
            2 => s2 = s2.add(&comp),
            _ => panic!("log factor must be weighted-homogeneous of degree 1 and 2"),
        }
    }
    let m2 = s2.add(&Poly::constant(vars.clone(), half_lambda.clone()));
    let p_comps = phi.poly.homogeneous_components();

    let mut acc = Poly::zero(vars.clone());
    // h_n = n! Σ_{d + a + 2b = n} P_d · S1^a/a! · M2^b/b!
    for b in 0..=(n / 2) {
        for a in 0..=(n - 2 * b) {
            let d = n - 2 * b - a;
            let Some(pd) = p_comps.get(&d) else { continue };
            if (a > 0 && s1.is_zero()) || pd.is_zero() {
                continue;
            }
            let coeff = Rat::new(
                factorial_big(n),
                factorial_big(a) * factorial_big(b),
            );
            let term = pd.mul(&s1.pow(a)).mul(&m2.pow(b)).scale_rat(&coeff);
            acc = acc.add(&term);
        }
    }
    acc
}

fn factorial_big(n: u32) -> num_bigint::BigInt {
    let mut acc = num_bigint::BigInt::one();
    for i in 2..=i64::from(n) {
        acc *= i;
    }
    acc
}

/// Exact coordinates of `h` in the degree-n eigenbasis, or `None` when `h`
/// does not lie in its span. Solved over the Gaussian rationals.
pub fn membership_check(sp: &Spectral, h: &QPoly, n: u32) -> Option<Vec<Gaussian>> {
    let basis = sp.hermite_basis(n).ok()?;
    solve_in_span(&basis.members, h)
}

/// Solve Σ c_i v_i = target exactly over Q(i), in the monomial coordinates
/// of the shared variable table.
pub fn solve_in_span(span: &[QPoly], target: &QPoly) -> Option<Vec<Gaussian>> {
    use std::collections::BTreeMap;
    let mut rows: BTreeMap<crate::poly::Mono, usize> = BTreeMap::new();
    for v in span.iter().chain(std::iter::once(target)) {
        for (m, _) in v.terms() {
            let next = rows.len();
            rows.entry(m.clone()).or_insert(next);
        }
    }
    let nr = rows.len();
    let nc = span.len();
    // dense augmented matrix
    let mut mat = vec![vec![Gaussian::zero(); nc + 1]; nr];
    for (j, v) in span.iter().enumerate() {
        for (m, c) in v.terms() {
            mat[rows[m]][j] = c.clone();
        }
    }
    for (m, c) in target.terms() {
        mat[rows[m]][nc] = c.clone();
    }
    // Gaussian elimination
    let mut pivot_row_of_col = vec![usize::MAX; nc];
    let mut r = 0;
    for col in 0..nc {
        let Some(p) = (r..nr).find(|&i| !mat[i][col].is_zero()) else {
            continue;
        };
        mat.swap(r, p);
        let inv = mat[r][col].inv();
        for c in col..=nc {
            mat[r][c] = mat[r][c].mul(&inv);
        }
        for i in 0..nr {
            if i != r && !mat[i][col].is_zero() {
                let f = mat[i][col].clone();
                for c in col..=nc {
                    let sub = mat[r][c].mul(&f);
                    mat[i][c] = mat[i][c].sub(&sub);
                }
            }
        }
        pivot_row_of_col[col] = r;
        r += 1;
    }
    // inconsistent if any zero-row has nonzero rhs
    for i in r..nr {
        if !mat[i][nc].is_zero() {
            return None;
        }
    }
    let mut coords = vec![Gaussian::zero(); nc];
    for col in 0..nc {
        let pr = pivot_row_of_col[col];
        if pr != usize::MAX {
            coords[col] = mat[pr][nc].clone();
        } else if !mat.iter().all(|row| row[col].is_zero()) {
            // free column: the span is linearly dependent; still fine, the
            // particular solution with zero free coordinates is returned
        }
    }
    // verify (guards the free-column case)
    let mut recon = QPoly::zero(target.vars().clone());
    for (c, v) in coords.iter().zip(span) {
        recon = recon.add(&v.scale(c));
    }
    if recon == *target {
        Some(coords)
    } else {
        None
    }
}

// ---------------------------------------------------------------------------
// General step-2 groups: canonical form of the central form and the
// float-coefficient generating construction
// ---------------------------------------------------------------------------

/// Representation data of a step-2 group at a covector: the symplectic
/// eigenvalues ν_j > 0 of the bracket form ⟨λ, [·,·]⟩ on the first layer, an
/// orthogonal change of basis Ω (columns X_1, Y_1, .., X_k, Y_k, S_1, ..),
/// and the values of the covector on the kernel directions.
#[derive(Clone, Debug)]
pub struct RepData {
    pub alg: Arc<StratifiedAlgebra>,
    pub lambda: Vec<Rat>,
    pub nu: Vec<f64>,
    pub omega: DMatrix<f64>,
    pub pair_count: usize,
    pub residual_dim: usize,
    pub l_s: Vec<f64>,
}

const RANK_TOL: f64 = 1e-10;

/// Canonical form of ⟨λ, [·,·]⟩ on the first layer of a step-2 algebra.
/// `l` is a rational covector on the whole algebra (length = dim); its
/// central part is λ. The first-layer components of `l` in the symplectic
/// directions are absorbed by a coadjoint-orbit adjustment; the kernel
/// components ⟨l, S_h⟩ survive into the representation.
pub fn step2_rep_data(
    alg: &Arc<StratifiedAlgebra>,
    l: &[Rat],
) -> Result<RepData, HermiteError> {
    if alg.step() != 2 {
        return Err(HermiteError::NotStepTwo);
    }
    assert_eq!(l.len(), alg.dim());
    let n1 = alg.first_layer_dim();
    let lambda: Vec<Rat> = l[n1..].to_vec();

    // A[j][h] = ⟨λ, [χ_j, χ_h]⟩
    let mut a = DMatrix::<f64>::zeros(n1, n1);
    for j in 0..n1 {
        let mut ej = vec![Rat::zero(); alg.dim()];
        ej[j] = Rat::one();
        for h in 0..n1 {
            let mut eh = vec![Rat::zero(); alg.dim()];
            eh[h] = Rat::one();
            let br = alg.bracket(&ej, &eh);
            let mut val = Rat::zero();
            for (m, lm) in lambda.iter().enumerate() {
                val += &br[n1 + m] * lm;
            }
            a[(j, h)] = rat_to_f64(&val);
        }
    }

    // spectral decomposition of AᵀA = -A² gives the ν_j² and the pairing
    let ata = a.transpose() * &a;
    let eig = ata.clone().symmetric_eigen();
    let scale = ata.amax().max(1.0);
    let mut idx: Vec<usize> = (0..n1).collect();
    idx.sort_by(|&i, &j| {
        eig.eigenvalues[j]
            .partial_cmp(&eig.eigenvalues[i])
            .unwrap()
    });

    let mut range_basis: Vec<nalgebra::DVector<f64>> = Vec::new();
    let mut kernel_basis: Vec<nalgebra::DVector<f64>> = Vec::new();
    for &i in &idx {
        let v = eig.eigenvectors.column(i).into_owned();
        if eig.eigenvalues[i] > RANK_TOL * scale {
            range_basis.push(v);
        } else {
            kernel_basis.push(v);
        }
    }
    if range_basis.is_empty() {
        return Err(HermiteError::ZeroRank);
    }

    // extract (X_j, Y_j) pairs: Y_j = -A X_j / ν_j
    let mut columns: Vec<nalgebra::DVector<f64>> = Vec::new();
    let mut nu = Vec::new();
    while let Some(v) = range_basis.first().cloned() {
        let v = v.normalize();
        let av = &a * &v;
        let nu_j = av.norm();
        let w = -av / nu_j;
        nu.push(nu_j);
        columns.push(v.clone());
        columns.push(w.clone());
        // remove the plane span{v, w} from the remaining range basis
        let mut next: Vec<nalgebra::DVector<f64>> = Vec::new();
        for r in range_basis.iter().skip(1) {
            let mut r2 = r.clone();
            r2 -= &v * v.dot(r);
            r2 -= &w * w.dot(r);
            if r2.norm() > 1e-8 {
                next.push(r2.normalize());
            }
        }
        range_basis = next;
    }
    let k = nu.len();

    // orthonormalize the kernel block against everything found so far
    let mut s_cols: Vec<nalgebra::DVector<f64>> = Vec::new();
    for kv in kernel_basis {
        let mut r = kv.clone();
        for c in columns.iter().chain(&s_cols) {
            r -= c * c.dot(&kv);
        }
        if r.norm() > 1e-8 {
            s_cols.push(r.normalize());
        }
    }
    let residual_dim = n1 - 2 * k;
    assert_eq!(
        s_cols.len(),
        residual_dim,
        "kernel dimension mismatch in canonical form"
    );

    let mut omega = DMatrix::<f64>::zeros(n1, n1);
    for (c, col) in columns.iter().chain(&s_cols).enumerate() {
        omega.set_column(c, col);
    }

    let l_first: Vec<f64> = l[..n1].iter().map(rat_to_f64).collect();
    let l_vec = nalgebra::DVector::from_vec(l_first);
    let l_s: Vec<f64> = s_cols.iter().map(|s| s.dot(&l_vec)).collect();

    Ok(RepData {
        alg: alg.clone(),
        lambda,
        nu,
        omega,
        pair_count: k,
        residual_dim,
        l_s,
    })
}

impl RepData {
    /// ⟨λ, [ω_i, ω_j]⟩ in the transformed basis (for invariant checks).
    pub fn transformed_bracket(&self) -> DMatrix<f64> {
        let n1 = self.alg.first_layer_dim();
        let mut a = DMatrix::<f64>::zeros(n1, n1);
        for j in 0..n1 {
            let mut ej = vec![Rat::zero(); self.alg.dim()];
            ej[j] = Rat::one();
            for h in 0..n1 {
                let mut eh = vec![Rat::zero(); self.alg.dim()];
                eh[h] = Rat::one();
                let br = self.alg.bracket(&ej, &eh);
                let mut val = Rat::zero();
                for (m, lm) in self.lambda.iter().enumerate() {
                    val += &br[n1 + m] * lm;
                }
                a[(j, h)] = rat_to_f64(&val);
            }
        }
        self.omega.transpose() * a * &self.omega
    }

    /// λ_μ = Σ_j ν_j (2μ_j + 1) + Σ_h ⟨l, S_h⟩².
    pub fn eigenvalue(&self, mu: &[u32]) -> f64 {
        let osc: f64 = self
            .nu
            .iter()
            .zip(mu)
            .map(|(nu, &m)| nu * (2.0 * f64::from(m) + 1.0))
            .sum();
        let lin: f64 = self.l_s.iter().map(|v| v * v).sum();
        osc + lin
    }
}

/// Generating-function eigenvector on a step-2 group from the canonical
/// representation data, pulled back to the original coordinates. The result
/// has float coefficients; its eigenvector residual against N h = n h is
/// checked at relative tolerance 1e-9 in the coefficient max-norm.
pub fn step2_generating_hermite(
    rep: &RepData,
    mu: &[u32],
    mup: &[u32],
    n: u32,
) -> Result<CPoly, HermiteError> {
    let alg = &rep.alg;
    let k = rep.pair_count;
    assert_eq!(mu.len(), k);
    assert_eq!(mup.len(), k);
    let n1 = alg.first_layer_dim();
    let d_central = alg.dim() - n1;

    // working table: transformed first-layer coordinates then the centre
    let mut names: Vec<String> = Vec::new();
    let mut weights: Vec<u32> = Vec::new();
    for j in 1..=k {
        names.push(format!("tx{j}"));
        names.push(format!("ty{j}"));
        weights.push(1);
        weights.push(1);
    }
    for h in 1..=rep.residual_dim {
        names.push(format!("ts{h}"));
        weights.push(1);
    }
    for m in 0..d_central {
        names.push(alg.coords().names[n1 + m].clone());
        weights.push(alg.coords().weights[n1 + m]);
    }
    let work = VarTable::new(names, weights);

    // poly part Π_j Φ_{μ_j,μ'_j}(√ν_j x_j, √ν_j y_j) and quadratic envelope
    let mut poly = CPoly::one(work.clone());
    let mut log_factor = CPoly::zero(work.clone());
    for j in 0..k {
        let phi = special_hermite(mu[j], mup[j]);
        let phi_poly: CPoly = phi.poly.to_float().embed(work.clone(), &[2 * j, 2 * j + 1]);
        let sq = Complex64::new(rep.nu[j].sqrt(), 0.0);
        let images: Vec<CPoly> = (0..work.len())
            .map(|v| {
                if v == 2 * j || v == 2 * j + 1 {
                    CPoly::var(work.clone(), v).scale(&sq)
                } else {
                    CPoly::var(work.clone(), v)
                }
            })
            .collect();
        poly = poly.mul(&phi_poly.substitute(work.clone(), &images));
        let xj = CPoly::var(work.clone(), 2 * j);
        let yj = CPoly::var(work.clone(), 2 * j + 1);
        log_factor = log_factor.add(
            &xj.pow(2)
                .add(&yj.pow(2))
                .scale(&Complex64::new(-rep.nu[j] / 4.0, 0.0)),
        );
    }
    for h in 0..rep.residual_dim {
        let sh = CPoly::var(work.clone(), 2 * k + h);
        log_factor = log_factor.add(&sh.scale(&Complex64::new(0.0, rep.l_s[h])));
    }
    for m in 0..d_central {
        let um = CPoly::var(work.clone(), n1 + m);
        log_factor = log_factor.add(&um.scale(&Complex64::new(0.0, rat_to_f64(&rep.lambda[m]))));
    }

    let phi = EnvelopeFn::new(poly, log_factor);
    let half_lambda = Complex64::new(rep.eigenvalue(mu) / 2.0, 0.0);
    let h_work = generating_coefficient(&phi, &half_lambda, n);

    // pull back: working first-layer variable i = Σ_a Ω[a, i]·(original var a)
    let orig = alg.coords().clone();
    let images: Vec<CPoly> = (0..work.len())
        .map(|i| {
            if i < n1 {
                let mut p = CPoly::zero(orig.clone());
                for a in 0..n1 {
                    let w = rep.omega[(a, i)];
                    if w.abs() > 0.0 {
                        p = p.add(&CPoly::var(orig.clone(), a).scale(&Complex64::new(w, 0.0)));
                    }
                }
                p
            } else {
                CPoly::var(orig.clone(), n1 + (i - n1))
            }
        })
        .collect();
    let h = h_work.substitute(orig, &images);

    // residual check against the exact operator with float coefficients
    let norm = h.coeff_sup_norm();
    if norm > 0.0 {
        let ops: DiffOps<Complex64> = DiffOps::new(alg);
        let res = ops
            .n_op(&h)
            .sub(&h.scale(&Complex64::new(f64::from(n), 0.0)));
        let tol = 1e-9;
        let rel = res.coeff_sup_norm() / norm;
        if rel > tol {
            return Err(HermiteError::EigenToleranceExceeded { residual: rel, tol });
        }
    }
    Ok(h)
}

impl Gaussian {
    /// i^n as an exact Gaussian rational.
    pub fn i_pow(n: u16) -> Gaussian {
        match n % 4 {
            0 => Gaussian::one(),
            1 => Gaussian::i(),
            2 => Gaussian::one().neg(),
            _ => Gaussian::i().neg(),
        }
    }
}
