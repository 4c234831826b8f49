//! The numeric layer: evaluation of the Heisenberg heat kernel from its
//! oscillatory integral representation, heat-kernel sampling by horizontal
//! random walks on any registered group, and Monte Carlo cross-checks of the
//! exact layer.
//!
//! The kernel at time 1 on H_k is
//!
//!   p(x, y, u) = c_k ∫_R e^{iλu} Π_j (2λ/sinh 2λ)·e^{-(λ/tanh 2λ)(x_j²+y_j²)} dλ
//!
//! with c_k = (2π)^{-(k+1)} fixed by ∫p = 1 (integrate the Gaussian factors
//! in (x, y), then λ). The integrand is even in λ, so the cosine form on
//! [0, Λ] is used, with Λ chosen so the Π(2λ/sinh 2λ) tail is negligible
//! against the target tolerance.

use std::io::Write;
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use thiserror::Error;

use crate::group::{CompiledProduct, StratifiedAlgebra};
use crate::poly::Poly;
use crate::quad::{composite, QuadResult};
use crate::scalar::Gaussian;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HeatError {
    #[error("kernel evaluation requires a Heisenberg group in the standard presentation")]
    NotHeisenberg,
    #[error("quadrature truncation insufficient: {0}")]
    TruncationInsufficient(String),
}

/// A Monte Carlo value with its sampling pedigree.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MCEstimate {
    pub value: f64,
    pub stderr: f64,
    pub n_samples: usize,
    pub seed: u64,
    pub walk_steps: u32,
}

// ---------------------------------------------------------------------------
// Kernel evaluation on Heisenberg groups
// ---------------------------------------------------------------------------

/// Evaluator of the time-1 heat kernel on H_k by λ-quadrature.
pub struct KernelEvaluator {
    k: usize,
    q_hom: f64,
    lambda_cut: f64,
    panels: usize,
    tol: f64,
}

/// Check the Heisenberg presentation (x1, y1, .., xk, yk, u with
/// [X_j, Y_j] = -4U) and return k.
pub fn heisenberg_order(alg: &StratifiedAlgebra) -> Option<usize> {
    use num_traits::{One, Zero};
    use crate::scalar::Rat;
    let n = alg.dim();
    if alg.step() != 2 || n % 2 == 0 || alg.layer_dims() != [n - 1, 1] {
        return None;
    }
    let k = (n - 1) / 2;
    for i in 0..(n - 1) {
        for j in (i + 1)..(n - 1) {
            let mut ei = vec![Rat::zero(); n];
            ei[i] = Rat::one();
            let mut ej = vec![Rat::zero(); n];
            ej[j] = Rat::one();
            let br = alg.bracket(&ei, &ej);
            let expect = if j == i + 1 && i % 2 == 0 {
                crate::scalar::rat_i64(-4)
            } else {
                Rat::zero()
            };
            if br[n - 1] != expect || br[..n - 1].iter().any(|c| !c.is_zero()) {
                return None;
            }
        }
    }
    Some(k)
}

/// Per-factor weight 2λ/sinh(2tλ)·... split into the amplitude and Gaussian
/// exponent, stable near λ = 0.
#[inline]
fn factor_params(lambda: f64, t: f64) -> (f64, f64) {
    let s = 2.0 * t * lambda;
    if s.abs() < 1e-6 {
        // 2λ/sinh(2tλ) → 1/t·(1 - s²/6), λ/tanh(2tλ) → 1/(2t)·(1 + s²/3)
        ((1.0 - s * s / 6.0) / t, 0.5 * (1.0 + s * s / 3.0) / t)
    } else {
        (2.0 * lambda / s.sinh(), lambda / s.tanh())
    }
}

impl KernelEvaluator {
    /// Default construction: Λ from the tail bound at the given tolerance,
    /// one panel per unit of Λ.
    pub fn new(alg: &StratifiedAlgebra, tol: f64) -> Result<Self, HeatError> {
        let k = heisenberg_order(alg).ok_or(HeatError::NotHeisenberg)?;
        let target = tol * 1e-3;
        let mut lambda_cut: f64 = 4.0;
        loop {
            if tail_bound(k, lambda_cut) < target {
                break;
            }
            lambda_cut *= 2.0;
            if lambda_cut > 64.0 {
                return Err(HeatError::TruncationInsufficient(format!(
                    "tail bound {:.3e} above target {:.3e} at cutoff {}",
                    tail_bound(k, lambda_cut),
                    target,
                    lambda_cut
                )));
            }
        }
        Ok(KernelEvaluator {
            k,
            q_hom: (2 * k + 2) as f64,
            lambda_cut,
            panels: lambda_cut.ceil() as usize,
            tol,
        })
    }

    pub fn with_params(
        alg: &StratifiedAlgebra,
        lambda_cut: f64,
        panels: usize,
        tol: f64,
    ) -> Result<Self, HeatError> {
        let k = heisenberg_order(alg).ok_or(HeatError::NotHeisenberg)?;
        Ok(KernelEvaluator {
            k,
            q_hom: (2 * k + 2) as f64,
            lambda_cut,
            panels,
            tol,
        })
    }

    pub fn lambda_cut(&self) -> f64 {
        self.lambda_cut
    }

    fn norm_const(&self) -> f64 {
        (2.0 * std::f64::consts::PI).powi(-(self.k as i32) - 1)
    }

    fn split_point<'a>(&self, point: &'a [f64]) -> (&'a [f64], f64) {
        assert_eq!(point.len(), 2 * self.k + 1, "coordinate count mismatch");
        (&point[..2 * self.k], point[2 * self.k])
    }

    fn quad(&self, f: impl FnMut(f64) -> f64, cut: f64, panels: usize) -> Result<QuadResult, HeatError> {
        let r = composite(f, 0.0, cut, panels, self.tol * 1e-3);
        if !r.converged {
            return Err(HeatError::TruncationInsufficient(format!(
                "quadrature did not converge (error estimate {:.3e})",
                r.error_estimate
            )));
        }
        Ok(r)
    }

    /// Density of the time-t kernel; t = 1 is the invariant density.
    pub fn density_t(&self, point: &[f64], t: f64) -> Result<f64, HeatError> {
        let (xy, u) = self.split_point(point);
        let k = self.k;
        let integrand = |lambda: f64| {
            let mut amp = (lambda * u).cos();
            for j in 0..k {
                let (w, a) = factor_params(lambda, t);
                let r2 = xy[2 * j].powi(2) + xy[2 * j + 1].powi(2);
                amp *= w * (-a * r2).exp();
            }
            amp
        };
        // decay scale is e^{-2ktλ}: shrink the cutoff accordingly
        let cut = self.lambda_cut / t.max(1e-3);
        let panels = self.panels.max((cut * (1.0 + u.abs()) / 3.0).ceil() as usize);
        let r = self.quad(integrand, cut, panels)?;
        Ok(2.0 * self.norm_const() * r.value)
    }

    /// Density of the invariant (time-1) kernel.
    pub fn density(&self, point: &[f64]) -> Result<f64, HeatError> {
        self.density_t(point, 1.0)
    }

    /// |(L - Q·Id - A) p| at a point, with every derivative taken on the
    /// λ-integrand analytically.
    pub fn pde_residual(&self, point: &[f64]) -> Result<f64, HeatError> {
        let (xy, u) = self.split_point(point);
        let k = self.k;
        let q_hom = self.q_hom;
        let integrand = |lambda: f64| {
            let (w, a) = factor_params(lambda, 1.0);
            let mut envelope = 1.0;
            let mut sum_r2 = 0.0;
            for j in 0..k {
                let r2 = xy[2 * j].powi(2) + xy[2 * j + 1].powi(2);
                sum_r2 += r2;
                envelope *= w * (-a * r2).exp();
            }
            let cosu = (lambda * u).cos();
            let sinu = (lambda * u).sin();
            // L p: per pair j, -(X_j² + Y_j²) p has integrand
            //   cos·(4a - 4a²r_j² + 4λ²r_j²)·E; the mixed sin terms cancel.
            let mut lp = 0.0;
            for j in 0..k {
                let r2 = xy[2 * j].powi(2) + xy[2 * j + 1].powi(2);
                lp += 4.0 * a - 4.0 * a * a * r2 + 4.0 * lambda * lambda * r2;
            }
            // A p integrand: -2a·Σr² cos - 2uλ sin (times E)
            let ap_cos = -2.0 * a * sum_r2;
            let ap_sin = -2.0 * u * lambda;
            envelope * (cosu * (lp - q_hom - ap_cos) - sinu * ap_sin)
        };
        let panels = self.panels.max((self.lambda_cut * (1.0 + u.abs()) / 3.0).ceil() as usize);
        let r = self.quad(integrand, self.lambda_cut, panels)?;
        Ok((2.0 * self.norm_const() * r.value).abs())
    }

    /// |p_t(g) - t^{-Q/2}·p(δ_{1/√t} g)|: the left side by the λ-rescaled
    /// integral, the right by dilation of the time-1 evaluation.
    pub fn scaling_residual(&self, point: &[f64], t: f64) -> Result<f64, HeatError> {
        let lhs = self.density_t(point, t)?;
        let root = t.sqrt();
        let dilated: Vec<f64> = point
            .iter()
            .enumerate()
            .map(|(j, &z)| {
                if j < 2 * self.k {
                    z / root
                } else {
                    z / t
                }
            })
            .collect();
        let rhs = t.powf(-self.q_hom / 2.0) * self.density(&dilated)?;
        Ok((lhs - rhs).abs())
    }

    /// Mass of the box [-r, r]^{2k} × [-u_bound, u_bound]: the (x, y)
    /// integrals are carried out in closed form (error functions), leaving a
    /// one-dimensional oscillatory λ-integral.
    pub fn box_mass(&self, r: f64, u_bound: f64) -> Result<f64, HeatError> {
        let k = self.k;
        let integrand = |lambda: f64| {
            let (w, a) = factor_params(lambda, 1.0);
            let gauss = {
                let e = libm::erf(a.sqrt() * r);
                (std::f64::consts::PI / a) * e * e
            };
            let u_int = if lambda.abs() < 1e-12 {
                2.0 * u_bound
            } else {
                2.0 * (lambda * u_bound).sin() / lambda
            };
            u_int * (w * gauss).powi(k as i32)
        };
        let panels = self
            .panels
            .max((self.lambda_cut * u_bound / 3.0).ceil() as usize);
        let r = self.quad(integrand, self.lambda_cut, panels)?;
        Ok(2.0 * self.norm_const() * r.value)
    }
}

/// Upper bound on ∫_Λ^∞ (2λ/sinh 2λ)^k dλ for Λ ≥ max(2, k):
/// 2λ/sinh 2λ ≤ 4.1 λ e^{-2λ} there, and the polynomial growth is absorbed
/// into one extra exponential factor.
fn tail_bound(k: usize, cut: f64) -> f64 {
    let kf = k as f64;
    (4.1 * cut).powi(k as i32) * (-2.0 * kf * cut).exp() / (2.0 * kf - 1.0).max(1.0)
}

// ---------------------------------------------------------------------------
// Heat-kernel sampling by horizontal random walks
// ---------------------------------------------------------------------------

/// A batch of approximate heat-kernel samples in flat layout.
pub struct SampleBatch {
    pub alg: Arc<StratifiedAlgebra>,
    dim: usize,
    data: Vec<f64>,
    pub seed: u64,
    pub walk_steps: u32,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter_points(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    /// CSV export: one header row of coordinate names, one row per sample.
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "{}", self.alg.coords().names.join(","))?;
        for p in self.iter_points() {
            let row: Vec<String> = p.iter().map(|v| format!("{v}")).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Per-sample deterministic stream: the sample index is mixed into the seed,
/// so batches are bit-identical for a given (seed, count, walk_steps)
/// regardless of how the work is scheduled.
fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    // splitmix64 step on seed ⊕ golden-ratio multiple of the index
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    ChaCha8Rng::seed_from_u64(z)
}

/// Draw `count` approximate samples of the heat-kernel law at time 1:
/// products of `walk_steps` exponentials of first-layer Gaussian increments
/// with variance 1/walk_steps (exact in the first layer for every step
/// count; the higher layers converge as the number of steps grows).
pub fn sample_heat(
    alg: &Arc<StratifiedAlgebra>,
    count: usize,
    seed: u64,
    walk_steps: u32,
) -> SampleBatch {
    assert!(walk_steps >= 1);
    let dim = alg.dim();
    let n1 = alg.first_layer_dim();
    let product = CompiledProduct::new(alg);
    let scale = (1.0 / f64::from(walk_steps)).sqrt();
    let mut data = vec![0.0f64; count * dim];
    data.par_chunks_mut(dim).enumerate().for_each(|(i, out)| {
        let mut rng = sample_rng(seed, i as u64);
        let mut cur = vec![0.0f64; dim];
        let mut incr = vec![0.0f64; dim];
        let mut next = vec![0.0f64; dim];
        for _ in 0..walk_steps {
            for inc in incr.iter_mut().take(n1) {
                let g: f64 = rng.sample(StandardNormal);
                *inc = scale * g;
            }
            product.eval_into(&cur, &incr, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        out.copy_from_slice(&cur);
    });
    SampleBatch {
        alg: alg.clone(),
        dim,
        data,
        seed,
        walk_steps,
    }
}

/// A real polynomial flattened for fast evaluation at f64 points.
pub struct CompiledPoly {
    terms: Vec<(f64, Vec<(usize, u16)>)>,
}

impl CompiledPoly {
    pub fn new(f: &Poly<Gaussian>) -> Self {
        assert!(f.is_real(), "Monte Carlo integrands must be real");
        let terms = f
            .terms()
            .map(|(m, c)| {
                let powers: Vec<(usize, u16)> = m
                    .exps
                    .iter()
                    .enumerate()
                    .filter(|(_, &e)| e > 0)
                    .map(|(v, &e)| (v, e))
                    .collect();
                (crate::scalar::rat_to_f64(&c.re), powers)
            })
            .collect();
        CompiledPoly { terms }
    }

    pub fn eval(&self, point: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (c, powers) in &self.terms {
            let mut t = *c;
            for &(v, e) in powers {
                let x = point[v];
                for _ in 0..e {
                    t *= x;
                }
            }
            acc += t;
        }
        acc
    }
}

const CHUNK: usize = 8192;

/// Mean and standard error of a function over the batch, with a fixed
/// chunked reduction order (results do not depend on the worker count).
fn mc_reduce(batch: &SampleBatch, f: impl Fn(&[f64]) -> f64 + Sync) -> MCEstimate {
    let n = batch.len();
    let chunks: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .chunks(CHUNK)
        .map(|idx| {
            let mut s = 0.0;
            let mut s2 = 0.0;
            for i in idx {
                let v = f(batch.point(i));
                s += v;
                s2 += v * v;
            }
            (s, s2)
        })
        .collect();
    let (sum, sum2) = chunks
        .iter()
        .fold((0.0, 0.0), |(a, b), (s, s2)| (a + s, b + s2));
    let mean = sum / n as f64;
    let var = ((sum2 - sum * sum / n as f64) / (n as f64 - 1.0)).max(0.0);
    MCEstimate {
        value: mean,
        stderr: (var / n as f64).sqrt(),
        n_samples: n,
        seed: batch.seed,
        walk_steps: batch.walk_steps,
    }
}

/// Monte Carlo expectation of a real polynomial against the batch.
pub fn mc_expectation(f: &Poly<Gaussian>, batch: &SampleBatch) -> MCEstimate {
    let cf = CompiledPoly::new(f);
    mc_reduce(batch, |p| cf.eval(p))
}

/// Monte Carlo evaluation of the Mehler semigroup at time t and base point
/// γ: averages f(δ_{e^{-t}}γ · δ_{√(1-e^{-2t})} g) over heat samples g.
pub fn mehler_mc(
    f: &Poly<Gaussian>,
    t: f64,
    gamma: &[f64],
    alg: &Arc<StratifiedAlgebra>,
    count: usize,
    seed: u64,
    walk_steps: u32,
) -> MCEstimate {
    assert!(t >= 0.0);
    let rho = (-t).exp();
    let sigma = (1.0 - rho * rho).sqrt();
    let base = dilate_coords(alg, gamma, rho);
    let product = CompiledProduct::new(alg);
    let cf = CompiledPoly::new(f);
    let batch = sample_heat(alg, count, seed, walk_steps);
    let mut out = vec![0.0; alg.dim()];
    let _ = &mut out;
    mc_reduce(&batch, |g| {
        let gd = dilate_coords(alg, g, sigma);
        let mut arg = vec![0.0; alg.dim()];
        product.eval_into(&base, &gd, &mut arg);
        cf.eval(&arg)
    })
}

fn dilate_coords(alg: &StratifiedAlgebra, p: &[f64], t: f64) -> Vec<f64> {
    p.iter()
        .zip(alg.degrees())
        .map(|(&z, &d)| z * t.powi(d as i32))
        .collect()
}

/// One rotation-invariance comparison: empirical E[P(δ_c γ · δ_s g)] over
/// independent samples against the exact moment, as a z-score.
#[derive(Clone, Debug)]
pub struct RotationCheck {
    pub poly: String,
    pub empirical: f64,
    pub exact: f64,
    pub stderr: f64,
    pub z: f64,
}

/// Monte Carlo check of the rotation identity at angle θ for each panel
/// polynomial; exact moments come from the moment oracle.
pub fn rotation_invariance_mc(
    sp: &crate::spectral::Spectral,
    theta: f64,
    panel: &[Poly<Gaussian>],
    count: usize,
    seed: u64,
    walk_steps: u32,
) -> Vec<RotationCheck> {
    let alg = sp.algebra();
    let (c, s) = (theta.cos(), theta.sin());
    let gammas = sample_heat(alg, count, seed, walk_steps);
    let gs = sample_heat(alg, count, seed.wrapping_add(0x5DEECE66D), walk_steps);
    let product = CompiledProduct::new(alg);
    panel
        .iter()
        .map(|p| {
            let cf = CompiledPoly::new(p);
            let est = mc_reduce(&gammas, |gamma| {
                // pair sample i of both batches through the index encoded in
                // the point pointer arithmetic: recompute the pair directly
                let i = (gamma.as_ptr() as usize - gammas.point(0).as_ptr() as usize)
                    / (std::mem::size_of::<f64>() * alg.dim());
                let g = gs.point(i);
                let a = dilate_coords(alg, gamma, c);
                let b = dilate_coords(alg, g, s);
                let mut arg = vec![0.0; alg.dim()];
                product.eval_into(&a, &b, &mut arg);
                cf.eval(&arg)
            });
            let exact = crate::scalar::rat_to_f64(&sp.moment(p).re);
            let z = if est.stderr > 0.0 {
                (est.value - exact) / est.stderr
            } else if (est.value - exact).abs() < 1e-12 {
                0.0
            } else {
                f64::INFINITY
            };
            RotationCheck {
                poly: p.to_string(),
                empirical: est.value,
                exact,
                stderr: est.stderr,
                z,
            }
        })
        .collect()
}

/// Agreement between the kernel evaluator and the sampler on box
/// probabilities: |quadrature mass - empirical frequency| within
/// 4·(binomial standard error) + quadrature tolerance + a walk
/// discretization allowance.
#[derive(Clone, Debug)]
pub struct BoxAgreement {
    pub r: f64,
    pub u_bound: f64,
    pub mass: f64,
    pub frequency: f64,
    pub stderr: f64,
    pub within_bars: bool,
}

pub fn kernel_sampler_agreement(
    ev: &KernelEvaluator,
    batch: &SampleBatch,
    probes: &[(f64, f64)],
) -> Result<Vec<BoxAgreement>, HeatError> {
    let dim = batch.alg.dim();
    let k = (dim - 1) / 2;
    let mut out = Vec::with_capacity(probes.len());
    for &(r, u_bound) in probes {
        let mass = ev.box_mass(r, u_bound)?;
        let est = mc_reduce(batch, |p| {
            let inside = p[..2 * k].iter().all(|z| z.abs() <= r) && p[dim - 1].abs() <= u_bound;
            if inside {
                1.0
            } else {
                0.0
            }
        });
        let walk_allowance = 4.0 / f64::from(batch.walk_steps);
        let within =
            (mass - est.value).abs() <= 4.0 * est.stderr + ev.tol + walk_allowance;
        out.push(BoxAgreement {
            r,
            u_bound,
            mass,
            frequency: est.value,
            stderr: est.stderr,
            within_bars: within,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Poly;
    use crate::scalar::rat_i64;
    use crate::spectral::Spectral;

    type QP = Poly<Gaussian>;

    fn h1() -> Arc<StratifiedAlgebra> {
        StratifiedAlgebra::heisenberg(1)
    }

    #[test]
    fn kernel_value_at_origin() {
        // p(0) = c_1·∫ 2λ/sinh2λ dλ = (2π)^{-2}·π²/4 = 1/16
        let ev = KernelEvaluator::new(&h1(), 1e-8).unwrap();
        let p0 = ev.density(&[0.0, 0.0, 0.0]).unwrap();
        assert!((p0 - 1.0 / 16.0).abs() < 1e-6, "p(0) = {p0}");
    }

    #[test]
    fn kernel_rejects_non_heisenberg() {
        let engel = StratifiedAlgebra::engel();
        assert!(matches!(
            KernelEvaluator::new(&engel, 1e-6),
            Err(HeatError::NotHeisenberg)
        ));
        assert_eq!(heisenberg_order(&StratifiedAlgebra::heisenberg(2)), Some(2));
    }

    #[test]
    fn kernel_symmetry_and_positivity() {
        let ev = KernelEvaluator::new(&h1(), 1e-8).unwrap();
        for pt in [[0.5, -0.3, 0.7], [1.0, 1.0, 1.0], [0.1, 2.0, -1.5]] {
            let a = ev.density(&pt).unwrap();
            let neg: Vec<f64> = pt.iter().map(|z| -z).collect();
            let b = ev.density(&neg).unwrap();
            assert!((a - b).abs() < 1e-10);
            assert!(a >= 0.0);
        }
    }

    #[test]
    fn box_mass_approaches_one() {
        let ev = KernelEvaluator::new(&h1(), 1e-6).unwrap();
        let m = ev.box_mass(8.0, 40.0).unwrap();
        assert!((m - 1.0).abs() < 1e-4, "box mass = {m}");
    }

    #[test]
    fn pde_residual_small() {
        let ev = KernelEvaluator::new(&h1(), 1e-8).unwrap();
        for pt in [[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.5, -0.5, 0.25]] {
            let r = ev.pde_residual(&pt).unwrap();
            assert!(r < 1e-6, "residual {r} at {pt:?}");
        }
    }

    #[test]
    fn scaling_residual_small() {
        let ev = KernelEvaluator::new(&h1(), 1e-10).unwrap();
        let r = ev.scaling_residual(&[1.0, 1.0, 1.0], 4.0).unwrap();
        assert!(r < 1e-8, "scaling residual {r}");
    }

    #[test]
    fn sampler_first_layer_moments() {
        let alg = h1();
        let batch = sample_heat(&alg, 200_000, 7, 8);
        let vars = alg.coords().clone();
        let x = QP::var(vars.clone(), 0);
        let est = mc_expectation(&x.pow(2), &batch);
        assert!(
            (est.value - 1.0).abs() < 4.0 * est.stderr,
            "E[x²] = {} ± {}",
            est.value,
            est.stderr
        );
        let u = QP::var(vars, 2);
        let est = mc_expectation(&u, &batch);
        assert!(est.value.abs() < 4.0 * est.stderr);
    }

    #[test]
    fn sampler_second_layer_variance() {
        let alg = h1();
        let batch = sample_heat(&alg, 200_000, 42, 256);
        let vars = alg.coords().clone();
        let u = QP::var(vars, 2);
        let est = mc_expectation(&u.pow(2), &batch);
        // E[u²] = 4 with a (known) 1/M discretization bias well under 4σ
        assert!(
            (est.value - 4.0).abs() < 4.0 * est.stderr,
            "E[u²] = {} ± {}",
            est.value,
            est.stderr
        );
    }

    #[test]
    fn sampler_determinism() {
        let alg = h1();
        let b1 = sample_heat(&alg, 1000, 99, 32);
        let b2 = sample_heat(&alg, 1000, 99, 32);
        assert_eq!(b1.data, b2.data);
        let b3 = sample_heat(&alg, 1000, 100, 32);
        assert_ne!(b1.data, b3.data);
    }

    #[test]
    fn mc_constant_has_zero_stderr() {
        let alg = h1();
        let batch = sample_heat(&alg, 1000, 5, 4);
        let c = QP::constant(alg.coords().clone(), Gaussian::from_i64(7));
        let est = mc_expectation(&c, &batch);
        assert_eq!(est.value, 7.0);
        assert_eq!(est.stderr, 0.0);
    }

    #[test]
    fn mehler_mc_linear_eigenfunction() {
        let alg = h1();
        let vars = alg.coords().clone();
        let x = QP::var(vars, 0);
        let t = 0.7;
        let gamma = [2.0, -1.0, 0.5];
        let est = mehler_mc(&x, t, &gamma, &alg, 100_000, 11, 16);
        let expect = (-t).exp() * gamma[0];
        assert!(
            (est.value - expect).abs() < 4.0 * est.stderr,
            "{} vs {expect}",
            est.value
        );
    }

    #[test]
    fn mehler_mc_degree_three_eigenfunction() {
        let alg = h1();
        let vars = alg.coords().clone();
        let x = QP::var(vars.clone(), 0);
        let y = QP::var(vars.clone(), 1);
        let u = QP::var(vars, 2);
        let h = x.mul(&u).sub(&y.scale_rat(&rat_i64(2)));
        let est = mehler_mc(&h, 0.5, &[1.0, 1.0, 1.0], &alg, 200_000, 13, 128);
        let expect = -(-1.5f64).exp();
        assert!(
            (est.value - expect).abs() < 4.0 * est.stderr,
            "{} ± {} vs {expect}",
            est.value,
            est.stderr
        );
    }

    #[test]
    fn rotation_invariance_mc_small_panel() {
        let alg = h1();
        let sp = Spectral::new(&alg);
        let vars = alg.coords().clone();
        let panel = vec![QP::var(vars.clone(), 2).pow(2), QP::var(vars, 0).pow(2)];
        let checks = rotation_invariance_mc(
            &sp,
            std::f64::consts::FRAC_PI_4,
            &panel,
            100_000,
            21,
            64,
        );
        for c in checks {
            assert!(c.z.abs() <= 4.0, "{c:?}");
        }
    }

    #[test]
    fn kernel_sampler_boxes_agree() {
        let alg = h1();
        let ev = KernelEvaluator::new(&alg, 1e-6).unwrap();
        let batch = sample_heat(&alg, 100_000, 3, 128);
        let probes = [(1.0, 30.0), (2.0, 30.0), (2.0, 2.0)];
        let checks = kernel_sampler_agreement(&ev, &batch, &probes).unwrap();
        for c in checks {
            assert!(c.within_bars, "{c:?}");
        }
    }
}
