//! Mehler (Ornstein-Uhlenbeck type) semigroups on stratified Lie groups.
//!
//! The crate has an exact layer and a numeric layer.
//!
//! The exact layer represents a stratified Lie algebra by rational structure
//! constants, realizes the group law in exponential coordinates through the
//! Campbell-Hausdorff series, and acts on polynomials over Gaussian rationals
//! with the left-invariant differential calculus: the sub-Laplacian `L`, the
//! dilation generator `A`, and the Mehler generator `N = L + A`. Heat
//! operators `e^{∓τL/2}` are finite sums on polynomials, which yields the
//! eigenspaces `E_n = e^{L/2}(P_n)` of `N`, the Mehler operator
//! `δ_c ∘ e^{-s²L/2}`, and exact heat-kernel moments via
//! `∫ f p = (e^{-L/2}f)(identity)` — all with no rounding anywhere.
//!
//! The numeric layer evaluates the Heisenberg heat kernel by quadrature of
//! its oscillatory integral representation, samples the heat-kernel law on
//! any registered group by horizontal random walks, and cross-checks the
//! exact layer by Monte Carlo.

pub mod diffops;
pub mod group;
pub mod heat;
pub mod hermite;
pub mod poly;
pub mod quad;
pub mod report;
pub mod scalar;
pub mod spectral;

pub use group::{AlgebraError, AlgebraSpec, CompiledProduct, GroupPoint, StratifiedAlgebra};
pub use poly::{monomial_basis, monomial_basis_upto, Poly, PolyError, VarTable};
pub use scalar::{parse_rational, rational_string, Coeff, Gaussian, NumCoeff, Rat};
