//! Scalar coefficients: exact Gaussian rationals and the float counterparts.
//!
//! Everything in the exact layer is done over Q(i) = { a + b·i : a, b rational },
//! which is closed under all constructions used downstream (group law, heat
//! operators, generating series). Floats enter only through the numeric layer.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

/// Exact rational number (arbitrary precision).
pub type Rat = BigRational;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ScalarError {
    #[error("empty rational literal")]
    Empty,
    #[error("invalid rational literal `{0}`")]
    Invalid(String),
    #[error("zero denominator in rational literal `{0}`")]
    ZeroDenominator(String),
}

/// Parse a rational from the wire format `"p"` or `"p/q"` (optional sign).
pub fn parse_rational(s: &str) -> Result<Rat, ScalarError> {
    let t = s.trim();
    if t.is_empty() {
        return Err(ScalarError::Empty);
    }
    let (num_s, den_s) = match t.split_once('/') {
        Some((n, d)) => (n.trim(), Some(d.trim())),
        None => (t, None),
    };
    let num = BigInt::from_str(num_s).map_err(|_| ScalarError::Invalid(s.to_string()))?;
    let den = match den_s {
        Some(d) => BigInt::from_str(d).map_err(|_| ScalarError::Invalid(s.to_string()))?,
        None => BigInt::one(),
    };
    if den.is_zero() {
        return Err(ScalarError::ZeroDenominator(s.to_string()));
    }
    Ok(Rat::new(num, den))
}

/// Render a rational in the wire format (`"p"` or `"p/q"`, always reduced).
pub fn rational_string(r: &Rat) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn rat_i64(n: i64) -> Rat {
    Rat::from_integer(BigInt::from(n))
}

pub fn rat_frac(n: i64, d: i64) -> Rat {
    Rat::new(BigInt::from(n), BigInt::from(d))
}

/// A Gaussian rational `re + im·i` with exact components.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Gaussian {
    pub re: Rat,
    pub im: Rat,
}

impl Gaussian {
    pub fn new(re: Rat, im: Rat) -> Self {
        Gaussian { re, im }
    }

    pub fn from_rat(re: Rat) -> Self {
        Gaussian {
            re,
            im: Rat::zero(),
        }
    }

    pub fn from_i64(n: i64) -> Self {
        Gaussian::from_rat(rat_i64(n))
    }

    pub fn from_frac(n: i64, d: i64) -> Self {
        Gaussian::from_rat(rat_frac(n, d))
    }

    pub fn i() -> Self {
        Gaussian {
            re: Rat::zero(),
            im: Rat::one(),
        }
    }

    pub fn zero() -> Self {
        Gaussian {
            re: Rat::zero(),
            im: Rat::zero(),
        }
    }

    pub fn one() -> Self {
        Gaussian {
            re: Rat::one(),
            im: Rat::zero(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn is_real(&self) -> bool {
        self.im.is_zero()
    }

    pub fn conj(&self) -> Self {
        Gaussian {
            re: self.re.clone(),
            im: -self.im.clone(),
        }
    }

    pub fn add(&self, o: &Self) -> Self {
        Gaussian {
            re: &self.re + &o.re,
            im: &self.im + &o.im,
        }
    }

    pub fn sub(&self, o: &Self) -> Self {
        Gaussian {
            re: &self.re - &o.re,
            im: &self.im - &o.im,
        }
    }

    pub fn mul(&self, o: &Self) -> Self {
        Gaussian {
            re: &self.re * &o.re - &self.im * &o.im,
            im: &self.re * &o.im + &self.im * &o.re,
        }
    }

    pub fn neg(&self) -> Self {
        Gaussian {
            re: -self.re.clone(),
            im: -self.im.clone(),
        }
    }

    /// Multiplicative inverse; panics on zero.
    pub fn inv(&self) -> Self {
        let n = &self.re * &self.re + &self.im * &self.im;
        assert!(!n.is_zero(), "division by zero Gaussian rational");
        Gaussian {
            re: &self.re / &n,
            im: -(&self.im / &n),
        }
    }

    pub fn div(&self, o: &Self) -> Self {
        self.mul(&o.inv())
    }

    pub fn scale(&self, r: &Rat) -> Self {
        Gaussian {
            re: &self.re * r,
            im: &self.im * r,
        }
    }

    pub fn to_complex(&self) -> Complex64 {
        Complex64::new(rat_to_f64(&self.re), rat_to_f64(&self.im))
    }
}

/// Convert an exact rational to the nearest f64.
pub fn rat_to_f64(r: &Rat) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        // Fall back to a quotient of approximations for extreme magnitudes.
        let n = r.numer().to_f64().unwrap_or(f64::INFINITY);
        let d = r.denom().to_f64().unwrap_or(f64::INFINITY);
        n / d
    })
}

impl fmt::Display for Gaussian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.im.is_zero() {
            return write!(f, "{}", rational_string(&self.re));
        }
        if self.re.is_zero() {
            if self.im.is_one() {
                return write!(f, "i");
            }
            if (-self.im.clone()).is_one() {
                return write!(f, "-i");
            }
            return write!(f, "{}*i", rational_string(&self.im));
        }
        let sign = if self.im.is_negative() { "-" } else { "+" };
        let mag = self.im.abs();
        if mag.is_one() {
            write!(f, "({}{}i)", rational_string(&self.re), sign)
        } else {
            write!(
                f,
                "({}{}{}*i)",
                rational_string(&self.re),
                sign,
                rational_string(&mag)
            )
        }
    }
}

impl fmt::Debug for Gaussian {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Ring operations every polynomial/Lie coefficient must support.
///
/// Constructors are contextual (`zero_like`) so that ring elements carrying
/// context of their own (polynomials with a variable table) can be used as
/// coefficients in the group-law evaluation. Method names carry an `r`
/// prefix to stay clear of the `num_traits` and `std::ops` vocabulary.
pub trait Coeff: Clone + PartialEq + fmt::Debug {
    fn zero_like(&self) -> Self;
    fn ris_zero(&self) -> bool;
    fn radd(&self, o: &Self) -> Self;
    fn rsub(&self, o: &Self) -> Self;
    fn rmul(&self, o: &Self) -> Self;
    fn rneg(&self) -> Self;
    fn scale_rat(&self, r: &Rat) -> Self;
}

/// Coefficients constructible without context (numeric scalars).
pub trait NumCoeff: Coeff {
    fn num_zero() -> Self;
    fn num_one() -> Self;
    fn of_rat(r: &Rat) -> Self;
    fn of_gaussian(g: &Gaussian) -> Self;
    /// Complex conjugation (identity on real scalar types).
    fn conjugate(&self) -> Self;
    fn is_real(&self) -> bool;
    fn as_complex(&self) -> Complex64;
}

impl Coeff for Gaussian {
    fn zero_like(&self) -> Self {
        Gaussian::zero()
    }
    fn ris_zero(&self) -> bool {
        Gaussian::is_zero(self)
    }
    fn radd(&self, o: &Self) -> Self {
        Gaussian::add(self, o)
    }
    fn rsub(&self, o: &Self) -> Self {
        Gaussian::sub(self, o)
    }
    fn rmul(&self, o: &Self) -> Self {
        Gaussian::mul(self, o)
    }
    fn rneg(&self) -> Self {
        Gaussian::neg(self)
    }
    fn scale_rat(&self, r: &Rat) -> Self {
        Gaussian::scale(self, r)
    }
}

impl NumCoeff for Gaussian {
    fn num_zero() -> Self {
        Gaussian::zero()
    }
    fn num_one() -> Self {
        Gaussian::one()
    }
    fn of_rat(r: &Rat) -> Self {
        Gaussian::from_rat(r.clone())
    }
    fn of_gaussian(g: &Gaussian) -> Self {
        g.clone()
    }
    fn conjugate(&self) -> Self {
        self.conj()
    }
    fn is_real(&self) -> bool {
        Gaussian::is_real(self)
    }
    fn as_complex(&self) -> Complex64 {
        self.to_complex()
    }
}

impl Coeff for Rat {
    fn zero_like(&self) -> Self {
        Rat::zero()
    }
    fn ris_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn radd(&self, o: &Self) -> Self {
        self + o
    }
    fn rsub(&self, o: &Self) -> Self {
        self - o
    }
    fn rmul(&self, o: &Self) -> Self {
        self * o
    }
    fn rneg(&self) -> Self {
        -self.clone()
    }
    fn scale_rat(&self, r: &Rat) -> Self {
        self * r
    }
}

impl NumCoeff for Rat {
    fn num_zero() -> Self {
        Rat::zero()
    }
    fn num_one() -> Self {
        <Rat as One>::one()
    }
    fn of_rat(r: &Rat) -> Self {
        r.clone()
    }
    fn of_gaussian(g: &Gaussian) -> Self {
        assert!(g.is_real(), "cannot coerce a complex scalar to a rational");
        g.re.clone()
    }
    fn conjugate(&self) -> Self {
        self.clone()
    }
    fn is_real(&self) -> bool {
        true
    }
    fn as_complex(&self) -> Complex64 {
        Complex64::new(rat_to_f64(self), 0.0)
    }
}

impl Coeff for f64 {
    fn zero_like(&self) -> Self {
        0.0
    }
    fn ris_zero(&self) -> bool {
        *self == 0.0
    }
    fn radd(&self, o: &Self) -> Self {
        self + o
    }
    fn rsub(&self, o: &Self) -> Self {
        self - o
    }
    fn rmul(&self, o: &Self) -> Self {
        self * o
    }
    fn rneg(&self) -> Self {
        -self
    }
    fn scale_rat(&self, r: &Rat) -> Self {
        self * rat_to_f64(r)
    }
}

impl NumCoeff for f64 {
    fn num_zero() -> Self {
        0.0
    }
    fn num_one() -> Self {
        1.0
    }
    fn of_rat(r: &Rat) -> Self {
        rat_to_f64(r)
    }
    fn of_gaussian(g: &Gaussian) -> Self {
        assert!(g.is_real(), "cannot coerce a complex scalar to f64");
        rat_to_f64(&g.re)
    }
    fn conjugate(&self) -> Self {
        *self
    }
    fn is_real(&self) -> bool {
        true
    }
    fn as_complex(&self) -> Complex64 {
        Complex64::new(*self, 0.0)
    }
}

impl Coeff for Complex64 {
    fn zero_like(&self) -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn ris_zero(&self) -> bool {
        self.re == 0.0 && self.im == 0.0
    }
    fn radd(&self, o: &Self) -> Self {
        self + o
    }
    fn rsub(&self, o: &Self) -> Self {
        self - o
    }
    fn rmul(&self, o: &Self) -> Self {
        self * o
    }
    fn rneg(&self) -> Self {
        -self
    }
    fn scale_rat(&self, r: &Rat) -> Self {
        self * rat_to_f64(r)
    }
}

impl NumCoeff for Complex64 {
    fn num_zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn num_one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    fn of_rat(r: &Rat) -> Self {
        Complex64::new(rat_to_f64(r), 0.0)
    }
    fn of_gaussian(g: &Gaussian) -> Self {
        g.to_complex()
    }
    fn conjugate(&self) -> Self {
        self.conj()
    }
    fn is_real(&self) -> bool {
        self.im == 0.0
    }
    fn as_complex(&self) -> Complex64 {
        *self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_rational_forms() {
        assert_eq!(parse_rational("3").unwrap(), rat_i64(3));
        assert_eq!(parse_rational("-4").unwrap(), rat_i64(-4));
        assert_eq!(parse_rational("3/5").unwrap(), rat_frac(3, 5));
        assert_eq!(parse_rational(" -12/8 ").unwrap(), rat_frac(-3, 2));
        assert_eq!(parse_rational("4/-6").unwrap(), rat_frac(-2, 3));
    }

    #[test]
    fn parse_rational_rejects_garbage() {
        assert!(matches!(parse_rational(""), Err(ScalarError::Empty)));
        assert!(matches!(parse_rational("  "), Err(ScalarError::Empty)));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("a/b").is_err());
        assert!(parse_rational("1/2/3").is_err());
        assert!(parse_rational("1.5").is_err());
    }

    #[test]
    fn rational_string_round_trip() {
        for s in ["0", "7", "-7", "3/5", "-3/5"] {
            let r = parse_rational(s).unwrap();
            assert_eq!(rational_string(&r), s);
        }
    }

    #[test]
    fn gaussian_field_ops() {
        let i = Gaussian::i();
        // (1+i)^2 = 2i
        let one_i = Gaussian::one().add(&i);
        assert_eq!(one_i.mul(&one_i), i.scale(&rat_i64(2)));
        // i * conj(i) = 1
        assert_eq!(i.mul(&i.conj()), Gaussian::one());
        // inverse
        let z = Gaussian::new(rat_frac(3, 5), rat_frac(-4, 5));
        assert_eq!(z.mul(&z.inv()), Gaussian::one());
    }
}
