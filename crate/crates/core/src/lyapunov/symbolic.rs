//! Exact polynomial arithmetic in `(k, r, h^2)` with rational coefficients.
//!
//! The one-step differences of the HBr Lyapunov function are linear
//! combinations of three inner products along the trajectory; their
//! coefficients are polynomials in the iteration index, the friction `r` and
//! the step `h^2`. Keeping them symbolic lets the cancellation of the
//! gradient/momentum inner product be checked exactly instead of up to
//! floating-point residue.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_rational::Rational64;

/// Exponents of `(k, r, h^2)`.
type Monomial = [u32; 3];

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Poly {
    terms: BTreeMap<Monomial, Rational64>,
}

impl Poly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(num: i64, den: i64) -> Self {
        Self::monomial(Rational64::new(num, den), [0, 0, 0])
    }

    pub fn k() -> Self {
        Self::monomial(Rational64::from_integer(1), [1, 0, 0])
    }

    pub fn r() -> Self {
        Self::monomial(Rational64::from_integer(1), [0, 1, 0])
    }

    pub fn h2() -> Self {
        Self::monomial(Rational64::from_integer(1), [0, 0, 1])
    }

    fn monomial(c: Rational64, m: Monomial) -> Self {
        let mut terms = BTreeMap::new();
        if c != Rational64::from_integer(0) {
            terms.insert(m, c);
        }
        Self { terms }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn eval(&self, k: f64, r: f64, h2: f64) -> f64 {
        self.terms
            .iter()
            .map(|(m, c)| {
                let c = *c.numer() as f64 / *c.denom() as f64;
                c * k.powi(m[0] as i32) * r.powi(m[1] as i32) * h2.powi(m[2] as i32)
            })
            .sum()
    }

    fn insert(&mut self, m: Monomial, c: Rational64) {
        let entry = self
            .terms
            .entry(m)
            .or_insert_with(|| Rational64::from_integer(0));
        *entry += c;
        if *entry == Rational64::from_integer(0) {
            self.terms.remove(&m);
        }
    }
}

impl Add for Poly {
    type Output = Poly;
    fn add(mut self, rhs: Poly) -> Poly {
        for (m, c) in rhs.terms {
            self.insert(m, c);
        }
        self
    }
}

impl Neg for Poly {
    type Output = Poly;
    fn neg(mut self) -> Poly {
        for c in self.terms.values_mut() {
            *c = -*c;
        }
        self
    }
}

impl Sub for Poly {
    type Output = Poly;
    fn sub(self, rhs: Poly) -> Poly {
        self + (-rhs)
    }
}

impl Mul for Poly {
    type Output = Poly;
    fn mul(self, rhs: Poly) -> Poly {
        let mut out = Poly::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                out.insert([ma[0] + mb[0], ma[1] + mb[1], ma[2] + mb[2]], ca * cb);
            }
        }
        out
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({c})")?;
            for (name, e) in ["k", "r", "h2"].iter().zip(m) {
                match e {
                    0 => {}
                    1 => write!(f, "*{name}")?,
                    _ => write!(f, "*{name}^{e}")?,
                }
            }
        }
        Ok(())
    }
}

/// Coefficients of a one-step Lyapunov difference on a quadratic, written as
/// `a <e, A e> + b <e, A d> + c |A e|^2` with `e = q_k - q*`, `d = q_k - q_{k-1}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DifferenceCoefficients {
    pub e_ae: Poly,
    pub e_ad: Poly,
    pub ae_ae: Poly,
}

impl Add for DifferenceCoefficients {
    type Output = DifferenceCoefficients;
    fn add(self, rhs: Self) -> Self {
        Self {
            e_ae: self.e_ae + rhs.e_ae,
            e_ad: self.e_ad + rhs.e_ad,
            ae_ae: self.ae_ae + rhs.ae_ae,
        }
    }
}

impl DifferenceCoefficients {
    /// Evaluates the difference from the three inner products.
    pub fn apply(&self, k: usize, r: f64, h2: f64, e_ae: f64, e_ad: f64, ae_ae: f64) -> f64 {
        let k = k as f64;
        self.e_ae.eval(k, r, h2) * e_ae
            + self.e_ad.eval(k, r, h2) * e_ad
            + self.ae_ae.eval(k, r, h2) * ae_ae
    }
}

/// `2k + r - 2`.
fn two_k_r() -> Poly {
    Poly::constant(2, 1) * Poly::k() + Poly::r() - Poly::constant(2, 1)
}

/// `V2_{k+1} - V2_k` along HBr (gradient-side terms, specialized to `grad f = A e`).
pub fn v2_difference() -> DifferenceCoefficients {
    let s = two_k_r();
    DifferenceCoefficients {
        e_ae: -(Poly::h2() * (Poly::r() - Poly::constant(1, 1)) * s.clone()),
        e_ad: -(Poly::h2() * (Poly::k() - Poly::constant(1, 1)) * s.clone()),
        ae_ae: Poly::constant(1, 4) * Poly::h2() * Poly::h2() * s.clone() * s,
    }
}

/// `V1_{k+1} - V1_k` along HBr on a quadratic.
pub fn v1_difference() -> DifferenceCoefficients {
    let s = two_k_r();
    DifferenceCoefficients {
        e_ae: Poly::h2() * s.clone(),
        e_ad: Poly::h2() * (Poly::k() - Poly::constant(1, 1)) * s.clone(),
        ae_ae: -(Poly::constant(1, 2) * Poly::h2() * Poly::h2() * s * Poly::k()),
    }
}

/// `-h^2 (r-2)(2k+r-2) <e, B e>` with `B = A - (h^2/4) A^2`, expanded.
pub fn total_difference() -> DifferenceCoefficients {
    let s = two_k_r();
    let r2 = Poly::r() - Poly::constant(2, 1);
    DifferenceCoefficients {
        e_ae: -(Poly::h2() * r2.clone() * s.clone()),
        e_ad: Poly::zero(),
        ae_ae: Poly::constant(1, 4) * Poly::h2() * Poly::h2() * r2 * s,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic() {
        let p = (Poly::k() + Poly::constant(1, 1)) * (Poly::k() - Poly::constant(1, 1));
        assert_eq!(p, Poly::k() * Poly::k() - Poly::constant(1, 1));
        assert!((p.clone() - p.clone()).is_zero());
        assert_eq!(p.eval(3.0, 0.0, 0.0), 8.0);
        assert_eq!(Poly::constant(1, 4).eval(0.0, 0.0, 0.0), 0.25);
        assert_eq!(format!("{}", Poly::zero()), "0");
    }

    #[test]
    fn momentum_inner_product_cancels_exactly() {
        let sum = v1_difference() + v2_difference();
        assert!(sum.e_ad.is_zero(), "left over: {}", sum.e_ad);
    }

    #[test]
    fn lemma_sum_is_the_b_form() {
        assert_eq!(v1_difference() + v2_difference(), total_difference());
    }

    #[test]
    fn total_vanishes_at_r_two() {
        let t = total_difference();
        for k in [1.0, 7.0, 1e4] {
            assert_eq!(t.e_ae.eval(k, 2.0, 0.3), 0.0);
            assert_eq!(t.ae_ae.eval(k, 2.0, 0.3), 0.0);
        }
    }
}
