//! Polynomials in a vanishing perturbation parameter ε, and exact limits of
//! their ratios as ε → 0⁺.
//!
//! Perturbation-defined beliefs (a sequence of fully supported distributions
//! indexed by n, with ε standing for 1/n) become rational functions of ε;
//! conditional beliefs are ratios, and the limit of a ratio is read off the
//! lowest-degree coefficients. Everything stays in exact rationals.

use crate::rational::Rat;
use num::{Signed, Zero};

/// A polynomial in ε with rational coefficients: `coeffs[k] · ε^k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Poly {
    pub coeffs: Vec<Rat>,
}

impl Poly {
    pub fn zero() -> Poly {
        Poly { coeffs: Vec::new() }
    }

    pub fn constant(c: Rat) -> Poly {
        Poly { coeffs: vec![c] }.normalized()
    }

    pub fn one() -> Poly {
        Poly::constant(Rat::from_integer(1.into()))
    }

    /// `c · ε^k`.
    pub fn term(c: Rat, k: usize) -> Poly {
        let mut coeffs = vec![Rat::zero(); k + 1];
        coeffs[k] = c;
        Poly { coeffs }.normalized()
    }

    fn normalized(mut self) -> Poly {
        while self.coeffs.last().is_some_and(|c| c.is_zero()) {
            self.coeffs.pop();
        }
        self
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    /// Degree of the lowest nonzero term.
    pub fn min_degree(&self) -> Option<usize> {
        self.coeffs.iter().position(|c| !c.is_zero())
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let len = self.coeffs.len().max(other.coeffs.len());
        let mut coeffs = Vec::with_capacity(len);
        for k in 0..len {
            let a = self.coeffs.get(k).cloned().unwrap_or_else(Rat::zero);
            let b = other.coeffs.get(k).cloned().unwrap_or_else(Rat::zero);
            coeffs.push(a + b);
        }
        Poly { coeffs }.normalized()
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        let len = self.coeffs.len().max(other.coeffs.len());
        let mut coeffs = Vec::with_capacity(len);
        for k in 0..len {
            let a = self.coeffs.get(k).cloned().unwrap_or_else(Rat::zero);
            let b = other.coeffs.get(k).cloned().unwrap_or_else(Rat::zero);
            coeffs.push(a - b);
        }
        Poly { coeffs }.normalized()
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        if self.is_zero() || other.is_zero() {
            return Poly::zero();
        }
        let mut coeffs = vec![Rat::zero(); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                if b.is_zero() {
                    continue;
                }
                coeffs[i + j] = coeffs[i + j].clone() + a * b;
            }
        }
        Poly { coeffs }.normalized()
    }

    pub fn scale(&self, c: &Rat) -> Poly {
        Poly {
            coeffs: self.coeffs.iter().map(|a| a * c).collect(),
        }
        .normalized()
    }

    /// True when the polynomial is strictly positive for all small ε > 0:
    /// the lowest-degree nonzero coefficient is positive.
    pub fn eventually_positive(&self) -> bool {
        match self.min_degree() {
            None => false,
            Some(k) => self.coeffs[k].is_positive(),
        }
    }
}

/// Exact limit of `num/den` as ε → 0⁺. `None` when the ratio diverges or
/// the denominator is identically zero.
pub fn limit_ratio(num: &Poly, den: &Poly) -> Option<Rat> {
    let dd = den.min_degree()?;
    match num.min_degree() {
        None => Some(Rat::zero()),
        Some(nd) if nd > dd => Some(Rat::zero()),
        Some(nd) if nd == dd => Some(&num.coeffs[nd] / &den.coeffs[dd]),
        Some(_) => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{rat, ratio};

    #[test]
    fn limits_read_low_degree_terms() {
        // (2ε + 3ε²) / (4ε) → 1/2
        let num = Poly::term(rat(2), 1).add(&Poly::term(rat(3), 2));
        let den = Poly::term(rat(4), 1);
        assert_eq!(limit_ratio(&num, &den), Some(ratio(1, 2)));
    }

    #[test]
    fn vanishing_numerator_gives_zero() {
        let num = Poly::term(rat(5), 2);
        let den = Poly::constant(rat(3)).add(&Poly::term(rat(1), 1));
        assert_eq!(limit_ratio(&num, &den), Some(rat(0)));
    }

    #[test]
    fn diverging_ratio_is_none() {
        let num = Poly::constant(rat(1));
        let den = Poly::term(rat(1), 1);
        assert_eq!(limit_ratio(&num, &den), None);
    }

    #[test]
    fn eventual_positivity_follows_lowest_coefficient() {
        assert!(Poly::term(rat(1), 3).eventually_positive());
        assert!(!Poly::term(rat(-1), 1).eventually_positive());
        assert!(!Poly::zero().eventually_positive());
        // 1 - ε is positive near zero even with a negative high coefficient.
        assert!(Poly::constant(rat(1))
            .sub(&Poly::term(rat(1), 1))
            .eventually_positive());
    }

    #[test]
    fn arithmetic_normalizes() {
        let p = Poly::term(rat(1), 1).sub(&Poly::term(rat(1), 1));
        assert!(p.is_zero());
        let q = Poly::constant(rat(2)).mul(&Poly::term(ratio(1, 2), 1));
        assert_eq!(q, Poly::term(rat(1), 1));
    }
}
