//! Multivariate complex polynomials with sparse exponent storage.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::json::{from_pair, to_pair, Pair};
use crate::linalg::C64;

pub type Exponent = Vec<u32>;

/// A polynomial in `nvars` complex variables, stored as a map from exponent multi-index to
/// coefficient. Exact zero coefficients are never stored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolynomialRepr", into = "PolynomialRepr")]
pub struct Polynomial {
    nvars: usize,
    terms: BTreeMap<Exponent, C64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TermRepr {
    exp: Vec<u32>,
    coef: Pair,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolynomialRepr {
    d: usize,
    terms: Vec<TermRepr>,
}

impl TryFrom<PolynomialRepr> for Polynomial {
    type Error = Error;

    fn try_from(r: PolynomialRepr) -> Result<Self> {
        Polynomial::from_terms(r.d, r.terms.into_iter().map(|t| (t.exp, from_pair(t.coef))))
    }
}

impl From<Polynomial> for PolynomialRepr {
    fn from(p: Polynomial) -> Self {
        PolynomialRepr {
            d: p.nvars,
            terms: p
                .terms
                .into_iter()
                .map(|(exp, c)| TermRepr { exp, coef: to_pair(c) })
                .collect(),
        }
    }
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        Polynomial {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: C64) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(vec![0; nvars], c);
        p
    }

    /// The coordinate function `z_i` (0-based).
    pub fn coordinate(nvars: usize, i: usize) -> Self {
        assert!(i < nvars, "coordinate index {i} out of range for {nvars} variables");
        let mut e = vec![0; nvars];
        e[i] = 1;
        let mut p = Self::zero(nvars);
        p.add_term(e, C64::new(1.0, 0.0));
        p
    }

    pub fn monomial(exp: Exponent, coef: C64) -> Self {
        let mut p = Self::zero(exp.len());
        p.add_term(exp, coef);
        p
    }

    pub fn from_terms<I>(nvars: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Exponent, C64)>,
    {
        let mut p = Self::zero(nvars);
        for (exp, c) in terms {
            if exp.len() != nvars {
                return Err(Error::Structure(format!(
                    "exponent {exp:?} has {} entries, expected {nvars}",
                    exp.len()
                )));
            }
            p.add_term(exp, c);
        }
        Ok(p)
    }

    fn add_term(&mut self, exp: Exponent, c: C64) {
        debug_assert_eq!(exp.len(), self.nvars);
        let zero = C64::new(0.0, 0.0);
        match self.terms.entry(exp) {
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if *o.get() == zero {
                    o.remove();
                }
            }
            Entry::Vacant(v) => {
                if c != zero {
                    v.insert(c);
                }
            }
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exponent, &C64)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coefficient(&self, exp: &[u32]) -> C64 {
        self.terms.get(exp).copied().unwrap_or_default()
    }

    pub fn constant_term(&self) -> C64 {
        self.coefficient(&vec![0; self.nvars])
    }

    /// Total degree; the zero polynomial has degree 0.
    pub fn degree(&self) -> usize {
        self.terms
            .keys()
            .map(|e| e.iter().sum::<u32>() as usize)
            .max()
            .unwrap_or(0)
    }

    /// Largest exponent of each variable.
    pub fn max_exponents(&self) -> Vec<u32> {
        let mut out = vec![0; self.nvars];
        for e in self.terms.keys() {
            for (o, &k) in out.iter_mut().zip(e) {
                *o = (*o).max(k);
            }
        }
        out
    }

    pub fn is_homogeneous(&self) -> bool {
        let mut degs = self.terms.keys().map(|e| e.iter().sum::<u32>());
        match degs.next() {
            None => true,
            Some(first) => degs.all(|d| d == first),
        }
    }

    pub fn eval(&self, z: &[C64]) -> C64 {
        assert_eq!(z.len(), self.nvars, "point dimension mismatch");
        let maxe = self.max_exponents();
        let powers: Vec<Vec<C64>> = z
            .iter()
            .zip(&maxe)
            .map(|(&zi, &m)| {
                let mut v = Vec::with_capacity(m as usize + 1);
                let mut acc = C64::new(1.0, 0.0);
                v.push(acc);
                for _ in 0..m {
                    acc *= zi;
                    v.push(acc);
                }
                v
            })
            .collect();
        self.terms
            .iter()
            .map(|(e, c)| {
                e.iter()
                    .enumerate()
                    .fold(*c, |acc, (i, &k)| acc * powers[i][k as usize])
            })
            .sum()
    }

    pub fn scale(&self, s: C64) -> Self {
        Polynomial::from_terms(self.nvars, self.terms.iter().map(|(e, c)| (e.clone(), c * s)))
            .expect("same arity")
    }

    /// Degree-`k` homogeneous part.
    pub fn homogeneous_part(&self, k: usize) -> Self {
        Polynomial {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .filter(|(e, _)| e.iter().sum::<u32>() as usize == k)
                .map(|(e, c)| (e.clone(), *c))
                .collect(),
        }
    }

    /// Exact partial derivative in variable `i`.
    pub fn partial(&self, i: usize) -> Self {
        assert!(i < self.nvars);
        let mut out = Self::zero(self.nvars);
        for (e, c) in &self.terms {
            if e[i] > 0 {
                let mut f = e.clone();
                f[i] -= 1;
                out.add_term(f, c * e[i] as f64);
            }
        }
        out
    }

    /// Sum of coefficient moduli; an upper bound for the sup norm on the closed ball.
    pub fn coefficient_l1(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).sum()
    }

    fn check_same(&self, other: &Self) {
        assert_eq!(self.nvars, other.nvars, "polynomial arity mismatch");
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;

    fn add(self, rhs: &Polynomial) -> Polynomial {
        self.check_same(rhs);
        let mut out = self.clone();
        for (e, c) in &rhs.terms {
            out.add_term(e.clone(), *c);
        }
        out
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;

    fn sub(self, rhs: &Polynomial) -> Polynomial {
        self + &(-rhs)
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;

    fn neg(self) -> Polynomial {
        self.scale(C64::new(-1.0, 0.0))
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;

    fn mul(self, rhs: &Polynomial) -> Polynomial {
        self.check_same(rhs);
        let mut out = Polynomial::zero(self.nvars);
        for (ea, ca) in &self.terms {
            for (eb, cb) in &rhs.terms {
                let e: Vec<u32> = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(e, ca * cb);
            }
        }
        out
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (e, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({:.6}{:+.6}i)", c.re, c.im)?;
            for (i, &k) in e.iter().enumerate() {
                match k {
                    0 => {}
                    1 => write!(f, "·z{}", i + 1)?,
                    _ => write!(f, "·z{}^{}", i + 1, k)?,
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c64;

    fn z1z2() -> Polynomial {
        Polynomial::monomial(vec![1, 1], c64(1.0, 0.0))
    }

    #[test]
    fn sum_of_squares_at_three_point_center() {
        let p = &Polynomial::monomial(vec![2, 0], c64(1.0, 0.0))
            + &Polynomial::monomial(vec![0, 2], c64(1.0, 0.0));
        let v = p.eval(&[c64(0.4, 0.0), c64(0.4, 0.0)]);
        assert!((v - c64(8.0 / 25.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn derivatives_are_exact() {
        assert_eq!(z1z2().partial(0), Polynomial::coordinate(2, 1));
        let sq = Polynomial::monomial(vec![2, 0], c64(1.0, 0.0));
        assert!(sq.partial(1).is_zero());
    }

    #[test]
    fn cancellation_drops_terms() {
        let p = &z1z2() - &z1z2();
        assert!(p.is_zero());
        assert_eq!(p.num_terms(), 0);
    }

    #[test]
    fn json_shape() {
        let p = z1z2();
        let s = serde_json::to_string(&p).unwrap();
        assert_eq!(s, r#"{"d":2,"terms":[{"exp":[1,1],"coef":[1.0,0.0]}]}"#);
        let back: Polynomial = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
        assert!(serde_json::from_str::<Polynomial>(r#"{"d":2,"terms":[{"exp":[1],"coef":[1,0]}]}"#).is_err());
    }
}
