//! Truncated multivariate Taylor series with coefficients in a commutative algebra.
//!
//! A [`Series`] over `m` local variables `w` truncated at total degree `K` stores
//! `Σ_{|β|≤K} c_β w^β`. Coefficients are either complex scalars (point jets) or commuting
//! complex matrices (jets of the holomorphic functional calculus at a matrix tuple).
//! Monomials are laid out in graded order so that all monomials of degree `≤ k` form a
//! prefix of the coefficient vector.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, C64};

/// Coefficient algebra for [`Series`]: complex scalars or commuting square matrices.
pub trait Coef: Clone + Send + Sync + 'static {
    fn zero_like(&self) -> Self;
    fn scalar_like(&self, c: C64) -> Self;
    fn add(&self, other: &Self) -> Self;
    fn sub(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn scale(&self, c: C64) -> Self;
    /// `self += a * b`.
    fn mul_acc(&mut self, a: &Self, b: &Self);
    fn recip(&self, context: &str) -> Result<Self>;
    fn is_exact_zero(&self) -> bool;
    /// Largest entry modulus.
    fn max_abs(&self) -> f64;
    /// Modulus for scalars, spectral radius for matrices.
    fn spectral_radius(&self) -> Result<f64>;
    /// Append the raw bit patterns of the entries (used for exact-match cache keys).
    fn push_bits(&self, out: &mut Vec<u64>);
    /// The value itself when the algebra is the scalars.
    fn as_scalar(&self) -> Option<C64>;
}

impl Coef for C64 {
    fn zero_like(&self) -> Self {
        C64::new(0.0, 0.0)
    }
    fn scalar_like(&self, c: C64) -> Self {
        c
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn scale(&self, c: C64) -> Self {
        self * c
    }
    fn mul_acc(&mut self, a: &Self, b: &Self) {
        *self += a * b;
    }
    fn recip(&self, context: &str) -> Result<Self> {
        let r = self.inv();
        if *self == C64::new(0.0, 0.0) || !r.re.is_finite() || !r.im.is_finite() {
            return Err(Error::IllConditioned {
                context: context.to_string(),
                rcond: 0.0,
            });
        }
        Ok(r)
    }
    fn is_exact_zero(&self) -> bool {
        *self == C64::new(0.0, 0.0)
    }
    fn max_abs(&self) -> f64 {
        self.norm()
    }
    fn spectral_radius(&self) -> Result<f64> {
        Ok(self.norm())
    }
    fn push_bits(&self, out: &mut Vec<u64>) {
        out.push(self.re.to_bits());
        out.push(self.im.to_bits());
    }
    fn as_scalar(&self) -> Option<C64> {
        Some(*self)
    }
}

impl Coef for CMat {
    fn zero_like(&self) -> Self {
        CMat::zeros(self.nrows(), self.ncols())
    }
    fn scalar_like(&self, c: C64) -> Self {
        CMat::from_diagonal_element(self.nrows(), self.ncols(), c)
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn scale(&self, c: C64) -> Self {
        self * c
    }
    fn mul_acc(&mut self, a: &Self, b: &Self) {
        self.gemm(C64::new(1.0, 0.0), a, b, C64::new(1.0, 0.0));
    }
    fn recip(&self, context: &str) -> Result<Self> {
        linalg::inverse_checked(self, context)
    }
    fn is_exact_zero(&self) -> bool {
        self.iter().all(|z| *z == C64::new(0.0, 0.0))
    }
    fn max_abs(&self) -> f64 {
        self.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
    fn spectral_radius(&self) -> Result<f64> {
        linalg::spectral_radius(self)
    }
    fn push_bits(&self, out: &mut Vec<u64>) {
        out.push(self.nrows() as u64);
        for z in self.iter() {
            out.push(z.re.to_bits());
            out.push(z.im.to_bits());
        }
    }
    fn as_scalar(&self) -> Option<C64> {
        None
    }
}

/// Graded monomial layout for `nvars` variables up to total degree `order`.
#[derive(Debug)]
pub struct MonomialBasis {
    nvars: usize,
    order: usize,
    exps: Vec<Vec<u32>>,
    degrees: Vec<usize>,
    /// `prefix[k]` = number of monomials of degree ≤ k.
    prefix: Vec<usize>,
    index: HashMap<Vec<u32>, usize>,
    /// `products[a][b]` = index of `exps[a] + exps[b]` for `b < prefix[order - deg a]`.
    products: Vec<Vec<u32>>,
}

fn monomials_of_degree(nvars: usize, degree: usize) -> Vec<Vec<u32>> {
    if nvars == 0 {
        return if degree == 0 { vec![vec![]] } else { vec![] };
    }
    if nvars == 1 {
        return vec![vec![degree as u32]];
    }
    let mut out = Vec::new();
    for first in (0..=degree).rev() {
        for mut rest in monomials_of_degree(nvars - 1, degree - first) {
            rest.insert(0, first as u32);
            out.push(rest);
        }
    }
    out
}

impl MonomialBasis {
    fn build(nvars: usize, order: usize) -> Self {
        let mut exps = Vec::new();
        let mut degrees = Vec::new();
        let mut prefix = Vec::with_capacity(order + 1);
        for k in 0..=order {
            for e in monomials_of_degree(nvars, k) {
                exps.push(e);
                degrees.push(k);
            }
            prefix.push(exps.len());
        }
        let index: HashMap<Vec<u32>, usize> =
            exps.iter().enumerate().map(|(i, e)| (e.clone(), i)).collect();
        let products = (0..exps.len())
            .map(|a| {
                let lim = prefix[order - degrees[a]];
                (0..lim)
                    .map(|b| {
                        let s: Vec<u32> = exps[a].iter().zip(&exps[b]).map(|(x, y)| x + y).collect();
                        index[&s] as u32
                    })
                    .collect()
            })
            .collect();
        MonomialBasis {
            nvars,
            order,
            exps,
            degrees,
            prefix,
            index,
            products,
        }
    }

    /// Shared basis for `(nvars, order)`.
    pub fn get(nvars: usize, order: usize) -> Arc<MonomialBasis> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<MonomialBasis>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        if let Some(b) = cache.lock().unwrap().get(&(nvars, order)) {
            return b.clone();
        }
        let built = Arc::new(MonomialBasis::build(nvars, order));
        cache
            .lock()
            .unwrap()
            .entry((nvars, order))
            .or_insert(built)
            .clone()
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.exps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exps.is_empty()
    }

    pub fn exponent(&self, i: usize) -> &[u32] {
        &self.exps[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.degrees[i]
    }

    pub fn index_of(&self, exp: &[u32]) -> Option<usize> {
        self.index.get(exp).copied()
    }

    /// Number of monomials of degree ≤ k (clamped to the order).
    pub fn count_up_to(&self, k: usize) -> usize {
        self.prefix[k.min(self.order)]
    }

    /// Index of the linear monomial `w_i`.
    pub fn linear_index(&self, i: usize) -> usize {
        1 + i
    }
}

/// Truncated Taylor series.
#[derive(Clone, Debug)]
pub struct Series<R: Coef> {
    basis: Arc<MonomialBasis>,
    coeffs: Vec<R>,
}

impl<R: Coef> Series<R> {
    pub fn constant(basis: Arc<MonomialBasis>, c: R) -> Self {
        let zero = c.zero_like();
        let mut coeffs = vec![zero; basis.len()];
        coeffs[0] = c;
        Series { basis, coeffs }
    }

    /// `base + w_i`.
    pub fn variable(basis: Arc<MonomialBasis>, base: R, i: usize) -> Self {
        assert!(i < basis.nvars());
        let one = base.scalar_like(C64::new(1.0, 0.0));
        let mut s = Series::constant(basis.clone(), base);
        if basis.order() >= 1 {
            s.coeffs[basis.linear_index(i)] = one;
        }
        s
    }

    pub fn from_coeffs(basis: Arc<MonomialBasis>, coeffs: Vec<R>) -> Self {
        assert_eq!(basis.len(), coeffs.len());
        Series { basis, coeffs }
    }

    pub fn basis(&self) -> &Arc<MonomialBasis> {
        &self.basis
    }

    pub fn coeffs(&self) -> &[R] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<R> {
        self.coeffs
    }

    pub fn constant_term(&self) -> &R {
        &self.coeffs[0]
    }

    pub fn constant_like(&self, c: C64) -> Self {
        Series::constant(self.basis.clone(), self.coeffs[0].scalar_like(c))
    }

    /// The series with its constant term removed.
    pub fn nilpotent_part(&self) -> Self {
        let mut s = self.clone();
        s.coeffs[0] = s.coeffs[0].zero_like();
        s
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs[1..].iter().all(|c| c.is_exact_zero())
    }

    fn check(&self, other: &Self) {
        debug_assert!(Arc::ptr_eq(&self.basis, &other.basis) || self.basis.len() == other.basis.len());
    }

    pub fn add(&self, other: &Self) -> Self {
        self.check(other);
        Series {
            basis: self.basis.clone(),
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a.add(b)).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.check(other);
        Series {
            basis: self.basis.clone(),
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a.sub(b)).collect(),
        }
    }

    pub fn scale(&self, c: C64) -> Self {
        Series {
            basis: self.basis.clone(),
            coeffs: self.coeffs.iter().map(|a| a.scale(c)).collect(),
        }
    }

    pub fn add_scalar(&self, c: C64) -> Self {
        let mut s = self.clone();
        s.coeffs[0] = s.coeffs[0].add(&s.coeffs[0].scalar_like(c));
        s
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.check(other);
        let b = &self.basis;
        let mut out: Vec<R> = vec![self.coeffs[0].zero_like(); b.len()];
        for (a, ca) in self.coeffs.iter().enumerate() {
            if ca.is_exact_zero() {
                continue;
            }
            for (j, &t) in b.products[a].iter().enumerate() {
                let cb = &other.coeffs[j];
                if cb.is_exact_zero() {
                    continue;
                }
                out[t as usize].mul_acc(ca, cb);
            }
        }
        Series {
            basis: b.clone(),
            coeffs: out,
        }
    }

    pub fn powi(&self, k: u32) -> Self {
        let mut acc = self.constant_like(C64::new(1.0, 0.0));
        for _ in 0..k {
            acc = acc.mul(self);
        }
        acc
    }

    /// Multiplicative inverse; requires an invertible constant term.
    pub fn recip(&self, context: &str) -> Result<Self> {
        let inv0 = self.coeffs[0].recip(context)?;
        let inv0_series = Series::constant(self.basis.clone(), inv0.clone());
        if self.basis.order() == 0 {
            return Ok(inv0_series);
        }
        // 1/(x0 + N) = x0⁻¹ Σ_k (−x0⁻¹ N)^k, finite because N is nilpotent under truncation.
        let m = self.nilpotent_part().mul(&inv0_series).scale(C64::new(-1.0, 0.0));
        let one = self.constant_like(C64::new(1.0, 0.0));
        let mut acc = one.clone();
        for _ in 0..self.basis.order() {
            acc = one.add(&m.mul(&acc));
        }
        Ok(acc.mul(&inv0_series))
    }

    /// Homogeneous degree-`k` coefficient block.
    pub fn degree_block(&self, k: usize) -> impl Iterator<Item = (&[u32], &R)> {
        let start = if k == 0 { 0 } else { self.basis.count_up_to(k - 1) };
        let end = self.basis.count_up_to(k);
        (start..end).map(move |i| (self.basis.exponent(i), &self.coeffs[i]))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a.sub(b).max_abs())
            .fold(0.0, f64::max)
    }
}

/// `constant + Σ_k coeffs[k]·xs[k]`; `xs` must be non-empty.
pub fn linear_combination<R: Coef>(coeffs: &[C64], xs: &[Series<R>], constant: C64) -> Series<R> {
    let mut acc = xs[0].constant_like(constant);
    for (c, x) in coeffs.iter().zip(xs) {
        if *c != C64::new(0.0, 0.0) {
            acc = acc.add(&x.scale(*c));
        }
    }
    acc
}

/// Substitute nilpotent series into a Taylor polynomial: `Σ_β coeff_β · N^β`.
///
/// `taylor` lives on a basis with `nil.len()` variables; the result lives on the basis of
/// the `nil` entries. Monomials whose degree exceeds the target order vanish.
pub fn substitute_nilpotent<R: Coef>(taylor: &[R], taylor_basis: &MonomialBasis, nil: &[Series<R>], target: &Arc<MonomialBasis>) -> Series<R> {
    assert_eq!(taylor_basis.nvars(), nil.len());
    let proto = taylor[0].zero_like();
    let k = target.order().min(taylor_basis.order());
    let mut out = Series::constant(target.clone(), taylor[0].clone());
    if k == 0 {
        return out;
    }
    // powers[j][e] = N_j^e
    let mut powers: Vec<Vec<Series<R>>> = Vec::with_capacity(nil.len());
    for n in nil {
        let mut row = vec![Series::constant(target.clone(), proto.scalar_like(C64::new(1.0, 0.0)))];
        for e in 1..=k {
            let next = row[e - 1].mul(n);
            row.push(next);
        }
        powers.push(row);
    }
    for idx in 1..taylor_basis.count_up_to(k) {
        let c = &taylor[idx];
        if c.is_exact_zero() {
            continue;
        }
        let exp = taylor_basis.exponent(idx);
        let mut term: Option<Series<R>> = None;
        for (j, &e) in exp.iter().enumerate() {
            if e == 0 {
                continue;
            }
            let p = &powers[j][e as usize];
            term = Some(match term {
                None => p.clone(),
                Some(t) => t.mul(p),
            });
        }
        let term = term.expect("non-constant monomial");
        let scaled = Series {
            basis: target.clone(),
            coeffs: term.coeffs.iter().map(|x| c.mul(x)).collect(),
        };
        out = out.add(&scaled);
    }
    out
}
