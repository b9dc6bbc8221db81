//! Evaluation of expression trees over truncated Taylor series.
//!
//! Plain points and matrix tuples are order-zero series, so one evaluator serves point values,
//! the holomorphic functional calculus at commuting tuples, and jets of either. Leibenson
//! components and ray integrals are evaluated from jets of their integrand at the Gauss–Legendre
//! nodes `t·X₀` of the base point, then composed with the nilpotent part of the input; results
//! are memoized per (integrand, base point, order), so all `d` components of one split share
//! the integrand's jets.

use std::cell::{Cell, RefCell};
use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use gauss_quad::GaussLegendre;
use serde::{Deserialize, Serialize};

use super::{Expr, FunctionExpr};
use crate::error::{Error, Result};
use crate::linalg::{self, c64, CMat, C64};
use crate::poly::Polynomial;
use crate::series::{linear_combination, substitute_nilpotent, Coef, MonomialBasis, Series};
use crate::tuple::{self, MatrixTuple};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalOptions {
    /// Gauss–Legendre nodes on `[0, 1]` for ray integrals.
    pub quadrature_order: usize,
    /// Doubling stops here; exceeding it is a convergence error.
    pub max_quadrature_order: usize,
    /// Accepted change between successive doublings, relative to `1 + max|coefficient|`.
    pub quadrature_tol: f64,
    /// Double the order of the outermost ray integrals until the result settles.
    pub check_quadrature: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            quadrature_order: 32,
            max_quadrature_order: 128,
            quadrature_tol: 1e-8,
            check_quadrature: true,
        }
    }
}

/// Gauss–Legendre nodes and weights mapped to `[0, 1]`.
fn gauss_nodes(q: usize) -> Result<Arc<Vec<(f64, f64)>>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Vec<(f64, f64)>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(v) = cache.lock().unwrap().get(&q) {
        return Ok(v.clone());
    }
    let rule = GaussLegendre::new(q).map_err(|e| Error::Argument(format!("quadrature order {q}: {e}")))?;
    let nodes: Vec<(f64, f64)> = rule
        .as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w))
        .collect();
    let nodes = Arc::new(nodes);
    cache.lock().unwrap().insert(q, nodes.clone());
    Ok(nodes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum RayKind {
    /// All `d` Leibenson components of the integrand.
    Gleason,
    /// `∫ t^p F(tz) dt`.
    Power(u32),
}

#[derive(PartialEq, Eq, Hash)]
struct CacheKey {
    integrand: usize,
    kind: RayKind,
    order: usize,
    bits: Vec<u64>,
}

struct CacheEntry<R> {
    // Holding the integrand keeps its address from being reused while the key is live.
    _keep: Expr,
    tables: Arc<Vec<Vec<R>>>,
}

/// Expression evaluator over coefficient algebra `R` with a ray-integral cache.
///
/// The cache is only valid for the lifetime of the evaluator; create one per batch of
/// related evaluations (for example one Schur construction).
pub struct Evaluator<R: Coef> {
    opts: EvalOptions,
    cache: RefCell<HashMap<CacheKey, CacheEntry<R>>>,
    depth: Cell<usize>,
    jets: Cell<usize>,
}

struct DepthGuard<'a>(&'a Cell<usize>);

impl Drop for DepthGuard<'_> {
    fn drop(&mut self) {
        self.0.set(self.0.get() - 1);
    }
}

impl<R: Coef> Evaluator<R> {
    pub fn new(opts: EvalOptions) -> Self {
        Evaluator {
            opts,
            cache: RefCell::new(HashMap::new()),
            depth: Cell::new(0),
            jets: Cell::new(0),
        }
    }

    pub fn options(&self) -> &EvalOptions {
        &self.opts
    }

    /// Number of integrand jets computed so far.
    pub fn jet_count(&self) -> usize {
        self.jets.get()
    }

    pub fn cache_len(&self) -> usize {
        self.cache.borrow().len()
    }

    pub fn eval_scalar(&self, e: &Expr, x: &[Series<R>]) -> Result<Series<R>> {
        if x.len() != e.nvars() {
            return Err(Error::Structure(format!(
                "{} takes {} variables, got {}",
                e.label(),
                e.nvars(),
                x.len()
            )));
        }
        if e.is_map() {
            if e.out_dim() != 1 {
                return Err(Error::Structure(format!("{} is vector-valued", e.label())));
            }
            return Ok(self.eval_vector(e, x)?.swap_remove(0));
        }
        match &**e {
            FunctionExpr::Poly(p) => Ok(eval_poly_series(p, x)),
            FunctionExpr::Mobius { c, arg } => {
                let w = self.eval_scalar(arg, x)?;
                check_disk(e, &w)?;
                let num = w.constant_like(*c).sub(&w);
                let den = w.scale(-c.conj()).add_scalar(c64(1.0, 0.0));
                Ok(num.mul(&den.recip(&e.label())?))
            }
            FunctionExpr::MobiusDerivative { c, order, arg } => {
                let w = self.eval_scalar(arg, x)?;
                check_disk(e, &w)?;
                let den = w.scale(-c.conj()).add_scalar(c64(1.0, 0.0));
                let factorial: f64 = (1..=*order).map(f64::from).product();
                let factor = c64(c.norm_sqr() - 1.0, 0.0) * factorial * c.conj().powu(order - 1);
                Ok(den.recip(&e.label())?.powi(order + 1).scale(factor))
            }
            FunctionExpr::Sum { terms } => {
                let mut acc = self.eval_scalar(&terms[0], x)?;
                for t in &terms[1..] {
                    acc = acc.add(&self.eval_scalar(t, x)?);
                }
                Ok(acc)
            }
            FunctionExpr::Product { factors } => {
                let mut acc = self.eval_scalar(&factors[0], x)?;
                for f in &factors[1..] {
                    acc = acc.mul(&self.eval_scalar(f, x)?);
                }
                Ok(acc)
            }
            FunctionExpr::Row { components } => {
                let mut acc = x[0].constant_like(c64(0.0, 0.0));
                for (xi, u) in x.iter().zip(components) {
                    acc = acc.add(&xi.mul(&self.eval_scalar(u, x)?));
                }
                Ok(acc)
            }
            FunctionExpr::Compose { outer, inner } => {
                let y = self.eval_vector(inner, x)?;
                self.eval_scalar(outer, &y)
            }
            FunctionExpr::Gleason { inner, index } => {
                let tables = self.ray_tables(inner, RayKind::Gleason, x, e)?;
                Ok(assemble(&tables[*index], x))
            }
            FunctionExpr::RayIntegral { integrand, power } => {
                let tables = self.ray_tables(integrand, RayKind::Power(*power), x, e)?;
                Ok(assemble(&tables[0], x))
            }
            FunctionExpr::InvLinearPower { b, power } => {
                let coeffs: Vec<C64> = b.iter().map(|z| -z.conj()).collect();
                let den = linear_combination(&coeffs, x, c64(1.0, 0.0));
                Ok(den.recip(&e.label())?.powi(*power))
            }
            FunctionExpr::Automorphism(_) | FunctionExpr::Embed { .. } | FunctionExpr::Project { .. } => {
                unreachable!("maps are handled above")
            }
        }
    }

    pub fn eval_vector(&self, e: &Expr, x: &[Series<R>]) -> Result<Vec<Series<R>>> {
        if x.len() != e.nvars() {
            return Err(Error::Structure(format!(
                "{} takes {} variables, got {}",
                e.label(),
                e.nvars(),
                x.len()
            )));
        }
        match &**e {
            FunctionExpr::Automorphism(a) => a.apply_series(x),
            FunctionExpr::Embed { to, .. } => {
                let mut out = x.to_vec();
                out.resize(*to, x[0].constant_like(c64(0.0, 0.0)));
                Ok(out)
            }
            FunctionExpr::Project { to, .. } => Ok(x[..*to].to_vec()),
            FunctionExpr::Compose { outer, inner } if outer.is_map() => {
                let y = self.eval_vector(inner, x)?;
                self.eval_vector(outer, &y)
            }
            _ => Ok(vec![self.eval_scalar(e, x)?]),
        }
    }

    /// Integrated coefficient tables for a ray integral of `integrand` at the base point of `x`.
    fn ray_tables(&self, integrand: &Expr, kind: RayKind, x: &[Series<R>], node: &FunctionExpr) -> Result<Arc<Vec<Vec<R>>>> {
        let order = x[0].basis().order();
        let base: Vec<R> = x.iter().map(|s| s.constant_term().clone()).collect();
        let scalars: Option<Vec<C64>> = base.iter().map(|b| b.as_scalar()).collect();
        if let Some(p) = scalars {
            let norm = linalg::norm2(&p);
            if !(norm < 1.0) {
                return Err(Error::domain(node.label(), format!("base point of norm {norm} outside the open ball")));
            }
        }
        let mut bits = Vec::new();
        for b in &base {
            b.push_bits(&mut bits);
        }
        let key = CacheKey {
            integrand: Arc::as_ptr(integrand) as usize,
            kind,
            order,
            bits,
        };
        if let Some(hit) = self.cache.borrow().get(&key) {
            return Ok(hit.tables.clone());
        }

        let depth = self.depth.get();
        self.depth.set(depth + 1);
        let _guard = DepthGuard(&self.depth);
        let q0 = self.opts.quadrature_order;
        let tables = if depth == 0 && self.opts.check_quadrature && 2 * q0 <= self.opts.max_quadrature_order {
            let mut q = q0;
            let mut prev = self.integrate(integrand, kind, &base, order, q)?;
            let mut last_diff;
            loop {
                let next = self.integrate(integrand, kind, &base, order, 2 * q)?;
                let (diff, scale) = table_diff(&prev, &next);
                if diff <= self.opts.quadrature_tol * (1.0 + scale) {
                    break next;
                }
                last_diff = diff;
                prev = next;
                q *= 2;
                if 2 * q > self.opts.max_quadrature_order {
                    return Err(Error::Convergence {
                        context: format!("{} quadrature doubling up to order {q}", node.label()),
                        achieved: last_diff,
                    });
                }
            }
        } else {
            self.integrate(integrand, kind, &base, order, q0)?
        };
        let tables = Arc::new(tables);
        self.cache.borrow_mut().insert(
            key,
            CacheEntry {
                _keep: integrand.clone(),
                tables: tables.clone(),
            },
        );
        Ok(tables)
    }

    fn integrate(&self, integrand: &Expr, kind: RayKind, base: &[R], order: usize, q: usize) -> Result<Vec<Vec<R>>> {
        let d = base.len();
        let jet_order = match kind {
            RayKind::Gleason => order + 1,
            RayKind::Power(_) => order,
        };
        let jb = MonomialBasis::get(d, jet_order);
        let tb = MonomialBasis::get(d, order);
        let ntables = match kind {
            RayKind::Gleason => d,
            RayKind::Power(_) => 1,
        };
        // shift[i][β] = index in the jet basis of β + e_i (or of β itself for plain powers).
        let shift: Vec<Vec<usize>> = (0..ntables)
            .map(|i| {
                (0..tb.len())
                    .map(|b| {
                        let mut e = tb.exponent(b).to_vec();
                        if kind == RayKind::Gleason {
                            e[i] += 1;
                        }
                        jb.index_of(&e).expect("jet basis covers the shifted exponent")
                    })
                    .collect()
            })
            .collect();
        let zero = base[0].zero_like();
        let mut tables = vec![vec![zero; tb.len()]; ntables];
        for &(t, w) in gauss_nodes(q)?.iter() {
            let inputs: Vec<Series<R>> = base
                .iter()
                .enumerate()
                .map(|(k, b)| Series::variable(jb.clone(), b.scale(c64(t, 0.0)), k))
                .collect();
            let jet = self.eval_scalar(integrand, &inputs)?;
            self.jets.set(self.jets.get() + 1);
            let a = jet.coeffs();
            for (i, table) in tables.iter_mut().enumerate() {
                for (b, slot) in table.iter_mut().enumerate() {
                    let deg = tb.degree(b) as i32;
                    let weight = match kind {
                        RayKind::Gleason => w * t.powi(deg) * f64::from(tb.exponent(b)[i] + 1),
                        RayKind::Power(p) => w * t.powi(deg + p as i32),
                    };
                    let v = &a[shift[i][b]];
                    *slot = slot.add(&v.scale(c64(weight, 0.0)));
                }
            }
        }
        Ok(tables)
    }

    /// Scalar value at a point.
    pub fn eval_point(&self, e: &Expr, z: &[C64]) -> Result<C64>
    where
        R: From<C64>,
    {
        let basis = MonomialBasis::get(0, 0);
        let inputs: Vec<Series<R>> = z.iter().map(|&v| Series::constant(basis.clone(), R::from(v))).collect();
        Ok(self
            .eval_scalar(e, &inputs)?
            .constant_term()
            .as_scalar()
            .expect("scalar evaluator"))
    }
}

impl Evaluator<CMat> {
    /// `e(T)`; the joint spectrum is checked against the open ball when the tree needs it.
    pub fn eval_tuple(&self, e: &Expr, t: &MatrixTuple) -> Result<CMat> {
        if e.needs_ball() {
            tuple::require_spectrum_in_ball(t, 0.0)?;
        }
        self.eval_tuple_unchecked(e, t)
    }

    pub fn eval_tuple_unchecked(&self, e: &Expr, t: &MatrixTuple) -> Result<CMat> {
        let basis = MonomialBasis::get(0, 0);
        let inputs: Vec<Series<CMat>> = t.entries().iter().map(|m| Series::constant(basis.clone(), m.clone())).collect();
        Ok(self.eval_scalar(e, &inputs)?.constant_term().clone())
    }
}

fn table_diff<R: Coef>(a: &[Vec<R>], b: &[Vec<R>]) -> (f64, f64) {
    let mut diff = 0.0f64;
    let mut scale = 0.0f64;
    for (ta, tb) in a.iter().zip(b) {
        for (x, y) in ta.iter().zip(tb) {
            diff = diff.max(x.sub(y).max_abs());
            scale = scale.max(y.max_abs());
        }
    }
    (diff, scale)
}

/// `Σ_β table_β N^β` with `N` the nilpotent part of the input.
fn assemble<R: Coef>(table: &[R], x: &[Series<R>]) -> Series<R> {
    let target = x[0].basis().clone();
    if target.order() == 0 {
        return Series::constant(target, table[0].clone());
    }
    let nil: Vec<Series<R>> = x.iter().map(|s| s.nilpotent_part()).collect();
    let tb = MonomialBasis::get(x.len(), target.order());
    substitute_nilpotent(table, &tb, &nil, &target)
}

fn check_disk<R: Coef>(node: &FunctionExpr, w: &Series<R>) -> Result<()> {
    let r = w.constant_term().spectral_radius()?;
    if !(r < 1.0) {
        return Err(Error::domain(
            node.label(),
            format!("argument of modulus {r:.6} is outside the open unit disk"),
        ));
    }
    Ok(())
}

fn eval_poly_series<R: Coef>(p: &Polynomial, x: &[Series<R>]) -> Series<R> {
    let maxe = p.max_exponents();
    let powers: Vec<Vec<Series<R>>> = x
        .iter()
        .zip(&maxe)
        .map(|(xi, &m)| {
            let mut v = Vec::with_capacity(m as usize + 1);
            v.push(xi.constant_like(c64(1.0, 0.0)));
            for k in 0..m as usize {
                let next = v[k].mul(xi);
                v.push(next);
            }
            v
        })
        .collect();
    let mut acc = x
        .first()
        .map(|s| s.constant_like(c64(0.0, 0.0)))
        .expect("polynomials with zero variables are not evaluated");
    for (exp, c) in p.terms() {
        let mut term: Option<Series<R>> = None;
        for (i, &k) in exp.iter().enumerate() {
            if k == 0 {
                continue;
            }
            let f = &powers[i][k as usize];
            term = Some(match term {
                None => f.clone(),
                Some(t) => t.mul(f),
            });
        }
        acc = match term {
            None => acc.add_scalar(*c),
            Some(t) => acc.add(&t.scale(*c)),
        };
    }
    acc
}

/// Scalar value of `e` at the point `z`.
pub fn eval_expr_point(e: &Expr, z: &[C64]) -> Result<C64> {
    Evaluator::<C64>::new(EvalOptions::default()).eval_point(e, z)
}

/// Value of a possibly vector-valued expression at `z`.
pub fn eval_expr_point_vector(e: &Expr, z: &[C64]) -> Result<Vec<C64>> {
    let basis = MonomialBasis::get(0, 0);
    let inputs: Vec<Series<C64>> = z.iter().map(|&v| Series::constant(basis.clone(), v)).collect();
    Ok(Evaluator::new(EvalOptions::default())
        .eval_vector(e, &inputs)?
        .into_iter()
        .map(|s| *s.constant_term())
        .collect())
}

/// `e(T)` by the holomorphic functional calculus.
pub fn eval_expr_tuple(e: &Expr, t: &MatrixTuple) -> Result<CMat> {
    if !e.is_scalar() {
        return Err(Error::Structure(format!("{} is vector-valued", e.label())));
    }
    Evaluator::<CMat>::new(EvalOptions::default()).eval_tuple(e, t)
}

/// Taylor coefficients of a scalar expression at the origin up to total degree `order`.
pub fn taylor_coefficients(e: &Expr, order: usize) -> Result<Series<C64>> {
    let d = e.nvars();
    let basis = MonomialBasis::get(d, order);
    let inputs: Vec<Series<C64>> = (0..d).map(|k| Series::variable(basis.clone(), c64(0.0, 0.0), k)).collect();
    Evaluator::new(EvalOptions::default()).eval_scalar(e, &inputs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ball::BallAutomorphism;
    use crate::expr::disk_involution;
    use crate::par::rng_from_seed;
    use crate::tuple::{eval_poly_tuple, random_ball_point, random_commuting_tuple, TupleKind};

    fn sum_of_squares() -> Expr {
        let p = &Polynomial::monomial(vec![2, 0], c64(1.0, 0.0)) + &Polynomial::monomial(vec![0, 2], c64(1.0, 0.0));
        FunctionExpr::poly(p)
    }

    #[test]
    fn poly_at_three_point_center() {
        let v = eval_expr_point(&sum_of_squares(), &[c64(0.4, 0.0), c64(0.4, 0.0)]).unwrap();
        assert!((v - c64(0.32, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn mobius_vanishes_at_parameter() {
        let c = c64(0.3, 0.2);
        let e = FunctionExpr::mobius(c, FunctionExpr::coordinate(1, 0)).unwrap();
        assert!(eval_expr_point(&e, &[c]).unwrap().norm() < 1e-16);
        let twice = FunctionExpr::mobius(c, e).unwrap();
        let mut rng = rng_from_seed(1);
        for _ in 0..100 {
            let w = random_ball_point(&mut rng, 1, 0.99);
            assert!((eval_expr_point(&twice, &w).unwrap() - w[0]).norm() < 1e-13);
        }
    }

    #[test]
    fn mobius_outside_disk_is_domain_error() {
        let e = FunctionExpr::mobius(c64(0.1, 0.0), FunctionExpr::coordinate(1, 0)).unwrap();
        assert!(matches!(eval_expr_point(&e, &[c64(1.2, 0.0)]), Err(Error::Domain { .. })));
    }

    #[test]
    fn tuple_matches_poly_calculus() {
        let t = random_commuting_tuple(3, 2, 4, TupleKind::PolynomialInOne);
        let direct = eval_poly_tuple(&Polynomial::monomial(vec![1, 1], c64(1.0, 0.0)), &t).unwrap();
        let via = eval_expr_tuple(&FunctionExpr::poly(Polynomial::monomial(vec![1, 1], c64(1.0, 0.0))), &t).unwrap();
        assert!(linalg::frobenius(&(direct - via)) < 1e-15);
    }

    #[test]
    fn mobius_of_scalar_matrix() {
        let c = c64(0.2, -0.4);
        let lam = c64(0.1, 0.5);
        let t = MatrixTuple::new(vec![CMat::identity(2, 2) * lam]).unwrap();
        let e = FunctionExpr::mobius(c, FunctionExpr::coordinate(1, 0)).unwrap();
        let v = eval_expr_tuple(&e, &t).unwrap();
        let expect = CMat::identity(2, 2) * disk_involution(c, lam);
        assert!(linalg::frobenius(&(v - expect)) < 1e-15);
    }

    #[test]
    fn one_by_one_tuple_equals_point() {
        let theta = BallAutomorphism::involution_at(&[c64(0.2, 0.1), c64(-0.3, 0.0)]).unwrap();
        let e = FunctionExpr::compose(
            FunctionExpr::mobius(c64(0.1, 0.1), sum_of_squares()).unwrap(),
            FunctionExpr::automorphism(theta),
        )
        .unwrap();
        let z = [c64(0.3, -0.2), c64(0.1, 0.4)];
        let t = MatrixTuple::diagonal(&[z.to_vec()]).unwrap();
        let a = eval_expr_point(&e, &z).unwrap();
        let b = eval_expr_tuple(&e, &t).unwrap()[(0, 0)];
        assert!((a - b).norm() < 1e-12);
    }

    #[test]
    fn gleason_of_polynomial_is_leibenson() {
        // z1 z2 splits as (z2/2, z1/2).
        let h = FunctionExpr::poly(Polynomial::monomial(vec![1, 1], c64(1.0, 0.0)));
        let z = [c64(0.3, 0.1), c64(-0.2, 0.5)];
        let h0 = eval_expr_point(&FunctionExpr::gleason(h.clone(), 0).unwrap(), &z).unwrap();
        let h1 = eval_expr_point(&FunctionExpr::gleason(h, 1).unwrap(), &z).unwrap();
        assert!((h0 - z[1] / 2.0).norm() < 1e-14);
        assert!((h1 - z[0] / 2.0).norm() < 1e-14);
    }

    #[test]
    fn gleason_reconstructs_rational_function() {
        let c = c64(0.3, 0.1);
        let p = &Polynomial::monomial(vec![2, 0], c64(0.5, 0.0)) + &Polynomial::monomial(vec![0, 1], c64(0.3, 0.2));
        let f = FunctionExpr::poly(&p + &Polynomial::constant(2, c));
        let h = FunctionExpr::mobius(c, f).unwrap();
        let comps: Vec<Expr> = (0..2).map(|i| FunctionExpr::gleason(h.clone(), i).unwrap()).collect();
        let ev = Evaluator::<C64>::new(EvalOptions::default());
        let mut rng = rng_from_seed(8);
        for _ in 0..100 {
            let z = random_ball_point(&mut rng, 2, 0.95);
            let lhs = ev.eval_point(&h, &z).unwrap();
            let rhs: C64 = (0..2).map(|i| z[i] * ev.eval_point(&comps[i], &z).unwrap()).sum();
            assert!((lhs - rhs).norm() < 1e-8, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn gleason_identity_at_tuples() {
        let c = c64(-0.2, 0.1);
        let f = FunctionExpr::poly(&Polynomial::monomial(vec![1, 1], c64(0.7, 0.0)) + &Polynomial::constant(2, c));
        let h = FunctionExpr::mobius(c, f).unwrap();
        let t = random_commuting_tuple(3, 2, 21, TupleKind::NilpotentUpper).scaled(0.9);
        let ev = Evaluator::<CMat>::new(EvalOptions::default());
        let lhs = ev.eval_tuple(&h, &t).unwrap();
        let mut rhs = CMat::zeros(3, 3);
        for i in 0..2 {
            rhs += t.entry(i) * ev.eval_tuple(&FunctionExpr::gleason(h.clone(), i).unwrap(), &t).unwrap();
        }
        assert!(linalg::frobenius(&(lhs - rhs)) < 1e-10);
    }

    #[test]
    fn nested_gleason_jets_are_shared() {
        let h = sum_of_squares();
        let inner = FunctionExpr::gleason(h, 0).unwrap();
        let outer0 = FunctionExpr::gleason(inner.clone(), 0).unwrap();
        let outer1 = FunctionExpr::gleason(inner, 1).unwrap();
        let ev = Evaluator::<C64>::new(EvalOptions {
            check_quadrature: false,
            ..EvalOptions::default()
        });
        let z = [c64(0.2, 0.0), c64(0.1, 0.3)];
        ev.eval_point(&outer0, &z).unwrap();
        let after_first = ev.jet_count();
        ev.eval_point(&outer1, &z).unwrap();
        assert_eq!(ev.jet_count(), after_first);
    }

    #[test]
    fn taylor_of_geometric_series() {
        let e = FunctionExpr::inv_linear_power(vec![c64(1.0, 0.0), c64(0.0, 0.0)], 1).unwrap();
        let s = taylor_coefficients(&e, 5).unwrap();
        for (exp, c) in (0..=5).flat_map(|k| s.degree_block(k).map(|(e, c)| (e.to_vec(), *c)).collect::<Vec<_>>()) {
            let expect = if exp[1] == 0 { 1.0 } else { 0.0 };
            assert!((c - c64(expect, 0.0)).norm() < 1e-15);
        }
    }
}
