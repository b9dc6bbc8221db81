//! Symbolic partial derivatives of expression trees.

use super::{Expr, FunctionExpr};
use crate::error::{Error, Result};
use crate::linalg::{c64, CMat, C64};
use crate::poly::Polynomial;

/// Scalar coordinate functions of an expression: one per output.
pub fn components(e: &Expr) -> Result<Vec<Expr>> {
    let m = e.nvars();
    match &**e {
        FunctionExpr::Automorphism(a) => {
            // (U φ_b(z))_j = (Σ_k U_jk b_k − Σ_m (U A)_jm z_m) · (1 − ⟨z,b⟩)^{−1}
            let d = a.dim();
            let b = nalgebra::DVector::from_column_slice(a.base());
            let ub = a.unitary() * &b;
            let ua = a.unitary() * linear_part(a.base());
            let den = FunctionExpr::inv_linear_power(a.base().to_vec(), 1)?;
            (0..d)
                .map(|j| {
                    let mut terms: Vec<(Vec<u32>, C64)> = vec![(vec![0; d], ub[j])];
                    for k in 0..d {
                        let mut exp = vec![0; d];
                        exp[k] = 1;
                        terms.push((exp, -ua[(j, k)]));
                    }
                    let num = FunctionExpr::poly(Polynomial::from_terms(d, terms)?);
                    FunctionExpr::product(vec![num, den.clone()])
                })
                .collect()
        }
        FunctionExpr::Embed { from, to } => Ok((0..*to)
            .map(|j| {
                if j < *from {
                    FunctionExpr::coordinate(*from, j)
                } else {
                    FunctionExpr::poly(Polynomial::zero(*from))
                }
            })
            .collect()),
        FunctionExpr::Project { from, to } => Ok((0..*to).map(|j| FunctionExpr::coordinate(*from, j)).collect()),
        FunctionExpr::Compose { outer, inner } if outer.is_map() => components(outer)?
            .into_iter()
            .map(|c| FunctionExpr::compose(c, inner.clone()))
            .collect(),
        _ => {
            debug_assert!(m > 0);
            Ok(vec![e.clone()])
        }
    }
}

fn linear_part(b: &[C64]) -> CMat {
    let d = b.len();
    let nb2: f64 = b.iter().map(|z| z.norm_sqr()).sum();
    let s = (1.0 - nb2).sqrt();
    let mut a = CMat::identity(d, d) * c64(s, 0.0);
    if nb2 > 0.0 {
        for i in 0..d {
            for j in 0..d {
                a[(i, j)] += b[i] * b[j].conj() * ((1.0 - s) / nb2);
            }
        }
    }
    a
}

fn zero(m: usize) -> Expr {
    FunctionExpr::poly(Polynomial::zero(m))
}

/// `f·g` with zero factors folded away.
fn times(f: Expr, g: Expr) -> Result<Expr> {
    if f.is_zero_poly() || g.is_zero_poly() {
        return Ok(zero(f.nvars()));
    }
    FunctionExpr::product(vec![f, g])
}

/// Sum with zero terms dropped.
fn plus(terms: Vec<Expr>, m: usize) -> Result<Expr> {
    let kept: Vec<Expr> = terms.into_iter().filter(|t| !t.is_zero_poly()).collect();
    if kept.is_empty() {
        return Ok(zero(m));
    }
    FunctionExpr::sum(kept)
}

/// `∂e/∂z_j` as a new tree (exact for polynomials, chain and product rules elsewhere).
pub fn partial_derivative(e: &Expr, j: usize) -> Result<Expr> {
    let m = e.nvars();
    if j >= m {
        return Err(Error::Structure(format!("derivative index {j} out of range for {m} variables")));
    }
    if e.is_map() {
        return Err(Error::Structure(format!("{} is vector-valued", e.label())));
    }
    match &**e {
        FunctionExpr::Poly(p) => Ok(FunctionExpr::poly(p.partial(j))),
        FunctionExpr::Mobius { c, arg } => {
            let outer = FunctionExpr::mobius_derivative(*c, 1, arg.clone())?;
            times(outer, partial_derivative(arg, j)?)
        }
        FunctionExpr::MobiusDerivative { c, order, arg } => {
            let outer = FunctionExpr::mobius_derivative(*c, order + 1, arg.clone())?;
            times(outer, partial_derivative(arg, j)?)
        }
        FunctionExpr::Sum { terms } => plus(
            terms.iter().map(|t| partial_derivative(t, j)).collect::<Result<_>>()?,
            m,
        ),
        FunctionExpr::Product { factors } => {
            let mut terms = Vec::with_capacity(factors.len());
            for (i, f) in factors.iter().enumerate() {
                let df = partial_derivative(f, j)?;
                if df.is_zero_poly() {
                    continue;
                }
                let mut parts = vec![df];
                parts.extend(factors.iter().enumerate().filter(|&(k, _)| k != i).map(|(_, g)| g.clone()));
                terms.push(FunctionExpr::product(parts)?);
            }
            plus(terms, m)
        }
        FunctionExpr::Row { components } => {
            // ∂_j Σ z_i u_i = u_j + Σ z_i ∂_j u_i
            let du: Vec<Expr> = components.iter().map(|u| partial_derivative(u, j)).collect::<Result<_>>()?;
            let rest = if du.iter().all(|d| d.is_zero_poly()) {
                zero(m)
            } else {
                FunctionExpr::row(du)?
            };
            plus(vec![components[j].clone(), rest], m)
        }
        FunctionExpr::Compose { outer, inner } => {
            let parts = components(inner)?;
            let mut terms = Vec::with_capacity(parts.len());
            for (k, part) in parts.iter().enumerate() {
                let dpart = partial_derivative(part, j)?;
                if dpart.is_zero_poly() {
                    continue;
                }
                let douter = partial_derivative(outer, k)?;
                if douter.is_zero_poly() {
                    continue;
                }
                terms.push(times(FunctionExpr::compose(douter, inner.clone())?, dpart)?);
            }
            plus(terms, m)
        }
        FunctionExpr::Gleason { inner, index } => {
            let second = partial_derivative(&partial_derivative(inner, *index)?, j)?;
            if second.is_zero_poly() {
                return Ok(zero(m));
            }
            FunctionExpr::ray_integral(second, 1)
        }
        FunctionExpr::RayIntegral { integrand, power } => {
            let d = partial_derivative(integrand, j)?;
            if d.is_zero_poly() {
                return Ok(zero(m));
            }
            FunctionExpr::ray_integral(d, power + 1)
        }
        FunctionExpr::InvLinearPower { b, power } => {
            if *power == 0 || b[j] == c64(0.0, 0.0) {
                return Ok(zero(m));
            }
            let factor = b[j].conj() * f64::from(*power);
            FunctionExpr::scaled(factor, FunctionExpr::inv_linear_power(b.clone(), power + 1)?)
        }
        FunctionExpr::Automorphism(_) | FunctionExpr::Embed { .. } | FunctionExpr::Project { .. } => {
            unreachable!("maps are rejected above")
        }
    }
}
