//! Gleason (Leibenson) decompositions `h = Σ z_i h_i` of functions vanishing at the origin.

use crate::error::{Error, Result};
use crate::expr::{EvalOptions, Evaluator, Expr, FunctionExpr};
use crate::linalg::{c64, CMat, C64};
use crate::poly::Polynomial;
use crate::tuple::MatrixTuple;

/// Largest `|h(0)|` accepted by the numeric split.
pub const ORIGIN_TOLERANCE: f64 = 1e-10;

/// Rounds `share` to a multiple of the ulp of `c`. Shares on that grid that stay below
/// `|c|` in magnitude add up without rounding, so the final complement is exact too.
fn on_grid(share: f64, c: f64) -> f64 {
    let q = c.abs().next_up() - c.abs();
    (share / q).round() * q
}

/// Closed-form split of a polynomial with `p(0) = 0`: the monomial `c·z^α` contributes
/// `(α_i/|α|)·c·z^{α−e_i}` to component `i`.
///
/// Shares are rounded to the ulp grid of their coefficient and the last variable takes
/// the exact remainder, so that [`gleason_reconstruct`] returns `p` coefficient for coefficient.
pub fn gleason_split_poly(p: &Polynomial) -> Result<Vec<Polynomial>> {
    if p.constant_term() != c64(0.0, 0.0) {
        return Err(Error::Precondition(format!(
            "the split needs p(0) = 0, got {}",
            p.constant_term()
        )));
    }
    let d = p.nvars();
    let mut parts: Vec<Vec<(Vec<u32>, C64)>> = vec![Vec::new(); d];
    for (alpha, &coef) in p.terms() {
        let total: u32 = alpha.iter().sum();
        let support: Vec<usize> = (0..d).filter(|&i| alpha[i] > 0).collect();
        let (&last, rest) = support.split_last().expect("non-constant monomial");
        let mut partial = c64(0.0, 0.0);
        for &i in rest {
            let raw = coef * (f64::from(alpha[i]) / f64::from(total));
            let share = c64(on_grid(raw.re, coef.re), on_grid(raw.im, coef.im));
            partial += share;
            let mut e = alpha.clone();
            e[i] -= 1;
            parts[i].push((e, share));
        }
        let share = coef - partial;
        let mut e = alpha.clone();
        e[last] -= 1;
        parts[last].push((e, share));
    }
    parts.into_iter().map(|terms| Polynomial::from_terms(d, terms)).collect()
}

/// `Σ_i z_i p_i`, accumulated in index order.
pub fn gleason_reconstruct(parts: &[Polynomial]) -> Result<Polynomial> {
    let d = parts.len();
    if d == 0 || parts.iter().any(|p| p.nvars() != d) {
        return Err(Error::Structure("a split needs one polynomial in d variables per coordinate".into()));
    }
    let mut acc = Polynomial::zero(d);
    for (i, p) in parts.iter().enumerate() {
        acc = &acc + &(&Polynomial::coordinate(d, i) * p);
    }
    Ok(acc)
}

/// Numeric split `h_i(z) = ∫₀¹ ∂_i h(tz) dt`, evaluated by Gauss–Legendre quadrature.
#[derive(Debug, Clone)]
pub struct GleasonSplit {
    pub h: Expr,
    pub components: Vec<Expr>,
    pub options: EvalOptions,
}

pub fn gleason_split_numeric(h: &Expr, quadrature_order: usize) -> Result<GleasonSplit> {
    if !h.is_scalar() {
        return Err(Error::Structure(format!("{} is not scalar-valued", h.label())));
    }
    let options = EvalOptions {
        quadrature_order,
        ..EvalOptions::default()
    };
    let d = h.nvars();
    let h0 = Evaluator::<C64>::new(options).eval_point(h, &vec![c64(0.0, 0.0); d])?;
    if h0.norm() > ORIGIN_TOLERANCE {
        return Err(Error::Precondition(format!("the split needs h(0) = 0, got {h0}")));
    }
    let components = (0..d)
        .map(|i| FunctionExpr::gleason(h.clone(), i))
        .collect::<Result<_>>()?;
    Ok(GleasonSplit {
        h: h.clone(),
        components,
        options,
    })
}

impl GleasonSplit {
    pub fn eval_point(&self, z: &[C64]) -> Result<Vec<C64>> {
        let ev = Evaluator::<C64>::new(self.options);
        self.components.iter().map(|c| ev.eval_point(c, z)).collect()
    }

    pub fn eval_tuple(&self, t: &MatrixTuple) -> Result<Vec<CMat>> {
        let ev = Evaluator::<CMat>::new(self.options);
        self.components.iter().map(|c| ev.eval_tuple(c, t)).collect()
    }

    /// `|h(z) − Σ z_i h_i(z)|`.
    pub fn reconstruction_error(&self, z: &[C64]) -> Result<f64> {
        let ev = Evaluator::<C64>::new(self.options);
        let h = ev.eval_point(&self.h, z)?;
        let mut sum = c64(0.0, 0.0);
        for (zi, c) in z.iter().zip(&self.components) {
            sum += zi * ev.eval_point(c, z)?;
        }
        Ok((h - sum).norm())
    }

    /// `‖h(T) − Σ T_i h_i(T)‖` in operator norm.
    pub fn tuple_identity_residual(&self, t: &MatrixTuple) -> Result<f64> {
        let ev = Evaluator::<CMat>::new(self.options);
        let mut r = ev.eval_tuple(&self.h, t)?;
        for (ti, c) in t.entries().iter().zip(&self.components) {
            r -= ti * ev.eval_tuple(c, t)?;
        }
        Ok(crate::linalg::op_norm(&r))
    }
}
