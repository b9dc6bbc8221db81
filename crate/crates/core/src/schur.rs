//! Constructive Schur algorithm: an explicit expression `g` with `g(T) = f(T)` together with
//! the constructive bound on its multiplier norm.
//!
//! Each level moves the top joint eigenvalue `λ` of the triangularized tuple to the origin
//! with the involution `θ = φ_λ`, sets `c = f(λ)` and `h = ψ_c∘f∘θ`, splits `h = Σ z_i h_i`
//! and recurses on the trailing block of `θ(T)` for every `h_i`. The level function is
//! `ψ_c∘(Σ z_i u_i)∘θ`. Since `θ(T)` has a zero first row and column on the diagonal, the
//! first row of `θ(T)_i X_i` only sees the trailing block of `X_i`, so `u_i` only has to match
//! `h_i` there.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::ball::{commutative_dimension_bound, reduce_variables_span, BallAutomorphism};
use crate::error::{Error, Result};
use crate::expr::{EvalOptions, Evaluator, Expr, FunctionExpr};
use crate::gleason::GleasonSplit;
use crate::linalg::{self, c64, CMat, C64};
use crate::sampling::sup_norm_estimate;
use crate::tuple::{self, simultaneous_triangularize, validate_tuple, MatrixTuple, Tolerances};

/// Values `C(d)` of the Gleason constant. Dimensions without an entry use `default`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GleasonTable {
    pub default: Option<f64>,
    pub entries: BTreeMap<usize, f64>,
}

impl Default for GleasonTable {
    fn default() -> Self {
        GleasonTable {
            default: Some(1.0),
            entries: BTreeMap::new(),
        }
    }
}

impl GleasonTable {
    pub fn get(&self, d: usize) -> Result<f64> {
        self.entries
            .get(&d)
            .copied()
            .or(self.default)
            .ok_or_else(|| Error::Config(format!("no Gleason constant configured for d = {d}")))
    }

    fn validate(&self) -> Result<()> {
        let bad = self.default.into_iter().chain(self.entries.values().copied()).find(|c| !(c.is_finite() && *c >= 1.0));
        match bad {
            Some(c) => Err(Error::Config(format!("Gleason constants must be finite and ≥ 1, got {c}"))),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchurConfig {
    pub a: f64,
    pub gleason_constants: GleasonTable,
    pub quadrature_order: usize,
    pub sup_norm_budget: usize,
    pub safety_factor: f64,
    pub seed: u64,
    /// Rotate the variables onto the span of the tuple when `d > ⌊n²/4⌋ + 1`.
    pub reduce_variables: bool,
    /// Check `h(T') = Σ T'_i h_i(T')` at every level (costly for deep recursions).
    pub verify_levels: bool,
}

impl Default for SchurConfig {
    fn default() -> Self {
        SchurConfig {
            a: 1.0,
            gleason_constants: GleasonTable::default(),
            quadrature_order: 32,
            sup_norm_budget: 2000,
            safety_factor: 1.05,
            seed: 0,
            reduce_variables: true,
            verify_levels: false,
        }
    }
}

impl SchurConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.a.is_finite() && self.a > 0.0) {
            return Err(Error::Config(format!("a must be positive, got {}", self.a)));
        }
        if !(self.safety_factor.is_finite() && self.safety_factor >= 1.0) {
            return Err(Error::Config(format!("safety_factor must be ≥ 1, got {}", self.safety_factor)));
        }
        if self.quadrature_order == 0 || self.sup_norm_budget == 0 {
            return Err(Error::Config("quadrature_order and sup_norm_budget must be positive".into()));
        }
        self.gleason_constants.validate()
    }

    fn eval_options(&self) -> EvalOptions {
        EvalOptions {
            quadrature_order: self.quadrature_order,
            ..EvalOptions::default()
        }
    }
}

/// `(2·min(C(d)√d, C(n′)√n′)·max(1, a^{−1/2}))^{n−1}` with `n′ = ⌊n²/4⌋ + 1`.
pub fn certified_constant(d: usize, n: usize, a: f64, cfg: &SchurConfig) -> Result<f64> {
    if d == 0 || n == 0 {
        return Err(Error::Argument("certified_constant needs d, n ≥ 1".into()));
    }
    if !(a.is_finite() && a > 0.0) {
        return Err(Error::Argument(format!("a must be positive, got {a}")));
    }
    let nprime = commutative_dimension_bound(n);
    let cd = cfg.gleason_constants.get(d)? * (d as f64).sqrt();
    let cn = cfg.gleason_constants.get(nprime)? * (nprime as f64).sqrt();
    let base = 2.0 * cd.min(cn) * 1.0f64.max(a.powf(-0.5));
    Ok(base.powi(n as i32 - 1))
}

/// One node of the recursion tree.
#[derive(Debug, Clone, Serialize)]
pub struct LevelRecord {
    /// Gleason component indices leading to this node.
    pub path: Vec<usize>,
    pub level: usize,
    pub size: usize,
    /// Joint eigenvalue moved to the origin (the constant's point at the last level).
    #[serde(with = "crate::json::complex_vec")]
    pub base: Vec<C64>,
    #[serde(with = "crate::json::complex")]
    pub c: C64,
    pub components: usize,
    pub identity_residual: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReductionSummary {
    pub rank: usize,
    pub rank_bound: usize,
    pub tail_norm: f64,
    #[serde(with = "crate::json::matrix")]
    pub unitary: CMat,
}

#[derive(Debug, Clone, Serialize)]
pub struct SchurResult {
    pub g: Expr,
    pub certified_bound: f64,
    /// Provenance of the sup norm in the bound.
    pub bound_label: String,
    pub certified_constant: f64,
    pub sup_estimate: f64,
    pub safety_factor: f64,
    pub epsilon: f64,
    /// `f` was multiplied by this before the recursion; `g` undoes it.
    pub scale: f64,
    pub effective_dim: usize,
    pub reduction: Option<ReductionSummary>,
    /// Gleason constants that entered the bound.
    pub gleason_table: BTreeMap<usize, f64>,
    pub trace: Vec<LevelRecord>,
    /// `‖g(T) − f(T)‖`.
    pub residual: f64,
    /// `‖f(T)‖`.
    pub f_norm: f64,
    pub jets: usize,
}

impl SchurResult {
    pub fn accepts(&self, tol: f64) -> bool {
        self.residual <= tol * (1.0 + self.f_norm)
    }
}

pub const BOUND_LABEL: &str = "empirical-sup";
const SPAN_TOLERANCE: f64 = 1e-10;

struct Recursion<'a> {
    ev: Evaluator<C64>,
    opts: EvalOptions,
    verify: bool,
    trace: &'a mut Vec<LevelRecord>,
}

fn top_eigenvalue(t: &MatrixTuple) -> Vec<C64> {
    t.entries().iter().map(|m| m[(0, 0)]).collect()
}

fn upper_part(t: &MatrixTuple) -> Result<MatrixTuple> {
    MatrixTuple::new(t.entries().iter().map(|m| m.upper_triangle()).collect())
}

impl Recursion<'_> {
    fn run(&mut self, f: &Expr, t: &MatrixTuple, path: &mut Vec<usize>) -> Result<Expr> {
        let level = path.len();
        let context = format!("level {level}");
        let k = t.d();
        let lambda = top_eigenvalue(t);
        let c = self.ev.eval_point(f, &lambda).map_err(|e| e.with_context(&context))?;
        if t.n() == 1 {
            self.trace.push(LevelRecord {
                path: path.clone(),
                level,
                size: 1,
                base: lambda,
                c,
                components: 0,
                identity_residual: None,
            });
            return Ok(FunctionExpr::constant(k, c));
        }
        if !(c.norm() < 1.0) {
            return Err(Error::domain(
                context,
                format!("|f(λ)| = {} is not below 1 after scaling", c.norm()),
            ));
        }
        let theta = BallAutomorphism::involution_at(&lambda).map_err(|e| e.with_context(&context))?;
        let theta_e = FunctionExpr::automorphism(theta.clone());
        let h = FunctionExpr::mobius(c, FunctionExpr::compose(f.clone(), theta_e.clone())?)?;
        let moved = upper_part(&theta.apply_tuple_unchecked(t).map_err(|e| e.with_context(&context))?)?;
        let components: Vec<Expr> = (0..k).map(|i| FunctionExpr::gleason(h.clone(), i)).collect::<Result<_>>()?;
        let identity_residual = if self.verify {
            let split = GleasonSplit {
                h: h.clone(),
                components: components.clone(),
                options: self.opts,
            };
            Some(split.tuple_identity_residual(&moved).map_err(|e| e.with_context(&context))?)
        } else {
            None
        };
        self.trace.push(LevelRecord {
            path: path.clone(),
            level,
            size: t.n(),
            base: lambda,
            c,
            components: k,
            identity_residual,
        });
        let block = moved.trailing_block(1);
        let mut us = Vec::with_capacity(k);
        for (i, hi) in components.iter().enumerate() {
            path.push(i);
            let u = self.run(hi, &block, path);
            path.pop();
            us.push(u?);
        }
        let level_g = FunctionExpr::mobius(c, FunctionExpr::row(us)?)?;
        FunctionExpr::compose(level_g, theta_e)
    }
}

/// Builds `g` with `g(T) = f(T)`; see the module documentation for the recursion.
pub fn schur_construct(f: &Expr, t: &MatrixTuple, cfg: &SchurConfig) -> Result<SchurResult> {
    cfg.validate()?;
    if !f.is_scalar() {
        return Err(Error::Structure(format!("{} is not scalar-valued", f.label())));
    }
    let (d, n) = (t.d(), t.n());
    if f.nvars() != d {
        return Err(Error::Structure(format!("function of {} variables applied to a {d}-tuple", f.nvars())));
    }
    let tol = Tolerances::default();
    let diag = validate_tuple(t, tol.commutation * t.scale().max(1.0));
    if !diag.is_commuting {
        return Err(Error::Precondition(format!(
            "tuple does not commute: residual {:.3e}",
            diag.commutation_residual
        )));
    }
    tuple::require_spectrum_in_ball(t, tol.ball_margin)?;
    let opts = cfg.eval_options();
    let f_t = Evaluator::<CMat>::new(opts).eval_tuple(f, t)?;
    let constant = certified_constant(d, n, cfg.a, cfg)?;
    let nprime = commutative_dimension_bound(n);
    let mut gleason_table = BTreeMap::new();
    gleason_table.insert(d, cfg.gleason_constants.get(d)?);
    gleason_table.insert(nprime, cfg.gleason_constants.get(nprime)?);

    let mut trace = Vec::new();
    let result = |g: Expr, bound: f64, sup: f64, epsilon: f64, scale: f64, k: usize, reduction, trace, jets| -> Result<SchurResult> {
        let g_t = Evaluator::<CMat>::new(opts).eval_tuple(&g, t)?;
        Ok(SchurResult {
            g,
            certified_bound: bound,
            bound_label: BOUND_LABEL.into(),
            certified_constant: constant,
            sup_estimate: sup,
            safety_factor: cfg.safety_factor,
            epsilon,
            scale,
            effective_dim: k,
            reduction,
            gleason_table: gleason_table.clone(),
            trace,
            residual: linalg::op_norm(&(g_t - &f_t)),
            f_norm: linalg::op_norm(&f_t),
            jets,
        })
    };

    if n == 1 {
        let lambda = top_eigenvalue(t);
        let value = Evaluator::<C64>::new(opts).eval_point(f, &lambda)?;
        trace.push(LevelRecord {
            path: vec![],
            level: 0,
            size: 1,
            base: lambda,
            c: value,
            components: 0,
            identity_residual: None,
        });
        return result(FunctionExpr::constant(d, value), value.norm(), value.norm(), 1.0, 1.0, d, None, trace, 0);
    }

    let sup = sup_norm_estimate(f, d, cfg.sup_norm_budget, cfg.seed).value;
    let bound = constant * sup * cfg.safety_factor;
    if sup == 0.0 {
        return result(FunctionExpr::constant(d, c64(0.0, 0.0)), 0.0, 0.0, 1.0, 1.0, d, None, trace, 0);
    }

    // Variable reduction onto the span of T_1 … T_d.
    let mut work_f = f.clone();
    let mut work_t = t.clone();
    let mut reduction = None;
    if cfg.reduce_variables && d > nprime {
        let red = reduce_variables_span(t, SPAN_TOLERANCE)?;
        let k = red.rank.max(1);
        if k < d {
            let back = FunctionExpr::compose(
                FunctionExpr::automorphism(BallAutomorphism::from_unitary(&red.unitary.adjoint())?),
                FunctionExpr::embed(k, d)?,
            )?;
            work_f = FunctionExpr::compose(f.clone(), back)?;
            work_t = MatrixTuple::new(red.tuple.entries()[..k].to_vec())?;
            reduction = Some(ReductionSummary {
                rank: red.rank,
                rank_bound: red.rank_bound,
                tail_norm: red.tail_norm,
                unitary: red.unitary,
            });
        }
    }
    let k = work_t.d();
    let row_norm = 1.0f64.max(cfg.a.powf(-0.5));
    let epsilon = (2.0 * cfg.gleason_constants.get(k)? * (k as f64).sqrt() * row_norm).powi(-(n as i32 - 1));
    let scale = epsilon / (sup * cfg.safety_factor);
    let scaled_f = FunctionExpr::scaled(c64(scale, 0.0), work_f)?;

    let tri = simultaneous_triangularize(&work_t)?;
    let start = upper_part(&tri.triangular_tuple)?;
    let mut rec = Recursion {
        ev: Evaluator::new(opts),
        opts,
        verify: cfg.verify_levels,
        trace: &mut trace,
    };
    let gs = rec.run(&scaled_f, &start, &mut Vec::new())?;
    let jets = rec.ev.jet_count();
    let mut g = FunctionExpr::scaled(c64(1.0 / scale, 0.0), gs)?;
    if let Some(red) = &reduction {
        let forward = FunctionExpr::compose(
            FunctionExpr::project(d, k)?,
            FunctionExpr::automorphism(BallAutomorphism::from_unitary(&red.unitary)?),
        )?;
        g = FunctionExpr::compose(g, forward)?;
    }
    result(g, bound, sup, epsilon, scale, k, reduction, trace, jets)
}
