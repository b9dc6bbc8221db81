//! Expression trees for the functions manipulated by the Schur construction.
//!
//! A [`FunctionExpr`] maps an open subset of `ℂ^m` to `ℂ` (scalar-valued) or to `ℂ^k`
//! (vector-valued: automorphisms, embeddings, projections and compositions ending in one).
//! Trees are immutable and share children through [`Arc`]; every constructor checks arity.

mod deriv;
mod eval;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::ball::BallAutomorphism;
use crate::error::{Error, Result};
use crate::json;
use crate::linalg::{c64, C64};
use crate::poly::Polynomial;

pub use deriv::{components, partial_derivative};
pub use eval::{eval_expr_point, eval_expr_point_vector, eval_expr_tuple, taylor_coefficients, EvalOptions, Evaluator};

pub type Expr = Arc<FunctionExpr>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FunctionExpr {
    Poly(Polynomial),
    /// `ψ_c(w) = (c − w)/(1 − c̄w)` applied to a scalar child.
    Mobius {
        #[serde(with = "json::complex")]
        c: C64,
        arg: Expr,
    },
    /// The `order`-th derivative `ψ_c^{(order)}` applied to a scalar child, `order ≥ 1`.
    MobiusDerivative {
        #[serde(with = "json::complex")]
        c: C64,
        order: u32,
        arg: Expr,
    },
    Sum {
        terms: Vec<Expr>,
    },
    Product {
        factors: Vec<Expr>,
    },
    /// `z ↦ Σ_i z_i u_i(z)`.
    Row {
        components: Vec<Expr>,
    },
    Automorphism(BallAutomorphism),
    /// `ℂ^from → ℂ^to`, padding with zeros.
    Embed {
        from: usize,
        to: usize,
    },
    /// `ℂ^from → ℂ^to`, keeping the leading coordinates.
    Project {
        from: usize,
        to: usize,
    },
    Compose {
        outer: Expr,
        inner: Expr,
    },
    /// The Leibenson component `h_i(z) = ∫₀¹ ∂_i h(tz) dt`.
    Gleason {
        inner: Expr,
        index: usize,
    },
    /// `z ↦ ∫₀¹ t^power F(tz) dt`.
    RayIntegral {
        integrand: Expr,
        power: u32,
    },
    /// `z ↦ (1 − ⟨z,b⟩)^{−power}`.
    InvLinearPower {
        #[serde(with = "json::complex_vec")]
        b: Vec<C64>,
        power: u32,
    },
}

fn require_scalar(e: &FunctionExpr, what: &str) -> Result<()> {
    if e.out_dim() != 1 {
        return Err(Error::Structure(format!(
            "{what} needs a scalar-valued child, got one with {} outputs",
            e.out_dim()
        )));
    }
    Ok(())
}

fn require_same_nvars(children: &[Expr], what: &str) -> Result<usize> {
    let first = children
        .first()
        .ok_or_else(|| Error::Structure(format!("{what} needs at least one child")))?;
    let m = first.nvars();
    for c in children {
        require_scalar(c, what)?;
        if c.nvars() != m {
            return Err(Error::Structure(format!(
                "{what} children disagree on the variable count ({} vs {m})",
                c.nvars()
            )));
        }
    }
    Ok(m)
}

impl FunctionExpr {
    pub fn poly(p: Polynomial) -> Expr {
        Arc::new(FunctionExpr::Poly(p))
    }

    pub fn constant(nvars: usize, c: C64) -> Expr {
        Self::poly(Polynomial::constant(nvars, c))
    }

    pub fn coordinate(nvars: usize, i: usize) -> Expr {
        Self::poly(Polynomial::coordinate(nvars, i))
    }

    pub fn mobius(c: C64, arg: Expr) -> Result<Expr> {
        if !(c.norm() < 1.0) {
            return Err(Error::domain("mobius", format!("parameter |c| = {} must be below 1", c.norm())));
        }
        require_scalar(&arg, "mobius")?;
        Ok(Arc::new(FunctionExpr::Mobius { c, arg }))
    }

    pub fn mobius_derivative(c: C64, order: u32, arg: Expr) -> Result<Expr> {
        if !(c.norm() < 1.0) || order == 0 {
            return Err(Error::Structure("mobius derivative needs |c| < 1 and order ≥ 1".into()));
        }
        require_scalar(&arg, "mobius derivative")?;
        Ok(Arc::new(FunctionExpr::MobiusDerivative { c, order, arg }))
    }

    /// Sum with nested sums flattened.
    pub fn sum(terms: Vec<Expr>) -> Result<Expr> {
        require_same_nvars(&terms, "sum")?;
        let mut flat = Vec::with_capacity(terms.len());
        for t in terms {
            match &*t {
                FunctionExpr::Sum { terms: inner } => flat.extend(inner.iter().cloned()),
                _ => flat.push(t),
            }
        }
        if flat.len() == 1 {
            return Ok(flat.pop().unwrap());
        }
        Ok(Arc::new(FunctionExpr::Sum { terms: flat }))
    }

    pub fn product(factors: Vec<Expr>) -> Result<Expr> {
        require_same_nvars(&factors, "product")?;
        if factors.len() == 1 {
            return Ok(factors.into_iter().next().unwrap());
        }
        Ok(Arc::new(FunctionExpr::Product { factors }))
    }

    /// `c·e`.
    pub fn scaled(c: C64, e: Expr) -> Result<Expr> {
        Self::product(vec![Self::constant(e.nvars(), c), e])
    }

    pub fn row(components: Vec<Expr>) -> Result<Expr> {
        let m = require_same_nvars(&components, "row")?;
        if m != components.len() {
            return Err(Error::Structure(format!(
                "row of {} components over {m} variables",
                components.len()
            )));
        }
        Ok(Arc::new(FunctionExpr::Row { components }))
    }

    pub fn automorphism(a: BallAutomorphism) -> Expr {
        Arc::new(FunctionExpr::Automorphism(a))
    }

    pub fn embed(from: usize, to: usize) -> Result<Expr> {
        if from == 0 || from > to {
            return Err(Error::Structure(format!("cannot embed ℂ^{from} into ℂ^{to}")));
        }
        Ok(Arc::new(FunctionExpr::Embed { from, to }))
    }

    pub fn project(from: usize, to: usize) -> Result<Expr> {
        if to == 0 || to > from {
            return Err(Error::Structure(format!("cannot project ℂ^{from} onto ℂ^{to}")));
        }
        Ok(Arc::new(FunctionExpr::Project { from, to }))
    }

    /// `outer ∘ inner`.
    pub fn compose(outer: Expr, inner: Expr) -> Result<Expr> {
        if outer.nvars() != inner.out_dim() {
            return Err(Error::Structure(format!(
                "composition mismatch: outer takes {} variables, inner yields {}",
                outer.nvars(),
                inner.out_dim()
            )));
        }
        Ok(Arc::new(FunctionExpr::Compose { outer, inner }))
    }

    pub fn gleason(inner: Expr, index: usize) -> Result<Expr> {
        require_scalar(&inner, "gleason")?;
        if index >= inner.nvars() {
            return Err(Error::Structure(format!(
                "gleason index {index} out of range for {} variables",
                inner.nvars()
            )));
        }
        Ok(Arc::new(FunctionExpr::Gleason { inner, index }))
    }

    pub fn ray_integral(integrand: Expr, power: u32) -> Result<Expr> {
        require_scalar(&integrand, "ray integral")?;
        Ok(Arc::new(FunctionExpr::RayIntegral { integrand, power }))
    }

    pub fn inv_linear_power(b: Vec<C64>, power: u32) -> Result<Expr> {
        if b.is_empty() {
            return Err(Error::Structure("inv_linear_power needs a non-empty vector".into()));
        }
        Ok(Arc::new(FunctionExpr::InvLinearPower { b, power }))
    }

    /// Input dimension.
    pub fn nvars(&self) -> usize {
        match self {
            FunctionExpr::Poly(p) => p.nvars(),
            FunctionExpr::Mobius { arg, .. } | FunctionExpr::MobiusDerivative { arg, .. } => arg.nvars(),
            FunctionExpr::Sum { terms: cs } | FunctionExpr::Product { factors: cs } | FunctionExpr::Row { components: cs } => {
                cs[0].nvars()
            }
            FunctionExpr::Automorphism(a) => a.dim(),
            FunctionExpr::Embed { from, .. } | FunctionExpr::Project { from, .. } => *from,
            FunctionExpr::Compose { inner, .. } => inner.nvars(),
            FunctionExpr::Gleason { inner, .. } => inner.nvars(),
            FunctionExpr::RayIntegral { integrand, .. } => integrand.nvars(),
            FunctionExpr::InvLinearPower { b, .. } => b.len(),
        }
    }

    /// Output dimension; 1 for scalar-valued expressions.
    pub fn out_dim(&self) -> usize {
        match self {
            FunctionExpr::Automorphism(a) => a.dim(),
            FunctionExpr::Embed { to, .. } | FunctionExpr::Project { to, .. } => *to,
            FunctionExpr::Compose { outer, .. } => outer.out_dim(),
            _ => 1,
        }
    }

    pub fn is_scalar(&self) -> bool {
        self.out_dim() == 1
    }

    /// Whether the node produces a point (automorphism, embedding, projection, or a
    /// composition ending in one) rather than a scalar formula.
    pub fn is_map(&self) -> bool {
        match self {
            FunctionExpr::Automorphism(_) | FunctionExpr::Embed { .. } | FunctionExpr::Project { .. } => true,
            FunctionExpr::Compose { outer, .. } => outer.is_map(),
            _ => false,
        }
    }

    /// Whether evaluation anywhere in the tree needs its input inside the ball.
    pub fn needs_ball(&self) -> bool {
        match self {
            FunctionExpr::Poly(_) | FunctionExpr::Embed { .. } | FunctionExpr::Project { .. } => false,
            FunctionExpr::Automorphism(_)
            | FunctionExpr::Gleason { .. }
            | FunctionExpr::RayIntegral { .. }
            | FunctionExpr::InvLinearPower { .. } => true,
            FunctionExpr::Mobius { arg, .. } | FunctionExpr::MobiusDerivative { arg, .. } => arg.needs_ball(),
            FunctionExpr::Sum { terms: cs } | FunctionExpr::Product { factors: cs } | FunctionExpr::Row { components: cs } => {
                cs.iter().any(|c| c.needs_ball())
            }
            FunctionExpr::Compose { outer, inner } => outer.needs_ball() || inner.needs_ball(),
        }
    }

    /// Number of nodes, counting shared subtrees once per reference.
    pub fn node_count(&self) -> usize {
        1 + match self {
            FunctionExpr::Mobius { arg, .. } | FunctionExpr::MobiusDerivative { arg, .. } => arg.node_count(),
            FunctionExpr::Sum { terms: cs } | FunctionExpr::Product { factors: cs } | FunctionExpr::Row { components: cs } => {
                cs.iter().map(|c| c.node_count()).sum()
            }
            FunctionExpr::Compose { outer, inner } => outer.node_count() + inner.node_count(),
            FunctionExpr::Gleason { inner, .. } => inner.node_count(),
            FunctionExpr::RayIntegral { integrand, .. } => integrand.node_count(),
            _ => 0,
        }
    }

    /// Re-run the construction checks over a whole tree (e.g. after deserialization).
    pub fn validate(&self) -> Result<()> {
        match self {
            FunctionExpr::Poly(_) | FunctionExpr::Automorphism(_) => Ok(()),
            FunctionExpr::Mobius { c, arg } => {
                arg.validate()?;
                FunctionExpr::mobius(*c, arg.clone()).map(|_| ())
            }
            FunctionExpr::MobiusDerivative { c, order, arg } => {
                arg.validate()?;
                FunctionExpr::mobius_derivative(*c, *order, arg.clone()).map(|_| ())
            }
            FunctionExpr::Sum { terms: cs } | FunctionExpr::Product { factors: cs } => {
                cs.iter().try_for_each(|c| c.validate())?;
                require_same_nvars(cs, "sum/product").map(|_| ())
            }
            FunctionExpr::Row { components } => {
                components.iter().try_for_each(|c| c.validate())?;
                FunctionExpr::row(components.clone()).map(|_| ())
            }
            FunctionExpr::Embed { from, to } => FunctionExpr::embed(*from, *to).map(|_| ()),
            FunctionExpr::Project { from, to } => FunctionExpr::project(*from, *to).map(|_| ()),
            FunctionExpr::Compose { outer, inner } => {
                outer.validate()?;
                inner.validate()?;
                FunctionExpr::compose(outer.clone(), inner.clone()).map(|_| ())
            }
            FunctionExpr::Gleason { inner, index } => {
                inner.validate()?;
                FunctionExpr::gleason(inner.clone(), *index).map(|_| ())
            }
            FunctionExpr::RayIntegral { integrand, power } => {
                integrand.validate()?;
                FunctionExpr::ray_integral(integrand.clone(), *power).map(|_| ())
            }
            FunctionExpr::InvLinearPower { b, power } => FunctionExpr::inv_linear_power(b.clone(), *power).map(|_| ()),
        }
    }

    /// Parse and validate a JSON tree.
    pub fn from_json(s: &str) -> Result<Expr> {
        let e: FunctionExpr = serde_json::from_str(s).map_err(|e| Error::Structure(format!("expression JSON: {e}")))?;
        e.validate()?;
        Ok(Arc::new(e))
    }

    /// Short label used in domain-error messages.
    pub fn label(&self) -> String {
        match self {
            FunctionExpr::Poly(p) => format!("poly(d={}, deg={})", p.nvars(), p.degree()),
            FunctionExpr::Mobius { c, .. } => format!("mobius(c={:.4}{:+.4}i)", c.re, c.im),
            FunctionExpr::MobiusDerivative { c, order, .. } => {
                format!("mobius_derivative(c={:.4}{:+.4}i, order={order})", c.re, c.im)
            }
            FunctionExpr::Sum { .. } => "sum".into(),
            FunctionExpr::Product { .. } => "product".into(),
            FunctionExpr::Row { .. } => "row".into(),
            FunctionExpr::Automorphism(_) => "automorphism".into(),
            FunctionExpr::Embed { from, to } => format!("embed({from}→{to})"),
            FunctionExpr::Project { from, to } => format!("project({from}→{to})"),
            FunctionExpr::Compose { .. } => "compose".into(),
            FunctionExpr::Gleason { index, .. } => format!("gleason(i={index})"),
            FunctionExpr::RayIntegral { power, .. } => format!("ray_integral(power={power})"),
            FunctionExpr::InvLinearPower { power, .. } => format!("inv_linear_power({power})"),
        }
    }

    pub(crate) fn is_zero_poly(&self) -> bool {
        matches!(self, FunctionExpr::Poly(p) if p.is_zero())
    }
}

/// `ψ_c(w) = (c − w)/(1 − c̄w)`; an involution of the disk exchanging `c` and `0`.
pub fn disk_involution(c: C64, w: C64) -> C64 {
    (c - w) / (c64(1.0, 0.0) - c.conj() * w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arity_checks() {
        let z1 = FunctionExpr::coordinate(2, 0);
        let w = FunctionExpr::coordinate(3, 0);
        assert!(FunctionExpr::sum(vec![z1.clone(), w.clone()]).is_err());
        assert!(FunctionExpr::mobius(c64(1.0, 0.0), z1.clone()).is_err());
        assert!(FunctionExpr::row(vec![z1.clone()]).is_err());
        assert!(FunctionExpr::compose(z1.clone(), FunctionExpr::embed(2, 3).unwrap()).is_err());
        let e = FunctionExpr::compose(w, FunctionExpr::embed(2, 3).unwrap()).unwrap();
        assert_eq!(e.nvars(), 2);
        assert!(e.is_scalar());
        assert!(!FunctionExpr::embed(2, 3).unwrap().is_scalar());
        assert!(FunctionExpr::embed(2, 3).unwrap().is_map());
    }

    #[test]
    fn sums_flatten() {
        let z1 = FunctionExpr::coordinate(2, 0);
        let inner = FunctionExpr::sum(vec![z1.clone(), z1.clone()]).unwrap();
        let outer = FunctionExpr::sum(vec![inner, z1]).unwrap();
        match &*outer {
            FunctionExpr::Sum { terms } => assert_eq!(terms.len(), 3),
            other => panic!("expected a sum, got {other:?}"),
        }
    }

    #[test]
    fn json_round_trip() {
        let p = Polynomial::monomial(vec![1, 1], c64(1.0, 0.0));
        let e = FunctionExpr::mobius(c64(0.25, 0.0), FunctionExpr::poly(p)).unwrap();
        let s = serde_json::to_string(&*e).unwrap();
        assert_eq!(
            s,
            r#"{"type":"mobius","c":[0.25,0.0],"arg":{"type":"poly","d":2,"terms":[{"exp":[1,1],"coef":[1.0,0.0]}]}}"#
        );
        let back = FunctionExpr::from_json(&s).unwrap();
        assert_eq!(*back, *e);
        let bad = r#"{"type":"row","components":[{"type":"poly","d":2,"terms":[]}]}"#;
        assert!(FunctionExpr::from_json(bad).is_err());
    }

    #[test]
    fn disk_involution_properties() {
        let c = c64(0.3, -0.2);
        assert!(disk_involution(c, c).norm() < 1e-16);
        assert!((disk_involution(c, c64(0.0, 0.0)) - c).norm() < 1e-16);
        let w = c64(-0.5, 0.4);
        assert!((disk_involution(c, disk_involution(c, w)) - w).norm() < 1e-15);
    }
}
