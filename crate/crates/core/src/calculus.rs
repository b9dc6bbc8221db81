//! Holomorphic functional calculus at commuting tuples: the homogeneous power-series route
//! and a Monte Carlo estimate of the ball's Cauchy integral.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{taylor_coefficients, Expr};
use crate::linalg::{self, c64, CMat, C64};
use crate::par::{derive_seed, rng_from_seed, Exec};
use crate::poly::Polynomial;
use crate::series::Series;
use crate::tuple::{self, eval_poly_tuple, random_sphere_point, MatrixTuple, Tolerances};

/// Supplies the homogeneous parts `f_k` of a power series `f = Σ_k f_k`.
pub trait HomogeneousExpansion {
    fn nvars(&self) -> usize;
    fn homogeneous(&self, k: usize) -> Result<Polynomial>;
    /// Total degree when the series is a polynomial.
    fn degree_bound(&self) -> Option<usize> {
        None
    }
}

impl HomogeneousExpansion for Polynomial {
    fn nvars(&self) -> usize {
        Polynomial::nvars(self)
    }

    fn homogeneous(&self, k: usize) -> Result<Polynomial> {
        Ok(self.homogeneous_part(k))
    }

    fn degree_bound(&self) -> Option<usize> {
        Some(self.degree())
    }
}

/// Expansion given by a closure `k ↦ f_k`.
pub struct FnExpansion<F> {
    nvars: usize,
    f: F,
}

impl<F: Fn(usize) -> Polynomial> FnExpansion<F> {
    pub fn new(nvars: usize, f: F) -> Self {
        FnExpansion { nvars, f }
    }
}

impl<F: Fn(usize) -> Polynomial> HomogeneousExpansion for FnExpansion<F> {
    fn nvars(&self) -> usize {
        self.nvars
    }

    fn homogeneous(&self, k: usize) -> Result<Polynomial> {
        let p = (self.f)(k);
        if p.nvars() != self.nvars {
            return Err(Error::Structure(format!("homogeneous part {k} has the wrong arity")));
        }
        Ok(p)
    }
}

/// Taylor expansion at the origin of an expression, computed up to a fixed order.
pub struct ExprExpansion {
    nvars: usize,
    taylor: Series<C64>,
}

impl ExprExpansion {
    pub fn new(e: &Expr, order: usize) -> Result<Self> {
        Ok(ExprExpansion {
            nvars: e.nvars(),
            taylor: taylor_coefficients(e, order)?,
        })
    }

    pub fn order(&self) -> usize {
        self.taylor.basis().order()
    }
}

impl HomogeneousExpansion for ExprExpansion {
    fn nvars(&self) -> usize {
        self.nvars
    }

    fn homogeneous(&self, k: usize) -> Result<Polynomial> {
        if k > self.order() {
            return Err(Error::Argument(format!(
                "Taylor expansion computed to order {} but order {k} was requested",
                self.order()
            )));
        }
        Polynomial::from_terms(self.nvars, self.taylor.degree_block(k).map(|(e, c)| (e.to_vec(), *c)))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SeriesEvaluation {
    #[serde(with = "crate::json::matrix")]
    pub value: CMat,
    /// Highest homogeneous order included.
    pub order: usize,
    /// Largest Frobenius norm among the last few terms.
    pub last_term_norm: f64,
    /// Geometric tail estimate `‖f_N(T)‖·ρ/(1−ρ)`.
    pub tail_bound: f64,
    /// `ρ = max ‖λ‖` over the joint spectrum.
    pub spectral_radius: f64,
}

pub const DEFAULT_MAX_ORDER: usize = 256;

/// `Σ_k f_k(T)`, stopping once the recent terms and the geometric tail estimate fall below
/// `tol`. The recent window spans `max(n, 2)` orders so that gaps in sparse expansions and
/// nilpotent parts are not mistaken for convergence.
pub fn eval_series_tuple(f: &dyn HomogeneousExpansion, t: &MatrixTuple, tol: f64, max_order: usize) -> Result<SeriesEvaluation> {
    if f.nvars() != t.d() {
        return Err(Error::Structure(format!(
            "expansion in {} variables applied to a {}-tuple",
            f.nvars(),
            t.d()
        )));
    }
    let rho = tuple::require_spectrum_in_ball(t, Tolerances::default().ball_margin)?.radius();
    let window = t.n().max(2);
    let mut value = CMat::zeros(t.n(), t.n());
    let mut norms: Vec<f64> = Vec::new();
    let mut tail = f64::INFINITY;
    for k in 0..=max_order {
        let term = eval_poly_tuple(&f.homogeneous(k)?, t)?;
        norms.push(linalg::frobenius(&term));
        value += term;
        if f.degree_bound().is_some_and(|deg| k >= deg) {
            return Ok(SeriesEvaluation {
                value,
                order: k,
                last_term_norm: norms[k],
                tail_bound: 0.0,
                spectral_radius: rho,
            });
        }
        if k + 1 >= window {
            let recent = norms[k + 1 - window..].iter().cloned().fold(0.0, f64::max);
            tail = recent * rho / (1.0 - rho);
            if recent < tol && tail < tol {
                return Ok(SeriesEvaluation {
                    value,
                    order: k,
                    last_term_norm: recent,
                    tail_bound: tail,
                    spectral_radius: rho,
                });
            }
        }
    }
    Err(Error::Convergence {
        context: format!("homogeneous series up to order {max_order}"),
        achieved: tail,
    })
}

#[derive(Debug, Clone)]
pub struct CauchyEstimate {
    pub estimate: CMat,
    /// Per-entry standard error of the complex mean.
    pub std_error: DMatrix<f64>,
    pub samples: usize,
}

impl CauchyEstimate {
    pub fn std_error_frobenius(&self) -> f64 {
        self.std_error.iter().map(|s| s * s).sum::<f64>().sqrt()
    }

    /// `‖estimate − reference‖_F ≤ k·(Frobenius norm of the standard errors)`.
    pub fn agrees_with(&self, reference: &CMat, k: f64) -> bool {
        linalg::frobenius(&(&self.estimate - reference)) <= k * self.std_error_frobenius()
    }
}

pub const DEFAULT_CAUCHY_SAMPLES: usize = 200_000;
const CAUCHY_CHUNKS: usize = 64;

/// Monte Carlo estimate of `∫ f(ζ)(I − Σ_k conj(ζ_k) T_k)^{−d} dσ(ζ)` over the unit sphere.
pub fn cauchy_integral_eval<F>(f: F, t: &MatrixTuple, sample_count: usize, seed: u64) -> Result<CauchyEstimate>
where
    F: Fn(&[C64]) -> C64 + Sync,
{
    cauchy_integral_eval_with(f, t, sample_count, seed, Exec::default())
}

pub fn cauchy_integral_eval_with<F>(f: F, t: &MatrixTuple, sample_count: usize, seed: u64, exec: Exec) -> Result<CauchyEstimate>
where
    F: Fn(&[C64]) -> C64 + Sync,
{
    if sample_count < 2 {
        return Err(Error::Argument("the Cauchy estimate needs at least two samples".into()));
    }
    tuple::require_spectrum_in_ball(t, Tolerances::default().ball_margin)?;
    let (n, d) = (t.n(), t.d());
    let chunks = CAUCHY_CHUNKS.min(sample_count);
    let partials = exec.map(chunks, |c| -> Result<(CMat, DMatrix<f64>, DMatrix<f64>)> {
        let count = sample_count / chunks + usize::from(c < sample_count % chunks);
        let mut rng = rng_from_seed(derive_seed(seed, c as u64));
        let mut sum = CMat::zeros(n, n);
        let mut sq_re = DMatrix::<f64>::zeros(n, n);
        let mut sq_im = DMatrix::<f64>::zeros(n, n);
        for _ in 0..count {
            let zeta = random_sphere_point(&mut rng, d);
            let mut m = CMat::identity(n, n);
            for (z, tk) in zeta.iter().zip(t.entries()) {
                m -= tk * z.conj();
            }
            let inv = linalg::inverse_checked(&m, "Cauchy kernel")?;
            let mut kernel = inv.clone();
            for _ in 1..d {
                kernel = &kernel * &inv;
            }
            let sample = kernel * f(&zeta);
            for (i, v) in sample.iter().enumerate() {
                sq_re[i] += v.re * v.re;
                sq_im[i] += v.im * v.im;
            }
            sum += sample;
        }
        Ok((sum, sq_re, sq_im))
    });
    let mut sum = CMat::zeros(n, n);
    let mut sq_re = DMatrix::<f64>::zeros(n, n);
    let mut sq_im = DMatrix::<f64>::zeros(n, n);
    for p in partials {
        let (s, r, i) = p?;
        sum += s;
        sq_re += r;
        sq_im += i;
    }
    let count = sample_count as f64;
    let estimate = sum / c64(count, 0.0);
    let std_error = DMatrix::from_fn(n, n, |r, c| {
        let m = estimate[(r, c)];
        let var_re = (sq_re[(r, c)] / count - m.re * m.re).max(0.0) * count / (count - 1.0);
        let var_im = (sq_im[(r, c)] / count - m.im * m.im).max(0.0) * count / (count - 1.0);
        ((var_re + var_im) / count).sqrt()
    });
    Ok(CauchyEstimate {
        estimate,
        std_error,
        samples: sample_count,
    })
}
