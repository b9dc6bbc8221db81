//! Quasi-random sampling of the ball and sphere, and the sampled sup-norm estimate.

use rand::Rng;
use serde::Serialize;

use crate::expr::{EvalOptions, Evaluator, Expr, FunctionExpr};
use crate::linalg::{c64, norm2, C64};
use crate::optim::nelder_mead;
use crate::par::rng_from_seed;

const PRIMES: [u32; 24] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
];

/// Radical inverse of `index` in the given base.
pub fn radical_inverse(mut index: u64, base: u32) -> f64 {
    let b = u64::from(base);
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while index > 0 {
        r += (index % b) as f64 * f;
        index /= b;
        f *= inv;
    }
    r
}

/// Randomly shifted (Cranley–Patterson) Halton sequence in `[0,1)^dim`.
pub struct ShiftedHalton {
    shift: Vec<f64>,
    index: u64,
}

impl ShiftedHalton {
    pub fn new(dim: usize, seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        assert!(dim <= PRIMES.len(), "Halton dimension {dim} exceeds the prime table");
        ShiftedHalton {
            shift: (0..dim).map(|_| rng.random::<f64>()).collect(),
            index: 0,
        }
    }

    pub fn next_point(&mut self) -> Vec<f64> {
        self.index += 1;
        self.shift
            .iter()
            .zip(PRIMES)
            .map(|(s, p)| {
                let u = radical_inverse(self.index, p) + s;
                u - u.floor()
            })
            .collect()
    }
}

/// Maps `2d` (sphere) or `2d+1` (ball) uniforms to a point by Box–Muller and normalization.
fn uniforms_to_point(u: &[f64], d: usize, radius: Option<f64>) -> Vec<C64> {
    let g: Vec<C64> = (0..d)
        .map(|i| {
            let r = (-2.0 * u[2 * i].max(1e-300).ln()).sqrt();
            let t = std::f64::consts::TAU * u[2 * i + 1];
            c64(r * t.cos(), r * t.sin())
        })
        .collect();
    let norm = norm2(&g).max(1e-300);
    let scale = match radius {
        Some(rmax) => rmax * u[2 * d].powf(1.0 / (2.0 * d as f64)) / norm,
        None => 1.0 / norm,
    };
    g.into_iter().map(|z| z * scale).collect()
}

fn reals_to_point(x: &[f64], radius: Option<f64>) -> Option<Vec<C64>> {
    let z: Vec<C64> = x.chunks(2).map(|p| c64(p[0], p[1])).collect();
    let norm = norm2(&z);
    match radius {
        None if norm > 0.0 => Some(z.into_iter().map(|v| v / norm).collect()),
        None => None,
        Some(rmax) if norm > rmax => Some(z.into_iter().map(|v| v * (rmax / norm)).collect()),
        Some(_) => Some(z),
    }
}

fn point_to_reals(z: &[C64]) -> Vec<f64> {
    z.iter().flat_map(|v| [v.re, v.im]).collect()
}

/// Result of a sampled maximization of `|e|`.
#[derive(Debug, Clone, Serialize)]
pub struct SupEstimate {
    pub value: f64,
    #[serde(with = "crate::json::complex_vec")]
    pub argmax: Vec<C64>,
    pub evaluations: usize,
    pub on_sphere: bool,
}

/// Largest radius used when sampling the open ball for non-polynomial expressions.
pub const BALL_SAMPLING_RADIUS: f64 = 1.0 - 1e-6;
const POLISH_STARTS: usize = 8;

/// Sampled lower estimate of `sup |f|` from `budget` shifted-Halton points followed by a
/// Nelder–Mead polish of the best eight and of any `extra_starts`. `f` returns `None` where it
/// cannot be evaluated. With `on_sphere` the points lie on the unit sphere, otherwise in the
/// ball of radius [`BALL_SAMPLING_RADIUS`].
pub fn sup_norm_estimate_fn<F>(f: F, d: usize, on_sphere: bool, budget: usize, seed: u64, extra_starts: &[Vec<C64>]) -> SupEstimate
where
    F: Fn(&[C64]) -> Option<f64>,
{
    let radius = (!on_sphere).then_some(BALL_SAMPLING_RADIUS);
    let value_at = |z: &[C64]| f(z).filter(|v| v.is_finite()).unwrap_or(f64::NEG_INFINITY);
    let mut evaluations = 0usize;
    let mut best: Vec<(f64, Vec<C64>)> = Vec::with_capacity(POLISH_STARTS + 1);
    let mut halton = ShiftedHalton::new(2 * d + usize::from(!on_sphere), seed);
    for _ in 0..budget {
        let z = uniforms_to_point(&halton.next_point(), d, radius);
        let v = value_at(&z);
        evaluations += 1;
        if best.len() < POLISH_STARTS || v > best[best.len() - 1].0 {
            let at = best.partition_point(|(b, _)| *b >= v);
            best.insert(at, (v, z));
            best.truncate(POLISH_STARTS);
        }
    }
    let mut starts: Vec<Vec<C64>> = best.into_iter().map(|(_, z)| z).collect();
    for z in extra_starts {
        let x = point_to_reals(z);
        if let Some(p) = reals_to_point(&x, radius) {
            starts.push(p);
        }
    }
    let mut result = (f64::NEG_INFINITY, vec![c64(0.0, 0.0); d]);
    let polish_evals = 100 + 60 * 2 * d;
    for z0 in starts {
        let v0 = value_at(&z0);
        evaluations += 1;
        if v0 > result.0 {
            result = (v0, z0.clone());
        }
        let m = nelder_mead(
            |x| match reals_to_point(x, radius) {
                Some(z) => -value_at(&z),
                None => f64::INFINITY,
            },
            &point_to_reals(&z0),
            0.05,
            polish_evals,
            1e-15,
        );
        evaluations += m.evaluations;
        if let Some(z) = reals_to_point(&m.x, radius) {
            let v = value_at(&z);
            evaluations += 1;
            if v > result.0 {
                result = (v, z);
            }
        }
    }
    SupEstimate {
        value: result.0.max(0.0),
        argmax: result.1,
        evaluations,
        on_sphere,
    }
}

/// Sampled lower estimate of `sup_{B_d} |e|`. Polynomials are sampled on the sphere.
pub fn sup_norm_estimate(e: &Expr, d: usize, budget: usize, seed: u64) -> SupEstimate {
    sup_norm_estimate_with_starts(e, d, budget, seed, &[])
}

pub fn sup_norm_estimate_with_starts(e: &Expr, d: usize, budget: usize, seed: u64, extra_starts: &[Vec<C64>]) -> SupEstimate {
    match &**e {
        FunctionExpr::Poly(p) => sup_norm_estimate_fn(|z| Some(p.eval(z).norm()), d, true, budget, seed, extra_starts),
        _ => sup_norm_estimate_fn(
            |z| {
                Evaluator::<C64>::new(EvalOptions::default())
                    .eval_point(e, z)
                    .ok()
                    .map(|v| v.norm())
            },
            d,
            false,
            budget,
            seed,
            extra_starts,
        ),
    }
}
