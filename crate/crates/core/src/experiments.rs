//! Desk-scale experiments: compressed shifts, von Neumann ratios, counterexample search, the
//! lower-bound growth curve and the fuzz campaigns.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::expr::FunctionExpr;
use crate::linalg::{self, c64, CMat, C64};
use crate::optim::nelder_mead;
use crate::par::{derive_seed, rng_from_seed, Exec};
use crate::pick::{kernel_matrix, KernelSpec, PointConfiguration};
use crate::poly::Polynomial;
use crate::sampling::{sup_norm_estimate_fn, SupEstimate};
use crate::series::MonomialBasis;
use crate::tuple::{self, eval_poly_tuple, random_ball_point, random_commuting_tuple, MatrixTuple, TupleKind};

/// CSV rows plus a JSON summary of one experiment run.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub name: String,
    pub parameters: BTreeMap<String, Value>,
    pub seed: u64,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
    pub summary: BTreeMap<String, Value>,
    pub wall_time_seconds: f64,
}

impl ExperimentReport {
    pub fn new(name: &str, seed: u64, columns: &[&str]) -> Self {
        ExperimentReport {
            name: name.into(),
            parameters: BTreeMap::new(),
            seed,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            summary: BTreeMap::new(),
            wall_time_seconds: 0.0,
        }
    }

    pub fn param(&mut self, key: &str, v: impl Serialize) {
        self.parameters.insert(key.into(), json!(v));
    }

    pub fn stat(&mut self, key: &str, v: impl Serialize) {
        self.summary.insert(key.into(), json!(v));
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|v| match v {
                    Value::String(t) => t.clone(),
                    Value::Number(x) => match x.as_f64() {
                        Some(f) if !x.is_i64() && !x.is_u64() => format!("{f:.17e}"),
                        _ => x.to_string(),
                    },
                    other => other.to_string(),
                })
                .collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    /// Summary and parameters, without the rows. The wall time is left out so that reruns
    /// produce identical files.
    pub fn summary_json(&self) -> Value {
        json!({
            "name": self.name,
            "seed": self.seed,
            "parameters": self.parameters,
            "summary": self.summary,
            "row_count": self.rows.len(),
        })
    }

    pub fn file_stem(&self) -> String {
        format!("{}-{}", self.name, self.seed)
    }

    /// Writes `<name>-<seed>.csv` and `<name>-<seed>.json` into `dir`.
    pub fn write(&self, dir: &Path, extra: Option<Value>) -> std::io::Result<(PathBuf, PathBuf)> {
        let csv = dir.join(format!("{}.csv", self.file_stem()));
        let js = dir.join(format!("{}.json", self.file_stem()));
        std::fs::write(&csv, self.to_csv())?;
        let mut summary = self.summary_json();
        if let (Some(extra), Value::Object(map)) = (extra, &mut summary) {
            map.insert("details".into(), extra);
        }
        std::fs::write(&js, serde_json::to_string_pretty(&summary).expect("JSON values serialize"))?;
        Ok((csv, js))
    }
}

/// `binom(n, k)` in floating point.
fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Compression of the coordinate multipliers of the Drury–Arveson space to polynomials of
/// degree at most `k`, in the orthonormal monomial basis ordered by degree (see
/// [`MonomialBasis`]). `T_i e_α = ((α_i+1)/(|α|+1))^{1/2} e_{α+e_i}`, so the matrices are
/// lower triangular: `(T_i)[index(α+e_i), index(α)]`.
pub fn compressed_shift(d: usize, k: usize) -> Result<MatrixTuple> {
    if d == 0 {
        return Err(Error::Argument("compressed_shift needs d ≥ 1".into()));
    }
    let basis = MonomialBasis::get(d, k);
    let n = basis.len();
    let mut entries = vec![CMat::zeros(n, n); d];
    for col in 0..n {
        let alpha = basis.exponent(col);
        let total = basis.degree(col);
        if total == k {
            continue;
        }
        for (i, t) in entries.iter_mut().enumerate() {
            let mut next = alpha.to_vec();
            next[i] += 1;
            let row = basis.index_of(&next).expect("degree below the truncation");
            t[(row, col)] = c64(((f64::from(alpha[i]) + 1.0) / (total as f64 + 1.0)).sqrt(), 0.0);
        }
    }
    MatrixTuple::new(entries)
}

/// Dimension bookkeeping for a compressed shift: the implemented size `binom(d+k, d)` next to
/// the larger count `binom(dk+d, d)`.
pub fn compressed_shift_dimensions(d: usize, k: usize) -> (usize, f64) {
    (MonomialBasis::get(d, k).len(), binomial(d * k + d, d))
}

/// Compression of the coordinate multipliers to the span of the kernel functions at the
/// points: `T_i = G^{−1/2} diag(z_{·,i}) G^{1/2}` with `G` the kernel matrix. For this tuple
/// `‖p(T)‖` is the restriction multiplier norm of `p` on the points.
pub fn kernel_tuple(points: &PointConfiguration, spec: KernelSpec) -> Result<MatrixTuple> {
    let g = kernel_matrix(points, spec);
    if g.ill_conditioned {
        return Err(Error::IllConditioned {
            context: "kernel matrix of the point configuration".into(),
            rcond: g.min_eigenvalue / g.max_eigenvalue,
        });
    }
    let (lam, v) = linalg::hermitian_eigen(&g.matrix);
    let diag = |f: fn(f64) -> f64| CMat::from_diagonal(&nalgebra::DVector::from_iterator(lam.len(), lam.iter().map(|&l| c64(f(l), 0.0))));
    let half = &v * diag(f64::sqrt) * v.adjoint();
    let inv_half = &v * diag(|l| 1.0 / l.sqrt()) * v.adjoint();
    let entries = (0..points.dim())
        .map(|i| {
            let d = CMat::from_diagonal(&nalgebra::DVector::from_iterator(points.len(), points.points().iter().map(|z| z[i])));
            &inv_half * d * &half
        })
        .collect();
    MatrixTuple::new(entries)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct VnRatio {
    pub ratio: f64,
    pub numerator: f64,
    pub denominator: f64,
    /// `max |p(λ)|` over the joint spectrum.
    pub spectral_bound: f64,
}

/// Row-norm slack accepted when validating a row contraction.
pub const ROW_CONTRACTION_TOLERANCE: f64 = 1e-10;

fn poly_sup(p: &Polynomial, budget: usize, seed: u64, extra_starts: &[Vec<C64>]) -> SupEstimate {
    sup_norm_estimate_fn(|z| Some(p.eval(z).norm()), p.nvars(), true, budget, seed, extra_starts)
}

fn sphere_projections(points: &[Vec<C64>]) -> Vec<Vec<C64>> {
    points
        .iter()
        .filter_map(|z| {
            let r = linalg::norm2(z);
            (r > 1e-12).then(|| z.iter().map(|v| v / r).collect())
        })
        .collect()
}

/// `‖p(T)‖ / (sampled sup of |p|)` for a commuting row contraction `T`.
pub fn vn_ratio(p: &Polynomial, t: &MatrixTuple, budget: usize, seed: u64) -> Result<VnRatio> {
    vn_ratio_with_starts(p, t, budget, seed, &[])
}

/// As [`vn_ratio`], with extra polish starts for the sup estimate (the joint eigenvalues are
/// always added, projected to the sphere).
pub fn vn_ratio_with_starts(p: &Polynomial, t: &MatrixTuple, budget: usize, seed: u64, extra_starts: &[Vec<C64>]) -> Result<VnRatio> {
    if p.is_zero() {
        return Err(Error::Argument("vn_ratio of the zero polynomial".into()));
    }
    if p.nvars() != t.d() {
        return Err(Error::Structure(format!("polynomial in {} variables, tuple of {}", p.nvars(), t.d())));
    }
    let diag = tuple::validate_tuple(t, 1e-10 * t.scale().max(1.0));
    if !diag.is_commuting || diag.row_norm > 1.0 + ROW_CONTRACTION_TOLERANCE {
        return Err(Error::Precondition(format!(
            "not a commuting row contraction: commutator {:.3e}, row norm {}",
            diag.commutation_residual, diag.row_norm
        )));
    }
    let spectrum = tuple::joint_spectrum(t)?.points;
    let spectral_bound = spectrum.iter().map(|z| p.eval(z).norm()).fold(0.0, f64::max);
    let mut starts = sphere_projections(&spectrum);
    starts.extend(extra_starts.iter().cloned());
    let numerator = linalg::op_norm(&eval_poly_tuple(p, t)?);
    let denominator = poly_sup(p, budget, seed, &starts).value;
    Ok(VnRatio {
        ratio: numerator / denominator,
        numerator,
        denominator,
        spectral_bound,
    })
}

/// Random polynomial with complex Gaussian coefficients on all monomials of degree in `degrees`,
/// normalized to unit coefficient norm.
pub fn random_polynomial<R: Rng + ?Sized>(rng: &mut R, d: usize, degrees: std::ops::RangeInclusive<usize>) -> Polynomial {
    let basis = MonomialBasis::get(d, *degrees.end());
    let mut terms = Vec::new();
    for i in 0..basis.len() {
        if degrees.contains(&basis.degree(i)) {
            terms.push((basis.exponent(i).to_vec(), linalg::complex_gaussian(rng)));
        }
    }
    normalize(Polynomial::from_terms(d, terms).expect("exponents match"))
}

fn normalize(p: Polynomial) -> Polynomial {
    let norm = p.terms().map(|(_, c)| c.norm_sqr()).sum::<f64>().sqrt();
    if norm > 0.0 {
        p.scale(c64(1.0 / norm, 0.0))
    } else {
        p
    }
}

fn coefficients_to_reals(p: &Polynomial, exps: &[Vec<u32>]) -> Vec<f64> {
    exps.iter().flat_map(|e| {
        let c = p.coefficient(e);
        [c.re, c.im]
    })
    .collect()
}

fn reals_to_polynomial(x: &[f64], exps: &[Vec<u32>], d: usize) -> Polynomial {
    Polynomial::from_terms(d, exps.iter().cloned().zip(x.chunks(2).map(|c| c64(c[0], c[1])))).expect("exponents match")
}

/// Budgets shared by the search-style experiments.
#[derive(Debug, Clone, Copy, Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchBudgets {
    /// Sup-norm samples inside coefficient polish.
    pub cheap_sup: usize,
    /// Sup-norm samples for reported ratios.
    pub final_sup: usize,
    /// Objective evaluations per polish.
    pub polish_evals: usize,
}

impl Default for SearchBudgets {
    fn default() -> Self {
        SearchBudgets {
            cheap_sup: 64,
            final_sup: 2048,
            polish_evals: 60,
        }
    }
}

/// Maximizes `‖p(T)‖/sup|p|` over coefficients of the fixed monomials, with cheap sup estimates.
fn polish_coefficients(p: &Polynomial, t: &MatrixTuple, exps: &[Vec<u32>], budgets: SearchBudgets, seed: u64) -> (Polynomial, Vec<C64>) {
    let d = p.nvars();
    let mut argmax = Vec::new();
    let mut best = (f64::NEG_INFINITY, p.clone());
    nelder_mead(
        |x| {
            let q = reals_to_polynomial(x, exps, d);
            if q.is_zero() {
                return f64::INFINITY;
            }
            let Ok(num) = eval_poly_tuple(&q, t).map(|m| linalg::op_norm(&m)) else {
                return f64::INFINITY;
            };
            let sup = poly_sup(&q, budgets.cheap_sup, seed, &[]);
            let r = num / sup.value;
            if r > best.0 {
                best = (r, q);
                argmax = sup.argmax;
            }
            -r
        },
        &coefficients_to_reals(p, exps),
        0.1,
        budgets.polish_evals,
        1e-12,
    );
    (normalize(best.1), argmax)
}

/// Input for warm-started searches.
#[derive(Debug, Clone)]
pub struct WarmStart {
    pub p: Polynomial,
    pub points: PointConfiguration,
}

#[derive(Debug, Clone, Serialize)]
pub struct Candidate {
    pub p: Polynomial,
    pub points: PointConfiguration,
    pub tuple: MatrixTuple,
    pub ratio: VnRatio,
}

#[derive(Debug, Clone, Serialize)]
pub struct CounterexampleReport {
    pub report: ExperimentReport,
    pub best: Option<Candidate>,
}

/// Ratio evaluations per search round: one start, one coefficient polish, one point polish.
fn round_cost(budgets: SearchBudgets) -> usize {
    1 + 2 * budgets.polish_evals
}

/// Alternating search for large von Neumann ratios over kernel tuples of `n` points in `B_d`
/// (which are diagonalizable commuting row contractions) and polynomials of degree at most
/// `max_degree`. `budget` counts ratio evaluations.
#[allow(clippy::too_many_arguments)]
pub fn counterexample_search(
    n: usize,
    d: usize,
    max_degree: usize,
    budget: usize,
    seed: u64,
    warm_start: Option<&WarmStart>,
    budgets: SearchBudgets,
    exec: Exec,
) -> Result<CounterexampleReport> {
    if n == 0 || d == 0 || max_degree == 0 {
        return Err(Error::Argument("counterexample_search needs n, d, max_degree ≥ 1".into()));
    }
    if let Some(w) = warm_start {
        if w.p.nvars() != d || w.points.dim() != d {
            return Err(Error::Structure("warm start dimension does not match d".into()));
        }
    }
    let clock = Instant::now();
    let spec = KernelSpec::drury_arveson();
    let cost = round_cost(budgets);
    let mut rounds = budget / cost;
    if warm_start.is_some() {
        rounds = rounds.max(1);
    }
    let polish = budget > 0;
    let exps: Vec<Vec<u32>> = {
        let basis = MonomialBasis::get(d, max_degree);
        (0..basis.len()).map(|i| basis.exponent(i).to_vec()).collect()
    };

    let outcomes = exec.map(rounds, |r| -> Result<Candidate> {
        let round_seed = derive_seed(seed, r as u64);
        let mut rng = rng_from_seed(round_seed);
        let (mut p, mut points) = match (r, warm_start) {
            (0, Some(w)) => (w.p.clone(), w.points.clone()),
            _ => {
                let pts: Vec<Vec<C64>> = (0..n).map(|_| random_ball_point(&mut rng, d, 0.95)).collect();
                (random_polynomial(&mut rng, d, 0..=max_degree), PointConfiguration::merged(&pts)?.0)
            }
        };
        let mut extra = Vec::new();
        if polish {
            let t = kernel_tuple(&points, spec)?;
            let (q, argmax) = polish_coefficients(&p, &t, &exps, budgets, round_seed);
            p = q;
            extra.push(argmax);
            // the sup of p is fixed now, so only the numerator moves with the points
            let sup = poly_sup(&p, budgets.cheap_sup, round_seed, &extra).value;
            let dn = points.len();
            let start: Vec<f64> = points.points().iter().flatten().flat_map(|v| [v.re, v.im]).collect();
            let mut best_pts = points.clone();
            let mut best_val = f64::NEG_INFINITY;
            nelder_mead(
                |x| {
                    let mut pts: Vec<Vec<C64>> = x.chunks(2 * d).map(|c| c.chunks(2).map(|v| c64(v[0], v[1])).collect()).collect();
                    for z in &mut pts {
                        let rr = linalg::norm2(z);
                        if rr > 0.999 {
                            z.iter_mut().for_each(|v| *v *= 0.999 / rr);
                        }
                    }
                    let Ok((cfg, _)) = PointConfiguration::merged(&pts) else { return f64::INFINITY };
                    if cfg.len() < dn {
                        return f64::INFINITY;
                    }
                    let Ok(t) = kernel_tuple(&cfg, spec) else { return f64::INFINITY };
                    let Ok(v) = eval_poly_tuple(&p, &t).map(|m| linalg::op_norm(&m) / sup) else { return f64::INFINITY };
                    if v > best_val {
                        best_val = v;
                        best_pts = cfg;
                    }
                    -v
                },
                &start,
                0.05,
                budgets.polish_evals,
                1e-12,
            );
            points = best_pts;
        }
        let t = kernel_tuple(&points, spec)?;
        let ratio = vn_ratio_with_starts(&p, &t, budgets.final_sup, round_seed, &extra)?;
        Ok(Candidate { p, points, tuple: t, ratio })
    });

    let mut report = ExperimentReport::new(
        "counterexample-search",
        seed,
        &["round", "ratio", "numerator", "denominator", "spectral_bound"],
    );
    report.param("n", n);
    report.param("d", d);
    report.param("max_degree", max_degree);
    report.param("budget", budget);
    report.param("budgets", budgets);
    report.param("warm_start", warm_start.is_some());
    let mut best: Option<Candidate> = None;
    let mut failures = 0usize;
    for (r, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(c) => {
                report.rows.push(vec![json!(r), json!(c.ratio.ratio), json!(c.ratio.numerator), json!(c.ratio.denominator), json!(c.ratio.spectral_bound)]);
                if best.as_ref().is_none_or(|b| c.ratio.ratio > b.ratio.ratio) {
                    best = Some(c);
                }
            }
            Err(_) => failures += 1,
        }
    }
    report.stat("rounds", rounds);
    report.stat("failed_rounds", failures);
    report.stat("best_ratio", best.as_ref().map(|b| b.ratio.ratio));
    report.wall_time_seconds = clock.elapsed().as_secs_f64();
    Ok(CounterexampleReport { report, best })
}

/// Trial polynomials per degree for [`cdn_lower_curve`].
#[derive(Debug, Clone, Copy, Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrialSpec {
    pub trials: usize,
    pub polish_top: usize,
    pub budgets: SearchBudgets,
}

impl Default for TrialSpec {
    fn default() -> Self {
        TrialSpec {
            trials: 64,
            polish_top: 4,
            budgets: SearchBudgets::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CurvePoint {
    pub k: usize,
    pub dimension: usize,
    pub best_ratio: f64,
    pub numerator: f64,
    pub denominator: f64,
    /// The best polynomial is the one carried over from the previous degree.
    pub carried: bool,
    pub best_polynomial: Polynomial,
}

#[derive(Debug, Clone, Serialize)]
pub struct CurveReport {
    pub report: ExperimentReport,
    pub points: Vec<CurvePoint>,
}

/// Best measured `‖p(T)‖/sup|p|` on `compressed_shift(d, k)` for `k = 1..=k_max`, over random
/// homogeneous degree-`k` polynomials (the best few polished) and the previous degree's winner.
/// The winner's sup estimate is carried with it, and `p(T_{k−1})` is a compression of `p(T_k)`,
/// so the curve is nondecreasing up to rounding.
pub fn cdn_lower_curve(d: usize, k_max: usize, spec: TrialSpec, seed: u64, exec: Exec) -> Result<CurveReport> {
    if d == 0 || k_max == 0 || spec.trials == 0 {
        return Err(Error::Argument("cdn_lower_curve needs d, k_max, trials ≥ 1".into()));
    }
    let clock = Instant::now();
    let mut report = ExperimentReport::new(
        "cdn-curve",
        seed,
        &["k", "dimension", "best_ratio", "numerator", "denominator", "carried"],
    );
    report.param("d", d);
    report.param("k_max", k_max);
    report.param("trials", spec);
    let mut points: Vec<CurvePoint> = Vec::new();
    let mut carried: Option<(Polynomial, f64)> = None;
    for k in 1..=k_max {
        let t = compressed_shift(d, k)?;
        let (dimension, alt) = compressed_shift_dimensions(d, k);
        let k_seed = derive_seed(seed, k as u64);
        let exps: Vec<Vec<u32>> = {
            let basis = MonomialBasis::get(d, k);
            (0..basis.len()).filter(|&i| basis.degree(i) == k).map(|i| basis.exponent(i).to_vec()).collect()
        };
        let trials = exec.map(spec.trials, |i| -> Result<(f64, Polynomial)> {
            let mut rng = rng_from_seed(derive_seed(k_seed, i as u64));
            let p = random_polynomial(&mut rng, d, k..=k);
            let num = linalg::op_norm(&eval_poly_tuple(&p, &t)?);
            Ok((num / poly_sup(&p, spec.budgets.cheap_sup, k_seed, &[]).value, p))
        });
        let mut trials: Vec<(usize, f64, Polynomial)> = trials
            .into_iter()
            .enumerate()
            .filter_map(|(i, r)| r.ok().map(|(v, p)| (i, v, p)))
            .collect();
        trials.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        trials.truncate(spec.polish_top.max(1));
        let finals = exec.map(trials.len(), |j| -> Result<(VnRatio, Polynomial)> {
            let (i, _, p) = &trials[j];
            let polish_seed = derive_seed(k_seed, (spec.trials + i) as u64);
            let (q, argmax) = polish_coefficients(p, &t, &exps, spec.budgets, polish_seed);
            let num = linalg::op_norm(&eval_poly_tuple(&q, &t)?);
            let sup = poly_sup(&q, spec.budgets.final_sup, polish_seed, &[argmax]).value;
            Ok((
                VnRatio {
                    ratio: num / sup,
                    numerator: num,
                    denominator: sup,
                    spectral_bound: q.constant_term().norm(),
                },
                q,
            ))
        });
        let mut best: Option<(VnRatio, Polynomial, bool)> = None;
        for (r, q) in finals.into_iter().flatten() {
            if best.as_ref().is_none_or(|b| r.ratio > b.0.ratio) {
                best = Some((r, q, false));
            }
        }
        if let Some((p, sup)) = &carried {
            let num = linalg::op_norm(&eval_poly_tuple(p, &t)?);
            let r = VnRatio {
                ratio: num / sup,
                numerator: num,
                denominator: *sup,
                spectral_bound: p.constant_term().norm(),
            };
            if best.as_ref().is_none_or(|b| r.ratio >= b.0.ratio) {
                best = Some((r, p.clone(), true));
            }
        }
        let (r, p, was_carried) = best.ok_or_else(|| Error::Numerical(format!("no trial polynomial evaluated at k = {k}")))?;
        report.rows.push(vec![json!(k), json!(dimension), json!(r.ratio), json!(r.numerator), json!(r.denominator), json!(was_carried)]);
        report.stat(&format!("binom_dk_plus_d_choose_d_k{k}"), alt);
        carried = Some((p.clone(), r.denominator));
        points.push(CurvePoint {
            k,
            dimension,
            best_ratio: r.ratio,
            numerator: r.numerator,
            denominator: r.denominator,
            carried: was_carried,
            best_polynomial: p,
        });
    }
    report.stat(
        "dimension_note",
        "dimension = binom(d+k, d), the number of monomials of degree at most k; binom(dk+d, d) is listed per k for comparison",
    );
    report.stat("max_ratio", points.iter().map(|p| p.best_ratio).fold(f64::NEG_INFINITY, f64::max));
    report.stat(
        "nondecreasing",
        points.windows(2).all(|w| w[1].best_ratio >= w[0].best_ratio * (1.0 - 1e-12)),
    );
    report.wall_time_seconds = clock.elapsed().as_secs_f64();
    Ok(CurveReport { report, points })
}

#[derive(Debug, Clone, Serialize)]
pub struct FuzzReport {
    pub report: ExperimentReport,
    pub max_ratio: f64,
    /// Trials with ratio above `1 + tolerance` (meaningful for `n = 2`).
    pub violations: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, Copy, Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FuzzSpec {
    pub max_d: usize,
    pub max_degree: usize,
    pub sup_budget: usize,
    pub tolerance: f64,
}

impl Default for FuzzSpec {
    fn default() -> Self {
        FuzzSpec {
            max_d: 4,
            max_degree: 4,
            sup_budget: 256,
            tolerance: 1e-6,
        }
    }
}

/// Random diagonalizable commuting `n×n` row contractions against random polynomials.
/// Even trials use kernel tuples of random points, odd trials conjugated diagonal tuples.
pub fn vn_fuzz(n: usize, trials: usize, seed: u64, spec: FuzzSpec, exec: Exec) -> Result<FuzzReport> {
    if n == 0 || spec.max_d == 0 || spec.max_degree == 0 {
        return Err(Error::Argument("vn_fuzz needs n, max_d, max_degree ≥ 1".into()));
    }
    let clock = Instant::now();
    let outcomes = exec.map(trials, |i| -> Result<(usize, usize, &'static str, VnRatio)> {
        let trial_seed = derive_seed(seed, i as u64);
        let mut rng = rng_from_seed(trial_seed);
        let d = rng.random_range(1..=spec.max_d);
        let degree = rng.random_range(1..=spec.max_degree);
        let (kind, t) = if i % 2 == 0 {
            let radius: f64 = rng.random_range(0.5..1.0);
            let pts: Vec<Vec<C64>> = (0..n).map(|_| random_ball_point(&mut rng, d, radius)).collect();
            ("kernel", kernel_tuple(&PointConfiguration::merged(&pts)?.0, KernelSpec::drury_arveson())?)
        } else {
            ("diagonal-conjugated", random_commuting_tuple(n, d, rng.random(), TupleKind::DiagonalConjugated))
        };
        let p = random_polynomial(&mut rng, d, 0..=degree);
        Ok((d, degree, kind, vn_ratio(&p, &t, spec.sup_budget, trial_seed)?))
    });
    let mut report = ExperimentReport::new(
        "vn-fuzz",
        seed,
        &["trial", "d", "degree", "kind", "numerator", "denominator", "ratio"],
    );
    report.param("n", n);
    report.param("trials", trials);
    report.param("spec", spec);
    let (mut max_ratio, mut violations, mut failures, mut sum) = (f64::NEG_INFINITY, 0usize, 0usize, 0.0);
    for (i, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok((d, degree, kind, r)) => {
                report.rows.push(vec![json!(i), json!(d), json!(degree), json!(kind), json!(r.numerator), json!(r.denominator), json!(r.ratio)]);
                max_ratio = max_ratio.max(r.ratio);
                sum += r.ratio;
                if r.ratio > 1.0 + spec.tolerance {
                    violations += 1;
                }
            }
            Err(_) => failures += 1,
        }
    }
    let done = trials - failures;
    report.stat("max_ratio", max_ratio);
    report.stat("mean_ratio", if done > 0 { sum / done as f64 } else { f64::NAN });
    report.stat("violations", violations);
    report.stat("failed_trials", failures);
    report.wall_time_seconds = clock.elapsed().as_secs_f64();
    Ok(FuzzReport {
        report,
        max_ratio,
        violations,
        failures,
    })
}

/// The three-point instance: `p = z₁² + z₂²` at `(4/5, 1/5)`, `(1/5, 4/5)`, `(2/5, 2/5)`.
pub fn three_point_instance() -> (Polynomial, PointConfiguration) {
    let r = |x: f64| c64(x, 0.0);
    let p = &Polynomial::monomial(vec![2, 0], r(1.0)) + &Polynomial::monomial(vec![0, 2], r(1.0));
    let pts = PointConfiguration::new(vec![vec![r(0.8), r(0.2)], vec![r(0.2), r(0.8)], vec![r(0.4), r(0.4)]]).expect("valid points");
    (p, pts)
}

/// `p` as an expression, for the search APIs.
pub fn poly_expr(p: &Polynomial) -> crate::expr::Expr {
    FunctionExpr::poly(p.clone())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pick::restriction_multiplier_norm;

    #[test]
    fn compressed_shift_small_cases() {
        let t = compressed_shift(1, 1).unwrap();
        assert_eq!(t.entry(0), &CMat::from_row_slice(2, 2, &[c64(0.0, 0.0), c64(0.0, 0.0), c64(1.0, 0.0), c64(0.0, 0.0)]));
        for (d, k) in [(1, 3), (2, 2), (3, 2), (2, 4)] {
            let t = compressed_shift(d, k).unwrap();
            assert!(t.commutation_residual() <= 1e-14);
            assert!(t.row_norm() <= 1.0 + 1e-14);
            for m in t.entries() {
                let mut power = CMat::identity(t.n(), t.n());
                for _ in 0..=k {
                    power = &power * m;
                }
                assert!(power.iter().all(|v| *v == c64(0.0, 0.0)));
            }
        }
        let (n, alt) = compressed_shift_dimensions(2, 3);
        assert_eq!((n, alt), (10, 28.0));
    }

    #[test]
    fn kernel_tuple_realizes_restriction_norm() {
        let (p, pts) = three_point_instance();
        let t = kernel_tuple(&pts, KernelSpec::drury_arveson()).unwrap();
        assert!(t.commutation_residual() < 1e-12);
        assert!(t.row_norm() <= 1.0 + 1e-12);
        let num = linalg::op_norm(&eval_poly_tuple(&p, &t).unwrap());
        let values: Vec<C64> = pts.points().iter().map(|z| p.eval(z)).collect();
        let norm = restriction_multiplier_norm(&values, &pts, KernelSpec::drury_arveson()).unwrap().value;
        assert!((num - norm).abs() < 1e-10, "{num} vs {norm}");
        let r = vn_ratio(&p, &t, 512, 1).unwrap();
        assert!(r.ratio > 1.0);
    }

    #[test]
    fn vn_ratio_edge_cases() {
        let t = MatrixTuple::zeros(2, 3);
        let p = &Polynomial::constant(2, c64(0.5, 0.0)) + &Polynomial::coordinate(2, 0);
        let r = vn_ratio(&p, &t, 256, 3).unwrap();
        assert!((r.numerator - 0.5).abs() < 1e-15);
        assert!((r.denominator - 1.5).abs() < 1e-9);
        assert!(matches!(vn_ratio(&Polynomial::zero(2), &t, 16, 0), Err(Error::Argument(_))));
        let big = MatrixTuple::diagonal(&[vec![c64(0.9, 0.0), c64(0.9, 0.0)]]).unwrap();
        assert!(matches!(vn_ratio(&p, &big, 16, 0), Err(Error::Precondition(_))));
    }

    #[test]
    fn warm_started_three_point_search() {
        let (p, points) = three_point_instance();
        let w = WarmStart { p, points };
        let r = counterexample_search(3, 2, 2, 0, 1, Some(&w), SearchBudgets::default(), Exec::Sequential).unwrap();
        assert_eq!(r.report.rows.len(), 1);
        let best = r.best.unwrap();
        assert!(best.ratio.ratio > 1.0);
        assert_eq!(best.points, w.points);
    }

    #[test]
    fn curve_is_monotone_and_grows() {
        let spec = TrialSpec {
            trials: 8,
            polish_top: 2,
            budgets: SearchBudgets {
                cheap_sup: 32,
                final_sup: 512,
                polish_evals: 20,
            },
        };
        let c = cdn_lower_curve(2, 3, spec, 4, Exec::Sequential).unwrap();
        for w in c.points.windows(2) {
            assert!(w[1].best_ratio >= w[0].best_ratio * (1.0 - 1e-12));
        }
        assert!(c.points.iter().any(|p| p.best_ratio > 1.0));
        let csv = c.report.to_csv();
        assert!(csv.starts_with("k,dimension,best_ratio"));
        assert_eq!(csv.lines().count(), 4);
    }

    #[test]
    fn fuzz_is_reproducible() {
        let spec = FuzzSpec {
            sup_budget: 64,
            ..FuzzSpec::default()
        };
        let a = vn_fuzz(2, 12, 5, spec, Exec::Sequential).unwrap();
        let b = vn_fuzz(2, 12, 5, spec, Exec::Parallel).unwrap();
        assert_eq!(a.report.rows, b.report.rows);
        assert_eq!(a.violations, 0);
        assert_eq!(a.failures, 0);
    }
}
