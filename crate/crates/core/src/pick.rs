//! Kernels `(1 − ⟨z,w⟩)^{−a}`, Pick matrices, restriction multiplier norms, the coordinate
//! row criterion and the n-point norm search.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{EvalOptions, Evaluator, Expr};
use crate::linalg::{self, c64, CMat, C64};
use crate::optim::nelder_mead;
use crate::par::{derive_seed, rng_from_seed, Exec};
use crate::tuple::random_ball_point;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub a: f64,
}

impl KernelSpec {
    pub fn new(a: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::Argument(format!("kernel parameter a must be positive, got {a}")));
        }
        Ok(KernelSpec { a })
    }

    /// `a = 1`.
    pub fn drury_arveson() -> Self {
        KernelSpec { a: 1.0 }
    }

    pub fn is_drury_arveson(&self) -> bool {
        self.a == 1.0
    }

    /// `(1 − ⟨z,w⟩)^{−a}` on the principal branch.
    pub fn kernel(&self, z: &[C64], w: &[C64]) -> C64 {
        let t = linalg::inner(z, w);
        assert!(t.norm() < 1.0, "kernel argument ⟨z,w⟩ = {t} is not in the unit disk");
        let base = c64(1.0, 0.0) - t;
        if self.a == 1.0 {
            base.inv()
        } else {
            (-self.a * base.ln()).exp()
        }
    }
}

impl Default for KernelSpec {
    fn default() -> Self {
        KernelSpec::drury_arveson()
    }
}

pub const SEPARATION_TOLERANCE: f64 = 1e-8;

/// Finite set of distinct points in the open unit ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawConfiguration")]
pub struct PointConfiguration {
    #[serde(with = "crate::json::points")]
    points: Vec<Vec<C64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfiguration {
    #[serde(with = "crate::json::points")]
    points: Vec<Vec<C64>>,
}

impl TryFrom<RawConfiguration> for PointConfiguration {
    type Error = Error;

    fn try_from(raw: RawConfiguration) -> Result<Self> {
        PointConfiguration::new(raw.points)
    }
}

fn distance(z: &[C64], w: &[C64]) -> f64 {
    z.iter().zip(w).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt()
}

fn check_points(points: &[Vec<C64>]) -> Result<usize> {
    let d = points
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::Structure("a point configuration needs at least one point".into()))?;
    if d == 0 {
        return Err(Error::Structure("points must have at least one coordinate".into()));
    }
    for (i, z) in points.iter().enumerate() {
        if z.len() != d {
            return Err(Error::Structure(format!("point {i} has {} coordinates, expected {d}", z.len())));
        }
        let r = linalg::norm2(z);
        if !(r < 1.0) {
            return Err(Error::domain("point configuration", format!("point {i} has norm {r} ≥ 1")));
        }
    }
    Ok(d)
}

impl PointConfiguration {
    pub fn new(points: Vec<Vec<C64>>) -> Result<Self> {
        check_points(&points)?;
        for i in 0..points.len() {
            for j in 0..i {
                if distance(&points[i], &points[j]) <= SEPARATION_TOLERANCE {
                    return Err(Error::Structure(format!("points {j} and {i} coincide")));
                }
            }
        }
        Ok(PointConfiguration { points })
    }

    /// Builds a configuration after merging points closer than [`SEPARATION_TOLERANCE`]; returns
    /// the indices of the kept representatives.
    pub fn merged(points: &[Vec<C64>]) -> Result<(Self, Vec<usize>)> {
        check_points(points)?;
        let mut kept: Vec<usize> = Vec::new();
        for (i, z) in points.iter().enumerate() {
            if kept.iter().all(|&k| distance(&points[k], z) > SEPARATION_TOLERANCE) {
                kept.push(i);
            }
        }
        let config = PointConfiguration {
            points: kept.iter().map(|&k| points[k].clone()).collect(),
        };
        Ok((config, kept))
    }

    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<C64>] {
        &self.points
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        PointConfiguration::new(indices.iter().map(|&i| self.points[i].clone()).collect())
    }
}

/// Kernel matrix with its eigenvalue range.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    pub matrix: CMat,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
    /// `min eigenvalue < 1e−13·max eigenvalue`.
    pub ill_conditioned: bool,
}

pub const KERNEL_CONDITION_RATIO: f64 = 1e-13;

pub fn kernel_matrix(f: &PointConfiguration, spec: KernelSpec) -> KernelMatrix {
    let m = f.len();
    let pts = f.points();
    let mut k = CMat::zeros(m, m);
    for i in 0..m {
        for j in 0..=i {
            let v = spec.kernel(&pts[i], &pts[j]);
            k[(i, j)] = v;
            k[(j, i)] = v.conj();
        }
        k[(i, i)] = c64(k[(i, i)].re, 0.0);
    }
    let eig = linalg::hermitian_eigenvalues(&k);
    let (min, max) = (eig[0], eig[m - 1]);
    KernelMatrix {
        matrix: k,
        min_eigenvalue: min,
        max_eigenvalue: max,
        ill_conditioned: min < KERNEL_CONDITION_RATIO * max,
    }
}

fn check_values(values: &[C64], f: &PointConfiguration) -> Result<()> {
    if values.len() != f.len() {
        return Err(Error::Structure(format!("{} values for {} points", values.len(), f.len())));
    }
    Ok(())
}

/// `(c² − f(z_i)·conj f(z_j))·k(z_i, z_j)`.
pub fn pick_matrix(values: &[C64], f: &PointConfiguration, spec: KernelSpec, c: f64) -> Result<CMat> {
    check_values(values, f)?;
    let k = kernel_matrix(f, spec).matrix;
    Ok(pick_from_kernel(values, &k, c))
}

fn pick_from_kernel(values: &[C64], k: &CMat, c: f64) -> CMat {
    let m = values.len();
    let mut p = CMat::from_fn(m, m, |i, j| (c64(c * c, 0.0) - values[i] * values[j].conj()) * k[(i, j)]);
    for i in 0..m {
        p[(i, i)] = c64(p[(i, i)].re, 0.0);
    }
    p
}

/// Relative PSD tolerance: a Hermitian `P` is accepted when `λ_min(P) ≥ −1e−10·tr(P)`.
pub const PSD_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Serialize)]
pub struct PickCertificate {
    pub c: f64,
    #[serde(with = "crate::json::matrix")]
    pub pick_matrix: CMat,
    pub min_eigenvalue: f64,
    pub feasible: bool,
    pub determinant: f64,
}

pub fn pick_certificate(values: &[C64], f: &PointConfiguration, spec: KernelSpec, c: f64) -> Result<PickCertificate> {
    let p = pick_matrix(values, f, spec, c)?;
    let eig = linalg::hermitian_eigenvalues(&p);
    let trace: f64 = (0..p.nrows()).map(|i| p[(i, i)].re).sum();
    Ok(PickCertificate {
        c,
        min_eigenvalue: eig[0],
        feasible: eig[0] >= -PSD_TOLERANCE * trace.abs(),
        determinant: eig.iter().product(),
        pick_matrix: p,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormMethod {
    ClosedForm,
    BisectionEigen,
    BisectionCholesky,
}

#[derive(Debug, Clone, Serialize)]
pub struct RestrictionNorm {
    pub value: f64,
    pub method: NormMethod,
    pub kernel_min_eigenvalue: f64,
    pub kernel_max_eigenvalue: f64,
}

/// Least `c ≥ 0` with `c²K − DKD*` positive semidefinite, `D = diag(values)`.
///
/// Closed form `λ_max(K^{−1/2} D K D* K^{−1/2})^{1/2}`; when `K` is ill-conditioned the value
/// comes from bisection with the eigenvalue PSD test instead.
pub fn restriction_multiplier_norm(values: &[C64], f: &PointConfiguration, spec: KernelSpec) -> Result<RestrictionNorm> {
    check_values(values, f)?;
    let km = kernel_matrix(f, spec);
    let (value, method) = if km.ill_conditioned {
        (bisect(values, &km, PsdTest::Eigen), NormMethod::BisectionEigen)
    } else {
        (closed_form(values, &km.matrix), NormMethod::ClosedForm)
    };
    Ok(RestrictionNorm {
        value,
        method,
        kernel_min_eigenvalue: km.min_eigenvalue,
        kernel_max_eigenvalue: km.max_eigenvalue,
    })
}

fn closed_form(values: &[C64], k: &CMat) -> f64 {
    if values.len() == 1 {
        return values[0].norm();
    }
    let (lam, v) = linalg::hermitian_eigen(k);
    let inv_sqrt = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
        lam.len(),
        lam.iter().map(|l| c64(1.0 / l.sqrt(), 0.0)),
    ));
    let k_inv_half = &v * inv_sqrt * v.adjoint();
    let d = CMat::from_diagonal(&nalgebra::DVector::from_column_slice(values));
    let m = &k_inv_half * &d * k * d.adjoint() * &k_inv_half;
    let m = (&m + m.adjoint()) * c64(0.5, 0.0);
    let top = *linalg::hermitian_eigenvalues(&m).last().expect("non-empty");
    top.max(0.0).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PsdTest {
    /// Cholesky factorization succeeds (strict, no tolerance).
    Cholesky,
    /// `λ_min ≥ −1e−10·trace`.
    Eigen,
}

fn feasible(values: &[C64], k: &CMat, c: f64, test: PsdTest) -> bool {
    let p = pick_from_kernel(values, k, c);
    match test {
        PsdTest::Cholesky => linalg::cholesky_is_positive_definite(&p),
        PsdTest::Eigen => {
            let trace: f64 = (0..p.nrows()).map(|i| p[(i, i)].re).sum();
            linalg::hermitian_eigenvalues(&p)[0] >= -PSD_TOLERANCE * trace.abs()
        }
    }
}

const BISECTION_STEPS: usize = 60;

fn bisect(values: &[C64], km: &KernelMatrix, test: PsdTest) -> f64 {
    let fmax = values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    if fmax == 0.0 || values.len() == 1 {
        return fmax;
    }
    let mut lo = fmax;
    let ratio = km.max_eigenvalue / km.min_eigenvalue.max(f64::MIN_POSITIVE);
    let mut hi = fmax * ratio.sqrt() * (1.0 + 1e-12);
    if !hi.is_finite() {
        hi = f64::MAX.sqrt();
    }
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if feasible(values, &km.matrix, mid, test) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

/// Independent bisection value of the restriction norm with the chosen PSD test.
pub fn restriction_norm_bisection(values: &[C64], f: &PointConfiguration, spec: KernelSpec, test: PsdTest) -> Result<f64> {
    check_values(values, f)?;
    Ok(bisect(values, &kernel_matrix(f, spec), test))
}

/// Outcome of the coordinate row criterion `c² ≤ (a+n)/(n+1)` for all `n ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RowCondition {
    pub holds: bool,
    pub first_failing: Option<u64>,
    /// The explicit scan over `0..=n_max` agrees with the analytic case split.
    pub scan_consistent: bool,
}

fn row_inequality(c2: f64, a: f64, n: u64) -> bool {
    let n = n as f64;
    c2 * (n + 1.0) <= a + n
}

/// Whether the row `[c·z_1, …, c·z_d]` is contractive on the space with kernel parameter `a`.
/// `(a+n)/(n+1)` is monotone in `n`, so the infimum is `a` when `a ≤ 1` (attained at `n = 0`)
/// and the limit `1` otherwise.
pub fn coordinate_row_condition(c: f64, spec: KernelSpec, n_max: u64) -> RowCondition {
    let a = spec.a;
    let c2 = c * c;
    let first_failing = if !row_inequality(c2, a, 0) {
        Some(0)
    } else if a <= 1.0 || c2 <= 1.0 {
        None
    } else {
        // 1 < c² ≤ a: first n with n(c² − 1) > a − c²
        let mut n = ((a - c2) / (c2 - 1.0)).floor().max(0.0) as u64 + 1;
        while n > 1 && !row_inequality(c2, a, n - 1) {
            n -= 1;
        }
        while row_inequality(c2, a, n) {
            n += 1;
        }
        Some(n)
    };
    let scanned = (0..=n_max).find(|&n| !row_inequality(c2, a, n));
    let expected_in_scan = first_failing.filter(|&n| n <= n_max);
    RowCondition {
        holds: first_failing.is_none(),
        first_failing,
        scan_consistent: scanned == expected_in_scan,
    }
}

/// Norm of the coordinate row `[z_1, …, z_d]`: `max(1, a^{−1/2})`.
pub fn coordinate_row_norm(spec: KernelSpec) -> f64 {
    1.0f64.max(spec.a.powf(-0.5))
}

pub const ROW_PROBE: f64 = 1e-9;

/// Checks that the criterion flips at the scaling `c = 1/‖row‖`: it holds at `c − 1e−9` and
/// fails at `c + 1e−9`.
pub fn coordinate_row_norm_checked(spec: KernelSpec, n_max: u64) -> Result<f64> {
    let norm = coordinate_row_norm(spec);
    let threshold = 1.0 / norm;
    let below = coordinate_row_condition(threshold - ROW_PROBE, spec, n_max);
    let above = coordinate_row_condition(threshold + ROW_PROBE, spec, n_max);
    if below.holds && !above.holds && below.scan_consistent && above.scan_consistent {
        Ok(norm)
    } else {
        Err(Error::Numerical(format!(
            "row criterion does not flip at 1/{norm} for a = {}",
            spec.a
        )))
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchOptions {
    pub starts: usize,
    pub init_radius: f64,
    pub exec: Exec,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            starts: 32,
            init_radius: 0.95,
            exec: Exec::default(),
        }
    }
}

/// Points are projected back inside this radius during the search.
pub const SEARCH_RADIUS: f64 = 1.0 - 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub best_value: f64,
    pub config_id: usize,
    pub start_value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct NpointSearchResult {
    pub best: PointConfiguration,
    #[serde(with = "crate::json::complex_vec")]
    pub values: Vec<C64>,
    pub norm: f64,
    pub evaluations: usize,
    pub starts: usize,
    pub trace: Vec<TraceRow>,
}

impl NpointSearchResult {
    pub fn trace_csv(&self) -> String {
        let mut s = String::from("iteration,best_value,config_id,start_value\n");
        for r in &self.trace {
            s.push_str(&format!("{},{:.17e},{},{:.17e}\n", r.iteration, r.best_value, r.config_id, r.start_value));
        }
        s
    }
}

fn project(z: &mut [C64]) {
    let r = linalg::norm2(z);
    if r > SEARCH_RADIUS {
        for v in z.iter_mut() {
            *v *= SEARCH_RADIUS / r;
        }
    }
}

fn unpack(x: &[f64], d: usize) -> Vec<Vec<C64>> {
    x.chunks(2 * d)
        .map(|chunk| {
            let mut z: Vec<C64> = chunk.chunks(2).map(|p| c64(p[0], p[1])).collect();
            project(&mut z);
            z
        })
        .collect()
}

fn pack(points: &[Vec<C64>]) -> Vec<f64> {
    points.iter().flatten().flat_map(|v| [v.re, v.im]).collect()
}

struct Evaluated {
    config: PointConfiguration,
    values: Vec<C64>,
    norm: f64,
}

fn evaluate_config(e: &Expr, points: &[Vec<C64>], spec: KernelSpec) -> Option<Evaluated> {
    let (config, kept) = PointConfiguration::merged(points).ok()?;
    let ev = Evaluator::<C64>::new(EvalOptions::default());
    let values = kept
        .iter()
        .map(|&i| ev.eval_point(e, &points[i]))
        .collect::<Result<Vec<_>>>()
        .ok()?;
    let norm = restriction_multiplier_norm(&values, &config, spec).ok()?.value;
    norm.is_finite().then_some(Evaluated { config, values, norm })
}

/// Multistart maximization of the restriction norm over configurations of `n` points.
/// The value returned is a lower bound on the n-point multiplier norm of `e`.
pub fn npoint_norm_search(e: &Expr, n: usize, spec: KernelSpec, budget: usize, seed: u64, warm_starts: &[PointConfiguration]) -> Result<NpointSearchResult> {
    npoint_norm_search_with(e, n, spec, budget, seed, warm_starts, SearchOptions::default())
}

pub fn npoint_norm_search_with(
    e: &Expr,
    n: usize,
    spec: KernelSpec,
    budget: usize,
    seed: u64,
    warm_starts: &[PointConfiguration],
    opts: SearchOptions,
) -> Result<NpointSearchResult> {
    if n == 0 {
        return Err(Error::Argument("the n-point search needs n ≥ 1".into()));
    }
    if !e.is_scalar() {
        return Err(Error::Structure(format!("{} is not scalar-valued", e.label())));
    }
    if budget == 0 && warm_starts.is_empty() {
        return Err(Error::Argument("search budget 0 without warm starts".into()));
    }
    let d = e.nvars();
    if let Some(w) = warm_starts.iter().find(|w| w.dim() != d) {
        return Err(Error::Structure(format!("warm start in dimension {} for a function of {d} variables", w.dim())));
    }
    let random_starts = if budget == 0 { 0 } else { opts.starts.min(budget) };
    let total = warm_starts.len() + random_starts;
    let per_start = if budget == 0 { 0 } else { (budget / total).max(1) };

    let outcomes = opts.exec.map(total, |s| -> (Option<Evaluated>, usize) {
        let mut rng = rng_from_seed(derive_seed(seed, s as u64));
        let mut points: Vec<Vec<C64>> = match warm_starts.get(s) {
            Some(w) => w.points().iter().take(n).cloned().collect(),
            None => Vec::new(),
        };
        while points.len() < n {
            points.push(random_ball_point(&mut rng, d, opts.init_radius));
        }
        let start = evaluate_config(e, &points, spec);
        if per_start <= 1 {
            return (start, 1);
        }
        let scale = 0.1 * opts.init_radius;
        let m = nelder_mead(
            |x| evaluate_config(e, &unpack(x, d), spec).map_or(f64::INFINITY, |r| -r.norm),
            &pack(&points),
            scale,
            per_start - 1,
            1e-14,
        );
        let polished = evaluate_config(e, &unpack(&m.x, d), spec);
        let best = match (start, polished) {
            (Some(a), Some(b)) => Some(if b.norm > a.norm { b } else { a }),
            (a, b) => a.or(b),
        };
        (best, m.evaluations + 2)
    });

    let mut trace = Vec::with_capacity(total);
    let mut best: Option<(usize, Evaluated)> = None;
    let mut evaluations = 0;
    for (s, (outcome, evals)) in outcomes.into_iter().enumerate() {
        evaluations += evals;
        let start_value = outcome.as_ref().map_or(f64::NAN, |r| r.norm);
        if let Some(r) = outcome {
            if best.as_ref().is_none_or(|(_, b)| r.norm > b.norm) {
                best = Some((s, r));
            }
        }
        trace.push(TraceRow {
            iteration: s,
            best_value: best.as_ref().map_or(f64::NAN, |(_, b)| b.norm),
            config_id: best.as_ref().map_or(s, |(i, _)| *i),
            start_value,
        });
    }
    let (_, best) = best.ok_or_else(|| Error::domain(e.label(), "no start produced an evaluable configuration"))?;
    Ok(NpointSearchResult {
        best: best.config,
        values: best.values,
        norm: best.norm,
        evaluations,
        starts: total,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::FunctionExpr;
    use crate::poly::Polynomial;

    fn r(x: f64) -> C64 {
        c64(x, 0.0)
    }

    fn three_points() -> PointConfiguration {
        PointConfiguration::new(vec![vec![r(0.8), r(0.2)], vec![r(0.2), r(0.8)], vec![r(0.4), r(0.4)]]).unwrap()
    }

    fn sum_of_squares() -> Polynomial {
        &Polynomial::monomial(vec![2, 0], r(1.0)) + &Polynomial::monomial(vec![0, 2], r(1.0))
    }

    fn values(p: &Polynomial, f: &PointConfiguration) -> Vec<C64> {
        f.points().iter().map(|z| p.eval(z)).collect()
    }

    #[test]
    fn kernel_entries() {
        let f = three_points();
        let k = kernel_matrix(&f, KernelSpec::drury_arveson());
        assert!((k.matrix[(0, 0)].re - 25.0 / 8.0).abs() < 1e-14);
        assert!((k.matrix[(0, 1)].re - 25.0 / 17.0).abs() < 1e-14);
        assert!((k.matrix[(0, 2)].re - 5.0 / 3.0).abs() < 1e-14);
        assert!((k.matrix[(2, 2)].re - 25.0 / 17.0).abs() < 1e-14);
        let k2 = kernel_matrix(&f, KernelSpec::new(2.0).unwrap());
        for (a, b) in k2.matrix.iter().zip(k.matrix.iter()) {
            assert!((a - b * b).norm() < 1e-13);
        }
        let origin = PointConfiguration::new(vec![vec![r(0.0)]]).unwrap();
        assert_eq!(kernel_matrix(&origin, KernelSpec::new(0.3).unwrap()).matrix[(0, 0)], r(1.0));
    }

    // Reference values computed independently with numpy (float64).
    #[test]
    fn three_point_pick_matrix() {
        let f = three_points();
        let p = sum_of_squares();
        let cert = pick_certificate(&values(&p, &f), &f, KernelSpec::drury_arveson(), 1.0).unwrap();
        assert!((cert.determinant - -0.1242112708650517).abs() < 1e-12, "{}", cert.determinant);
        let eig = linalg::hermitian_eigenvalues(&cert.pick_matrix);
        for (a, b) in eig.iter().zip([-0.03649141, 0.88941176, 3.82707964]) {
            assert!((a - b).abs() < 1e-8);
        }
        assert!(!cert.feasible);
        let norm = restriction_multiplier_norm(&values(&p, &f), &f, KernelSpec::drury_arveson()).unwrap();
        assert_eq!(norm.method, NormMethod::ClosedForm);
        assert!((norm.value - 1.0588871451133075).abs() < 1e-12, "{}", norm.value);
    }

    #[test]
    fn closed_form_agrees_with_bisection() {
        let f = three_points();
        let v = values(&sum_of_squares(), &f);
        let spec = KernelSpec::drury_arveson();
        let closed = restriction_multiplier_norm(&v, &f, spec).unwrap().value;
        for test in [PsdTest::Cholesky, PsdTest::Eigen] {
            let b = restriction_norm_bisection(&v, &f, spec, test).unwrap();
            assert!((closed - b).abs() < 1e-8, "{test:?}: {closed} vs {b}");
        }
        let tight = pick_certificate(&v, &f, spec, closed).unwrap();
        assert!(tight.min_eigenvalue >= -1e-8 && tight.min_eigenvalue <= 1e-6);
    }

    #[test]
    fn trivial_norms() {
        let spec = KernelSpec::new(0.7).unwrap();
        let one = PointConfiguration::new(vec![vec![r(0.3), c64(0.1, 0.2)]]).unwrap();
        assert_eq!(restriction_multiplier_norm(&[c64(0.3, 0.4)], &one, spec).unwrap().value, 0.5);
        let f = three_points();
        let c = c64(-0.6, 0.8);
        let v = restriction_multiplier_norm(&[c; 3], &f, spec).unwrap().value;
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ill_conditioned_kernel_falls_back() {
        let f = PointConfiguration::new(vec![vec![r(0.5)], vec![r(0.5 + 1e-7)]]).unwrap();
        let n = restriction_multiplier_norm(&[r(0.1), r(0.1000001)], &f, KernelSpec::drury_arveson()).unwrap();
        assert_eq!(n.method, NormMethod::BisectionEigen);
        assert!(n.value >= 0.1000001 - 1e-12);
    }

    #[test]
    fn merging_and_validation() {
        let pts = vec![vec![r(0.1)], vec![r(0.1 + 1e-10)], vec![r(0.5)]];
        assert!(PointConfiguration::new(pts.clone()).is_err());
        let (m, kept) = PointConfiguration::merged(&pts).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(kept, vec![0, 2]);
        assert!(matches!(PointConfiguration::new(vec![vec![r(1.0)]]), Err(Error::Domain { .. })));
        let json = serde_json::to_string(&m).unwrap();
        let back: PointConfiguration = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
        assert!(serde_json::from_str::<PointConfiguration>(r#"{"points":[[[2.0,0.0]]]}"#).is_err());
    }

    #[test]
    fn row_condition_cases() {
        let spec = |a| KernelSpec::new(a).unwrap();
        assert!(coordinate_row_condition(1.0, spec(1.0), 100).holds);
        assert!(coordinate_row_condition(0.5, spec(0.25), 100).holds);
        let c = coordinate_row_condition(0.51, spec(0.25), 100);
        assert_eq!((c.holds, c.first_failing), (false, Some(0)));
        assert!(coordinate_row_condition(1.0, spec(2.0), 100).holds);
        let c = coordinate_row_condition(1.001, spec(2.0), 100);
        assert!(!c.holds);
        let n = c.first_failing.unwrap();
        assert!(n > 100 && c.scan_consistent);
        let c2 = 1.001f64 * 1.001;
        assert!(row_inequality(c2, 2.0, n - 1) && !row_inequality(c2, 2.0, n));
        let wide = coordinate_row_condition(1.001, spec(2.0), 10_000);
        assert_eq!(wide.first_failing, Some(n));
        assert!(wide.scan_consistent);
    }

    #[test]
    fn row_norm_values() {
        for (a, expect) in [(1.0, 1.0), (0.25, 2.0), (4.0, 1.0)] {
            assert_eq!(coordinate_row_norm(KernelSpec::new(a).unwrap()), expect);
        }
        for a in [0.1, 0.25, 0.5, 1.0, 2.0, 4.0] {
            coordinate_row_norm_checked(KernelSpec::new(a).unwrap(), 100_000).unwrap();
        }
    }

    #[test]
    fn search_with_warm_start_exceeds_one() {
        let e = FunctionExpr::poly(sum_of_squares());
        let res = npoint_norm_search_with(
            &e,
            3,
            KernelSpec::drury_arveson(),
            300,
            3,
            &[three_points()],
            SearchOptions {
                starts: 4,
                ..SearchOptions::default()
            },
        )
        .unwrap();
        assert!(res.norm >= 1.0588871451133075 - 1e-12);
        assert_eq!(res.trace.len(), 5);
        assert!(res.trace_csv().starts_with("iteration,best_value"));
    }

    #[test]
    fn search_is_mode_independent_and_needs_budget() {
        let e = FunctionExpr::poly(&Polynomial::monomial(vec![1, 1], r(1.0)) + &Polynomial::coordinate(2, 0));
        let spec = KernelSpec::drury_arveson();
        let mut opts = SearchOptions {
            starts: 6,
            exec: Exec::Sequential,
            ..SearchOptions::default()
        };
        let a = npoint_norm_search_with(&e, 2, spec, 120, 9, &[], opts).unwrap();
        opts.exec = Exec::Parallel;
        let b = npoint_norm_search_with(&e, 2, spec, 120, 9, &[], opts).unwrap();
        assert_eq!(a.norm, b.norm);
        assert_eq!(a.best, b.best);
        assert!(matches!(npoint_norm_search(&e, 2, spec, 0, 1, &[]), Err(Error::Argument(_))));
        let warm_only = npoint_norm_search(&e, 2, spec, 0, 1, std::slice::from_ref(&a.best)).unwrap();
        assert_eq!(warm_only.norm, a.norm);
    }
}
