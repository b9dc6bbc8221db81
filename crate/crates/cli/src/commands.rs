//! One function per subcommand. Inputs are resolved before anything is computed or written.

use std::collections::BTreeMap;
use std::path::Path;

use ballvn::calculus::{cauchy_integral_eval_with, eval_series_tuple, ExprExpansion};
use ballvn::experiments::{
    cdn_lower_curve, counterexample_search, kernel_tuple, three_point_instance, vn_fuzz, ExperimentReport,
    FuzzSpec, SearchBudgets, WarmStart,
};
use ballvn::expr::{eval_expr_point, Expr};
use ballvn::linalg::{self, c64, C64};
use ballvn::pick::{
    npoint_norm_search_with, pick_certificate, restriction_multiplier_norm, restriction_norm_bisection,
    PointConfiguration, PsdTest, SearchOptions,
};
use ballvn::sampling::{sup_norm_estimate, sup_norm_estimate_with_starts};
use ballvn::schur::schur_construct;
use ballvn::tuple::{
    is_jointly_diagonalizable, random_commuting_tuple, require_spectrum_in_ball, simultaneous_triangularize,
    validate_tuple, Tolerances,
};
use ballvn::{Error, Exec, FunctionExpr, MatrixTuple, Polynomial};
use serde_json::{json, Value};

use crate::config::{Command, ConfigError, RunConfig};
use crate::provenance::sha256_hex;

/// Inputs read from files or built from the config.
#[derive(Default)]
pub struct Inputs {
    pub tuple: Option<MatrixTuple>,
    pub function: Option<Expr>,
    pub points: Option<PointConfiguration>,
    pub sha256: BTreeMap<String, String>,
}

fn read_input(base: &Path, file: &Path, role: &str, hashes: &mut BTreeMap<String, String>) -> Result<String, ConfigError> {
    let path = base.join(file);
    let text = std::fs::read_to_string(&path).map_err(|source| ConfigError::Read { path: path.clone(), source })?;
    hashes.insert(role.into(), sha256_hex(text.as_bytes()));
    Ok(text)
}

fn parse_json<T: serde::de::DeserializeOwned>(text: &str, file: &Path) -> Result<T, ConfigError> {
    serde_json::from_str(text).map_err(|e| ConfigError::Parse {
        path: file.to_path_buf(),
        message: e.to_string(),
    })
}

fn invalid(e: Error) -> ConfigError {
    ConfigError::Invalid(e.to_string())
}

/// `p = z₁² + z₂²`, the function of the three-point instance.
fn default_polynomial() -> Expr {
    FunctionExpr::poly(three_point_instance().0)
}

/// `φ_{1/2}(0.3 z₁ + 0.5 z₁z₂)`: holomorphic on a neighbourhood of the closed ball, not a polynomial.
fn default_fc_function() -> Expr {
    let inner = &Polynomial::coordinate(2, 0).scale(c64(0.3, 0.0)) + &Polynomial::monomial(vec![1, 1], c64(0.5, 0.0));
    FunctionExpr::mobius(c64(0.5, 0.0), FunctionExpr::poly(inner)).expect("scalar argument")
}

pub fn resolve_inputs(command: Command, cfg: &RunConfig, base: &Path) -> Result<Inputs, ConfigError> {
    let mut inputs = Inputs::default();
    let needs_tuple = matches!(command, Command::Validate | Command::Spectrum | Command::Schur | Command::FcCheck);
    let needs_function = matches!(
        command,
        Command::PickNorm | Command::NpointSearch | Command::Schur | Command::FcCheck
    );
    if needs_tuple {
        let src = &cfg.tuple;
        let t = if let Some(file) = &src.file {
            let text = read_input(base, file, "tuple", &mut inputs.sha256)?;
            parse_json::<MatrixTuple>(&text, file)?
        } else if let Some(s) = src.compressed_shift {
            ballvn::experiments::compressed_shift(s.d, s.k).map_err(invalid)?
        } else {
            let r = src.random.unwrap_or_default();
            if r.n == 0 || r.d == 0 {
                return Err(ConfigError::Invalid("[tuple.random] needs n, d ≥ 1".into()));
            }
            random_commuting_tuple(r.n, r.d, r.seed.unwrap_or(cfg.seed), r.kind).scaled(r.scale)
        };
        inputs.tuple = Some(t);
    }
    if needs_function {
        let src = &cfg.function;
        let e = if let Some(file) = &src.file {
            let text = read_input(base, file, "function", &mut inputs.sha256)?;
            FunctionExpr::from_json(&text).map_err(invalid)?
        } else if let Some(p) = &src.polynomial {
            FunctionExpr::poly(p.clone())
        } else if let Some(e) = &src.expr {
            e.validate().map_err(invalid)?;
            std::sync::Arc::new(e.clone())
        } else if command == Command::FcCheck {
            default_fc_function()
        } else {
            default_polynomial()
        };
        if !e.is_scalar() {
            return Err(ConfigError::Invalid(format!("{} is not scalar-valued", e.label())));
        }
        inputs.function = Some(e);
    }
    if command == Command::PickNorm {
        let src = &cfg.points;
        let f = if let Some(file) = &src.file {
            let text = read_input(base, file, "points", &mut inputs.sha256)?;
            parse_json::<PointConfiguration>(&text, file)?
        } else if let Some(values) = &src.values {
            let pts = values.iter().map(|z| z.iter().map(|p| c64(p[0], p[1])).collect()).collect();
            PointConfiguration::new(pts).map_err(invalid)?
        } else {
            three_point_instance().1
        };
        inputs.points = Some(f);
    }
    Ok(inputs)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Status {
    Ok,
    /// A computed quantity contradicts a property the mathematics guarantees.
    Violation(String),
    /// The input does not satisfy the hypotheses the tool works under.
    Precondition(String),
}

pub struct Outcome {
    pub report: ExperimentReport,
    pub details: Value,
    pub status: Status,
    /// Additional files as (suffix, contents); written as `<stem>-<suffix>`.
    pub extra_files: Vec<(String, String)>,
}

impl Outcome {
    fn new(report: ExperimentReport, details: Value, status: Status) -> Self {
        Outcome {
            report,
            details,
            status,
            extra_files: Vec::new(),
        }
    }
}

pub fn execute(command: Command, cfg: &RunConfig, inputs: &Inputs, exec: Exec) -> ballvn::Result<Outcome> {
    match command {
        Command::Validate => validate(cfg, inputs.tuple.as_ref().expect("resolved")),
        Command::Spectrum => spectrum(cfg, inputs.tuple.as_ref().expect("resolved")),
        Command::PickNorm => pick_norm(cfg, inputs.function.as_ref().expect("resolved"), inputs.points.as_ref().expect("resolved")),
        Command::NpointSearch => npoint_search(cfg, inputs.function.as_ref().expect("resolved"), exec),
        Command::ThreePointCheck => three_point_check(cfg),
        Command::Schur => schur(cfg, inputs.function.as_ref().expect("resolved"), inputs.tuple.as_ref().expect("resolved"), exec),
        Command::VnFuzz => fuzz(cfg, exec),
        Command::CdnCurve => curve(cfg, exec),
        Command::FcCheck => fc_check(cfg, inputs.function.as_ref().expect("resolved"), inputs.tuple.as_ref().expect("resolved"), exec),
    }
}

fn validate(cfg: &RunConfig, t: &MatrixTuple) -> ballvn::Result<Outcome> {
    let tol = Tolerances::default();
    let diag = validate_tuple(t, tol.commutation);
    let mut report = ExperimentReport::new("validate", cfg.seed, &["entry", "operator_norm"]);
    for (i, m) in t.entries().iter().enumerate() {
        report.rows.push(vec![json!(i), json!(linalg::op_norm(m))]);
    }
    report.param("n", t.n());
    report.param("d", t.d());
    report.stat("commutation_residual", diag.commutation_residual);
    report.stat("row_norm", diag.row_norm);
    report.stat("is_commuting", diag.is_commuting);
    report.stat("is_row_contraction", diag.is_row_contraction);
    let mut details = json!({ "diagnostics": diag });
    if diag.is_commuting {
        let spectrum = simultaneous_triangularize(t)?;
        let radius = (0..t.n())
            .map(|j| t_diag_norm(&spectrum.triangular_tuple, j))
            .fold(0.0, f64::max);
        report.stat("spectral_radius", radius);
        let verdict = is_jointly_diagonalizable(t, 1e-8)?;
        report.stat("jointly_diagonalizable", verdict.is_diagonalizable());
        details["diagonalizability"] = json!(verdict);
    }
    let status = if diag.is_commuting && diag.is_row_contraction {
        Status::Ok
    } else {
        Status::Precondition(format!(
            "tuple is {}",
            match (diag.is_commuting, diag.is_row_contraction) {
                (false, false) => "neither commuting nor a row contraction",
                (false, true) => "not commuting",
                _ => "not a row contraction",
            }
        ))
    };
    Ok(Outcome::new(report, details, status))
}

fn t_diag_norm(t: &MatrixTuple, j: usize) -> f64 {
    t.entries().iter().map(|m| m[(j, j)].norm_sqr()).sum::<f64>().sqrt()
}

fn point_columns(prefix: &[&str], d: usize) -> Vec<String> {
    let mut cols: Vec<String> = prefix.iter().map(|s| s.to_string()).collect();
    for j in 1..=d {
        cols.push(format!("z{j}_re"));
        cols.push(format!("z{j}_im"));
    }
    cols
}

fn push_point(row: &mut Vec<Value>, z: &[C64]) {
    for x in z {
        row.push(json!(x.re));
        row.push(json!(x.im));
    }
}

fn spectrum(cfg: &RunConfig, t: &MatrixTuple) -> ballvn::Result<Outcome> {
    let tri = simultaneous_triangularize(t)?;
    let cols = point_columns(&["index", "norm"], t.d());
    let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut report = ExperimentReport::new("spectrum", cfg.seed, &col_refs);
    report.param("n", t.n());
    report.param("d", t.d());
    let mut radius: f64 = 0.0;
    for j in 0..t.n() {
        let z: Vec<C64> = tri.triangular_tuple.entries().iter().map(|m| m[(j, j)]).collect();
        let r = t_diag_norm(&tri.triangular_tuple, j);
        radius = radius.max(r);
        let mut row = vec![json!(j), json!(r)];
        push_point(&mut row, &z);
        report.rows.push(row);
    }
    report.stat("spectral_radius", radius);
    report.stat("triangularization_residual", tri.residual);
    report.stat("method", tri.method);
    report.stat("attempts", tri.attempts);
    Ok(Outcome::new(report, json!({ "triangularization": tri }), Status::Ok))
}

fn pick_norm(cfg: &RunConfig, e: &Expr, f: &PointConfiguration) -> ballvn::Result<Outcome> {
    if e.nvars() != f.dim() {
        return Err(Error::Structure(format!(
            "the function has {} variables but the points lie in dimension {}",
            e.nvars(),
            f.dim()
        )));
    }
    let values: Vec<C64> = f.points().iter().map(|z| eval_expr_point(e, z)).collect::<ballvn::Result<_>>()?;
    let norm = restriction_multiplier_norm(&values, f, cfg.kernel)?;
    let bisection = restriction_norm_bisection(&values, f, cfg.kernel, cfg.pick_norm.psd_test)?;
    let cert = pick_certificate(&values, f, cfg.kernel, cfg.pick_norm.c)?;
    let cols = point_columns(&["index", "value_re", "value_im"], f.dim());
    let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut report = ExperimentReport::new("pick-norm", cfg.seed, &col_refs);
    for (i, (z, v)) in f.points().iter().zip(&values).enumerate() {
        let mut row = vec![json!(i), json!(v.re), json!(v.im)];
        push_point(&mut row, z);
        report.rows.push(row);
    }
    report.param("kernel", cfg.kernel);
    report.param("c", cfg.pick_norm.c);
    report.stat("restriction_norm", norm.value);
    report.stat("method", norm.method);
    report.stat("bisection_norm", bisection);
    report.stat("pick_determinant", cert.determinant);
    report.stat("pick_min_eigenvalue", cert.min_eigenvalue);
    report.stat("pick_feasible", cert.feasible);
    let details = json!({ "norm": norm, "certificate": cert, "points": f });
    Ok(Outcome::new(report, details, Status::Ok))
}

fn npoint_search(cfg: &RunConfig, e: &Expr, exec: Exec) -> ballvn::Result<Outcome> {
    let p = cfg.npoint_search;
    let opts = SearchOptions {
        starts: p.starts,
        init_radius: p.init_radius,
        exec,
    };
    let r = npoint_norm_search_with(e, p.n, cfg.kernel, p.budget, cfg.seed, &[], opts)?;
    let mut report = ExperimentReport::new("npoint-search", cfg.seed, &["iteration", "best_value", "config_id", "start_value"]);
    for t in &r.trace {
        report.rows.push(vec![json!(t.iteration), json!(t.best_value), json!(t.config_id), json!(t.start_value)]);
    }
    report.param("n", p.n);
    report.param("budget", p.budget);
    report.param("kernel", cfg.kernel);
    report.stat("norm", r.norm);
    report.stat("evaluations", r.evaluations);
    let d = e.nvars();
    let mut status = Status::Ok;
    if d <= 11 {
        let sup = sup_norm_estimate_with_starts(e, d, 2048, cfg.seed, r.best.points());
        report.stat("sup_estimate", sup.value);
        // for the Drury–Arveson kernel, two-point norms are bounded by the sup norm
        if p.n <= 2 && cfg.kernel.is_drury_arveson() && r.norm > sup.value + cfg.tol {
            status = Status::Violation(format!(
                "{}-point norm {:.12} exceeds the sup estimate {:.12}",
                p.n, r.norm, sup.value
            ));
        }
    }
    Ok(Outcome::new(report, json!({ "result": r }), status))
}

fn three_point_check(cfg: &RunConfig) -> ballvn::Result<Outcome> {
    let (p, f) = three_point_instance();
    let spec = cfg.kernel;
    let values: Vec<C64> = f.points().iter().map(|z| p.eval(z)).collect();
    let cert = pick_certificate(&values, &f, spec, 1.0)?;
    let norm = restriction_multiplier_norm(&values, &f, spec)?;
    let chol = restriction_norm_bisection(&values, &f, spec, PsdTest::Cholesky)?;
    let eig = restriction_norm_bisection(&values, &f, spec, PsdTest::Eigen)?;
    let t = kernel_tuple(&f, spec)?;
    let op = linalg::op_norm(&ballvn::tuple::eval_poly_tuple(&p, &t)?);
    let sup = sup_norm_estimate(&FunctionExpr::poly(p.clone()), 2, 2048, cfg.seed);
    let mut report = ExperimentReport::new("three-point-check", cfg.seed, &["quantity", "value"]);
    let rows: [(&str, f64); 7] = [
        ("pick_determinant", cert.determinant),
        ("pick_min_eigenvalue", cert.min_eigenvalue),
        ("restriction_norm", norm.value),
        ("bisection_cholesky", chol),
        ("bisection_eigen", eig),
        ("kernel_tuple_operator_norm", op),
        ("sup_estimate", sup.value),
    ];
    for (k, v) in rows {
        report.rows.push(vec![json!(k), json!(v)]);
        report.stat(k, v);
    }
    report.param("kernel", spec);
    report.stat("vn_ratio", op / sup.value);
    let mut problems = Vec::new();
    if spec.is_drury_arveson() {
        if !(cert.determinant < 0.0) {
            problems.push(format!("determinant {:.6e} is not negative", cert.determinant));
        }
        if !(norm.value > 1.0) {
            problems.push(format!("restriction norm {:.12} is not above 1", norm.value));
        }
    }
    let gap = (norm.value - chol).abs().max((norm.value - eig).abs());
    if gap > 1e-8 {
        problems.push(format!("closed form and bisection differ by {gap:.3e}"));
    }
    let status = if problems.is_empty() { Status::Ok } else { Status::Violation(problems.join("; ")) };
    let details = json!({ "polynomial": p, "points": f, "certificate": cert, "norm": norm });
    Ok(Outcome::new(report, details, status))
}

fn schur(cfg: &RunConfig, f: &Expr, t: &MatrixTuple, exec: Exec) -> ballvn::Result<Outcome> {
    let mut sc = cfg.schur.clone();
    sc.seed = cfg.seed;
    let r = schur_construct(f, t, &sc)?;
    let mut report = ExperimentReport::new(
        "schur",
        cfg.seed,
        &["path", "level", "size", "c_re", "c_im", "components", "identity_residual"],
    );
    for l in &r.trace {
        let path = l.path.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("/");
        report.rows.push(vec![
            json!(path),
            json!(l.level),
            json!(l.size),
            json!(l.c.re),
            json!(l.c.im),
            json!(l.components),
            json!(l.identity_residual),
        ]);
    }
    report.param("n", t.n());
    report.param("d", t.d());
    report.param("config", &sc);
    report.stat("certified_bound", r.certified_bound);
    report.stat("bound_label", &r.bound_label);
    report.stat("certified_constant", r.certified_constant);
    report.stat("sup_estimate", r.sup_estimate);
    report.stat("residual", r.residual);
    report.stat("f_norm", r.f_norm);
    let mut problems = Vec::new();
    if !r.accepts(cfg.tol) {
        problems.push(format!(
            "‖g(T) − f(T)‖ = {:.3e} exceeds {:.1e}·(1 + ‖f(T)‖)",
            r.residual, cfg.tol
        ));
    }
    // a cheap lower bound for the multiplier norm of g
    let n = 3;
    let opts = SearchOptions {
        starts: 4,
        exec,
        ..SearchOptions::default()
    };
    let lower = npoint_norm_search_with(&r.g, n, ballvn::KernelSpec::new(sc.a)?, 300, cfg.seed, &[], opts)?;
    report.stat("pick_lower_bound", lower.norm);
    if lower.norm > r.certified_bound + cfg.tol {
        problems.push(format!(
            "{n}-point lower bound {:.12} exceeds the certified bound {:.12}",
            lower.norm, r.certified_bound
        ));
    }
    let status = if problems.is_empty() { Status::Ok } else { Status::Violation(problems.join("; ")) };
    let mut out = Outcome::new(report, json!({ "result": r }), status);
    out.extra_files.push(("g.json".into(), serde_json::to_string_pretty(&r.g).expect("expressions serialize")));
    Ok(out)
}

fn fuzz(cfg: &RunConfig, exec: Exec) -> ballvn::Result<Outcome> {
    let p = cfg.vn_fuzz;
    let spec = FuzzSpec {
        tolerance: cfg.tol,
        ..p.spec
    };
    let r = vn_fuzz(p.n, p.trials, cfg.seed, spec, exec)?;
    if p.trials > 0 && r.failures == p.trials {
        return Err(Error::Numerical(format!("all {} fuzz trials failed", p.trials)));
    }
    let mut details = json!({ "max_ratio": r.max_ratio, "violations": r.violations, "failed_trials": r.failures });
    let mut extra = Vec::new();
    if p.n == 3 && p.search_budget > 0 {
        let (poly, points) = three_point_instance();
        let warm = WarmStart { p: poly, points };
        let s = counterexample_search(3, 2, p.search_max_degree, p.search_budget, cfg.seed, Some(&warm), SearchBudgets::default(), exec)?;
        details["counterexample_search"] = json!({
            "summary": s.report.summary_json(),
            "best": s.best,
        });
        extra.push(("search.csv".into(), s.report.to_csv()));
    }
    let status = if p.n <= 2 && r.violations > 0 {
        Status::Violation(format!(
            "{} of {} trials exceed ratio 1 + {:.1e} (max {:.12})",
            r.violations, p.trials, cfg.tol, r.max_ratio
        ))
    } else {
        Status::Ok
    };
    let mut out = Outcome::new(r.report, details, status);
    out.extra_files = extra;
    Ok(out)
}

fn curve(cfg: &RunConfig, exec: Exec) -> ballvn::Result<Outcome> {
    let p = cfg.cdn_curve;
    let r = cdn_lower_curve(p.d, p.k_max, p.trials, cfg.seed, exec)?;
    let max = r.points.iter().map(|c| c.best_ratio).fold(f64::NEG_INFINITY, f64::max);
    let status = if p.d == 1 && max > 1.0 + cfg.tol {
        Status::Violation(format!("one-variable ratio {max:.12} exceeds 1 + {:.1e}", cfg.tol))
    } else {
        Status::Ok
    };
    Ok(Outcome::new(r.report, json!({ "points": r.points }), status))
}

fn fc_check(cfg: &RunConfig, f: &Expr, t: &MatrixTuple, exec: Exec) -> ballvn::Result<Outcome> {
    let p = cfg.fc_check;
    if f.nvars() != t.d() {
        return Err(Error::Structure(format!(
            "the function has {} variables but the tuple has {} entries",
            f.nvars(),
            t.d()
        )));
    }
    if f.needs_ball() {
        return Err(Error::Precondition(format!(
            "{} is only defined inside the ball; the Cauchy integral samples the sphere",
            f.label()
        )));
    }
    require_spectrum_in_ball(t, Tolerances::default().ball_margin)?;
    let expansion = ExprExpansion::new(f, p.taylor_order)?;
    let series = eval_series_tuple(&expansion, t, p.series_tol, p.taylor_order)?;
    let est = cauchy_integral_eval_with(
        |z| eval_expr_point(f, z).unwrap_or(C64::new(f64::NAN, f64::NAN)),
        t,
        p.samples,
        cfg.seed,
        exec,
    )?;
    if est.estimate.iter().any(|x| !x.re.is_finite() || !x.im.is_finite()) {
        return Err(Error::Numerical("the function could not be evaluated on the sphere".into()));
    }
    let mut report = ExperimentReport::new(
        "fc-check",
        cfg.seed,
        &["row", "col", "series_re", "series_im", "cauchy_re", "cauchy_im", "std_error"],
    );
    let n = t.n();
    for i in 0..n {
        for j in 0..n {
            let (s, c) = (series.value[(i, j)], est.estimate[(i, j)]);
            report.rows.push(vec![json!(i), json!(j), json!(s.re), json!(s.im), json!(c.re), json!(c.im), json!(est.std_error[(i, j)])]);
        }
    }
    let diff = linalg::frobenius(&(&est.estimate - &series.value));
    let se = est.std_error_frobenius();
    report.param("n", n);
    report.param("d", t.d());
    report.param("params", p);
    report.stat("series_order", series.order);
    report.stat("series_tail_bound", series.tail_bound);
    report.stat("difference_frobenius", diff);
    report.stat("std_error_frobenius", se);
    report.stat("std_errors", diff / se);
    let status = if est.agrees_with(&series.value, p.std_errors) {
        Status::Ok
    } else {
        Status::Violation(format!(
            "Cauchy estimate is {:.2} standard errors from the series value (threshold {})",
            diff / se,
            p.std_errors
        ))
    };
    let details = json!({ "function": f, "series": series });
    Ok(Outcome::new(report, details, status))
}
