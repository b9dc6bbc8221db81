//! Commuting matrix tuples: validation, row norm, simultaneous triangularization, joint
//! spectrum and joint diagonalizability.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::json;
use crate::linalg::{self, c64, CMat, C64};
use crate::par::rng_from_seed;
use crate::poly::Polynomial;

/// Default numerical tolerances for tuple operations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub commutation: f64,
    pub triangularization: f64,
    pub ball_margin: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            commutation: 1e-10,
            triangularization: 1e-10,
            ball_margin: 1e-9,
        }
    }
}

/// A `d`-tuple of `n×n` complex matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TupleRepr", into = "TupleRepr")]
pub struct MatrixTuple {
    n: usize,
    entries: Vec<CMat>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TupleRepr {
    d: usize,
    n: usize,
    #[serde(with = "json::matrix_vec")]
    entries: Vec<CMat>,
}

impl TryFrom<TupleRepr> for MatrixTuple {
    type Error = Error;

    fn try_from(r: TupleRepr) -> Result<Self> {
        if r.entries.len() != r.d {
            return Err(Error::Structure(format!(
                "declared d = {} but {} entries given",
                r.d,
                r.entries.len()
            )));
        }
        let t = MatrixTuple::new(r.entries)?;
        if t.n != r.n {
            return Err(Error::Structure(format!("declared n = {} but matrices are {}×{}", r.n, t.n, t.n)));
        }
        Ok(t)
    }
}

impl From<MatrixTuple> for TupleRepr {
    fn from(t: MatrixTuple) -> Self {
        TupleRepr {
            d: t.entries.len(),
            n: t.n,
            entries: t.entries,
        }
    }
}

impl MatrixTuple {
    /// Build from square matrices of a common size. At least one entry is required.
    pub fn new(entries: Vec<CMat>) -> Result<Self> {
        let first = entries
            .first()
            .ok_or_else(|| Error::Structure("a tuple needs at least one matrix".into()))?;
        let n = first.nrows();
        if n == 0 {
            return Err(Error::Structure("matrices must be at least 1×1".into()));
        }
        for (i, m) in entries.iter().enumerate() {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::Structure(format!(
                    "entry {i} is {}×{}, expected {n}×{n}",
                    m.nrows(),
                    m.ncols()
                )));
            }
        }
        Ok(MatrixTuple { n, entries })
    }

    pub fn zeros(d: usize, n: usize) -> Self {
        MatrixTuple {
            n,
            entries: vec![CMat::zeros(n, n); d],
        }
    }

    /// Diagonal tuple whose joint eigenvalues are the given points (each of length d).
    pub fn diagonal(points: &[Vec<C64>]) -> Result<Self> {
        let d = points.first().map_or(0, |p| p.len());
        if d == 0 || points.iter().any(|p| p.len() != d) {
            return Err(Error::Structure("points must share a positive dimension".into()));
        }
        let n = points.len();
        MatrixTuple::new(
            (0..d)
                .map(|i| CMat::from_fn(n, n, |r, c| if r == c { points[r][i] } else { c64(0.0, 0.0) }))
                .collect(),
        )
    }

    pub fn d(&self) -> usize {
        self.entries.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[CMat] {
        &self.entries
    }

    pub fn entry(&self, i: usize) -> &CMat {
        &self.entries[i]
    }

    pub fn into_entries(self) -> Vec<CMat> {
        self.entries
    }

    pub fn scaled(&self, s: f64) -> Self {
        MatrixTuple {
            n: self.n,
            entries: self.entries.iter().map(|m| m.scale(s)).collect(),
        }
    }

    /// `U T_i U*` for every entry.
    pub fn conjugate_by_unitary(&self, u: &CMat) -> Self {
        let ua = u.adjoint();
        MatrixTuple {
            n: self.n,
            entries: self.entries.iter().map(|m| u * m * &ua).collect(),
        }
    }

    /// `S⁻¹ T_i S` for every entry.
    pub fn similarity(&self, s: &CMat) -> Result<Self> {
        let si = linalg::inverse_checked(s, "similarity transform")?;
        Ok(MatrixTuple {
            n: self.n,
            entries: self.entries.iter().map(|m| &si * m * s).collect(),
        })
    }

    /// The `(n−k)×(n−k)` trailing block of every entry.
    pub fn trailing_block(&self, k: usize) -> Self {
        let m = self.n - k;
        MatrixTuple {
            n: m,
            entries: self.entries.iter().map(|e| e.view((k, k), (m, m)).into_owned()).collect(),
        }
    }

    /// `(U·T)_j = Σ_i U_ji T_i` for a `d'×d` matrix `U`.
    pub fn linear_combination(&self, u: &CMat) -> Self {
        assert_eq!(u.ncols(), self.d());
        MatrixTuple {
            n: self.n,
            entries: (0..u.nrows())
                .map(|j| {
                    let mut acc = CMat::zeros(self.n, self.n);
                    for (i, m) in self.entries.iter().enumerate() {
                        let c = u[(j, i)];
                        if c != c64(0.0, 0.0) {
                            acc += m * c;
                        }
                    }
                    acc
                })
                .collect(),
        }
    }

    /// Largest commutator Frobenius norm over all pairs.
    pub fn commutation_residual(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.d() {
            for j in (i + 1)..self.d() {
                let a = &self.entries[i];
                let b = &self.entries[j];
                worst = worst.max(linalg::frobenius(&(a * b - b * a)));
            }
        }
        worst
    }

    /// `‖Σ T_i T_i*‖^{1/2}`, the largest singular value of the block row `[T_1 … T_d]`.
    pub fn row_norm(&self) -> f64 {
        let mut row = CMat::zeros(self.n, self.n * self.d());
        for (i, m) in self.entries.iter().enumerate() {
            row.view_mut((0, i * self.n), (self.n, self.n)).copy_from(m);
        }
        linalg::op_norm(&row)
    }

    /// Largest entry Frobenius norm; a scale for relative tolerances.
    pub fn scale(&self) -> f64 {
        self.entries.iter().map(linalg::frobenius).fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TupleDiagnostics {
    pub commutation_residual: f64,
    pub row_norm: f64,
    pub is_row_contraction: bool,
    pub is_commuting: bool,
}

pub fn validate_tuple(t: &MatrixTuple, tol: f64) -> TupleDiagnostics {
    let commutation_residual = t.commutation_residual();
    let row_norm = t.row_norm();
    TupleDiagnostics {
        commutation_residual,
        row_norm,
        is_row_contraction: row_norm <= 1.0 + tol,
        is_commuting: commutation_residual <= tol,
    }
}

fn require_commuting(t: &MatrixTuple, tol: f64) -> Result<()> {
    let r = t.commutation_residual();
    if r > tol * t.scale().max(1.0) {
        return Err(Error::Precondition(format!(
            "tuple does not commute: residual {r:.3e} exceeds {tol:.1e}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TriangularizationResult {
    /// `U` with `U T_i U*` upper triangular.
    #[serde(with = "json::matrix")]
    pub unitary: CMat,
    pub triangular_tuple: MatrixTuple,
    /// Largest strict-lower Frobenius norm over the entries.
    pub residual: f64,
    /// Random combinations tried before success (0 when deflation was needed).
    pub attempts: usize,
    pub method: TriangularizationMethod,
    /// Permutation that sorts the joint eigenvalues lexicographically (real, then imaginary
    /// parts, coordinate by coordinate); lets callers match spectra across calls.
    pub ordering: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TriangularizationMethod {
    RandomCombination,
    Deflation,
}

const TRIANGULARIZE_SEED: u64 = 0x7a1e_5eed;
const MAX_COMBINATION_ATTEMPTS: usize = 5;

fn lower_residual(t: &MatrixTuple) -> f64 {
    t.entries().iter().map(linalg::strict_lower_norm).fold(0.0, f64::max)
}

fn zero_strict_lower(t: &MatrixTuple) -> MatrixTuple {
    let mut out = t.clone();
    for m in &mut out.entries {
        for j in 0..out.n {
            for i in (j + 1)..out.n {
                m[(i, j)] = c64(0.0, 0.0);
            }
        }
    }
    out
}

/// Simultaneous unitary upper-triangularization with default tolerances.
pub fn simultaneous_triangularize(t: &MatrixTuple) -> Result<TriangularizationResult> {
    simultaneous_triangularize_with(t, &Tolerances::default(), TRIANGULARIZE_SEED)
}

pub fn simultaneous_triangularize_with(t: &MatrixTuple, tol: &Tolerances, seed: u64) -> Result<TriangularizationResult> {
    require_commuting(t, tol.commutation)?;
    let threshold = tol.triangularization * t.scale().max(1.0);
    let mut rng = rng_from_seed(seed);
    let mut best = f64::INFINITY;
    for attempt in 1..=MAX_COMBINATION_ATTEMPTS {
        let coeffs: Vec<C64> = (0..t.d()).map(|_| linalg::complex_gaussian(&mut rng)).collect();
        let mut combo = CMat::zeros(t.n(), t.n());
        for (c, m) in coeffs.iter().zip(t.entries()) {
            combo += m * *c;
        }
        let (q, _) = linalg::schur(&combo)?;
        let u = q.adjoint();
        let tri = t.conjugate_by_unitary(&u);
        let residual = lower_residual(&tri);
        best = best.min(residual);
        if residual <= threshold {
            return Ok(finish(u, tri, residual, attempt, TriangularizationMethod::RandomCombination));
        }
    }
    let u = deflation_basis(t, &mut rng)?;
    let tri = t.conjugate_by_unitary(&u);
    let residual = lower_residual(&tri);
    if residual <= threshold {
        return Ok(finish(u, tri, residual, 0, TriangularizationMethod::Deflation));
    }
    Err(Error::Convergence {
        context: "simultaneous triangularization".into(),
        achieved: residual.min(best),
    })
}

fn finish(u: CMat, tri: MatrixTuple, residual: f64, attempts: usize, method: TriangularizationMethod) -> TriangularizationResult {
    let tri = zero_strict_lower(&tri);
    let pts = diagonal_points(&tri);
    let mut ordering: Vec<usize> = (0..pts.len()).collect();
    ordering.sort_by(|&a, &b| lex_cmp(&pts[a], &pts[b]));
    TriangularizationResult {
        unitary: u,
        triangular_tuple: tri,
        residual,
        attempts,
        method,
        ordering,
    }
}

fn lex_cmp(a: &[C64], b: &[C64]) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b) {
        let o = x.re.total_cmp(&y.re).then(x.im.total_cmp(&y.im));
        if o != std::cmp::Ordering::Equal {
            return o;
        }
    }
    std::cmp::Ordering::Equal
}

/// Orthonormal columns spanning the approximate kernel of `m`: singular vectors whose singular
/// value is at most `threshold`, and always at least the smallest one.
fn approximate_kernel(m: &CMat, threshold: f64) -> CMat {
    let svd = linalg::full_svd(m);
    let ncols = m.ncols();
    let mut s = svd.singular_values.clone();
    s.resize(ncols, 0.0);
    let dim = s.iter().filter(|&&x| x <= threshold).count().max(1);
    svd.v.columns(ncols - dim, dim).into_owned()
}

/// Unitary `U` built by repeatedly extracting a common eigenvector and deflating.
fn deflation_basis<R: Rng>(t: &MatrixTuple, rng: &mut R) -> Result<CMat> {
    let n = t.n();
    let scale = t.scale().max(1.0);
    // Columns of `basis` (n × m) span the current invariant complement.
    let mut basis = CMat::identity(n, n);
    let mut found: Vec<nalgebra::DVector<C64>> = Vec::with_capacity(n);
    while found.len() < n {
        let m = basis.ncols();
        let restricted: Vec<CMat> = t.entries().iter().map(|e| basis.adjoint() * e * &basis).collect();
        // Common eigenvector of the compressed tuple on span(basis)^{⊥ found}: intersect
        // eigenspaces entry by entry.
        let mut sub = CMat::identity(m, m);
        for r in &restricted {
            let local = sub.adjoint() * r * &sub;
            let lam = linalg::eigenvalues(&local)?[0];
            let shifted = &local - CMat::identity(local.nrows(), local.ncols()) * lam;
            let k = approximate_kernel(&shifted, 1e-7 * scale);
            sub = &sub * k;
        }
        let v = &basis * sub.column(0);
        let v = &v / C64::from(v.norm());
        found.push(v.clone());
        // Orthonormal complement of the found vectors, via QR of [found | random].
        let mut cols: Vec<nalgebra::DVector<C64>> = found.clone();
        let extra = linalg::random_gaussian_matrix(rng, n, n - found.len());
        for j in 0..extra.ncols() {
            cols.push(extra.column(j).into_owned());
        }
        let full = CMat::from_columns(&cols);
        let q = full.qr().q();
        basis = q.columns(found.len(), n - found.len()).into_owned();
    }
    // Rows of U are the conjugated basis vectors, in the order found.
    let q = CMat::from_columns(&found);
    // Re-orthonormalize against accumulated rounding.
    let q = q.qr().q();
    Ok(q.adjoint())
}

fn diagonal_points(tri: &MatrixTuple) -> Vec<Vec<C64>> {
    (0..tri.n())
        .map(|k| tri.entries().iter().map(|m| m[(k, k)]).collect())
        .collect()
}

/// Joint spectrum: the `n` joint diagonal entries of a simultaneous triangularization, in the
/// triangularizing order, counted with multiplicity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumPointSet {
    #[serde(with = "json::points")]
    pub points: Vec<Vec<C64>>,
}

impl SpectrumPointSet {
    /// Largest Euclidean norm of a joint eigenvalue.
    pub fn radius(&self) -> f64 {
        self.points.iter().map(|p| linalg::norm2(p)).fold(0.0, f64::max)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

pub fn joint_spectrum(t: &MatrixTuple) -> Result<SpectrumPointSet> {
    let tri = simultaneous_triangularize(t)?;
    Ok(SpectrumPointSet {
        points: diagonal_points(&tri.triangular_tuple),
    })
}

/// Fail with a domain error unless every joint eigenvalue lies in the ball of radius `1 − margin`.
pub fn require_spectrum_in_ball(t: &MatrixTuple, margin: f64) -> Result<SpectrumPointSet> {
    let s = joint_spectrum(t)?;
    let r = s.radius();
    if !(r < 1.0 - margin) {
        return Err(Error::domain(
            "joint spectrum",
            format!("spectral radius {r:.6} is not below 1 − {margin:.1e}"),
        ));
    }
    Ok(s)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum Diagonalizability {
    Diagonalizable {
        #[serde(with = "json::matrix")]
        similarity: CMat,
        condition: f64,
        residual: f64,
    },
    NotDiagonalizable {
        eigenvector_count: usize,
    },
    /// A full eigenvector set exists but is too ill-conditioned to trust.
    Indeterminate {
        condition: f64,
    },
}

impl Diagonalizability {
    pub fn is_diagonalizable(&self) -> bool {
        matches!(self, Diagonalizability::Diagonalizable { .. })
    }
}

/// Eigenvector-matrix condition number above which the verdict is indeterminate.
pub const DIAGONALIZABLE_CONDITION_LIMIT: f64 = 1e8;

/// Joint diagonalizability test. `tol` is a relative threshold used both to cluster joint
/// eigenvalues and to decide the numerical kernel of `[(T_i − λ_i I)]`.
pub fn is_jointly_diagonalizable(t: &MatrixTuple, tol: f64) -> Result<Diagonalizability> {
    require_commuting(t, Tolerances::default().commutation)?;
    let n = t.n();
    let d = t.d();
    let scale = t.scale().max(1.0);
    let threshold = tol * scale;
    let spectrum = joint_spectrum(t)?;

    let mut clusters: Vec<(Vec<C64>, usize)> = Vec::new();
    for p in &spectrum.points {
        match clusters.iter_mut().find(|(c, _)| {
            let diff: Vec<C64> = c.iter().zip(p).map(|(a, b)| a - b).collect();
            linalg::norm2(&diff) <= threshold
        }) {
            Some((c, count)) => {
                for (ci, pi) in c.iter_mut().zip(p) {
                    *ci = (*ci * *count as f64 + pi) / (*count as f64 + 1.0);
                }
                *count += 1;
            }
            None => clusters.push((p.clone(), 1)),
        }
    }

    let mut columns: Vec<nalgebra::DVector<C64>> = Vec::with_capacity(n);
    for (center, multiplicity) in &clusters {
        let mut stacked = CMat::zeros(d * n, n);
        for (i, m) in t.entries().iter().enumerate() {
            let shifted = m - CMat::identity(n, n) * center[i];
            stacked.view_mut((i * n, 0), (n, n)).copy_from(&shifted);
        }
        let svd = linalg::full_svd(&stacked);
        let dim = svd.singular_values.iter().filter(|&&s| s <= threshold).count();
        if dim < *multiplicity {
            let found = columns.len() + dim;
            return Ok(Diagonalizability::NotDiagonalizable { eigenvector_count: found.min(n) });
        }
        for j in (n - dim)..n {
            columns.push(svd.v.column(j).into_owned());
        }
    }
    let s = CMat::from_columns(&columns);
    let sv = linalg::full_svd(&s).singular_values;
    let cond = sv[0] / sv[sv.len() - 1];
    if !cond.is_finite() || cond > DIAGONALIZABLE_CONDITION_LIMIT {
        return Ok(Diagonalizability::Indeterminate { condition: cond });
    }
    let diag = t.similarity(&s)?;
    let residual = diag
        .entries()
        .iter()
        .map(|m| {
            let mut off = m.clone();
            off.fill_diagonal(c64(0.0, 0.0));
            linalg::frobenius(&off)
        })
        .fold(0.0, f64::max);
    if residual > tol * cond * scale {
        return Ok(Diagonalizability::Indeterminate { condition: cond });
    }
    Ok(Diagonalizability::Diagonalizable {
        similarity: s,
        condition: cond,
        residual,
    })
}

/// `p(T)` by the polynomial functional calculus.
pub fn eval_poly_tuple(p: &Polynomial, t: &MatrixTuple) -> Result<CMat> {
    if p.nvars() != t.d() {
        return Err(Error::Structure(format!(
            "polynomial has {} variables but the tuple has {} entries",
            p.nvars(),
            t.d()
        )));
    }
    let n = t.n();
    let maxe = p.max_exponents();
    let powers: Vec<Vec<CMat>> = t
        .entries()
        .iter()
        .zip(&maxe)
        .map(|(m, &k)| {
            let mut v = vec![CMat::identity(n, n)];
            for e in 0..k as usize {
                let next = &v[e] * m;
                v.push(next);
            }
            v
        })
        .collect();
    let mut out = CMat::zeros(n, n);
    for (exp, c) in p.terms() {
        let mut term = CMat::identity(n, n) * *c;
        for (i, &k) in exp.iter().enumerate() {
            if k > 0 {
                term *= &powers[i][k as usize];
            }
        }
        out += term;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TupleKind {
    DiagonalConjugated,
    PolynomialInOne,
    NilpotentUpper,
}

/// Random commuting tuple, normalized to row norm 1 and then scaled by a random factor in
/// `[0.5, 1]`. Deterministic in `seed`.
pub fn random_commuting_tuple(n: usize, d: usize, seed: u64, kind: TupleKind) -> MatrixTuple {
    assert!(n >= 1 && d >= 1, "random_commuting_tuple needs n, d ≥ 1");
    let mut rng = rng_from_seed(seed);
    let entries = match kind {
        TupleKind::DiagonalConjugated => {
            // S = V diag(σ) W with σ ∈ [0.5, 1.5] keeps cond(S) ≤ 3.
            let v = linalg::random_unitary(&mut rng, n);
            let w = linalg::random_unitary(&mut rng, n);
            let sigma = CMat::from_diagonal(&nalgebra::DVector::from_fn(n, |_, _| {
                c64(rng.random_range(0.5..1.5), 0.0)
            }));
            let s = v * sigma * w;
            let s_inv = s.clone().try_inverse().expect("well-conditioned by construction");
            let points: Vec<Vec<C64>> = (0..n).map(|_| random_ball_point(&mut rng, d, 1.0)).collect();
            (0..d)
                .map(|i| {
                    let diag = CMat::from_fn(n, n, |r, c| if r == c { points[r][i] } else { c64(0.0, 0.0) });
                    &s * diag * &s_inv
                })
                .collect::<Vec<_>>()
        }
        TupleKind::PolynomialInOne => {
            let m = linalg::random_gaussian_matrix(&mut rng, n, n).scale(1.0 / (n as f64).sqrt());
            (0..d).map(|_| random_matrix_polynomial(&mut rng, &m, true)).collect()
        }
        TupleKind::NilpotentUpper => {
            let m = CMat::from_fn(n, n, |r, c| {
                if c > r {
                    linalg::complex_gaussian(&mut rng)
                } else {
                    c64(0.0, 0.0)
                }
            });
            (0..d).map(|_| random_matrix_polynomial(&mut rng, &m, false)).collect()
        }
    };
    let t = MatrixTuple::new(entries).expect("uniform square entries");
    let r = t.row_norm();
    let target: f64 = rng.random_range(0.5..=1.0);
    if r == 0.0 {
        t
    } else {
        t.scaled(target / r)
    }
}

/// Σ_k c_k M^k over degrees < n; the constant term is omitted when `with_constant` is false.
fn random_matrix_polynomial<R: Rng>(rng: &mut R, m: &CMat, with_constant: bool) -> CMat {
    let n = m.nrows();
    let mut acc = CMat::zeros(n, n);
    let mut power = CMat::identity(n, n);
    for k in 0..n.max(2) {
        if k > 0 || with_constant {
            acc += &power * linalg::complex_gaussian(rng);
        }
        power = &power * m;
    }
    acc
}

/// Uniform point in the ball of the given radius in `ℂ^d`.
pub fn random_ball_point<R: Rng + ?Sized>(rng: &mut R, d: usize, radius: f64) -> Vec<C64> {
    let g: Vec<C64> = (0..d).map(|_| linalg::complex_gaussian(rng)).collect();
    let norm = linalg::norm2(&g);
    let u: f64 = rng.random();
    let r = radius * u.powf(1.0 / (2.0 * d as f64));
    g.into_iter().map(|z| z * (r / norm)).collect()
}

/// Uniform point on the unit sphere of `ℂ^d`.
pub fn random_sphere_point<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<C64> {
    let g: Vec<C64> = (0..d).map(|_| linalg::complex_gaussian(rng)).collect();
    let norm = linalg::norm2(&g);
    g.into_iter().map(|z| z / norm).collect()
}
