//! Dense complex linear algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, Schur, SymmetricEigen, SVD};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

/// Reciprocal condition number below which inverses are refused.
pub const RCOND_THRESHOLD: f64 = 1e-12;

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn frobenius(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest singular value.
pub fn op_norm(m: &CMat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    SVD::new(m.clone(), false, false)
        .singular_values
        .iter()
        .cloned()
        .fold(0.0, f64::max)
}

/// Frobenius norm of the strictly lower triangular part.
pub fn strict_lower_norm(m: &CMat) -> f64 {
    let mut acc = 0.0;
    for j in 0..m.ncols() {
        for i in (j + 1)..m.nrows() {
            acc += m[(i, j)].norm_sqr();
        }
    }
    acc.sqrt()
}

/// `‖U*U − I‖_F`.
pub fn unitary_defect(u: &CMat) -> f64 {
    let n = u.ncols();
    frobenius(&(u.adjoint() * u - CMat::identity(n, n)))
}

pub fn one_norm(m: &CMat) -> f64 {
    (0..m.ncols())
        .map(|j| m.column(j).iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Inverse with a reciprocal-condition guard (1-norm estimate from the explicit inverse).
pub fn inverse_checked(m: &CMat, context: &str) -> Result<CMat> {
    let inv = m.clone().try_inverse().ok_or_else(|| Error::IllConditioned {
        context: context.to_string(),
        rcond: 0.0,
    })?;
    let rcond = 1.0 / (one_norm(m) * one_norm(&inv));
    if !rcond.is_finite() || rcond < RCOND_THRESHOLD {
        return Err(Error::IllConditioned {
            context: context.to_string(),
            rcond: if rcond.is_finite() { rcond } else { 0.0 },
        });
    }
    Ok(inv)
}

/// Complex Schur form `m = Q S Q*` with `S` upper triangular.
pub fn schur(m: &CMat) -> Result<(CMat, CMat)> {
    let n = m.nrows();
    if n == 0 {
        return Ok((CMat::zeros(0, 0), CMat::zeros(0, 0)));
    }
    let s = Schur::try_new(m.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Convergence {
            context: "complex Schur decomposition".into(),
            achieved: f64::NAN,
        })?;
    let (q, mut t) = s.unpack();
    // nalgebra leaves rounding noise below the diagonal; clear it.
    for j in 0..n {
        for i in (j + 1)..n {
            t[(i, j)] = C64::new(0.0, 0.0);
        }
    }
    Ok((q, t))
}

/// Eigenvalues of a general complex matrix, read off its Schur form.
pub fn eigenvalues(m: &CMat) -> Result<Vec<C64>> {
    let (_, t) = schur(m)?;
    Ok((0..t.nrows()).map(|i| t[(i, i)]).collect())
}

pub fn spectral_radius(m: &CMat) -> Result<f64> {
    Ok(eigenvalues(m)?.iter().map(|z| z.norm()).fold(0.0, f64::max))
}

/// Hermitian eigen-decomposition of the Hermitian part of `m`, eigenvalues ascending.
pub fn hermitian_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let h = (m + m.adjoint()).scale(0.5);
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = CMat::from_fn(m.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    hermitian_eigen(m).0
}

/// Singular value decomposition sorted by decreasing singular value: `m = U diag(s) V*`.
pub struct SortedSvd {
    pub u: CMat,
    pub singular_values: Vec<f64>,
    pub v: CMat,
}

/// Full SVD; `v` is square (`ncols × ncols`) so that trailing columns span the kernel.
pub fn full_svd(m: &CMat) -> SortedSvd {
    let (rows, cols) = m.shape();
    // Pad with zero rows so the thin SVD returns a complete right basis.
    let padded = if rows < cols {
        let mut p = CMat::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let mut svd = SVD::new(padded, true, true);
    svd.sort_by_singular_values();
    let u_full = svd.u.unwrap();
    let u = u_full.rows(0, rows).into_owned();
    let v = svd.v_t.unwrap().adjoint();
    SortedSvd {
        u,
        singular_values: svd.singular_values.iter().cloned().collect(),
        v,
    }
}

/// Positive-definiteness by an unpivoted Cholesky factorization: every pivot must be
/// strictly positive. This is the factorization side of the Pick bisection oracle and
/// deliberately does not go through an eigen-solver.
pub fn cholesky_is_positive_definite(m: &CMat) -> bool {
    let n = m.nrows();
    let mut l = CMat::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)].re;
        for k in 0..j {
            d -= l[(j, k)].norm_sqr();
        }
        if !(d > 0.0) {
            return false;
        }
        let djj = d.sqrt();
        l[(j, j)] = C64::new(djj, 0.0);
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)].conj();
            }
            l[(i, j)] = s / djj;
        }
    }
    true
}

pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn random_gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| complex_gaussian(rng))
}

/// Haar-distributed unitary via QR of a Gaussian matrix with phase correction.
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMat {
    let g = random_gaussian_matrix(rng, n, n);
    let qr = g.qr();
    let q = qr.q();
    let r = qr.r();
    let mut out = q;
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..n {
            out[(i, j)] *= phase;
        }
    }
    out
}

/// `⟨z, w⟩ = Σ z_k conj(w_k)`.
pub fn inner(z: &[C64], w: &[C64]) -> C64 {
    z.iter().zip(w).map(|(a, b)| a * b.conj()).sum()
}

pub fn norm2(z: &[C64]) -> f64 {
    z.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn schur_reconstructs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let m = random_gaussian_matrix(&mut rng, 5, 5);
        let (q, t) = schur(&m).unwrap();
        assert!(unitary_defect(&q) < 1e-12);
        assert!(frobenius(&(&q * &t * q.adjoint() - &m)) < 1e-12);
        assert_eq!(strict_lower_norm(&t), 0.0);
    }

    #[test]
    fn cholesky_matches_eigen_sign() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = random_gaussian_matrix(&mut rng, 4, 4);
        let pd = &g * g.adjoint() + CMat::identity(4, 4).scale(0.1);
        assert!(cholesky_is_positive_definite(&pd));
        let indef = &pd - CMat::identity(4, 4).scale(hermitian_eigenvalues(&pd)[0] + 0.05);
        assert!(!cholesky_is_positive_definite(&indef));
    }

    #[test]
    fn full_svd_has_kernel_columns() {
        let m = CMat::from_row_slice(1, 3, &[c64(1.0, 0.0), c64(0.0, 1.0), c64(0.0, 0.0)]);
        let svd = full_svd(&m);
        assert_eq!(svd.v.shape(), (3, 3));
        assert!(unitary_defect(&svd.v) < 1e-12);
        for j in 1..3 {
            let col = svd.v.column(j).into_owned();
            assert!((&m * col).norm() < 1e-12);
        }
    }

    #[test]
    fn random_unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(unitary_defect(&random_unitary(&mut rng, 6)) < 1e-12);
    }

    #[test]
    fn inverse_guard_trips_on_singular() {
        let m = CMat::from_element(2, 2, c64(1.0, 0.0));
        assert!(matches!(inverse_checked(&m, "t"), Err(Error::IllConditioned { .. })));
    }
}
