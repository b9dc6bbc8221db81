//! Automorphisms of the unit ball and the two variable-reduction procedures.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::json;
use crate::linalg::{self, c64, CMat, C64};
use crate::series::{linear_combination, Coef, MonomialBasis, Series};
use crate::tuple::{self, Diagonalizability, MatrixTuple};

/// `z ↦ U φ_b(z)` where `φ_b(z) = (b − P_b z − s_b Q_b z)/(1 − ⟨z,b⟩)` is the involution
/// exchanging `b` and `0`, `P_b` the projection onto `span(b)`, `Q_b = I − P_b` and
/// `s_b = (1 − ‖b‖²)^{1/2}`. With `b = 0` the involution is `z ↦ −z`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AutomorphismRepr", into = "AutomorphismRepr")]
pub struct BallAutomorphism {
    base: Vec<C64>,
    unitary: CMat,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AutomorphismRepr {
    #[serde(with = "json::complex_vec")]
    base: Vec<C64>,
    #[serde(with = "json::matrix")]
    unitary: CMat,
}

impl TryFrom<AutomorphismRepr> for BallAutomorphism {
    type Error = Error;

    fn try_from(r: AutomorphismRepr) -> Result<Self> {
        BallAutomorphism::new(r.base, r.unitary)
    }
}

impl From<BallAutomorphism> for AutomorphismRepr {
    fn from(a: BallAutomorphism) -> Self {
        AutomorphismRepr {
            base: a.base,
            unitary: a.unitary,
        }
    }
}

pub const UNITARY_TOLERANCE: f64 = 1e-12;

impl BallAutomorphism {
    pub fn new(base: Vec<C64>, unitary: CMat) -> Result<Self> {
        let d = base.len();
        if d == 0 {
            return Err(Error::Structure("automorphism base must be non-empty".into()));
        }
        if unitary.shape() != (d, d) {
            return Err(Error::Structure(format!(
                "unitary is {}×{}, expected {d}×{d}",
                unitary.nrows(),
                unitary.ncols()
            )));
        }
        let norm = linalg::norm2(&base);
        if !(norm < 1.0) {
            return Err(Error::domain("automorphism base", format!("‖b‖ = {norm} is not below 1")));
        }
        let defect = linalg::unitary_defect(&unitary);
        if defect > UNITARY_TOLERANCE {
            return Err(Error::Precondition(format!("matrix is not unitary: ‖U*U − I‖ = {defect:.3e}")));
        }
        Ok(BallAutomorphism { base, unitary })
    }

    /// The involution `φ_b`.
    pub fn involution_at(b: &[C64]) -> Result<Self> {
        BallAutomorphism::new(b.to_vec(), CMat::identity(b.len(), b.len()))
    }

    /// The linear map `z ↦ V z`, stored as `(−V)∘φ_0`.
    pub fn from_unitary(v: &CMat) -> Result<Self> {
        BallAutomorphism::new(vec![c64(0.0, 0.0); v.nrows()], -v)
    }

    pub fn identity(d: usize) -> Self {
        BallAutomorphism::from_unitary(&CMat::identity(d, d)).expect("identity is unitary")
    }

    pub fn dim(&self) -> usize {
        self.base.len()
    }

    pub fn base(&self) -> &[C64] {
        &self.base
    }

    pub fn unitary(&self) -> &CMat {
        &self.unitary
    }

    /// `(U∘φ_b)⁻¹ = U*∘φ_{Ub}`, using `φ_{Ub} = U φ_b U*`.
    pub fn inverse(&self) -> Self {
        let ub = &self.unitary * nalgebra::DVector::from_column_slice(&self.base);
        BallAutomorphism {
            base: ub.iter().cloned().collect(),
            unitary: self.unitary.adjoint(),
        }
    }

    /// The matrix `A = s I + (1 − s) b b*/‖b‖²` in `φ_b(z) = (b − A z)/(1 − ⟨z,b⟩)`.
    fn linear_part(&self) -> CMat {
        let d = self.dim();
        let nb2: f64 = self.base.iter().map(|z| z.norm_sqr()).sum();
        let s = (1.0 - nb2).sqrt();
        let mut a = CMat::identity(d, d) * c64(s, 0.0);
        if nb2 > 0.0 {
            for i in 0..d {
                for j in 0..d {
                    a[(i, j)] += self.base[i] * self.base[j].conj() * ((1.0 - s) / nb2);
                }
            }
        }
        a
    }

    /// Evaluate on truncated series inputs (points and tuples are order-zero series).
    pub fn apply_series<R: Coef>(&self, z: &[Series<R>]) -> Result<Vec<Series<R>>> {
        let d = self.dim();
        if z.len() != d {
            return Err(Error::Structure(format!("automorphism of B_{d} applied to {} inputs", z.len())));
        }
        let scalars: Option<Vec<C64>> = z.iter().map(|s| s.constant_term().as_scalar()).collect();
        if let Some(p) = scalars {
            let norm = linalg::norm2(&p);
            if !(norm < 1.0) {
                return Err(Error::domain("ball automorphism", format!("point of norm {norm} outside the open ball")));
            }
        }
        let a = self.linear_part();
        let conj_b: Vec<C64> = self.base.iter().map(|b| b.conj()).collect();
        let den = linear_combination(&conj_b.iter().map(|c| -c).collect::<Vec<_>>(), z, c64(1.0, 0.0));
        let inv = den.recip("ball automorphism denominator 1 − ⟨z,b⟩")?;
        let w: Vec<Series<R>> = (0..d)
            .map(|k| {
                let row: Vec<C64> = (0..d).map(|m| -a[(k, m)]).collect();
                linear_combination(&row, z, self.base[k]).mul(&inv)
            })
            .collect();
        Ok((0..d)
            .map(|j| {
                let row: Vec<C64> = (0..d).map(|k| self.unitary[(j, k)]).collect();
                linear_combination(&row, &w, c64(0.0, 0.0))
            })
            .collect())
    }

    pub fn apply_point(&self, z: &[C64]) -> Result<Vec<C64>> {
        let basis = MonomialBasis::get(0, 0);
        let inputs: Vec<Series<C64>> = z.iter().map(|&x| Series::constant(basis.clone(), x)).collect();
        Ok(self
            .apply_series(&inputs)?
            .into_iter()
            .map(|s| *s.constant_term())
            .collect())
    }

    /// Componentwise rational matrix evaluation `θ(T)`; requires `σ(T)` inside the open ball.
    pub fn apply_tuple(&self, t: &MatrixTuple) -> Result<MatrixTuple> {
        tuple::require_spectrum_in_ball(t, 0.0)?;
        self.apply_tuple_unchecked(t)
    }

    /// As [`apply_tuple`](Self::apply_tuple) without the spectral precondition check; the
    /// conditioning guard on `I − ⟨T,b⟩` still applies.
    pub fn apply_tuple_unchecked(&self, t: &MatrixTuple) -> Result<MatrixTuple> {
        let basis = MonomialBasis::get(0, 0);
        let inputs: Vec<Series<CMat>> = t.entries().iter().map(|m| Series::constant(basis.clone(), m.clone())).collect();
        MatrixTuple::new(
            self.apply_series(&inputs)?
                .into_iter()
                .map(|s| s.constant_term().clone())
                .collect(),
        )
    }
}

/// Result of rotating a tuple so that its linear span occupies the leading coordinates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpanReduction {
    #[serde(with = "json::matrix")]
    pub unitary: CMat,
    pub tuple: MatrixTuple,
    pub rank: usize,
    /// `min(d, ⌊n²/4⌋ + 1)`.
    pub rank_bound: usize,
    /// Set when the measured rank exceeds the bound; reported, never clipped.
    pub bound_violated: bool,
    /// Largest Frobenius norm among the entries past `rank`.
    pub tail_norm: f64,
}

/// Largest dimension of a commutative subalgebra of `M_n`: `⌊n²/4⌋ + 1`.
pub fn commutative_dimension_bound(n: usize) -> usize {
    n * n / 4 + 1
}

/// Rotate the variables by a unitary so that entries past the numerical rank of the span of
/// `T_1 … T_d` vanish. `tol` is relative to the largest singular value.
pub fn reduce_variables_span(t: &MatrixTuple, tol: f64) -> Result<SpanReduction> {
    let d = t.d();
    if d < 2 {
        return Err(Error::Precondition("span reduction needs d ≥ 2".into()));
    }
    let diag = tuple::validate_tuple(t, tuple::Tolerances::default().commutation * t.scale().max(1.0));
    if !diag.is_commuting {
        return Err(Error::Precondition(format!(
            "tuple does not commute: residual {:.3e}",
            diag.commutation_residual
        )));
    }
    let n = t.n();
    // Column j of C is vec(T_j).
    let c = CMat::from_fn(n * n, d, |r, j| t.entry(j)[(r % n, r / n)]);
    let svd = linalg::full_svd(&c);
    let smax = svd.singular_values.first().copied().unwrap_or(0.0);
    let rank = if smax == 0.0 {
        0
    } else {
        svd.singular_values.iter().filter(|&&s| s > tol * smax).count()
    };
    // (U·T)_j = Σ_i X_ij T_i with C = W Σ X*, i.e. U = Xᵀ.
    let u = svd.v.transpose();
    let rotated = t.linear_combination(&u);
    let tail_norm = rotated.entries()[rank..]
        .iter()
        .map(linalg::frobenius)
        .fold(0.0, f64::max);
    let rank_bound = d.min(commutative_dimension_bound(n));
    Ok(SpanReduction {
        unitary: u,
        tuple: rotated,
        rank,
        rank_bound,
        bound_violated: rank > rank_bound,
        tail_norm,
    })
}

/// Result of moving one joint eigenvalue to the origin and rotating the others into the
/// leading `n − 1` coordinates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DiagonalReduction {
    pub automorphism: BallAutomorphism,
    pub tuple: MatrixTuple,
    /// Index (in the diagonalizing basis) of the joint eigenvalue sent to 0.
    pub moved_index: usize,
    /// Largest Frobenius norm among entries `n … d` (1-based), i.e. past the first `n − 1`.
    pub tail_norm: f64,
}

pub fn reduce_variables_diagonalizable(t: &MatrixTuple) -> Result<DiagonalReduction> {
    let (n, d) = (t.n(), t.d());
    if d < n {
        return Err(Error::Precondition(format!("needs d ≥ n, got d = {d}, n = {n}")));
    }
    let s = match tuple::is_jointly_diagonalizable(t, 1e-8)? {
        Diagonalizability::Diagonalizable { similarity, .. } => similarity,
        other => {
            return Err(Error::Precondition(format!(
                "tuple is not jointly diagonalizable ({other:?})"
            )))
        }
    };
    let diag = t.similarity(&s)?;
    let points: Vec<Vec<C64>> = (0..n).map(|k| diag.entries().iter().map(|m| m[(k, k)]).collect()).collect();
    let mut moved = 0;
    for (k, p) in points.iter().enumerate() {
        if linalg::norm2(p) > linalg::norm2(&points[moved]) {
            moved = k;
        }
    }
    let phi = BallAutomorphism::involution_at(&points[moved])?;
    let others: Vec<Vec<C64>> = points
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != moved)
        .map(|(_, p)| phi.apply_point(p))
        .collect::<Result<_>>()?;
    let w_star = if others.is_empty() {
        CMat::identity(d, d)
    } else {
        let m = CMat::from_fn(d, others.len(), |i, k| others[k][i]);
        // Left singular vectors of M are the right singular vectors of M*.
        linalg::full_svd(&m.adjoint()).v.adjoint()
    };
    let theta = BallAutomorphism::new(points[moved].clone(), w_star)?;
    let reduced = theta.apply_tuple(t)?;
    let keep = n.saturating_sub(1);
    let tail_norm = reduced.entries()[keep..]
        .iter()
        .map(linalg::frobenius)
        .fold(0.0, f64::max);
    Ok(DiagonalReduction {
        automorphism: theta,
        tuple: reduced,
        moved_index: moved,
        tail_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::par::rng_from_seed;
    use crate::tuple::{random_ball_point, random_commuting_tuple, TupleKind};

    fn close(a: &[C64], b: &[C64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).norm() <= tol)
    }

    #[test]
    fn zero_base_is_negation() {
        let phi = BallAutomorphism::involution_at(&[c64(0.0, 0.0); 2]).unwrap();
        let z = [c64(0.3, 0.1), c64(-0.2, 0.4)];
        let w = phi.apply_point(&z).unwrap();
        assert!(close(&w, &[-z[0], -z[1]], 1e-15));
    }

    #[test]
    fn exchanges_base_and_origin() {
        let b = vec![c64(0.3, 0.0), c64(0.4, 0.0), c64(0.0, 0.0)];
        let phi = BallAutomorphism::involution_at(&b).unwrap();
        assert!(close(&phi.apply_point(&b).unwrap(), &[c64(0.0, 0.0); 3], 1e-15));
        assert!(close(&phi.apply_point(&[c64(0.0, 0.0); 3]).unwrap(), &b, 1e-15));
    }

    #[test]
    fn involution_and_inverse() {
        let mut rng = rng_from_seed(17);
        let b = random_ball_point(&mut rng, 3, 0.9);
        let u = linalg::random_unitary(&mut rng, 3);
        let phi = BallAutomorphism::involution_at(&b).unwrap();
        let theta = BallAutomorphism::new(b, u).unwrap();
        let inv = theta.inverse();
        for _ in 0..100 {
            let z = random_ball_point(&mut rng, 3, 0.99);
            assert!(close(&phi.apply_point(&phi.apply_point(&z).unwrap()).unwrap(), &z, 1e-12));
            let w = theta.apply_point(&z).unwrap();
            assert!(linalg::norm2(&w) < 1.0);
            assert!(close(&inv.apply_point(&w).unwrap(), &z, 1e-12));
        }
    }

    #[test]
    fn pure_unitary_preserves_norm() {
        let mut rng = rng_from_seed(3);
        let v = linalg::random_unitary(&mut rng, 4);
        let theta = BallAutomorphism::from_unitary(&v).unwrap();
        let z = random_ball_point(&mut rng, 4, 0.9);
        let w = theta.apply_point(&z).unwrap();
        assert!((linalg::norm2(&w) - linalg::norm2(&z)).abs() < 1e-15);
        let expect = &v * nalgebra::DVector::from_column_slice(&z);
        assert!(close(&w, expect.as_slice(), 1e-15));
    }

    #[test]
    fn rejects_points_outside() {
        assert!(BallAutomorphism::involution_at(&[c64(1.0, 0.0)]).is_err());
        let phi = BallAutomorphism::involution_at(&[c64(0.5, 0.0)]).unwrap();
        assert!(matches!(phi.apply_point(&[c64(1.0, 0.0)]), Err(Error::Domain { .. })));
    }

    #[test]
    fn diagonal_tuple_maps_eigenvalues() {
        let pts = vec![vec![c64(0.1, 0.2), c64(-0.3, 0.0)], vec![c64(0.5, 0.0), c64(0.1, -0.1)]];
        let t = MatrixTuple::diagonal(&pts).unwrap();
        let phi = BallAutomorphism::involution_at(&[c64(0.2, 0.1), c64(0.0, 0.3)]).unwrap();
        let mapped = phi.apply_tuple(&t).unwrap();
        for (k, p) in pts.iter().enumerate() {
            let expect = phi.apply_point(p).unwrap();
            for (i, e) in expect.iter().enumerate() {
                assert!((mapped.entry(i)[(k, k)] - e).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn span_reduction_of_scalar_multiples() {
        let dmat = CMat::from_diagonal(&nalgebra::DVector::from_vec(vec![c64(0.3, 0.0), c64(-0.1, 0.2)]));
        let t = MatrixTuple::new(vec![dmat.clone() * c64(0.5, 0.0), dmat.clone() * c64(0.0, 0.2), dmat * c64(-0.1, 0.0)]).unwrap();
        let r = reduce_variables_span(&t, 1e-10).unwrap();
        assert_eq!(r.rank, 1);
        assert!(r.tail_norm < 1e-14);
        assert!(linalg::unitary_defect(&r.unitary) < 1e-12);
    }

    #[test]
    fn span_reduction_respects_bound() {
        let t = random_commuting_tuple(2, 5, 11, TupleKind::PolynomialInOne);
        let r = reduce_variables_span(&t, 1e-10).unwrap();
        assert!(r.rank <= 2);
        assert!(!r.bound_violated);
        assert!(r.tail_norm <= 1e-10);
        let again = reduce_variables_span(&r.tuple, 1e-10).unwrap();
        assert_eq!(again.rank, r.rank);
    }

    #[test]
    fn diagonal_reduction_kills_tail() {
        let t = random_commuting_tuple(2, 3, 5, TupleKind::DiagonalConjugated);
        let r = reduce_variables_diagonalizable(&t).unwrap();
        assert!(r.tail_norm < 1e-10, "tail {}", r.tail_norm);
        let one = MatrixTuple::diagonal(&[vec![c64(0.2, 0.0), c64(0.1, 0.3)]]).unwrap();
        let r1 = reduce_variables_diagonalizable(&one).unwrap();
        assert!(r1.tail_norm < 1e-14);
    }

    #[test]
    fn json_shape() {
        let a = BallAutomorphism::involution_at(&[c64(0.5, 0.0)]).unwrap();
        let s = serde_json::to_string(&a).unwrap();
        assert_eq!(s, r#"{"base":[[0.5,0.0]],"unitary":[[[1.0,0.0]]]}"#);
        assert_eq!(serde_json::from_str::<BallAutomorphism>(&s).unwrap(), a);
        assert!(serde_json::from_str::<BallAutomorphism>(r#"{"base":[[1.5,0.0]],"unitary":[[[1.0,0.0]]]}"#).is_err());
    }
}
