//! Dense matrix geometry on the orthogonal group, Stiefel manifolds and
//! Grassmannians.
//!
//! All distances are Frobenius distances. Frames are `D x d` matrices with
//! orthonormal columns, projectors are symmetric idempotent `n x n` matrices.
//! Polar factors are computed from a thin SVD `M = W S V^t` as `W V^t`.

use nalgebra::{DMatrix, DVector, Matrix2};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;

/// Orthogonality tolerance for frames and orthogonal matrices.
pub const ORTH_TOL: f64 = 1e-9;
/// Singular values below this are treated as zero.
pub const RANK_TOL: f64 = 1e-12;
/// Minimum eigenvalue gap at the rank cut of [`grassmann_project`].
pub const EIG_GAP_TOL: f64 = 1e-10;

fn shape_str(m: &Mat) -> String {
    format!("{}x{}", m.nrows(), m.ncols())
}

pub(crate) fn check_finite(m: &Mat) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

/// Frobenius norm of `MᵗM − I`.
pub fn orthonormality_defect(m: &Mat) -> f64 {
    let gram = m.transpose() * m;
    (gram - Mat::identity(m.ncols(), m.ncols())).norm()
}

/// Checks that a square matrix is orthogonal within [`ORTH_TOL`].
pub fn check_orthogonal(m: &Mat) -> Result<()> {
    if !m.is_square() {
        return Err(Error::shape("square matrix", shape_str(m)));
    }
    check_finite(m)?;
    let defect = orthonormality_defect(m);
    if defect > ORTH_TOL {
        return Err(Error::NotOrthogonal { defect });
    }
    Ok(())
}

/// Element of the Stiefel manifold: a `D x d` matrix with orthonormal columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame(Mat);

impl Frame {
    pub fn new(m: Mat) -> Result<Self> {
        check_finite(&m)?;
        if m.nrows() < m.ncols() {
            return Err(Error::shape("D x d with D >= d", shape_str(&m)));
        }
        let defect = orthonormality_defect(&m);
        if defect > ORTH_TOL {
            return Err(Error::NotOrthogonal { defect });
        }
        Ok(Frame(m))
    }

    /// The first `d` standard basis vectors of `R^D`.
    pub fn standard(ambient: usize, rank: usize) -> Self {
        Frame(Mat::identity(ambient, rank))
    }

    pub(crate) fn from_orthonormal(m: Mat) -> Self {
        debug_assert!(orthonormality_defect(&m) < 1e-6);
        Frame(m)
    }

    pub fn ambient_dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn rank(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_matrix(&self) -> &Mat {
        &self.0
    }

    pub fn into_matrix(self) -> Mat {
        self.0
    }
}

/// Element of the Grassmannian, represented as an orthogonal projection matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Projector(Mat);

impl Projector {
    pub fn new(m: Mat) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::shape("square matrix", shape_str(&m)));
        }
        check_finite(&m)?;
        let asym = (&m - m.transpose()).norm();
        let idem = (&m * &m - &m).norm();
        if asym > ORTH_TOL || idem > ORTH_TOL {
            return Err(Error::Degenerate(format!(
                "not a projector: asymmetry {asym:e}, idempotency defect {idem:e}"
            )));
        }
        Ok(Projector(m))
    }

    pub fn as_matrix(&self) -> &Mat {
        &self.0
    }

    pub fn into_matrix(self) -> Mat {
        self.0
    }

    /// Rank, read off as the rounded trace.
    pub fn rank(&self) -> usize {
        self.0.trace().round().max(0.0) as usize
    }
}

/// Element of SO(2).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rotation2(Matrix2<f64>);

impl Rotation2 {
    pub fn new(m: Matrix2<f64>) -> Result<Self> {
        if !m.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite);
        }
        let defect = (m.transpose() * m - Matrix2::identity()).norm();
        if defect > ORTH_TOL {
            return Err(Error::NotOrthogonal { defect });
        }
        let det = m.determinant();
        if (det - 1.0).abs() > ORTH_TOL {
            return Err(Error::NotOrthogonal {
                defect: (det - 1.0).abs(),
            });
        }
        Ok(Rotation2(m))
    }

    pub fn from_dmatrix(m: &Mat) -> Result<Self> {
        if m.nrows() != 2 || m.ncols() != 2 {
            return Err(Error::shape("2x2", shape_str(m)));
        }
        Rotation2::new(Matrix2::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]))
    }

    pub fn matrix(&self) -> &Matrix2<f64> {
        &self.0
    }

    pub fn to_dmatrix(&self) -> Mat {
        Mat::from_iterator(2, 2, self.0.iter().copied())
    }
}

/// Frobenius distance `‖A − B‖`.
pub fn frobenius_dist(a: &Mat, b: &Mat) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::shape(shape_str(a), shape_str(b)));
    }
    Ok((a - b).norm())
}

/// Orthogonal factor `U` of the polar decomposition `M = U P` of a `D x d`
/// matrix of full column rank.
pub fn polar_orthogonal_factor(m: &Mat) -> Result<Frame> {
    check_finite(m)?;
    if m.nrows() < m.ncols() || m.ncols() == 0 {
        return Err(Error::shape("D x d with D >= d >= 1", shape_str(m)));
    }
    let svd = m.clone().svd(true, true);
    let smallest = svd.singular_values.min();
    if smallest <= RANK_TOL {
        return Err(Error::RankDeficient { smallest });
    }
    let w = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v_t requested");
    Ok(Frame::from_orthonormal(w * vt))
}

/// Solves `min ‖M Ω − N‖` over `Ω ∈ O(d)`; the minimizer is the polar factor
/// of `MᵗN`.
pub fn procrustes(m: &Frame, n: &Frame) -> Result<Mat> {
    if m.as_matrix().shape() != n.as_matrix().shape() {
        return Err(Error::shape(shape_str(m.as_matrix()), shape_str(n.as_matrix())));
    }
    let cross = m.as_matrix().transpose() * n.as_matrix();
    polar_orthogonal_factor(&cross).map(Frame::into_matrix)
}

/// Closest rank-`d` projector to `A`: eigendecompose the symmetric part and
/// keep the top `d` eigenvectors.
pub fn grassmann_project(a: &Mat, rank: usize) -> Result<Projector> {
    if !a.is_square() {
        return Err(Error::shape("square matrix", shape_str(a)));
    }
    check_finite(a)?;
    let n = a.nrows();
    if rank > n {
        return Err(Error::DimensionMismatch(format!("rank {rank} exceeds dimension {n}")));
    }
    let sym = (a + a.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    if rank > 0 && rank < n {
        let gap = eig.eigenvalues[order[rank - 1]] - eig.eigenvalues[order[rank]];
        if gap <= EIG_GAP_TOL {
            return Err(Error::EigenvalueTie { rank, gap });
        }
    }
    let mut proj = Mat::zeros(n, n);
    for &idx in order.iter().take(rank) {
        let v = eig.eigenvectors.column(idx);
        proj += v * v.transpose();
    }
    // symmetric by construction up to roundoff
    let proj = (&proj + proj.transpose()) * 0.5;
    Ok(Projector(proj))
}

/// `M ↦ M Mᵗ`, the projection of a frame onto its span.
pub fn frame_projector(m: &Frame) -> Projector {
    let a = m.as_matrix();
    Projector(a * a.transpose())
}

/// Principal lift `r ∈ [−1/2, 1/2)` with `Ω = so2_from_angle(r)`.
pub fn so2_lift(rot: &Rotation2) -> f64 {
    let m = rot.matrix();
    let mut r = m[(1, 0)].atan2(m[(0, 0)]) / std::f64::consts::TAU;
    if r >= 0.5 {
        r -= 1.0;
    }
    r
}

/// Rotation by angle `2πr`.
pub fn so2_from_angle(r: f64) -> Rotation2 {
    let (s, c) = (std::f64::consts::TAU * r).sin_cos();
    Rotation2(Matrix2::new(c, -s, s, c))
}

/// Haar-random orthogonal `d x d` matrix (QR of a Gaussian matrix with the
/// sign of `R`'s diagonal absorbed).
pub fn random_orthogonal<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Mat {
    let g = Mat::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            let mut col = q.column_mut(j);
            col.neg_mut();
        }
    }
    q
}

/// Haar-random rotation in SO(d).
pub fn random_rotation<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Mat {
    let mut q = random_orthogonal(d, rng);
    if q.determinant() < 0.0 {
        let mut col = q.column_mut(0);
        col.neg_mut();
    }
    q
}

/// Random frame in `St(d, D)`.
pub fn random_frame<R: Rng + ?Sized>(ambient: usize, rank: usize, rng: &mut R) -> Frame {
    let q = random_orthogonal(ambient, rng);
    Frame::from_orthonormal(q.columns(0, rank).into_owned())
}

/// Random unit vector in `R^d`.
pub fn random_unit_vector<R: Rng + ?Sized>(d: usize, rng: &mut R) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let n = v.norm();
        if n > 1e-8 {
            return v / n;
        }
    }
}

/// `exp` of a skew-symmetric generator scaled to Frobenius size `size`; a
/// rotation near the identity used to perturb orthogonal matrices.
pub fn random_small_rotation<R: Rng + ?Sized>(d: usize, size: f64, rng: &mut R) -> Mat {
    if d < 2 {
        return Mat::identity(d, d);
    }
    let g = Mat::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let skew = &g - g.transpose();
    let n = skew.norm();
    let skew = if n > 0.0 { skew * (size / n) } else { skew };
    skew.exp()
}
