//! Point-cloud front end: local PCA frames, delay embeddings, dataset
//! generators, and the image alignment cocycle.

use std::f64::consts::{PI, TAU};
use std::io::{BufRead, Write};
use std::sync::Arc;

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bundle::{DiscreteCocycle, DiscreteTrivialization};
use crate::complex::SimplicialComplex;
use crate::error::{Error, Result};
use crate::matgeo::{Frame, Mat, Rotation2};

/// Points stored as the rows of a matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Mat,
    labels: Option<Vec<String>>,
}

impl PointCloud {
    pub fn new(points: Mat) -> Result<Self> {
        if points.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(PointCloud { points, labels: None })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(r) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::shape(format!("{dim} coordinates"), r.len().to_string()));
        }
        Self::new(Mat::from_fn(rows.len(), dim, |i, j| rows[i][j]))
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.len() {
            return Err(Error::shape(self.len().to_string(), labels.len().to_string()));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn as_matrix(&self) -> &Mat {
        &self.points
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn point(&self, i: usize) -> Vec<f64> {
        self.points.row(i).iter().copied().collect()
    }

    /// The points with the given indices, in that order.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        let points = Mat::from_fn(indices.len(), self.dim(), |r, c| self.points[(indices[r], c)]);
        let labels = self
            .labels
            .as_ref()
            .map(|l| indices.iter().map(|&i| l[i].clone()).collect());
        PointCloud { points, labels }
    }

    /// Adds `v` to every point.
    pub fn translate(&self, v: &[f64]) -> Result<PointCloud> {
        if v.len() != self.dim() {
            return Err(Error::shape(self.dim().to_string(), v.len().to_string()));
        }
        let mut points = self.points.clone();
        for mut row in points.row_iter_mut() {
            for (x, t) in row.iter_mut().zip(v) {
                *x += t;
            }
        }
        Ok(PointCloud {
            points,
            labels: self.labels.clone(),
        })
    }

    fn sq_dist(&self, i: usize, j: usize) -> f64 {
        self.points
            .row(i)
            .iter()
            .zip(self.points.row(j).iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }
}

/// Symmetric, nonnegative, zero-diagonal matrix of pairwise dissimilarities.
#[derive(Debug, Clone, PartialEq)]
pub struct DissimilarityMatrix(Mat);

impl DissimilarityMatrix {
    pub fn new(m: Mat) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::InvalidDissimilarity("not square".into()));
        }
        let n = m.nrows();
        for i in 0..n {
            if m[(i, i)] != 0.0 {
                return Err(Error::InvalidDissimilarity(format!("nonzero diagonal at {i}")));
            }
            for j in 0..i {
                let (a, b) = (m[(i, j)], m[(j, i)]);
                if !a.is_finite() || a < 0.0 || a != b {
                    return Err(Error::InvalidDissimilarity(format!("entry ({i}, {j})")));
                }
            }
        }
        Ok(DissimilarityMatrix(m))
    }

    /// Euclidean distances between the points.
    pub fn euclidean(x: &PointCloud) -> Self {
        let n = x.len();
        let rows: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|i| (0..n).map(|j| x.sq_dist(i, j).sqrt()).collect())
            .collect();
        DissimilarityMatrix(Mat::from_fn(n, n, |i, j| rows[i.min(j)][i.max(j)]))
    }

    pub fn len(&self) -> usize {
        self.0.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_matrix(&self) -> &Mat {
        &self.0
    }

    /// Restriction to a subset of indices.
    pub fn select(&self, indices: &[usize]) -> Self {
        DissimilarityMatrix(Mat::from_fn(indices.len(), indices.len(), |r, c| {
            self.0[(indices[r], indices[c])]
        }))
    }
}

/// Frames from local PCA, with vertices whose neighborhoods had a singular
/// value tie at the rank cut.
#[derive(Debug, Clone)]
pub struct LocalPca {
    pub frames: Vec<Frame>,
    pub degenerate: Vec<usize>,
}

impl LocalPca {
    pub fn trivialization(&self, complex: Arc<SimplicialComplex>) -> Result<DiscreteTrivialization> {
        DiscreteTrivialization::new(complex, self.frames.clone())
    }
}

/// Indices of the `k` nearest points to `i` (including `i` itself), ties
/// broken by index.
pub fn nearest_neighbors(x: &PointCloud, i: usize, k: usize) -> Vec<usize> {
    let mut d: Vec<(f64, usize)> = (0..x.len()).map(|j| (x.sq_dist(i, j), j)).collect();
    let k = k.min(d.len());
    if k == 0 {
        return Vec::new();
    }
    d.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut nn: Vec<(f64, usize)> = d[..k].to_vec();
    nn.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    nn.into_iter().map(|(_, j)| j).collect()
}

/// Singular values (descending, padded with zeros to `d + 1`) and the top
/// `d` right singular vectors of a centered `k x D` matrix.
///
/// Computed from the symmetric eigendecomposition of the smaller of the two
/// Gram matrices; the general SVD loses accuracy in its singular vectors when
/// a singular value vanishes exactly, which is the typical case here.
fn principal_directions(nb: &Mat, d: usize) -> (Vec<f64>, Mat) {
    let (k, dim) = nb.shape();
    let small = if dim <= k { nb.transpose() * nb } else { nb * nb.transpose() };
    let eig = small.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut sigma: Vec<f64> = order.iter().map(|&o| eig.eigenvalues[o].max(0.0).sqrt()).collect();
    sigma.resize(sigma.len().max(d + 1), 0.0);
    let mut dirs = Mat::zeros(dim, d);
    for (c, &o) in order.iter().take(d).enumerate() {
        let v = eig.eigenvectors.column(o);
        if dim <= k {
            dirs.set_column(c, &v);
        } else {
            let u = nb.transpose() * v;
            let n = u.norm();
            if n > 0.0 {
                dirs.set_column(c, &(u / n));
            }
        }
    }
    // remove the roundoff left by the Gram route; directions are already
    // orthogonal up to it
    let q = dirs.clone().qr().q();
    for c in 0..d {
        let sign = q.column(c).dot(&dirs.column(c)).signum();
        let col = q.column(c) * if sign == 0.0 { 1.0 } else { sign };
        dirs.set_column(c, &col);
    }
    (sigma, dirs)
}

/// Top-`d` principal directions of each point's `k`-neighborhood.
///
/// Each column is signed so that its largest-magnitude entry is positive.
pub fn local_pca(x: &PointCloud, k: usize, d: usize) -> Result<LocalPca> {
    if d == 0 || k < d {
        return Err(Error::DimensionMismatch(format!("need k >= d >= 1, got k={k}, d={d}")));
    }
    if x.len() < k {
        return Err(Error::DimensionMismatch(format!("{} points for k={k}", x.len())));
    }
    if x.dim() < d {
        return Err(Error::DimensionMismatch(format!("rank {d} in dimension {}", x.dim())));
    }
    let results = (0..x.len())
        .into_par_iter()
        .map(|i| {
            let nn = nearest_neighbors(x, i, k);
            let mut nb = Mat::from_fn(k, x.dim(), |r, c| x.points[(nn[r], c)]);
            let mean = nb.row_mean();
            for mut row in nb.row_iter_mut() {
                row -= &mean;
            }
            let (sigma, dirs) = principal_directions(&nb, d);
            let scale = sigma[0].max(1.0);
            let tie = d < x.dim() && sigma[d - 1] - sigma.get(d).copied().unwrap_or(0.0) <= 1e-10 * scale;
            let mut frame = Mat::zeros(x.dim(), d);
            for c in 0..d {
                let mut col: Vec<f64> = dirs.column(c).iter().copied().collect();
                let big = col
                    .iter()
                    .copied()
                    .enumerate()
                    .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()).then(b.0.cmp(&a.0)))
                    .map_or(1.0, |(_, v)| v);
                if big < 0.0 {
                    col.iter_mut().for_each(|v| *v = -*v);
                }
                frame.column_mut(c).copy_from_slice(&col);
            }
            Frame::new(frame).map(|f| (f, tie))
        })
        .collect::<Result<Vec<_>>>()?;
    let degenerate: Vec<usize> = results
        .iter()
        .enumerate()
        .filter(|(_, (_, t))| *t)
        .map(|(i, _)| i)
        .collect();
    if !degenerate.is_empty() {
        log::warn!(
            "local PCA: {} neighborhoods have a singular value tie at rank {d}",
            degenerate.len()
        );
    }
    Ok(LocalPca {
        frames: results.into_iter().map(|(f, _)| f).collect(),
        degenerate,
    })
}

/// Sliding windows `(x_i, x_{i+τ}, …, x_{i+(d−1)τ})`.
pub fn delay_embed(series: &[f64], d: usize, tau: usize) -> Result<PointCloud> {
    if d == 0 {
        return Err(Error::DimensionMismatch("target dimension 0".into()));
    }
    let span = (d - 1) * tau;
    if series.len() < span + 1 {
        return Err(Error::Degenerate(format!(
            "series of length {} too short for d={d}, tau={tau}",
            series.len()
        )));
    }
    let n = series.len() - span;
    PointCloud::new(Mat::from_fn(n, d, |i, j| series[i + j * tau]))
}

/// `m` distinct indices out of `n`, sorted, from a seeded RNG.
pub fn random_subsample(n: usize, m: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = sample(&mut rng, n, m.min(n)).into_vec();
    idx.sort_unstable();
    idx
}

/// Greedy farthest-point subsample starting from index 0.
pub fn maxmin_subsample(d: &DissimilarityMatrix, m: usize) -> Vec<usize> {
    let n = d.len();
    if n == 0 || m == 0 {
        return Vec::new();
    }
    let mut chosen = vec![0];
    let mut dist: Vec<f64> = (0..n).map(|j| d.0[(0, j)]).collect();
    while chosen.len() < m.min(n) {
        let (next, _) = dist
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
            .expect("nonempty");
        chosen.push(next);
        for j in 0..n {
            dist[j] = dist[j].min(d.0[(next, j)]);
        }
    }
    chosen
}

/// Time-periodic double-gyre flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubleGyre {
    pub amplitude: f64,
    pub eps: f64,
    pub omega: f64,
}

impl DoubleGyre {
    /// `(ẋ, ẏ) = (∂ψ/∂y, −∂ψ/∂x)` with `ψ = A sin(π f(x,t)) sin(π y)`.
    pub fn velocity(&self, x: f64, y: f64, t: f64) -> (f64, f64) {
        let a = self.eps * (self.omega * t).sin();
        let f = a * x * x + (1.0 - 2.0 * a) * x;
        let df = 2.0 * a * x + 1.0 - 2.0 * a;
        let (spf, cpf) = (PI * f).sin_cos();
        let (spy, cpy) = (PI * y).sin_cos();
        let dpsi_dx = self.amplitude * PI * cpf * df * spy;
        let dpsi_dy = self.amplitude * PI * spf * cpy;
        (dpsi_dy, -dpsi_dx)
    }

    fn rk4(&self, (x, y): (f64, f64), t: f64, h: f64) -> (f64, f64) {
        let k1 = self.velocity(x, y, t);
        let k2 = self.velocity(x + 0.5 * h * k1.0, y + 0.5 * h * k1.1, t + 0.5 * h);
        let k3 = self.velocity(x + 0.5 * h * k2.0, y + 0.5 * h * k2.1, t + 0.5 * h);
        let k4 = self.velocity(x + h * k3.0, y + h * k3.1, t + h);
        (
            x + h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
            y + h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
        )
    }
}

/// A sampled trajectory `(t, x, y)`.
pub type Trajectory = Vec<(f64, f64, f64)>;

/// Integrates the flow from `(x0, y0)` at time `t0` with fixed-step RK4 and
/// samples `n_samples` equally spaced times from `t0` to `t_end` inclusive.
pub fn gen_double_gyre(
    flow: DoubleGyre,
    (x0, y0, t0): (f64, f64, f64),
    n_samples: usize,
    t_end: f64,
    max_step: f64,
) -> Result<Trajectory> {
    if !(flow.amplitude > 0.0 && flow.eps > 0.0 && flow.omega > 0.0) {
        return Err(Error::Degenerate("flow parameters must be positive".into()));
    }
    if !(0.0..=2.0).contains(&x0) || !(0.0..=1.0).contains(&y0) {
        return Err(Error::Degenerate(format!("start ({x0}, {y0}) outside [0,2]x[0,1]")));
    }
    if n_samples == 0 || !(t_end >= t0) || !(max_step > 0.0) {
        return Err(Error::Degenerate("need n_samples >= 1, t_end >= t0, step > 0".into()));
    }
    let mut out = Vec::with_capacity(n_samples);
    let mut state = (x0, y0);
    let mut t = t0;
    out.push((t0, x0, y0));
    let dt = if n_samples > 1 { (t_end - t0) / (n_samples - 1) as f64 } else { 0.0 };
    let substeps = (dt / max_step).ceil().max(1.0) as usize;
    let h = dt / substeps as f64;
    for s in 1..n_samples {
        for _ in 0..substeps {
            state = flow.rk4(state, t, h);
            t += h;
        }
        // resynchronize to the exact sample time to avoid drift in t
        t = t0 + s as f64 * dt;
        out.push((t, state.0, state.1));
    }
    Ok(out)
}

/// Gaussian profile `exp(−dist²/2σ²)` of the line `⟨p, (cos θ, sin θ)⟩ = s`
/// in pixel units, with the origin at the image center; row-major, `x` along
/// columns.
pub fn line_image(theta: f64, offset: f64, size: usize, sigma: f64) -> Vec<f64> {
    let (sn, cs) = theta.sin_cos();
    let c = (size as f64 - 1.0) / 2.0;
    let mut img = Vec::with_capacity(size * size);
    for r in 0..size {
        for col in 0..size {
            let (x, y) = (col as f64 - c, r as f64 - c);
            let dist = x * cs + y * sn - offset;
            img.push((-dist * dist / (2.0 * sigma * sigma)).exp());
        }
    }
    img
}

/// Parameters of the fuzzy-lines dataset.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinesConfig {
    pub count: usize,
    pub size: usize,
    pub sigma: f64,
    /// Largest absolute offset, in pixels from the image center.
    pub max_offset: f64,
}

impl Default for LinesConfig {
    fn default() -> Self {
        LinesConfig {
            count: 160,
            size: 10,
            sigma: 3.0,
            max_offset: 9.0,
        }
    }
}

/// `(θ, s)` of the lines, `θ ∈ [0, π)`.
///
/// A line `⟨p, u⟩ = s` is the point `(u, s / max_offset)` of the upper
/// hemisphere, up to the sign of `(u, s)`; the lines come from a golden-angle
/// spiral on that hemisphere, which spreads them evenly over the projective
/// plane of lines.
pub fn line_parameters(cfg: &LinesConfig) -> Vec<(f64, f64)> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..cfg.count)
        .map(|i| {
            let h = (i as f64 + 0.5) / cfg.count as f64;
            let a = (i as f64 * golden).rem_euclid(2.0 * PI);
            let s = cfg.max_offset * h;
            if a >= PI {
                (a - PI, -s)
            } else {
                (a, s)
            }
        })
        .collect()
}

/// Images of `line_parameters(cfg)`, scaled by one common factor so that the
/// brightest image has unit Frobenius norm.
///
/// Lines far from the center fade towards the zero image, which closes the
/// Möbius band of lines into a projective plane.
pub fn gen_lines(cfg: &LinesConfig) -> Result<PointCloud> {
    if cfg.count == 0 || cfg.size == 0 || !(cfg.sigma > 0.0) || !(cfg.max_offset > 0.0) {
        return Err(Error::Degenerate("empty lines dataset".into()));
    }
    let mut rows: Vec<Vec<f64>> = line_parameters(cfg)
        .into_iter()
        .map(|(theta, s)| line_image(theta, s, cfg.size, cfg.sigma))
        .collect();
    let norm = rows
        .iter()
        .map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    for r in &mut rows {
        r.iter_mut().for_each(|v| *v /= norm);
    }
    PointCloud::from_rows(&rows)
}

/// Centers and radii of the four balls whose union is projected.
pub const BALLS: [([f64; 3], f64); 4] = [
    ([0.5, 0.2, 0.1], 0.35),
    ([-0.4, 0.4, -0.2], 0.3),
    ([-0.1, -0.55, 0.3], 0.25),
    ([0.1, 0.05, -0.6], 0.2),
];

/// `n` rotations from a super-Fibonacci spiral on the unit quaternions,
/// composed with a global rotation drawn from `seed`.
pub fn super_fibonacci_rotations(n: usize, seed: u64) -> Vec<Matrix3<f64>> {
    const PHI: f64 = std::f64::consts::SQRT_2;
    const PSI: f64 = 1.533_751_168_755_204_3;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let global = crate::matgeo::random_rotation(3, &mut rng);
    let global = Matrix3::from_fn(|r, c| global[(r, c)]);
    (0..n)
        .map(|i| {
            let s = i as f64 + 0.5;
            let r = (s / n as f64).sqrt();
            let big_r = (1.0 - s / n as f64).sqrt();
            let alpha = TAU * s / PHI;
            let beta = TAU * s / PSI;
            let q = UnitQuaternion::from_quaternion(Quaternion::new(
                big_r * beta.cos(),
                r * alpha.sin(),
                r * alpha.cos(),
                big_r * beta.sin(),
            ));
            global * q.to_rotation_matrix().into_inner()
        })
        .collect()
}

/// `∫ S(v (x, y, z)) dz` on a `size × size` grid over `[−1, 1]²`, `S` the
/// indicator of [`BALLS`]. The balls are disjoint, so chords add.
pub fn project_balls(v: &Matrix3<f64>, size: usize) -> Vec<f64> {
    // S(v p) = 1 iff p lies in a ball centered at vᵗc
    let centers: Vec<(Vector3<f64>, f64)> = BALLS
        .iter()
        .map(|(c, r)| (v.transpose() * Vector3::from_column_slice(c), *r))
        .collect();
    let mut img = vec![0.0; size * size];
    for row in 0..size {
        let y = (row as f64 + 0.5) / size as f64 * 2.0 - 1.0;
        for col in 0..size {
            let x = (col as f64 + 0.5) / size as f64 * 2.0 - 1.0;
            img[row * size + col] = centers
                .iter()
                .map(|(c, r)| {
                    let h = r * r - (x - c.x).powi(2) - (y - c.y).powi(2);
                    if h > 0.0 {
                        2.0 * h.sqrt()
                    } else {
                        0.0
                    }
                })
                .sum();
        }
    }
    img
}

/// Projections of the ball union under `n` well-spread rotations.
pub fn gen_sphere_projections(n: usize, size: usize, seed: u64) -> Result<(PointCloud, Vec<Matrix3<f64>>)> {
    if size == 0 {
        return Err(Error::Degenerate("empty image grid".into()));
    }
    let rotations = super_fibonacci_rotations(n, seed);
    let rows: Vec<Vec<f64>> = rotations.par_iter().map(|v| project_balls(v, size)).collect();
    let cloud = if rows.is_empty() {
        PointCloud::new(Mat::zeros(0, size * size))?
    } else {
        PointCloud::from_rows(&rows)?
    };
    Ok((cloud, rotations))
}

/// Rotation taking the unit vector `a` to `b` along a minimizing geodesic.
pub fn geodesic_rotation(a: &Vector3<f64>, b: &Vector3<f64>) -> Option<Matrix3<f64>> {
    let axis = a.cross(b);
    let s = axis.norm();
    let c = a.dot(b);
    if s < 1e-12 {
        return (c > 0.0).then(Matrix3::identity);
    }
    let angle = s.atan2(c);
    Some(nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle).into_inner())
}

/// `Ω_ij` with `r_ij v_i = v_j diag(Ω_ij, 1)`, `r_ij` the geodesic rotation
/// taking the third column of `v_i` to that of `v_j`.
pub fn alignment_rotation(vi: &Matrix3<f64>, vj: &Matrix3<f64>) -> Result<Rotation2> {
    let (ai, aj) = (vi.column(2).into_owned(), vj.column(2).into_owned());
    let r = geodesic_rotation(&ai, &aj)
        .ok_or_else(|| Error::Degenerate("antipodal viewing directions".into()))?;
    let m = vj.transpose() * r * vi;
    let off = m[(0, 2)].abs().max(m[(1, 2)].abs()).max(m[(2, 0)].abs()).max(m[(2, 1)].abs());
    if m[(2, 2)] < 1.0 - 1e-8 || off > 1e-8 {
        return Err(Error::Inconsistent(format!(
            "aligned frame is not block diagonal (corner {}, off-block {off:e})",
            m[(2, 2)]
        )));
    }
    Rotation2::new(nalgebra::Matrix2::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]))
}

/// The `SO(2)`-cocycle of in-plane alignments over the edges of `complex`.
pub fn alignment_cocycle(rotations: &[Matrix3<f64>], complex: Arc<SimplicialComplex>) -> Result<DiscreteCocycle> {
    if rotations.len() != complex.n_vertices() {
        return Err(Error::shape(complex.n_vertices().to_string(), rotations.len().to_string()));
    }
    let values = complex
        .edges()
        .par_iter()
        .map(|e| {
            let v = e.vertices();
            alignment_rotation(&rotations[v[0]], &rotations[v[1]])
                .map(|r| r.to_dmatrix())
                .map_err(|err| Error::DegenerateEdge {
                    i: v[0],
                    j: v[1],
                    reason: err.to_string(),
                })
        })
        .collect::<Result<Vec<_>>>()?;
    DiscreteCocycle::new(complex, 2, values)
}

/// `x ∘ Ω` sampled at the pixel centers of a square image over `[−1, 1]²`,
/// with bilinear interpolation and zero outside the unit disc.
pub fn rotate_image(x: &[f64], rot: &Rotation2) -> Result<Vec<f64>> {
    let size = (x.len() as f64).sqrt().round() as usize;
    if size * size != x.len() {
        return Err(Error::shape("square image", format!("{} pixels", x.len())));
    }
    let m = rot.matrix();
    let at = |r: isize, c: isize| {
        if r < 0 || c < 0 || r >= size as isize || c >= size as isize {
            0.0
        } else {
            x[r as usize * size + c as usize]
        }
    };
    let mut out = vec![0.0; x.len()];
    for row in 0..size {
        let py = (row as f64 + 0.5) / size as f64 * 2.0 - 1.0;
        for col in 0..size {
            let px = (col as f64 + 0.5) / size as f64 * 2.0 - 1.0;
            let qx = m[(0, 0)] * px + m[(0, 1)] * py;
            let qy = m[(1, 0)] * px + m[(1, 1)] * py;
            if qx * qx + qy * qy > 1.0 {
                continue;
            }
            let fc = (qx + 1.0) / 2.0 * size as f64 - 0.5;
            let fr = (qy + 1.0) / 2.0 * size as f64 - 0.5;
            let (c0, r0) = (fc.floor(), fr.floor());
            let (tc, tr) = (fc - c0, fr - r0);
            let (c0, r0) = (c0 as isize, r0 as isize);
            out[row * size + col] = (1.0 - tr) * ((1.0 - tc) * at(r0, c0) + tc * at(r0, c0 + 1))
                + tr * ((1.0 - tc) * at(r0 + 1, c0) + tc * at(r0 + 1, c0 + 1));
        }
    }
    Ok(out)
}

/// `‖x_i − x_j ∘ Ω_ij‖`.
pub fn rotated_image_distance(xi: &[f64], xj: &[f64], rot: &Rotation2) -> Result<f64> {
    if xi.len() != xj.len() {
        return Err(Error::shape(format!("{} pixels", xi.len()), format!("{} pixels", xj.len())));
    }
    let r = rotate_image(xj, rot)?;
    Ok(xi.iter().zip(&r).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
}

/// Dissimilarity `‖x_i − Ω_ij x_j‖` with `Ω_ij` from the known viewing
/// rotations. Pairs with (numerically) antipodal viewing directions get the
/// upper bound `‖x_i‖ + ‖x_j‖`.
pub fn aligned_image_dissimilarity(images: &PointCloud, rotations: &[Matrix3<f64>]) -> Result<DissimilarityMatrix> {
    let n = images.len();
    if rotations.len() != n {
        return Err(Error::shape(n.to_string(), rotations.len().to_string()));
    }
    let imgs: Vec<Vec<f64>> = (0..n).map(|i| images.point(i)).collect();
    let norms: Vec<f64> = imgs.iter().map(|x| x.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
    let rows = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    if j <= i {
                        return Ok(0.0);
                    }
                    match alignment_rotation(&rotations[i], &rotations[j]) {
                        Ok(rot) => rotated_image_distance(&imgs[i], &imgs[j], &rot),
                        Err(Error::Degenerate(_)) => Ok(norms[i] + norms[j]),
                        Err(e) => Err(e),
                    }
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    // symmetrize by taking the computed upper triangle
    Ok(DissimilarityMatrix(Mat::from_fn(n, n, |i, j| match i.cmp(&j) {
        std::cmp::Ordering::Less => rows[i][j],
        std::cmp::Ordering::Greater => rows[j][i],
        std::cmp::Ordering::Equal => 0.0,
    })))
}

/// One row per point, comma separated, no header.
pub fn write_points_csv<W: Write>(x: &PointCloud, mut out: W) -> std::io::Result<()> {
    for row in x.points.row_iter() {
        let s: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", s.join(","))?;
    }
    Ok(())
}

pub fn read_points_csv<R: BufRead>(input: R) -> Result<PointCloud> {
    let mut rows = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::Parse {
            line: n + 1,
            msg: e.to_string(),
        })?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let row = t
            .split(',')
            .map(|f| {
                f.trim().parse::<f64>().map_err(|_| Error::Parse {
                    line: n + 1,
                    msg: format!("bad number {f:?}"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    PointCloud::from_rows(&rows)
}

/// One row per rotation, the nine entries in row-major order.
pub fn write_rotations_csv<W: Write>(rots: &[Matrix3<f64>], mut out: W) -> std::io::Result<()> {
    for r in rots {
        let s: Vec<String> = (0..3)
            .flat_map(|i| (0..3).map(move |j| (i, j)))
            .map(|(i, j)| r[(i, j)].to_string())
            .collect();
        writeln!(out, "{}", s.join(","))?;
    }
    Ok(())
}

pub fn read_rotations_csv<R: BufRead>(input: R) -> Result<Vec<Matrix3<f64>>> {
    let cloud = read_points_csv(input)?;
    if cloud.dim() != 9 && !cloud.is_empty() {
        return Err(Error::Parse {
            line: 1,
            msg: format!("expected 9 entries per row, got {}", cloud.dim()),
        });
    }
    (0..cloud.len())
        .map(|i| {
            let m = Matrix3::from_row_slice(&cloud.point(i));
            let defect = (m.transpose() * m - Matrix3::identity()).norm();
            if defect > 1e-9 || m.determinant() < 0.0 {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: "not a rotation".into(),
                });
            }
            Ok(m)
        })
        .collect()
}

/// Dense matrix CSV, one row per line.
pub fn write_matrix_csv<W: Write>(m: &Mat, out: W) -> std::io::Result<()> {
    write_points_csv(&PointCloud { points: m.clone(), labels: None }, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::{consistency_radius, witness};
    use crate::complex::vr_filtration;
    use crate::matgeo::{frame_projector, random_orthogonal, so2_from_angle};
    use rand::Rng;

    #[test]
    fn pca_recovers_a_plane() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let basis = random_orthogonal(5, &mut rng).columns(0, 2).into_owned();
        let offset: Vec<f64> = (0..5).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|_| {
                let (a, b): (f64, f64) = (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                (0..5).map(|r| a * basis[(r, 0)] + b * basis[(r, 1)] + offset[r]).collect()
            })
            .collect();
        let x = PointCloud::from_rows(&rows).unwrap();
        let plane = &basis * basis.transpose();
        for k in [3, 8, 20] {
            let pca = local_pca(&x, k, 2).unwrap();
            for f in &pca.frames {
                let err = (frame_projector(f).as_matrix() - &plane).norm();
                assert!(err < 1e-8, "k={k} err={err}");
            }
        }
        // translation invariance
        let shifted = x.translate(&[3.0, -1.0, 2.0, 0.5, 7.0]).unwrap();
        let a = local_pca(&x, 8, 2).unwrap();
        let b = local_pca(&shifted, 8, 2).unwrap();
        for (f, g) in a.frames.iter().zip(&b.frames) {
            assert!((frame_projector(f).as_matrix() - frame_projector(g).as_matrix()).norm() < 1e-8);
        }
    }

    #[test]
    fn pca_on_a_line_is_signed_deterministically() {
        let dir = [0.6, -0.8];
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![dir[0] * i as f64, dir[1] * i as f64]).collect();
        let pca = local_pca(&PointCloud::from_rows(&rows).unwrap(), 4, 1).unwrap();
        for f in &pca.frames {
            let m = f.as_matrix();
            assert!((m[(0, 0)] + 0.6).abs() < 1e-12 && (m[(1, 0)] - 0.8).abs() < 1e-12);
        }
        assert!(local_pca(&PointCloud::from_rows(&rows).unwrap(), 1, 2).is_err());
    }

    #[test]
    fn circle_witness_radius_shrinks_with_density() {
        let mut radii = Vec::new();
        for n in [40, 80, 160] {
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|i| {
                    let t = TAU * i as f64 / n as f64;
                    vec![t.cos(), t.sin()]
                })
                .collect();
            let x = PointCloud::from_rows(&rows).unwrap();
            let d = DissimilarityMatrix::euclidean(&x);
            // scale where the Rips complex of the circle is connected
            let scale = 3.0 * TAU / n as f64;
            let f = vr_filtration(d.as_matrix(), 2, scale).unwrap();
            let pca = local_pca(&x, 8, 1).unwrap();
            let phi = pca.trivialization(f.complex().clone()).unwrap();
            radii.push(consistency_radius(&witness(&phi).unwrap()));
        }
        assert!(radii[0] >= radii[1] && radii[1] >= radii[2], "{radii:?}");
    }

    #[test]
    fn delay_embedding_examples() {
        let series: Vec<f64> = (1..=10).map(f64::from).collect();
        let x = delay_embed(&series, 3, 2).unwrap();
        assert_eq!(x.point(0), vec![1.0, 3.0, 5.0]);
        assert_eq!(x.len(), 6);
        assert!(delay_embed(&series, 6, 2).is_err());
        let c = delay_embed(&[2.0; 8], 3, 1).unwrap();
        assert!((0..c.len()).all(|i| c.point(i) == vec![2.0; 3]));
        // sine with a quarter-period delay traces the unit circle
        let period = 40usize;
        let s: Vec<f64> = (0..400).map(|i| (TAU * i as f64 / period as f64).sin()).collect();
        let x = delay_embed(&s, 2, period / 4).unwrap();
        for i in 0..x.len() {
            let p = x.point(i);
            assert!(((p[0] * p[0] + p[1] * p[1]).sqrt() - 1.0).abs() < 0.02);
        }
    }

    #[test]
    fn double_gyre_velocities() {
        let g = DoubleGyre {
            amplitude: 0.1,
            eps: 0.1,
            omega: PI / 5.0,
        };
        let (u, v) = g.velocity(0.5, 0.5, 0.0);
        assert!(u.abs() < 1e-15 && v.abs() < 1e-15);
        let (u, v) = g.velocity(0.25, 0.5, 0.0);
        assert!(u.abs() < 1e-15);
        assert!((v + 0.1 * PI * (PI / 4.0).cos()).abs() < 1e-12);
        assert!((v + 0.22214).abs() < 1e-5);
    }

    #[test]
    fn double_gyre_is_reproducible_and_step_stable() {
        let g = DoubleGyre {
            amplitude: 0.1,
            eps: 0.1,
            omega: PI / 5.0,
        };
        let a = gen_double_gyre(g, (0.55, 0.5, 0.0), 101, 50.0, 1e-2).unwrap();
        let b = gen_double_gyre(g, (0.55, 0.5, 0.0), 101, 50.0, 1e-2).unwrap();
        assert_eq!(a, b);
        let c = gen_double_gyre(g, (0.55, 0.5, 0.0), 101, 50.0, 5e-3).unwrap();
        for (p, q) in a.iter().zip(&c) {
            assert!((p.1 - q.1).abs() < 1e-6 && (p.2 - q.2).abs() < 1e-6);
        }
        assert_eq!(a.len(), 101);
        assert_eq!(a.last().unwrap().0, 50.0);
        assert!(a.iter().all(|p| (0.0..=2.0).contains(&p.1) && (0.0..=1.0).contains(&p.2)));
    }

    #[test]
    fn lines_are_unoriented() {
        for &(t, s) in &[(0.3, 1.2), (1.1, -2.0), (2.9, 0.0)] {
            let a = line_image(t, s, 10, 1.5);
            let b = line_image(t + PI, -s, 10, 1.5);
            assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-12));
        }
        let a = line_image(0.0, 0.0, 10, 1.5);
        let b = line_image(PI / 2.0, 0.0, 10, 1.5);
        for r in 0..10 {
            for c in 0..10 {
                assert!((a[r * 10 + c] - b[c * 10 + r]).abs() < 1e-12);
            }
        }
        let x = gen_lines(&LinesConfig::default()).unwrap();
        assert_eq!((x.len(), x.dim()), (160, 100));
        let max = (0..x.len())
            .map(|i| x.point(i).iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        assert!((max - 1.0).abs() < 1e-12);
        assert!(line_parameters(&LinesConfig::default())
            .iter()
            .all(|&(t, s)| (0.0..PI).contains(&t) && s.abs() <= 9.0));
    }

    #[test]
    fn balls_are_disjoint_and_inside_the_unit_ball() {
        for (a, (ca, ra)) in BALLS.iter().enumerate() {
            let ca = Vector3::from_column_slice(ca);
            assert!(ca.norm() + ra < 1.0);
            for (cb, rb) in &BALLS[a + 1..] {
                assert!((ca - Vector3::from_column_slice(cb)).norm() > ra + rb);
            }
        }
    }

    #[test]
    fn in_plane_rotation_of_the_view_rotates_the_image() {
        let v = super_fibonacci_rotations(5, 3)[2];
        let r = so2_from_angle(0.1);
        let m = r.matrix();
        let rz = Matrix3::new(m[(0, 0)], m[(0, 1)], 0.0, m[(1, 0)], m[(1, 1)], 0.0, 0.0, 0.0, 1.0);
        let size = 64;
        let xi = project_balls(&(v * rz), size);
        let xj = project_balls(&v, size);
        let norm = xi.iter().map(|x| x * x).sum::<f64>().sqrt();
        let omega = alignment_rotation(&(v * rz), &v).unwrap();
        assert!((omega.matrix() - m).norm() < 1e-9);
        let d = rotated_image_distance(&xi, &xj, &omega).unwrap();
        assert!(d < 0.05 * norm, "{d} vs {norm}");
        let far = rotated_image_distance(&xi, &xj, &so2_from_angle(0.3)).unwrap();
        assert!(far > 4.0 * d);
    }

    #[test]
    fn antipodal_views_are_mirror_images() {
        // flipping the viewing axis reverses z and one in-plane axis
        let v = super_fibonacci_rotations(7, 4)[3];
        let flip = Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, -1.0));
        let size = 48;
        let a = project_balls(&v, size);
        let b = project_balls(&(v * flip), size);
        for r in 0..size {
            for c in 0..size {
                assert!((a[r * size + c] - b[(size - 1 - r) * size + c]).abs() < 1e-12);
            }
        }
        assert!(alignment_rotation(&v, &(v * flip)).is_err());
    }

    #[test]
    fn alignment_satisfies_the_block_equation() {
        let rots = super_fibonacci_rotations(30, 5);
        for i in 0..30 {
            for j in 0..30 {
                let Ok(omega) = alignment_rotation(&rots[i], &rots[j]) else {
                    continue;
                };
                let r = geodesic_rotation(&rots[i].column(2).into_owned(), &rots[j].column(2).into_owned()).unwrap();
                let m = omega.matrix();
                let block = Matrix3::new(m[(0, 0)], m[(0, 1)], 0.0, m[(1, 0)], m[(1, 1)], 0.0, 0.0, 0.0, 1.0);
                assert!((r * rots[i] - rots[j] * block).norm() < 1e-9);
                let back = alignment_rotation(&rots[j], &rots[i]).unwrap();
                assert!((back.matrix() - m.transpose()).norm() < 1e-9);
            }
            let same = alignment_rotation(&rots[i], &rots[i]).unwrap();
            assert!((same.matrix() - nalgebra::Matrix2::identity()).norm() < 1e-12);
        }
    }

    #[test]
    fn image_rotation_round_trip() {
        let v = super_fibonacci_rotations(3, 9)[1];
        let x = project_balls(&v, 64);
        assert_eq!(rotated_image_distance(&x, &x, &so2_from_angle(0.0)).unwrap(), 0.0);
        // smooth blobs at full resolution; the chord images have infinite
        // slope at ball rims
        let size = 100;
        let blobs: Vec<f64> = (0..size * size)
            .map(|k| {
                let (r, c) = (k / size, k % size);
                let x = (c as f64 + 0.5) / size as f64 * 2.0 - 1.0;
                let y = (r as f64 + 0.5) / size as f64 * 2.0 - 1.0;
                (-((x - 0.3).powi(2) + (y + 0.1).powi(2)) * 20.0).exp()
                    + 0.5 * (-((x + 0.35).powi(2) + (y - 0.3).powi(2)) * 30.0).exp()
            })
            .collect();
        let norm = blobs.iter().map(|a| a * a).sum::<f64>().sqrt();
        let r = so2_from_angle(0.17);
        let rinv = so2_from_angle(-0.17);
        let y = rotate_image(&rotate_image(&blobs, &r).unwrap(), &rinv).unwrap();
        let err = blobs.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        assert!(err < 0.01 * norm, "{err} vs {norm}");
        // a centered disc is radially symmetric
        let size = 64;
        let disc: Vec<f64> = (0..size * size)
            .map(|k| {
                let (r, c) = (k / size, k % size);
                let x = (c as f64 + 0.5) / size as f64 * 2.0 - 1.0;
                let y = (r as f64 + 0.5) / size as f64 * 2.0 - 1.0;
                (-(x * x + y * y) * 8.0).exp()
            })
            .collect();
        let dn = disc.iter().map(|a| a * a).sum::<f64>().sqrt();
        assert!(rotated_image_distance(&disc, &disc, &so2_from_angle(0.23)).unwrap() < 1e-3 * dn * 5.0);
        assert!(rotated_image_distance(&x, &x[..10], &r).is_err());
    }

    #[test]
    fn generators_are_reproducible() {
        let (a, ra) = gen_sphere_projections(20, 16, 7).unwrap();
        let (b, rb) = gen_sphere_projections(20, 16, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(ra, rb);
        let (c, _) = gen_sphere_projections(20, 16, 8).unwrap();
        assert_ne!(a, c);
        assert_eq!(random_subsample(100, 10, 1), random_subsample(100, 10, 1));
    }

    #[test]
    fn csv_round_trips() {
        let x = PointCloud::from_rows(&[vec![1.0, 0.1 + 0.2], vec![-3.5e-17, 2.0]]).unwrap();
        let mut buf = Vec::new();
        write_points_csv(&x, &mut buf).unwrap();
        assert_eq!(read_points_csv(buf.as_slice()).unwrap(), x);
        let rots = super_fibonacci_rotations(4, 1);
        let mut buf = Vec::new();
        write_rotations_csv(&rots, &mut buf).unwrap();
        assert_eq!(read_rotations_csv(buf.as_slice()).unwrap(), rots);
    }
}
