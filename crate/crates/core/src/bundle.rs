//! Discrete approximate cocycles and local trivializations over a simplicial
//! complex, and the constructions passing between them.
//!
//! A cocycle stores `Ω_ij` for each edge with `i < j`; the reverse direction
//! is the transpose. Frames `Φ_i` and transition matrices are related by
//! `Φ_i Ω_ij ≈ Φ_j`.

use std::collections::{HashSet, VecDeque};
use std::io::{BufRead, Write};
use std::sync::Arc;

use rayon::prelude::*;

use crate::complex::{Filtration, Simplex, SimplicialComplex};
use crate::error::{Error, Result};
use crate::matgeo::{check_orthogonal, frame_projector, procrustes, Frame, Mat, RANK_TOL};

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteCocycle {
    complex: Arc<SimplicialComplex>,
    rank: usize,
    values: Vec<Mat>,
}

impl DiscreteCocycle {
    /// `values[e]` is `Ω_ij` for the edge `complex.edges()[e] = (i, j)`, `i < j`.
    pub fn new(complex: Arc<SimplicialComplex>, rank: usize, values: Vec<Mat>) -> Result<Self> {
        if values.len() != complex.count(1) {
            return Err(Error::shape(
                format!("{} edge values", complex.count(1)),
                values.len().to_string(),
            ));
        }
        for v in &values {
            if v.shape() != (rank, rank) {
                return Err(Error::shape(format!("{rank}x{rank}"), format!("{}x{}", v.nrows(), v.ncols())));
            }
            check_orthogonal(v)?;
        }
        Ok(DiscreteCocycle { complex, rank, values })
    }

    /// Builds a cocycle from a function of the sorted edge `(i, j)`.
    pub fn from_fn(
        complex: Arc<SimplicialComplex>,
        rank: usize,
        mut f: impl FnMut(usize, usize) -> Mat,
    ) -> Result<Self> {
        let values = complex
            .edges()
            .iter()
            .map(|e| {
                let v = e.vertices();
                f(v[0], v[1])
            })
            .collect();
        Self::new(complex, rank, values)
    }

    pub fn identity(complex: Arc<SimplicialComplex>, rank: usize) -> Self {
        let values = vec![Mat::identity(rank, rank); complex.count(1)];
        DiscreteCocycle { complex, rank, values }
    }

    /// Builds a cocycle from `(i, j, Ω_ij)` triples in any orientation; every
    /// edge of `complex` must be given exactly once.
    pub fn from_edge_values(
        complex: Arc<SimplicialComplex>,
        rank: usize,
        entries: impl IntoIterator<Item = (usize, usize, Mat)>,
    ) -> Result<Self> {
        let mut values: Vec<Option<Mat>> = vec![None; complex.count(1)];
        for (i, j, m) in entries {
            let e = Simplex::edge(i, j)?;
            let idx = complex.index_of(&e).ok_or_else(|| Error::MissingSimplex(e.vertices()))?;
            if values[idx].is_some() {
                return Err(Error::InvalidComplex(format!("edge ({i}, {j}) given twice")));
            }
            values[idx] = Some(if i < j { m } else { m.transpose() });
        }
        let values = values
            .into_iter()
            .zip(complex.edges())
            .map(|(v, e)| v.ok_or_else(|| Error::MissingSimplex(e.vertices())))
            .collect::<Result<Vec<_>>>()?;
        Self::new(complex, rank, values)
    }

    pub fn complex(&self) -> &Arc<SimplicialComplex> {
        &self.complex
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Values indexed like `complex().edges()`.
    pub fn values(&self) -> &[Mat] {
        &self.values
    }

    /// `Ω_ij` for an ordered pair; `Ω_ii = I`.
    pub fn get(&self, i: usize, j: usize) -> Result<Mat> {
        if i == j {
            return Ok(Mat::identity(self.rank, self.rank));
        }
        let e = Simplex::edge(i, j)?;
        let idx = self.complex.index_of(&e).ok_or_else(|| Error::MissingSimplex(e.vertices()))?;
        let v = &self.values[idx];
        Ok(if i < j { v.clone() } else { v.transpose() })
    }

    /// Restriction to a subcomplex sharing vertex labels.
    pub fn restrict(&self, sub: Arc<SimplicialComplex>) -> Result<Self> {
        let values = sub
            .edges()
            .iter()
            .map(|e| {
                let v = e.vertices();
                self.get(v[0], v[1])
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DiscreteCocycle {
            complex: sub,
            rank: self.rank,
            values,
        })
    }

    /// `d_Z`: largest Frobenius distance over edges.
    pub fn distance(&self, other: &DiscreteCocycle) -> Result<f64> {
        self.check_same_base(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    fn check_same_base(&self, other: &DiscreteCocycle) -> Result<()> {
        if self.rank != other.rank {
            return Err(Error::DimensionMismatch(format!("rank {} vs {}", self.rank, other.rank)));
        }
        if !Arc::ptr_eq(&self.complex, &other.complex) && *self.complex != *other.complex {
            return Err(Error::DimensionMismatch("cocycles on different complexes".into()));
        }
        Ok(())
    }
}

/// One frame per vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteTrivialization {
    complex: Arc<SimplicialComplex>,
    ambient: usize,
    rank: usize,
    frames: Vec<Frame>,
}

impl DiscreteTrivialization {
    pub fn new(complex: Arc<SimplicialComplex>, frames: Vec<Frame>) -> Result<Self> {
        if frames.len() != complex.n_vertices() {
            return Err(Error::shape(
                format!("{} frames", complex.n_vertices()),
                frames.len().to_string(),
            ));
        }
        let (ambient, rank) = frames
            .first()
            .map(|f| (f.ambient_dim(), f.rank()))
            .unwrap_or((0, 0));
        if let Some(f) = frames.iter().find(|f| (f.ambient_dim(), f.rank()) != (ambient, rank)) {
            return Err(Error::shape(
                format!("{ambient}x{rank} frames"),
                format!("{}x{}", f.ambient_dim(), f.rank()),
            ));
        }
        Ok(DiscreteTrivialization {
            complex,
            ambient,
            rank,
            frames,
        })
    }

    pub fn complex(&self) -> &Arc<SimplicialComplex> {
        &self.complex
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn frame(&self, i: usize) -> &Frame {
        &self.frames[i]
    }

    /// Same frames over another complex on the same vertex set.
    pub fn with_complex(&self, complex: Arc<SimplicialComplex>) -> Result<Self> {
        Self::new(complex, self.frames.clone())
    }
}

/// An orthogonal matrix per vertex, acting on cocycles by conjugation.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroCochainO {
    rank: usize,
    values: Vec<Mat>,
}

impl ZeroCochainO {
    pub fn new(rank: usize, values: Vec<Mat>) -> Result<Self> {
        for v in &values {
            if v.shape() != (rank, rank) {
                return Err(Error::shape(format!("{rank}x{rank}"), format!("{}x{}", v.nrows(), v.ncols())));
            }
            check_orthogonal(v)?;
        }
        Ok(ZeroCochainO { rank, values })
    }

    pub fn identity(rank: usize, n_vertices: usize) -> Self {
        ZeroCochainO {
            rank,
            values: vec![Mat::identity(rank, rank); n_vertices],
        }
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn values(&self) -> &[Mat] {
        &self.values
    }

    pub fn inverse(&self) -> Self {
        ZeroCochainO {
            rank: self.rank,
            values: self.values.iter().map(Mat::transpose).collect(),
        }
    }
}

/// `‖Ω_ij Ω_jk − Ω_ik‖` for the triangle with vertices `i, j, k` in the
/// given order.
pub fn triangle_defect(omega: &DiscreteCocycle, i: usize, j: usize, k: usize) -> Result<f64> {
    let t = Simplex::triangle(i, j, k)?;
    if !omega.complex.contains(&t) {
        return Err(Error::MissingSimplex(t.vertices()));
    }
    Ok((omega.get(i, j)? * omega.get(j, k)? - omega.get(i, k)?).norm())
}

/// Defects of all triangles, indexed like `complex().triangles()`.
pub fn triangle_defects(omega: &DiscreteCocycle) -> Vec<f64> {
    omega
        .complex
        .triangles()
        .par_iter()
        .map(|t| {
            let v = t.vertices();
            triangle_defect(omega, v[0], v[1], v[2]).expect("triangle of the complex")
        })
        .collect()
}

/// Largest triangle defect; `0` without triangles.
pub fn consistency_radius(omega: &DiscreteCocycle) -> f64 {
    triangle_defects(omega).into_iter().fold(0.0, f64::max)
}

/// Slack on defect comparisons. Transitions of opposite determinant sit at
/// distance exactly 2 in `O(2)`, so rounding would otherwise decide whether
/// such a triangle violates `eps = 2`.
pub const DEFECT_TOL: f64 = 1e-9;

/// Whether a triangle defect counts as `>= eps`.
pub fn violates(defect: f64, eps: f64) -> bool {
    defect >= eps - DEFECT_TOL
}

/// Largest `r` such that all triangles of `K_r` have defect below `eps`:
/// the earliest birth of a triangle with defect `>= eps`, or the filtration
/// threshold if there is none.
pub fn epsilon_death(omega: &DiscreteCocycle, filtration: &Filtration, eps: f64) -> Result<f64> {
    if !Arc::ptr_eq(&omega.complex, filtration.complex()) && *omega.complex != **filtration.complex() {
        return Err(Error::DimensionMismatch("cocycle and filtration on different complexes".into()));
    }
    let births = filtration.births(2);
    let death = triangle_defects(omega)
        .into_iter()
        .zip(births)
        .filter(|(d, _)| violates(*d, eps))
        .map(|(_, &b)| b)
        .fold(f64::INFINITY, f64::min);
    Ok(death.min(filtration.threshold()))
}

/// Best transition matrices between vertex frames: `Ω_ij` minimizes
/// `‖Φ_i Ω − Φ_j‖`.
pub fn witness(phi: &DiscreteTrivialization) -> Result<DiscreteCocycle> {
    let values = phi
        .complex
        .edges()
        .par_iter()
        .map(|e| {
            let v = e.vertices();
            let (i, j) = (v[0], v[1]);
            procrustes(phi.frame(i), phi.frame(j)).map_err(|err| match err {
                Error::RankDeficient { smallest } => Error::DegenerateEdge {
                    i,
                    j,
                    reason: format!("ΦᵢᵗΦⱼ has singular value {smallest:e} <= {RANK_TOL:e}"),
                },
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DiscreteCocycle {
        complex: phi.complex.clone(),
        rank: phi.rank,
        values,
    })
}

/// `(Θ·Ω)_ij = Θ_i Ω_ij Θ_jᵗ`.
pub fn act(theta: &ZeroCochainO, omega: &DiscreteCocycle) -> Result<DiscreteCocycle> {
    if theta.rank != omega.rank {
        return Err(Error::DimensionMismatch(format!("rank {} vs {}", theta.rank, omega.rank)));
    }
    if theta.values.len() != omega.complex.n_vertices() {
        return Err(Error::shape(
            format!("{} vertex values", omega.complex.n_vertices()),
            theta.values.len().to_string(),
        ));
    }
    let values = omega
        .complex
        .edges()
        .iter()
        .zip(&omega.values)
        .map(|(e, m)| {
            let v = e.vertices();
            &theta.values[v[0]] * m * theta.values[v[1]].transpose()
        })
        .collect();
    Ok(DiscreteCocycle {
        complex: omega.complex.clone(),
        rank: omega.rank,
        values,
    })
}

fn check_weights(weights: &[f64]) -> Result<()> {
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidWeights("weights must be finite and nonnegative".into()));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidWeights(format!("weights sum to {sum}")));
    }
    Ok(())
}

/// Frame over the point with barycentric coordinates `weights` (one per
/// vertex of the complex), seen from the chart of vertex `i`: block `j`
/// holds `√w_j Ω_ijᵗ`.
pub fn triv_at(omega: &DiscreteCocycle, weights: &[f64], i: usize) -> Result<Frame> {
    let n = omega.complex.n_vertices();
    if weights.len() != n {
        return Err(Error::InvalidWeights(format!("{} weights for {n} vertices", weights.len())));
    }
    check_weights(weights)?;
    let support: Vec<usize> = (0..n).filter(|&j| weights[j] > 0.0).collect();
    let mut carrier = support.clone();
    if !carrier.contains(&i) {
        carrier.push(i);
        carrier.sort_unstable();
    }
    if carrier.len() > 4 {
        return Err(Error::InvalidWeights("support spans more than a 3-simplex".into()));
    }
    let s = Simplex::new(&carrier)?;
    if !omega.complex.contains(&s) {
        return Err(Error::InvalidWeights(format!("support {carrier:?} is not a simplex containing {i}")));
    }
    let d = omega.rank;
    let mut m = Mat::zeros(n * d, d);
    for &j in &support {
        let block = omega.get(i, j)?.transpose() * weights[j].sqrt();
        m.view_mut((j * d, 0), (d, d)).copy_from(&block);
    }
    Frame::new(m)
}

/// `Σ w_i Φ_i Φ_iᵗ`.
pub fn average_classifying(frames: &[Frame], weights: &[f64]) -> Result<Mat> {
    if frames.is_empty() || frames.len() != weights.len() {
        return Err(Error::InvalidWeights(format!(
            "{} weights for {} frames",
            weights.len(),
            frames.len()
        )));
    }
    check_weights(weights)?;
    let n = frames[0].ambient_dim();
    let mut out = Mat::zeros(n, n);
    for (f, &w) in frames.iter().zip(weights) {
        if f.ambient_dim() != n {
            return Err(Error::shape(format!("ambient {n}"), f.ambient_dim().to_string()));
        }
        out += frame_projector(f).into_matrix() * w;
    }
    Ok(out)
}

/// Pullback `ν(Ω)_jk = Ω_ν(j)ν(k)` along a simplicial vertex map `L → K`.
pub fn refine(omega: &DiscreteCocycle, target: Arc<SimplicialComplex>, nu: &[usize]) -> Result<DiscreteCocycle> {
    if nu.len() != target.n_vertices() {
        return Err(Error::NotSimplicial(format!(
            "vertex map has {} entries for {} vertices",
            nu.len(),
            target.n_vertices()
        )));
    }
    for k in 0..=target.dim() {
        for s in target.simplices(k) {
            let mut image: Vec<usize> = s.vertices().iter().map(|&v| nu[v]).collect();
            image.sort_unstable();
            image.dedup();
            let ok = Simplex::new(&image).map(|t| omega.complex.contains(&t)).unwrap_or(false);
            if !ok {
                return Err(Error::NotSimplicial(format!("{s:?} maps to {image:?}")));
            }
        }
    }
    let values = target
        .edges()
        .iter()
        .map(|e| {
            let v = e.vertices();
            omega.get(nu[v[0]], nu[v[1]])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DiscreteCocycle {
        complex: target,
        rank: omega.rank,
        values,
    })
}

/// Conjugates `Ω` into an `SO(d)`-valued cocycle when its determinant
/// cocycle is a coboundary.
///
/// Solves `θ_j − θ_i = [det Ω_ij = −1]` over `Z/2` by a spanning forest and
/// flips the last basis vector at vertices with `θ_i = 1`.
pub fn orient(omega: &DiscreteCocycle) -> Result<DiscreteCocycle> {
    let n = omega.complex.n_vertices();
    let mut adj: Vec<Vec<(usize, u8)>> = vec![Vec::new(); n];
    for (e, m) in omega.complex.edges().iter().zip(&omega.values) {
        let v = e.vertices();
        let s = u8::from(m.determinant() < 0.0);
        adj[v[0]].push((v[1], s));
        adj[v[1]].push((v[0], s));
    }
    let mut theta: Vec<Option<u8>> = vec![None; n];
    for root in 0..n {
        if theta[root].is_some() {
            continue;
        }
        theta[root] = Some(0);
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            let tu = theta[u].unwrap();
            for &(w, s) in &adj[u] {
                let expected = tu ^ s;
                match theta[w] {
                    None => {
                        theta[w] = Some(expected);
                        queue.push_back(w);
                    }
                    Some(tw) if tw != expected => return Err(Error::Obstruction),
                    Some(_) => {}
                }
            }
        }
    }
    let d = omega.rank;
    let mut flip = Mat::identity(d, d);
    if d > 0 {
        flip[(d - 1, d - 1)] = -1.0;
    }
    let pi = ZeroCochainO {
        rank: d,
        values: theta
            .into_iter()
            .map(|t| if t == Some(1) { flip.clone() } else { Mat::identity(d, d) })
            .collect(),
    };
    act(&pi, omega)
}

fn write_row<W: Write>(out: &mut W, prefix: &str, m: &Mat) -> std::io::Result<()> {
    write!(out, "{prefix}")?;
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            write!(out, " {}", m[(r, c)])?;
        }
    }
    writeln!(out)
}

/// Header `d n_vertices`, then one line `i j` followed by the row-major
/// entries of `Ω_ij` per edge.
pub fn write_cocycle<W: Write>(omega: &DiscreteCocycle, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{} {}", omega.rank, omega.complex.n_vertices())?;
    for (e, m) in omega.complex.edges().iter().zip(&omega.values) {
        let v = e.vertices();
        write_row(&mut out, &format!("{} {}", v[0], v[1]), m)?;
    }
    Ok(())
}

/// Raw contents of a cocycle file.
#[derive(Debug, Clone, PartialEq)]
pub struct CocycleFile {
    pub rank: usize,
    pub n_vertices: usize,
    pub entries: Vec<(usize, usize, Mat)>,
}

impl CocycleFile {
    /// Cocycle over `complex`, which must have exactly the file's edges.
    pub fn into_cocycle(self, complex: Arc<SimplicialComplex>) -> Result<DiscreteCocycle> {
        if complex.n_vertices() != self.n_vertices {
            return Err(Error::DimensionMismatch(format!(
                "cocycle on {} vertices, complex has {}",
                self.n_vertices,
                complex.n_vertices()
            )));
        }
        DiscreteCocycle::from_edge_values(complex, self.rank, self.entries)
    }

    /// Cocycle over the graph of its edges.
    pub fn into_graph_cocycle(self) -> Result<DiscreteCocycle> {
        let edges = self
            .entries
            .iter()
            .map(|(i, j, _)| Simplex::edge(*i, *j))
            .collect::<Result<Vec<_>>>()?;
        let complex = Arc::new(SimplicialComplex::from_maximal(self.n_vertices, edges)?);
        DiscreteCocycle::from_edge_values(complex, self.rank, self.entries)
    }
}

fn parse_numbers<T: std::str::FromStr>(line: &str, lineno: usize) -> Result<Vec<T>> {
    line.split_whitespace()
        .map(|t| {
            t.parse::<T>().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("bad number {t:?}"),
            })
        })
        .collect()
}

fn content_lines<R: BufRead>(input: R) -> impl Iterator<Item = Result<(usize, String)>> {
    input.lines().enumerate().filter_map(|(n, l)| match l {
        Err(e) => Some(Err(Error::Parse {
            line: n + 1,
            msg: e.to_string(),
        })),
        Ok(l) => {
            let t = l.trim();
            (!t.is_empty() && !t.starts_with('#')).then(|| Ok((n + 1, t.to_string())))
        }
    })
}

pub fn read_cocycle<R: BufRead>(input: R) -> Result<CocycleFile> {
    let mut lines = content_lines(input);
    let (n, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "empty cocycle file".into(),
    })??;
    let h: Vec<usize> = parse_numbers(&header, n)?;
    let [rank, n_vertices] = h[..] else {
        return Err(Error::Parse {
            line: n,
            msg: "expected `d n_vertices`".into(),
        });
    };
    let mut entries = Vec::new();
    let mut seen = HashSet::new();
    for l in lines {
        let (n, l) = l?;
        let tokens: Vec<&str> = l.split_whitespace().collect();
        if tokens.len() != 2 + rank * rank {
            return Err(Error::Parse {
                line: n,
                msg: format!("expected {} fields", 2 + rank * rank),
            });
        }
        let ij: Vec<usize> = parse_numbers(&tokens[..2].join(" "), n)?;
        let vals: Vec<f64> = parse_numbers(&tokens[2..].join(" "), n)?;
        if ij[0] >= n_vertices || ij[1] >= n_vertices || !seen.insert((ij[0].min(ij[1]), ij[0].max(ij[1]))) {
            return Err(Error::Parse {
                line: n,
                msg: "edge out of range or repeated".into(),
            });
        }
        entries.push((ij[0], ij[1], Mat::from_row_slice(rank, rank, &vals)));
    }
    Ok(CocycleFile {
        rank,
        n_vertices,
        entries,
    })
}

/// Header `D d`, then one line per vertex with the row-major frame entries.
pub fn write_trivialization<W: Write>(phi: &DiscreteTrivialization, mut out: W) -> std::io::Result<()> {
    writeln!(out, "{} {}", phi.ambient, phi.rank)?;
    for f in &phi.frames {
        let m = f.as_matrix();
        let mut first = true;
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                if !first {
                    write!(out, " ")?;
                }
                write!(out, "{}", m[(r, c)])?;
                first = false;
            }
        }
        writeln!(out)?;
    }
    Ok(())
}

/// Frames from a trivialization file, in vertex order.
pub fn read_frames<R: BufRead>(input: R) -> Result<Vec<Frame>> {
    let mut lines = content_lines(input);
    let (n, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "empty trivialization file".into(),
    })??;
    let h: Vec<usize> = parse_numbers(&header, n)?;
    let [ambient, rank] = h[..] else {
        return Err(Error::Parse {
            line: n,
            msg: "expected `D d`".into(),
        });
    };
    let mut frames = Vec::new();
    for l in lines {
        let (n, l) = l?;
        let vals: Vec<f64> = parse_numbers(&l, n)?;
        if vals.len() != ambient * rank {
            return Err(Error::Parse {
                line: n,
                msg: format!("expected {} entries", ambient * rank),
            });
        }
        frames.push(Frame::new(Mat::from_row_slice(ambient, rank, &vals)).map_err(|e| Error::Parse {
            line: n,
            msg: e.to_string(),
        })?);
    }
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matgeo::{grassmann_project, polar_orthogonal_factor, random_frame, random_orthogonal, random_small_rotation};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn triangle_complex() -> Arc<SimplicialComplex> {
        Arc::new(SimplicialComplex::from_maximal(3, [Simplex::triangle(0, 1, 2).unwrap()]).unwrap())
    }

    fn random_cocycle(k: Arc<SimplicialComplex>, d: usize, rng: &mut ChaCha8Rng) -> DiscreteCocycle {
        DiscreteCocycle::from_fn(k, d, |_, _| random_orthogonal(d, rng)).unwrap()
    }

    #[test]
    fn defect_of_flipped_triangle() {
        let k = triangle_complex();
        let minus = -Mat::identity(2, 2);
        let omega = DiscreteCocycle::from_fn(k, 2, |i, j| if (i, j) == (0, 2) { minus.clone() } else { Mat::identity(2, 2) })
            .unwrap();
        assert!((triangle_defect(&omega, 0, 1, 2).unwrap() - 8f64.sqrt()).abs() < 1e-12);
        assert!((consistency_radius(&omega) - 8f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn defect_is_independent_of_vertex_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for d in 1..=4 {
            let omega = random_cocycle(triangle_complex(), d, &mut rng);
            let perms = [(0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)];
            let vals: Vec<f64> = perms
                .iter()
                .map(|&(a, b, c)| triangle_defect(&omega, a, b, c).unwrap())
                .collect();
            let spread = vals.iter().cloned().fold(f64::MIN, f64::max) - vals.iter().cloned().fold(f64::MAX, f64::min);
            assert!(spread < 1e-9, "d={d} spread {spread}");
        }
    }

    #[test]
    fn no_triangles_means_zero_radius() {
        let k = Arc::new(SimplicialComplex::from_maximal(2, [Simplex::edge(0, 1).unwrap()]).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert_eq!(consistency_radius(&random_cocycle(k, 3, &mut rng)), 0.0);
    }

    #[test]
    fn action_is_isometric_and_invertible() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let k = Arc::new(
            SimplicialComplex::from_maximal(
                4,
                [Simplex::triangle(0, 1, 2).unwrap(), Simplex::triangle(1, 2, 3).unwrap()],
            )
            .unwrap(),
        );
        for d in 1..=3 {
            let omega = random_cocycle(k.clone(), d, &mut rng);
            let lam = random_cocycle(k.clone(), d, &mut rng);
            let theta = ZeroCochainO::new(d, (0..4).map(|_| random_orthogonal(d, &mut rng)).collect()).unwrap();
            let a = act(&theta, &omega).unwrap();
            let back = act(&theta.inverse(), &a).unwrap();
            assert!(back.distance(&omega).unwrap() < 1e-12);
            assert!((consistency_radius(&a) - consistency_radius(&omega)).abs() < 1e-12);
            let dz = omega.distance(&lam).unwrap();
            let dz2 = a.distance(&act(&theta, &lam).unwrap()).unwrap();
            assert!((dz - dz2).abs() < 1e-12);
            let id = act(&ZeroCochainO::identity(d, 4), &omega).unwrap();
            assert_eq!(id, omega);
        }
    }

    #[test]
    fn witness_of_rotated_frames() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let k = triangle_complex();
        let f0 = random_frame(6, 3, &mut rng);
        let o1 = random_orthogonal(3, &mut rng);
        let f1 = Frame::new(f0.as_matrix() * &o1).unwrap();
        let phi = DiscreteTrivialization::new(k, vec![f0.clone(), f1, f0]).unwrap();
        let w = witness(&phi).unwrap();
        assert!((w.get(0, 1).unwrap() - &o1).norm() < 1e-9);
        assert!((w.get(0, 2).unwrap() - Mat::identity(3, 3)).norm() < 1e-9);
        assert!(consistency_radius(&w) < 1e-9);
    }

    #[test]
    fn witness_reports_degenerate_edge() {
        let k = Arc::new(SimplicialComplex::from_maximal(2, [Simplex::edge(0, 1).unwrap()]).unwrap());
        let a = Frame::new(Mat::from_column_slice(2, 1, &[1.0, 0.0])).unwrap();
        let b = Frame::new(Mat::from_column_slice(2, 1, &[0.0, 1.0])).unwrap();
        let phi = DiscreteTrivialization::new(k, vec![a, b]).unwrap();
        assert!(matches!(witness(&phi), Err(Error::DegenerateEdge { i: 0, j: 1, .. })));
    }

    #[test]
    fn epsilon_death_first_violation() {
        let k = triangle_complex();
        // defect exactly 0.5 on the single triangle
        let r = crate::matgeo::so2_from_angle(((1.0f64 - 0.5f64.powi(2) / 4.0).acos()) / std::f64::consts::TAU).to_dmatrix();
        let omega = DiscreteCocycle::from_fn(k.clone(), 2, |i, j| if (i, j) == (0, 2) { r.clone() } else { Mat::identity(2, 2) })
            .unwrap();
        assert!((consistency_radius(&omega) - 0.5).abs() < 1e-9);
        let births = vec![vec![0.0; 3], vec![1.0; 3], vec![2.0]];
        let f = Filtration::with_threshold(k, births, 3.0).unwrap();
        assert_eq!(epsilon_death(&omega, &f, 0.3).unwrap(), 2.0);
        assert_eq!(epsilon_death(&omega, &f, 0.6).unwrap(), 3.0);
    }

    #[test]
    fn triv_at_vertex_and_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let k = triangle_complex();
        let omega = random_cocycle(k.clone(), 2, &mut rng);
        let f = triv_at(&omega, &[0.0, 1.0, 0.0], 1).unwrap();
        let m = f.as_matrix();
        assert!((m.view((2, 0), (2, 2)) - Mat::identity(2, 2)).norm() < 1e-12);
        assert!(m.view((0, 0), (2, 2)).norm() < 1e-12 && m.view((4, 0), (2, 2)).norm() < 1e-12);

        let frames: Vec<Mat> = (0..3).map(|_| random_orthogonal(2, &mut rng)).collect();
        let exact = DiscreteCocycle::from_fn(k, 2, |i, j| frames[i].transpose() * &frames[j]).unwrap();
        let w = [0.2, 0.5, 0.3];
        for (i, j) in [(0, 1), (1, 2), (0, 2)] {
            let a = triv_at(&exact, &w, i).unwrap().into_matrix() * exact.get(i, j).unwrap();
            let b = triv_at(&exact, &w, j).unwrap().into_matrix();
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn triv_at_rejects_bad_weights() {
        let omega = DiscreteCocycle::identity(triangle_complex(), 2);
        assert!(triv_at(&omega, &[0.5, 0.6, 0.0], 0).is_err());
        assert!(triv_at(&omega, &[-0.5, 1.5, 0.0], 0).is_err());
        let path = Arc::new(
            SimplicialComplex::from_maximal(3, [Simplex::edge(0, 1).unwrap(), Simplex::edge(1, 2).unwrap()]).unwrap(),
        );
        let omega = DiscreteCocycle::identity(path, 1);
        assert!(triv_at(&omega, &[0.5, 0.0, 0.5], 0).is_err());
    }

    #[test]
    fn averaged_projector_is_near_grassmannian() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..50 {
            let f1 = random_frame(5, 2, &mut rng);
            let noise = Mat::from_fn(5, 2, |_, _| rng.gen_range(-0.2..0.2));
            let f2 = polar_orthogonal_factor(&(f1.as_matrix() + noise)).unwrap();
            let w: f64 = rng.gen_range(0.0..1.0);
            let avg = average_classifying(&[f1.clone(), f2.clone()], &[w, 1.0 - w]).unwrap();
            let proj = grassmann_project(&avg, 2).unwrap();
            let o = procrustes(&f1, &f2).unwrap();
            let bound = 2f64.sqrt() * (f1.as_matrix() * o - f2.as_matrix()).norm();
            assert!((avg - proj.as_matrix()).norm() <= bound + 1e-12);
        }
    }

    #[test]
    fn refine_identity_and_collapse() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let k = triangle_complex();
        let omega = random_cocycle(k.clone(), 2, &mut rng);
        assert_eq!(refine(&omega, k.clone(), &[0, 1, 2]).unwrap(), omega);
        // subdivide the edge 01 with a new vertex 3 mapped to 1
        let l = Arc::new(
            SimplicialComplex::from_maximal(
                4,
                [Simplex::triangle(0, 2, 3).unwrap(), Simplex::triangle(1, 2, 3).unwrap()],
            )
            .unwrap(),
        );
        let pulled = refine(&omega, l, &[0, 1, 2, 1]).unwrap();
        assert!((pulled.get(1, 3).unwrap() - Mat::identity(2, 2)).norm() < 1e-15);
        assert!(consistency_radius(&pulled) <= consistency_radius(&omega) + 1e-12);
        let bad = Arc::new(SimplicialComplex::from_maximal(4, [Simplex::edge(0, 3).unwrap()]).unwrap());
        assert!(matches!(refine(&omega, bad, &[0, 1, 2, 5]), Err(Error::NotSimplicial(_))));
    }

    #[test]
    fn orient_removes_reflections() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        // two triangles glued along an edge, plus a hanging loop closed by an edge
        let k = Arc::new(
            SimplicialComplex::from_maximal(
                5,
                [
                    Simplex::triangle(0, 1, 2).unwrap(),
                    Simplex::triangle(1, 2, 3).unwrap(),
                    Simplex::edge(3, 4).unwrap(),
                    Simplex::edge(0, 4).unwrap(),
                ],
            )
            .unwrap(),
        );
        for d in 2..=3 {
            let frames: Vec<Mat> = (0..5).map(|_| random_orthogonal(d, &mut rng)).collect();
            let omega = DiscreteCocycle::from_fn(k.clone(), d, |i, j| {
                frames[i].transpose() * &frames[j] * random_small_rotation(d, 0.05, &mut rng)
            })
            .unwrap();
            let o = orient(&omega).unwrap();
            assert!(o.values().iter().all(|m| m.determinant() > 0.0));
            let before = triangle_defects(&omega);
            let after = triangle_defects(&o);
            for (a, b) in before.iter().zip(&after) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        // a Möbius-type loop cannot be oriented
        let cycle = Arc::new(
            SimplicialComplex::from_maximal(
                3,
                [Simplex::edge(0, 1).unwrap(), Simplex::edge(1, 2).unwrap(), Simplex::edge(0, 2).unwrap()],
            )
            .unwrap(),
        );
        let m = DiscreteCocycle::from_fn(cycle, 1, |i, j| Mat::from_element(1, 1, if (i, j) == (0, 2) { -1.0 } else { 1.0 }))
            .unwrap();
        assert_eq!(orient(&m), Err(Error::Obstruction));
    }

    #[test]
    fn cocycle_and_frames_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let k = triangle_complex();
        let omega = random_cocycle(k.clone(), 3, &mut rng);
        let mut buf = Vec::new();
        write_cocycle(&omega, &mut buf).unwrap();
        let back = read_cocycle(buf.as_slice()).unwrap().into_cocycle(k.clone()).unwrap();
        assert_eq!(back, omega);
        let mut buf2 = Vec::new();
        write_cocycle(&back, &mut buf2).unwrap();
        assert_eq!(buf, buf2);

        let phi = DiscreteTrivialization::new(k.clone(), (0..3).map(|_| random_frame(5, 2, &mut rng)).collect()).unwrap();
        let mut buf = Vec::new();
        write_trivialization(&phi, &mut buf).unwrap();
        let frames = read_frames(buf.as_slice()).unwrap();
        assert_eq!(DiscreteTrivialization::new(k, frames).unwrap(), phi);
    }

    /// Over a single triangle the exact cocycles are `(A, B, AB)`; a local
    /// random search for one close to `Ω` never gets within `r(Ω)/3`.
    #[test]
    fn exact_cocycles_stay_a_third_of_the_radius_away() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for d in [2usize, 3] {
            for _ in 0..5 {
                let omega = random_cocycle(triangle_complex(), d, &mut rng);
                let rho = consistency_radius(&omega);
                let (o01, o12, o02) = (
                    omega.get(0, 1).unwrap(),
                    omega.get(1, 2).unwrap(),
                    omega.get(0, 2).unwrap(),
                );
                let cost = |a: &Mat, b: &Mat| {
                    let c = a * b;
                    (a - &o01).norm().max((b - &o12).norm()).max((c - &o02).norm())
                };
                let (mut a, mut b) = (o01.clone(), o12.clone());
                let mut best = cost(&a, &b);
                let mut step = 0.5;
                for it in 0..4000 {
                    let na = &a * random_small_rotation(d, step, &mut rng);
                    let nb = &b * random_small_rotation(d, step, &mut rng);
                    let c = cost(&na, &nb);
                    if c < best {
                        (a, b, best) = (na, nb, c);
                    }
                    if it % 500 == 499 {
                        step *= 0.5;
                    }
                }
                assert!(best >= rho / 3.0 - 1e-12, "best {best} rho {rho}");
            }
        }
    }
}
