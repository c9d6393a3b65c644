//! Finite simplicial complexes of dimension at most 3, filtrations on them,
//! Vietoris–Rips construction and cochains with coboundary operators.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matgeo::Mat;

/// Highest simplex dimension that can be stored.
pub const MAX_DIM: usize = 3;

/// A simplex given by its sorted vertex list (at most four vertices).
///
/// Unused slots are padded with `u32::MAX`, so the derived ordering is by
/// dimension first and lexicographic within a dimension.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Simplex {
    len: u8,
    verts: [u32; 4],
}

impl Simplex {
    /// Builds a simplex from vertices in any order; rejects repeats.
    pub fn new(vertices: &[usize]) -> Result<Self> {
        if vertices.is_empty() || vertices.len() > MAX_DIM + 1 {
            return Err(Error::InvalidComplex(format!(
                "simplex with {} vertices",
                vertices.len()
            )));
        }
        let mut verts = [u32::MAX; 4];
        for (slot, &v) in verts.iter_mut().zip(vertices) {
            *slot = u32::try_from(v)
                .ok()
                .filter(|&v| v != u32::MAX)
                .ok_or_else(|| Error::InvalidComplex(format!("vertex {v} out of range")))?;
        }
        let n = vertices.len();
        verts[..n].sort_unstable();
        if verts[..n].windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidComplex(format!(
                "repeated vertex in {vertices:?}"
            )));
        }
        Ok(Simplex { len: n as u8, verts })
    }

    pub fn vertex(v: usize) -> Self {
        Simplex::new(&[v]).expect("valid vertex")
    }

    /// Edge `{i, j}`, in either order.
    pub fn edge(i: usize, j: usize) -> Result<Self> {
        Simplex::new(&[i, j])
    }

    pub fn triangle(i: usize, j: usize, k: usize) -> Result<Self> {
        Simplex::new(&[i, j, k])
    }

    #[inline]
    pub(crate) fn from_sorted_u32(vs: &[u32]) -> Self {
        let mut verts = [u32::MAX; 4];
        verts[..vs.len()].copy_from_slice(vs);
        Simplex {
            len: vs.len() as u8,
            verts,
        }
    }

    pub fn dim(&self) -> usize {
        self.len as usize - 1
    }

    pub fn vertices_u32(&self) -> &[u32] {
        &self.verts[..self.len as usize]
    }

    pub fn vertices(&self) -> Vec<usize> {
        self.vertices_u32().iter().map(|&v| v as usize).collect()
    }

    pub fn contains_vertex(&self, v: usize) -> bool {
        self.vertices_u32().iter().any(|&u| u as usize == v)
    }

    /// Codimension-one faces paired with the index of the removed vertex;
    /// the coboundary sign of the pair is `(−1)^index`.
    pub fn facets(&self) -> impl Iterator<Item = (usize, Simplex)> + '_ {
        let n = self.len as usize;
        let count = if n > 1 { n } else { 0 };
        (0..count).map(move |skip| {
            let mut buf = [0u32; 3];
            let mut m = 0;
            for (i, &v) in self.vertices_u32().iter().enumerate() {
                if i != skip {
                    buf[m] = v;
                    m += 1;
                }
            }
            (skip, Simplex::from_sorted_u32(&buf[..m]))
        })
    }

    /// All nonempty faces, including the simplex itself.
    pub fn faces(&self) -> Vec<Simplex> {
        let vs = self.vertices_u32();
        let n = vs.len();
        (1u32..(1 << n))
            .map(|mask| {
                let sub: Vec<u32> = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| vs[i]).collect();
                Simplex::from_sorted_u32(&sub)
            })
            .collect()
    }
}

impl fmt::Debug for Simplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.vertices_u32())
    }
}

/// A finite simplicial complex on vertices `0..n`, closed under faces.
#[derive(Debug, Clone)]
pub struct SimplicialComplex {
    n_vertices: usize,
    simplices: Vec<Vec<Simplex>>,
    index: Vec<HashMap<Simplex, usize>>,
}

impl PartialEq for SimplicialComplex {
    fn eq(&self, other: &Self) -> bool {
        self.n_vertices == other.n_vertices && self.simplices == other.simplices
    }
}

impl SimplicialComplex {
    /// Builds a complex from an explicit simplex list; every vertex
    /// `0..n_vertices` is included automatically, all other faces must be
    /// present. Duplicates are rejected.
    pub fn new(n_vertices: usize, simplices: impl IntoIterator<Item = Simplex>) -> Result<Self> {
        let mut by_dim: Vec<Vec<Simplex>> = vec![Vec::new(); MAX_DIM + 1];
        by_dim[0] = (0..n_vertices).map(Simplex::vertex).collect();
        for s in simplices {
            if s.vertices_u32().iter().any(|&v| v as usize >= n_vertices) {
                return Err(Error::InvalidComplex(format!(
                    "simplex {s:?} uses a vertex outside 0..{n_vertices}"
                )));
            }
            if s.dim() > 0 {
                by_dim[s.dim()].push(s);
            }
        }
        for (k, list) in by_dim.iter_mut().enumerate().skip(1) {
            list.sort_unstable();
            let before = list.len();
            list.dedup();
            if list.len() != before {
                return Err(Error::InvalidComplex(format!("duplicate {k}-simplices")));
            }
        }
        let complex = Self::from_sorted_lists(n_vertices, by_dim);
        complex.check_closed()?;
        Ok(complex)
    }

    /// Builds the smallest complex containing the given simplices.
    pub fn from_maximal(n_vertices: usize, simplices: impl IntoIterator<Item = Simplex>) -> Result<Self> {
        let mut all = Vec::new();
        for s in simplices {
            all.extend(s.faces());
        }
        all.sort_unstable();
        all.dedup();
        Self::new(n_vertices, all)
    }

    fn from_sorted_lists(n_vertices: usize, mut simplices: Vec<Vec<Simplex>>) -> Self {
        while simplices.len() > 1 && simplices.last().is_some_and(Vec::is_empty) {
            simplices.pop();
        }
        let index = simplices
            .iter()
            .map(|list| list.iter().enumerate().map(|(i, s)| (*s, i)).collect())
            .collect();
        SimplicialComplex {
            n_vertices,
            simplices,
            index,
        }
    }

    fn check_closed(&self) -> Result<()> {
        for k in 1..self.simplices.len() {
            for s in &self.simplices[k] {
                for (_, face) in s.facets() {
                    if !self.index[k - 1].contains_key(&face) {
                        return Err(Error::InvalidComplex(format!(
                            "face {face:?} of {s:?} is missing"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    /// Top dimension with at least one simplex (0 for a bare vertex set).
    pub fn dim(&self) -> usize {
        self.simplices.len() - 1
    }

    pub fn simplices(&self, k: usize) -> &[Simplex] {
        self.simplices.get(k).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn count(&self, k: usize) -> usize {
        self.simplices(k).len()
    }

    pub fn total_count(&self) -> usize {
        self.simplices.iter().map(Vec::len).sum()
    }

    pub fn index_of(&self, s: &Simplex) -> Option<usize> {
        self.index.get(s.dim())?.get(s).copied()
    }

    pub fn contains(&self, s: &Simplex) -> bool {
        self.index_of(s).is_some()
    }

    pub fn edges(&self) -> &[Simplex] {
        self.simplices(1)
    }

    pub fn triangles(&self) -> &[Simplex] {
        self.simplices(2)
    }

    /// For every `k`-simplex, the indices of its `(k+1)`-cofaces together
    /// with the coboundary sign exponent (index of the added vertex).
    pub fn cofaces(&self, k: usize) -> Vec<Vec<(usize, usize)>> {
        let mut out = vec![Vec::new(); self.count(k)];
        for (ci, s) in self.simplices(k + 1).iter().enumerate() {
            for (pos, face) in s.facets() {
                let fi = self.index[k][&face];
                out[fi].push((ci, pos));
            }
        }
        out
    }

    /// The subcomplex of simplices satisfying `keep`; `keep` must be closed
    /// under taking faces.
    pub fn subcomplex(&self, mut keep: impl FnMut(&Simplex) -> bool) -> Result<Self> {
        let lists: Vec<Vec<Simplex>> = self
            .simplices
            .iter()
            .enumerate()
            .map(|(k, list)| {
                if k == 0 {
                    list.clone()
                } else {
                    list.iter().filter(|s| keep(s)).copied().collect()
                }
            })
            .collect();
        let sub = Self::from_sorted_lists(self.n_vertices, lists);
        sub.check_closed()?;
        Ok(sub)
    }
}

/// A filtration: a birth value for every simplex, monotone along faces.
#[derive(Debug, Clone)]
pub struct Filtration {
    complex: Arc<SimplicialComplex>,
    births: Vec<Vec<f64>>,
    threshold: f64,
}

impl Filtration {
    /// `births[k][i]` is the birth of `complex.simplices(k)[i]`.
    pub fn new(complex: Arc<SimplicialComplex>, births: Vec<Vec<f64>>) -> Result<Self> {
        let threshold = births
            .iter()
            .flatten()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
            .max(0.0);
        Self::with_threshold(complex, births, threshold)
    }

    pub fn with_threshold(
        complex: Arc<SimplicialComplex>,
        births: Vec<Vec<f64>>,
        threshold: f64,
    ) -> Result<Self> {
        if births.len() != complex.dim() + 1 {
            return Err(Error::NonMonotone(format!(
                "{} birth lists for a complex of dimension {}",
                births.len(),
                complex.dim()
            )));
        }
        for (k, b) in births.iter().enumerate() {
            if b.len() != complex.count(k) {
                return Err(Error::NonMonotone(format!(
                    "dimension {k}: {} births for {} simplices",
                    b.len(),
                    complex.count(k)
                )));
            }
            if let Some(x) = b.iter().find(|x| !x.is_finite()) {
                return Err(Error::NonMonotone(format!("non-finite birth {x}")));
            }
        }
        for k in 1..births.len() {
            for (i, s) in complex.simplices(k).iter().enumerate() {
                for (_, face) in s.facets() {
                    let fi = complex.index_of(&face).expect("closed complex");
                    if births[k - 1][fi] > births[k][i] {
                        return Err(Error::NonMonotone(format!(
                            "face {face:?} born at {} after coface {s:?} at {}",
                            births[k - 1][fi], births[k][i]
                        )));
                    }
                }
            }
        }
        Ok(Filtration {
            complex,
            births,
            threshold,
        })
    }

    /// Every simplex born at `value`.
    pub fn constant(complex: Arc<SimplicialComplex>, value: f64) -> Result<Self> {
        let births = (0..=complex.dim()).map(|k| vec![value; complex.count(k)]).collect();
        Self::new(complex, births)
    }

    pub fn complex(&self) -> &Arc<SimplicialComplex> {
        &self.complex
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn births(&self, k: usize) -> &[f64] {
        self.births.get(k).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn birth(&self, s: &Simplex) -> Option<f64> {
        self.complex.index_of(s).map(|i| self.births[s.dim()][i])
    }

    /// Simplices as `(dim, index)` in filtration order; ties broken by
    /// dimension, then lexicographically.
    pub fn order(&self) -> Vec<(usize, usize)> {
        let mut order: Vec<(usize, usize)> = (0..=self.complex.dim())
            .flat_map(|k| (0..self.complex.count(k)).map(move |i| (k, i)))
            .collect();
        order.sort_by(|&(ka, ia), &(kb, ib)| {
            self.births[ka][ia]
                .total_cmp(&self.births[kb][ib])
                .then(ka.cmp(&kb))
                .then_with(|| {
                    self.complex.simplices(ka)[ia].cmp(&self.complex.simplices(kb)[ib])
                })
        });
        order
    }

    /// Sorted distinct birth values.
    pub fn values(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.births.iter().flatten().copied().collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    }

    /// The subcomplex `K_r` of simplices born at or before `r`.
    pub fn complex_at(&self, r: f64) -> SimplicialComplex {
        self.complex
            .subcomplex(|s| self.birth(s).is_some_and(|b| b <= r))
            .expect("monotone filtration yields a subcomplex")
    }

    /// Restriction of the filtration to simplices of dimension `<= k`.
    pub fn skeleton(&self, k: usize) -> Filtration {
        let lists: Vec<Vec<Simplex>> = (0..=k.min(self.complex.dim()))
            .map(|j| self.complex.simplices(j).to_vec())
            .collect();
        let complex = SimplicialComplex::from_sorted_lists(self.complex.n_vertices, lists);
        let births = self.births[..=k.min(self.complex.dim())].to_vec();
        Filtration {
            complex: Arc::new(complex),
            births,
            threshold: self.threshold,
        }
    }
}

fn check_dissimilarity(d: &Mat) -> Result<()> {
    if !d.is_square() {
        return Err(Error::InvalidDissimilarity(format!(
            "not square: {}x{}",
            d.nrows(),
            d.ncols()
        )));
    }
    let n = d.nrows();
    let scale = d.amax().max(1.0);
    for i in 0..n {
        if d[(i, i)].abs() > 1e-12 * scale {
            return Err(Error::InvalidDissimilarity(format!("nonzero diagonal at {i}")));
        }
        for j in i + 1..n {
            let (a, b) = (d[(i, j)], d[(j, i)]);
            if !a.is_finite() || !b.is_finite() {
                return Err(Error::InvalidDissimilarity(format!("non-finite entry at ({i}, {j})")));
            }
            if a < 0.0 || b < 0.0 {
                return Err(Error::InvalidDissimilarity(format!("negative entry at ({i}, {j})")));
            }
            if (a - b).abs() > 1e-12 * scale {
                return Err(Error::InvalidDissimilarity(format!(
                    "asymmetric at ({i}, {j}): {a} vs {b}"
                )));
            }
        }
    }
    Ok(())
}

/// Vietoris–Rips filtration of a dissimilarity matrix: a simplex is present
/// when all its pairwise dissimilarities are `<= threshold`, and is born at
/// the largest of them.
pub fn vr_filtration(d: &Mat, max_dim: usize, threshold: f64) -> Result<Filtration> {
    check_dissimilarity(d)?;
    if max_dim > MAX_DIM {
        return Err(Error::Unsupported(format!("Vietoris-Rips dimension {max_dim}")));
    }
    let n = d.nrows();
    let dist = |i: u32, j: u32| {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        d[(a as usize, b as usize)]
    };
    // higher neighbours of each vertex, sorted
    let up: Vec<Vec<u32>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i + 1..n)
                .filter(|&j| d[(i, j)] <= threshold)
                .map(|j| j as u32)
                .collect()
        })
        .collect();

    fn intersect(a: &[u32], b: &[u32]) -> Vec<u32> {
        let (mut i, mut j) = (0, 0);
        let mut out = Vec::new();
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    out.push(a[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        out
    }

    let mut lists: Vec<Vec<Simplex>> = vec![(0..n).map(Simplex::vertex).collect()];
    let mut births: Vec<Vec<f64>> = vec![vec![0.0; n]];
    if max_dim >= 1 {
        // (simplex, birth, common higher neighbourhood) for the current dimension
        let mut frontier: Vec<(Vec<u32>, f64, Vec<u32>)> = (0..n as u32)
            .map(|i| (vec![i], 0.0, up[i as usize].clone()))
            .collect();
        for _k in 1..=max_dim {
            let next: Vec<Vec<(Vec<u32>, f64, Vec<u32>)>> = frontier
                .par_iter()
                .map(|(verts, birth, common)| {
                    common
                        .iter()
                        .map(|&v| {
                            let b = verts.iter().fold(*birth, |acc, &u| acc.max(dist(u, v)));
                            let mut vs = verts.clone();
                            vs.push(v);
                            let c = intersect(common, &up[v as usize]);
                            (vs, b, c)
                        })
                        .collect()
                })
                .collect();
            let mut next: Vec<(Vec<u32>, f64, Vec<u32>)> = next.into_iter().flatten().collect();
            next.sort_unstable_by(|a, b| a.0.cmp(&b.0));
            lists.push(next.iter().map(|(vs, _, _)| Simplex::from_sorted_u32(vs)).collect());
            births.push(next.iter().map(|(_, b, _)| *b).collect());
            frontier = next;
        }
    }
    let complex = Arc::new(SimplicialComplex::from_sorted_lists(n, lists));
    let births = births.into_iter().take(complex.dim() + 1).collect();
    Filtration::with_threshold(complex, births, threshold)
}

/// Coefficient ring of a cochain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Ring {
    /// Integers modulo a prime.
    Mod(u32),
    Integers,
}

impl Ring {
    pub const Z2: Ring = Ring::Mod(2);
    pub const Z3: Ring = Ring::Mod(3);

    #[inline]
    pub fn normalize(&self, x: i64) -> i64 {
        match *self {
            Ring::Mod(p) => x.rem_euclid(p as i64),
            Ring::Integers => x,
        }
    }
}

impl fmt::Display for Ring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ring::Mod(p) => write!(f, "Z/{p}"),
            Ring::Integers => write!(f, "Z"),
        }
    }
}

/// A `k`-cochain, stored sparsely as `(simplex index, value)` pairs sorted by
/// index with zero values omitted.
#[derive(Debug, Clone)]
pub struct Cochain {
    complex: Arc<SimplicialComplex>,
    degree: usize,
    ring: Ring,
    entries: Vec<(usize, i64)>,
}

impl PartialEq for Cochain {
    fn eq(&self, other: &Self) -> bool {
        self.degree == other.degree
            && self.ring == other.ring
            && self.entries == other.entries
            && (Arc::ptr_eq(&self.complex, &other.complex) || self.complex == other.complex)
    }
}

impl Cochain {
    pub fn zero(complex: Arc<SimplicialComplex>, degree: usize, ring: Ring) -> Self {
        Cochain {
            complex,
            degree,
            ring,
            entries: Vec::new(),
        }
    }

    /// From values aligned with `complex.simplices(degree)`.
    pub fn from_dense(
        complex: Arc<SimplicialComplex>,
        degree: usize,
        ring: Ring,
        values: &[i64],
    ) -> Result<Self> {
        if values.len() != complex.count(degree) {
            return Err(Error::shape(
                format!("{} values", complex.count(degree)),
                format!("{}", values.len()),
            ));
        }
        let entries = values
            .iter()
            .enumerate()
            .map(|(i, &v)| (i, ring.normalize(v)))
            .filter(|&(_, v)| v != 0)
            .collect();
        Ok(Cochain {
            complex,
            degree,
            ring,
            entries,
        })
    }

    /// From `(simplex index, value)` pairs in any order; repeated indices are
    /// summed.
    pub fn from_entries(
        complex: Arc<SimplicialComplex>,
        degree: usize,
        ring: Ring,
        entries: impl IntoIterator<Item = (usize, i64)>,
    ) -> Result<Self> {
        let n = complex.count(degree);
        let mut acc: HashMap<usize, i64> = HashMap::new();
        for (i, v) in entries {
            if i >= n {
                return Err(Error::MissingSimplex(vec![i]));
            }
            *acc.entry(i).or_insert(0) += v;
        }
        let mut entries: Vec<(usize, i64)> = acc
            .into_iter()
            .map(|(i, v)| (i, ring.normalize(v)))
            .filter(|&(_, v)| v != 0)
            .collect();
        entries.sort_unstable();
        Ok(Cochain {
            complex,
            degree,
            ring,
            entries,
        })
    }

    /// From values on explicit simplices.
    pub fn from_simplices(
        complex: Arc<SimplicialComplex>,
        degree: usize,
        ring: Ring,
        values: impl IntoIterator<Item = (Simplex, i64)>,
    ) -> Result<Self> {
        let mut entries = Vec::new();
        for (s, v) in values {
            if s.dim() != degree {
                return Err(Error::DimensionMismatch(format!(
                    "{s:?} in a {degree}-cochain"
                )));
            }
            let i = complex
                .index_of(&s)
                .ok_or_else(|| Error::MissingSimplex(s.vertices()))?;
            entries.push((i, v));
        }
        Self::from_entries(complex, degree, ring, entries)
    }

    pub fn complex(&self) -> &Arc<SimplicialComplex> {
        &self.complex
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn ring(&self) -> Ring {
        self.ring
    }

    pub fn entries(&self) -> &[(usize, i64)] {
        &self.entries
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn value_at(&self, index: usize) -> i64 {
        self.entries
            .binary_search_by_key(&index, |&(i, _)| i)
            .map(|p| self.entries[p].1)
            .unwrap_or(0)
    }

    pub fn value(&self, s: &Simplex) -> Option<i64> {
        self.complex.index_of(s).map(|i| self.value_at(i))
    }

    pub fn to_dense(&self) -> Vec<i64> {
        let mut out = vec![0; self.complex.count(self.degree)];
        for &(i, v) in &self.entries {
            out[i] = v;
        }
        out
    }

    /// Nonzero values keyed by simplex.
    pub fn iter_simplices(&self) -> impl Iterator<Item = (Simplex, i64)> + '_ {
        let list = self.complex.simplices(self.degree);
        self.entries.iter().map(move |&(i, v)| (list[i], v))
    }

    pub fn add(&self, other: &Cochain) -> Result<Cochain> {
        self.combine(other, 1)
    }

    pub fn sub(&self, other: &Cochain) -> Result<Cochain> {
        self.combine(other, -1)
    }

    fn combine(&self, other: &Cochain, sign: i64) -> Result<Cochain> {
        if self.degree != other.degree || self.ring != other.ring {
            return Err(Error::DimensionMismatch(format!(
                "cannot combine {}-cochain over {} with {}-cochain over {}",
                self.degree, self.ring, other.degree, other.ring
            )));
        }
        if !Arc::ptr_eq(&self.complex, &other.complex) && *self.complex != *other.complex {
            return Err(Error::DimensionMismatch("cochains live on different complexes".into()));
        }
        Self::from_entries(
            self.complex.clone(),
            self.degree,
            self.ring,
            self.entries
                .iter()
                .copied()
                .chain(other.entries.iter().map(|&(i, v)| (i, sign * v))),
        )
    }

    pub fn scale(&self, c: i64) -> Cochain {
        let entries = self
            .entries
            .iter()
            .map(|&(i, v)| (i, self.ring.normalize(c * v)))
            .filter(|&(_, v)| v != 0)
            .collect();
        Cochain {
            complex: self.complex.clone(),
            degree: self.degree,
            ring: self.ring,
            entries,
        }
    }

    /// Entrywise change of coefficients to `Z/p`.
    pub fn reduce_mod(&self, p: u32) -> Cochain {
        let ring = Ring::Mod(p);
        let entries = self
            .entries
            .iter()
            .map(|&(i, v)| (i, ring.normalize(v)))
            .filter(|&(_, v)| v != 0)
            .collect();
        Cochain {
            complex: self.complex.clone(),
            degree: self.degree,
            ring,
            entries,
        }
    }

    /// Transports the cochain to another complex by simplex identity.
    ///
    /// Values on simplices missing from `target` are dropped.
    pub fn transport(&self, target: Arc<SimplicialComplex>) -> Cochain {
        let src = self.complex.simplices(self.degree);
        let mut entries: Vec<(usize, i64)> = self
            .entries
            .iter()
            .filter_map(|&(i, v)| target.index_of(&src[i]).map(|j| (j, v)))
            .collect();
        entries.sort_unstable();
        Cochain {
            complex: target,
            degree: self.degree,
            ring: self.ring,
            entries,
        }
    }

    /// Simplicial coboundary `(δc)(v_0..v_{k+1}) = Σ (−1)^i c(.. v̂_i ..)`.
    pub fn coboundary(&self) -> Result<Cochain> {
        let k = self.degree;
        if k + 1 > MAX_DIM {
            return Err(Error::Unsupported(format!(
                "coboundary of a {k}-cochain exceeds stored dimension {MAX_DIM}"
            )));
        }
        let mut entries = Vec::new();
        if !self.entries.is_empty() {
            for (ci, s) in self.complex.simplices(k + 1).iter().enumerate() {
                let mut acc = 0i64;
                for (pos, face) in s.facets() {
                    let fi = self.complex.index_of(&face).expect("closed complex");
                    let v = self.value_at(fi);
                    if v != 0 {
                        acc += if pos % 2 == 0 { v } else { -v };
                    }
                }
                let acc = self.ring.normalize(acc);
                if acc != 0 {
                    entries.push((ci, acc));
                }
            }
        }
        Ok(Cochain {
            complex: self.complex.clone(),
            degree: k + 1,
            ring: self.ring,
            entries,
        })
    }

    /// `δc = 0`. Cochains of top stored degree are cocycles trivially.
    pub fn is_cocycle(&self) -> bool {
        if self.degree >= MAX_DIM {
            return true;
        }
        self.coboundary().map(|c| c.is_zero()).unwrap_or(true)
    }
}

/// Writes a filtration as lines `dim v0 .. vk birth`, in filtration order.
pub fn write_filtration<W: Write>(f: &Filtration, mut out: W) -> std::io::Result<()> {
    writeln!(out, "# vertices {} threshold {}", f.complex().n_vertices(), f.threshold())?;
    for (k, i) in f.order() {
        let s = &f.complex().simplices(k)[i];
        write!(out, "{k}")?;
        for v in s.vertices_u32() {
            write!(out, " {v}")?;
        }
        writeln!(out, " {}", f.births(k)[i])?;
    }
    Ok(())
}

/// Reads the format of [`write_filtration`]. The `# vertices n threshold t`
/// header is optional.
pub fn read_filtration<R: BufRead>(input: R) -> Result<Filtration> {
    let mut n_vertices: Option<usize> = None;
    let mut threshold: Option<f64> = None;
    let mut entries: Vec<(Simplex, f64)> = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::Parse {
            line: lineno + 1,
            msg: e.to_string(),
        })?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let perr = |msg: String| Error::Parse {
            line: lineno + 1,
            msg,
        };
        if let Some(rest) = line.strip_prefix('#') {
            let toks: Vec<&str> = rest.split_whitespace().collect();
            if toks.len() == 4 && toks[0] == "vertices" && toks[2] == "threshold" {
                n_vertices = Some(toks[1].parse().map_err(|e| perr(format!("{e}")))?);
                threshold = Some(toks[3].parse().map_err(|e| perr(format!("{e}")))?);
            }
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        let dim: usize = toks
            .first()
            .ok_or_else(|| perr("empty line".into()))?
            .parse()
            .map_err(|e| perr(format!("bad dimension: {e}")))?;
        if toks.len() != dim + 3 {
            return Err(perr(format!("expected {} fields, got {}", dim + 3, toks.len())));
        }
        let verts: Vec<usize> = toks[1..=dim + 1]
            .iter()
            .map(|t| t.parse().map_err(|e| perr(format!("bad vertex: {e}"))))
            .collect::<Result<_>>()?;
        let birth: f64 = toks[dim + 2]
            .parse()
            .map_err(|e| perr(format!("bad birth: {e}")))?;
        let s = Simplex::new(&verts).map_err(|e| perr(e.to_string()))?;
        entries.push((s, birth));
    }
    let n = n_vertices.unwrap_or_else(|| {
        entries
            .iter()
            .flat_map(|(s, _)| s.vertices())
            .max()
            .map_or(0, |m| m + 1)
    });
    let complex = Arc::new(SimplicialComplex::new(n, entries.iter().map(|(s, _)| *s))?);
    let mut births: Vec<Vec<f64>> = (0..=complex.dim()).map(|k| vec![0.0; complex.count(k)]).collect();
    let mut seen_vertex = vec![false; n];
    for (s, b) in &entries {
        let i = complex.index_of(s).expect("just inserted");
        births[s.dim()][i] = *b;
        if s.dim() == 0 {
            seen_vertex[i] = true;
        }
    }
    if let Some(v) = seen_vertex.iter().position(|&x| !x) {
        if entries.iter().any(|(s, _)| s.dim() == 0) {
            return Err(Error::InvalidComplex(format!("vertex {v} has no birth line")));
        }
    }
    match threshold {
        Some(t) => Filtration::with_threshold(complex, births, t),
        None => Filtration::new(complex, births),
    }
}
