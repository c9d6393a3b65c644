//! Persistent cohomology over `Z/p` with representative cocycles, and
//! decomposition of cocycles in the resulting basis.
//!
//! The coboundary matrix is reduced column by column, processing simplices in
//! decreasing filtration order; the pivot of a column is its earliest coface.
//! A pair `(σ, τ)` gives the bar `[birth σ, birth τ)` in degree `dim σ`, and
//! the accumulated column combination is a cocycle on every `K_r` with
//! `r < birth τ`. Columns of simplices that were pivots one degree lower are
//! cleared without reduction.

use std::collections::HashMap;
use std::io::Write;
use std::sync::Arc;

use crate::complex::{Cochain, Filtration, Ring};
use crate::error::{Error, Result};

type SparseCol = Vec<(u32, u32)>;

/// Arithmetic in `Z/p`.
#[derive(Debug, Clone, Copy)]
struct Field {
    p: u32,
}

impl Field {
    fn new(p: u32) -> Result<Self> {
        if p < 2 || !(2..p).take_while(|d| d * d <= p).all(|d| p % d != 0) {
            return Err(Error::Unsupported(format!("coefficient modulus {p} is not prime")));
        }
        if p > 46_337 {
            return Err(Error::Unsupported(format!("prime {p} too large")));
        }
        Ok(Field { p })
    }

    #[inline]
    fn mul(&self, a: u32, b: u32) -> u32 {
        (a * b) % self.p
    }

    #[inline]
    fn neg(&self, a: u32) -> u32 {
        if a == 0 {
            0
        } else {
            self.p - a
        }
    }

    fn inv(&self, a: u32) -> u32 {
        debug_assert!(a % self.p != 0);
        let mut result = 1u64;
        let mut base = a as u64 % self.p as u64;
        let mut exp = self.p - 2;
        while exp > 0 {
            if exp & 1 == 1 {
                result = result * base % self.p as u64;
            }
            base = base * base % self.p as u64;
            exp >>= 1;
        }
        result as u32
    }

    fn from_i64(&self, x: i64) -> u32 {
        x.rem_euclid(self.p as i64) as u32
    }

    /// `a + factor * b` for columns sorted by row.
    fn axpy(&self, a: &[(u32, u32)], factor: u32, b: &[(u32, u32)]) -> SparseCol {
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() || j < b.len() {
            if j == b.len() || (i < a.len() && a[i].0 < b[j].0) {
                out.push(a[i]);
                i += 1;
            } else if i == a.len() || b[j].0 < a[i].0 {
                out.push((b[j].0, self.mul(factor, b[j].1)));
                j += 1;
            } else {
                let v = (a[i].1 + self.mul(factor, b[j].1)) % self.p;
                if v != 0 {
                    out.push((a[i].0, v));
                }
                i += 1;
                j += 1;
            }
        }
        out
    }
}

/// One interval of the persistence diagram.
#[derive(Debug, Clone)]
pub struct Bar {
    pub id: usize,
    pub degree: usize,
    pub birth: f64,
    /// `f64::INFINITY` for classes that never die within the filtration.
    pub death: f64,
    /// Cocycle on every `K_r` with `birth <= r < death`.
    pub representative: Cochain,
}

impl Bar {
    pub fn is_essential(&self) -> bool {
        self.death.is_infinite()
    }

    /// `birth <= r < death`.
    pub fn alive_at(&self, r: f64) -> bool {
        self.birth <= r && r < self.death
    }

    /// Length of the bar, with infinite deaths capped at `cap`.
    pub fn persistence(&self, cap: f64) -> f64 {
        self.death.min(cap) - self.birth
    }
}

#[derive(Debug, Clone)]
pub struct PersistenceDiagram {
    prime: u32,
    max_degree: usize,
    filtration: Arc<Filtration>,
    bars: Vec<Bar>,
}

impl PersistenceDiagram {
    pub fn prime(&self) -> u32 {
        self.prime
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn filtration(&self) -> &Arc<Filtration> {
        &self.filtration
    }

    pub fn bars(&self) -> &[Bar] {
        &self.bars
    }

    pub fn bar(&self, id: usize) -> Option<&Bar> {
        self.bars.get(id)
    }

    pub fn bars_in_degree(&self, degree: usize) -> impl Iterator<Item = &Bar> {
        self.bars.iter().filter(move |b| b.degree == degree)
    }

    pub fn alive_at(&self, r: f64, degree: usize) -> Vec<&Bar> {
        self.bars_in_degree(degree).filter(|b| b.alive_at(r)).collect()
    }

    /// Bar of largest persistence in `degree`, infinite deaths capped at the
    /// filtration threshold. Ties go to the earlier birth.
    pub fn most_persistent(&self, degree: usize) -> Option<&Bar> {
        let cap = self.filtration.threshold();
        self.bars_in_degree(degree).max_by(|a, b| {
            a.persistence(cap)
                .total_cmp(&b.persistence(cap))
                .then(b.birth.total_cmp(&a.birth))
        })
    }
}

/// Computes persistent cohomology in degrees `0..=max_deg` over `Z/p`.
///
/// Bars of zero length are dropped.
pub fn persistent_cohomology(
    filtration: Arc<Filtration>,
    p: u32,
    max_deg: usize,
) -> Result<PersistenceDiagram> {
    let field = Field::new(p)?;
    let complex = filtration.complex().clone();
    // revalidate monotonicity; a Filtration is always monotone but a cheap
    // recheck guards against births edited through a clone
    for k in 1..=complex.dim() {
        for (i, s) in complex.simplices(k).iter().enumerate() {
            for (_, face) in s.facets() {
                if filtration.birth(&face).unwrap_or(f64::NAN) > filtration.births(k)[i] {
                    return Err(Error::NonMonotone(format!("{face:?} after {s:?}")));
                }
            }
        }
    }
    let order = filtration.order();
    let total = order.len();
    if total >= u32::MAX as usize {
        return Err(Error::Unsupported("filtration too large".into()));
    }
    // global position of each (dim, idx)
    let mut position: Vec<Vec<u32>> = (0..=complex.dim()).map(|k| vec![0; complex.count(k)]).collect();
    for (pos, &(k, i)) in order.iter().enumerate() {
        position[k][i] = pos as u32;
    }
    let birth_at = |pos: u32| {
        let (k, i) = order[pos as usize];
        filtration.births(k)[i]
    };

    let mut raw_bars: Vec<(usize, u32, f64, SparseCol)> = Vec::new();
    let mut cleared: Vec<bool> = vec![false; total];
    for k in 0..=max_deg.min(complex.dim()) {
        let cofaces = complex.cofaces(k);
        let mut columns: Vec<u32> = position[k].clone();
        columns.sort_unstable_by(|a, b| b.cmp(a));
        // pivot row -> slot in `reduced`
        let mut owner: HashMap<u32, usize> = HashMap::new();
        let mut reduced: Vec<(SparseCol, SparseCol)> = Vec::new();
        let mut next_cleared = vec![false; total];
        for &col in &columns {
            if cleared[col as usize] {
                continue;
            }
            let (_, idx) = order[col as usize];
            let mut r: SparseCol = cofaces[idx]
                .iter()
                .map(|&(ci, vpos)| {
                    let sign = if vpos % 2 == 0 { 1 } else { field.neg(1) };
                    (position[k + 1][ci], sign)
                })
                .collect();
            r.sort_unstable();
            let mut v: SparseCol = vec![(col, 1)];
            loop {
                let Some(&(piv, coef)) = r.first() else {
                    raw_bars.push((k, col, f64::INFINITY, v));
                    break;
                };
                match owner.get(&piv) {
                    Some(&slot) => {
                        let (rc, vc) = &reduced[slot];
                        let factor = field.neg(field.mul(coef, field.inv(rc[0].1)));
                        r = field.axpy(&r, factor, rc);
                        v = field.axpy(&v, factor, vc);
                    }
                    None => {
                        let death = birth_at(piv);
                        if death > birth_at(col) {
                            raw_bars.push((k, col, death, v.clone()));
                        }
                        next_cleared[piv as usize] = true;
                        owner.insert(piv, reduced.len());
                        reduced.push((r, v));
                        break;
                    }
                }
            }
        }
        cleared = next_cleared;
    }

    raw_bars.sort_by(|a, b| {
        a.0.cmp(&b.0)
            .then(birth_at(a.1).total_cmp(&birth_at(b.1)))
            .then(a.2.total_cmp(&b.2))
            .then(a.1.cmp(&b.1))
    });
    let bars = raw_bars
        .into_iter()
        .enumerate()
        .map(|(id, (k, col, death, v))| {
            let entries = v.into_iter().map(|(pos, c)| {
                let (kk, i) = order[pos as usize];
                debug_assert_eq!(kk, k);
                (i, c as i64)
            });
            let representative = Cochain::from_entries(complex.clone(), k, Ring::Mod(p), entries)
                .expect("indices come from the complex");
            Bar {
                id,
                degree: k,
                birth: birth_at(col),
                death,
                representative,
            }
        })
        .collect();
    Ok(PersistenceDiagram {
        prime: p,
        max_degree: max_deg,
        filtration,
        bars,
    })
}

/// Coordinates of a cocycle in the persistence basis at scale `r`.
#[derive(Debug, Clone)]
pub struct ClassDecomposition {
    pub scale: f64,
    pub degree: usize,
    /// `(bar id, coefficient)` for every bar alive at `scale`.
    pub coefficients: Vec<(usize, u32)>,
    /// `b` with `z − Σ c_i Λ_i = δb` on `K_r`; `None` in degree 0.
    pub witness: Option<Cochain>,
}

impl ClassDecomposition {
    pub fn is_zero(&self) -> bool {
        self.coefficients.iter().all(|&(_, c)| c == 0)
    }

    pub fn nonzero_bars(&self) -> Vec<usize> {
        self.coefficients
            .iter()
            .filter(|&&(_, c)| c != 0)
            .map(|&(id, _)| id)
            .collect()
    }

    pub fn coefficient(&self, bar_id: usize) -> Option<u32> {
        self.coefficients
            .iter()
            .find(|&&(id, _)| id == bar_id)
            .map(|&(_, c)| c)
    }
}

/// Writes `z = Σ c_i Λ_i + δb` on `K_r`, where the `Λ_i` are representatives
/// of the bars alive at `r`.
///
/// `z` may live on any complex sharing simplices with the filtration; values
/// on simplices outside `K_r` are ignored.
pub fn decompose_class(z: &Cochain, diag: &PersistenceDiagram, r: f64) -> Result<ClassDecomposition> {
    let p = diag.prime;
    let k = z.degree();
    if k > diag.max_degree {
        return Err(Error::Inconsistent(format!(
            "degree {k} exceeds diagram degree {}",
            diag.max_degree
        )));
    }
    if z.ring() != Ring::Mod(p) {
        return Err(Error::Inconsistent(format!(
            "cochain over {} decomposed in a Z/{p} basis",
            z.ring()
        )));
    }
    let field = Field::new(p)?;
    let filtration = &diag.filtration;
    let complex = filtration.complex();
    let in_kr = |dim: usize, i: usize| filtration.births(dim)[i] <= r;

    // z as a sparse column over k-simplices of K_r, keyed by simplex index
    let mut target: SparseCol = Vec::new();
    for (s, v) in z.iter_simplices() {
        if let Some(i) = complex.index_of(&s) {
            if in_kr(k, i) {
                target.push((i as u32, field.from_i64(v)));
            }
        }
    }
    target.sort_unstable();

    // cocycle check on K_r
    if k + 1 <= complex.dim() {
        let mut zval: HashMap<u32, u32> = target.iter().copied().collect();
        zval.retain(|_, v| *v != 0);
        for (ci, s) in complex.simplices(k + 1).iter().enumerate() {
            if !in_kr(k + 1, ci) {
                continue;
            }
            let mut acc = 0u32;
            for (pos, face) in s.facets() {
                let fi = complex.index_of(&face).expect("closed") as u32;
                if let Some(&v) = zval.get(&fi) {
                    acc = (acc + if pos % 2 == 0 { v } else { field.neg(v) }) % p;
                }
            }
            if acc != 0 {
                return Err(Error::Inconsistent(format!(
                    "cochain is not a cocycle on K_r: nonzero on {s:?}"
                )));
            }
        }
    }

    // generators: coboundaries of (k−1)-simplices of K_r, then bar representatives
    let mut columns: Vec<SparseCol> = Vec::new();
    let mut low_simplices: Vec<usize> = Vec::new();
    if k >= 1 {
        let cofaces = complex.cofaces(k - 1);
        for (i, cf) in cofaces.iter().enumerate() {
            if !in_kr(k - 1, i) {
                continue;
            }
            let mut col: SparseCol = cf
                .iter()
                .filter(|&&(ci, _)| in_kr(k, ci))
                .map(|&(ci, vpos)| (ci as u32, if vpos % 2 == 0 { 1 } else { field.neg(1) }))
                .collect();
            col.sort_unstable();
            low_simplices.push(i);
            columns.push(col);
        }
    }
    let n_cobound = columns.len();
    let alive: Vec<&Bar> = diag.alive_at(r, k);
    for bar in &alive {
        let col: SparseCol = bar
            .representative
            .entries()
            .iter()
            .filter(|&&(i, _)| in_kr(k, i))
            .map(|&(i, v)| (i as u32, field.from_i64(v)))
            .collect();
        columns.push(col);
    }

    // column reduction with pivot = largest row, tracking combinations
    let mut owner: HashMap<u32, usize> = HashMap::new();
    let mut reduced: Vec<(SparseCol, SparseCol)> = Vec::new();
    for (j, col) in columns.into_iter().enumerate() {
        let mut c = col;
        let mut comb: SparseCol = vec![(j as u32, 1)];
        while let Some(&(piv, coef)) = c.last() {
            match owner.get(&piv) {
                Some(&slot) => {
                    let (rc, cc) = &reduced[slot];
                    let factor = field.neg(field.mul(coef, field.inv(rc.last().unwrap().1)));
                    c = field.axpy(&c, factor, rc);
                    comb = field.axpy(&comb, factor, cc);
                }
                None => {
                    owner.insert(piv, reduced.len());
                    reduced.push((c, comb));
                    break;
                }
            }
        }
        if j >= n_cobound && reduced.last().map_or(true, |(_, cc)| cc.last().map(|e| e.0) != Some(j as u32)) {
            log::warn!("bar representative {j} is dependent modulo coboundaries at scale {r}");
        }
    }
    let mut rem = target;
    let mut solution: SparseCol = Vec::new();
    while let Some(&(piv, coef)) = rem.last() {
        let Some(&slot) = owner.get(&piv) else {
            return Err(Error::Inconsistent(format!(
                "cocycle not in the span of the persistence basis at scale {r}"
            )));
        };
        let (rc, cc) = &reduced[slot];
        let factor = field.mul(coef, field.inv(rc.last().unwrap().1));
        rem = field.axpy(&rem, field.neg(factor), rc);
        solution = field.axpy(&solution, factor, cc);
    }
    let sol: HashMap<u32, u32> = solution.into_iter().collect();
    let coefficients = alive
        .iter()
        .enumerate()
        .map(|(t, bar)| (bar.id, sol.get(&((n_cobound + t) as u32)).copied().unwrap_or(0)))
        .collect();
    let witness = if k >= 1 {
        let entries = (0..n_cobound).filter_map(|j| {
            sol.get(&(j as u32)).map(|&c| (low_simplices[j], c as i64))
        });
        Some(Cochain::from_entries(complex.clone(), k - 1, Ring::Mod(p), entries)?)
    } else {
        None
    };
    Ok(ClassDecomposition {
        scale: r,
        degree: k,
        coefficients,
        witness,
    })
}

/// Bars of `degree` with `birth <= delta <= death`.
pub fn epsilon_span(diag: &PersistenceDiagram, delta: f64, degree: usize) -> Vec<&Bar> {
    diag.bars_in_degree(degree)
        .filter(|b| b.birth <= delta && delta <= b.death)
        .collect()
}

/// CSV `degree,birth,death,bar_id`; infinite deaths are written as `inf`.
pub fn write_diagram_csv<W: Write>(diag: &PersistenceDiagram, mut out: W) -> std::io::Result<()> {
    writeln!(out, "degree,birth,death,bar_id")?;
    for b in &diag.bars {
        if b.is_essential() {
            writeln!(out, "{},{},inf,{}", b.degree, b.birth, b.id)?;
        } else {
            writeln!(out, "{},{},{},{}", b.degree, b.birth, b.death, b.id)?;
        }
    }
    Ok(())
}

/// CSV `bar_id,coefficient`.
pub fn write_decomposition_csv<W: Write>(dec: &ClassDecomposition, mut out: W) -> std::io::Result<()> {
    writeln!(out, "bar_id,coefficient")?;
    for &(id, c) in &dec.coefficients {
        writeln!(out, "{id},{c}")?;
    }
    Ok(())
}
