#![allow(dead_code)]

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::sync::Arc;

use approxbundle::bundle::DiscreteCocycle;
use approxbundle::charclass::euler;
use approxbundle::complex::{Filtration, Simplex, SimplicialComplex};
use approxbundle::ingest::alignment_cocycle;
use approxbundle::matgeo::{random_rotation, Frame, Mat};
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rand::Rng;

// ---------- dense persistence oracle ----------

fn inv_mod(a: i64, p: i64) -> i64 {
    let (mut r, mut x, mut b, mut y) = (a.rem_euclid(p), 1i64, p, 0i64);
    while b != 0 {
        let q = r / b;
        (r, b) = (b, r - q * b);
        (x, y) = (y, x - q * y);
    }
    x.rem_euclid(p)
}

/// Row echelon form mod `p` of the given rows; returns the nonzero rows.
fn echelon(mut rows: Vec<Vec<i64>>, p: i64) -> Vec<Vec<i64>> {
    let width = rows.first().map_or(0, Vec::len);
    let mut rank = 0;
    for col in 0..width {
        let Some(piv) = (rank..rows.len()).find(|&r| rows[r][col].rem_euclid(p) != 0) else {
            continue;
        };
        rows.swap(rank, piv);
        let inv = inv_mod(rows[rank][col], p);
        for v in rows[rank].iter_mut() {
            *v = (*v * inv).rem_euclid(p);
        }
        for r in 0..rows.len() {
            if r != rank && rows[r][col].rem_euclid(p) != 0 {
                let f = rows[r][col];
                for c in 0..width {
                    rows[r][c] = (rows[r][c] - f * rows[rank][c]).rem_euclid(p);
                }
            }
        }
        rank += 1;
    }
    rows.truncate(rank);
    rows
}

fn rank_mod(rows: Vec<Vec<i64>>, p: i64) -> usize {
    echelon(rows, p).len()
}

/// Basis of `{x : A x = 0}` for `A` given by columns `cols` (each of length
/// `m`), as vectors of length `cols.len()`.
fn nullspace_mod(cols: &[Vec<i64>], m: usize, p: i64) -> Vec<Vec<i64>> {
    let n = cols.len();
    let rows: Vec<Vec<i64>> = (0..m).map(|r| cols.iter().map(|c| c[r]).collect()).collect();
    let red = echelon(rows, p);
    let pivots: Vec<usize> = red.iter().map(|r| r.iter().position(|&v| v != 0).unwrap()).collect();
    (0..n)
        .filter(|c| !pivots.contains(c))
        .map(|free| {
            let mut x = vec![0; n];
            x[free] = 1;
            for (r, &pc) in red.iter().zip(&pivots) {
                x[pc] = (-r[free]).rem_euclid(p);
            }
            x
        })
        .collect()
}

/// Boundary of the `k`-simplex `s` as a dense vector over the `(k−1)`-simplices.
fn boundary_column(k: &SimplicialComplex, s: &Simplex) -> Vec<i64> {
    let mut col = vec![0; k.count(s.dim() - 1)];
    let v = s.vertices();
    for pos in 0..v.len() {
        let mut face = v.clone();
        face.remove(pos);
        let idx = k.index_of(&Simplex::new(&face).unwrap()).unwrap();
        col[idx] = if pos % 2 == 0 { 1 } else { -1 };
    }
    col
}

/// `(degree, birth, death)` of every bar of positive length, from ranks of
/// maps `H_k(K_a) → H_k(K_b)` computed by dense elimination.
pub fn dense_barcode(f: &Filtration, max_degree: usize, p: u32) -> Vec<(usize, f64, f64)> {
    let p = p as i64;
    let k = f.complex();
    let values = f.values();
    let n_vals = values.len();
    let idx_of = |v: f64| values.iter().position(|&x| x == v).unwrap();
    let mut bars = Vec::new();
    for deg in 0..=max_degree.min(k.dim()) {
        let simplices = k.simplices(deg);
        let births: Vec<usize> = f.births(deg).iter().map(|&b| idx_of(b)).collect();
        let n = simplices.len();
        // cycles of K_a in degree deg
        let cycles: Vec<Vec<Vec<i64>>> = (0..n_vals)
            .map(|a| {
                let alive: Vec<usize> = (0..n).filter(|&s| births[s] <= a).collect();
                let basis = if deg == 0 {
                    alive.iter().map(|&s| (0..alive.len()).map(|t| i64::from(t == alive.iter().position(|&x| x == s).unwrap())).collect()).collect()
                } else {
                    let cols: Vec<Vec<i64>> = alive.iter().map(|&s| boundary_column(k, &simplices[s])).collect();
                    nullspace_mod(&cols, k.count(deg - 1), p)
                };
                basis
                    .into_iter()
                    .map(|x: Vec<i64>| {
                        let mut full = vec![0; n];
                        for (t, &s) in alive.iter().enumerate() {
                            full[s] = x[t];
                        }
                        full
                    })
                    .collect()
            })
            .collect();
        let bounds: Vec<Vec<Vec<i64>>> = (0..n_vals)
            .map(|b| {
                if deg + 1 > k.dim() {
                    return Vec::new();
                }
                let up = f.births(deg + 1);
                k.simplices(deg + 1)
                    .iter()
                    .zip(up)
                    .filter(|(_, &bb)| idx_of(bb) <= b)
                    .map(|(s, _)| boundary_column(k, s))
                    .collect()
            })
            .collect();
        // beta[a][b] = dim image of H(K_a) in H(K_b), b = n_vals means K itself
        let beta = |a: usize, b: usize| -> i64 {
            let b = b.min(n_vals - 1);
            let bd = &bounds[b];
            let mut both = cycles[a].clone();
            both.extend(bd.iter().cloned());
            (rank_mod(both, p) - rank_mod(bd.clone(), p)) as i64
        };
        let table: Vec<Vec<i64>> = (0..n_vals).map(|a| (0..n_vals).map(|b| if b >= a { beta(a, b) } else { 0 }).collect()).collect();
        let bt = |a: isize, b: usize| if a < 0 { 0 } else { table[a as usize][b] };
        for i in 0..n_vals {
            for j in i + 1..n_vals {
                let mu = bt(i as isize, j - 1) - bt(i as isize - 1, j - 1) - bt(i as isize, j) + bt(i as isize - 1, j);
                for _ in 0..mu {
                    bars.push((deg, values[i], values[j]));
                }
            }
            let last = n_vals - 1;
            let mu = bt(i as isize, last) - bt(i as isize - 1, last);
            for _ in 0..mu {
                bars.push((deg, values[i], f64::INFINITY));
            }
        }
    }
    bars.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.total_cmp(&b.2)));
    bars
}

/// Random filtered complex on `n` vertices with at most `max_simplices`
/// simplices and values on a coarse grid, so ties are common.
pub fn random_filtration<R: Rng>(rng: &mut R, n: usize, max_simplices: usize) -> Filtration {
    let mut maximal: Vec<Simplex> = Vec::new();
    for _ in 0..500 {
        let dim = rng.gen_range(1..=3).min(n - 1);
        let mut v: Vec<usize> = (0..n).collect();
        for i in 0..=dim {
            let j = rng.gen_range(i..n);
            v.swap(i, j);
        }
        let s = Simplex::new(&v[..=dim]).unwrap();
        let mut trial = maximal.clone();
        trial.push(s);
        let k = SimplicialComplex::from_maximal(n, trial.clone()).unwrap();
        if k.total_count() > max_simplices {
            break;
        }
        maximal = trial;
    }
    let k = Arc::new(SimplicialComplex::from_maximal(n, maximal).unwrap());
    let mut births: Vec<Vec<f64>> = Vec::new();
    for d in 0..=k.dim() {
        let b: Vec<f64> = k
            .simplices(d)
            .iter()
            .map(|s| {
                let own = f64::from(rng.gen_range(0..6u8));
                if d == 0 {
                    return own;
                }
                let faces = s.facets().map(|(_, f)| births[d - 1][k.index_of(&f).unwrap()]);
                faces.fold(own, f64::max)
            })
            .collect();
        births.push(b);
    }
    Filtration::new(k, births).unwrap()
}

// ---------- spheres ----------

/// Octahedron boundary with every triangle split into four `levels` times,
/// vertices pushed to the unit sphere. One level gives 18 vertices, 48
/// edges and 32 triangles.
pub fn subdivided_octahedron(levels: usize) -> (Arc<SimplicialComplex>, Vec<Vector3<f64>>) {
    let mut pts: Vec<Vector3<f64>> = vec![
        Vector3::x(),
        -Vector3::x(),
        Vector3::y(),
        -Vector3::y(),
        Vector3::z(),
        -Vector3::z(),
    ];
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 2, 4],
        [2, 1, 4],
        [1, 3, 4],
        [3, 0, 4],
        [2, 0, 5],
        [1, 2, 5],
        [3, 1, 5],
        [0, 3, 5],
    ];
    for _ in 0..levels {
        let mut mid: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut midpoint = |a: usize, b: usize, pts: &mut Vec<Vector3<f64>>| {
            *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                pts.push((pts[a] + pts[b]).normalize());
                pts.len() - 1
            })
        };
        faces = faces
            .into_iter()
            .flat_map(|[a, b, c]| {
                let (ab, bc, ca) = (midpoint(a, b, &mut pts), midpoint(b, c, &mut pts), midpoint(c, a, &mut pts));
                [[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]
            })
            .collect();
    }
    let tris = faces.iter().map(|t| Simplex::new(t).unwrap());
    let k = SimplicialComplex::from_maximal(pts.len(), tris).unwrap();
    (Arc::new(k), pts)
}

/// Plain octahedron boundary: 6 vertices, 12 edges, 8 triangles.
pub fn octahedron() -> (Arc<SimplicialComplex>, Vec<Vector3<f64>>) {
    let pts = vec![
        Vector3::x(),
        -Vector3::x(),
        Vector3::y(),
        -Vector3::y(),
        Vector3::z(),
        -Vector3::z(),
    ];
    let tris = [[0, 2, 4], [1, 2, 4], [1, 3, 4], [0, 3, 4], [0, 2, 5], [1, 2, 5], [1, 3, 5], [0, 3, 5]];
    let k = SimplicialComplex::from_maximal(6, tris.iter().map(|t| Simplex::new(t).unwrap())).unwrap();
    (Arc::new(k), pts)
}

/// `+1` where the sorted vertex order of a triangle is the outward
/// orientation, `−1` otherwise.
pub fn outward_signs(k: &SimplicialComplex, pts: &[Vector3<f64>]) -> Vec<i64> {
    k.triangles()
        .iter()
        .map(|t| {
            let v = t.vertices();
            let det = Matrix3::from_columns(&[pts[v[0]], pts[v[1]], pts[v[2]]]).determinant();
            if det > 0.0 {
                1
            } else {
                -1
            }
        })
        .collect()
}

/// Euler number: the Euler cocycle summed over outward-oriented triangles.
pub fn euler_total(omega: &DiscreteCocycle, signs: &[i64]) -> i64 {
    let e = euler(omega).unwrap();
    signs.iter().enumerate().map(|(t, s)| s * e.cochain().value_at(t)).sum()
}

/// Rotation whose third column is `n`, first two columns an oriented
/// tangent frame.
pub fn tangent_rotation(n: &Vector3<f64>, twist: f64) -> Matrix3<f64> {
    let helper = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let a = n.cross(&helper).normalize();
    let b = n.cross(&a);
    let (s, c) = twist.sin_cos();
    let a2 = a * c + b * s;
    let b2 = n.cross(&a2);
    Matrix3::from_columns(&[a2, b2, *n])
}

/// Tangent-bundle cocycle of the sphere by geodesic transport between the
/// vertex tangent planes.
pub fn geodesic_tangent_cocycle(k: Arc<SimplicialComplex>, pts: &[Vector3<f64>], twists: &[f64]) -> DiscreteCocycle {
    let rots: Vec<Matrix3<f64>> = pts.iter().zip(twists).map(|(n, &t)| tangent_rotation(n, t)).collect();
    alignment_cocycle(&rots, k).unwrap()
}

/// Oriented tangent frames `[a | b]` with `a × b = n`.
pub fn tangent_frames(pts: &[Vector3<f64>], twists: &[f64]) -> Vec<Frame> {
    pts.iter()
        .zip(twists)
        .map(|(n, &t)| {
            let v = tangent_rotation(n, t);
            Frame::new(Mat::from_fn(3, 2, |a, b| v[(a, b)])).unwrap()
        })
        .collect()
}

pub fn rot2(turns: f64) -> Mat {
    let (s, c) = (turns * TAU).sin_cos();
    Mat::from_row_slice(2, 2, &[c, -s, s, c])
}

/// `SO(2)` cocycle on a closed oriented surface whose Euler cocycle sums to
/// `e`: every triangle carries `|e| / |T|` turns of curvature, realized by a
/// least-squares edge potential.
pub fn prescribed_euler_cocycle(k: Arc<SimplicialComplex>, signs: &[i64], e: i64) -> DiscreteCocycle {
    let (ne, nt) = (k.count(1), k.count(2));
    let per = e as f64 / nt as f64;
    // oriented δΛ is −per everywhere except one triangle, which carries the
    // whole integer part; principal lifts then round to a total of e
    let target = DVector::from_fn(nt, |t, _| {
        let jump = if t == 0 { e as f64 } else { 0.0 };
        signs[t] as f64 * (jump - per)
    });
    let mut delta = DMatrix::zeros(nt, ne);
    for (t, tri) in k.triangles().iter().enumerate() {
        let v = tri.vertices();
        for (pos, sign) in [(2usize, 1.0), (1, -1.0), (0, 1.0)] {
            let mut face = v.clone();
            face.remove(pos);
            delta[(t, k.index_of(&Simplex::new(&face).unwrap()).unwrap())] = sign;
        }
    }
    let lambda = delta.clone().svd(true, true).solve(&target, 1e-12).unwrap();
    let residual = (&delta * &lambda - &target).norm();
    assert!(residual < 1e-9, "curvature not realizable: {residual}");
    let values = (0..ne).map(|i| rot2(lambda[i])).collect();
    DiscreteCocycle::new(k, 2, values).unwrap()
}

/// `Ω ⊕ 1`.
pub fn stabilize(omega: &DiscreteCocycle) -> DiscreteCocycle {
    let d = omega.rank();
    let values = omega
        .values()
        .iter()
        .map(|m| {
            let mut big = Mat::identity(d + 1, d + 1);
            big.view_mut((0, 0), (d, d)).copy_from(m);
            big
        })
        .collect();
    DiscreteCocycle::new(omega.complex().clone(), d + 1, values).unwrap()
}

/// Random `SO(d)` gauge `g` with `Ω_ij = g_iᵗ g_j` on all edges: an exact
/// cocycle.
pub fn gauge_cocycle<R: Rng>(k: Arc<SimplicialComplex>, d: usize, rng: &mut R) -> (DiscreteCocycle, Vec<Mat>) {
    let g: Vec<Mat> = (0..k.n_vertices()).map(|_| random_rotation(d, rng)).collect();
    let omega = DiscreteCocycle::from_fn(k, d, |i, j| g[i].transpose() * &g[j]).unwrap();
    (omega, g)
}

/// Full 2-skeleton on `n` vertices.
pub fn full_2_skeleton(n: usize) -> Arc<SimplicialComplex> {
    let mut tris = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            for c in b + 1..n {
                tris.push(Simplex::triangle(a, b, c).unwrap());
            }
        }
    }
    Arc::new(SimplicialComplex::from_maximal(n, tris).unwrap())
}
