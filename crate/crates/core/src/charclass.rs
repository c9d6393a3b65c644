//! First and second Stiefel-Whitney classes and the Euler class of a
//! discrete approximate cocycle.
//!
//! Each algorithm lifts edge values once (determinant, angle in `R`, or Pin
//! element), evaluates the lifted cocycle condition on every sorted triangle
//! `i < j < k` as `Λ_ij Λ_jk Λ_ik⁻¹`, and rounds to the closest element of the
//! kernel of the lift.

use std::fmt;
use std::io::{BufRead, Write};
use std::sync::Arc;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::bundle::{consistency_radius, violates, write_cocycle, DiscreteCocycle, DEFECT_TOL};
use crate::clifford::{closest_sign, pin_lift, PinElement};
use crate::complex::{Cochain, Ring, Simplex, SimplicialComplex};
use crate::error::{Error, Result};
use crate::matgeo::{so2_lift, Rotation2};

/// Largest consistency radius accepted by [`sw1`].
pub const SW1_MAX_RADIUS: f64 = 2.0;
/// Largest consistency radius accepted by [`sw2`] and [`euler`].
pub const SW2_EU_MAX_RADIUS: f64 = 1.0;
const ROUNDING_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassKind {
    Sw1,
    Sw2,
    Euler,
}

impl fmt::Display for ClassKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClassKind::Sw1 => "sw1",
            ClassKind::Sw2 => "sw2",
            ClassKind::Euler => "eu",
        })
    }
}

/// A characteristic class representative together with where it came from.
#[derive(Debug, Clone)]
pub struct CharClassCocycle {
    pub kind: ClassKind,
    pub cochain: Cochain,
    /// Consistency radius of the input cocycle.
    pub radius: f64,
    /// SHA-256 of the serialized input cocycle.
    pub input_hash: String,
}

impl CharClassCocycle {
    pub fn cochain(&self) -> &Cochain {
        &self.cochain
    }

    pub fn is_zero_cochain(&self) -> bool {
        self.cochain.is_zero()
    }
}

fn input_hash(omega: &DiscreteCocycle) -> String {
    let mut buf = Vec::new();
    write_cocycle(omega, &mut buf).expect("writing to memory");
    hex::encode(Sha256::digest(&buf))
}

fn check_radius(omega: &DiscreteCocycle, max: f64, strict: bool, what: &str) -> Result<f64> {
    let r = consistency_radius(omega);
    let bad = if strict { violates(r, max) } else { r > max + DEFECT_TOL };
    if bad {
        let cmp = if strict { "<" } else { "<=" };
        return Err(Error::Regime(format!(
            "{what} needs consistency radius {cmp} {max}, got {r}"
        )));
    }
    Ok(r)
}

fn finish(kind: ClassKind, cochain: Cochain, omega: &DiscreteCocycle, radius: f64) -> Result<CharClassCocycle> {
    if cochain.degree() < omega.complex().dim() && !cochain.is_cocycle() {
        return Err(Error::Inconsistent(format!("{kind} representative is not a cocycle")));
    }
    Ok(CharClassCocycle {
        kind,
        cochain,
        radius,
        input_hash: input_hash(omega),
    })
}

/// `sw₁(Ω)_ij = 1` iff `det Ω_ji = −1`.
pub fn sw1(omega: &DiscreteCocycle) -> Result<CharClassCocycle> {
    let radius = check_radius(omega, SW1_MAX_RADIUS, true, "sw1")?;
    let entries = omega
        .values()
        .iter()
        .enumerate()
        .filter(|(_, m)| m.determinant() < 0.0)
        .map(|(e, _)| (e, 1));
    let cochain = Cochain::from_entries(omega.complex().clone(), 1, Ring::Z2, entries)?;
    finish(ClassKind::Sw1, cochain, omega, radius)
}

/// Euler class with principal angle lifts in `[−1/2, 1/2)`.
pub fn euler(omega: &DiscreteCocycle) -> Result<CharClassCocycle> {
    euler_with_lifts(omega, &vec![0; omega.values().len()])
}

/// Euler class with the lift of edge `e` shifted by the integer `shifts[e]`.
pub fn euler_with_lifts(omega: &DiscreteCocycle, shifts: &[i64]) -> Result<CharClassCocycle> {
    if omega.rank() != 2 {
        return Err(Error::DimensionMismatch(format!(
            "Euler class needs rank 2, got {}",
            omega.rank()
        )));
    }
    if shifts.len() != omega.values().len() {
        return Err(Error::shape(omega.values().len().to_string(), shifts.len().to_string()));
    }
    let complex = omega.complex();
    let mut lifts = Vec::with_capacity(shifts.len());
    for ((m, e), &s) in omega.values().iter().zip(complex.edges()).zip(shifts) {
        let rot = Rotation2::from_dmatrix(m).map_err(|_| {
            Error::Regime(format!("edge {e:?} is not in SO(2) (det {})", m.determinant()))
        })?;
        lifts.push(so2_lift(&rot) + s as f64);
    }
    let radius = check_radius(omega, SW2_EU_MAX_RADIUS, false, "eu")?;
    let edge = |a: usize, b: usize| {
        let s = crate::complex::Simplex::edge(a, b).expect("distinct");
        complex.index_of(&s).expect("face of a triangle")
    };
    let values = complex
        .triangles()
        .par_iter()
        .map(|t| {
            let v = t.vertices();
            let x = lifts[edge(v[0], v[1])] + lifts[edge(v[1], v[2])] - lifts[edge(v[0], v[2])];
            let rounded = x.round();
            if ((x - x.floor()) - 0.5).abs() < ROUNDING_TOL {
                return Err(Error::RoundingAmbiguity { simplex: v, value: x });
            }
            Ok(rounded as i64)
        })
        .collect::<Result<Vec<i64>>>()?;
    let cochain = Cochain::from_entries(complex.clone(), 2, Ring::Integers, values.into_iter().enumerate())?;
    finish(ClassKind::Euler, cochain, omega, radius)
}

/// Second Stiefel-Whitney class with the canonical Pin lifts.
pub fn sw2(omega: &DiscreteCocycle) -> Result<CharClassCocycle> {
    sw2_with_lifts(omega, &vec![false; omega.values().len()])
}

/// Second Stiefel-Whitney class with the lift of edge `e` negated when
/// `flips[e]` is set.
pub fn sw2_with_lifts(omega: &DiscreteCocycle, flips: &[bool]) -> Result<CharClassCocycle> {
    if flips.len() != omega.values().len() {
        return Err(Error::shape(omega.values().len().to_string(), flips.len().to_string()));
    }
    let radius = check_radius(omega, SW2_EU_MAX_RADIUS, false, "sw2")?;
    let complex = omega.complex();
    let lifts = omega
        .values()
        .par_iter()
        .zip(flips)
        .map(|(m, &f)| pin_lift(m).map(|p| if f { p.neg() } else { p }))
        .collect::<Result<Vec<PinElement>>>()?;
    let edge = |a: usize, b: usize| {
        let s = crate::complex::Simplex::edge(a, b).expect("distinct");
        complex.index_of(&s).expect("face of a triangle")
    };
    let values = complex
        .triangles()
        .par_iter()
        .map(|t| {
            let v = t.vertices();
            let prod = lifts[edge(v[0], v[1])]
                .mul(&lifts[edge(v[1], v[2])])?
                .mul(&lifts[edge(v[0], v[2])].inverse())?;
            Ok(i64::from(closest_sign(&prod)? < 0))
        })
        .collect::<Result<Vec<i64>>>()?;
    let cochain = Cochain::from_entries(complex.clone(), 2, Ring::Z2, values.into_iter().enumerate())?;
    finish(ClassKind::Sw2, cochain, omega, radius)
}

/// Entrywise reduction of an integer class modulo `p`.
pub fn reduce_mod(z: &CharClassCocycle, p: u32) -> CharClassCocycle {
    CharClassCocycle {
        cochain: z.cochain.reduce_mod(p),
        ..z.clone()
    }
}

/// CSV with columns `v0,…,vk,value`, one row per `k`-simplex.
pub fn write_class_csv<W: Write>(z: &CharClassCocycle, mut out: W) -> std::io::Result<()> {
    let k = z.cochain.degree();
    let header: Vec<String> = (0..=k).map(|i| format!("v{i}")).collect();
    writeln!(out, "{},value", header.join(","))?;
    let complex = z.cochain.complex();
    for (i, s) in complex.simplices(k).iter().enumerate() {
        let verts: Vec<String> = s.vertices().iter().map(ToString::to_string).collect();
        writeln!(out, "{},{}", verts.join(","), z.cochain.value_at(i))?;
    }
    Ok(())
}

/// Reads the format of [`write_class_csv`] into a cochain on `complex`; the
/// degree is taken from the header.
pub fn read_class_csv<R: BufRead>(input: R, complex: Arc<SimplicialComplex>, ring: Ring) -> Result<Cochain> {
    let mut lines = input.lines().enumerate();
    let perr = |line: usize, msg: String| Error::Parse { line, msg };
    let degree = match lines.next() {
        Some((_, Ok(h))) => h.split(',').count().checked_sub(2).ok_or_else(|| perr(1, "header too short".into()))?,
        Some((_, Err(e))) => return Err(perr(1, e.to_string())),
        None => return Err(perr(1, "empty class file".into())),
    };
    let mut values = Vec::new();
    for (n, line) in lines {
        let line = line.map_err(|e| perr(n + 1, e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<i64> = line
            .split(',')
            .map(|f| f.trim().parse::<i64>().map_err(|_| perr(n + 1, format!("bad integer {f:?}"))))
            .collect::<Result<_>>()?;
        if fields.len() != degree + 2 || fields[..=degree].iter().any(|&v| v < 0) {
            return Err(perr(n + 1, format!("expected {} vertices and a value", degree + 1)));
        }
        let verts: Vec<usize> = fields[..=degree].iter().map(|&v| v as usize).collect();
        values.push((Simplex::new(&verts)?, fields[degree + 1]));
    }
    Cochain::from_simplices(complex, degree, ring, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::complex::{Simplex, SimplicialComplex};
    use crate::matgeo::{random_orthogonal, so2_from_angle, Mat};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn triangle() -> Arc<SimplicialComplex> {
        Arc::new(SimplicialComplex::from_maximal(3, [Simplex::triangle(0, 1, 2).unwrap()]).unwrap())
    }

    fn rot(r: f64) -> Mat {
        so2_from_angle(r).to_dmatrix()
    }

    #[test]
    fn identity_cocycle_has_zero_classes() {
        let omega = DiscreteCocycle::identity(triangle(), 2);
        assert!(sw1(&omega).unwrap().is_zero_cochain());
        assert!(euler(&omega).unwrap().is_zero_cochain());
        assert!(sw2(&omega).unwrap().is_zero_cochain());
    }

    #[test]
    fn sw1_reads_determinants() {
        let k = triangle();
        let reflect = Mat::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, 1.0]));
        // two reflections keep the triangle consistent
        let omega = DiscreteCocycle::from_fn(k, 2, |i, j| match (i, j) {
            (0, 1) | (0, 2) => reflect.clone(),
            _ => Mat::identity(2, 2),
        })
        .unwrap();
        let z = sw1(&omega).unwrap();
        assert_eq!(z.cochain.to_dense(), vec![1, 1, 0]);
        assert!(z.cochain.is_cocycle());
        assert_eq!(z.input_hash.len(), 64);
    }

    #[test]
    fn sw1_rejects_large_radius() {
        let k = triangle();
        let omega = DiscreteCocycle::from_fn(k, 1, |i, j| Mat::from_element(1, 1, if (i, j) == (0, 2) { -1.0 } else { 1.0 }))
            .unwrap();
        assert!(matches!(sw1(&omega), Err(Error::Regime(_))));
    }

    #[test]
    fn euler_rounds_thirds() {
        let omega = DiscreteCocycle::from_fn(triangle(), 2, |i, j| match (i, j) {
            (0, 2) => rot(-1.0 / 3.0),
            _ => rot(1.0 / 3.0),
        })
        .unwrap();
        let z = euler(&omega).unwrap();
        assert_eq!(z.cochain.to_dense(), vec![1]);
        assert_eq!(reduce_mod(&z, 3).cochain.to_dense(), vec![1]);
    }

    #[test]
    fn euler_rejects_reflections_and_bad_rank() {
        let reflect = Mat::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, 1.0]));
        let omega = DiscreteCocycle::from_fn(triangle(), 2, |_, _| reflect.clone()).unwrap();
        assert!(matches!(euler(&omega), Err(Error::Regime(_))));
        let omega = DiscreteCocycle::identity(triangle(), 3);
        assert!(matches!(euler(&omega), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn sw2_of_half_turns() {
        let omega = DiscreteCocycle::from_fn(triangle(), 2, |i, j| match (i, j) {
            (0, 2) => Mat::identity(2, 2),
            _ => rot(0.5),
        })
        .unwrap();
        assert_eq!(sw2(&omega).unwrap().cochain.to_dense(), vec![1]);
    }

    #[test]
    fn lift_changes_are_coboundaries_on_a_triangle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for d in 2..=4 {
            let g: Vec<Mat> = (0..3).map(|_| random_orthogonal(d, &mut rng)).collect();
            let omega = DiscreteCocycle::from_fn(triangle(), d, |i, j| g[i].transpose() * &g[j]).unwrap();
            let base = sw2(&omega).unwrap().cochain.to_dense()[0];
            let flips: Vec<bool> = (0..3).map(|_| rng.gen()).collect();
            let flipped = sw2_with_lifts(&omega, &flips).unwrap().cochain.to_dense()[0];
            // flipping the lifts of the three edges changes the value by their sum
            let parity = flips.iter().filter(|&&f| f).count() as i64 % 2;
            assert_eq!((base + parity) % 2, flipped);
        }
    }

    #[test]
    fn class_csv_lists_every_simplex() {
        let omega = DiscreteCocycle::identity(triangle(), 2);
        let mut buf = Vec::new();
        write_class_csv(&sw1(&omega).unwrap(), &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "v0,v1,value\n0,1,0\n0,2,0\n1,2,0\n");
    }

    #[test]
    fn class_csv_round_trip() {
        let omega = DiscreteCocycle::from_fn(triangle(), 2, |i, j| match (i, j) {
            (0, 2) => Mat::identity(2, 2),
            _ => rot(0.5),
        })
        .unwrap();
        let z = sw2(&omega).unwrap();
        let mut buf = Vec::new();
        write_class_csv(&z, &mut buf).unwrap();
        let back = read_class_csv(&buf[..], triangle(), Ring::Z2).unwrap();
        assert_eq!(&back, z.cochain());
        assert!(read_class_csv(&b"v0,v1,v2,value\n0,1,x\n"[..], triangle(), Ring::Z2).is_err());
    }
}
