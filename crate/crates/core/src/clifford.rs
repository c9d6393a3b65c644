//! The Clifford algebra `Cl(d)` of `R^d` with the positive convention
//! `e_i² = 1`, and the group `Pin(d)` generated by unit vectors.
//!
//! Blade encoding: bit `i` of a blade index is set iff generator `e_{i+1}`
//! occurs, generators written in increasing order. Index 0 is the unit `1`,
//! index `2^d − 1` the pseudoscalar `e_1 ⋯ e_d`.

use std::sync::Once;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::matgeo::{check_orthogonal, Mat};

/// Largest supported number of generators (dense storage is `2^d` doubles).
pub const MAX_DIM: usize = 12;

const UNIT_TOL: f64 = 1e-8;
const SCALAR_TOL: f64 = 1e-9;

/// Sign of the product of basis blades `a · b` (the result blade is `a ^ b`).
///
/// Moving each generator of `b` leftward past the larger generators of `a`
/// costs one transposition each; repeated generators square to `+1`.
#[inline]
pub fn blade_sign(a: usize, b: usize) -> f64 {
    let mut swaps = 0u32;
    let mut a = a >> 1;
    while a != 0 {
        swaps += (a & b).count_ones();
        a >>= 1;
    }
    if swaps % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Element of `Cl(d)`, stored densely over the `2^d` blades.
#[derive(Debug, Clone, PartialEq)]
pub struct CliffordElement {
    dim: usize,
    coeffs: Vec<f64>,
}

impl CliffordElement {
    pub fn zero(dim: usize) -> Self {
        assert!(dim <= MAX_DIM, "Cl({dim}) exceeds supported dimension");
        CliffordElement {
            dim,
            coeffs: vec![0.0; 1 << dim],
        }
    }

    pub fn one(dim: usize) -> Self {
        Self::blade(dim, 0, 1.0)
    }

    /// `coeff` times the basis blade with bitmask `mask`.
    pub fn blade(dim: usize, mask: usize, coeff: f64) -> Self {
        let mut x = Self::zero(dim);
        x.coeffs[mask] = coeff;
        x
    }

    /// Generator `e_i`, 1-based as in the usual notation.
    pub fn generator(dim: usize, i: usize) -> Self {
        assert!(i >= 1 && i <= dim);
        Self::blade(dim, 1 << (i - 1), 1.0)
    }

    /// The grade-1 element `Σ v_i e_i`.
    pub fn vector(v: &[f64]) -> Self {
        let mut x = Self::zero(v.len());
        for (i, &vi) in v.iter().enumerate() {
            x.coeffs[1 << i] = vi;
        }
        x
    }

    pub fn from_coeffs(dim: usize, coeffs: Vec<f64>) -> Result<Self> {
        if dim > MAX_DIM {
            return Err(Error::Unsupported(format!("Cl({dim})")));
        }
        if coeffs.len() != 1 << dim {
            return Err(Error::InvalidClifford(format!(
                "expected {} coefficients, got {}",
                1 << dim,
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(CliffordElement { dim, coeffs })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, mask: usize) -> f64 {
        self.coeffs[mask]
    }

    pub fn scalar(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch(format!(
                "Cl({}) · Cl({})",
                self.dim, other.dim
            )));
        }
        Ok(self.mul_unchecked(other))
    }

    pub(crate) fn mul_unchecked(&self, other: &Self) -> Self {
        let mut out = Self::zero(self.dim);
        for (a, &ca) in self.coeffs.iter().enumerate() {
            if ca == 0.0 {
                continue;
            }
            for (b, &cb) in other.coeffs.iter().enumerate() {
                if cb == 0.0 {
                    continue;
                }
                out.coeffs[a ^ b] += blade_sign(a, b) * ca * cb;
            }
        }
        out
    }

    /// Reversion: reverses the generator order within each blade.
    pub fn reverse(&self) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(mask, &c)| {
                let k = mask.count_ones();
                if (k * k.saturating_sub(1) / 2) % 2 == 0 {
                    c
                } else {
                    -c
                }
            })
            .collect();
        CliffordElement { dim: self.dim, coeffs }
    }

    /// Grade involution: negates odd blades.
    pub fn grade_involution(&self) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(mask, &c)| if mask.count_ones() % 2 == 0 { c } else { -c })
            .collect();
        CliffordElement { dim: self.dim, coeffs }
    }

    pub fn neg(&self) -> Self {
        CliffordElement {
            dim: self.dim,
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        CliffordElement {
            dim: self.dim,
            coeffs: self.coeffs.iter().map(|c| s * c).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        CliffordElement {
            dim: self.dim,
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect(),
        }
    }

    /// Euclidean norm of the coefficient vector.
    pub fn coeff_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// `Some(true)` for even, `Some(false)` for odd, `None` if mixed.
    pub fn homogeneous_parity(&self, tol: f64) -> Option<Parity> {
        let mut even = false;
        let mut odd = false;
        for (mask, c) in self.coeffs.iter().enumerate() {
            if c.abs() > tol {
                if mask.count_ones() % 2 == 0 {
                    even = true;
                } else {
                    odd = true;
                }
            }
        }
        match (even, odd) {
            (true, false) => Some(Parity::Even),
            (false, true) => Some(Parity::Odd),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

/// Element of `Pin(d)`.
///
/// When built from unit vectors (by [`pin_lift`] or products of lifts) the
/// ordered factor list is retained, which makes [`pin_project`] an exact
/// product of reflections and inversion a list reversal.
#[derive(Debug, Clone, PartialEq)]
pub struct PinElement {
    value: CliffordElement,
    parity: Parity,
    factors: Option<Vec<DVector<f64>>>,
}

impl PinElement {
    pub fn one(dim: usize) -> Self {
        PinElement {
            value: CliffordElement::one(dim),
            parity: Parity::Even,
            factors: Some(Vec::new()),
        }
    }

    /// Ordered product `v_1 ⋯ v_k` of unit vectors.
    pub fn from_unit_vectors(dim: usize, vectors: Vec<DVector<f64>>) -> Result<Self> {
        let mut value = CliffordElement::one(dim);
        for v in &vectors {
            if v.len() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "vector of length {} in Cl({dim})",
                    v.len()
                )));
            }
            if (v.norm() - 1.0).abs() > UNIT_TOL {
                return Err(Error::InvalidClifford(format!(
                    "factor of norm {} is not a unit vector",
                    v.norm()
                )));
            }
            value = value.mul_unchecked(&CliffordElement::vector(v.as_slice()));
        }
        let parity = if vectors.len() % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        };
        Ok(PinElement {
            value,
            parity,
            factors: Some(vectors),
        })
    }

    /// Wraps a homogeneous unit element (`x · reverse(x) = ±1`).
    pub fn from_clifford(value: CliffordElement) -> Result<Self> {
        let parity = value
            .homogeneous_parity(UNIT_TOL)
            .ok_or_else(|| Error::InvalidClifford("element is not homogeneous".into()))?;
        let norm = value.mul_unchecked(&value.reverse());
        let mut unit = CliffordElement::one(value.dim());
        if norm.scalar() < 0.0 {
            unit = unit.neg();
        }
        let defect = norm
            .coeffs()
            .iter()
            .zip(unit.coeffs())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if defect > UNIT_TOL {
            return Err(Error::InvalidClifford(format!(
                "not a unit element (defect {defect:e})"
            )));
        }
        Ok(PinElement {
            value,
            parity,
            factors: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.value.dim()
    }

    pub fn value(&self) -> &CliffordElement {
        &self.value
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub fn factors(&self) -> Option<&[DVector<f64>]> {
        self.factors.as_deref()
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        let value = self.value.mul(&other.value)?;
        let parity = if self.parity == other.parity {
            Parity::Even
        } else {
            Parity::Odd
        };
        let factors = match (&self.factors, &other.factors) {
            (Some(a), Some(b)) => Some(a.iter().chain(b).cloned().collect()),
            _ => None,
        };
        Ok(PinElement {
            value,
            parity,
            factors,
        })
    }

    /// Inverse; unit vectors are self-inverse, so this is the reversion.
    pub fn inverse(&self) -> Self {
        PinElement {
            value: self.value.reverse(),
            parity: self.parity,
            factors: self
                .factors
                .as_ref()
                .map(|f| f.iter().rev().cloned().collect()),
        }
    }

    /// `−p`. The factor list is dropped since it no longer multiplies out to
    /// the value.
    pub fn neg(&self) -> Self {
        PinElement {
            value: self.value.neg(),
            parity: self.parity,
            factors: None,
        }
    }
}

/// Clifford product `x · y`.
pub fn clifford_mul(x: &CliffordElement, y: &CliffordElement) -> Result<CliffordElement> {
    x.mul(y)
}

/// Lifts an orthogonal matrix to `Pin(d)` through a Householder QR
/// factorization `Ω = H_1 ⋯ H_k R`, with `R` diagonal with entries `±1`.
///
/// Each Householder vector becomes a generating unit vector, each `−1` on the
/// diagonal of `R` the corresponding basis vector.
pub fn pin_lift(omega: &Mat) -> Result<PinElement> {
    check_orthogonal(omega)?;
    let d = omega.nrows();
    let mut work = omega.clone();
    let mut factors = Vec::new();
    for c in 0..d.saturating_sub(1) {
        let x = work.view((c, c), (d - c, 1)).clone_owned();
        let tail: f64 = x.rows(1, d - c - 1).norm_squared();
        if tail.sqrt() < 1e-15 {
            continue;
        }
        let norm = x.norm();
        let alpha = if x[0] >= 0.0 { -norm } else { norm };
        let mut v = DVector::zeros(d);
        for r in 0..d - c {
            v[c + r] = x[r];
        }
        v[c] -= alpha;
        let v = v.normalize();
        // work ← (I − 2vvᵗ) work
        let vt_work = v.transpose() * &work;
        work -= (&v * vt_work) * 2.0;
        factors.push(v);
    }
    for i in 0..d {
        if work[(i, i)] < 0.0 {
            let mut e = DVector::zeros(d);
            e[i] = 1.0;
            factors.push(e);
        }
    }
    PinElement::from_unit_vectors(d, factors)
}

/// Reflection `x ↦ x − 2(v·x)v` about the hyperplane orthogonal to `v`.
fn reflection(v: &DVector<f64>) -> Mat {
    let d = v.len();
    Mat::identity(d, d) - (v * v.transpose()) * 2.0
}

/// The covering map `ρ : Pin(d) → O(d)`.
pub fn pin_project(p: &PinElement) -> Result<Mat> {
    let d = p.dim();
    if let Some(factors) = p.factors() {
        let mut m = Mat::identity(d, d);
        for v in factors {
            m *= reflection(v);
        }
        return Ok(m);
    }
    // twisted adjoint action x ↦ α(p) x p⁻¹ on grade-1 elements
    let unit = p.value.mul_unchecked(&p.value.reverse()).scalar();
    if (unit.abs() - 1.0).abs() > UNIT_TOL {
        return Err(Error::InvalidClifford(format!("non-unit element (norm {unit})")));
    }
    let left = p.value.grade_involution();
    let right = p.value.reverse().scale(1.0 / unit);
    let mut m = Mat::zeros(d, d);
    for j in 0..d {
        let img = left
            .mul_unchecked(&CliffordElement::generator(d, j + 1))
            .mul_unchecked(&right);
        for i in 0..d {
            m[(i, j)] = img.coeff(1 << i);
        }
    }
    Ok(m)
}

static HIGH_DIM_WARNING: Once = Once::new();

/// Which of `±1` is closest to a `Spin(d)` element: the sign of its scalar
/// coefficient.
///
/// For `d ≤ 4` this is exactly the geodesic decision (see
/// [`spin_geodesic_dist`]). For larger `d` the scalar sign is used as a
/// heuristic and a warning is logged once.
pub fn closest_sign(p: &PinElement) -> Result<i8> {
    if p.parity() == Parity::Odd {
        return Err(Error::SignAmbiguity(
            "odd element lies outside Spin(d); both ±1 are at infinite distance".into(),
        ));
    }
    let c0 = p.value().scalar();
    if c0.abs() <= SCALAR_TOL {
        return Err(Error::SignAmbiguity(format!(
            "scalar coefficient {c0:e} too close to zero"
        )));
    }
    if p.dim() > 4 {
        HIGH_DIM_WARNING.call_once(|| {
            log::warn!(
                "closest_sign for d = {} uses the scalar-coefficient rule, which is only verified for d <= 4",
                p.dim()
            )
        });
    }
    Ok(if c0 > 0.0 { 1 } else { -1 })
}

fn clamped_acos(x: f64) -> f64 {
    x.clamp(-1.0, 1.0).acos()
}

/// Geodesic distance in `Spin(d)` for `d ∈ {2, 3, 4}`, in the metric where
/// each simple factor is the unit sphere of its coefficient coordinates.
///
/// * `d = 2`: `Spin(2)` is the unit circle in `(c_0, c_12)`.
/// * `d = 3`: `Spin(3)` is the unit 3-sphere of even coefficients.
/// * `d = 4`: `Spin(4) ≅ S³ × S³`, split by the central idempotents
///   `(1 ± e_1234)/2`; factor angles are `arccos(c_0 ± c_1234)` and the
///   distance is their Pythagorean combination.
pub fn spin_geodesic_dist(p: &PinElement, q: &PinElement) -> Result<f64> {
    let d = p.dim();
    if q.dim() != d {
        return Err(Error::DimensionMismatch(format!("Spin({d}) vs Spin({})", q.dim())));
    }
    if !(2..=4).contains(&d) {
        return Err(Error::Unsupported(format!("geodesic distance on Spin({d})")));
    }
    if p.parity() != Parity::Even || q.parity() != Parity::Even {
        return Err(Error::InvalidClifford("geodesic distance needs Spin elements".into()));
    }
    // bi-invariance: d(p, q) = d(1, p⁻¹q)
    let x = p.inverse().mul(q)?;
    let v = x.value();
    Ok(match d {
        2 | 3 => clamped_acos(v.scalar()),
        _ => {
            let pseudo = v.coeff(0b1111);
            let left = clamped_acos(v.scalar() + pseudo);
            let right = clamped_acos(v.scalar() - pseudo);
            (left * left + right * right).sqrt()
        }
    })
}
