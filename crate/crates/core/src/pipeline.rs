//! Locating a characteristic class of an approximate cocycle in the
//! persistent cohomology of a filtration.
//!
//! The class is computed on the largest `K_r` on which the cocycle is still
//! `ε`-approximate, decomposed in the persistence basis at that scale, and
//! the bars with nonzero coefficient are reported.

use std::sync::Arc;

use crate::bundle::{epsilon_death, triangle_defects, violates, DiscreteCocycle};
use crate::charclass::{euler, reduce_mod, sw1, sw2, CharClassCocycle, ClassKind, SW1_MAX_RADIUS, SW2_EU_MAX_RADIUS};
use crate::complex::Filtration;
use crate::error::{Error, Result};
use crate::persistence::{decompose_class, epsilon_span, ClassDecomposition, PersistenceDiagram};

/// Degree of the cohomology class.
pub fn class_degree(kind: ClassKind) -> usize {
    match kind {
        ClassKind::Sw1 => 1,
        ClassKind::Sw2 | ClassKind::Euler => 2,
    }
}

/// Largest `ε` for which the algorithm is guaranteed to return a cocycle.
pub fn class_regime(kind: ClassKind) -> f64 {
    match kind {
        ClassKind::Sw1 => SW1_MAX_RADIUS,
        ClassKind::Sw2 | ClassKind::Euler => SW2_EU_MAX_RADIUS,
    }
}

#[derive(Debug, Clone)]
pub struct ClassReport {
    pub kind: ClassKind,
    pub eps: f64,
    /// `ε`-death of the cocycle.
    pub death: f64,
    /// Scale at which the class was computed: the last filtration value
    /// below the death, or the threshold when no triangle violates `ε`.
    pub scale: Option<f64>,
    /// Ids of the bars with `birth <= death <= bar death`.
    pub span: Vec<usize>,
    /// The class over `Z/p` on `K_scale`.
    pub class: Option<CharClassCocycle>,
    pub decomposition: Option<ClassDecomposition>,
    /// Most persistent bar of the class degree, infinite bars capped at the
    /// filtration threshold.
    pub most_persistent: Option<usize>,
}

impl ClassReport {
    /// Bars with a nonzero coefficient.
    pub fn decorated(&self) -> Vec<usize> {
        self.decomposition.as_ref().map(ClassDecomposition::nonzero_bars).unwrap_or_default()
    }

    pub fn is_nonzero(&self) -> bool {
        !self.decorated().is_empty()
    }

    /// Whether the most persistent bar carries a nonzero coefficient.
    pub fn most_persistent_decorated(&self) -> bool {
        self.most_persistent.is_some_and(|b| self.decorated().contains(&b))
    }

    pub fn span_is_empty(&self) -> bool {
        self.span.is_empty()
    }
}

/// The largest filtration value strictly below `death`, or the threshold if
/// the cocycle never stops being approximate.
fn scale_below(filtration: &Filtration, death: f64, violated: bool) -> Option<f64> {
    if !violated {
        return Some(filtration.threshold());
    }
    filtration.values().into_iter().filter(|&v| v < death).last()
}

/// Computes `kind` of `omega` at its `eps`-death and decomposes it in the
/// basis of `diag`, whose filtration must live on the complex of `omega`.
pub fn analyze_class(
    diag: &PersistenceDiagram,
    omega: &DiscreteCocycle,
    kind: ClassKind,
    eps: f64,
) -> Result<ClassReport> {
    let regime = class_regime(kind);
    if !(eps > 0.0 && eps <= regime) {
        return Err(Error::Regime(format!("{kind} needs 0 < eps <= {regime}, got {eps}")));
    }
    let degree = class_degree(kind);
    if diag.max_degree() < degree {
        return Err(Error::DimensionMismatch(format!(
            "diagram computed up to degree {}, {kind} needs {degree}",
            diag.max_degree()
        )));
    }
    let filtration = diag.filtration();
    let death = epsilon_death(omega, filtration, eps)?;
    let span: Vec<usize> = epsilon_span(diag, death, degree).iter().map(|b| b.id).collect();
    let most_persistent = diag.most_persistent(degree).map(|b| b.id);
    let violated = triangle_defects(omega).iter().any(|&d| violates(d, eps));
    let Some(scale) = scale_below(filtration, death, violated) else {
        return Ok(ClassReport {
            kind,
            eps,
            death,
            scale: None,
            span,
            class: None,
            decomposition: None,
            most_persistent,
        });
    };
    let sub = Arc::new(filtration.complex_at(scale));
    let restricted = omega.restrict(sub)?;
    let class = match kind {
        ClassKind::Sw1 => sw1(&restricted)?,
        ClassKind::Sw2 => sw2(&restricted)?,
        ClassKind::Euler => reduce_mod(&euler(&restricted)?, diag.prime()),
    };
    let class = match (kind, diag.prime()) {
        (ClassKind::Euler, _) | (_, 2) => class,
        (_, p) => {
            return Err(Error::Inconsistent(format!(
                "{kind} is a Z/2 class but the diagram is over Z/{p}"
            )))
        }
    };
    let decomposition = decompose_class(class.cochain(), diag, scale)?;
    Ok(ClassReport {
        kind,
        eps,
        death,
        scale: Some(scale),
        span,
        class: Some(class),
        decomposition: Some(decomposition),
        most_persistent,
    })
}

/// Persistence degree and prime needed for `kind` with Euler classes reduced
/// modulo `euler_prime`.
pub fn required_prime(kind: ClassKind, euler_prime: u32) -> u32 {
    match kind {
        ClassKind::Euler => euler_prime,
        _ => 2,
    }
}

/// `Arc` of a filtration truncated to the dimensions persistence needs for
/// `degree`.
pub fn persistence_filtration(f: &Arc<Filtration>, degree: usize) -> Arc<Filtration> {
    if f.complex().dim() <= degree + 1 {
        f.clone()
    } else {
        Arc::new(f.skeleton(degree + 1))
    }
}
