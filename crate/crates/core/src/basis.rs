//! Hierarchical basis functions of selectable degree.
//!
//! A level-`l` knot with degree `p >= 2` uses the Lagrange polynomial through
//! the knot and `p` of its ancestors: the two ancestors bounding its support
//! and then the `p - 2` nearest remaining ones. The polynomial is cut off
//! outside the support. Degree 1 gives the classical hat function and the root
//! carries the constant function.

use smallvec::SmallVec;
use thiserror::Error;

use crate::knot::{Knot1D, MultiKnot, Support1D};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BasisError {
    #[error("degree {degree} is not admissible for a knot of level {level}")]
    InadmissibleDegree { level: u8, degree: u8 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Largest degree usable at `knot` under the cap `p_max`.
pub fn max_degree(knot: Knot1D, p_max: u8) -> u8 {
    match knot.level() {
        0 => 0,
        l => l.min(p_max.max(1)),
    }
}

/// True when a knot of this level may carry a basis of this degree.
pub fn is_admissible(knot: Knot1D, degree: u8) -> bool {
    match knot.level() {
        0 => degree == 0,
        l => degree >= 1 && degree <= l,
    }
}

/// The `p` ancestors that define a degree-`p` basis at `k`: support endpoints
/// first (left, right), then the nearest further ancestors. Equidistant
/// ancestors are ordered deeper level first.
pub fn anchor_knots(k: Knot1D, p: u8) -> Result<Vec<Knot1D>, BasisError> {
    if p < 2 || p > k.level() {
        return Err(BasisError::InadmissibleDegree {
            level: k.level(),
            degree: p,
        });
    }
    let Support1D { lo, hi } = k.support();
    let x = k.position();
    let ancestors = k.ancestors();
    let left = ancestors.iter().find(|a| a.position() == lo);
    let right = ancestors.iter().find(|a| a.position() == hi);
    let (Some(&left), Some(&right)) = (left, right) else {
        unreachable!("support endpoints of a level >= 2 knot are ancestors");
    };
    let mut rest: Vec<Knot1D> = ancestors
        .into_iter()
        .filter(|a| *a != left && *a != right)
        .collect();
    // ancestors come ordered deepest first, and the sort is stable
    rest.sort_by(|a, b| {
        (a.position() - x)
            .abs()
            .total_cmp(&(b.position() - x).abs())
    });
    let mut out = vec![left, right];
    out.extend(rest.into_iter().take(p as usize - 2));
    Ok(out)
}

/// Anchor coordinates, see [`anchor_knots`].
pub fn anchors(k: Knot1D, p: u8) -> Result<Vec<f64>, BasisError> {
    Ok(anchor_knots(k, p)?.iter().map(Knot1D::position).collect())
}

/// A one-dimensional knot together with its chosen degree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct BasisSpec1D {
    knot: Knot1D,
    degree: u8,
}

impl BasisSpec1D {
    pub fn new(knot: Knot1D, degree: u8) -> Result<Self, BasisError> {
        if !is_admissible(knot, degree) {
            return Err(BasisError::InadmissibleDegree {
                level: knot.level(),
                degree,
            });
        }
        Ok(BasisSpec1D { knot, degree })
    }

    pub fn knot(&self) -> Knot1D {
        self.knot
    }

    pub fn degree(&self) -> u8 {
        self.degree
    }
}

/// Evaluates a one-dimensional basis function.
pub fn eval_basis_1d(spec: &BasisSpec1D, x: f64) -> f64 {
    LocalBasis::new(spec).eval(x)
}

/// Per-dimension basis specs aligned with a [`MultiKnot`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BasisSpecNd {
    components: Vec<BasisSpec1D>,
}

impl BasisSpecNd {
    pub fn new(knot: &MultiKnot, degrees: &[u8]) -> Result<Self, BasisError> {
        if knot.dim() != degrees.len() {
            return Err(BasisError::DimensionMismatch {
                expected: knot.dim(),
                got: degrees.len(),
            });
        }
        let components = knot
            .components()
            .iter()
            .zip(degrees)
            .map(|(&k, &p)| BasisSpec1D::new(k, p))
            .collect::<Result<_, _>>()?;
        Ok(BasisSpecNd { components })
    }

    pub fn components(&self) -> &[BasisSpec1D] {
        &self.components
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn degrees(&self) -> Vec<u8> {
        self.components.iter().map(|c| c.degree).collect()
    }

    pub fn degree(&self, d: usize) -> u8 {
        self.components[d].degree
    }

    pub fn knot(&self) -> MultiKnot {
        MultiKnot::new(self.components.iter().map(|c| c.knot).collect())
    }

    pub(crate) fn set_component(&mut self, d: usize, spec: BasisSpec1D) {
        self.components[d] = spec;
    }

    pub fn is_aligned_with(&self, knot: &MultiKnot) -> bool {
        knot.dim() == self.dim()
            && knot
                .components()
                .iter()
                .zip(&self.components)
                .all(|(k, c)| *k == c.knot)
    }
}

/// Tensor product basis value at `x` (reference coordinates).
pub fn eval_basis_nd(spec: &BasisSpecNd, knot: &MultiKnot, x: &[f64]) -> Result<f64, BasisError> {
    if x.len() != knot.dim() {
        return Err(BasisError::DimensionMismatch {
            expected: knot.dim(),
            got: x.len(),
        });
    }
    if !spec.is_aligned_with(knot) {
        return Err(BasisError::DimensionMismatch {
            expected: knot.dim(),
            got: spec.dim(),
        });
    }
    Ok(TensorBasis::new(spec).eval(x))
}

/// Precomputed form of a [`BasisSpec1D`] for repeated evaluation.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct LocalBasis {
    support: Support1D,
    position: f64,
    kind: LocalKind,
}

#[derive(Debug, Clone, PartialEq)]
enum LocalKind {
    Constant,
    /// Linear on a half interval, vanishing at `zero`.
    Ramp { zero: f64 },
    Hat { half_width: f64 },
    Lagrange {
        anchors: SmallVec<[f64; 6]>,
        denom: f64,
    },
}

impl LocalBasis {
    pub(crate) fn new(spec: &BasisSpec1D) -> Self {
        let knot = spec.knot;
        let support = knot.support();
        let position = knot.position();
        let kind = match (knot.level(), spec.degree) {
            (0, _) => LocalKind::Constant,
            (1, _) => LocalKind::Ramp { zero: 0.0 },
            (_, 1) => LocalKind::Hat {
                half_width: 0.5 * support.width(),
            },
            (_, p) => {
                let anchors: SmallVec<[f64; 6]> = anchors(knot, p)
                    .expect("admissible spec")
                    .into_iter()
                    .collect();
                let denom = anchors.iter().map(|a| position - a).product();
                LocalKind::Lagrange { anchors, denom }
            }
        };
        LocalBasis {
            support,
            position,
            kind,
        }
    }

    #[inline]
    pub(crate) fn eval(&self, x: f64) -> f64 {
        if !self.support.contains(x) {
            return 0.0;
        }
        match &self.kind {
            LocalKind::Constant => 1.0,
            LocalKind::Ramp { zero } => (x - zero) / (self.position - zero),
            LocalKind::Hat { half_width } => 1.0 - (x - self.position).abs() / half_width,
            LocalKind::Lagrange { anchors, denom } => {
                anchors.iter().map(|a| x - a).product::<f64>() / denom
            }
        }
    }
}

/// Precomputed form of a [`BasisSpecNd`].
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct TensorBasis {
    factors: Vec<LocalBasis>,
}

impl TensorBasis {
    pub(crate) fn new(spec: &BasisSpecNd) -> Self {
        TensorBasis {
            factors: spec.components.iter().map(LocalBasis::new).collect(),
        }
    }

    pub(crate) fn set_factor(&mut self, d: usize, spec: &BasisSpec1D) {
        self.factors[d] = LocalBasis::new(spec);
    }

    #[inline]
    pub(crate) fn support_contains(&self, x: &[f64]) -> bool {
        self.factors
            .iter()
            .zip(x)
            .all(|(f, &xi)| f.support.contains(xi))
    }

    #[inline]
    pub(crate) fn eval(&self, x: &[f64]) -> f64 {
        let mut v = 1.0;
        for (f, &xi) in self.factors.iter().zip(x) {
            v *= f.eval(xi);
            if v == 0.0 {
                return 0.0;
            }
        }
        v
    }
}
