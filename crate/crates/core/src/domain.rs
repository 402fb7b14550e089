//! Axis-aligned boxes and the affine map onto the reference cube `[-1, 1]^N`.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("domain needs at least one dimension")]
    Empty,
    #[error("invalid bounds [{lo}, {hi}] on axis {axis}")]
    InvalidBounds { axis: usize, lo: f64, hi: f64 },
    #[error("point has {got} coordinates, domain has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("coordinate {value} on axis {axis} lies outside [{lo}, {hi}]")]
    OutOfDomain {
        axis: usize,
        value: f64,
        lo: f64,
        hi: f64,
    },
}

/// Product of closed intervals `[lo_d, hi_d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Domain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self, DomainError> {
        if lo.is_empty() {
            return Err(DomainError::Empty);
        }
        if lo.len() != hi.len() {
            return Err(DomainError::DimensionMismatch {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        for (axis, (&l, &h)) in lo.iter().zip(&hi).enumerate() {
            if !(l.is_finite() && h.is_finite() && l < h) {
                return Err(DomainError::InvalidBounds { axis, lo: l, hi: h });
            }
        }
        Ok(Domain { lo, hi })
    }

    /// `[-1, 1]^dim`.
    pub fn reference(dim: usize) -> Self {
        Domain {
            lo: vec![-1.0; dim],
            hi: vec![1.0; dim],
        }
    }

    /// `[0, 1]^dim`.
    pub fn unit(dim: usize) -> Self {
        Domain {
            lo: vec![0.0; dim],
            hi: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn is_reference(&self) -> bool {
        self.lo.iter().all(|&l| l == -1.0) && self.hi.iter().all(|&h| h == 1.0)
    }

    pub fn check(&self, x: &[f64]) -> Result<(), DomainError> {
        if x.len() != self.dim() {
            return Err(DomainError::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        for (axis, ((&v, &lo), &hi)) in x.iter().zip(&self.lo).zip(&self.hi).enumerate() {
            // NaN fails both comparisons
            if !(lo <= v && v <= hi) {
                return Err(DomainError::OutOfDomain {
                    axis,
                    value: v,
                    lo,
                    hi,
                });
            }
        }
        Ok(())
    }

    /// Native point to reference coordinates. Does not check bounds.
    pub fn to_reference(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        self.to_reference_into(x, &mut y);
        y
    }

    pub fn to_reference_into(&self, x: &[f64], y: &mut [f64]) {
        if self.is_reference() {
            y.copy_from_slice(x);
            return;
        }
        for (d, (yi, &xi)) in y.iter_mut().zip(x).enumerate() {
            let (lo, hi) = (self.lo[d], self.hi[d]);
            *yi = (2.0 * (xi - lo) / (hi - lo) - 1.0).clamp(-1.0, 1.0);
        }
    }

    /// Reference point to native coordinates.
    pub fn from_reference(&self, y: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; y.len()];
        self.from_reference_into(y, &mut x);
        x
    }

    pub fn from_reference_into(&self, y: &[f64], x: &mut [f64]) {
        if self.is_reference() {
            x.copy_from_slice(y);
            return;
        }
        for (d, (xi, &yi)) in x.iter_mut().zip(y).enumerate() {
            let (lo, hi) = (self.lo[d], self.hi[d]);
            *xi = (lo + 0.5 * (yi + 1.0) * (hi - lo)).clamp(lo, hi);
        }
    }
}
