//! Detection of jumps in the first derivative by polynomial annihilation.
//!
//! For a stencil `x_0 < ... < x_{m+2}` around a point `x`, coefficients `c_i`
//! are chosen so that `sum c_i p(x_i)` reproduces `p^(m)(x)` for every
//! polynomial of degree `<= m`, while the right-hand part of the stencil alone
//! reproduces `h^(1-m) p'(x)` for linear `p`. Then
//! `h^(m-1) sum c_i f(x_i)` annihilates the smooth part of `f` and leaves the
//! jump `f'(x+) - f'(x-)`.

use thiserror::Error;

/// Stencil order used by the refinement (five-point stencils).
pub const DEFAULT_ORDER: usize = 2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KinkError {
    #[error("stencil needs at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("stencil points must be finite and strictly increasing")]
    NotIncreasing,
    #[error("center {0} is not a stencil point")]
    CenterNotInStencil(f64),
    #[error("need at least two points on each side of the center ({left} left, {right} right incl. center)")]
    Unbalanced { left: usize, right: usize },
    #[error("annihilation system is singular")]
    Singular,
    #[error("expected {expected} function values, got {got}")]
    ValueCount { expected: usize, got: usize },
    #[error("boundary stencil points must be distinct and on the correct sides")]
    BadBoundaryStencil,
}

/// Sorted interior stencil with the evaluation point among its members.
#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    points: Vec<f64>,
    center: usize,
    h: f64,
}

impl Stencil {
    /// `points` must be strictly increasing and contain `center`. The order
    /// `m` of the operator is `points.len() - 3`.
    pub fn new(points: Vec<f64>, center: f64) -> Result<Self, KinkError> {
        if points.len() < 5 {
            return Err(KinkError::TooFewPoints {
                needed: 5,
                got: points.len(),
            });
        }
        if points.iter().any(|p| !p.is_finite()) || points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(KinkError::NotIncreasing);
        }
        let center = points
            .iter()
            .position(|&p| p == center)
            .ok_or(KinkError::CenterNotInStencil(center))?;
        let right = points.len() - center;
        if center < 2 || right < 2 {
            return Err(KinkError::Unbalanced {
                left: center,
                right,
            });
        }
        let h = points
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(0.0, f64::max);
        Ok(Stencil { points, center, h })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn center(&self) -> f64 {
        self.points[self.center]
    }

    /// Largest index belonging to the left part `S-`.
    pub fn split(&self) -> usize {
        self.center - 1
    }

    /// Maximum gap between neighbouring points.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn order(&self) -> usize {
        self.points.len() - 3
    }
}

/// Which operator produced a [`JumpEstimate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StencilVariant {
    Interior,
    BoundaryLeft,
    BoundaryRight,
}

/// Approximation of `f'(x+) - f'(x-)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpEstimate {
    pub value: f64,
    pub variant: StencilVariant,
}

/// Solves for the annihilation coefficients `c_0..c_{m+2}`.
#[allow(clippy::needless_range_loop)]
pub fn annihilation_coefficients(st: &Stencil) -> Result<Vec<f64>, KinkError> {
    let m = st.order();
    let n = m + 3;
    let h = st.h;
    let x = st.center();
    // work in s = (x_i - x) / h so the system does not depend on the scale;
    // the unknowns are then d_i = c_i h^m
    let s: Vec<f64> = st.points.iter().map(|p| (p - x) / h).collect();
    let mut a = vec![vec![0.0; n]; n];
    let mut b = vec![0.0; n];
    for l in 0..=m {
        for (i, si) in s.iter().enumerate() {
            a[l][i] = si.powi(l as i32);
        }
    }
    b[m] = factorial(m);
    for l in 0..2 {
        let row = m + 1 + l;
        for (i, si) in s.iter().enumerate().skip(st.split() + 1) {
            a[row][i] = si.powi(l as i32);
        }
    }
    b[m + 2] = 1.0;
    let d = solve_dense(a, b)?;
    let scale = h.powi(-(m as i32));
    Ok(d.into_iter().map(|di| di * scale).collect())
}

/// `h^(m-1) sum c_i f(x_i)`.
pub fn jump_estimate(st: &Stencil, values: &[f64]) -> Result<JumpEstimate, KinkError> {
    if values.len() != st.points.len() {
        return Err(KinkError::ValueCount {
            expected: st.points.len(),
            got: values.len(),
        });
    }
    let c = annihilation_coefficients(st)?;
    let sum: f64 = c.iter().zip(values).map(|(ci, fi)| ci * fi).sum();
    Ok(JumpEstimate {
        value: st.h.powi(st.order() as i32 - 1) * sum,
        variant: StencilVariant::Interior,
    })
}

/// Jump estimate with a single point on one side of `x`: the slope of the
/// quadratic through `x` and the two points on the other side, compared
/// against the one-sided difference towards the lone point. Each argument is
/// a `(coordinate, value)` pair.
pub fn boundary_jump_estimate(
    lone: (f64, f64),
    center: (f64, f64),
    same_side: [(f64, f64); 2],
) -> Result<JumpEstimate, KinkError> {
    let (x, fx) = center;
    let [(a, fa), (b, fb)] = same_side;
    let all = [lone.0, x, a, b];
    if all.iter().any(|v| !v.is_finite()) {
        return Err(KinkError::BadBoundaryStencil);
    }
    let left = lone.0 < x;
    let opposite = |p: f64| if left { p > x } else { p < x };
    if lone.0 == x || !opposite(a) || !opposite(b) || a == b {
        return Err(KinkError::BadBoundaryStencil);
    }
    // Newton form through x, a, b: p'(x) = f[x,a] + f[x,a,b] (x - a)
    let fxa = (fa - fx) / (a - x);
    let fab = (fb - fa) / (b - a);
    let fxab = (fab - fxa) / (b - x);
    let slope = fxa + fxab * (x - a);
    let one_sided = (lone.1 - fx) / (lone.0 - x);
    let (value, variant) = if left {
        (slope - one_sided, StencilVariant::BoundaryLeft)
    } else {
        (one_sided - slope, StencilVariant::BoundaryRight)
    };
    Ok(JumpEstimate { value, variant })
}

/// Picks the stencil for `center` from sampled `(coordinate, value)` pairs on
/// a line (any order, `center` included): the two nearest samples on each
/// side give the interior operator; a single sample on one side with two on
/// the other gives the boundary operator. Returns `None` when neither fits.
pub fn estimate_from_samples(samples: &[(f64, f64)], center: f64) -> Option<JumpEstimate> {
    let fc = samples.iter().find(|s| s.0 == center)?.1;
    let mut left: Vec<(f64, f64)> = samples.iter().copied().filter(|s| s.0 < center).collect();
    let mut right: Vec<(f64, f64)> = samples.iter().copied().filter(|s| s.0 > center).collect();
    left.sort_by(|a, b| b.0.total_cmp(&a.0));
    right.sort_by(|a, b| a.0.total_cmp(&b.0));
    left.dedup_by(|a, b| a.0 == b.0);
    right.dedup_by(|a, b| a.0 == b.0);
    match (left.len(), right.len()) {
        (l, r) if l >= 2 && r >= 2 => {
            let pts = [left[1], left[0], (center, fc), right[0], right[1]];
            let st = Stencil::new(pts.iter().map(|p| p.0).collect(), center).ok()?;
            let vals: Vec<f64> = pts.iter().map(|p| p.1).collect();
            jump_estimate(&st, &vals).ok()
        }
        (1, r) if r >= 2 => boundary_jump_estimate(left[0], (center, fc), [right[0], right[1]]).ok(),
        (l, 1) if l >= 2 => boundary_jump_estimate(right[0], (center, fc), [left[0], left[1]]).ok(),
        _ => None,
    }
}

fn factorial(m: usize) -> f64 {
    (1..=m).map(|k| k as f64).product()
}

/// Gaussian elimination with partial pivoting.
#[allow(clippy::needless_range_loop)]
fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>, KinkError> {
    let n = b.len();
    let scale = a
        .iter()
        .flatten()
        .fold(0.0f64, |acc, v| acc.max(v.abs()));
    if scale == 0.0 {
        return Err(KinkError::Singular);
    }
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[piv][col].abs() <= 1e-13 * scale {
            return Err(KinkError::Singular);
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let tail: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - tail) / a[row][row];
    }
    Ok(x)
}
