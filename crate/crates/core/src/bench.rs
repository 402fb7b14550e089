//! Benchmark functions with kinks, point samplers and error norms.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::domain::{Domain, DomainError};
use crate::grid::{GridError, SparseGrid};

/// Kink location of [`FunctionKind::Kink1d`].
pub const KINK1D_R: f64 = -0.45;
/// Radius squared of the [`FunctionKind::Curve2d`] kink circle.
pub const CURVE2D_R2: f64 = 0.3;
pub const GENZ_C_KINK: f64 = 0.51;
pub const SOBOL_G_KINK: f64 = 0.66;

pub const DEFAULT_TEST_POINTS: usize = 100_000;
pub const DEFAULT_KINK_POINTS: usize = 1_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BenchError {
    #[error("{kind} is defined for dimension {expected} only, got {got}")]
    FixedDimension {
        kind: FunctionKind,
        expected: usize,
        got: usize,
    },
    #[error("dimension must be positive")]
    ZeroDimension,
    #[error(transparent)]
    Domain(#[from] DomainError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FunctionKind {
    /// `1 / (|0.3 - x1^2 - x2^2| + 0.1)` on `[0,1]^2`.
    Curve2d,
    /// `exp(-sum a_i |x_i - 0.51|)` on `[0,1]^N`.
    GenzC,
    /// `prod (|4 x_i^2 - 4 * 0.66^2| + a_i) / (a_i + 1)` on `[0,1]^N`.
    SobolG,
    /// `0` left of `r`, `sin((x - r) pi / (1 - r))` right of it, on `[-1,1]`.
    Kink1d,
}

impl FunctionKind {
    pub const ALL: [FunctionKind; 4] = [
        FunctionKind::Curve2d,
        FunctionKind::GenzC,
        FunctionKind::SobolG,
        FunctionKind::Kink1d,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FunctionKind::Curve2d => "curve2d",
            FunctionKind::GenzC => "genz-c",
            FunctionKind::SobolG => "sobol-g",
            FunctionKind::Kink1d => "kink1d",
        }
    }

    /// Dimension the function is restricted to, if any.
    pub fn fixed_dim(self) -> Option<usize> {
        match self {
            FunctionKind::Curve2d => Some(2),
            FunctionKind::Kink1d => Some(1),
            FunctionKind::GenzC | FunctionKind::SobolG => None,
        }
    }

    pub fn default_q_max(self) -> u32 {
        match self {
            FunctionKind::Curve2d => 30,
            _ => 25,
        }
    }
}

impl fmt::Display for FunctionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FunctionKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "curve2d" => Ok(FunctionKind::Curve2d),
            "genz-c" => Ok(FunctionKind::GenzC),
            "sobol-g" => Ok(FunctionKind::SobolG),
            "kink1d" => Ok(FunctionKind::Kink1d),
            other => Err(format!(
                "unknown function `{other}` (expected curve2d, genz-c, sobol-g or kink1d)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    kind: FunctionKind,
    a: Vec<f64>,
    domain: Domain,
}

impl TestFunction {
    pub fn new(kind: FunctionKind, dim: usize) -> Result<Self, BenchError> {
        if dim == 0 {
            return Err(BenchError::ZeroDimension);
        }
        if let Some(expected) = kind.fixed_dim() {
            if dim != expected {
                return Err(BenchError::FixedDimension {
                    kind,
                    expected,
                    got: dim,
                });
            }
        }
        let a = match kind {
            FunctionKind::GenzC => (1..=dim).map(|i| 2f64.powi(3 - i as i32)).collect(),
            FunctionKind::SobolG => (1..=dim)
                .map(|i| if i == 1 { 0.5 } else { ((i - 1) * (i - 1)) as f64 })
                .collect(),
            _ => Vec::new(),
        };
        let domain = match kind {
            FunctionKind::Kink1d => Domain::reference(1),
            _ => Domain::unit(dim),
        };
        Ok(TestFunction { kind, a, domain })
    }

    pub fn kind(&self) -> FunctionKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    /// Coefficients `a_i` (empty for functions without them).
    pub fn coefficients(&self) -> &[f64] {
        &self.a
    }

    /// Value at a native point, rejecting points outside the domain.
    pub fn eval(&self, x: &[f64]) -> Result<f64, DomainError> {
        self.domain.check(x)?;
        Ok(self.value(x))
    }

    /// Value without the domain check.
    pub fn value(&self, x: &[f64]) -> f64 {
        match self.kind {
            FunctionKind::Curve2d => {
                1.0 / ((CURVE2D_R2 - x[0] * x[0] - x[1] * x[1]).abs() + 0.1)
            }
            FunctionKind::GenzC => {
                let s: f64 = self
                    .a
                    .iter()
                    .zip(x)
                    .map(|(a, xi)| a * (xi - GENZ_C_KINK).abs())
                    .sum();
                (-s).exp()
            }
            FunctionKind::SobolG => self
                .a
                .iter()
                .zip(x)
                .map(|(a, xi)| {
                    ((4.0 * (xi * xi - SOBOL_G_KINK * SOBOL_G_KINK)).abs() + a) / (a + 1.0)
                })
                .product(),
            FunctionKind::Kink1d => {
                let t = x[0];
                if t <= KINK1D_R {
                    0.0
                } else {
                    ((t - KINK1D_R) * PI / (1.0 - KINK1D_R)).sin()
                }
            }
        }
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `m` points drawn uniformly from the native domain.
pub fn sample_test_points(tf: &TestFunction, m: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = stream_rng(seed, 0);
    let d = tf.domain();
    (0..m)
        .map(|_| {
            (0..tf.dim())
                .map(|i| d.lo()[i] + rng.random::<f64>() * (d.hi()[i] - d.lo()[i]))
                .collect()
        })
        .collect()
}

/// `count` points on the kink locus of `tf`. For the separable functions
/// the pinned axis cycles with the point index.
pub fn sample_kink_points(tf: &TestFunction, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = stream_rng(seed, 1);
    let dim = tf.dim();
    (0..count)
        .map(|i| match tf.kind() {
            FunctionKind::Curve2d => {
                let theta = rng.random::<f64>() * FRAC_PI_2;
                let r = CURVE2D_R2.sqrt();
                vec![r * theta.cos(), r * theta.sin()]
            }
            FunctionKind::GenzC | FunctionKind::SobolG => {
                let pin = if tf.kind() == FunctionKind::GenzC {
                    GENZ_C_KINK
                } else {
                    SOBOL_G_KINK
                };
                let mut x: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
                x[i % dim] = pin;
                x
            }
            FunctionKind::Kink1d => vec![KINK1D_R],
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorReport {
    pub err_inf: f64,
    pub err_l2: f64,
    pub num_test_points: usize,
    pub num_kink_points: usize,
}

/// Max and root-mean-square error of `grid` against `tf` over the union of
/// both point sets (the mean is over the total count).
pub fn error_metrics(
    tf: &TestFunction,
    grid: &SparseGrid,
    test_points: &[Vec<f64>],
    kink_points: &[Vec<f64>],
) -> Result<ErrorReport, GridError> {
    let residuals: Vec<f64> = test_points
        .par_iter()
        .chain(kink_points.par_iter())
        .map(|x| {
            let u = grid.evaluate(x)?;
            Ok((tf.value(x) - u).abs())
        })
        .collect::<Result<_, GridError>>()?;
    Ok(report_from_residuals(
        &residuals,
        test_points.len(),
        kink_points.len(),
    ))
}

/// Norms of absolute residuals, summed in a fixed order.
pub fn report_from_residuals(residuals: &[f64], num_test: usize, num_kink: usize) -> ErrorReport {
    let n = residuals.len();
    let err_inf = residuals.iter().fold(0.0f64, |m, &r| m.max(r));
    let err_l2 = if n == 0 {
        0.0
    } else {
        (residuals.iter().map(|r| r * r).sum::<f64>() / n as f64).sqrt()
    };
    ErrorReport {
        // rounding of the mean can push it a few ulps above the max
        err_l2: err_l2.min(err_inf),
        err_inf,
        num_test_points: num_test,
        num_kink_points: num_kink,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn tf(kind: FunctionKind, dim: usize) -> TestFunction {
        TestFunction::new(kind, dim).unwrap()
    }

    #[test]
    fn function_values() {
        assert_relative_eq!(tf(FunctionKind::Curve2d, 2).eval(&[0.0, 0.0]).unwrap(), 2.5, max_relative = 1e-15);
        for n in [1, 2, 5, 10] {
            let x = vec![0.51; n];
            assert_eq!(tf(FunctionKind::GenzC, n).eval(&x).unwrap(), 1.0);
        }
        assert_relative_eq!(
            tf(FunctionKind::SobolG, 2).eval(&[0.66, 0.66]).unwrap(),
            1.0 / 6.0,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            tf(FunctionKind::GenzC, 2).eval(&[0.0, 0.0]).unwrap(),
            (-3.06f64).exp(),
            max_relative = 1e-14
        );
        assert_relative_eq!((-3.06f64).exp(), 0.046888, epsilon = 1e-6);
        assert_relative_eq!(tf(FunctionKind::Kink1d, 1).eval(&[0.275]).unwrap(), 1.0, max_relative = 1e-15);
        assert_eq!(tf(FunctionKind::Kink1d, 1).eval(&[-0.45]).unwrap(), 0.0);
        assert_eq!(tf(FunctionKind::Kink1d, 1).eval(&[-1.0]).unwrap(), 0.0);
    }

    #[test]
    fn coefficients() {
        assert_eq!(tf(FunctionKind::GenzC, 4).coefficients(), &[4.0, 2.0, 1.0, 0.5]);
        assert_eq!(tf(FunctionKind::SobolG, 4).coefficients(), &[0.5, 1.0, 4.0, 9.0]);
    }

    #[test]
    fn rejects_bad_dimensions_and_points() {
        assert!(TestFunction::new(FunctionKind::Curve2d, 3).is_err());
        assert!(TestFunction::new(FunctionKind::Kink1d, 2).is_err());
        assert!(TestFunction::new(FunctionKind::GenzC, 0).is_err());
        assert!(tf(FunctionKind::GenzC, 2).eval(&[0.5, 1.5]).is_err());
        assert!(tf(FunctionKind::Kink1d, 1).eval(&[-1.5]).is_err());
    }

    #[test]
    fn names_parse() {
        for k in FunctionKind::ALL {
            assert_eq!(k.name().parse::<FunctionKind>().unwrap(), k);
        }
        assert_eq!("genz_c".parse::<FunctionKind>().unwrap(), FunctionKind::GenzC);
        assert!("genz-z".parse::<FunctionKind>().is_err());
    }

    #[test]
    fn domains() {
        let d = tf(FunctionKind::GenzC, 3);
        assert_eq!(d.domain().to_reference(&[0.5, 0.0, 1.0]), vec![0.0, -1.0, 1.0]);
        assert!(tf(FunctionKind::Kink1d, 1).domain().is_reference());
    }

    #[test]
    fn slope_jump_at_genz_kink() {
        let f = tf(FunctionKind::GenzC, 1);
        let h = 1e-7;
        let right = (f.value(&[0.51 + h]) - f.value(&[0.51])) / h;
        let left = (f.value(&[0.51]) - f.value(&[0.51 - h])) / h;
        assert!((left - right - 8.0).abs() < 1e-5);
    }

    #[test]
    fn sobol_factor_fades_with_large_a() {
        let f = tf(FunctionKind::SobolG, 5);
        let a5 = f.coefficients()[4];
        for &x in &[0.0, 0.3, 0.66, 1.0] {
            let factor = ((4.0 * (x * x - 0.66f64 * 0.66)).abs() + a5) / (a5 + 1.0);
            assert!((factor - 1.0).abs() <= 4.0 * (1.0 - 0.66f64 * 0.66) / (a5 + 1.0) + 1e-15);
        }
    }

    #[test]
    fn samplers_are_deterministic_and_on_locus() {
        let g = tf(FunctionKind::GenzC, 2);
        let a = sample_test_points(&g, 100, 7);
        assert_eq!(a, sample_test_points(&g, 100, 7));
        assert_ne!(a, sample_test_points(&g, 100, 8));
        assert!(a.iter().all(|x| g.domain().check(x).is_ok()));

        let k = sample_kink_points(&g, 100, 7);
        assert!(k.iter().all(|x| x[0] == 0.51 || x[1] == 0.51));
        assert_eq!(k[0][0], 0.51);
        assert_eq!(k[1][1], 0.51);

        let s = sample_kink_points(&tf(FunctionKind::SobolG, 3), 30, 1);
        assert!(s.iter().enumerate().all(|(i, x)| x[i % 3] == 0.66));

        let c = tf(FunctionKind::Curve2d, 2);
        for x in sample_kink_points(&c, 1000, 3) {
            assert!((x[0] * x[0] + x[1] * x[1] - 0.3).abs() <= 1e-12);
            assert!(c.domain().check(&x).is_ok());
        }
        let k1 = sample_kink_points(&tf(FunctionKind::Kink1d, 1), 5, 0);
        assert!(k1.iter().all(|x| (x[0] + 0.45).abs() <= 1e-9));
    }

    #[test]
    fn residual_norms() {
        let r = report_from_residuals(&[0.25; 10], 8, 2);
        assert_eq!(r.err_inf, 0.25);
        assert_eq!(r.err_l2, 0.25);
        let r = report_from_residuals(&[0.0, 3.0, 4.0], 3, 0);
        assert_eq!(r.err_inf, 4.0);
        assert_relative_eq!(r.err_l2, (25.0f64 / 3.0).sqrt());
        assert!(r.err_l2 <= r.err_inf);
    }
}
