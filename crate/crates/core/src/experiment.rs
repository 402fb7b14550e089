//! Convergence sweeps: build one grid per (strategy, w_max), measure errors
//! and timings, append CSV rows.

use std::convert::Infallible;
use std::fs::OpenOptions;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bench::{
    error_metrics, sample_kink_points, sample_test_points, BenchError, FunctionKind, TestFunction,
    DEFAULT_KINK_POINTS, DEFAULT_TEST_POINTS,
};
use crate::grid::GridError;
use crate::knot::MAX_LEVEL;
use crate::refine::{build, RefineConfig, Strategy};

/// Column names of [`ResultRow`], in CSV order.
pub const CSV_HEADER: [&str; 14] = [
    "function",
    "dim",
    "strategy",
    "w_max",
    "w_kink",
    "p_max",
    "q_max",
    "num_knots",
    "num_evals",
    "err_inf",
    "err_l2",
    "build_seconds",
    "eval_seconds",
    "seed",
];

pub const DEFAULT_W_KINK: f64 = 1.0;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("{field}: {message}")]
    Invalid { field: &'static str, message: String },
    #[error("{0}: required")]
    Missing(&'static str),
    #[error("reading config: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("writing {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("writing {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Settings gathered from a config file or command-line flags. Every field
/// is optional so that sources can be layered.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigValues {
    pub function: Option<FunctionKind>,
    pub dim: Option<usize>,
    pub strategies: Vec<Strategy>,
    pub w_max: Vec<f64>,
    pub w_kink: Option<f64>,
    pub p_max: Option<u8>,
    pub q_min: Option<u32>,
    pub q_max: Option<u32>,
    pub seed: Option<u64>,
    pub test_points: Option<usize>,
    pub kink_points: Option<usize>,
    pub repeats: Option<usize>,
    pub out: Option<PathBuf>,
    pub dump_grid: Option<PathBuf>,
}

fn parse_value<T: FromStr>(field: &'static str, raw: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    raw.trim().parse::<T>().map_err(|e| ConfigError::Invalid {
        field,
        message: format!("`{}`: {e}", raw.trim()),
    })
}

/// Integers also accepted in float notation such as `1e5`.
fn parse_count(field: &'static str, raw: &str) -> Result<usize, ConfigError> {
    if let Ok(n) = raw.trim().parse::<usize>() {
        return Ok(n);
    }
    let v: f64 = parse_value(field, raw)?;
    if v >= 0.0 && v.fract() == 0.0 && v <= usize::MAX as f64 {
        Ok(v as usize)
    } else {
        Err(ConfigError::Invalid {
            field,
            message: format!("`{}` is not a non-negative integer", raw.trim()),
        })
    }
}

impl ConfigValues {
    /// Parses flat `key = value` text. Keys mirror the long flag names;
    /// `strategy` and `wmax` may repeat or hold comma-separated lists.
    /// Blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut c = ConfigValues::default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line,
                    message: format!("expected key = value, got `{content}`"),
                });
            };
            let key = key.trim().trim_start_matches("--").replace('_', "-");
            c.set(&key, value).map_err(|e| match e {
                ConfigError::UnknownKey { key, .. } => ConfigError::UnknownKey { line, key },
                ConfigError::Invalid { field, message } => ConfigError::Syntax {
                    line,
                    message: format!("{field}: {message}"),
                },
                other => other,
            })?;
        }
        Ok(c)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        match key {
            "function" => self.function = Some(parse_value("function", value)?),
            "dim" => self.dim = Some(parse_value("dim", value)?),
            "strategy" => {
                for s in value.split(',').filter(|s| !s.trim().is_empty()) {
                    self.strategies.push(parse_value("strategy", s)?);
                }
            }
            "wmax" => {
                for s in value.split(',').filter(|s| !s.trim().is_empty()) {
                    self.w_max.push(parse_value("wmax", s)?);
                }
            }
            "wkink" => self.w_kink = Some(parse_value("wkink", value)?),
            "pmax" => self.p_max = Some(parse_value("pmax", value)?),
            "qmin" => self.q_min = Some(parse_value("qmin", value)?),
            "qmax" => self.q_max = Some(parse_value("qmax", value)?),
            "seed" => self.seed = Some(parse_value("seed", value)?),
            "test-points" => self.test_points = Some(parse_count("test-points", value)?),
            "kink-points" => self.kink_points = Some(parse_count("kink-points", value)?),
            "repeats" => self.repeats = Some(parse_count("repeats", value)?),
            "out" => self.out = Some(PathBuf::from(value.trim())),
            "dump-grid" => self.dump_grid = Some(PathBuf::from(value.trim())),
            other => {
                return Err(ConfigError::UnknownKey {
                    line: 0,
                    key: other.to_string(),
                })
            }
        }
        Ok(())
    }

    /// `self` with every value present in `over` replaced. Lists are
    /// replaced as a whole when `over` has any entries.
    pub fn overridden_by(mut self, over: ConfigValues) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if over.$f.is_some() { self.$f = over.$f; } )* };
        }
        take!(function, dim, w_kink, p_max, q_min, q_max, seed, test_points, kink_points, repeats, out, dump_grid);
        if !over.strategies.is_empty() {
            self.strategies = over.strategies;
        }
        if !over.w_max.is_empty() {
            self.w_max = over.w_max;
        }
        self
    }

    /// Applies defaults and validates.
    pub fn into_spec(self) -> Result<ExperimentSpec, ConfigError> {
        let invalid = |field, message: String| Err(ConfigError::Invalid { field, message });
        let function = self.function.ok_or(ConfigError::Missing("function"))?;
        let dim = match (self.dim, function.fixed_dim()) {
            (Some(d), Some(fixed)) if d != fixed => {
                return invalid("dim", format!("{function} requires dim = {fixed}, got {d}"))
            }
            (Some(d), _) => d,
            (None, Some(fixed)) => fixed,
            (None, None) => return Err(ConfigError::Missing("dim")),
        };
        if dim == 0 {
            return invalid("dim", "must be at least 1".into());
        }
        if self.w_max.is_empty() {
            return invalid("wmax", "the sweep needs at least one threshold".into());
        }
        if let Some(w) = self.w_max.iter().find(|w| !(**w > 0.0 && w.is_finite())) {
            return invalid("wmax", format!("thresholds must be positive, got {w}"));
        }
        let w_kink = self.w_kink.unwrap_or(DEFAULT_W_KINK);
        if !(w_kink > 0.0 && w_kink.is_finite()) {
            return invalid("wkink", format!("must be positive, got {w_kink}"));
        }
        let p_max = self.p_max.unwrap_or(RefineConfig::DEFAULT_P_MAX);
        if p_max == 0 {
            return invalid("pmax", "must be at least 1".into());
        }
        let q_min = self.q_min.unwrap_or(RefineConfig::DEFAULT_Q_MIN);
        let q_max = self.q_max.unwrap_or(function.default_q_max());
        if q_max > MAX_LEVEL as u32 {
            return invalid("qmax", format!("must be at most {MAX_LEVEL}, got {q_max}"));
        }
        if q_min > q_max {
            return invalid("qmin", format!("{q_min} exceeds qmax = {q_max}"));
        }
        let test_points = self.test_points.unwrap_or(DEFAULT_TEST_POINTS);
        if test_points == 0 {
            return invalid("test-points", "must be at least 1".into());
        }
        let repeats = self.repeats.unwrap_or(1);
        if repeats == 0 {
            return invalid("repeats", "must be at least 1".into());
        }
        let strategies = if self.strategies.is_empty() {
            Strategy::ALL.to_vec()
        } else {
            self.strategies
        };
        Ok(ExperimentSpec {
            function,
            dim,
            strategies,
            w_max: self.w_max,
            w_kink,
            p_max,
            q_min,
            q_max,
            seed: self.seed.unwrap_or(0),
            test_points,
            kink_points: self.kink_points.unwrap_or(DEFAULT_KINK_POINTS),
            repeats,
            out: self.out,
            dump_grid: self.dump_grid,
        })
    }
}

/// Config text layered under flag values, then validated.
pub fn parse_config(text: Option<&str>, flags: ConfigValues) -> Result<ExperimentSpec, ConfigError> {
    let base = match text {
        Some(t) => ConfigValues::parse(t)?,
        None => ConfigValues::default(),
    };
    base.overridden_by(flags).into_spec()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub function: FunctionKind,
    pub dim: usize,
    pub strategies: Vec<Strategy>,
    pub w_max: Vec<f64>,
    pub w_kink: f64,
    pub p_max: u8,
    pub q_min: u32,
    pub q_max: u32,
    pub seed: u64,
    pub test_points: usize,
    pub kink_points: usize,
    /// Timings are averaged over this many builds.
    pub repeats: usize,
    pub out: Option<PathBuf>,
    pub dump_grid: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn new(function: FunctionKind, dim: usize, w_max: Vec<f64>) -> Result<Self, ConfigError> {
        ConfigValues {
            function: Some(function),
            dim: Some(dim),
            w_max,
            ..Default::default()
        }
        .into_spec()
    }

    pub fn num_runs(&self) -> usize {
        self.strategies.len() * self.w_max.len()
    }

    /// Dump path of one run. With a single run the configured path is used
    /// as is; otherwise `.strategy.wmax` goes before the extension.
    pub fn dump_path(&self, strategy: Strategy, w_max: f64) -> Option<PathBuf> {
        let base = self.dump_grid.as_ref()?;
        if self.num_runs() == 1 {
            return Some(base.clone());
        }
        let stem = base
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        let name = match base.extension() {
            Some(ext) => format!("{stem}.{strategy}.{w_max:e}.{}", ext.to_string_lossy()),
            None => format!("{stem}.{strategy}.{w_max:e}"),
        };
        Some(base.with_file_name(name))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub function: String,
    pub dim: usize,
    pub strategy: String,
    pub w_max: f64,
    pub w_kink: f64,
    pub p_max: u8,
    pub q_max: u32,
    pub num_knots: usize,
    pub num_evals: usize,
    pub err_inf: f64,
    pub err_l2: f64,
    pub build_seconds: f64,
    pub eval_seconds: f64,
    pub seed: u64,
}

/// Runs the sweep and appends to `spec.out` if set.
pub fn run(spec: &ExperimentSpec) -> Result<Vec<ResultRow>, ExperimentError> {
    run_with(spec, |_, _| {})
}

/// Like [`run`], calling `progress` after each row with the failure message
/// of a failed build.
pub fn run_with<P>(spec: &ExperimentSpec, mut progress: P) -> Result<Vec<ResultRow>, ExperimentError>
where
    P: FnMut(&ResultRow, Option<&str>),
{
    let tf = TestFunction::new(spec.function, spec.dim)?;
    let test_points = sample_test_points(&tf, spec.test_points, spec.seed);
    let kink_points = sample_kink_points(&tf, spec.kink_points, spec.seed);
    let mut rows = Vec::with_capacity(spec.num_runs());

    for &strategy in &spec.strategies {
        for &w_max in &spec.w_max {
            let mut cfg = RefineConfig::new(strategy, w_max, tf.domain().clone());
            cfg.w_kink = spec.w_kink;
            cfg.p_max = spec.p_max;
            cfg.q_min = spec.q_min;
            cfg.q_max = spec.q_max;

            let mut row = ResultRow {
                function: spec.function.name().to_string(),
                dim: spec.dim,
                strategy: strategy.name().to_string(),
                w_max,
                w_kink: spec.w_kink,
                p_max: spec.p_max,
                q_max: spec.q_max,
                num_knots: 0,
                num_evals: 0,
                err_inf: f64::NAN,
                err_l2: f64::NAN,
                build_seconds: f64::NAN,
                eval_seconds: f64::NAN,
                seed: spec.seed,
            };
            let mut failure = None;
            let mut build_total = 0.0;
            let mut eval_total = 0.0;
            let mut last = None;
            for _ in 0..spec.repeats {
                let t = Instant::now();
                let built = build(|x: &[f64]| Ok::<_, Infallible>(tf.value(x)), &cfg);
                build_total += t.elapsed().as_secs_f64();
                let (grid, report) = match built {
                    Ok(b) => b,
                    Err(e) => {
                        failure = Some(e.to_string());
                        break;
                    }
                };
                let t = Instant::now();
                let metrics = error_metrics(&tf, &grid, &test_points, &kink_points);
                eval_total += t.elapsed().as_secs_f64();
                match metrics {
                    Ok(m) => last = Some((grid, report, m)),
                    Err(e) => {
                        failure = Some(e.to_string());
                        break;
                    }
                }
            }
            if let (None, Some((mut grid, report, m))) = (&failure, last) {
                let n = spec.repeats as f64;
                row.num_knots = report.num_knots;
                row.num_evals = report.num_evaluations;
                row.err_inf = m.err_inf;
                row.err_l2 = m.err_l2;
                row.build_seconds = build_total / n;
                row.eval_seconds = eval_total / n;
                if let Some(path) = spec.dump_path(strategy, w_max) {
                    grid.set_param("function", spec.function.name());
                    grid.set_param("seed", spec.seed.to_string());
                    grid.set_param("error_mean", "total-count");
                    grid.write_dump(&path).map_err(|e| match e {
                        GridError::Io(source) => ExperimentError::Io { path, source },
                        other => other.into(),
                    })?;
                }
            }
            if let Some(path) = &spec.out {
                append_rows(path, std::slice::from_ref(&row))?;
            }
            progress(&row, failure.as_deref());
            rows.push(row);
        }
    }
    Ok(rows)
}

/// Appends rows to a CSV file, writing the header only when the file is
/// new or empty.
pub fn append_rows(path: &Path, rows: &[ResultRow]) -> Result<(), ExperimentError> {
    let io_err = |source| ExperimentError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(io_err)?;
    let empty = file.metadata().map_err(io_err)?.len() == 0;
    let mut w = csv::WriterBuilder::new().has_headers(empty).from_writer(file);
    let csv_err = |source| ExperimentError::Csv {
        path: path.to_path_buf(),
        source,
    };
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    w.flush().map_err(io_err)?;
    Ok(())
}

/// Reads rows written by [`append_rows`].
pub fn read_rows(path: &Path) -> Result<Vec<ResultRow>, ExperimentError> {
    let mut r = csv::Reader::from_path(path).map_err(|source| ExperimentError::Csv {
        path: path.to_path_buf(),
        source,
    })?;
    r.deserialize()
        .collect::<Result<_, _>>()
        .map_err(|source| ExperimentError::Csv {
            path: path.to_path_buf(),
            source,
        })
}
