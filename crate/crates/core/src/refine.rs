//! Stage-wise adaptive construction of the sparse grid.
//!
//! Starting from the root, every stage evaluates all children of the knots
//! accepted in the previous stage, computes their surpluses against the
//! current interpolant and accepts those with `|w| >= w_max` (or all of them
//! while `q <= q_min`). The strategies differ in how basis degrees are chosen:
//!
//! * `linear`: degree 1 everywhere.
//! * `highest`: the largest degree the level and `p_max` allow.
//! * `greedy`: children inherit the parent's degrees plus one along the axis
//!   they were generated on; before the surpluses of a stage are computed
//!   each parent's degrees are re-chosen to minimize the interpolation error
//!   at its freshly evaluated children.
//! * `kink`: like `greedy` without the re-choice, but a child falls back to
//!   degree 1 along its axis when polynomial annihilation on the evaluated
//!   knots of that axis line reports a derivative jump above `w_kink`.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::str::FromStr;
use std::time::{Duration, Instant};

use indexmap::IndexMap;
use rayon::prelude::*;
use thiserror::Error;

use crate::basis::{max_degree, BasisError, BasisSpec1D, BasisSpecNd};
use crate::domain::Domain;
use crate::grid::{GridError, GridNode, SparseGrid};
use crate::kink::{estimate_from_samples, JumpEstimate};
use crate::knot::{MultiKnot, MAX_LEVEL};

#[derive(Debug, Error)]
pub enum RefineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("function evaluation failed at {point:?}: {message}")]
    Evaluation { point: Vec<f64>, message: String },
    #[error("knot {0} has not been evaluated")]
    NotEvaluated(MultiKnot),
    #[error(transparent)]
    Grid(#[from] GridError),
}

impl From<BasisError> for RefineError {
    fn from(e: BasisError) -> Self {
        RefineError::Grid(GridError::Basis(e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    Linear,
    Highest,
    Greedy,
    Kink,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::Linear,
        Strategy::Highest,
        Strategy::Greedy,
        Strategy::Kink,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Linear => "linear",
            Strategy::Highest => "highest",
            Strategy::Greedy => "greedy",
            Strategy::Kink => "kink",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "linear" => Ok(Strategy::Linear),
            "highest" => Ok(Strategy::Highest),
            "greedy" => Ok(Strategy::Greedy),
            "kink" => Ok(Strategy::Kink),
            other => Err(format!(
                "unknown strategy `{other}` (expected linear, highest, greedy or kink)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefineConfig {
    pub strategy: Strategy,
    /// Surplus threshold for accepting a knot.
    pub w_max: f64,
    /// Jump threshold of the kink strategy.
    pub w_kink: f64,
    pub p_max: u8,
    pub q_min: u32,
    pub q_max: u32,
    pub domain: Domain,
}

impl RefineConfig {
    pub const DEFAULT_P_MAX: u8 = 6;
    pub const DEFAULT_Q_MIN: u32 = 1;
    pub const DEFAULT_Q_MAX: u32 = 25;

    pub fn new(strategy: Strategy, w_max: f64, domain: Domain) -> Self {
        RefineConfig {
            strategy,
            w_max,
            w_kink: 1.0,
            p_max: Self::DEFAULT_P_MAX,
            q_min: Self::DEFAULT_Q_MIN,
            q_max: Self::DEFAULT_Q_MAX,
            domain,
        }
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn validate(&self) -> Result<(), RefineError> {
        let bad = |m: String| Err(RefineError::Config(m));
        if !(self.w_max > 0.0 && self.w_max.is_finite()) {
            return bad(format!("w_max must be positive, got {}", self.w_max));
        }
        if !(self.w_kink > 0.0 && self.w_kink.is_finite()) {
            return bad(format!("w_kink must be positive, got {}", self.w_kink));
        }
        if self.p_max < 1 {
            return bad("p_max must be at least 1".into());
        }
        if self.q_min > self.q_max {
            return bad(format!(
                "q_min ({}) must not exceed q_max ({})",
                self.q_min, self.q_max
            ));
        }
        if self.q_max > MAX_LEVEL as u32 {
            return bad(format!("q_max must be at most {MAX_LEVEL}"));
        }
        Ok(())
    }

    fn annotate(&self, grid: &mut SparseGrid) {
        grid.set_param("strategy", self.strategy.name());
        grid.set_param("w_max", format!("{:.16e}", self.w_max));
        grid.set_param("w_kink", format!("{:.16e}", self.w_kink));
        grid.set_param("p_max", self.p_max.to_string());
        grid.set_param("q_min", self.q_min.to_string());
        grid.set_param("q_max", self.q_max.to_string());
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildReport {
    pub num_knots: usize,
    pub num_evaluations: usize,
    /// Knots accepted in each stage, starting with the root stage.
    pub accepted_per_stage: Vec<usize>,
    /// Axis selections where the kink strategy detected a jump.
    pub kinks_detected: usize,
    pub wall_time: Duration,
}

/// Builds the interpolant of `f`, evaluating each stage's new knots in
/// parallel. `f` receives points of `cfg.domain`.
pub fn build<F, E>(f: F, cfg: &RefineConfig) -> Result<(SparseGrid, BuildReport), RefineError>
where
    F: Fn(&[f64]) -> Result<f64, E> + Sync,
    E: fmt::Display,
{
    build_impl(cfg, |points: &[Vec<f64>]| {
        points
            .par_iter()
            .map(|x| f(x).map_err(|e| e.to_string()))
            .collect()
    })
}

/// Same as [`build`] with all evaluations on the calling thread.
pub fn build_serial<F, E>(f: F, cfg: &RefineConfig) -> Result<(SparseGrid, BuildReport), RefineError>
where
    F: Fn(&[f64]) -> Result<f64, E>,
    E: fmt::Display,
{
    build_impl(cfg, |points: &[Vec<f64>]| {
        points
            .iter()
            .map(|x| f(x).map_err(|e| e.to_string()))
            .collect()
    })
}

fn build_impl<B>(cfg: &RefineConfig, mut eval_batch: B) -> Result<(SparseGrid, BuildReport), RefineError>
where
    B: FnMut(&[Vec<f64>]) -> Vec<Result<f64, String>>,
{
    cfg.validate()?;
    let start = Instant::now();
    let dim = cfg.dim();
    let mut grid = SparseGrid::new(cfg.domain.clone());
    cfg.annotate(&mut grid);
    let mut lines = (cfg.strategy == Strategy::Kink).then(|| LineIndex::new(dim));

    let root = MultiKnot::root(dim);
    let mut record = |grid: &mut SparseGrid,
                      lines: &mut Option<LineIndex>,
                      knots: &[MultiKnot]|
     -> Result<(), RefineError> {
        let points: Vec<Vec<f64>> = knots
            .iter()
            .map(|k| cfg.domain.from_reference(&k.position()))
            .collect();
        let values = eval_batch(&points);
        for ((knot, point), value) in knots.iter().zip(points).zip(values) {
            let value = match value {
                Ok(v) if v.is_finite() => v,
                Ok(v) => {
                    return Err(RefineError::Evaluation {
                        point,
                        message: format!("non-finite value {v}"),
                    })
                }
                Err(message) => return Err(RefineError::Evaluation { point, message }),
            };
            grid.record_value(knot.clone(), value);
            if let Some(lines) = lines.as_mut() {
                lines.insert(grid, grid.cache().len() - 1);
            }
        }
        Ok(())
    };

    record(&mut grid, &mut lines, std::slice::from_ref(&root))?;
    let f_root = grid.cached_value(&root).expect("root evaluated");
    grid.insert(GridNode::new(root, f_root, &vec![0; dim])?)?;

    let mut accepted_per_stage = vec![1];
    let mut kinks_detected = 0;
    let mut active: Vec<usize> = vec![0];

    for q in 1..=cfg.q_max {
        // child -> (generating parent slot, axis); first generator wins
        let mut children: IndexMap<MultiKnot, (usize, usize)> = IndexMap::new();
        for &p in &active {
            for (c, d) in grid.node_at(p).knot.children() {
                children.entry(c).or_insert((p, d));
            }
        }
        if children.is_empty() {
            break;
        }
        let fresh: Vec<MultiKnot> = children
            .keys()
            .filter(|c| grid.cached_value(c).is_none())
            .cloned()
            .collect();
        record(&mut grid, &mut lines, &fresh)?;

        if cfg.strategy == Strategy::Greedy {
            for &p in &active {
                let knot = grid.node_at(p).knot.clone();
                modification_greedy(&mut grid, &knot, cfg.p_max)?;
            }
        }

        let mut accepted = Vec::new();
        for (child, &(parent, axis)) in &children {
            let f_child = grid.cached_value(child).expect("children evaluated");
            let weight = grid.compute_surplus(child, f_child)?;
            if !(q <= cfg.q_min || weight.abs() >= cfg.w_max) {
                continue;
            }
            let parent_spec = &grid.node_at(parent).spec;
            let spec = match cfg.strategy {
                Strategy::Linear => selection_linear(child),
                Strategy::Highest => selection_highest(child, cfg.p_max),
                Strategy::Greedy => selection_greedy(child, parent_spec, axis, cfg.p_max),
                Strategy::Kink => {
                    let samples = lines
                        .as_ref()
                        .expect("line index for kink strategy")
                        .samples(&grid, child, axis);
                    let (spec, jump) =
                        selection_kink(child, parent_spec, axis, q, &samples, cfg.w_kink, cfg.p_max);
                    if jump.is_some_and(|j| j.value.abs() > cfg.w_kink) {
                        kinks_detected += 1;
                    }
                    spec
                }
            };
            accepted.push(GridNode {
                knot: child.clone(),
                weight,
                spec,
            });
        }

        active.clear();
        for node in accepted {
            active.push(grid.insert(node)?);
        }
        accepted_per_stage.push(active.len());
        if active.is_empty() {
            break;
        }
    }

    let report = BuildReport {
        num_knots: grid.len(),
        num_evaluations: grid.num_evaluations(),
        accepted_per_stage,
        kinks_detected,
        wall_time: start.elapsed(),
    };
    Ok((grid, report))
}

/// Degree 1 on every refined axis, 0 on root components.
pub fn selection_linear(child: &MultiKnot) -> BasisSpecNd {
    let degrees: Vec<u8> = child
        .components()
        .iter()
        .map(|k| if k.is_root() { 0 } else { 1 })
        .collect();
    BasisSpecNd::new(child, &degrees).expect("linear degrees are admissible")
}

/// Largest admissible degree on every axis.
pub fn selection_highest(child: &MultiKnot, p_max: u8) -> BasisSpecNd {
    let degrees: Vec<u8> = child
        .components()
        .iter()
        .map(|&k| max_degree(k, p_max))
        .collect();
    BasisSpecNd::new(child, &degrees).expect("capped degrees are admissible")
}

fn incremented(parent_degree: u8, level: u8, p_max: u8) -> u8 {
    (parent_degree + 1).min(p_max).min(level).max(1)
}

/// Parent's degrees with the degree along `axis` raised by one (capped by
/// `p_max` and the child's level on that axis).
pub fn selection_greedy(child: &MultiKnot, parent: &BasisSpecNd, axis: usize, p_max: u8) -> BasisSpecNd {
    let mut degrees = parent.degrees();
    let comp = child.component(axis);
    degrees[axis] = if comp.is_root() {
        0
    } else {
        incremented(degrees[axis], comp.level(), p_max)
    };
    BasisSpecNd::new(child, &degrees).expect("incremented degree is admissible")
}

/// Degree choice of the kink strategy. `samples` are the evaluated
/// `(coordinate, value)` pairs on the axis line through `child`. Returns the
/// spec and, when a stencil could be formed, the jump estimate used.
pub fn selection_kink(
    child: &MultiKnot,
    parent: &BasisSpecNd,
    axis: usize,
    stage: u32,
    samples: &[(f64, f64)],
    w_kink: f64,
    p_max: u8,
) -> (BasisSpecNd, Option<JumpEstimate>) {
    if stage <= 2 {
        return (selection_greedy(child, parent, axis, p_max), None);
    }
    let comp = child.component(axis);
    let jump = estimate_from_samples(samples, comp.position());
    let mut degrees = parent.degrees();
    degrees[axis] = match jump {
        Some(j) if j.value.abs() <= w_kink => incremented(degrees[axis], comp.level(), p_max),
        // a detected kink or too few samples for a stencil
        _ => 1,
    };
    let spec = BasisSpecNd::new(child, &degrees).expect("kink degrees are admissible");
    (spec, jump)
}

/// Largest interpolation error at the children of `parent` along `axis`
/// when the parent's degree on that axis is `degree`. The grid is left
/// untouched.
pub fn greedy_score(grid: &SparseGrid, parent: &MultiKnot, axis: usize, degree: u8) -> Result<f64, RefineError> {
    let slot = grid
        .slot_of(parent)
        .ok_or_else(|| GridError::NotFound(parent.clone()))?;
    let comp = parent.component(axis);
    let spec = BasisSpec1D::new(comp, degree)?;
    let mut basis = grid.basis_at(slot).clone();
    basis.set_factor(axis, &spec);
    let mut score = 0.0f64;
    for c in comp.children() {
        let child = parent.with_component(axis, c);
        let f_child = grid
            .cached_value(&child)
            .ok_or(RefineError::NotEvaluated(child.clone()))?;
        let u = grid.evaluate_with_override(&child.position(), slot, &basis);
        score = score.max((u - f_child).abs());
    }
    Ok(score)
}

/// Scores of every candidate degree `1..=min(p_max, level)` along `axis`.
/// Empty for a root component.
pub fn greedy_scores(
    grid: &SparseGrid,
    parent: &MultiKnot,
    axis: usize,
    p_max: u8,
) -> Result<Vec<(u8, f64)>, RefineError> {
    let comp = parent.component(axis);
    if comp.is_root() {
        return Ok(Vec::new());
    }
    (1..=max_degree(comp, p_max))
        .map(|p| greedy_score(grid, parent, axis, p).map(|s| (p, s)))
        .collect()
}

/// Re-chooses the degrees of `parent`, axis by axis, as the argmin of
/// [`greedy_score`] (smallest degree on ties).
pub fn modification_greedy(grid: &mut SparseGrid, parent: &MultiKnot, p_max: u8) -> Result<(), RefineError> {
    for axis in 0..parent.dim() {
        let scores = greedy_scores(grid, parent, axis, p_max)?;
        let Some(&(mut best, mut best_score)) = scores.first() else {
            continue;
        };
        for &(p, s) in &scores[1..] {
            if s < best_score {
                best = p;
                best_score = s;
            }
        }
        let current = grid.node(parent).expect("scored parent exists").spec.degree(axis);
        if best != current {
            grid.set_degree(parent, axis, best)?;
        }
    }
    Ok(())
}

/// Groups evaluated knots by axis line: knots agreeing in every component
/// except one axis.
#[derive(Debug, Clone)]
pub struct LineIndex {
    dim: usize,
    /// hash of (axis, other components) -> positions in the grid's cache
    lines: HashMap<u64, Vec<u32>>,
}

impl LineIndex {
    pub fn new(dim: usize) -> Self {
        LineIndex {
            dim,
            lines: HashMap::new(),
        }
    }

    /// Index of every value currently cached in `grid`.
    pub fn from_grid(grid: &SparseGrid) -> Self {
        let mut idx = LineIndex::new(grid.dim());
        for i in 0..grid.cache().len() {
            idx.insert(grid, i);
        }
        idx
    }

    fn key(knot: &MultiKnot, axis: usize) -> u64 {
        let mut h = DefaultHasher::new();
        axis.hash(&mut h);
        for (d, k) in knot.components().iter().enumerate() {
            if d != axis {
                k.hash(&mut h);
            }
        }
        h.finish()
    }

    /// Registers the cache entry at position `cache_pos`.
    pub fn insert(&mut self, grid: &SparseGrid, cache_pos: usize) {
        let (knot, _) = grid.cache().get_index(cache_pos).expect("cache position");
        for axis in 0..self.dim {
            self.lines
                .entry(Self::key(knot, axis))
                .or_default()
                .push(cache_pos as u32);
        }
    }

    /// Evaluated `(coordinate along axis, value)` pairs on the axis line
    /// through `knot`, the knot itself included when evaluated.
    pub fn samples(&self, grid: &SparseGrid, knot: &MultiKnot, axis: usize) -> Vec<(f64, f64)> {
        let Some(entries) = self.lines.get(&Self::key(knot, axis)) else {
            return Vec::new();
        };
        entries
            .iter()
            .filter_map(|&i| {
                let (other, &v) = grid.cache().get_index(i as usize)?;
                let same_line = other
                    .components()
                    .iter()
                    .zip(knot.components())
                    .enumerate()
                    .all(|(d, (a, b))| d == axis || a == b);
                same_line.then(|| (other.component(axis).position(), v))
            })
            .collect()
    }
}
