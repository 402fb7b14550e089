//! The adaptive sparse grid: accepted knots with their hierarchical surpluses
//! and basis degrees, the interpolant they define, and a function value cache.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use indexmap::IndexMap;
use thiserror::Error;

use crate::basis::{BasisError, BasisSpec1D, BasisSpecNd, TensorBasis};
use crate::domain::{Domain, DomainError};
use crate::knot::{Knot1D, KnotError, MultiKnot};

#[derive(Debug, Error)]
pub enum GridError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error(transparent)]
    Knot(#[from] KnotError),
    #[error("knot has {got} dimensions, grid has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("knot {0} is already in the grid")]
    Duplicate(MultiKnot),
    #[error("knot {0} has no parent in the grid")]
    Orphan(MultiKnot),
    #[error("the first knot inserted must be the root, got {0}")]
    MissingRoot(MultiKnot),
    #[error("knot {0} is not in the grid")]
    NotFound(MultiKnot),
    #[error("basis spec does not belong to knot {0}")]
    SpecMismatch(MultiKnot),
    #[error("degree of {knot} is fixed: finer knot {finer} lies in its support")]
    DegreeLocked { knot: MultiKnot, finer: MultiKnot },
    #[error("grid dump line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// An accepted knot with its surplus and basis.
#[derive(Debug, Clone, PartialEq)]
pub struct GridNode {
    pub knot: MultiKnot,
    pub weight: f64,
    pub spec: BasisSpecNd,
}

impl GridNode {
    pub fn new(knot: MultiKnot, weight: f64, degrees: &[u8]) -> Result<Self, BasisError> {
        let spec = BasisSpecNd::new(&knot, degrees)?;
        Ok(GridNode { knot, weight, spec })
    }
}

#[derive(Debug, Clone)]
struct Slot {
    node: GridNode,
    basis: TensorBasis,
    /// Grid nodes that have this node as one of their parents.
    children: Vec<u32>,
}

/// Hierarchical interpolant on a box, built on the reference cube.
#[derive(Debug, Clone)]
pub struct SparseGrid {
    domain: Domain,
    slots: Vec<Slot>,
    index: HashMap<MultiKnot, usize>,
    stages: Vec<Vec<usize>>,
    cache: IndexMap<MultiKnot, f64>,
    params: Vec<(String, String)>,
}

impl SparseGrid {
    pub fn new(domain: Domain) -> Self {
        SparseGrid {
            domain,
            slots: Vec::new(),
            index: HashMap::new(),
            stages: Vec::new(),
            cache: IndexMap::new(),
            params: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Nodes in insertion order.
    pub fn nodes(&self) -> impl ExactSizeIterator<Item = &GridNode> {
        self.slots.iter().map(|s| &s.node)
    }

    pub fn node(&self, knot: &MultiKnot) -> Option<&GridNode> {
        self.index.get(knot).map(|&i| &self.slots[i].node)
    }

    pub fn contains(&self, knot: &MultiKnot) -> bool {
        self.index.contains_key(knot)
    }

    pub(crate) fn slot_of(&self, knot: &MultiKnot) -> Option<usize> {
        self.index.get(knot).copied()
    }

    pub(crate) fn node_at(&self, i: usize) -> &GridNode {
        &self.slots[i].node
    }

    pub(crate) fn basis_at(&self, i: usize) -> &TensorBasis {
        &self.slots[i].basis
    }

    /// Number of stages holding at least one node (stage `q` holds the knots
    /// with level sum `q`).
    pub fn num_stages(&self) -> usize {
        self.stages.len()
    }

    pub fn stage(&self, q: usize) -> impl Iterator<Item = &GridNode> {
        self.stages
            .get(q)
            .into_iter()
            .flatten()
            .map(|&i| &self.slots[i].node)
    }

    pub fn stage_sizes(&self) -> Vec<usize> {
        self.stages.iter().map(Vec::len).collect()
    }

    pub fn params(&self) -> &[(String, String)] {
        &self.params
    }

    pub fn param(&self, key: &str) -> Option<&str> {
        self.params
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Attach a key/value pair echoed in dumps. Replaces an existing key.
    pub fn set_param(&mut self, key: impl Into<String>, value: impl Into<String>) {
        let key = key.into();
        let value = value.into();
        match self.params.iter_mut().find(|(k, _)| *k == key) {
            Some(slot) => slot.1 = value,
            None => self.params.push((key, value)),
        }
    }

    pub fn cached_value(&self, knot: &MultiKnot) -> Option<f64> {
        self.cache.get(knot).copied()
    }

    /// Stores a function value. Returns false if the knot was already cached.
    pub fn record_value(&mut self, knot: MultiKnot, value: f64) -> bool {
        match self.cache.entry(knot) {
            indexmap::map::Entry::Occupied(_) => false,
            indexmap::map::Entry::Vacant(e) => {
                e.insert(value);
                true
            }
        }
    }

    /// Number of distinct knots with a cached function value.
    pub fn num_evaluations(&self) -> usize {
        self.cache.len()
    }

    pub fn cache(&self) -> &IndexMap<MultiKnot, f64> {
        &self.cache
    }

    /// Interpolant at a native point.
    pub fn evaluate(&self, x: &[f64]) -> Result<f64, GridError> {
        self.domain.check(x)?;
        let y = self.domain.to_reference(x);
        Ok(self.evaluate_reference(&y))
    }

    /// Interpolant at a point of the reference cube. Only nodes whose support
    /// box contains `y` are visited; they are found by walking down the knot
    /// tree from the root, since supports are nested.
    pub fn evaluate_reference(&self, y: &[f64]) -> f64 {
        let active = self.supporting_nodes(y);
        active
            .iter()
            .map(|&i| {
                let s = &self.slots[i];
                s.node.weight * s.basis.eval(y)
            })
            .sum()
    }

    /// Same value as [`evaluate_reference`](Self::evaluate_reference) but
    /// visits every node.
    pub fn evaluate_reference_exhaustive(&self, y: &[f64]) -> f64 {
        self.slots
            .iter()
            .filter(|s| s.basis.support_contains(y))
            .map(|s| s.node.weight * s.basis.eval(y))
            .sum()
    }

    /// Interpolant with the basis of node `slot` temporarily replaced.
    pub(crate) fn evaluate_with_override(&self, y: &[f64], slot: usize, basis: &TensorBasis) -> f64 {
        let active = self.supporting_nodes(y);
        active
            .iter()
            .map(|&i| {
                let s = &self.slots[i];
                let b = if i == slot { basis } else { &s.basis };
                s.node.weight * b.eval(y)
            })
            .sum()
    }

    /// Indices of all nodes whose closed support box contains `y`, ascending.
    fn supporting_nodes(&self, y: &[f64]) -> Vec<usize> {
        let mut active = Vec::new();
        if self.slots.is_empty() {
            return active;
        }
        let mut frontier = vec![0usize];
        let mut next = Vec::new();
        while !frontier.is_empty() {
            active.extend_from_slice(&frontier);
            next.clear();
            for &i in &frontier {
                for &c in &self.slots[i].children {
                    let c = c as usize;
                    if self.slots[c].basis.support_contains(y) {
                        next.push(c);
                    }
                }
            }
            next.sort_unstable();
            next.dedup();
            std::mem::swap(&mut frontier, &mut next);
        }
        active.sort_unstable();
        active
    }

    /// Hierarchical surplus of a knot not yet in the grid.
    pub fn compute_surplus(&self, knot: &MultiKnot, f_value: f64) -> Result<f64, GridError> {
        self.check_dim(knot)?;
        if self.contains(knot) {
            return Err(GridError::Duplicate(knot.clone()));
        }
        Ok(f_value - self.evaluate_reference(&knot.position()))
    }

    /// Adds a node. The first node must be the root; every later node needs
    /// at least one parent already in the grid.
    pub fn insert(&mut self, node: GridNode) -> Result<usize, GridError> {
        self.check_dim(&node.knot)?;
        if !node.spec.is_aligned_with(&node.knot) {
            return Err(GridError::SpecMismatch(node.knot));
        }
        if self.contains(&node.knot) {
            return Err(GridError::Duplicate(node.knot));
        }
        if self.slots.is_empty() && !node.knot.is_root() {
            return Err(GridError::MissingRoot(node.knot));
        }
        let parents: Vec<usize> = node
            .knot
            .parents()
            .iter()
            .filter_map(|(p, _)| self.slot_of(p))
            .collect();
        if !node.knot.is_root() && parents.is_empty() {
            return Err(GridError::Orphan(node.knot));
        }
        let children: Vec<u32> = node
            .knot
            .children()
            .iter()
            .filter_map(|(c, _)| self.slot_of(c).map(|i| i as u32))
            .collect();

        let idx = self.slots.len();
        for p in parents {
            self.slots[p].children.push(idx as u32);
        }
        let stage = node.knot.level_sum() as usize;
        if self.stages.len() <= stage {
            self.stages.resize_with(stage + 1, Vec::new);
        }
        self.stages[stage].push(idx);
        self.index.insert(node.knot.clone(), idx);
        self.slots.push(Slot {
            basis: TensorBasis::new(&node.spec),
            node,
            children,
        });
        Ok(idx)
    }

    /// Changes the degree of one axis of a stored node. Weights are kept, so
    /// the change is refused once a finer knot lies in the node's support:
    /// that knot's surplus was computed against the old basis.
    pub fn set_degree(&mut self, knot: &MultiKnot, dim: usize, degree: u8) -> Result<(), GridError> {
        let idx = self
            .slot_of(knot)
            .ok_or_else(|| GridError::NotFound(knot.clone()))?;
        if dim >= self.dim() {
            return Err(GridError::DimensionMismatch {
                expected: self.dim(),
                got: dim + 1,
            });
        }
        let spec1 = BasisSpec1D::new(knot.component(dim), degree)?;
        let stage = knot.level_sum() as usize;
        let slot = &self.slots[idx];
        for finer in self.stages.iter().skip(stage + 1).flatten() {
            let other = &self.slots[*finer].node.knot;
            if slot.basis.support_contains(&other.position()) {
                return Err(GridError::DegreeLocked {
                    knot: knot.clone(),
                    finer: other.clone(),
                });
            }
        }
        let slot = &mut self.slots[idx];
        slot.node.spec.set_component(dim, spec1);
        slot.basis.set_factor(dim, &spec1);
        Ok(())
    }

    fn check_dim(&self, knot: &MultiKnot) -> Result<(), GridError> {
        if knot.dim() != self.dim() {
            return Err(GridError::DimensionMismatch {
                expected: self.dim(),
                got: knot.dim(),
            });
        }
        Ok(())
    }

    pub fn dump(&self) -> GridDump {
        GridDump {
            domain: self.domain.clone(),
            params: self.params.clone(),
            records: self
                .slots
                .iter()
                .map(|s| NodeRecord {
                    levels: s.node.knot.levels(),
                    indices: s.node.knot.indices(),
                    position: s.node.knot.position(),
                    weight: s.node.weight,
                    degrees: s.node.spec.degrees(),
                })
                .collect(),
        }
    }

    /// Rebuilds a grid from a dump. The function value cache starts empty.
    pub fn from_dump(dump: &GridDump) -> Result<Self, GridError> {
        let mut grid = SparseGrid::new(dump.domain.clone());
        grid.params = dump.params.clone();
        for (i, rec) in dump.records.iter().enumerate() {
            let line = dump.record_line(i);
            let at = |e: GridError| GridError::Parse {
                line,
                message: e.to_string(),
            };
            if rec.levels.len() != grid.dim()
                || rec.indices.len() != grid.dim()
                || rec.position.len() != grid.dim()
                || rec.degrees.len() != grid.dim()
            {
                return Err(GridError::Parse {
                    line,
                    message: format!("record does not have {} components", grid.dim()),
                });
            }
            let knot = MultiKnot::from_levels_indices(&rec.levels, &rec.indices)
                .map_err(|e| at(e.into()))?;
            if knot.position() != rec.position {
                return Err(GridError::Parse {
                    line,
                    message: format!("position does not match knot {knot}"),
                });
            }
            let node = GridNode::new(knot, rec.weight, &rec.degrees).map_err(|e| at(e.into()))?;
            grid.insert(node).map_err(at)?;
        }
        Ok(grid)
    }

    pub fn write_dump(&self, path: impl AsRef<Path>) -> Result<(), GridError> {
        std::fs::write(path, self.dump().to_text())?;
        Ok(())
    }

    pub fn read_dump(path: impl AsRef<Path>) -> Result<Self, GridError> {
        let text = std::fs::read_to_string(path)?;
        SparseGrid::from_dump(&GridDump::parse(&text)?)
    }
}

/// One node of a [`GridDump`].
#[derive(Debug, Clone, PartialEq)]
pub struct NodeRecord {
    pub levels: Vec<u32>,
    pub indices: Vec<u64>,
    pub position: Vec<f64>,
    pub weight: f64,
    pub degrees: Vec<u8>,
}

/// Text serialization of a grid.
///
/// ```text
/// hpsg-grid 1
/// dim 2
/// domain-lo 0.0000000000000000e0 0.0000000000000000e0
/// domain-hi 1.0000000000000000e0 1.0000000000000000e0
/// param strategy greedy
/// nodes 5
/// node 0,0 1,1 0.0000000000000000e0,0.0000000000000000e0 2.5e0 0,0
/// ```
///
/// A node line holds levels, indices, positions, weight and degrees. Floats
/// carry 17 significant digits, which round-trips every `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDump {
    pub domain: Domain,
    pub params: Vec<(String, String)>,
    pub records: Vec<NodeRecord>,
}

const DUMP_MAGIC: &str = "hpsg-grid 1";

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn join<T>(items: &[T], f: impl Fn(&T) -> String) -> String {
    items.iter().map(f).collect::<Vec<_>>().join(",")
}

impl GridDump {
    /// Lines before the first node record.
    fn header_lines(&self) -> usize {
        5 + self.params.len()
    }

    /// 1-based line number of record `i` in [`to_text`](Self::to_text).
    fn record_line(&self, i: usize) -> usize {
        self.header_lines() + i + 1
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let dim = self.domain.dim();
        let floats = |v: &[f64]| v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(" ");
        writeln!(out, "{DUMP_MAGIC}").unwrap();
        writeln!(out, "dim {dim}").unwrap();
        writeln!(out, "domain-lo {}", floats(self.domain.lo())).unwrap();
        writeln!(out, "domain-hi {}", floats(self.domain.hi())).unwrap();
        for (k, v) in &self.params {
            writeln!(out, "param {k} {v}").unwrap();
        }
        writeln!(out, "nodes {}", self.records.len()).unwrap();
        for r in &self.records {
            writeln!(
                out,
                "node {} {} {} {} {}",
                join(&r.levels, |l| l.to_string()),
                join(&r.indices, |j| j.to_string()),
                join(&r.position, |x| fmt_f64(*x)),
                fmt_f64(r.weight),
                join(&r.degrees, |p| p.to_string()),
            )
            .unwrap();
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, GridError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut next = |what: &str| {
            lines.next().ok_or_else(|| GridError::Parse {
                line: 0,
                message: format!("unexpected end of input, expected {what}"),
            })
        };
        let err = |line: usize, message: String| GridError::Parse { line, message };

        let (ln, magic) = next("header")?;
        if magic.trim() != DUMP_MAGIC {
            return Err(err(ln, format!("expected `{DUMP_MAGIC}`")));
        }
        let (ln, l) = next("dim")?;
        let dim: usize = keyed(l, "dim")
            .and_then(|v| v.trim().parse().ok())
            .filter(|&d| d > 0)
            .ok_or_else(|| err(ln, "expected `dim <n>`".into()))?;
        let mut bound = |key: &str| -> Result<Vec<f64>, GridError> {
            let (ln, l) = next(key)?;
            let v = keyed(l, key)
                .ok_or_else(|| err(ln, format!("expected `{key}`")))
                .and_then(|v| parse_list::<f64>(v, ' ').map_err(|m| err(ln, m)))?;
            if v.len() != dim {
                return Err(err(ln, format!("expected {dim} bounds")));
            }
            Ok(v)
        };
        let lo = bound("domain-lo")?;
        let hi = bound("domain-hi")?;
        let domain = Domain::new(lo, hi).map_err(|e| err(ln + 2, e.to_string()))?;

        let mut params = Vec::new();
        let count = loop {
            let (ln, l) = next("nodes")?;
            if let Some(rest) = keyed(l, "param") {
                let (k, v) = rest
                    .split_once(' ')
                    .ok_or_else(|| err(ln, "expected `param <key> <value>`".into()))?;
                params.push((k.to_string(), v.to_string()));
            } else if let Some(n) = keyed(l, "nodes") {
                break n
                    .trim()
                    .parse::<usize>()
                    .map_err(|_| err(ln, "expected `nodes <count>`".into()))?;
            } else {
                return Err(err(ln, "expected `param` or `nodes`".into()));
            }
        };

        let mut records = Vec::with_capacity(count);
        for _ in 0..count {
            let (ln, l) = lines.next().ok_or_else(|| {
                err(
                    0,
                    format!("truncated: expected {count} node records, found {}", records.len()),
                )
            })?;
            let rest = keyed(l, "node").ok_or_else(|| err(ln, "expected `node` record".into()))?;
            let fields: Vec<&str> = rest.split_whitespace().collect();
            if fields.len() != 5 {
                return Err(err(ln, format!("expected 5 fields, found {}", fields.len())));
            }
            let rec = (|| -> Result<NodeRecord, String> {
                let weight = fields[3]
                    .parse::<f64>()
                    .map_err(|_| format!("bad weight `{}`", fields[3]))?;
                Ok(NodeRecord {
                    levels: parse_list(fields[0], ',')?,
                    indices: parse_list(fields[1], ',')?,
                    position: parse_list(fields[2], ',')?,
                    weight,
                    degrees: parse_list(fields[4], ',')?,
                })
            })()
            .map_err(|m| err(ln, m))?;
            records.push(rec);
        }
        if let Some((ln, l)) = lines.find(|(_, l)| !l.trim().is_empty()) {
            return Err(err(ln, format!("unexpected trailing content `{l}`")));
        }
        Ok(GridDump {
            domain,
            params,
            records,
        })
    }
}

fn keyed<'a>(line: &'a str, key: &str) -> Option<&'a str> {
    line.strip_prefix(key)?.strip_prefix(' ')
}

fn parse_list<T: std::str::FromStr>(s: &str, sep: char) -> Result<Vec<T>, String> {
    s.split(sep)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<T>().map_err(|_| format!("cannot parse `{t}`")))
        .collect()
}

/// Full-grid piecewise linear interpolant of level `level` on `[-1, 1]`,
/// returned as (knot coordinate, weight) pairs contributing at `x`.
fn linear_nodal_weights(level: u32, x: f64) -> Vec<(f64, f64)> {
    if level == 0 {
        return vec![(0.0, 1.0)];
    }
    let cells = 1u64 << level;
    let h = 2.0 / cells as f64;
    let i = (((x + 1.0) / h).floor() as u64).min(cells - 1);
    let a = -1.0 + i as f64 * h;
    let b = a + h;
    let t = (x - a) / h;
    vec![(a, 1.0 - t), (b, t)]
}

/// Piecewise linear sparse grid interpolant of total level `q` evaluated with
/// the combination formula, i.e. without any hierarchical surpluses.
/// `f` and `x` live on the reference cube; the dimension is `x.len()`.
pub fn smolyak_reference_p1<F: Fn(&[f64]) -> f64>(f: F, q: u32, x: &[f64]) -> f64 {
    let n = x.len() as u32;
    assert!(n > 0);
    let lower = (q + 1).saturating_sub(n);
    let mut total = 0.0;
    let mut levels = vec![0u32; n as usize];
    loop {
        let l: u32 = levels.iter().sum();
        if l >= lower && l <= q {
            let k = q - l;
            let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
            let coeff = sign * binomial(n - 1, k) as f64;
            if coeff != 0.0 {
                total += coeff * tensor_linear_interp(&f, &levels, x);
            }
        }
        // odometer over levels with sum <= q
        let mut d = 0;
        loop {
            if d == levels.len() {
                return total;
            }
            levels[d] += 1;
            if levels.iter().sum::<u32>() <= q {
                break;
            }
            levels[d] = 0;
            d += 1;
        }
    }
}

fn binomial(n: u32, k: u32) -> u64 {
    if k > n {
        return 0;
    }
    (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i + 1) as u64)
}

/// Tensor product of full 1-D piecewise linear interpolants.
pub fn tensor_linear_interp<F: Fn(&[f64]) -> f64>(f: &F, levels: &[u32], x: &[f64]) -> f64 {
    let per_dim: Vec<Vec<(f64, f64)>> = levels
        .iter()
        .zip(x)
        .map(|(&l, &xi)| linear_nodal_weights(l, xi))
        .collect();
    let mut total = 0.0;
    let mut pick = vec![0usize; levels.len()];
    let mut point = vec![0.0; levels.len()];
    loop {
        let mut w = 1.0;
        for (d, &p) in pick.iter().enumerate() {
            point[d] = per_dim[d][p].0;
            w *= per_dim[d][p].1;
        }
        if w != 0.0 {
            total += w * f(&point);
        }
        let mut d = 0;
        loop {
            if d == pick.len() {
                return total;
            }
            pick[d] += 1;
            if pick[d] < per_dim[d].len() {
                break;
            }
            pick[d] = 0;
            d += 1;
        }
    }
}

/// Convenience for building grids by hand: the knot `(level, index)` list.
pub fn multi_knot(parts: &[(u32, u64)]) -> Result<MultiKnot, KnotError> {
    parts
        .iter()
        .map(|&(l, j)| Knot1D::new(l, j))
        .collect::<Result<Vec<_>, _>>()
        .map(MultiKnot::new)
}
