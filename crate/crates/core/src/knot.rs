//! Dyadic knot tree on the reference interval `[-1, 1]`.
//!
//! Knots are addressed by an integer `(level, index)` pair and never by their
//! floating point position, so they hash and compare exactly. The tree is
//!
//! ```text
//!                 0                      level 0
//!          -1            1               level 1 (one child each)
//!         -1/2          1/2              level 2
//!     -3/4    -1/4   1/4    3/4          level 3
//! ```
//!
//! and every knot of level `l >= 2` has two children at `x ± 2^-l`.

use std::fmt;

use arrayvec::ArrayVec;
use thiserror::Error;

/// Deepest level a knot may live on. Positions stay exact in `f64` up to here.
pub const MAX_LEVEL: u8 = 50;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum KnotError {
    #[error("level {0} exceeds the maximum supported level {MAX_LEVEL}")]
    LevelTooDeep(u32),
    #[error("index {index} is out of range 1..={count} for level {level}")]
    IndexOutOfRange { level: u8, index: u64, count: u64 },
}

/// Number of new knots introduced on `level`.
pub fn knots_on_level(level: u8) -> u64 {
    match level {
        0 => 1,
        1 => 2,
        l => 1u64 << (l - 1),
    }
}

/// A knot of the one-dimensional hierarchical tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Knot1D {
    level: u8,
    index: u64,
}

impl Knot1D {
    pub const ROOT: Knot1D = Knot1D { level: 0, index: 1 };

    pub fn new(level: u32, index: u64) -> Result<Self, KnotError> {
        if level > MAX_LEVEL as u32 {
            return Err(KnotError::LevelTooDeep(level));
        }
        let level = level as u8;
        let count = knots_on_level(level);
        if index == 0 || index > count {
            return Err(KnotError::IndexOutOfRange {
                level,
                index,
                count,
            });
        }
        Ok(Knot1D { level, index })
    }

    #[inline]
    pub fn level(&self) -> u8 {
        self.level
    }

    #[inline]
    pub fn index(&self) -> u64 {
        self.index
    }

    pub fn is_root(&self) -> bool {
        self.level == 0
    }

    /// Coordinate of the knot in `[-1, 1]`. Exact for every admissible level.
    pub fn position(&self) -> f64 {
        match self.level {
            0 => 0.0,
            1 => 2.0 * self.index as f64 - 3.0,
            l => (2 * self.index - 1) as f64 * half_width(l) - 1.0,
        }
    }

    /// Children in ascending position order. Level-1 knots have a single
    /// child; knots on [`MAX_LEVEL`] have none.
    pub fn children(&self) -> ArrayVec<Knot1D, 2> {
        let mut out = ArrayVec::new();
        match self.level {
            0 => {
                out.push(Knot1D { level: 1, index: 1 });
                out.push(Knot1D { level: 1, index: 2 });
            }
            1 => out.push(Knot1D {
                level: 2,
                index: self.index,
            }),
            l if l < MAX_LEVEL => {
                out.push(Knot1D {
                    level: l + 1,
                    index: 2 * self.index - 1,
                });
                out.push(Knot1D {
                    level: l + 1,
                    index: 2 * self.index,
                });
            }
            _ => {}
        }
        out
    }

    /// The parent knot, or `None` for the root.
    pub fn parent(&self) -> Option<Knot1D> {
        match self.level {
            0 => None,
            1 => Some(Knot1D::ROOT),
            2 => Some(Knot1D {
                level: 1,
                index: self.index,
            }),
            l => Some(Knot1D {
                level: l - 1,
                index: self.index.div_ceil(2),
            }),
        }
    }

    /// Parent, grandparent, ..., root. Length equals the level.
    pub fn ancestors(&self) -> Vec<Knot1D> {
        let mut out = Vec::with_capacity(self.level as usize);
        let mut cur = *self;
        while let Some(p) = cur.parent() {
            out.push(p);
            cur = p;
        }
        out
    }

    pub fn support(&self) -> Support1D {
        match (self.level, self.index) {
            (0, _) => Support1D { lo: -1.0, hi: 1.0 },
            (1, 1) => Support1D { lo: -1.0, hi: 0.0 },
            (1, _) => Support1D { lo: 0.0, hi: 1.0 },
            (l, _) => {
                let x = self.position();
                let h = half_width(l);
                Support1D {
                    lo: x - h,
                    hi: x + h,
                }
            }
        }
    }
}

impl fmt::Display for Knot1D {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.level, self.index)
    }
}

/// `2^(1-l)`, the distance from a level-`l` knot to its support endpoints.
#[inline]
fn half_width(level: u8) -> f64 {
    (2.0f64).powi(1 - level as i32)
}

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Support1D {
    pub lo: f64,
    pub hi: f64,
}

impl Support1D {
    #[inline]
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn contains_interval(&self, other: &Support1D) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }

    /// Intersection of two closed intervals, `None` when disjoint.
    pub fn intersect(&self, other: &Support1D) -> Option<(f64, f64)> {
        let lo = self.lo.max(other.lo);
        let hi = self.hi.min(other.hi);
        (lo <= hi).then_some((lo, hi))
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// A tensor product knot, one [`Knot1D`] per dimension.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiKnot(Box<[Knot1D]>);

impl MultiKnot {
    pub fn new(components: Vec<Knot1D>) -> Self {
        MultiKnot(components.into_boxed_slice())
    }

    pub fn root(dim: usize) -> Self {
        MultiKnot(vec![Knot1D::ROOT; dim].into_boxed_slice())
    }

    pub fn from_levels_indices(levels: &[u32], indices: &[u64]) -> Result<Self, KnotError> {
        levels
            .iter()
            .zip(indices)
            .map(|(&l, &j)| Knot1D::new(l, j))
            .collect::<Result<Vec<_>, _>>()
            .map(MultiKnot::new)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn components(&self) -> &[Knot1D] {
        &self.0
    }

    #[inline]
    pub fn component(&self, d: usize) -> Knot1D {
        self.0[d]
    }

    pub fn level_sum(&self) -> u32 {
        self.0.iter().map(|k| k.level as u32).sum()
    }

    pub fn levels(&self) -> Vec<u32> {
        self.0.iter().map(|k| k.level as u32).collect()
    }

    pub fn indices(&self) -> Vec<u64> {
        self.0.iter().map(|k| k.index).collect()
    }

    pub fn position(&self) -> Vec<f64> {
        self.0.iter().map(Knot1D::position).collect()
    }

    pub fn is_root(&self) -> bool {
        self.0.iter().all(Knot1D::is_root)
    }

    /// Copy with component `d` replaced.
    pub fn with_component(&self, d: usize, k: Knot1D) -> Self {
        let mut v = self.0.clone();
        v[d] = k;
        MultiKnot(v)
    }

    /// All children together with the axis along which each one was obtained,
    /// ordered by axis and then by position.
    pub fn children(&self) -> Vec<(MultiKnot, usize)> {
        let mut out = Vec::with_capacity(2 * self.dim());
        for (d, k) in self.0.iter().enumerate() {
            for c in k.children() {
                out.push((self.with_component(d, c), d));
            }
        }
        out
    }

    /// Parents along every axis whose component is not the root.
    pub fn parents(&self) -> Vec<(MultiKnot, usize)> {
        self.0
            .iter()
            .enumerate()
            .filter_map(|(d, k)| k.parent().map(|p| (self.with_component(d, p), d)))
            .collect()
    }

    /// Closed support box containment test in reference coordinates.
    pub fn support_contains(&self, y: &[f64]) -> bool {
        self.0
            .iter()
            .zip(y)
            .all(|(k, &x)| k.support().contains(x))
    }
}

impl fmt::Display for MultiKnot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, k) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{k}")?;
        }
        write!(f, "]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k(l: u32, j: u64) -> Knot1D {
        Knot1D::new(l, j).unwrap()
    }

    /// Every valid knot up to `max_level`.
    fn all_knots(max_level: u8) -> Vec<Knot1D> {
        (0..=max_level)
            .flat_map(|l| (1..=knots_on_level(l)).map(move |j| k(l as u32, j)))
            .collect()
    }

    #[test]
    fn positions() {
        assert_eq!(k(0, 1).position(), 0.0);
        assert_eq!(k(1, 1).position(), -1.0);
        assert_eq!(k(1, 2).position(), 1.0);
        assert_eq!(k(3, 1).position(), -0.75);
        assert_eq!(k(2, 2).position(), 0.5);
        assert_eq!(k(4, 2).position(), -0.625);
    }

    #[test]
    fn rejects_bad_indices() {
        assert!(Knot1D::new(0, 2).is_err());
        assert!(Knot1D::new(1, 3).is_err());
        assert!(Knot1D::new(3, 0).is_err());
        assert!(Knot1D::new(3, 5).is_err());
        assert!(Knot1D::new(51, 1).is_err());
        assert!(Knot1D::new(50, 1 << 49).is_ok());
    }

    #[test]
    fn deepest_positions_are_exact() {
        let l = MAX_LEVEL as u32;
        let last = k(l, 1 << 49);
        assert_eq!(last.position(), 1.0 - 2f64.powi(-49));
        let first = k(l, 1);
        assert_eq!(first.position(), -1.0 + 2f64.powi(-49));
        assert!(first.children().is_empty());
    }

    #[test]
    fn children_match_tree() {
        let root: Vec<f64> = k(0, 1).children().iter().map(|c| c.position()).collect();
        assert_eq!(root, vec![-1.0, 1.0]);
        let c = k(1, 1).children();
        assert_eq!(c.as_slice(), &[k(2, 1)]);
        assert_eq!(c[0].position(), -0.5);
        assert_eq!(k(1, 2).children().as_slice(), &[k(2, 2)]);
        let c: Vec<f64> = k(2, 1).children().iter().map(|c| c.position()).collect();
        assert_eq!(c, vec![-0.75, -0.25]);
    }

    #[test]
    fn parents_and_ancestors() {
        assert_eq!(k(3, 1).parent(), Some(k(2, 1)));
        assert_eq!(k(1, 2).parent(), Some(k(0, 1)));
        assert_eq!(k(0, 1).parent(), None);

        let anc: Vec<f64> = k(4, 2).ancestors().iter().map(|a| a.position()).collect();
        assert_eq!(anc, vec![-0.75, -0.5, -1.0, 0.0]);
        let anc: Vec<f64> = k(3, 1).ancestors().iter().map(|a| a.position()).collect();
        assert_eq!(anc, vec![-0.5, -1.0, 0.0]);
        assert!(k(0, 1).ancestors().is_empty());
    }

    #[test]
    fn supports() {
        assert_eq!(k(0, 1).support(), Support1D { lo: -1.0, hi: 1.0 });
        assert_eq!(k(1, 1).support(), Support1D { lo: -1.0, hi: 0.0 });
        assert_eq!(k(3, 1).support(), Support1D { lo: -1.0, hi: -0.5 });
        assert_eq!(k(2, 2).support(), Support1D { lo: 0.0, hi: 1.0 });
    }

    #[test]
    fn round_trip_and_ancestor_count() {
        for kn in all_knots(20).into_iter().filter(|k| k.level() <= 12 || k.index() < 64) {
            for c in kn.children() {
                assert_eq!(c.parent(), Some(kn));
            }
            assert_eq!(kn.ancestors().len(), kn.level() as usize);
        }
        // sparse sample at deep levels
        for l in 13..=20u32 {
            let count = knots_on_level(l as u8);
            for j in [1, 2, count / 3 + 1, count - 1, count] {
                let kn = k(l, j);
                for c in kn.children() {
                    assert_eq!(c.parent(), Some(kn));
                }
                assert_eq!(kn.ancestors().len(), l as usize);
            }
        }
    }

    #[test]
    fn same_level_supports_touch_at_most_once() {
        for l in 1..=10u8 {
            let n = knots_on_level(l);
            for j1 in 1..=n {
                for j2 in (j1 + 1)..=n {
                    let s1 = k(l as u32, j1).support();
                    let s2 = k(l as u32, j2).support();
                    match s1.intersect(&s2) {
                        Some((a, b)) => {
                            assert_eq!(j2 - j1, 1);
                            assert_eq!(a, b);
                        }
                        None => assert!(j2 - j1 > 1),
                    }
                }
            }
        }
    }

    #[test]
    fn supports_are_nested() {
        for kn in all_knots(12) {
            for c in kn.children() {
                assert!(kn.support().contains_interval(&c.support()));
            }
        }
    }

    #[test]
    fn support_endpoints_are_ancestors() {
        for kn in all_knots(12).into_iter().filter(|k| k.level() >= 1) {
            let anc: Vec<f64> = kn.ancestors().iter().map(|a| a.position()).collect();
            let s = kn.support();
            if kn.level() == 1 {
                // the knot itself is one endpoint
                assert!(anc.contains(&0.0));
                continue;
            }
            assert!(anc.contains(&s.lo) && anc.contains(&s.hi));
        }
    }

    #[test]
    fn only_boundary_ancestors_inside_closed_support() {
        let knots = all_knots(12);
        for kn in knots.iter().filter(|k| k.level() >= 2) {
            let s = kn.support();
            let inside: Vec<Knot1D> = knots
                .iter()
                .filter(|o| o.level() < kn.level() && s.contains(o.position()))
                .copied()
                .collect();
            assert_eq!(inside.len(), 2, "{kn}");
            let anc = kn.ancestors();
            for o in &inside {
                assert!(anc.contains(o));
                assert!(o.position() == s.lo || o.position() == s.hi);
            }
        }
    }

    #[test]
    fn multi_children() {
        let root = MultiKnot::root(2);
        let pos: Vec<Vec<f64>> = root.children().iter().map(|(c, _)| c.position()).collect();
        assert_eq!(
            pos,
            vec![vec![-1.0, 0.0], vec![1.0, 0.0], vec![0.0, -1.0], vec![0.0, 1.0]]
        );

        let kn = MultiKnot::new(vec![k(1, 1), k(0, 1)]);
        let ch = kn.children();
        let pos: Vec<Vec<f64>> = ch.iter().map(|(c, _)| c.position()).collect();
        assert_eq!(
            pos,
            vec![vec![-0.5, 0.0], vec![-1.0, -1.0], vec![-1.0, 1.0]]
        );
        for (c, _) in &ch {
            assert_eq!(c.level_sum(), kn.level_sum() + 1);
        }

        let one = MultiKnot::new(vec![k(2, 1)]);
        assert_eq!(one.children().len(), 2);
    }

    #[test]
    fn multi_parents_invert_children() {
        let kn = MultiKnot::new(vec![k(2, 1), k(3, 4), k(0, 1)]);
        for (c, d) in kn.children() {
            assert!(c.parents().contains(&(kn.clone(), d)));
        }
        assert_eq!(kn.parents().len(), 2);
        assert!(MultiKnot::root(3).parents().is_empty());
    }
}
