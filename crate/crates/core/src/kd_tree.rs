//! Resilient k-d tree with orthogonal range queries.
//!
//! Points live in faulty memory as consecutive coordinate tuples. The tree
//! is implicit: every node halves its region, so node ranges follow from
//! `n` alone and are recomputed in registers while descending. Each
//! internal node stores two replicated bounds on its split axis, the
//! largest key on the left and the smallest key on the right, written
//! after the points have been partitioned. Leaves hold `O(delta)` points
//! and are always scanned in full.

use std::ops::Range;

use serde::Serialize;

use crate::deterministic_select::deterministic_select;
use crate::error::{FramError, Result};
use crate::primitives::{replicated_read, replicated_write, ReplicatedValue};
use crate::sim::{Delta, FaultyMemory, RegionKind, Value, Word, NEG_INF, POS_INF};

pub const DEFAULT_LEAF_FACTOR: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct KdConfig {
    pub dims: usize,
    /// Leaf capacity multiplier.
    pub b: usize,
    pub delta: Delta,
}

impl KdConfig {
    pub fn new(dims: usize, delta: u64) -> KdConfig {
        KdConfig {
            dims,
            b: DEFAULT_LEAF_FACTOR,
            delta: Delta::Known(delta),
        }
    }

    pub fn leaf_capacity(&self) -> Result<usize> {
        Ok((self.b * self.delta.require("k-d tree")? as usize).max(1))
    }
}

/// Reliable description of a built tree.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct KdTree {
    pub dims: usize,
    pub n: usize,
    /// Levels of internal nodes; leaves sit at this depth.
    pub depth: u32,
    pub leaf_capacity: usize,
    /// Faulty cells of the point tuples.
    pub points: Range<usize>,
    /// Faulty cells of the replicated node bounds.
    pub nodes: Range<usize>,
    pub copies: usize,
    pub build_steps: u64,
}

impl KdTree {
    fn bounds(&self, v: usize) -> (ReplicatedValue, ReplicatedValue) {
        let g = (self.copies - 1) / 2;
        let base = self.nodes.start + (v - 1) * 2 * self.copies;
        (
            ReplicatedValue::new(base, g),
            ReplicatedValue::new(base + self.copies, g),
        )
    }

    fn key(&self, slot: usize, axis: usize) -> usize {
        self.points.start + slot * self.dims + axis
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

/// Axis-aligned box, inclusive on both ends. Lives in registers.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Rect {
    pub lo: Vec<Value>,
    pub hi: Vec<Value>,
}

impl Rect {
    pub fn new(lo: Vec<Value>, hi: Vec<Value>) -> Rect {
        assert_eq!(lo.len(), hi.len());
        Rect { lo, hi }
    }

    pub fn is_empty(&self) -> bool {
        self.lo.iter().zip(&self.hi).any(|(l, h)| l > h)
    }

    pub fn contains(&self, p: &[Value]) -> bool {
        p.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(x, (l, h))| l <= x && x <= h)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct QueryResult {
    /// Slots of reported points.
    pub slots: Vec<usize>,
    pub visited_nodes: u64,
    pub scanned_points: u64,
    pub steps: u64,
}

impl QueryResult {
    /// Nodes visited plus points scanned.
    pub fn cost(&self) -> u64 {
        self.visited_nodes + self.scanned_points
    }
}

fn halves(r: Range<usize>) -> (Range<usize>, Range<usize>) {
    let mid = r.start + r.len() / 2;
    (r.start..mid, mid..r.end)
}

fn swap_points(mem: &mut FaultyMemory, tree: &KdTree, a: usize, b: usize) {
    for axis in 0..tree.dims {
        mem.swap(tree.key(a, axis), tree.key(b, axis));
    }
}

/// Three-way partition of the point slots in `r` by their `axis` key.
fn partition_points(mem: &mut FaultyMemory, tree: &KdTree, r: Range<usize>, axis: usize, x: Value) {
    let (mut lt, mut i, mut gt) = (r.start, r.start, r.end);
    while i < gt {
        let v = mem.read(tree.key(i, axis));
        if v < x {
            if lt != i {
                swap_points(mem, tree, lt, i);
            }
            lt += 1;
            i += 1;
        } else if v > x {
            gt -= 1;
            if gt != i {
                swap_points(mem, tree, i, gt);
            }
        } else {
            i += 1;
        }
    }
}

/// Builds the tree over the points stored in `mem`'s input range, which
/// must hold `n * cfg.dims` coordinates.
pub fn kd_build(mem: &mut FaultyMemory, cfg: KdConfig) -> Result<KdTree> {
    if cfg.dims == 0 || cfg.b == 0 {
        return Err(FramError::InvalidSpec(
            "dims and b must be at least 1".into(),
        ));
    }
    let cap = cfg.leaf_capacity()?;
    let g = cfg.delta.require("k-d tree")? as usize;
    let cells = mem.input_len();
    if !cells.is_multiple_of(cfg.dims) {
        return Err(FramError::InvalidSpec(format!(
            "{cells} coordinates do not form {}-d points",
            cfg.dims
        )));
    }
    let n = cells / cfg.dims;
    let mut depth = 0;
    while n.div_ceil(1 << depth) > cap {
        depth += 1;
    }
    let copies = 2 * g + 1;
    let internal = (1usize << depth) - 1;
    let start_steps = mem.steps();
    let node_base = mem.alloc(internal * 2 * copies);
    let mut tree = KdTree {
        dims: cfg.dims,
        n,
        depth,
        leaf_capacity: cap,
        points: 0..cells,
        nodes: node_base..node_base + internal * 2 * copies,
        copies,
        build_steps: 0,
    };
    mem.push_region(RegionKind::Replica, tree.nodes.clone());

    // Level by level; the work list is a reliable register file of
    // O(n / cap) ranges.
    let mut level: Vec<Range<usize>> = std::iter::once(0..n).collect();
    for d in 0..depth {
        let axis = d as usize % cfg.dims;
        let mut next = Vec::with_capacity(level.len() * 2);
        for (j, r) in level.into_iter().enumerate() {
            let v = (1usize << d) + j;
            let (left, right) = halves(r.clone());
            if !left.is_empty() {
                let m = r.len();
                let sc = mem.alloc(m);
                mem.push_region(RegionKind::Scratch, sc..sc + m);
                for (t, slot) in r.clone().enumerate() {
                    let key = mem.read(tree.key(slot, axis));
                    mem.write(sc + t, key);
                }
                let x = deterministic_select(mem, sc..sc + m, m.div_ceil(2))?.value;
                mem.pop_region();
                mem.release(sc);
                partition_points(mem, &tree, r.clone(), axis, x);
            }
            let mut left_max = NEG_INF;
            for slot in left.clone() {
                left_max = left_max.max(mem.read(tree.key(slot, axis)));
            }
            let mut right_min = POS_INF;
            for slot in right.clone() {
                right_min = right_min.min(mem.read(tree.key(slot, axis)));
            }
            let (lm, rm) = tree.bounds(v);
            replicated_write(mem, lm, left_max);
            replicated_write(mem, rm, right_min);
            next.push(left);
            next.push(right);
        }
        level = next;
    }
    mem.pop_region();
    tree.build_steps = mem.steps() - start_steps;
    Ok(tree)
}

/// Reports every point in `rect` whose cells were not corrupted, and
/// possibly some corrupted ones.
pub fn kd_range_query(mem: &mut FaultyMemory, tree: &KdTree, rect: &Rect) -> QueryResult {
    assert_eq!(rect.lo.len(), tree.dims, "rect dimension mismatch");
    let start_steps = mem.steps();
    let mut out = QueryResult::default();
    if rect.is_empty() || tree.is_empty() {
        return out;
    }
    let mut point = vec![0; tree.dims];
    // Register stack of depth <= tree.depth + 1.
    let mut stack = vec![(1usize, 0u32, 0..tree.n)];
    while let Some((v, d, r)) = stack.pop() {
        out.visited_nodes += 1;
        if d == tree.depth {
            for slot in r {
                out.scanned_points += 1;
                for (axis, c) in point.iter_mut().enumerate() {
                    *c = mem.read(tree.key(slot, axis));
                }
                if rect.contains(&point) {
                    out.slots.push(slot);
                }
            }
            continue;
        }
        let axis = d as usize % tree.dims;
        let (lm, rm) = tree.bounds(v);
        let (left, right) = halves(r);
        if rect.hi[axis] >= replicated_read(mem, rm) {
            stack.push((2 * v + 1, d + 1, right));
        }
        if rect.lo[axis] <= replicated_read(mem, lm) {
            stack.push((2 * v, d + 1, left));
        }
    }
    out.steps = mem.steps() - start_steps;
    out
}

/// Coordinates of the point in `slot`, read without charging steps.
pub fn point_at(words: &[Word], tree: &KdTree, slot: usize) -> Vec<Value> {
    (0..tree.dims)
        .map(|a| words[tree.key(slot, a)].value)
        .collect()
}

/// Slots whose cells are all uncorrupted, that lie in `rect`, and that
/// `reported` lacks.
pub fn untainted_misses(
    words: &[Word],
    tree: &KdTree,
    rect: &Rect,
    reported: &[usize],
) -> Vec<usize> {
    let mut seen = vec![false; tree.n];
    for &s in reported {
        seen[s] = true;
    }
    (0..tree.n)
        .filter(|&s| {
            !seen[s]
                && (0..tree.dims).all(|a| !words[tree.key(s, a)].tainted)
                && rect.contains(&point_at(words, tree, s))
        })
        .collect()
}

/// Brute-force answer over the current cell values.
pub fn brute_force(words: &[Word], tree: &KdTree, rect: &Rect) -> Vec<usize> {
    (0..tree.n)
        .filter(|&s| rect.contains(&point_at(words, tree, s)))
        .collect()
}

pub fn flatten_points(points: &[Vec<Value>]) -> Vec<Value> {
    points.iter().flatten().copied().collect()
}

/// Decodes little-endian 64-bit coordinates, `dims` per point.
pub fn points_from_le_bytes(bytes: &[u8], dims: usize) -> Result<Vec<Vec<Value>>> {
    if dims == 0 || !bytes.len().is_multiple_of(8 * dims) {
        return Err(FramError::InvalidSpec(format!(
            "{} bytes do not form {dims}-d points of i64",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8 * dims)
        .map(|p| {
            p.chunks_exact(8)
                .map(|c| Value::from_le_bytes(c.try_into().unwrap()))
                .collect()
        })
        .collect())
}
