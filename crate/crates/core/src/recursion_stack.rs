//! Two-stack recursion for deterministic selection.
//!
//! The reliable stack keeps 9 bits per call: the child type and residues of
//! the parent's size, enough to recompute that size exactly from the
//! child's. Everything bulky lives in faulty memory: the child's copy of its
//! subarray and `2n + 1` copies of each of `k`, `lb`, `ub`.

use std::ops::Range;

use serde::Serialize;

use crate::error::Result;
use crate::primitives::{replicated_read, replicated_write, ReplicatedValue};
use crate::sim::{FaultyMemory, RegionKind, Value};

pub const FRAME_BITS: usize = 9;

/// Pivot window margin: accepted pivots have rank in `[f, n - f]`.
pub fn f_cut(n: usize) -> i64 {
    (3 * n / 10) as i64 - (n / 11) as i64 - 6
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ChildType {
    /// Median-of-medians subproblem.
    First,
    /// Padded subarray on one side of the pivot.
    Second,
}

/// Size of a child called from a node of size `n_u`.
pub fn child_size(ty: ChildType, n_u: usize) -> usize {
    match ty {
        ChildType::First => n_u.div_ceil(5),
        ChildType::Second => (n_u as i64 - f_cut(n_u)) as usize,
    }
}

pub fn invert_size_first(n_v: usize, r5: u8) -> usize {
    assert!(r5 < 5 && n_v >= 1, "bad first-type frame ({n_v}, {r5})");
    if r5 == 0 {
        5 * n_v
    } else {
        5 * (n_v - 1) + r5 as usize
    }
}

pub fn invert_size_second(n_v: usize, r10: u8, r11: u8) -> usize {
    assert!(
        r10 < 10 && r11 < 11,
        "bad second-type residues ({r10}, {r11})"
    );
    // n mod 110 from (n mod 10, n mod 11).
    let r = (0..110)
        .find(|x| x % 10 == r10 as usize && x % 11 == r11 as usize)
        .unwrap();
    let c = ((110.0 / 87.0) * (n_v as f64 - 6.0)).round() as i64;
    let lo = (c - 110).max(1);
    let first = lo + (r as i64 - lo).rem_euclid(110);
    let mut n = first;
    while n <= c + 110 {
        if child_size(ChildType::Second, n as usize) == n_v {
            return n as usize;
        }
        n += 110;
    }
    panic!("size inversion failed for ({n_v}, {r10}, {r11})");
}

/// The 9 reliable bits kept per call.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ReliableFrame {
    First { r5: u8 },
    Second { r10: u8, r11: u8 },
}

impl ReliableFrame {
    pub fn for_parent(ty: ChildType, n_u: usize) -> ReliableFrame {
        match ty {
            ChildType::First => ReliableFrame::First {
                r5: (n_u % 5) as u8,
            },
            ChildType::Second => ReliableFrame::Second {
                r10: (n_u % 10) as u8,
                r11: (n_u % 11) as u8,
            },
        }
    }

    pub fn child_type(self) -> ChildType {
        match self {
            ReliableFrame::First { .. } => ChildType::First,
            ReliableFrame::Second { .. } => ChildType::Second,
        }
    }

    /// Bit 0 is the type, bits 1..5 and 5..9 the residues.
    pub fn encode(self) -> u64 {
        match self {
            ReliableFrame::First { r5 } => (r5 as u64) << 1,
            ReliableFrame::Second { r10, r11 } => 1 | (r10 as u64) << 1 | (r11 as u64) << 5,
        }
    }

    pub fn decode(bits: u64) -> ReliableFrame {
        if bits & 1 == 0 {
            ReliableFrame::First {
                r5: ((bits >> 1) & 0xf) as u8,
            }
        } else {
            ReliableFrame::Second {
                r10: ((bits >> 1) & 0xf) as u8,
                r11: ((bits >> 5) & 0xf) as u8,
            }
        }
    }

    /// Parent size given the child size.
    pub fn invert(self, n_v: usize) -> usize {
        match self {
            ReliableFrame::First { r5 } => invert_size_first(n_v, r5),
            ReliableFrame::Second { r10, r11 } => invert_size_second(n_v, r10, r11),
        }
    }
}

/// Words occupied by a faulty frame for a node of size `n`.
pub fn frame_len(n: usize) -> usize {
    n + 3 * (2 * n + 1)
}

/// Faulty-memory layout of one frame: `[X (n)][k][lb][ub]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct FaultyFrame {
    pub start: usize,
    pub n: usize,
}

impl FaultyFrame {
    pub fn array(self) -> Range<usize> {
        self.start..self.start + self.n
    }

    pub fn k(self) -> ReplicatedValue {
        ReplicatedValue::new(self.start + self.n, self.n)
    }

    pub fn lb(self) -> ReplicatedValue {
        ReplicatedValue::new(self.k().end(), self.n)
    }

    pub fn ub(self) -> ReplicatedValue {
        ReplicatedValue::new(self.lb().end(), self.n)
    }

    pub fn end(self) -> usize {
        self.start + frame_len(self.n)
    }
}

/// Node variables restored by a pop.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Popped {
    pub ty: ChildType,
    pub n: usize,
    /// The parent's array. For the root this is the input range.
    pub array: Range<usize>,
    /// Decoded `(k, lb, ub)`, or `None` when the parent is the root, whose
    /// variables sit in reliable registers.
    pub vars: Option<(usize, Value, Value)>,
}

/// Entry of a layout dump.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FrameInfo {
    pub depth: usize,
    pub start: usize,
    pub n: usize,
    pub len: usize,
    pub reliable: Option<ReliableFrame>,
}

/// Cursors of the two stacks. Every field is a reliable register.
#[derive(Clone, Debug)]
pub struct DualStack {
    root: Range<usize>,
    base: usize,
    depth: usize,
    cur_start: usize,
    cur_n: usize,
    max_depth: usize,
}

/// Registers a [`DualStack`] holds in the reliable store.
pub const STACK_REGISTERS: usize = 6;

impl DualStack {
    /// Stack rooted at `root`; frames are laid out from the current end of
    /// faulty memory.
    pub fn new(mem: &mut FaultyMemory, root: Range<usize>) -> Result<DualStack> {
        mem.reliable_mut().reserve_words(STACK_REGISTERS)?;
        let base = mem.len();
        Ok(DualStack {
            cur_start: root.start,
            cur_n: root.len(),
            root,
            base,
            depth: 0,
            max_depth: 0,
        })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    pub fn current_n(&self) -> usize {
        self.cur_n
    }

    /// Array of the node now executing.
    pub fn current_array(&self) -> Range<usize> {
        self.cur_start..self.cur_start + self.cur_n
    }

    pub fn current_frame(&self) -> Option<FaultyFrame> {
        (self.depth > 0).then_some(FaultyFrame {
            start: self.cur_start,
            n: self.cur_n,
        })
    }

    fn child_start(&self) -> usize {
        if self.depth == 0 {
            self.base
        } else {
            self.cur_start + frame_len(self.cur_n)
        }
    }

    /// Opens a child frame of the current node. `fill` writes the child's
    /// array, given its first cell.
    pub fn push_with(
        &mut self,
        mem: &mut FaultyMemory,
        ty: ChildType,
        vars: (usize, Value, Value),
        fill: impl FnOnce(&mut FaultyMemory, usize),
    ) -> Result<FaultyFrame> {
        let n_u = self.cur_n;
        let n_v = child_size(ty, n_u);
        mem.reliable_mut()
            .push_bits(ReliableFrame::for_parent(ty, n_u).encode(), FRAME_BITS)?;
        let frame = FaultyFrame {
            start: self.child_start(),
            n: n_v,
        };
        mem.ensure_len(frame.end());
        fill(mem, frame.start);
        let (k, lb, ub) = vars;
        replicated_write(mem, frame.k(), k as Value);
        replicated_write(mem, frame.lb(), lb);
        replicated_write(mem, frame.ub(), ub);
        mem.push_region(RegionKind::StackFrame, frame.array());
        mem.push_region(RegionKind::Replica, frame.ub().range());
        mem.push_region(RegionKind::Replica, frame.lb().range());
        mem.push_region(RegionKind::Replica, frame.k().range());
        self.depth += 1;
        self.max_depth = self.max_depth.max(self.depth);
        self.cur_start = frame.start;
        self.cur_n = n_v;
        Ok(frame)
    }

    /// Opens a child whose array is a copy of `src`.
    pub fn push_copy(
        &mut self,
        mem: &mut FaultyMemory,
        ty: ChildType,
        src: Range<usize>,
        vars: (usize, Value, Value),
    ) -> Result<FaultyFrame> {
        assert_eq!(
            src.len(),
            child_size(ty, self.cur_n),
            "child array has the wrong length"
        );
        self.push_with(mem, ty, vars, |mem, dst| {
            for (j, i) in src.enumerate() {
                mem.copy(i, dst + j);
            }
        })
    }

    /// Closes the current frame and restores the parent's state.
    pub fn pop(&mut self, mem: &mut FaultyMemory) -> Popped {
        assert!(self.depth > 0, "pop on an empty recursion stack");
        let frame = ReliableFrame::decode(mem.reliable_mut().pop_bits(FRAME_BITS));
        let n_u = frame.invert(self.cur_n);
        let child_start = self.cur_start;
        for _ in 0..4 {
            mem.pop_region();
        }
        mem.release(child_start);
        self.depth -= 1;
        self.cur_n = n_u;
        if self.depth == 0 {
            self.cur_start = self.root.start;
            debug_assert_eq!(n_u, self.root.len());
            return Popped {
                ty: frame.child_type(),
                n: n_u,
                array: self.root.clone(),
                vars: None,
            };
        }
        self.cur_start = child_start - frame_len(n_u);
        let parent = FaultyFrame {
            start: self.cur_start,
            n: n_u,
        };
        let k = replicated_read(mem, parent.k());
        let lb = replicated_read(mem, parent.lb());
        let ub = replicated_read(mem, parent.ub());
        // A garbage k is still a usable rank.
        let k = k.clamp(1, n_u as Value) as usize;
        Popped {
            ty: frame.child_type(),
            n: n_u,
            array: parent.array(),
            vars: Some((k, lb, ub.max(lb))),
        }
    }

    /// Drops every frame at once.
    pub fn unwind(&mut self, mem: &mut FaultyMemory) {
        while self.depth > 0 {
            mem.reliable_mut().pop_bits(FRAME_BITS);
            self.depth -= 1;
        }
        mem.release(self.base);
        self.cur_start = self.root.start;
        self.cur_n = self.root.len();
    }

    /// Frees the stack's registers. Call after the stack is empty.
    pub fn finish(self, mem: &mut FaultyMemory) {
        assert_eq!(self.depth, 0, "recursion stack still holds frames");
        mem.reliable_mut().release_words(STACK_REGISTERS);
    }

    /// Current layout, root first, recomputed from the reliable bits.
    pub fn layout(&self, mem: &FaultyMemory) -> Vec<FrameInfo> {
        let mut out = Vec::with_capacity(self.depth + 1);
        let (mut start, mut n) = (self.cur_start, self.cur_n);
        let stack = mem.reliable();
        for d in (1..=self.depth).rev() {
            let frame = ReliableFrame::decode(stack.bits_at((d - 1) * FRAME_BITS, FRAME_BITS));
            out.push(FrameInfo {
                depth: d,
                start,
                n,
                len: frame_len(n),
                reliable: Some(frame),
            });
            n = frame.invert(n);
            start = if d == 1 {
                self.root.start
            } else {
                start - frame_len(n)
            };
        }
        out.push(FrameInfo {
            depth: 0,
            start,
            n,
            len: n,
            reliable: None,
        });
        out.reverse();
        out
    }
}
