//! Randomized resilient selection: quickselect with reliably stored bounds.
//!
//! Every pivot is clamped into `[lb, ub]`, the bounds established by
//! earlier pivots, so a corrupted pivot can never undo earlier progress.

use std::ops::Range;

use serde::Serialize;

use crate::error::{FramError, Result};
use crate::primitives::{clamp, partition3};
use crate::sim::{FaultyMemory, Value, NEG_INF, POS_INF};

/// Counter-based generator whose whole state is one reliable register.
#[derive(Clone, Copy, Debug)]
pub struct SplitMix64(u64);

impl SplitMix64 {
    pub fn new(seed: u64) -> SplitMix64 {
        SplitMix64(seed)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform-ish value in `0..n` by multiply-shift, no rejection loop.
    pub fn below(&mut self, n: usize) -> usize {
        ((self.next_u64() as u128 * n as u128) >> 64) as usize
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RandSelectOutcome {
    pub value: Value,
    pub iterations: u64,
    /// `(lb, ub)` at the start of each iteration.
    pub bounds: Vec<(Value, Value)>,
}

/// Registers: l, r, k, lb, ub, x_p, coins.
const REGISTERS: usize = 7;

/// Returns an element whose rank in the initial contents of `range` lies in
/// `[k - α, k + α]`. In place.
pub fn randomized_select(
    mem: &mut FaultyMemory,
    range: Range<usize>,
    k: usize,
    seed: u64,
) -> Result<RandSelectOutcome> {
    let n = range.len();
    if n == 0 {
        return Err(FramError::Empty);
    }
    if k == 0 || k > n {
        return Err(FramError::RankOutOfRange { k, n });
    }
    mem.reliable_mut().reserve_words(REGISTERS)?;
    let mut coins = SplitMix64::new(seed);
    let (mut l, mut r, mut k) = (range.start, range.end, k);
    let (mut lb, mut ub) = (NEG_INF, POS_INF);
    let mut bounds = Vec::new();
    let value = loop {
        bounds.push((lb, ub));
        if r - l == 1 {
            break clamp(mem.read(l), lb, ub);
        }
        // Every clamped pivot would be this value, so the range could stop
        // shrinking.
        if lb == ub {
            break lb;
        }
        let p = l + coins.below(r - l);
        let x = clamp(mem.read(p), lb, ub);
        let s = partition3(mem, l..r, x);
        if k <= s.lt {
            r = l + s.lt;
            ub = x;
        } else if k > s.le {
            k -= s.le;
            l += s.le;
            lb = x;
        } else {
            break x;
        }
    };
    mem.reliable_mut().release_words(REGISTERS);
    Ok(RandSelectOutcome {
        value,
        iterations: bounds.len() as u64,
        bounds,
    })
}
