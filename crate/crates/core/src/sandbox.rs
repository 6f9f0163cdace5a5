//! Sandboxed execution of non-resilient algorithms, and resilient splitting
//! built on it.
//!
//! A sandbox runs an inner algorithm for a bounded number of steps inside a
//! fixed region, then asks a resilient verifier whether the result is
//! acceptable. Rejected rounds flush the scratch area and start over. Inner
//! algorithms only move data with atomic swaps, so an interrupted round
//! leaves a permutation of its input behind.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::deterministic_select::deterministic_select;
use crate::error::{FramError, Result};
use crate::primitives::partition3;
use crate::randomized_select::{randomized_select, SplitMix64};
use crate::sim::{Delta, FaultyMemory, RegionKind, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Interrupt {
    StepBudget,
    RegionViolation { index: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SandboxConfig {
    pub step_budget: u64,
    /// Cells the inner algorithm works on; never flushed.
    pub data: Range<usize>,
    /// Working area, zeroed after every rejected round.
    pub scratch: Range<usize>,
}

/// Step-counted, region-confined view of faulty memory. The counter and the
/// region bounds are reliable registers.
pub struct Sandbox<'a> {
    mem: &'a mut FaultyMemory,
    data: Range<usize>,
    scratch: Range<usize>,
    budget: u64,
    used: u64,
}

impl Sandbox<'_> {
    #[inline]
    fn admit(&mut self, i: usize) -> Result<(), Interrupt> {
        if self.used >= self.budget {
            return Err(Interrupt::StepBudget);
        }
        if !self.data.contains(&i) && !self.scratch.contains(&i) {
            return Err(Interrupt::RegionViolation { index: i });
        }
        self.used += 1;
        Ok(())
    }

    pub fn read(&mut self, i: usize) -> Result<Value, Interrupt> {
        self.admit(i)?;
        Ok(self.mem.read(i))
    }

    pub fn write(&mut self, i: usize, v: Value) -> Result<(), Interrupt> {
        self.admit(i)?;
        self.mem.write(i, v);
        Ok(())
    }

    /// Atomic: an interruption lands before or after the exchange.
    pub fn swap(&mut self, i: usize, j: usize) -> Result<(), Interrupt> {
        if !self.data.contains(&j) && !self.scratch.contains(&j) {
            return Err(Interrupt::RegionViolation { index: j });
        }
        self.admit(i)?;
        self.mem.swap(i, j);
        Ok(())
    }

    pub fn data(&self) -> Range<usize> {
        self.data.clone()
    }

    pub fn scratch(&self) -> Range<usize> {
        self.scratch.clone()
    }

    pub fn used(&self) -> u64 {
        self.used
    }
}

/// A non-resilient algorithm that splits its data range at `s`: afterwards
/// the `s` smallest values occupy the front.
pub trait InnerSplit {
    fn scratch_len(&self, n: usize) -> usize;
    fn step_budget(&self, n: usize) -> u64;
    /// Returns the value left at position `s`, when the algorithm knows it.
    fn run(
        &mut self,
        sb: &mut Sandbox<'_>,
        s: usize,
        round: u64,
    ) -> Result<Option<Value>, Interrupt>;
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct RoundOutcome {
    pub verified: bool,
    pub rounds_used: u64,
    pub interrupted: u64,
    pub violations: u64,
    /// What the accepted round reported, if anything.
    pub output: Option<Value>,
}

/// Runs `inner` in rounds until `verify` accepts.
pub fn run_sandboxed(
    mem: &mut FaultyMemory,
    inner: &mut dyn InnerSplit,
    mut verify: impl FnMut(&mut FaultyMemory) -> bool,
    cfg: &SandboxConfig,
    s: usize,
) -> RoundOutcome {
    let mut out = RoundOutcome::default();
    loop {
        out.rounds_used += 1;
        let mut sb = Sandbox {
            mem: &mut *mem,
            data: cfg.data.clone(),
            scratch: cfg.scratch.clone(),
            budget: cfg.step_budget,
            used: 0,
        };
        out.output = None;
        match inner.run(&mut sb, s, out.rounds_used) {
            Ok(v) => out.output = v,
            Err(Interrupt::StepBudget) => out.interrupted += 1,
            Err(Interrupt::RegionViolation { .. }) => out.violations += 1,
        }
        mem.push_region(RegionKind::Verifier, cfg.data.clone());
        let ok = verify(mem);
        mem.pop_region();
        if ok {
            out.verified = true;
            return out;
        }
        for i in cfg.scratch.clone() {
            mem.write(i, 0);
        }
    }
}

/// Accepts iff no value right of `s` is below the largest value left of
/// it. One scan.
pub fn verify_split(mem: &mut FaultyMemory, range: Range<usize>, s: usize) -> bool {
    if s == 0 || s >= range.len() {
        return true;
    }
    let mid = range.start + s;
    let mut max_left = mem.read(range.start);
    for i in range.start + 1..mid {
        max_left = max_left.max(mem.read(i));
    }
    for i in mid..range.end {
        if mem.read(i) < max_left {
            return false;
        }
    }
    true
}

/// Three-way partition of `[lo, hi)` around `x` through the sandbox.
fn sb_partition3(
    sb: &mut Sandbox<'_>,
    lo: usize,
    hi: usize,
    x: Value,
) -> Result<(usize, usize), Interrupt> {
    let (mut lt, mut i, mut gt) = (lo, lo, hi);
    while i < gt {
        let v = sb.read(i)?;
        if v < x {
            if lt != i {
                sb.swap(lt, i)?;
            }
            lt += 1;
            i += 1;
        } else if v > x {
            gt -= 1;
            if gt != i {
                sb.swap(i, gt)?;
            }
        } else {
            i += 1;
        }
    }
    Ok((lt, gt))
}

fn sb_insertion_sort(sb: &mut Sandbox<'_>, lo: usize, hi: usize) -> Result<(), Interrupt> {
    for i in lo + 1..hi {
        let mut j = i;
        while j > lo && sb.read(j - 1)? > sb.read(j)? {
            sb.swap(j - 1, j)?;
            j -= 1;
        }
    }
    Ok(())
}

/// Classic median-of-medians selection. Medians go to scratch, stacked
/// above `top`.
pub struct DetInner;

impl DetInner {
    /// Rearranges `[lo, hi)` so that position `lo + k` holds its k-th
    /// smallest (0-based) value with smaller values before and larger
    /// after. Returns that value.
    fn select(
        sb: &mut Sandbox<'_>,
        mut lo: usize,
        mut hi: usize,
        mut k: usize,
        top: usize,
    ) -> Result<Value, Interrupt> {
        loop {
            let n = hi - lo;
            if n <= 5 {
                sb_insertion_sort(sb, lo, hi)?;
                return sb.read(lo + k);
            }
            let m = n.div_ceil(5);
            for g in 0..m {
                let a = lo + 5 * g;
                let b = (a + 5).min(hi);
                sb_insertion_sort(sb, a, b)?;
                let med = sb.read(a + (b - a - 1) / 2)?;
                sb.write(top + g, med)?;
            }
            let pivot = Self::select(sb, top, top + m, (m - 1) / 2, top + m)?;
            let (lt, le) = sb_partition3(sb, lo, hi, pivot)?;
            if lo + k < lt {
                hi = lt;
            } else if lo + k >= le {
                k -= le - lo;
                lo = le;
            } else {
                return Ok(pivot);
            }
        }
    }
}

impl InnerSplit for DetInner {
    fn scratch_len(&self, n: usize) -> usize {
        n / 4 + 64
    }

    fn step_budget(&self, n: usize) -> u64 {
        DET_BUDGET_PER_CELL * n as u64 + 256
    }

    fn run(
        &mut self,
        sb: &mut Sandbox<'_>,
        s: usize,
        _round: u64,
    ) -> Result<Option<Value>, Interrupt> {
        let data = sb.data();
        if s >= data.len() {
            return Ok(None);
        }
        let top = sb.scratch().start;
        Self::select(sb, data.start, data.end, s, top).map(Some)
    }
}

/// Worst-case steps per cell of [`DetInner`], with margin over the largest
/// ratio seen on adversarial inputs (see the budget test).
pub const DET_BUDGET_PER_CELL: u64 = 48;

/// In-place quickselect. Its coins live in a reliable register, reseeded
/// each round.
pub struct RandInner {
    pub seed: u64,
}

/// Expected-time constant of [`RandInner`], in steps per cell.
pub const RAND_STEPS_PER_CELL: u64 = 8;

impl InnerSplit for RandInner {
    fn scratch_len(&self, _n: usize) -> usize {
        0
    }

    fn step_budget(&self, n: usize) -> u64 {
        2 * RAND_STEPS_PER_CELL * n as u64 + 16
    }

    fn run(
        &mut self,
        sb: &mut Sandbox<'_>,
        s: usize,
        round: u64,
    ) -> Result<Option<Value>, Interrupt> {
        let data = sb.data();
        if s >= data.len() {
            return Ok(None);
        }
        let mut coins = SplitMix64::new(self.seed ^ round.wrapping_mul(0x2545_f491_4f6c_dd1d));
        let (mut lo, mut hi, target) = (data.start, data.end, data.start + s);
        while hi - lo > 1 {
            let x = sb.read(lo + coins.below(hi - lo))?;
            let (lt, le) = sb_partition3(sb, lo, hi, x)?;
            if target < lt {
                hi = lt;
            } else if target >= le {
                lo = le;
            } else {
                return Ok(Some(x));
            }
        }
        sb.read(target).map(Some)
    }
}

/// Runs an inner selection unsandboxed, with no step limit. Returns the
/// `k`-th smallest (1-based) value of `range`; wrong under faults.
fn nonresilient_select(
    mem: &mut FaultyMemory,
    range: Range<usize>,
    k: usize,
    inner: &mut dyn InnerSplit,
) -> Result<Value> {
    if k == 0 || k > range.len() {
        return Err(FramError::RankOutOfRange { k, n: range.len() });
    }
    let scratch_len = inner.scratch_len(range.len());
    let sc = mem.alloc(scratch_len);
    let mut sb = Sandbox {
        mem: &mut *mem,
        data: range,
        scratch: sc..sc + scratch_len,
        budget: u64::MAX,
        used: 0,
    };
    let v = inner
        .run(&mut sb, k - 1, 1)
        .ok()
        .flatten()
        .expect("unbounded run");
    mem.release(sc);
    Ok(v)
}

pub fn nonresilient_select_det(
    mem: &mut FaultyMemory,
    range: Range<usize>,
    k: usize,
) -> Result<Value> {
    nonresilient_select(mem, range, k, &mut DetInner)
}

pub fn nonresilient_select_rand(
    mem: &mut FaultyMemory,
    range: Range<usize>,
    k: usize,
    seed: u64,
) -> Result<Value> {
    nonresilient_select(mem, range, k, &mut RandInner { seed })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    #[default]
    Deterministic,
    Randomized,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Deterministic => "det",
            Variant::Randomized => "rand",
        })
    }
}

impl FromStr for Variant {
    type Err = FramError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "det" | "deterministic" => Ok(Variant::Deterministic),
            "rand" | "randomized" => Ok(Variant::Randomized),
            _ => Err(FramError::InvalidSpec(format!(
                "unknown variant `{s}` (expected det or rand)"
            ))),
        }
    }
}

/// Resiliently splits `range` at `s` by sandboxing a non-resilient
/// selection. The deterministic variant borrows scratch cells past the end
/// of memory for the duration; the randomized one works in place.
pub fn sandboxed_split(
    mem: &mut FaultyMemory,
    range: Range<usize>,
    s: usize,
    variant: Variant,
    seed: u64,
) -> RoundOutcome {
    if range.len() <= 1 || s == 0 || s >= range.len() {
        return RoundOutcome {
            verified: true,
            rounds_used: 1,
            ..RoundOutcome::default()
        };
    }
    let mut det = DetInner;
    let mut rnd = RandInner { seed };
    let inner: &mut dyn InnerSplit = match variant {
        Variant::Deterministic => &mut det,
        Variant::Randomized => &mut rnd,
    };
    let n = range.len();
    let scratch_len = inner.scratch_len(n);
    let scratch_start = mem.len();
    if scratch_len > 0 {
        mem.alloc(scratch_len);
        mem.push_region(
            RegionKind::Scratch,
            scratch_start..scratch_start + scratch_len,
        );
    }
    let cfg = SandboxConfig {
        step_budget: inner.step_budget(n),
        data: range.clone(),
        scratch: scratch_start..scratch_start + scratch_len,
    };
    let out = run_sandboxed(
        mem,
        inner,
        |mem| verify_split(mem, range.clone(), s),
        &cfg,
        s,
    );
    if scratch_len > 0 {
        mem.pop_region();
        mem.release(scratch_start);
    }
    out
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SplitReport {
    /// Left edge of the window handed to the sandbox, relative to the range.
    pub left: usize,
    /// Right edge of that window.
    pub right: usize,
    /// Whether the window reached the sandbox at all.
    pub sandboxed: bool,
    pub rounds: u64,
}

/// Selects the `target`-th smallest (1-based) of `range` resiliently.
fn select(
    mem: &mut FaultyMemory,
    range: Range<usize>,
    target: usize,
    variant: Variant,
    seed: u64,
) -> Result<Value> {
    match variant {
        Variant::Deterministic => Ok(deterministic_select(mem, range, target)?.value),
        Variant::Randomized => Ok(randomized_select(mem, range, target, seed)?.value),
    }
}

/// Rearranges `range` so that every uncorrupted value in its first `s`
/// cells is no larger than every uncorrupted value in the rest.
///
/// Two resilient selections around ranks `s - δ` and `s + δ` fence off a
/// window of `O(δ + α)` cells containing position `s`; only that window is
/// split by the sandbox.
pub fn generic_resilient_split(
    mem: &mut FaultyMemory,
    range: Range<usize>,
    s: usize,
    delta: Delta,
    variant: Variant,
    seed: u64,
) -> Result<SplitReport> {
    let delta = delta.require("resilient splitting")? as usize;
    let n = range.len();
    if s > n {
        return Err(FramError::RankOutOfRange { k: s, n });
    }
    let mut report = SplitReport {
        left: 0,
        right: n,
        ..SplitReport::default()
    };
    if n <= 1 || s == 0 || s == n {
        return Ok(report);
    }
    let mut coins = SplitMix64::new(seed);
    let base = range.start;

    let mut left = 0;
    if s > delta {
        let x = select(mem, range.clone(), s - delta, variant, coins.next_u64())?;
        let p = partition3(mem, range.clone(), x);
        if (p.lt..=p.le).contains(&s) {
            report.left = s;
            report.right = s;
            return Ok(report);
        }
        // A pivot landing right of s (only possible under corruption) is
        // useless as a left fence.
        left = if p.le < s { p.le } else { 0 };
    }

    let mut right = n;
    let target = s - left + delta + 1;
    if target <= n - left {
        let x = select(
            mem,
            base + left..range.end,
            target,
            variant,
            coins.next_u64(),
        )?;
        let p = partition3(mem, base + left..range.end, x);
        let (lt, le) = (left + p.lt, left + p.le);
        if (lt..=le).contains(&s) {
            report.left = s;
            report.right = s;
            return Ok(report);
        }
        right = if lt > s { lt } else { n };
    }

    report.left = left;
    report.right = right;
    report.sandboxed = true;
    let out = sandboxed_split(
        mem,
        base + left..base + right,
        s - left,
        variant,
        coins.next_u64(),
    );
    report.rounds = out.rounds_used;
    Ok(report)
}
