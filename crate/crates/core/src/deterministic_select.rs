//! Deterministic resilient selection in worst-case linear time.
//!
//! Each node picks a median-of-medians pivot (first-type child), checks
//! that its rank falls inside `[f, n - f]`, then recurses on a padded side
//! of size `n - f` (second-type child) and sanity-checks the answer. Failed
//! checks repeat the node and feed a corruption counter; once the counter
//! reaches `n` the run stops early, since then every answer is acceptable.
//!
//! Recursion runs on [`DualStack`], so the reliable footprint is a fixed
//! register file plus 9 bits per open call.

use std::ops::Range;

use serde::Serialize;

use crate::error::{FramError, Result};
use crate::primitives::{clamp, partition3, resilient_rank3};
use crate::recursion_stack::{child_size, f_cut, ChildType, DualStack};
use crate::sim::{FaultyMemory, Value, NEG_INF, POS_INF};

/// Arrays up to this size are solved by sorting in reliable registers.
pub const BASE_CASE: usize = 50;

/// Reliable words used besides the stack: the base-case buffer, five
/// median registers and the node/global variables.
const REGISTERS: usize = BASE_CASE + 5 + 12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    First,
    Second,
}

/// One counter increment, with the corruptions the simulator saw during
/// the node attempt that triggered it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct CounterEvent {
    pub phase: Phase,
    pub n: usize,
    pub amount: u64,
    pub alpha_in_attempt: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DetSelectOutcome {
    pub value: Value,
    pub nodes: u64,
    pub first_phase_reps: u64,
    pub second_phase_reps: u64,
    pub counter: u64,
    pub halted: bool,
    /// Nodes that returned unchecked because their bounds ruled out every
    /// acceptable answer.
    pub abandoned: u64,
    pub max_depth: usize,
    pub peak_stack_bits: usize,
    pub counter_events: Vec<CounterEvent>,
}

/// The `⌈m/2⌉`-th smallest of up to five cells, read once each.
pub fn median_of_five(mem: &mut FaultyMemory, range: Range<usize>) -> Value {
    let m = range.len();
    assert!(
        (1..=5).contains(&m),
        "median_of_five needs 1..=5 cells, got {m}"
    );
    let mut r = [0; 5];
    for (j, i) in range.enumerate() {
        r[j] = mem.read(i);
    }
    r[..m].sort_unstable();
    r[m.div_ceil(2) - 1]
}

fn sort_select(
    mem: &mut FaultyMemory,
    range: Range<usize>,
    k: usize,
    buf: &mut Vec<Value>,
) -> Value {
    buf.clear();
    for i in range {
        buf.push(mem.read(i));
    }
    buf.sort_unstable();
    buf[k - 1]
}

/// Copies at most [`BASE_CASE`] values into reliable registers in one scan
/// and returns the `k`-th smallest.
pub fn base_case_select(mem: &mut FaultyMemory, range: Range<usize>, k: usize) -> Result<Value> {
    let n = range.len();
    assert!(n <= BASE_CASE, "base case called on {n} cells");
    if n == 0 {
        return Err(FramError::Empty);
    }
    if k == 0 || k > n {
        return Err(FramError::RankOutOfRange { k, n });
    }
    mem.reliable_mut().reserve_words(n)?;
    let v = sort_select(mem, range, k, &mut Vec::with_capacity(n));
    mem.reliable_mut().release_words(n);
    Ok(v)
}

enum Pc {
    Entry,
    AfterFirst(Value),
    AfterSecond(Value),
}

/// Returns an element whose rank in the initial contents of `range` lies in
/// `[k - α, k + α]`. Needs no fault budget. Stack frames are allocated past
/// the end of memory and released before returning.
pub fn deterministic_select(
    mem: &mut FaultyMemory,
    range: Range<usize>,
    k: usize,
) -> Result<DetSelectOutcome> {
    let root_n = range.len();
    if root_n == 0 {
        return Err(FramError::Empty);
    }
    if k == 0 || k > root_n {
        return Err(FramError::RankOutOfRange { k, n: root_n });
    }
    mem.reliable_mut().reserve_words(REGISTERS)?;
    let mut st = match DualStack::new(mem, range) {
        Ok(st) => st,
        Err(e) => {
            mem.reliable_mut().release_words(REGISTERS);
            return Err(e);
        }
    };
    let result = run(mem, &mut st, k);
    if result.is_err() {
        st.unwind(mem);
    }
    st.finish(mem);
    mem.reliable_mut().release_words(REGISTERS);
    result
}

fn run(mem: &mut FaultyMemory, st: &mut DualStack, root_k: usize) -> Result<DetSelectOutcome> {
    let root_n = st.current_n();
    let root_vars = (root_k, NEG_INF, POS_INF);
    let (mut k, mut lb, mut ub) = root_vars;
    let mut c = 0u64;
    let mut pc = Pc::Entry;
    let mut buf = Vec::with_capacity(BASE_CASE);
    let mut out = DetSelectOutcome {
        value: 0,
        nodes: 0,
        first_phase_reps: 0,
        second_phase_reps: 0,
        counter: 0,
        halted: false,
        abandoned: 0,
        max_depth: 0,
        peak_stack_bits: 0,
        counter_events: Vec::new(),
    };
    // Instrumentation only: α at the start of each open node's attempt.
    let mut attempt_alpha = vec![mem.alpha()];

    loop {
        let n = st.current_n();
        let arr = st.current_array();
        let ret = match pc {
            Pc::Entry => {
                out.nodes += 1;
                if n <= BASE_CASE {
                    clamp(sort_select(mem, arr, k, &mut buf), lb, ub)
                } else {
                    let m = n.div_ceil(5);
                    let km = m.div_ceil(2);
                    if m <= BASE_CASE {
                        buf.clear();
                        for g in 0..m {
                            let s = arr.start + 5 * g;
                            buf.push(median_of_five(mem, s..(s + 5).min(arr.end)));
                        }
                        buf.sort_unstable();
                        pc = Pc::AfterFirst(buf[km - 1]);
                    } else {
                        st.push_with(mem, ChildType::First, (km, NEG_INF, POS_INF), |mem, dst| {
                            for g in 0..m {
                                let s = arr.start + 5 * g;
                                let med = median_of_five(mem, s..(s + 5).min(arr.end));
                                mem.write(dst + g, med);
                            }
                        })?;
                        (k, lb, ub) = (km, NEG_INF, POS_INF);
                        attempt_alpha.push(mem.alpha());
                    }
                    continue;
                }
            }
            Pc::AfterFirst(x_p) => {
                let f = f_cut(n) as usize;
                let s = partition3(mem, arr.clone(), x_p);
                if s.lt > n - f || s.le < f {
                    let amount = (n / 33) as u64;
                    if let Some(v) = charge(
                        &mut c,
                        amount,
                        Phase::First,
                        n,
                        root_n,
                        mem,
                        &mut attempt_alpha,
                        &mut out,
                    ) {
                        out.value = clamp(x_p, lb, ub);
                        return Ok(finish_halt(mem, st, out, v));
                    }
                    out.first_phase_reps += 1;
                    pc = Pc::Entry;
                    continue;
                }
                if s.contains(k) {
                    clamp(x_p, lb, ub)
                } else {
                    let pivot = clamp(x_p, lb, ub);
                    let (src, vars) = if k <= s.lt {
                        (arr.start..arr.start + n - f, (k, lb, pivot))
                    } else {
                        (arr.start + f..arr.end, (k - f, pivot, ub))
                    };
                    if n - f <= BASE_CASE {
                        let (kv, lbv, ubv) = vars;
                        pc = Pc::AfterSecond(clamp(sort_select(mem, src, kv, &mut buf), lbv, ubv));
                    } else {
                        st.push_copy(mem, ChildType::Second, src, vars)?;
                        (k, lb, ub) = vars;
                        attempt_alpha.push(mem.alpha());
                        pc = Pc::Entry;
                    }
                    continue;
                }
            }
            Pc::AfterSecond(e) => {
                let e = clamp(e, lb, ub);
                let n_v = child_size(ChildType::Second, n);
                let (lo, hi) = resilient_rank3(mem, arr.clone(), e).rank_interval();
                if lo <= k + n_v && hi + n_v >= k {
                    e
                } else if st.depth() > 0 && !attainable(mem, arr, k, lb, ub, n_v) {
                    // Corrupted node variables: nothing inside [lb, ub] can
                    // ever pass the check, so repeating cannot help.
                    out.abandoned += 1;
                    e
                } else {
                    if let Some(v) = charge(
                        &mut c,
                        n_v as u64,
                        Phase::Second,
                        n,
                        root_n,
                        mem,
                        &mut attempt_alpha,
                        &mut out,
                    ) {
                        out.value = e;
                        return Ok(finish_halt(mem, st, out, v));
                    }
                    out.second_phase_reps += 1;
                    pc = Pc::Entry;
                    continue;
                }
            }
        };
        if st.depth() == 0 {
            out.value = ret;
            break;
        }
        out.peak_stack_bits = out.peak_stack_bits.max(mem.reliable().stack_bits());
        out.max_depth = out.max_depth.max(st.max_depth());
        let popped = st.pop(mem);
        attempt_alpha.pop();
        (k, lb, ub) = popped.vars.unwrap_or(root_vars);
        pc = match popped.ty {
            ChildType::First => Pc::AfterFirst(ret),
            ChildType::Second => Pc::AfterSecond(ret),
        };
    }
    out.counter = c;
    out.max_depth = st.max_depth();
    Ok(out)
}

/// Whether some value in `[lb, ub]` could have a rank within `k ± slack` in
/// `arr`. One scan.
fn attainable(
    mem: &mut FaultyMemory,
    arr: Range<usize>,
    k: usize,
    lb: Value,
    ub: Value,
    slack: usize,
) -> bool {
    let (mut below, mut upto) = (0usize, 0usize);
    for i in arr {
        let v = mem.read(i);
        below += (v < lb) as usize;
        upto += (v <= ub) as usize;
    }
    below < k + slack && upto + slack >= k
}

/// Adds `amount` to the counter. Returns `Some(c)` when the run must halt.
#[allow(clippy::too_many_arguments)]
fn charge(
    c: &mut u64,
    amount: u64,
    phase: Phase,
    n: usize,
    root_n: usize,
    mem: &FaultyMemory,
    attempt_alpha: &mut [u64],
    out: &mut DetSelectOutcome,
) -> Option<u64> {
    let start = attempt_alpha.last_mut().expect("no open node");
    out.counter_events.push(CounterEvent {
        phase,
        n,
        amount,
        alpha_in_attempt: mem.alpha() - *start,
    });
    *start = mem.alpha();
    *c += amount;
    (*c >= root_n as u64).then_some(*c)
}

fn finish_halt(
    mem: &mut FaultyMemory,
    st: &mut DualStack,
    mut out: DetSelectOutcome,
    c: u64,
) -> DetSelectOutcome {
    out.peak_stack_bits = out.peak_stack_bits.max(mem.reliable().stack_bits());
    out.max_depth = st.max_depth();
    out.counter = c;
    out.halted = true;
    st.unwind(mem);
    out
}
