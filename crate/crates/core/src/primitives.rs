//! Resilient building blocks: clamping, ranking, partitioning and
//! majority-replicated values.

use std::ops::Range;

use serde::Serialize;

use crate::sim::{FaultyMemory, Value};

/// `min(max(x, lb), ub)`. Panics if `lb > ub`: bounds live in reliable
/// registers, so an inverted pair is a bug, not a fault.
#[inline]
pub fn clamp(x: Value, lb: Value, ub: Value) -> Value {
    assert!(lb <= ub, "clamp bounds inverted: {lb} > {ub}");
    x.max(lb).min(ub)
}

/// A rank computed by a resilient scan (`rank^c`).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct RankResult {
    pub k: usize,
}

/// Counts the values `<= e` in one left-to-right pass. Exactly
/// `range.len()` reads.
pub fn resilient_rank(mem: &mut FaultyMemory, range: Range<usize>, e: Value) -> RankResult {
    let mut k = 0;
    for i in range {
        if mem.read(i) <= e {
            k += 1;
        }
    }
    RankResult { k }
}

/// Counts `< e` and `<= e` in one pass.
pub fn resilient_rank3(mem: &mut FaultyMemory, range: Range<usize>, e: Value) -> Split3 {
    let (mut lt, mut le) = (0, 0);
    for i in range {
        let v = mem.read(i);
        lt += (v < e) as usize;
        le += (v <= e) as usize;
    }
    Split3 { lt, le }
}

/// Moves every value `<= e` to the front, one swap per hit, and returns
/// how many there were.
pub fn resilient_partition(mem: &mut FaultyMemory, range: Range<usize>, e: Value) -> RankResult {
    let start = range.start;
    let mut k = 0;
    for i in range {
        if mem.read(i) <= e {
            if start + k != i {
                mem.swap(start + k, i);
            }
            k += 1;
        }
    }
    RankResult { k }
}

/// Outcome of a three-way partition: `[0, lt)` holds values `< e`,
/// `[lt, le)` values `== e`, `[le, len)` values `> e` (relative to the
/// range start, as classified when read).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Split3 {
    pub lt: usize,
    pub le: usize,
}

impl Split3 {
    /// Ranks `e` may stand for: `[lt + 1, le]`, or `{le}` when `e` did
    /// not occur.
    pub fn rank_interval(self) -> (usize, usize) {
        ((self.lt + 1).min(self.le), self.le)
    }

    pub fn contains(self, k: usize) -> bool {
        let (lo, hi) = self.rank_interval();
        (lo..=hi).contains(&k)
    }
}

/// Dutch-flag partition around `e`. Every cell is classified by exactly one
/// read, so each concurrent corruption shifts `lt` and `le` by at most one.
pub fn partition3(mem: &mut FaultyMemory, range: Range<usize>, e: Value) -> Split3 {
    let (start, mut lt, mut i, mut gt) = (range.start, range.start, range.start, range.end);
    while i < gt {
        let v = mem.read(i);
        if v < e {
            if lt != i {
                mem.swap(lt, i);
            }
            lt += 1;
            i += 1;
        } else if v > e {
            gt -= 1;
            if gt != i {
                mem.swap(i, gt);
            }
        } else {
            i += 1;
        }
    }
    Split3 {
        lt: lt - start,
        le: gt - start,
    }
}

/// `2g + 1` copies of one value in faulty memory.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ReplicatedValue {
    pub start: usize,
    pub copies: usize,
}

impl ReplicatedValue {
    /// Block protecting against `g` corrupted copies.
    pub fn new(start: usize, g: usize) -> ReplicatedValue {
        ReplicatedValue {
            start,
            copies: 2 * g + 1,
        }
    }

    pub fn range(self) -> Range<usize> {
        self.start..self.start + self.copies
    }

    pub fn end(self) -> usize {
        self.start + self.copies
    }
}

pub fn replicated_write(mem: &mut FaultyMemory, rv: ReplicatedValue, v: Value) {
    for i in rv.range() {
        mem.write(i, v);
    }
}

/// Boyer-Moore majority vote over the copies. Correct whenever at most `g`
/// copies were corrupted since the last write.
pub fn replicated_read(mem: &mut FaultyMemory, rv: ReplicatedValue) -> Value {
    let mut candidate = 0;
    let mut count = 0usize;
    for i in rv.range() {
        let v = mem.read(i);
        if count == 0 {
            candidate = v;
            count = 1;
        } else if v == candidate {
            count += 1;
        } else {
            count -= 1;
        }
    }
    candidate
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::oracle::true_rank;
    use crate::sim::{Scripted, ScriptedCorruption};
    use proptest::prelude::*;

    #[test]
    fn clamp_examples() {
        assert_eq!(clamp(5, 1, 3), 3);
        assert_eq!(clamp(0, 1, 3), 1);
        assert_eq!(clamp(2, 1, 3), 2);
    }

    #[test]
    #[should_panic(expected = "inverted")]
    fn clamp_rejects_inverted_bounds() {
        clamp(0, 3, 1);
    }

    #[test]
    fn rank_examples() {
        let mut mem = FaultyMemory::new(&[5, 2, 8, 2]);
        assert_eq!(resilient_rank(&mut mem, 0..4, 4).k, 2);
        assert_eq!(mem.steps(), 4);
        let mut mem = FaultyMemory::new(&[1, 2, 3]);
        assert_eq!(resilient_rank(&mut mem, 0..3, 0).k, 0);
    }

    #[test]
    fn rank_under_one_mid_scan_corruption() {
        let x: Vec<Value> = (1..=100).collect();
        for step in 0..100 {
            let s = Scripted::new(vec![ScriptedCorruption {
                step,
                index: 10,
                value: 99,
            }]);
            let mut mem = FaultyMemory::new(&x).with_adversary(Box::new(s), 1);
            let k = resilient_rank(&mut mem, 0..100, 40).k;
            assert!(k == 39 || k == 40, "step {step}: {k}");
        }
    }

    #[test]
    fn partition_examples() {
        let mut mem = FaultyMemory::new(&[3, 1, 2]);
        assert_eq!(resilient_partition(&mut mem, 0..3, 2).k, 2);
        let v = mem.values_in(0..3);
        assert_eq!(v[2], 3);
        let mut mem = FaultyMemory::new(&[1, 2, 3]);
        assert_eq!(resilient_partition(&mut mem, 0..3, 3).k, 3);
        assert_eq!(mem.values_in(0..3), vec![1, 2, 3]);
        let mut mem = FaultyMemory::new(&[7]);
        assert_eq!(resilient_partition(&mut mem, 0..1, 7).k, 1);
    }

    #[test]
    fn partition3_layout() {
        let mut mem = FaultyMemory::new(&[5, 1, 5, 9, 0, 5, 7]);
        let s = partition3(&mut mem, 0..7, 5);
        assert_eq!((s.lt, s.le), (2, 5));
        let v = mem.values_in(0..7);
        assert!(v[..2].iter().all(|&x| x < 5));
        assert!(v[2..5].iter().all(|&x| x == 5));
        assert!(v[5..].iter().all(|&x| x > 5));
        assert_eq!(s.rank_interval(), (3, 5));
        assert_eq!(Split3 { lt: 4, le: 4 }.rank_interval(), (4, 4));
    }

    #[test]
    fn majority_examples() {
        let mut mem = FaultyMemory::new(&[7, 7, 3]);
        assert_eq!(replicated_read(&mut mem, ReplicatedValue::new(0, 1)), 7);
        let mut mem = FaultyMemory::new(&[4; 5]);
        assert_eq!(replicated_read(&mut mem, ReplicatedValue::new(0, 2)), 4);
        assert_eq!(ReplicatedValue::new(0, 3).copies, 7);
    }

    #[test]
    fn majority_exhaustive_up_to_four() {
        for g in 0..=4usize {
            let copies = 2 * g + 1;
            for mask in 0u32..(1 << copies) {
                if mask.count_ones() as usize > g {
                    continue;
                }
                // Corrupted copies either agree on one garbage value or differ.
                for agree in [true, false] {
                    let vals: Vec<Value> = (0..copies)
                        .map(|i| {
                            if mask >> i & 1 == 1 {
                                if agree {
                                    -3
                                } else {
                                    100 + i as Value
                                }
                            } else {
                                42
                            }
                        })
                        .collect();
                    let mut mem = FaultyMemory::new(&vals);
                    assert_eq!(replicated_read(&mut mem, ReplicatedValue::new(0, g)), 42);
                }
            }
        }
    }

    fn schedule() -> impl Strategy<Value = Vec<(u64, usize, Value)>> {
        prop::collection::vec((0u64..120, 0usize..60, -50i64..150), 0..8)
    }

    proptest! {
        #[test]
        fn clamp_idempotent(x in any::<i64>(), a in any::<i64>(), b in any::<i64>()) {
            let (l, u) = (a.min(b), a.max(b));
            prop_assert_eq!(clamp(clamp(x, l, u), l, u), clamp(x, l, u));
        }

        #[test]
        fn rank_error_bounded_by_scan_corruptions(
            x in prop::collection::vec(0i64..100, 1..60),
            e in 0i64..100,
            sched in schedule(),
        ) {
            let events = sched.iter().map(|&(step, index, value)| ScriptedCorruption { step, index: index % x.len(), value }).collect();
            let mut mem = FaultyMemory::new(&x).with_adversary(Box::new(Scripted::new(events)), 8);
            let k = resilient_rank(&mut mem, 0..x.len(), e).k as i64;
            // Corruptions at step 0 land before the scan starts.
            let pre: Vec<Value> = {
                let mut pre = x.clone();
                for &(step, index, value) in &sched {
                    if step == 0 { pre[index % x.len()] = value; }
                }
                pre
            };
            let during = sched.iter().filter(|s| s.0 > 0 && s.0 < x.len() as u64).count() as i64;
            let truth = true_rank(&pre, e) as i64;
            prop_assert!((k - truth).abs() <= during);
        }

        #[test]
        fn partition_bound_and_cross_order(
            x in prop::collection::vec(0i64..100, 1..60),
            e in 0i64..100,
            sched in schedule(),
            three_way in any::<bool>(),
        ) {
            let n = x.len();
            let events = sched.iter().map(|&(step, index, value)| ScriptedCorruption { step, index: index % n, value }).collect();
            let mut mem = FaultyMemory::new(&x).with_adversary(Box::new(Scripted::new(events)), 8);
            let k = if three_way { partition3(&mut mem, 0..n, e).le } else { resilient_partition(&mut mem, 0..n, e).k };
            let alpha = mem.alpha() as i64;
            prop_assert!((k as i64 - true_rank(&x, e) as i64).abs() <= alpha);
            let w = mem.words();
            prop_assert!(w[..k].iter().filter(|w| !w.tainted).all(|w| w.value <= e));
            prop_assert!(w[k..].iter().filter(|w| !w.tainted).all(|w| w.value > e));
        }
    }
}
