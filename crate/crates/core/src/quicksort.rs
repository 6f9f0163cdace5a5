//! Resilient quicksort by level-order splitting of power-of-two blocks.
//!
//! The array is treated as if padded with `+inf` up to the next power of
//! two. Padding is never stored: a block whose left half reaches past the
//! real data needs no split, and every other block is split on its real
//! cells only.

use std::ops::Range;

use serde::Serialize;

use crate::error::Result;
use crate::randomized_select::SplitMix64;
use crate::sandbox::{generic_resilient_split, Variant};
use crate::sim::{Delta, FaultyMemory};

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SortReport {
    pub padded_len: usize,
    pub levels: u32,
    pub splits: u64,
    /// Splits that fell through to the sandbox.
    pub sandboxed: u64,
    pub sandbox_rounds: u64,
}

/// Sorts `range` so that its untainted values end up in nondecreasing
/// order. Rejects an unknown `delta`.
pub fn resilient_quicksort(
    mem: &mut FaultyMemory,
    range: Range<usize>,
    delta: Delta,
    variant: Variant,
    seed: u64,
) -> Result<SortReport> {
    let delta = Delta::Known(delta.require("resilient quicksort")?);
    let n = range.len();
    let padded = n.max(1).next_power_of_two();
    let mut report = SortReport {
        padded_len: padded,
        levels: padded.trailing_zeros(),
        ..SortReport::default()
    };
    let mut coins = SplitMix64::new(seed);
    for d in 0..report.levels {
        let block = padded >> d;
        let half = block / 2;
        let mut start = 0;
        while start + half < n {
            let end = (start + block).min(n);
            let r = generic_resilient_split(
                mem,
                range.start + start..range.start + end,
                half,
                delta,
                variant,
                coins.next_u64(),
            )?;
            report.splits += 1;
            if r.sandboxed {
                report.sandboxed += 1;
                report.sandbox_rounds += r.rounds;
            }
            start += block;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::FramError;
    use crate::sim::adversary::{TargetedPivot, UniformRandom};
    use crate::sim::oracle::{lineage_consistent, pairwise_order, uncorrupted_sorted};
    use crate::sim::Value;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn permutation(n: usize, seed: u64) -> Vec<Value> {
        let mut v: Vec<Value> = (1..=n as Value).collect();
        v.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        v
    }

    const BOTH: [Variant; 2] = [Variant::Deterministic, Variant::Randomized];

    #[test]
    fn sorts_exactly_without_faults() {
        for variant in BOTH {
            let mut mem = FaultyMemory::new(&permutation(16, 1));
            resilient_quicksort(&mut mem, 0..16, Delta::Known(0), variant, 2).unwrap();
            assert_eq!(mem.values_in(0..16), (1..=16).collect::<Vec<_>>());
            for n in [2usize, 3, 5, 17, 100, 1000] {
                let x = permutation(n, n as u64);
                let mut mem = FaultyMemory::new(&x);
                resilient_quicksort(&mut mem, 0..n, Delta::Known(3), variant, 2).unwrap();
                assert_eq!(
                    mem.values_in(0..n),
                    (1..=n as Value).collect::<Vec<_>>(),
                    "n={n} {variant}"
                );
            }
        }
    }

    #[test]
    fn single_element_is_untouched() {
        let mut mem = FaultyMemory::new(&[9]);
        let r =
            resilient_quicksort(&mut mem, 0..1, Delta::Known(4), Variant::Randomized, 0).unwrap();
        assert_eq!((r.splits, mem.steps()), (0, 0));
    }

    #[test]
    fn unknown_delta_is_rejected() {
        let mut mem = FaultyMemory::new(&[2, 1]);
        let r = resilient_quicksort(&mut mem, 0..2, Delta::Unknown, Variant::Deterministic, 0);
        assert!(matches!(r, Err(FramError::UnknownDelta(_))));
    }

    #[test]
    fn padding_is_virtual() {
        let n = 1000;
        let mut mem = FaultyMemory::new(&permutation(n, 3));
        let r =
            resilient_quicksort(&mut mem, 0..n, Delta::Known(8), Variant::Randomized, 4).unwrap();
        assert_eq!((r.padded_len, r.levels), (1024, 10));
        assert_eq!(mem.peak_len(), n);
    }

    #[test]
    fn targeted_faults_leave_untainted_values_sorted() {
        let n = 1000;
        for seed in 0..20 {
            for variant in BOTH {
                let x = permutation(n, seed);
                let adv = TargetedPivot::new(0.002, n / 2, seed);
                let mut mem = FaultyMemory::new(&x).with_adversary(Box::new(adv), 32);
                resilient_quicksort(&mut mem, 0..n, Delta::Known(32), variant, seed).unwrap();
                assert!(uncorrupted_sorted(mem.words()), "seed {seed} {variant}");
                assert!(lineage_consistent(mem.words(), &x));
            }
        }
    }

    #[test]
    fn pairwise_order_is_exhaustive_at_64() {
        for seed in 0..50 {
            for variant in BOTH {
                let x = permutation(64, seed);
                let mut mem = FaultyMemory::new(&x)
                    .with_adversary(Box::new(UniformRandom::new(0.01, seed)), 8);
                resilient_quicksort(&mut mem, 0..64, Delta::Known(8), variant, seed).unwrap();
                assert!(pairwise_order(mem.words()));
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(40))]

        #[test]
        fn untainted_sorted_on_arbitrary_inputs(
            x in prop::collection::vec(-20i64..20, 1..200),
            delta in 0u64..12,
            rate in 0.0f64..0.02,
            seed in any::<u64>(),
            randomized in any::<bool>(),
        ) {
            let n = x.len();
            let variant = if randomized { Variant::Randomized } else { Variant::Deterministic };
            let mut mem = FaultyMemory::new(&x).with_adversary(Box::new(UniformRandom::new(rate, seed)), delta);
            resilient_quicksort(&mut mem, 0..n, Delta::Known(delta), variant, seed).unwrap();
            prop_assert!(uncorrupted_sorted(mem.words()));
            if delta == 0 || mem.alpha() == 0 {
                let mut sorted = x.clone();
                sorted.sort_unstable();
                prop_assert_eq!(mem.values_in(0..n), sorted);
            }
        }
    }
}
