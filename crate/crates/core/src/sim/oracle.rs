//! Ground-truth checks. These read simulator metadata and the pristine
//! snapshot, so algorithms must never call them.

use std::ops::Range;

use super::memory::{Value, Word};

/// Number of values in `x0` that are `<= e`.
pub fn true_rank(x0: &[Value], e: Value) -> usize {
    x0.iter().filter(|&&x| x <= e).count()
}

/// Whether `e` has a rank in `[k - alpha, k + alpha]` of `x0`. Vacuous once
/// `alpha >= n`.
pub fn alpha_rank_check(x0: &[Value], e: Value, k: usize, alpha: u64) -> bool {
    if alpha >= x0.len() as u64 {
        return true;
    }
    let r = true_rank(x0, e) as i128;
    let (k, a) = (k as i128, alpha as i128);
    (k - a..=k + a).contains(&r)
}

/// Variant of [`alpha_rank_check`] for inputs with repeated values: `e` may
/// stand for any of its copies, so its rank is the interval
/// `[#{x < e} + 1, #{x <= e}]` (a single point when `e` is absent).
pub fn alpha_rank_check_ties(x0: &[Value], e: Value, k: usize, alpha: u64) -> bool {
    if alpha >= x0.len() as u64 {
        return true;
    }
    let lt = x0.iter().filter(|&&x| x < e).count() as i128;
    let le = true_rank(x0, e) as i128;
    let lo = (lt + 1).min(le);
    let (k, a) = (k as i128, alpha as i128);
    lo <= k + a && le >= k - a
}

/// Distance from `k` to the rank interval of `e`.
pub fn rank_error(x0: &[Value], e: Value, k: usize) -> u64 {
    let lt = x0.iter().filter(|&&x| x < e).count();
    let le = true_rank(x0, e);
    let lo = (lt + 1).min(le);
    if k < lo {
        (lo - k) as u64
    } else if k > le {
        (k - le) as u64
    } else {
        0
    }
}

/// The untainted words of `words`, in order, are nondecreasing.
pub fn uncorrupted_sorted(words: &[Word]) -> bool {
    let mut last: Option<Value> = None;
    for w in words.iter().filter(|w| !w.tainted) {
        if last.is_some_and(|l| w.value < l) {
            return false;
        }
        last = Some(w.value);
    }
    true
}

/// Every untainted value in `range[..s]` is `<=` every untainted value in
/// `range[s..]`.
pub fn untainted_split(words: &[Word], range: Range<usize>, s: usize) -> bool {
    let mid = range.start + s;
    let left = words[range.start..mid]
        .iter()
        .filter(|w| !w.tainted)
        .map(|w| w.value)
        .max();
    let right = words[mid..range.end]
        .iter()
        .filter(|w| !w.tainted)
        .map(|w| w.value)
        .min();
    match (left, right) {
        (Some(l), Some(r)) => l <= r,
        _ => true,
    }
}

/// For every pair of untainted words whose values differ, the smaller one
/// sits at the smaller position. Quadratic; meant for small arrays.
pub fn pairwise_order(words: &[Word]) -> bool {
    let live: Vec<(usize, Value)> = words
        .iter()
        .enumerate()
        .filter(|(_, w)| !w.tainted)
        .map(|(i, w)| (i, w.value))
        .collect();
    for (a, &(pa, va)) in live.iter().enumerate() {
        for &(pb, vb) in &live[a + 1..] {
            if va != vb && (va < vb) != (pa < pb) {
                return false;
            }
        }
    }
    true
}

/// Untainted words keep the value their origin had in the snapshot: the
/// multiset of surviving input values is intact.
pub fn lineage_consistent(words: &[Word], x0: &[Value]) -> bool {
    words
        .iter()
        .filter(|w| !w.tainted)
        .all(|w| match w.origin.input_index() {
            Some(i) => x0.get(i) == Some(&w.value),
            None => true,
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::memory::Origin;

    fn words(vals: &[(Value, bool)]) -> Vec<Word> {
        vals.iter()
            .enumerate()
            .map(|(i, &(value, tainted))| Word {
                value,
                origin: if tainted {
                    Origin::ADVERSARIAL
                } else {
                    Origin::input(i)
                },
                tainted,
            })
            .collect()
    }

    #[test]
    fn true_rank_examples() {
        assert_eq!(true_rank(&[3, 1, 2], 2), 2);
        assert_eq!(true_rank(&[3, 1, 2], 0), 0);
        assert_eq!(true_rank(&[5, 5, 5], 5), 3);
    }

    #[test]
    fn alpha_rank_examples() {
        let x: Vec<Value> = (1..=10).collect();
        assert!(alpha_rank_check(&x, 4, 4, 0));
        assert!(!alpha_rank_check(&x, 6, 4, 1));
        for e in [-100, 0, 5, 11, 1000] {
            for k in 1..=10 {
                assert!(alpha_rank_check(&x, e, k, 10));
            }
        }
    }

    #[test]
    fn ties_variant_accepts_any_copy() {
        let x = [1, 5, 5, 5, 9];
        assert!(!alpha_rank_check(&x, 5, 2, 0));
        assert!(alpha_rank_check_ties(&x, 5, 2, 0));
        assert!(alpha_rank_check_ties(&x, 5, 4, 0));
        assert!(!alpha_rank_check_ties(&x, 5, 5, 0));
        assert_eq!(rank_error(&x, 5, 5), 1);
        assert_eq!(rank_error(&x, 3, 1), 0);
    }

    #[test]
    fn sortedness_examples() {
        assert!(uncorrupted_sorted(&words(&[
            (1, false),
            (9, true),
            (2, false),
            (3, false)
        ])));
        assert!(!uncorrupted_sorted(&words(&[(2, false), (1, false)])));
        assert!(uncorrupted_sorted(&words(&[(2, true), (1, true)])));
    }

    #[test]
    fn split_and_pairs() {
        let w = words(&[
            (2, false),
            (9, true),
            (1, false),
            (3, false),
            (0, true),
            (4, false),
        ]);
        assert!(untainted_split(&w, 0..6, 3));
        assert!(!untainted_split(&w, 0..6, 1));
        assert!(!pairwise_order(&w));
        let w = words(&[(1, false), (9, true), (2, false), (2, false)]);
        assert!(pairwise_order(&w));
    }
}
