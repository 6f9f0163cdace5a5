//! Trial runner: builds inputs, attaches adversaries, runs an algorithm on
//! independent memories, and checks each run against its oracle.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::deterministic_select::deterministic_select;
use crate::error::{FramError, Result};
use crate::kd_tree::{self, KdConfig, Rect};
use crate::quicksort::resilient_quicksort;
use crate::randomized_select::{randomized_select, SplitMix64};
use crate::sandbox::{generic_resilient_split, Variant};
use crate::sim::oracle::{
    alpha_rank_check_ties, lineage_consistent, rank_error, uncorrupted_sorted, untainted_split,
};
use crate::sim::{AdversarySpec, AttackTarget, Delta, FaultyMemory, TraceEvent, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    RandSelect,
    DetSelect,
    Split,
    Quicksort,
    KdBuild,
    KdQuery,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::RandSelect,
        Algorithm::DetSelect,
        Algorithm::Split,
        Algorithm::Quicksort,
        Algorithm::KdBuild,
        Algorithm::KdQuery,
    ];

    fn name(self) -> &'static str {
        match self {
            Algorithm::RandSelect => "rand-select",
            Algorithm::DetSelect => "det-select",
            Algorithm::Split => "split",
            Algorithm::Quicksort => "quicksort",
            Algorithm::KdBuild => "kd-build",
            Algorithm::KdQuery => "kd-query",
        }
    }

    fn is_kd(self) -> bool {
        matches!(self, Algorithm::KdBuild | Algorithm::KdQuery)
    }

    /// Growth model used to normalize step counts.
    pub fn envelope(self) -> Envelope {
        match self {
            Algorithm::RandSelect | Algorithm::DetSelect | Algorithm::Split => Envelope::Linear,
            Algorithm::Quicksort | Algorithm::KdBuild => Envelope::NLogN,
            Algorithm::KdQuery => Envelope::SqrtN,
        }
    }

    /// Rough run length, for schedules fixed before the run.
    fn horizon(self, n: usize) -> u64 {
        let n = n as u64;
        let lg = 64 - n.max(2).leading_zeros() as u64;
        match self {
            Algorithm::RandSelect => 8 * n,
            Algorithm::DetSelect => 300 * n,
            Algorithm::Split => 60 * n,
            Algorithm::Quicksort => 60 * n * lg,
            Algorithm::KdBuild | Algorithm::KdQuery => 300 * n * lg,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = FramError;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| FramError::InvalidSpec(format!("unknown algorithm `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputSpec {
    RandomPermutation,
    Reverse,
    /// Each value repeats an earlier one with this probability.
    Duplicates(f64),
    File(PathBuf),
}

impl fmt::Display for InputSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InputSpec::RandomPermutation => f.write_str("random-permutation"),
            InputSpec::Reverse => f.write_str("reverse"),
            InputSpec::Duplicates(p) => write!(f, "duplicates:{p}"),
            InputSpec::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

impl FromStr for InputSpec {
    type Err = FramError;

    /// `random-permutation`, `reverse`, `duplicates[:P]` or `file:PATH`.
    fn from_str(s: &str) -> Result<Self> {
        let (head, arg) = s.split_once(':').map_or((s, None), |(h, a)| (h, Some(a)));
        match (head, arg) {
            ("random-permutation" | "permutation", None) => Ok(InputSpec::RandomPermutation),
            ("reverse", None) => Ok(InputSpec::Reverse),
            ("duplicates", None) => Ok(InputSpec::Duplicates(0.5)),
            ("duplicates", Some(p)) => match p.parse::<f64>() {
                Ok(p) if (0.0..=1.0).contains(&p) => Ok(InputSpec::Duplicates(p)),
                _ => Err(FramError::InvalidSpec(format!(
                    "duplicate probability `{p}` is not in [0, 1]"
                ))),
            },
            ("file", Some(path)) if !path.is_empty() => Ok(InputSpec::File(path.into())),
            _ => Err(FramError::InvalidSpec(format!("unknown input `{s}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialSpec {
    pub algorithm: Algorithm,
    /// Input size; points for the k-d tree. Ignored for file input.
    pub n: usize,
    /// Target rank (selects) or split point. Defaults to `ceil(n / 2)`.
    pub k: Option<usize>,
    /// Corruption budget handed to the adversary.
    pub delta: u64,
    /// Withhold the budget from the algorithm.
    pub delta_unknown: bool,
    pub adversary: AdversarySpec,
    pub trials: usize,
    pub seed: u64,
    pub input: InputSpec,
    pub variant: Variant,
    pub dims: usize,
    /// Range queries per k-d tree trial.
    pub queries: usize,
}

impl TrialSpec {
    pub fn new(algorithm: Algorithm, n: usize) -> TrialSpec {
        TrialSpec {
            algorithm,
            n,
            k: None,
            delta: 0,
            delta_unknown: false,
            adversary: AdversarySpec::None,
            trials: 1,
            seed: 0,
            input: InputSpec::RandomPermutation,
            variant: Variant::Deterministic,
            dims: 2,
            queries: 20,
        }
    }

    fn delta_for_algorithm(&self) -> Delta {
        if self.delta_unknown {
            Delta::Unknown
        } else {
            Delta::Known(self.delta)
        }
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(FramError::InvalidSpec("trials must be at least 1".into()));
        }
        if self.dims == 0 {
            return Err(FramError::InvalidSpec("dims must be at least 1".into()));
        }
        if self.n == 0 && !matches!(self.input, InputSpec::File(_)) {
            return Err(FramError::InvalidSpec("n must be at least 1".into()));
        }
        Ok(())
    }

    /// Independent seed of trial `i`.
    pub fn trial_seed(&self, i: usize) -> u64 {
        SplitMix64::new(self.seed ^ (i as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)).next_u64()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Trial {
    pub index: usize,
    pub seed: u64,
    pub n: usize,
    pub alpha: u64,
    pub steps: u64,
    pub output: Option<Value>,
    pub rank_error: Option<u64>,
    pub passed: bool,
    pub extra_cells: usize,
    /// Sandbox rounds, select iterations, or nodes, by algorithm.
    pub repetitions: u64,
    pub halted: bool,
    /// k-d tree query cost: nodes visited plus points scanned.
    pub query_cost: u64,
    pub reported: u64,
    pub failure: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialResult {
    pub spec: TrialSpec,
    pub trials: Vec<Trial>,
    pub pass_rate: f64,
    pub mean_steps: f64,
    pub max_steps: u64,
    pub mean_alpha: f64,
    /// Mean steps over the algorithm's growth model at `n`.
    pub steps_constant: f64,
}

impl TrialResult {
    pub fn all_passed(&self) -> bool {
        self.trials.iter().all(|t| t.passed)
    }

    pub fn failing(&self) -> impl Iterator<Item = &Trial> {
        self.trials.iter().filter(|t| !t.passed)
    }
}

fn load_file(path: &Path, dims: usize, points: bool) -> Result<Vec<Value>> {
    if path.extension().is_some_and(|e| e == "bin") {
        let bytes = std::fs::read(path)?;
        let width = if points { dims } else { 1 };
        return Ok(kd_tree::flatten_points(&kd_tree::points_from_le_bytes(
            &bytes, width,
        )?));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(!points)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| FramError::InvalidSpec(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record =
            record.map_err(|e| FramError::InvalidSpec(format!("{}: {e}", path.display())))?;
        if points && record.len() != dims {
            return Err(FramError::InvalidSpec(format!(
                "{}: row {} has {} columns, expected {dims}",
                path.display(),
                line + 1,
                record.len()
            )));
        }
        for field in record.iter().filter(|f| !f.is_empty()) {
            out.push(field.parse().map_err(|_| {
                FramError::InvalidSpec(format!(
                    "{}: row {}: `{field}` is not an integer",
                    path.display(),
                    line + 1
                ))
            })?);
        }
    }
    Ok(out)
}

/// Builds the input of one trial: `n` values, or `n * dims` coordinates for
/// the k-d tree.
pub fn make_input(spec: &TrialSpec, seed: u64) -> Result<Vec<Value>> {
    let kd = spec.algorithm.is_kd();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = spec.n;
    let values = match &spec.input {
        InputSpec::File(path) => load_file(path, spec.dims, kd)?,
        InputSpec::RandomPermutation if kd => (0..n * spec.dims)
            .map(|_| rng.random_range(0..1 << 20))
            .collect(),
        InputSpec::RandomPermutation => {
            let mut v: Vec<Value> = (1..=n as Value).collect();
            v.shuffle(&mut rng);
            v
        }
        InputSpec::Reverse if kd => (0..n)
            .rev()
            .flat_map(|i| std::iter::repeat_n(i as Value, spec.dims))
            .collect(),
        InputSpec::Reverse => (1..=n as Value).rev().collect(),
        InputSpec::Duplicates(p) => {
            let len = if kd { n * spec.dims } else { n };
            let mut v: Vec<Value> = Vec::with_capacity(len);
            for i in 0..len {
                let x = if i > 0 && rng.random_bool(*p) {
                    v[rng.random_range(0..i)]
                } else {
                    i as Value + 1
                };
                v.push(x);
            }
            v.shuffle(&mut rng);
            v
        }
    };
    if values.is_empty() {
        return Err(FramError::Empty);
    }
    Ok(values)
}

fn random_rect(rng: &mut ChaCha8Rng, lo: &[Value], hi: &[Value]) -> Rect {
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for (&l, &h) in lo.iter().zip(hi) {
        let x = rng.random_range(l..=h);
        let y = rng.random_range(l..=h);
        a.push(x.min(y));
        b.push(x.max(y));
    }
    Rect::new(a, b)
}

/// Runs trial `index` of `spec`, optionally recording its memory trace.
pub fn run_trial(
    spec: &TrialSpec,
    index: usize,
    trace: bool,
) -> Result<(Trial, Option<Vec<TraceEvent>>)> {
    let seed = spec.trial_seed(index);
    let x = make_input(spec, seed)?;
    let n = if spec.algorithm.is_kd() {
        x.len() / spec.dims
    } else {
        x.len()
    };
    let k = spec.k.unwrap_or(n.div_ceil(2));
    let is_select = matches!(spec.algorithm, Algorithm::RandSelect | Algorithm::DetSelect);
    if is_select && (k == 0 || k > n) || spec.algorithm == Algorithm::Split && k > n {
        return Err(FramError::RankOutOfRange { k, n });
    }
    let mut mem = FaultyMemory::try_new(&x)?;
    let target = AttackTarget {
        input: &x,
        k,
        delta: spec.delta,
        horizon: spec.algorithm.horizon(n),
    };
    mem.attach(spec.adversary.build(seed ^ 0x5eed, target), spec.delta);
    if trace {
        mem.enable_trace();
    }
    let delta = spec.delta_for_algorithm();
    let algo_seed = seed.rotate_left(17);
    let mut t = Trial {
        index,
        seed,
        n,
        ..Trial::default()
    };
    let mut failure = None;
    let in_place = match spec.algorithm {
        Algorithm::RandSelect => true,
        Algorithm::Split | Algorithm::Quicksort => spec.variant == Variant::Randomized,
        _ => false,
    };

    match spec.algorithm {
        Algorithm::RandSelect | Algorithm::DetSelect => {
            let (value, reps, halted) = if spec.algorithm == Algorithm::RandSelect {
                let o = randomized_select(&mut mem, 0..n, k, algo_seed)?;
                (o.value, o.iterations, false)
            } else {
                let o = deterministic_select(&mut mem, 0..n, k)?;
                (o.value, o.nodes, o.halted)
            };
            t.output = Some(value);
            t.repetitions = reps;
            t.halted = halted;
            t.rank_error = Some(rank_error(&x, value, k));
            if !alpha_rank_check_ties(&x, value, k, mem.alpha()) {
                failure = Some(format!(
                    "rank of {value} is more than alpha={} away from {k}",
                    mem.alpha()
                ));
            }
        }
        Algorithm::Split => {
            let r = generic_resilient_split(&mut mem, 0..n, k, delta, spec.variant, algo_seed)?;
            t.repetitions = r.rounds;
            if !untainted_split(mem.words(), 0..n, k) {
                failure = Some(format!("untainted values cross split point {k}"));
            } else if r.right - r.left > 2 * spec.delta as usize + 2 * mem.alpha() as usize + 2 {
                failure = Some(format!(
                    "sandbox window {}..{} is too wide",
                    r.left, r.right
                ));
            }
        }
        Algorithm::Quicksort => {
            let r = resilient_quicksort(&mut mem, 0..n, delta, spec.variant, algo_seed)?;
            t.repetitions = r.sandbox_rounds;
            if !uncorrupted_sorted(mem.words()) {
                failure = Some("untainted values out of order".into());
            }
        }
        Algorithm::KdBuild | Algorithm::KdQuery => {
            let cfg = KdConfig {
                delta,
                ..KdConfig::new(spec.dims, spec.delta)
            };
            let tree = kd_tree::kd_build(&mut mem, cfg)?;
            t.repetitions = tree.depth as u64;
            let (lo, hi) = (0..spec.dims)
                .map(|a| {
                    let col = x.iter().skip(a).step_by(spec.dims);
                    (*col.clone().min().unwrap(), *col.max().unwrap())
                })
                .unzip::<_, _, Vec<_>, Vec<_>>();
            let rects: Vec<Rect> = if spec.algorithm == Algorithm::KdBuild {
                vec![Rect::new(lo, hi)]
            } else {
                let mut rng = ChaCha8Rng::seed_from_u64(algo_seed);
                (0..spec.queries)
                    .map(|_| random_rect(&mut rng, &lo, &hi))
                    .collect()
            };
            let build_steps = mem.steps();
            for rect in &rects {
                let q = kd_tree::kd_range_query(&mut mem, &tree, rect);
                t.query_cost += q.cost();
                t.reported += q.slots.len() as u64;
                let misses = kd_tree::untainted_misses(mem.words(), &tree, rect, &q.slots);
                if !misses.is_empty() {
                    failure = Some(format!(
                        "{} untainted points missed by {rect:?}",
                        misses.len()
                    ));
                    break;
                }
                if mem.alpha() == 0 {
                    let mut got = q.slots;
                    got.sort_unstable();
                    if got != kd_tree::brute_force(mem.words(), &tree, rect) {
                        failure =
                            Some(format!("fault-free answer to {rect:?} differs from a scan"));
                        break;
                    }
                }
            }
            if spec.algorithm == Algorithm::KdBuild {
                t.steps = build_steps;
            } else {
                t.steps = mem.steps() - build_steps;
            }
        }
    }

    if failure.is_none() && !lineage_consistent(&mem.words()[..x.len()], &x) {
        failure = Some("values appeared that were neither input nor corruption".into());
    }
    if failure.is_none() && in_place && mem.allocated_beyond_input() > 0 {
        failure = Some(format!(
            "{} cells allocated beyond the input",
            mem.allocated_beyond_input()
        ));
    }
    if t.steps == 0 {
        t.steps = mem.steps();
    }
    t.alpha = mem.alpha();
    t.extra_cells = mem.allocated_beyond_input();
    t.passed = failure.is_none();
    t.failure = failure;
    let trace = trace.then(|| mem.take_trace());
    Ok((t, trace))
}

/// Runs every trial of `spec` in parallel; results are ordered by trial
/// index and reproducible from the spec alone.
pub fn run_trials(spec: &TrialSpec) -> Result<TrialResult> {
    spec.validate()?;
    let trials = (0..spec.trials)
        .into_par_iter()
        .map(|i| run_trial(spec, i, false).map(|(t, _)| t))
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize(spec.clone(), trials))
}

fn summarize(spec: TrialSpec, trials: Vec<Trial>) -> TrialResult {
    let count = trials.len() as f64;
    let passed = trials.iter().filter(|t| t.passed).count() as f64;
    let mean_steps = trials.iter().map(|t| t.steps as f64).sum::<f64>() / count;
    let mean_alpha = trials.iter().map(|t| t.alpha as f64).sum::<f64>() / count;
    let n = trials.first().map_or(spec.n, |t| t.n);
    TrialResult {
        pass_rate: passed / count,
        mean_steps,
        max_steps: trials.iter().map(|t| t.steps).max().unwrap_or(0),
        mean_alpha,
        steps_constant: mean_steps / spec.algorithm.envelope().scale(n, spec.delta),
        spec,
        trials,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Envelope {
    Linear,
    NLogN,
    /// `sqrt(n * max(delta, 1))`, the range query bound without output.
    SqrtN,
}

impl Envelope {
    pub fn scale(self, n: usize, delta: u64) -> f64 {
        let n = n as f64;
        match self {
            Envelope::Linear => n,
            Envelope::NLogN => n * n.log2().max(1.0),
            Envelope::SqrtN => (n * delta.max(1) as f64).sqrt(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingRow {
    pub n: usize,
    pub delta: u64,
    pub mean_steps: f64,
    pub mean_alpha: f64,
    pub constant: f64,
    pub pass_rate: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingReport {
    pub algorithm: Algorithm,
    pub envelope: Envelope,
    pub rows: Vec<ScalingRow>,
    /// Largest over smallest normalized constant.
    pub spread: f64,
}

/// Runs `base` at every size and fault budget and normalizes the mean step
/// counts by the algorithm's growth model.
pub fn scaling_report(base: &TrialSpec, sizes: &[usize], deltas: &[u64]) -> Result<ScalingReport> {
    if sizes.len() < 2 {
        return Err(FramError::InvalidSpec(
            "a scaling report needs at least two sizes".into(),
        ));
    }
    let mut rows = Vec::new();
    for &delta in deltas {
        for &n in sizes {
            let r = run_trials(&TrialSpec {
                n,
                delta,
                k: None,
                ..base.clone()
            })?;
            rows.push(ScalingRow {
                n,
                delta,
                mean_steps: r.mean_steps,
                mean_alpha: r.mean_alpha,
                constant: r.steps_constant,
                pass_rate: r.pass_rate,
            });
        }
    }
    let max = rows.iter().map(|r| r.constant).fold(f64::MIN, f64::max);
    let min = rows.iter().map(|r| r.constant).fold(f64::MAX, f64::min);
    Ok(ScalingReport {
        algorithm: base.algorithm,
        envelope: base.algorithm.envelope(),
        rows,
        spread: max / min,
    })
}

/// `steps ~ c1 * n log2 n + c2 * alpha * delta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SortEnvelope {
    pub c1: f64,
    pub c2: f64,
}

impl SortEnvelope {
    /// Fits `c1` on a fault-free cell and `c2` on a faulty cell of the same
    /// kind, both given as `(n, mean alpha * delta, mean steps)`.
    pub fn fit(clean: (usize, f64, f64), faulty: (usize, f64, f64)) -> SortEnvelope {
        let nlogn = |n: usize| Envelope::NLogN.scale(n, 0);
        let c1 = clean.2 / nlogn(clean.0);
        let excess = (faulty.2 - c1 * nlogn(faulty.0)).max(0.0);
        let c2 = if faulty.1 > 0.0 {
            excess / faulty.1
        } else {
            0.0
        };
        SortEnvelope { c1, c2 }
    }

    pub fn predict(self, n: usize, alpha_delta: f64) -> f64 {
        self.c1 * Envelope::NLogN.scale(n, 0) + self.c2 * alpha_delta
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_names() {
        for a in Algorithm::ALL {
            assert_eq!(a.to_string().parse::<Algorithm>().unwrap(), a);
        }
        assert!("bogo-sort".parse::<Algorithm>().is_err());
        for s in [
            "random-permutation",
            "reverse",
            "duplicates:0.25",
            "file:/tmp/x.csv",
        ] {
            assert_eq!(s.parse::<InputSpec>().unwrap().to_string(), s);
        }
        assert!("duplicates:2".parse::<InputSpec>().is_err());
        assert!("file:".parse::<InputSpec>().is_err());
    }

    #[test]
    fn rand_select_fault_free_is_exact() {
        let spec = TrialSpec {
            k: Some(500),
            trials: 100,
            variant: Variant::Randomized,
            ..TrialSpec::new(Algorithm::RandSelect, 1000)
        };
        let r = run_trials(&spec).unwrap();
        assert_eq!(r.pass_rate, 1.0);
        assert!(r
            .trials
            .iter()
            .all(|t| t.rank_error == Some(0) && t.extra_cells == 0));
    }

    #[test]
    fn trials_are_reproducible() {
        let spec = TrialSpec {
            delta: 16,
            adversary: "uniform:0.001".parse().unwrap(),
            trials: 4,
            seed: 11,
            ..TrialSpec::new(Algorithm::DetSelect, 2000)
        };
        assert_eq!(run_trials(&spec).unwrap(), run_trials(&spec).unwrap());
        let (a, trace) = run_trial(&spec, 2, true).unwrap();
        assert_eq!(a, run_trials(&spec).unwrap().trials[2]);
        assert_eq!(trace.unwrap().len() as u64, a.steps + a.alpha);
    }

    #[test]
    fn every_algorithm_passes_under_faults() {
        for algorithm in Algorithm::ALL {
            for variant in [Variant::Deterministic, Variant::Randomized] {
                for input in [
                    InputSpec::RandomPermutation,
                    InputSpec::Reverse,
                    InputSpec::Duplicates(0.7),
                ] {
                    let spec = TrialSpec {
                        delta: 8,
                        adversary: "uniform:0.001".parse().unwrap(),
                        trials: 3,
                        variant,
                        input: input.clone(),
                        ..TrialSpec::new(algorithm, 300)
                    };
                    let r = run_trials(&spec).unwrap();
                    assert!(
                        r.all_passed(),
                        "{algorithm} {variant} {input}: {:?}",
                        r.failing().next()
                    );
                }
            }
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let spec = TrialSpec {
            trials: 0,
            ..TrialSpec::new(Algorithm::Split, 10)
        };
        assert!(run_trials(&spec).is_err());
        let spec = TrialSpec {
            k: Some(11),
            ..TrialSpec::new(Algorithm::DetSelect, 10)
        };
        assert!(matches!(
            run_trials(&spec),
            Err(FramError::RankOutOfRange { .. })
        ));
        let spec = TrialSpec {
            delta_unknown: true,
            ..TrialSpec::new(Algorithm::Quicksort, 10)
        };
        assert!(matches!(run_trials(&spec), Err(FramError::UnknownDelta(_))));
        let spec = TrialSpec {
            delta_unknown: true,
            ..TrialSpec::new(Algorithm::DetSelect, 10)
        };
        assert!(run_trials(&spec).unwrap().all_passed());
        let spec = TrialSpec {
            input: InputSpec::File("/nonexistent/values.csv".into()),
            ..TrialSpec::new(Algorithm::Split, 10)
        };
        assert!(run_trials(&spec).is_err());
    }

    #[test]
    fn sort_envelope_fit() {
        let e = SortEnvelope::fit(
            (1024, 0.0, 1024.0 * 10.0 * 3.0),
            (1024, 100.0, 1024.0 * 10.0 * 3.0 + 500.0),
        );
        assert!((e.c1 - 3.0).abs() < 1e-9 && (e.c2 - 5.0).abs() < 1e-9);
        assert!((e.predict(2048, 10.0) - (3.0 * 2048.0 * 11.0 + 50.0)).abs() < 1e-6);
    }
}
