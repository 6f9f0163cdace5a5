//! Corruption strategies.
//!
//! A strategy is consulted before algorithm accesses (at the steps it asks
//! for) and may rewrite any faulty cells, one budget unit per cell. It sees
//! memory contents, the previous access, region labels, n, k and δ. It never
//! sees the reliable store or an algorithm's random coins.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::memory::{Access, FaultyMemory, Region, RegionKind, Value};
use crate::error::FramError;

/// Restricted handle on the memory given to a strategy.
pub struct AdversaryView<'a> {
    pub(super) mem: &'a mut FaultyMemory,
}

impl AdversaryView<'_> {
    pub fn len(&self) -> usize {
        self.mem.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mem.is_empty()
    }

    pub fn input_len(&self) -> usize {
        self.mem.input_len()
    }

    pub fn value(&self, i: usize) -> Value {
        self.mem.words()[i].value
    }

    pub fn steps(&self) -> u64 {
        self.mem.steps()
    }

    pub fn last_access(&self) -> Option<Access> {
        self.mem.last_access()
    }

    pub fn regions(&self) -> &[Region] {
        self.mem.regions()
    }

    pub fn region_epoch(&self) -> u64 {
        self.mem.region_epoch()
    }

    pub fn remaining(&self) -> u64 {
        self.mem.budget() - self.mem.alpha()
    }

    /// Rewrites cell `i`. Returns false once the budget is spent.
    pub fn corrupt(&mut self, i: usize, v: Value) -> bool {
        self.mem.corrupt_cell(i, v)
    }
}

/// Never fire again.
pub const NEVER: u64 = u64::MAX;

pub trait Strategy: Send {
    /// Called once when attached. Returns the first step at which to fire;
    /// firing at step `s` happens just before access number `s + 1`.
    fn start(&mut self, _view: &AdversaryView<'_>) -> u64 {
        0
    }

    /// Returns the next step at which to fire.
    fn fire(&mut self, view: &mut AdversaryView<'_>) -> u64;
}

pub struct NoFaults;

impl Strategy for NoFaults {
    fn start(&mut self, _view: &AdversaryView<'_>) -> u64 {
        NEVER
    }

    fn fire(&mut self, _view: &mut AdversaryView<'_>) -> u64 {
        NEVER
    }
}

/// Value range of the input region, observed when the strategy is attached.
#[derive(Clone, Copy, Debug)]
struct ValueSpan {
    lo: Value,
    hi: Value,
}

impl ValueSpan {
    fn observe(view: &AdversaryView<'_>) -> ValueSpan {
        let n = view.input_len();
        let (mut lo, mut hi) = (0, 0);
        if n > 0 {
            lo = Value::MAX;
            hi = Value::MIN;
            for i in 0..n {
                let v = view.value(i);
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        ValueSpan { lo, hi }
    }

    fn width(self) -> Value {
        (self.hi.saturating_sub(self.lo)).clamp(1, 1 << 40)
    }

    /// Mostly plausible values, sometimes just outside the input's range.
    fn garbage(self, rng: &mut ChaCha8Rng) -> Value {
        let w = self.width();
        match rng.random_range(0..4u8) {
            0 => self.lo.saturating_sub(rng.random_range(1..=w)),
            1 => self.hi.saturating_add(rng.random_range(1..=w)),
            _ => rng.random_range(self.lo..=self.hi),
        }
    }

    fn below(self, rng: &mut ChaCha8Rng) -> Value {
        self.lo.saturating_sub(rng.random_range(1..=self.width()))
    }

    fn above(self, rng: &mut ChaCha8Rng) -> Value {
        self.hi.saturating_add(rng.random_range(1..=self.width()))
    }
}

/// Steps until the next event of a Bernoulli(rate)-per-step process.
fn geometric_gap(rng: &mut ChaCha8Rng, rate: f64) -> u64 {
    if rate >= 1.0 {
        return 1;
    }
    if rate <= 0.0 {
        return NEVER;
    }
    let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
    1 + (u.ln() / (1.0 - rate).ln()).floor().min(1e18) as u64
}

/// Corrupts uniformly random faulty cells at an average of `rate` per access.
pub struct UniformRandom {
    rate: f64,
    rng: ChaCha8Rng,
    span: ValueSpan,
}

impl UniformRandom {
    pub fn new(rate: f64, seed: u64) -> UniformRandom {
        UniformRandom {
            rate,
            rng: ChaCha8Rng::seed_from_u64(seed),
            span: ValueSpan { lo: 0, hi: 0 },
        }
    }
}

impl Strategy for UniformRandom {
    fn start(&mut self, view: &AdversaryView<'_>) -> u64 {
        self.span = ValueSpan::observe(view);
        geometric_gap(&mut self.rng, self.rate).saturating_sub(1)
    }

    fn fire(&mut self, view: &mut AdversaryView<'_>) -> u64 {
        if !view.is_empty() {
            let i = self.rng.random_range(0..view.len());
            let v = self.span.garbage(&mut self.rng);
            view.corrupt(i, v);
        }
        view.steps()
            .saturating_add(geometric_gap(&mut self.rng, self.rate))
    }
}

/// Hits the cell the algorithm touched last, pushing its value to the far
/// side of the k-th input statistic. The pivot an algorithm just read and
/// the medians it just wrote are the usual victims.
pub struct TargetedPivot {
    rate: f64,
    k: usize,
    rng: ChaCha8Rng,
    span: ValueSpan,
    kth: Value,
}

impl TargetedPivot {
    pub fn new(rate: f64, k: usize, seed: u64) -> TargetedPivot {
        TargetedPivot {
            rate,
            k,
            rng: ChaCha8Rng::seed_from_u64(seed),
            span: ValueSpan { lo: 0, hi: 0 },
            kth: 0,
        }
    }
}

impl Strategy for TargetedPivot {
    fn start(&mut self, view: &AdversaryView<'_>) -> u64 {
        self.span = ValueSpan::observe(view);
        let mut vals: Vec<Value> = (0..view.input_len()).map(|i| view.value(i)).collect();
        if !vals.is_empty() {
            let k = self.k.clamp(1, vals.len());
            let (_, kth, _) = vals.select_nth_unstable(k - 1);
            self.kth = *kth;
        }
        geometric_gap(&mut self.rng, self.rate).saturating_sub(1)
    }

    fn fire(&mut self, view: &mut AdversaryView<'_>) -> u64 {
        if let Some(a) = view.last_access() {
            let i = if self.rng.random::<bool>() {
                a.index
            } else {
                a.aux
            };
            if i < view.len() {
                let v = if view.value(i) <= self.kth {
                    self.span.above(&mut self.rng)
                } else {
                    self.span.below(&mut self.rng)
                };
                view.corrupt(i, v);
            }
        }
        view.steps()
            .saturating_add(geometric_gap(&mut self.rng, self.rate))
    }
}

/// Watches for newly labelled replica blocks and, when it can afford it,
/// overwrites a strict majority of the newest one with a single garbage
/// value. Falls back to uniform corruption when no replicas exist.
pub struct ReplicaAttacker {
    rate: f64,
    rng: ChaCha8Rng,
    span: ValueSpan,
    seen_epoch: u64,
}

const REPLICA_POLL: u64 = 8;

impl ReplicaAttacker {
    pub fn new(rate: f64, seed: u64) -> ReplicaAttacker {
        ReplicaAttacker {
            rate,
            rng: ChaCha8Rng::seed_from_u64(seed),
            span: ValueSpan { lo: 0, hi: 0 },
            seen_epoch: 0,
        }
    }
}

impl Strategy for ReplicaAttacker {
    fn start(&mut self, view: &AdversaryView<'_>) -> u64 {
        self.span = ValueSpan::observe(view);
        self.seen_epoch = view.region_epoch();
        REPLICA_POLL
    }

    fn fire(&mut self, view: &mut AdversaryView<'_>) -> u64 {
        let epoch = view.region_epoch();
        if epoch != self.seen_epoch {
            self.seen_epoch = epoch;
            let target = view
                .regions()
                .iter()
                .rev()
                .find(|r| r.kind == RegionKind::Replica)
                .cloned();
            match target {
                Some(r) => {
                    let need = (r.range.len() / 2 + 1) as u64;
                    if need <= view.remaining() && self.rng.random_bool(self.rate.clamp(0.0, 1.0)) {
                        let v = self.span.garbage(&mut self.rng);
                        for i in r.range.start..r.range.start + need as usize {
                            view.corrupt(i, v);
                        }
                    }
                }
                None => {
                    if !view.is_empty() && self.rng.random_bool(self.rate.clamp(0.0, 1.0)) {
                        let i = self.rng.random_range(0..view.len());
                        let v = self.span.garbage(&mut self.rng);
                        view.corrupt(i, v);
                    }
                }
            }
        } else if !view.regions().iter().any(|r| r.kind == RegionKind::Replica)
            && !view.is_empty()
            && self
                .rng
                .random_bool((self.rate * REPLICA_POLL as f64 / 64.0).clamp(0.0, 1.0))
        {
            let i = self.rng.random_range(0..view.len());
            let v = self.span.garbage(&mut self.rng);
            view.corrupt(i, v);
        }
        view.steps() + REPLICA_POLL
    }
}

/// Overwrites a majority of the lower-bound copies of every large stack
/// frame with a value above the whole input. The frame's node then hunts
/// for an answer at the top end, its parent's check fails, and the parent
/// repeats. Drives a deterministic selection towards its counter halt.
pub struct BoundFlip {
    min_len: usize,
    span: ValueSpan,
    seen_epoch: u64,
}

impl BoundFlip {
    pub fn new(min_len: usize) -> BoundFlip {
        BoundFlip {
            min_len,
            span: ValueSpan { lo: 0, hi: 0 },
            seen_epoch: 0,
        }
    }
}

impl Strategy for BoundFlip {
    fn start(&mut self, view: &AdversaryView<'_>) -> u64 {
        self.span = ValueSpan::observe(view);
        self.seen_epoch = view.region_epoch();
        1
    }

    fn fire(&mut self, view: &mut AdversaryView<'_>) -> u64 {
        let epoch = view.region_epoch();
        if epoch != self.seen_epoch {
            self.seen_epoch = epoch;
            // Frames are labelled [array, ub, lb, k].
            let regions = view.regions();
            let frame = regions
                .iter()
                .rposition(|r| r.kind == RegionKind::StackFrame);
            if let Some(f) = frame {
                if regions[f].range.len() >= self.min_len && f + 2 < regions.len() {
                    let lb = regions[f + 2].range.clone();
                    let need = lb.len() / 2 + 1;
                    if need as u64 <= view.remaining() {
                        let v = self.span.hi.saturating_add(1);
                        for i in lb.start..lb.start + need {
                            view.corrupt(i, v);
                        }
                    }
                }
            }
        }
        view.steps() + 1
    }
}

/// Corrupts `size` random cells at each listed step.
pub struct Burst {
    times: Vec<u64>,
    size: usize,
    next: usize,
    rng: ChaCha8Rng,
    span: ValueSpan,
}

impl Burst {
    pub fn new(mut times: Vec<u64>, size: usize, seed: u64) -> Burst {
        times.sort_unstable();
        Burst {
            times,
            size,
            next: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            span: ValueSpan { lo: 0, hi: 0 },
        }
    }
}

impl Strategy for Burst {
    fn start(&mut self, view: &AdversaryView<'_>) -> u64 {
        self.span = ValueSpan::observe(view);
        self.times.first().copied().unwrap_or(NEVER)
    }

    fn fire(&mut self, view: &mut AdversaryView<'_>) -> u64 {
        while self.next < self.times.len() && self.times[self.next] <= view.steps() {
            self.next += 1;
            for _ in 0..self.size {
                if view.is_empty() {
                    break;
                }
                let i = self.rng.random_range(0..view.len());
                let v = self.span.garbage(&mut self.rng);
                view.corrupt(i, v);
            }
        }
        self.times.get(self.next).copied().unwrap_or(NEVER)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptedCorruption {
    /// Fires just before access number `step + 1`.
    pub step: u64,
    pub index: usize,
    pub value: Value,
}

/// A fixed schedule. Entries naming a cell that does not exist at firing
/// time are skipped without spending budget.
pub struct Scripted {
    events: Vec<ScriptedCorruption>,
    next: usize,
}

impl Scripted {
    pub fn new(mut events: Vec<ScriptedCorruption>) -> Scripted {
        events.sort_by_key(|e| e.step);
        Scripted { events, next: 0 }
    }

    /// A front-loaded schedule against rank `k`: half the budget swaps the
    /// values ranked just around `k` to the opposite extreme before the
    /// first access, the rest lands on random input cells spread over
    /// `horizon` steps.
    pub fn worst_case(input: &[Value], k: usize, delta: u64, horizon: u64, seed: u64) -> Scripted {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = input.len();
        let mut events = Vec::new();
        if n == 0 || delta == 0 {
            return Scripted::new(events);
        }
        let lo = *input.iter().min().unwrap();
        let hi = *input.iter().max().unwrap();
        let width = (hi.saturating_sub(lo)).clamp(1, 1 << 40);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&i| input[i]);
        let k = k.clamp(1, n);
        let front = (delta.div_ceil(2)).min(n as u64) as usize;
        // Alternate just-below and just-above the target rank.
        let (mut below, mut above) = (k as isize - 1, k as isize);
        for j in 0..front {
            let take_below = (j % 2 == 0 && below >= 0) || above >= n as isize;
            let (pos, value) = if take_below {
                below -= 1;
                (
                    order[(below + 1) as usize],
                    hi.saturating_add(1 + (j as Value % width)),
                )
            } else {
                above += 1;
                (
                    order[(above - 1) as usize],
                    lo.saturating_sub(1 + (j as Value % width)),
                )
            };
            events.push(ScriptedCorruption {
                step: 0,
                index: pos,
                value,
            });
        }
        let rest = delta - front as u64;
        for j in 0..rest {
            let step = (j + 1).saturating_mul(horizon.max(1)) / (rest + 1);
            let index = rng.random_range(0..n);
            let value = if rng.random::<bool>() {
                hi.saturating_add(rng.random_range(1..=width))
            } else {
                lo.saturating_sub(rng.random_range(1..=width))
            };
            events.push(ScriptedCorruption { step, index, value });
        }
        Scripted::new(events)
    }
}

impl Strategy for Scripted {
    fn start(&mut self, _view: &AdversaryView<'_>) -> u64 {
        self.events.first().map_or(NEVER, |e| e.step)
    }

    fn fire(&mut self, view: &mut AdversaryView<'_>) -> u64 {
        while self.next < self.events.len() && self.events[self.next].step <= view.steps() {
            let e = self.events[self.next];
            self.next += 1;
            if e.index < view.len() {
                view.corrupt(e.index, e.value);
            }
        }
        self.events.get(self.next).map_or(NEVER, |e| e.step)
    }
}

/// Serializable description of a strategy, as accepted on the command line.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum AdversarySpec {
    None,
    UniformRandom { rate: f64 },
    TargetedPivot { rate: f64 },
    ReplicaAttacker { rate: f64 },
    Burst { times: Vec<u64>, size: usize },
    ScriptedWorst { horizon: Option<u64> },
    BoundFlip { min_len: Option<usize> },
    Scripted { schedule: Vec<ScriptedCorruption> },
}

/// Run parameters a strategy may depend on.
#[derive(Clone, Copy, Debug)]
pub struct AttackTarget<'a> {
    pub input: &'a [Value],
    pub k: usize,
    pub delta: u64,
    /// Expected run length in steps, for schedules fixed in advance.
    pub horizon: u64,
}

impl AdversarySpec {
    pub fn build(&self, seed: u64, target: AttackTarget<'_>) -> Box<dyn Strategy> {
        match self {
            AdversarySpec::None => Box::new(NoFaults),
            AdversarySpec::UniformRandom { rate } => Box::new(UniformRandom::new(*rate, seed)),
            AdversarySpec::TargetedPivot { rate } => {
                Box::new(TargetedPivot::new(*rate, target.k, seed))
            }
            AdversarySpec::ReplicaAttacker { rate } => Box::new(ReplicaAttacker::new(*rate, seed)),
            AdversarySpec::Burst { times, size } => {
                Box::new(Burst::new(times.clone(), *size, seed))
            }
            AdversarySpec::ScriptedWorst { horizon } => Box::new(Scripted::worst_case(
                target.input,
                target.k,
                target.delta,
                horizon.unwrap_or(target.horizon),
                seed,
            )),
            AdversarySpec::BoundFlip { min_len } => Box::new(BoundFlip::new(
                min_len.unwrap_or(target.input.len().div_ceil(2).max(1)),
            )),
            AdversarySpec::Scripted { schedule } => Box::new(Scripted::new(schedule.clone())),
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, AdversarySpec::None)
    }
}

impl fmt::Display for AdversarySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AdversarySpec::None => write!(f, "none"),
            AdversarySpec::UniformRandom { rate } => write!(f, "uniform:{rate}"),
            AdversarySpec::TargetedPivot { rate } => write!(f, "targeted:{rate}"),
            AdversarySpec::ReplicaAttacker { rate } => write!(f, "replica:{rate}"),
            AdversarySpec::Burst { times, size } => {
                let t: Vec<String> = times.iter().map(u64::to_string).collect();
                write!(f, "burst:{}:{size}", t.join(","))
            }
            AdversarySpec::ScriptedWorst { horizon: Some(h) } => write!(f, "scripted-worst:{h}"),
            AdversarySpec::ScriptedWorst { horizon: None } => write!(f, "scripted-worst"),
            AdversarySpec::BoundFlip { min_len: Some(m) } => write!(f, "bound-flip:{m}"),
            AdversarySpec::BoundFlip { min_len: None } => write!(f, "bound-flip"),
            AdversarySpec::Scripted { schedule } => write!(f, "scripted[{}]", schedule.len()),
        }
    }
}

impl FromStr for AdversarySpec {
    type Err = FramError;

    /// `none`, `uniform[:RATE]`, `targeted[:RATE]`, `replica[:RATE]`,
    /// `burst:STEP,STEP,...:SIZE`, `scripted-worst[:HORIZON]`,
    /// `bound-flip[:MIN_FRAME_LEN]`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |m: &str| FramError::InvalidSpec(format!("adversary `{s}`: {m}"));
        let mut parts = s.split(':');
        let name = parts.next().unwrap_or_default();
        let rate = |p: Option<&str>, default: f64| -> Result<f64, FramError> {
            match p {
                None => Ok(default),
                Some(r) => {
                    let r: f64 = r.parse().map_err(|_| bad("rate must be a number"))?;
                    if !(0.0..=1.0).contains(&r) {
                        return Err(bad("rate must lie in [0, 1]"));
                    }
                    Ok(r)
                }
            }
        };
        let spec = match name {
            "none" => AdversarySpec::None,
            "uniform" | "uniform_random" => AdversarySpec::UniformRandom {
                rate: rate(parts.next(), 0.01)?,
            },
            "targeted" | "targeted_pivot" => AdversarySpec::TargetedPivot {
                rate: rate(parts.next(), 0.01)?,
            },
            "replica" | "replica_attacker" => AdversarySpec::ReplicaAttacker {
                rate: rate(parts.next(), 1.0)?,
            },
            "burst" => {
                let times = parts
                    .next()
                    .ok_or_else(|| bad("missing step list"))?
                    .split(',')
                    .map(|t| t.parse::<u64>().map_err(|_| bad("steps must be integers")))
                    .collect::<Result<Vec<_>, _>>()?;
                let size = parts
                    .next()
                    .map(|p| {
                        p.parse::<usize>()
                            .map_err(|_| bad("size must be an integer"))
                    })
                    .transpose()?
                    .unwrap_or(1);
                AdversarySpec::Burst { times, size }
            }
            "scripted-worst" | "scripted_worst" => AdversarySpec::ScriptedWorst {
                horizon: parts
                    .next()
                    .map(|h| h.parse().map_err(|_| bad("horizon must be an integer")))
                    .transpose()?,
            },
            "bound-flip" | "bound_flip" => AdversarySpec::BoundFlip {
                min_len: parts
                    .next()
                    .map(|m| {
                        m.parse()
                            .map_err(|_| bad("frame length must be an integer"))
                    })
                    .transpose()?,
            },
            _ => return Err(bad("unknown strategy")),
        };
        if parts.next().is_some() {
            return Err(bad("too many fields"));
        }
        Ok(spec)
    }
}
