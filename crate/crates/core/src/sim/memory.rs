use std::ops::Range;

use serde::Serialize;

use super::adversary::{AdversaryView, Strategy};
use super::reliable::ReliableStore;
use crate::error::{FramError, Result};

/// Cell contents. `i64::MIN` and `i64::MAX` are reserved as -inf and +inf.
pub type Value = i64;

pub const NEG_INF: Value = i64::MIN;
pub const POS_INF: Value = i64::MAX;

/// Identity of the value held by a cell: the input position it came from,
/// a fresh algorithm write, or an adversarial write.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct Origin(u32);

impl Origin {
    pub const ADVERSARIAL: Origin = Origin(u32::MAX);
    pub const FRESH: Origin = Origin(u32::MAX - 1);

    pub fn input(i: usize) -> Origin {
        assert!(
            i < (u32::MAX - 1) as usize,
            "input too large for origin tags"
        );
        Origin(i as u32)
    }

    pub fn input_index(self) -> Option<usize> {
        (self.0 < u32::MAX - 1).then_some(self.0 as usize)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Word {
    pub value: Value,
    pub origin: Origin,
    /// Simulator metadata; algorithms never see it.
    pub tainted: bool,
}

impl Word {
    fn fresh(value: Value) -> Word {
        Word {
            value,
            origin: Origin::FRESH,
            tainted: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Op {
    Read,
    Write,
    Swap,
    Copy,
    Corrupt,
}

/// One algorithm memory access. `aux` is the second index of a swap or copy
/// and equals `index` otherwise.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Access {
    pub op: Op,
    pub index: usize,
    pub aux: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TraceEvent {
    pub step: u64,
    pub op: Op,
    pub index: usize,
    pub value: Value,
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub corruption: bool,
}

/// Labels algorithms attach to faulty-memory regions. The adversary may read
/// them: the algorithm's layout is public knowledge, only its coins and
/// reliable registers are hidden.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RegionKind {
    Replica,
    StackFrame,
    Scratch,
    /// A resilient verifier is scanning this range.
    Verifier,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Region {
    pub kind: RegionKind,
    pub range: Range<usize>,
}

/// Fault budget as seen by an algorithm.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Delta {
    Known(u64),
    Unknown,
}

impl Delta {
    pub fn require(self, who: &'static str) -> Result<u64> {
        match self {
            Delta::Known(d) => Ok(d),
            Delta::Unknown => Err(FramError::UnknownDelta(who)),
        }
    }
}

/// The FRAM machine: a word array that an adversary may rewrite between any
/// two algorithm accesses, plus the machine's small reliable store.
///
/// Every algorithm-visible access (`read`, `write`, `swap`, `copy`) costs one
/// step and is preceded by an adversary hook. Taint and origin metadata are
/// maintained for the oracles and are never visible to algorithms.
pub struct FaultyMemory {
    cells: Vec<Word>,
    input_len: usize,
    snapshot0: Vec<Value>,
    steps: u64,
    alpha: u64,
    budget: u64,
    adversary: Option<Box<dyn Strategy>>,
    next_fire: u64,
    last_access: Option<Access>,
    trace: Option<Vec<TraceEvent>>,
    regions: Vec<Region>,
    region_epoch: u64,
    peak_len: usize,
    reliable: ReliableStore,
}

impl FaultyMemory {
    /// Fault-free memory holding `values`. Panics on sentinel values; use
    /// [`FaultyMemory::try_new`] for untrusted input.
    pub fn new(values: &[Value]) -> FaultyMemory {
        Self::try_new(values).expect("input contains a reserved sentinel value")
    }

    pub fn try_new(values: &[Value]) -> Result<FaultyMemory> {
        if let Some(&v) = values.iter().find(|&&v| v == NEG_INF || v == POS_INF) {
            return Err(FramError::ReservedValue(v));
        }
        let cells = values
            .iter()
            .enumerate()
            .map(|(i, &value)| Word {
                value,
                origin: Origin::input(i),
                tainted: false,
            })
            .collect();
        Ok(FaultyMemory {
            cells,
            input_len: values.len(),
            snapshot0: values.to_vec(),
            steps: 0,
            alpha: 0,
            budget: 0,
            adversary: None,
            next_fire: u64::MAX,
            last_access: None,
            trace: None,
            regions: Vec::new(),
            region_epoch: 0,
            peak_len: values.len(),
            reliable: ReliableStore::default(),
        })
    }

    /// Installs an adversary with corruption budget `delta`.
    pub fn with_adversary(mut self, strategy: Box<dyn Strategy>, delta: u64) -> FaultyMemory {
        self.attach(strategy, delta);
        self
    }

    pub fn attach(&mut self, mut strategy: Box<dyn Strategy>, delta: u64) {
        self.budget = delta;
        let first = {
            let view = AdversaryView { mem: self };
            strategy.start(&view)
        };
        self.next_fire = if delta == 0 { u64::MAX } else { first };
        self.adversary = Some(strategy);
    }

    pub fn with_reliable(mut self, reliable: ReliableStore) -> FaultyMemory {
        self.reliable = reliable;
        self
    }

    pub fn enable_trace(&mut self) {
        self.trace.get_or_insert_with(Vec::new);
    }

    pub fn take_trace(&mut self) -> Vec<TraceEvent> {
        self.trace.take().unwrap_or_default()
    }

    #[inline(always)]
    fn tick(&mut self, op: Op, index: usize, aux: usize) {
        if self.steps >= self.next_fire {
            self.fire();
        }
        self.steps += 1;
        self.last_access = Some(Access { op, index, aux });
    }

    #[cold]
    fn fire(&mut self) {
        let Some(mut adv) = self.adversary.take() else {
            self.next_fire = u64::MAX;
            return;
        };
        let next = {
            let mut view = AdversaryView { mem: self };
            adv.fire(&mut view)
        };
        self.next_fire = if self.alpha >= self.budget {
            u64::MAX
        } else {
            next.max(self.steps + 1)
        };
        self.adversary = Some(adv);
    }

    #[inline]
    fn cell(&self, i: usize) -> &Word {
        match self.cells.get(i) {
            Some(w) => w,
            None => panic!(
                "simulation fault: access to cell {i} of {}",
                self.cells.len()
            ),
        }
    }

    #[inline]
    fn record(&mut self, op: Op, index: usize, value: Value) {
        if let Some(t) = self.trace.as_mut() {
            t.push(TraceEvent {
                step: self.steps,
                op,
                index,
                value,
                corruption: false,
            });
        }
    }

    #[inline]
    pub fn read(&mut self, i: usize) -> Value {
        self.tick(Op::Read, i, i);
        let v = self.cell(i).value;
        self.record(Op::Read, i, v);
        v
    }

    /// Stores a fresh value: clears taint and assigns a fresh origin.
    #[inline]
    pub fn write(&mut self, i: usize, v: Value) {
        self.tick(Op::Write, i, i);
        self.cell(i);
        self.cells[i] = Word::fresh(v);
        self.record(Op::Write, i, v);
    }

    /// Atomic exchange of two cells, carrying taint and origin along.
    #[inline]
    pub fn swap(&mut self, i: usize, j: usize) {
        self.tick(Op::Swap, i, j);
        self.cell(i);
        self.cell(j);
        self.cells.swap(i, j);
        if self.trace.is_some() {
            let v = self.cells[i].value;
            self.record(Op::Swap, i, v);
        }
    }

    /// Moves the word at `src` into `dst`, propagating taint and origin.
    #[inline]
    pub fn copy(&mut self, src: usize, dst: usize) {
        self.tick(Op::Copy, src, dst);
        let w = *self.cell(src);
        self.cell(dst);
        self.cells[dst] = w;
        self.record(Op::Copy, dst, w.value);
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn input_len(&self) -> usize {
        self.input_len
    }

    pub fn input_range(&self) -> Range<usize> {
        0..self.input_len
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Corruptions so far.
    pub fn alpha(&self) -> u64 {
        self.alpha
    }

    pub fn budget(&self) -> u64 {
        self.budget
    }

    pub fn last_access(&self) -> Option<Access> {
        self.last_access
    }

    /// Pristine copy of the input. Oracle use only.
    pub fn snapshot0(&self) -> &[Value] {
        &self.snapshot0
    }

    /// Current words including metadata. Oracle use only.
    pub fn words(&self) -> &[Word] {
        &self.cells
    }

    pub fn values_in(&self, range: Range<usize>) -> Vec<Value> {
        self.cells[range].iter().map(|w| w.value).collect()
    }

    /// Extends faulty memory by `len` zeroed cells and returns the start
    /// index. Allocation itself costs no steps.
    pub fn alloc(&mut self, len: usize) -> usize {
        let start = self.cells.len();
        self.cells.resize(start + len, Word::fresh(0));
        self.peak_len = self.peak_len.max(self.cells.len());
        start
    }

    /// Grows memory so that `end` is a valid exclusive bound.
    pub fn ensure_len(&mut self, end: usize) {
        if end > self.cells.len() {
            self.alloc(end - self.cells.len());
        }
    }

    /// Drops every cell from `start` on. The input range is never released.
    pub fn release(&mut self, start: usize) {
        assert!(start >= self.input_len, "cannot release input cells");
        if start < self.cells.len() {
            self.cells.truncate(start);
        }
        self.regions.retain(|r| r.range.end <= start);
    }

    /// Largest memory size reached, in cells.
    pub fn peak_len(&self) -> usize {
        self.peak_len
    }

    /// Faulty cells ever allocated beyond the input range.
    pub fn allocated_beyond_input(&self) -> usize {
        self.peak_len - self.input_len
    }

    pub fn push_region(&mut self, kind: RegionKind, range: Range<usize>) {
        self.regions.push(Region { kind, range });
        self.region_epoch += 1;
    }

    pub fn pop_region(&mut self) -> Option<Region> {
        self.regions.pop()
    }

    pub fn regions(&self) -> &[Region] {
        &self.regions
    }

    pub fn region_epoch(&self) -> u64 {
        self.region_epoch
    }

    pub fn reliable(&self) -> &ReliableStore {
        &self.reliable
    }

    pub fn reliable_mut(&mut self) -> &mut ReliableStore {
        &mut self.reliable
    }

    pub(super) fn corrupt_cell(&mut self, i: usize, v: Value) -> bool {
        if self.alpha >= self.budget || i >= self.cells.len() {
            return false;
        }
        self.cells[i] = Word {
            value: v,
            origin: Origin::ADVERSARIAL,
            tainted: true,
        };
        self.alpha += 1;
        if let Some(t) = self.trace.as_mut() {
            t.push(TraceEvent {
                step: self.steps,
                op: Op::Corrupt,
                index: i,
                value: v,
                corruption: true,
            });
        }
        true
    }
}

impl std::fmt::Debug for FaultyMemory {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FaultyMemory")
            .field("len", &self.cells.len())
            .field("input_len", &self.input_len)
            .field("steps", &self.steps)
            .field("alpha", &self.alpha)
            .field("budget", &self.budget)
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::adversary::{Scripted, ScriptedCorruption};

    #[test]
    fn read_without_faults() {
        let mut mem = FaultyMemory::new(&[5]);
        assert_eq!(mem.read(0), 5);
        assert_eq!(mem.steps(), 1);
        assert_eq!(mem.alpha(), 0);
    }

    #[test]
    fn scripted_corruption_before_first_step() {
        let script = Scripted::new(vec![ScriptedCorruption {
            step: 0,
            index: 0,
            value: 9,
        }]);
        let mut mem = FaultyMemory::new(&[5]).with_adversary(Box::new(script), 1);
        assert_eq!(mem.read(0), 9);
        assert_eq!(mem.alpha(), 1);
        assert!(mem.words()[0].tainted);
    }

    #[test]
    fn zero_budget_never_corrupts() {
        let script = Scripted::new(vec![ScriptedCorruption {
            step: 0,
            index: 0,
            value: 9,
        }]);
        let mut mem = FaultyMemory::new(&[5]).with_adversary(Box::new(script), 0);
        mem.write(0, 7);
        assert_eq!(mem.read(0), 7);
        assert_eq!(mem.alpha(), 0);
    }

    #[test]
    fn swap_exchanges_metadata() {
        let script = Scripted::new(vec![ScriptedCorruption {
            step: 0,
            index: 1,
            value: 4,
        }]);
        let mut mem = FaultyMemory::new(&[1, 2]).with_adversary(Box::new(script), 1);
        mem.swap(0, 1);
        let w = mem.words();
        assert_eq!(
            (w[0].value, w[0].tainted, w[0].origin),
            (4, true, Origin::ADVERSARIAL)
        );
        assert_eq!(
            (w[1].value, w[1].tainted, w[1].origin),
            (1, false, Origin::input(0))
        );
    }

    #[test]
    fn write_clears_taint() {
        let script = Scripted::new(vec![ScriptedCorruption {
            step: 0,
            index: 0,
            value: 4,
        }]);
        let mut mem = FaultyMemory::new(&[1]).with_adversary(Box::new(script), 1);
        mem.write(0, 3);
        assert!(!mem.words()[0].tainted);
        assert_eq!(mem.words()[0].origin, Origin::FRESH);
    }

    #[test]
    fn copy_propagates_origin() {
        let mut mem = FaultyMemory::new(&[8, 0]);
        mem.copy(0, 1);
        assert_eq!(mem.words()[1].origin, Origin::input(0));
        assert_eq!(mem.read(1), 8);
    }

    #[test]
    #[should_panic(expected = "simulation fault")]
    fn out_of_bounds_is_a_simulation_fault() {
        let mut mem = FaultyMemory::new(&[1]);
        mem.read(1);
    }

    #[test]
    fn sentinels_rejected() {
        assert!(FaultyMemory::try_new(&[1, POS_INF]).is_err());
        assert!(FaultyMemory::try_new(&[NEG_INF]).is_err());
    }

    #[test]
    fn trace_records_corruptions() {
        let script = Scripted::new(vec![ScriptedCorruption {
            step: 1,
            index: 0,
            value: 9,
        }]);
        let mut mem = FaultyMemory::new(&[5, 6]).with_adversary(Box::new(script), 1);
        mem.enable_trace();
        mem.read(1);
        mem.read(0);
        let t = mem.take_trace();
        assert_eq!(t.len(), 3);
        assert!(t[1].corruption);
        let line = serde_json::to_string(&t[1]).unwrap();
        assert_eq!(
            line,
            r#"{"step":1,"op":"corrupt","index":0,"value":9,"corruption":true}"#
        );
        let line = serde_json::to_string(&t[0]).unwrap();
        assert_eq!(line, r#"{"step":1,"op":"read","index":1,"value":6}"#);
    }

    #[test]
    fn alloc_tracks_peak_and_release() {
        let mut mem = FaultyMemory::new(&[1, 2]);
        let s = mem.alloc(3);
        assert_eq!(s, 2);
        mem.release(2);
        assert_eq!(mem.len(), 2);
        assert_eq!(mem.allocated_beyond_input(), 3);
    }
}
