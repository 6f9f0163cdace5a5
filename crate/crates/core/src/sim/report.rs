use serde::Serialize;

use super::memory::{FaultyMemory, Value};

/// Per-phase repetition counts. Fields an algorithm does not use stay 0.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Repetitions {
    /// Loop iterations (randomized select) or nodes visited (deterministic).
    pub iterations: u64,
    pub first_phase: u64,
    pub second_phase: u64,
    /// Sandbox rounds.
    pub rounds: u64,
    /// Whether the corruption counter forced an early halt.
    pub halted: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ExecReport {
    pub steps: u64,
    pub alpha: u64,
    pub output: Option<Value>,
    pub repetitions: Repetitions,
    /// Faulty cells allocated beyond the input during the run.
    pub extra_cells: usize,
    pub peak_reliable_bits: usize,
    verified: Option<bool>,
}

impl ExecReport {
    pub fn capture(
        mem: &FaultyMemory,
        output: Option<Value>,
        repetitions: Repetitions,
    ) -> ExecReport {
        ExecReport {
            steps: mem.steps(),
            alpha: mem.alpha(),
            output,
            repetitions,
            extra_cells: mem.allocated_beyond_input(),
            peak_reliable_bits: mem.reliable().peak_bits(),
            verified: None,
        }
    }

    /// Outcome of the oracle check, if one ran.
    pub fn verified(&self) -> Option<bool> {
        self.verified
    }

    /// Records an oracle verdict.
    pub fn set_verdict(&mut self, ok: bool) {
        self.verified = Some(ok);
    }
}
