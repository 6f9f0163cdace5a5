//! The faulty-RAM machine and its instrumentation.

pub mod adversary;
pub mod memory;
pub mod oracle;
pub mod reliable;
pub mod report;

pub use adversary::{
    AdversarySpec, AdversaryView, AttackTarget, Scripted, ScriptedCorruption, Strategy,
};
pub use memory::{
    Access, Delta, FaultyMemory, Op, Origin, Region, RegionKind, TraceEvent, Value, Word, NEG_INF,
    POS_INF,
};
pub use reliable::ReliableStore;
pub use report::{ExecReport, Repetitions};
