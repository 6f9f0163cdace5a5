//! The reliable store: a handful of words and a bit stack that the adversary
//! can never touch. Occupancy is audited against a fixed bit capacity.

use serde::Serialize;

use crate::error::{FramError, Result};

pub const WORD_BITS: usize = 64;

/// Default capacity in words.
pub const DEFAULT_CAPACITY_WORDS: usize = 128;

#[derive(Clone, Debug, Serialize)]
pub struct ReliableStore {
    bit_capacity: usize,
    reserved_words: usize,
    #[serde(skip)]
    stack: Vec<u64>,
    stack_bits: usize,
    peak_bits: usize,
}

impl Default for ReliableStore {
    fn default() -> Self {
        Self::with_capacity_words(DEFAULT_CAPACITY_WORDS)
    }
}

impl ReliableStore {
    pub fn with_capacity_words(words: usize) -> ReliableStore {
        ReliableStore {
            bit_capacity: words * WORD_BITS,
            reserved_words: 0,
            stack: Vec::new(),
            stack_bits: 0,
            peak_bits: 0,
        }
    }

    pub fn bit_capacity(&self) -> usize {
        self.bit_capacity
    }

    pub fn occupancy_bits(&self) -> usize {
        self.reserved_words * WORD_BITS + self.stack_bits
    }

    /// Highest occupancy seen since construction.
    pub fn peak_bits(&self) -> usize {
        self.peak_bits
    }

    pub fn stack_bits(&self) -> usize {
        self.stack_bits
    }

    fn grow(&mut self, bits: usize) -> Result<()> {
        let needed = self.occupancy_bits() + bits;
        if needed > self.bit_capacity {
            return Err(FramError::ReliableCapacity {
                needed,
                capacity: self.bit_capacity,
            });
        }
        Ok(())
    }

    fn touch_peak(&mut self) {
        self.peak_bits = self.peak_bits.max(self.occupancy_bits());
    }

    /// Claims `n` registers. Pair with [`ReliableStore::release_words`].
    pub fn reserve_words(&mut self, n: usize) -> Result<()> {
        self.grow(n * WORD_BITS)?;
        self.reserved_words += n;
        self.touch_peak();
        Ok(())
    }

    pub fn release_words(&mut self, n: usize) {
        assert!(
            n <= self.reserved_words,
            "releasing more reliable words than reserved"
        );
        self.reserved_words -= n;
    }

    /// Pushes the low `width` bits of `value`.
    pub fn push_bits(&mut self, value: u64, width: usize) -> Result<()> {
        assert!(
            width <= 64 && (width == 64 || value >> width == 0),
            "value does not fit in {width} bits"
        );
        self.grow(width)?;
        for b in 0..width {
            let pos = self.stack_bits + b;
            if pos / 64 == self.stack.len() {
                self.stack.push(0);
            }
            let bit = (value >> b) & 1;
            let word = &mut self.stack[pos / 64];
            *word = (*word & !(1 << (pos % 64))) | (bit << (pos % 64));
        }
        self.stack_bits += width;
        self.touch_peak();
        Ok(())
    }

    /// Pops the `width` bits pushed last.
    pub fn pop_bits(&mut self, width: usize) -> u64 {
        assert!(width <= self.stack_bits, "reliable stack underflow");
        self.stack_bits -= width;
        let mut value = 0;
        for b in 0..width {
            let pos = self.stack_bits + b;
            value |= ((self.stack[pos / 64] >> (pos % 64)) & 1) << b;
        }
        self.stack.truncate(self.stack_bits.div_ceil(64));
        value
    }

    /// Reads the `width` bits pushed last without removing them.
    pub fn peek_bits(&self, width: usize) -> u64 {
        assert!(width <= self.stack_bits, "reliable stack underflow");
        self.bits_at(self.stack_bits - width, width)
    }

    /// Reads `width` bits starting at bit `pos` from the bottom of the stack.
    pub fn bits_at(&self, pos: usize, width: usize) -> u64 {
        assert!(
            pos + width <= self.stack_bits,
            "read past the top of the reliable stack"
        );
        let mut value = 0;
        for b in 0..width {
            let p = pos + b;
            value |= ((self.stack[p / 64] >> (p % 64)) & 1) << b;
        }
        value
    }
}
