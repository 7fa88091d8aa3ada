//! A single level of the compactor hierarchy.
//!
//! A compactor buffers items of equal weight `2^h` and, when asked, halves them:
//! after sorting, neighbouring pairs are formed and one item of each pair is
//! promoted with doubled weight. Four strategies decide how:
//!
//! * the parity coin picks which item of every pair survives;
//! * anti-correlated coins pair consecutive decisions as `(d, !d)`;
//! * error spreading compacts a random prefix or suffix of an odd buffer;
//! * sweeping compacts one pair at a time, walking a threshold upward.
//!
//! The decision helpers here are shared by the list and packed backends so that
//! both consume the random stream in exactly the same order.

use std::ops::Range;

use crate::error::{Result, SketchError};
use crate::item::{is_sorted, lower_bound, sort_items, Item};
use crate::rng::SketchRng;
use crate::variant::VariantFlags;

/// Which sorted positions of a compacted range survive.
///
/// Positions are counted from one inside the range, so `KeepOdd` keeps the
/// smaller item of every pair and `KeepEven` the larger one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KeepParity {
    KeepEven,
    KeepOdd,
}

impl KeepParity {
    pub fn opposite(self) -> Self {
        match self {
            KeepParity::KeepEven => KeepParity::KeepOdd,
            KeepParity::KeepOdd => KeepParity::KeepEven,
        }
    }

    /// Zero-based offset of the survivor inside each pair.
    #[inline]
    pub fn offset(self) -> usize {
        match self {
            KeepParity::KeepOdd => 0,
            KeepParity::KeepEven => 1,
        }
    }

    /// A heads coin keeps odd positions.
    pub fn from_coin(heads: bool) -> Self {
        if heads {
            KeepParity::KeepOdd
        } else {
            KeepParity::KeepEven
        }
    }

    pub fn draw(rng: &mut SketchRng) -> Self {
        Self::from_coin(rng.coin())
    }

    pub(crate) fn to_bit(self) -> u8 {
        self.offset() as u8
    }

    pub(crate) fn from_bit(bit: u8) -> Result<Self> {
        match bit {
            0 => Ok(KeepParity::KeepOdd),
            1 => Ok(KeepParity::KeepEven),
            other => Err(SketchError::Corrupt(format!("parity byte {other}"))),
        }
    }
}

/// Memory of the forced opposite decision for anti-correlated coins.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DirectionState {
    pub pending: Option<KeepParity>,
}

impl DirectionState {
    /// Returns the pending forced decision if there is one; otherwise flips a
    /// fresh coin and remembers its opposite for the next call.
    pub fn decide_parity(&mut self, rng: &mut SweepCoin<'_>) -> KeepParity {
        if let Some(forced) = self.pending.take() {
            return forced;
        }
        let drawn = rng.parity();
        self.pending = Some(drawn.opposite());
        drawn
    }

    /// Parity for the next compaction under the given flags.
    pub fn next_parity(&mut self, anti_correlated: bool, rng: &mut SketchRng) -> KeepParity {
        if anti_correlated {
            self.decide_parity(&mut SweepCoin::Rng(rng))
        } else {
            KeepParity::draw(rng)
        }
    }
}

/// Source of parity coins; tests substitute a scripted sequence.
pub enum SweepCoin<'a> {
    Rng(&'a mut SketchRng),
    Scripted(&'a mut dyn Iterator<Item = KeepParity>),
}

impl SweepCoin<'_> {
    fn parity(&mut self) -> KeepParity {
        match self {
            SweepCoin::Rng(rng) => KeepParity::draw(rng),
            SweepCoin::Scripted(it) => it.next().expect("scripted coins exhausted"),
        }
    }
}

/// Lower edge of the current sweep. Items strictly above it are still eligible.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum Threshold<T> {
    /// No sweep in progress.
    #[default]
    Unset,
    /// Sweep started below every item.
    BelowAll,
    /// Everything at or below this item has been swept past.
    At(T),
}

impl<T: Item> Threshold<T> {
    /// Index of the first entry whose key lies strictly above the threshold.
    fn first_above<E>(&self, sorted: &[E], key: impl Fn(&E) -> &T) -> usize {
        match self {
            Threshold::Unset | Threshold::BelowAll => 0,
            Threshold::At(t) => sorted.partition_point(|x| !t.less(key(x))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepState<T> {
    pub threshold: Threshold<T>,
    /// Fixed for the duration of one sweep.
    pub parity: KeepParity,
    /// Number of sweeps started at this level.
    pub sweeps: u64,
}

impl<T> Default for SweepState<T> {
    fn default() -> Self {
        Self {
            threshold: Threshold::Unset,
            parity: KeepParity::KeepOdd,
            sweeps: 0,
        }
    }
}

/// Per-level decision state shared by every backend.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelState<T> {
    pub direction: DirectionState,
    pub sweep: SweepState<T>,
}

impl<T> Default for LevelState<T> {
    fn default() -> Self {
        Self {
            direction: DirectionState::default(),
            sweep: SweepState::default(),
        }
    }
}

/// Chooses the index range compacted by a full compaction.
///
/// Even buffers, or any buffer without spreading, compact their largest
/// even-length prefix. Odd buffers with spreading compact `[0, len-1)` or
/// `[1, len)` with equal probability (heads = suffix).
pub fn select_range(len: usize, spreading: bool, rng: &mut SketchRng) -> Result<Range<usize>> {
    if len < 2 {
        return Err(SketchError::NothingToCompact);
    }
    if !spreading || len.is_multiple_of(2) {
        return Ok(0..len & !1);
    }
    Ok(if rng.coin() { 1..len } else { 0..len - 1 })
}

/// Parity then range, in that draw order.
pub(crate) fn plan_full_compaction<T>(
    state: &mut LevelState<T>,
    len: usize,
    flags: VariantFlags,
    rng: &mut SketchRng,
) -> Result<(KeepParity, Range<usize>)> {
    if len < 2 {
        return Err(SketchError::NothingToCompact);
    }
    let parity = state.direction.next_parity(flags.anti_correlated, rng);
    let range = select_range(len, flags.spreading, rng)?;
    Ok((parity, range))
}

fn start_sweep<T: Item>(
    smallest: &T,
    state: &mut LevelState<T>,
    flags: VariantFlags,
    rng: &mut SketchRng,
) {
    let skip_smallest = flags.spreading && rng.coin();
    state.sweep.threshold = if skip_smallest {
        Threshold::At(smallest.clone())
    } else {
        Threshold::BelowAll
    };
    state.sweep.parity = state.direction.next_parity(flags.anti_correlated, rng);
    state.sweep.sweeps += 1;
}

/// Locates the next pair of a sweep over a sorted buffer and advances the
/// threshold past it. Returns the index of the pair's smaller item and the
/// sweep's parity.
///
/// Starting a sweep draws the spreading coin (when enabled) and then the
/// parity. An exhausted sweep restarts once; if even a fresh sweep finds no
/// partner above its threshold the bottom pair is used.
pub(crate) fn locate_sweep_pair<T: Item>(
    sorted: &[T],
    state: &mut LevelState<T>,
    flags: VariantFlags,
    rng: &mut SketchRng,
) -> Result<(usize, KeepParity)> {
    locate_sweep_pair_by(sorted, |x| x, state, flags, rng)
}

/// [`locate_sweep_pair`] over entries ordered by `key`.
pub(crate) fn locate_sweep_pair_by<T: Item, E>(
    sorted: &[E],
    key: impl Fn(&E) -> &T + Copy,
    state: &mut LevelState<T>,
    flags: VariantFlags,
    rng: &mut SketchRng,
) -> Result<(usize, KeepParity)> {
    let len = sorted.len();
    if len < 2 {
        return Err(SketchError::NothingToCompact);
    }
    let mut fresh = false;
    if matches!(state.sweep.threshold, Threshold::Unset) {
        start_sweep(key(&sorted[0]), state, flags, rng);
        fresh = true;
    }
    let mut i = state.sweep.threshold.first_above(sorted, key);
    if i + 1 >= len {
        if !fresh {
            start_sweep(key(&sorted[0]), state, flags, rng);
            i = state.sweep.threshold.first_above(sorted, key);
        }
        if i + 1 >= len {
            i = 0;
        }
    }
    state.sweep.threshold = Threshold::At(key(&sorted[i + 1]).clone());
    Ok((i, state.sweep.parity))
}

/// What a compaction sends to the level above.
#[derive(Debug, Clone, PartialEq)]
pub enum Promotion<T> {
    /// Survivors of a full compaction, already sorted.
    Run(Vec<T>),
    /// The kept item of one swept pair.
    Single(T),
}

impl<T> Promotion<T> {
    pub fn len(&self) -> usize {
        match self {
            Promotion::Run(v) => v.len(),
            Promotion::Single(_) => 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn into_vec(self) -> Vec<T> {
        match self {
            Promotion::Run(v) => v,
            Promotion::Single(x) => vec![x],
        }
    }
}

/// One list-backed level: a buffer of items of weight `2^level`.
#[derive(Debug, Clone, PartialEq)]
pub struct Compactor<T> {
    pub level: u32,
    buffer: Vec<T>,
    /// Length of the sorted prefix of `buffer`.
    sorted_len: usize,
    pub state: LevelState<T>,
}

impl<T: Item> Compactor<T> {
    pub fn new(level: u32) -> Self {
        Self {
            level,
            buffer: Vec::new(),
            sorted_len: 0,
            state: LevelState::default(),
        }
    }

    pub fn from_sorted(level: u32, items: Vec<T>) -> Self {
        debug_assert!(is_sorted(&items));
        let sorted_len = items.len();
        Self {
            level,
            buffer: items,
            sorted_len,
            state: LevelState::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.buffer.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buffer.is_empty()
    }

    pub fn items(&self) -> &[T] {
        &self.buffer
    }

    pub fn is_sorted(&self) -> bool {
        self.sorted_len == self.buffer.len()
    }

    /// Appends without keeping order (level 0 style).
    pub fn push(&mut self, item: T) {
        self.buffer.push(item);
    }

    /// Inserts at the sorted position; the buffer must already be sorted.
    pub fn insert_sorted(&mut self, item: T) {
        self.ensure_sorted();
        let at = lower_bound(&self.buffer, &item);
        self.buffer.insert(at, item);
        self.sorted_len += 1;
    }

    /// Merges a sorted run into a sorted buffer.
    pub fn merge_run(&mut self, run: Vec<T>) {
        self.ensure_sorted();
        let current = std::mem::take(&mut self.buffer);
        self.buffer = crate::item::merge_sorted(current, run);
        self.sorted_len = self.buffer.len();
    }

    pub fn ensure_sorted(&mut self) {
        let len = self.buffer.len();
        if self.sorted_len == len {
            return;
        }
        let tail = len - self.sorted_len;
        if tail <= 4 && self.sorted_len > 0 {
            for i in self.sorted_len..len {
                let at = lower_bound(&self.buffer[..i], &self.buffer[i]);
                self.buffer[at..=i].rotate_right(1);
            }
        } else {
            sort_items(&mut self.buffer);
        }
        self.sorted_len = len;
    }

    /// Removes the buffer, sorted.
    pub fn drain_sorted(&mut self) -> Vec<T> {
        self.ensure_sorted();
        self.sorted_len = 0;
        std::mem::take(&mut self.buffer)
    }

    /// Promotes every other item of `range` (after sorting) and removes the
    /// whole range from the buffer. Items outside the range stay.
    pub fn compact_full(&mut self, parity: KeepParity, range: Range<usize>) -> Result<Vec<T>> {
        if self.buffer.len() < 2 {
            return Err(SketchError::NothingToCompact);
        }
        if range.is_empty() || range.end > self.buffer.len() || !range.len().is_multiple_of(2) {
            return Err(SketchError::InvalidParameter(format!(
                "cannot compact range {range:?} of a {}-item buffer",
                self.buffer.len()
            )));
        }
        self.ensure_sorted();
        let offset = parity.offset();
        let promoted: Vec<T> = self
            .buffer
            .drain(range)
            .enumerate()
            .filter_map(|(i, x)| (i % 2 == offset).then_some(x))
            .collect();
        self.sorted_len = self.buffer.len();
        Ok(promoted)
    }

    /// Compacts one pair of the current sweep and returns the kept item.
    pub fn sweep_compact_pair(&mut self, flags: VariantFlags, rng: &mut SketchRng) -> Result<T> {
        if self.buffer.len() < 2 {
            return Err(SketchError::NothingToCompact);
        }
        self.ensure_sorted();
        let (i, parity) = locate_sweep_pair(&self.buffer, &mut self.state, flags, rng)?;
        let larger = self.buffer.remove(i + 1);
        let smaller = self.buffer.remove(i);
        self.sorted_len = self.buffer.len();
        Ok(match parity {
            KeepParity::KeepOdd => smaller,
            KeepParity::KeepEven => larger,
        })
    }

    /// One compaction under `flags`: a swept pair or a full halving.
    pub fn compact(&mut self, flags: VariantFlags, rng: &mut SketchRng) -> Result<Promotion<T>> {
        if flags.sweep {
            return self.sweep_compact_pair(flags, rng).map(Promotion::Single);
        }
        let (parity, range) = plan_full_compaction(&mut self.state, self.buffer.len(), flags, rng)?;
        self.compact_full(parity, range).map(Promotion::Run)
    }
}
