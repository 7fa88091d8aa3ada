//! All levels in one contiguous, gapless array.
//!
//! ```text
//!   [ free ... | level 0 | level 1 | ... | top ]
//!              ^bounds[0] ^bounds[1]            ^bounds[L] = slots.len()
//! ```
//!
//! Level 0 grows leftward into the free region, with its unsorted arrivals at
//! its left edge. A compaction halves a level, merges the survivors into the
//! level above, and shifts the lower levels right to close the
//! gap, so free space only ever exists at the far left.

use std::mem;
use std::time::{Duration, Instant};

use crate::compactor::{locate_sweep_pair, plan_full_compaction, LevelState};
use crate::error::{Result, SketchError};
use crate::item::{is_sorted, lower_bound, sort_items, Item};
use crate::rng::SketchRng;
use crate::variant::VariantFlags;

use super::LevelStore;

/// Below this many unsorted arrivals level 0 is fixed by binary insertion.
const INSERTION_LIMIT: usize = 8;

#[derive(Debug, Clone)]
pub struct PackedStore<T> {
    slots: Vec<T>,
    /// `bounds[i]` is where level `i` starts; the last entry is `slots.len()`.
    bounds: Vec<usize>,
    /// Arrivals at the left edge of level 0 not yet sorted in.
    unsorted: usize,
    states: Vec<LevelState<T>>,
    /// Time spent sorting level 0.
    sort_time: Duration,
}

impl<T: Item> PackedStore<T> {
    pub fn with_capacity(capacity: usize) -> Self {
        let capacity = capacity.max(1);
        Self {
            slots: vec![T::default(); capacity],
            bounds: vec![capacity],
            unsorted: 0,
            states: Vec::new(),
            sort_time: Duration::ZERO,
        }
    }

    pub fn capacity(&self) -> usize {
        self.slots.len()
    }

    pub fn free(&self) -> usize {
        self.bounds[0]
    }

    /// Cumulative time spent sorting level-0 arrivals.
    pub fn sort_time(&self) -> Duration {
        self.sort_time
    }

    /// Places an arrival at the left edge of level 0 (creating level 0 if the
    /// store has none). Returns true once the free region is exhausted.
    pub fn insert(&mut self, item: T) -> bool {
        if self.states.is_empty() {
            self.push_level();
        }
        self.push_bottom(item);
        self.free() == 0
    }

    /// Compacts the lowest level that has reached its capacity.
    pub fn compact_lowest(
        &mut self,
        capacities: &[usize],
        flags: VariantFlags,
        rng: &mut SketchRng,
    ) -> Result<usize> {
        let i = (0..self.num_levels().saturating_sub(1))
            .find(|&i| self.level_len(i) >= capacities[i].max(2))
            .ok_or(SketchError::NothingToCompact)?;
        self.compact_level(i, flags, rng)
    }

    /// Read-only per-level slices, bottom first.
    pub fn levels_view(&self) -> Vec<&[T]> {
        (0..self.num_levels()).map(|i| self.level(i)).collect()
    }

    /// Checks packedness and per-level order.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        if self.bounds.last() != Some(&self.slots.len()) {
            return Err("last bound is not the array end".into());
        }
        if self.bounds.windows(2).any(|w| w[0] > w[1]) {
            return Err(format!("bounds not monotone: {:?}", self.bounds));
        }
        if self.bounds.len() != self.states.len() + 1 {
            return Err("bounds and level states disagree".into());
        }
        for i in 0..self.num_levels() {
            let level = self.level(i);
            let skip = if i == 0 { self.unsorted.min(level.len()) } else { 0 };
            if !is_sorted(&level[skip..]) {
                return Err(format!("level {i} is not sorted"));
            }
        }
        Ok(())
    }

    /// Makes room for `m` more items, re-packing into a larger array if needed.
    fn reserve(&mut self, m: usize) {
        if self.bounds[0] >= m {
            return;
        }
        let old_len = self.slots.len();
        let used = old_len - self.bounds[0];
        let new_len = (old_len * 2).max(used + m);
        let delta = new_len - old_len;
        let mut slots = vec![T::default(); new_len];
        for (dst, src) in slots[self.bounds[0] + delta..]
            .iter_mut()
            .zip(&mut self.slots[self.bounds[0]..])
        {
            *dst = mem::take(src);
        }
        self.slots = slots;
        for b in &mut self.bounds {
            *b += delta;
        }
    }

    fn sort_bottom(&mut self) {
        if self.unsorted == 0 || self.states.is_empty() {
            return;
        }
        let started = Instant::now();
        let region = &mut self.slots[self.bounds[0]..self.bounds[1]];
        if self.unsorted <= INSERTION_LIMIT {
            for j in (0..self.unsorted).rev() {
                let pos = lower_bound(&region[j + 1..], &region[j]);
                region[j..=j + pos].rotate_left(1);
            }
        } else {
            sort_items(region);
        }
        self.unsorted = 0;
        self.sort_time += started.elapsed();
    }
}

impl<T: Item> LevelStore<T> for PackedStore<T> {
    fn num_levels(&self) -> usize {
        self.states.len()
    }

    fn level_len(&self, i: usize) -> usize {
        self.bounds[i + 1] - self.bounds[i]
    }

    fn level(&self, i: usize) -> &[T] {
        &self.slots[self.bounds[i]..self.bounds[i + 1]]
    }

    fn state(&self, i: usize) -> &LevelState<T> {
        &self.states[i]
    }

    fn state_mut(&mut self, i: usize) -> &mut LevelState<T> {
        &mut self.states[i]
    }

    #[inline]
    fn push_bottom(&mut self, item: T) {
        self.reserve(1);
        self.bounds[0] -= 1;
        self.slots[self.bounds[0]] = item;
        self.unsorted += 1;
    }

    fn merge_into(&mut self, i: usize, run: Vec<T>) {
        self.sort_level(i);
        let m = run.len();
        if m == 0 {
            return;
        }
        self.reserve(m);
        let b0 = self.bounds[0];
        let start = self.bounds[i];
        let end = self.bounds[i + 1];
        // Move the m free slots just below level i.
        self.slots[b0 - m..start].rotate_left(m);
        for b in &mut self.bounds[..=i] {
            *b -= m;
        }
        let mut w = start - m;
        let mut p = start;
        let mut run = run.into_iter().peekable();
        while let Some(next) = run.peek() {
            if p < end && !next.less(&self.slots[p]) {
                self.slots[w] = mem::take(&mut self.slots[p]);
                p += 1;
            } else {
                self.slots[w] = run.next().unwrap();
            }
            w += 1;
        }
        debug_assert_eq!(w, p);
    }

    fn sort_level(&mut self, i: usize) {
        if i == 0 {
            self.sort_bottom();
        }
    }

    fn compact_level(
        &mut self,
        i: usize,
        flags: VariantFlags,
        rng: &mut SketchRng,
    ) -> Result<usize> {
        assert!(i + 1 < self.num_levels(), "compacting the top level needs a level above");
        self.sort_level(i);
        let b0 = self.bounds[0];
        let s = self.bounds[i];
        let e = self.bounds[i + 1];
        let u = self.bounds[i + 2];

        if flags.sweep {
            let (j, parity) = locate_sweep_pair(&self.slots[s..e], &mut self.states[i], flags, rng)?;
            let kept = mem::take(&mut self.slots[s + j + parity.offset()]);
            // Pair slots to the front of level i, then free level i's last slot.
            self.slots[s..s + j + 2].rotate_right(2);
            self.slots[s + 1..e].rotate_left(1);
            self.slots[e - 1] = kept;
            let pos = lower_bound(&self.slots[e..u], &self.slots[e - 1]);
            self.slots[e - 1..e + pos].rotate_left(1);
            // The remaining hole at `s` moves to the free region.
            self.slots[b0..=s].rotate_right(1);
            for b in &mut self.bounds[..=i] {
                *b += 1;
            }
            self.bounds[i + 1] -= 1;
            return Ok(1);
        }

        let (parity, range) = plan_full_compaction(&mut self.states[i], e - s, flags, rng)?;
        let m = range.len() / 2;
        let survivors: Vec<T> = (0..m)
            .map(|t| mem::take(&mut self.slots[s + range.start + 2 * t + parity.offset()]))
            .collect();
        let leftovers: Vec<T> = (s..s + range.start)
            .chain(s + range.end..e)
            .map(|x| mem::take(&mut self.slots[x]))
            .collect();

        // Level i+1 grows leftward by m into slots level i no longer needs.
        let mut w = e - m;
        let mut p = e;
        for x in survivors {
            while p < u && !x.less(&self.slots[p]) {
                self.slots[w] = mem::take(&mut self.slots[p]);
                p += 1;
                w += 1;
            }
            self.slots[w] = x;
            w += 1;
        }
        let new_start = e - m - leftovers.len();
        debug_assert_eq!(new_start, s + m);
        for (t, x) in leftovers.into_iter().enumerate() {
            self.slots[new_start + t] = x;
        }
        // Close the m-slot hole left at [s, s + m).
        self.slots[b0..s + m].rotate_right(m);
        for b in &mut self.bounds[..=i] {
            *b += m;
        }
        self.bounds[i + 1] = e - m;
        Ok(m)
    }

    fn push_level(&mut self) {
        self.states.push(LevelState::default());
        self.bounds.push(self.slots.len());
    }

    fn pop_bottom(&mut self) -> (Vec<T>, LevelState<T>) {
        self.sort_bottom();
        let (b0, b1) = (self.bounds[0], self.bounds[1]);
        let items = self.slots[b0..b1].iter_mut().map(mem::take).collect();
        self.bounds.remove(0);
        let state = self.states.remove(0);
        (items, state)
    }
}
