use crate::compactor::{Compactor, LevelState, Promotion};
use crate::error::Result;
use crate::item::Item;
use crate::rng::SketchRng;
use crate::variant::VariantFlags;

use super::LevelStore;

/// One growable buffer per level.
#[derive(Debug, Clone, Default)]
pub struct ListStore<T> {
    levels: Vec<Compactor<T>>,
}

impl<T: Item> ListStore<T> {
    pub fn new() -> Self {
        Self { levels: Vec::new() }
    }

    pub fn compactors(&self) -> &[Compactor<T>] {
        &self.levels
    }
}

impl<T: Item> LevelStore<T> for ListStore<T> {
    fn num_levels(&self) -> usize {
        self.levels.len()
    }

    fn level_len(&self, i: usize) -> usize {
        self.levels[i].len()
    }

    fn level(&self, i: usize) -> &[T] {
        self.levels[i].items()
    }

    fn state(&self, i: usize) -> &LevelState<T> {
        &self.levels[i].state
    }

    fn state_mut(&mut self, i: usize) -> &mut LevelState<T> {
        &mut self.levels[i].state
    }

    #[inline]
    fn push_bottom(&mut self, item: T) {
        self.levels[0].push(item);
    }

    fn merge_into(&mut self, i: usize, run: Vec<T>) {
        match run.len() {
            0 => self.levels[i].ensure_sorted(),
            1 => self.levels[i].insert_sorted(run.into_iter().next().unwrap()),
            _ => self.levels[i].merge_run(run),
        }
    }

    fn sort_level(&mut self, i: usize) {
        self.levels[i].ensure_sorted();
    }

    fn compact_level(
        &mut self,
        i: usize,
        flags: VariantFlags,
        rng: &mut SketchRng,
    ) -> Result<usize> {
        assert!(i + 1 < self.levels.len(), "compacting the top level needs a level above");
        match self.levels[i].compact(flags, rng)? {
            Promotion::Run(run) => {
                let removed = run.len();
                self.levels[i + 1].merge_run(run);
                Ok(removed)
            }
            Promotion::Single(x) => {
                self.levels[i + 1].insert_sorted(x);
                Ok(1)
            }
        }
    }

    fn push_level(&mut self) {
        // Heights are tracked by the sketch; the compactor's own label is the index.
        let idx = self.levels.len() as u32;
        self.levels.push(Compactor::new(idx));
    }

    fn pop_bottom(&mut self) -> (Vec<T>, LevelState<T>) {
        let mut bottom = self.levels.remove(0);
        for (i, c) in self.levels.iter_mut().enumerate() {
            c.level = i as u32;
        }
        let items = bottom.drain_sorted();
        (items, bottom.state)
    }
}
