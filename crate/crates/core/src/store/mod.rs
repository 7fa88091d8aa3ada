//! Storage backends for the compactor hierarchy.
//!
//! Both backends expose the same level operations and run compactions through
//! the shared decision helpers in [`crate::compactor`], so for the same random
//! stream they end up with the same level contents.

mod list;
mod packed;

pub use list::ListStore;
pub use packed::PackedStore;

use std::fmt;
use std::str::FromStr;

use crate::compactor::LevelState;
use crate::error::{Result, SketchError};
use crate::item::Item;
use crate::rng::SketchRng;
use crate::variant::VariantFlags;

/// Level-indexed storage; index 0 is the lowest retained level.
pub trait LevelStore<T: Item> {
    fn num_levels(&self) -> usize;
    fn level_len(&self, i: usize) -> usize;
    /// Items of level `i`. Level 0 may be unsorted; higher levels are sorted.
    fn level(&self, i: usize) -> &[T];
    fn state(&self, i: usize) -> &LevelState<T>;
    fn state_mut(&mut self, i: usize) -> &mut LevelState<T>;
    /// Appends an arrival to level 0.
    fn push_bottom(&mut self, item: T);
    /// Merges a sorted run into level `i`, leaving the level sorted.
    fn merge_into(&mut self, i: usize, run: Vec<T>);
    fn sort_level(&mut self, i: usize);
    /// Compacts level `i` into level `i + 1` and returns how many stored items
    /// disappeared.
    fn compact_level(&mut self, i: usize, flags: VariantFlags, rng: &mut SketchRng)
        -> Result<usize>;
    /// Adds an empty level on top.
    fn push_level(&mut self);
    /// Removes level 0 and returns its items sorted, with its state.
    fn pop_bottom(&mut self) -> (Vec<T>, LevelState<T>);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Backend {
    List,
    #[default]
    Packed,
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Backend::List => "list",
            Backend::Packed => "packed",
        })
    }
}

impl FromStr for Backend {
    type Err = SketchError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "list" => Ok(Backend::List),
            "packed" => Ok(Backend::Packed),
            other => Err(SketchError::InvalidParameter(format!(
                "unknown backend {other:?} (expected list or packed)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Store<T> {
    List(ListStore<T>),
    Packed(PackedStore<T>),
}

impl<T: Item> Store<T> {
    pub fn new(backend: Backend, capacity_hint: usize) -> Self {
        match backend {
            Backend::List => Store::List(ListStore::new()),
            Backend::Packed => Store::Packed(PackedStore::with_capacity(capacity_hint)),
        }
    }

    pub fn backend(&self) -> Backend {
        match self {
            Store::List(_) => Backend::List,
            Store::Packed(_) => Backend::Packed,
        }
    }

    /// Per-level item slices, bottom first.
    pub fn levels_view(&self) -> Vec<&[T]> {
        (0..self.num_levels()).map(|i| self.level(i)).collect()
    }
}

macro_rules! dispatch {
    ($self:ident, $s:ident => $e:expr) => {
        match $self {
            Store::List($s) => $e,
            Store::Packed($s) => $e,
        }
    };
}

impl<T: Item> LevelStore<T> for Store<T> {
    fn num_levels(&self) -> usize {
        dispatch!(self, s => s.num_levels())
    }
    fn level_len(&self, i: usize) -> usize {
        dispatch!(self, s => s.level_len(i))
    }
    fn level(&self, i: usize) -> &[T] {
        dispatch!(self, s => s.level(i))
    }
    fn state(&self, i: usize) -> &LevelState<T> {
        dispatch!(self, s => s.state(i))
    }
    fn state_mut(&mut self, i: usize) -> &mut LevelState<T> {
        dispatch!(self, s => s.state_mut(i))
    }
    #[inline]
    fn push_bottom(&mut self, item: T) {
        dispatch!(self, s => s.push_bottom(item))
    }
    fn merge_into(&mut self, i: usize, run: Vec<T>) {
        dispatch!(self, s => s.merge_into(i, run))
    }
    fn sort_level(&mut self, i: usize) {
        dispatch!(self, s => s.sort_level(i))
    }
    fn compact_level(
        &mut self,
        i: usize,
        flags: VariantFlags,
        rng: &mut SketchRng,
    ) -> Result<usize> {
        dispatch!(self, s => s.compact_level(i, flags, rng))
    }
    fn push_level(&mut self) {
        dispatch!(self, s => s.push_level())
    }
    fn pop_bottom(&mut self) -> (Vec<T>, LevelState<T>) {
        dispatch!(self, s => s.pop_bottom())
    }
}
