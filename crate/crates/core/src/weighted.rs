//! Weighted streams.
//!
//! Two approaches are offered:
//!
//! * [`Base2Sketch`] wraps an ordinary [`Sketch`]. An update `(a, w)` is split
//!   along the binary expansion of `w`: one copy of `a` per set bit between the
//!   bottom and the top level, a multiplicity at the top, and the low remainder
//!   through the sampler.
//! * [`WaSketch`] keeps real weights. Level `h` accepts weights in
//!   `[2^h, 2^(h+1))` and merges pairs by keeping one item with probability
//!   proportional to its weight, so promoted weights land in the next level.
//!   An item heavier than `k * 2^H` lifts the whole hierarchy at once and the
//!   bottom levels it skips are discarded (and counted).

use std::fmt;
use std::mem;
use std::str::FromStr;

use crate::compactor::{locate_sweep_pair_by, select_range, LevelState};
use crate::error::{Result, SketchError};
use crate::item::{is_sorted, Item};
use crate::rng::SketchRng;
use crate::sampler::Sampler;
use crate::sketch::{capacity_at, check_params, k_for_budget, Sketch};
use crate::store::Backend;
use crate::summary::{QuantileSummary, RankEstimate};
use crate::variant::VariantFlags;

/// How a sketch interprets update weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum WeightedMode {
    /// Unit weights only.
    #[default]
    None,
    Base2,
    WeightAware,
}

impl WeightedMode {
    pub(crate) fn to_bits(self) -> u8 {
        match self {
            WeightedMode::None => 0,
            WeightedMode::Base2 => 1,
            WeightedMode::WeightAware => 2,
        }
    }

    pub(crate) fn from_bits(bits: u8) -> Result<Self> {
        match bits {
            0 => Ok(WeightedMode::None),
            1 => Ok(WeightedMode::Base2),
            2 => Ok(WeightedMode::WeightAware),
            other => Err(SketchError::Corrupt(format!("weighted mode {other}"))),
        }
    }
}

impl fmt::Display for WeightedMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WeightedMode::None => "none",
            WeightedMode::Base2 => "base2",
            WeightedMode::WeightAware => "weight-aware",
        })
    }
}

impl FromStr for WeightedMode {
    type Err = SketchError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(WeightedMode::None),
            "base2" => Ok(WeightedMode::Base2),
            "weight-aware" | "wa" => Ok(WeightedMode::WeightAware),
            other => Err(SketchError::InvalidParameter(format!(
                "unknown weighted mode {other:?} (expected none, base2 or weight-aware)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WeightedItem<T> {
    pub item: T,
    pub weight: u64,
}

impl<T> WeightedItem<T> {
    pub fn new(item: T, weight: u64) -> Self {
        Self { item, weight }
    }
}

/// `w = w_prime + sum_h a_h 2^h` over heights `bottom..=top`.
///
/// Levels strictly between the bottom and the top get `a_h` in {0, 1}; the top
/// gets `a_top < k`; the bottom level itself gets nothing, its bit stays in
/// `w_prime` (so `w_prime < 2^(bottom+1)`) unless the sketch has one level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Base2Decomposition {
    pub w_prime: u64,
    pub bottom: u32,
    pub top: u32,
    coeffs: Vec<u64>,
}

impl Base2Decomposition {
    pub fn coeff(&self, h: u32) -> u64 {
        if h < self.bottom || h > self.top {
            0
        } else {
            self.coeffs[(h - self.bottom) as usize]
        }
    }

    /// `(h, a_h)` for every non-zero coefficient, lowest first.
    pub fn nonzero(&self) -> impl Iterator<Item = (u32, u64)> + '_ {
        (self.bottom..=self.top)
            .map(|h| (h, self.coeff(h)))
            .filter(|(_, a)| *a > 0)
    }

    pub fn total(&self) -> u128 {
        u128::from(self.w_prime)
            + self
                .nonzero()
                .map(|(h, a)| u128::from(a) << h)
                .sum::<u128>()
    }

    /// Separate pushes this decomposition causes.
    pub fn pushes(&self) -> usize {
        usize::from(self.w_prime > 0) + self.nonzero().count()
    }
}

pub fn base2_decompose(w: u64, bottom: u32, top: u32, k: u32) -> Result<Base2Decomposition> {
    if bottom > top || top >= 64 {
        return Err(SketchError::InvalidParameter(format!(
            "heights must satisfy bottom <= top < 64, got {bottom} and {top}"
        )));
    }
    let limit = u128::from(k) << top;
    if u128::from(w) >= limit {
        return Err(SketchError::GrowFirst { weight: w, limit });
    }
    let mut coeffs = vec![0u64; (top - bottom + 1) as usize];
    coeffs[(top - bottom) as usize] = w >> top;
    let rest = w & ((1u64 << top) - 1);
    let w_prime = if top == bottom {
        rest
    } else {
        for h in bottom + 1..top {
            coeffs[(h - bottom) as usize] = (rest >> h) & 1;
        }
        rest & ((1u64 << (bottom + 1)) - 1)
    };
    Ok(Base2Decomposition {
        w_prime,
        bottom,
        top,
        coeffs,
    })
}

/// An ordinary sketch fed weighted updates through their binary expansion.
#[derive(Debug, Clone)]
pub struct Base2Sketch<T> {
    inner: Sketch<T>,
}

impl<T: Item> Base2Sketch<T> {
    pub fn new(budget: usize, c: f64, flags: VariantFlags, seed: u64) -> Result<Self> {
        Self::with_backend(budget, c, flags, seed, Backend::default())
    }

    pub fn with_backend(
        budget: usize,
        c: f64,
        flags: VariantFlags,
        seed: u64,
        backend: Backend,
    ) -> Result<Self> {
        let mut inner = Sketch::with_backend(budget, c, flags, seed, backend)?;
        inner.mode = WeightedMode::Base2;
        Ok(Self { inner })
    }

    pub(crate) fn from_inner(inner: Sketch<T>) -> Self {
        debug_assert_eq!(inner.mode, WeightedMode::Base2);
        Self { inner }
    }

    pub fn inner(&self) -> &Sketch<T> {
        &self.inner
    }

    pub fn into_inner(self) -> Sketch<T> {
        self.inner
    }

    pub fn n_total(&self) -> u64 {
        self.inner.n_total()
    }

    pub fn merge(a: &Self, b: &Self) -> Result<Self> {
        Sketch::merge(&a.inner, &b.inner).map(Self::from_inner)
    }

    pub fn rank(&self, q: &T) -> RankEstimate {
        self.inner.rank(q)
    }

    pub fn update(&mut self, item: T, w: u64) -> Result<()> {
        if w == 0 {
            return Err(SketchError::ZeroWeight);
        }
        let s = &mut self.inner;
        let n = s.n_total.checked_add(w).ok_or(SketchError::WeightOverflow)?;
        s.ensure_room(n);
        s.n_total = n;
        let d = base2_decompose(w, s.bottom, s.top, s.k)?;
        if d.w_prime > 0 {
            s.offer_to_sampler(item.clone(), d.w_prime);
            s.settle();
        }
        for h in d.bottom + 1..d.top {
            if d.coeff(h) == 1 {
                s.place_at_height(item.clone(), h);
                s.settle();
            }
        }
        let copies = d.coeff(d.top);
        if copies > 0 {
            if s.top == d.top && s.top_index() > 0 {
                s.top_runs.push((item, copies));
                s.items_n += copies;
            } else {
                // Single-level sketch, or the top moved while settling.
                s.place_run_at_height(vec![item; copies as usize], d.top);
            }
            s.settle();
        }
        Ok(())
    }
}

impl<T: Item> QuantileSummary<T> for Base2Sketch<T> {
    fn total_weight(&self) -> u64 {
        self.inner.n_total()
    }

    fn weighted_items(&self) -> Vec<(T, u64)> {
        self.inner.weighted_items()
    }

    fn rank(&self, q: &T) -> RankEstimate {
        self.inner.rank(q)
    }
}

/// A level holding items with weights in `[2^level, 2^(level+1))`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedCompactor<T> {
    pub level: u32,
    entries: Vec<WeightedItem<T>>,
    sorted_len: usize,
    pub state: LevelState<T>,
}

impl<T: Item> WeightedCompactor<T> {
    pub fn new(level: u32) -> Self {
        Self {
            level,
            entries: Vec::new(),
            sorted_len: 0,
            state: LevelState::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[WeightedItem<T>] {
        &self.entries
    }

    pub fn total_weight(&self) -> u128 {
        self.entries.iter().map(|e| u128::from(e.weight)).sum()
    }

    fn accepts(&self, w: u64) -> bool {
        u128::from(w) >= 1u128 << self.level && u128::from(w) < 1u128 << (self.level + 1)
    }

    pub fn push(&mut self, entry: WeightedItem<T>) {
        debug_assert!(self.accepts(entry.weight), "weight {} at level {}", entry.weight, self.level);
        self.entries.push(entry);
    }

    pub fn insert_sorted(&mut self, entry: WeightedItem<T>) {
        debug_assert!(self.accepts(entry.weight), "weight {} at level {}", entry.weight, self.level);
        self.ensure_sorted();
        let at = self.entries.partition_point(|e| e.item.less(&entry.item));
        self.entries.insert(at, entry);
        self.sorted_len += 1;
    }

    pub fn ensure_sorted(&mut self) {
        if self.sorted_len != self.entries.len() {
            self.entries.sort_by(|a, b| a.item.item_cmp(&b.item));
            self.sorted_len = self.entries.len();
        }
    }

    fn take_all(&mut self) -> Vec<WeightedItem<T>> {
        self.sorted_len = 0;
        mem::take(&mut self.entries)
    }

    fn from_sorted(level: u32, entries: Vec<WeightedItem<T>>, state: LevelState<T>) -> Self {
        let sorted_len = entries.len();
        Self {
            level,
            entries,
            sorted_len,
            state,
        }
    }
}

fn weighted_choice<T>(a: WeightedItem<T>, b: WeightedItem<T>, rng: &mut SketchRng) -> WeightedItem<T> {
    let weight = a.weight + b.weight;
    let item = if rng.below(weight) < a.weight { a.item } else { b.item };
    WeightedItem { item, weight }
}

/// Merges the next sweep pair `(a_j, w_j), (a_j+1, w_j+1)` into one item that
/// carries the summed weight and is `a_j` with probability `w_j / (w_j + w_j+1)`.
pub fn wa_compact_pair<T: Item>(
    c: &mut WeightedCompactor<T>,
    flags: VariantFlags,
    rng: &mut SketchRng,
) -> Result<WeightedItem<T>> {
    if c.len() < 2 {
        return Err(SketchError::NothingToCompact);
    }
    c.ensure_sorted();
    let (j, _) = locate_sweep_pair_by(&c.entries, |e| &e.item, &mut c.state, flags, rng)?;
    let b = c.entries.remove(j + 1);
    let a = c.entries.remove(j);
    c.sorted_len = c.entries.len();
    Ok(weighted_choice(a, b, rng))
}

/// Merges every pair of the selected range (see [`select_range`]).
pub fn wa_compact_full<T: Item>(
    c: &mut WeightedCompactor<T>,
    flags: VariantFlags,
    rng: &mut SketchRng,
) -> Result<Vec<WeightedItem<T>>> {
    c.ensure_sorted();
    let range = select_range(c.len(), flags.spreading, rng)?;
    let mut pairs = c.entries.drain(range);
    let mut out = Vec::new();
    while let (Some(a), Some(b)) = (pairs.next(), pairs.next()) {
        out.push(weighted_choice(a, b, rng));
    }
    drop(pairs);
    c.sorted_len = c.entries.len();
    Ok(out)
}

/// Sketch over weighted updates built from weight-aware compactors.
#[derive(Debug, Clone)]
pub struct WaSketch<T> {
    pub(crate) k: u32,
    pub(crate) c: f64,
    pub(crate) budget: usize,
    pub(crate) flags: VariantFlags,
    pub(crate) top: u32,
    pub(crate) bottom: u32,
    pub(crate) levels: Vec<WeightedCompactor<T>>,
    pub(crate) caps: Vec<usize>,
    pub(crate) sampler: Sampler<T>,
    /// Copies of weight exactly `2^top`, as (item, multiplicity).
    pub(crate) top_runs: Vec<(T, u64)>,
    pub(crate) items_n: u64,
    pub(crate) n_total: u64,
    pub(crate) discarded: u64,
    pub(crate) compactions: u64,
    pub(crate) rng: SketchRng,
}

impl<T: Item> WaSketch<T> {
    pub fn new(budget: usize, c: f64, flags: VariantFlags, seed: u64) -> Result<Self> {
        check_params(budget, c)?;
        let k = k_for_budget(budget, c);
        Ok(Self {
            k,
            c,
            budget,
            flags,
            top: 0,
            bottom: 0,
            levels: vec![WeightedCompactor::new(0)],
            caps: vec![capacity_at(k, c, 0, 0)],
            sampler: Sampler::new(0),
            top_runs: Vec::new(),
            items_n: 0,
            n_total: 0,
            discarded: 0,
            compactions: 0,
            rng: SketchRng::seeded(seed),
        })
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_parts(
        k: u32,
        c: f64,
        budget: usize,
        flags: VariantFlags,
        top: u32,
        bottom: u32,
        levels: Vec<(Vec<WeightedItem<T>>, LevelState<T>)>,
        sampler: Sampler<T>,
        top_runs: Vec<(T, u64)>,
        n_total: u64,
        discarded: u64,
        compactions: u64,
        rng: SketchRng,
    ) -> Result<Self> {
        let levels: Vec<_> = levels
            .into_iter()
            .enumerate()
            .map(|(i, (entries, state))| {
                WeightedCompactor::from_sorted(bottom + i as u32, entries, state)
            })
            .collect();
        for l in &levels {
            if l.entries.iter().any(|e| !l.accepts(e.weight)) {
                return Err(SketchError::Corrupt(format!("weight out of range at level {}", l.level)));
            }
            if !is_sorted(&l.entries.iter().map(|e| e.item.clone()).collect::<Vec<_>>()) {
                return Err(SketchError::Corrupt(format!("level {} is not sorted", l.level)));
            }
        }
        let mut s = Self {
            k,
            c,
            budget,
            flags,
            top,
            bottom,
            levels,
            caps: Vec::new(),
            sampler,
            top_runs,
            items_n: 0,
            n_total,
            discarded,
            compactions,
            rng,
        };
        s.recompute_caps();
        s.items_n = s.count_items();
        Ok(s)
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn budget(&self) -> usize {
        self.budget
    }

    pub fn flags(&self) -> VariantFlags {
        self.flags
    }

    pub fn height(&self) -> u32 {
        self.top
    }

    pub fn bottom_height(&self) -> u32 {
        self.bottom
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[WeightedCompactor<T>] {
        &self.levels
    }

    pub fn sampler(&self) -> &Sampler<T> {
        &self.sampler
    }

    pub fn top_runs(&self) -> &[(T, u64)] {
        &self.top_runs
    }

    pub fn items_n(&self) -> u64 {
        self.items_n
    }

    /// Total weight observed, including discarded weight.
    pub fn n_total(&self) -> u64 {
        self.n_total
    }

    pub fn is_empty(&self) -> bool {
        self.n_total == 0
    }

    /// Weight dropped when a heavy item lifted the hierarchy.
    pub fn discarded(&self) -> u64 {
        self.discarded
    }

    pub fn compactions(&self) -> u64 {
        self.compactions
    }

    pub fn capacities(&self) -> &[usize] {
        &self.caps
    }

    /// Weight held by levels, top runs and the sampler.
    pub fn stored_weight(&self) -> u128 {
        let levels: u128 = self.levels.iter().map(WeightedCompactor::total_weight).sum();
        let runs: u128 = self.top_runs.iter().map(|(_, m)| u128::from(*m) << self.top).sum();
        levels + runs + u128::from(self.sampler.accum())
    }

    fn count_items(&self) -> u64 {
        let physical: usize = self.levels.iter().map(WeightedCompactor::len).sum();
        physical as u64 + self.top_runs.iter().map(|(_, m)| m).sum::<u64>()
    }

    fn recompute_caps(&mut self) {
        self.caps = (self.bottom..=self.top)
            .map(|h| capacity_at(self.k, self.c, self.top, h))
            .collect();
    }

    fn top_index(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn update(&mut self, item: T, w: u64) -> Result<()> {
        if w == 0 {
            return Err(SketchError::ZeroWeight);
        }
        let n = self.n_total.checked_add(w).ok_or(SketchError::WeightOverflow)?;
        let k = u128::from(self.k);
        if u128::from(w) >= k << self.top {
            let mut new_top = self.top;
            while u128::from(w) >= k << new_top {
                new_top += 1;
            }
            self.lift(new_top - self.top);
        }
        self.ensure_room(n);
        self.n_total = n;
        self.route(item, w);
        self.settle();
        Ok(())
    }

    /// Raises every height by `d`, discarding the `d` lowest levels.
    /// Raises H by `d` for an update too heavy for the current height. Levels
    /// whose capacity falls to 2 are dropped outright and their weight counted
    /// as discarded; with a full-height hierarchy that is the bottom `d`.
    fn lift(&mut self, d: u32) {
        self.expand_top_runs();
        for _ in 0..d {
            self.top += 1;
            self.levels.push(WeightedCompactor::new(self.top));
        }
        self.recompute_caps();
        while self.levels.len() > 1 && self.caps[0] <= 2 {
            let mut level = self.levels.remove(0);
            self.caps.remove(0);
            self.discarded += u64::try_from(level.total_weight()).expect("discarded weight fits the total");
            self.items_n -= level.take_all().len() as u64;
            self.bottom += 1;
        }
        self.sampler
            .raise_rate(self.bottom)
            .expect("sampler rate follows the bottom height");
    }

    fn ensure_room(&mut self, n: u64) {
        while u128::from(n) >= u128::from(self.k) << self.top {
            self.grow();
        }
    }

    fn grow(&mut self) {
        self.expand_top_runs();
        self.top += 1;
        self.levels.push(WeightedCompactor::new(self.top));
        self.recompute_caps();
        while self.levels.len() > 1 && self.caps[0] <= 2 {
            let mut level = self.levels.remove(0);
            self.caps.remove(0);
            level.ensure_sorted();
            let entries = level.take_all();
            self.items_n -= entries.len() as u64;
            self.bottom += 1;
            self.sampler
                .raise_rate(self.bottom)
                .expect("sampler rate follows the bottom height");
            for e in entries {
                self.offer_to_sampler(e.item, e.weight);
            }
        }
    }

    fn expand_top_runs(&mut self) {
        let weight = 1u64 << self.top;
        let top = self.top_index();
        for (x, m) in mem::take(&mut self.top_runs) {
            for _ in 0..m {
                self.levels[top].insert_sorted(WeightedItem::new(x.clone(), weight));
            }
        }
    }

    fn offer_to_sampler(&mut self, item: T, w: u64) {
        let emitted = self
            .sampler
            .offer(item, w, &mut self.rng)
            .expect("offered weight is positive");
        let weight = self.sampler.rate();
        for x in emitted {
            self.levels[0].push(WeightedItem::new(x, weight));
            self.items_n += 1;
        }
    }

    fn route(&mut self, item: T, mut w: u64) {
        loop {
            if u128::from(w) < 1u128 << (self.bottom + 1) {
                self.offer_to_sampler(item, w);
                return;
            }
            if u128::from(w) < 1u128 << (self.top + 1) {
                let h = 63 - w.leading_zeros();
                let i = (h - self.bottom) as usize;
                self.levels[i].insert_sorted(WeightedItem::new(item, w));
                self.items_n += 1;
                return;
            }
            let copies = w >> self.top;
            self.top_runs.push((item.clone(), copies));
            self.items_n += copies;
            w -= copies << self.top;
            if w == 0 {
                return;
            }
        }
    }

    fn logical_len(&self, i: usize) -> usize {
        let physical = self.levels[i].len();
        if i == self.top_index() {
            physical + self.top_runs.iter().map(|(_, m)| *m as usize).sum::<usize>()
        } else {
            physical
        }
    }

    fn eligible(&self, i: usize) -> bool {
        let len = self.logical_len(i);
        len >= 2 && len >= self.caps[i]
    }

    fn lowest_eligible(&self) -> Option<usize> {
        (0..self.levels.len()).find(|&i| self.eligible(i))
    }

    fn compact_height(&mut self, h: u32) {
        if h == self.top {
            self.grow();
        }
        if h < self.bottom {
            return;
        }
        let i = (h - self.bottom) as usize;
        if self.flags.sweep {
            let promoted = wa_compact_pair(&mut self.levels[i], self.flags, &mut self.rng)
                .expect("eligible levels hold at least two items");
            self.levels[i + 1].insert_sorted(promoted);
            self.items_n -= 1;
        } else {
            let promoted = wa_compact_full(&mut self.levels[i], self.flags, &mut self.rng)
                .expect("eligible levels hold at least two items");
            self.items_n -= promoted.len() as u64;
            let above = &mut self.levels[i + 1];
            above.ensure_sorted();
            for e in promoted {
                above.insert_sorted(e);
            }
        }
        self.compactions += 1;
    }

    fn settle(&mut self) {
        if self.flags.lazy {
            if self.items_n > self.budget as u64 {
                if let Some(i) = self.lowest_eligible() {
                    self.compact_height(self.bottom + i as u32);
                }
            }
            return;
        }
        let mut h = self.bottom;
        while h <= self.top {
            if h >= self.bottom && self.eligible((h - self.bottom) as usize) {
                self.compact_height(h);
            }
            h += 1;
        }
    }

    fn settle_fully(&mut self) {
        if self.flags.lazy {
            while self.items_n > self.budget as u64 {
                match self.lowest_eligible() {
                    Some(i) => self.compact_height(self.bottom + i as u32),
                    None => break,
                }
            }
        } else {
            while self.lowest_eligible().is_some() {
                self.settle();
            }
        }
    }

    /// Combines two weight-aware sketches: the taller one is the base and the
    /// other's stored items are routed into it by weight.
    pub fn merge(a: &Self, b: &Self) -> Result<Self> {
        if a.c.to_bits() != b.c.to_bits() {
            return Err(SketchError::Incompatible {
                field: "c",
                left: a.c.to_string(),
                right: b.c.to_string(),
            });
        }
        if a.flags != b.flags {
            return Err(SketchError::Incompatible {
                field: "variant",
                left: a.flags.to_string(),
                right: b.flags.to_string(),
            });
        }
        let n = a.n_total.checked_add(b.n_total).ok_or(SketchError::WeightOverflow)?;
        let a_is_base = b.is_empty() || (!a.is_empty() && a.top >= b.top);
        let (base, other) = if a_is_base { (a, b) } else { (b, a) };
        let mut out = base.clone();
        if other.k > out.k || other.budget > out.budget {
            out.k = out.k.max(other.k);
            out.budget = out.budget.max(other.budget);
            out.recompute_caps();
        }
        if other.is_empty() {
            return Ok(out);
        }
        out.ensure_room(n);
        out.n_total = n;
        out.discarded += other.discarded;
        for level in &other.levels {
            for e in level.entries() {
                out.route(e.item.clone(), e.weight);
            }
        }
        for (x, m) in &other.top_runs {
            out.route(x.clone(), m << other.top);
        }
        if let Some(x) = other.sampler.candidate() {
            out.offer_to_sampler(x.clone(), other.sampler.accum());
        }
        out.settle_fully();
        Ok(out)
    }

    pub fn rank(&self, q: &T) -> RankEstimate {
        let mut value: u64 = self
            .levels
            .iter()
            .flat_map(|l| l.entries.iter())
            .filter(|e| e.item.less(q))
            .map(|e| e.weight)
            .sum();
        for (x, m) in &self.top_runs {
            if x.less(q) {
                value += m << self.top;
            }
        }
        if let Some(x) = self.sampler.candidate() {
            if x.less(q) {
                value += self.sampler.accum();
            }
        }
        RankEstimate {
            value,
            n: self.n_total,
        }
    }
}

impl<T: Item> QuantileSummary<T> for WaSketch<T> {
    /// Observed weight; stored weight is smaller by [`WaSketch::discarded`].
    fn total_weight(&self) -> u64 {
        self.n_total
    }

    fn weighted_items(&self) -> Vec<(T, u64)> {
        let mut out: Vec<(T, u64)> = self
            .levels
            .iter()
            .flat_map(|l| l.entries.iter().map(|e| (e.item.clone(), e.weight)))
            .collect();
        out.extend(self.top_runs.iter().map(|(x, m)| (x.clone(), m << self.top)));
        if let Some(x) = self.sampler.candidate() {
            out.push((x.clone(), self.sampler.accum()));
        }
        out
    }

    fn rank(&self, q: &T) -> RankEstimate {
        WaSketch::rank(self, q)
    }
}
