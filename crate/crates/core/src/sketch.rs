//! The compactor hierarchy.
//!
//! Levels are indexed bottom-up; index `i` holds items of weight
//! `2^(H_s + i)` and the top level has height `H`. Capacities shrink
//! geometrically below the top (`k * c^(H - h)`, never below 2), and the
//! capacity-2 tail is replaced by a [`Sampler`] feeding the bottom level.
//!
//! Growth keeps `n < k * 2^H`: when the next update would break that, a new
//! empty top level is added, capacities shrink, and bottom levels whose
//! capacity fell to 2 are drained into the sampler.

use std::f64::consts::FRAC_1_SQRT_2;
use std::mem;

use crate::compactor::LevelState;
use crate::error::{Result, SketchError};
use crate::item::{sort_items, Item};
use crate::rng::SketchRng;
use crate::sampler::Sampler;
use crate::store::{Backend, LevelStore, Store};
use crate::summary::{QuantileSummary, RankEstimate};
use crate::variant::VariantFlags;
use crate::weighted::WeightedMode;

/// The recommended capacity decay.
pub const DEFAULT_C: f64 = FRAC_1_SQRT_2;

/// Smallest accepted space budget.
pub const MIN_BUDGET: usize = 8;

/// Capacity of the level at height `h` in a sketch of height `top`:
/// `max(2, ceil(k * c^(top - h)))`.
pub fn capacity_at(k: u32, c: f64, top: u32, h: u32) -> usize {
    debug_assert!(h <= top);
    let exp = i32::try_from(top - h).unwrap_or(i32::MAX);
    let raw = f64::from(k) * c.powi(exp);
    // The slack absorbs rounding in c^d, e.g. (1/sqrt 2)^2 = 0.5000000000000001.
    ((raw - 1e-9).ceil() as usize).max(2)
}

/// Top-level capacity for a space budget: the geometric series
/// `k / (1 - c)` inverted.
pub fn k_for_budget(budget: usize, c: f64) -> u32 {
    ((budget as f64 * (1.0 - c) - 1e-9).ceil() as u32).max(1)
}

pub(crate) fn check_params(budget: usize, c: f64) -> Result<()> {
    if !(c > 0.5 && c < 1.0) {
        return Err(SketchError::InvalidParameter(format!(
            "c must lie strictly between 0.5 and 1, got {c}"
        )));
    }
    if budget < MIN_BUDGET {
        return Err(SketchError::InvalidParameter(format!(
            "budget must be at least {MIN_BUDGET}, got {budget}"
        )));
    }
    if budget > u32::MAX as usize {
        return Err(SketchError::InvalidParameter(format!("budget {budget} is too large")));
    }
    Ok(())
}

/// `C = c^3 (2c - 1) / 2`, the constant in the single-query tail bound.
pub fn failure_constant(c: f64) -> f64 {
    c.powi(3) * (2.0 * c - 1.0) / 2.0
}

/// Upper bound on the probability that a single rank query is off by more
/// than `eps * n`: `2 exp(-C eps^2 k^2)`, clamped to 1.
pub fn failure_probability(eps: f64, k: u32, c: f64) -> Result<f64> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(SketchError::InvalidParameter(format!("eps must be positive, got {eps}")));
    }
    if k < 2 {
        return Err(SketchError::InvalidParameter(format!("k must be at least 2, got {k}")));
    }
    if !(c > 0.5 && c < 1.0) {
        return Err(SketchError::InvalidParameter(format!(
            "c must lie strictly between 0.5 and 1, got {c}"
        )));
    }
    let k = f64::from(k);
    Ok((2.0 * (-failure_constant(c) * eps * eps * k * k).exp()).min(1.0))
}

/// The `eps` at which [`failure_probability`] equals `delta`.
pub fn epsilon_for(delta: f64, k: u32, c: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(SketchError::InvalidParameter(format!("delta must lie in (0, 1), got {delta}")));
    }
    failure_probability(1.0, k, c)?;
    let k = f64::from(k);
    Ok(((2.0 / delta).ln() / (failure_constant(c) * k * k)).sqrt())
}

#[derive(Debug, Clone)]
pub struct Sketch<T> {
    pub(crate) k: u32,
    pub(crate) c: f64,
    pub(crate) budget: usize,
    pub(crate) flags: VariantFlags,
    pub(crate) mode: WeightedMode,
    /// Height of the top level (`H`).
    pub(crate) top: u32,
    /// Height of the lowest retained level (`H_s`).
    pub(crate) bottom: u32,
    pub(crate) store: Store<T>,
    pub(crate) caps: Vec<usize>,
    pub(crate) sampler: Sampler<T>,
    /// Top-level items stored as (item, multiplicity).
    pub(crate) top_runs: Vec<(T, u64)>,
    pub(crate) items_n: u64,
    pub(crate) n_total: u64,
    pub(crate) compactions: u64,
    pub(crate) rng: SketchRng,
    emit_buf: Vec<T>,
}

impl<T: Item> Sketch<T> {
    /// An empty sketch on the packed backend.
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
        check_params(budget, c)?;
        let k = k_for_budget(budget, c);
        let mut store = Store::new(backend, budget + 1);
        store.push_level();
        Ok(Self {
            k,
            c,
            budget,
            flags,
            mode: WeightedMode::None,
            top: 0,
            bottom: 0,
            store,
            caps: vec![capacity_at(k, c, 0, 0)],
            sampler: Sampler::new(0),
            top_runs: Vec::new(),
            items_n: 0,
            n_total: 0,
            compactions: 0,
            rng: SketchRng::seeded(seed),
            emit_buf: Vec::new(),
        })
    }

    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_parts(
        k: u32,
        c: f64,
        budget: usize,
        flags: VariantFlags,
        mode: WeightedMode,
        top: u32,
        bottom: u32,
        store: Store<T>,
        sampler: Sampler<T>,
        top_runs: Vec<(T, u64)>,
        n_total: u64,
        compactions: u64,
        rng: SketchRng,
    ) -> Self {
        let mut s = Self {
            k,
            c,
            budget,
            flags,
            mode,
            top,
            bottom,
            store,
            caps: Vec::new(),
            sampler,
            top_runs,
            items_n: 0,
            n_total,
            compactions,
            rng,
            emit_buf: Vec::new(),
        };
        s.recompute_caps();
        s.items_n = s.count_items();
        s
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

    pub fn weighted_mode(&self) -> WeightedMode {
        self.mode
    }

    pub fn backend(&self) -> Backend {
        self.store.backend()
    }

    /// Height `H` of the top level.
    pub fn height(&self) -> u32 {
        self.top
    }

    /// Height `H_s` of the lowest retained level; the sampler emits weight `2^H_s`.
    pub fn bottom_height(&self) -> u32 {
        self.bottom
    }

    pub fn num_levels(&self) -> usize {
        self.store.num_levels()
    }

    /// Stored items, counting top-level multiplicities.
    pub fn items_n(&self) -> u64 {
        self.items_n
    }

    pub fn n_total(&self) -> u64 {
        self.n_total
    }

    pub fn is_empty(&self) -> bool {
        self.n_total == 0
    }

    /// Number of compaction operations performed (a swept pair counts as one).
    pub fn compactions(&self) -> u64 {
        self.compactions
    }

    pub fn capacities(&self) -> &[usize] {
        &self.caps
    }

    /// Items of level `i` (bottom = 0). Level 0 may be unsorted.
    pub fn level(&self, i: usize) -> &[T] {
        self.store.level(i)
    }

    pub fn level_state(&self, i: usize) -> &LevelState<T> {
        self.store.state(i)
    }

    /// Sweeps started per level, bottom first.
    pub fn sweeps_per_level(&self) -> Vec<u64> {
        (0..self.num_levels()).map(|i| self.store.state(i).sweep.sweeps).collect()
    }

    pub fn sampler(&self) -> &Sampler<T> {
        &self.sampler
    }

    pub fn top_runs(&self) -> &[(T, u64)] {
        &self.top_runs
    }

    pub fn store(&self) -> &Store<T> {
        &self.store
    }

    /// Time the packed backend has spent sorting level 0 (`None` on the list backend).
    pub fn sort_time(&self) -> Option<std::time::Duration> {
        match &self.store {
            Store::Packed(p) => Some(p.sort_time()),
            Store::List(_) => None,
        }
    }

    /// The same sketch on another backend.
    pub fn into_backend(mut self, backend: Backend) -> Self {
        if self.store.backend() == backend {
            return self;
        }
        let mut store = Store::new(backend, self.budget + 1);
        for i in 0..self.store.num_levels() {
            store.push_level();
            let mut items = self.store.level(i).to_vec();
            sort_items(&mut items);
            store.merge_into(i, items);
            *store.state_mut(i) = self.store.state(i).clone();
        }
        self.store = store;
        self
    }

    /// Total weight held by levels, top runs and the sampler.
    pub fn stored_weight(&self) -> u128 {
        let levels: u128 = (0..self.num_levels())
            .map(|i| (self.store.level_len(i) as u128) << (self.bottom as usize + i))
            .sum();
        let runs: u128 = self.top_runs.iter().map(|(_, m)| u128::from(*m) << self.top).sum();
        levels + runs + u128::from(self.sampler.accum())
    }

    pub fn update(&mut self, item: T) {
        let n = self.n_total.checked_add(1).expect("stream length overflows 64 bits");
        self.ensure_room(n);
        self.n_total = n;
        if self.sampler.rate_exp() == 0 {
            self.push_bottom(item);
        } else {
            self.offer_to_sampler(item, 1);
        }
        self.settle();
    }

    /// Index of the level at height `h`, if retained.
    pub(crate) fn index_of(&self, h: u32) -> Option<usize> {
        (h >= self.bottom && h <= self.top).then(|| (h - self.bottom) as usize)
    }

    pub(crate) fn top_index(&self) -> usize {
        (self.top - self.bottom) as usize
    }

    fn count_items(&self) -> u64 {
        let physical: usize = (0..self.num_levels()).map(|i| self.store.level_len(i)).sum();
        physical as u64 + self.top_runs.iter().map(|(_, m)| m).sum::<u64>()
    }

    pub(crate) fn recompute_caps(&mut self) {
        self.caps = (self.bottom..=self.top)
            .map(|h| capacity_at(self.k, self.c, self.top, h))
            .collect();
    }

    #[inline]
    pub(crate) fn push_bottom(&mut self, item: T) {
        self.store.push_bottom(item);
        self.items_n += 1;
    }

    pub(crate) fn offer_to_sampler(&mut self, item: T, w: u64) {
        let mut out = mem::take(&mut self.emit_buf);
        self.sampler
            .offer_into(item, w, &mut self.rng, &mut out)
            .expect("offered weight is positive");
        for x in out.drain(..) {
            self.push_bottom(x);
        }
        self.emit_buf = out;
    }

    /// Stores one item of weight `2^h`, or offers it to the sampler when that
    /// height is no longer retained.
    pub(crate) fn place_at_height(&mut self, item: T, h: u32) {
        match self.index_of(h) {
            None => self.offer_to_sampler(item, 1u64 << h),
            Some(0) => self.push_bottom(item),
            Some(i) => {
                self.store.merge_into(i, vec![item]);
                self.items_n += 1;
            }
        }
    }

    /// Stores a sorted run at height `h` (see [`Self::place_at_height`]).
    pub(crate) fn place_run_at_height(&mut self, run: Vec<T>, h: u32) {
        match self.index_of(h) {
            None => {
                for x in run {
                    self.offer_to_sampler(x, 1u64 << h);
                }
            }
            Some(0) => {
                for x in run {
                    self.push_bottom(x);
                }
            }
            Some(i) => {
                self.items_n += run.len() as u64;
                self.store.merge_into(i, run);
            }
        }
    }

    /// Grows until a total weight of `n` fits: `n < k * 2^H`.
    pub(crate) fn ensure_room(&mut self, n: u64) {
        while u128::from(n) >= u128::from(self.k) << self.top {
            self.grow();
        }
    }

    /// Adds an empty top level and drains capacity-2 levels into the sampler.
    pub(crate) fn grow(&mut self) {
        self.expand_top_runs();
        self.store.push_level();
        self.top += 1;
        self.recompute_caps();
        while self.store.num_levels() > 1 && self.caps[0] <= 2 {
            self.drain_bottom();
        }
    }

    fn drain_bottom(&mut self) {
        let (items, _) = self.store.pop_bottom();
        self.caps.remove(0);
        self.items_n -= items.len() as u64;
        let w = 1u64 << self.bottom;
        self.bottom += 1;
        self.sampler
            .raise_rate(self.bottom)
            .expect("sampler rate follows the bottom height");
        for x in items {
            self.offer_to_sampler(x, w);
        }
    }

    pub(crate) fn expand_top_runs(&mut self) {
        if self.top_runs.is_empty() {
            return;
        }
        let mut copies = Vec::new();
        for (x, m) in mem::take(&mut self.top_runs) {
            copies.extend(std::iter::repeat_n(x, m as usize));
        }
        sort_items(&mut copies);
        let top = self.top_index();
        self.store.merge_into(top, copies);
    }

    fn logical_len(&self, i: usize) -> usize {
        let physical = self.store.level_len(i);
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
        (0..self.num_levels()).find(|&i| self.eligible(i))
    }

    fn compact_height(&mut self, h: u32) {
        if h == self.top {
            self.grow();
        }
        let Some(i) = self.index_of(h) else {
            return;
        };
        let removed = self
            .store
            .compact_level(i, self.flags, &mut self.rng)
            .expect("eligible levels hold at least two items");
        self.items_n -= removed as u64;
        self.compactions += 1;
    }

    /// One round of compactions after an arrival: the lowest full level when
    /// lazy and over budget, otherwise every full level bottom-up.
    pub(crate) fn settle(&mut self) {
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
            if let Some(i) = self.index_of(h) {
                if self.eligible(i) {
                    self.compact_height(h);
                }
            }
            h += 1;
        }
    }

    /// Compacts until no level is over capacity (lazy: until within budget).
    pub(crate) fn settle_fully(&mut self) {
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

    /// Combines two sketches with the same `c`, flags and weighting.
    ///
    /// The taller non-empty sketch (the left one on ties) is the base; the other's
    /// levels are added at their heights, its sampler content is re-offered,
    /// and the result is compacted back under its capacities.
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
        if a.mode != b.mode {
            return Err(SketchError::Incompatible {
                field: "weighted mode",
                left: a.mode.to_string(),
                right: b.mode.to_string(),
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
        for i in 0..other.num_levels() {
            let h = other.bottom + i as u32;
            let mut items = other.store.level(i).to_vec();
            sort_items(&mut items);
            out.place_run_at_height(items, h);
        }
        if !other.top_runs.is_empty() {
            let mut copies = Vec::new();
            for (x, m) in &other.top_runs {
                copies.extend(std::iter::repeat_n(x.clone(), *m as usize));
            }
            sort_items(&mut copies);
            out.place_run_at_height(copies, other.top);
        }
        if let Some(x) = other.sampler.candidate() {
            out.offer_to_sampler(x.clone(), other.sampler.accum());
        }
        out.expand_top_runs();
        out.settle_fully();
        Ok(out)
    }

    /// Estimated weight of stored items strictly below `q`.
    pub fn rank(&self, q: &T) -> RankEstimate {
        let mut value = 0u64;
        for i in 0..self.num_levels() {
            let level = self.store.level(i);
            let below = if i == 0 {
                level.iter().filter(|x| x.less(q)).count()
            } else {
                level.partition_point(|x| x.less(q))
            };
            value += (below as u64) << (self.bottom as usize + i);
        }
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

impl<T: Item> QuantileSummary<T> for Sketch<T> {
    fn total_weight(&self) -> u64 {
        self.n_total
    }

    fn weighted_items(&self) -> Vec<(T, u64)> {
        let mut out = Vec::with_capacity(self.items_n as usize + 1);
        for i in 0..self.num_levels() {
            let w = 1u64 << (self.bottom as usize + i);
            out.extend(self.store.level(i).iter().map(|x| (x.clone(), w)));
        }
        out.extend(self.top_runs.iter().map(|(x, m)| (x.clone(), m << self.top)));
        if let Some(x) = self.sampler.candidate() {
            out.push((x.clone(), self.sampler.accum()));
        }
        out
    }

    fn rank(&self, q: &T) -> RankEstimate {
        Sketch::rank(self, q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sketch(budget: usize, bits: u8, seed: u64) -> Sketch<f64> {
        Sketch::new(budget, DEFAULT_C, VariantFlags::from_bits(bits), seed).unwrap()
    }

    #[test]
    fn k_from_budget() {
        assert_eq!(k_for_budget(512, DEFAULT_C), 150);
        assert_eq!(k_for_budget(8, 0.75), 2);
        let s = Sketch::<f64>::new(8, 0.75, VariantFlags::ALL, 0).unwrap();
        assert_eq!(s.k(), 2);
        assert_eq!(s.num_levels(), 1);
    }

    #[test]
    fn parameter_validation() {
        assert!(Sketch::<f64>::new(512, 0.5, VariantFlags::ALL, 0).is_err());
        assert!(Sketch::<f64>::new(512, 1.0, VariantFlags::ALL, 0).is_err());
        assert!(Sketch::<f64>::new(512, f64::NAN, VariantFlags::ALL, 0).is_err());
        assert!(Sketch::<f64>::new(7, DEFAULT_C, VariantFlags::ALL, 0).is_err());
    }

    #[test]
    fn capacity_schedule() {
        assert_eq!(capacity_at(100, DEFAULT_C, 5, 5), 100);
        assert_eq!(capacity_at(100, DEFAULT_C, 7, 5), 50);
        assert_eq!(capacity_at(4, 0.51, 20, 0), 2);
        assert_eq!(capacity_at(150, DEFAULT_C, 1, 0), 107);
    }

    #[test]
    fn failure_bound_constant() {
        let c = DEFAULT_C;
        assert!((failure_constant(c) - 0.073_223_304_703_363).abs() < 1e-9);
        // The uncorrected expression would give about 0.414.
        assert!((2.0 * c * c * (2.0 * c - 1.0) - failure_constant(c)).abs() > 0.1);
        assert_eq!(failure_probability(1e-9, 100, c).unwrap(), 1.0);
        let a = failure_probability(0.05, 100, c).unwrap();
        let b = failure_probability(0.05, 200, c).unwrap();
        let d = failure_probability(0.1, 100, c).unwrap();
        assert!(b < a && d < a);
        assert!(failure_probability(0.0, 100, c).is_err());
        assert!(failure_probability(0.1, 1, c).is_err());
        assert!(failure_probability(0.1, 100, 0.5).is_err());
        let eps = epsilon_for(0.05, 75, c).unwrap();
        assert!((failure_probability(eps, 75, c).unwrap() - 0.05).abs() < 1e-12);
    }

    #[test]
    fn few_updates_do_not_compact() {
        let mut s = sketch(512, 0b1111, 0);
        for x in 0..5 {
            s.update(f64::from(x));
        }
        assert_eq!(s.items_n(), 5);
        assert_eq!(s.compactions(), 0);
    }

    #[test]
    fn lazy_compacts_once_when_over_budget() {
        let mut s = sketch(512, 0b0001, 1);
        let mut i = 0.0;
        while s.items_n() < 512 {
            s.update(i);
            i += 1.0;
        }
        assert_eq!(s.items_n(), 512);
        let before = s.compactions();
        s.update(i);
        assert_eq!(s.compactions(), before + 1);
    }

    #[test]
    fn height_grows_past_k_times_two_to_the_h() {
        let mut s = sketch(64, 0, 2);
        let k = u64::from(s.k());
        for i in 0..k {
            s.update(i as f64);
        }
        assert_eq!(s.height(), 1);
        let limit = k << s.height();
        while s.n_total() < limit - 1 {
            s.update(0.5);
        }
        let h = s.height();
        s.update(0.5);
        assert_eq!(s.height(), h + 1);
    }

    #[test]
    fn lossless_regime_is_exact() {
        let mut s = sketch(512, 0b1111, 3);
        for x in (1..=100).rev() {
            s.update(f64::from(x));
        }
        assert_eq!(s.compactions(), 0);
        assert_eq!(s.rank(&50.5).value, 50);
        assert_eq!(s.quantile(0.5).unwrap(), 50.0);
        assert_eq!(s.quantile(0.0).unwrap(), 1.0);
        assert_eq!(s.quantile(1.0).unwrap(), 100.0);
        let mut small = sketch(512, 0, 0);
        for x in [4.0, 2.0, 1.0, 3.0] {
            small.update(x);
        }
        assert_eq!(small.cdf(&[0.0, 3.0, 9.0]).unwrap(), vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn empty_sketch_queries() {
        let s = sketch(64, 0, 0);
        assert_eq!(s.rank(&1.0).value, 0);
        assert_eq!(s.quantile(0.5), Err(SketchError::Empty));
        assert_eq!(s.cdf(&[1.0, 2.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn single_item_quantiles() {
        let mut s = sketch(64, 0b1111, 0);
        s.update(7.0);
        for phi in [0.0, 0.3, 1.0] {
            assert_eq!(s.quantile(phi).unwrap(), 7.0);
        }
        assert!(s.quantile(-0.1).is_err());
    }

    #[test]
    fn merge_rejects_mismatches() {
        let a = sketch(64, 0b1111, 0);
        let b = sketch(64, 0b0111, 0);
        match Sketch::merge(&a, &b) {
            Err(SketchError::Incompatible { field, .. }) => assert_eq!(field, "variant"),
            other => panic!("{other:?}"),
        }
        let c = Sketch::<f64>::new(64, 0.8, VariantFlags::ALL, 0).unwrap();
        match Sketch::merge(&a, &c) {
            Err(SketchError::Incompatible { field, .. }) => assert_eq!(field, "c"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn merge_of_lossless_sketches_is_exact() {
        let mut a = sketch(512, 0b1111, 1);
        let mut b = sketch(512, 0b1111, 2);
        for x in 0..50 {
            a.update(f64::from(x));
            b.update(f64::from(x + 50));
        }
        let m = Sketch::merge(&a, &b).unwrap();
        assert_eq!(m.n_total(), 100);
        for q in 0..=100 {
            assert_eq!(m.rank(&(f64::from(q) - 0.5)).value, q as u64);
        }
    }

    fn exact_rank(stream: &[f64], q: f64) -> u64 {
        stream.iter().filter(|x| **x < q).count() as u64
    }

    #[test]
    fn accuracy_within_bound_for_most_seeds() {
        // n = 10^4, budget 512: the failure probability at this eps is 1%.
        let n = 10_000;
        let mut stream: Vec<f64> = (0..n).map(f64::from).collect();
        let mut shuffle = SketchRng::seeded(99);
        for i in (1..stream.len()).rev() {
            stream.swap(i, shuffle.below(i as u64 + 1) as usize);
        }
        let k = k_for_budget(512, DEFAULT_C);
        let eps = epsilon_for(0.01, k, DEFAULT_C).unwrap();
        let queries: Vec<f64> = (1..10).map(|j| f64::from(j * 1000) - 0.5).collect();
        let mut failures = 0;
        let seeds = 100;
        for seed in 0..seeds {
            let mut s = sketch(512, 0b1111, seed);
            for x in &stream {
                s.update(*x);
            }
            let worst = queries
                .iter()
                .map(|q| (s.rank(q).value as f64 - exact_rank(&stream, *q) as f64).abs())
                .fold(0.0, f64::max);
            if worst > eps * n as f64 {
                failures += 1;
            }
        }
        assert!(failures <= 1, "{failures} of {seeds} seeds exceeded eps = {eps}");
    }

    proptest! {
        #[test]
        fn weight_is_conserved_and_height_bounds_n(
            stream in proptest::collection::vec(0u16..500, 0..3000),
            bits in 0u8..16,
            budget in 8usize..200,
            seed in any::<u64>(),
        ) {
            let mut s = sketch(budget, bits, seed);
            for x in &stream {
                s.update(f64::from(*x));
                prop_assert_eq!(s.stored_weight(), u128::from(s.n_total()));
                prop_assert!(u128::from(s.n_total()) < u128::from(s.k()) << s.height());
                prop_assert_eq!(s.items_n(), s.count_items());
                prop_assert_eq!(s.capacities().len(), s.num_levels());
            }
        }

        #[test]
        fn cdf_is_monotone(
            stream in proptest::collection::vec(any::<i32>(), 1..2000),
            mut queries in proptest::collection::vec(any::<i32>(), 0..50),
            seed in any::<u64>(),
        ) {
            let mut s = sketch(32, 0b1111, seed);
            for x in &stream {
                s.update(f64::from(*x));
            }
            queries.sort();
            let q: Vec<f64> = queries.into_iter().map(f64::from).collect();
            let cdf = s.cdf(&q).unwrap();
            prop_assert!(cdf.windows(2).all(|w| w[0] <= w[1]));
            prop_assert!(cdf.iter().all(|p| (0.0..=1.0).contains(p)));
        }

        #[test]
        fn lazy_never_compacts_more_than_vanilla(
            len in 0usize..5000,
            low in 0u8..8,
            seed in any::<u64>(),
        ) {
            let mut vanilla = sketch(64, low << 1, seed);
            let mut lazy = sketch(64, (low << 1) | 1, seed);
            let mut gen = SketchRng::seeded(seed ^ 0x5eed);
            for _ in 0..len {
                let x = gen.below(1 << 20) as f64;
                vanilla.update(x);
                lazy.update(x);
            }
            prop_assert!(lazy.compactions() <= vanilla.compactions());
        }
    }
}
