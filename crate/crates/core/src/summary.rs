//! Query surface shared by every sketch flavour.

use crate::error::{Result, SketchError};
use crate::item::{is_sorted, Item};

/// Estimated weight strictly below a query, out of the total weight `n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RankEstimate {
    pub value: u64,
    pub n: u64,
}

impl RankEstimate {
    /// `value / n`, or 0 for an empty summary.
    pub fn fraction(self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.value as f64 / self.n as f64
        }
    }
}

/// Stored items sorted with inclusive cumulative weights.
#[derive(Debug, Clone, Default)]
pub struct SortedView<T> {
    items: Vec<T>,
    cumulative: Vec<u64>,
}

impl<T: Item> SortedView<T> {
    pub fn new(mut weighted: Vec<(T, u64)>) -> Self {
        weighted.sort_by(|a, b| a.0.item_cmp(&b.0));
        let mut total = 0u64;
        let (items, cumulative) = weighted
            .into_iter()
            .map(|(x, w)| {
                total += w;
                (x, total)
            })
            .unzip();
        Self { items, cumulative }
    }

    pub fn total(&self) -> u64 {
        self.cumulative.last().copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn rank(&self, q: &T) -> RankEstimate {
        let idx = self.items.partition_point(|x| x.less(q));
        RankEstimate {
            value: if idx == 0 { 0 } else { self.cumulative[idx - 1] },
            n: self.total(),
        }
    }

    /// First stored item whose inclusive cumulative weight reaches
    /// `ceil(phi * n)`; `phi = 0` gives the minimum and `phi = 1` the maximum.
    pub fn quantile(&self, phi: f64) -> Result<T> {
        check_fraction(phi)?;
        if self.items.is_empty() {
            return Err(SketchError::Empty);
        }
        let target = (phi * self.total() as f64).ceil() as u64;
        let idx = self
            .cumulative
            .partition_point(|&c| c < target)
            .min(self.items.len() - 1);
        Ok(self.items[idx].clone())
    }

    /// `rank(q) / n` for each query, in one pass. Queries must be ascending.
    pub fn cdf(&self, queries: &[T]) -> Result<Vec<f64>> {
        if !is_sorted(queries) {
            return Err(SketchError::UnsortedQueries);
        }
        let total = self.total();
        let mut out = Vec::with_capacity(queries.len());
        let mut idx = 0;
        for q in queries {
            while idx < self.items.len() && self.items[idx].less(q) {
                idx += 1;
            }
            let below = if idx == 0 { 0 } else { self.cumulative[idx - 1] };
            out.push(if total == 0 { 0.0 } else { below as f64 / total as f64 });
        }
        Ok(out)
    }
}

pub(crate) fn check_fraction(phi: f64) -> Result<()> {
    if (0.0..=1.0).contains(&phi) {
        Ok(())
    } else {
        Err(SketchError::FractionOutOfRange(phi))
    }
}

/// Anything that can answer rank, quantile and CDF queries over a weighted
/// multiset of stored items.
pub trait QuantileSummary<T: Item> {
    /// Total weight observed so far.
    fn total_weight(&self) -> u64;

    /// Every stored item with its weight, in no particular order.
    fn weighted_items(&self) -> Vec<(T, u64)>;

    fn sorted_view(&self) -> SortedView<T> {
        SortedView::new(self.weighted_items())
    }

    fn rank(&self, q: &T) -> RankEstimate {
        let value = self
            .weighted_items()
            .into_iter()
            .filter(|(x, _)| x.less(q))
            .map(|(_, w)| w)
            .sum();
        RankEstimate {
            value,
            n: self.total_weight(),
        }
    }

    fn quantile(&self, phi: f64) -> Result<T> {
        self.sorted_view().quantile(phi)
    }

    fn cdf(&self, queries: &[T]) -> Result<Vec<f64>> {
        self.sorted_view().cdf(queries)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn view(pairs: &[(f64, u64)]) -> SortedView<f64> {
        SortedView::new(pairs.to_vec())
    }

    #[test]
    fn weighted_median_lands_on_heavy_item() {
        let v = view(&[(1.0, 1), (2.0, 1), (3.0, 1), (4.0, 97)]);
        assert_eq!(v.quantile(0.5).unwrap(), 4.0);
        assert_eq!(v.quantile(0.0).unwrap(), 1.0);
        assert_eq!(v.quantile(1.0).unwrap(), 4.0);
    }

    #[test]
    fn lower_quantile_convention() {
        let v = SortedView::new((1..=100).map(|i| (f64::from(i), 1)).collect());
        assert_eq!(v.quantile(0.5).unwrap(), 50.0);
        assert_eq!(v.quantile(0.505).unwrap(), 51.0);
        assert_eq!(v.quantile(0.01).unwrap(), 1.0);
    }

    #[test]
    fn rank_counts_strictly_smaller() {
        let v = view(&[(5.0, 7)]);
        assert_eq!(v.rank(&5.0).value, 0);
        assert_eq!(v.rank(&6.0), RankEstimate { value: 7, n: 7 });
    }

    #[test]
    fn cdf_example_and_errors() {
        let v = SortedView::new((1..=4).map(|i| (f64::from(i), 1)).collect());
        assert_eq!(v.cdf(&[0.0, 3.0, 9.0]).unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(v.cdf(&[]).unwrap(), Vec::<f64>::new());
        assert_eq!(v.cdf(&[2.0, 1.0]), Err(SketchError::UnsortedQueries));
    }

    #[test]
    fn empty_and_out_of_range() {
        let v = view(&[]);
        assert_eq!(v.quantile(0.5), Err(SketchError::Empty));
        assert_eq!(v.cdf(&[1.0]).unwrap(), vec![0.0]);
        let v = view(&[(1.0, 1)]);
        assert!(matches!(v.quantile(1.5), Err(SketchError::FractionOutOfRange(_))));
        assert!(v.quantile(f64::NAN).is_err());
    }
}
