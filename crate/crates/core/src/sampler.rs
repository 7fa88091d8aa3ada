//! Weighted reservoir at the bottom of the hierarchy.
//!
//! Items lighter than `M = 2^rate_exp` accumulate into a single candidate.
//! Whenever the accumulated weight reaches exactly `M`, one item is emitted
//! with weight `M`, chosen in proportion to the weight each side contributed.
//! Offered weight is therefore conserved exactly: everything offered is either
//! emitted or still sitting in `accum`.

use crate::error::{Result, SketchError};
use crate::rng::SketchRng;

#[derive(Debug, Clone, PartialEq)]
pub struct Sampler<T> {
    rate_exp: u32,
    candidate: Option<T>,
    accum: u64,
}

impl<T: Clone> Default for Sampler<T> {
    fn default() -> Self {
        Self::new(0)
    }
}

impl<T: Clone> Sampler<T> {
    pub fn new(rate_exp: u32) -> Self {
        assert!(rate_exp < 64, "sampler rate 2^{rate_exp} does not fit in 64 bits");
        Self {
            rate_exp,
            candidate: None,
            accum: 0,
        }
    }

    pub(crate) fn from_parts(rate_exp: u32, candidate: Option<T>, accum: u64) -> Result<Self> {
        if rate_exp >= 64 || accum >= 1u64 << rate_exp || candidate.is_some() != (accum > 0) {
            return Err(SketchError::Corrupt(format!(
                "sampler accum {accum} inconsistent with rate 2^{rate_exp}"
            )));
        }
        Ok(Self {
            rate_exp,
            candidate,
            accum,
        })
    }

    pub fn rate_exp(&self) -> u32 {
        self.rate_exp
    }

    /// Emission weight `M`.
    pub fn rate(&self) -> u64 {
        1u64 << self.rate_exp
    }

    pub fn accum(&self) -> u64 {
        self.accum
    }

    pub fn candidate(&self) -> Option<&T> {
        self.candidate.as_ref()
    }

    /// Feeds `item` with weight `w`, appending each emission (of weight `M`)
    /// to `out`.
    ///
    /// The weight is consumed in chunks that never overfill the reservoir. A
    /// chunk that completes it emits the old candidate with probability
    /// `accum / M` and the new item otherwise; a final partial chunk replaces
    /// the candidate with probability `chunk / (accum + chunk)`. A coin is only
    /// drawn when both sides carry weight.
    pub fn offer_into(
        &mut self,
        item: T,
        mut w: u64,
        rng: &mut SketchRng,
        out: &mut Vec<T>,
    ) -> Result<()> {
        if w == 0 {
            return Err(SketchError::ZeroWeight);
        }
        let m = self.rate();
        while w > 0 {
            let chunk = w.min(m - self.accum);
            w -= chunk;
            if self.accum + chunk == m {
                let emitted = match self.candidate.take() {
                    Some(old) if rng.below(m) < self.accum => old,
                    _ => item.clone(),
                };
                out.push(emitted);
                self.accum = 0;
            } else {
                let replace = self.accum == 0 || rng.below(self.accum + chunk) < chunk;
                if replace {
                    self.candidate = Some(item.clone());
                }
                self.accum += chunk;
            }
        }
        Ok(())
    }

    pub fn offer(&mut self, item: T, w: u64, rng: &mut SketchRng) -> Result<Vec<T>> {
        let mut out = Vec::new();
        self.offer_into(item, w, rng, &mut out)?;
        Ok(out)
    }

    /// Raises `M` to `2^new_exp`; the candidate and its weight stay put.
    pub fn raise_rate(&mut self, new_exp: u32) -> Result<()> {
        if new_exp < self.rate_exp {
            return Err(SketchError::RateMayOnlyGrow {
                current: self.rate_exp,
                requested: new_exp,
            });
        }
        if new_exp >= 64 {
            return Err(SketchError::WeightOverflow);
        }
        self.rate_exp = new_exp;
        Ok(())
    }
}
