//! Binary sketch format, little-endian throughout.
//!
//! ```text
//! "KLL1" | flags u8 (bits 0-3 variant, 4-5 weighted mode) | codec u8
//!        | k u32 | budget u32 | H u32 | H_s u32 | c f64 | n_total u64 | items_n u64
//!        | sampler: accum u64, candidate payload if accum > 0
//!        | level count u32, then per level:
//!            h u32 | count u32 | theta marker u8 (0 unset, 1 below all, 2 value + payload)
//!            | pending direction u8 (0 none, 1 keep-even, 2 keep-odd) | sweep parity u8
//!            | sweeps u64 | items (weight-aware: u64 weight before each payload)
//!        | top runs: count u32, then (u64 multiplicity, payload) each
//!        | compactions u64 | discarded u64
//!        | rng: seed [32], stream u64, word position u128
//! ```
//!
//! A payload is a u32 byte length followed by the item's codec bytes. Level 0
//! is written sorted, so the encoding does not depend on the storage backend.

use crate::compactor::{DirectionState, KeepParity, LevelState, SweepState, Threshold};
use crate::error::{Result, SketchError};
use crate::item::{is_sorted, sort_items, Codec, Item};
use crate::rng::SketchRng;
use crate::sampler::Sampler;
use crate::sketch::{check_params, Sketch};
use crate::store::{Backend, LevelStore, Store};
use crate::variant::VariantFlags;
use crate::weighted::{Base2Sketch, WaSketch, WeightedItem, WeightedMode};

const MAGIC: &[u8; 3] = b"KLL";
const VERSION: u8 = b'1';

/// Leading fields of a serialized sketch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Header {
    pub flags: VariantFlags,
    pub mode: WeightedMode,
    pub codec: Codec,
    pub k: u32,
    pub budget: u32,
    pub height: u32,
    pub bottom_height: u32,
    pub c: f64,
    pub n_total: u64,
    pub items_n: u64,
}

/// Reads just the header, e.g. to pick the item type before decoding.
pub fn peek_header(bytes: &[u8]) -> Result<Header> {
    Reader::new(bytes).header()
}

struct Writer {
    out: Vec<u8>,
}

impl Writer {
    fn u8(&mut self, v: u8) {
        self.out.push(v);
    }
    fn u32(&mut self, v: u32) {
        self.out.extend_from_slice(&v.to_le_bytes());
    }
    fn len(&mut self, v: usize) {
        self.u32(u32::try_from(v).expect("length fits in 32 bits"));
    }
    fn u64(&mut self, v: u64) {
        self.out.extend_from_slice(&v.to_le_bytes());
    }
    fn u128(&mut self, v: u128) {
        self.out.extend_from_slice(&v.to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.out.extend_from_slice(&v.to_le_bytes());
    }
    fn payload<T: Item>(&mut self, x: &T) {
        let at = self.out.len();
        self.u32(0);
        x.encode(&mut self.out);
        let n = u32::try_from(self.out.len() - at - 4).expect("item fits in 32 bits");
        self.out[at..at + 4].copy_from_slice(&n.to_le_bytes());
    }

    #[allow(clippy::too_many_arguments)]
    fn header<T: Item>(
        &mut self,
        flags: VariantFlags,
        mode: WeightedMode,
        k: u32,
        budget: usize,
        top: u32,
        bottom: u32,
        c: f64,
        n_total: u64,
        items_n: u64,
    ) {
        self.out.extend_from_slice(MAGIC);
        self.u8(VERSION);
        self.u8(flags.bits() | (mode.to_bits() << 4));
        self.u8(T::CODEC as u8);
        self.u32(k);
        self.len(budget);
        self.u32(top);
        self.u32(bottom);
        self.f64(c);
        self.u64(n_total);
        self.u64(items_n);
    }

    fn sampler<T: Item>(&mut self, s: &Sampler<T>) {
        self.u64(s.accum());
        if let Some(x) = s.candidate() {
            self.payload(x);
        }
    }

    fn level_state<T: Item>(&mut self, st: &LevelState<T>) {
        match &st.sweep.threshold {
            Threshold::Unset => self.u8(0),
            Threshold::BelowAll => self.u8(1),
            Threshold::At(x) => {
                self.u8(2);
                self.payload(x);
            }
        }
        self.u8(match st.direction.pending {
            None => 0,
            Some(KeepParity::KeepEven) => 1,
            Some(KeepParity::KeepOdd) => 2,
        });
        self.u8(st.sweep.parity.to_bit());
        self.u64(st.sweep.sweeps);
    }

    fn runs<T: Item>(&mut self, runs: &[(T, u64)]) {
        self.len(runs.len());
        for (x, m) in runs {
            self.u64(*m);
            self.payload(x);
        }
    }

    fn trailer(&mut self, compactions: u64, discarded: u64, rng: &SketchRng) {
        self.u64(compactions);
        self.u64(discarded);
        let (seed, stream, word_pos) = rng.state();
        self.out.extend_from_slice(&seed);
        self.u64(stream);
        self.u128(word_pos);
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

fn corrupt(msg: impl Into<String>) -> SketchError {
    SketchError::Corrupt(msg.into())
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| corrupt(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().unwrap())
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.array()?))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.array()?))
    }
    fn u128(&mut self) -> Result<u128> {
        Ok(u128::from_le_bytes(self.array()?))
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.array()?))
    }
    fn payload<T: Item>(&mut self) -> Result<T> {
        let n = self.u32()? as usize;
        T::decode(self.take(n)?)
    }

    fn header(&mut self) -> Result<Header> {
        let magic = self.take(4).map_err(|_| corrupt("too short for a sketch header"))?;
        if &magic[..3] != MAGIC {
            return Err(corrupt("bad magic"));
        }
        if magic[3] != VERSION {
            return Err(corrupt(format!("unsupported version {:?}", magic[3] as char)));
        }
        let flags_byte = self.u8()?;
        if flags_byte & 0xC0 != 0 {
            return Err(corrupt(format!("unknown flag bits {flags_byte:#04x}")));
        }
        let flags = VariantFlags::from_bits(flags_byte & 0x0F);
        let mode = WeightedMode::from_bits((flags_byte >> 4) & 0x03)?;
        let codec = Codec::from_byte(self.u8()?)?;
        Ok(Header {
            flags,
            mode,
            codec,
            k: self.u32()?,
            budget: self.u32()?,
            height: self.u32()?,
            bottom_height: self.u32()?,
            c: self.f64()?,
            n_total: self.u64()?,
            items_n: self.u64()?,
        })
    }

    fn checked_header<T: Item>(&mut self) -> Result<Header> {
        let h = self.header()?;
        if h.codec != T::CODEC {
            return Err(SketchError::Incompatible {
                field: "codec",
                left: h.codec.name().into(),
                right: T::CODEC.name().into(),
            });
        }
        check_params(h.budget as usize, h.c).map_err(|e| corrupt(e.to_string()))?;
        if h.k == 0 || h.bottom_height > h.height || h.height >= 64 {
            return Err(corrupt("inconsistent heights"));
        }
        Ok(h)
    }

    fn sampler<T: Item>(&mut self, rate_exp: u32) -> Result<Sampler<T>> {
        let accum = self.u64()?;
        let candidate = if accum > 0 { Some(self.payload()?) } else { None };
        Sampler::from_parts(rate_exp, candidate, accum)
    }

    fn level_state<T: Item>(&mut self) -> Result<LevelState<T>> {
        let threshold = match self.u8()? {
            0 => Threshold::Unset,
            1 => Threshold::BelowAll,
            2 => Threshold::At(self.payload()?),
            other => return Err(corrupt(format!("threshold marker {other}"))),
        };
        let pending = match self.u8()? {
            0 => None,
            1 => Some(KeepParity::KeepEven),
            2 => Some(KeepParity::KeepOdd),
            other => return Err(corrupt(format!("direction byte {other}"))),
        };
        let parity = KeepParity::from_bit(self.u8()?)?;
        let sweeps = self.u64()?;
        Ok(LevelState {
            direction: DirectionState { pending },
            sweep: SweepState {
                threshold,
                parity,
                sweeps,
            },
        })
    }

    /// Level count and the per-level height check.
    fn level_count(&mut self, h: &Header) -> Result<usize> {
        let count = self.u32()? as usize;
        if count != (h.height - h.bottom_height + 1) as usize {
            return Err(corrupt("level count does not match heights"));
        }
        Ok(count)
    }

    fn level_head(&mut self, expected_h: u32) -> Result<usize> {
        let h = self.u32()?;
        if h != expected_h {
            return Err(corrupt(format!("expected level {expected_h}, found {h}")));
        }
        let count = self.u32()? as usize;
        if count > self.bytes.len() - self.pos {
            return Err(corrupt("level length exceeds input"));
        }
        Ok(count)
    }

    fn runs<T: Item>(&mut self) -> Result<Vec<(T, u64)>> {
        let count = self.u32()? as usize;
        if count > self.bytes.len() - self.pos {
            return Err(corrupt("run count exceeds input"));
        }
        (0..count)
            .map(|_| {
                let m = self.u64()?;
                Ok((self.payload()?, m))
            })
            .collect()
    }

    fn trailer(&mut self) -> Result<(u64, u64, SketchRng)> {
        let compactions = self.u64()?;
        let discarded = self.u64()?;
        let seed = self.array::<32>()?;
        let stream = self.u64()?;
        let word_pos = self.u128()?;
        Ok((compactions, discarded, SketchRng::from_state(seed, stream, word_pos)))
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(corrupt(format!("{} trailing bytes", self.bytes.len() - self.pos)));
        }
        Ok(())
    }
}

impl<T: Item> Sketch<T> {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer { out: Vec::new() };
        w.header::<T>(
            self.flags,
            self.mode,
            self.k,
            self.budget,
            self.top,
            self.bottom,
            self.c,
            self.n_total,
            self.items_n,
        );
        w.sampler(&self.sampler);
        w.len(self.num_levels());
        for i in 0..self.num_levels() {
            w.u32(self.bottom + i as u32);
            let mut items = self.store.level(i).to_vec();
            if i == 0 {
                sort_items(&mut items);
            }
            w.len(items.len());
            w.level_state(self.store.state(i));
            for x in &items {
                w.payload(x);
            }
        }
        w.runs(&self.top_runs);
        w.trailer(self.compactions, 0, &self.rng);
        w.out
    }

    /// Decodes onto the packed backend.
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Self::from_bytes_with(bytes, Backend::default())
    }

    pub fn from_bytes_with(bytes: &[u8], backend: Backend) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let h = r.checked_header::<T>()?;
        if h.mode == WeightedMode::WeightAware {
            return Err(SketchError::Incompatible {
                field: "weighted mode",
                left: h.mode.to_string(),
                right: "none or base2".into(),
            });
        }
        let sampler = r.sampler(h.bottom_height)?;
        let count = r.level_count(&h)?;
        let mut store = Store::new(backend, h.budget as usize + 1);
        for i in 0..count {
            let len = r.level_head(h.bottom_height + i as u32)?;
            let state = r.level_state()?;
            let items = (0..len).map(|_| r.payload()).collect::<Result<Vec<T>>>()?;
            if !is_sorted(&items) {
                return Err(corrupt(format!("level {i} is not sorted")));
            }
            store.push_level();
            store.merge_into(i, items);
            *store.state_mut(i) = state;
        }
        let runs = r.runs()?;
        if h.mode == WeightedMode::None && !runs.is_empty() {
            return Err(corrupt("top runs in an unweighted sketch"));
        }
        let (compactions, discarded, rng) = r.trailer()?;
        r.finish()?;
        if discarded != 0 {
            return Err(corrupt("discarded weight in a sketch that never discards"));
        }
        let sketch = Sketch::from_parts(
            h.k,
            h.c,
            h.budget as usize,
            h.flags,
            h.mode,
            h.height,
            h.bottom_height,
            store,
            sampler,
            runs,
            h.n_total,
            compactions,
            rng,
        );
        if sketch.items_n() != h.items_n {
            return Err(corrupt("item count does not match levels"));
        }
        if sketch.stored_weight() != u128::from(h.n_total) {
            return Err(corrupt("stored weight does not match the total"));
        }
        Ok(sketch)
    }
}

impl<T: Item> Base2Sketch<T> {
    pub fn to_bytes(&self) -> Vec<u8> {
        self.inner().to_bytes()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        Self::from_bytes_with(bytes, Backend::default())
    }

    pub fn from_bytes_with(bytes: &[u8], backend: Backend) -> Result<Self> {
        let inner = Sketch::from_bytes_with(bytes, backend)?;
        if inner.weighted_mode() != WeightedMode::Base2 {
            return Err(SketchError::Incompatible {
                field: "weighted mode",
                left: inner.weighted_mode().to_string(),
                right: WeightedMode::Base2.to_string(),
            });
        }
        Ok(Base2Sketch::from_inner(inner))
    }
}

impl<T: Item> WaSketch<T> {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer { out: Vec::new() };
        w.header::<T>(
            self.flags,
            WeightedMode::WeightAware,
            self.k,
            self.budget,
            self.top,
            self.bottom,
            self.c,
            self.n_total,
            self.items_n,
        );
        w.sampler(&self.sampler);
        w.len(self.levels.len());
        for level in &self.levels {
            w.u32(level.level);
            let mut entries = level.entries().to_vec();
            entries.sort_by(|a, b| a.item.item_cmp(&b.item));
            w.len(entries.len());
            w.level_state(&level.state);
            for e in &entries {
                w.u64(e.weight);
                w.payload(&e.item);
            }
        }
        w.runs(&self.top_runs);
        w.trailer(self.compactions, self.discarded, &self.rng);
        w.out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let h = r.checked_header::<T>()?;
        if h.mode != WeightedMode::WeightAware {
            return Err(SketchError::Incompatible {
                field: "weighted mode",
                left: h.mode.to_string(),
                right: WeightedMode::WeightAware.to_string(),
            });
        }
        let sampler = r.sampler(h.bottom_height)?;
        let count = r.level_count(&h)?;
        let mut levels = Vec::with_capacity(count);
        for i in 0..count {
            let len = r.level_head(h.bottom_height + i as u32)?;
            let state = r.level_state()?;
            let entries = (0..len)
                .map(|_| {
                    let weight = r.u64()?;
                    Ok(WeightedItem::new(r.payload()?, weight))
                })
                .collect::<Result<Vec<_>>>()?;
            levels.push((entries, state));
        }
        let runs = r.runs()?;
        let (compactions, discarded, rng) = r.trailer()?;
        r.finish()?;
        let sketch = WaSketch::from_parts(
            h.k,
            h.c,
            h.budget as usize,
            h.flags,
            h.height,
            h.bottom_height,
            levels,
            sampler,
            runs,
            h.n_total,
            discarded,
            compactions,
            rng,
        )?;
        if sketch.items_n() != h.items_n {
            return Err(corrupt("item count does not match levels"));
        }
        if sketch.stored_weight() + u128::from(discarded) != u128::from(h.n_total) {
            return Err(corrupt("stored weight does not match the total"));
        }
        Ok(sketch)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sketch::DEFAULT_C;

    fn filled(bits: u8, n: u32, seed: u64) -> Sketch<f64> {
        let mut s = Sketch::new(64, DEFAULT_C, VariantFlags::from_bits(bits), seed).unwrap();
        for i in 0..n {
            s.update(f64::from(i.wrapping_mul(7919) % 1013));
        }
        s
    }

    #[test]
    fn round_trip_preserves_everything() {
        for bits in 0..16 {
            let s = filled(bits, 5000, u64::from(bits));
            let bytes = s.to_bytes();
            let mut back = Sketch::<f64>::from_bytes(&bytes).unwrap();
            assert_eq!(back.to_bytes(), bytes);
            // Continuing both copies must stay in lockstep, RNG position included.
            let mut orig = s.clone();
            for i in 0..2000 {
                orig.update(f64::from(i));
                back.update(f64::from(i));
            }
            assert_eq!(orig.to_bytes(), back.to_bytes());
        }
    }

    #[test]
    fn empty_sketch_is_small_and_loads() {
        let s = Sketch::<f64>::new(64, DEFAULT_C, VariantFlags::ALL, 0).unwrap();
        let bytes = s.to_bytes();
        assert!(bytes.len() < 200, "{}", bytes.len());
        let back = Sketch::<f64>::from_bytes(&bytes).unwrap();
        assert!(back.is_empty());
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn corrupt_inputs_are_rejected() {
        let bytes = filled(0b1111, 3000, 1).to_bytes();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(Sketch::<f64>::from_bytes(&bad), Err(SketchError::Corrupt(_))));
        let mut bad = bytes.clone();
        bad[3] = b'2';
        assert!(matches!(Sketch::<f64>::from_bytes(&bad), Err(SketchError::Corrupt(m)) if m.contains("version")));
        for cut in [0, 3, 10, 40, bytes.len() / 2, bytes.len() - 1] {
            assert!(Sketch::<f64>::from_bytes(&bytes[..cut]).is_err(), "cut {cut}");
        }
        let mut long = bytes.clone();
        long.push(0);
        assert!(Sketch::<f64>::from_bytes(&long).is_err());
        assert!(matches!(
            Sketch::<String>::from_bytes(&bytes),
            Err(SketchError::Incompatible { field: "codec", .. })
        ));
    }

    #[test]
    fn backends_serialize_identically() {
        for bits in 0..16 {
            let flags = VariantFlags::from_bits(bits);
            let mut a = Sketch::with_backend(40, DEFAULT_C, flags, 3, Backend::List).unwrap();
            let mut b = Sketch::with_backend(40, DEFAULT_C, flags, 3, Backend::Packed).unwrap();
            for i in 0..4000u32 {
                let x = f64::from(i.wrapping_mul(2_654_435_761) >> 12);
                a.update(x);
                b.update(x);
            }
            assert_eq!(a.to_bytes(), b.to_bytes(), "variant {flags}");
        }
    }

    #[test]
    fn string_items_round_trip() {
        let mut s = Sketch::<String>::new(32, DEFAULT_C, VariantFlags::ALL, 9).unwrap();
        for i in 0..500 {
            s.update(format!("key-{:04}", (i * 37) % 500));
        }
        let back = Sketch::<String>::from_bytes(&s.to_bytes()).unwrap();
        assert_eq!(back.to_bytes(), s.to_bytes());
        assert_eq!(peek_header(&s.to_bytes()).unwrap().codec, Codec::Utf8);
    }

    #[test]
    fn weighted_sketches_round_trip() {
        let mut b2 = Base2Sketch::<f64>::new(32, DEFAULT_C, VariantFlags::ALL, 2).unwrap();
        let mut wa = WaSketch::<f64>::new(32, DEFAULT_C, VariantFlags::ALL, 2).unwrap();
        for i in 0..800u64 {
            b2.update(i as f64, 1 + (i * 31) % 300).unwrap();
            wa.update(i as f64, 1 + (i * 31) % 300).unwrap();
        }
        let b2_back = Base2Sketch::<f64>::from_bytes(&b2.to_bytes()).unwrap();
        assert_eq!(b2_back.to_bytes(), b2.to_bytes());
        let wa_back = WaSketch::<f64>::from_bytes(&wa.to_bytes()).unwrap();
        assert_eq!(wa_back.to_bytes(), wa.to_bytes());
        assert_eq!(wa_back.rank(&400.0), wa.rank(&400.0));
        assert!(Sketch::<f64>::from_bytes(&wa.to_bytes()).is_err());
        assert!(WaSketch::<f64>::from_bytes(&b2.to_bytes()).is_err());
        assert_eq!(peek_header(&wa.to_bytes()).unwrap().mode, WeightedMode::WeightAware);
    }
}
