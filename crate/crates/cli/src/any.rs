use kll_core::{
    Backend, Base2Sketch, Item, QuantileSummary, Result, Sketch, SketchError, VariantFlags,
    WaSketch, WeightedMode,
};

/// A sketch of any weighted mode over items of type `T`.
pub enum AnySketch<T> {
    Plain(Sketch<T>),
    Base2(Base2Sketch<T>),
    WeightAware(WaSketch<T>),
}

pub struct Params {
    pub budget: usize,
    pub c: f64,
    pub flags: VariantFlags,
    pub seed: u64,
    pub backend: Backend,
    pub mode: WeightedMode,
}

impl<T: Item> AnySketch<T> {
    pub fn new(p: &Params) -> Result<Self> {
        Ok(match p.mode {
            WeightedMode::None => {
                AnySketch::Plain(Sketch::with_backend(p.budget, p.c, p.flags, p.seed, p.backend)?)
            }
            WeightedMode::Base2 => AnySketch::Base2(Base2Sketch::with_backend(
                p.budget, p.c, p.flags, p.seed, p.backend,
            )?),
            WeightedMode::WeightAware => {
                AnySketch::WeightAware(WaSketch::new(p.budget, p.c, p.flags, p.seed)?)
            }
        })
    }

    pub fn update(&mut self, item: T, w: u64) -> Result<()> {
        match self {
            AnySketch::Plain(s) => {
                if w == 0 {
                    return Err(SketchError::ZeroWeight);
                }
                for _ in 1..w {
                    s.update(item.clone());
                }
                s.update(item);
                Ok(())
            }
            AnySketch::Base2(s) => s.update(item, w),
            AnySketch::WeightAware(s) => s.update(item, w),
        }
    }

    pub fn from_bytes(bytes: &[u8], mode: WeightedMode, backend: Backend) -> Result<Self> {
        Ok(match mode {
            WeightedMode::None => AnySketch::Plain(Sketch::from_bytes_with(bytes, backend)?),
            WeightedMode::Base2 => AnySketch::Base2(Base2Sketch::from_bytes_with(bytes, backend)?),
            WeightedMode::WeightAware => AnySketch::WeightAware(WaSketch::from_bytes(bytes)?),
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        match self {
            AnySketch::Plain(s) => s.to_bytes(),
            AnySketch::Base2(s) => s.to_bytes(),
            AnySketch::WeightAware(s) => s.to_bytes(),
        }
    }

    pub fn merge(&self, other: &Self) -> Result<Self> {
        match (self, other) {
            (AnySketch::Plain(a), AnySketch::Plain(b)) => Ok(AnySketch::Plain(Sketch::merge(a, b)?)),
            (AnySketch::Base2(a), AnySketch::Base2(b)) => {
                Ok(AnySketch::Base2(Base2Sketch::merge(a, b)?))
            }
            (AnySketch::WeightAware(a), AnySketch::WeightAware(b)) => {
                Ok(AnySketch::WeightAware(WaSketch::merge(a, b)?))
            }
            (a, b) => Err(SketchError::Incompatible {
                field: "weighted mode",
                left: a.mode().to_string(),
                right: b.mode().to_string(),
            }),
        }
    }

    pub fn mode(&self) -> WeightedMode {
        match self {
            AnySketch::Plain(_) => WeightedMode::None,
            AnySketch::Base2(_) => WeightedMode::Base2,
            AnySketch::WeightAware(_) => WeightedMode::WeightAware,
        }
    }

    pub fn summary(&self) -> &dyn QuantileSummary<T> {
        match self {
            AnySketch::Plain(s) => s,
            AnySketch::Base2(s) => s,
            AnySketch::WeightAware(s) => s,
        }
    }

    /// `n, H, H_s, items_n, compactions` as a single line.
    pub fn stats(&self) -> String {
        let (n, h, hs, items, comp) = match self {
            AnySketch::Plain(s) => (s.n_total(), s.height(), s.bottom_height(), s.items_n(), s.compactions()),
            AnySketch::Base2(s) => {
                let s = s.inner();
                (s.n_total(), s.height(), s.bottom_height(), s.items_n(), s.compactions())
            }
            AnySketch::WeightAware(s) => {
                (s.n_total(), s.height(), s.bottom_height(), s.items_n(), s.compactions())
            }
        };
        let mut line = format!("n={n} H={h} H_s={hs} items_n={items} compactions={comp}");
        if let AnySketch::WeightAware(s) = self {
            line.push_str(&format!(" discarded={}", s.discarded()));
        }
        line
    }

    /// Stored items per level, bottom first.
    pub fn level_sizes(&self) -> Vec<usize> {
        match self {
            AnySketch::Plain(s) => (0..s.num_levels()).map(|i| s.level(i).len()).collect(),
            AnySketch::Base2(s) => {
                let s = s.inner();
                (0..s.num_levels()).map(|i| s.level(i).len()).collect()
            }
            AnySketch::WeightAware(s) => s.levels().iter().map(|l| l.len()).collect(),
        }
    }
}
