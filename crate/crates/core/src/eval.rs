//! Synthetic streams, an exact oracle, the max-quantile-error metric and an
//! experiment runner that writes one CSV row per cell.

use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Result, SketchError};
use crate::item::{is_sorted, sort_items, Item};
use crate::sketch::{Sketch, DEFAULT_C};
use crate::store::Backend;
use crate::summary::QuantileSummary;
use crate::variant::VariantFlags;
use crate::weighted::{Base2Sketch, WaSketch, WeightedMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StreamKind {
    Sorted,
    Shuffled,
    Trending,
    Brownian,
    File,
}

impl fmt::Display for StreamKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StreamKind::Sorted => "sorted",
            StreamKind::Shuffled => "shuffled",
            StreamKind::Trending => "trending",
            StreamKind::Brownian => "brownian",
            StreamKind::File => "file",
        })
    }
}

impl FromStr for StreamKind {
    type Err = SketchError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sorted" => Ok(StreamKind::Sorted),
            "shuffled" => Ok(StreamKind::Shuffled),
            "trending" => Ok(StreamKind::Trending),
            "brownian" => Ok(StreamKind::Brownian),
            "file" => Ok(StreamKind::File),
            other => Err(SketchError::InvalidParameter(format!("unknown stream kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamSpec {
    pub kind: StreamKind,
    pub n: usize,
    pub seed: u64,
    /// Noise amplitude `A` (trending).
    pub noise: f64,
    /// Trend amplitude `B` (trending).
    pub trend: f64,
    /// Step scale (brownian).
    pub step: f64,
    /// Weights are drawn uniformly from `1..=max_weight`; 1 means unit weights.
    pub max_weight: u64,
    pub path: Option<PathBuf>,
}

impl StreamSpec {
    pub fn new(kind: StreamKind, n: usize) -> Self {
        Self {
            kind,
            n,
            seed: 0,
            noise: 1.0,
            trend: 1.0,
            step: 1.0,
            max_weight: 1,
            path: None,
        }
    }

    pub fn sorted(n: usize) -> Self {
        Self::new(StreamKind::Sorted, n)
    }

    pub fn shuffled(n: usize, seed: u64) -> Self {
        Self::new(StreamKind::Shuffled, n).with_seed(seed)
    }

    pub fn trending(n: usize, trend: f64, noise: f64, seed: u64) -> Self {
        Self {
            trend,
            noise,
            ..Self::new(StreamKind::Trending, n).with_seed(seed)
        }
    }

    pub fn brownian(n: usize, step: f64, seed: u64) -> Self {
        Self {
            step,
            ..Self::new(StreamKind::Brownian, n).with_seed(seed)
        }
    }

    pub fn file(path: impl Into<PathBuf>) -> Self {
        Self {
            path: Some(path.into()),
            ..Self::new(StreamKind::File, 0)
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_max_weight(mut self, max_weight: u64) -> Self {
        self.max_weight = max_weight;
        self
    }

    /// True when every seed yields the same multiset, so one oracle serves all trials.
    fn seed_invariant(&self) -> bool {
        matches!(self.kind, StreamKind::Sorted | StreamKind::Shuffled) && self.max_weight <= 1
    }
}

/// Generates the items of a stream; deterministic for a given `StreamSpec`.
pub fn gen_stream(spec: &StreamSpec) -> Result<Vec<f64>> {
    let n = spec.n;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut centred = move || rng.random::<f64>() - 0.5;
    Ok(match spec.kind {
        StreamKind::Sorted => (1..=n).map(|i| i as f64).collect(),
        StreamKind::Shuffled => {
            let mut v: Vec<f64> = (1..=n).map(|i| i as f64).collect();
            v.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
            v
        }
        StreamKind::Trending => (1..=n)
            .map(|t| spec.trend * t as f64 / n as f64 + spec.noise * centred())
            .collect(),
        StreamKind::Brownian => {
            let mut s = 0.0;
            (0..n)
                .map(|_| {
                    s += spec.step * centred();
                    s
                })
                .collect()
        }
        StreamKind::File => {
            let path = spec
                .path
                .as_ref()
                .ok_or_else(|| SketchError::InvalidParameter("file stream without a path".into()))?;
            let file = std::fs::File::open(path)
                .map_err(|e| SketchError::Io(format!("{}: {e}", path.display())))?;
            read_items(BufReader::new(file))?
        }
    })
}

/// Weights for a stream; all ones unless `max_weight > 1`.
pub fn gen_weights(spec: &StreamSpec, len: usize) -> Vec<u64> {
    if spec.max_weight <= 1 {
        return vec![1; len];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x9e37_79b9_7f4a_7c15);
    (0..len).map(|_| rng.random_range(1..=spec.max_weight)).collect()
}

/// One item per non-blank line.
pub fn read_items<T: Item>(reader: impl BufRead) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let text = line.trim_end_matches('\r');
        if text.trim().is_empty() {
            continue;
        }
        out.push(T::parse_text(text).map_err(|e| SketchError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

/// Weighted records `<weight>\t<item>`; a line without a tab has weight 1.
pub fn read_weighted<T: Item>(reader: impl BufRead) -> Result<Vec<(T, u64)>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let text = line.trim_end_matches('\r');
        if text.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| SketchError::Parse {
            line: i + 1,
            message,
        };
        let (w, item) = match text.split_once('\t') {
            Some((w, item)) => {
                let w: u64 = w
                    .trim()
                    .parse()
                    .map_err(|e| parse_err(format!("bad weight {w:?}: {e}")))?;
                if w == 0 {
                    return Err(parse_err("weight must be at least 1".into()));
                }
                (w, item)
            }
            None => (1, text),
        };
        out.push((T::parse_text(item).map_err(|e| parse_err(e.to_string()))?, w));
    }
    Ok(out)
}

/// Exact ranks over a fully retained weighted multiset.
#[derive(Debug, Clone)]
pub struct ExactOracle<T> {
    items: Vec<T>,
    /// Inclusive cumulative weights; `None` for unit weights.
    cumulative: Option<Vec<u64>>,
}

impl<T: Item> ExactOracle<T> {
    pub fn new(mut items: Vec<T>) -> Self {
        sort_items(&mut items);
        Self {
            items,
            cumulative: None,
        }
    }

    pub fn weighted(mut pairs: Vec<(T, u64)>) -> Self {
        pairs.sort_by(|a, b| a.0.item_cmp(&b.0));
        let mut total = 0;
        let (items, cumulative) = pairs
            .into_iter()
            .map(|(x, w)| {
                total += w;
                (x, total)
            })
            .unzip();
        Self {
            items,
            cumulative: Some(cumulative),
        }
    }

    fn cum(&self, idx: usize) -> u64 {
        match &self.cumulative {
            None => idx as u64,
            Some(c) => {
                if idx == 0 {
                    0
                } else {
                    c[idx - 1]
                }
            }
        }
    }

    pub fn total(&self) -> u64 {
        self.cum(self.items.len())
    }

    /// Weight strictly below `q`.
    pub fn rank(&self, q: &T) -> u64 {
        self.cum(self.items.partition_point(|x| x.less(q)))
    }

    /// Same lower-quantile convention as the sketches.
    pub fn quantile(&self, phi: f64) -> Result<T> {
        crate::summary::check_fraction(phi)?;
        if self.items.is_empty() {
            return Err(SketchError::Empty);
        }
        let target = (phi * self.total() as f64).ceil() as u64;
        let idx = match &self.cumulative {
            None => (target as usize).saturating_sub(1),
            Some(c) => c.partition_point(|&w| w < target),
        };
        Ok(self.items[idx.min(self.items.len() - 1)].clone())
    }
}

/// Largest normalized rank deviation over `q_count` evenly spaced quantile
/// points `(j + 1/2) / q_count` of the exact distribution.
pub fn max_quantile_error<T: Item, S: QuantileSummary<T>>(
    sketch: &S,
    oracle: &ExactOracle<T>,
    q_count: usize,
) -> Result<f64> {
    if q_count < 1 {
        return Err(SketchError::InvalidParameter("q_count must be at least 1".into()));
    }
    let total = oracle.total();
    if total == 0 {
        return Ok(0.0);
    }
    let queries = (0..q_count)
        .map(|j| oracle.quantile((j as f64 + 0.5) / q_count as f64))
        .collect::<Result<Vec<T>>>()?;
    debug_assert!(is_sorted(&queries));
    let estimated = sketch.cdf(&queries)?;
    Ok(queries
        .iter()
        .zip(estimated)
        .map(|(q, est)| (est - oracle.rank(q) as f64 / total as f64).abs())
        .fold(0.0, f64::max))
}

/// One sketch configuration in an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SketchKind {
    pub flags: VariantFlags,
    pub mode: WeightedMode,
}

impl SketchKind {
    pub fn plain(flags: VariantFlags) -> Self {
        Self {
            flags,
            mode: WeightedMode::None,
        }
    }
}

impl fmt::Display for SketchKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.mode {
            WeightedMode::None => write!(f, "{}", self.flags),
            mode => write!(f, "{}-{}", self.flags, mode),
        }
    }
}

/// Result of feeding one stream through one sketch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialOutcome {
    pub max_err: f64,
    pub compactions: u64,
    pub discarded: u64,
}

/// Builds the sketch `kind`, feeds the weighted stream and scores it.
#[allow(clippy::too_many_arguments)]
pub fn run_trial(
    kind: SketchKind,
    budget: usize,
    c: f64,
    backend: Backend,
    seed: u64,
    items: &[f64],
    weights: &[u64],
    oracle: &ExactOracle<f64>,
    q_count: usize,
) -> Result<TrialOutcome> {
    match kind.mode {
        WeightedMode::None => {
            let mut s = Sketch::with_backend(budget, c, kind.flags, seed, backend)?;
            for (x, w) in items.iter().zip(weights) {
                for _ in 0..*w {
                    s.update(*x);
                }
            }
            Ok(TrialOutcome {
                max_err: max_quantile_error(&s, oracle, q_count)?,
                compactions: s.compactions(),
                discarded: 0,
            })
        }
        WeightedMode::Base2 => {
            let mut s = Base2Sketch::with_backend(budget, c, kind.flags, seed, backend)?;
            for (x, w) in items.iter().zip(weights) {
                s.update(*x, *w)?;
            }
            Ok(TrialOutcome {
                max_err: max_quantile_error(&s, oracle, q_count)?,
                compactions: s.inner().compactions(),
                discarded: 0,
            })
        }
        WeightedMode::WeightAware => {
            let mut s = WaSketch::new(budget, c, kind.flags, seed)?;
            for (x, w) in items.iter().zip(weights) {
                s.update(*x, *w)?;
            }
            Ok(TrialOutcome {
                max_err: max_quantile_error(&s, oracle, q_count)?,
                compactions: s.compactions(),
                discarded: s.discarded(),
            })
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub kinds: Vec<SketchKind>,
    pub budgets: Vec<usize>,
    pub streams: Vec<StreamSpec>,
    pub trials: usize,
    pub q_count: usize,
    pub c: f64,
    pub backend: Backend,
    pub master_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kinds: vec![SketchKind::plain(VariantFlags::ALL)],
            budgets: vec![512],
            streams: vec![StreamSpec::shuffled(100_000, 0)],
            trials: 10,
            q_count: 1000,
            c: DEFAULT_C,
            backend: Backend::Packed,
            master_seed: 0,
        }
    }
}

/// One CSV row: a (sketch kind, budget, stream) cell aggregated over trials.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalRecord {
    pub variant: String,
    pub budget: usize,
    pub stream_kind: String,
    pub n: usize,
    pub trials: usize,
    pub mean_max_err: f64,
    pub p95_max_err: f64,
    /// Mean compactions per trial.
    pub compactions: f64,
    /// Mean discarded weight per trial.
    pub discarded_weight: f64,
}

fn mix(a: u64, b: u64) -> u64 {
    // splitmix64 finaliser over the pair
    let mut z = a ^ b.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Nearest-rank percentile of a non-empty sample.
pub fn percentile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * v.len() as f64).ceil() as usize;
    v[rank.clamp(1, v.len()) - 1]
}

fn aggregate(kind: SketchKind, budget: usize, spec: &StreamSpec, n: usize, outcomes: &[TrialOutcome]) -> EvalRecord {
    let t = outcomes.len() as f64;
    let errs: Vec<f64> = outcomes.iter().map(|o| o.max_err).collect();
    EvalRecord {
        variant: kind.to_string(),
        budget,
        stream_kind: spec.kind.to_string(),
        n,
        trials: outcomes.len(),
        mean_max_err: errs.iter().sum::<f64>() / t,
        p95_max_err: percentile(&errs, 95.0),
        compactions: outcomes.iter().map(|o| o.compactions as f64).sum::<f64>() / t,
        discarded_weight: outcomes.iter().map(|o| o.discarded as f64).sum::<f64>() / t,
    }
}

/// Runs every (kind, budget, stream) cell for `trials` trials.
///
/// Within a trial all kinds see the same stream, and trial `t` of a stream
/// uses the same stream seed for every budget. Trials run in parallel; the
/// records are deterministic given the master seed. `sink` receives each
/// record as soon as its (stream, budget) group finishes.
pub fn run_experiment(
    config: &ExperimentConfig,
    mut sink: impl FnMut(&EvalRecord) -> Result<()>,
) -> Result<Vec<EvalRecord>> {
    if config.trials == 0 {
        return Err(SketchError::InvalidParameter("trials must be at least 1".into()));
    }
    let mut records = Vec::new();
    for (si, spec) in config.streams.iter().enumerate() {
        let shared_oracle = if spec.seed_invariant() {
            Some(ExactOracle::new(gen_stream(spec)?))
        } else {
            None
        };
        for &budget in &config.budgets {
            let per_trial: Vec<(usize, Vec<TrialOutcome>)> = (0..config.trials)
                .into_par_iter()
                .map(|t| {
                    let stream_seed = mix(mix(config.master_seed, spec.seed), t as u64);
                    let trial_spec = spec.clone().with_seed(stream_seed);
                    let items = gen_stream(&trial_spec)?;
                    let weights = gen_weights(&trial_spec, items.len());
                    let own_oracle;
                    let oracle = match &shared_oracle {
                        Some(o) => o,
                        None => {
                            own_oracle = ExactOracle::weighted(
                                items.iter().copied().zip(weights.iter().copied()).collect(),
                            );
                            &own_oracle
                        }
                    };
                    let sketch_seed = mix(mix(config.master_seed ^ 0x5eed, si as u64), t as u64);
                    let outcomes = config
                        .kinds
                        .iter()
                        .map(|kind| {
                            run_trial(
                                *kind,
                                budget,
                                config.c,
                                config.backend,
                                sketch_seed,
                                &items,
                                &weights,
                                oracle,
                                config.q_count,
                            )
                        })
                        .collect::<Result<Vec<_>>>()?;
                    Ok((items.len(), outcomes))
                })
                .collect::<Result<Vec<_>>>()?;
            let n = per_trial.first().map_or(0, |(n, _)| *n);
            for (ki, kind) in config.kinds.iter().enumerate() {
                let outcomes: Vec<TrialOutcome> = per_trial.iter().map(|(_, o)| o[ki]).collect();
                let record = aggregate(*kind, budget, spec, n, &outcomes);
                sink(&record)?;
                records.push(record);
            }
        }
    }
    Ok(records)
}

/// Writes records as CSV with a header row.
pub fn write_csv<W: Write>(records: &[EvalRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r).map_err(|e| SketchError::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Incremental CSV writer for [`run_experiment`]'s sink.
pub struct CsvSink<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> CsvSink<W> {
    pub fn new(out: W) -> Self {
        Self {
            inner: csv::Writer::from_writer(out),
        }
    }

    pub fn write(&mut self, record: &EvalRecord) -> Result<()> {
        self.inner
            .serialize(record)
            .map_err(|e| SketchError::Io(e.to_string()))?;
        self.inner.flush()?;
        Ok(())
    }
}
