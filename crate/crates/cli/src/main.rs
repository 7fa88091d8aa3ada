mod any;

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kll_core::eval::{self, CsvSink, ExperimentConfig, SketchKind, StreamKind, StreamSpec};
use kll_core::{
    peek_header, Backend, Codec, Item, Result, SketchError, VariantFlags, WeightedMode, DEFAULT_C,
};

use crate::any::{AnySketch, Params};

#[derive(Parser)]
#[command(name = "kll", version, about = "Streaming quantile sketches")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Stream items into a sketch and write it to a file.
    Build(BuildArgs),
    /// Answer quantile, rank or CDF queries from a sketch file.
    Query(QueryArgs),
    /// Left-fold merge of two or more sketch files.
    Merge(MergeArgs),
    /// Run an error-vs-size experiment matrix and emit CSV.
    Eval(EvalArgs),
    /// Describe a sketch file.
    Info(InfoArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum CodecArg {
    F64,
    String,
}

impl CodecArg {
    fn codec(self) -> Codec {
        match self {
            CodecArg::F64 => Codec::F64,
            CodecArg::String => Codec::Utf8,
        }
    }
}

#[derive(Args)]
struct BuildArgs {
    #[arg(long, default_value_t = 512)]
    budget: usize,
    #[arg(long, default_value_t = DEFAULT_C)]
    c: f64,
    /// Four 0/1 digits: lazy, anti-correlated, spreading, sweep.
    #[arg(long, default_value = "1111")]
    variant: VariantFlags,
    #[arg(long, default_value = "packed")]
    backend: Backend,
    /// none, base2 or weight-aware. Weighted input lines are `<weight>\t<item>`.
    #[arg(long, default_value = "none")]
    weighted: WeightedMode,
    #[arg(long, value_enum, default_value = "f64")]
    codec: CodecArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Input stream, one item per line; `-` reads standard input.
    #[arg(long = "in", default_value = "-")]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct QueryArgs {
    sketch: PathBuf,
    /// Comma-separated fractions in [0, 1].
    #[arg(long, value_delimiter = ',')]
    quantiles: Vec<f64>,
    /// Comma-separated items; prints rank / n for each.
    #[arg(long, value_delimiter = ',')]
    ranks: Vec<String>,
    /// File of query items, one per line; prints one CDF value per line.
    #[arg(long)]
    cdf: Option<PathBuf>,
    /// Expected item codec; a mismatch with the sketch is an error.
    #[arg(long, value_enum)]
    codec: Option<CodecArg>,
}

#[derive(Args)]
struct MergeArgs {
    #[arg(required = true, num_args = 2..)]
    sketches: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "packed")]
    backend: Backend,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, value_delimiter = ',', default_value = "0000,1111")]
    variants: Vec<VariantFlags>,
    /// Weighted modes to run for every variant.
    #[arg(long, value_delimiter = ',', default_value = "none")]
    modes: Vec<WeightedMode>,
    #[arg(long, value_delimiter = ',', default_value = "256,512,1024")]
    budgets: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "shuffled")]
    streams: Vec<StreamKind>,
    #[arg(long, default_value_t = 100_000)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value_t = 1000)]
    q_count: usize,
    #[arg(long, default_value_t = DEFAULT_C)]
    c: f64,
    #[arg(long, default_value = "packed")]
    backend: Backend,
    /// Master seed; every cell and trial seed derives from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Trend amplitude B of trending streams.
    #[arg(long, default_value_t = 1.0)]
    trend: f64,
    /// Noise amplitude A of trending streams.
    #[arg(long, default_value_t = 1.0)]
    noise: f64,
    /// Step scale of brownian streams.
    #[arg(long, default_value_t = 1.0)]
    step: f64,
    /// Weights drawn uniformly from 1..=max-weight.
    #[arg(long, default_value_t = 1)]
    max_weight: u64,
    /// Item file for the `file` stream kind.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    /// CSV destination; standard output by default.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InfoArgs {
    sketch: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Build(args) => match args.codec {
            CodecArg::F64 => build::<f64>(&args),
            CodecArg::String => build::<String>(&args),
        },
        Command::Query(args) => {
            let bytes = read_file(&args.sketch)?;
            let header = peek_header(&bytes)?;
            if let Some(want) = args.codec {
                if want.codec() != header.codec {
                    return Err(SketchError::Incompatible {
                        field: "codec",
                        left: header.codec.name().into(),
                        right: want.codec().name().into(),
                    });
                }
            }
            match header.codec {
                Codec::F64 => query::<f64>(&bytes, header.mode, &args),
                Codec::Utf8 => query::<String>(&bytes, header.mode, &args),
            }
        }
        Command::Merge(args) => {
            let first = read_file(&args.sketches[0])?;
            let header = peek_header(&first)?;
            match header.codec {
                Codec::F64 => merge::<f64>(first, header.mode, &args),
                Codec::Utf8 => merge::<String>(first, header.mode, &args),
            }
        }
        Command::Eval(args) => run_eval(&args),
        Command::Info(args) => {
            let bytes = read_file(&args.sketch)?;
            let header = peek_header(&bytes)?;
            match header.codec {
                Codec::F64 => info::<f64>(&bytes, &args.sketch),
                Codec::Utf8 => info::<String>(&bytes, &args.sketch),
            }
        }
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| SketchError::Io(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| SketchError::Io(format!("{}: {e}", path.display())))
}

fn open_input(path: &Path) -> Result<Box<dyn BufRead>> {
    if path == Path::new("-") {
        return Ok(Box::new(BufReader::new(io::stdin())));
    }
    let file = File::open(path).map_err(|e| SketchError::Io(format!("{}: {e}", path.display())))?;
    Ok(Box::new(BufReader::new(file)))
}

fn build<T: Item>(args: &BuildArgs) -> Result<()> {
    let params = Params {
        budget: args.budget,
        c: args.c,
        flags: args.variant,
        seed: args.seed,
        backend: args.backend,
        mode: args.weighted,
    };
    let mut sketch = AnySketch::<T>::new(&params)?;
    let input = open_input(&args.input)?;
    if args.weighted == WeightedMode::None {
        for item in eval::read_items::<T>(input)? {
            sketch.update(item, 1)?;
        }
    } else {
        for (item, w) in eval::read_weighted::<T>(input)? {
            sketch.update(item, w)?;
        }
    }
    write_file(&args.out, &sketch.to_bytes())?;
    eprintln!("{}", sketch.stats());
    Ok(())
}

fn query<T: Item>(bytes: &[u8], mode: WeightedMode, args: &QueryArgs) -> Result<()> {
    let sketch = AnySketch::<T>::from_bytes(bytes, mode, Backend::default())?;
    let s = sketch.summary();
    let mut out = BufWriter::new(io::stdout().lock());
    for &phi in &args.quantiles {
        writeln!(out, "{phi}\t{}", s.quantile(phi)?.to_text())?;
    }
    for text in &args.ranks {
        let q = T::parse_text(text)?;
        writeln!(out, "{text}\t{}", s.rank(&q).fraction())?;
    }
    if let Some(path) = &args.cdf {
        let queries = eval::read_items::<T>(open_input(path)?)?;
        // cdf wants ascending queries; answer in file order
        let mut order: Vec<usize> = (0..queries.len()).collect();
        order.sort_by(|&a, &b| queries[a].item_cmp(&queries[b]));
        let sorted: Vec<T> = order.iter().map(|&i| queries[i].clone()).collect();
        let fractions = s.cdf(&sorted)?;
        let mut by_line = vec![0.0; queries.len()];
        for (&i, f) in order.iter().zip(fractions) {
            by_line[i] = f;
        }
        for f in by_line {
            writeln!(out, "{f}")?;
        }
    }
    out.flush()?;
    Ok(())
}

fn merge<T: Item>(first: Vec<u8>, mode: WeightedMode, args: &MergeArgs) -> Result<()> {
    let mut acc = AnySketch::<T>::from_bytes(&first, mode, args.backend)?;
    for path in &args.sketches[1..] {
        let bytes = read_file(path)?;
        let header = peek_header(&bytes)?;
        if header.codec != T::CODEC {
            return Err(SketchError::Incompatible {
                field: "codec",
                left: T::CODEC.name().into(),
                right: header.codec.name().into(),
            });
        }
        let next = AnySketch::<T>::from_bytes(&bytes, header.mode, args.backend)?;
        acc = acc.merge(&next)?;
    }
    write_file(&args.out, &acc.to_bytes())?;
    eprintln!("{}", acc.stats());
    Ok(())
}

fn info<T: Item>(bytes: &[u8], path: &Path) -> Result<()> {
    let h = peek_header(bytes)?;
    let sketch = AnySketch::<T>::from_bytes(bytes, h.mode, Backend::default())?;
    let mut out = io::stdout().lock();
    writeln!(out, "file: {}", path.display())?;
    writeln!(out, "codec: {}", h.codec.name())?;
    writeln!(out, "variant: {}", h.flags)?;
    writeln!(out, "weighted: {}", h.mode)?;
    writeln!(out, "budget: {}", h.budget)?;
    writeln!(out, "k: {}", h.k)?;
    writeln!(out, "c: {}", h.c)?;
    writeln!(out, "{}", sketch.stats())?;
    let sizes: Vec<String> = sketch.level_sizes().iter().map(usize::to_string).collect();
    writeln!(out, "levels: [{}]", sizes.join(", "))?;
    Ok(())
}

fn run_eval(args: &EvalArgs) -> Result<()> {
    let kinds = args
        .modes
        .iter()
        .flat_map(|&mode| args.variants.iter().map(move |&flags| SketchKind { flags, mode }))
        .collect();
    let streams = args
        .streams
        .iter()
        .map(|&kind| {
            let spec = if kind == StreamKind::File {
                let path = args.input.clone().ok_or_else(|| {
                    SketchError::InvalidParameter("the file stream needs --in".into())
                })?;
                StreamSpec::file(path)
            } else {
                StreamSpec {
                    trend: args.trend,
                    noise: args.noise,
                    step: args.step,
                    ..StreamSpec::new(kind, args.n)
                }
            };
            Ok(spec.with_max_weight(args.max_weight))
        })
        .collect::<Result<Vec<_>>>()?;
    let config = ExperimentConfig {
        kinds,
        budgets: args.budgets.clone(),
        streams,
        trials: args.trials,
        q_count: args.q_count,
        c: args.c,
        backend: args.backend,
        master_seed: args.seed,
    };
    let out: Box<dyn Write> = match &args.out {
        Some(path) => Box::new(
            File::create(path).map_err(|e| SketchError::Io(format!("{}: {e}", path.display())))?,
        ),
        None => Box::new(io::stdout().lock()),
    };
    let mut sink = CsvSink::new(out);
    eval::run_experiment(&config, |r| sink.write(r))?;
    Ok(())
}
