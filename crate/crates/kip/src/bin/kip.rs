//! Command-line driver. Every subcommand is thin glue over the library:
//! parse flags, open files, call one pipeline entry point, write the result.
//!
//! Input logs are lines of `<timestamp>\t<ipv6-address>[\t...]` where the
//! timestamp is epoch seconds or ISO-8601 UTC. Line accounting (parsed /
//! malformed / out-of-window) goes to stderr on every run so stdout stays
//! machine-readable.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use kip::activity::SeriesStat;
use kip::aggregate::{read_aggregate_set, write_aggregate_set, CountMode, KipConfig, ResidualMode};
use kip::anonymize::{anonymize_stream, build_matcher, StreamOptions};
use kip::classify::RandomnessPolicy;
use kip::ingest::{grid_covering, ingest_rows, parse_timestamp, scan_time_range, LineCounts};
use kip::pipeline::{analyze, run_pipeline, AnalysisRun, PipelineConfig};
use kip::render::{render_inferred_block, render_raw_block};
use kip::report::{covered64_lengths, length_histogram, length_table, summarize, Weighting};
use kip::synth::{generate, write_log, write_manifest, write_truth, Practice, SynthParams};
use kip::TimeGrid;

#[derive(Parser)]
#[command(
    name = "kip",
    version,
    about = "IPv6 activity analysis: classify addresses, bound simultaneous assignments, \
             synthesize k-anonymous prefix aggregates, anonymize logs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify each observed address: IID class, discriminating prefix length, stable days
    Classify(ClassifyArgs),
    /// Draw per-/64 activity matrices (raw marks or inferred episodes)
    Matrix(MatrixArgs),
    /// Network-wide counts and simultaneous-assignment lower bounds
    Summarize(SummarizeArgs),
    /// Synthesize a k-anonymous aggregate set from an activity log
    Aggregate(AggregateArgs),
    /// Rewrite a log's address field by longest-match truncation
    Anon(AnonArgs),
    /// Prefix-length histogram and CDF for an aggregate set
    Eval(EvalArgs),
    /// Classify, analyze, aggregate, and anonymize in one run
    Pipeline(PipelineArgs),
    /// Generate a synthetic scenario: log, ground truth, manifest
    Synth(SynthArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum StatArg {
    Min,
    Max,
    Median,
}

impl From<StatArg> for SeriesStat {
    fn from(v: StatArg) -> SeriesStat {
        match v {
            StatArg::Min => SeriesStat::Min,
            StatArg::Max => SeriesStat::Max,
            StatArg::Median => SeriesStat::Median,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    /// Count simultaneously assigned /64 prefixes
    Prefix,
    /// Count simultaneously assigned addresses
    Address,
}

impl From<ModeArg> for CountMode {
    fn from(v: ModeArg) -> CountMode {
        match v {
            ModeArg::Prefix => CountMode::PrefixCount,
            ModeArg::Address => CountMode::AddressCount,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ResidualArg {
    /// Leave sub-k leftovers out of the set
    Suppress,
    /// Emit the trie root as a catch-all
    Root,
}

impl From<ResidualArg> for ResidualMode {
    fn from(v: ResidualArg) -> ResidualMode {
        match v {
            ResidualArg::Suppress => ResidualMode::Suppress,
            ResidualArg::Root => ResidualMode::Root,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ViewArg {
    /// One labelled row per address with `#` activity marks
    Raw,
    /// Episode marks plus per-interval bounds and the fencepost row
    Inferred,
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightingArg {
    /// One count per emitted aggregate
    Aggregate,
    /// One count per active /64 the set covers
    Covered64,
}

#[derive(Clone, Copy, ValueEnum)]
enum PracticeArg {
    /// Subnet = customer /48, bits 49..64 zero
    Jp,
    /// Customers share /48s, random subnet bits
    Dispersed,
}

impl From<PracticeArg> for Practice {
    fn from(v: PracticeArg) -> Practice {
        match v {
            PracticeArg::Jp => Practice::JpStyle,
            PracticeArg::Dispersed => Practice::Dispersed,
        }
    }
}

#[derive(Args, Clone)]
struct GridArgs {
    /// Window start: epoch seconds or ISO-8601 UTC (e.g. 2017-03-25T00:00:00Z)
    #[arg(long, value_name = "TIME")]
    start: Option<String>,
    /// Interval width in seconds
    #[arg(long, default_value_t = 3600, value_name = "SECONDS")]
    interval_seconds: u32,
    /// Number of intervals in the window
    #[arg(long, default_value_t = 168, value_name = "COUNT")]
    intervals: u32,
    /// Derive start and interval count from the input's own time range,
    /// rounded outward to interval boundaries (needs a log file, not stdin)
    #[arg(long, conflicts_with_all = ["start", "intervals"])]
    auto_grid: bool,
}

impl GridArgs {
    fn resolve(&self, log: &Path) -> Result<TimeGrid> {
        if self.auto_grid {
            if log == Path::new("-") {
                bail!("--auto-grid scans the input twice and cannot rewind stdin; give it a log file");
            }
            let Some((min, max)) = scan_time_range(log_reader(log)?)? else {
                bail!("--auto-grid found no parseable timestamps in {}", log.display());
            };
            return Ok(grid_covering(min, max, self.interval_seconds)?);
        }
        match &self.start {
            Some(s) => Ok(TimeGrid::new(parse_timestamp(s)?, self.interval_seconds, self.intervals)?),
            None => bail!("the time grid needs --start <epoch-or-ISO8601>, or --auto-grid with a log file"),
        }
    }
}

#[derive(Args, Clone)]
struct BridgeArgs {
    /// Required confidence that a /64's observed IIDs would all be distinct
    /// if pseudorandom; gates episode bridging
    #[arg(long, default_value_t = RandomnessPolicy::DEFAULT_CONFIDENCE, value_name = "P")]
    confidence: f64,
    /// Bridge stable-IID classes (EUI-64, low-byte, ...) too, not only
    /// plausibly-random ones
    #[arg(long)]
    bridge_stable_iids: bool,
}

impl BridgeArgs {
    fn check(&self) -> Result<()> {
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            bail!("--confidence must sit strictly inside (0, 1), got {}", self.confidence);
        }
        Ok(())
    }

    fn default_values() -> BridgeArgs {
        BridgeArgs {
            confidence: RandomnessPolicy::DEFAULT_CONFIDENCE,
            bridge_stable_iids: false,
        }
    }
}

#[derive(Args, Clone)]
struct KipArgs {
    /// Anonymity floor: fewest simultaneously assigned /64s (or addresses)
    /// behind every emitted prefix; at least 2
    #[arg(long, default_value_t = 2)]
    k: u32,
    /// Order statistic of the per-fencepost series the floor applies to
    #[arg(long, value_enum, default_value_t = StatArg::Min)]
    stat: StatArg,
    /// Counting unit behind the floor
    #[arg(long, value_enum, default_value_t = ModeArg::Prefix)]
    mode: ModeArg,
    /// Longest prefix length the synthesizer may emit; at most 64
    #[arg(long, default_value_t = 64, value_name = "BITS")]
    max_emit_length: u8,
    /// What happens to mass that never reaches k
    #[arg(long, value_enum, default_value_t = ResidualArg::Suppress)]
    residual: ResidualArg,
}

impl KipArgs {
    fn to_config(&self) -> Result<KipConfig> {
        let mut config = KipConfig::new(self.k, self.stat.into(), self.mode.into());
        config.max_emit_length = self.max_emit_length;
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args)]
struct ClassifyArgs {
    /// Activity log, `-` for stdin
    #[arg(value_name = "LOG", default_value = "-")]
    log: PathBuf,
    #[command(flatten)]
    grid: GridArgs,
    /// Write the dump here instead of stdout
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MatrixArgs {
    /// Activity log, `-` for stdin
    #[arg(value_name = "LOG", default_value = "-")]
    log: PathBuf,
    #[command(flatten)]
    grid: GridArgs,
    /// Matrix flavor
    #[arg(long, value_enum, default_value_t = ViewArg::Raw)]
    view: ViewArg,
    #[command(flatten)]
    bridge: BridgeArgs,
    /// Write the matrix here instead of stdout
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SummarizeArgs {
    /// Activity log, `-` for stdin
    #[arg(value_name = "LOG", default_value = "-")]
    log: PathBuf,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    bridge: BridgeArgs,
    /// Also write the machine-readable key/value table here
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AggregateArgs {
    /// Activity log, `-` for stdin
    #[arg(value_name = "LOG", default_value = "-")]
    log: PathBuf,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    bridge: BridgeArgs,
    #[command(flatten)]
    kip: KipArgs,
    /// Write the aggregate set here instead of stdout
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AnonArgs {
    /// Log to rewrite, `-` for stdin
    #[arg(value_name = "LOG", default_value = "-")]
    log: PathBuf,
    /// Aggregate set produced by `aggregate` or `pipeline`
    #[arg(long, value_name = "FILE")]
    set: PathBuf,
    /// Append `/length` to each rewritten address
    #[arg(long)]
    with_length: bool,
    /// Replacement text for suppressed address fields
    #[arg(long, default_value = "-", value_name = "TEXT")]
    sentinel: String,
    /// Write the rewritten log here instead of stdout
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Aggregate set file to evaluate
    #[arg(long, value_name = "FILE")]
    set: PathBuf,
    /// Count unit for the distribution
    #[arg(long, value_enum, default_value_t = WeightingArg::Aggregate)]
    weighting: WeightingArg,
    /// Activity log supplying the /64 population (covered64 weighting only)
    #[arg(long, value_name = "LOG")]
    log: Option<PathBuf>,
    #[command(flatten)]
    grid: GridArgs,
    /// Write the table here instead of stdout
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PipelineArgs {
    /// Activity log, `-` for stdin
    #[arg(value_name = "LOG", default_value = "-")]
    log: PathBuf,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    bridge: BridgeArgs,
    #[command(flatten)]
    kip: KipArgs,
    /// Write the synthesized aggregate set here
    #[arg(long, value_name = "FILE")]
    aggregates_out: Option<PathBuf>,
    /// Re-read the input log and write it anonymized against the synthesized
    /// set (needs a log file: the analysis pass already consumed stdin)
    #[arg(long, value_name = "FILE")]
    anon_out: Option<PathBuf>,
    /// Append `/length` to rewritten addresses in --anon-out
    #[arg(long)]
    with_length: bool,
    /// Replacement for suppressed address fields in --anon-out
    #[arg(long, default_value = "-", value_name = "TEXT")]
    sentinel: String,
    /// Write the per-address classification dump here
    #[arg(long, value_name = "FILE")]
    classify_out: Option<PathBuf>,
    /// Write the machine-readable summary here
    #[arg(long, value_name = "FILE")]
    summary_out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Hosts (customers) to simulate
    #[arg(long)]
    hosts: u32,
    /// Address-plan practice to mimic
    #[arg(long, value_enum)]
    practice: PracticeArg,
    /// RNG seed; same seed, same scenario
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Mean temporary-address lifetime in hours
    #[arg(long, default_value_t = 6.0, value_name = "HOURS")]
    mean_lifetime_hours: f64,
    /// Mean activity events per assigned hour
    #[arg(long, default_value_t = 2.0, value_name = "RATE")]
    events_per_hour: f64,
    /// Window start: epoch seconds or ISO-8601 UTC
    #[arg(long, default_value = "0", value_name = "TIME")]
    start: String,
    /// Interval width in seconds
    #[arg(long, default_value_t = 3600, value_name = "SECONDS")]
    interval_seconds: u32,
    /// Number of intervals in the window
    #[arg(long, default_value_t = 168, value_name = "COUNT")]
    intervals: u32,
    /// Output basename: writes BASE.log, BASE.truth, BASE.manifest
    #[arg(long, default_value = "synth", value_name = "BASE")]
    out_base: PathBuf,
}

fn log_reader(path: &Path) -> Result<Box<dyn BufRead>> {
    if path == Path::new("-") {
        Ok(Box::new(io::stdin().lock()))
    } else {
        let file =
            File::open(path).with_context(|| format!("opening {}", path.display()))?;
        Ok(Box::new(BufReader::new(file)))
    }
}

fn out_writer(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => {
            let file =
                File::create(p).with_context(|| format!("creating {}", p.display()))?;
            Box::new(BufWriter::new(file))
        }
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn report_lines(counts: &LineCounts) {
    eprintln!(
        "# lines: {} total = {} parsed + {} malformed + {} out-of-window",
        counts.total(),
        counts.parsed,
        counts.malformed,
        counts.out_of_window
    );
}

fn ingest_and_analyze(
    log: &Path,
    config: &PipelineConfig,
) -> Result<(AnalysisRun, LineCounts)> {
    let (rows, counts) = ingest_rows(log_reader(log)?, &config.grid)?;
    Ok((analyze(&rows, config), counts))
}

/// Config for commands that analyze but never aggregate.
fn analysis_config(grid: TimeGrid, bridge: &BridgeArgs) -> Result<PipelineConfig> {
    bridge.check()?;
    let mut config = PipelineConfig::new(
        grid,
        KipConfig::new(2, SeriesStat::Min, CountMode::PrefixCount),
    );
    config.confidence = bridge.confidence;
    config.bridge_stable_iids = bridge.bridge_stable_iids;
    Ok(config)
}

fn full_config(grid: TimeGrid, bridge: &BridgeArgs, kip: &KipArgs) -> Result<PipelineConfig> {
    let mut config = analysis_config(grid, bridge)?;
    config.kip = kip.to_config()?;
    config.residual = kip.residual.into();
    Ok(config)
}

fn cmd_classify(args: ClassifyArgs) -> Result<()> {
    let grid = args.grid.resolve(&args.log)?;
    let config = analysis_config(grid, &BridgeArgs::default_values())?;
    let (run, counts) = ingest_and_analyze(&args.log, &config)?;
    let mut out = out_writer(args.out.as_deref())?;
    for subnet in &run.subnets {
        for row in &subnet.rows {
            writeln!(out, "{}", row.classification.dump_line())?;
        }
    }
    out.flush()?;
    report_lines(&counts);
    Ok(())
}

fn cmd_matrix(args: MatrixArgs) -> Result<()> {
    let grid = args.grid.resolve(&args.log)?;
    let config = analysis_config(grid, &args.bridge)?;
    let (run, counts) = ingest_and_analyze(&args.log, &config)?;
    if run.subnets.is_empty() {
        bail!("no events fell inside the window; nothing to draw");
    }
    let blocks: Vec<String> = match args.view {
        ViewArg::Raw => run
            .subnets
            .iter()
            .map(|s| render_raw_block(s.subnet, &s.rows, &run.grid))
            .collect(),
        ViewArg::Inferred => run
            .subnets
            .iter()
            .map(|s| {
                let block = render_inferred_block(&s.rows, &run.grid)?;
                // A lone /64 matches the block's own labelling; several need
                // a prefix line each to stay tellable apart.
                Ok(if run.subnets.len() > 1 {
                    format!("{}\n{}", s.subnet, block)
                } else {
                    block
                })
            })
            .collect::<kip::Result<_>>()?,
    };
    let mut out = out_writer(args.out.as_deref())?;
    out.write_all(blocks.join("\n").as_bytes())?;
    out.flush()?;
    report_lines(&counts);
    Ok(())
}

fn cmd_summarize(args: SummarizeArgs) -> Result<()> {
    let grid = args.grid.resolve(&args.log)?;
    let config = analysis_config(grid, &args.bridge)?;
    let (run, counts) = ingest_and_analyze(&args.log, &config)?;
    let summary = summarize(&run);
    print!("{}", summary.human());
    if let Some(path) = &args.out {
        let mut out = out_writer(Some(path))?;
        out.write_all(summary.tsv().as_bytes())?;
        out.flush()?;
    }
    report_lines(&counts);
    Ok(())
}

fn cmd_aggregate(args: AggregateArgs) -> Result<()> {
    let grid = args.grid.resolve(&args.log)?;
    let config = full_config(grid, &args.bridge, &args.kip)?;
    let output = run_pipeline(log_reader(&args.log)?, &config)?;
    let mut out = out_writer(args.out.as_deref())?;
    write_aggregate_set(&output.synthesis.set, &mut out)?;
    out.flush()?;
    report_lines(&output.counts);
    Ok(())
}

fn cmd_anon(args: AnonArgs) -> Result<()> {
    let set = read_aggregate_set(log_reader(&args.set)?)?;
    let matcher = build_matcher(&set)?;
    let options = StreamOptions { with_length: args.with_length, sentinel: args.sentinel };
    let mut out = out_writer(args.out.as_deref())?;
    let stats = anonymize_stream(
        log_reader(&args.log)?,
        &mut out,
        &matcher,
        set.residual_policy,
        &options,
    )?;
    out.flush()?;
    eprintln!(
        "# anonymized: {} lines = {} rewritten + {} suppressed + {} passed through",
        stats.lines, stats.rewritten, stats.suppressed, stats.passthrough
    );
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    if matches!(args.weighting, WeightingArg::Covered64) && args.log.is_none() {
        bail!("covered64 weighting needs --log to supply the active /64 population");
    }
    let set = read_aggregate_set(log_reader(&args.set)?)?;
    let (buckets, weighting) = match args.weighting {
        WeightingArg::Aggregate => {
            let lengths = set.entries.iter().map(|e| e.prefix.length());
            (length_histogram(lengths), Weighting::PerAggregate)
        }
        WeightingArg::Covered64 => {
            let log = args.log.as_ref().expect("checked above");
            let grid = args.grid.resolve(log)?;
            let (rows, counts) = ingest_rows(log_reader(log)?, &grid)?;
            report_lines(&counts);
            let coverage = covered64_lengths(&set, rows.keys().copied())?;
            if coverage.unmatched > 0 {
                eprintln!("# {} active /64(s) matched no aggregate", coverage.unmatched);
            }
            (length_histogram(coverage.lengths), Weighting::PerCovered64)
        }
    };
    let mut out = out_writer(args.out.as_deref())?;
    out.write_all(length_table(&buckets, weighting).as_bytes())?;
    out.flush()?;
    Ok(())
}

fn cmd_pipeline(args: PipelineArgs) -> Result<()> {
    if args.anon_out.is_some() && args.log == Path::new("-") {
        bail!("--anon-out re-reads the input after analysis; give the log as a file, not stdin");
    }
    let grid = args.grid.resolve(&args.log)?;
    let config = full_config(grid, &args.bridge, &args.kip)?;
    let output = run_pipeline(log_reader(&args.log)?, &config)?;

    if let Some(path) = &args.classify_out {
        let mut out = out_writer(Some(path))?;
        for subnet in &output.run.subnets {
            for row in &subnet.rows {
                writeln!(out, "{}", row.classification.dump_line())?;
            }
        }
        out.flush()?;
    }
    if let Some(path) = &args.aggregates_out {
        let mut out = out_writer(Some(path))?;
        write_aggregate_set(&output.synthesis.set, &mut out)?;
        out.flush()?;
    }
    if let Some(path) = &args.anon_out {
        let matcher = build_matcher(&output.synthesis.set)?;
        let options =
            StreamOptions { with_length: args.with_length, sentinel: args.sentinel.clone() };
        let mut out = out_writer(Some(path))?;
        let stats = anonymize_stream(
            log_reader(&args.log)?,
            &mut out,
            &matcher,
            output.synthesis.set.residual_policy,
            &options,
        )?;
        out.flush()?;
        eprintln!(
            "# anonymized: {} lines = {} rewritten + {} suppressed + {} passed through",
            stats.lines, stats.rewritten, stats.suppressed, stats.passthrough
        );
    }

    let summary = summarize(&output.run);
    print!("{}", summary.human());
    println!("aggregates emitted: {}", output.synthesis.set.entries.len());
    if let Some(path) = &args.summary_out {
        let mut out = out_writer(Some(path))?;
        out.write_all(summary.tsv().as_bytes())?;
        out.flush()?;
    }
    report_lines(&output.counts);
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let grid = TimeGrid::new(
        parse_timestamp(&args.start)?,
        args.interval_seconds,
        args.intervals,
    )?;
    let mut params = SynthParams::new(args.hosts, args.practice.into(), grid, args.seed);
    params.mean_lifetime_hours = args.mean_lifetime_hours;
    params.events_per_hour = args.events_per_hour;
    params.validate()?;
    let scenario = generate(&params)?;

    let base = args.out_base.display();
    let log_path = PathBuf::from(format!("{base}.log"));
    let truth_path = PathBuf::from(format!("{base}.truth"));
    let manifest_path = PathBuf::from(format!("{base}.manifest"));
    write_log(&scenario, out_writer(Some(&log_path))?)?;
    write_truth(&scenario, out_writer(Some(&truth_path))?)?;
    write_manifest(&params, out_writer(Some(&manifest_path))?)?;
    println!(
        "wrote {} events for {} addresses across {} hosts: {}, {}, {}",
        scenario.total_events(),
        scenario.total_addresses(),
        scenario.hosts.len(),
        log_path.display(),
        truth_path.display(),
        manifest_path.display()
    );
    Ok(())
}

fn main() {
    let result = match Cli::parse().command {
        Command::Classify(args) => cmd_classify(args),
        Command::Matrix(args) => cmd_matrix(args),
        Command::Summarize(args) => cmd_summarize(args),
        Command::Aggregate(args) => cmd_aggregate(args),
        Command::Anon(args) => cmd_anon(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Pipeline(args) => cmd_pipeline(args),
        Command::Synth(args) => cmd_synth(args),
    };
    if let Err(err) = result {
        eprintln!("kip: {err:#}");
        std::process::exit(1);
    }
}
