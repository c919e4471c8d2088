//! The `ccl` command line.
//!
//! Exit codes: 0 success, 1 domain error (bad file, failed validation), 2 usage
//! error. Every subcommand prints its effective configuration and writes the
//! same lines as `#` comments at the top of each CSV it produces.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context};
use ccl_core::detect::{correlate_tally, estimate_motion, Detector, DetectorConfig, Direction, DEFAULT_MIN_SPEED_MPS};
use ccl_core::eval::{match_events, metrics, EvalConfig};
use ccl_core::fold::fold_batchnorm;
use ccl_core::layer::LayerWeights;
use ccl_core::model::{init_weights, ArchConfig, Model};
use ccl_core::search::{search_budget_config, BudgetTarget, SearchBounds};
use ccl_core::stream::{Normalizer, StreamEngine};
use ccl_core::synth::{generate_run, nominal_normalizer, SynthConfig};
use ccl_core::zoo::{validate_weights, ModelId};
use ccl_core::{count_layers, CostReport, WINDOW_LEN};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bench::bench_engine;
use crate::config::{echo, load_toml};
use crate::manifest::ArchManifest;
use crate::signal::{load_signal, store_signal, SignalMeta};
use crate::tables::{self, EventRow};
use crate::weights::{read_weights, write_weights};

#[derive(Debug, Parser)]
#[command(name = "ccl", version, about = "Casing-collar recognition toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic run: signal, labels, tally and trajectory.
    Synth(SynthArgs),
    /// Print a model's parameter and MAC counts, or search for a budget.
    Count(CountArgs),
    /// Stream a signal through a model into a probability map.
    Stream(StreamArgs),
    /// Turn a probability map into collar events, optionally with depths.
    Detect(DetectArgs),
    /// Score events against labels.
    Evaluate(EvaluateArgs),
    /// Time the per-sample inference path.
    Bench(BenchArgs),
    /// Fold batch norm into the preceding layers of a weight file.
    FoldBn(FoldArgs),
    /// Validate a weight file, optionally against parity vectors.
    CheckWeights(CheckArgs),
}

fn parse_model(s: &str) -> Result<ModelId, String> {
    s.parse()
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct ModelArgs {
    /// Reference model: crn1, crn2 or crn3.
    #[arg(long, value_parser = parse_model)]
    pub model: Option<ModelId>,
    /// Architecture manifest file.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

impl ModelArgs {
    fn load(&self) -> anyhow::Result<ArchManifest> {
        match (&self.model, &self.manifest) {
            (Some(id), _) => Ok(ArchManifest::builtin(*id)),
            (None, Some(p)) => Ok(ArchManifest::load(p)?),
            (None, None) => unreachable!("clap requires one"),
        }
    }
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct WeightArgs {
    /// CRNW weight file.
    #[arg(long)]
    pub weights: Option<PathBuf>,
    /// Seeded random weights instead of a file.
    #[arg(long, value_name = "SEED")]
    pub random_weights: Option<u64>,
}

impl WeightArgs {
    fn load(&self, config: &ArchConfig) -> anyhow::Result<Vec<LayerWeights>> {
        match (&self.weights, self.random_weights) {
            (Some(p), _) => Ok(read_weights(p, config)?),
            (None, Some(seed)) => Ok(init_weights(config, seed)),
            (None, None) => unreachable!("clap requires one"),
        }
    }

    fn describe(&self) -> String {
        match (&self.weights, self.random_weights) {
            (Some(p), _) => format!("weights = {:?}", p.display().to_string()),
            (None, Some(seed)) => format!("random_weights = {seed}"),
            (None, None) => String::new(),
        }
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Synth config TOML; absent keys keep their defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_name = "SECONDS")]
    pub duration: Option<f64>,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// File name stem of the outputs.
    #[arg(long, default_value = "run")]
    pub name: String,
}

#[derive(Debug, Args)]
pub struct CountArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Print one line per layer.
    #[arg(long)]
    pub per_layer: bool,
    /// Search the model's family for its budget instead of reading the manifest.
    #[arg(long, requires = "model")]
    pub search: bool,
    /// Budget parameters for --search; defaults to the model's budget.
    #[arg(long, requires = "search")]
    pub params: Option<u64>,
    /// Budget MACs for --search; defaults to the model's budget.
    #[arg(long, requires = "search")]
    pub macs: Option<u64>,
    /// Per-axis relative tolerance accepted by --search.
    #[arg(long, default_value_t = 0.0, requires = "search")]
    pub tolerance: f64,
    /// Write the (searched) architecture manifest here.
    #[arg(long)]
    pub manifest_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StreamArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub weights: WeightArgs,
    #[arg(long)]
    pub signal: PathBuf,
    /// Probability map CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the signal's normalizer offset.
    #[arg(long)]
    pub offset: Option<f32>,
    /// Overrides the signal's normalizer scale.
    #[arg(long)]
    pub scale: Option<f32>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DirectionArg {
    Down,
    Up,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[arg(long)]
    pub probmap: PathBuf,
    /// Events CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Detector config TOML.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub threshold: Option<f32>,
    #[arg(long, value_name = "SAMPLES")]
    pub min_duration: Option<u32>,
    #[arg(long, value_name = "SAMPLES")]
    pub centroid_offset: Option<u32>,
    /// Casing tally CSV; events get depths when given.
    #[arg(long)]
    pub tally: Option<PathBuf>,
    /// Tally position (0-based) of the first collar passed.
    #[arg(long, default_value_t = 0, requires = "tally")]
    pub start_joint: usize,
    #[arg(long, value_enum, default_value = "down", requires = "tally")]
    pub direction: DirectionArg,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Events CSV; repeat to pool several runs.
    #[arg(long, required = true)]
    pub events: Vec<PathBuf>,
    /// Labels CSV, paired in order with --events.
    #[arg(long, required = true)]
    pub labels: Vec<PathBuf>,
    /// Eval config TOML.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Matching tolerance in samples.
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Ignore labels and detections before this sample; the engine emits
    /// nothing before its window fills.
    #[arg(long, default_value_t = (WINDOW_LEN - 1) as u64)]
    pub min_index: u64,
    /// Also write the report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub weights: WeightArgs,
    #[arg(long)]
    pub signal: PathBuf,
    /// Passes over the signal.
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
}

#[derive(Debug, Args)]
pub struct FoldArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Unfolded CRNW weights.
    #[arg(long)]
    pub weights: PathBuf,
    /// Folded CRNW weights.
    #[arg(long)]
    pub out: PathBuf,
    /// Manifest of the folded architecture.
    #[arg(long)]
    pub manifest_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CheckArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[arg(long)]
    pub weights: PathBuf,
    /// Parity vectors CSV (`x0..x159,logit`).
    #[arg(long)]
    pub vectors: Option<PathBuf>,
    /// Largest accepted logit difference on the parity vectors.
    #[arg(long, default_value_t = 1e-4)]
    pub tolerance: f64,
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code. Reports go to `out`, errors to stderr.
pub fn run<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

pub fn execute(command: Command, out: &mut dyn Write) -> anyhow::Result<()> {
    match command {
        Command::Synth(a) => synth(a, out).context("synth"),
        Command::Count(a) => count(a, out).context("count"),
        Command::Stream(a) => stream(a, out).context("stream"),
        Command::Detect(a) => detect(a, out).context("detect"),
        Command::Evaluate(a) => evaluate(a, out).context("evaluate"),
        Command::Bench(a) => bench(a, out).context("bench"),
        Command::FoldBn(a) => fold_bn(a, out).context("fold-bn"),
        Command::CheckWeights(a) => check_weights(a, out).context("check-weights"),
    }
}

fn emit(out: &mut dyn Write, lines: &[String]) -> anyhow::Result<()> {
    for l in lines {
        writeln!(out, "{l}")?;
    }
    Ok(())
}

fn preamble(command: &str) -> Vec<String> {
    vec![format!("ccl {command} {}", env!("CARGO_PKG_VERSION"))]
}

fn path_line(key: &str, p: &Path) -> String {
    format!("{key} = {:?}", p.display().to_string())
}

fn synth(a: SynthArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let mut cfg: SynthConfig = match &a.config {
        Some(p) => load_toml(p)?,
        None => SynthConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(d) = a.duration {
        cfg.duration_s = d;
    }
    let mut head = preamble("synth");
    head.extend(echo("synth", &cfg));
    emit(out, &head)?;

    let run = generate_run(&cfg)?;
    std::fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    let file = |ext: &str| a.out_dir.join(format!("{}.{ext}", a.name));
    let mut meta = SignalMeta::new(run.signal.len(), nominal_normalizer());
    meta.description = Some(format!("synthetic run, seed {}, polarity {}", cfg.seed, run.polarity));
    store_signal(&file("sig"), &run.signal, &meta)?;
    tables::store_labels(&file("labels.csv"), &run.labels, &head)?;
    tables::store_tally(&file("tally.csv"), &run.tally, &head)?;
    tables::store_trajectory(&file("trajectory.csv"), &run.trajectory, &head)?;
    writeln!(
        out,
        "samples={} collars={} first_joint={} polarity={} clipped={}",
        run.signal.len(),
        run.labels.len(),
        run.first_joint(),
        run.polarity,
        run.clipped
    )?;
    Ok(())
}

fn count(a: CountArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let manifest = if a.search {
        let id = a.model.model.expect("clap requires --model with --search");
        let budget = id.budget();
        let target = BudgetTarget::new(a.params.unwrap_or(budget.params), a.macs.unwrap_or(budget.macs), a.tolerance)?;
        let t0 = Instant::now();
        let found = search_budget_config(target, id.family(), &SearchBounds::default())?;
        let elapsed = t0.elapsed();
        writeln!(
            out,
            "search {id}: target params={} macs={} exact={} deviation_params={:+.4} deviation_macs={:+.4} visited={} elapsed_ms={}",
            target.params,
            target.macs,
            found.exact,
            found.deviation.0,
            found.deviation.1,
            found.visited,
            elapsed.as_millis()
        )?;
        let notes = format!(
            "Budget search over the {id} family. Head input: {}. {}",
            found.spec.as_ref().map_or("n/a", |s| s.head_input.as_str()),
            if found.exact {
                "Cost equals the budget exactly.".to_string()
            } else {
                format!(
                    "Nearest configuration; relative deviation params {:+.4}, macs {:+.4}.",
                    found.deviation.0, found.deviation.1
                )
            }
        );
        let mut config = found.config;
        config.model_id = id.as_str().into();
        ArchManifest::from_config(&config, CostReport::new(target.params, target.macs), found.spec, notes)?
    } else {
        a.model.load()?
    };
    writeln!(out, "model = {:?}", manifest.model_id)?;
    writeln!(out, "head = {:?}", manifest.head.as_str())?;
    if a.per_layer {
        let (costs, _) = count_layers(manifest.input, &manifest.layers)?;
        for (i, (layer, c)) in manifest.layers.iter().zip(costs).enumerate() {
            writeln!(out, "{i:>3} {layer:<48} {c}")?;
        }
    }
    if let Some(p) = &a.manifest_out {
        manifest.store(p)?;
    }
    writeln!(out, "{}", manifest.expected)?;
    Ok(())
}

fn load_model(m: &ModelArgs, w: &WeightArgs) -> anyhow::Result<(ArchConfig, Vec<LayerWeights>)> {
    let config = m.load()?.config();
    let weights = w.load(&config).context("loading weights")?;
    Ok((config, weights))
}

fn stream(a: StreamArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let (config, weights) = load_model(&a.model, &a.weights)?;
    let (samples, meta) = load_signal(&a.signal).context("loading signal")?;
    let norm = Normalizer::new(
        a.offset.unwrap_or(meta.normalizer.offset),
        a.scale.unwrap_or(meta.normalizer.scale),
    )?;
    let mut head = preamble("stream");
    head.push(format!("model = {:?}", config.model_id));
    head.push(a.weights.describe());
    head.push(path_line("signal", &a.signal));
    head.extend(echo("normalizer", &norm));
    emit(out, &head)?;

    let mut engine = StreamEngine::new(config, weights, norm)?;
    let map = engine.run(&samples);
    tables::store_probmap(&a.out, &map, &head)?;
    let peak = map.iter().map(|(_, p)| p).fold(0.0f32, f32::max);
    writeln!(out, "samples={} ticks={} max_probability={peak}", samples.len(), map.len())?;
    Ok(())
}

fn detect(a: DetectArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let mut cfg: DetectorConfig = match &a.config {
        Some(p) => load_toml(p)?,
        None => DetectorConfig::default(),
    };
    if let Some(v) = a.threshold {
        cfg.threshold = v;
    }
    if let Some(v) = a.min_duration {
        cfg.min_duration = v;
    }
    if let Some(v) = a.centroid_offset {
        cfg.centroid_offset = v;
    }
    let mut head = preamble("detect");
    head.push(path_line("probmap", &a.probmap));
    head.extend(echo("detector", &cfg));
    if let Some(t) = &a.tally {
        head.push(path_line("tally", t));
        head.push(format!("start_joint = {}", a.start_joint));
        head.push(format!("direction = {:?}", format!("{:?}", a.direction).to_lowercase()));
    }
    emit(out, &head)?;

    let map = tables::load_probmap(&a.probmap)?;
    let events = Detector::new(cfg)?.detect_all(map.iter())?;
    let rows = match &a.tally {
        Some(t) => {
            let tally = tables::load_tally(t)?;
            let dir = match a.direction {
                DirectionArg::Down => Direction::Down,
                DirectionArg::Up => Direction::Up,
            };
            let assigned = correlate_tally(&events, &tally, a.start_joint, dir).context("correlating with tally")?;
            let motion = estimate_motion(&assigned, DEFAULT_MIN_SPEED_MPS)?;
            writeln!(
                out,
                "motion={} depth_m={} velocity_mps={}",
                motion.state.as_str(),
                motion.depth_m.map_or("-".into(), |d| format!("{d:.3}")),
                motion.velocity_mps.map_or("-".into(), |v| format!("{v:.4}"))
            )?;
            EventRow::with_depths(&events, &assigned)
        }
        None => EventRow::with_depths(&events, &[]),
    };
    tables::store_events(&a.out, &rows, &head)?;
    writeln!(out, "events={}", events.len())?;
    Ok(())
}

fn evaluate(a: EvaluateArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    if a.events.len() != a.labels.len() {
        bail!("{} --events files but {} --labels files; they pair up in order", a.events.len(), a.labels.len());
    }
    let mut cfg: EvalConfig = match &a.config {
        Some(p) => load_toml(p)?,
        None => EvalConfig::default(),
    };
    if let Some(t) = a.tolerance {
        cfg.tolerance = t;
    }
    let mut report = preamble("evaluate");
    report.extend(echo("eval", &cfg));
    report.push(format!("min_index = {}", a.min_index));
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for (ev, lab) in a.events.iter().zip(&a.labels) {
        let min = a.min_index as f64;
        let dets: Vec<f64> = tables::load_events(ev)?
            .iter()
            .map(|r| r.event.centroid)
            .filter(|&c| c >= min)
            .collect();
        let labels: Vec<f64> = tables::load_labels(lab)?
            .into_iter()
            .filter(|&l| l >= a.min_index)
            .map(|l| l as f64)
            .collect();
        let m = match_events(&dets, &labels, &cfg).with_context(|| format!("matching {}", ev.display()))?;
        report.push(format!("run {:?}: tp={} fp={} fn={}", ev.display().to_string(), m.tp, m.fp, m.fn_));
        tp += m.tp;
        fp += m.fp;
        fn_ += m.fn_;
    }
    let r = metrics(tp, fp, fn_);
    report.push(format!("tp={} fp={} fn={}", r.tp, r.fp, r.fn_));
    report.push(format!(
        "precision={:.4} recall={:.4} f1={:.4} accuracy={:.4}",
        r.precision, r.recall, r.f1, r.accuracy
    ));
    emit(out, &report)?;
    if let Some(p) = &a.out {
        let mut text = report.join("\n");
        text.push('\n');
        std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn bench(a: BenchArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let (config, weights) = load_model(&a.model, &a.weights)?;
    let (samples, meta) = load_signal(&a.signal).context("loading signal")?;
    let mut head = preamble("bench");
    head.push(format!("model = {:?}", config.model_id));
    head.push(a.weights.describe());
    head.push(path_line("signal", &a.signal));
    head.push(format!("repeats = {}", a.repeats));
    emit(out, &head)?;
    let mut engine = StreamEngine::new(config, weights, meta.normalizer)?;
    let stats = bench_engine(&mut engine, &samples, a.repeats);
    if stats.ticks == 0 {
        bail!("signal shorter than one window ({WINDOW_LEN} samples)");
    }
    writeln!(out, "{stats}")?;
    Ok(())
}

fn fold_bn(a: FoldArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let manifest = a.model.load()?;
    let config = manifest.config();
    let weights = read_weights(&a.weights, &config)?;
    let mut head = preamble("fold-bn");
    head.push(format!("model = {:?}", config.model_id));
    head.push(path_line("weights", &a.weights));
    emit(out, &head)?;
    let (folded, fw) = fold_batchnorm(&config, &weights)?;
    write_weights(&a.out, &folded, &fw)?;
    let folded_manifest = ArchManifest::from_config(
        &folded,
        manifest.budget,
        None,
        format!("{} with batch norm folded into the preceding layers.", manifest.model_id),
    )?;
    if let Some(p) = &a.manifest_out {
        folded_manifest.store(p)?;
    }
    writeln!(out, "before: {}", manifest.expected)?;
    writeln!(out, "after:  {}", folded_manifest.expected)?;
    Ok(())
}

fn check_weights(a: CheckArgs, out: &mut dyn Write) -> anyhow::Result<()> {
    let config = a.model.load()?.config();
    let mut head = preamble("check-weights");
    head.push(format!("model = {:?}", config.model_id));
    head.push(path_line("weights", &a.weights));
    emit(out, &head)?;
    let weights = read_weights(&a.weights, &config)?;
    validate_weights(&config, &weights).map_err(|d| anyhow!("{d}"))?;
    let values: usize = weights.iter().map(LayerWeights::value_count).sum();
    writeln!(out, "ok: {} parametric layers, {values} values", weights.len())?;
    if let Some(p) = &a.vectors {
        let vectors = tables::load_test_vectors(p)?;
        let mut model = Model::new(config, weights)?;
        let mut worst = 0.0f64;
        for v in &vectors {
            worst = worst.max((model.infer(&v.input) as f64 - v.logit as f64).abs());
        }
        writeln!(out, "vectors={} max_abs_diff={worst:e} tolerance={:e}", vectors.len(), a.tolerance)?;
        if !(worst <= a.tolerance) {
            bail!("parity vectors differ by {worst:e}, above tolerance {:e}", a.tolerance);
        }
    }
    Ok(())
}
