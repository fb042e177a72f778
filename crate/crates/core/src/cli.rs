//! Command-line front end. Run parameters come from flags, then from a flat
//! `key = value` config file (`--config` or `QMSVM_CONFIG`), then defaults.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::data::{self, Dataset, MinMax, RasterSpec};
use crate::error::{Error, Result};
use crate::eval::{self, BenchmarkConfig, BenchmarkSource, BlobsConfig};
use crate::model::{CombineConfig, Threshold, TrainedModel};
use crate::pipeline::{self, PipelineConfig, SamplerChoice};
use crate::qubo::{QmsvmParams, QuboProblem};
use crate::sampler::{AnnealConfig, ExactSolver, RemoteConfig, RemoteSampler, SampleSet, SimulatedAnnealing};
use crate::selection::{SelectionConfig, SelectionMethod};

pub const CONFIG_ENV: &str = "QMSVM_CONFIG";

/// `auto` picks the exact solver up to this many binary variables.
pub const AUTO_EXACT_DIM: usize = 20;

#[derive(Debug, Parser)]
#[command(name = "qmsvm", version, about = "Multiclass kernel SVM trained as a QUBO")]
pub struct Cli {
    /// Config file of `key = value` lines; defaults to $QMSVM_CONFIG.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model from a labelled CSV.
    Train(TrainArgs),
    /// Classify a feature file with a saved model.
    Predict(PredictArgs),
    /// Score predictions against ground truth.
    Evaluate(EvaluateArgs),
    /// Time every phase over a range of training-set sizes.
    Benchmark(BenchmarkArgs),
    /// Sample a QUBO file and print `energy occurrences bits` lines.
    SolveQubo(SolveArgs),
}

/// Flags shared by the commands that run the pipeline. Every field is
/// optional so the config file can fill the gaps.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Number of classes C.
    #[arg(long)]
    pub classes: Option<String>,
    /// Bits per variable B.
    #[arg(long)]
    pub bits: Option<String>,
    #[arg(long)]
    pub beta: Option<String>,
    /// Penalty weight.
    #[arg(long)]
    pub mu: Option<String>,
    /// Gaussian kernel width.
    #[arg(long)]
    pub gamma: Option<String>,
    /// Use at most this many training examples (random subset).
    #[arg(long)]
    pub n_cap: Option<String>,
    /// Support subset size M.
    #[arg(long = "m", visible_alias = "support-size")]
    pub m: Option<String>,
    #[arg(long)]
    pub num_reads: Option<String>,
    /// Number of lowest-energy solutions combined (S).
    #[arg(long = "solutions", visible_alias = "s")]
    pub solutions: Option<String>,
    /// Softmax multiplier applied to validation accuracies.
    #[arg(long)]
    pub multiplier: Option<String>,
    /// Pruning ratio, or `off`.
    #[arg(long)]
    pub max_min_ratio: Option<String>,
    /// `blend` (0.2 min + 0.8 max) or a fixed accuracy.
    #[arg(long)]
    pub threshold: Option<String>,
    #[arg(long)]
    pub sweeps: Option<String>,
    #[arg(long)]
    pub beta_hot: Option<String>,
    #[arg(long)]
    pub beta_cold: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    /// random | kmeans
    #[arg(long)]
    pub selection: Option<String>,
    /// auto | exact | sa | remote
    #[arg(long)]
    pub sampler: Option<String>,
    #[arg(long)]
    pub remote_endpoint: Option<String>,
    /// Seconds.
    #[arg(long)]
    pub remote_timeout: Option<String>,
    /// Extra `key=value` forwarded to the remote sampler; repeatable.
    #[arg(long)]
    pub remote_passthrough: Vec<String>,
    /// Min-max scale features using training-set ranges.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub normalize: Option<String>,
    /// Count each distinct sampled bitstring once when ranking.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub dedup: Option<String>,
    /// Zero-based label column; defaults to the last one.
    #[arg(long)]
    pub label_column: Option<String>,
}

impl RunArgs {
    fn pairs(&self) -> Vec<(String, String)> {
        let fields = [
            ("classes", &self.classes),
            ("bits", &self.bits),
            ("beta", &self.beta),
            ("mu", &self.mu),
            ("gamma", &self.gamma),
            ("n-cap", &self.n_cap),
            ("m", &self.m),
            ("num-reads", &self.num_reads),
            ("solutions", &self.solutions),
            ("multiplier", &self.multiplier),
            ("max-min-ratio", &self.max_min_ratio),
            ("threshold", &self.threshold),
            ("sweeps", &self.sweeps),
            ("beta-hot", &self.beta_hot),
            ("beta-cold", &self.beta_cold),
            ("seed", &self.seed),
            ("selection", &self.selection),
            ("sampler", &self.sampler),
            ("remote-endpoint", &self.remote_endpoint),
            ("remote-timeout", &self.remote_timeout),
            ("normalize", &self.normalize),
            ("dedup", &self.dedup),
            ("label-column", &self.label_column),
        ];
        let mut out: Vec<(String, String)> =
            fields.into_iter().filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone()))).collect();
        out.extend(self.remote_passthrough.iter().map(|p| ("remote-passthrough".to_string(), p.clone())));
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerKind {
    Auto,
    Exact,
    Anneal,
    Remote,
}

/// Fully resolved run parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub classes: usize,
    pub bits: u32,
    pub beta: f64,
    pub mu: f64,
    pub gamma: f64,
    pub n_cap: Option<usize>,
    pub m: usize,
    pub num_reads: usize,
    pub solutions: usize,
    pub multiplier: f64,
    pub max_min_ratio: Option<f64>,
    pub threshold: Threshold,
    pub sweeps: usize,
    pub beta_hot: Option<f64>,
    pub beta_cold: Option<f64>,
    pub seed: u64,
    pub selection: SelectionMethod,
    pub sampler: SamplerKind,
    pub remote: RemoteConfig,
    pub normalize: bool,
    pub dedup: bool,
    pub label_column: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            classes: 3,
            bits: 2,
            beta: 1.0,
            mu: 1.0,
            gamma: 1.0,
            n_cap: None,
            m: 60,
            num_reads: 1000,
            solutions: 100,
            multiplier: 10.0,
            max_min_ratio: Some(15.0),
            threshold: Threshold::Blend,
            sweeps: 100,
            beta_hot: None,
            beta_cold: None,
            seed: 0,
            selection: SelectionMethod::Random,
            sampler: SamplerKind::Anneal,
            remote: RemoteConfig::new(""),
            normalize: false,
            dedup: false,
            label_column: None,
        }
    }
}

fn value<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| Error::Config(format!("invalid value {v:?} for {key}")))
}

fn flag(key: &str, v: &str) -> Result<bool> {
    match v.trim().to_ascii_lowercase().as_str() {
        "true" | "yes" | "on" | "1" => Ok(true),
        "false" | "no" | "off" | "0" => Ok(false),
        _ => Err(Error::Config(format!("invalid value {v:?} for {key}; expected true or false"))),
    }
}

fn optional_f64(key: &str, v: &str) -> Result<Option<f64>> {
    match v.trim() {
        "off" | "none" => Ok(None),
        s => value(key, s).map(Some),
    }
}

impl RunConfig {
    /// Applies one `key = value` setting. Keys accept `_` or `-`.
    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let key = key.trim().replace('_', "-");
        let k = key.as_str();
        match k {
            "classes" | "c" => self.classes = value(k, v)?,
            "bits" | "b" => self.bits = value(k, v)?,
            "beta" => self.beta = value(k, v)?,
            "mu" => self.mu = value(k, v)?,
            "gamma" => self.gamma = value(k, v)?,
            "n-cap" => self.n_cap = Some(value(k, v)?),
            "m" | "support-size" => self.m = value(k, v)?,
            "num-reads" => self.num_reads = value(k, v)?,
            "solutions" | "s" => self.solutions = value(k, v)?,
            "multiplier" => self.multiplier = value(k, v)?,
            "max-min-ratio" => self.max_min_ratio = optional_f64(k, v)?,
            "threshold" => {
                self.threshold = match v.trim() {
                    "blend" => Threshold::Blend,
                    s => Threshold::Fixed(value(k, s)?),
                }
            }
            "sweeps" => self.sweeps = value(k, v)?,
            "beta-hot" => self.beta_hot = optional_f64(k, v)?,
            "beta-cold" => self.beta_cold = optional_f64(k, v)?,
            "seed" => self.seed = value(k, v)?,
            "selection" => self.selection = v.trim().parse()?,
            "sampler" => {
                self.sampler = match v.trim() {
                    "auto" => SamplerKind::Auto,
                    "exact" => SamplerKind::Exact,
                    "sa" | "anneal" => SamplerKind::Anneal,
                    "remote" => SamplerKind::Remote,
                    other => {
                        return Err(Error::Config(format!("unknown sampler {other:?}; expected auto|exact|sa|remote")))
                    }
                }
            }
            "remote-endpoint" => self.remote.endpoint = v.trim().to_string(),
            "remote-timeout" => self.remote.timeout = value(k, v)?,
            "remote-passthrough" => self.remote.add_passthrough(v.trim())?,
            "normalize" => self.normalize = flag(k, v)?,
            "dedup" => self.dedup = flag(k, v)?,
            "label-column" => self.label_column = Some(value(k, v)?),
            _ => return Err(Error::Config(format!("unknown setting {key:?}"))),
        }
        Ok(())
    }

    /// Defaults, overridden by the config file, overridden by flags.
    pub fn resolve(file: &[(String, String)], args: &RunArgs) -> Result<Self> {
        let mut cfg = Self::default();
        for (k, v) in file.iter().chain(args.pairs().iter()) {
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    pub fn qubo_dim(&self) -> usize {
        self.m * self.classes * self.bits as usize
    }

    fn anneal(&self) -> AnnealConfig {
        AnnealConfig {
            num_reads: self.num_reads,
            sweeps: self.sweeps,
            beta_hot: self.beta_hot,
            beta_cold: self.beta_cold,
            seed: self.seed,
        }
    }

    /// Resolves `auto` against a problem of `dim` binary variables.
    pub fn sampler_for(&self, dim: usize) -> Result<SamplerChoice> {
        Ok(match self.sampler {
            SamplerKind::Auto if dim <= AUTO_EXACT_DIM => SamplerChoice::Exact,
            SamplerKind::Auto | SamplerKind::Anneal => SamplerChoice::Anneal(self.anneal()),
            SamplerKind::Exact => SamplerChoice::Exact,
            SamplerKind::Remote => {
                if self.remote.endpoint.is_empty() {
                    return Err(Error::Config("sampler=remote needs --remote-endpoint".into()));
                }
                SamplerChoice::Remote { config: self.remote.clone(), num_reads: self.num_reads }
            }
        })
    }

    /// Pipeline settings, validated against the configured class count.
    pub fn pipeline(&self) -> Result<PipelineConfig> {
        let cfg = PipelineConfig {
            qubo: QmsvmParams { bits: self.bits, beta: self.beta, mu: self.mu, max_min_ratio: self.max_min_ratio },
            gamma: self.gamma,
            selection: SelectionConfig { method: self.selection, size: self.m, seed: self.seed, ..Default::default() },
            sampler: self.sampler_for(self.qubo_dim())?,
            combine: CombineConfig {
                solutions: self.solutions,
                multiplier: self.multiplier,
                threshold: self.threshold,
                dedup: self.dedup,
            },
        };
        if self.classes < 2 {
            return Err(Error::Config(format!("need at least two classes, got {}", self.classes)));
        }
        if self.n_cap == Some(0) {
            return Err(Error::Config("n-cap must be positive".into()));
        }
        if !(self.multiplier.is_finite()) {
            return Err(Error::Config("multiplier must be finite".into()));
        }
        cfg.validate(self.classes)?;
        Ok(cfg)
    }
}

/// Parses flat `key = value` text; `#` starts a comment.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("config line {}: expected key = value", i + 1)))?;
        out.push((k.trim().to_string(), v.trim().trim_matches('"').to_string()));
    }
    Ok(out)
}

fn config_pairs(path: Option<&Path>) -> Result<Vec<(String, String)>> {
    let path = match path {
        Some(p) => p.to_path_buf(),
        None => match std::env::var_os(CONFIG_ENV) {
            Some(p) if !p.is_empty() => PathBuf::from(p),
            _ => return Ok(Vec::new()),
        },
    };
    let text =
        fs::read_to_string(&path).map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text)
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Labelled training CSV.
    pub input: PathBuf,
    /// Where to write the model.
    #[arg(long)]
    pub model: PathBuf,
    /// Labelled CSV used to score solutions; defaults to the training set.
    #[arg(long)]
    pub validation: Option<PathBuf>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Feature CSV (add --labelled if it carries a label column).
    pub input: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    /// Prediction file, one class index per line; stdout when absent.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Input has a label column: drop it and report accuracy.
    #[arg(long)]
    pub labelled: bool,
    /// Zero-based label column of a labelled input; defaults to the last.
    #[arg(long)]
    pub label_column: Option<usize>,
    /// Render predictions as a WIDTHxHEIGHT image.
    #[arg(long, value_name = "WxH")]
    pub raster: Option<String>,
    /// PPM output path for --raster.
    #[arg(long)]
    pub map: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Prediction file, one class index per line.
    #[arg(long)]
    pub predictions: PathBuf,
    /// Labelled CSV, or a file of one class index per line.
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long)]
    pub label_column: Option<usize>,
    /// Name in the `dataset` column; defaults to the truth file stem.
    #[arg(long)]
    pub dataset: Option<String>,
    /// Model whose support size fills the `M` column.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Value for the `seconds` column.
    #[arg(long, default_value_t = 0.0)]
    pub seconds: f64,
    /// Omit the CSV header.
    #[arg(long)]
    pub no_header: bool,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    /// Comma-separated training-set sizes.
    #[arg(long, value_delimiter = ',', default_value = "1000,2000,4000")]
    pub sizes: Vec<usize>,
    /// Size of the synthetic test set.
    #[arg(long, default_value_t = 500)]
    pub test_size: usize,
    /// Runs per size; phase times are medians.
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
    /// Labelled CSV to draw training subsets from instead of synthetic blobs.
    #[arg(long, requires = "test")]
    pub train: Option<PathBuf>,
    /// Labelled CSV for inference timing with --train.
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Distance between synthetic class centres.
    #[arg(long, default_value_t = 5.0)]
    pub separation: f64,
    #[arg(long, default_value_t = 1.0)]
    pub std_dev: f64,
    #[arg(long, default_value_t = 2)]
    pub features: usize,
    /// CSV destination; stdout when absent.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// QUBO text file.
    pub input: PathBuf,
    #[command(flatten)]
    pub run: RunArgs,
}

fn load_labelled(path: &Path, cfg: &RunConfig) -> Result<Dataset> {
    data::load_csv(path, cfg.label_column, cfg.classes)
}

fn parse_raster(s: &str) -> Result<(usize, usize)> {
    let bad = || Error::Config(format!("raster {s:?} is not WIDTHxHEIGHT"));
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(bad)?;
    Ok((w.trim().parse().map_err(|_| bad())?, h.trim().parse().map_err(|_| bad())?))
}

fn emit(out: &mut dyn Write, path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => out.write_all(text.as_bytes()).map_err(|e| Error::io("<stdout>", e)),
    }
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let file = config_pairs(cli.config.as_deref())?;
    match cli.command {
        Command::Train(a) => cmd_train(a, &file, out),
        Command::Predict(a) => cmd_predict(a, out),
        Command::Evaluate(a) => cmd_evaluate(a, &file, out),
        Command::Benchmark(a) => cmd_benchmark(a, &file, out),
        Command::SolveQubo(a) => cmd_solve_qubo(a, &file, out),
    }
}

pub fn cmd_train(a: TrainArgs, file: &[(String, String)], out: &mut dyn Write) -> Result<()> {
    let cfg = RunConfig::resolve(file, &a.run)?;
    let pcfg = cfg.pipeline()?;
    log::info!("settings {:?}", describe(&cfg));

    let mut train = load_labelled(&a.input, &cfg)?;
    if let Some(cap) = cfg.n_cap.filter(|&cap| cap < train.len()) {
        let pick = SelectionConfig { size: cap, seed: cfg.seed, ..Default::default() };
        train = crate::selection::select_random(&train, &pick)?;
    }
    let mut val = a.validation.as_deref().map(|p| load_labelled(p, &cfg)).transpose()?;
    let normalizer = cfg.normalize.then(|| MinMax::fit(train.features()));
    if let Some(n) = &normalizer {
        train = train.map_features(n.apply(train.features())?)?;
        val = val.map(|v| v.map_features(n.apply(v.features())?)).transpose()?;
    }

    let outcome = pipeline::train(&train, val.as_ref(), &pcfg)?;
    let mut model = outcome.model.clone();
    if let Some(n) = normalizer {
        model = model.with_normalizer(n)?;
    }
    model.save(&a.model)?;

    let mut report = String::new();
    for p in &outcome.phases {
        writeln!(report, "{:<12} {:>10.4}s  kernel_evals {}", p.phase.as_str(), p.seconds, p.kernel_evals).unwrap();
    }
    write!(report, "qubo: {} variables, {} entries", outcome.qubo_dim, outcome.qubo_entries).unwrap();
    if let Some(p) = &outcome.prune {
        write!(report, ", {} pruned below {:.6}", p.removed, p.threshold).unwrap();
    }
    report.push('\n');
    let survivors = outcome.weights.iter().filter(|&&w| w > 0.0).count();
    writeln!(
        report,
        "solutions: {} kept, {} above threshold {:.4}",
        outcome.accuracies.len(),
        survivors,
        outcome.threshold
    )
    .unwrap();
    writeln!(report, "best single-solution accuracy: {:.4}", outcome.best_single_accuracy()).unwrap();
    writeln!(report, "combined accuracy: {:.4}", outcome.combined_accuracy).unwrap();
    writeln!(report, "model written to {}", a.model.display()).unwrap();
    emit(out, None, &report)
}

pub fn cmd_predict(a: PredictArgs, out: &mut dyn Write) -> Result<()> {
    let raster = match (&a.raster, &a.map) {
        (Some(r), Some(_)) => Some(parse_raster(r)?),
        (Some(_), None) => return Err(Error::Config("--raster needs --map".into())),
        (None, Some(_)) => return Err(Error::Config("--map needs --raster".into())),
        (None, None) => None,
    };
    let model = TrainedModel::load(&a.model)?;
    let (x, truth) = if a.labelled {
        let d = data::load_csv(&a.input, a.label_column, model.classes())?;
        let labels = d.labels().to_vec();
        (d.features().clone(), Some(labels))
    } else {
        (data::load_features(&a.input)?, None)
    };
    let pred = model.predict(&x)?;
    if let (Some((w, h)), Some(map)) = (raster, &a.map) {
        data::export_map(&pred, &RasterSpec::with_default_palette(w, h, model.classes()), map)?;
    }
    match &a.output {
        Some(p) => data::write_predictions(&pred, p)?,
        None => {
            let mut text = String::with_capacity(pred.len() * 2);
            for p in &pred {
                writeln!(text, "{p}").unwrap();
            }
            emit(out, None, &text)?;
        }
    }
    if let Some(truth) = truth {
        log::info!("accuracy {:.4}", eval::accuracy(&pred, &truth)?);
        if a.output.is_some() {
            emit(out, None, &format!("accuracy: {:.4}\n", eval::accuracy(&pred, &truth)?))?;
        }
    }
    Ok(())
}

/// Label files hold one integer per line; anything with a comma is a CSV.
fn load_truth(path: &Path, label_column: Option<usize>, classes: usize) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if text.lines().any(|l| l.contains(',')) {
        Ok(data::parse_csv(&text, label_column, classes)?.labels().to_vec())
    } else {
        data::parse_predictions(&text)
    }
}

pub fn cmd_evaluate(a: EvaluateArgs, file: &[(String, String)], out: &mut dyn Write) -> Result<()> {
    let base = RunConfig::resolve(file, &RunArgs::default())?;
    let model = a.model.as_deref().map(TrainedModel::load).transpose()?;
    let classes = a.classes.or(model.as_ref().map(|m| m.classes())).unwrap_or(base.classes);
    let pred = data::read_predictions(&a.predictions)?;
    let truth = load_truth(&a.truth, a.label_column.or(base.label_column), classes)?;
    if pred.len() != truth.len() {
        return Err(Error::Shape(format!("{} predictions for {} truth labels", pred.len(), truth.len())));
    }
    let confusion = eval::Confusion::new(&pred, &truth, classes)?;
    let name =
        a.dataset.clone().or_else(|| a.truth.file_stem().map(|s| s.to_string_lossy().into_owned())).unwrap_or_default();
    let m = model.as_ref().map_or(0, |m| m.support().rows());
    let mut text = String::new();
    if !a.no_header {
        writeln!(text, "{}", eval::METRICS_HEADER).unwrap();
    }
    writeln!(
        text,
        "{}",
        eval::metrics_line(&name, truth.len(), m, confusion.accuracy(), confusion.macro_f1(), a.seconds)
    )
    .unwrap();
    emit(out, None, &text)
}

pub fn cmd_benchmark(a: BenchmarkArgs, file: &[(String, String)], out: &mut dyn Write) -> Result<()> {
    let cfg = RunConfig::resolve(file, &a.run)?;
    let pipeline = cfg.pipeline()?;
    if a.sizes.is_empty() {
        return Err(Error::Config("no benchmark sizes".into()));
    }
    let source = match (&a.train, &a.test) {
        (Some(train), Some(test)) => {
            BenchmarkSource::Dataset { train: load_labelled(train, &cfg)?, test: load_labelled(test, &cfg)? }
        }
        _ => BenchmarkSource::Synthetic(BlobsConfig {
            classes: cfg.classes,
            features: a.features,
            separation: a.separation,
            std_dev: a.std_dev,
        }),
    };
    let bench = BenchmarkConfig {
        sizes: a.sizes.clone(),
        test_size: a.test_size,
        repeats: a.repeats,
        seed: cfg.seed,
        source,
        pipeline,
    };
    let started = Instant::now();
    let reports = eval::benchmark(&bench)?;
    log::info!("benchmark finished in {:.1}s", started.elapsed().as_secs_f64());
    emit(out, a.output.as_deref(), &eval::timing_csv(&reports))
}

pub fn cmd_solve_qubo(a: SolveArgs, file: &[(String, String)], out: &mut dyn Write) -> Result<()> {
    let cfg = RunConfig::resolve(file, &a.run)?;
    let q = QuboProblem::read(&a.input)?;
    let set: SampleSet = match cfg.sampler_for(q.dim())? {
        SamplerChoice::Exact => ExactSolver.solve(&q)?,
        SamplerChoice::Anneal(sa) => {
            sa.validate()?;
            SimulatedAnnealing::new(sa).solve(&q)?
        }
        SamplerChoice::Remote { config, num_reads } => {
            config.validate()?;
            RemoteSampler::new(config, num_reads).solve(&q)?.samples
        }
    };
    emit(out, None, &set.to_text())
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match run(cli, &mut lock) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Core hyperparameters as display strings.
pub fn describe(cfg: &RunConfig) -> BTreeMap<&'static str, String> {
    BTreeMap::from([
        ("C", cfg.classes.to_string()),
        ("B", cfg.bits.to_string()),
        ("beta", cfg.beta.to_string()),
        ("mu", cfg.mu.to_string()),
        ("gamma", cfg.gamma.to_string()),
        ("M", cfg.m.to_string()),
        ("num_reads", cfg.num_reads.to_string()),
        ("S", cfg.solutions.to_string()),
        ("multiplier", cfg.multiplier.to_string()),
        ("max_min_ratio", cfg.max_min_ratio.map_or("off".into(), |r| r.to_string())),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(list: &[&str]) -> RunArgs {
        let mut full = vec!["qmsvm", "solve-qubo", "x"];
        full.extend_from_slice(list);
        match Cli::try_parse_from(full).unwrap().command {
            Command::SolveQubo(s) => s.run,
            _ => unreachable!(),
        }
    }

    #[test]
    fn defaults_match_table() {
        let c = RunConfig::default();
        assert_eq!((c.classes, c.bits, c.m, c.num_reads, c.solutions), (3, 2, 60, 1000, 100));
        assert_eq!((c.beta, c.mu, c.gamma, c.multiplier), (1.0, 1.0, 1.0, 10.0));
        assert_eq!(c.max_min_ratio, Some(15.0));
        assert_eq!(describe(&c)["max_min_ratio"], "15");
    }

    #[test]
    fn flag_beats_file_beats_default() {
        let file = parse_config("m = 30\nnum_reads = 10 # comment\n\nbeta=2\n").unwrap();
        let cfg = RunConfig::resolve(&file, &args(&["--m", "12"])).unwrap();
        assert_eq!(cfg.m, 12);
        assert_eq!(cfg.num_reads, 10);
        assert_eq!(cfg.beta, 2.0);
        assert_eq!(cfg.mu, 1.0);
    }

    #[test]
    fn parses_special_values() {
        let cfg = RunConfig::resolve(
            &[],
            &args(&[
                "--max-min-ratio",
                "off",
                "--threshold",
                "0.5",
                "--normalize",
                "--sampler",
                "sa",
                "--remote-passthrough",
                "chain_strength=2",
            ]),
        )
        .unwrap();
        assert_eq!(cfg.max_min_ratio, None);
        assert_eq!(cfg.threshold, Threshold::Fixed(0.5));
        assert!(cfg.normalize);
        assert_eq!(cfg.sampler, SamplerKind::Anneal);
        assert_eq!(cfg.remote.passthrough["chain_strength"], serde_json::json!(2));
    }

    #[test]
    fn config_errors() {
        assert!(matches!(parse_config("novalue"), Err(Error::Config(_))));
        assert!(matches!(
            RunConfig::resolve(&[("bogus".into(), "1".into())], &RunArgs::default()),
            Err(Error::Config(_))
        ));
        assert!(matches!(RunConfig::resolve(&[], &args(&["--m", "x"])), Err(Error::Config(_))));
        assert!(matches!(RunConfig::resolve(&[], &args(&["--sampler", "quantum"])), Err(Error::Config(_))));

        let cfg = RunConfig::resolve(&[], &args(&["--m", "61", "--selection", "kmeans"])).unwrap();
        assert!(cfg.pipeline().unwrap_err().to_string().contains("M not divisible by C"));
        let cfg = RunConfig::resolve(&[], &args(&["--m", "5", "--sampler", "exact"])).unwrap();
        let err = cfg.pipeline().unwrap_err();
        assert!(err.to_string().contains("capacity"));
        assert_eq!(err.exit_code(), 2);
        let cfg = RunConfig::resolve(&[], &args(&["--sampler", "remote"])).unwrap();
        assert!(matches!(cfg.pipeline(), Err(Error::Config(_))));
    }

    #[test]
    fn auto_sampler_switches_on_dimension() {
        let cfg = RunConfig { sampler: SamplerKind::Auto, ..Default::default() };
        assert_eq!(RunConfig::default().sampler_for(4).unwrap(), SamplerChoice::Anneal(RunConfig::default().anneal()));
        assert_eq!(cfg.sampler_for(20).unwrap(), SamplerChoice::Exact);
        assert!(matches!(cfg.sampler_for(21).unwrap(), SamplerChoice::Anneal(_)));
    }

    #[test]
    fn raster_sizes() {
        assert_eq!(parse_raster("20x30").unwrap(), (20, 30));
        assert!(parse_raster("20").is_err());
        assert!(parse_raster("ax3").is_err());
    }
}
