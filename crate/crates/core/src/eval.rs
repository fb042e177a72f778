//! Classification metrics, a synthetic blob generator and the timing
//! benchmark used for the scaling analysis.

use std::fmt::Write as _;
use std::time::Instant;

use rand_distr::{Distribution, Normal};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::pipeline::{self, PipelineConfig};
use crate::selection::{select_random, SelectionConfig};
use crate::stream_rng;

/// `counts[truth][pred]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Confusion {
    classes: usize,
    counts: Vec<u64>,
}

impl Confusion {
    pub fn new(pred: &[usize], truth: &[usize], classes: usize) -> Result<Self> {
        if pred.is_empty() {
            return Err(Error::Data("no predictions to evaluate".into()));
        }
        if pred.len() != truth.len() {
            return Err(Error::Shape(format!("{} predictions for {} labels", pred.len(), truth.len())));
        }
        let mut counts = vec![0; classes * classes];
        for (&p, &t) in pred.iter().zip(truth) {
            if p >= classes || t >= classes {
                return Err(Error::Data(format!("class index {} outside [0, {classes})", p.max(t))));
            }
            counts[t * classes + p] += 1;
        }
        Ok(Self { classes, counts })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.classes + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn accuracy(&self) -> f64 {
        let hits: u64 = (0..self.classes).map(|c| self.get(c, c)).sum();
        hits as f64 / self.total() as f64
    }

    /// `TP / (TP + (FN + FP) / 2)`; a class absent from both truth and
    /// predictions scores 1.
    pub fn f1(&self, class: usize) -> f64 {
        let tp = self.get(class, class) as f64;
        let fn_: f64 = (0..self.classes).filter(|&p| p != class).map(|p| self.get(class, p) as f64).sum();
        let fp: f64 = (0..self.classes).filter(|&t| t != class).map(|t| self.get(t, class) as f64).sum();
        let denom = tp + 0.5 * (fn_ + fp);
        if denom == 0.0 {
            1.0
        } else {
            tp / denom
        }
    }

    pub fn macro_f1(&self) -> f64 {
        (0..self.classes).map(|c| self.f1(c)).sum::<f64>() / self.classes as f64
    }
}

fn implied_classes(pred: &[usize], truth: &[usize]) -> usize {
    pred.iter().chain(truth).max().map_or(1, |&m| m + 1)
}

pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    Ok(Confusion::new(pred, truth, implied_classes(pred, truth))?.accuracy())
}

pub fn macro_f1(pred: &[usize], truth: &[usize], classes: usize) -> Result<f64> {
    Ok(Confusion::new(pred, truth, classes)?.macro_f1())
}

pub const METRICS_HEADER: &str = "dataset,N,M,accuracy,f1,seconds";
pub const TIMING_HEADER: &str = "N,phase,seconds,kernel_evals";

pub fn metrics_line(dataset: &str, n: usize, m: usize, accuracy: f64, f1: f64, seconds: f64) -> String {
    format!("{dataset},{n},{m},{accuracy},{f1},{seconds}")
}

/// Isotropic Gaussian classes centred on a regular polygon in the first two
/// feature dimensions; adjacent centres are `separation` apart. For three
/// classes this is an equilateral triangle of side `separation`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlobsConfig {
    pub classes: usize,
    pub features: usize,
    pub separation: f64,
    pub std_dev: f64,
}

impl Default for BlobsConfig {
    fn default() -> Self {
        Self { classes: 3, features: 2, separation: 5.0, std_dev: 1.0 }
    }
}

impl BlobsConfig {
    pub fn centres(&self) -> Vec<Vec<f64>> {
        let c = self.classes;
        let radius = if c > 1 { self.separation / (2.0 * (std::f64::consts::PI / c as f64).sin()) } else { 0.0 };
        (0..c)
            .map(|k| {
                let angle = 2.0 * std::f64::consts::PI * k as f64 / c as f64;
                let mut p = vec![0.0; self.features];
                p[0] = radius * angle.cos();
                if self.features > 1 {
                    p[1] = radius * angle.sin();
                }
                p
            })
            .collect()
    }
}

/// `n` examples with labels cycling through the classes.
pub fn blobs(n: usize, cfg: &BlobsConfig, seed: u64) -> Result<Dataset> {
    if cfg.classes == 0 || cfg.features == 0 {
        return Err(Error::Config("blobs need at least one class and one feature".into()));
    }
    let noise = Normal::new(0.0, cfg.std_dev).map_err(|e| Error::Config(format!("blob standard deviation: {e}")))?;
    let centres = cfg.centres();
    let mut rng = stream_rng(seed, 0);
    let mut data = Vec::with_capacity(n * cfg.features);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % cfg.classes;
        data.extend(centres[c].iter().map(|m| m + noise.sample(&mut rng)));
        labels.push(c);
    }
    Dataset::new(Matrix::new(n, cfg.features, data)?, labels, cfg.classes)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Selection,
    Sampling,
    Combination,
    Inference,
}

impl Phase {
    pub const ALL: [Phase; 4] = [Phase::Selection, Phase::Sampling, Phase::Combination, Phase::Inference];

    pub fn as_str(&self) -> &'static str {
        match self {
            Phase::Selection => "selection",
            Phase::Sampling => "sampling",
            Phase::Combination => "combination",
            Phase::Inference => "inference",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseTiming {
    pub phase: Phase,
    pub seconds: f64,
    pub kernel_evals: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingReport {
    pub n: usize,
    pub m: usize,
    pub c: usize,
    pub b: usize,
    pub phases: Vec<PhaseTiming>,
    pub test_accuracy: f64,
}

impl TimingReport {
    pub fn phase(&self, phase: Phase) -> &PhaseTiming {
        self.phases.iter().find(|p| p.phase == phase).expect("every phase is recorded")
    }
}

pub fn timing_csv(reports: &[TimingReport]) -> String {
    let mut out = format!("{TIMING_HEADER}\n");
    for r in reports {
        for p in &r.phases {
            writeln!(out, "{},{},{},{}", r.n, p.phase.as_str(), p.seconds, p.kernel_evals).unwrap();
        }
    }
    out
}

/// Where benchmark training sets come from.
#[derive(Debug, Clone)]
pub enum BenchmarkSource {
    /// Fresh blobs of each requested size, plus one fixed test set.
    Synthetic(BlobsConfig),
    /// Random subsets of `train` of each requested size, tested on `test`.
    Dataset { train: Dataset, test: Dataset },
}

#[derive(Debug, Clone)]
pub struct BenchmarkConfig {
    pub sizes: Vec<usize>,
    pub test_size: usize,
    /// Runs per size; the median time is reported.
    pub repeats: usize,
    pub seed: u64,
    pub source: BenchmarkSource,
    pub pipeline: PipelineConfig,
}

/// Number of timed inference passes per size, after one warm-up pass.
const INFERENCE_ROUNDS: usize = 21;

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Runs the full pipeline (plus inference on the test set) for each
/// training-set size, serially. Repeats and inference passes cycle through
/// all sizes in turn so drifts in machine speed affect every size alike;
/// each phase reports its median time.
pub fn benchmark(cfg: &BenchmarkConfig) -> Result<Vec<TimingReport>> {
    if cfg.repeats == 0 {
        return Err(Error::Config("benchmark repeats must be positive".into()));
    }
    let m = cfg.pipeline.selection.size;
    if let Some(&n) = cfg.sizes.iter().find(|&&n| n < m) {
        return Err(Error::Config(format!("M={m} exceeds N={n}")));
    }
    let test = match &cfg.source {
        BenchmarkSource::Synthetic(b) => blobs(cfg.test_size, b, cfg.seed ^ 0x7e57)?,
        BenchmarkSource::Dataset { test, .. } => test.clone(),
    };
    let mut trains = Vec::with_capacity(cfg.sizes.len());
    for &n in &cfg.sizes {
        let train = match &cfg.source {
            BenchmarkSource::Synthetic(b) => blobs(n, b, cfg.seed.wrapping_add(n as u64))?,
            BenchmarkSource::Dataset { train, .. } => {
                let pick = SelectionConfig { size: n, seed: cfg.seed, ..Default::default() };
                select_random(train, &pick)?
            }
        };
        cfg.pipeline.validate(train.classes())?;
        trains.push(train);
    }

    let k = cfg.sizes.len();
    let mut seconds = vec![vec![Vec::with_capacity(cfg.repeats); Phase::ALL.len()]; k];
    let mut evals = vec![[0u64; 4]; k];
    let mut models = Vec::with_capacity(k);
    for rep in 0..cfg.repeats {
        for (i, train) in trains.iter().enumerate() {
            let outcome = pipeline::train(train, None, &cfg.pipeline)?;
            for (j, p) in outcome.phases.iter().enumerate() {
                seconds[i][j].push(p.seconds);
                evals[i][j] = p.kernel_evals;
            }
            if rep + 1 == cfg.repeats {
                models.push(outcome.model);
            }
        }
    }

    let mut accuracies = Vec::with_capacity(k);
    for (i, model) in models.iter().enumerate() {
        let kernel = model.kernel();
        let pred = model.predict_with(test.features(), &kernel)?;
        accuracies.push(accuracy(&pred, test.labels())?);
        evals[i][3] = kernel.evals();
    }
    for _ in 0..INFERENCE_ROUNDS {
        for (i, model) in models.iter().enumerate() {
            let start = Instant::now();
            std::hint::black_box(model.predict(test.features())?);
            seconds[i][3].push(start.elapsed().as_secs_f64());
        }
    }

    let reports = (0..k)
        .map(|i| TimingReport {
            n: cfg.sizes[i],
            m,
            c: trains[i].classes(),
            b: cfg.pipeline.qubo.bits as usize,
            phases: Phase::ALL
                .iter()
                .enumerate()
                .map(|(j, &phase)| PhaseTiming {
                    phase,
                    seconds: median(seconds[i][j].clone()),
                    kernel_evals: evals[i][j],
                })
                .collect(),
            test_accuracy: accuracies[i],
        })
        .collect();
    Ok(reports)
}
