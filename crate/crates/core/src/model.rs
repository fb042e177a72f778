//! From a sample set to a classifier: rank the best samples, score each on a
//! validation set, blend them with accuracy-based softmax weights and predict
//! with `argmax_c sum_n tau_bar[n][c] K(x, x_n)`.

use std::fmt::Write as _;
use std::path::Path;

use crate::data::{Dataset, MinMax};
use crate::error::{Error, Result};
use crate::kernel::{Kernel, KernelParams};
use crate::matrix::Matrix;
use crate::qubo::{decode_bits, QuboMeta, SolutionMatrix};
use crate::sampler::SampleSet;

const MODEL_MAGIC: &str = "qmsvm-model";
const MODEL_VERSION: &str = "v1";

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    /// `0.2 * min(acc) + 0.8 * max(acc)`.
    Blend,
    Fixed(f64),
}

impl Threshold {
    pub fn value(&self, accuracies: &[f64]) -> f64 {
        match *self {
            Threshold::Blend => {
                let lo = accuracies.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = accuracies.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                // rounding could otherwise push it past `hi` when all are equal
                (0.2 * lo + 0.8 * hi).min(hi)
            }
            Threshold::Fixed(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CombineConfig {
    /// Number of lowest-energy samples kept (`S`).
    pub solutions: usize,
    pub multiplier: f64,
    pub threshold: Threshold,
    /// Count each distinct bitstring once instead of once per read.
    pub dedup: bool,
}

impl Default for CombineConfig {
    fn default() -> Self {
        Self { solutions: 100, multiplier: 10.0, threshold: Threshold::Blend, dedup: false }
    }
}

/// Decodes the `s` lowest-energy reads. Repeated reads of one bitstring fill
/// several slots unless `dedup` is set.
pub fn rank_solutions(ss: &SampleSet, meta: QuboMeta, s: usize, dedup: bool) -> Result<Vec<SolutionMatrix>> {
    if ss.is_empty() {
        return Err(Error::Sampler("sample set is empty".into()));
    }
    if s == 0 {
        return Err(Error::Config("number of kept solutions S must be positive".into()));
    }
    let mut out = Vec::with_capacity(s);
    for sample in ss.samples() {
        let t = decode_bits(&sample.bits, meta)?;
        let copies = if dedup { 1 } else { sample.occurrences.min((s - out.len()) as u64) as usize };
        for _ in 0..copies {
            out.push(t.clone());
        }
        if out.len() == s {
            break;
        }
    }
    Ok(out)
}

/// Score table `scores[q][c] = sum_n tau[n][c] * kmat[q][n]` for a `Q x M` kernel matrix.
pub fn decision_scores(tau: &Matrix, kmat: &Matrix) -> Result<Matrix> {
    if kmat.cols() != tau.rows() {
        return Err(Error::Shape(format!(
            "kernel matrix has {} columns for {} support examples",
            kmat.cols(),
            tau.rows()
        )));
    }
    let c = tau.cols();
    let mut scores = Matrix::zeros(kmat.rows(), c);
    for q in 0..kmat.rows() {
        let out = scores.row_mut(q);
        for (n, &k) in kmat.row(q).iter().enumerate() {
            for (o, t) in out.iter_mut().zip(tau.row(n)) {
                *o += t * k;
            }
        }
    }
    Ok(scores)
}

/// Row-wise argmax; ties go to the smallest class index.
pub fn argmax_rows(scores: &Matrix) -> Vec<usize> {
    scores
        .iter_rows()
        .map(|r| {
            let mut best = 0;
            for (c, &v) in r.iter().enumerate().skip(1) {
                if v > r[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

/// Accuracy of `tau` against `labels` given the precomputed `Q x M` kernel matrix.
pub fn kernel_accuracy(tau: &Matrix, kmat: &Matrix, labels: &[usize]) -> Result<f64> {
    if labels.len() != kmat.rows() || labels.is_empty() {
        return Err(Error::Shape(format!("{} labels for {} kernel rows", labels.len(), kmat.rows())));
    }
    let pred = argmax_rows(&decision_scores(tau, kmat)?);
    let hits = pred.iter().zip(labels).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / labels.len() as f64)
}

fn check_support(support: &Dataset, val: &Dataset, m: usize, c: usize) -> Result<()> {
    if support.len() != m || support.classes() != c {
        return Err(Error::Shape(format!(
            "solution is {m}x{c}, support set has {} examples and {} classes",
            support.len(),
            support.classes()
        )));
    }
    if val.n_features() != support.n_features() {
        return Err(Error::Shape(format!(
            "validation set has {} features, support set {}",
            val.n_features(),
            support.n_features()
        )));
    }
    Ok(())
}

/// Validation accuracy of every solution from one shared `N x M` kernel
/// matrix, so the whole call costs exactly `N * M` kernel evaluations.
pub fn validation_accuracies(
    solutions: &[SolutionMatrix],
    support: &Dataset,
    val: &Dataset,
    kernel: &Kernel,
) -> Result<Vec<f64>> {
    let Some(first) = solutions.first() else {
        return Ok(Vec::new());
    };
    check_support(support, val, first.tau().rows(), first.tau().cols())?;
    let kmat = kernel.matrix(val.features(), support.features())?;
    solutions.iter().map(|t| kernel_accuracy(t.tau(), &kmat, val.labels())).collect()
}

pub fn validation_accuracy(t: &SolutionMatrix, support: &Dataset, val: &Dataset, kernel: &Kernel) -> Result<f64> {
    Ok(validation_accuracies(std::slice::from_ref(t), support, val, kernel)?[0])
}

#[derive(Debug, Clone, PartialEq)]
pub struct Combination {
    pub tau_bar: Matrix,
    /// Zero for discarded solutions; survivors sum to one.
    pub weights: Vec<f64>,
    pub threshold: f64,
}

/// Accuracy-weighted blend `tau_bar = (1/S) sum_s w_s T_s`, `S` being the
/// number of solutions passed in. Solutions below the threshold get weight
/// exactly zero; survivors share a softmax of `multiplier * accuracy`.
pub fn combine(solutions: &[SolutionMatrix], accuracies: &[f64], cfg: &CombineConfig) -> Result<Combination> {
    if solutions.is_empty() {
        return Err(Error::Data("no solutions to combine".into()));
    }
    if solutions.len() != accuracies.len() {
        return Err(Error::Shape(format!("{} solutions with {} accuracies", solutions.len(), accuracies.len())));
    }
    let threshold = cfg.threshold.value(accuracies);
    let survives: Vec<bool> = accuracies.iter().map(|&a| a >= threshold).collect();
    if !survives.iter().any(|&s| s) {
        return Err(Error::Data(format!("no solution reaches the accuracy threshold {threshold}")));
    }
    let top = accuracies
        .iter()
        .zip(&survives)
        .filter(|(_, &s)| s)
        .map(|(&a, _)| cfg.multiplier * a)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut weights: Vec<f64> = accuracies
        .iter()
        .zip(&survives)
        .map(|(&a, &s)| if s { (cfg.multiplier * a - top).exp() } else { 0.0 })
        .collect();
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }

    let first = solutions[0].tau();
    let mut tau_bar = Matrix::zeros(first.rows(), first.cols());
    let inv_s = 1.0 / solutions.len() as f64;
    for (t, &w) in solutions.iter().zip(&weights) {
        if w == 0.0 {
            continue;
        }
        let t = t.tau();
        if (t.rows(), t.cols()) != (first.rows(), first.cols()) {
            return Err(Error::Shape("solutions have different shapes".into()));
        }
        for i in 0..t.rows() {
            for (dst, v) in tau_bar.row_mut(i).iter_mut().zip(t.row(i)) {
                *dst += inv_s * w * v;
            }
        }
    }
    Ok(Combination { tau_bar, weights, threshold })
}

fn read_block<'a>(
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
    rows: usize,
    width: usize,
    what: &str,
) -> Result<Matrix> {
    let mut data = Vec::with_capacity(rows * width);
    for _ in 0..rows {
        let (ln, l) = lines.next().ok_or_else(|| Error::Data(format!("truncated model file: missing {what} rows")))?;
        let vals = l
            .split_whitespace()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::parse(ln, format!("non-numeric {what} value")))?;
        if vals.len() != width {
            return Err(Error::Shape(format!("line {ln}: {what} row has {} values, expected {width}", vals.len())));
        }
        data.extend(vals);
    }
    Matrix::new(rows, width, data)
}

/// Support examples, blended dual variables and kernel width: everything
/// needed to classify new points.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    support: Matrix,
    tau_bar: Matrix,
    gamma: f64,
    classes: usize,
    normalizer: Option<MinMax>,
}

impl TrainedModel {
    pub fn new(support: Matrix, tau_bar: Matrix, gamma: f64, classes: usize) -> Result<Self> {
        KernelParams::new(gamma)?;
        if support.rows() == 0 || support.cols() == 0 {
            return Err(Error::Shape("model needs at least one support example and feature".into()));
        }
        if tau_bar.rows() != support.rows() || tau_bar.cols() != classes || classes == 0 {
            return Err(Error::Shape(format!(
                "tau_bar is {}x{}, expected {}x{classes}",
                tau_bar.rows(),
                tau_bar.cols(),
                support.rows()
            )));
        }
        if !tau_bar.is_finite() || !support.is_finite() {
            return Err(Error::Data("model contains non-finite values".into()));
        }
        Ok(Self { support, tau_bar, gamma, classes, normalizer: None })
    }

    /// Attach the scaling applied to inputs before prediction. Support rows
    /// are expected to be in the scaled space already.
    pub fn with_normalizer(mut self, normalizer: MinMax) -> Result<Self> {
        if normalizer.min.len() != self.support.cols() || normalizer.max.len() != self.support.cols() {
            return Err(Error::Shape("normalizer width differs from feature count".into()));
        }
        self.normalizer = Some(normalizer);
        Ok(self)
    }

    pub fn support(&self) -> &Matrix {
        &self.support
    }

    pub fn tau_bar(&self) -> &Matrix {
        &self.tau_bar
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn n_features(&self) -> usize {
        self.support.cols()
    }

    pub fn normalizer(&self) -> Option<&MinMax> {
        self.normalizer.as_ref()
    }

    /// Same model with `tau_bar` multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self { tau_bar: self.tau_bar.scaled(factor), ..self.clone() }
    }

    /// Fresh kernel with this model's width.
    pub fn kernel(&self) -> Kernel {
        Kernel::new(KernelParams::new(self.gamma).expect("validated on construction"))
    }

    pub fn decision_scores(&self, x: &Matrix, kernel: &Kernel) -> Result<Matrix> {
        if x.cols() != self.n_features() {
            return Err(Error::Shape(format!("input has {} features, model expects {}", x.cols(), self.n_features())));
        }
        if kernel.gamma() != self.gamma {
            return Err(Error::Config(format!("kernel gamma {} != model gamma {}", kernel.gamma(), self.gamma)));
        }
        let scaled;
        let x = match &self.normalizer {
            Some(n) => {
                scaled = n.apply(x)?;
                &scaled
            }
            None => x,
        };
        // one kernel row at a time; same accumulation order as `decision_scores`
        let mut krow = vec![0.0; self.support.rows()];
        let mut scores = Matrix::zeros(x.rows(), self.classes);
        for q in 0..x.rows() {
            kernel.row_into(x.row(q), &self.support, &mut krow)?;
            let out = scores.row_mut(q);
            for (n, &k) in krow.iter().enumerate() {
                for (o, t) in out.iter_mut().zip(self.tau_bar.row(n)) {
                    *o += t * k;
                }
            }
        }
        Ok(scores)
    }

    /// Exactly `M` kernel evaluations per input row, counted on `kernel`.
    pub fn predict_with(&self, x: &Matrix, kernel: &Kernel) -> Result<Vec<usize>> {
        Ok(argmax_rows(&self.decision_scores(x, kernel)?))
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<usize>> {
        self.predict_with(x, &self.kernel())
    }

    pub fn to_text(&self) -> String {
        let (m, f) = (self.support.rows(), self.support.cols());
        let mut out = format!("{MODEL_MAGIC} {MODEL_VERSION} {m} {} {f} {}\n", self.classes, self.gamma);
        let mut line = |vals: &[f64]| {
            let strs: Vec<String> = vals.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{}", strs.join(" ")).unwrap();
        };
        for r in self.support.iter_rows() {
            line(r);
        }
        for r in self.tau_bar.iter_rows() {
            line(r);
        }
        if let Some(n) = &self.normalizer {
            out.push_str("minmax\n");
            let mut line = |vals: &[f64]| {
                let strs: Vec<String> = vals.iter().map(|v| v.to_string()).collect();
                writeln!(out, "{}", strs.join(" ")).unwrap();
            };
            line(&n.min);
            line(&n.max);
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
        let (_, header) = lines.next().ok_or_else(|| Error::Version("empty model file".into()))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() < 2 || h[0] != MODEL_MAGIC || h[1] != MODEL_VERSION {
            return Err(Error::Version(format!("expected `{MODEL_MAGIC} {MODEL_VERSION}` header, got {header:?}")));
        }
        if h.len() != 6 {
            return Err(Error::parse(1, "header must be `qmsvm-model v1 M C F gamma`"));
        }
        let dims = h[2..5]
            .iter()
            .map(|s| s.parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::parse(1, "M, C and F must be integers"))?;
        let (m, c, f) = (dims[0], dims[1], dims[2]);
        let gamma: f64 = h[5].parse().map_err(|_| Error::parse(1, "gamma must be a number"))?;

        let support = read_block(&mut lines, m, f, "support")?;
        let tau_bar = read_block(&mut lines, m, c, "tau")?;
        let normalizer = match lines.next() {
            Some((_, "minmax")) => {
                let mm = read_block(&mut lines, 2, f, "minmax")?;
                Some(MinMax { min: mm.row(0).to_vec(), max: mm.row(1).to_vec() })
            }
            Some((ln, l)) if !l.is_empty() => {
                return Err(Error::parse(ln, format!("unexpected trailing content {l:?}")));
            }
            _ => None,
        };
        let model = TrainedModel::new(support, tau_bar, gamma, c)?;
        match normalizer {
            Some(n) => model.with_normalizer(n),
            None => Ok(model),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_text(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}
