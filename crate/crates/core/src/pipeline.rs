//! End-to-end training: select a support subset, build and sample the QUBO,
//! then score and blend the best samples into a [`TrainedModel`].

use std::time::Instant;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::eval::{Phase, PhaseTiming};
use crate::kernel::{Kernel, KernelParams};
use crate::model::{self, combine, kernel_accuracy, CombineConfig, TrainedModel};
use crate::qubo::{build_qubo_with_stats, PruneStats, QmsvmParams};
use crate::sampler::{
    AnnealConfig, ExactSolver, RemoteConfig, RemoteSampler, SampleSet, Sampler, SimulatedAnnealing, MAX_EXACT_DIM,
};
use crate::selection::{select, SelectionConfig};

#[derive(Debug, Clone, PartialEq)]
pub enum SamplerChoice {
    Exact,
    Anneal(AnnealConfig),
    Remote { config: RemoteConfig, num_reads: usize },
}

impl SamplerChoice {
    pub fn build(&self) -> Box<dyn Sampler> {
        match self {
            SamplerChoice::Exact => Box::new(ExactSolver),
            SamplerChoice::Anneal(cfg) => Box::new(SimulatedAnnealing::new(cfg.clone())),
            SamplerChoice::Remote { config, num_reads } => Box::new(RemoteSampler::new(config.clone(), *num_reads)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub qubo: QmsvmParams,
    pub gamma: f64,
    pub selection: SelectionConfig,
    pub sampler: SamplerChoice,
    pub combine: CombineConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            qubo: QmsvmParams::default(),
            gamma: 1.0,
            selection: SelectionConfig::default(),
            sampler: SamplerChoice::Anneal(AnnealConfig::default()),
            combine: CombineConfig::default(),
        }
    }
}

impl PipelineConfig {
    /// Everything checkable from the configuration and the class count alone.
    pub fn validate(&self, classes: usize) -> Result<()> {
        self.qubo.validate()?;
        KernelParams::new(self.gamma)?;
        self.selection.validate(classes)?;
        if self.combine.solutions == 0 {
            return Err(Error::Config("number of kept solutions S must be positive".into()));
        }
        let dim = self.selection.size * classes * self.qubo.bits as usize;
        match &self.sampler {
            SamplerChoice::Exact if dim > MAX_EXACT_DIM => {
                Err(Error::Config(format!("exact sampler capacity exceeded: M*C*B = {dim} > {MAX_EXACT_DIM}")))
            }
            SamplerChoice::Anneal(a) => a.validate(),
            SamplerChoice::Remote { config, num_reads } => {
                if *num_reads == 0 {
                    return Err(Error::Config("num_reads must be positive".into()));
                }
                config.validate()
            }
            SamplerChoice::Exact => Ok(()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: TrainedModel,
    pub subset: Dataset,
    pub qubo_dim: usize,
    pub qubo_entries: usize,
    pub prune: Option<PruneStats>,
    pub samples: SampleSet,
    /// Validation accuracy of each kept solution, lowest energy first.
    pub accuracies: Vec<f64>,
    pub weights: Vec<f64>,
    pub threshold: f64,
    pub combined_accuracy: f64,
    /// Selection, sampling and combination, in that order.
    pub phases: Vec<PhaseTiming>,
}

impl TrainOutcome {
    pub fn best_single_accuracy(&self) -> f64 {
        self.accuracies.iter().copied().fold(0.0, f64::max)
    }

    /// Accuracy of the single lowest-energy sample.
    pub fn ground_accuracy(&self) -> f64 {
        self.accuracies[0]
    }
}

/// Runs selection, QUBO sampling and solution combination. `val` defaults
/// to the full training set.
pub fn train(train: &Dataset, val: Option<&Dataset>, cfg: &PipelineConfig) -> Result<TrainOutcome> {
    cfg.validate(train.classes())?;
    if cfg.selection.size > train.len() {
        return Err(Error::Config(format!("M={} exceeds N={}", cfg.selection.size, train.len())));
    }
    let val = val.unwrap_or(train);
    if val.n_features() != train.n_features() || val.classes() != train.classes() {
        return Err(Error::Shape("validation set does not match the training set".into()));
    }
    let kernel = Kernel::new(KernelParams::new(cfg.gamma)?);
    let mut phases = Vec::with_capacity(3);
    let mut mark = |phase, start: Instant, before: u64, kernel: &Kernel| {
        phases.push(PhaseTiming {
            phase,
            seconds: start.elapsed().as_secs_f64(),
            kernel_evals: kernel.evals() - before,
        })
    };

    let start = Instant::now();
    let subset = select(train, &cfg.selection).map_err(|e| e.context("selection"))?;
    mark(Phase::Selection, start, 0, &kernel);

    let (start, before) = (Instant::now(), kernel.evals());
    let k_sub = kernel.matrix(subset.features(), subset.features())?;
    let (q, prune) = build_qubo_with_stats(&subset, &k_sub, &cfg.qubo).map_err(|e| e.context("qubo"))?;
    log::info!("qubo: dim {} with {} entries", q.dim(), q.entries().len());
    let samples = cfg.sampler.build().sample(&q).map_err(|e| e.context("sampling"))?;
    mark(Phase::Sampling, start, before, &kernel);

    let (start, before) = (Instant::now(), kernel.evals());
    let solutions = model::rank_solutions(&samples, q.meta(), cfg.combine.solutions, cfg.combine.dedup)
        .map_err(|e| e.context("combination"))?;
    // one N x M matrix serves every candidate and the blended solution
    let kmat = kernel.matrix(val.features(), subset.features())?;
    let score = |tau| kernel_accuracy(tau, &kmat, val.labels());
    let accuracies = solutions.iter().map(|t| score(t.tau())).collect::<Result<Vec<_>>>()?;
    let combo = combine(&solutions, &accuracies, &cfg.combine).map_err(|e| e.context("combination"))?;
    let combined_accuracy = score(&combo.tau_bar)?;
    mark(Phase::Combination, start, before, &kernel);

    let model = TrainedModel::new(subset.features().clone(), combo.tau_bar, cfg.gamma, train.classes())?;
    Ok(TrainOutcome {
        model,
        subset,
        qubo_dim: q.dim(),
        qubo_entries: q.entries().len(),
        prune,
        samples,
        accuracies,
        weights: combo.weights,
        threshold: combo.threshold,
        combined_accuracy,
        phases,
    })
}
