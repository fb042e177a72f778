use rand::Rng;

use super::{SampleSet, Sampler};
use crate::error::{Error, Result};
use crate::qubo::QuboProblem;
use crate::stream_rng;

/// Acceptance probability of a median uphill move at the start and end of
/// an automatically tuned schedule.
const HOT_ACCEPTANCE: f64 = 0.5;
const COLD_ACCEPTANCE: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct AnnealConfig {
    pub num_reads: usize,
    pub sweeps: usize,
    /// Initial inverse temperature; tuned per instance when `None`.
    pub beta_hot: Option<f64>,
    /// Final inverse temperature; tuned per instance when `None`.
    pub beta_cold: Option<f64>,
    pub seed: u64,
}

impl Default for AnnealConfig {
    fn default() -> Self {
        Self { num_reads: 1000, sweeps: 100, beta_hot: None, beta_cold: None, seed: 0 }
    }
}

impl AnnealConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_reads == 0 || self.sweeps == 0 {
            return Err(Error::Config("num_reads and sweeps must be positive".into()));
        }
        for b in [self.beta_hot, self.beta_cold].into_iter().flatten() {
            if !(b.is_finite() && b > 0.0) {
                return Err(Error::Config(format!("inverse temperature {b} must be positive")));
            }
        }
        if let (Some(h), Some(c)) = (self.beta_hot, self.beta_cold) {
            if c <= h {
                return Err(Error::Config(format!("beta_cold ({c}) must exceed beta_hot ({h})")));
            }
        }
        Ok(())
    }
}

/// Geometric inverse-temperature ramp.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub beta_hot: f64,
    pub beta_cold: f64,
}

impl Schedule {
    /// Picks the ramp from the median single-flip `|dE|` seen from a few
    /// random states, so a median uphill move is accepted with probability
    /// 0.5 at the start and 1e-4 at the end.
    pub fn tuned(q: &QuboProblem, seed: u64) -> Self {
        let csr = Couplings::new(q);
        let mut rng = stream_rng(seed, u64::MAX);
        let mut deltas = Vec::new();
        for _ in 0..16 {
            let x: Vec<u8> = (0..q.dim()).map(|_| rng.random_range(0..2)).collect();
            let field = csr.fields(&x);
            for i in 0..q.dim() {
                let d = (csr.diag[i] + field[i]).abs();
                if d > 0.0 {
                    deltas.push(d);
                }
            }
        }
        let median = if deltas.is_empty() {
            1.0
        } else {
            let mid = deltas.len() / 2;
            *deltas.select_nth_unstable_by(mid, f64::total_cmp).1
        };
        Self { beta_hot: -HOT_ACCEPTANCE.ln() / median, beta_cold: -COLD_ACCEPTANCE.ln() / median }
    }

    pub fn betas(&self, sweeps: usize) -> Vec<f64> {
        if sweeps == 1 {
            return vec![self.beta_cold];
        }
        let ratio = self.beta_cold / self.beta_hot;
        (0..sweeps).map(|s| self.beta_hot * ratio.powf(s as f64 / (sweeps - 1) as f64)).collect()
    }
}

/// Symmetric adjacency in CSR form plus the diagonal.
struct Couplings {
    diag: Vec<f64>,
    offsets: Vec<usize>,
    neighbours: Vec<(u32, f64)>,
}

impl Couplings {
    fn new(q: &QuboProblem) -> Self {
        let dim = q.dim();
        let mut diag = vec![0.0; dim];
        let mut degree = vec![0usize; dim];
        for &(i, j, v) in q.entries() {
            if i == j {
                diag[i] = v;
            } else {
                degree[i] += 1;
                degree[j] += 1;
            }
        }
        let mut offsets = vec![0; dim + 1];
        for i in 0..dim {
            offsets[i + 1] = offsets[i] + degree[i];
        }
        let mut fill = offsets.clone();
        let mut neighbours = vec![(0u32, 0.0); offsets[dim]];
        for &(i, j, v) in q.entries() {
            if i != j {
                neighbours[fill[i]] = (j as u32, v);
                fill[i] += 1;
                neighbours[fill[j]] = (i as u32, v);
                fill[j] += 1;
            }
        }
        Self { diag, offsets, neighbours }
    }

    #[inline]
    fn row(&self, i: usize) -> &[(u32, f64)] {
        &self.neighbours[self.offsets[i]..self.offsets[i + 1]]
    }

    fn fields(&self, x: &[u8]) -> Vec<f64> {
        (0..x.len()).map(|i| self.row(i).iter().filter(|(j, _)| x[*j as usize] == 1).map(|(_, v)| v).sum()).collect()
    }
}

/// Single-bit-flip Metropolis annealing from independent random starts.
#[derive(Debug, Clone, Default)]
pub struct SimulatedAnnealing {
    pub config: AnnealConfig,
}

impl SimulatedAnnealing {
    pub fn new(config: AnnealConfig) -> Self {
        Self { config }
    }

    pub fn schedule(&self, q: &QuboProblem) -> Schedule {
        let tuned = || Schedule::tuned(q, self.config.seed);
        match (self.config.beta_hot, self.config.beta_cold) {
            (Some(beta_hot), Some(beta_cold)) => Schedule { beta_hot, beta_cold },
            (Some(beta_hot), None) => Schedule { beta_hot, beta_cold: tuned().beta_cold.max(beta_hot * 2.0) },
            (None, Some(beta_cold)) => Schedule { beta_hot: tuned().beta_hot.min(beta_cold / 2.0), beta_cold },
            (None, None) => tuned(),
        }
    }

    pub fn solve(&self, q: &QuboProblem) -> Result<SampleSet> {
        self.config.validate()?;
        if q.dim() == 0 {
            return Err(Error::Sampler("empty problem".into()));
        }
        let csr = Couplings::new(q);
        let betas = self.schedule(q).betas(self.config.sweeps);
        let reads = (0..self.config.num_reads).map(|r| anneal_once(&csr, &betas, self.config.seed, r as u64)).collect();
        Ok(SampleSet::from_reads(q, reads))
    }
}

fn anneal_once(csr: &Couplings, betas: &[f64], seed: u64, read: u64) -> Vec<u8> {
    let dim = csr.diag.len();
    let mut rng = stream_rng(seed, read);
    let mut x: Vec<u8> = (0..dim).map(|_| rng.random_range(0..2)).collect();
    let mut field = csr.fields(&x);
    for &beta in betas {
        for i in 0..dim {
            // energy change of flipping bit i
            let local = csr.diag[i] + field[i];
            let delta = if x[i] == 0 { local } else { -local };
            if delta <= 0.0 || rng.random::<f64>() < (-beta * delta).exp() {
                let sign = if x[i] == 0 { 1.0 } else { -1.0 };
                x[i] ^= 1;
                for &(j, v) in csr.row(i) {
                    field[j as usize] += sign * v;
                }
            }
        }
    }
    x
}

impl Sampler for SimulatedAnnealing {
    fn sample(&self, q: &QuboProblem) -> Result<SampleSet> {
        self.solve(q)
    }
}
