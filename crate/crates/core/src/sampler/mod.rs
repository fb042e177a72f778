//! QUBO samplers: exhaustive enumeration, simulated annealing and a remote
//! JSON service. Every sampler returns a [`SampleSet`] whose energies are
//! recomputed locally.

mod anneal;
mod exact;
mod remote;

pub use anneal::{AnnealConfig, Schedule, SimulatedAnnealing};
pub use exact::{ExactSolver, MAX_EXACT_DIM};
pub use remote::{EnergyMismatch, RemoteConfig, RemoteOutcome, RemoteSampler};

use std::cmp::Ordering;

use crate::error::Result;
use crate::qubo::QuboProblem;

pub trait Sampler {
    fn sample(&self, q: &QuboProblem) -> Result<SampleSet>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub bits: Vec<u8>,
    pub energy: f64,
    pub occurrences: u64,
}

/// Distinct samples in ascending energy order, ties broken by lexicographic bits.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SampleSet {
    samples: Vec<Sample>,
    num_reads: u64,
}

fn sample_order(a: &Sample, b: &Sample) -> Ordering {
    a.energy.total_cmp(&b.energy).then_with(|| a.bits.cmp(&b.bits))
}

impl SampleSet {
    /// Merges repeated bitstrings (summing occurrences) and sorts.
    pub fn from_samples(mut samples: Vec<Sample>) -> Self {
        samples.sort_by(|a, b| a.bits.cmp(&b.bits));
        let mut merged: Vec<Sample> = Vec::with_capacity(samples.len());
        for s in samples {
            match merged.last_mut() {
                Some(last) if last.bits == s.bits => last.occurrences += s.occurrences,
                _ => merged.push(s),
            }
        }
        merged.sort_by(sample_order);
        let num_reads = merged.iter().map(|s| s.occurrences).sum();
        Self { samples: merged, num_reads }
    }

    /// One read per bitstring; energies computed from `q`.
    pub(crate) fn from_reads(q: &QuboProblem, reads: Vec<Vec<u8>>) -> Self {
        Self::from_samples(
            reads.into_iter().map(|bits| Sample { energy: q.energy_unchecked(&bits), bits, occurrences: 1 }).collect(),
        )
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn num_reads(&self) -> u64 {
        self.num_reads
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn lowest(&self) -> Option<&Sample> {
        self.samples.first()
    }

    pub fn contains(&self, bits: &[u8]) -> bool {
        self.samples.iter().any(|s| s.bits == bits)
    }

    /// `energy occurrences bits` per line, bits as a 0/1 string from index 0.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for s in &self.samples {
            let bits: String = s.bits.iter().map(|&b| if b == 1 { '1' } else { '0' }).collect();
            out.push_str(&format!("{} {} {}\n", s.energy, s.occurrences, bits));
        }
        out
    }
}
