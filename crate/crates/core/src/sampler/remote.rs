//! Client for a sampling service speaking a small JSON protocol.
//!
//! Request: `{"dim", "entries": [[i, j, value], ...], "num_reads", "passthrough"}`.
//! Response: `{"samples": [{"bits": [...], "energy", "occurrences"}, ...]}`.

use std::time::Duration;

use serde::Deserialize;
use serde_json::{json, Map, Value};

use super::{Sample, SampleSet, Sampler};
use crate::error::{Error, Result};
use crate::qubo::QuboProblem;

/// Relative disagreement tolerated between a reported and a recomputed energy.
const ENERGY_RTOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct RemoteConfig {
    pub endpoint: String,
    /// Seconds.
    pub timeout: f64,
    /// Forwarded verbatim (e.g. `chain_strength`, `annealing_time`).
    pub passthrough: Map<String, Value>,
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self { endpoint: endpoint.into(), timeout: 60.0, passthrough: Map::new() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.timeout.is_finite() && self.timeout > 0.0) {
            return Err(Error::Config(format!("remote timeout must be positive, got {}", self.timeout)));
        }
        if self.endpoint.is_empty() {
            return Err(Error::Config("remote endpoint is empty".into()));
        }
        Ok(())
    }

    /// Adds a `key=value` passthrough pair; numbers and booleans are sent as JSON
    /// scalars, anything else as a string.
    pub fn add_passthrough(&mut self, pair: &str) -> Result<()> {
        let (k, v) =
            pair.split_once('=').ok_or_else(|| Error::Config(format!("passthrough {pair:?} is not key=value")))?;
        let value = serde_json::from_str::<Value>(v)
            .ok()
            .filter(|x| x.is_number() || x.is_boolean())
            .unwrap_or_else(|| Value::String(v.to_string()));
        self.passthrough.insert(k.trim().to_string(), value);
        Ok(())
    }
}

/// A returned energy that disagreed with the local recomputation. The local
/// value is the one stored in the sample set.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyMismatch {
    pub bits: Vec<u8>,
    pub reported: f64,
    pub local: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RemoteOutcome {
    pub samples: SampleSet,
    pub mismatches: Vec<EnergyMismatch>,
}

#[derive(Debug, Deserialize)]
struct WireResponse {
    samples: Vec<WireSample>,
}

#[derive(Debug, Deserialize)]
struct WireSample {
    bits: Vec<u64>,
    energy: f64,
    occurrences: u64,
}

pub fn request_body(q: &QuboProblem, num_reads: usize, passthrough: &Map<String, Value>) -> Value {
    let entries: Vec<Value> = q.entries().iter().map(|&(i, j, v)| json!([i, j, v])).collect();
    json!({
        "dim": q.dim(),
        "entries": entries,
        "num_reads": num_reads,
        "passthrough": passthrough,
    })
}

/// Validates a response body against `q` and rebuilds the sample set with
/// locally computed energies.
pub fn parse_response(q: &QuboProblem, body: &str) -> Result<RemoteOutcome> {
    let wire: WireResponse =
        serde_json::from_str(body).map_err(|e| Error::Protocol(format!("malformed response: {e}")))?;
    if wire.samples.is_empty() {
        return Err(Error::Protocol("response carries no samples".into()));
    }
    let mut samples = Vec::with_capacity(wire.samples.len());
    let mut mismatches = Vec::new();
    for (k, s) in wire.samples.into_iter().enumerate() {
        if s.bits.len() != q.dim() {
            return Err(Error::Protocol(format!("sample {k} has {} bits, problem has {}", s.bits.len(), q.dim())));
        }
        if s.bits.iter().any(|&b| b > 1) {
            return Err(Error::Protocol(format!("sample {k} has a non-binary bit")));
        }
        if s.occurrences == 0 {
            return Err(Error::Protocol(format!("sample {k} has zero occurrences")));
        }
        let bits: Vec<u8> = s.bits.iter().map(|&b| b as u8).collect();
        let local = q.energy_unchecked(&bits);
        if (s.energy - local).abs() > ENERGY_RTOL * local.abs().max(1.0) {
            log::warn!("sample {k}: reported energy {} differs from local {local}; keeping local", s.energy);
            mismatches.push(EnergyMismatch { bits: bits.clone(), reported: s.energy, local });
        }
        samples.push(Sample { bits, energy: local, occurrences: s.occurrences });
    }
    Ok(RemoteOutcome { samples: SampleSet::from_samples(samples), mismatches })
}

#[derive(Debug, Clone)]
pub struct RemoteSampler {
    pub config: RemoteConfig,
    pub num_reads: usize,
}

impl RemoteSampler {
    pub fn new(config: RemoteConfig, num_reads: usize) -> Self {
        Self { config, num_reads }
    }

    /// One blocking POST to the configured endpoint.
    pub fn solve(&self, q: &QuboProblem) -> Result<RemoteOutcome> {
        self.config.validate()?;
        if self.num_reads == 0 {
            return Err(Error::Config("num_reads must be positive".into()));
        }
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(self.config.timeout)))
            .build()
            .into();
        let body = request_body(q, self.num_reads, &self.config.passthrough).to_string();
        let mut resp =
            agent.post(&self.config.endpoint).header("Content-Type", "application/json").send(body).map_err(
                |e| match e {
                    ureq::Error::StatusCode(code) => Error::Transport(format!("server answered HTTP {code}")),
                    other => Error::Transport(other.to_string()),
                },
            )?;
        let text = resp.body_mut().read_to_string().map_err(|e| Error::Transport(format!("reading response: {e}")))?;
        parse_response(q, &text)
    }
}

impl Sampler for RemoteSampler {
    fn sample(&self, q: &QuboProblem) -> Result<SampleSet> {
        Ok(self.solve(q)?.samples)
    }
}
