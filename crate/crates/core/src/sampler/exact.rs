use super::{Sample, SampleSet, Sampler};
use crate::error::{Error, Result};
use crate::qubo::QuboProblem;

/// Largest dimension accepted for exhaustive enumeration.
pub const MAX_EXACT_DIM: usize = 24;

/// Enumerates all `2^dim` states in Gray-code order and returns every state
/// whose energy is within `1e-9 * max(1, |E_min|)` of the minimum.
#[derive(Debug, Clone, Copy, Default)]
pub struct ExactSolver;

impl ExactSolver {
    pub fn solve(&self, q: &QuboProblem) -> Result<SampleSet> {
        let dim = q.dim();
        if dim == 0 || dim > MAX_EXACT_DIM {
            return Err(Error::Config(format!(
                "exact solver handles 1..={MAX_EXACT_DIM} variables, problem has {dim}"
            )));
        }
        let mut diag = vec![0.0; dim];
        let mut coupling = vec![0.0; dim * dim];
        for &(i, j, v) in q.entries() {
            if i == j {
                diag[i] = v;
            } else {
                coupling[i * dim + j] = v;
                coupling[j * dim + i] = v;
            }
        }
        // field[i] = sum_j coupling[i][j] * x_j
        let mut field = vec![0.0; dim];
        let mut state: u32 = 0;
        let mut energy = 0.0;
        let mut best = 0.0f64;
        let mut candidates: Vec<(u32, f64)> = vec![(0, 0.0)];
        let tol = |e: f64| 1e-9 * e.abs().max(1.0);

        for step in 1u64..(1u64 << dim) {
            let k = step.trailing_zeros() as usize;
            let on = state >> k & 1 == 0;
            let sign = if on { 1.0 } else { -1.0 };
            energy += sign * (diag[k] + field[k]);
            state ^= 1 << k;
            let row = &coupling[k * dim..(k + 1) * dim];
            for (f, c) in field.iter_mut().zip(row) {
                *f += sign * c;
            }
            if energy <= best + tol(best) {
                if energy < best {
                    best = energy;
                    candidates.retain(|&(_, e)| e <= best + tol(best));
                }
                candidates.push((state, energy));
            }
        }

        // recompute from scratch; incremental sums drift by a few ulps
        let mut exact: Vec<Sample> = candidates
            .into_iter()
            .map(|(s, _)| {
                let bits: Vec<u8> = (0..dim).map(|i| (s >> i & 1) as u8).collect();
                Sample { energy: q.energy_unchecked(&bits), bits, occurrences: 1 }
            })
            .collect();
        let min = exact.iter().map(|s| s.energy).fold(f64::INFINITY, f64::min);
        exact.retain(|s| s.energy <= min + tol(min));
        Ok(SampleSet::from_samples(exact))
    }
}

impl Sampler for ExactSolver {
    fn sample(&self, q: &QuboProblem) -> Result<SampleSet> {
        self.solve(q)
    }
}
