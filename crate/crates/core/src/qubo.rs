//! Binary encoding of the Crammer–Singer dual variables and the analytic QUBO
//! built from it.
//!
//! Each dual variable `tau[n][c]` in `[-1, 1]` is carried by `B` bits
//! `a[n*C*B + c*B + b]`, bit `b` weighing `2^b`:
//!
//! ```text
//! tau = -1 + 2 / (2^B - 1) * sum_b 2^b a_b
//! ```
//!
//! The energy of a bitstring equals `F(tau) + mu * P(tau)` up to a constant,
//! where `F` is the dual objective and `P` the constraint penalty. Only
//! energy differences are meaningful.

use std::fmt::Write as _;
use std::path::Path;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QmsvmParams {
    /// Bits per dual variable (`B`).
    pub bits: u32,
    pub beta: f64,
    /// Penalty weight.
    pub mu: f64,
    /// Largest-to-smallest retained coefficient ratio; `None` disables pruning.
    pub max_min_ratio: Option<f64>,
}

impl Default for QmsvmParams {
    fn default() -> Self {
        Self { bits: 2, beta: 1.0, mu: 1.0, max_min_ratio: Some(15.0) }
    }
}

impl QmsvmParams {
    pub fn validate(&self) -> Result<()> {
        if self.bits == 0 || self.bits > 30 {
            return Err(Error::Config(format!("bits per variable must be in 1..=30, got {}", self.bits)));
        }
        if !self.beta.is_finite() {
            return Err(Error::Config("beta must be finite".into()));
        }
        if !(self.mu.is_finite() && self.mu >= 0.0) {
            return Err(Error::Config(format!("penalty weight mu must be >= 0, got {}", self.mu)));
        }
        if let Some(r) = self.max_min_ratio {
            if !(r.is_finite() && r > 1.0) {
                return Err(Error::Config(format!("max_min_ratio must be > 1, got {r}")));
            }
        }
        Ok(())
    }
}

/// Shape of the encoded problem: `M` examples, `C` classes, `B` bits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuboMeta {
    pub m: usize,
    pub c: usize,
    pub b: usize,
}

impl QuboMeta {
    pub fn dim(&self) -> usize {
        self.m * self.c * self.b
    }

    #[inline]
    pub fn index(&self, n: usize, c: usize, b: usize) -> usize {
        n * self.c * self.b + c * self.b + b
    }

    #[inline]
    fn split(&self, i: usize) -> (usize, usize, usize) {
        (i / (self.c * self.b), (i / self.b) % self.c, i % self.b)
    }
}

/// Decoded dual variables, `M x C`, entries in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionMatrix(Matrix);

impl SolutionMatrix {
    pub fn new(tau: Matrix) -> Result<Self> {
        if tau.as_slice().iter().any(|v| !(-1.0..=1.0).contains(v)) {
            return Err(Error::Data("dual variables must lie in [-1, 1]".into()));
        }
        Ok(Self(tau))
    }

    pub fn tau(&self) -> &Matrix {
        &self.0
    }

    pub fn into_inner(self) -> Matrix {
        self.0
    }
}

fn check_bits(bits: &[u8], dim: usize) -> Result<()> {
    if bits.len() != dim {
        return Err(Error::Shape(format!("bitstring of length {} for dimension {dim}", bits.len())));
    }
    if let Some(i) = bits.iter().position(|&v| v > 1) {
        return Err(Error::Data(format!("bit {i} is {}, expected 0 or 1", bits[i])));
    }
    Ok(())
}

pub fn decode_bits(bits: &[u8], meta: QuboMeta) -> Result<SolutionMatrix> {
    check_bits(bits, meta.dim())?;
    let levels = ((1u64 << meta.b) - 1) as i64;
    let mut tau = Matrix::zeros(meta.m, meta.c);
    for n in 0..meta.m {
        for c in 0..meta.c {
            let start = meta.index(n, c, 0);
            let sigma: u64 = bits[start..start + meta.b].iter().enumerate().map(|(b, &a)| (a as u64) << b).sum();
            // one rounding step, so the grid is symmetric and +-1 exact
            tau.set(n, c, (2 * sigma as i64 - levels) as f64 / levels as f64);
        }
    }
    Ok(SolutionMatrix(tau))
}

fn check_labels(t: &SolutionMatrix, labels: &[usize]) -> Result<()> {
    let tau = t.tau();
    if labels.len() != tau.rows() {
        return Err(Error::Shape(format!("{} labels for {} solution rows", labels.len(), tau.rows())));
    }
    if let Some(&l) = labels.iter().find(|&&l| l >= tau.cols()) {
        return Err(Error::Data(format!("label {l} outside [0, {})", tau.cols())));
    }
    Ok(())
}

/// `sum_n (sum_c tau[n][c])^2 + sum_n sum_{c != y_n} tau[n][c]`.
pub fn penalty(t: &SolutionMatrix, labels: &[usize]) -> Result<f64> {
    check_labels(t, labels)?;
    let mut total = 0.0;
    for (row, &y) in t.tau().iter_rows().zip(labels) {
        let s: f64 = row.iter().sum();
        total += s * s;
        total += row.iter().enumerate().filter(|&(c, _)| c != y).map(|(_, v)| v).sum::<f64>();
    }
    Ok(total)
}

/// Crammer–Singer dual objective
/// `1/2 sum_{n1,n2} K[n1][n2] sum_c tau[n1][c] tau[n2][c] - beta sum_n tau[n][y_n]`.
pub fn objective(t: &SolutionMatrix, k_sub: &Matrix, labels: &[usize], beta: f64) -> Result<f64> {
    check_labels(t, labels)?;
    let tau = t.tau();
    let m = tau.rows();
    if k_sub.rows() != m || k_sub.cols() != m {
        return Err(Error::Shape(format!("{}x{} kernel for {m} examples", k_sub.rows(), k_sub.cols())));
    }
    let mut quad = 0.0;
    for n1 in 0..m {
        for n2 in 0..m {
            let dot: f64 = tau.row(n1).iter().zip(tau.row(n2)).map(|(a, b)| a * b).sum();
            quad += k_sub.get(n1, n2) * dot;
        }
    }
    let lin: f64 = labels.iter().enumerate().map(|(n, &y)| tau.get(n, y)).sum();
    Ok(0.5 * quad - beta * lin)
}

/// Upper-triangular QUBO stored as sorted `(i, j, value)` triplets, `i <= j`,
/// no zero values.
#[derive(Debug, Clone, PartialEq)]
pub struct QuboProblem {
    dim: usize,
    entries: Vec<(usize, usize, f64)>,
    meta: QuboMeta,
    params: Option<QmsvmParams>,
}

/// Outcome of coefficient pruning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PruneStats {
    pub removed: usize,
    /// Off-diagonal entries with magnitude below this were dropped.
    pub threshold: f64,
}

impl QuboProblem {
    /// Validates and canonicalises raw triplets: sorted, zeros dropped,
    /// duplicates and lower-triangular keys rejected.
    pub fn from_entries(meta: QuboMeta, mut entries: Vec<(usize, usize, f64)>) -> Result<Self> {
        let dim = meta.dim();
        for &(i, j, v) in &entries {
            if i > j {
                return Err(Error::Data(format!("entry ({i}, {j}) below the diagonal")));
            }
            if j >= dim {
                return Err(Error::Data(format!("entry ({i}, {j}) outside dimension {dim}")));
            }
            if !v.is_finite() {
                return Err(Error::Data(format!("entry ({i}, {j}) is not finite")));
            }
        }
        entries.retain(|e| e.2 != 0.0);
        entries.sort_by_key(|e| (e.0, e.1));
        if let Some(w) = entries.windows(2).find(|w| (w[0].0, w[0].1) == (w[1].0, w[1].1)) {
            return Err(Error::Data(format!("duplicate entry ({}, {})", w[0].0, w[0].1)));
        }
        Ok(Self { dim, entries, meta, params: None })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn meta(&self) -> QuboMeta {
        self.meta
    }

    pub fn params(&self) -> Option<&QmsvmParams> {
        self.params.as_ref()
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    /// Sum over stored entries of `bits[i] * Q[i][j] * bits[j]`, diagonal included.
    pub fn energy(&self, bits: &[u8]) -> Result<f64> {
        check_bits(bits, self.dim)?;
        Ok(self.energy_unchecked(bits))
    }

    pub(crate) fn energy_unchecked(&self, bits: &[u8]) -> f64 {
        self.entries.iter().filter(|&&(i, j, _)| bits[i] & bits[j] == 1).map(|e| e.2).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|e| e.2.abs()).fold(0.0, f64::max)
    }

    /// Drops off-diagonal entries smaller in magnitude than `max|Q| / ratio`.
    /// Diagonal entries are always kept.
    pub fn pruned(&self, ratio: f64) -> Result<(QuboProblem, PruneStats)> {
        if !(ratio.is_finite() && ratio > 1.0) {
            return Err(Error::Config(format!("max_min_ratio must be > 1, got {ratio}")));
        }
        let threshold = self.max_abs() / ratio;
        let mut out = self.clone();
        out.entries.retain(|&(i, j, v)| i == j || v.abs() >= threshold);
        let removed = self.entries.len() - out.entries.len();
        if let Some(p) = out.params.as_mut() {
            p.max_min_ratio = Some(ratio);
        }
        Ok((out, PruneStats { removed, threshold }))
    }

    /// Text form: `qubo dim M C B`, then one `i j value` line per entry.
    pub fn to_text(&self) -> String {
        let mut out = format!("qubo {} {} {} {}\n", self.dim, self.meta.m, self.meta.c, self.meta.b);
        for &(i, j, v) in &self.entries {
            writeln!(out, "{i} {j} {v}").unwrap();
        }
        out
    }

    pub fn parse_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let (hline, header) = lines.next().ok_or_else(|| Error::parse(1, "missing `qubo` header"))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 5 || h[0] != "qubo" {
            return Err(Error::parse(hline, "header must be `qubo dim M C B`"));
        }
        let nums = h[1..]
            .iter()
            .map(|s| s.parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::parse(hline, "header fields must be non-negative integers"))?;
        let meta = QuboMeta { m: nums[1], c: nums[2], b: nums[3] };
        if meta.dim() != nums[0] {
            return Err(Error::parse(hline, format!("dim {} != M*C*B = {}", nums[0], meta.dim())));
        }
        let mut entries = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for (line, l) in lines {
            let f: Vec<&str> = l.split_whitespace().collect();
            let bad = || Error::parse(line, format!("expected `i j value`, got {l:?}"));
            if f.len() != 3 {
                return Err(bad());
            }
            let i: usize = f[0].parse().map_err(|_| bad())?;
            let j: usize = f[1].parse().map_err(|_| bad())?;
            let v: f64 = f[2].parse().map_err(|_| bad())?;
            if i > j || j >= meta.dim() || !v.is_finite() {
                return Err(Error::parse(line, format!("invalid entry ({i}, {j}, {v}) for dim {}", meta.dim())));
            }
            if !seen.insert((i, j)) {
                return Err(Error::parse(line, format!("duplicate entry ({i}, {j})")));
            }
            entries.push((i, j, v));
        }
        Self::from_entries(meta, entries)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::parse_text(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

/// Symmetric-form coefficient `Q~[i][j]` for the encoded Crammer–Singer energy.
struct CoefficientTable<'a> {
    meta: QuboMeta,
    k: &'a Matrix,
    labels: &'a [usize],
    row_sums: Vec<f64>,
    beta: f64,
    mu: f64,
    levels: f64,
}

impl CoefficientTable<'_> {
    fn symmetric(&self, i: usize, j: usize) -> f64 {
        let (n1, c1, b1) = self.meta.split(i);
        let (n2, c2, b2) = self.meta.split(j);
        let lv = self.levels;
        let mut v = 0.0;
        if i == j {
            let own = if c1 == self.labels[n1] { self.beta + self.mu } else { 0.0 };
            let bias = -self.row_sums[n1] - own - 2.0 * self.meta.c as f64 * self.mu + self.mu;
            v += pow2(b1 + 1) / lv * bias;
        }
        if c1 == c2 {
            v += pow2(b1 + b2 + 1) / (lv * lv) * self.k.get(n1, n2);
        }
        if n1 == n2 {
            v += pow2(b1 + b2 + 2) * self.mu / (lv * lv);
        }
        v
    }
}

#[inline]
fn pow2(e: usize) -> f64 {
    (1u64 << e) as f64
}

/// Builds the upper-triangular QUBO for the selected subset and its kernel
/// matrix. Symmetric coefficients are folded (`Q[i][j] = Q~[i][j] + Q~[j][i]`
/// for `i < j`) and then pruned if `max_min_ratio` is set.
pub fn build_qubo(subset: &Dataset, k_sub: &Matrix, p: &QmsvmParams) -> Result<QuboProblem> {
    let (q, _) = build_qubo_with_stats(subset, k_sub, p)?;
    Ok(q)
}

pub fn build_qubo_with_stats(
    subset: &Dataset,
    k_sub: &Matrix,
    p: &QmsvmParams,
) -> Result<(QuboProblem, Option<PruneStats>)> {
    p.validate()?;
    let m = subset.len();
    if k_sub.rows() != m || k_sub.cols() != m {
        return Err(Error::Shape(format!("{}x{} kernel matrix for {m} examples", k_sub.rows(), k_sub.cols())));
    }
    if !k_sub.is_finite() {
        return Err(Error::Data("kernel matrix has non-finite values".into()));
    }
    let meta = QuboMeta { m, c: subset.classes(), b: p.bits as usize };
    let table = CoefficientTable {
        meta,
        k: k_sub,
        labels: subset.labels(),
        row_sums: k_sub.iter_rows().map(|r| r.iter().sum()).collect(),
        beta: p.beta,
        mu: p.mu,
        levels: (pow2(meta.b) - 1.0),
    };
    let dim = meta.dim();
    let mut entries = Vec::new();
    for i in 0..dim {
        entries.push((i, i, table.symmetric(i, i)));
        for j in i + 1..dim {
            let v = table.symmetric(i, j) + table.symmetric(j, i);
            if v != 0.0 {
                entries.push((i, j, v));
            }
        }
    }
    let mut q = QuboProblem::from_entries(meta, entries)?;
    q.params = Some(QmsvmParams { max_min_ratio: None, ..*p });
    match p.max_min_ratio {
        Some(r) => {
            let (q, stats) = q.pruned(r)?;
            Ok((q, Some(stats)))
        }
        None => Ok((q, None)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream_rng;
    use proptest::prelude::*;
    use rand::Rng;

    fn meta(m: usize, c: usize, b: usize) -> QuboMeta {
        QuboMeta { m, c, b }
    }

    #[test]
    fn decode_two_bit_grid() {
        let m = meta(1, 1, 2);
        assert_eq!(decode_bits(&[0, 0], m).unwrap().tau().get(0, 0), -1.0);
        assert_eq!(decode_bits(&[1, 1], m).unwrap().tau().get(0, 0), 1.0);
        let v = decode_bits(&[1, 0], m).unwrap().tau().get(0, 0);
        assert!((v + 1.0 / 3.0).abs() < 1e-15);
        let v = decode_bits(&[0, 1], m).unwrap().tau().get(0, 0);
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn decode_one_bit() {
        let m = meta(1, 1, 1);
        assert_eq!(decode_bits(&[0], m).unwrap().tau().get(0, 0), -1.0);
        assert_eq!(decode_bits(&[1], m).unwrap().tau().get(0, 0), 1.0);
    }

    #[test]
    fn decode_layout() {
        // n=1, c=0 block is bits 4..6 for C=2, B=2
        let bits = [0, 0, 0, 0, 1, 1, 0, 0];
        let t = decode_bits(&bits, meta(2, 2, 2)).unwrap();
        assert_eq!(t.tau().to_rows(), vec![vec![-1.0, -1.0], vec![1.0, -1.0]]);
        assert!(matches!(decode_bits(&bits[..7], meta(2, 2, 2)), Err(Error::Shape(_))));
        assert!(decode_bits(&[2, 0], meta(1, 1, 2)).is_err());
    }

    fn sol(rows: &[&[f64]]) -> SolutionMatrix {
        SolutionMatrix::new(Matrix::from_rows(rows).unwrap()).unwrap()
    }

    #[test]
    fn penalty_examples() {
        assert_eq!(penalty(&sol(&[&[-1.0, 0.0, 1.0]]), &[2]).unwrap(), -1.0);
        assert_eq!(penalty(&sol(&[&[1.0, 1.0, 1.0]]), &[1]).unwrap(), 11.0);
        assert_eq!(penalty(&sol(&[&[0.0, 0.0, 0.0]]), &[0]).unwrap(), 0.0);
        assert!(penalty(&sol(&[&[0.0, 0.0]]), &[2]).is_err());
    }

    #[test]
    fn objective_examples() {
        let k = Matrix::from_rows(&[[1.0]]).unwrap();
        assert_eq!(objective(&sol(&[&[0.0, 0.0]]), &k, &[0], 1.0).unwrap(), 0.0);
        assert_eq!(objective(&sol(&[&[1.0, -1.0]]), &k, &[0], 1.0).unwrap(), 0.0);
    }

    #[test]
    fn objective_matches_term_by_term_sum() {
        let mut rng = stream_rng(3, 0);
        let m = 3;
        let c = 3;
        let pts: Vec<Vec<f64>> = (0..m).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
        let k = Matrix::from_rows(
            &pts.iter()
                .map(|a| pts.iter().map(|b| crate::kernel::gaussian(a, b, 1.0)).collect::<Vec<_>>())
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let tau: Vec<Vec<f64>> = (0..m).map(|_| (0..c).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let labels = [2, 0, 1];
        let beta = 0.7;
        // oracle: naive sextuple sum over (n1, n2, c) plus the linear term
        let mut expect = 0.0;
        for n1 in 0..m {
            for n2 in 0..m {
                for cc in 0..c {
                    expect += 0.5 * k.get(n1, n2) * tau[n1][cc] * tau[n2][cc];
                }
            }
        }
        for n in 0..m {
            for cc in 0..c {
                if cc == labels[n] {
                    expect -= beta * tau[n][cc];
                }
            }
        }
        let got =
            objective(&SolutionMatrix::new(Matrix::from_rows(&tau).unwrap()).unwrap(), &k, &labels, beta).unwrap();
        assert!((got - expect).abs() < 1e-12, "{got} vs {expect}");
    }

    fn one_example(label: usize, classes: usize) -> Dataset {
        Dataset::new(Matrix::from_rows(&[[0.0]]).unwrap(), vec![label], classes).unwrap()
    }

    #[test]
    fn single_variable_qubo() {
        let k = Matrix::from_rows(&[[1.0]]).unwrap();
        let p = QmsvmParams { bits: 1, beta: 1.0, mu: 0.0, max_min_ratio: None };
        let q = build_qubo(&one_example(0, 1), &k, &p).unwrap();
        assert_eq!(q.entries(), &[(0, 0, -2.0)]);
        assert_eq!(q.energy(&[1]).unwrap(), -2.0);
    }

    #[test]
    fn energy_examples() {
        let q = QuboProblem::from_entries(meta(1, 1, 1), vec![(0, 0, -2.0)]).unwrap();
        assert_eq!(q.energy(&[0]).unwrap(), 0.0);
        assert_eq!(q.energy(&[1]).unwrap(), -2.0);
        assert!(q.energy(&[1, 0]).is_err());
    }

    #[test]
    fn energy_matches_dense_quadratic_form() {
        let mut rng = stream_rng(9, 0);
        let dim = 12;
        let mut entries = Vec::new();
        let mut dense = vec![vec![0.0; dim]; dim];
        for i in 0..dim {
            for j in i..dim {
                if rng.random::<f64>() < 0.6 {
                    let v = rng.random_range(-3.0..3.0);
                    entries.push((i, j, v));
                    dense[i][j] = v;
                }
            }
        }
        let q = QuboProblem::from_entries(meta(6, 1, 2), entries).unwrap();
        for _ in 0..50 {
            let bits: Vec<u8> = (0..dim).map(|_| rng.random_range(0..2)).collect();
            let mut expect = 0.0;
            for i in 0..dim {
                for j in 0..dim {
                    expect += bits[i] as f64 * dense[i][j] * bits[j] as f64;
                }
            }
            assert!((q.energy(&bits).unwrap() - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn from_entries_rejects_bad_keys() {
        assert!(QuboProblem::from_entries(meta(1, 1, 2), vec![(1, 0, 1.0)]).is_err());
        assert!(QuboProblem::from_entries(meta(1, 1, 2), vec![(0, 2, 1.0)]).is_err());
        assert!(QuboProblem::from_entries(meta(1, 1, 2), vec![(0, 1, 1.0), (0, 1, 2.0)]).is_err());
        let q = QuboProblem::from_entries(meta(1, 1, 2), vec![(0, 1, 0.0), (0, 0, 1.0)]).unwrap();
        assert_eq!(q.entries().len(), 1);
    }

    #[test]
    fn text_format_round_trip_and_errors() {
        let q = QuboProblem::from_entries(meta(1, 2, 1), vec![(0, 0, -2.5), (0, 1, 0.1), (1, 1, 3.0)]).unwrap();
        let text = q.to_text();
        assert!(text.starts_with("qubo 2 1 2 1\n"));
        assert_eq!(QuboProblem::parse_text(&text).unwrap(), q);
        let e = QuboProblem::parse_text("qubo 1 1 1 1\n0 0\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }), "{e}");
        let e = QuboProblem::parse_text("qubo 1 1 1 1\n0 0 -2\n0 x 1\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }));
        assert!(QuboProblem::parse_text("qubo 3 1 1 1\n").is_err());
        assert!(QuboProblem::parse_text("").is_err());
    }

    fn random_instance(rng: &mut impl Rng, m: usize, c: usize) -> (Dataset, Matrix) {
        let rows: Vec<Vec<f64>> =
            (0..m).map(|_| vec![rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]).collect();
        let labels: Vec<usize> = (0..m).map(|_| rng.random_range(0..c)).collect();
        let d = Dataset::new(Matrix::from_rows(&rows).unwrap(), labels, c).unwrap();
        let k = crate::kernel::Kernel::new(crate::kernel::KernelParams::new(0.8).unwrap());
        let km = k.matrix(d.features(), d.features()).unwrap();
        (d, km)
    }

    #[test]
    fn pruning_respects_ratio() {
        let mut rng = stream_rng(21, 0);
        let (d, k) = random_instance(&mut rng, 5, 3);
        let p = QmsvmParams { bits: 2, beta: 1.0, mu: 1.0, max_min_ratio: Some(15.0) };
        let (q, stats) = build_qubo_with_stats(&d, &k, &p).unwrap();
        let stats = stats.unwrap();
        let max = q.max_abs();
        let min_off = q.entries().iter().filter(|e| e.0 != e.1).map(|e| e.2.abs()).fold(f64::INFINITY, f64::min);
        assert!(max / min_off <= 15.0);
        assert!(stats.removed > 0);
        assert!(q.entries().iter().all(|&(i, j, v)| i <= j && v != 0.0));
    }

    proptest! {
        #[test]
        fn grid_is_uniform(b in 1usize..=8) {
            let levels = (1u64 << b) - 1;
            let m = meta(1, 1, b);
            let mut prev = None;
            for sigma in 0..=levels {
                let bits: Vec<u8> = (0..b).map(|k| ((sigma >> k) & 1) as u8).collect();
                let v = decode_bits(&bits, m).unwrap().tau().get(0, 0);
                let expect = -1.0 + 2.0 * sigma as f64 / levels as f64;
                prop_assert!((v - expect).abs() <= 4.0 * f64::EPSILON);
                let flipped: Vec<u8> = bits.iter().map(|x| 1 - x).collect();
                prop_assert_eq!(decode_bits(&flipped, m).unwrap().tau().get(0, 0), -v);
                if let Some(p) = prev {
                    let step: f64 = v - p;
                    prop_assert!((step - 2.0 / levels as f64).abs() <= 8.0 * f64::EPSILON);
                }
                prev = Some(v);
            }
        }

        #[test]
        fn energy_difference_matches_objective(
            seed in 0u64..10_000,
            m in 1usize..=6,
            c in 2usize..=3,
            b in 1usize..=3,
            beta_i in 0usize..4,
            mu_i in 0usize..4,
        ) {
            let grid = [0.0, 0.5, 1.0, 2.0];
            let mut rng = stream_rng(seed, 1);
            let (d, k) = random_instance(&mut rng, m, c);
            let p = QmsvmParams { bits: b as u32, beta: grid[beta_i], mu: grid[mu_i], max_min_ratio: None };
            let q = build_qubo(&d, &k, &p).unwrap();
            let full = |bits: &[u8]| {
                let t = decode_bits(bits, q.meta()).unwrap();
                objective(&t, &k, d.labels(), p.beta).unwrap() + p.mu * penalty(&t, d.labels()).unwrap()
            };
            for _ in 0..20 {
                let a1: Vec<u8> = (0..q.dim()).map(|_| rng.random_range(0..2)).collect();
                let a2: Vec<u8> = (0..q.dim()).map(|_| rng.random_range(0..2)).collect();
                let de = q.energy(&a1).unwrap() - q.energy(&a2).unwrap();
                let df = full(&a1) - full(&a2);
                prop_assert!((de - df).abs() <= 1e-9 * df.abs().max(1.0), "{de} vs {df}");
            }
        }

        #[test]
        fn pruning_error_is_bounded(seed in 0u64..10_000, ratio in 2.0f64..50.0) {
            let mut rng = stream_rng(seed, 2);
            let (d, k) = random_instance(&mut rng, 4, 3);
            let p = QmsvmParams { bits: 2, beta: 1.0, mu: 1.0, max_min_ratio: None };
            let full = build_qubo(&d, &k, &p).unwrap();
            let (pruned, stats) = full.pruned(ratio).unwrap();
            for _ in 0..20 {
                let bits: Vec<u8> = (0..full.dim()).map(|_| rng.random_range(0..2)).collect();
                let diff = (full.energy(&bits).unwrap() - pruned.energy(&bits).unwrap()).abs();
                prop_assert!(diff <= stats.removed as f64 * stats.threshold + 1e-12);
            }
        }
    }
}
