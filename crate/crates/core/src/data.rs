//! Dataset ingestion, deterministic splitting and raster export of class maps.
//!
//! Input files are plain comma-separated text: one example per line, `#`
//! starts a comment line, blank lines are ignored and there is no quoting.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::stream_rng;

/// Labelled feature matrix. Labels lie in `[0, classes)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Matrix,
    labels: Vec<usize>,
    classes: usize,
    names: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(features: Matrix, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if features.rows() == 0 {
            return Err(Error::Data("dataset has no rows".into()));
        }
        if features.cols() == 0 {
            return Err(Error::Data("dataset has no feature columns".into()));
        }
        if classes == 0 {
            return Err(Error::Data("class count must be positive".into()));
        }
        if labels.len() != features.rows() {
            return Err(Error::Shape(format!("{} labels for {} feature rows", labels.len(), features.rows())));
        }
        if let Some((row, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= classes) {
            return Err(Error::Data(format!("row {row}: label {l} outside [0, {classes})")));
        }
        if !features.is_finite() {
            return Err(Error::Data("non-finite feature value".into()));
        }
        Ok(Self { features, labels, classes, names: None })
    }

    pub fn with_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.classes {
            return Err(Error::Shape(format!("{} class names for {} classes", names.len(), self.classes)));
        }
        self.names = Some(names);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn features(&self) -> &Matrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Row indices carrying label `class`, in file order.
    pub fn class_indices(&self, class: usize) -> Vec<usize> {
        self.labels.iter().enumerate().filter_map(|(i, &l)| (l == class).then_some(i)).collect()
    }

    /// New dataset made of the given rows. Panics on an empty or out-of-range index list.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        assert!(!indices.is_empty(), "empty subset");
        Dataset {
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            classes: self.classes,
            names: self.names.clone(),
        }
    }

    /// Returns the dataset with the feature matrix replaced (same row count).
    pub fn map_features(&self, features: Matrix) -> Result<Dataset> {
        let mut d = Dataset::new(features, self.labels.clone(), self.classes)?;
        d.names = self.names.clone();
        Ok(d)
    }
}

/// Per-feature min-max scaling to `[0, 1]`. Constant features map to 0.
#[derive(Debug, Clone, PartialEq)]
pub struct MinMax {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMax {
    pub fn fit(x: &Matrix) -> Self {
        let mut min = vec![f64::INFINITY; x.cols()];
        let mut max = vec![f64::NEG_INFINITY; x.cols()];
        for row in x.iter_rows() {
            for (j, &v) in row.iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        Self { min, max }
    }

    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.min.len() {
            return Err(Error::Shape(format!("scaler fitted on {} features, input has {}", self.min.len(), x.cols())));
        }
        let mut out = x.clone();
        for i in 0..out.rows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                let range = self.max[j] - self.min[j];
                *v = if range > 0.0 { (*v - self.min[j]) / range } else { 0.0 };
            }
        }
        Ok(out)
    }
}

/// Data lines of a CSV text as `(line_number, cells)`, skipping comments and blanks.
fn csv_records(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            None
        } else {
            Some((i + 1, t.split(',').map(str::trim).collect()))
        }
    })
}

fn parse_cell(cell: &str, line: usize, col: usize) -> Result<f64> {
    let v: f64 = cell
        .parse()
        .map_err(|_| Error::parse(line, format!("row {line}: non-numeric feature {cell:?} in column {col}")))?;
    if !v.is_finite() {
        return Err(Error::parse(line, format!("row {line}: non-finite feature in column {col}")));
    }
    Ok(v)
}

/// Parses labelled CSV text. `label_column` defaults to the last column.
pub fn parse_csv(text: &str, label_column: Option<usize>, classes: usize) -> Result<Dataset> {
    if classes == 0 {
        return Err(Error::Config("class count must be positive".into()));
    }
    let mut arity = None;
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (line, cells) in csv_records(text) {
        let n = *arity.get_or_insert(cells.len());
        if cells.len() != n {
            return Err(Error::parse(line, format!("row {line}: expected {n} columns, found {}", cells.len())));
        }
        if n < 2 {
            return Err(Error::parse(line, format!("row {line}: need at least one feature and a label")));
        }
        let lc = label_column.unwrap_or(n - 1);
        if lc >= n {
            return Err(Error::Config(format!("label column {lc} out of range for {n} columns")));
        }
        for (j, cell) in cells.iter().enumerate() {
            if j == lc {
                let l: usize = cell
                    .parse()
                    .map_err(|_| Error::parse(line, format!("row {line}: label {cell:?} is not a class index")))?;
                if l >= classes {
                    return Err(Error::parse(line, format!("row {line}: label {l} outside [0, {classes})")));
                }
                labels.push(l);
            } else {
                data.push(parse_cell(cell, line, j)?);
            }
        }
    }
    let Some(n) = arity else {
        return Err(Error::Data("no rows".into()));
    };
    let features = Matrix::new(labels.len(), n - 1, data)?;
    Dataset::new(features, labels, classes)
}

/// Parses unlabelled CSV text into a feature matrix.
pub fn parse_features(text: &str) -> Result<Matrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, cells) in csv_records(text) {
        if let Some(first) = rows.first() {
            if first.len() != cells.len() {
                return Err(Error::parse(
                    line,
                    format!("row {line}: expected {} columns, found {}", first.len(), cells.len()),
                ));
            }
        }
        let row = cells.iter().enumerate().map(|(j, c)| parse_cell(c, line, j)).collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Data("no rows".into()));
    }
    Matrix::from_rows(&rows)
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn load_csv(path: impl AsRef<Path>, label_column: Option<usize>, classes: usize) -> Result<Dataset> {
    parse_csv(&read_text(path.as_ref())?, label_column, classes)
}

pub fn load_features(path: impl AsRef<Path>) -> Result<Matrix> {
    parse_features(&read_text(path.as_ref())?)
}

/// Serializes with labels in the last column. `f64` formatting is shortest
/// round-trip, so a reload reproduces every value bit for bit.
pub fn to_csv(d: &Dataset) -> String {
    let mut out = String::new();
    for (row, label) in d.features.iter_rows().zip(&d.labels) {
        for v in row {
            write!(out, "{v},").unwrap();
        }
        writeln!(out, "{label}").unwrap();
    }
    out
}

pub fn write_csv(d: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_csv(d)).map_err(|e| Error::io(path, e))
}

/// Shuffled partition into `floor(fraction * N)` and the remaining rows.
/// Each part keeps the original relative row order.
pub fn split(d: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!("split fraction {fraction} not in (0, 1)")));
    }
    let n = d.len();
    let first = (fraction * n as f64).floor() as usize;
    if first == 0 || first == n {
        return Err(Error::Config(format!("split fraction {fraction} of {n} rows leaves an empty part")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut stream_rng(seed, 0));
    let (a, b) = idx.split_at_mut(first);
    a.sort_unstable();
    b.sort_unstable();
    Ok((d.subset(a), d.subset(b)))
}

/// Geometry and colours for rendering a per-pixel class map.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterSpec {
    pub width: usize,
    pub height: usize,
    pub palette: BTreeMap<usize, [u8; 3]>,
}

impl RasterSpec {
    pub fn new(width: usize, height: usize, palette: BTreeMap<usize, [u8; 3]>) -> Self {
        Self { width, height, palette }
    }

    /// Uses [`default_palette`] for `classes` classes.
    pub fn with_default_palette(width: usize, height: usize, classes: usize) -> Self {
        Self::new(width, height, default_palette(classes))
    }
}

const PALETTE: [[u8; 3]; 8] = [
    [255, 128, 0],
    [0, 160, 0],
    [0, 0, 255],
    [160, 220, 255],
    [128, 128, 128],
    [255, 255, 0],
    [200, 0, 200],
    [0, 0, 0],
];

/// Fixed colour per class index; cycles after eight classes.
pub fn default_palette(classes: usize) -> BTreeMap<usize, [u8; 3]> {
    (0..classes).map(|c| (c, PALETTE[c % PALETTE.len()])).collect()
}

/// Binary PPM (P6, maxval 255), row-major from the top-left pixel.
pub fn render_ppm(predictions: &[usize], spec: &RasterSpec) -> Result<Vec<u8>> {
    let pixels = spec.width * spec.height;
    if pixels == 0 {
        return Err(Error::Data("empty raster".into()));
    }
    if predictions.len() != pixels {
        return Err(Error::Shape(format!(
            "{} predictions for a {}x{} raster",
            predictions.len(),
            spec.width,
            spec.height
        )));
    }
    let mut out = format!("P6\n{} {}\n255\n", spec.width, spec.height).into_bytes();
    out.reserve(3 * pixels);
    for &c in predictions {
        let rgb = spec.palette.get(&c).ok_or_else(|| Error::Data(format!("class {c} has no palette entry")))?;
        out.extend_from_slice(rgb);
    }
    Ok(out)
}

pub fn export_map(predictions: &[usize], spec: &RasterSpec, path: impl AsRef<Path>) -> Result<()> {
    let bytes = render_ppm(predictions, spec)?;
    let path = path.as_ref();
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// One class index per line.
pub fn write_predictions(predictions: &[usize], path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::with_capacity(predictions.len() * 2);
    for p in predictions {
        writeln!(out, "{p}").unwrap();
    }
    let path = path.as_ref();
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn parse_predictions(text: &str) -> Result<Vec<usize>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| l.trim().parse().map_err(|_| Error::parse(i + 1, format!("not a class index: {:?}", l.trim()))))
        .collect()
}

pub fn read_predictions(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    parse_predictions(&read_text(path.as_ref())?)
}
