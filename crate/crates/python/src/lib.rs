//! Python bindings. Matrices cross the boundary as lists of rows.

use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use qmsvm::pipeline::{self, PipelineConfig, SamplerChoice};
use qmsvm::sampler::SimulatedAnnealing;
use qmsvm::{
    AnnealConfig, CombineConfig, Dataset, Error, ExactSolver, Kernel, KernelParams, Matrix, QmsvmParams, QuboMeta,
    QuboProblem, SampleSet, SelectionConfig, TrainedModel,
};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        Error::Sampler(_) | Error::Transport(_) | Error::Protocol(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn matrix(rows: &[Vec<f64>]) -> PyResult<Matrix> {
    Matrix::from_rows(rows).map_err(py_err)
}

fn dataset(features: &[Vec<f64>], labels: Vec<usize>, classes: usize) -> PyResult<Dataset> {
    Dataset::new(matrix(features)?, labels, classes).map_err(py_err)
}

type SampleRow = (f64, u64, Vec<u32>);

fn sample_rows(set: &SampleSet) -> Vec<SampleRow> {
    set.samples().iter().map(|s| (s.energy, s.occurrences, s.bits.iter().map(|&b| u32::from(b)).collect())).collect()
}

/// Gaussian kernel matrix `exp(-gamma |a_i - b_j|^2)`.
#[pyfunction]
fn kernel_matrix(a: Vec<Vec<f64>>, b: Vec<Vec<f64>>, gamma: f64) -> PyResult<Vec<Vec<f64>>> {
    let k = Kernel::new(KernelParams::new(gamma).map_err(py_err)?);
    Ok(k.matrix(&matrix(&a)?, &matrix(&b)?).map_err(py_err)?.to_rows())
}

/// Decodes a bitstring into the `m x c` solution matrix.
#[pyfunction]
fn decode_bits(bits: Vec<u8>, m: usize, c: usize, b: usize) -> PyResult<Vec<Vec<f64>>> {
    let t = qmsvm::qubo::decode_bits(&bits, QuboMeta { m, c, b }).map_err(py_err)?;
    Ok(t.tau().to_rows())
}

#[pyclass(name = "Qubo", module = "pyqmsvm", frozen)]
struct PyQubo(QuboProblem);

#[pymethods]
impl PyQubo {
    /// QUBO for a support set: features, labels in `0..classes`.
    #[staticmethod]
    #[pyo3(signature = (features, labels, classes, gamma=1.0, bits=2, beta=1.0, mu=1.0, max_min_ratio=Some(15.0)))]
    #[allow(clippy::too_many_arguments)]
    fn build(
        features: Vec<Vec<f64>>,
        labels: Vec<usize>,
        classes: usize,
        gamma: f64,
        bits: u32,
        beta: f64,
        mu: f64,
        max_min_ratio: Option<f64>,
    ) -> PyResult<Self> {
        let d = dataset(&features, labels, classes)?;
        let k = Kernel::new(KernelParams::new(gamma).map_err(py_err)?)
            .matrix(d.features(), d.features())
            .map_err(py_err)?;
        let p = QmsvmParams { bits, beta, mu, max_min_ratio };
        Ok(Self(qmsvm::qubo::build_qubo(&d, &k, &p).map_err(py_err)?))
    }

    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(Self(QuboProblem::parse_text(text).map_err(py_err)?))
    }

    fn to_text(&self) -> String {
        self.0.to_text()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    /// `(m, c, b)`.
    #[getter]
    fn shape(&self) -> (usize, usize, usize) {
        let meta = self.0.meta();
        (meta.m, meta.c, meta.b)
    }

    /// Upper-triangular `(i, j, value)` triplets.
    fn entries(&self) -> Vec<(usize, usize, f64)> {
        self.0.entries().to_vec()
    }

    fn energy(&self, bits: Vec<u8>) -> PyResult<f64> {
        self.0.energy(&bits).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("Qubo(dim={}, entries={})", self.0.dim(), self.0.entries().len())
    }
}

/// All minimum-energy states as `(energy, occurrences, bits)`.
#[pyfunction]
fn solve_exact(py: Python<'_>, qubo: &PyQubo) -> PyResult<Vec<SampleRow>> {
    let set = py.detach(|| ExactSolver.solve(&qubo.0)).map_err(py_err)?;
    Ok(sample_rows(&set))
}

/// Simulated annealing; rows sorted by energy.
#[pyfunction]
#[pyo3(signature = (qubo, num_reads=1000, sweeps=100, seed=0))]
fn solve_sa(py: Python<'_>, qubo: &PyQubo, num_reads: usize, sweeps: usize, seed: u64) -> PyResult<Vec<SampleRow>> {
    let cfg = AnnealConfig { num_reads, sweeps, seed, ..Default::default() };
    cfg.validate().map_err(py_err)?;
    let set = py.detach(|| SimulatedAnnealing::new(cfg).solve(&qubo.0)).map_err(py_err)?;
    Ok(sample_rows(&set))
}

#[pyclass(name = "Model", module = "pyqmsvm", frozen)]
struct PyModel(TrainedModel);

#[pymethods]
impl PyModel {
    fn predict(&self, py: Python<'_>, features: Vec<Vec<f64>>) -> PyResult<Vec<usize>> {
        let x = matrix(&features)?;
        py.detach(|| self.0.predict(&x)).map_err(py_err)
    }

    fn decision_scores(&self, features: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        let x = matrix(&features)?;
        Ok(self.0.decision_scores(&x, &self.0.kernel()).map_err(py_err)?.to_rows())
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.0.save(path).map_err(py_err)
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self(TrainedModel::load(path).map_err(py_err)?))
    }

    #[getter]
    fn support(&self) -> Vec<Vec<f64>> {
        self.0.support().to_rows()
    }

    #[getter]
    fn tau_bar(&self) -> Vec<Vec<f64>> {
        self.0.tau_bar().to_rows()
    }

    #[getter]
    fn gamma(&self) -> f64 {
        self.0.gamma()
    }

    #[getter]
    fn classes(&self) -> usize {
        self.0.classes()
    }

    fn __repr__(&self) -> String {
        format!("Model(M={}, C={}, gamma={})", self.0.support().rows(), self.0.classes(), self.0.gamma())
    }
}

/// Full training run. Returns the model and a report dict with per-solution
/// accuracies, weights and phase times. `sampler` is "sa" or "exact".
#[pyfunction]
#[pyo3(signature = (
    features, labels, classes=3, m=60, bits=2, beta=1.0, mu=1.0, gamma=1.0, num_reads=1000, sweeps=100,
    solutions=100, multiplier=10.0, max_min_ratio=Some(15.0), selection="random", sampler="sa", seed=0
))]
#[allow(clippy::too_many_arguments)]
fn train<'py>(
    py: Python<'py>,
    features: Vec<Vec<f64>>,
    labels: Vec<usize>,
    classes: usize,
    m: usize,
    bits: u32,
    beta: f64,
    mu: f64,
    gamma: f64,
    num_reads: usize,
    sweeps: usize,
    solutions: usize,
    multiplier: f64,
    max_min_ratio: Option<f64>,
    selection: &str,
    sampler: &str,
    seed: u64,
) -> PyResult<(PyModel, Bound<'py, PyDict>)> {
    let d = dataset(&features, labels, classes)?;
    let sampler = match sampler {
        "sa" => SamplerChoice::Anneal(AnnealConfig { num_reads, sweeps, seed, ..Default::default() }),
        "exact" => SamplerChoice::Exact,
        other => return Err(PyValueError::new_err(format!("unknown sampler {other:?}; expected sa or exact"))),
    };
    let cfg = PipelineConfig {
        qubo: QmsvmParams { bits, beta, mu, max_min_ratio },
        gamma,
        selection: SelectionConfig { method: selection.parse().map_err(py_err)?, size: m, seed, ..Default::default() },
        sampler,
        combine: CombineConfig { solutions, multiplier, ..Default::default() },
    };
    let out = py.detach(|| pipeline::train(&d, None, &cfg)).map_err(py_err)?;

    let report = PyDict::new(py);
    report.set_item("qubo_dim", out.qubo_dim)?;
    report.set_item("accuracies", &out.accuracies)?;
    report.set_item("weights", &out.weights)?;
    report.set_item("threshold", out.threshold)?;
    report.set_item("best_single_accuracy", out.best_single_accuracy())?;
    report.set_item("combined_accuracy", out.combined_accuracy)?;
    let phases = PyDict::new(py);
    for p in &out.phases {
        phases.set_item(p.phase.as_str(), (p.seconds, p.kernel_evals))?;
    }
    report.set_item("phases", phases)?;
    Ok((PyModel(out.model), report))
}

#[pyfunction]
fn accuracy(pred: Vec<usize>, truth: Vec<usize>) -> PyResult<f64> {
    qmsvm::eval::accuracy(&pred, &truth).map_err(py_err)
}

#[pyfunction]
fn macro_f1(pred: Vec<usize>, truth: Vec<usize>, classes: usize) -> PyResult<f64> {
    qmsvm::eval::macro_f1(&pred, &truth, classes).map_err(py_err)
}

/// Gaussian blobs on a regular polygon: `(features, labels)`.
#[pyfunction]
#[pyo3(signature = (n, classes=3, separation=5.0, std_dev=1.0, seed=0))]
fn blobs(n: usize, classes: usize, separation: f64, std_dev: f64, seed: u64) -> PyResult<(Vec<Vec<f64>>, Vec<usize>)> {
    let cfg = qmsvm::eval::BlobsConfig { classes, features: 2, separation, std_dev };
    let d = qmsvm::eval::blobs(n, &cfg, seed).map_err(py_err)?;
    Ok((d.features().to_rows(), d.labels().to_vec()))
}

#[pymodule]
fn pyqmsvm(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyQubo>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(kernel_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(decode_bits, m)?)?;
    m.add_function(wrap_pyfunction!(solve_exact, m)?)?;
    m.add_function(wrap_pyfunction!(solve_sa, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(accuracy, m)?)?;
    m.add_function(wrap_pyfunction!(macro_f1, m)?)?;
    m.add_function(wrap_pyfunction!(blobs, m)?)?;
    Ok(())
}
