//! Python bindings: models, states, product-formula error measures, the
//! spectral ladder report and the variational optimizer.

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use trotter_core::analysis::{self, PerturbativePredictor};
use trotter_core::formulas::{self, ProductFormulaSchedule, TrotterCircuit};
use trotter_core::linalg::{eigendecompose_hermitian, SpectralDecomposition};
use trotter_core::models;
use trotter_core::variational::{self, LossConfig, LossEvaluator, OptimizerOptions, VariationalParameters};
use trotter_core::{Error, SplitHamiltonian, StateVector};

fn to_py(e: Error) -> PyErr {
    match e {
        Error::NoConvergence | Error::BranchCut { .. } | Error::NonFinite(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// A spin chain split into odd and even bond groups, with its spectrum
/// computed on construction.
#[pyclass(name = "Hamiltonian", module = "trotter_scar", frozen)]
struct PyHamiltonian {
    ham: SplitHamiltonian,
    spec: SpectralDecomposition,
}

impl PyHamiltonian {
    fn wrap(ham: trotter_core::Result<SplitHamiltonian>) -> PyResult<Self> {
        let ham = ham.map_err(to_py)?;
        let spec = eigendecompose_hermitian(&ham.dense()).map_err(to_py)?;
        Ok(Self { ham, spec })
    }

    fn circuit(&self, order: usize, dt: f64) -> PyResult<TrotterCircuit> {
        let sched = ProductFormulaSchedule::for_order(order).map_err(to_py)?;
        TrotterCircuit::new(&self.ham, &sched, dt).map_err(to_py)
    }
}

#[pymethods]
impl PyHamiltonian {
    #[staticmethod]
    #[pyo3(signature = (n_sites, h_x = 0.5))]
    fn heisenberg(n_sites: usize, h_x: f64) -> PyResult<Self> {
        Self::wrap(models::build_heisenberg(n_sites, h_x))
    }

    #[staticmethod]
    #[pyo3(signature = (n_sites, j_x = 1.0, h_x = 0.8, h_y = 0.9, h_z = 4.0))]
    fn stark(n_sites: usize, j_x: f64, h_x: f64, h_y: f64, h_z: f64) -> PyResult<Self> {
        Self::wrap(models::build_stark(n_sites, j_x, h_x, h_y, h_z))
    }

    #[staticmethod]
    fn pxp(n_sites: usize) -> PyResult<Self> {
        Self::wrap(models::build_pxp(n_sites))
    }

    #[getter]
    fn n_sites(&self) -> usize {
        self.ham.n_sites()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.ham.dim()
    }

    #[getter]
    fn model(&self) -> &'static str {
        self.ham.model().name()
    }

    /// Ladder frequency the model is expected to support.
    #[getter]
    fn omega(&self) -> f64 {
        self.ham.model().omega()
    }

    fn energies(&self) -> Vec<f64> {
        self.spec.energies().to_vec()
    }

    /// Dense matrix as nested row lists.
    fn dense(&self) -> Vec<Vec<Complex64>> {
        let h = self.ham.dense();
        (0..h.nrows()).map(|i| h.row(i).iter().copied().collect()).collect()
    }

    /// Error kernel `K_q` as nested row lists (orders 1, 2, 4).
    fn error_kernel(&self, order: usize) -> PyResult<Vec<Vec<Complex64>>> {
        let k = formulas::error_kernel(&self.ham, order).map_err(to_py)?;
        let m = k.matrix();
        Ok((0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect())
    }

    fn __repr__(&self) -> String {
        format!("Hamiltonian({}, n_sites={})", self.ham.model().name(), self.ham.n_sites())
    }
}

/// A normalized state vector on `n` qubits.
#[pyclass(name = "State", module = "trotter_scar", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyState {
    psi: StateVector,
}

#[pymethods]
impl PyState {
    #[new]
    fn new(amplitudes: Vec<Complex64>) -> PyResult<Self> {
        let psi = StateVector::normalized(amplitudes.into()).map_err(to_py)?;
        Ok(Self { psi })
    }

    /// Product state `⊗_j R_y(φ_j) R_x(θ_j)|0⟩`.
    #[staticmethod]
    fn product(theta: Vec<f64>, phi: Vec<f64>) -> PyResult<Self> {
        let params = VariationalParameters::new(theta, phi).map_err(to_py)?;
        let psi = variational::prepare_product_state(&params).map_err(to_py)?;
        Ok(Self { psi })
    }

    #[staticmethod]
    fn haar_product(n_sites: usize, seed: u64) -> Self {
        Self {
            psi: variational::haar_random_product_state(n_sites, seed),
        }
    }

    #[staticmethod]
    fn neel(n_sites: usize) -> Self {
        Self {
            psi: variational::neel_state(n_sites),
        }
    }

    #[getter]
    fn n_qubits(&self) -> usize {
        self.psi.n_qubits()
    }

    fn amplitudes(&self) -> Vec<Complex64> {
        self.psi.amplitudes().iter().copied().collect()
    }

    fn norm(&self) -> f64 {
        self.psi.norm()
    }

    /// `(⟨σ^x⟩, ⟨σ^y⟩, ⟨σ^z⟩)` at a 1-based site.
    fn bloch(&self, site: usize) -> PyResult<(f64, f64, f64)> {
        let [x, y, z] = analysis::local_expectations(&self.psi, site).map_err(to_py)?;
        Ok((x, y, z))
    }

    fn __repr__(&self) -> String {
        format!("State(n_qubits={})", self.psi.n_qubits())
    }
}

/// `(p_k, s_k)` for the order-`2k+2` Suzuki recursion step.
#[pyfunction]
fn suzuki_coefficients(k: usize) -> (f64, f64) {
    formulas::suzuki_coefficients(k)
}

/// Evolves `state` exactly for time `t`.
#[pyfunction]
fn exact_evolve(ham: &PyHamiltonian, state: &PyState, t: f64) -> PyResult<PyState> {
    let psi = trotter_core::linalg::exact_evolve(&ham.spec, &state.psi, t).map_err(to_py)?;
    Ok(PyState { psi })
}

/// Applies `n_steps` steps of the order-`order` product formula.
#[pyfunction]
fn trotter_evolve(ham: &PyHamiltonian, state: &PyState, order: usize, dt: f64, n_steps: usize) -> PyResult<PyState> {
    let circuit = ham.circuit(order, dt)?;
    let mut amps = state.psi.amplitudes().clone();
    for _ in 0..n_steps {
        circuit.step(&mut amps);
    }
    let psi = StateVector::new(state.psi.n_qubits(), amps).map_err(to_py)?;
    Ok(PyState { psi })
}

/// Measured Trotter error `‖e^{-iHt}ψ − S(dt)^{t/dt}ψ‖` at each time.
#[pyfunction]
fn trotter_error(ham: &PyHamiltonian, state: &PyState, order: usize, dt: f64, times: Vec<f64>) -> PyResult<Vec<f64>> {
    let circuit = ham.circuit(order, dt)?;
    formulas::measured_trotter_error_with(&ham.spec, &circuit, dt, &state.psi, &times).map_err(to_py)
}

/// Perturbative prediction of the Trotter error from the error kernel.
#[pyfunction]
fn predicted_error(ham: &PyHamiltonian, state: &PyState, order: usize, dt: f64, times: Vec<f64>) -> PyResult<Vec<f64>> {
    let kernel = formulas::error_kernel(&ham.ham, order).map_err(to_py)?;
    let pred = PerturbativePredictor::new(&ham.spec, &kernel, &state.psi).map_err(to_py)?;
    Ok(times.iter().map(|&t| pred.error(dt, t)).collect())
}

/// Exact Loschmidt echo `|⟨ψ|e^{-iHt}|ψ⟩|²`.
#[pyfunction]
fn loschmidt_echo(ham: &PyHamiltonian, state: &PyState, times: Vec<f64>) -> PyResult<Vec<f64>> {
    analysis::loschmidt_exact(&ham.spec, &state.psi, &times).map_err(to_py)
}

#[pyfunction]
#[pyo3(signature = (ham, state, weight_cutoff = 1e-4, top_k = 20))]
fn ladder_report<'py>(
    py: Python<'py>,
    ham: &PyHamiltonian,
    state: &PyState,
    weight_cutoff: f64,
    top_k: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let r = analysis::ladder_report(&ham.spec, &state.psi, weight_cutoff, top_k).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("omega", r.omega)?;
    d.set_item("residual", r.residual)?;
    d.set_item("commensurate", r.commensurate)?;
    d.set_item("strobe_times", r.strobe_times)?;
    d.set_item("top_overlaps", r.top_overlaps)?;
    d.set_item("total_weight", r.total_weight)?;
    Ok(d)
}

fn loss_config(l1: f64, l2: f64, t_l: f64, dt: f64, order: usize) -> LossConfig {
    LossConfig {
        l1,
        l2,
        t_l,
        dt,
        schedule_order: order,
    }
}

/// Composite loss and its gradient with respect to `[θ..., φ...]`.
#[pyfunction]
#[pyo3(signature = (ham, theta, phi, l1 = 1.0, l2 = 1e-5, t_l = 10.0, dt = 0.01, order = 2))]
#[allow(clippy::too_many_arguments)]
fn loss_and_gradient<'py>(
    py: Python<'py>,
    ham: &PyHamiltonian,
    theta: Vec<f64>,
    phi: Vec<f64>,
    l1: f64,
    l2: f64,
    t_l: f64,
    dt: f64,
    order: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = loss_config(l1, l2, t_l, dt, order);
    let eval = LossEvaluator::with_spectrum(&ham.ham, &cfg, ham.spec.clone()).map_err(to_py)?;
    let params = VariationalParameters::new(theta, phi).map_err(to_py)?;
    let (value, grad) = eval.loss_and_gradient(&params).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("total", value.total)?;
    d.set_item("error_term", value.error_term)?;
    d.set_item("echo_term", value.echo_term)?;
    d.set_item("gradient", grad)?;
    Ok(d)
}

/// Multi-restart Adam search for a product state with small Trotter error.
#[pyfunction]
#[pyo3(signature = (ham, iters = 2000, restarts = 8, seed = 0, lr0 = 0.05, lr_min = 1e-4,
                    l1 = 1.0, l2 = 1e-5, t_l = 10.0, dt = 0.01, order = 2))]
#[allow(clippy::too_many_arguments)]
fn optimize<'py>(
    py: Python<'py>,
    ham: &PyHamiltonian,
    iters: usize,
    restarts: usize,
    seed: u64,
    lr0: f64,
    lr_min: f64,
    l1: f64,
    l2: f64,
    t_l: f64,
    dt: f64,
    order: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = loss_config(l1, l2, t_l, dt, order);
    let opts = OptimizerOptions {
        iters,
        lr0,
        lr_min,
        seed,
        restarts,
    };
    let eval = LossEvaluator::with_spectrum(&ham.ham, &cfg, ham.spec.clone()).map_err(to_py)?;
    let result = py
        .detach(|| variational::optimize_with(&eval, &opts))
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("theta", result.params.theta.clone())?;
    d.set_item("phi", result.params.phi.clone())?;
    d.set_item("loss", result.loss.total)?;
    d.set_item("error_term", result.loss.error_term)?;
    d.set_item("echo_term", result.loss.echo_term)?;
    d.set_item("history", result.history.records.iter().map(|r| r.loss).collect::<Vec<_>>())?;
    Ok(d)
}

#[pymodule]
fn trotter_scar(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyHamiltonian>()?;
    m.add_class::<PyState>()?;
    m.add_function(wrap_pyfunction!(suzuki_coefficients, m)?)?;
    m.add_function(wrap_pyfunction!(exact_evolve, m)?)?;
    m.add_function(wrap_pyfunction!(trotter_evolve, m)?)?;
    m.add_function(wrap_pyfunction!(trotter_error, m)?)?;
    m.add_function(wrap_pyfunction!(predicted_error, m)?)?;
    m.add_function(wrap_pyfunction!(loschmidt_echo, m)?)?;
    m.add_function(wrap_pyfunction!(ladder_report, m)?)?;
    m.add_function(wrap_pyfunction!(loss_and_gradient, m)?)?;
    m.add_function(wrap_pyfunction!(optimize, m)?)?;
    Ok(())
}
