//! Python bindings for `phasediff`.
//!
//! Fields cross the boundary as nested lists of Python `complex`; wrap them
//! with `numpy.asarray` on the Python side. Library errors become `ValueError`.

use ndarray::Array2;
use num_complex::Complex64 as C64;
use phasediff as pd;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: pd::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_rows<T: Copy>(a: &Array2<T>) -> Vec<Vec<T>> {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn from_rows(rows: Vec<Vec<C64>>) -> PyResult<Array2<C64>> {
    let nr = rows.len();
    let nc = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != nc) {
        return Err(PyValueError::new_err("rows have different lengths"));
    }
    Array2::from_shape_vec((nr, nc), rows.into_iter().flatten().collect()).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// `ModelParams(hbar=1, mass=1, a=1, b=1, n=1)`.
#[pyclass(name = "ModelParams", module = "phasediff_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyParams(pd::ModelParams);

#[pymethods]
impl PyParams {
    #[new]
    #[pyo3(signature = (hbar=1.0, mass=1.0, a=1.0, b=1.0, n=1))]
    fn new(hbar: f64, mass: f64, a: f64, b: f64, n: usize) -> PyResult<Self> {
        pd::ModelParams::new(hbar, mass, a, b, n).map(Self).map_err(err)
    }
    #[getter]
    fn hbar(&self) -> f64 {
        self.0.hbar
    }
    #[getter]
    fn mass(&self) -> f64 {
        self.0.mass
    }
    #[getter]
    fn a(&self) -> f64 {
        self.0.a
    }
    #[getter]
    fn b(&self) -> f64 {
        self.0.b
    }
    #[getter]
    fn n(&self) -> usize {
        self.0.n
    }
    /// `ab/ħ`.
    fn relaxation_rate(&self) -> f64 {
        self.0.relaxation_rate()
    }
    /// Variance `aħ/(2b)` of the smoothing kernel.
    fn smoothing_variance(&self) -> PyResult<f64> {
        self.0.smoothing_variance().map_err(err)
    }
    fn __repr__(&self) -> String {
        let p = self.0;
        format!("ModelParams(hbar={}, mass={}, a={}, b={}, n={})", p.hbar, p.mass, p.a, p.b, p.n)
    }
}

/// Phase-space grid, periodic in `x`.
#[pyclass(name = "PhaseGrid", module = "phasediff_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyGrid(pd::PhaseGrid);

#[pymethods]
impl PyGrid {
    #[new]
    #[pyo3(signature = (nx, np, x_min, x_max, p_min, p_max, hbar=1.0))]
    fn new(nx: usize, np: usize, x_min: f64, x_max: f64, p_min: f64, p_max: f64, hbar: f64) -> PyResult<Self> {
        let spec = pd::GridSpec { nx, np, x_min, x_max, p_min, p_max, n: 1 };
        pd::PhaseGrid::new(spec, hbar).map(Self).map_err(err)
    }
    /// `size × size` nodes on `[−half_width, half_width]²`.
    #[staticmethod]
    #[pyo3(signature = (size, half_width, hbar=1.0))]
    fn square(size: usize, half_width: f64, hbar: f64) -> PyResult<Self> {
        pd::PhaseGrid::new(pd::GridSpec::square(size, half_width), hbar).map(Self).map_err(err)
    }
    #[getter]
    fn shape(&self) -> (usize, usize) {
        self.0.shape()
    }
    #[getter]
    fn dx(&self) -> f64 {
        self.0.dx()
    }
    #[getter]
    fn dp(&self) -> f64 {
        self.0.dp()
    }
    fn xs(&self) -> Vec<f64> {
        self.0.xs()
    }
    fn ps(&self) -> Vec<f64> {
        self.0.ps()
    }
    fn __repr__(&self) -> String {
        let g = &self.0;
        format!(
            "PhaseGrid(nx={}, np={}, x=[{}, {}), p=[{}, {}])",
            g.nx(),
            g.np(),
            g.x_min(),
            g.x_max(),
            g.p_min(),
            g.p_max()
        )
    }
}

#[pyclass(name = "Potential", module = "phasediff_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyPotential(pd::Potential);

#[pymethods]
impl PyPotential {
    #[staticmethod]
    fn zero() -> Self {
        Self(pd::Potential::Zero)
    }
    /// `½kx²`.
    #[staticmethod]
    fn harmonic(stiffness: f64) -> Self {
        Self(pd::Potential::Harmonic { stiffness })
    }
    /// `−Fx`.
    #[staticmethod]
    fn linear(force: f64) -> Self {
        Self(pd::Potential::Linear { force })
    }
    #[staticmethod]
    fn quartic(coeff: f64) -> Self {
        Self(pd::Potential::Quartic { coeff })
    }
    /// `A cos(κx)`.
    #[staticmethod]
    fn cosine(amplitude: f64, wavenumber: f64) -> Self {
        Self(pd::Potential::Cosine { amplitude, wavenumber })
    }
    /// Samples on the coordinate grid.
    #[staticmethod]
    fn table(values: Vec<f64>) -> Self {
        Self(pd::Potential::Table { values })
    }
    fn __repr__(&self) -> String {
        format!("{:?}", self.0)
    }
}

#[pyclass(name = "Hamiltonian", module = "phasediff_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyHamiltonian(pd::HamiltonianSpec);

#[pymethods]
impl PyHamiltonian {
    #[staticmethod]
    fn zero() -> Self {
        Self(pd::HamiltonianSpec::zero())
    }
    #[staticmethod]
    fn free(mass: f64) -> PyResult<Self> {
        pd::HamiltonianSpec::free(mass).map(Self).map_err(err)
    }
    #[staticmethod]
    fn harmonic(mass: f64, omega: f64) -> PyResult<Self> {
        pd::HamiltonianSpec::harmonic(mass, omega).map(Self).map_err(err)
    }
    /// `p²/2m + V(x)`.
    #[staticmethod]
    fn separable(mass: f64, potential: &PyPotential) -> PyResult<Self> {
        pd::HamiltonianSpec::separable(mass, potential.0.clone()).map(Self).map_err(err)
    }
    /// `H` sampled on the phase grid, shape `(nx, np)`.
    #[staticmethod]
    fn tabulated(values: Vec<Vec<f64>>) -> PyResult<Self> {
        let nr = values.len();
        let nc = values.first().map_or(0, Vec::len);
        let a = Array2::from_shape_vec((nr, nc), values.into_iter().flatten().collect())
            .map_err(|e| PyValueError::new_err(e.to_string()))?;
        pd::HamiltonianSpec::tabulated(a).map(Self).map_err(err)
    }
    fn is_separable(&self) -> bool {
        self.0.is_separable()
    }
}

/// Configuration-space wave function on a periodic axis.
#[pyclass(name = "ConfigWave", module = "phasediff_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyConfigWave(pd::ConfigWaveFunction);

#[pymethods]
impl PyConfigWave {
    #[new]
    fn new(x_min: f64, x_max: f64, values: Vec<C64>) -> PyResult<Self> {
        let axis = pd::XAxis::new(values.len(), x_min, x_max).map_err(err)?;
        pd::ConfigWaveFunction::new(axis, values).map(Self).map_err(err)
    }
    /// Normalized Gaussian with position standard deviation `sigma`.
    #[staticmethod]
    #[pyo3(signature = (n, x_min, x_max, center, sigma, momentum=0.0, hbar=1.0))]
    fn gaussian(n: usize, x_min: f64, x_max: f64, center: f64, sigma: f64, momentum: f64, hbar: f64) -> PyResult<Self> {
        let axis = pd::XAxis::new(n, x_min, x_max).map_err(err)?;
        pd::ConfigWaveFunction::gaussian(axis, center, sigma, momentum, hbar).map(Self).map_err(err)
    }
    fn values(&self) -> Vec<C64> {
        self.0.values().to_vec()
    }
    fn xs(&self) -> Vec<f64> {
        self.0.axis().points()
    }
    fn norm(&self) -> f64 {
        self.0.norm()
    }
    fn distance(&self, other: &Self) -> f64 {
        self.0.distance(&other.0)
    }
    /// Distance after removing the best global phase.
    fn phase_aligned_distance(&self, other: &Self) -> f64 {
        self.0.phase_aligned_distance(&other.0)
    }
    fn __len__(&self) -> usize {
        self.0.values().len()
    }
}

/// Phase-space field `φ[j, l] = φ(x_j, p_l)`.
#[pyclass(name = "PhaseWave", module = "phasediff_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyPhaseWave(pd::PhaseWaveFunction);

#[pymethods]
impl PyPhaseWave {
    #[new]
    fn new(grid: &PyGrid, values: Vec<Vec<C64>>) -> PyResult<Self> {
        pd::PhaseWaveFunction::new(grid.0, from_rows(values)?).map(Self).map_err(err)
    }
    #[getter]
    fn grid(&self) -> PyGrid {
        PyGrid(*self.0.grid())
    }
    fn values(&self) -> Vec<Vec<C64>> {
        to_rows(self.0.values())
    }
    fn norm(&self) -> f64 {
        self.0.norm()
    }
    fn inner(&self, other: &Self) -> C64 {
        self.0.inner(&other.0)
    }
    fn distance(&self, other: &Self) -> f64 {
        self.0.distance(&other.0)
    }
}

/// Embed `psi` in the kernel of the diffusion operator.
#[pyfunction]
fn lift(psi: &PyConfigWave, grid: &PyGrid, params: &PyParams) -> PyResult<PyPhaseWave> {
    pd::lift_to_phase(&psi.0, &grid.0, &params.0).map(PyPhaseWave).map_err(err)
}

#[pyfunction]
fn project(phi: &PyPhaseWave, params: &PyParams) -> PyResult<PyConfigWave> {
    pd::project_to_config(&phi.0, &params.0).map(PyConfigWave).map_err(err)
}

/// `‖φ − lift(project(φ))‖ / ‖φ‖`.
#[pyfunction]
fn kernel_residual(phi: &PyPhaseWave, params: &PyParams) -> PyResult<f64> {
    pd::Projector::new(phi.0.grid(), &params.0).and_then(|p| p.residual(&phi.0)).map_err(err)
}

#[pyfunction]
fn evolve_diffusion(phi: &PyPhaseWave, t: f64, dt: f64, params: &PyParams) -> PyResult<PyPhaseWave> {
    pd::evolve_diffusion(&phi.0, t, dt, &params.0).map(PyPhaseWave).map_err(err)
}

/// Transport, phase rotation and diffusion together.
#[pyfunction]
fn evolve_full(phi: &PyPhaseWave, hamiltonian: &PyHamiltonian, params: &PyParams, t: f64, dt: f64) -> PyResult<PyPhaseWave> {
    pd::evolve_full(&phi.0, &hamiltonian.0, &params.0, t, dt).map(PyPhaseWave).map_err(err)
}

/// Eigenvalues of one `x`-mode of the diffusion operator, as a dict.
#[pyfunction]
#[pyo3(signature = (params, k_mode=0.0, levels=4))]
fn diffusion_spectrum<'py>(py: Python<'py>, params: &PyParams, k_mode: f64, levels: usize) -> PyResult<Bound<'py, PyDict>> {
    let s = pd::diffusion_spectrum(&params.0, k_mode, levels).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("k_mode", s.k_mode)?;
    d.set_item("eigenvalues", s.eigenvalues.clone())?;
    d.set_item("gap", s.gap())?;
    d.set_item("ground_center", s.ground_center)?;
    d.set_item("ground_width", s.ground_width)?;
    Ok(d)
}

/// `|lift(ψ)|²` on `grid`.
#[pyfunction]
#[pyo3(signature = (psi, grid, params, normalize=true))]
fn phase_density(psi: &PyConfigWave, grid: &PyGrid, params: &PyParams, normalize: bool) -> PyResult<Vec<Vec<f64>>> {
    pd::phase_density(&psi.0, &grid.0, &params.0, normalize).map(|d| to_rows(&d.values)).map_err(err)
}

/// `|ψ|²` smoothed by the kernel variance.
#[pyfunction]
#[pyo3(signature = (psi, params, normalize=true))]
fn config_density(psi: &PyConfigWave, params: &PyParams, normalize: bool) -> PyResult<Vec<f64>> {
    pd::config_density(&psi.0, &params.0, normalize).map_err(err)
}

#[pyfunction]
fn apply_h_approx(psi: &PyConfigWave, potential: &PyPotential, params: &PyParams) -> PyResult<PyConfigWave> {
    pd::apply_h_approx(&psi.0, &potential.0, &params.0).map(PyConfigWave).map_err(err)
}

#[pyfunction]
fn apply_h_integral(psi: &PyConfigWave, hamiltonian: &PyHamiltonian, params: &PyParams) -> PyResult<PyConfigWave> {
    pd::apply_h_integral(&psi.0, &hamiltonian.0, &params.0).map(PyConfigWave).map_err(err)
}

/// Integrate `iħψ̇ = Ĥψ` with the closed-form operator (`potential`) or the
/// integral operator (`hamiltonian`). Exactly one must be given.
#[pyfunction]
#[pyo3(signature = (psi, params, t, dt, potential=None, hamiltonian=None))]
fn solve_schrodinger(
    psi: &PyConfigWave,
    params: &PyParams,
    t: f64,
    dt: f64,
    potential: Option<&PyPotential>,
    hamiltonian: Option<&PyHamiltonian>,
) -> PyResult<PyConfigWave> {
    let op = match (potential, hamiltonian) {
        (Some(v), None) => pd::HOperator::Approx {
            potential: v.0.clone(),
            terms: pd::ApproxTerms::ALL,
        },
        (None, Some(h)) => pd::HOperator::Integral { spec: h.0.clone() },
        _ => return Err(PyValueError::new_err("give exactly one of potential and hamiltonian")),
    };
    pd::solve_schrodinger(&psi.0, &op, t, dt, &params.0).map(PyConfigWave).map_err(err)
}

/// Residual and slow-track error of a full run, sampled every `sample_every` steps.
#[pyfunction]
#[pyo3(signature = (phi, hamiltonian, params, t, dt, sample_every=1))]
fn fast_slow<'py>(
    py: Python<'py>,
    phi: &PyPhaseWave,
    hamiltonian: &PyHamiltonian,
    params: &PyParams,
    t: f64,
    dt: f64,
    sample_every: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let tr = pd::fast_slow_decompose(&phi.0, &hamiltonian.0, &params.0, t, dt, sample_every).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("times", tr.times.clone())?;
    d.set_item("residuals", tr.residuals.clone())?;
    d.set_item("norms", tr.norms.clone())?;
    d.set_item("slow_errors", tr.slow_errors.clone())?;
    d.set_item("fast_decay_rate", tr.fast_decay_rate)?;
    d.set_item("slow_deviation", tr.slow_deviation)?;
    d.set_item("reference_start", tr.reference_start)?;
    Ok(d)
}

/// Path-integral estimate of the evolved field. Returns
/// `(estimate, stderr, ess)`.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (phi, hamiltonian, params, t, dt, paths, seed, grid=None))]
fn monte_carlo(
    phi: &PyPhaseWave,
    hamiltonian: &PyHamiltonian,
    params: &PyParams,
    t: f64,
    dt: f64,
    paths: usize,
    seed: u64,
    grid: Option<&PyGrid>,
) -> PyResult<(PyPhaseWave, Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let grid = grid.map_or(*phi.0.grid(), |g| g.0);
    let est = pd::mc_wavefunction(&phi.0, &hamiltonian.0, &params.0, t, dt, paths, seed, &grid).map_err(err)?;
    Ok((PyPhaseWave(est.estimate), to_rows(&est.stderr), to_rows(&est.ess)))
}

/// Derived quantities for an electron-like particle at `temperature` (K).
#[pyfunction]
#[pyo3(signature = (temperature, gamma=None, mass=None))]
fn physical_report<'py>(py: Python<'py>, temperature: f64, gamma: Option<f64>, mass: Option<f64>) -> PyResult<Bound<'py, PyDict>> {
    let base = pd::PhysicalEnvironment::lamb_electron(temperature).map_err(err)?;
    let env = pd::PhysicalEnvironment::new(temperature, gamma.unwrap_or(base.gamma), mass.unwrap_or(base.mass)).map_err(err)?;
    let r = pd::physical::physical_report(&env).map_err(err)?;
    let d = PyDict::new(py);
    for (k, v) in [
        ("a", r.a),
        ("b", r.b),
        ("ab", r.ab),
        ("kt", r.kt),
        ("a_over_b", r.a_over_b),
        ("relaxation_time", r.relaxation_time),
        ("smoothing_length", r.smoothing_length),
        ("compton_length", r.compton_length),
        ("internal_mass", r.internal_mass),
    ] {
        d.set_item(k, v)?;
    }
    Ok(d)
}

#[pymodule]
fn phasediff_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", pd::VERSION)?;
    m.add_class::<PyParams>()?;
    m.add_class::<PyGrid>()?;
    m.add_class::<PyPotential>()?;
    m.add_class::<PyHamiltonian>()?;
    m.add_class::<PyConfigWave>()?;
    m.add_class::<PyPhaseWave>()?;
    m.add_function(wrap_pyfunction!(lift, m)?)?;
    m.add_function(wrap_pyfunction!(project, m)?)?;
    m.add_function(wrap_pyfunction!(kernel_residual, m)?)?;
    m.add_function(wrap_pyfunction!(evolve_diffusion, m)?)?;
    m.add_function(wrap_pyfunction!(evolve_full, m)?)?;
    m.add_function(wrap_pyfunction!(diffusion_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(phase_density, m)?)?;
    m.add_function(wrap_pyfunction!(config_density, m)?)?;
    m.add_function(wrap_pyfunction!(apply_h_approx, m)?)?;
    m.add_function(wrap_pyfunction!(apply_h_integral, m)?)?;
    m.add_function(wrap_pyfunction!(solve_schrodinger, m)?)?;
    m.add_function(wrap_pyfunction!(fast_slow, m)?)?;
    m.add_function(wrap_pyfunction!(monte_carlo, m)?)?;
    m.add_function(wrap_pyfunction!(physical_report, m)?)?;
    Ok(())
}
