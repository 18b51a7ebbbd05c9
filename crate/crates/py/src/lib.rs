//! Python bindings: model parameters, spectra, Brody statistics and classical SALI.

use gcm_core::basis::{BasisSpec, QuantScheme};
use gcm_core::classical::{self, ClassicalConfig, PhasePoint};
use gcm_core::eigensolver::{diagonalize, VectorRequest};
use gcm_core::hamiltonian::{optimize_a_osc, DEFAULT_C_SHIFT};
use gcm_core::spectral_stats::{self as stats, StatsConfig};
use gcm_core::{model, GcmError};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn err(e: GcmError) -> PyErr {
    if e.is_usage() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn scheme(s: &str) -> PyResult<QuantScheme> {
    s.parse().map_err(err)
}

#[pyclass(name = "ModelParams", frozen, from_py_object)]
#[derive(Clone)]
struct PyModelParams(model::ModelParams);

#[pymethods]
impl PyModelParams {
    #[new]
    #[pyo3(signature = (a, b, c=1.0, k=1.0, hbar=None, kappa=None))]
    fn new(a: f64, b: f64, c: f64, k: f64, hbar: Option<f64>, kappa: Option<f64>) -> PyResult<Self> {
        let hbar = match (hbar, kappa) {
            (Some(h), None) => h,
            (None, Some(kappa)) if kappa > 0.0 => (kappa * k).sqrt(),
            _ => return Err(PyValueError::new_err("give exactly one of hbar or a positive kappa")),
        };
        model::ModelParams::new(a, b, c, k, hbar).map(Self).map_err(err)
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
    fn c(&self) -> f64 {
        self.0.c
    }
    #[getter]
    fn k(&self) -> f64 {
        self.0.k
    }
    #[getter]
    fn hbar(&self) -> f64 {
        self.0.hbar
    }
    #[getter]
    fn kappa(&self) -> f64 {
        self.0.kappa()
    }

    fn potential(&self, x: f64, y: f64) -> f64 {
        model::potential_xy(&self.0, x, y)
    }

    fn potential_minimum(&self) -> f64 {
        model::potential_minimum(&self.0)
    }

    /// Allowed `beta` intervals at `energy` along angle `gamma`.
    fn accessible_boundary(&self, energy: f64, gamma: f64) -> Vec<(f64, f64)> {
        model::accessible_boundary(&self.0, energy, gamma).into_iter().map(|i| (i.lo, i.hi)).collect()
    }

    fn __repr__(&self) -> String {
        format!("ModelParams(a={}, b={}, c={}, k={}, hbar={})", self.0.a, self.0.b, self.0.c, self.0.k, self.0.hbar)
    }
}

#[pyclass(name = "BasisSpec", frozen, from_py_object)]
#[derive(Clone)]
struct PyBasisSpec(BasisSpec);

#[pymethods]
impl PyBasisSpec {
    /// Optimized oscillator basis unless `a_osc` is given.
    #[new]
    #[pyo3(signature = (scheme, params, dimension, a_osc=None, c_shift=DEFAULT_C_SHIFT))]
    fn new(scheme: &str, params: &PyModelParams, dimension: usize, a_osc: Option<f64>, c_shift: f64) -> PyResult<Self> {
        let s = self::scheme(scheme)?;
        let a = match a_osc {
            Some(a) => a,
            None => optimize_a_osc(&params.0, s, dimension, c_shift).map_err(err)?.a_osc,
        };
        BasisSpec::for_params(s, a, &params.0, dimension).map(Self).map_err(err)
    }

    #[getter]
    fn scheme(&self) -> String {
        self.0.scheme.to_string()
    }
    #[getter]
    fn dimension(&self) -> usize {
        self.0.dimension
    }
    #[getter]
    fn a_osc(&self) -> f64 {
        self.0.a_osc
    }
}

/// Sorted eigenvalues, plus eigenvectors for `vectors` lowest levels if requested.
#[pyfunction]
#[pyo3(signature = (params, basis, vectors=0))]
fn spectrum(py: Python<'_>, params: &PyModelParams, basis: &PyBasisSpec, vectors: usize) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
    let req = if vectors == 0 { VectorRequest::None } else { VectorRequest::Range(0..vectors.min(basis.0.dimension)) };
    let (p, b) = (params.0, basis.0.clone());
    let (s, vecs) = py.detach(|| diagonalize(&p, &b, req)).map_err(err)?;
    Ok((s.levels, vecs.map(|v| v.vectors).unwrap_or_default()))
}

#[pyfunction]
fn brody_pdf(s: f64, omega: f64) -> f64 {
    stats::brody_pdf(s, omega)
}

#[pyfunction]
fn brody_cdf(s: f64, omega: f64) -> f64 {
    stats::brody_cdf(s, omega)
}

#[pyfunction]
fn brody_sample(omega: f64, count: usize, seed: u64) -> Vec<f64> {
    stats::brody_sample(omega, count, seed)
}

/// Unit-mean spacings of a sorted level list after polynomial unfolding.
#[pyfunction]
#[pyo3(signature = (levels, degree=5))]
fn unfold(levels: Vec<f64>, degree: usize) -> PyResult<Vec<f64>> {
    stats::unfold_levels(&levels, degree).map(|u| u.spacings).map_err(err)
}

/// `(omega, residual, n_points)` of the Brody fit to unit-mean spacings.
#[pyfunction]
fn fit_brody(spacings: Vec<f64>) -> PyResult<(f64, f64, usize)> {
    let f = stats::fit_brody_spacings(&spacings).map_err(err)?;
    Ok((f.omega, f.residual, f.n_points))
}

/// `(centroid_energy, omega, stat_err, flags)` per bin.
#[pyfunction]
#[pyo3(signature = (levels, bin_size=1000, shift=100, degree=5, seed=1, error_trials=200))]
fn omega_vs_energy(
    py: Python<'_>,
    levels: Vec<f64>,
    bin_size: usize,
    shift: usize,
    degree: usize,
    seed: u64,
    error_trials: usize,
) -> PyResult<Vec<(f64, f64, f64, String)>> {
    let cfg = StatsConfig { bin_size, shift, degree, seed, error_trials };
    let curve = py.detach(|| stats::omega_vs_energy_levels(&levels, &cfg, None)).map_err(err)?;
    Ok(curve.points.into_iter().map(|p| (p.centroid_energy, p.omega, p.stat_err, p.flags.to_string())).collect())
}

/// `(omega_true, mean, std)` of the fit on synthetic Brody samples.
#[pyfunction]
fn bias_study(py: Python<'_>, bin_size: usize, omegas: Vec<f64>, trials: usize, seed: u64) -> PyResult<Vec<(f64, f64, f64)>> {
    let rows = py.detach(|| stats::bias_study(bin_size, &omegas, trials, seed)).map_err(err)?;
    Ok(rows.into_iter().map(|r| (r.omega_true, r.mean, r.std)).collect())
}

fn classical_config(t_max: f64) -> ClassicalConfig {
    ClassicalConfig { t_max, ..ClassicalConfig::default() }
}

/// `(label, sali, t_reached)` with label one of `regular`, `chaotic`, `undecided`.
#[pyfunction]
#[pyo3(signature = (params, x, y, px, py_, t_max=1e4))]
fn sali_classify(py: Python<'_>, params: &PyModelParams, x: f64, y: f64, px: f64, py_: f64, t_max: f64) -> (String, f64, f64) {
    let p = params.0;
    let r = py.detach(|| classical::sali_classify(&PhasePoint::new(x, y, px, py_), &p, &classical_config(t_max)));
    (format!("{:?}", r.classification).to_lowercase(), r.sali, r.t_reached)
}

/// `(f_reg, sigma, n_undecided)` at one energy.
#[pyfunction]
#[pyo3(signature = (params, energy, count=500, t_max=1e4, seed=1))]
fn regular_fraction(py: Python<'_>, params: &PyModelParams, energy: f64, count: usize, t_max: f64, seed: u64) -> PyResult<(f64, f64, usize)> {
    let p = params.0;
    let r = py.detach(|| classical::regular_fraction(&p, energy, count, &classical_config(t_max), seed)).map_err(err)?;
    Ok((r.f_reg, r.sigma, r.n_undecided))
}

#[pyfunction]
fn hamiltonian(params: &PyModelParams, x: f64, y: f64, px: f64, py_: f64) -> f64 {
    classical::hamiltonian_value(&PhasePoint::new(x, y, px, py_), &params.0)
}

#[pymodule]
fn gcm_chaos(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModelParams>()?;
    m.add_class::<PyBasisSpec>()?;
    m.add_function(wrap_pyfunction!(spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(brody_pdf, m)?)?;
    m.add_function(wrap_pyfunction!(brody_cdf, m)?)?;
    m.add_function(wrap_pyfunction!(brody_sample, m)?)?;
    m.add_function(wrap_pyfunction!(unfold, m)?)?;
    m.add_function(wrap_pyfunction!(fit_brody, m)?)?;
    m.add_function(wrap_pyfunction!(omega_vs_energy, m)?)?;
    m.add_function(wrap_pyfunction!(bias_study, m)?)?;
    m.add_function(wrap_pyfunction!(sali_classify, m)?)?;
    m.add_function(wrap_pyfunction!(regular_fraction, m)?)?;
    m.add_function(wrap_pyfunction!(hamiltonian, m)?)?;
    Ok(())
}
