//! Python bindings. States are wrapped; everything else goes through plain
//! lists, dicts and TOML text.

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyDict, PyList, PyString};
use serde_json::Value;

use sqmem::config::{self, Diagnostic, ExperimentConfig, Preset};
use sqmem::dsp::{self, Window};
use sqmem::eit::{self, hz_to_rad, EitParams};
use sqmem::experiment;
use sqmem::gaussian::{self, SqueezeParam};
use sqmem::sideband::{self, SidebandPair};
use sqmem::synth::{self, HomodyneTrace};
use sqmem::{trace_io, Error};

fn err(e: Error) -> PyErr {
    match e {
        Error::Io(_) | Error::Format(_) => PyOSError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn config_err(diags: Vec<Diagnostic>) -> PyErr {
    let lines: Vec<String> = diags.iter().map(|d| format!("{}: {}", d.path, d.message)).collect();
    PyValueError::new_err(lines.join("; "))
}

fn to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => PyBool::new(py, *b).to_owned().into_any(),
        Value::Number(n) => match n.as_i64() {
            Some(i) => i.into_pyobject(py)?.into_any(),
            None => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any(),
        },
        Value::String(s) => PyString::new(py, s).into_any(),
        Value::Array(a) => PyList::new(py, a.iter().map(|x| to_py(py, x)).collect::<PyResult<Vec<_>>>()?)?.into_any(),
        Value::Object(o) => {
            let d = PyDict::new(py);
            for (k, x) in o {
                d.set_item(k, to_py(py, x)?)?;
            }
            d.into_any()
        }
    })
}

fn serialize<'py>(py: Python<'py>, v: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &serde_json::to_value(v).map_err(|e| PyValueError::new_err(e.to_string()))?)
}

fn parse(text: &str) -> PyResult<ExperimentConfig> {
    config::load_config(text).map_err(config_err)
}

fn preset(name: &str, seed: u64) -> PyResult<ExperimentConfig> {
    Preset::parse(name)
        .map(|p| p.config(seed))
        .ok_or_else(|| PyValueError::new_err(format!("unknown preset `{name}`")))
}

/// Gaussian state in the vacuum-1/4 convention, quadratures ordered
/// `(x₀, p₀, x₁, p₁, …)`.
#[pyclass(name = "CovarianceState", module = "sqmem_py", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyState(gaussian::CovarianceState);

#[pymethods]
impl PyState {
    #[staticmethod]
    fn vacuum(n_modes: usize) -> PyResult<Self> {
        gaussian::CovarianceState::vacuum(n_modes).map(Self).map_err(err)
    }

    #[staticmethod]
    #[pyo3(signature = (cov, mean=None))]
    fn from_moments(cov: Vec<Vec<f64>>, mean: Option<Vec<f64>>) -> PyResult<Self> {
        let dim = cov.len();
        if cov.iter().any(|r| r.len() != dim) {
            return Err(PyValueError::new_err("covariance must be square"));
        }
        let cov = DMatrix::from_fn(dim, dim, |i, j| cov[i][j]);
        let mean = DVector::from_vec(mean.unwrap_or_else(|| vec![0.0; dim]));
        gaussian::CovarianceState::from_moments(mean, cov).map(Self).map_err(err)
    }

    #[getter]
    fn n_modes(&self) -> usize {
        self.0.n_modes()
    }

    #[getter]
    fn cov(&self) -> Vec<Vec<f64>> {
        let c = self.0.cov();
        (0..c.nrows()).map(|i| c.row(i).iter().copied().collect()).collect()
    }

    #[getter]
    fn mean(&self) -> Vec<f64> {
        self.0.mean().iter().copied().collect()
    }

    fn squeeze(&self, mode: usize, r: f64, phi: f64) -> PyResult<Self> {
        let z = SqueezeParam::new(r, phi).map_err(err)?;
        self.0.apply_squeeze(mode, z).map(Self).map_err(err)
    }

    fn two_mode_squeeze(&self, a: usize, b: usize, r: f64, phi: f64) -> PyResult<Self> {
        let z = SqueezeParam::new(r, phi).map_err(err)?;
        self.0.apply_two_mode_squeeze(a, b, z).map(Self).map_err(err)
    }

    fn beamsplitter(&self, a: usize, b: usize, mix_angle: f64, rel_phase: f64) -> PyResult<Self> {
        self.0.apply_beamsplitter(a, b, mix_angle, rel_phase).map(Self).map_err(err)
    }

    fn phase(&self, mode: usize, phi: f64) -> PyResult<Self> {
        self.0.apply_phase(mode, phi).map(Self).map_err(err)
    }

    fn loss(&self, mode: usize, eta: f64) -> PyResult<Self> {
        self.0.apply_loss(mode, eta).map(Self).map_err(err)
    }

    fn reset_to_vacuum(&self, mode: usize) -> PyResult<Self> {
        self.0.reset_to_vacuum(mode).map(Self).map_err(err)
    }

    fn quadrature_variance(&self, mode: usize, theta: f64) -> PyResult<f64> {
        self.0.quadrature_variance(mode, theta).map_err(err)
    }

    fn physicality_margin(&self) -> f64 {
        self.0.physicality_margin()
    }

    fn is_physical(&self) -> bool {
        self.0.is_physical()
    }

    fn purity(&self) -> f64 {
        self.0.purity()
    }

    fn symplectic_eigenvalues(&self) -> Vec<f64> {
        self.0.symplectic_eigenvalues()
    }

    fn __repr__(&self) -> String {
        format!("CovarianceState(n_modes={}, purity={:.6})", self.0.n_modes(), self.0.purity())
    }
}

fn pair(offset_hz: f64) -> PyResult<SidebandPair> {
    SidebandPair::at_offset(offset_hz).map_err(err)
}

/// Two-mode squeezed vacuum on sidebands ±`offset_hz` (upper = mode 0).
#[pyfunction]
fn two_mode_squeezed_vacuum(offset_hz: f64, r: f64, phi: f64) -> PyResult<PyState> {
    let z = SqueezeParam::new(r, phi).map_err(err)?;
    sideband::two_mode_squeezed_vacuum(&pair(offset_hz)?, z).map(PyState).map_err(err)
}

#[pyfunction]
fn to_pm_basis(state: &PyState, offset_hz: f64) -> PyResult<PyState> {
    sideband::to_pm_basis(&state.0, &pair(offset_hz)?).map(PyState).map_err(err)
}

#[pyfunction]
fn from_pm_basis(state: &PyState, offset_hz: f64) -> PyResult<PyState> {
    sideband::from_pm_basis(&state.0, &pair(offset_hz)?).map(PyState).map_err(err)
}

/// Homodyne power of the two-mode quadrature at LO phase `theta`.
#[pyfunction]
fn two_mode_quadrature_power(state: &PyState, offset_hz: f64, theta: f64) -> PyResult<f64> {
    sideband::two_mode_quadrature_power(&state.0, &pair(offset_hz)?, theta).map_err(err)
}

/// Field transmission at probe detuning `delta_hz` for a monochromatic
/// control; all rates in Hz.
#[pyfunction]
#[pyo3(signature = (delta_hz, optical_depth, rabi_hz, gamma0_hz, control_detuning_hz=0.0))]
fn eit_transmission(
    delta_hz: f64,
    optical_depth: f64,
    rabi_hz: f64,
    gamma0_hz: f64,
    control_detuning_hz: f64,
) -> PyResult<Complex64> {
    let p = EitParams::monochromatic(optical_depth, hz_to_rad(rabi_hz), hz_to_rad(gamma0_hz), hz_to_rad(control_detuning_hz))
        .map_err(err)?;
    Ok(eit::transfer_function(&p, hz_to_rad(delta_hz)).t)
}

/// Ground-state decoherence γ₀/2π (Hz) giving a₊ transmission `target`.
#[pyfunction]
fn calibrate_gamma0(optical_depth: f64, plus_rabi_hz: f64, target: f64) -> PyResult<f64> {
    let g = eit::calibrate_gamma0(optical_depth, eit::RB87_D1_LINEWIDTH, hz_to_rad(plus_rabi_hz), target).map_err(err)?;
    Ok(g / (2.0 * std::f64::consts::PI))
}

/// Default TOML configuration of a preset.
#[pyfunction]
#[pyo3(signature = (name, seed=42))]
fn preset_config(name: &str, seed: u64) -> PyResult<String> {
    Ok(preset(name, seed)?.to_toml())
}

/// Diagnostics of a TOML configuration; empty when valid.
#[pyfunction]
fn validate_config<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    match config::load_config(text) {
        Ok(_) => serialize(py, &Vec::<Diagnostic>::new()),
        Err(d) => serialize(py, &d),
    }
}

/// Calibrated parameters and analytic channel predictions of a config.
#[pyfunction]
fn channel_summary<'py>(py: Python<'py>, config_toml: &str) -> PyResult<Bound<'py, PyAny>> {
    let r = experiment::resolve(&parse(config_toml)?).map_err(err)?;
    let s = experiment::channel_summary(&r).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("calibration", serialize(py, &r.calibration)?)?;
    d.set_item("summary", serialize(py, &s)?)?;
    Ok(d.into_any())
}

/// Retrieved-pulse variances: list of dicts, one per mode and LO phase.
#[pyfunction]
fn measure_pulses<'py>(py: Python<'py>, config_toml: &str) -> PyResult<Bound<'py, PyAny>> {
    let r = experiment::resolve(&parse(config_toml)?).map_err(err)?;
    let rep = py.detach(|| experiment::measure_pulses(&r)).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("rows", serialize(py, &rep.rows)?)?;
    d.set_item("eta_squeezed", rep.eta_squeezed)?;
    d.set_item("eta_antisqueezed", rep.eta_antisqueezed)?;
    Ok(d.into_any())
}

/// Runs an experiment and returns `{file name: bytes}` plus the summary.
#[pyfunction]
fn run_experiment<'py>(py: Python<'py>, config_toml: &str) -> PyResult<Bound<'py, PyAny>> {
    let c = parse(config_toml)?;
    let bundle = py.detach(|| experiment::run_experiment(&c)).map_err(err)?;
    let files = PyDict::new(py);
    for f in &bundle.files {
        files.set_item(&f.name, pyo3::types::PyBytes::new(py, &f.contents))?;
    }
    let d = PyDict::new(py);
    d.set_item("files", files)?;
    d.set_item("summary", to_py(py, &bundle.summary)?)?;
    Ok(d.into_any())
}

/// White shot-noise record with one-sided density `shot_level`.
#[pyfunction]
fn shot_noise_trace(shot_level: f64, sample_rate: f64, n: usize, seed: u64) -> PyResult<Vec<f64>> {
    synth::shot_noise_trace(shot_level, sample_rate, n, seed).map(|t| t.samples).map_err(err)
}

type Record = (Vec<f64>, Option<Vec<f64>>);

/// Records synthesized from the channel output of a config: list of
/// `(samples, reference)` where `reference` is `None` without a beat.
#[pyfunction]
fn synthesize(py: Python<'_>, config_toml: &str, theta: f64, count: usize) -> PyResult<Vec<Record>> {
    let c = parse(config_toml)?;
    let r = experiment::resolve(&c).map_err(err)?;
    let s = &c.synthesis;
    let reference = c.eit.bichromatic.then_some((c.eit.beat_hz, s.beat_phase));
    let traces = py
        .detach(|| {
            let model = experiment::output_noise_model(&r)?;
            experiment::synthesize_records(&model, theta, s.sample_rate, s.n_samples, r.seed, 0, count, reference)
        })
        .map_err(err)?;
    Ok(traces.into_iter().map(|t| (t.samples, t.reference.map(|r| r.samples))).collect())
}

fn trace(samples: Vec<f64>, sample_rate: f64) -> HomodyneTrace {
    HomodyneTrace {
        samples,
        sample_rate,
        theta: 0.0,
        seed: 0,
        reference: None,
    }
}

/// Welch one-sided PSD: `(freqs, power, n_averages)`.
#[pyfunction]
#[pyo3(signature = (records, sample_rate, segment_len=2048, window="hann", overlap=0.5))]
fn power_spectrum(
    py: Python<'_>,
    records: Vec<Vec<f64>>,
    sample_rate: f64,
    segment_len: usize,
    window: &str,
    overlap: f64,
) -> PyResult<(Vec<f64>, Vec<f64>, usize)> {
    let window = match window {
        "hann" => Window::Hann,
        "rect" => Window::Rect,
        w => return Err(PyValueError::new_err(format!("unknown window `{w}`"))),
    };
    let traces: Vec<_> = records.into_iter().map(|s| trace(s, sample_rate)).collect();
    let est = py.detach(|| dsp::power_spectrum(&traces, segment_len, window, overlap)).map_err(err)?;
    Ok((est.freqs, est.power, est.n_averages))
}

/// `√2 · ref · x`, with the reference shifted by `offset` radians.
#[pyfunction]
#[pyo3(signature = (samples, reference, sample_rate, beat_hz, offset=0.0))]
fn demodulate(samples: Vec<f64>, reference: Vec<f64>, sample_rate: f64, beat_hz: f64, offset: f64) -> PyResult<Vec<f64>> {
    let mut t = trace(samples, sample_rate);
    t.reference = Some(synth::ReferenceChannel {
        freq_hz: beat_hz,
        phase: 0.0,
        samples: reference,
    });
    dsp::demodulate(&t, offset).map(|d| d.samples).map_err(err)
}

/// Reads an HTRC file: dict with `samples`, `sample_rate`, `theta` and
/// `reference` (or `None`).
#[pyfunction]
fn load_trace(py: Python<'_>, path: PathBuf) -> PyResult<Bound<'_, PyAny>> {
    let t = trace_io::load(&path).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("samples", t.samples)?;
    d.set_item("sample_rate", t.sample_rate)?;
    d.set_item("theta", t.theta)?;
    d.set_item("reference", t.reference.map(|r| r.samples))?;
    Ok(d.into_any())
}

#[pymodule]
fn sqmem_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("VACUUM_VARIANCE", gaussian::VACUUM_VARIANCE)?;
    m.add("PRESETS", Preset::ALL.map(|p| p.name()).to_vec())?;
    m.add_class::<PyState>()?;
    m.add_function(wrap_pyfunction!(two_mode_squeezed_vacuum, m)?)?;
    m.add_function(wrap_pyfunction!(to_pm_basis, m)?)?;
    m.add_function(wrap_pyfunction!(from_pm_basis, m)?)?;
    m.add_function(wrap_pyfunction!(two_mode_quadrature_power, m)?)?;
    m.add_function(wrap_pyfunction!(eit_transmission, m)?)?;
    m.add_function(wrap_pyfunction!(calibrate_gamma0, m)?)?;
    m.add_function(wrap_pyfunction!(preset_config, m)?)?;
    m.add_function(wrap_pyfunction!(validate_config, m)?)?;
    m.add_function(wrap_pyfunction!(channel_summary, m)?)?;
    m.add_function(wrap_pyfunction!(measure_pulses, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(shot_noise_trace, m)?)?;
    m.add_function(wrap_pyfunction!(synthesize, m)?)?;
    m.add_function(wrap_pyfunction!(power_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(demodulate, m)?)?;
    m.add_function(wrap_pyfunction!(load_trace, m)?)?;
    Ok(())
}
