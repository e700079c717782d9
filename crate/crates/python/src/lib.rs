use kinetic_selfsim::boltzmann;
use kinetic_selfsim::evolve::{fit_type_one, Evolver, NormSeries};
use kinetic_selfsim::grid::{Gaussian, GridSpec, ScalarField};
use kinetic_selfsim::landau::{LandauOperator, LandauParams};
use kinetic_selfsim::profile::{refutation_verdict, FunctionalConfig, ProfileDecomposition};
use kinetic_selfsim::selfsim::{check_theta_admissible, Mode, SelfSimParams};
use kinetic_selfsim::Error;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvalidParameter(_) | Error::GridMismatch(_) | Error::OutOfRange(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn field(data: Vec<f64>, n: usize, extent: f64) -> PyResult<ScalarField> {
    let grid = GridSpec::new(n, extent).map_err(to_py)?;
    ScalarField::from_vec(grid, data).map_err(to_py)
}

/// Unit-mass Maxwellian sampled on an `n³` grid of half-width `extent`, row-major.
#[pyfunction]
#[pyo3(signature = (n, extent = 8.0))]
fn maxwellian(n: usize, extent: f64) -> PyResult<Vec<f64>> {
    let grid = GridSpec::new(n, extent).map_err(to_py)?;
    Ok(ScalarField::sample(grid, &Gaussian::maxwellian()).data)
}

/// Divergence-form Landau operator of a row-major field.
#[pyfunction]
#[pyo3(signature = (data, n, extent, gamma))]
fn q_landau(data: Vec<f64>, n: usize, extent: f64, gamma: f64) -> PyResult<Vec<f64>> {
    let f = field(data, n, extent)?;
    let op = LandauOperator::new(f.grid, LandauParams::new(gamma).map_err(to_py)?).map_err(to_py)?;
    Ok(op.q_divergence(&f).map_err(to_py)?.data)
}

/// Entropy dissipation `D(g) >= 0` of a positive field.
#[pyfunction]
#[pyo3(signature = (data, n, extent, gamma, floor = 1e-300))]
fn entropy_dissipation(data: Vec<f64>, n: usize, extent: f64, gamma: f64, floor: f64) -> PyResult<f64> {
    let f = field(data, n, extent)?;
    kinetic_selfsim::landau::entropy_dissipation(&f, LandauParams::new(gamma).map_err(to_py)?, floor).map_err(to_py)
}

/// `(accepted, violations)` for `(γ, θ, s)` in a mode such as `"landau-inhom"`.
#[pyfunction]
#[pyo3(signature = (theta, gamma, mode, s = None))]
fn check_theta(theta: f64, gamma: f64, mode: &str, s: Option<f64>) -> PyResult<(bool, Vec<String>)> {
    let mode: Mode = mode.parse().map_err(to_py)?;
    let mut p = SelfSimParams::new(gamma, theta, -1.0);
    p.s_exp = s;
    let adm = check_theta_admissible(&p, mode);
    Ok((adm.accepted, adm.violations))
}

/// Post-collision velocities and deflection angle for a unit vector `sigma`.
#[pyfunction]
fn collide(v: [f64; 3], vs: [f64; 3], sigma: [f64; 3]) -> PyResult<([f64; 3], [f64; 3], f64)> {
    boltzmann::collide(v, vs, sigma).map_err(to_py)
}

/// Moment-functional refutation for a homogeneous Gaussian profile or `g = 0`.
#[pyfunction]
#[pyo3(signature = (theta, gamma, profile = "gaussian", n = 32, extent = 8.0))]
fn refute_landau<'py>(py: Python<'py>, theta: f64, gamma: f64, profile: &str, n: usize, extent: f64) -> PyResult<Bound<'py, PyDict>> {
    let grid = GridSpec::new(n, extent).map_err(to_py)?;
    let g = match profile {
        "gaussian" => ProfileDecomposition::homogeneous(ScalarField::sample(grid, &Gaussian::maxwellian())),
        "zero" => ProfileDecomposition::zero(grid),
        _ => return Err(PyValueError::new_err(format!("unknown profile {profile}"))),
    };
    let op = LandauOperator::new(grid, LandauParams::new(gamma).map_err(to_py)?).map_err(to_py)?;
    let v = py.allow_threads(|| refutation_verdict(&g, theta, &op, &FunctionalConfig::for_grid(grid))).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("verdict", format!("{:?}", v.verdict).to_lowercase())?;
    d.set_item("measured", v.measured)?;
    d.set_item("predicted", v.predicted)?;
    d.set_item("case", v.case)?;
    d.set_item("detail", v.detail)?;
    Ok(d)
}

/// Relative mass drift after `steps` explicit steps from a Maxwellian.
#[pyfunction]
#[pyo3(signature = (n, extent, gamma, steps))]
fn evolve_maxwellian(py: Python<'_>, n: usize, extent: f64, gamma: f64, steps: usize) -> PyResult<(f64, f64)> {
    py.allow_threads(|| {
        let grid = GridSpec::new(n, extent)?;
        let ev = Evolver::new(grid, LandauParams::new(gamma)?)?;
        let m = ScalarField::sample(grid, &Gaussian::maxwellian());
        let mut st = ev.init(m.clone(), None)?;
        ev.run(&mut st, steps)?;
        let mut d = st.f.clone();
        d.axpy(-1.0, &m);
        let drift = kinetic_selfsim::evolve::conservation_drift(&st.history);
        Ok((d.max_abs() / m.max_abs(), drift.mass))
    })
    .map_err(to_py)
}

/// Type I fit `(θ, T, R²)` of sup, `L²` and `L³` norm series.
#[pyfunction]
fn fit_blowup(times: Vec<f64>, sup: Vec<f64>, l2: Vec<f64>, l3: Vec<f64>, gamma: f64) -> PyResult<(Option<f64>, Option<f64>, f64)> {
    let series = [
        NormSeries { q: f64::INFINITY, values: sup },
        NormSeries { q: 2.0, values: l2 },
        NormSeries { q: 3.0, values: l3 },
    ];
    let r = fit_type_one(&times, &series, gamma).map_err(to_py)?;
    Ok((r.theta, r.blowup_time, r.r_squared))
}

#[pymodule]
fn kinetic_selfsim_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(maxwellian, m)?)?;
    m.add_function(wrap_pyfunction!(q_landau, m)?)?;
    m.add_function(wrap_pyfunction!(entropy_dissipation, m)?)?;
    m.add_function(wrap_pyfunction!(check_theta, m)?)?;
    m.add_function(wrap_pyfunction!(collide, m)?)?;
    m.add_function(wrap_pyfunction!(refute_landau, m)?)?;
    m.add_function(wrap_pyfunction!(evolve_maxwellian, m)?)?;
    m.add_function(wrap_pyfunction!(fit_blowup, m)?)?;
    Ok(())
}
