use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use radshock::error::{Cause, Error, Failure};
use radshock::evolution::{verify_traveling_wave, VerifyOptions};
use radshock::flux::FluxModel;
use radshock::profile::{assemble_profile_with, GluePoint, ProfileOptions, ProfilePoint, RadiativeProfile};
use radshock::regularity::regularity_report;
use radshock::shock::{self, ChordFunction};
use radshock::system::{build_reduction, system_profile, SystemModel, SystemTriple};

create_exception!(radshock_py, RadshockError, PyException);
create_exception!(radshock_py, ConfigError, RadshockError);
create_exception!(radshock_py, AdmissibilityError, RadshockError);
create_exception!(radshock_py, NumericalError, RadshockError);

fn raise<E: Into<Cause>>(module: &'static str, op: &'static str) -> impl FnOnce(E) -> PyErr {
    move |e| {
        let err = Error::op(module, op)(e.into());
        let msg = err.to_string();
        match err.failure() {
            Failure::Config => ConfigError::new_err(msg),
            Failure::Admissibility => AdmissibilityError::new_err(msg),
            Failure::Numerical => NumericalError::new_err(msg),
        }
    }
}

type Row = (f64, f64, f64, f64, f64, f64);

fn row(p: &ProfilePoint) -> Row {
    (p.xi, p.z, p.dz, p.ddz, p.u, p.q)
}

fn glue_dict<'py>(py: Python<'py>, j: &GluePoint) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("xi0", j.xi0)?;
    d.set_item("u_left", j.u_left)?;
    d.set_item("u_right", j.u_right)?;
    d.set_item("rh_residual", j.rh_residual)?;
    d.set_item("oleinik_margin", j.oleinik_margin)?;
    Ok(d)
}

/// A flux given as an expression in `u` (scalar) or `u1..un`.
#[pyclass(frozen, module = "radshock_py")]
struct Flux {
    inner: FluxModel,
}

#[pymethods]
impl Flux {
    #[new]
    #[pyo3(signature = (expr, dimension = 1))]
    fn new(expr: &str, dimension: usize) -> PyResult<Self> {
        let inner = FluxModel::parse(expr, dimension).map_err(raise("flux", "parse"))?;
        Ok(Flux { inner })
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    fn value(&self, u: f64) -> f64 {
        self.inner.value(u)
    }

    fn derivative(&self, u: f64, order: usize) -> PyResult<f64> {
        self.inner.eval_deriv(u, order).map_err(raise("flux", "derivative"))
    }

    fn __repr__(&self) -> String {
        format!("Flux({:?})", self.inner)
    }
}

#[pyfunction]
fn shock_speed(flux: &Flux, u_minus: f64, u_plus: f64) -> PyResult<f64> {
    shock::shock_speed(&flux.inner, u_minus, u_plus)
        .map(|t| t.s)
        .map_err(raise("shock", "shock_speed"))
}

fn chord_for(flux: &Flux, u_minus: f64, u_plus: f64) -> PyResult<ChordFunction> {
    let t = shock::shock_speed(&flux.inner, u_minus, u_plus).map_err(raise("shock", "shock_speed"))?;
    ChordFunction::new(&flux.inner, t).map_err(raise("shock", "chord"))
}

/// `F(u) = f(u) - f(u-) - s (u - u-)` for an admissible shock.
#[pyclass(frozen, module = "radshock_py")]
struct Chord {
    inner: ChordFunction,
}

#[pymethods]
impl Chord {
    #[new]
    fn new(flux: &Flux, u_minus: f64, u_plus: f64) -> PyResult<Self> {
        Ok(Chord {
            inner: chord_for(flux, u_minus, u_plus)?,
        })
    }

    #[getter]
    fn speed(&self) -> f64 {
        self.inner.triple().s
    }

    #[getter]
    fn critical_points(&self) -> Vec<f64> {
        self.inner.critical_points().to_vec()
    }

    fn value(&self, u: f64) -> f64 {
        self.inner.value(u)
    }
}

#[pyclass(frozen, module = "radshock_py")]
struct Profile {
    inner: RadiativeProfile,
}

#[pymethods]
impl Profile {
    #[new]
    #[pyo3(signature = (flux, u_minus, u_plus, eps = 1.0, rtol = None, atol = None))]
    fn new(flux: &Flux, u_minus: f64, u_plus: f64, eps: f64, rtol: Option<f64>, atol: Option<f64>) -> PyResult<Self> {
        let chord = chord_for(flux, u_minus, u_plus)?;
        let mut opts = ProfileOptions::default();
        if let Some(r) = rtol {
            opts.arc.rtol = r;
        }
        if let Some(a) = atol {
            opts.arc.atol = a;
        }
        let inner = assemble_profile_with(&chord, eps, &opts).map_err(raise("profile", "assemble_profile"))?;
        Ok(Profile { inner })
    }

    #[getter]
    fn epsilon(&self) -> f64 {
        self.inner.epsilon()
    }

    #[getter]
    fn max_jump(&self) -> f64 {
        self.inner.max_jump()
    }

    #[getter]
    fn decay_length(&self) -> f64 {
        self.inner.decay_length()
    }

    /// Rows `(xi, z, dz, ddz, u, q)`.
    fn grid(&self) -> Vec<Row> {
        self.inner.grid().iter().map(row).collect()
    }

    fn eval(&self, xi: f64) -> Row {
        row(&self.inner.eval(xi))
    }

    fn jumps<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        self.inner.jumps().iter().map(|j| glue_dict(py, j)).collect()
    }
}

#[pyfunction]
#[pyo3(signature = (flux, u_minus, u_plus, radiation = 1.0, order = 4))]
fn regularity<'py>(
    py: Python<'py>,
    flux: &Flux,
    u_minus: f64,
    u_plus: f64,
    radiation: f64,
    order: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let chord = chord_for(flux, u_minus, u_plus)?;
    let r = regularity_report(&chord, radiation, order).map_err(raise("regularity", "regularity_report"))?;
    let d = PyDict::new(py);
    d.set_item("shock_size", r.shock_size)?;
    d.set_item("epsilon_bar", r.epsilon_bar)?;
    d.set_item("thresholds", r.thresholds)?;
    d.set_item("ubar", r.ubar)?;
    d.set_item("vbar2", r.vbar2)?;
    d.set_item("lambdas", r.lambdas)?;
    d.set_item("wbar", r.expansion.map(|e| e.wbar))?;
    d.set_item("predicted_class", r.class.to_string())?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (profile, cells = 4096, t_end = 10.0))]
fn verify<'py>(py: Python<'py>, profile: &Profile, cells: usize, t_end: f64) -> PyResult<Bound<'py, PyDict>> {
    let opts = VerifyOptions {
        cells,
        t_end,
        ..VerifyOptions::default()
    };
    let r = py
        .detach(|| verify_traveling_wave(&profile.inner, &opts))
        .map_err(raise("evolution", "verify_traveling_wave"))?;
    let d = PyDict::new(py);
    d.set_item("dx", r.dx)?;
    d.set_item("steps", r.steps)?;
    d.set_item("speed", r.speed)?;
    d.set_item("speed_hat", r.speed_hat)?;
    d.set_item("error_l1", r.error_l1)?;
    d.set_item("best_shift", r.best_shift)?;
    Ok(d)
}

/// `u_t + f(u)_x + L q_x = 0`, `-eps q_xx + R q + G.u_x = 0`.
#[pyclass(frozen, module = "radshock_py")]
struct System {
    inner: SystemModel,
}

#[pymethods]
impl System {
    #[new]
    #[pyo3(signature = (components, l, g, r = 1.0))]
    fn new(components: Vec<String>, l: Vec<f64>, g: Vec<f64>, r: f64) -> PyResult<Self> {
        let flux = FluxModel::parse_components(&components).map_err(raise("flux", "parse"))?;
        let inner = SystemModel::new(flux, &l, &g, r).map_err(raise("system", "new"))?;
        Ok(System { inner })
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.inner.dimension()
    }

    /// Lifted profile of the `k`-shock from `u_minus` to `u_plus` at speed `s`.
    #[pyo3(signature = (u_minus, u_plus, s, k, eps = 1.0))]
    fn profile<'py>(
        &self,
        py: Python<'py>,
        u_minus: Vec<f64>,
        u_plus: Vec<f64>,
        s: f64,
        k: usize,
        eps: f64,
    ) -> PyResult<Bound<'py, PyDict>> {
        let t = SystemTriple::new(&self.inner, &u_minus, &u_plus, s).map_err(raise("system", "triple"))?;
        let map = build_reduction(&self.inner, &t, k).map_err(raise("system", "build_reduction"))?;
        let sp = system_profile(&map, eps, &ProfileOptions::default()).map_err(raise("system", "system_profile"))?;
        let d = PyDict::new(py);
        d.set_item("xi", sp.points.iter().map(|p| p.xi).collect::<Vec<_>>())?;
        d.set_item("w", sp.points.iter().map(|p| p.w).collect::<Vec<_>>())?;
        d.set_item("q", sp.points.iter().map(|p| p.q).collect::<Vec<_>>())?;
        d.set_item("states", sp.states)?;
        d.set_item("residuals", sp.residuals)?;
        let mut jumps = Vec::new();
        for (xi0, j) in sp.jumps.iter().filter(|(_, j)| !j.no_jump) {
            let jd = PyDict::new(py);
            jd.set_item("xi0", xi0)?;
            jd.set_item("u_left", j.u_left.clone())?;
            jd.set_item("u_right", j.u_right.clone())?;
            jd.set_item("rh_residual", j.rh_residual)?;
            jd.set_item("lax", j.lax)?;
            jd.set_item("liu", j.liu.as_ref().map(|l| l.satisfied))?;
            jumps.push(jd);
        }
        d.set_item("jumps", jumps)?;
        Ok(d)
    }
}

#[pymodule]
pub fn radshock_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("RadshockError", py.get_type::<RadshockError>())?;
    m.add("ConfigError", py.get_type::<ConfigError>())?;
    m.add("AdmissibilityError", py.get_type::<AdmissibilityError>())?;
    m.add("NumericalError", py.get_type::<NumericalError>())?;
    m.add_class::<Flux>()?;
    m.add_class::<Chord>()?;
    m.add_class::<Profile>()?;
    m.add_class::<System>()?;
    m.add_function(wrap_pyfunction!(shock_speed, m)?)?;
    m.add_function(wrap_pyfunction!(regularity, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
