//! Python module `confein_py`. Metrics are passed as metric-file text; reports
//! come back as `(exit_code, json)` pairs using the CLI's JSON schema.

use confein::catalog;
use confein::curvature::Tolerances;
use confein_cli::commands::{self, CliError, Input, Options, Outcome};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn err(e: CliError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn options(points: usize, seed: u64, tol_rel: f64, tol_abs: f64, rank_tol: f64, policy: &str) -> PyResult<Options> {
    Ok(Options {
        tol: Tolerances { tol_rel, tol_abs, rank_tol },
        points,
        seed,
        policy: commands::parse_policy(policy).map_err(PyValueError::new_err)?,
    })
}

fn result(o: Outcome) -> (i32, String) {
    (o.code, o.json)
}

/// Names of the built-in fixtures.
#[pyfunction]
fn catalog_names() -> Vec<String> {
    catalog::NAMES.iter().map(|s| s.to_string()).collect()
}

/// A built-in fixture as metric-file text.
#[pyfunction]
fn export(name: &str) -> PyResult<String> {
    commands::catalog_export(name).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (text, points=10, seed=0, tol_rel=1e-8, tol_abs=1e-12, rank_tol=1e-8, policy="auto"))]
fn classify(py: Python<'_>, text: &str, points: usize, seed: u64, tol_rel: f64, tol_abs: f64, rank_tol: f64, policy: &str) -> PyResult<(i32, String)> {
    let input = Input::from_text(text).map_err(err)?;
    let opts = options(points, seed, tol_rel, tol_abs, rank_tol, policy)?;
    py.detach(|| commands::classify(&input, &opts)).map(result).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (text, which="F1,F2,E,G,Gbar,dim4,cspace,bach", points=10, seed=0, tol_rel=1e-8, tol_abs=1e-12, rank_tol=1e-8, policy="auto"))]
#[allow(clippy::too_many_arguments)]
fn invariants(
    py: Python<'_>,
    text: &str,
    which: &str,
    points: usize,
    seed: u64,
    tol_rel: f64,
    tol_abs: f64,
    rank_tol: f64,
    policy: &str,
) -> PyResult<(i32, String)> {
    let input = Input::from_text(text).map_err(err)?;
    let opts = options(points, seed, tol_rel, tol_abs, rank_tol, policy)?;
    let which = commands::parse_which(which).map_err(err)?;
    py.detach(|| commands::invariants(&input, &opts, &which)).map(result).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (text, points=10, seed=0, tol_rel=1e-8, tol_abs=1e-12))]
fn identities(py: Python<'_>, text: &str, points: usize, seed: u64, tol_rel: f64, tol_abs: f64) -> PyResult<(i32, String)> {
    let input = Input::from_text(text).map_err(err)?;
    let opts = options(points, seed, tol_rel, tol_abs, 1e-8, "auto")?;
    py.detach(|| commands::identities(&input, &opts)).map(result).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (text, sigma=None, points=10, seed=0, tol_rel=1e-8, tol_abs=1e-12, rank_tol=1e-8))]
#[allow(clippy::too_many_arguments)]
fn tractor(
    py: Python<'_>,
    text: &str,
    sigma: Option<&str>,
    points: usize,
    seed: u64,
    tol_rel: f64,
    tol_abs: f64,
    rank_tol: f64,
) -> PyResult<(i32, String)> {
    let input = Input::from_text(text).map_err(err)?;
    let opts = options(points, seed, tol_rel, tol_abs, rank_tol, "auto")?;
    let sigma = sigma.map(str::to_string);
    py.detach(|| commands::tractor(&input, &opts, sigma.as_deref())).map(result).map_err(err)
}

#[pymodule]
fn confein_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(catalog_names, m)?)?;
    m.add_function(wrap_pyfunction!(export, m)?)?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(invariants, m)?)?;
    m.add_function(wrap_pyfunction!(identities, m)?)?;
    m.add_function(wrap_pyfunction!(tractor, m)?)?;
    Ok(())
}
