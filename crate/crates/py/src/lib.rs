//! Python bindings. Reports and certificates cross the boundary as JSON and
//! come back as plain dicts and lists.

use pyo3::exceptions::{PyOverflowError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use zpattern::classify::{self, Config, RecheckOutcome, SetSource};
use zpattern::gaps::{IpOutcome, IpSearch};
use zpattern::sumset::{geometric_grid, rep_counts as counts, tupling_profile as profile};
use zpattern::{generate as gen, Error, GroundSet, SetSpec};

fn py_err(e: Error) -> PyErr {
    match e.exit_code() {
        3 => PyOverflowError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_py<'py>(py: Python<'py>, text: &str) -> PyResult<Bound<'py, PyAny>> {
    py.import("json")?.call_method1("loads", (text,))
}

/// Builds the set from exactly one of `spec` or `elements`.
fn input(spec: Option<&str>, elements: Option<Vec<u64>>, window: Option<u64>) -> Result<(GroundSet, SetSource), Error> {
    match (spec, elements) {
        (Some(s), None) => {
            let mut spec: SetSpec = s.parse()?;
            if spec.window.is_none() {
                spec.window = window;
            }
            let a = gen(&spec)?;
            let src = SetSource::from_spec(&spec, &a);
            Ok((a, src))
        }
        (None, Some(xs)) => {
            let a = match window {
                Some(w) => GroundSet::new(xs, w)?,
                None => GroundSet::from_elements(xs)?,
            };
            let src = SetSource {
                spec: None,
                path: None,
                window: a.window(),
                elements: Some(a.elements().to_vec()),
            };
            Ok((a, src))
        }
        _ => Err(Error::Precondition("pass exactly one of spec or elements".into())),
    }
}

fn config_from(pairs: &[(String, String)]) -> Result<Config, Error> {
    let mut cfg = Config::default();
    for (k, v) in pairs {
        cfg.set(k, v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn dict_pairs(config: Option<&Bound<'_, PyDict>>) -> PyResult<Vec<(String, String)>> {
    let mut out = Vec::new();
    if let Some(d) = config {
        for (k, v) in d.iter() {
            out.push((k.str()?.to_string(), v.str()?.to_string()));
        }
    }
    Ok(out)
}

/// Elements of a generated set, e.g. `generate("squares@100")`.
#[pyfunction]
fn generate(spec: &str) -> PyResult<Vec<u64>> {
    let spec: SetSpec = spec.parse().map_err(py_err)?;
    Ok(gen(&spec).map_err(py_err)?.elements().to_vec())
}

/// Classification report as a dict.
#[pyfunction]
#[pyo3(signature = (spec=None, elements=None, window=None, config=None))]
fn analyze<'py>(
    py: Python<'py>,
    spec: Option<&str>,
    elements: Option<Vec<u64>>,
    window: Option<u64>,
    config: Option<&Bound<'py, PyDict>>,
) -> PyResult<Bound<'py, PyAny>> {
    let pairs = dict_pairs(config)?;
    let text = py
        .detach(|| -> Result<String, Error> {
            let cfg = config_from(&pairs)?;
            let (a, src) = input(spec, elements, window)?;
            let report = classify::classify(&a, src, &cfg)?;
            classify::emit_report(&[report], classify::Format::Json)
        })
        .map_err(py_err)?;
    to_py(py, &text)
}

/// Re-checks a report or certificate given as a JSON string. Returns `None`
/// for an indeterminate report, otherwise whether the certificate holds.
#[pyfunction]
fn recheck(py: Python<'_>, document: &str) -> PyResult<Option<bool>> {
    let doc = document.to_string();
    let out = py.detach(|| classify::recheck_str(&doc, "<python>")).map_err(py_err)?;
    Ok(match out {
        RecheckOutcome::Accepted => Some(true),
        RecheckOutcome::Rejected(_) => Some(false),
        RecheckOutcome::NoCertificate => None,
    })
}

/// `[(x, r(x))]` for the k-fold sum of the set with itself.
#[pyfunction]
#[pyo3(signature = (elements, k=2, window=None))]
fn rep_counts(elements: Vec<u64>, k: usize, window: Option<u64>) -> PyResult<Vec<(u64, u64)>> {
    let (a, _) = input(None, Some(elements), window).map_err(py_err)?;
    Ok(counts(&vec![a; k]).map_err(py_err)?.counts)
}

/// Tupling ratios on a grid (geometric with 16 points when omitted).
#[pyfunction]
#[pyo3(signature = (spec, k=2, grid=None))]
fn tupling_profile<'py>(py: Python<'py>, spec: &str, k: usize, grid: Option<Vec<u64>>) -> PyResult<Bound<'py, PyAny>> {
    let (a, _) = input(Some(spec), None, None).map_err(py_err)?;
    let grid = grid.unwrap_or_else(|| geometric_grid(a.min().unwrap_or(1).max(1), a.window(), 16));
    let p = profile(&a, k, &grid).map_err(py_err)?;
    to_py(py, &p.to_json().to_string())
}

/// Standalone IP certificate `{source, evidence}`, or `None` when the
/// recursion fails at this depth.
#[pyfunction]
#[pyo3(signature = (spec, depth=3))]
fn ip_witness<'py>(py: Python<'py>, spec: &str, depth: usize) -> PyResult<Option<Bound<'py, PyAny>>> {
    let (a, source) = input(Some(spec), None, None).map_err(py_err)?;
    match IpSearch::new(a.window(), depth).run(&a).map_err(py_err)? {
        IpOutcome::Failure(_) => Ok(None),
        IpOutcome::Witness(witness) => {
            let checks = zpattern::gaps::verify_shatter(&witness, &a).map_err(py_err)?.checks;
            let doc = classify::CertificateDoc {
                source,
                evidence: classify::Evidence::Ip(classify::IpEvidence { witness, checks }),
            };
            let text = serde_json::to_string(&doc).map_err(|e| PyValueError::new_err(e.to_string()))?;
            to_py(py, &text).map(Some)
        }
    }
}

#[pymodule]
#[pyo3(name = "zpattern")]
fn zpattern_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(recheck, m)?)?;
    m.add_function(wrap_pyfunction!(rep_counts, m)?)?;
    m.add_function(wrap_pyfunction!(tupling_profile, m)?)?;
    m.add_function(wrap_pyfunction!(ip_witness, m)?)?;
    Ok(())
}
