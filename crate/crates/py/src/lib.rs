//! Python bindings: the core model types and operations, with GF(2)
//! vectors and matrices exchanged as 0/1 strings.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use myopic_core::codes;
use myopic_core::constructions;
use myopic_core::hmm;
use myopic_core::infotheory;
use myopic_core::metrics;
use myopic_core::ngram;

fn value_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn bits_from_str(s: &str) -> PyResult<Vec<u8>> {
    s.chars()
        .map(|c| match c {
            '0' => Ok(0u8),
            '1' => Ok(1u8),
            other => Err(value_err(format!("expected 0/1 characters, got {other:?}"))),
        })
        .collect()
}

fn mask_to_string(v: u64, len: usize) -> String {
    (0..len)
        .map(|i| if (v >> i) & 1 == 1 { '1' } else { '0' })
        .collect()
}

fn mask_from_string(s: &str) -> PyResult<u64> {
    if s.len() > 64 {
        return Err(value_err("bit strings are limited to 64 positions"));
    }
    let mut out = 0u64;
    for (i, c) in s.chars().enumerate() {
        match c {
            '1' => out |= 1 << i,
            '0' => {}
            other => return Err(value_err(format!("expected 0/1 characters, got {other:?}"))),
        }
    }
    Ok(out)
}

/// A finite hidden Markov model.
#[pyclass(name = "Hmm")]
struct PyHmm {
    inner: hmm::Hmm,
}

#[pymethods]
impl PyHmm {
    #[new]
    fn new(
        n: usize,
        d: usize,
        transition: Vec<Vec<f64>>,
        emission: Vec<Vec<f64>>,
        initial: Vec<f64>,
    ) -> PyResult<Self> {
        let inner = hmm::Hmm::new(
            n,
            d,
            transition.into_iter().flatten().collect(),
            emission.into_iter().flatten().collect(),
            initial,
        )
        .map_err(value_err)?;
        Ok(PyHmm { inner })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyHmm {
            inner: hmm::Hmm::from_json(text).map_err(value_err)?,
        })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d()
    }

    #[getter]
    fn initial(&self) -> Vec<f64> {
        self.inner.initial().to_vec()
    }

    /// All violated invariants, as human-readable strings; empty if valid.
    fn validate(&self) -> Vec<String> {
        self.inner.validate().iter().map(|v| v.to_string()).collect()
    }

    /// Samples a trajectory; returns (hidden states, observations).
    fn sample(&self, length: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
        let path = self.inner.sample(length, seed);
        (path.hidden, path.observed)
    }

    /// Exact posterior over the state emitting the next symbol and the
    /// log-likelihood of the prefix. `prior` defaults to the initial
    /// distribution.
    #[pyo3(signature = (prefix, prior=None))]
    fn forward_filter(
        &self,
        prefix: Vec<usize>,
        prior: Option<Vec<f64>>,
    ) -> PyResult<(Vec<f64>, f64)> {
        let prior = prior.unwrap_or_else(|| self.inner.initial().to_vec());
        let belief = self.inner.forward_filter(&prefix, &prior).map_err(value_err)?;
        Ok((belief.weights, belief.log_likelihood))
    }

    fn predict_next(&self, weights: Vec<f64>) -> PyResult<Vec<f64>> {
        let belief = hmm::BeliefState::new(weights, 0.0).map_err(value_err)?;
        Ok(self.inner.predict_next(&belief))
    }

    #[pyo3(signature = (window, prior=None))]
    fn window_optimal_predict(
        &self,
        window: Vec<usize>,
        prior: Option<Vec<f64>>,
    ) -> PyResult<Vec<f64>> {
        let prior = match prior {
            Some(p) => p,
            None => self.stationary_distribution(1e-12, 64)?,
        };
        self.inner
            .window_optimal_predict(&prior, &window)
            .map_err(value_err)
    }

    fn opt_predict(&self, h0: usize, window: Vec<usize>) -> PyResult<Vec<f64>> {
        self.inner.opt_predict(h0, &window).map_err(value_err)
    }

    #[pyo3(signature = (tol=1e-12, max_iter=64))]
    fn stationary_distribution(&self, tol: f64, max_iter: usize) -> PyResult<Vec<f64>> {
        self.inner
            .stationary_distribution(tol, max_iter)
            .map_err(value_err)
    }

    fn __repr__(&self) -> String {
        format!("Hmm(n={}, d={})", self.inner.n(), self.inner.d())
    }
}

/// Streaming counts for the empirical order-`ell` Markov predictor.
#[pyclass(name = "ContextTable")]
struct PyContextTable {
    inner: ngram::ContextTable,
}

#[pymethods]
impl PyContextTable {
    #[new]
    fn new(ell: usize, d: usize) -> Self {
        PyContextTable {
            inner: ngram::ContextTable::new(ell, d),
        }
    }

    fn update(&mut self, xs: Vec<usize>) -> PyResult<()> {
        self.inner.update(&xs).map_err(value_err)
    }

    /// Prediction for a length-`ell` context; `alpha` switches to add-alpha
    /// smoothing.
    #[pyo3(signature = (context, alpha=None))]
    fn predict(&self, context: Vec<usize>, alpha: Option<f64>) -> PyResult<Vec<f64>> {
        let policy = match alpha {
            None => ngram::Smoothing::Empirical,
            Some(a) => ngram::Smoothing::AddAlpha(a),
        };
        self.inner.predict_with(&context, policy).map_err(value_err)
    }

    #[getter]
    fn total_updates(&self) -> u64 {
        self.inner.total_updates()
    }

    #[getter]
    fn distinct_contexts(&self) -> usize {
        self.inner.distinct_contexts()
    }

    fn export(&self) -> String {
        self.inner.export()
    }

    #[staticmethod]
    fn import_(text: &str) -> PyResult<Self> {
        Ok(PyContextTable {
            inner: ngram::ContextTable::import(text).map_err(value_err)?,
        })
    }
}

/// A dense GF(2) matrix exchanged as rows of 0/1 characters.
#[pyclass(name = "BinaryMatrix")]
struct PyBinaryMatrix {
    inner: codes::BinaryMatrix,
}

#[pymethods]
impl PyBinaryMatrix {
    #[staticmethod]
    fn parse_text(text: &str) -> PyResult<Self> {
        Ok(PyBinaryMatrix {
            inner: codes::BinaryMatrix::parse_text(text).map_err(value_err)?,
        })
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    #[getter]
    fn rows(&self) -> usize {
        self.inner.rows()
    }

    #[getter]
    fn cols(&self) -> usize {
        self.inner.cols()
    }

    fn rank(&self) -> usize {
        self.inner.rank()
    }

    /// Nullspace basis vectors as 0/1 strings.
    fn nullspace_basis(&self) -> Vec<String> {
        self.inner
            .nullspace_basis()
            .into_iter()
            .map(|v| mask_to_string(v, self.inner.cols()))
            .collect()
    }

    /// `A v mod 2` for a 0/1 string `v`; returns the 0/1 result string.
    fn mul_vec(&self, v: &str) -> PyResult<String> {
        if v.len() != self.inner.cols() {
            return Err(value_err(format!(
                "vector has {} bits, expected {}",
                v.len(),
                self.inner.cols()
            )));
        }
        Ok(mask_to_string(
            self.inner.mul_vec(mask_from_string(v)?),
            self.inner.rows(),
        ))
    }

    /// Minimum distance of the code spanned by the rows (exhaustive).
    #[pyo3(signature = (budget=16777216.0))]
    fn min_distance(&self, budget: f64) -> PyResult<usize> {
        let mut code = codes::LinearCode::new(self.inner.clone()).map_err(value_err)?;
        code.min_distance(budget).map_err(value_err)
    }

    #[pyo3(signature = (t, budget=1e9))]
    fn check_t_wise_uniform(&self, t: usize, budget: f64) -> PyResult<bool> {
        codes::check_t_wise_uniform(&self.inner, t, budget).map_err(value_err)
    }

    fn __repr__(&self) -> String {
        format!("BinaryMatrix({}x{})", self.inner.rows(), self.inner.cols())
    }
}

#[pyfunction]
fn kl(p: Vec<f64>, q: Vec<f64>) -> PyResult<f64> {
    Ok(match metrics::kl(&p, &q).map_err(value_err)? {
        metrics::KlValue::Finite(v) => v,
        metrics::KlValue::Infinite => f64::INFINITY,
    })
}

#[pyfunction]
fn l1(p: Vec<f64>, q: Vec<f64>) -> PyResult<f64> {
    metrics::l1(&p, &q).map_err(value_err)
}

#[pyfunction]
fn truncated_kl(p: Vec<f64>, q: Vec<f64>, cap: f64) -> PyResult<f64> {
    metrics::truncated_kl(&p, &q, cap).map_err(value_err)
}

#[pyfunction]
fn relative_zero_one(opt: Vec<f64>, pred: Vec<f64>, truth: Vec<f64>) -> PyResult<f64> {
    metrics::relative_zero_one(&opt, &pred, &truth).map_err(value_err)
}

#[pyfunction]
fn deviation_stats(weights: Vec<f64>, values: Vec<f64>) -> PyResult<(f64, f64)> {
    metrics::deviation_stats(&weights, &values).map_err(value_err)
}

#[pyfunction]
fn entropy(p: Vec<f64>) -> f64 {
    infotheory::entropy(&p)
}

/// Exact block mutual information I(past; future) of the model started
/// from `prior` (defaults to the stationary distribution).
#[pyfunction]
#[pyo3(signature = (model, past_len, future_len, prior=None, budget=2e7))]
fn block_mutual_information(
    model: &PyHmm,
    past_len: usize,
    future_len: usize,
    prior: Option<Vec<f64>>,
    budget: f64,
) -> PyResult<f64> {
    let prior = match prior {
        Some(p) => p,
        None => model.stationary_distribution(1e-12, 64)?,
    };
    Ok(
        infotheory::block_mutual_information(&model.inner, &prior, past_len, future_len, budget)
            .map_err(value_err)?
            .value,
    )
}

/// Exact conditional mutual information between the history beyond the
/// window and the next symbol: the per-step KL gap of the order-`ell`
/// predictor against the order-`history_len` one.
#[pyfunction]
#[pyo3(signature = (model, ell, history_len, t, prior=None, budget=2e7))]
fn conditional_mi_decomposition(
    model: &PyHmm,
    ell: usize,
    history_len: usize,
    t: usize,
    prior: Option<Vec<f64>>,
    budget: f64,
) -> PyResult<f64> {
    let prior = match prior {
        Some(p) => p,
        None => model.stationary_distribution(1e-12, 64)?,
    };
    infotheory::conditional_mi_decomposition(&model.inner, &prior, ell, history_len, t, budget)
        .map_err(value_err)
}

/// Exact average losses of the optimal order-`ell` window predictor against
/// the full-history predictor over `[0, horizon)`, with the model started
/// from its initial distribution and the window prior stationary. Returns
/// a dict with keys "kl", "l1", "rel01".
#[pyfunction]
#[pyo3(signature = (model, ell, horizon, budget=2e7))]
fn evaluate_window_predictor(
    py: Python<'_>,
    model: &PyHmm,
    ell: usize,
    horizon: usize,
    budget: f64,
) -> PyResult<Py<pyo3::types::PyDict>> {
    use pyo3::types::PyDict;
    let stationary = model.stationary_distribution(1e-12, 64)?;
    let mut predictor = metrics::WindowOptimalPredictor::new(&model.inner, &stationary, ell);
    let report = metrics::evaluate_exact(
        &model.inner,
        model.inner.initial(),
        &mut predictor,
        horizon,
        budget,
    )
    .map_err(value_err)?;
    let out = PyDict::new(py);
    out.set_item(
        "kl",
        report.averages.kl.finite().unwrap_or(f64::INFINITY),
    )?;
    out.set_item("l1", report.averages.l1)?;
    out.set_item("rel01", report.averages.rel01)?;
    Ok(out.into())
}

#[pyfunction]
fn build_cycle_hmm(bits: &str) -> PyResult<PyHmm> {
    Ok(PyHmm {
        inner: constructions::build_cycle_hmm(&bits_from_str(bits)?).map_err(value_err)?,
    })
}

#[pyfunction]
fn build_permutation_hmm(labels: &str, eps: f64) -> PyResult<PyHmm> {
    let spec =
        constructions::PermutationLabelSpec::new(bits_from_str(labels)?, eps).map_err(value_err)?;
    Ok(PyHmm {
        inner: constructions::build_permutation_hmm(&spec).map_err(value_err)?,
    })
}

/// Samples uniform matrices until one has full row rank; returns the
/// matrix and the number of attempts.
#[pyfunction]
fn sample_full_row_rank_matrix(m: usize, n: usize, seed: u64) -> PyResult<(PyBinaryMatrix, u64)> {
    let (inner, attempts) =
        constructions::sample_full_row_rank_matrix(m, n, seed).map_err(value_err)?;
    Ok((PyBinaryMatrix { inner }, attempts))
}

/// One parity block: n uniform bits then m noisy parity bits.
#[pyfunction]
fn parity_sample_block(matrix: &PyBinaryMatrix, eta: f64, seed: u64) -> PyResult<Vec<u8>> {
    let spec = parity_spec(matrix, eta)?;
    Ok(constructions::parity_sample_block(&spec, seed))
}

fn parity_spec(matrix: &PyBinaryMatrix, eta: f64) -> PyResult<constructions::ParityModelSpec> {
    constructions::ParityModelSpec::new(
        matrix.inner.cols(),
        matrix.inner.rows(),
        matrix.inner.clone(),
        eta,
    )
    .map_err(value_err)
}

/// Compiles the parity model into an explicit HMM with
/// `2^m (2n + m) + m` states.
#[pyfunction]
#[pyo3(signature = (matrix, eta, state_budget=2048))]
fn compile_parity_to_hmm(matrix: &PyBinaryMatrix, eta: f64, state_budget: usize) -> PyResult<PyHmm> {
    let spec = parity_spec(matrix, eta)?;
    Ok(PyHmm {
        inner: constructions::compile_parity_to_hmm(&spec, state_budget).map_err(value_err)?,
    })
}

/// Random search for an m x k parity matrix whose row-span code has
/// minimum distance at least `target_distance`; its nullspace is then
/// `(distance - 1)`-wise uniform. Returns (matrix, distance, attempts).
#[pyfunction]
#[pyo3(signature = (k, m, target_distance, max_attempts=100000, seed=0))]
fn find_code_with_dual_distance(
    k: usize,
    m: usize,
    target_distance: usize,
    max_attempts: u64,
    seed: u64,
) -> PyResult<(PyBinaryMatrix, usize, u64)> {
    let gv = codes::find_code_with_dual_distance(k, m, target_distance, max_attempts, seed)
        .map_err(value_err)?;
    Ok((PyBinaryMatrix { inner: gv.matrix }, gv.distance, gv.attempts))
}

/// The planted-CSP sequential sampler.
#[pyclass(name = "CspModel")]
struct PyCspModel {
    inner: constructions::CspModel,
}

#[pymethods]
impl PyCspModel {
    #[new]
    #[pyo3(signature = (n, k, m, matrix, sigma, eta, certified_t=0))]
    fn new(
        n: usize,
        k: usize,
        m: usize,
        matrix: &PyBinaryMatrix,
        sigma: &str,
        eta: f64,
        certified_t: usize,
    ) -> PyResult<Self> {
        let spec = constructions::CspModelSpec::new(
            n,
            k,
            m,
            matrix.inner.clone(),
            bits_from_str(sigma)?,
            eta,
            certified_t,
        )
        .map_err(value_err)?;
        Ok(PyCspModel {
            inner: constructions::CspModel::new(spec).map_err(value_err)?,
        })
    }

    #[getter]
    fn alphabet_size(&self) -> usize {
        self.inner.alphabet_size()
    }

    /// One block: (symbols over the letter alphabet, label bits).
    fn sample_block(&self, seed: u64) -> (Vec<usize>, Vec<u8>) {
        let block = self.inner.sample_block(seed);
        (block.symbols, block.labels)
    }
}

/// Log posterior odds of the true start state along one sampled
/// trajectory, with the per-step prediction gap; returns a list of
/// (log_odds, delta) pairs and whether the trace was truncated by a
/// zero-likelihood event.
#[pyfunction]
fn posterior_odds_trace(
    model: &PyHmm,
    h0: usize,
    horizon: usize,
    seed: u64,
) -> PyResult<(Vec<(f64, f64)>, bool)> {
    let trace =
        constructions::posterior_odds_trace(&model.inner, h0, horizon, seed).map_err(value_err)?;
    Ok((
        trace.steps.iter().map(|s| (s.log_odds, s.delta)).collect(),
        trace.truncated,
    ))
}

#[pyfunction]
fn child_seed(master: u64, stream: u64) -> u64 {
    myopic_core::seeds::child_seed(master, stream)
}

#[pymodule]
fn myopic_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyHmm>()?;
    m.add_class::<PyContextTable>()?;
    m.add_class::<PyBinaryMatrix>()?;
    m.add_class::<PyCspModel>()?;
    m.add_function(wrap_pyfunction!(kl, m)?)?;
    m.add_function(wrap_pyfunction!(l1, m)?)?;
    m.add_function(wrap_pyfunction!(truncated_kl, m)?)?;
    m.add_function(wrap_pyfunction!(relative_zero_one, m)?)?;
    m.add_function(wrap_pyfunction!(deviation_stats, m)?)?;
    m.add_function(wrap_pyfunction!(entropy, m)?)?;
    m.add_function(wrap_pyfunction!(block_mutual_information, m)?)?;
    m.add_function(wrap_pyfunction!(conditional_mi_decomposition, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_window_predictor, m)?)?;
    m.add_function(wrap_pyfunction!(build_cycle_hmm, m)?)?;
    m.add_function(wrap_pyfunction!(build_permutation_hmm, m)?)?;
    m.add_function(wrap_pyfunction!(sample_full_row_rank_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(parity_sample_block, m)?)?;
    m.add_function(wrap_pyfunction!(compile_parity_to_hmm, m)?)?;
    m.add_function(wrap_pyfunction!(find_code_with_dual_distance, m)?)?;
    m.add_function(wrap_pyfunction!(posterior_odds_trace, m)?)?;
    m.add_function(wrap_pyfunction!(child_seed, m)?)?;
    Ok(())
}
