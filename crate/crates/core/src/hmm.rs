//! Finite hidden Markov models: validation, sampling, exact filtering, and
//! the window predictors everything else is measured against.
//!
//! Time-indexing convention (used consistently by every predictor in this
//! crate): the hidden state at time `t` emits the observation at time `t`
//! and then transitions. A prior passed to [`Hmm::forward_filter`] or
//! [`Hmm::window_optimal_predict`] is the distribution of the hidden state
//! at the time of the *first* window symbol. The filter alternates
//! emission-weighting and transition-propagation, so the belief it returns
//! is over the state that emits the *next* symbol; [`Hmm::predict_next`]
//! therefore composes with it directly, with no extra propagation step.
//! An empty prefix leaves the prior untouched.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Row sums of `transition`/`emission` and the sum of `initial` must match 1
/// to within this tolerance.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// Belief vectors are accepted as priors when they sum to 1 within this.
pub const BELIEF_TOL: f64 = 1e-10;

/// A single violated model invariant, with enough indices to locate it.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    StateCount { n: usize },
    AlphabetSize { d: usize },
    TransitionRowSum { row: usize, sum: f64 },
    NegativeTransition { row: usize, col: usize, value: f64 },
    EmissionRowSum { row: usize, sum: f64 },
    NegativeEmission { row: usize, symbol: usize, value: f64 },
    InitialSum { sum: f64 },
    NegativeInitial { index: usize, value: f64 },
    NonFinite { field: &'static str, index: usize },
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Violation::StateCount { n } => write!(f, "state count must be >= 1, got {n}"),
            Violation::AlphabetSize { d } => write!(f, "alphabet size must be >= 2, got {d}"),
            Violation::TransitionRowSum { row, sum } => {
                write!(f, "transition row {row} sums to {sum}, expected 1")
            }
            Violation::NegativeTransition { row, col, value } => {
                write!(f, "transition[{row}][{col}] = {value} is negative")
            }
            Violation::EmissionRowSum { row, sum } => {
                write!(f, "emission row {row} sums to {sum}, expected 1")
            }
            Violation::NegativeEmission { row, symbol, value } => {
                write!(f, "emission[{row}][{symbol}] = {value} is negative")
            }
            Violation::InitialSum { sum } => {
                write!(f, "initial distribution sums to {sum}, expected 1")
            }
            Violation::NegativeInitial { index, value } => {
                write!(f, "initial[{index}] = {value} is negative")
            }
            Violation::NonFinite { field, index } => {
                write!(f, "{field}[{index}] is not finite")
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum HmmError {
    #[error("model dimensions do not match payload: {0}")]
    Shape(String),
    #[error("model violates invariants: {}", format_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("prior is not a distribution over {expected} states")]
    BadPrior { expected: usize },
    #[error("symbol {symbol} out of range for alphabet size {d}")]
    SymbolOutOfRange { symbol: usize, d: usize },
    #[error("state index {state} out of range for {n} states")]
    StateOutOfRange { state: usize, n: usize },
    #[error(
        "prefix has zero probability: symbol {symbol} at position {position} \
         is unreachable from the current belief"
    )]
    ZeroLikelihood { position: usize, symbol: usize },
    #[error("stationary distribution did not converge: residual {residual} after {iterations} doublings")]
    StationaryNotConverged { residual: f64, iterations: usize },
    #[error("failed to parse model document: {0}")]
    Parse(String),
}

fn format_violations(vs: &[Violation]) -> String {
    vs.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// A finite hidden Markov model with `n` hidden states over an alphabet of
/// size `d`. Immutable after construction; safe to share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct Hmm {
    n: usize,
    d: usize,
    transition: Vec<f64>, // n x n, row-major
    emission: Vec<f64>,   // n x d, row-major
    initial: Vec<f64>,    // length n
}

/// Posterior over hidden states plus the accumulated log-probability (nats)
/// of the prefix that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefState {
    pub weights: Vec<f64>,
    pub log_likelihood: f64,
}

impl BeliefState {
    pub fn new(weights: Vec<f64>, log_likelihood: f64) -> Result<Self, HmmError> {
        if !is_distribution(&weights, BELIEF_TOL) {
            return Err(HmmError::BadPrior {
                expected: weights.len(),
            });
        }
        Ok(BeliefState {
            weights,
            log_likelihood,
        })
    }

    /// Point mass on one state.
    pub fn indicator(n: usize, state: usize) -> Result<Self, HmmError> {
        if state >= n {
            return Err(HmmError::StateOutOfRange { state, n });
        }
        let mut weights = vec![0.0; n];
        weights[state] = 1.0;
        Ok(BeliefState {
            weights,
            log_likelihood: 0.0,
        })
    }
}

/// One sampled trajectory plus the seed that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledPath {
    pub hidden: Vec<usize>,
    pub observed: Vec<usize>,
    pub seed: u64,
}

fn is_distribution(v: &[f64], tol: f64) -> bool {
    if v.is_empty() || v.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return false;
    }
    (v.iter().sum::<f64>() - 1.0).abs() <= tol
}

#[derive(Serialize, Deserialize)]
struct HmmDoc {
    n: usize,
    d: usize,
    transition: Vec<Vec<f64>>,
    emission: Vec<Vec<f64>>,
    initial: Vec<f64>,
}

impl Hmm {
    /// Builds a model, rejecting any invariant violation.
    ///
    /// `transition` is `n*n` row-major, `emission` is `n*d` row-major.
    pub fn new(
        n: usize,
        d: usize,
        transition: Vec<f64>,
        emission: Vec<f64>,
        initial: Vec<f64>,
    ) -> Result<Self, HmmError> {
        if transition.len() != n * n {
            return Err(HmmError::Shape(format!(
                "transition has {} entries, expected n*n = {}",
                transition.len(),
                n * n
            )));
        }
        if emission.len() != n * d {
            return Err(HmmError::Shape(format!(
                "emission has {} entries, expected n*d = {}",
                emission.len(),
                n * d
            )));
        }
        if initial.len() != n {
            return Err(HmmError::Shape(format!(
                "initial has {} entries, expected n = {n}",
                initial.len()
            )));
        }
        let h = Hmm {
            n,
            d,
            transition,
            emission,
            initial,
        };
        let violations = h.validate();
        if violations.is_empty() {
            Ok(h)
        } else {
            Err(HmmError::Invalid(violations))
        }
    }

    /// Checks every model invariant and returns the full list of violations.
    /// Diagnostic: never aborts, an empty list means the model is valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.n < 1 {
            out.push(Violation::StateCount { n: self.n });
        }
        if self.d < 2 {
            out.push(Violation::AlphabetSize { d: self.d });
        }
        for row in 0..self.n {
            let r = &self.transition[row * self.n..(row + 1) * self.n];
            check_row(r, row, "transition", &mut out);
        }
        for row in 0..self.n {
            let r = &self.emission[row * self.d..(row + 1) * self.d];
            check_row(r, row, "emission", &mut out);
        }
        for (i, &x) in self.initial.iter().enumerate() {
            if !x.is_finite() {
                out.push(Violation::NonFinite {
                    field: "initial",
                    index: i,
                });
            } else if x < 0.0 {
                out.push(Violation::NegativeInitial { index: i, value: x });
            }
        }
        let sum: f64 = self.initial.iter().sum();
        if sum.is_finite() && (sum - 1.0).abs() > STOCHASTIC_TOL {
            out.push(Violation::InitialSum { sum });
        }
        out
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn transition_row(&self, state: usize) -> &[f64] {
        &self.transition[state * self.n..(state + 1) * self.n]
    }

    pub fn emission_row(&self, state: usize) -> &[f64] {
        &self.emission[state * self.d..(state + 1) * self.d]
    }

    /// Returns a copy of the model with a different initial distribution.
    /// Used by the harness to evaluate the stationary version of a chain.
    pub fn with_initial(&self, initial: Vec<f64>) -> Result<Self, HmmError> {
        Hmm::new(
            self.n,
            self.d,
            self.transition.clone(),
            self.emission.clone(),
            initial,
        )
    }

    /// Samples a trajectory of `length` steps. Deterministic given `seed`.
    pub fn sample(&self, length: usize, seed: u64) -> SampledPath {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        self.sample_with(&mut rng, length, None, seed)
    }

    /// Samples with the hidden start forced to `h0` instead of drawing from
    /// the initial distribution.
    pub fn sample_from_state(&self, h0: usize, length: usize, seed: u64) -> Result<SampledPath, HmmError> {
        if h0 >= self.n {
            return Err(HmmError::StateOutOfRange { state: h0, n: self.n });
        }
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Ok(self.sample_with(&mut rng, length, Some(h0), seed))
    }

    fn sample_with(
        &self,
        rng: &mut impl rand::Rng,
        length: usize,
        start: Option<usize>,
        seed: u64,
    ) -> SampledPath {
        let mut hidden = Vec::with_capacity(length);
        let mut observed = Vec::with_capacity(length);
        if length == 0 {
            return SampledPath {
                hidden,
                observed,
                seed,
            };
        }
        let mut state = match start {
            Some(s) => s,
            None => sample_categorical(&self.initial, rng),
        };
        for t in 0..length {
            hidden.push(state);
            observed.push(sample_categorical(self.emission_row(state), rng));
            if t + 1 < length {
                state = sample_categorical(self.transition_row(state), rng);
            }
        }
        SampledPath {
            hidden,
            observed,
            seed,
        }
    }

    /// One filter update: weight the belief by the likelihood of `symbol`,
    /// renormalize, then propagate one transition step.
    ///
    /// Returns [`HmmError::ZeroLikelihood`] when the symbol has zero
    /// probability under every state carrying belief mass; the belief is
    /// left untouched in that case and never silently renormalized.
    pub fn filter_step(
        &self,
        belief: &mut BeliefState,
        symbol: usize,
        position: usize,
    ) -> Result<(), HmmError> {
        if symbol >= self.d {
            return Err(HmmError::SymbolOutOfRange { symbol, d: self.d });
        }
        let mut weighted = vec![0.0; self.n];
        let mut total = 0.0;
        for i in 0..self.n {
            let w = belief.weights[i] * self.emission_row(i)[symbol];
            weighted[i] = w;
            total += w;
        }
        if total <= 0.0 {
            return Err(HmmError::ZeroLikelihood { position, symbol });
        }
        let mut next = vec![0.0; self.n];
        for i in 0..self.n {
            let w = weighted[i] / total;
            if w == 0.0 {
                continue;
            }
            let row = self.transition_row(i);
            for (j, nj) in next.iter_mut().enumerate() {
                *nj += w * row[j];
            }
        }
        belief.weights = next;
        belief.log_likelihood += total.ln();
        Ok(())
    }

    /// Exact posterior over the hidden state that emits the symbol *after*
    /// `prefix`, starting from `prior`, together with `log P(prefix)`.
    pub fn forward_filter(&self, prefix: &[usize], prior: &[f64]) -> Result<BeliefState, HmmError> {
        if prior.len() != self.n || !is_distribution(prior, BELIEF_TOL) {
            return Err(HmmError::BadPrior { expected: self.n });
        }
        let mut belief = BeliefState {
            weights: prior.to_vec(),
            log_likelihood: 0.0,
        };
        for (pos, &sym) in prefix.iter().enumerate() {
            self.filter_step(&mut belief, sym, pos)?;
        }
        Ok(belief)
    }

    /// Next-symbol distribution under a belief: `weights^T . emission`.
    pub fn predict_next(&self, belief: &BeliefState) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        for i in 0..self.n {
            let w = belief.weights[i];
            if w == 0.0 {
                continue;
            }
            let row = self.emission_row(i);
            for (k, o) in out.iter_mut().enumerate() {
                *o += w * row[k];
            }
        }
        out
    }

    /// The exact conditional next-symbol distribution given `window` and a
    /// hidden-state prior at the start of the window. With the stationary
    /// prior this is the optimal order-`window.len()` Markov prediction.
    pub fn window_optimal_predict(
        &self,
        prior: &[f64],
        window: &[usize],
    ) -> Result<Vec<f64>, HmmError> {
        let belief = self.forward_filter(window, prior)?;
        Ok(self.predict_next(&belief))
    }

    /// [`Hmm::window_optimal_predict`] with the prior a point mass on `h0`:
    /// the prediction of an oracle that knows the state at the window start.
    pub fn opt_predict(&self, h0: usize, window: &[usize]) -> Result<Vec<f64>, HmmError> {
        if h0 >= self.n {
            return Err(HmmError::StateOutOfRange { state: h0, n: self.n });
        }
        let mut prior = vec![0.0; self.n];
        prior[h0] = 1.0;
        self.window_optimal_predict(&prior, window)
    }

    /// A stationary distribution of the transition chain, found as the
    /// Cesaro average of iterates started from the initial distribution.
    /// The average is squared out by operator doubling
    /// (`C_{2K} = C_K (I + T^K) / 2`), so periodic chains such as
    /// permutations converge as well. Returns the first iterate whose
    /// residual `||pi^T T - pi^T||_1` is at most `tol`.
    pub fn stationary_distribution(&self, tol: f64, max_iter: usize) -> Result<Vec<f64>, HmmError> {
        let n = self.n;
        let mut cesaro = identity(n);
        let mut power = self.transition.clone();
        let mut best_residual = f64::INFINITY;
        for iter in 0..=max_iter {
            let mut pi = vec_mat(&self.initial, &cesaro, n);
            let sum: f64 = pi.iter().sum();
            for x in pi.iter_mut() {
                *x /= sum;
            }
            let residual = self.stationary_residual(&pi);
            if residual <= tol {
                return Ok(pi);
            }
            best_residual = best_residual.min(residual);
            if iter == max_iter {
                break;
            }
            // C_{2K} = C_K (I + T^K) / 2 ; T^{2K} = (T^K)^2. Repeated
            // squaring compounds row-sum drift geometrically, so project
            // both operators back onto row-stochastic form each step.
            let cp = mat_mul(&cesaro, &power, n);
            for (c, x) in cesaro.iter_mut().zip(cp.iter()) {
                *c = 0.5 * (*c + *x);
            }
            renormalize_rows(&mut cesaro, n);
            power = mat_mul(&power, &power, n);
            renormalize_rows(&mut power, n);
        }
        Err(HmmError::StationaryNotConverged {
            residual: best_residual,
            iterations: max_iter,
        })
    }

    fn stationary_residual(&self, pi: &[f64]) -> f64 {
        let next = vec_mat(pi, &self.transition, self.n);
        pi.iter()
            .zip(next.iter())
            .map(|(a, b)| (a - b).abs())
            .sum()
    }

    /// Serializes to the on-disk JSON document (`n`, `d`, row-major
    /// `transition` and `emission` as nested arrays, `initial`).
    pub fn to_json(&self) -> String {
        let doc = HmmDoc {
            n: self.n,
            d: self.d,
            transition: (0..self.n)
                .map(|i| self.transition_row(i).to_vec())
                .collect(),
            emission: (0..self.n).map(|i| self.emission_row(i).to_vec()).collect(),
            initial: self.initial.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("HMM document serializes")
    }

    /// Parses the on-disk JSON document, rejecting on any invariant
    /// violation.
    pub fn from_json(text: &str) -> Result<Self, HmmError> {
        match check_json_document(text)? {
            DocumentCheck::Valid(h) => Ok(h),
            DocumentCheck::Invalid(vs) => Err(HmmError::Invalid(vs)),
        }
    }
}

/// Outcome of a diagnostic document check.
pub enum DocumentCheck {
    Valid(Hmm),
    Invalid(Vec<Violation>),
}

/// Parses a model document and reports the full list of violated
/// invariants instead of rejecting at the first one. Shape and syntax
/// problems are still hard errors.
pub fn check_json_document(text: &str) -> Result<DocumentCheck, HmmError> {
    let doc: HmmDoc = serde_json::from_str(text).map_err(|e| HmmError::Parse(e.to_string()))?;
    for (i, row) in doc.transition.iter().enumerate() {
        if row.len() != doc.n {
            return Err(HmmError::Shape(format!(
                "transition row {i} has {} entries, expected {}",
                row.len(),
                doc.n
            )));
        }
    }
    for (i, row) in doc.emission.iter().enumerate() {
        if row.len() != doc.d {
            return Err(HmmError::Shape(format!(
                "emission row {i} has {} entries, expected {}",
                row.len(),
                doc.d
            )));
        }
    }
    if doc.transition.len() != doc.n || doc.emission.len() != doc.n || doc.initial.len() != doc.n {
        return Err(HmmError::Shape(format!(
            "expected {} transition/emission rows and initial entries",
            doc.n
        )));
    }
    let h = Hmm {
        n: doc.n,
        d: doc.d,
        transition: doc.transition.into_iter().flatten().collect(),
        emission: doc.emission.into_iter().flatten().collect(),
        initial: doc.initial,
    };
    let violations = h.validate();
    if violations.is_empty() {
        Ok(DocumentCheck::Valid(h))
    } else {
        Ok(DocumentCheck::Invalid(violations))
    }
}

fn check_row(row: &[f64], index: usize, field: &'static str, out: &mut Vec<Violation>) {
    for (j, &x) in row.iter().enumerate() {
        if !x.is_finite() {
            out.push(Violation::NonFinite { field, index });
            return;
        }
        if x < 0.0 {
            out.push(match field {
                "transition" => Violation::NegativeTransition {
                    row: index,
                    col: j,
                    value: x,
                },
                _ => Violation::NegativeEmission {
                    row: index,
                    symbol: j,
                    value: x,
                },
            });
        }
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > STOCHASTIC_TOL {
        out.push(match field {
            "transition" => Violation::TransitionRowSum { row: index, sum },
            _ => Violation::EmissionRowSum { row: index, sum },
        });
    }
}

fn renormalize_rows(m: &mut [f64], n: usize) {
    for i in 0..n {
        let row = &mut m[i * n..(i + 1) * n];
        let sum: f64 = row.iter().sum();
        if sum > 0.0 {
            for x in row.iter_mut() {
                *x /= sum;
            }
        }
    }
}

fn identity(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for i in 0..n {
        m[i * n + i] = 1.0;
    }
    m
}

fn mat_mul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..n {
                out[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    out
}

fn vec_mat(v: &[f64], m: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for i in 0..n {
        let vi = v[i];
        if vi == 0.0 {
            continue;
        }
        for j in 0..n {
            out[j] += vi * m[i * n + j];
        }
    }
    out
}

/// A dense random model: every transition and emission row is drawn from a
/// Dirichlet(1) (uniform-on-the-simplex) distribution, as is the initial
/// vector. Deterministic given `seed`.
pub fn random_dense_hmm(n: usize, d: usize, seed: u64) -> Hmm {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut row = |len: usize| -> Vec<f64> {
        // Normalized i.i.d. exponentials are Dirichlet(1).
        let mut v: Vec<f64> = (0..len)
            .map(|_| {
                let u: f64 = rng.random();
                -f64::ln(1.0 - u)
            })
            .collect();
        let sum: f64 = v.iter().sum();
        for x in v.iter_mut() {
            *x /= sum;
        }
        let sum: f64 = v.iter().sum();
        // Pin the row sum to exactly 1 within STOCHASTIC_TOL.
        let last = v.len() - 1;
        v[last] += 1.0 - sum;
        v
    };
    let transition: Vec<f64> = (0..n).flat_map(|_| row(n)).collect();
    let emission: Vec<f64> = (0..n).flat_map(|_| row(d)).collect();
    let initial = row(n);
    Hmm::new(n, d, transition, emission, initial).expect("generated rows are stochastic")
}

/// Draws an index from an explicit probability vector by walking the CDF.
/// Stable across platforms for a fixed RNG stream.
pub(crate) fn sample_categorical(probs: &[f64], rng: &mut impl rand::Rng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Floating-point tail: fall back to the last positive entry.
    probs
        .iter()
        .rposition(|&p| p > 0.0)
        .unwrap_or(probs.len() - 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::test_support::{enumerate_belief, random_hmm};

    fn two_state_identity() -> Hmm {
        Hmm::new(
            2,
            2,
            vec![1.0, 0.0, 0.0, 1.0],
            vec![1.0, 0.0, 0.0, 1.0],
            vec![0.5, 0.5],
        )
        .unwrap()
    }

    #[test]
    fn validate_accepts_exactly_stochastic_rows() {
        assert!(two_state_identity().validate().is_empty());
    }

    #[test]
    fn validate_names_deficient_transition_row() {
        let h = Hmm {
            n: 2,
            d: 2,
            transition: vec![0.5, 0.4, 0.0, 1.0],
            emission: vec![1.0, 0.0, 0.0, 1.0],
            initial: vec![0.5, 0.5],
        };
        let vs = h.validate();
        assert_eq!(vs, vec![Violation::TransitionRowSum { row: 0, sum: 0.9 }]);
    }

    #[test]
    fn validate_names_negative_emission_cell() {
        let h = Hmm {
            n: 2,
            d: 2,
            transition: vec![1.0, 0.0, 0.0, 1.0],
            emission: vec![1.0, 0.0, -0.25, 1.25],
            initial: vec![0.5, 0.5],
        };
        let vs = h.validate();
        assert!(vs.contains(&Violation::NegativeEmission {
            row: 1,
            symbol: 0,
            value: -0.25
        }));
    }

    #[test]
    fn new_rejects_invalid_models() {
        let err = Hmm::new(
            1,
            2,
            vec![1.0],
            vec![0.7, 0.7],
            vec![1.0],
        )
        .unwrap_err();
        assert!(matches!(err, HmmError::Invalid(_)));
    }

    #[test]
    fn sample_is_deterministic_given_seed() {
        let h = random_hmm(3, 2, 11);
        let a = h.sample(64, 7);
        let b = h.sample(64, 7);
        assert_eq!(a, b);
        let c = h.sample(64, 8);
        assert_ne!(a.observed, c.observed);
    }

    #[test]
    fn sample_zero_length_is_empty() {
        let h = two_state_identity();
        let p = h.sample(0, 3);
        assert!(p.hidden.is_empty() && p.observed.is_empty());
    }

    #[test]
    fn single_state_emission_frequency_within_three_sigma() {
        // Binomial oracle: 1e5 draws of P(symbol 1) = 0.7.
        let h = Hmm::new(1, 2, vec![1.0], vec![0.3, 0.7], vec![1.0]).unwrap();
        let trials = 100_000usize;
        let p = h.sample(trials, 42);
        let ones = p.observed.iter().filter(|&&s| s == 1).count() as f64;
        let freq = ones / trials as f64;
        let sigma = (0.7 * 0.3 / trials as f64).sqrt();
        assert!((freq - 0.7).abs() <= 3.0 * sigma, "freq = {freq}");
    }

    #[test]
    fn deterministic_cycle_emits_programmed_string() {
        let bits = [0usize, 1, 1, 0, 1];
        let n = bits.len();
        let mut transition = vec![0.0; n * n];
        let mut emission = vec![0.0; n * 2];
        for i in 0..n {
            transition[i * n + (i + 1) % n] = 1.0;
            emission[i * 2 + bits[i]] = 1.0;
        }
        let h = Hmm::new(n, 2, transition, emission, vec![1.0 / n as f64; n]).unwrap();
        let path = h.sample(20, 5);
        let phase = path.hidden[0];
        for (t, &sym) in path.observed.iter().enumerate() {
            assert_eq!(sym, bits[(phase + t) % n]);
        }
    }

    #[test]
    fn filter_posterior_is_indicator_for_deterministic_emissions() {
        // State i deterministically emits symbol i; after observing symbol 1
        // the pre-propagation posterior is the indicator of state 1, so the
        // returned belief is that indicator pushed through the transition.
        let h = Hmm::new(
            2,
            2,
            vec![0.25, 0.75, 0.5, 0.5],
            vec![1.0, 0.0, 0.0, 1.0],
            vec![0.5, 0.5],
        )
        .unwrap();
        let b = h.forward_filter(&[1], &[0.5, 0.5]).unwrap();
        assert!((b.weights[0] - 0.5).abs() < 1e-15);
        assert!((b.weights[1] - 0.5).abs() < 1e-15);
        assert!((b.log_likelihood - (0.5f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn identical_emission_rows_reduce_to_transition_propagation() {
        let h = Hmm::new(
            3,
            2,
            vec![0.2, 0.8, 0.0, 0.1, 0.3, 0.6, 0.5, 0.25, 0.25],
            vec![0.4, 0.6, 0.4, 0.6, 0.4, 0.6],
            vec![1.0, 0.0, 0.0],
        )
        .unwrap();
        let prior = [0.6, 0.3, 0.1];
        let b = h.forward_filter(&[0, 1, 1], &prior).unwrap();
        // Expected: prior propagated 3 transition steps, untouched by the
        // uninformative emissions.
        let mut expect = prior.to_vec();
        for _ in 0..3 {
            expect = vec_mat(&expect, &h.transition, 3);
        }
        for (w, e) in b.weights.iter().zip(expect.iter()) {
            assert!((w - e).abs() < 1e-14);
        }
    }

    #[test]
    fn empty_prefix_returns_prior() {
        let h = random_hmm(4, 3, 1);
        let prior = vec![0.1, 0.2, 0.3, 0.4];
        let b = h.forward_filter(&[], &prior).unwrap();
        assert_eq!(b.weights, prior);
        assert_eq!(b.log_likelihood, 0.0);
    }

    #[test]
    fn filter_matches_path_enumeration_oracle() {
        let h = random_hmm(3, 2, 99);
        let prior = vec![0.5, 0.3, 0.2];
        let prefix = [0usize, 1, 1, 0];
        let filtered = h.forward_filter(&prefix, &prior).unwrap();
        let (oracle_weights, oracle_ll) = enumerate_belief(&h, &prefix, &prior);
        for (a, b) in filtered.weights.iter().zip(oracle_weights.iter()) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        assert!((filtered.log_likelihood - oracle_ll).abs() < 1e-12);
    }

    #[test]
    fn zero_probability_symbol_is_reported() {
        let h = two_state_identity();
        // From a point mass on state 0 the model can only emit symbol 0.
        let err = h.forward_filter(&[0, 1], &[1.0, 0.0]).unwrap_err();
        match err {
            HmmError::ZeroLikelihood { position, symbol } => {
                assert_eq!((position, symbol), (1, 1));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn predict_next_on_indicator_is_emission_row() {
        let h = random_hmm(4, 3, 2);
        for i in 0..4 {
            let b = BeliefState::indicator(4, i).unwrap();
            assert_eq!(h.predict_next(&b), h.emission_row(i).to_vec());
        }
    }

    #[test]
    fn predict_next_is_linear_in_belief() {
        // Law of total probability, exact.
        let h = random_hmm(4, 3, 3);
        let weights = vec![0.4, 0.1, 0.25, 0.25];
        let b = BeliefState::new(weights.clone(), 0.0).unwrap();
        let combined = h.predict_next(&b);
        let mut expect = vec![0.0; 3];
        for (i, w) in weights.iter().enumerate() {
            let row = h.predict_next(&BeliefState::indicator(4, i).unwrap());
            for (e, r) in expect.iter_mut().zip(row.iter()) {
                *e += w * r;
            }
        }
        for (a, b) in combined.iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn prediction_sums_to_one() {
        let h = random_hmm(4, 3, 17);
        let prior = h.stationary_distribution(1e-12, 64).unwrap();
        let p = h.window_optimal_predict(&prior, &[0, 2, 1]).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn window_prediction_matches_sequence_enumeration() {
        // P(x_t | window) from brute-force joint enumeration over hidden
        // paths, for a random 3-state model.
        let h = random_hmm(3, 2, 5);
        let prior = vec![0.2, 0.5, 0.3];
        let window = [1usize, 0, 1];
        let pred = h.window_optimal_predict(&prior, &window).unwrap();
        let (belief, _) = enumerate_belief(&h, &window, &prior);
        let mut expect = vec![0.0; 2];
        for (i, w) in belief.iter().enumerate() {
            for k in 0..2 {
                expect[k] += w * h.emission_row(i)[k];
            }
        }
        for (a, b) in pred.iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn opt_predict_on_empty_window_is_emission_of_start_state() {
        let h = random_hmm(3, 2, 6);
        for s in 0..3 {
            let p = h.opt_predict(s, &[]).unwrap();
            assert_eq!(p, h.emission_row(s).to_vec());
        }
    }

    #[test]
    fn opt_predict_matches_enumeration() {
        let h = random_hmm(3, 2, 7);
        let window = [0usize, 0, 1, 1];
        for h0 in 0..3 {
            let pred = h.opt_predict(h0, &window).unwrap();
            let mut prior = vec![0.0; 3];
            prior[h0] = 1.0;
            let (belief, _) = enumerate_belief(&h, &window, &prior);
            let mut expect = vec![0.0; 2];
            for (i, w) in belief.iter().enumerate() {
                for k in 0..2 {
                    expect[k] += w * h.emission_row(i)[k];
                }
            }
            for (a, b) in pred.iter().zip(expect.iter()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn stationary_uniform_for_doubly_stochastic() {
        let h = Hmm::new(
            3,
            2,
            vec![0.5, 0.25, 0.25, 0.25, 0.5, 0.25, 0.25, 0.25, 0.5],
            vec![0.5, 0.5, 0.4, 0.6, 0.3, 0.7],
            vec![0.7, 0.2, 0.1],
        )
        .unwrap();
        let pi = h.stationary_distribution(1e-12, 64).unwrap();
        for w in &pi {
            assert!((w - 1.0 / 3.0).abs() < 1e-10);
        }
    }

    #[test]
    fn stationary_of_cycle_is_uniform_via_cesaro() {
        let n = 5;
        let mut transition = vec![0.0; n * n];
        for i in 0..n {
            transition[i * n + (i + 1) % n] = 1.0;
        }
        let mut emission = vec![0.0; n * 2];
        for i in 0..n {
            emission[i * 2 + (i % 2)] = 1.0;
        }
        let mut initial = vec![0.0; n];
        initial[0] = 1.0; // worst case: all mass on one phase
        let h = Hmm::new(n, 2, transition, emission, initial).unwrap();
        let pi = h.stationary_distribution(1e-10, 64).unwrap();
        for w in &pi {
            assert!((w - 0.2).abs() < 1e-10, "pi = {pi:?}");
        }
    }

    #[test]
    fn stationary_residual_meets_tolerance_on_random_chain() {
        let h = random_hmm(4, 2, 31);
        let pi = h.stationary_distribution(1e-12, 64).unwrap();
        assert!(h.stationary_residual(&pi) <= 1e-10);
    }

    #[test]
    fn json_round_trip_preserves_model() {
        let h = random_hmm(3, 3, 12);
        let text = h.to_json();
        let back = Hmm::from_json(&text).unwrap();
        assert_eq!(h, back);
    }

    #[test]
    fn json_parser_rejects_invariant_violations() {
        let text = r#"{
            "n": 2, "d": 2,
            "transition": [[0.5, 0.4], [0.0, 1.0]],
            "emission": [[1.0, 0.0], [0.0, 1.0]],
            "initial": [0.5, 0.5]
        }"#;
        assert!(matches!(
            Hmm::from_json(text),
            Err(HmmError::Invalid(_))
        ));
    }
}

