//! Loss functionals between predictive distributions, and the exact /
//! Monte-Carlo machinery for scoring a predictor against the optimal
//! full-history predictor of an HMM.
//!
//! All divergences are in nats. An infinite KL term (a predictor assigning
//! zero probability to a possible outcome) is carried as an explicit
//! [`KlValue::Infinite`] sentinel and propagates through averages as a
//! flagged condition rather than a float infinity.

use std::collections::HashMap;

use thiserror::Error;

use crate::hmm::{BeliefState, Hmm, HmmError};
use crate::ngram::{ContextTable, Smoothing};
use crate::seeds::child_seed;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("distributions have mismatched dimensions: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("truncation cap must be > 1, got {cap}")]
    InvalidCap { cap: f64 },
    #[error("empty input")]
    EmptyInput,
}

/// A KL divergence that may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KlValue {
    Finite(f64),
    Infinite,
}

impl KlValue {
    pub fn is_infinite(&self) -> bool {
        matches!(self, KlValue::Infinite)
    }

    pub fn finite(&self) -> Option<f64> {
        match self {
            KlValue::Finite(x) => Some(*x),
            KlValue::Infinite => None,
        }
    }

    /// Finite value or a panic; for contexts where infinity is a bug.
    pub fn expect_finite(&self, what: &str) -> f64 {
        self.finite()
            .unwrap_or_else(|| panic!("unexpected infinite KL in {what}"))
    }
}

impl std::fmt::Display for KlValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            KlValue::Finite(x) => write!(f, "{x}"),
            KlValue::Infinite => write!(f, "inf"),
        }
    }
}

fn check_dims(p: &[f64], q: &[f64]) -> Result<(), MetricsError> {
    if p.len() != q.len() {
        return Err(MetricsError::DimensionMismatch {
            left: p.len(),
            right: q.len(),
        });
    }
    Ok(())
}

/// `sum_i p_i ln(p_i / q_i)`, with `0 ln 0 = 0`; infinite when some
/// `p_i > 0` meets `q_i = 0`.
pub fn kl(p: &[f64], q: &[f64]) -> Result<KlValue, MetricsError> {
    check_dims(p, q)?;
    let mut acc = 0.0;
    for (&pi, &qi) in p.iter().zip(q.iter()) {
        if pi <= 0.0 {
            continue;
        }
        if qi <= 0.0 {
            return Ok(KlValue::Infinite);
        }
        acc += pi * (pi / qi).ln();
    }
    Ok(KlValue::Finite(acc))
}

/// Total-variation-style distance `sum_i |p_i - q_i|`, in `[0, 2]`.
pub fn l1(p: &[f64], q: &[f64]) -> Result<f64, MetricsError> {
    check_dims(p, q)?;
    Ok(p.iter().zip(q.iter()).map(|(a, b)| (a - b).abs()).sum())
}

/// KL with the per-outcome probability ratio capped at `cap`:
/// `sum_i p_i ln(min(p_i / q_i, cap))`. Always finite for `cap > 1`.
pub fn truncated_kl(p: &[f64], q: &[f64], cap: f64) -> Result<f64, MetricsError> {
    if !(cap > 1.0) {
        return Err(MetricsError::InvalidCap { cap });
    }
    check_dims(p, q)?;
    let mut acc = 0.0;
    for (&pi, &qi) in p.iter().zip(q.iter()) {
        if pi <= 0.0 {
            continue;
        }
        let ratio = if qi <= 0.0 { cap } else { (pi / qi).min(cap) };
        acc += pi * ratio.ln();
    }
    Ok(acc)
}

/// Argmax with ties broken toward the lowest index, so zero-one losses are
/// deterministic.
pub fn argmax_lowest(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Excess expected misclassification of `pred`'s argmax decision over
/// `opt`'s, under `truth`: `truth[argmax opt] - truth[argmax pred]`.
pub fn relative_zero_one(opt: &[f64], pred: &[f64], truth: &[f64]) -> Result<f64, MetricsError> {
    check_dims(opt, pred)?;
    check_dims(opt, truth)?;
    Ok(truth[argmax_lowest(opt)] - truth[argmax_lowest(pred)])
}

/// Expected absolute deviation from the mean and from the median of a
/// weighted value set. The median is the smallest value whose cumulative
/// weight reaches 1/2. Weights are assumed to lie on the simplex.
pub fn deviation_stats(weights: &[f64], values: &[f64]) -> Result<(f64, f64), MetricsError> {
    if weights.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    check_dims(weights, values)?;
    let mean: f64 = weights.iter().zip(values.iter()).map(|(w, x)| w * x).sum();
    let mean_dev: f64 = weights
        .iter()
        .zip(values.iter())
        .map(|(w, x)| w * (x - mean).abs())
        .sum();
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("finite values"));
    let mut cum = 0.0;
    let mut median = values[*order.last().expect("nonempty")];
    for &i in &order {
        cum += weights[i];
        if cum >= 0.5 {
            median = values[i];
            break;
        }
    }
    let median_dev: f64 = weights
        .iter()
        .zip(values.iter())
        .map(|(w, x)| w * (x - median).abs())
        .sum();
    Ok((mean_dev, median_dev))
}

// ---------------------------------------------------------------------------
// Predictor evaluation
// ---------------------------------------------------------------------------

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("exact enumeration needs {required:.3e} sequences, over the budget of {budget:.3e}")]
    Budget { required: f64, budget: f64 },
    #[error(transparent)]
    Hmm(#[from] HmmError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("predictor returned {got} probabilities, expected {expected}")]
    BadPrediction { got: usize, expected: usize },
}

/// A predictor fed one observation stream, with backtracking so the exact
/// evaluator can walk the sequence tree depth-first.
pub trait SequencePredictor {
    /// Forget everything and return to the empty prefix.
    fn reset(&mut self);
    /// Predictive distribution for the next symbol given the pushed prefix.
    fn predict(&mut self) -> Result<Vec<f64>, EvalError>;
    /// Append one observed symbol to the prefix.
    fn push(&mut self, symbol: usize) -> Result<(), EvalError>;
    /// Remove the most recently pushed symbol.
    fn pop(&mut self);
}

/// The Bayes-optimal predictor with access to the entire history: an exact
/// forward filter started from `prior`.
pub struct FullHistoryPredictor<'a> {
    hmm: &'a Hmm,
    prior: Vec<f64>,
    stack: Vec<BeliefState>,
}

impl<'a> FullHistoryPredictor<'a> {
    pub fn new(hmm: &'a Hmm, prior: &[f64]) -> Result<Self, HmmError> {
        let root = hmm.forward_filter(&[], prior)?;
        Ok(FullHistoryPredictor {
            hmm,
            prior: prior.to_vec(),
            stack: vec![root],
        })
    }

    fn top(&self) -> &BeliefState {
        self.stack.last().expect("stack holds at least the prior")
    }
}

impl SequencePredictor for FullHistoryPredictor<'_> {
    fn reset(&mut self) {
        self.stack.truncate(1);
        self.stack[0] = BeliefState {
            weights: self.prior.clone(),
            log_likelihood: 0.0,
        };
    }

    fn predict(&mut self) -> Result<Vec<f64>, EvalError> {
        Ok(self.hmm.predict_next(self.top()))
    }

    fn push(&mut self, symbol: usize) -> Result<(), EvalError> {
        let mut next = self.top().clone();
        let position = self.stack.len() - 1;
        self.hmm.filter_step(&mut next, symbol, position)?;
        self.stack.push(next);
        Ok(())
    }

    fn pop(&mut self) {
        if self.stack.len() > 1 {
            self.stack.pop();
        }
    }
}

/// The optimal order-`ell` Markov predictor: conditions on the most recent
/// `ell` observations only, with a fixed hidden-state prior (by default the
/// stationary distribution) at the window start. While fewer than `ell`
/// observations exist, the whole available prefix is the window.
pub struct WindowOptimalPredictor<'a> {
    hmm: &'a Hmm,
    prior: Vec<f64>,
    ell: usize,
    prefix: Vec<usize>,
    memo: HashMap<Vec<usize>, Vec<f64>>,
}

impl<'a> WindowOptimalPredictor<'a> {
    pub fn new(hmm: &'a Hmm, prior: &[f64], ell: usize) -> Self {
        WindowOptimalPredictor {
            hmm,
            prior: prior.to_vec(),
            ell,
            prefix: Vec::new(),
            memo: HashMap::new(),
        }
    }

    /// With the model's stationary distribution as the window prior.
    pub fn stationary(hmm: &'a Hmm, ell: usize) -> Result<Self, HmmError> {
        let prior = hmm.stationary_distribution(1e-12, 64)?;
        Ok(Self::new(hmm, &prior, ell))
    }
}

impl SequencePredictor for WindowOptimalPredictor<'_> {
    fn reset(&mut self) {
        self.prefix.clear();
    }

    fn predict(&mut self) -> Result<Vec<f64>, EvalError> {
        let start = self.prefix.len().saturating_sub(self.ell);
        let window = self.prefix[start..].to_vec();
        if let Some(p) = self.memo.get(&window) {
            return Ok(p.clone());
        }
        let p = self.hmm.window_optimal_predict(&self.prior, &window)?;
        self.memo.insert(window, p.clone());
        Ok(p)
    }

    fn push(&mut self, symbol: usize) -> Result<(), EvalError> {
        self.prefix.push(symbol);
        Ok(())
    }

    fn pop(&mut self) {
        self.prefix.pop();
    }
}

/// Adapter scoring a [`ContextTable`] snapshot as a window predictor.
/// Prefixes shorter than the table order fall back to uniform.
pub struct NgramPredictor<'a> {
    table: &'a ContextTable,
    policy: Smoothing,
    prefix: Vec<usize>,
}

impl<'a> NgramPredictor<'a> {
    pub fn new(table: &'a ContextTable, policy: Smoothing) -> Self {
        NgramPredictor {
            table,
            policy,
            prefix: Vec::new(),
        }
    }
}

impl SequencePredictor for NgramPredictor<'_> {
    fn reset(&mut self) {
        self.prefix.clear();
    }

    fn predict(&mut self) -> Result<Vec<f64>, EvalError> {
        let ell = self.table.order();
        if self.prefix.len() < ell {
            let d = self.table.alphabet();
            return Ok(vec![1.0 / d as f64; d]);
        }
        let window = &self.prefix[self.prefix.len() - ell..];
        Ok(self
            .table
            .predict_with(window, self.policy)
            .expect("window has table order"))
    }

    fn push(&mut self, symbol: usize) -> Result<(), EvalError> {
        self.prefix.push(symbol);
        Ok(())
    }

    fn pop(&mut self) {
        self.prefix.pop();
    }
}

/// A predictor computed by an arbitrary function of the prefix; lets
/// independent oracles run through the same evaluation pipeline.
pub struct FnPredictor<F: FnMut(&[usize]) -> Result<Vec<f64>, EvalError>> {
    f: F,
    prefix: Vec<usize>,
}

impl<F: FnMut(&[usize]) -> Result<Vec<f64>, EvalError>> FnPredictor<F> {
    pub fn new(f: F) -> Self {
        FnPredictor {
            f,
            prefix: Vec::new(),
        }
    }
}

impl<F: FnMut(&[usize]) -> Result<Vec<f64>, EvalError>> SequencePredictor for FnPredictor<F> {
    fn reset(&mut self) {
        self.prefix.clear();
    }

    fn predict(&mut self) -> Result<Vec<f64>, EvalError> {
        (self.f)(&self.prefix)
    }

    fn push(&mut self, symbol: usize) -> Result<(), EvalError> {
        self.prefix.push(symbol);
        Ok(())
    }

    fn pop(&mut self) {
        self.prefix.pop();
    }
}

/// How a [`LossReport`] was produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EvalMode {
    Exact,
    MonteCarlo { trials: usize },
}

/// Losses of one prediction step `t`, in expectation over histories.
#[derive(Debug, Clone)]
pub struct StepLoss {
    pub t: usize,
    pub kl: KlValue,
    pub l1: f64,
    pub rel01: f64,
}

#[derive(Debug, Clone)]
pub struct LossAverages {
    pub kl: KlValue,
    pub l1: f64,
    pub rel01: f64,
}

/// Standard errors across Monte-Carlo trials; `kl` is absent when any trial
/// hit an infinite term.
#[derive(Debug, Clone)]
pub struct LossStdErr {
    pub kl: Option<f64>,
    pub l1: f64,
    pub rel01: f64,
}

/// Per-timestep and averaged losses of a predictor measured against the
/// optimal full-history predictor.
#[derive(Debug, Clone)]
pub struct LossReport {
    pub per_step: Vec<StepLoss>,
    pub averages: LossAverages,
    pub horizon: usize,
    pub mode: EvalMode,
    pub stderr: Option<LossStdErr>,
}

#[derive(Clone, Default)]
struct StepAcc {
    kl: f64,
    kl_infinite: bool,
    l1: f64,
    rel01: f64,
}

fn accumulate(acc: &mut StepAcc, weight: f64, p_opt: &[f64], q: &[f64]) -> Result<(), MetricsError> {
    match kl(p_opt, q)? {
        KlValue::Finite(x) => acc.kl += weight * x,
        KlValue::Infinite => acc.kl_infinite = true,
    }
    acc.l1 += weight * l1(p_opt, q)?;
    acc.rel01 += weight * relative_zero_one(p_opt, q, p_opt)?;
    Ok(())
}

fn finish_report(accs: Vec<StepAcc>, mode: EvalMode, stderr: Option<LossStdErr>) -> LossReport {
    let horizon = accs.len();
    let per_step: Vec<StepLoss> = accs
        .into_iter()
        .enumerate()
        .map(|(t, a)| StepLoss {
            t,
            kl: if a.kl_infinite {
                KlValue::Infinite
            } else {
                KlValue::Finite(a.kl)
            },
            l1: a.l1,
            rel01: a.rel01,
        })
        .collect();
    let n = horizon.max(1) as f64;
    let kl_avg = if per_step.iter().any(|s| s.kl.is_infinite()) {
        KlValue::Infinite
    } else {
        KlValue::Finite(per_step.iter().filter_map(|s| s.kl.finite()).sum::<f64>() / n)
    };
    let averages = LossAverages {
        kl: kl_avg,
        l1: per_step.iter().map(|s| s.l1).sum::<f64>() / n,
        rel01: per_step.iter().map(|s| s.rel01).sum::<f64>() / n,
    };
    LossReport {
        per_step,
        averages,
        horizon,
        mode,
        stderr,
    }
}

/// Exact expected losses over the window `[0, horizon)`: sums the losses
/// over every length-`horizon` observation sequence weighted by its
/// probability under the model started from `truth_prior`.
///
/// Refuses with a size estimate when `d^horizon` exceeds `budget`.
pub fn evaluate_exact<P: SequencePredictor>(
    hmm: &Hmm,
    truth_prior: &[f64],
    predictor: &mut P,
    horizon: usize,
    budget: f64,
) -> Result<LossReport, EvalError> {
    let required = (hmm.d() as f64).powi(horizon as i32);
    if required > budget {
        return Err(EvalError::Budget { required, budget });
    }
    predictor.reset();
    let root = hmm.forward_filter(&[], truth_prior)?;
    let mut accs = vec![StepAcc::default(); horizon];
    walk_exact(hmm, predictor, &root, 0, horizon, 1.0, &mut accs)?;
    Ok(finish_report(accs, EvalMode::Exact, None))
}

fn walk_exact<P: SequencePredictor>(
    hmm: &Hmm,
    predictor: &mut P,
    belief: &BeliefState,
    depth: usize,
    horizon: usize,
    prob: f64,
    accs: &mut [StepAcc],
) -> Result<(), EvalError> {
    if depth >= horizon {
        return Ok(());
    }
    let p_opt = hmm.predict_next(belief);
    let q = predictor.predict()?;
    if q.len() != hmm.d() {
        return Err(EvalError::BadPrediction {
            got: q.len(),
            expected: hmm.d(),
        });
    }
    accumulate(&mut accs[depth], prob, &p_opt, &q)?;
    if depth + 1 < horizon {
        for z in 0..hmm.d() {
            if p_opt[z] <= 0.0 {
                continue;
            }
            let mut next = belief.clone();
            hmm.filter_step(&mut next, z, depth)?;
            predictor.push(z)?;
            let res = walk_exact(
                hmm,
                predictor,
                &next,
                depth + 1,
                horizon,
                prob * p_opt[z],
                accs,
            );
            predictor.pop();
            res?;
        }
    }
    Ok(())
}

/// Monte-Carlo estimate of the same expectations: averages per-step losses
/// over `trials` seeded trajectories and reports standard errors across
/// trials. Trial `i` runs on the derived seed `child_seed(seed, i)`.
pub fn evaluate_monte_carlo<P: SequencePredictor>(
    hmm: &Hmm,
    truth_prior: &[f64],
    predictor: &mut P,
    horizon: usize,
    trials: usize,
    seed: u64,
) -> Result<LossReport, EvalError> {
    if trials == 0 || horizon == 0 {
        return Ok(finish_report(
            vec![StepAcc::default(); horizon],
            EvalMode::MonteCarlo { trials },
            None,
        ));
    }
    let model = hmm.with_initial(truth_prior.to_vec())?;
    let mut accs = vec![StepAcc::default(); horizon];
    let mut trial_kl: Vec<f64> = Vec::with_capacity(trials);
    let mut kl_finite = true;
    let mut trial_l1: Vec<f64> = Vec::with_capacity(trials);
    let mut trial_rel: Vec<f64> = Vec::with_capacity(trials);
    let weight = 1.0 / trials as f64;
    for trial in 0..trials {
        let path = model.sample(horizon, child_seed(seed, trial as u64));
        predictor.reset();
        let mut belief = model.forward_filter(&[], truth_prior)?;
        let mut t_kl = 0.0;
        let mut t_l1 = 0.0;
        let mut t_rel = 0.0;
        for (t, &x) in path.observed.iter().enumerate() {
            let p_opt = model.predict_next(&belief);
            let q = predictor.predict()?;
            if q.len() != model.d() {
                return Err(EvalError::BadPrediction {
                    got: q.len(),
                    expected: model.d(),
                });
            }
            match kl(&p_opt, &q)? {
                KlValue::Finite(v) => {
                    accs[t].kl += weight * v;
                    t_kl += v;
                }
                KlValue::Infinite => {
                    accs[t].kl_infinite = true;
                    kl_finite = false;
                }
            }
            let dl1 = l1(&p_opt, &q)?;
            let drel = relative_zero_one(&p_opt, &q, &p_opt)?;
            accs[t].l1 += weight * dl1;
            accs[t].rel01 += weight * drel;
            t_l1 += dl1;
            t_rel += drel;
            if t + 1 < horizon {
                model.filter_step(&mut belief, x, t)?;
                predictor.push(x)?;
            }
        }
        let h = horizon as f64;
        trial_kl.push(t_kl / h);
        trial_l1.push(t_l1 / h);
        trial_rel.push(t_rel / h);
    }
    let stderr = LossStdErr {
        kl: if kl_finite {
            Some(stderr_of(&trial_kl))
        } else {
            None
        },
        l1: stderr_of(&trial_l1),
        rel01: stderr_of(&trial_rel),
    };
    Ok(finish_report(
        accs,
        EvalMode::MonteCarlo { trials },
        Some(stderr),
    ))
}

/// Sample standard error of the mean.
pub fn stderr_of(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (var / n).sqrt()
}
