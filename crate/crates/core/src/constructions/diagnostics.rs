//! Posterior-odds diagnostics: tracks the log odds of the true initial
//! hidden state along a sampled trajectory together with the per-step
//! prediction gap between the state-informed oracle and the mixture
//! predictor. In expectation the odds grow by at least half the squared
//! gap per step, which the Monte-Carlo harness checks.

use super::ConstructionError;
use crate::hmm::{BeliefState, Hmm};
use crate::metrics::l1;

/// One step of the trace: `delta` is the prediction gap for the symbol at
/// time `s` (computed before observing it), `log_odds` the posterior log
/// odds of the true start state after observing it. `log_odds` is
/// `f64::INFINITY` when the observation ruled out every other start state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OddsStep {
    pub s: usize,
    pub log_odds: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OddsTrace {
    pub h0: usize,
    pub seed: u64,
    pub steps: Vec<OddsStep>,
    /// Set when a zero-likelihood event ended the trace early.
    pub truncated: bool,
}

/// Runs one trajectory of `horizon` steps started at hidden state `h0` and
/// returns, per step, the log posterior odds of `h0` under the
/// prior-conditioned filter and the exact `l1` gap between the
/// state-informed prediction and the mixture prediction.
pub fn posterior_odds_trace(
    hmm: &Hmm,
    h0: usize,
    horizon: usize,
    seed: u64,
) -> Result<OddsTrace, ConstructionError> {
    let n = hmm.n();
    if h0 >= n {
        return Err(ConstructionError::BadSpec(format!(
            "state {h0} out of range for {n} states"
        )));
    }
    let prior = hmm.initial();
    if prior[h0] <= 0.0 {
        return Err(ConstructionError::ZeroPriorMass { state: h0 });
    }
    let rest_mass = 1.0 - prior[h0];
    if rest_mass <= 0.0 {
        return Err(ConstructionError::BadSpec(
            "prior puts all mass on the start state; odds are undefined".into(),
        ));
    }
    let path = hmm.sample_from_state(h0, horizon, seed)?;

    // Two conditional filters: started at h0, and started from the prior
    // restricted to the complement of h0.
    let mut informed = BeliefState::indicator(n, h0)?;
    let mut rest_weights: Vec<f64> = prior.iter().map(|&p| p / rest_mass).collect();
    rest_weights[h0] = 0.0;
    // Renormalize the complement exactly.
    let s: f64 = rest_weights.iter().sum();
    for w in rest_weights.iter_mut() {
        *w /= s;
    }
    let mut rest = BeliefState::new(rest_weights, 0.0)?;

    let mut log_odds = (prior[h0] / rest_mass).ln();
    let mut u = prior[h0];
    let mut steps = Vec::with_capacity(horizon);
    for (s, &x) in path.observed.iter().enumerate() {
        let p = hmm.predict_next(&informed);
        let q = hmm.predict_next(&rest);
        // Mixture prediction of the prior-conditioned filter.
        let mixture: Vec<f64> = p
            .iter()
            .zip(q.iter())
            .map(|(&a, &b)| u * a + (1.0 - u) * b)
            .collect();
        let delta = l1(&p, &mixture).expect("dims match");
        if q[x] <= 0.0 {
            // The observation is impossible unless the chain started at h0.
            steps.push(OddsStep {
                s,
                log_odds: f64::INFINITY,
                delta,
            });
            return Ok(OddsTrace {
                h0,
                seed,
                steps,
                truncated: true,
            });
        }
        log_odds += p[x].ln() - q[x].ln();
        u = u * p[x] / (u * p[x] + (1.0 - u) * q[x]);
        steps.push(OddsStep {
            s,
            log_odds,
            delta,
        });
        if s + 1 < horizon {
            hmm.filter_step(&mut informed, x, s)?;
            hmm.filter_step(&mut rest, x, s)?;
        }
    }
    Ok(OddsTrace {
        h0,
        seed,
        steps,
        truncated: false,
    })
}
