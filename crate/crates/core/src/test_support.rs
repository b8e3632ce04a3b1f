//! Test-only oracles, kept independent of the implementation paths they
//! check: everything here works by brute-force enumeration over hidden
//! paths or observation sequences.

use crate::hmm::Hmm;

pub(crate) fn random_hmm(n: usize, d: usize, seed: u64) -> Hmm {
    crate::hmm::random_dense_hmm(n, d, seed)
}

/// Unnormalized weight of one hidden path given the observations it emits.
fn path_weight(h: &Hmm, path: &[usize], prefix: &[usize], prior: &[f64]) -> f64 {
    let mut w = prior[path[0]];
    for (t, &sym) in prefix.iter().enumerate() {
        w *= h.emission_row(path[t])[sym];
        w *= h.transition_row(path[t])[path[t + 1]];
    }
    w
}

/// Posterior over the state at time `prefix.len()` (the one that emits the
/// next symbol) and `log P(prefix)`, by summing over all n^(L+1) hidden
/// paths.
pub(crate) fn enumerate_belief(h: &Hmm, prefix: &[usize], prior: &[f64]) -> (Vec<f64>, f64) {
    let n = h.n();
    let len = prefix.len() + 1;
    let mut weights = vec![0.0; n];
    let mut total = 0.0;
    let mut path = vec![0usize; len];
    loop {
        let w = path_weight(h, &path, prefix, prior);
        weights[path[len - 1]] += w;
        total += w;
        // Odometer over hidden paths.
        let mut pos = 0;
        loop {
            if pos == len {
                let norm: Vec<f64> = weights.iter().map(|x| x / total).collect();
                return (norm, total.ln());
            }
            path[pos] += 1;
            if path[pos] < n {
                break;
            }
            path[pos] = 0;
            pos += 1;
        }
    }
}

/// Probability of an observation sequence under the model started from
/// `prior`, by the same path enumeration.
pub(crate) fn enumerate_sequence_probability(h: &Hmm, seq: &[usize], prior: &[f64]) -> f64 {
    if seq.is_empty() {
        return 1.0;
    }
    let n = h.n();
    let len = seq.len();
    let mut total = 0.0;
    let mut path = vec![0usize; len];
    loop {
        let mut w = prior[path[0]];
        for t in 0..len {
            w *= h.emission_row(path[t])[seq[t]];
            if t + 1 < len {
                w *= h.transition_row(path[t])[path[t + 1]];
            }
        }
        total += w;
        let mut pos = 0;
        loop {
            if pos == len {
                return total;
            }
            path[pos] += 1;
            if path[pos] < n {
                break;
            }
            path[pos] = 0;
            pos += 1;
        }
    }
}
