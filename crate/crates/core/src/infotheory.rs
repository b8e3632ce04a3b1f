//! Exact entropies and the mutual information between past and future
//! observation blocks, by enumeration over observation sequences.

use thiserror::Error;

use crate::hmm::{BeliefState, Hmm, HmmError};

#[derive(Debug, Error)]
pub enum InfoError {
    #[error("exact enumeration needs {required:.3e} sequences, over the budget of {budget:.3e}")]
    Budget { required: f64, budget: f64 },
    #[error(transparent)]
    Hmm(#[from] HmmError),
    #[error("window lengths invalid: ell = {ell} must satisfy ell <= history_len <= t ({history_len}, {t})")]
    BadWindows { ell: usize, history_len: usize, t: usize },
}

/// Shannon entropy `-sum p ln p` in nats, with `0 ln 0 = 0`.
pub fn entropy(p: &[f64]) -> f64 {
    p.iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| -x * x.ln())
        .sum()
}

/// An exactly enumerated block mutual information value.
#[derive(Debug, Clone)]
pub struct MiEstimate {
    pub value: f64,
    pub past_len: usize,
    pub future_len: usize,
    pub enumeration_size: u128,
}

impl MiEstimate {
    pub fn method(&self) -> &'static str {
        "exact-enumeration"
    }
}

/// I(past block; future block) for a window of `past_len + future_len`
/// observations emitted by the model started from `prior`. Computed as
/// `H(past) + H(future) - H(joint)` with every term enumerated exactly.
pub fn block_mutual_information(
    hmm: &Hmm,
    prior: &[f64],
    past_len: usize,
    future_len: usize,
    budget: f64,
) -> Result<MiEstimate, InfoError> {
    let total = past_len + future_len;
    let required = (hmm.d() as f64).powi(total as i32);
    if required > budget {
        return Err(InfoError::Budget { required, budget });
    }
    let enumeration_size = (hmm.d() as u128).pow(total as u32);
    if past_len == 0 || future_len == 0 {
        return Ok(MiEstimate {
            value: 0.0,
            past_len,
            future_len,
            enumeration_size,
        });
    }
    let root = hmm.forward_filter(&[], prior)?;
    let mut future_marginal = vec![0.0; hmm.d().pow(future_len as u32)];
    let mut h_past = 0.0;
    let mut h_joint = 0.0;
    let mut path = Vec::with_capacity(total);
    walk_blocks(
        hmm,
        &root,
        1.0,
        past_len,
        total,
        &mut path,
        &mut h_past,
        &mut h_joint,
        &mut future_marginal,
    )?;
    let h_future = entropy(&future_marginal);
    let value = (h_past + h_future - h_joint).max(0.0);
    Ok(MiEstimate {
        value,
        past_len,
        future_len,
        enumeration_size,
    })
}

#[allow(clippy::too_many_arguments)]
fn walk_blocks(
    hmm: &Hmm,
    belief: &BeliefState,
    prob: f64,
    past_len: usize,
    total: usize,
    path: &mut Vec<usize>,
    h_past: &mut f64,
    h_joint: &mut f64,
    future_marginal: &mut [f64],
) -> Result<(), InfoError> {
    let depth = path.len();
    if depth == past_len && prob > 0.0 {
        *h_past -= prob * prob.ln();
    }
    if depth == total {
        if prob > 0.0 {
            *h_joint -= prob * prob.ln();
            let mut idx = 0usize;
            for &z in &path[past_len..] {
                idx = idx * hmm.d() + z;
            }
            future_marginal[idx] += prob;
        }
        return Ok(());
    }
    let next_symbol = hmm.predict_next(belief);
    for z in 0..hmm.d() {
        if next_symbol[z] <= 0.0 {
            continue;
        }
        let mut nb = belief.clone();
        hmm.filter_step(&mut nb, z, depth)?;
        path.push(z);
        let res = walk_blocks(
            hmm,
            &nb,
            prob * next_symbol[z],
            past_len,
            total,
            path,
            h_past,
            h_joint,
            future_marginal,
        );
        path.pop();
        res?;
    }
    Ok(())
}

/// The conditional mutual information
/// `I(x_{t-L}..x_{t-ell-1} ; x_t | x_{t-ell}..x_{t-1})` for the model
/// started from `prior`, computed by exact enumeration of `x_0..x_t`.
/// This equals the per-step KL gap between the order-`L` and order-`ell`
/// optimal window predictors at time `t`.
pub fn conditional_mi_decomposition(
    hmm: &Hmm,
    prior: &[f64],
    ell: usize,
    history_len: usize,
    t: usize,
    budget: f64,
) -> Result<f64, InfoError> {
    if ell > history_len || history_len > t {
        return Err(InfoError::BadWindows {
            ell,
            history_len,
            t,
        });
    }
    let required = (hmm.d() as f64).powi((t + 1) as i32);
    if required > budget {
        return Err(InfoError::Budget { required, budget });
    }
    if ell == history_len {
        return Ok(0.0);
    }
    let d = hmm.d();
    // Joint tables over (window, next symbol) for both window lengths.
    let mut long_table = vec![0.0; d.pow((history_len + 1) as u32)];
    let mut short_table = vec![0.0; d.pow((ell + 1) as u32)];
    let root = hmm.forward_filter(&[], prior)?;
    let mut path = Vec::with_capacity(t + 1);
    walk_windows(
        hmm,
        &root,
        1.0,
        t + 1,
        history_len + 1,
        ell + 1,
        &mut path,
        &mut long_table,
        &mut short_table,
    )?;
    let h_z_given_long = entropy(&long_table) - entropy(&marginalize_last(&long_table, d));
    let h_z_given_short = entropy(&short_table) - entropy(&marginalize_last(&short_table, d));
    Ok((h_z_given_short - h_z_given_long).max(0.0))
}

fn marginalize_last(table: &[f64], d: usize) -> Vec<f64> {
    let mut out = vec![0.0; table.len() / d];
    for (i, &p) in table.iter().enumerate() {
        out[i / d] += p;
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn walk_windows(
    hmm: &Hmm,
    belief: &BeliefState,
    prob: f64,
    total: usize,
    long_len: usize,
    short_len: usize,
    path: &mut Vec<usize>,
    long_table: &mut [f64],
    short_table: &mut [f64],
) -> Result<(), InfoError> {
    let depth = path.len();
    if depth == total {
        if prob > 0.0 {
            long_table[suffix_index(path, long_len, hmm.d())] += prob;
            short_table[suffix_index(path, short_len, hmm.d())] += prob;
        }
        return Ok(());
    }
    let next_symbol = hmm.predict_next(belief);
    for z in 0..hmm.d() {
        if next_symbol[z] <= 0.0 {
            continue;
        }
        let mut nb = belief.clone();
        hmm.filter_step(&mut nb, z, depth)?;
        path.push(z);
        let res = walk_windows(
            hmm,
            &nb,
            prob * next_symbol[z],
            total,
            long_len,
            short_len,
            path,
            long_table,
            short_table,
        );
        path.pop();
        res?;
    }
    Ok(())
}

fn suffix_index(path: &[usize], len: usize, d: usize) -> usize {
    let mut idx = 0usize;
    for &z in &path[path.len() - len..] {
        idx = idx * d + z;
    }
    idx
}

/// Truncation profile of the block mutual information: `I_L` with past and
/// future blocks both of length `L`, for `L = 1..=max_len`, stopping as
/// converged once consecutive values agree within `tol`.
#[derive(Debug, Clone)]
pub struct MiConvergence {
    pub profile: Vec<MiEstimate>,
    pub value: f64,
    pub converged: bool,
    pub tol: f64,
}

pub fn converged_mutual_information(
    hmm: &Hmm,
    prior: &[f64],
    tol: f64,
    max_len: usize,
    budget: f64,
) -> Result<MiConvergence, InfoError> {
    let mut profile: Vec<MiEstimate> = Vec::new();
    for len in 1..=max_len {
        let est = block_mutual_information(hmm, prior, len, len, budget)?;
        let done = profile
            .last()
            .map(|prev| (est.value - prev.value).abs() <= tol)
            .unwrap_or(false);
        profile.push(est);
        if done {
            let value = profile.last().unwrap().value;
            return Ok(MiConvergence {
                profile,
                value,
                converged: true,
                tol,
            });
        }
    }
    let value = profile.last().map(|e| e.value).unwrap_or(0.0);
    Ok(MiConvergence {
        profile,
        value,
        converged: false,
        tol,
    })
}
