//! Exact decomposition identities tying the loss pipeline to the
//! information-theoretic quantities, verified by a test-side enumeration
//! that is independent of the library's evaluators.

use myopic_core::hmm::{random_dense_hmm, Hmm};
use myopic_core::infotheory::{block_mutual_information, conditional_mi_decomposition};
use myopic_core::metrics::{kl, l1, KlValue};
use myopic_core::ngram::{ContextTable, Smoothing};

/// Walks every length-`horizon` observation sequence of the stationary
/// process and accumulates, per step, the expected KL and l1 losses of
/// three predictors at once: the full-history optimum, the order-`ell`
/// window optimum, and an arbitrary window-function predictor. Returns
/// `(delta(A), delta(P_ell), hat_delta(A))` for both losses.
#[allow(clippy::type_complexity)]
fn decomposition_terms(
    hmm: &Hmm,
    prior: &[f64],
    ell: usize,
    horizon: usize,
    window_predictor: &dyn Fn(&[usize]) -> Vec<f64>,
) -> ((f64, f64, f64), (f64, f64, f64)) {
    let d = hmm.d();
    let mut kl_terms = (0.0, 0.0, 0.0);
    let mut l1_terms = (0.0, 0.0, 0.0);
    let mut stack: Vec<(Vec<usize>, f64)> = vec![(Vec::new(), 1.0)];
    while let Some((prefix, prob)) = stack.pop() {
        let t = prefix.len();
        if t >= horizon {
            continue;
        }
        let belief = hmm.forward_filter(&prefix, prior).unwrap();
        let p_full = hmm.predict_next(&belief);
        let window_start = t.saturating_sub(ell);
        let window = &prefix[window_start..];
        let p_window = hmm.window_optimal_predict(prior, window).unwrap();
        let p_a = window_predictor(window);
        let w = prob / horizon as f64;
        kl_terms.0 += w * unwrap_kl(kl(&p_full, &p_a));
        kl_terms.1 += w * unwrap_kl(kl(&p_full, &p_window));
        kl_terms.2 += w * unwrap_kl(kl(&p_window, &p_a));
        l1_terms.0 += w * l1(&p_full, &p_a).unwrap();
        l1_terms.1 += w * l1(&p_full, &p_window).unwrap();
        l1_terms.2 += w * l1(&p_window, &p_a).unwrap();
        for z in 0..d {
            if p_full[z] <= 0.0 {
                continue;
            }
            let mut next = prefix.clone();
            next.push(z);
            stack.push((next, prob * p_full[z]));
        }
    }
    (kl_terms, l1_terms)
}

fn unwrap_kl(v: Result<KlValue, myopic_core::metrics::MetricsError>) -> f64 {
    v.unwrap().expect_finite("predictors are interior")
}

#[test]
fn kl_loss_splits_into_window_gap_plus_estimation_error() {
    // delta_KL(A) = delta_KL(P_ell) + hat_delta_KL(A), exactly, for any
    // predictor that is a function of the window.
    let raw = random_dense_hmm(3, 2, 77);
    let prior = raw.stationary_distribution(1e-12, 64).unwrap();
    let hmm = raw.with_initial(prior.clone()).unwrap();
    let ell = 2;
    // An arbitrary learned window predictor: smoothed counts from a short
    // sample stream.
    let mut table = ContextTable::new(ell, hmm.d());
    table.update(&hmm.sample(500, 7).observed).unwrap();
    let predictor = |window: &[usize]| -> Vec<f64> {
        if window.len() < ell {
            vec![1.0 / 2.0; 2]
        } else {
            table.predict_with(window, Smoothing::AddAlpha(0.5)).unwrap()
        }
    };
    let ((a_kl, p_kl, hat_kl), (a_l1, p_l1, hat_l1)) =
        decomposition_terms(&hmm, &prior, ell, 7, &predictor);
    assert!(
        (a_kl - (p_kl + hat_kl)).abs() < 1e-10,
        "KL decomposition: {a_kl} vs {p_kl} + {hat_kl}"
    );
    // The l1 version holds as a triangle inequality on every instance.
    assert!(a_l1 <= p_l1 + hat_l1 + 1e-12);
}

#[test]
fn l1_triangle_holds_across_predictors_and_orders() {
    let raw = random_dense_hmm(4, 2, 78);
    let prior = raw.stationary_distribution(1e-12, 64).unwrap();
    let hmm = raw.with_initial(prior.clone()).unwrap();
    for ell in [1usize, 2, 3] {
        let uniform = |_: &[usize]| vec![0.5, 0.5];
        let ((_, _, _), (a_l1, p_l1, hat_l1)) =
            decomposition_terms(&hmm, &prior, ell, 6, &uniform);
        assert!(
            a_l1 <= p_l1 + hat_l1 + 1e-12,
            "ell {ell}: {a_l1} > {p_l1} + {hat_l1}"
        );
    }
}

#[test]
fn window_kl_gap_equals_conditional_mutual_information() {
    // The per-step KL loss of the order-ell predictor against the order-L
    // reference is the conditional mutual information between the dropped
    // history and the next symbol; both routes must agree.
    let raw = random_dense_hmm(3, 2, 79);
    let prior = raw.stationary_distribution(1e-12, 64).unwrap();
    let hmm = raw.with_initial(prior.clone()).unwrap();
    let (ell, big_l) = (1usize, 4usize);
    let via_mi = conditional_mi_decomposition(&hmm, &prior, ell, big_l, big_l, 1e8).unwrap();
    // Independent route: direct expectation over length-L windows.
    let d = hmm.d();
    let mut gap = 0.0;
    let mut window = vec![0usize; big_l];
    'outer: loop {
        let belief = hmm.forward_filter(&window, &prior).unwrap();
        let w_prob = belief.log_likelihood.exp();
        if w_prob > 0.0 {
            let p_long = hmm.predict_next(&belief);
            let p_short = hmm
                .window_optimal_predict(&prior, &window[big_l - ell..])
                .unwrap();
            gap += w_prob * unwrap_kl(kl(&p_long, &p_short));
        }
        let mut pos = 0;
        loop {
            if pos == big_l {
                break 'outer;
            }
            window[pos] += 1;
            if window[pos] < d {
                break;
            }
            window[pos] = 0;
            pos += 1;
        }
    }
    assert!(
        (via_mi - gap).abs() < 1e-10,
        "conditional MI {via_mi} vs KL gap {gap}"
    );
}

#[test]
fn per_step_window_gaps_average_below_block_information_rate() {
    // Averaging the conditional-MI decomposition over a block of ell steps
    // stays below I(past; block) / ell.
    let raw = random_dense_hmm(3, 2, 80);
    let prior = raw.stationary_distribution(1e-12, 64).unwrap();
    let hmm = raw.with_initial(prior.clone()).unwrap();
    let ell = 2usize;
    let tau = 3usize;
    let block =
        block_mutual_information(&hmm, &prior, tau, ell, 1e8).unwrap().value;
    let mut total = 0.0;
    for t in tau..tau + ell {
        total += conditional_mi_decomposition(&hmm, &prior, ell, t, t, 1e8).unwrap();
    }
    let avg = total / ell as f64;
    assert!(
        avg <= block / ell as f64 + 1e-12,
        "average gap {avg} vs block rate {}",
        block / ell as f64
    );
}
