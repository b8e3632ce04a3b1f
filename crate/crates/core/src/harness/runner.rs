//! Model builders and the four experiment commands behind the CLI.
//!
//! Seed discipline: every sweep cell with index `i` works from
//! `child_seed(master, i)` and derives its own sub-streams from that, so
//! any cell can be reproduced in isolation and parallel execution cannot
//! perturb results. Model generation uses the dedicated stream `1 << 32`.

use rayon::prelude::*;
use serde::Serialize;

use super::config::{parse_bits, ExperimentConfig, Mode, ModelSpec};
use super::csv::{format_value, Row};
use super::HarnessError;
use crate::codes::{find_code_with_dual_distance, BinaryMatrix};
use crate::constructions::{
    build_cycle_hmm, build_permutation_hmm, compile_parity_to_hmm, parity_sample_block_with,
    sample_full_row_rank_matrix, window_loss_vs_reference, CspModel, CspModelSpec,
    ParityModelSpec, PermutationLabelSpec,
};
use crate::hmm::{random_dense_hmm, Hmm};
use crate::infotheory::{converged_mutual_information, MiConvergence};
use crate::metrics::{
    evaluate_exact, evaluate_monte_carlo, kl, l1, relative_zero_one, stderr_of, LossReport,
    NgramPredictor, WindowOptimalPredictor,
};
use crate::ngram::{ContextCarry, ContextTable, Smoothing};
use crate::seeds::child_seed;

const MODEL_GEN_STREAM: u64 = 1 << 32;
const BOUND_TOL: f64 = 1e-9;
const MI_TOL: f64 = 1e-6;
const STATE_BUDGET: usize = 2048;

/// A model instantiated from the config, with its derived identifier.
pub enum BuiltModel {
    Hmm { id: String, hmm: Hmm },
    Permutation {
        id: String,
        spec: PermutationLabelSpec,
        hmm: Hmm,
    },
    Parity { id: String, spec: ParityModelSpec },
    Csp { id: String, model: CspModel },
}

impl BuiltModel {
    pub fn id(&self) -> &str {
        match self {
            BuiltModel::Hmm { id, .. } => id,
            BuiltModel::Permutation { id, .. } => id,
            BuiltModel::Parity { id, .. } => id,
            BuiltModel::Csp { id, .. } => id,
        }
    }
}

fn parse_matrix_rows(rows: &[String]) -> Result<BinaryMatrix, HarnessError> {
    BinaryMatrix::parse_text(&rows.join("\n")).map_err(HarnessError::Codes)
}

pub fn build_model(cfg: &ExperimentConfig) -> Result<BuiltModel, HarnessError> {
    let gen_seed = child_seed(cfg.seed, MODEL_GEN_STREAM);
    let override_id = cfg.model_id.clone();
    let built = match &cfg.model {
        ModelSpec::HmmFile { path } => {
            let text = std::fs::read_to_string(path)?;
            let hmm = Hmm::from_json(&text)?;
            let id = override_id.unwrap_or_else(|| {
                std::path::Path::new(path)
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "hmm-file".into())
            });
            BuiltModel::Hmm { id, hmm }
        }
        ModelSpec::Hmm {
            n,
            d,
            transition,
            emission,
            initial,
        } => {
            let hmm = Hmm::new(
                *n,
                *d,
                transition.iter().flatten().copied().collect(),
                emission.iter().flatten().copied().collect(),
                initial.clone(),
            )?;
            BuiltModel::Hmm {
                id: override_id.unwrap_or_else(|| format!("hmm-n{n}-d{d}")),
                hmm,
            }
        }
        ModelSpec::Cycle { bits } => {
            let bits = parse_bits(bits)?;
            let hmm = build_cycle_hmm(&bits)?;
            BuiltModel::Hmm {
                id: override_id.unwrap_or_else(|| format!("cycle-n{}", bits.len())),
                hmm,
            }
        }
        ModelSpec::Permutation { labels, eps } => {
            let labels = parse_bits(labels)?;
            let n = labels.len();
            let spec = PermutationLabelSpec::new(labels, *eps)?;
            let hmm = build_permutation_hmm(&spec)?;
            BuiltModel::Permutation {
                id: override_id.unwrap_or_else(|| format!("perm-n{n}-eps{eps}")),
                spec,
                hmm,
            }
        }
        ModelSpec::RandomHmm { n, d } => {
            let raw = random_dense_hmm(*n, *d, gen_seed);
            let stationary = raw.stationary_distribution(1e-12, 64)?;
            let hmm = raw.with_initial(stationary)?;
            BuiltModel::Hmm {
                id: override_id.unwrap_or_else(|| format!("random-hmm-n{n}-d{d}-s{}", cfg.seed)),
                hmm,
            }
        }
        ModelSpec::Parity { n, m, eta, matrix } => {
            let a = match matrix {
                Some(rows) => parse_matrix_rows(rows)?,
                None => sample_full_row_rank_matrix(*m, *n, gen_seed)?.0,
            };
            let spec = ParityModelSpec::new(*n, *m, a, *eta)?;
            BuiltModel::Parity {
                id: override_id.unwrap_or_else(|| format!("parity-n{n}-m{m}")),
                spec,
            }
        }
        ModelSpec::Csp {
            n,
            k,
            m,
            eta,
            matrix,
            sigma,
            certified_t,
        } => {
            let a = match matrix {
                Some(rows) => parse_matrix_rows(rows)?,
                None if *certified_t > 0 => {
                    find_code_with_dual_distance(*k, *m, certified_t + 1, 100_000, gen_seed)?
                        .matrix
                }
                None => sample_full_row_rank_matrix(*m, *k, gen_seed)?.0,
            };
            let sigma = match sigma {
                Some(bits) => parse_bits(bits)?,
                None => {
                    use rand::{Rng, SeedableRng};
                    let mut rng =
                        rand_chacha::ChaCha8Rng::seed_from_u64(child_seed(gen_seed, 1));
                    (0..*n).map(|_| rng.random::<bool>() as u8).collect()
                }
            };
            let spec = CspModelSpec::new(*n, *k, *m, a, sigma, *eta, *certified_t)?;
            BuiltModel::Csp {
                id: override_id.unwrap_or_else(|| format!("csp-n{n}-k{k}-m{m}")),
                model: CspModel::new(spec)?,
            }
        }
    };
    Ok(built)
}

/// The filterable HMM behind a built model; parity models are compiled,
/// CSP models are sampling-only.
fn hmm_of(built: &BuiltModel) -> Result<(String, Hmm), HarnessError> {
    match built {
        BuiltModel::Hmm { id, hmm } => Ok((id.clone(), hmm.clone())),
        BuiltModel::Permutation { id, hmm, .. } => Ok((id.clone(), hmm.clone())),
        BuiltModel::Parity { id, spec } => {
            Ok((id.clone(), compile_parity_to_hmm(spec, STATE_BUDGET)?))
        }
        BuiltModel::Csp { .. } => Err(HarnessError::Config(
            "csp models are sampling-only; use the distinguish command".into(),
        )),
    }
}

fn mi_for_bounds(hmm: &Hmm, prior: &[f64], budget: f64) -> Option<MiConvergence> {
    let d = hmm.d() as f64;
    let mut max_len = 0usize;
    while max_len < 10 && d.powi(2 * (max_len + 1) as i32) <= budget {
        max_len += 1;
    }
    if max_len < 2 {
        return None;
    }
    converged_mutual_information(hmm, prior, MI_TOL, max_len, budget).ok()
}

fn push_report_rows(
    rows: &mut Vec<Row>,
    model_id: &str,
    seed: u64,
    ell: usize,
    horizon: usize,
    predictor: &str,
    report: &LossReport,
    bounds: Option<(f64, f64)>,
) {
    let (kl_bound, l1_bound) = match bounds {
        Some((k, l)) => (format_value(k), format_value(l)),
        None => (String::new(), String::new()),
    };
    let stderr = report.stderr.as_ref();
    let entries = [
        (
            "kl",
            report
                .averages
                .kl
                .finite()
                .map(format_value)
                .unwrap_or_else(|| "inf".into()),
            stderr
                .and_then(|s| s.kl)
                .map(format_value)
                .unwrap_or_default(),
        ),
        (
            "l1",
            format_value(report.averages.l1),
            stderr.map(|s| format_value(s.l1)).unwrap_or_default(),
        ),
        (
            "rel01",
            format_value(report.averages.rel01),
            stderr.map(|s| format_value(s.rel01)).unwrap_or_default(),
        ),
    ];
    for (metric, value, se) in entries {
        rows.push(Row {
            model_id: model_id.into(),
            seed,
            ell,
            horizon,
            predictor: predictor.into(),
            metric: metric.into(),
            value,
            stderr: se,
            kl_bound: kl_bound.clone(),
            l1_bound: l1_bound.clone(),
        });
    }
}

/// Trains an order-`ell` table on one sampled stream of the model.
fn train_table(
    hmm: &Hmm,
    ell: usize,
    train_len: usize,
    seed: u64,
) -> Result<ContextTable, HarnessError> {
    let mut table = ContextTable::new(ell, hmm.d());
    let path = hmm.sample(train_len, seed);
    table.update(&path.observed)?;
    Ok(table)
}

/// Window-length sweep: scores the optimal window predictor and a learned
/// n-gram table at every `(ell, horizon)` cell, with `I/ell` and
/// `sqrt(I/2 ell)` reference columns whenever the block mutual information
/// converged within budget.
pub fn sweep_window(cfg: &ExperimentConfig) -> Result<Vec<Row>, HarnessError> {
    if cfg.ells.is_empty() || cfg.horizons.is_empty() {
        return Err(HarnessError::Config(
            "sweep-window needs non-empty ells and horizons".into(),
        ));
    }
    let built = build_model(cfg)?;
    let (id, hmm) = hmm_of(&built)?;
    if cfg.mode == Mode::Exact {
        let worst = (hmm.d() as f64).powi(*cfg.horizons.iter().max().unwrap() as i32);
        if worst > cfg.budget() {
            return Err(HarnessError::Budget {
                required: worst,
                budget: cfg.budget(),
            });
        }
    }
    let stationary = hmm.stationary_distribution(1e-12, 64)?;
    let mi = mi_for_bounds(&hmm, &stationary, cfg.budget()).filter(|c| c.converged);
    let cells: Vec<(usize, usize, usize)> = cfg
        .ells
        .iter()
        .enumerate()
        .flat_map(|(i, &ell)| {
            cfg.horizons
                .iter()
                .enumerate()
                .map(move |(j, &t)| (i * cfg.horizons.len() + j, ell, t))
        })
        .collect();
    let cell_rows: Result<Vec<Vec<Row>>, HarnessError> = cells
        .par_iter()
        .map(|&(idx, ell, horizon)| {
            let cell_seed = child_seed(cfg.seed, idx as u64);
            let bounds = mi
                .as_ref()
                .map(|c| (c.value / ell as f64, (c.value / (2.0 * ell as f64)).sqrt()));
            let mut rows = Vec::new();
            let mut wopt = WindowOptimalPredictor::new(&hmm, &stationary, ell);
            let report = match cfg.mode {
                Mode::Exact => {
                    evaluate_exact(&hmm, hmm.initial(), &mut wopt, horizon, cfg.budget())?
                }
                Mode::Mc => evaluate_monte_carlo(
                    &hmm,
                    hmm.initial(),
                    &mut wopt,
                    horizon,
                    cfg.trials,
                    child_seed(cell_seed, 1),
                )?,
            };
            push_report_rows(
                &mut rows,
                &id,
                cfg.seed,
                ell,
                horizon,
                "window-optimal",
                &report,
                bounds,
            );
            let table = train_table(&hmm, ell, cfg.train_len(), child_seed(cell_seed, 0))?;
            let mut ngram = NgramPredictor::new(&table, Smoothing::Empirical);
            let report = match cfg.mode {
                Mode::Exact => {
                    evaluate_exact(&hmm, hmm.initial(), &mut ngram, horizon, cfg.budget())?
                }
                Mode::Mc => evaluate_monte_carlo(
                    &hmm,
                    hmm.initial(),
                    &mut ngram,
                    horizon,
                    cfg.trials,
                    child_seed(cell_seed, 2),
                )?,
            };
            push_report_rows(&mut rows, &id, cfg.seed, ell, horizon, "ngram", &report, bounds);
            Ok(rows)
        })
        .collect();
    let mut rows: Vec<Row> = cell_rows?.into_iter().flatten().collect();
    // For permutation models, also report the exact single-step losses of
    // the window predictor with and without the phase-residue side channel,
    // measured against a long-window reference.
    if let BuiltModel::Permutation { spec, .. } = &built {
        if cfg.side_information {
            for &ell in &cfg.ells {
                let ref_len = cfg.ref_len.unwrap_or((2 * ell + 6).min(20)).max(ell);
                for (name, informed) in [
                    ("window-optimal-plain", false),
                    ("window-optimal-informed", true),
                ] {
                    let loss = window_loss_vs_reference(spec, ell, ref_len, informed)?;
                    for (metric, value) in [
                        ("kl", loss.kl),
                        ("l1", loss.l1),
                        ("rel01", loss.rel01),
                    ] {
                        rows.push(Row {
                            model_id: id.clone(),
                            seed: cfg.seed,
                            ell,
                            horizon: ref_len,
                            predictor: name.into(),
                            metric: metric.into(),
                            value: format_value(value),
                            stderr: String::new(),
                            kl_bound: String::new(),
                            l1_bound: String::new(),
                        });
                    }
                }
            }
        }
    }
    Ok(rows)
}

/// Sample-size sweep following the single-stream protocol: one trajectory
/// of length `T` per cell, `trials` evaluation times drawn uniformly (with
/// replacement) from `{1..T}`, the table always trained on the prefix
/// strictly before the evaluation point.
pub fn sweep_samples(cfg: &ExperimentConfig) -> Result<Vec<Row>, HarnessError> {
    if cfg.mode != Mode::Mc {
        return Err(HarnessError::Config(
            "sweep-samples is a monte-carlo command; set mode = mc".into(),
        ));
    }
    if cfg.ells.is_empty() || cfg.horizons.is_empty() {
        return Err(HarnessError::Config(
            "sweep-samples needs non-empty ells and horizons".into(),
        ));
    }
    let built = build_model(cfg)?;
    let (id, hmm) = hmm_of(&built)?;
    let cells: Vec<(usize, usize, usize)> = cfg
        .ells
        .iter()
        .enumerate()
        .flat_map(|(i, &ell)| {
            cfg.horizons
                .iter()
                .enumerate()
                .map(move |(j, &t)| (i * cfg.horizons.len() + j, ell, t))
        })
        .collect();
    let cell_rows: Result<Vec<Vec<Row>>, HarnessError> = cells
        .par_iter()
        .map(|&(idx, ell, horizon)| {
            let cell_seed = child_seed(cfg.seed, idx as u64);
            let losses = sample_sweep_cell(&hmm, ell, horizon, cfg.trials, cell_seed)?;
            let mut rows = Vec::new();
            for (metric, values) in losses {
                let mean = values.iter().sum::<f64>() / values.len() as f64;
                rows.push(Row {
                    model_id: id.clone(),
                    seed: cfg.seed,
                    ell,
                    horizon,
                    predictor: "ngram".into(),
                    metric: metric.into(),
                    value: if mean.is_finite() {
                        format_value(mean)
                    } else {
                        "inf".into()
                    },
                    stderr: if mean.is_finite() {
                        format_value(stderr_of(&values))
                    } else {
                        String::new()
                    },
                    kl_bound: String::new(),
                    l1_bound: String::new(),
                });
            }
            Ok(rows)
        })
        .collect();
    Ok(cell_rows?.into_iter().flatten().collect())
}

/// Per-evaluation-time losses at uniformly random times on one stream.
fn sample_sweep_cell(
    hmm: &Hmm,
    ell: usize,
    horizon: usize,
    trials: usize,
    cell_seed: u64,
) -> Result<Vec<(&'static str, Vec<f64>)>, HarnessError> {
    use rand::{Rng, SeedableRng};
    let path = hmm.sample(horizon + 1, child_seed(cell_seed, 0));
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(child_seed(cell_seed, 1));
    let mut times: Vec<usize> = (0..trials)
        .map(|_| 1 + (rng.random::<u64>() % horizon as u64) as usize)
        .collect();
    times.sort_unstable();
    let mut kl_losses = Vec::with_capacity(trials);
    let mut l1_losses = Vec::with_capacity(trials);
    let mut rel_losses = Vec::with_capacity(trials);
    let mut belief = hmm.forward_filter(&[], hmm.initial())?;
    let mut table = ContextTable::new(ell, hmm.d());
    let mut carry = ContextCarry::default();
    let mut next_time = 0usize;
    for t in 0..=horizon {
        while next_time < times.len() && times[next_time] == t {
            let p_opt = hmm.predict_next(&belief);
            let q = if t < ell {
                vec![1.0 / hmm.d() as f64; hmm.d()]
            } else {
                table.predict(&path.observed[t - ell..t])?
            };
            kl_losses.push(match kl(&p_opt, &q).expect("dims match") {
                crate::metrics::KlValue::Finite(v) => v,
                crate::metrics::KlValue::Infinite => f64::INFINITY,
            });
            l1_losses.push(l1(&p_opt, &q).expect("dims match"));
            rel_losses.push(relative_zero_one(&p_opt, &q, &p_opt).expect("dims match"));
            next_time += 1;
        }
        if t < horizon {
            let x = path.observed[t];
            hmm.filter_step(&mut belief, x, t)?;
            table.update_chunk(&mut carry, &[x])?;
        }
    }
    Ok(vec![
        ("kl", kl_losses),
        ("l1", l1_losses),
        ("rel01", rel_losses),
    ])
}

#[derive(Debug, Clone, Serialize)]
pub struct MiSummary {
    pub value: f64,
    pub converged: bool,
    pub levels: usize,
    pub last_delta: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundCheck {
    pub ell: usize,
    pub horizon: usize,
    pub delta_kl: f64,
    pub kl_bound: f64,
    pub kl_margin: f64,
    pub delta_l1: f64,
    pub l1_bound: f64,
    pub l1_margin: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundsReport {
    pub model_id: String,
    pub mi: MiSummary,
    /// Set when the mutual information did not converge; no verdicts then.
    pub inconclusive: bool,
    pub checks: Vec<BoundCheck>,
    pub all_pass: bool,
}

/// Verifies `delta_KL(P_ell) <= I/ell` and `delta_l1(P_ell) <= sqrt(I/2ell)`
/// for every configured window length, on the stationary version of the
/// model, with exact evaluation over a horizon rounded down to a multiple
/// of each `ell`.
pub fn verify_bounds(cfg: &ExperimentConfig) -> Result<BoundsReport, HarnessError> {
    if cfg.mode != Mode::Exact {
        return Err(HarnessError::Config(
            "verify-bounds is exact-only; set mode = exact".into(),
        ));
    }
    if cfg.ells.is_empty() || cfg.horizons.is_empty() {
        return Err(HarnessError::Config(
            "verify-bounds needs non-empty ells and horizons".into(),
        ));
    }
    let built = build_model(cfg)?;
    let (id, base) = hmm_of(&built)?;
    let stationary = base.stationary_distribution(1e-12, 64)?;
    let hmm = base.with_initial(stationary.clone())?;
    let horizon = cfg.horizons[0];
    let worst = (hmm.d() as f64).powi(horizon as i32);
    if worst > cfg.budget() {
        return Err(HarnessError::Budget {
            required: worst,
            budget: cfg.budget(),
        });
    }
    let mi = mi_for_bounds(&hmm, &stationary, cfg.budget());
    let summary = match &mi {
        Some(c) => {
            let last_delta = if c.profile.len() >= 2 {
                (c.profile[c.profile.len() - 1].value - c.profile[c.profile.len() - 2].value)
                    .abs()
            } else {
                f64::NAN
            };
            MiSummary {
                value: c.value,
                converged: c.converged,
                levels: c.profile.len(),
                last_delta,
                tol: c.tol,
            }
        }
        None => MiSummary {
            value: f64::NAN,
            converged: false,
            levels: 0,
            last_delta: f64::NAN,
            tol: MI_TOL,
        },
    };
    if !summary.converged {
        return Ok(BoundsReport {
            model_id: id,
            mi: summary,
            inconclusive: true,
            checks: Vec::new(),
            all_pass: false,
        });
    }
    let i_value = summary.value;
    let checks: Result<Vec<BoundCheck>, HarnessError> = cfg
        .ells
        .par_iter()
        .map(|&ell| {
            // Full blocks only: the bound averages block-aligned windows.
            let h = (horizon / ell).max(1) * ell;
            let mut wopt = WindowOptimalPredictor::new(&hmm, &stationary, ell);
            let report = evaluate_exact(&hmm, hmm.initial(), &mut wopt, h, cfg.budget())?;
            let delta_kl = report
                .averages
                .kl
                .expect_finite("window predictor shares the model's support");
            let delta_l1 = report.averages.l1;
            let kl_bound = i_value / ell as f64;
            let l1_bound = (i_value / (2.0 * ell as f64)).sqrt();
            let pass =
                delta_kl <= kl_bound + BOUND_TOL && delta_l1 <= l1_bound + BOUND_TOL;
            Ok(BoundCheck {
                ell,
                horizon: h,
                delta_kl,
                kl_bound,
                kl_margin: kl_bound - delta_kl,
                delta_l1,
                l1_bound,
                l1_margin: l1_bound - delta_l1,
                pass,
            })
        })
        .collect();
    let checks = checks?;
    let all_pass = checks.iter().all(|c| c.pass);
    Ok(BoundsReport {
        model_id: id,
        mi: summary,
        inconclusive: false,
        checks,
        all_pass,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TestResult {
    pub accuracy: f64,
    pub stderr: f64,
    pub ci95_low: f64,
    pub ci95_high: f64,
}

impl TestResult {
    fn from_counts(correct: usize, trials: usize) -> Self {
        let p = correct as f64 / trials as f64;
        let se = (p * (1.0 - p) / trials as f64).sqrt();
        TestResult {
            accuracy: p,
            stderr: se,
            ci95_low: (p - 1.96 * se).max(0.0),
            ci95_high: (p + 1.96 * se).min(1.0),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DistinguishReport {
    pub model_id: String,
    pub model_kind: String,
    pub eta: f64,
    pub trials: usize,
    pub samples_per_trial: usize,
    /// Likelihood-ratio test that knows the matrix and the planted secret.
    pub informed: TestResult,
    /// Label-bit frequency test with no model knowledge.
    pub blind: TestResult,
}

/// One planted-vs-uniform trial batch, bit-packed per block as
/// `(values v, label y)`.
struct Batch {
    blocks: Vec<(u64, u64)>,
    planted: bool,
}

/// Planted-versus-uniform distinguishing. Each trial draws a batch of
/// blocks entirely from the planted distribution or entirely from the null
/// (fair coin), runs the informed likelihood-ratio test (which knows the
/// matrix and the planted secret) and the blind frequency baseline, and
/// scores both. The planted side mixes clean blocks with uniform blocks at
/// rate `eta`, so `eta = 1` is exactly the null.
pub fn distinguish(cfg: &ExperimentConfig) -> Result<DistinguishReport, HarnessError> {
    use rand::{Rng, SeedableRng};
    let built = build_model(cfg)?;
    let (kind, n_bits, m_bits) = match &built {
        BuiltModel::Parity { spec, .. } => ("parity", spec.n, spec.m),
        BuiltModel::Csp { model, .. } => ("csp", model.spec().k, model.spec().m),
        _ => {
            return Err(HarnessError::Config(
                "distinguish needs a parity or csp model".into(),
            ))
        }
    };
    let trials = cfg.trials;
    let batch_size = cfg.samples_per_trial();
    let (eta, matrix) = match &built {
        BuiltModel::Parity { spec, .. } => (spec.eta, spec.a.clone()),
        BuiltModel::Csp { model, .. } => (model.spec().eta, model.spec().a.clone()),
        _ => unreachable!(),
    };
    // Noiseless parity spec for the planted mixture component.
    let clean_parity = match &built {
        BuiltModel::Parity { spec, .. } => Some(ParityModelSpec::new(
            spec.n,
            spec.m,
            spec.a.clone(),
            0.0,
        )?),
        _ => None,
    };
    let mut informed_correct = 0usize;
    let mut blind_correct = 0usize;
    for trial in 0..trials {
        let mut rng =
            rand_chacha::ChaCha8Rng::seed_from_u64(child_seed(cfg.seed, trial as u64));
        let planted = rng.random::<bool>();
        let batch = match &built {
            BuiltModel::Parity { .. } => {
                let spec = clean_parity.as_ref().expect("built above");
                let blocks = (0..batch_size)
                    .map(|_| {
                        if planted && rng.random::<f64>() < 1.0 - eta {
                            let block = parity_sample_block_with(spec, &mut rng);
                            pack_block(&block, n_bits)
                        } else {
                            random_block(n_bits, m_bits, &mut rng)
                        }
                    })
                    .collect();
                Batch { blocks, planted }
            }
            BuiltModel::Csp { model, .. } => {
                let blocks = (0..batch_size)
                    .map(|_| {
                        let b = if planted {
                            model.sample_block_with(&mut rng)
                        } else {
                            model.sample_uniform_block_with(&mut rng)
                        };
                        let v = model.decode_values(&b.symbols);
                        let y = b
                            .labels
                            .iter()
                            .enumerate()
                            .fold(0u64, |acc, (j, &bit)| acc | ((bit as u64) << j));
                        (v, y)
                    })
                    .collect();
                Batch { blocks, planted }
            }
            _ => unreachable!(),
        };
        // Informed test: aggregate log likelihood ratio; ties resolved by a
        // derived fair coin.
        let mut log_lr = 0.0f64;
        for &(v, y) in &batch.blocks {
            let consistent = matrix.mul_vec(v) == y;
            let lr = (1.0 - eta) * (consistent as u64 as f64) * 2f64.powi(m_bits as i32) + eta;
            log_lr += lr.ln();
        }
        let informed_decision = if log_lr.abs() < 1e-12 {
            rng.random::<bool>()
        } else {
            log_lr > 0.0
        };
        if informed_decision == batch.planted {
            informed_correct += 1;
        }
        // Blind baseline: largest label-bit frequency deviation from 1/2.
        let mut max_dev = 0.0f64;
        for j in 0..m_bits {
            let ones = batch
                .blocks
                .iter()
                .filter(|&&(_, y)| (y >> j) & 1 == 1)
                .count();
            let dev = (ones as f64 / batch_size as f64 - 0.5).abs();
            max_dev = max_dev.max(dev);
        }
        let blind_decision = max_dev > 1.0 / (batch_size as f64).sqrt();
        if blind_decision == batch.planted {
            blind_correct += 1;
        }
    }
    Ok(DistinguishReport {
        model_id: built.id().to_string(),
        model_kind: kind.into(),
        eta,
        trials,
        samples_per_trial: batch_size,
        informed: TestResult::from_counts(informed_correct, trials),
        blind: TestResult::from_counts(blind_correct, trials),
    })
}

fn pack_block(block: &[u8], n: usize) -> (u64, u64) {
    let mut v = 0u64;
    let mut y = 0u64;
    for (i, &b) in block.iter().enumerate() {
        if i < n {
            v |= (b as u64) << i;
        } else {
            y |= (b as u64) << (i - n);
        }
    }
    (v, y)
}

fn random_block(n: usize, m: usize, rng: &mut impl rand::Rng) -> (u64, u64) {
    let v = rng.random::<u64>() & ((1u64 << n) - 1);
    let y = rng.random::<u64>() & ((1u64 << m) - 1);
    (v, y)
}
