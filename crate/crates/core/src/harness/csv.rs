//! The stable CSV schema shared by the sweep commands.
//!
//! Columns: `model_id,seed,ell,horizon,predictor,metric,value,stderr,
//! kl_bound,l1_bound`. The `stderr` column is empty in exact mode; the
//! bound columns are filled when the model's mutual information converged.
//! Rows are sorted by (model_id, ell, horizon, metric, predictor) before
//! writing so parallel execution never changes bytes.

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Row {
    pub model_id: String,
    pub seed: u64,
    pub ell: usize,
    pub horizon: usize,
    pub predictor: String,
    pub metric: String,
    pub value: String,
    pub stderr: String,
    pub kl_bound: String,
    pub l1_bound: String,
}

pub const CSV_HEADER: &str =
    "model_id,seed,ell,horizon,predictor,metric,value,stderr,kl_bound,l1_bound";

/// Shortest-roundtrip decimal form; stable for a given f64 value.
pub fn format_value(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else {
        format!("{v}")
    }
}

pub fn write_csv(mut rows: Vec<Row>) -> String {
    rows.sort_by(|a, b| {
        (&a.model_id, a.ell, a.horizon, &a.metric, &a.predictor).cmp(&(
            &b.model_id,
            b.ell,
            b.horizon,
            &b.metric,
            &b.predictor,
        ))
    });
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.model_id,
            r.seed,
            r.ell,
            r.horizon,
            r.predictor,
            r.metric,
            r.value,
            r.stderr,
            r.kl_bound,
            r.l1_bound
        ));
    }
    out
}
