//! The learned predictor: a streaming empirical order-`ell` Markov model.
//!
//! Counts are keyed by the contexts actually seen, so memory is bounded by
//! distinct contexts rather than `d^ell`.

use std::collections::HashMap;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NgramError {
    #[error("symbol {symbol} out of range for alphabet size {d}")]
    SymbolOutOfRange { symbol: usize, d: usize },
    #[error("context has length {got}, expected {expected}")]
    BadContextLength { got: usize, expected: usize },
    #[error("failed to parse table: {0}")]
    Parse(String),
}

/// Prediction policy for contexts with few or no observations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Smoothing {
    /// Normalized raw counts; unseen contexts fall back to uniform.
    Empirical,
    /// `(count_i + alpha) / (total + d * alpha)`.
    AddAlpha(f64),
}

impl Default for Smoothing {
    fn default() -> Self {
        Smoothing::Empirical
    }
}

/// Carries the tail of the previous chunk so a sequence can be streamed in
/// pieces without losing the windows that straddle chunk boundaries.
#[derive(Debug, Clone, Default)]
pub struct ContextCarry {
    tail: Vec<usize>,
}

/// Streaming counts behind the empirical order-`ell` Markov predictor: maps
/// each observed length-`ell` context to the counts of its successors.
#[derive(Debug, Clone)]
pub struct ContextTable {
    ell: usize,
    d: usize,
    counts: HashMap<Vec<usize>, Vec<u64>>,
    total_updates: u64,
}

impl ContextTable {
    pub fn new(ell: usize, d: usize) -> Self {
        ContextTable {
            ell,
            d,
            counts: HashMap::new(),
            total_updates: 0,
        }
    }

    pub fn order(&self) -> usize {
        self.ell
    }

    pub fn alphabet(&self) -> usize {
        self.d
    }

    pub fn total_updates(&self) -> u64 {
        self.total_updates
    }

    pub fn distinct_contexts(&self) -> usize {
        self.counts.len()
    }

    fn check_symbols(&self, xs: &[usize]) -> Result<(), NgramError> {
        for &x in xs {
            if x >= self.d {
                return Err(NgramError::SymbolOutOfRange { symbol: x, d: self.d });
            }
        }
        Ok(())
    }

    /// Streams a whole sequence: for every position `p >= ell`, counts the
    /// transition from context `x[p-ell..p]` to `x[p]`. Sequences of length
    /// at most `ell` contribute nothing.
    pub fn update(&mut self, xs: &[usize]) -> Result<(), NgramError> {
        self.check_symbols(xs)?;
        for p in self.ell..xs.len() {
            self.bump(&xs[p - self.ell..p], xs[p]);
        }
        Ok(())
    }

    /// Streams one chunk of a longer sequence; `carry` holds the up-to-`ell`
    /// trailing symbols of the previous chunks. Streaming chunks through the
    /// same carry is equivalent to streaming the concatenation whole.
    pub fn update_chunk(&mut self, carry: &mut ContextCarry, chunk: &[usize]) -> Result<(), NgramError> {
        self.check_symbols(chunk)?;
        for &x in chunk {
            if carry.tail.len() == self.ell {
                let ctx: Vec<usize> = carry.tail.clone();
                self.bump(&ctx, x);
                carry.tail.remove(0);
            }
            carry.tail.push(x);
            if carry.tail.len() > self.ell {
                carry.tail.remove(0);
            }
        }
        Ok(())
    }

    fn bump(&mut self, context: &[usize], next: usize) {
        let entry = self
            .counts
            .entry(context.to_vec())
            .or_insert_with(|| vec![0; self.d]);
        entry[next] += 1;
        self.total_updates += 1;
    }

    /// Prediction with the default (empirical + uniform fallback) policy.
    pub fn predict(&self, context: &[usize]) -> Result<Vec<f64>, NgramError> {
        self.predict_with(context, Smoothing::Empirical)
    }

    pub fn predict_with(&self, context: &[usize], policy: Smoothing) -> Result<Vec<f64>, NgramError> {
        if context.len() != self.ell {
            return Err(NgramError::BadContextLength {
                got: context.len(),
                expected: self.ell,
            });
        }
        self.check_symbols(context)?;
        let uniform = || vec![1.0 / self.d as f64; self.d];
        match policy {
            Smoothing::Empirical => match self.counts.get(context) {
                None => Ok(uniform()),
                Some(c) => {
                    let total: u64 = c.iter().sum();
                    Ok(c.iter().map(|&x| x as f64 / total as f64).collect())
                }
            },
            Smoothing::AddAlpha(alpha) => {
                let zero = vec![0u64; self.d];
                let c = self.counts.get(context).unwrap_or(&zero);
                let total: u64 = c.iter().sum();
                let denom = total as f64 + self.d as f64 * alpha;
                if denom <= 0.0 {
                    return Ok(uniform());
                }
                Ok(c.iter().map(|&x| (x as f64 + alpha) / denom).collect())
            }
        }
    }

    /// Raw counts for a context, if it has been seen.
    pub fn counts(&self, context: &[usize]) -> Option<&[u64]> {
        self.counts.get(context).map(|v| v.as_slice())
    }

    /// Serializes the table as a structured text document with contexts in
    /// sorted order, so equal tables export byte-identically.
    pub fn export(&self) -> String {
        let mut rows: Vec<(&Vec<usize>, &Vec<u64>)> = self.counts.iter().collect();
        rows.sort_by(|a, b| a.0.cmp(b.0));
        let mut out = String::new();
        out.push_str(&format!("ell={} d={}\n", self.ell, self.d));
        for (ctx, counts) in rows {
            let ctx_s: Vec<String> = ctx.iter().map(|x| x.to_string()).collect();
            let cnt_s: Vec<String> = counts.iter().map(|x| x.to_string()).collect();
            out.push_str(&format!("{}:{}\n", ctx_s.join(","), cnt_s.join(",")));
        }
        out
    }

    pub fn import(text: &str) -> Result<Self, NgramError> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| NgramError::Parse("empty document".into()))?;
        let mut ell = None;
        let mut d = None;
        for part in header.split_whitespace() {
            if let Some(v) = part.strip_prefix("ell=") {
                ell = v.parse::<usize>().ok();
            } else if let Some(v) = part.strip_prefix("d=") {
                d = v.parse::<usize>().ok();
            }
        }
        let (ell, d) = match (ell, d) {
            (Some(e), Some(dd)) => (e, dd),
            _ => return Err(NgramError::Parse(format!("bad header: {header}"))),
        };
        let mut table = ContextTable::new(ell, d);
        for (lineno, line) in lines.enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (ctx_s, cnt_s) = line
                .split_once(':')
                .ok_or_else(|| NgramError::Parse(format!("line {}: missing ':'", lineno + 2)))?;
            let parse_list = |s: &str| -> Result<Vec<u64>, NgramError> {
                if s.is_empty() {
                    return Ok(Vec::new());
                }
                s.split(',')
                    .map(|x| {
                        x.trim()
                            .parse::<u64>()
                            .map_err(|e| NgramError::Parse(format!("line {}: {e}", lineno + 2)))
                    })
                    .collect()
            };
            let ctx: Vec<usize> = parse_list(ctx_s)?.into_iter().map(|x| x as usize).collect();
            let counts = parse_list(cnt_s)?;
            if ctx.len() != ell || counts.len() != d {
                return Err(NgramError::Parse(format!(
                    "line {}: expected context length {ell} and {d} counts",
                    lineno + 2
                )));
            }
            table.check_symbols(&ctx)?;
            table.total_updates += counts.iter().sum::<u64>();
            table.counts.insert(ctx, counts);
        }
        Ok(table)
    }
}
