//! Within-corpus metric stability as split-half Spearman correlation.
//!
//! Each session is split into two interleaved halves by exchange (turn
//! pairs 0, 2, 4, ... versus 1, 3, 5, ...), so both halves keep strict
//! speaker alternation. The metric is computed on each half and the two
//! half-series are rank-correlated across sessions.

use serde::{Deserialize, Serialize};

use crate::transcript::{CorpusLabel, Session};

pub const MIN_SESSIONS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEntry {
    pub metric_name: String,
    pub corpus_label: CorpusLabel,
    /// `None` when undefined; see `note`.
    pub rho: Option<f64>,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Average ranks (1-based), ties sharing their mean rank.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| xs[i].total_cmp(&xs[j]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    if n != y.len() || n < 2 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's rho with tie-averaged ranks; `None` on zero variance.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<f64> {
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Rank correlation of per-session half values. Pairs where either half is
/// undefined (None or non-finite) are dropped.
pub fn split_half_correlation(
    metric_name: &str,
    label: CorpusLabel,
    halves: &[(Option<f64>, Option<f64>)],
) -> CorrelationEntry {
    let (xs, ys): (Vec<f64>, Vec<f64>) = halves
        .iter()
        .filter_map(|&(a, b)| match (a, b) {
            (Some(a), Some(b)) if a.is_finite() && b.is_finite() => Some((a, b)),
            _ => None,
        })
        .unzip();
    let n = xs.len();
    let (rho, note) = if n < MIN_SESSIONS {
        (None, Some(format!("fewer than {MIN_SESSIONS} usable sessions")))
    } else {
        match spearman(&xs, &ys) {
            Some(r) => (Some(r), None),
            None => (None, Some("zero variance in a half-series".to_string())),
        }
    };
    CorrelationEntry {
        metric_name: metric_name.to_string(),
        corpus_label: label,
        rho,
        n,
        note,
    }
}

/// Split a normalized session into its even- and odd-exchange halves.
/// Each half gets a share of the raw turn count proportional to its length.
pub fn split_half_sessions(session: &Session) -> (Session, Session) {
    let mut even = Vec::new();
    let mut odd = Vec::new();
    for (i, t) in session.turns.iter().enumerate() {
        if (i / 2) % 2 == 0 {
            even.push(t.clone());
        } else {
            odd.push(t.clone());
        }
    }
    let total = session.turns.len().max(1);
    let raw = session.raw_turn_count.max(session.turns.len());
    let make = |turns: Vec<_>, suffix: &str| {
        let len = turns.len();
        let scaled = ((raw * len) as f64 / total as f64).round() as usize;
        Session {
            session_id: format!("{}#{suffix}", session.session_id),
            corpus_label: session.corpus_label,
            raw_turn_count: scaled.max(len),
            turns,
            meta: session.meta.clone(),
        }
    };
    (make(even, "even"), make(odd, "odd"))
}
