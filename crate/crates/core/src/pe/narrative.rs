use std::collections::HashSet;

use crate::embed::{cosine, Embedder};
use crate::error::{Error, Result};
use crate::lexical::words;
use crate::pe::markers::halves;
use crate::pe::rules::Stopwords;
use crate::transcript::{Session, Speaker};

pub const CONNECTIVES: &[&str] = &[
    "then", "because", "so", "after", "before", "when", "while", "next", "finally", "since",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NarrativeMetrics {
    pub coherence: f64,
    pub development: f64,
}

/// Trauma-narrative coherence and development over the client turns.
///
/// Coherence averages adjacent client-turn embedding similarity with
/// connective density (capped at 1). Development is the mean count of new
/// content-word types per client turn in the second half minus the first;
/// a type is new when no earlier turn of either speaker used it.
pub fn narrative_metrics(
    session: &Session,
    embedder: &dyn Embedder,
    stopwords: &Stopwords,
) -> Result<NarrativeMetrics> {
    let client: Vec<&str> = session
        .turns_by(Speaker::Client)
        .map(|(_, t)| t.text.as_str())
        .collect();
    if client.len() < 2 {
        return Err(Error::SessionTooShort(format!(
            "{}: narrative metrics need two client turns",
            session.session_id
        )));
    }

    let vecs: Vec<Vec<f64>> = client.iter().map(|t| embedder.embed(t)).collect();
    let adjacent: f64 = vecs.windows(2).map(|w| cosine(&w[0], &w[1])).sum::<f64>()
        / (vecs.len() - 1) as f64;

    let client_tokens: Vec<Vec<String>> = client.iter().map(|t| words(t)).collect();
    let total: usize = client_tokens.iter().map(Vec::len).sum();
    let connectives = client_tokens
        .iter()
        .flatten()
        .filter(|w| CONNECTIVES.contains(&w.as_str()))
        .count();
    let density = if total == 0 {
        0.0
    } else {
        (connectives as f64 / total as f64).min(1.0)
    };

    let mut seen: HashSet<String> = HashSet::new();
    let mut new_counts = Vec::with_capacity(client.len());
    for turn in &session.turns {
        let tokens = words(&turn.text);
        if turn.speaker == Speaker::Client {
            let fresh: HashSet<&String> = tokens
                .iter()
                .filter(|w| !stopwords.contains(w) && !seen.contains(*w))
                .collect();
            new_counts.push(fresh.len() as f64);
        }
        seen.extend(tokens);
    }
    let (first, second) = halves(new_counts.len());
    let mean = |r: std::ops::Range<usize>| {
        let n = r.len() as f64;
        new_counts[r].iter().sum::<f64>() / n
    };

    Ok(NarrativeMetrics {
        coherence: 0.5 * adjacent + 0.5 * density,
        development: mean(second) - mean(first),
    })
}
