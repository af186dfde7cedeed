//! Per-session system-level metrics: turn-taking, verbosity, lexical
//! variety, readability, flow entropy, perplexity and coherence.

use serde::{Deserialize, Serialize};

use crate::config::{DurationMode, MetricConfig};
use crate::embed::{cosine, Embedder};
use crate::error::{Error, Result};
use crate::lexical::{self, words};
use crate::lm::{self, NGramModel};
use crate::transcript::{Session, Speaker};

macro_rules! metric_vector {
    ($($field:ident),+ $(,)?) => {
        /// All system-level metric values for one session.
        ///
        /// Ratios whose denominator is zero are stored as NaN and treated as
        /// undefined downstream.
        #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
        pub struct MetricVector {
            $(pub $field: f64,)+
        }

        impl MetricVector {
            pub const NAMES: &'static [&'static str] = &[$(stringify!($field)),+];

            pub fn values(&self) -> Vec<f64> {
                vec![$(self.$field),+]
            }

            pub fn get(&self, name: &str) -> Option<f64> {
                match name {
                    $(stringify!($field) => Some(self.$field),)+
                    _ => None,
                }
            }
        }
    };
}

metric_vector!(
    norm_speaker_switches,
    norm_total_turns,
    norm_conversation_length,
    avg_utterance_length,
    utterance_length_sd,
    norm_avg_turn_duration,
    norm_turn_duration_sd,
    norm_therapist_turns,
    norm_client_turns,
    norm_therapist_words,
    norm_client_words,
    turn_ratio_tc,
    word_ratio_tc,
    vocabulary_richness,
    readability,
    flow_entropy,
    avg_perplexity,
    semantic_coherence,
    semantic_coherence_sd,
    local_coherence,
    coherence_sd,
);

/// Population mean and standard deviation; `None` for an empty slice.
pub fn mean_sd(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        f64::NAN
    } else {
        num / den
    }
}

/// Index of the bin holding `len`: bin k covers (edge[k-1], edge[k]];
/// the last bin is open above.
pub fn entropy_bin(len: f64, edges: &[f64]) -> usize {
    edges.iter().position(|&e| len <= e).unwrap_or(edges.len())
}

/// Shannon entropy in nats of turn lengths histogrammed into the bins.
pub fn flow_entropy(turn_lengths: &[usize], edges: &[f64]) -> f64 {
    if turn_lengths.is_empty() {
        return 0.0;
    }
    let mut hist = vec![0usize; edges.len() + 1];
    for &l in turn_lengths {
        hist[entropy_bin(l as f64, edges)] += 1;
    }
    let n = turn_lengths.len() as f64;
    let h: f64 = hist
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum();
    h.max(0.0)
}

/// Coherence statistics: (global mean, global sd, local mean, local sd).
///
/// Global compares each turn with the concatenation of everything before it;
/// local compares adjacent turns.
pub fn coherence(session: &Session, embedder: &dyn Embedder) -> (f64, f64, f64, f64) {
    let vecs: Vec<Vec<f64>> = session.turns.iter().map(|t| embedder.embed(&t.text)).collect();
    let texts: Vec<&str> = session.turns.iter().map(|t| t.text.as_str()).collect();
    let prefixes = embedder.embed_prefixes(&texts[..texts.len().saturating_sub(1)]);
    let global: Vec<f64> = vecs.iter().skip(1).zip(&prefixes).map(|(v, p)| cosine(v, p)).collect();
    let local: Vec<f64> = vecs.windows(2).map(|w| cosine(&w[0], &w[1])).collect();
    let (gm, gs) = mean_sd(&global).unwrap_or((f64::NAN, f64::NAN));
    let (lm, ls) = mean_sd(&local).unwrap_or((f64::NAN, f64::NAN));
    (gm, gs, lm, ls)
}

fn turn_durations(session: &Session, lengths: &[usize], config: &MetricConfig) -> Vec<f64> {
    let timed: Option<Vec<u64>> = session.turns.iter().map(|t| t.duration_ms()).collect();
    let use_times = match config.duration_mode {
        DurationMode::Words => false,
        DurationMode::Timestamps | DurationMode::Auto => timed.is_some(),
    };
    match (use_times, timed) {
        (true, Some(ms)) => ms.into_iter().map(|m| m as f64 / 1000.0 / 60.0).collect(),
        _ => lengths
            .iter()
            .map(|&l| l as f64 / config.words_per_duration_unit)
            .collect(),
    }
}

/// Compute the full metric vector for a normalized session.
pub fn compute_metric_vector(
    session: &Session,
    model: &NGramModel,
    embedder: &dyn Embedder,
    config: &MetricConfig,
) -> Result<MetricVector> {
    let n = session.turns.len();
    if n < 2 {
        return Err(Error::SessionTooShort(session.session_id.clone()));
    }
    let lengths: Vec<usize> = session.turns.iter().map(|t| words(&t.text).len()).collect();
    let total_words: usize = lengths.iter().sum();
    if total_words == 0 {
        return Err(Error::EmptySession(session.session_id.clone()));
    }

    let (mut t_turns, mut c_turns, mut t_words, mut c_words) = (0usize, 0usize, 0usize, 0usize);
    for (turn, &len) in session.turns.iter().zip(&lengths) {
        match turn.speaker {
            Speaker::Therapist => {
                t_turns += 1;
                t_words += len;
            }
            Speaker::Client => {
                c_turns += 1;
                c_words += len;
            }
        }
    }
    let nf = n as f64;
    let raw = session.raw_turn_count.max(n);

    let lens_f: Vec<f64> = lengths.iter().map(|&l| l as f64).collect();
    let (avg_len, sd_len) = mean_sd(&lens_f).expect("n >= 2");
    let durations = turn_durations(session, &lengths, config);
    let (avg_dur, sd_dur) = mean_sd(&durations).expect("n >= 2");
    let (sem, sem_sd, local, local_sd) = coherence(session, embedder);

    Ok(MetricVector {
        norm_speaker_switches: session.speaker_changes() as f64 / (raw - 1) as f64,
        norm_total_turns: ratio(t_turns.min(c_turns) as f64, t_turns.max(c_turns) as f64),
        norm_conversation_length: total_words as f64 / config.length_scale,
        avg_utterance_length: avg_len,
        utterance_length_sd: sd_len,
        norm_avg_turn_duration: avg_dur,
        norm_turn_duration_sd: sd_dur,
        norm_therapist_turns: t_turns as f64 / nf,
        norm_client_turns: c_turns as f64 / nf,
        norm_therapist_words: t_words as f64 / nf,
        norm_client_words: c_words as f64 / nf,
        turn_ratio_tc: ratio(t_turns as f64, c_turns as f64),
        word_ratio_tc: ratio(t_words as f64, c_words as f64),
        vocabulary_richness: lexical::vocabulary_richness(session)?,
        readability: lexical::session_readability(session)?,
        flow_entropy: flow_entropy(&lengths, &config.entropy_bin_edges),
        avg_perplexity: lm::avg_perplexity(model, session)?,
        semantic_coherence: sem,
        semantic_coherence_sd: sem_sd,
        local_coherence: local,
        coherence_sd: local_sd,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::default_embedder;
    use crate::lm::train_sessions;
    use crate::transcript::{normalize_session, CorpusLabel, CueLexicon, Turn};

    fn words_n(n: usize, w: &str) -> String {
        vec![w; n].join(" ")
    }

    fn alternating(lengths: &[usize]) -> Session {
        let turns = lengths
            .iter()
            .enumerate()
            .map(|(i, &l)| {
                let sp = if i % 2 == 0 { Speaker::Therapist } else { Speaker::Client };
                Turn::new(sp, words_n(l, if i % 2 == 0 { "okay" } else { "yes" }))
            })
            .collect();
        Session::new("s", CorpusLabel::Other, turns)
    }

    fn vector(s: &Session) -> MetricVector {
        let m = train_sessions(&[s], 3, 1.0).unwrap();
        compute_metric_vector(s, &m, &default_embedder(), &MetricConfig::default()).unwrap()
    }

    #[test]
    fn names_cover_all_fields() {
        assert_eq!(MetricVector::NAMES.len(), 21);
        let v = vector(&alternating(&[3, 4, 5, 6]));
        assert_eq!(v.values().len(), 21);
        assert_eq!(v.get("flow_entropy"), Some(v.flow_entropy));
        assert_eq!(v.get("nope"), None);
    }

    #[test]
    fn switch_and_balance_counting() {
        let raw = Session::new(
            "s",
            CorpusLabel::Other,
            vec![
                Turn::new(Speaker::Therapist, "a b"),
                Turn::new(Speaker::Therapist, "c"),
                Turn::new(Speaker::Client, "d e"),
                Turn::new(Speaker::Therapist, "f"),
                Turn::new(Speaker::Client, "g h"),
            ],
        );
        let s = normalize_session(&raw, &CueLexicon::default()).unwrap();
        let v = vector(&s);
        assert_eq!(v.norm_speaker_switches, 0.75);
        assert_eq!(v.norm_total_turns, 1.0);
        assert_eq!(v.turn_ratio_tc, 1.0);
    }

    #[test]
    fn word_share_identity_on_table_row() {
        // 10 merged turns, therapist 219 words, client 468 words
        let mut lengths = vec![0; 10];
        for (i, l) in lengths.iter_mut().enumerate() {
            *l = if i % 2 == 0 { [43, 44, 44, 44, 44][i / 2] } else { [93, 93, 94, 94, 94][i / 2] };
        }
        assert_eq!(lengths.iter().step_by(2).sum::<usize>(), 219);
        assert_eq!(lengths.iter().skip(1).step_by(2).sum::<usize>(), 468);
        let v = vector(&alternating(&lengths));
        assert!((v.norm_therapist_words - 21.9).abs() < 1e-12);
        assert!((v.norm_client_words - 46.8).abs() < 1e-12);
        assert!((v.avg_utterance_length - 68.7).abs() < 1e-12);
        assert!((v.norm_therapist_words + v.norm_client_words - v.avg_utterance_length).abs() < 1e-9);
        assert!((v.norm_therapist_turns + v.norm_client_turns - 1.0).abs() < 1e-9);
        // word proxy: 68.7 words -> 0.687 units
        assert!((v.norm_avg_turn_duration - 0.687).abs() < 1e-12);
        assert!((v.norm_conversation_length - 0.0687).abs() < 1e-12);
    }

    #[test]
    fn flow_entropy_cases() {
        let edges = MetricConfig::default().entropy_bin_edges;
        assert_eq!(flow_entropy(&[10, 10, 10, 10], &edges), 0.0);
        // bins 0, 2, 4, 7
        let h = flow_entropy(&[1, 5, 20, 500, 2, 8, 30, 129], &edges);
        assert!((h - 4f64.ln()).abs() < 1e-9);
        // boundaries are inclusive on the upper edge
        assert_eq!(entropy_bin(2.0, &edges), 0);
        assert_eq!(entropy_bin(3.0, &edges), 1);
        assert_eq!(entropy_bin(128.0, &edges), 6);
        assert_eq!(entropy_bin(129.0, &edges), 7);
        let all = flow_entropy(&[1, 3, 5, 9, 17, 33, 65, 200], &edges);
        assert!((all - 8f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn identical_adjacent_turns_have_unit_local_coherence() {
        let s = Session::new(
            "s",
            CorpusLabel::Other,
            vec![Turn::new(Speaker::Therapist, "the red car"), Turn::new(Speaker::Client, "the red car")],
        );
        let v = vector(&s);
        assert!((v.local_coherence - 1.0).abs() < 1e-12);
        assert!((v.semantic_coherence - 1.0).abs() < 1e-12);
        assert_eq!(v.coherence_sd, 0.0);
    }

    #[test]
    fn timestamps_drive_duration_when_complete() {
        let s = Session::new(
            "s",
            CorpusLabel::Other,
            vec![
                Turn::new(Speaker::Therapist, "a b").with_times(0, 60_000),
                Turn::new(Speaker::Client, "c").with_times(60_000, 180_000),
            ],
        );
        let v = vector(&s);
        assert!((v.norm_avg_turn_duration - 1.5).abs() < 1e-12);
        assert!((v.norm_turn_duration_sd - 0.5).abs() < 1e-12);

        let cfg = MetricConfig { duration_mode: DurationMode::Words, ..Default::default() };
        let m = train_sessions(&[&s], 3, 1.0).unwrap();
        let w = compute_metric_vector(&s, &m, &default_embedder(), &cfg).unwrap();
        assert!((w.norm_avg_turn_duration - 0.015).abs() < 1e-12);
    }

    #[test]
    fn rejects_short_sessions() {
        let s = Session::new("s", CorpusLabel::Other, vec![Turn::new(Speaker::Client, "hello there")]);
        let m = train_sessions(&[&s], 3, 1.0).unwrap();
        assert!(matches!(
            compute_metric_vector(&s, &m, &default_embedder(), &MetricConfig::default()),
            Err(Error::SessionTooShort(_))
        ));
    }

    #[test]
    fn duplication_keeps_types_and_readability() {
        let s = Session::new(
            "s",
            CorpusLabel::Other,
            vec![
                Turn::new(Speaker::Therapist, "Tell me about the car."),
                Turn::new(Speaker::Client, "It was dark and cold."),
            ],
        );
        let v = vector(&s);
        let doubled = Session::new(
            "d",
            CorpusLabel::Other,
            s.turns.iter().map(|t| Turn::new(t.speaker, format!("{} {}", t.text, t.text))).collect(),
        );
        let d = vector(&doubled);
        // same type set, twice the tokens
        assert!((d.vocabulary_richness - v.vocabulary_richness / 2.0).abs() < 1e-12);
        assert!((d.readability - v.readability).abs() < 1e-9);
    }
}
