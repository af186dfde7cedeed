//! SUDS self-report extraction.
//!
//! Two grammars: the token `suds` with an integer 0-100 within six tokens,
//! and `N out of 100`. Integers that belong to a range (`0 to 100`), that
//! are the `100` of an `out of 100` anchor, or that carry a unit (`minutes`,
//! `percent`, ...) are never captured.

use serde::{Deserialize, Serialize};

use crate::lexical::words;
use crate::transcript::{Session, Speaker};

pub const ANCHOR_WINDOW: usize = 6;

const UNIT_WORDS: &[&str] = &[
    "percent", "minute", "minutes", "second", "seconds", "hour", "hours", "day", "days", "week",
    "weeks", "month", "months", "year", "years", "times", "am", "pm", "dollars",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SudsEvent {
    pub turn_index: usize,
    pub value: f64,
    pub speaker: Speaker,
}

fn as_score(token: &str) -> Option<u32> {
    if token.is_empty() || token.len() > 3 || !token.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    token.parse::<u32>().ok().filter(|&v| v <= 100)
}

fn is_integer(token: &str) -> bool {
    !token.is_empty() && token.bytes().all(|b| b.is_ascii_digit())
}

/// Positions of integer tokens that may be read as a score.
fn candidate_scores(tokens: &[String]) -> Vec<Option<u32>> {
    let n = tokens.len();
    (0..n)
        .map(|i| {
            let v = as_score(&tokens[i])?;
            let prev = |k: usize| i.checked_sub(k).map(|j| tokens[j].as_str());
            let next = |k: usize| tokens.get(i + k).map(String::as_str);
            let in_range = (next(1) == Some("to") && next(2).is_some_and(is_integer))
                || (prev(1) == Some("to") && prev(2).is_some_and(is_integer));
            let is_denominator = prev(1) == Some("of") && prev(2) == Some("out");
            let has_unit = next(1).is_some_and(|w| UNIT_WORDS.contains(&w));
            (!in_range && !is_denominator && !has_unit).then_some(v)
        })
        .collect()
}

/// Token positions and values of SUDS reports within one utterance.
pub fn scan_utterance(text: &str) -> Vec<(usize, u32)> {
    let tokens = words(text);
    let scores = candidate_scores(&tokens);
    let mut found: Vec<(usize, u32)> = Vec::new();

    for (i, tok) in tokens.iter().enumerate() {
        if tok != "suds" {
            continue;
        }
        let lo = i.saturating_sub(ANCHOR_WINDOW);
        let hi = (i + ANCHOR_WINDOW).min(tokens.len().saturating_sub(1));
        // nearest candidate; a following number wins a distance tie
        let best = (lo..=hi)
            .filter(|&j| j != i)
            .filter_map(|j| scores[j].map(|v| (j, v)))
            .min_by_key(|&(j, _)| (j.abs_diff(i), j < i));
        if let Some(hit) = best {
            found.push(hit);
        }
    }

    for i in 0..tokens.len().saturating_sub(3) {
        if tokens[i + 1] == "out" && tokens[i + 2] == "of" && tokens[i + 3] == "100" {
            if let Some(v) = scores[i] {
                found.push((i, v));
            }
        }
    }

    found.sort_unstable();
    found.dedup_by_key(|&mut (pos, _)| pos);
    found
}

pub fn extract_suds(session: &Session) -> Vec<SudsEvent> {
    session
        .turns
        .iter()
        .enumerate()
        .flat_map(|(turn_index, turn)| {
            scan_utterance(&turn.text)
                .into_iter()
                .map(move |(_, v)| SudsEvent {
                    turn_index,
                    value: v as f64,
                    speaker: turn.speaker,
                })
        })
        .collect()
}

/// Last minus first client report; `None` with fewer than two.
pub fn suds_progression(events: &[SudsEvent]) -> Option<f64> {
    let mut client = events.iter().filter(|e| e.speaker == Speaker::Client);
    let first = client.next()?;
    let last = client.next_back()?;
    Some(last.value - first.value)
}
