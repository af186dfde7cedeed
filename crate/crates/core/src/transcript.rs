//! Transcript ingestion: JSONL parsing, validation and normalization into
//! the canonical [`Session`] form consumed by every metric.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    Therapist,
    Client,
}

impl Speaker {
    /// Resolve an input speaker label. Case-insensitive, with the usual
    /// export aliases.
    pub fn from_label(label: &str) -> Option<Speaker> {
        match label.trim().to_ascii_lowercase().as_str() {
            "t" | "therapist" | "counselor" | "counsellor" => Some(Speaker::Therapist),
            "c" | "client" | "patient" => Some(Speaker::Client),
            _ => None,
        }
    }

    pub fn other(self) -> Speaker {
        match self {
            Speaker::Therapist => Speaker::Client,
            Speaker::Client => Speaker::Therapist,
        }
    }
}

impl fmt::Display for Speaker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Speaker::Therapist => f.write_str("therapist"),
            Speaker::Client => f.write_str("client"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CorpusLabel {
    Real,
    Synthetic,
    #[default]
    Other,
}

impl FromStr for CorpusLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "real" => Ok(CorpusLabel::Real),
            "synthetic" => Ok(CorpusLabel::Synthetic),
            "other" => Ok(CorpusLabel::Other),
            _ => Err(Error::InvalidParameter(format!("unknown corpus label {s:?}"))),
        }
    }
}

impl fmt::Display for CorpusLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CorpusLabel::Real => "real",
            CorpusLabel::Synthetic => "synthetic",
            CorpusLabel::Other => "other",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub speaker: Speaker,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub end_ms: Option<u64>,
}

impl Turn {
    pub fn new(speaker: Speaker, text: impl Into<String>) -> Self {
        Turn {
            speaker,
            text: text.into(),
            start_ms: None,
            end_ms: None,
        }
    }

    pub fn with_times(mut self, start_ms: u64, end_ms: u64) -> Self {
        self.start_ms = Some(start_ms);
        self.end_ms = Some(end_ms);
        self
    }

    /// Duration in milliseconds when both timestamps are present.
    pub fn duration_ms(&self) -> Option<u64> {
        match (self.start_ms, self.end_ms) {
            (Some(s), Some(e)) => Some(e.saturating_sub(s)),
            _ => None,
        }
    }
}

/// One dialogue. After [`normalize_session`], turns strictly alternate and
/// `raw_turn_count` still records how many turns the transcript had before merging.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub corpus_label: CorpusLabel,
    pub raw_turn_count: usize,
    pub turns: Vec<Turn>,
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
}

impl Session {
    pub fn new(session_id: impl Into<String>, label: CorpusLabel, turns: Vec<Turn>) -> Self {
        Session {
            session_id: session_id.into(),
            corpus_label: label,
            raw_turn_count: turns.len(),
            turns,
            meta: BTreeMap::new(),
        }
    }

    /// Number of adjacent turn pairs with different speakers.
    pub fn speaker_changes(&self) -> usize {
        self.turns
            .windows(2)
            .filter(|w| w[0].speaker != w[1].speaker)
            .count()
    }

    pub fn is_alternating(&self) -> bool {
        self.speaker_changes() + 1 == self.turns.len() || self.turns.len() <= 1
    }

    pub fn turns_by(&self, speaker: Speaker) -> impl Iterator<Item = (usize, &Turn)> {
        self.turns
            .iter()
            .enumerate()
            .filter(move |(_, t)| t.speaker == speaker)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub label: CorpusLabel,
    pub sessions: Vec<Session>,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.sessions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sessions.is_empty()
    }

    /// Normalize every session, preserving order.
    pub fn normalized(&self, cues: &CueLexicon) -> Result<Corpus> {
        let sessions = self
            .sessions
            .iter()
            .map(|s| normalize_session(s, cues))
            .collect::<Result<Vec<_>>>()?;
        Ok(Corpus {
            label: self.label,
            sessions,
        })
    }
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    session_id: String,
    corpus_label: String,
    turns: Vec<RawTurn>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    meta: Option<BTreeMap<String, String>>,
}

#[derive(Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawTurn {
    speaker: String,
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    start_ms: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    end_ms: Option<u64>,
}

/// Parse a JSONL transcript stream. Sessions are validated but not normalized.
/// Blank lines are skipped; line numbers in errors are 1-based.
pub fn parse_corpus<R: BufRead>(input: R, label: CorpusLabel) -> Result<Corpus> {
    let mut sessions = Vec::new();
    let mut seen = HashSet::new();
    for (idx, line) in input.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::MalformedLine {
            line: line_no,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let session = parse_record(&line, line_no)?;
        if !seen.insert(session.session_id.clone()) {
            return Err(Error::DuplicateSession {
                line: line_no,
                session_id: session.session_id,
            });
        }
        sessions.push(session);
    }
    Ok(Corpus { label, sessions })
}

pub fn parse_corpus_str(input: &str, label: CorpusLabel) -> Result<Corpus> {
    parse_corpus(input.as_bytes(), label)
}

/// Parse a JSONL transcript file.
pub fn read_corpus_file(path: &std::path::Path, label: CorpusLabel) -> Result<Corpus> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(std::io::BufReader::new(file), label)
}

fn parse_record(line: &str, line_no: usize) -> Result<Session> {
    let raw: RawRecord = serde_json::from_str(line).map_err(|e| Error::MalformedLine {
        line: line_no,
        message: e.to_string(),
    })?;
    let corpus_label = raw
        .corpus_label
        .parse::<CorpusLabel>()
        .map_err(|e| Error::MalformedLine {
            line: line_no,
            message: e.to_string(),
        })?;
    if raw.turns.is_empty() {
        return Err(Error::EmptyTurns { line: line_no });
    }
    let mut turns = Vec::with_capacity(raw.turns.len());
    for (i, t) in raw.turns.into_iter().enumerate() {
        let speaker = Speaker::from_label(&t.speaker).ok_or_else(|| Error::UnknownSpeaker {
            line: line_no,
            speaker: t.speaker.clone(),
        })?;
        if let (Some(s), Some(e)) = (t.start_ms, t.end_ms) {
            if e < s {
                return Err(Error::InvalidTurn {
                    line: line_no,
                    message: format!("turn {i}: end_ms {e} precedes start_ms {s}"),
                });
            }
        }
        turns.push(Turn {
            speaker,
            text: t.text,
            start_ms: t.start_ms,
            end_ms: t.end_ms,
        });
    }
    Ok(Session {
        session_id: raw.session_id,
        corpus_label,
        raw_turn_count: turns.len(),
        turns,
        meta: raw.meta.unwrap_or_default(),
    })
}

/// Write a corpus back out in the transcript JSONL format.
pub fn write_corpus<W: Write>(corpus: &Corpus, mut out: W) -> Result<()> {
    for s in &corpus.sessions {
        let record = RawRecord {
            session_id: s.session_id.clone(),
            corpus_label: s.corpus_label.to_string(),
            turns: s
                .turns
                .iter()
                .map(|t| RawTurn {
                    speaker: t.speaker.to_string(),
                    text: t.text.clone(),
                    start_ms: t.start_ms,
                    end_ms: t.end_ms,
                })
                .collect(),
            meta: if s.meta.is_empty() {
                None
            } else {
                Some(s.meta.clone())
            },
        };
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n")
            .map_err(|e| Error::io("<corpus output>", e))?;
    }
    Ok(())
}

/// Words that mark a bracketed span as a non-verbal cue.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CueLexicon {
    words: Vec<String>,
}

impl Default for CueLexicon {
    fn default() -> Self {
        CueLexicon::new([
            "pause", "laughs", "laughter", "sighs", "crying", "sobs", "silence", "inaudible",
        ])
    }
}

impl CueLexicon {
    pub fn new<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        CueLexicon {
            words: words
                .into_iter()
                .map(|w| w.as_ref().trim().to_lowercase())
                .filter(|w| !w.is_empty())
                .collect(),
        }
    }

    /// A span is a cue when any word inside the brackets is in the lexicon.
    fn matches(&self, inner: &str) -> bool {
        inner
            .split(|c: char| !c.is_alphanumeric())
            .filter(|w| !w.is_empty())
            .any(|w| {
                let w = w.to_lowercase();
                self.words.contains(&w)
            })
    }
}

fn bracket_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\[([^\[\]]*)\]|\(([^()]*)\)").expect("static regex"))
}

/// Remove non-verbal cue spans and collapse whitespace.
pub fn strip_cues(text: &str, cues: &CueLexicon) -> String {
    let stripped = bracket_re().replace_all(text, |caps: &regex::Captures<'_>| {
        let inner = caps.get(1).or_else(|| caps.get(2)).map_or("", |m| m.as_str());
        if cues.matches(inner) {
            " ".to_string()
        } else {
            caps[0].to_string()
        }
    });
    collapse_whitespace(&stripped)
}

fn collapse_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Cue removal, empty-turn dropping, then merging of consecutive same-speaker
/// turns. Merged timestamps keep the first start and sum the spans.
pub fn normalize_session(session: &Session, cues: &CueLexicon) -> Result<Session> {
    let cleaned: Vec<Turn> = session
        .turns
        .iter()
        .filter_map(|t| {
            let text = strip_cues(&t.text, cues);
            (!text.is_empty()).then_some(Turn {
                speaker: t.speaker,
                text,
                start_ms: t.start_ms,
                end_ms: t.end_ms,
            })
        })
        .collect();
    if cleaned.is_empty() {
        return Err(Error::EmptyAfterNormalization(session.session_id.clone()));
    }

    let mut merged: Vec<Turn> = Vec::with_capacity(cleaned.len());
    for turn in cleaned {
        match merged.last_mut() {
            Some(prev) if prev.speaker == turn.speaker => {
                prev.text.push(' ');
                prev.text.push_str(&turn.text);
                match (prev.duration_ms(), turn.duration_ms(), prev.start_ms) {
                    (Some(a), Some(b), Some(start)) => prev.end_ms = Some(start + a + b),
                    _ => {
                        prev.start_ms = None;
                        prev.end_ms = None;
                    }
                }
            }
            _ => merged.push(turn),
        }
    }

    Ok(Session {
        session_id: session.session_id.clone(),
        corpus_label: session.corpus_label,
        raw_turn_count: session.raw_turn_count.max(session.turns.len()),
        turns: merged,
        meta: session.meta.clone(),
    })
}
