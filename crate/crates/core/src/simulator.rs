//! Parameterized synthetic corpora with known structural and PE properties.
//!
//! Text is made of seeded pseudo-words (never lexicon or marker words) plus
//! fixed marker phrases, so every metric the generator controls can be
//! predicted from the parameters alone.

use std::collections::BTreeSet;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Gamma, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lexical::words;
use crate::pe::narrative::CONNECTIVES;
use crate::pe::rules::{EmotionLexicon, PatternRuleSet, RuleGroup, Stopwords};
use crate::transcript::{Corpus, CorpusLabel, Session, Speaker, Turn};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimParams {
    pub session_count: usize,
    pub label: CorpusLabel,
    pub id_prefix: String,
    /// Turns per session, drawn once per session (minimum 6).
    pub turns_per_session: MeanSd,
    /// Per-session mean words per therapist turn, drawn once per session.
    pub therapist_length: MeanSd,
    /// Per-session mean words per client turn, drawn once per session.
    pub client_length: MeanSd,
    /// Coefficient of variation of turn length within a session (gamma).
    pub length_cv: f64,
    /// Share of client filler words replaced by emotion words in the first third.
    pub emotion_rate: f64,
    /// Multiplicative change of `emotion_rate` per session third.
    pub emotion_decay: f64,
    /// Probability that a therapist turn carries an exposure-guidance phrase.
    pub guidance_rate: f64,
    /// Probability that a client turn carries a restructuring phrase.
    pub restructuring_rate: f64,
    /// (fraction through the client turns, SUDS value) report points.
    pub suds_trajectory: Vec<(f64, f64)>,
    /// Probability that a client turn (with a therapist turn after it) avoids.
    pub avoidance_rate: f64,
    /// Probability that the next therapist turn redirects after avoidance.
    pub redirection_probability: f64,
    pub vocab_size: usize,
    pub seed: u64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            session_count: 200,
            label: CorpusLabel::Synthetic,
            id_prefix: "sim".into(),
            turns_per_session: MeanSd { mean: 40.0, sd: 6.0 },
            therapist_length: MeanSd { mean: 9.8, sd: 0.6 },
            client_length: MeanSd { mean: 36.0, sd: 3.4 },
            length_cv: 0.35,
            emotion_rate: 0.12,
            emotion_decay: 0.5,
            guidance_rate: 0.3,
            restructuring_rate: 0.05,
            suds_trajectory: vec![(0.1, 80.0), (0.5, 60.0), (0.9, 40.0)],
            avoidance_rate: 0.1,
            redirection_probability: 0.7,
            vocab_size: 3000,
            seed: 0,
        }
    }
}

impl SimParams {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let p: SimParams = serde_json::from_str(&text)?;
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if self.session_count == 0 {
            return bad("session_count must be positive");
        }
        for (name, ms) in [
            ("turns_per_session", self.turns_per_session),
            ("therapist_length", self.therapist_length),
            ("client_length", self.client_length),
        ] {
            if !(ms.mean > 0.0) || !(ms.sd >= 0.0) || !ms.mean.is_finite() || !ms.sd.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "{name}: mean must be positive and sd non-negative"
                )));
            }
        }
        for (name, p) in [
            ("emotion_rate", self.emotion_rate),
            ("guidance_rate", self.guidance_rate),
            ("restructuring_rate", self.restructuring_rate),
            ("avoidance_rate", self.avoidance_rate),
            ("redirection_probability", self.redirection_probability),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidParameter(format!("{name} must be in [0, 1]")));
            }
        }
        if !(self.length_cv >= 0.0) || !self.length_cv.is_finite() {
            return bad("length_cv must be non-negative");
        }
        if !(self.emotion_decay > 0.0) || !self.emotion_decay.is_finite() {
            return bad("emotion_decay must be positive");
        }
        if self.emotion_rate * self.emotion_decay.max(1.0).powi(2) > 1.0 {
            return bad("emotion_rate grows beyond 1 under emotion_decay");
        }
        if self.vocab_size < 10 {
            return bad("vocab_size must be at least 10");
        }
        if self
            .suds_trajectory
            .iter()
            .any(|&(f, v)| !(0.0..=1.0).contains(&f) || !(0.0..=100.0).contains(&v))
        {
            return bad("suds_trajectory points need fraction in [0, 1] and value in [0, 100]");
        }
        if self.suds_trajectory.windows(2).any(|w| w[0].0 > w[1].0) {
            return bad("suds_trajectory must be ordered by fraction");
        }
        Ok(())
    }
}

const GUIDANCE: &[&str] = &[
    "Close your eyes.",
    "Use the present tense.",
    "Describe what you see.",
    "Start from the beginning.",
    "Take a deep breath and continue.",
    "You're doing well.",
];
const SUDS_PROMPT: &str = "What's your SUDS?";
const REDIRECTION: &[&str] = &[
    "Let's go back to the memory.",
    "Stay with the memory.",
    "Bring yourself back to the scene.",
    "Return to the memory.",
];
const AVOIDANCE: &[&str] = &[
    "I don't want to talk about it.",
    "I'd rather not.",
    "Can we change the subject?",
    "I can't do this.",
    "I'm not ready.",
];
const RESTRUCTURING: &[&str] = &[
    "It wasn't my fault.",
    "I did the best I could.",
    "Looking back, I survived.",
];

/// Seeded pseudo-word vocabulary sampled with Zipf (1/rank) weights.
pub struct Vocabulary {
    words: Vec<String>,
    index: WeightedIndex<f64>,
}

impl Vocabulary {
    pub fn generate(
        size: usize,
        seed: u64,
        lexicon: &EmotionLexicon,
        rules: &PatternRuleSet,
        stopwords: &Stopwords,
    ) -> Self {
        const ONSETS: &[&str] = &["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "st", "tr", "pl", "gr", "sk"];
        const VOWELS: &[&str] = &["a", "e", "i", "o", "u"];
        const CODAS: &[&str] = &["", "", "n", "r", "l", "m", "k", "s"];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(u64::MAX);
        let mut seen = BTreeSet::new();
        let mut words = Vec::with_capacity(size);
        while words.len() < size {
            let syllables = rng.random_range(1..=3);
            let mut w = String::new();
            for _ in 0..syllables {
                w.push_str(ONSETS[rng.random_range(0..ONSETS.len())]);
                w.push_str(VOWELS[rng.random_range(0..VOWELS.len())]);
            }
            w.push_str(CODAS[rng.random_range(0..CODAS.len())]);
            let reserved = lexicon.weight(&w).is_some()
                || stopwords.contains(&w)
                || CONNECTIVES.contains(&w.as_str())
                || w == "suds"
                || RuleGroup::ALL.iter().any(|&g| rules.matches(g, &w));
            if !reserved && seen.insert(w.clone()) {
                words.push(w);
            }
        }
        let weights: Vec<f64> = (1..=size).map(|r| 1.0 / r as f64).collect();
        let index = WeightedIndex::new(weights).expect("positive weights");
        Vocabulary { words, index }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> &str {
        &self.words[self.index.sample(rng)]
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

struct Generator<'a> {
    params: &'a SimParams,
    vocab: Vocabulary,
    emotion_words: Vec<String>,
}

fn pick<'a, R: Rng>(rng: &mut R, items: &[&'a str]) -> &'a str {
    items[rng.random_range(0..items.len())]
}

fn draw_positive<R: Rng>(rng: &mut R, ms: MeanSd) -> f64 {
    if ms.sd == 0.0 {
        return ms.mean;
    }
    let d = Normal::new(ms.mean, ms.sd).expect("validated");
    d.sample(rng).max(1.0)
}

impl Generator<'_> {
    fn turn_length<R: Rng>(&self, rng: &mut R, mean: f64) -> usize {
        let cv = self.params.length_cv;
        let len = if cv == 0.0 {
            mean
        } else {
            let shape = 1.0 / (cv * cv);
            Gamma::new(shape, mean / shape).expect("validated").sample(rng)
        };
        (len.round() as usize).max(1)
    }

    /// Phrases followed by filler words up to `target` words in total.
    fn compose<R: Rng>(&self, rng: &mut R, phrases: &[String], target: usize, emotion_rate: f64) -> String {
        let mut parts: Vec<String> = phrases.to_vec();
        let used: usize = phrases.iter().map(|p| words(p).len()).sum();
        let filler = target.saturating_sub(used);
        let mut sentence: Vec<String> = Vec::new();
        let flush = |sentence: &mut Vec<String>, parts: &mut Vec<String>| {
            if !sentence.is_empty() {
                parts.push(format!("{}.", sentence.join(" ")));
                sentence.clear();
            }
        };
        for _ in 0..filler {
            let w = if rng.random_bool(emotion_rate) {
                self.emotion_words[rng.random_range(0..self.emotion_words.len())].clone()
            } else {
                self.vocab.sample(rng).to_string()
            };
            sentence.push(w);
            if rng.random_range(0..12) == 0 {
                flush(&mut sentence, &mut parts);
            }
        }
        flush(&mut sentence, &mut parts);
        parts.join(" ")
    }

    fn session(&self, index: usize) -> Session {
        let p = self.params;
        let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
        rng.set_stream(index as u64);

        let n_turns = (draw_positive(&mut rng, p.turns_per_session).round() as usize).max(6);
        let t_mean = draw_positive(&mut rng, p.therapist_length);
        let c_mean = draw_positive(&mut rng, p.client_length);
        let n_client = n_turns / 2;

        // client-turn ordinal -> SUDS value, one report per point
        let mut suds_at: Vec<Option<f64>> = vec![None; n_client];
        for &(frac, value) in &p.suds_trajectory {
            let mut j = (frac * (n_client - 1) as f64).round() as usize;
            while j < n_client && suds_at[j].is_some() {
                j += 1;
            }
            if j < n_client {
                suds_at[j] = Some(value.round());
            }
        }

        let mut turns = Vec::with_capacity(n_turns);
        let mut redirect_next = false;
        for i in 0..n_turns {
            let mut phrases = Vec::new();
            if i % 2 == 0 {
                let next_client = i / 2;
                if redirect_next {
                    phrases.push(pick(&mut rng, REDIRECTION).to_string());
                }
                if next_client < n_client && suds_at[next_client].is_some() {
                    phrases.push(SUDS_PROMPT.to_string());
                }
                if rng.random_bool(p.guidance_rate) {
                    phrases.push(pick(&mut rng, GUIDANCE).to_string());
                }
                let target = self.turn_length(&mut rng, t_mean);
                turns.push(Turn::new(Speaker::Therapist, self.compose(&mut rng, &phrases, target, 0.0)));
                redirect_next = false;
            } else {
                let j = i / 2;
                let third = (3 * j / n_client.max(1)).min(2) as i32;
                let emotion_rate = p.emotion_rate * p.emotion_decay.powi(third);
                if let Some(v) = suds_at[j] {
                    phrases.push(format!("My SUDS is {v}."));
                }
                if i + 1 < n_turns && rng.random_bool(p.avoidance_rate) {
                    phrases.push(pick(&mut rng, AVOIDANCE).to_string());
                    redirect_next = rng.random_bool(p.redirection_probability);
                }
                if rng.random_bool(p.restructuring_rate) {
                    phrases.push(pick(&mut rng, RESTRUCTURING).to_string());
                }
                let target = self.turn_length(&mut rng, c_mean);
                turns.push(Turn::new(Speaker::Client, self.compose(&mut rng, &phrases, target, emotion_rate)));
            }
        }
        let mut s = Session::new(format!("{}-{index:04}", p.id_prefix), p.label, turns);
        s.meta.insert("generator".into(), "simulator".into());
        s
    }
}

pub fn generate_corpus(params: &SimParams) -> Result<Corpus> {
    generate_corpus_with(params, &EmotionLexicon::default(), &PatternRuleSet::default(), &Stopwords::default())
}

/// Generate with explicit resources; pseudo-words avoid every lexicon
/// entry, stopword and marker pattern so they never trigger a metric.
pub fn generate_corpus_with(
    params: &SimParams,
    lexicon: &EmotionLexicon,
    rules: &PatternRuleSet,
    stopwords: &Stopwords,
) -> Result<Corpus> {
    params.validate()?;
    if lexicon.is_empty() {
        return Err(Error::InvalidLexicon("simulator needs a non-empty emotion lexicon".into()));
    }
    let mut emotion_words: Vec<String> = lexicon.words().map(str::to_string).collect();
    emotion_words.sort();
    let gen = Generator {
        params,
        vocab: Vocabulary::generate(params.vocab_size, params.seed, lexicon, rules, stopwords),
        emotion_words,
    };
    let sessions = (0..params.session_count).map(|i| gen.session(i)).collect();
    Ok(Corpus { label: params.label, sessions })
}
