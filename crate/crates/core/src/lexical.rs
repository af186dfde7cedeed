//! Tokenization, sentence and syllable counting, readability and
//! vocabulary richness.

use std::collections::HashSet;

use crate::error::{Error, Result};
use crate::transcript::Session;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenizedText {
    pub tokens: Vec<String>,
    pub sentence_count: usize,
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || is_apostrophe(c)
}

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}'
}

/// Lowercased word tokens: maximal runs of letters, digits and apostrophes.
/// Apostrophes at either edge of a run (quote marks) are trimmed and curly
/// apostrophes fold to ASCII.
pub fn words(text: &str) -> Vec<String> {
    text.split(|c: char| !is_word_char(c))
        .map(|run| run.trim_matches(is_apostrophe))
        .filter(|w| !w.is_empty())
        .map(|w| w.to_lowercase().replace('\u{2019}', "'"))
        .collect()
}

/// Sentences end at a run of `.`, `!` or `?` followed by whitespace or the
/// end of text. Only segments holding at least one letter or digit count;
/// non-blank text always has at least one sentence.
pub fn sentence_count(text: &str) -> usize {
    if text.trim().is_empty() {
        return 0;
    }
    let chars: Vec<char> = text.chars().collect();
    let mut count = 0;
    let mut segment_has_word = false;
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if matches!(c, '.' | '!' | '?') {
            let mut j = i;
            while j < chars.len() && matches!(chars[j], '.' | '!' | '?') {
                j += 1;
            }
            if j == chars.len() || chars[j].is_whitespace() {
                if segment_has_word {
                    count += 1;
                }
                segment_has_word = false;
            }
            i = j;
            continue;
        }
        if c.is_alphanumeric() {
            segment_has_word = true;
        }
        i += 1;
    }
    if segment_has_word {
        count += 1;
    }
    count.max(1)
}

pub fn tokenize(text: &str) -> TokenizedText {
    TokenizedText {
        tokens: words(text),
        sentence_count: sentence_count(text),
    }
}

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y')
}

/// Vowel-group syllable estimate with a silent-final-e correction.
///
/// The final vowel group is dropped when it is a silent `e`: a trailing `e`
/// (except consonant + `le`), or the `e` of an `-ed` ending not after `t`/`d`
/// or of an `-es` ending not after a sibilant. Never below 1.
pub fn syllable_count(word: &str) -> usize {
    let letters: Vec<char> = word
        .chars()
        .filter(|c| c.is_alphabetic())
        .flat_map(char::to_lowercase)
        .collect();
    let mut groups = 0;
    let mut prev_vowel = false;
    for &c in &letters {
        let v = is_vowel(c);
        if v && !prev_vowel {
            groups += 1;
        }
        prev_vowel = v;
    }
    if groups > 1 && has_silent_final_e(&letters) {
        groups -= 1;
    }
    groups.max(1)
}

fn has_silent_final_e(w: &[char]) -> bool {
    let n = w.len();
    if n < 3 {
        return false;
    }
    let consonant = |c: char| c.is_alphabetic() && !is_vowel(c);
    match (w[n - 2], w[n - 1]) {
        (_, 'e') => {
            // lone final e after a consonant; "-le" after a consonant is voiced
            let after_consonant = consonant(w[n - 2]);
            let voiced_le = w[n - 2] == 'l' && consonant(w[n - 3]);
            after_consonant && !voiced_le
        }
        ('e', 'd') => consonant(w[n - 3]) && !matches!(w[n - 3], 't' | 'd'),
        ('e', 's') => consonant(w[n - 3]) && !matches!(w[n - 3], 's' | 'x' | 'z' | 'c' | 'g' | 'h'),
        _ => false,
    }
}

/// Aggregate counts feeding the Flesch formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TextCounts {
    pub words: usize,
    pub sentences: usize,
    pub syllables: usize,
}

impl std::ops::Add for TextCounts {
    type Output = TextCounts;

    fn add(self, other: TextCounts) -> TextCounts {
        TextCounts {
            words: self.words + other.words,
            sentences: self.sentences + other.sentences,
            syllables: self.syllables + other.syllables,
        }
    }
}

impl TextCounts {
    pub fn of(text: &str) -> Self {
        let t = tokenize(text);
        TextCounts {
            words: t.tokens.len(),
            sentences: t.sentence_count,
            syllables: t.tokens.iter().map(|w| syllable_count(w)).sum(),
        }
    }

    /// Flesch Reading Ease, unclamped.
    pub fn flesch(&self) -> Result<f64> {
        if self.words == 0 {
            return Err(Error::UndefinedReadability);
        }
        let sentences = self.sentences.max(1) as f64;
        let words = self.words as f64;
        Ok(206.835 - 1.015 * (words / sentences) - 84.6 * (self.syllables as f64 / words))
    }
}

pub fn readability(text: &str) -> Result<f64> {
    TextCounts::of(text).flesch()
}

/// Readability over a whole session. Each turn is counted separately so a
/// turn boundary always closes a sentence.
pub fn session_readability(session: &Session) -> Result<f64> {
    session
        .turns
        .iter()
        .map(|t| TextCounts::of(&t.text))
        .fold(TextCounts::default(), std::ops::Add::add)
        .flesch()
}

/// Type-token ratio over all turns of the session.
pub fn vocabulary_richness(session: &Session) -> Result<f64> {
    let tokens: Vec<String> = session.turns.iter().flat_map(|t| words(&t.text)).collect();
    type_token_ratio(&tokens).ok_or_else(|| Error::EmptySession(session.session_id.clone()))
}

pub fn type_token_ratio<S: AsRef<str>>(tokens: &[S]) -> Option<f64> {
    if tokens.is_empty() {
        return None;
    }
    let distinct: HashSet<&str> = tokens.iter().map(AsRef::as_ref).collect();
    Some(distinct.len() as f64 / tokens.len() as f64)
}
