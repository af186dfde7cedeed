//! Emotion lexicon and pattern rule sets. Rule content is data: the
//! bundled defaults live in `data/` and can be replaced at run time.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use regex::RegexSet;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lexical::words;

const DEFAULT_LEXICON: &str = include_str!("../../data/emotion_lexicon.tsv");
const DEFAULT_RULES: &str = include_str!("../../data/pe_rules.json");
const DEFAULT_STOPWORDS: &str = include_str!("../../data/stopwords.txt");

#[derive(Debug, Clone, PartialEq)]
pub struct EmotionLexicon {
    pub name: String,
    pub version: String,
    entries: HashMap<String, f64>,
}

impl EmotionLexicon {
    /// Parse `word<TAB>weight` lines. Blank lines and `#` comments are skipped.
    pub fn from_tsv(name: &str, version: &str, text: &str) -> Result<Self> {
        let mut entries = HashMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (word, weight) = line.split_once('\t').ok_or_else(|| {
                Error::InvalidLexicon(format!("line {}: expected word<TAB>weight", i + 1))
            })?;
            let weight: f64 = weight.trim().parse().map_err(|_| {
                Error::InvalidLexicon(format!("line {}: bad weight {weight:?}", i + 1))
            })?;
            if !(weight > 0.0 && weight <= 1.0) {
                return Err(Error::InvalidLexicon(format!(
                    "line {}: weight {weight} outside (0,1]",
                    i + 1
                )));
            }
            let word = word.trim().to_lowercase();
            if word.is_empty() {
                return Err(Error::InvalidLexicon(format!("line {}: empty word", i + 1)));
            }
            entries.insert(word, weight);
        }
        if entries.is_empty() {
            return Err(Error::InvalidLexicon("lexicon has no entries".into()));
        }
        Ok(EmotionLexicon {
            name: name.to_string(),
            version: version.to_string(),
            entries,
        })
    }

    pub fn from_entries<I: IntoIterator<Item = (String, f64)>>(entries: I) -> Result<Self> {
        let tsv: String = entries
            .into_iter()
            .map(|(w, x)| format!("{w}\t{x}\n"))
            .collect();
        Self::from_tsv("custom", "0", &tsv)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        Self::from_tsv(&name, "file", &text)
    }

    pub fn weight(&self, word: &str) -> Option<f64> {
        self.entries.get(word).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn words(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

impl Default for EmotionLexicon {
    fn default() -> Self {
        EmotionLexicon::from_tsv("default-emotion", "1", DEFAULT_LEXICON)
            .expect("bundled lexicon is valid")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RuleGroup {
    AvoidanceMarkers,
    RedirectionMarkers,
    GuidanceMarkers,
    RestructuringMarkers,
    EngagementMarkers,
}

impl RuleGroup {
    pub const ALL: [RuleGroup; 5] = [
        RuleGroup::AvoidanceMarkers,
        RuleGroup::RedirectionMarkers,
        RuleGroup::GuidanceMarkers,
        RuleGroup::RestructuringMarkers,
        RuleGroup::EngagementMarkers,
    ];

    pub fn key(self) -> &'static str {
        match self {
            RuleGroup::AvoidanceMarkers => "avoidance_markers",
            RuleGroup::RedirectionMarkers => "redirection_markers",
            RuleGroup::GuidanceMarkers => "guidance_markers",
            RuleGroup::RestructuringMarkers => "restructuring_markers",
            RuleGroup::EngagementMarkers => "engagement_markers",
        }
    }
}

/// Case-insensitive phrase/regex groups. Each pattern is anchored on word
/// boundaries at both ends.
#[derive(Debug, Clone)]
pub struct PatternRuleSet {
    sources: BTreeMap<RuleGroup, Vec<String>>,
    compiled: BTreeMap<RuleGroup, RegexSet>,
    pub redirection_window: usize,
}

impl PatternRuleSet {
    pub fn new(groups: BTreeMap<RuleGroup, Vec<String>>, redirection_window: usize) -> Result<Self> {
        if redirection_window == 0 {
            return Err(Error::InvalidRules("redirection_window must be positive".into()));
        }
        let mut compiled = BTreeMap::new();
        for group in RuleGroup::ALL {
            let patterns = groups
                .get(&group)
                .filter(|p| !p.is_empty())
                .ok_or_else(|| Error::InvalidRules(format!("group {} is missing or empty", group.key())))?;
            let wrapped: Vec<String> = patterns.iter().map(|p| format!(r"(?i)\b(?:{p})\b")).collect();
            let set = RegexSet::new(&wrapped)
                .map_err(|e| Error::InvalidRules(format!("{}: {e}", group.key())))?;
            compiled.insert(group, set);
        }
        Ok(PatternRuleSet {
            sources: groups,
            compiled,
            redirection_window,
        })
    }

    /// Parse the JSON rule file: `{group_name: [patterns], "redirection_window": n}`.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::InvalidRules("rule file must be a JSON object".into()))?;
        let mut groups = BTreeMap::new();
        let mut window = None;
        for (key, v) in obj {
            if key == "redirection_window" {
                window = Some(v.as_u64().ok_or_else(|| {
                    Error::InvalidRules("redirection_window must be a positive integer".into())
                })? as usize);
                continue;
            }
            let group = RuleGroup::ALL
                .into_iter()
                .find(|g| g.key() == key)
                .ok_or_else(|| Error::InvalidRules(format!("unknown group {key:?}")))?;
            let patterns = v
                .as_array()
                .ok_or_else(|| Error::InvalidRules(format!("{key} must be a list of strings")))?
                .iter()
                .map(|p| {
                    p.as_str()
                        .map(str::to_string)
                        .ok_or_else(|| Error::InvalidRules(format!("{key} must be a list of strings")))
                })
                .collect::<Result<Vec<_>>>()?;
            groups.insert(group, patterns);
        }
        let window =
            window.ok_or_else(|| Error::InvalidRules("missing redirection_window".into()))?;
        Self::new(groups, window)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn patterns(&self, group: RuleGroup) -> &[String] {
        self.sources.get(&group).map_or(&[], Vec::as_slice)
    }

    pub fn matches(&self, group: RuleGroup, text: &str) -> bool {
        let folded = text.replace('\u{2019}', "'");
        self.compiled[&group].is_match(&folded)
    }
}

impl Default for PatternRuleSet {
    fn default() -> Self {
        PatternRuleSet::from_json(DEFAULT_RULES).expect("bundled rules are valid")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stopwords(HashSet<String>);

impl Stopwords {
    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word)
    }
}

impl Default for Stopwords {
    fn default() -> Self {
        Stopwords(DEFAULT_STOPWORDS.split_whitespace().flat_map(words).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_data_loads() {
        let lex = EmotionLexicon::default();
        assert!(lex.len() >= 290, "{}", lex.len());
        assert!(lex.words().all(|w| w == w.to_lowercase()));
        let rules = PatternRuleSet::default();
        assert_eq!(rules.redirection_window, 2);
        let total: usize = RuleGroup::ALL.iter().map(|g| rules.patterns(*g).len()).sum();
        assert!(total >= 50);
        assert!(Stopwords::default().contains("the"));
        assert!(Stopwords::default().contains("don't"));
    }

    #[test]
    fn lexicon_validation() {
        assert!(EmotionLexicon::from_tsv("x", "1", "scared\t0.8\n").is_ok());
        assert!(EmotionLexicon::from_tsv("x", "1", "scared\t1.5\n").is_err());
        assert!(EmotionLexicon::from_tsv("x", "1", "scared\t0\n").is_err());
        assert!(EmotionLexicon::from_tsv("x", "1", "scared 0.5\n").is_err());
        assert!(matches!(
            EmotionLexicon::from_tsv("x", "1", "# only a comment\n"),
            Err(Error::InvalidLexicon(_))
        ));
        let l = EmotionLexicon::from_tsv("x", "1", "Scared\t0.8\n").unwrap();
        assert_eq!(l.weight("scared"), Some(0.8));
    }

    #[test]
    fn rule_validation() {
        let base = r#"{"avoidance_markers":["a"],"redirection_markers":["b"],"guidance_markers":["c"],
            "restructuring_markers":["d"],"engagement_markers":["e"],"redirection_window":2}"#;
        assert!(PatternRuleSet::from_json(base).is_ok());
        assert!(PatternRuleSet::from_json(&base.replace(r#"["e"]"#, "[]")).is_err());
        assert!(PatternRuleSet::from_json(&base.replace(r#"["a"]"#, r#"["(unclosed"]"#)).is_err());
        assert!(PatternRuleSet::from_json(&base.replace(r#","redirection_window":2"#, "")).is_err());
        assert!(PatternRuleSet::from_json(&base.replace("avoidance_markers", "other")).is_err());
        assert!(PatternRuleSet::from_json(&base.replace(":2}", ":0}")).is_err());
    }

    #[test]
    fn default_patterns_match_expected_phrases() {
        let r = PatternRuleSet::default();
        assert!(r.matches(RuleGroup::GuidanceMarkers, "Now close your eyes."));
        assert!(r.matches(RuleGroup::AvoidanceMarkers, "I don\u{2019}t want to talk about it."));
        assert!(r.matches(RuleGroup::RedirectionMarkers, "Let's go back to the memory."));
        assert!(r.matches(RuleGroup::RestructuringMarkers, "Maybe it wasn't my fault."));
        assert!(r.matches(RuleGroup::EngagementMarkers, "I felt so scared"));
        assert!(!r.matches(RuleGroup::GuidanceMarkers, "The weather is nice."));
        // word boundaries: no match inside longer words
        assert!(!r.matches(RuleGroup::GuidanceMarkers, "hotspotsx"));
    }
}
