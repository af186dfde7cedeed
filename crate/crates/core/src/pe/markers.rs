//! Pattern-driven metrics: avoidance handling and reduction, and the
//! guidance / restructuring / engagement densities.

use crate::pe::emotion::utterance_intensity;
use crate::pe::rules::{EmotionLexicon, PatternRuleSet, RuleGroup};
use crate::transcript::{Session, Speaker};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AvoidanceMetrics {
    /// Share of avoidance events followed by a redirection; `None` without events.
    pub handling: Option<f64>,
    /// Avoidance rate in the first half of client turns minus the second half.
    pub reduction: f64,
    pub events: usize,
    pub handled: usize,
}

/// Split `n` items into leading and trailing halves of `n / 2` each; the
/// middle item of an odd count belongs to neither.
pub(crate) fn halves(n: usize) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
    let k = n / 2;
    (0..k, n - k..n)
}

fn rate(flags: &[bool]) -> f64 {
    if flags.is_empty() {
        0.0
    } else {
        flags.iter().filter(|&&f| f).count() as f64 / flags.len() as f64
    }
}

pub fn avoidance_metrics(session: &Session, rules: &PatternRuleSet) -> AvoidanceMetrics {
    let turns = &session.turns;
    let mut client_flags = Vec::new();
    let mut events = 0;
    let mut handled = 0;
    for (i, turn) in turns.iter().enumerate() {
        if turn.speaker != Speaker::Client {
            continue;
        }
        let avoids = rules.matches(RuleGroup::AvoidanceMarkers, &turn.text);
        client_flags.push(avoids);
        if !avoids {
            continue;
        }
        events += 1;
        let end = (i + rules.redirection_window).min(turns.len() - 1);
        let redirected = turns[i + 1..=end].iter().any(|t| {
            t.speaker == Speaker::Therapist && rules.matches(RuleGroup::RedirectionMarkers, &t.text)
        });
        if redirected {
            handled += 1;
        }
    }
    let (first, second) = halves(client_flags.len());
    let reduction = if client_flags.len() < 2 {
        0.0
    } else {
        rate(&client_flags[first]) - rate(&client_flags[second])
    };
    AvoidanceMetrics {
        handling: (events > 0).then(|| handled as f64 / events as f64),
        reduction,
        events,
        handled,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarkerDensities {
    pub exposure_guidance: Option<f64>,
    pub cognitive_restructuring: Option<f64>,
    pub emotional_engagement: Option<f64>,
}

fn share<'a>(turns: impl Iterator<Item = &'a str>, pred: impl Fn(&str) -> bool) -> Option<f64> {
    let (mut hit, mut total) = (0usize, 0usize);
    for t in turns {
        total += 1;
        if pred(t) {
            hit += 1;
        }
    }
    (total > 0).then(|| hit as f64 / total as f64)
}

pub fn marker_density_metrics(
    session: &Session,
    rules: &PatternRuleSet,
    lexicon: &EmotionLexicon,
    engagement_threshold: f64,
) -> MarkerDensities {
    let texts = |sp: Speaker| session.turns_by(sp).map(|(_, t)| t.text.as_str());
    MarkerDensities {
        exposure_guidance: share(texts(Speaker::Therapist), |t| {
            rules.matches(RuleGroup::GuidanceMarkers, t)
        }),
        cognitive_restructuring: share(texts(Speaker::Client), |t| {
            rules.matches(RuleGroup::RestructuringMarkers, t)
        }),
        emotional_engagement: share(texts(Speaker::Client), |t| {
            rules.matches(RuleGroup::EngagementMarkers, t)
                || utterance_intensity(t, lexicon) > engagement_threshold
        }),
    }
}
