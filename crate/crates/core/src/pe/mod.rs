//! Prolonged-Exposure fidelity metrics computed from lexicons, pattern
//! rules and within-session trends.

pub mod emotion;
pub mod markers;
pub mod narrative;
pub mod rules;
pub mod suds;

use serde::{Deserialize, Serialize};

use crate::embed::Embedder;
use crate::transcript::Session;

pub use emotion::{emotion_intensity_series, emotional_habituation};
pub use markers::{avoidance_metrics, marker_density_metrics};
pub use narrative::narrative_metrics;
pub use rules::{EmotionLexicon, PatternRuleSet, RuleGroup, Stopwords};
pub use suds::{extract_suds, suds_progression, SudsEvent};

macro_rules! pe_vector {
    ($($field:ident),+ $(,)?) => {
        /// The ten per-session PE metrics. `None` marks a value that is
        /// undefined for the session (for example no avoidance events).
        #[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
        pub struct PEMetricVector {
            $(pub $field: Option<f64>,)+
        }

        impl PEMetricVector {
            pub const NAMES: &'static [&'static str] = &[$(stringify!($field)),+];

            pub fn values(&self) -> Vec<Option<f64>> {
                vec![$(self.$field),+]
            }

            pub fn get(&self, name: &str) -> Option<Option<f64>> {
                match name {
                    $(stringify!($field) => Some(self.$field),)+
                    _ => None,
                }
            }
        }
    };
}

pe_vector!(
    trauma_narrative_coherence,
    emotional_engagement,
    avoidance_handling,
    exposure_guidance,
    cognitive_restructuring,
    emotional_habituation,
    suds_progression,
    avoidance_reduction,
    emotion_intensity,
    narrative_development,
);

/// Immutable inputs shared by every PE metric computation.
pub struct PeResources<'a> {
    pub lexicon: &'a EmotionLexicon,
    pub rules: &'a PatternRuleSet,
    pub stopwords: &'a Stopwords,
    pub embedder: &'a dyn Embedder,
    pub engagement_threshold: f64,
}

pub fn compute_pe_metrics(session: &Session, res: &PeResources<'_>) -> PEMetricVector {
    let series = emotion_intensity_series(session, res.lexicon).unwrap_or_default();
    let avoidance = avoidance_metrics(session, res.rules);
    let densities =
        marker_density_metrics(session, res.rules, res.lexicon, res.engagement_threshold);
    let narrative = narrative_metrics(session, res.embedder, res.stopwords).ok();

    PEMetricVector {
        trauma_narrative_coherence: narrative.map(|n| n.coherence),
        emotional_engagement: densities.emotional_engagement,
        avoidance_handling: avoidance.handling,
        exposure_guidance: densities.exposure_guidance,
        cognitive_restructuring: densities.cognitive_restructuring,
        emotional_habituation: emotional_habituation(&series),
        suds_progression: suds_progression(&extract_suds(session)),
        avoidance_reduction: Some(avoidance.reduction),
        emotion_intensity: emotion::emotion_intensity(&series),
        narrative_development: narrative.map(|n| n.development),
    }
}
