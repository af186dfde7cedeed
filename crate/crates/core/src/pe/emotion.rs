use crate::error::{Error, Result};
use crate::lexical::words;
use crate::pe::rules::EmotionLexicon;
use crate::transcript::{Session, Speaker};

/// Lexicon-weighted emotion density of one utterance.
pub fn utterance_intensity(text: &str, lexicon: &EmotionLexicon) -> f64 {
    let tokens = words(text);
    if tokens.is_empty() {
        return 0.0;
    }
    let sum: f64 = tokens.iter().filter_map(|t| lexicon.weight(t)).sum();
    sum / tokens.len() as f64
}

/// Intensity of each client turn, in order. Therapist turns are skipped.
pub fn emotion_intensity_series(session: &Session, lexicon: &EmotionLexicon) -> Result<Vec<f64>> {
    if lexicon.is_empty() {
        return Err(Error::InvalidLexicon("empty lexicon".into()));
    }
    Ok(session
        .turns_by(Speaker::Client)
        .map(|(_, t)| utterance_intensity(&t.text, lexicon))
        .collect())
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Mean of the first third minus mean of the last third of the series
/// (each third is `len / 3` turns). Positive means intensity fell.
pub fn emotional_habituation(series: &[f64]) -> Option<f64> {
    if series.len() < 3 {
        return None;
    }
    let k = series.len() / 3;
    Some(mean(&series[..k]) - mean(&series[series.len() - k..]))
}

pub fn emotion_intensity(series: &[f64]) -> Option<f64> {
    (!series.is_empty()).then(|| mean(series))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transcript::{CorpusLabel, Turn};

    fn lexicon() -> EmotionLexicon {
        EmotionLexicon::from_entries([("scared".to_string(), 0.8), ("calm".to_string(), 0.4)]).unwrap()
    }

    #[test]
    fn weighted_density() {
        assert!((utterance_intensity("I was scared scared", &lexicon()) - 0.4).abs() < 1e-12);
        assert_eq!(utterance_intensity("nothing here", &lexicon()), 0.0);
        assert_eq!(utterance_intensity("", &lexicon()), 0.0);
    }

    #[test]
    fn series_skips_therapist_and_means_by_hand() {
        let s = Session::new(
            "s",
            CorpusLabel::Other,
            vec![
                Turn::new(Speaker::Therapist, "you seem scared"),
                Turn::new(Speaker::Client, "scared"),
                Turn::new(Speaker::Therapist, "go on"),
                Turn::new(Speaker::Client, "I feel calm now"),
                Turn::new(Speaker::Client, "just tired"),
            ],
        );
        let series = emotion_intensity_series(&s, &lexicon()).unwrap();
        assert_eq!(series, vec![0.8, 0.1, 0.0]);
        // (0.8 + 0.1 + 0.0) / 3
        assert!((emotion_intensity(&series).unwrap() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn habituation_signs() {
        let thirds = [0.8, 0.8, 0.5, 0.5, 0.2, 0.2];
        assert!((emotional_habituation(&thirds).unwrap() - 0.6).abs() < 1e-12);
        assert_eq!(emotional_habituation(&[0.3; 9]), Some(0.0));
        assert!(emotional_habituation(&[0.1, 0.2, 0.3, 0.4]).unwrap() < 0.0);
        assert_eq!(emotional_habituation(&[0.1, 0.2]), None);
        let inc = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7];
        let rev: Vec<f64> = inc.iter().rev().copied().collect();
        assert!((emotional_habituation(&inc).unwrap() + emotional_habituation(&rev).unwrap()).abs() < 1e-12);
    }
}
