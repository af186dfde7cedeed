//! Add-alpha smoothed n-gram language model and per-session perplexity.

use std::collections::{BTreeMap, HashMap};

use fnv::FnvHashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lexical::words;
use crate::transcript::{Corpus, Session};

pub const UNK: &str = "<unk>";
pub const BOS: &str = "<s>";
pub const EOS: &str = "</s>";

const UNK_ID: u32 = 0;
const BOS_ID: u32 = 1;
const EOS_ID: u32 = 2;
const FIRST_WORD_ID: u32 = 3;

/// Tokens seen fewer times than this in training map to UNK.
pub const MIN_COUNT: usize = 2;

#[derive(Debug, Clone)]
pub struct NGramModel {
    order: usize,
    alpha: f64,
    /// Sorted vocabulary; word id = index + FIRST_WORD_ID.
    vocabulary: Vec<String>,
    index: HashMap<String, u32>,
    counts: FnvHashMap<Vec<u32>, FnvHashMap<u32, u64>>,
    context_totals: FnvHashMap<Vec<u32>, u64>,
}

impl NGramModel {
    fn empty(order: usize, alpha: f64, mut vocabulary: Vec<String>) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidParameter("n-gram order must be >= 1".into()));
        }
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidParameter(format!("smoothing alpha must be positive, got {alpha}")));
        }
        vocabulary.sort();
        vocabulary.dedup();
        vocabulary.retain(|w| w != UNK && w != BOS && w != EOS);
        let index = vocabulary
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32 + FIRST_WORD_ID))
            .collect();
        Ok(NGramModel {
            order,
            alpha,
            vocabulary,
            index,
            counts: FnvHashMap::default(),
            context_totals: FnvHashMap::default(),
        })
    }

    /// A model with no observations; every conditional is uniform.
    pub fn untrained(order: usize, alpha: f64, vocabulary: Vec<String>) -> Result<Self> {
        Self::empty(order, alpha, vocabulary)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    /// Size of the predicted outcome space: vocabulary plus UNK and EOS.
    pub fn outcome_count(&self) -> usize {
        self.vocabulary.len() + 2
    }

    fn id(&self, word: &str) -> u32 {
        match word {
            EOS => EOS_ID,
            BOS => BOS_ID,
            _ => self.index.get(word).copied().unwrap_or(UNK_ID),
        }
    }

    fn name(&self, id: u32) -> &str {
        match id {
            UNK_ID => UNK,
            BOS_ID => BOS,
            EOS_ID => EOS,
            _ => &self.vocabulary[(id - FIRST_WORD_ID) as usize],
        }
    }

    fn observe(&mut self, context: &[u32], word: u32) {
        *self
            .counts
            .entry(context.to_vec())
            .or_default()
            .entry(word)
            .or_insert(0) += 1;
        *self.context_totals.entry(context.to_vec()).or_insert(0) += 1;
    }

    /// P(word | context). The context is padded on the left with BOS and
    /// truncated to the last `order - 1` symbols; OOV words map to UNK.
    pub fn prob(&self, context: &[&str], word: &str) -> f64 {
        let hist = self.padded_context(context);
        self.cond_prob(&hist, self.id(word))
    }

    fn padded_context(&self, context: &[&str]) -> Vec<u32> {
        let need = self.order - 1;
        let mut ids: Vec<u32> = context.iter().map(|w| self.id(w)).collect();
        if ids.len() >= need {
            ids.drain(..ids.len() - need);
        } else {
            let mut padded = vec![BOS_ID; need - ids.len()];
            padded.extend(ids);
            ids = padded;
        }
        ids
    }

    /// Every predictable outcome symbol (vocabulary, UNK, EOS).
    pub fn outcomes(&self) -> impl Iterator<Item = &str> {
        [UNK, EOS]
            .into_iter()
            .chain(self.vocabulary.iter().map(String::as_str))
    }

    fn utterance_ids(&self, text: &str) -> Vec<u32> {
        words(text).iter().map(|w| self.id(w)).collect()
    }

    /// Sum of natural-log probabilities and the number of scored symbols
    /// (tokens plus one EOS per non-empty utterance).
    pub fn log_prob_session(&self, session: &Session) -> (f64, usize) {
        let mut total = 0.0;
        let mut n = 0;
        for turn in &session.turns {
            let ids = self.utterance_ids(&turn.text);
            if ids.is_empty() {
                continue;
            }
            let mut window = vec![BOS_ID; self.order - 1];
            for id in ids.into_iter().chain(std::iter::once(EOS_ID)) {
                window.push(id);
                let ctx_end = window.len() - 1;
                let ctx = &window[ctx_end + 1 - self.order..ctx_end];
                total += self.cond_prob(ctx, id).ln();
                n += 1;
            }
        }
        (total, n)
    }

    fn cond_prob(&self, hist: &[u32], word: u32) -> f64 {
        let total = self.context_totals.get(hist).copied().unwrap_or(0);
        let count = self
            .counts
            .get(hist)
            .and_then(|m| m.get(&word))
            .copied()
            .unwrap_or(0);
        (count as f64 + self.alpha) / (total as f64 + self.alpha * self.outcome_count() as f64)
    }

    pub fn dump(&self) -> ModelDump {
        let mut counts: Vec<CountEntry> = self
            .counts
            .iter()
            .flat_map(|(ctx, m)| {
                m.iter().map(move |(w, c)| CountEntry {
                    context: ctx.iter().map(|&id| self.name(id).to_string()).collect(),
                    word: self.name(*w).to_string(),
                    count: *c,
                })
            })
            .collect();
        counts.sort_by(|a, b| (&a.context, &a.word).cmp(&(&b.context, &b.word)));
        ModelDump {
            order: self.order,
            alpha: self.alpha,
            vocabulary: self.vocabulary.clone(),
            counts,
        }
    }

    pub fn from_dump(dump: &ModelDump) -> Result<Self> {
        let mut model = Self::empty(dump.order, dump.alpha, dump.vocabulary.clone())?;
        for e in &dump.counts {
            if e.context.len() != model.order - 1 {
                return Err(Error::InvalidParameter(format!(
                    "context {:?} has wrong length for order {}",
                    e.context, model.order
                )));
            }
            if e.count == 0 {
                return Err(Error::InvalidParameter("stored counts must be >= 1".into()));
            }
            let ctx: Vec<u32> = e.context.iter().map(|w| model.id(w)).collect();
            let w = model.id(&e.word);
            *model.counts.entry(ctx.clone()).or_default().entry(w).or_insert(0) += e.count;
            *model.context_totals.entry(ctx).or_insert(0) += e.count;
        }
        Ok(model)
    }
}

/// Flattened JSON form of a trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDump {
    pub order: usize,
    pub alpha: f64,
    pub vocabulary: Vec<String>,
    pub counts: Vec<CountEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountEntry {
    pub context: Vec<String>,
    pub word: String,
    pub count: u64,
}

pub fn train(corpus: &Corpus, order: usize, alpha: f64) -> Result<NGramModel> {
    let refs: Vec<&Session> = corpus.sessions.iter().collect();
    train_sessions(&refs, order, alpha)
}

/// Train on the given sessions; each turn is one utterance, padded with
/// `order - 1` BOS symbols and closed by EOS.
pub fn train_sessions(sessions: &[&Session], order: usize, alpha: f64) -> Result<NGramModel> {
    if sessions.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let utterances: Vec<Vec<String>> = sessions
        .iter()
        .flat_map(|s| s.turns.iter().map(|t| words(&t.text)))
        .filter(|u| !u.is_empty())
        .collect();
    let mut freq: BTreeMap<&str, usize> = BTreeMap::new();
    for w in utterances.iter().flatten() {
        *freq.entry(w.as_str()).or_insert(0) += 1;
    }
    let vocabulary = freq
        .into_iter()
        .filter(|&(_, c)| c >= MIN_COUNT)
        .map(|(w, _)| w.to_string())
        .collect();
    let mut model = NGramModel::empty(order, alpha, vocabulary)?;
    for u in &utterances {
        let mut window = vec![BOS_ID; order - 1];
        let ids: Vec<u32> = u.iter().map(|w| model.id(w)).collect();
        for id in ids.into_iter().chain(std::iter::once(EOS_ID)) {
            let ctx = window[window.len() + 1 - order..].to_vec();
            model.observe(&ctx, id);
            window.push(id);
        }
    }
    Ok(model)
}

/// Shared scoring model for a corpus pair: an equal number of sessions is
/// drawn from each corpus by seeded shuffle and pooled for training.
pub fn train_reference(
    a: &Corpus,
    b: &Corpus,
    order: usize,
    alpha: f64,
    seed: u64,
) -> Result<NGramModel> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let k = a.len().min(b.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pick = |c: &Corpus| {
        let mut idx: Vec<usize> = (0..c.len()).collect();
        idx.shuffle(&mut rng);
        idx.truncate(k);
        idx.sort_unstable();
        idx
    };
    let ia = pick(a);
    let ib = pick(b);
    let pool: Vec<&Session> = ia
        .iter()
        .map(|&i| &a.sessions[i])
        .chain(ib.iter().map(|&i| &b.sessions[i]))
        .collect();
    train_sessions(&pool, order, alpha)
}

/// exp of the negative mean per-symbol log-probability over the session.
pub fn avg_perplexity(model: &NGramModel, session: &Session) -> Result<f64> {
    let (lp, n) = model.log_prob_session(session);
    if n == 0 {
        return Err(Error::EmptySession(session.session_id.clone()));
    }
    Ok((-lp / n as f64).exp())
}
