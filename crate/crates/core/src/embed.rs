//! Text embedders used by the coherence metrics.

use std::hash::Hasher;

use fnv::FnvHasher;

use crate::lexical::words;

/// Maps text to a fixed-length vector. Implementations must be
/// deterministic and usable from several threads at once.
pub trait Embedder: Send + Sync {
    fn dimension(&self) -> usize;
    fn embed(&self, text: &str) -> Vec<f64>;

    /// Embedding of every prefix of `texts`: element `i` embeds
    /// `texts[..=i]` joined by single spaces.
    fn embed_prefixes(&self, texts: &[&str]) -> Vec<Vec<f64>> {
        let mut prefix = String::new();
        texts
            .iter()
            .map(|t| {
                if !prefix.is_empty() {
                    prefix.push(' ');
                }
                prefix.push_str(t);
                self.embed(&prefix)
            })
            .collect()
    }
}

pub const DEFAULT_DIMENSION: usize = 512;
pub const DEFAULT_SEED: u64 = 0x005e_ed0f_d1a1;

/// Hashed bag of words: each token adds one to a bucket chosen by a seeded
/// FNV-1a hash; the count vector is L2-normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashingEmbedder {
    dimension: usize,
    seed: u64,
}

impl HashingEmbedder {
    pub fn new(dimension: usize, seed: u64) -> Self {
        assert!(dimension > 0, "embedding dimension must be positive");
        HashingEmbedder { dimension, seed }
    }

    pub fn bucket(&self, token: &str) -> usize {
        let mut h = FnvHasher::with_key(self.seed);
        h.write(token.as_bytes());
        (h.finish() % self.dimension as u64) as usize
    }

    /// Embed an already tokenized text.
    pub fn embed_tokens<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<f64> {
        let mut v = vec![0.0; self.dimension];
        for t in tokens {
            v[self.bucket(t.as_ref())] += 1.0;
        }
        normalize(&mut v);
        v
    }
}

impl Default for HashingEmbedder {
    fn default() -> Self {
        HashingEmbedder::new(DEFAULT_DIMENSION, DEFAULT_SEED)
    }
}

impl Embedder for HashingEmbedder {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Vec<f64> {
        self.embed_tokens(&words(text))
    }

    /// Bucket counts are additive over tokens, so prefixes accumulate in
    /// linear time instead of re-embedding the growing text.
    fn embed_prefixes(&self, texts: &[&str]) -> Vec<Vec<f64>> {
        let mut counts = vec![0.0; self.dimension];
        texts
            .iter()
            .map(|t| {
                for w in words(t) {
                    counts[self.bucket(&w)] += 1.0;
                }
                let mut v = counts.clone();
                normalize(&mut v);
                v
            })
            .collect()
    }
}

pub fn default_embedder() -> HashingEmbedder {
    HashingEmbedder::default()
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

/// Cosine similarity; 0 when either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    (dot / (na * nb)).clamp(-1.0, 1.0)
}
