//! Embedding providers. The default is an offline character-trigram hasher.

use crate::error::Result;

/// Maps texts to dense vectors. Must be deterministic for a fixed input.
pub trait EmbeddingProvider: Send + Sync {
    fn dimension(&self) -> usize;
    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>>;
}

/// Hashes lower-cased character trigrams into a fixed number of buckets and
/// L2-normalises the counts.
#[derive(Debug, Clone)]
pub struct TrigramHasher {
    dim: usize,
}

impl TrigramHasher {
    pub fn new(dim: usize) -> Self {
        assert!(dim > 0);
        TrigramHasher { dim }
    }

    fn embed_one(&self, text: &str) -> Vec<f64> {
        let norm = normalize_text(text);
        let chars: Vec<char> = std::iter::once('^')
            .chain(std::iter::once('^'))
            .chain(norm.chars())
            .chain(std::iter::once('$'))
            .collect();
        let mut v = vec![0.0; self.dim];
        for w in chars.windows(3) {
            let mut h: u64 = 0xcbf2_9ce4_8422_2325;
            for c in w {
                let mut buf = [0u8; 4];
                for b in c.encode_utf8(&mut buf).bytes() {
                    h = (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3);
                }
            }
            v[(h % self.dim as u64) as usize] += 1.0;
        }
        let len = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if len > 0.0 {
            v.iter_mut().for_each(|x| *x /= len);
        }
        v
    }
}

impl Default for TrigramHasher {
    fn default() -> Self {
        TrigramHasher::new(512)
    }
}

impl EmbeddingProvider for TrigramHasher {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f64>>> {
        Ok(texts.iter().map(|t| self.embed_one(t)).collect())
    }
}

/// Case-folded, whitespace-collapsed form used for all text comparisons.
pub fn normalize_text(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// `1 - cos(a, b)`; a zero vector is at distance 1 from everything.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 1.0;
    }
    (1.0 - dot / (na * nb)).clamp(0.0, 2.0)
}
