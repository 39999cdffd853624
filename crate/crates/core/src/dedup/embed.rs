use crate::error::{Error, Result};

pub type EmbedError = Box<dyn std::error::Error + Send + Sync>;

/// Maps text to a fixed-dimension, L2-normalized vector.
///
/// Implementations must be deterministic. Empty text maps to the zero vector.
pub trait EmbeddingProvider: Sync {
    fn dim(&self) -> usize;
    fn embed(&self, text: &str) -> std::result::Result<Vec<f64>, EmbedError>;
}

/// Character n-gram term frequencies hashed into a fixed number of buckets.
///
/// Grams are taken over Unicode scalar values. Text shorter than `n` but
/// non-empty contributes a single gram (the whole text). Bucket index is
/// FNV-1a over the gram's UTF-8 bytes, so vectors are stable across
/// platforms and releases.
#[derive(Debug, Clone)]
pub struct NgramHashEmbedder {
    n: usize,
    dim: usize,
}

impl Default for NgramHashEmbedder {
    fn default() -> Self {
        NgramHashEmbedder { n: 3, dim: 1024 }
    }
}

impl NgramHashEmbedder {
    pub fn new(n: usize, dim: usize) -> Result<Self> {
        if n == 0 || dim == 0 {
            return Err(Error::argument("n-gram size and dimension must be positive"));
        }
        Ok(NgramHashEmbedder { n, dim })
    }

    pub fn counts(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        if text.is_empty() {
            return v;
        }
        let bounds: Vec<usize> = text
            .char_indices()
            .map(|(i, _)| i)
            .chain(std::iter::once(text.len()))
            .collect();
        let nchars = bounds.len() - 1;
        if nchars < self.n {
            v[bucket(text.as_bytes(), self.dim)] += 1.0;
            return v;
        }
        for start in 0..=nchars - self.n {
            let gram = &text[bounds[start]..bounds[start + self.n]];
            v[bucket(gram.as_bytes(), self.dim)] += 1.0;
        }
        v
    }
}

fn bucket(bytes: &[u8], dim: usize) -> usize {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let h = bytes
        .iter()
        .fold(OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(PRIME));
    (h % dim as u64) as usize
}

impl EmbeddingProvider for NgramHashEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn embed(&self, text: &str) -> std::result::Result<Vec<f64>, EmbedError> {
        let mut v = self.counts(text);
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        Ok(v)
    }
}

/// `a·b / (‖a‖‖b‖)`, or 0 when either vector has zero norm. The result is
/// clamped to [-1, 1] to absorb rounding.
pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::argument(format!(
            "dimension mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let (mut dot, mut na, mut nb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    if na == 0.0 || nb == 0.0 {
        return Ok(0.0);
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cosine_examples() {
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 1.0);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 0.0);
        let s = cosine_similarity(&[1.0, 1.0], &[1.0, 0.0]).unwrap();
        assert!((s - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-4);
        assert_eq!(cosine_similarity(&[0.0, 0.0], &[1.0, 0.0]).unwrap(), 0.0);
        assert!(matches!(
            cosine_similarity(&[1.0], &[1.0, 0.0]),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn empty_text_is_zero_vector() {
        let e = NgramHashEmbedder::default();
        let v = e.embed("").unwrap();
        assert_eq!(v.len(), 1024);
        assert!(v.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn short_text_gets_one_gram() {
        let e = NgramHashEmbedder::default();
        let c = e.counts("ab");
        assert_eq!(c.iter().sum::<f64>(), 1.0);
        // "abcd" has two 3-grams
        assert_eq!(e.counts("abcd").iter().sum::<f64>(), 2.0);
        // multi-byte chars count as one position each
        assert_eq!(e.counts("äöüß").iter().sum::<f64>(), 2.0);
    }

    #[test]
    fn fnv_bucket_is_pinned() {
        // FNV-1a("abc") = 0xe71fa2190541574b
        assert_eq!(
            bucket(b"abc", usize::MAX),
            (0xe71f_a219_0541_574b_u64 % usize::MAX as u64) as usize
        );
        assert_eq!(bucket(b"abc", 1024), (0xe71f_a219_0541_574b_u64 % 1024) as usize);
    }

    proptest! {
        #[test]
        fn embedding_is_unit_norm_and_deterministic(t in ".{1,200}") {
            let e = NgramHashEmbedder::default();
            let a = e.embed(&t).unwrap();
            let b = e.embed(&t).unwrap();
            prop_assert_eq!(&a, &b);
            let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!((norm - 1.0).abs() < 1e-9);
        }
    }
}
