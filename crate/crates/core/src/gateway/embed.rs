//! Offline embeddings and cosine similarity.

use super::{GatewayError, Result};

pub const HASHED_DIM: usize = 256;

pub type EmbeddingVector = Vec<f64>;

fn fnv1a(token: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in token.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Term-frequency vector over lowercase alphanumeric tokens, hashed into
/// [`HASHED_DIM`] buckets.
pub fn hashed_embedding(text: &str) -> EmbeddingVector {
    let mut v = vec![0.0; HASHED_DIM];
    let lower = text.to_lowercase();
    for token in lower.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()) {
        v[(fnv1a(token) % HASHED_DIM as u64) as usize] += 1.0;
    }
    v
}

pub fn cosine_similarity(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(GatewayError::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(GatewayError::ZeroVector);
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}
