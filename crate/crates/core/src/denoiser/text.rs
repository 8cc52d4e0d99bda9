//! Deterministic prompt embedding, a stand-in for a learned text encoder.
//!
//! For block `j = 0, 1, ...` compute `SHA-256("svr-text-v1" ‖ u32_le(j) ‖ utf8(prompt))`
//! and read the 32-byte digest as eight little-endian `u32` words `w`. Each
//! word contributes `2·w/2^32 − 1`. The first `dim` values are L2-normalized
//! in f64 and rounded to f32.

use sha2::{Digest, Sha256};

pub const TEXT_DIM: usize = 64;
const DOMAIN: &[u8] = b"svr-text-v1";

pub fn text_embed(prompt: &str) -> Vec<f32> {
    text_embed_with_dim(prompt, TEXT_DIM)
}

pub fn text_embed_with_dim(prompt: &str, dim: usize) -> Vec<f32> {
    let mut raw = Vec::with_capacity(dim + 8);
    let mut block = 0u32;
    while raw.len() < dim {
        let mut h = Sha256::new();
        h.update(DOMAIN);
        h.update(block.to_le_bytes());
        h.update(prompt.as_bytes());
        let digest = h.finalize();
        raw.extend(digest.chunks_exact(4).map(|c| {
            let w = u32::from_le_bytes(c.try_into().expect("4 bytes"));
            2.0 * (w as f64 / 4_294_967_296.0) - 1.0
        }));
        block += 1;
    }
    raw.truncate(dim);
    let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        // Unreachable in practice; keeps the unit-norm contract total.
        let mut e = vec![0.0; dim];
        if let Some(first) = e.first_mut() {
            *first = 1.0;
        }
        return e;
    }
    raw.iter().map(|v| (v / norm) as f32).collect()
}
