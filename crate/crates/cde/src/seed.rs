//! Stable seed derivation.
//!
//! Benchmark cells, percentile grids, and sub-tasks (data generation, model
//! initialization, validation draws) each get their own deterministic seed
//! derived from a master seed and a textual tag. The hash is FNV-1a over a
//! canonical byte string, so derived seeds are identical across platforms
//! and releases; `std::hash` offers no such guarantee.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// FNV-1a over a byte string.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Hash of several string parts, separated by an ASCII unit separator so
/// that ("ab","c") and ("a","bc") hash differently.
pub fn stable_hash(parts: &[&str]) -> u64 {
    let mut h = FNV_OFFSET;
    for (i, p) in parts.iter().enumerate() {
        if i > 0 {
            h ^= 0x1f;
            h = h.wrapping_mul(FNV_PRIME);
        }
        for &b in p.as_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(FNV_PRIME);
        }
    }
    h
}

/// Derives a sub-seed from a base seed and a role tag.
pub fn derive_seed(base: u64, tag: &str) -> u64 {
    let mut buf = Vec::with_capacity(8 + tag.len());
    buf.extend_from_slice(&base.to_le_bytes());
    buf.extend_from_slice(tag.as_bytes());
    fnv1a(&buf)
}
