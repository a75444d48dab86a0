//! Deterministic hashing primitives shared by the text vectorizer, the
//! boosted-tree row/column sampling, and artifact fingerprints.
//!
//! FNV-1a is used wherever cross-run and cross-platform stability matters;
//! the standard library hasher makes no such guarantee. Fingerprints use
//! SHA-256.

use sha2::{Digest, Sha256};

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;

/// 64-bit FNV-1a over raw bytes.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// FNV-1a over a sequence of parts, with a length prefix per part so that
/// `["ab", "c"]` and `["a", "bc"]` hash differently.
pub fn fnv1a64_parts(parts: &[&[u8]]) -> u64 {
    let mut h = FNV_OFFSET;
    for part in parts {
        for &b in (part.len() as u64).to_le_bytes().iter() {
            h ^= u64::from(b);
            h = h.wrapping_mul(FNV_PRIME);
        }
        for &b in part.iter() {
            h ^= u64::from(b);
            h = h.wrapping_mul(FNV_PRIME);
        }
    }
    h
}

/// Finalizing mix (SplitMix64 tail) to spread FNV's weaker high bits.
pub fn mix64(mut x: u64) -> u64 {
    x ^= x >> 30;
    x = x.wrapping_mul(0xbf58476d1ce4e5b9);
    x ^= x >> 27;
    x = x.wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Maps a hash to the unit interval [0, 1).
pub fn unit_f64(h: u64) -> f64 {
    // 53 high bits give a uniform dyadic rational in [0, 1).
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Hex-encoded SHA-256 of a byte string.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_reference_values() {
        // Published FNV-1a test vectors.
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn parts_are_length_prefixed() {
        assert_ne!(
            fnv1a64_parts(&[b"ab", b"c"]),
            fnv1a64_parts(&[b"a", b"bc"])
        );
    }

    #[test]
    fn unit_range() {
        for seed in 0..1000u64 {
            let u = unit_f64(mix64(seed));
            assert!((0.0..1.0).contains(&u));
        }
    }

    #[test]
    fn sha256_known_answer() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
