//! Small text utilities shared by the scanner, the prompt builders and the
//! comparison rules.

use alloc::string::String;

/// Joins all whitespace runs (including newlines) into single spaces and trims.
pub fn collapse_whitespace(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for word in text.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// Whitespace-collapsed, lowercased form used for "same text" judgements.
pub fn normalize_for_comparison(text: &str) -> String {
    collapse_whitespace(text).to_lowercase()
}

/// 64-bit FNV-1a, seeded by folding the seed bytes in first.
pub fn fnv1a64(seed: u64, parts: &[&[u8]]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut hash = OFFSET;
    for byte in seed.to_le_bytes() {
        hash ^= u64::from(byte);
        hash = hash.wrapping_mul(PRIME);
    }
    for part in parts {
        for &byte in *part {
            hash ^= u64::from(byte);
            hash = hash.wrapping_mul(PRIME);
        }
        // part separator so ("ab","c") and ("a","bc") differ
        hash ^= 0x1f;
        hash = hash.wrapping_mul(PRIME);
    }
    // final avalanche (splitmix64 finaliser)
    hash ^= hash >> 30;
    hash = hash.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    hash ^= hash >> 27;
    hash = hash.wrapping_mul(0x94d0_49bb_1331_11eb);
    hash ^ (hash >> 31)
}

/// Bracket depth tracker over `( [ { ⟨ ⦃` and their closers.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct Depth(pub i64);

impl Depth {
    pub fn feed(&mut self, c: char) {
        match c {
            '(' | '[' | '{' | '⟨' | '⦃' => self.0 += 1,
            ')' | ']' | '}' | '⟩' | '⦄' => self.0 -= 1,
            _ => {}
        }
    }

    pub fn at_top(self) -> bool {
        self.0 <= 0
    }
}
