//! Binary strings and a self-delimiting tuple code.
//!
//! `BitString` is an immutable sequence of bits ordered shortlex: shorter
//! strings come first, equal lengths compare lexicographically with 0 < 1.
//! The empty string prints as "e".
//!
//! Tuples of bit strings are packed into a single bit string by prefixing
//! each part with its length. The length is written in binary with every bit
//! doubled (0 -> 00, 1 -> 11) and closed with the pair 01, so a decoder can
//! find the end of the prefix without knowing the length in advance. The
//! encoded tuple is at most 2*(sum of part lengths) + 4*arity bits long.

use std::fmt;
use thiserror::Error;

#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BitString {
    bits: Vec<bool>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BitStringError {
    #[error("invalid character {0:?} in bit string literal")]
    BadChar(char),
    #[error("malformed tuple code")]
    MalformedCode,
}

impl BitString {
    pub fn empty() -> Self {
        BitString { bits: Vec::new() }
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        BitString { bits }
    }

    /// Parses "0"/"1" text; "e" (alone) denotes the empty string.
    pub fn parse(text: &str) -> Result<Self, BitStringError> {
        if text == "e" {
            return Ok(BitString::empty());
        }
        let mut bits = Vec::with_capacity(text.len());
        for ch in text.chars() {
            match ch {
                '0' => bits.push(false),
                '1' => bits.push(true),
                other => return Err(BitStringError::BadChar(other)),
            }
        }
        Ok(BitString { bits })
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn push(&mut self, bit: bool) {
        self.bits.push(bit);
    }

    pub fn concat(&self, other: &BitString) -> BitString {
        let mut bits = self.bits.clone();
        bits.extend_from_slice(&other.bits);
        BitString { bits }
    }

    /// Minimal binary representation of an integer, MSB first; 0 maps to the
    /// empty string. Injective, and |bits(k)| = floor(log2 k) + 1 for k > 0.
    pub fn from_int(value: u64) -> Self {
        if value == 0 {
            return BitString::empty();
        }
        let width = 64 - value.leading_zeros();
        let bits = (0..width).rev().map(|i| (value >> i) & 1 == 1).collect();
        BitString { bits }
    }

    /// Value of the bits read as big-endian binary; e -> 0. None above 63 bits.
    pub fn to_int(&self) -> Option<u64> {
        if self.bits.len() > 63 {
            return None;
        }
        let mut v = 0u64;
        for &b in &self.bits {
            v = v * 2 + u64::from(b);
        }
        Some(v)
    }

    /// Position in shortlex order: e -> 0, "0" -> 1, "1" -> 2, "00" -> 3, ...
    pub fn shortlex_index(&self) -> u64 {
        let mut idx = 0u64;
        for &b in &self.bits {
            idx = idx * 2 + if b { 2 } else { 1 };
        }
        idx
    }

    /// Inverse of `shortlex_index`.
    pub fn from_shortlex_index(mut idx: u64) -> Self {
        let mut rev = Vec::new();
        while idx > 0 {
            if idx % 2 == 1 {
                rev.push(false);
                idx = (idx - 1) / 2;
            } else {
                rev.push(true);
                idx = (idx - 2) / 2;
            }
        }
        rev.reverse();
        BitString { bits: rev }
    }

    /// All strings of length exactly `len`, in lexicographic order.
    pub fn all_of_len(len: usize) -> Vec<BitString> {
        assert!(len < 32, "enumeration limited to short strings");
        (0..(1u64 << len))
            .map(|v| {
                let bits = (0..len).rev().map(|i| (v >> i) & 1 == 1).collect();
                BitString { bits }
            })
            .collect()
    }

    /// All strings of length at most `len`, shortlex order.
    pub fn all_up_to_len(len: usize) -> Vec<BitString> {
        let mut out = Vec::new();
        for l in 0..=len {
            out.extend(BitString::all_of_len(l));
        }
        out
    }
}

impl Ord for BitString {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.bits
            .len()
            .cmp(&other.bits.len())
            .then_with(|| self.bits.cmp(&other.bits))
    }
}

impl PartialOrd for BitString {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.bits.is_empty() {
            return f.write_str("e");
        }
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({})", self)
    }
}

impl std::str::FromStr for BitString {
    type Err = BitStringError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BitString::parse(s)
    }
}

fn push_length_prefix(out: &mut Vec<bool>, len: usize) {
    // Doubled binary digits of the length, then the 01 terminator.
    for &b in BitString::from_int(len as u64).bits() {
        out.push(b);
        out.push(b);
    }
    out.push(false);
    out.push(true);
}

pub fn encode_tuple(parts: &[BitString]) -> BitString {
    let mut out = Vec::new();
    for part in parts {
        push_length_prefix(&mut out, part.len());
        out.extend_from_slice(part.bits());
    }
    BitString::from_bits(out)
}

pub fn decode_tuple(code: &BitString, arity: usize) -> Result<Vec<BitString>, BitStringError> {
    let bits = code.bits();
    let mut pos = 0usize;
    let mut parts = Vec::with_capacity(arity);
    for _ in 0..arity {
        let mut len_bits = Vec::new();
        loop {
            if pos + 2 > bits.len() {
                return Err(BitStringError::MalformedCode);
            }
            match (bits[pos], bits[pos + 1]) {
                (false, false) => len_bits.push(false),
                (true, true) => len_bits.push(true),
                (false, true) => {
                    pos += 2;
                    break;
                }
                (true, false) => return Err(BitStringError::MalformedCode),
            }
            pos += 2;
        }
        let mut len = 0usize;
        for b in len_bits {
            len = len
                .checked_mul(2)
                .and_then(|v| v.checked_add(b as usize))
                .ok_or(BitStringError::MalformedCode)?;
        }
        if pos + len > bits.len() {
            return Err(BitStringError::MalformedCode);
        }
        parts.push(BitString::from_bits(bits[pos..pos + len].to_vec()));
        pos += len;
    }
    if pos != bits.len() {
        return Err(BitStringError::MalformedCode);
    }
    Ok(parts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bs(s: &str) -> BitString {
        BitString::parse(s).unwrap()
    }

    #[test]
    fn shortlex_order() {
        let mut v = [bs("1"), bs("e"), bs("00"), bs("0"), bs("10"), bs("01")];
        v.sort();
        let shown: Vec<String> = v.iter().map(|b| b.to_string()).collect();
        assert_eq!(shown, vec!["e", "0", "1", "00", "01", "10"]);
    }

    #[test]
    fn display_round_trip() {
        for s in ["e", "0", "1", "0101", "0000000001"] {
            assert_eq!(bs(s).to_string(), s);
        }
        assert!(BitString::parse("01x").is_err());
    }

    #[test]
    fn int_round_trip() {
        for v in 0..200u64 {
            assert_eq!(BitString::from_int(v).to_int(), Some(v));
        }
        assert_eq!(bs("01").to_int(), Some(1));
        assert_eq!(BitString::from_bits(vec![false; 64]).to_int(), None);
    }

    #[test]
    fn shortlex_index_round_trip() {
        for idx in 0..200u64 {
            let b = BitString::from_shortlex_index(idx);
            assert_eq!(b.shortlex_index(), idx);
        }
        assert_eq!(BitString::from_shortlex_index(0), bs("e"));
        assert_eq!(BitString::from_shortlex_index(1), bs("0"));
        assert_eq!(BitString::from_shortlex_index(2), bs("1"));
        assert_eq!(BitString::from_shortlex_index(3), bs("00"));
    }

    #[test]
    fn tuple_round_trip_small() {
        let cases: Vec<Vec<BitString>> = vec![
            vec![],
            vec![bs("e")],
            vec![bs("e"), bs("e")],
            vec![bs("1")],
            vec![bs("0"), bs("1")],
            vec![bs("1101"), bs("e"), bs("0")],
        ];
        for parts in cases {
            let code = encode_tuple(&parts);
            assert_eq!(decode_tuple(&code, parts.len()).unwrap(), parts);
        }
    }

    #[test]
    fn malformed_rejected() {
        assert_eq!(
            decode_tuple(&bs("1"), 2),
            Err(BitStringError::MalformedCode)
        );
        // 10 is an invalid digit pair in a length prefix
        assert_eq!(
            decode_tuple(&bs("10"), 1),
            Err(BitStringError::MalformedCode)
        );
        // trailing garbage after the last part
        let mut code = encode_tuple(&[bs("1")]);
        code.push(true);
        assert_eq!(decode_tuple(&code, 1), Err(BitStringError::MalformedCode));
        // truncated payload
        assert_eq!(
            decode_tuple(&bs("1101"), 1),
            Err(BitStringError::MalformedCode)
        );
    }

    #[test]
    fn all_two_part_tuples_distinct() {
        // 15 strings of length <= 3, so 225 ordered pairs; the code must
        // separate every one of them.
        let parts = BitString::all_up_to_len(3);
        assert_eq!(parts.len(), 15);
        let mut seen = std::collections::HashSet::new();
        for a in &parts {
            for b in &parts {
                let code = encode_tuple(&[a.clone(), b.clone()]);
                assert!(seen.insert(code.clone()), "collision at ({a}, {b})");
                assert_eq!(decode_tuple(&code, 2).unwrap(), vec![a.clone(), b.clone()]);
            }
        }
        assert_eq!(seen.len(), 225);
    }

    #[test]
    fn encoded_length_bound() {
        let parts = BitString::all_up_to_len(4);
        for a in &parts {
            for b in &parts {
                for c in [bs("e"), bs("10101010")] {
                    let tuple = [a.clone(), b.clone(), c.clone()];
                    let sum: usize = tuple.iter().map(|p| p.len()).sum();
                    let code = encode_tuple(&tuple);
                    assert!(
                        code.len() <= 2 * sum + 4 * tuple.len(),
                        "bound violated for {tuple:?}: {} > {}",
                        code.len(),
                        2 * sum + 4 * tuple.len()
                    );
                }
            }
        }
    }

    #[test]
    fn prefix_decode_is_unambiguous() {
        // decoding with the wrong arity must not silently succeed on a
        // correct code of different arity
        let code = encode_tuple(&[bs("01"), bs("1")]);
        assert!(decode_tuple(&code, 1).is_err());
        assert!(decode_tuple(&code, 3).is_err());
    }
}
