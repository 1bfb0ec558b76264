//! Nilsimsa locality-sensitive digests.
//!
//! Every input byte hashes up to eight trigrams drawn from a five-byte window
//! into a 256-bucket accumulator through the `tran53` table. Digest bit `i`
//! is set iff bucket `i` holds more than the mean bucket count. Bytes are
//! stored in the conventional output order, bucket 255 first.

use std::fmt;
use std::ops::Not;

use crate::error::{Error, Result};

const TRAN: [u8; 256] = [
    0x02, 0xD6, 0x9E, 0x6F, 0xF9, 0x1D, 0x04, 0xAB, 0xD0, 0x22, 0x16, 0x1F, 0xD8, 0x73, 0xA1, 0xAC,
    0x3B, 0x70, 0x62, 0x96, 0x1E, 0x6E, 0x8F, 0x39, 0x9D, 0x05, 0x14, 0x4A, 0xA6, 0xBE, 0xAE, 0x0E,
    0xCF, 0xB9, 0x9C, 0x9A, 0xC7, 0x68, 0x13, 0xE1, 0x2D, 0xA4, 0xEB, 0x51, 0x8D, 0x64, 0x6B, 0x50,
    0x23, 0x80, 0x03, 0x41, 0xEC, 0xBB, 0x71, 0xCC, 0x7A, 0x86, 0x7F, 0x98, 0xF2, 0x36, 0x5E, 0xEE,
    0x8E, 0xCE, 0x4F, 0xB8, 0x32, 0xB6, 0x5F, 0x59, 0xDC, 0x1B, 0x31, 0x4C, 0x7B, 0xF0, 0x63, 0x01,
    0x6C, 0xBA, 0x07, 0xE8, 0x12, 0x77, 0x49, 0x3C, 0xDA, 0x46, 0xFE, 0x2F, 0x79, 0x1C, 0x9B, 0x30,
    0xE3, 0x00, 0x06, 0x7E, 0x2E, 0x0F, 0x38, 0x33, 0x21, 0xAD, 0xA5, 0x54, 0xCA, 0xA7, 0x29, 0xFC,
    0x5A, 0x47, 0x69, 0x7D, 0xC5, 0x95, 0xB5, 0xF4, 0x0B, 0x90, 0xA3, 0x81, 0x6D, 0x25, 0x55, 0x35,
    0xF5, 0x75, 0x74, 0x0A, 0x26, 0xBF, 0x19, 0x5C, 0x1A, 0xC6, 0xFF, 0x99, 0x5D, 0x84, 0xAA, 0x66,
    0x3E, 0xAF, 0x78, 0xB3, 0x20, 0x43, 0xC1, 0xED, 0x24, 0xEA, 0xE6, 0x3F, 0x18, 0xF3, 0xA0, 0x42,
    0x57, 0x08, 0x53, 0x60, 0xC3, 0xC0, 0x83, 0x40, 0x82, 0xD7, 0x09, 0xBD, 0x44, 0x2A, 0x67, 0xA8,
    0x93, 0xE0, 0xC2, 0x56, 0x9F, 0xD9, 0xDD, 0x85, 0x15, 0xB4, 0x8A, 0x27, 0x28, 0x92, 0x76, 0xDE,
    0xEF, 0xF8, 0xB2, 0xB7, 0xC9, 0x3D, 0x45, 0x94, 0x4B, 0x11, 0x0D, 0x65, 0xD5, 0x34, 0x8B, 0x91,
    0x0C, 0xFA, 0x87, 0xE9, 0x7C, 0x5B, 0xB1, 0x4D, 0xE5, 0xD4, 0xCB, 0x10, 0xA2, 0x17, 0x89, 0xBC,
    0xDB, 0xB0, 0xE2, 0x97, 0x88, 0x52, 0xF7, 0x48, 0xD3, 0x61, 0x2C, 0x3A, 0x2B, 0xD1, 0x8C, 0xFB,
    0xF1, 0xCD, 0xE4, 0x6A, 0xE7, 0xA9, 0xFD, 0xC4, 0x37, 0xC8, 0xD2, 0xF6, 0xDF, 0x58, 0x72, 0x4E,
];

#[inline]
fn tran3(a: u8, b: u8, c: u8, n: u8) -> usize {
    let x = TRAN[a.wrapping_add(n) as usize]
        ^ TRAN[b as usize].wrapping_mul(n.wrapping_mul(2).wrapping_add(1));
    x.wrapping_add(TRAN[(c ^ TRAN[n as usize]) as usize]) as usize
}

/// Streaming digest state.
#[derive(Clone)]
pub struct Nilsimsa {
    acc: [u32; 256],
    // window[0] is the most recent byte
    window: [u8; 4],
    seen: usize,
}

impl Default for Nilsimsa {
    fn default() -> Self {
        Nilsimsa {
            acc: [0; 256],
            window: [0; 4],
            seen: 0,
        }
    }
}

impl Nilsimsa {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn update(&mut self, data: &[u8]) {
        for &c in data {
            let [w0, w1, w2, w3] = self.window;
            if self.seen >= 2 {
                self.acc[tran3(c, w0, w1, 0)] += 1;
            }
            if self.seen >= 3 {
                self.acc[tran3(c, w0, w2, 1)] += 1;
                self.acc[tran3(c, w1, w2, 2)] += 1;
            }
            if self.seen >= 4 {
                self.acc[tran3(c, w0, w3, 3)] += 1;
                self.acc[tran3(c, w1, w3, 4)] += 1;
                self.acc[tran3(c, w2, w3, 5)] += 1;
                self.acc[tran3(w3, w0, c, 6)] += 1;
                self.acc[tran3(w3, w2, c, 7)] += 1;
            }
            self.window = [c, w0, w1, w2];
            self.seen += 1;
        }
    }

    pub fn digest(&self) -> NilsimsaDigest {
        let total: u64 = self.acc.iter().map(|&a| a as u64).sum();
        let mut bytes = [0u8; 32];
        for (bucket, &count) in self.acc.iter().enumerate() {
            // count > total / 256
            if (count as u64) * 256 > total {
                bytes[31 - (bucket >> 3)] |= 1 << (bucket & 7);
            }
        }
        NilsimsaDigest(bytes)
    }
}

/// A 256-bit Nilsimsa digest.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct NilsimsaDigest(pub [u8; 32]);

impl NilsimsaDigest {
    pub fn of(data: &[u8]) -> Self {
        let mut n = Nilsimsa::new();
        n.update(data);
        n.digest()
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    pub fn bit_difference(&self, other: &Self) -> u32 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a ^ b).count_ones())
            .sum()
    }

    /// `128 - bit_difference`, in `[-128, 128]`.
    pub fn compare(&self, other: &Self) -> i32 {
        128 - self.bit_difference(other) as i32
    }

    pub fn to_hex(&self) -> String {
        self.0.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn from_hex(hex: &str) -> Result<Self> {
        if hex.len() != 64 || !hex.is_ascii() {
            return Err(Error::InvalidConfig(format!(
                "nilsimsa hex digest must be 64 hex characters, got `{hex}`"
            )));
        }
        let mut bytes = [0u8; 32];
        for (i, out) in bytes.iter_mut().enumerate() {
            *out = u8::from_str_radix(&hex[2 * i..2 * i + 2], 16)
                .map_err(|e| Error::InvalidConfig(format!("bad hex digest: {e}")))?;
        }
        Ok(NilsimsaDigest(bytes))
    }
}

impl Not for NilsimsaDigest {
    type Output = NilsimsaDigest;

    fn not(self) -> Self::Output {
        NilsimsaDigest(self.0.map(|b| !b))
    }
}

impl fmt::Debug for NilsimsaDigest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "NilsimsaDigest({})", self.to_hex())
    }
}

impl fmt::Display for NilsimsaDigest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn known_vectors() {
        assert_eq!(NilsimsaDigest::of(b"").to_hex(), "0".repeat(64));
        assert_eq!(NilsimsaDigest::of(b"ab").to_hex(), "0".repeat(64));
        assert_eq!(
            NilsimsaDigest::of(b"abc").to_hex(),
            "0040000000000000000000000000000000000000000000000000000000000000"
        );
        assert_eq!(
            NilsimsaDigest::of(b"abcdefgh").to_hex(),
            "14c8118000000000030800000004042004189020001308014088003280000078"
        );
        assert_eq!(
            NilsimsaDigest::of(b"The quick brown fox jumps over the lazy dog").to_hex(),
            "02b0b4ae03001086d100c660ab88503545c14ae760282108390a2928020120db"
        );
    }

    #[test]
    fn streaming_matches_one_shot() {
        let data = b"streaming input split across several update calls";
        let mut n = Nilsimsa::new();
        for chunk in data.chunks(7) {
            n.update(chunk);
        }
        assert_eq!(n.digest(), NilsimsaDigest::of(data));
    }

    #[test]
    fn compare_extremes() {
        let d = NilsimsaDigest::of(b"abcdefgh");
        assert_eq!(d.compare(&d), 128);
        assert_eq!(d.compare(&!d), -128);
    }

    #[test]
    fn hex_round_trip() {
        let d = NilsimsaDigest::of(b"hex round trip");
        assert_eq!(NilsimsaDigest::from_hex(&d.to_hex()).unwrap(), d);
        assert!(NilsimsaDigest::from_hex("abc").is_err());
    }

    proptest! {
        #[test]
        fn compare_is_symmetric(a in proptest::collection::vec(any::<u8>(), 0..300),
                                b in proptest::collection::vec(any::<u8>(), 0..300)) {
            let (da, db) = (NilsimsaDigest::of(&a), NilsimsaDigest::of(&b));
            prop_assert_eq!(da.compare(&db), db.compare(&da));
            prop_assert_eq!(da.compare(&da), 128);
            prop_assert!((-128..=128).contains(&da.compare(&db)));
        }
    }
}
