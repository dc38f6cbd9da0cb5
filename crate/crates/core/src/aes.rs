//! AES encryption primitives, key schedule and a straight-line reference
//! cipher. The state is the standard column-major 4x4 byte matrix: byte
//! `r + 4c` is row `r`, column `c`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Block = [u8; 16];

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AesError {
    #[error("{standard} needs a {expected}-byte key, got {actual} bytes")]
    KeyLength {
        standard: AesStandard,
        expected: usize,
        actual: usize,
    },
    #[error("block must be 16 bytes, got {0}")]
    BlockLength(usize),
    #[error("unknown AES standard {0:?} (expected aes128, aes192 or aes256)")]
    UnknownStandard(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AesStandard {
    Aes128,
    Aes192,
    Aes256,
}

impl AesStandard {
    pub const ALL: [AesStandard; 3] = [
        AesStandard::Aes128,
        AesStandard::Aes192,
        AesStandard::Aes256,
    ];

    pub fn key_bytes(self) -> usize {
        match self {
            AesStandard::Aes128 => 16,
            AesStandard::Aes192 => 24,
            AesStandard::Aes256 => 32,
        }
    }

    /// Key length in 32-bit words (Nk).
    pub fn key_words(self) -> usize {
        self.key_bytes() / 4
    }

    /// Number of rounds (Nr).
    pub fn rounds(self) -> usize {
        match self {
            AesStandard::Aes128 => 10,
            AesStandard::Aes192 => 12,
            AesStandard::Aes256 => 14,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            AesStandard::Aes128 => "aes128",
            AesStandard::Aes192 => "aes192",
            AesStandard::Aes256 => "aes256",
        }
    }
}

impl fmt::Display for AesStandard {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AesStandard {
    type Err = AesError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "aes128" => Ok(AesStandard::Aes128),
            "aes192" => Ok(AesStandard::Aes192),
            "aes256" => Ok(AesStandard::Aes256),
            _ => Err(AesError::UnknownStandard(s.to_string())),
        }
    }
}

#[rustfmt::skip]
pub(crate) const SBOX: [u8; 256] = [
    0x63, 0x7c, 0x77, 0x7b, 0xf2, 0x6b, 0x6f, 0xc5, 0x30, 0x01, 0x67, 0x2b, 0xfe, 0xd7, 0xab, 0x76,
    0xca, 0x82, 0xc9, 0x7d, 0xfa, 0x59, 0x47, 0xf0, 0xad, 0xd4, 0xa2, 0xaf, 0x9c, 0xa4, 0x72, 0xc0,
    0xb7, 0xfd, 0x93, 0x26, 0x36, 0x3f, 0xf7, 0xcc, 0x34, 0xa5, 0xe5, 0xf1, 0x71, 0xd8, 0x31, 0x15,
    0x04, 0xc7, 0x23, 0xc3, 0x18, 0x96, 0x05, 0x9a, 0x07, 0x12, 0x80, 0xe2, 0xeb, 0x27, 0xb2, 0x75,
    0x09, 0x83, 0x2c, 0x1a, 0x1b, 0x6e, 0x5a, 0xa0, 0x52, 0x3b, 0xd6, 0xb3, 0x29, 0xe3, 0x2f, 0x84,
    0x53, 0xd1, 0x00, 0xed, 0x20, 0xfc, 0xb1, 0x5b, 0x6a, 0xcb, 0xbe, 0x39, 0x4a, 0x4c, 0x58, 0xcf,
    0xd0, 0xef, 0xaa, 0xfb, 0x43, 0x4d, 0x33, 0x85, 0x45, 0xf9, 0x02, 0x7f, 0x50, 0x3c, 0x9f, 0xa8,
    0x51, 0xa3, 0x40, 0x8f, 0x92, 0x9d, 0x38, 0xf5, 0xbc, 0xb6, 0xda, 0x21, 0x10, 0xff, 0xf3, 0xd2,
    0xcd, 0x0c, 0x13, 0xec, 0x5f, 0x97, 0x44, 0x17, 0xc4, 0xa7, 0x7e, 0x3d, 0x64, 0x5d, 0x19, 0x73,
    0x60, 0x81, 0x4f, 0xdc, 0x22, 0x2a, 0x90, 0x88, 0x46, 0xee, 0xb8, 0x14, 0xde, 0x5e, 0x0b, 0xdb,
    0xe0, 0x32, 0x3a, 0x0a, 0x49, 0x06, 0x24, 0x5c, 0xc2, 0xd3, 0xac, 0x62, 0x91, 0x95, 0xe4, 0x79,
    0xe7, 0xc8, 0x37, 0x6d, 0x8d, 0xd5, 0x4e, 0xa9, 0x6c, 0x56, 0xf4, 0xea, 0x65, 0x7a, 0xae, 0x08,
    0xba, 0x78, 0x25, 0x2e, 0x1c, 0xa6, 0xb4, 0xc6, 0xe8, 0xdd, 0x74, 0x1f, 0x4b, 0xbd, 0x8b, 0x8a,
    0x70, 0x3e, 0xb5, 0x66, 0x48, 0x03, 0xf6, 0x0e, 0x61, 0x35, 0x57, 0xb9, 0x86, 0xc1, 0x1d, 0x9e,
    0xe1, 0xf8, 0x98, 0x11, 0x69, 0xd9, 0x8e, 0x94, 0x9b, 0x1e, 0x87, 0xe9, 0xce, 0x55, 0x28, 0xdf,
    0x8c, 0xa1, 0x89, 0x0d, 0xbf, 0xe6, 0x42, 0x68, 0x41, 0x99, 0x2d, 0x0f, 0xb0, 0x54, 0xbb, 0x16,
];

const RCON: [u8; 10] = [0x01, 0x02, 0x04, 0x08, 0x10, 0x20, 0x40, 0x80, 0x1b, 0x36];

fn xtime(b: u8) -> u8 {
    (b << 1) ^ if b & 0x80 != 0 { 0x1b } else { 0 }
}

pub fn sub_bytes(s: &Block) -> Block {
    s.map(|b| SBOX[b as usize])
}

/// Row `r` rotates left by `r` positions.
pub fn shift_rows(s: &Block) -> Block {
    let mut out = [0u8; 16];
    for c in 0..4 {
        for r in 0..4 {
            out[r + 4 * c] = s[r + 4 * ((c + r) % 4)];
        }
    }
    out
}

pub fn mix_columns(s: &Block) -> Block {
    let mut out = [0u8; 16];
    for c in 0..4 {
        let col = &s[4 * c..4 * c + 4];
        let all = col[0] ^ col[1] ^ col[2] ^ col[3];
        for r in 0..4 {
            // 2*a_r + 3*a_{r+1} + a_{r+2} + a_{r+3}
            out[4 * c + r] = col[r] ^ all ^ xtime(col[r] ^ col[(r + 1) % 4]);
        }
    }
    out
}

pub fn add_round_key(s: &Block, key: &Block) -> Block {
    let mut out = *s;
    out.iter_mut().zip(key).for_each(|(o, k)| *o ^= k);
    out
}

/// One full round; the final round skips MixColumns.
pub fn round(s: &Block, key: &Block, is_final: bool) -> Block {
    let t = shift_rows(&sub_bytes(s));
    let t = if is_final { t } else { mix_columns(&t) };
    add_round_key(&t, key)
}

fn sub_word(w: u32) -> u32 {
    u32::from_be_bytes(w.to_be_bytes().map(|b| SBOX[b as usize]))
}

/// Derives schedule word `i` from the previous word and the word `nk`
/// positions back.
pub(crate) fn next_word(i: usize, nk: usize, prev: u32, back: u32) -> u32 {
    let mut temp = prev;
    if i.is_multiple_of(nk) {
        temp = sub_word(temp.rotate_left(8)) ^ ((RCON[i / nk - 1] as u32) << 24);
    } else if nk > 6 && i % nk == 4 {
        temp = sub_word(temp);
    }
    back ^ temp
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeySchedule {
    pub standard: AesStandard,
    pub round_keys: Vec<Block>,
}

pub fn key_expansion(key: &[u8], std: AesStandard) -> Result<KeySchedule, AesError> {
    if key.len() != std.key_bytes() {
        return Err(AesError::KeyLength {
            standard: std,
            expected: std.key_bytes(),
            actual: key.len(),
        });
    }
    let nk = std.key_words();
    let total = 4 * (std.rounds() + 1);
    let mut w: Vec<u32> = key
        .chunks_exact(4)
        .map(|c| u32::from_be_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    for i in nk..total {
        let word = next_word(i, nk, w[i - 1], w[i - nk]);
        w.push(word);
    }
    let round_keys = w
        .chunks_exact(4)
        .map(|ws| {
            let mut k = [0u8; 16];
            for (j, word) in ws.iter().enumerate() {
                k[4 * j..4 * j + 4].copy_from_slice(&word.to_be_bytes());
            }
            k
        })
        .collect();
    Ok(KeySchedule {
        standard: std,
        round_keys,
    })
}

pub fn block_from_slice(b: &[u8]) -> Result<Block, AesError> {
    b.try_into().map_err(|_| AesError::BlockLength(b.len()))
}

/// Reference encryption: initial AddRoundKey, Nr-1 full rounds and a final
/// round without MixColumns.
pub fn aes_encrypt_reference(
    block: &[u8],
    key: &[u8],
    std: AesStandard,
) -> Result<Block, AesError> {
    let state = block_from_slice(block)?;
    let ks = key_expansion(key, std)?;
    let nr = std.rounds();
    let mut s = add_round_key(&state, &ks.round_keys[0]);
    for r in 1..nr {
        s = round(&s, &ks.round_keys[r], false);
    }
    Ok(round(&s, &ks.round_keys[nr], true))
}
