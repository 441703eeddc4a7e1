//! Wire format of a coded packet inside the tunnel's UDP payload.
//!
//! ```text
//!  0        1        2                                  6
//! +--------+--------+--------+--------+--------+--------+
//! | version| flags  |          generation_id (BE)       |
//! +--------+--------+--------+--------+--------+--------+
//! | generation_size | symbol_size     | prefix_size     |
//! +--------+--------+--------+--------+--------+--------+
//! | k coefficient bytes ...         | S payload bytes ...
//! ```
//!
//! The inner IP packet, including its own addresses, travels entirely inside
//! the payload. Flag bit 0 marks the final emission of a generation; the other
//! bits are written as zero and ignored on parse.

use thiserror::Error;

use crate::codec::{CodecConfig, CodedPacket, LENGTH_PREFIX};

pub const VERSION: u8 = 0x01;
pub const HEADER_LEN: usize = 12;
/// Outer IPv4 (20) + UDP (8) headers.
pub const OUTER_OVERHEAD: usize = 28;

const FLAG_FINAL: u8 = 0x01;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FramingError {
    #[error("unsupported version {0:#04x}")]
    UnsupportedVersion(u8),
    #[error("malformed datagram: {0}")]
    Malformed(&'static str),
    #[error("configuration error: outer path MTU {outer} leaves no room for inner packets")]
    Config { outer: usize },
}

/// Decoded fixed header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NcHeader {
    pub version: u8,
    pub flags: u8,
    pub generation_id: u32,
    pub generation_size: u16,
    pub symbol_size: u16,
    pub prefix_size: u16,
}

impl NcHeader {
    pub fn is_final(&self) -> bool {
        self.flags & FLAG_FINAL != 0
    }

    fn write(&self, out: &mut Vec<u8>) {
        out.push(self.version);
        out.push(self.flags);
        out.extend_from_slice(&self.generation_id.to_be_bytes());
        out.extend_from_slice(&self.generation_size.to_be_bytes());
        out.extend_from_slice(&self.symbol_size.to_be_bytes());
        out.extend_from_slice(&self.prefix_size.to_be_bytes());
    }

    fn read(b: &[u8]) -> Result<Self, FramingError> {
        if b.len() < HEADER_LEN {
            return Err(FramingError::Malformed("shorter than header"));
        }
        let be16 = |i: usize| u16::from_be_bytes([b[i], b[i + 1]]);
        Ok(NcHeader {
            version: b[0],
            flags: b[1],
            generation_id: u32::from_be_bytes([b[2], b[3], b[4], b[5]]),
            generation_size: be16(6),
            symbol_size: be16(8),
            prefix_size: be16(10),
        })
    }
}

/// Exact datagram length for a prefix of `k` coefficients and `S`-byte payload.
pub fn datagram_len(prefix_size: usize, symbol_size: usize) -> usize {
    HEADER_LEN + prefix_size + symbol_size
}

pub fn serialize(cp: &CodedPacket) -> Vec<u8> {
    let mut out = Vec::with_capacity(datagram_len(cp.prefix_size(), cp.payload.len()));
    serialize_into(cp, &mut out);
    out
}

pub fn serialize_into(cp: &CodedPacket, out: &mut Vec<u8>) {
    NcHeader {
        version: VERSION,
        flags: if cp.final_emission { FLAG_FINAL } else { 0 },
        generation_id: cp.generation_id,
        generation_size: cp.generation_size,
        symbol_size: cp.payload.len() as u16,
        prefix_size: cp.prefix_size() as u16,
    }
    .write(out);
    out.extend_from_slice(&cp.coefficients);
    out.extend_from_slice(&cp.payload);
}

pub fn parse(bytes: &[u8]) -> Result<CodedPacket, FramingError> {
    let h = NcHeader::read(bytes)?;
    if h.version != VERSION {
        return Err(FramingError::UnsupportedVersion(h.version));
    }
    let k = h.prefix_size as usize;
    let s = h.symbol_size as usize;
    if h.generation_size == 0 {
        return Err(FramingError::Malformed("zero generation size"));
    }
    if k == 0 || k > h.generation_size as usize {
        return Err(FramingError::Malformed("prefix size out of range"));
    }
    if s <= LENGTH_PREFIX {
        return Err(FramingError::Malformed("symbol size too small"));
    }
    if bytes.len() != datagram_len(k, s) {
        return Err(FramingError::Malformed("length does not match header"));
    }
    let coefficients = bytes[HEADER_LEN..HEADER_LEN + k].to_vec();
    if coefficients.iter().all(|&c| c == 0) {
        return Err(FramingError::Malformed("all-zero coefficients"));
    }
    Ok(CodedPacket {
        generation_id: h.generation_id,
        generation_size: h.generation_size,
        coefficients,
        payload: bytes[HEADER_LEN + k..].to_vec(),
        final_emission: h.is_final(),
    })
}

/// Largest inner packet that fits one outer datagram without fragmentation.
pub fn inner_mtu(outer_path_mtu: usize, config: &CodecConfig) -> Result<usize, FramingError> {
    let overhead = OUTER_OVERHEAD + HEADER_LEN + config.generation_size as usize + LENGTH_PREFIX;
    match outer_path_mtu.checked_sub(overhead) {
        Some(m) if m > 0 => Ok(m),
        _ => Err(FramingError::Config {
            outer: outer_path_mtu,
        }),
    }
}
