//! Generation-based random linear network coding.
//!
//! Source packets are length-prefixed and padded into fixed-size symbols,
//! collected into generations of at most `n` symbols, and transmitted only as
//! random linear combinations ("equations") over GF(2^8). A receiver recovers
//! the generation once it holds `n` linearly independent equations; slots that
//! become uniquely determined earlier are released early.

mod decoder;
mod encoder;
mod generation;
mod schedule;

pub use decoder::{DecodeStatus, Decoder, ReleasedSlot};
pub use encoder::Encoder;
pub use generation::Generation;
pub use schedule::{emission_schedule, repair_budget, EmissionKind, RepairPlacement, ScheduledEmission};

use thiserror::Error;

use crate::time::SimDuration;

/// Bytes of the big-endian length prefix stored at the start of every symbol.
pub const LENGTH_PREFIX: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("invalid codec config: {0}")]
    InvalidConfig(String),
    #[error("packet of {len} bytes exceeds inner MTU of {max} bytes")]
    ExceedsInnerMtu { len: usize, max: usize },
    #[error("generation {0} is sealed")]
    GenerationSealed(u32),
    #[error("generation is empty")]
    EmptyGeneration,
    #[error("payload length {got} does not match symbol size {expected}")]
    PayloadLength { expected: usize, got: usize },
    #[error("packet for generation {got} pushed into decoder for generation {expected}")]
    GenerationMismatch { expected: u32, got: u32 },
    #[error("coded packet inconsistent with generation: {0}")]
    Inconsistent(String),
    #[error("framing corruption in slot {slot}")]
    FramingCorruption { slot: usize },
}

/// Static parameters shared by an encoder and its peer decoder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodecConfig {
    /// Source packets per generation (`n`), 1..=255.
    pub generation_size: u16,
    /// Extra coded packets per generation (`ω`).
    pub overhead: u16,
    /// Bytes per symbol (`S`), including the 2-byte length prefix.
    pub symbol_size: usize,
    /// How long a partially filled generation may wait before it is sealed.
    pub flush_timeout: SimDuration,
    pub repair_placement: RepairPlacement,
}

impl CodecConfig {
    pub fn new(generation_size: u16, overhead: u16, symbol_size: usize) -> Result<Self, CodecError> {
        let cfg = CodecConfig {
            generation_size,
            overhead,
            symbol_size,
            flush_timeout: SimDuration::from_millis(100),
            repair_placement: RepairPlacement::default(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_flush_timeout(mut self, timeout: SimDuration) -> Self {
        self.flush_timeout = timeout;
        self
    }

    pub fn with_repair_placement(mut self, placement: RepairPlacement) -> Self {
        self.repair_placement = placement;
        self
    }

    pub fn validate(&self) -> Result<(), CodecError> {
        if !(1..=255).contains(&self.generation_size) {
            return Err(CodecError::InvalidConfig(format!(
                "generation size {} outside 1..=255",
                self.generation_size
            )));
        }
        if self.generation_size as u32 + self.overhead as u32 > u16::MAX as u32 {
            return Err(CodecError::InvalidConfig(
                "generation size plus overhead exceeds 65535".into(),
            ));
        }
        if self.symbol_size < LENGTH_PREFIX + 1 || self.symbol_size > u16::MAX as usize {
            return Err(CodecError::InvalidConfig(format!(
                "symbol size {} outside 3..=65535",
                self.symbol_size
            )));
        }
        Ok(())
    }

    /// Largest packet a symbol can carry.
    pub fn max_packet_len(&self) -> usize {
        self.symbol_size - LENGTH_PREFIX
    }

    /// Coded packets emitted for one full generation.
    pub fn emissions_per_generation(&self) -> usize {
        self.generation_size as usize + self.overhead as usize
    }
}

/// One emitted equation: coefficients over the first `k` slots and the
/// matching linear combination of their symbols.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodedPacket {
    pub generation_id: u32,
    /// Generation size as known at emission time (`n`, or `n'` once sealed short).
    pub generation_size: u16,
    /// `c_1..c_k`; the length is the prefix size `k`.
    pub coefficients: Vec<u8>,
    /// `r = Σ c_j p_j`, exactly `S` bytes.
    pub payload: Vec<u8>,
    /// Set on the last emission of a generation.
    pub final_emission: bool,
}

impl CodedPacket {
    pub fn prefix_size(&self) -> usize {
        self.coefficients.len()
    }
}

/// Packs `packet` into an `S`-byte symbol: big-endian length, bytes, zero padding.
pub fn encode_symbol(packet: &[u8], symbol_size: usize) -> Result<Vec<u8>, CodecError> {
    let max = symbol_size.saturating_sub(LENGTH_PREFIX);
    if packet.len() > max {
        return Err(CodecError::ExceedsInnerMtu {
            len: packet.len(),
            max,
        });
    }
    let mut sym = vec![0u8; symbol_size];
    sym[..LENGTH_PREFIX].copy_from_slice(&(packet.len() as u16).to_be_bytes());
    sym[LENGTH_PREFIX..LENGTH_PREFIX + packet.len()].copy_from_slice(packet);
    Ok(sym)
}

/// Inverse of [`encode_symbol`]. `None` when the length prefix is out of range.
pub fn decode_symbol(symbol: &[u8]) -> Option<&[u8]> {
    if symbol.len() < LENGTH_PREFIX {
        return None;
    }
    let len = u16::from_be_bytes([symbol[0], symbol[1]]) as usize;
    symbol.get(LENGTH_PREFIX..LENGTH_PREFIX + len)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_bounds() {
        assert!(CodecConfig::new(30, 6, 1430).is_ok());
        assert!(CodecConfig::new(0, 6, 1430).is_err());
        assert!(CodecConfig::new(256, 6, 1430).is_err());
        assert!(CodecConfig::new(255, 65280, 100).is_ok());
        assert!(CodecConfig::new(255, 65281, 100).is_err());
        assert!(CodecConfig::new(30, 6, 2).is_err());
        assert!(CodecConfig::new(30, 6, 3).is_ok());
    }

    #[test]
    fn symbol_framing() {
        let pkt = vec![0xAB; 1400];
        let sym = encode_symbol(&pkt, 1402).unwrap();
        assert_eq!(&sym[..2], &[0x05, 0x78]);
        assert_eq!(sym.len(), 1402);
        assert_eq!(decode_symbol(&sym), Some(&pkt[..]));

        assert_eq!(
            encode_symbol(&[0xFF], 6).unwrap(),
            vec![0x00, 0x01, 0xFF, 0x00, 0x00, 0x00]
        );
        assert_eq!(
            encode_symbol(&[0; 5], 6),
            Err(CodecError::ExceedsInnerMtu { len: 5, max: 4 })
        );
        assert_eq!(decode_symbol(&[0x00, 0x09, 1, 2]), None);
    }
}
