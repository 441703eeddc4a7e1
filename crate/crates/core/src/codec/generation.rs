use rand::Rng;

use super::{encode_symbol, repair_budget, CodecConfig, CodecError, CodedPacket};
use crate::gf256;

/// The source symbols `p_1..p_k` of one coding block.
#[derive(Debug, Clone)]
pub struct Generation {
    id: u32,
    capacity: usize,
    symbol_size: usize,
    symbols: Vec<Vec<u8>>,
    sealed: bool,
}

impl Generation {
    pub fn new(id: u32, config: &CodecConfig) -> Self {
        Generation {
            id,
            capacity: config.generation_size as usize,
            symbol_size: config.symbol_size,
            symbols: Vec::with_capacity(config.generation_size as usize),
            sealed: false,
        }
    }

    pub fn id(&self) -> u32 {
        self.id
    }

    /// Symbols held so far (`k`).
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn is_sealed(&self) -> bool {
        self.sealed
    }

    pub fn symbols(&self) -> &[Vec<u8>] {
        &self.symbols
    }

    /// Generation size advertised on the wire: `n` while open, `k` once sealed.
    pub fn effective_size(&self) -> usize {
        if self.sealed {
            self.symbols.len()
        } else {
            self.capacity
        }
    }

    /// Stores `packet` in the next slot and returns the new symbol count.
    /// The generation seals itself when it reaches `n` symbols.
    pub fn push(&mut self, packet: &[u8]) -> Result<usize, CodecError> {
        if self.sealed {
            return Err(CodecError::GenerationSealed(self.id));
        }
        self.symbols.push(encode_symbol(packet, self.symbol_size)?);
        if self.symbols.len() == self.capacity {
            self.sealed = true;
        }
        Ok(self.symbols.len())
    }

    /// Seals a short generation at `n' = k` and returns its total repair
    /// budget `ceil(ω·k/n)`. Empty generations are left untouched.
    pub fn seal_partial(&mut self, config: &CodecConfig) -> usize {
        if self.symbols.is_empty() {
            return 0;
        }
        self.sealed = true;
        repair_budget(config, self.symbols.len())
    }

    /// A dense equation over every slot pushed so far. Coefficients are
    /// uniform over GF(2^8); an all-zero draw is redrawn.
    pub fn emit<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<CodedPacket, CodecError> {
        if self.symbols.is_empty() {
            return Err(CodecError::EmptyGeneration);
        }
        let mut coefficients = vec![0u8; self.symbols.len()];
        loop {
            rng.fill(&mut coefficients[..]);
            if coefficients.iter().any(|&c| c != 0) {
                break;
            }
        }
        Ok(self.combine(coefficients))
    }

    /// Like [`Generation::emit`] but with a nonzero coefficient on the newest
    /// slot, so the equation is guaranteed innovative for a receiver that
    /// already solved every earlier slot.
    pub fn emit_progressive<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<CodedPacket, CodecError> {
        if self.symbols.is_empty() {
            return Err(CodecError::EmptyGeneration);
        }
        let k = self.symbols.len();
        let mut coefficients = vec![0u8; k];
        rng.fill(&mut coefficients[..k - 1]);
        coefficients[k - 1] = rng.random_range(1..=255u8);
        Ok(self.combine(coefficients))
    }

    /// Emits the equation with the given coefficients (length must not exceed `k`).
    pub fn emit_with(&self, coefficients: Vec<u8>) -> Result<CodedPacket, CodecError> {
        if coefficients.is_empty() || coefficients.len() > self.symbols.len() {
            return Err(CodecError::Inconsistent(format!(
                "{} coefficients for {} symbols",
                coefficients.len(),
                self.symbols.len()
            )));
        }
        Ok(self.combine(coefficients))
    }

    fn combine(&self, coefficients: Vec<u8>) -> CodedPacket {
        let mut payload = vec![0u8; self.symbol_size];
        for (c, sym) in coefficients.iter().zip(&self.symbols) {
            gf256::axpy(&mut payload, sym, *c).expect("symbols have uniform length");
        }
        CodedPacket {
            generation_id: self.id,
            generation_size: self.effective_size() as u16,
            coefficients,
            payload,
            final_emission: false,
        }
    }
}
