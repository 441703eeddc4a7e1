use rand::Rng;

use super::schedule::repairs_after;
use super::{CodecConfig, CodecError, CodedPacket, Generation};

/// Drives generations through the emission schedule: one progressive
/// equation per source push, repair equations as the schedule dictates, and
/// a roll to the next generation id once a generation is sealed.
#[derive(Debug)]
pub struct Encoder<R> {
    config: CodecConfig,
    rng: R,
    current: Generation,
    repairs_emitted: usize,
}

impl<R: Rng> Encoder<R> {
    pub fn new(config: CodecConfig, rng: R) -> Result<Self, CodecError> {
        config.validate()?;
        let current = Generation::new(0, &config);
        Ok(Encoder {
            config,
            rng,
            current,
            repairs_emitted: 0,
        })
    }

    pub fn config(&self) -> &CodecConfig {
        &self.config
    }

    /// The generation currently accepting packets.
    pub fn open_generation(&self) -> &Generation {
        &self.current
    }

    /// Pushes one packet and returns the equations due now, in emission order.
    pub fn push(&mut self, packet: &[u8]) -> Result<Vec<CodedPacket>, CodecError> {
        let k = self.current.push(packet)?;
        let mut out = Vec::with_capacity(1 + self.config.overhead as usize);
        out.push(self.current.emit_progressive(&mut self.rng)?);
        for _ in 0..repairs_after(&self.config, k) {
            out.push(self.current.emit(&mut self.rng)?);
            self.repairs_emitted += 1;
        }
        if self.current.is_sealed() {
            out.last_mut().expect("at least one emission").final_emission = true;
            self.roll();
        }
        Ok(out)
    }

    /// Seals a non-empty open generation at its current size and emits the
    /// repairs it still owes. Returns nothing for an empty generation.
    pub fn flush(&mut self) -> Vec<CodedPacket> {
        if self.current.is_empty() {
            return Vec::new();
        }
        let budget = self.current.seal_partial(&self.config);
        let owed = budget.saturating_sub(self.repairs_emitted);
        let mut out = Vec::with_capacity(owed);
        for _ in 0..owed {
            out.push(self.current.emit(&mut self.rng).expect("generation is non-empty"));
        }
        if let Some(last) = out.last_mut() {
            last.final_emission = true;
        }
        self.roll();
        out
    }

    fn roll(&mut self) {
        let next = self.current.id().wrapping_add(1);
        self.current = Generation::new(next, &self.config);
        self.repairs_emitted = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::RepairPlacement;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn encoder(n: u16, omega: u16, placement: RepairPlacement) -> Encoder<ChaCha8Rng> {
        let cfg = CodecConfig::new(n, omega, 16)
            .unwrap()
            .with_repair_placement(placement);
        Encoder::new(cfg, ChaCha8Rng::seed_from_u64(9)).unwrap()
    }

    #[test]
    fn full_generation_emits_n_plus_omega() {
        for placement in [RepairPlacement::Trailing, RepairPlacement::Interleaved] {
            let mut enc = encoder(30, 6, placement);
            let mut total = 0;
            let mut finals = 0;
            for i in 0..30u8 {
                let out = enc.push(&[i]).unwrap();
                assert!(out.iter().all(|cp| cp.generation_id == 0));
                finals += out.iter().filter(|cp| cp.final_emission).count();
                total += out.len();
            }
            assert_eq!(total, 36);
            assert_eq!(finals, 1);
            assert_eq!(enc.open_generation().id(), 1);
        }
    }

    #[test]
    fn interleaved_fifth_push_emits_repair() {
        let mut enc = encoder(30, 6, RepairPlacement::Interleaved);
        let counts: Vec<usize> = (0..30u8).map(|i| enc.push(&[i]).unwrap().len()).collect();
        assert_eq!(counts[0], 1);
        assert_eq!(counts[4], 2);
        assert_eq!(counts.iter().sum::<usize>(), 36);
    }

    #[test]
    fn flush_partial_single_packet() {
        let mut enc = encoder(30, 6, RepairPlacement::Trailing);
        assert!(enc.flush().is_empty());
        assert_eq!(enc.push(&[1]).unwrap().len(), 1);
        let out = enc.flush();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].generation_size, 1);
        assert!(out[0].final_emission);
        assert_eq!(enc.open_generation().id(), 1);
    }

    #[test]
    fn flush_interleaved_owes_only_remaining_budget() {
        let mut enc = encoder(30, 6, RepairPlacement::Interleaved);
        for i in 0..15u8 {
            enc.push(&[i]).unwrap();
        }
        // ceil(6*15/30) = 3 repairs already went out at pushes 5, 10, 15.
        assert!(enc.flush().is_empty());

        let mut enc = encoder(30, 6, RepairPlacement::Trailing);
        for i in 0..15u8 {
            enc.push(&[i]).unwrap();
        }
        let out = enc.flush();
        assert_eq!(out.len(), 3);
        assert!(out.iter().all(|cp| cp.generation_size == 15 && cp.prefix_size() == 15));
    }
}
