//! Network-coded tunnel endpoints.
//!
//! Each endpoint encodes inner IP packets headed for its peer into coded
//! datagrams and decodes the peer's datagrams back into inner packets. The
//! world-side gateway and the island-side gateway run the same state machine;
//! the two directions use independent codec instances.
//!
//! The endpoint is transport-agnostic: callers hand it byte vectors and
//! virtual timestamps and forward whatever it returns.

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::codec::{CodecConfig, CodecError, DecodeStatus, Decoder, Encoder, LENGTH_PREFIX};
use crate::framing::{self, FramingError};
use crate::time::SimTime;

pub const DEFAULT_DECODE_WINDOW: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TunnelError {
    #[error("inner packet of {len} bytes exceeds inner MTU of {max} bytes")]
    ExceedsInnerMtu { len: usize, max: usize },
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Framing(#[from] FramingError),
    #[error("decode window must hold at least one generation")]
    EmptyWindow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    /// Off-island gateway (G_w).
    WorldGateway,
    /// On-island gateway (G_i).
    IslandGateway,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TunnelStats {
    pub datagrams_sent: u64,
    pub datagrams_received: u64,
    pub generations_decoded: u64,
    pub generations_failed: u64,
    pub innovative: u64,
    pub redundant: u64,
    pub inner_packets_in: u64,
    pub inner_packets_out: u64,
    pub malformed_drops: u64,
    pub oversize_drops: u64,
    /// Datagrams for generations already decoded or outside the window.
    pub late_datagrams: u64,
    pub corrupt_slots: u64,
}

impl TunnelStats {
    /// Datagrams emitted per inner packet carried.
    pub fn overhead_ratio(&self) -> f64 {
        if self.inner_packets_in == 0 {
            return 0.0;
        }
        self.datagrams_sent as f64 / self.inner_packets_in as f64
    }
}

/// Codec settings that fill an outer path MTU exactly: `S = inner_mtu + 2`.
pub fn codec_config_for_path(
    generation_size: u16,
    overhead: u16,
    outer_path_mtu: usize,
) -> Result<CodecConfig, TunnelError> {
    // Validate n first so inner_mtu sees a sane config.
    let probe = CodecConfig::new(generation_size, overhead, LENGTH_PREFIX + 1)?;
    let inner = framing::inner_mtu(outer_path_mtu, &probe)?;
    Ok(CodecConfig::new(generation_size, overhead, inner + LENGTH_PREFIX)?)
}

#[derive(Debug)]
pub struct TunnelEndpoint {
    role: Role,
    encoder: Encoder<ChaCha8Rng>,
    open_since: Option<SimTime>,
    window: usize,
    decoders: BTreeMap<u32, Decoder>,
    retired: BTreeSet<u32>,
    /// Generations skipped over by a newer one and not heard from since.
    unseen: BTreeSet<u32>,
    highest_seen: Option<u32>,
    stats: TunnelStats,
}

impl TunnelEndpoint {
    pub fn new(role: Role, config: CodecConfig, decode_window: usize, seed: u64) -> Result<Self, TunnelError> {
        if decode_window == 0 {
            return Err(TunnelError::EmptyWindow);
        }
        Ok(TunnelEndpoint {
            role,
            encoder: Encoder::new(config, ChaCha8Rng::seed_from_u64(seed))?,
            open_since: None,
            window: decode_window,
            decoders: BTreeMap::new(),
            retired: BTreeSet::new(),
            unseen: BTreeSet::new(),
            highest_seen: None,
            stats: TunnelStats::default(),
        })
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn config(&self) -> &CodecConfig {
        self.encoder.config()
    }

    pub fn inner_mtu(&self) -> usize {
        self.config().max_packet_len()
    }

    pub fn stats(&self) -> &TunnelStats {
        &self.stats
    }

    /// Generations currently being decoded.
    pub fn open_decoders(&self) -> usize {
        self.decoders.len()
    }

    /// When the open generation becomes due for a partial flush.
    pub fn flush_deadline(&self) -> Option<SimTime> {
        self.open_since.map(|t| t + self.config().flush_timeout)
    }

    /// Encodes one inner packet. Returns the datagrams due now, in emission order.
    pub fn ingress(&mut self, inner_packet: &[u8], now: SimTime) -> Result<Vec<Vec<u8>>, TunnelError> {
        let mut out = self.tick(now);
        if inner_packet.len() > self.inner_mtu() {
            self.stats.oversize_drops += 1;
            return Err(TunnelError::ExceedsInnerMtu {
                len: inner_packet.len(),
                max: self.inner_mtu(),
            });
        }
        let was_empty = self.encoder.open_generation().is_empty();
        let coded = self.encoder.push(inner_packet)?;
        self.stats.inner_packets_in += 1;
        if self.encoder.open_generation().is_empty() {
            self.open_since = None;
        } else if was_empty {
            self.open_since = Some(now);
        }
        out.extend(coded.iter().map(framing::serialize));
        self.stats.datagrams_sent += coded.len() as u64;
        Ok(out)
    }

    /// Seals a stale partial generation and emits the repairs it still owes.
    pub fn tick(&mut self, now: SimTime) -> Vec<Vec<u8>> {
        match self.flush_deadline() {
            Some(deadline) if now >= deadline => {
                self.open_since = None;
                let coded = self.encoder.flush();
                self.stats.datagrams_sent += coded.len() as u64;
                coded.iter().map(framing::serialize).collect()
            }
            _ => Vec::new(),
        }
    }

    /// Decodes one datagram from the peer and returns newly recovered inner
    /// packets in slot order.
    pub fn egress(&mut self, datagram: &[u8]) -> Vec<Vec<u8>> {
        self.stats.datagrams_received += 1;
        let cp = match framing::parse(datagram) {
            Ok(cp) => cp,
            Err(_) => {
                self.stats.malformed_drops += 1;
                return Vec::new();
            }
        };
        let id = cp.generation_id;
        let window = self.window as u64;
        if let Some(h) = self.highest_seen {
            if id as u64 + window <= h as u64 || self.retired.contains(&id) {
                self.stats.late_datagrams += 1;
                return Vec::new();
            }
        }
        if self.highest_seen.is_none_or(|h| id > h) {
            // Only gaps inside the window are tracked; a wider jump looks
            // the same as a corrupted generation id.
            if let Some(h) = self.highest_seen {
                let from = h.saturating_add(1).max(id.saturating_sub(self.window as u32 - 1));
                self.unseen.extend(from..id);
            }
            self.highest_seen = Some(id);
            self.evict_older_than(id);
        }
        self.unseen.remove(&id);

        let decoder = self
            .decoders
            .entry(id)
            .or_insert_with(|| Decoder::for_packet(&cp));
        let status = match decoder.push(&cp) {
            Ok(s) => s,
            Err(_) => {
                self.stats.malformed_drops += 1;
                return Vec::new();
            }
        };
        match status {
            DecodeStatus::Redundant => self.stats.redundant += 1,
            DecodeStatus::Innovative | DecodeStatus::Decoded => self.stats.innovative += 1,
        }

        let mut out = Vec::new();
        for slot in decoder.release() {
            match slot.packet {
                Ok(p) => out.push(p),
                Err(_) => self.stats.corrupt_slots += 1,
            }
        }
        self.stats.inner_packets_out += out.len() as u64;

        if status == DecodeStatus::Decoded {
            self.decoders.remove(&id);
            self.retired.insert(id);
            self.stats.generations_decoded += 1;
        }
        out
    }

    /// Gives up on every open generation; incomplete ones count as failed,
    /// as do skipped generations that never delivered a datagram.
    pub fn close_window(&mut self) {
        let open: Vec<u32> = self.decoders.keys().copied().collect();
        for g in open {
            self.evict(g);
        }
        self.stats.generations_failed += self.unseen.len() as u64;
        self.retired.extend(std::mem::take(&mut self.unseen));
    }

    fn evict(&mut self, g: u32) {
        let d = self.decoders.remove(&g).expect("caller passes an open generation");
        if d.released_count() < d.generation_size() {
            self.stats.generations_failed += 1;
        } else {
            self.stats.generations_decoded += 1;
        }
        self.retired.insert(g);
    }

    fn evict_older_than(&mut self, newest: u32) {
        let window = self.window as u64;
        let stale: Vec<u32> = self
            .decoders
            .keys()
            .copied()
            .take_while(|&g| g as u64 + window <= newest as u64)
            .collect();
        for g in stale {
            self.evict(g);
        }
        let keep = self.unseen.split_off(&(newest.saturating_sub(self.window as u32 - 1)));
        self.stats.generations_failed += std::mem::replace(&mut self.unseen, keep).len() as u64;
        self.retired = self.retired.split_off(&(newest.saturating_sub(self.window as u32 - 1)));
    }
}
