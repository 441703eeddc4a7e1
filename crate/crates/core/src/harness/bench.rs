//! In-memory codec throughput and a deterministic burst-loss probe.

use std::time::{Duration, Instant};

use rand::seq::index;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::scenario::Scenario;
use super::HarnessError;
use crate::codec::{CodecConfig, DecodeStatus, Decoder, Encoder};
use crate::framing::OUTER_OVERHEAD;
use crate::link::{Link, OfferOutcome};
use crate::time::{SimDuration, SimTime};
use crate::tunnel::{Role, TunnelEndpoint};

#[derive(Debug, Clone, PartialEq)]
pub struct CodecBenchReport {
    pub generation_size: u16,
    pub overhead: u16,
    pub symbol_size: usize,
    pub generations: usize,
    /// Datagrams removed from every generation before decoding.
    pub dropped_per_generation: usize,
    pub failures: usize,
    pub encode_mbps: f64,
    pub decode_mbps: f64,
}

impl CodecBenchReport {
    /// The report without wall-clock measurements.
    pub fn deterministic_part(&self) -> (u16, u16, usize, usize, usize, usize) {
        (
            self.generation_size,
            self.overhead,
            self.symbol_size,
            self.generations,
            self.dropped_per_generation,
            self.failures,
        )
    }
}

impl std::fmt::Display for CodecBenchReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "codec {}+{} S={} generations={} dropped/gen={}",
            self.generation_size, self.overhead, self.symbol_size, self.generations, self.dropped_per_generation
        )?;
        writeln!(
            f,
            "failures {} ({:.3}%)",
            self.failures,
            100.0 * self.failures as f64 / self.generations as f64
        )?;
        writeln!(f, "encode {:.1} Mbps, decode {:.1} Mbps", self.encode_mbps, self.decode_mbps)
    }
}

/// Encodes and decodes `generations` full generations of random packets,
/// removing `drop` uniformly chosen datagrams from each.
pub fn codec_bench(
    config: &CodecConfig,
    generations: usize,
    drop: usize,
    seed: u64,
) -> Result<CodecBenchReport, HarnessError> {
    if generations == 0 {
        return Err(HarnessError::Config("generations must be at least 1".into()));
    }
    config.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
    let n = config.generation_size as usize;
    let total = config.emissions_per_generation();
    if drop > total {
        return Err(HarnessError::Config(format!(
            "cannot drop {drop} of {total} datagrams per generation"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut encoder = Encoder::new(config.clone(), ChaCha8Rng::seed_from_u64(rng.next_u64()))
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let plen = config.max_packet_len();
    let mut failures = 0;
    let (mut enc_time, mut dec_time) = (Duration::ZERO, Duration::ZERO);

    for _ in 0..generations {
        let packets: Vec<Vec<u8>> = (0..n)
            .map(|_| {
                let mut p = vec![0u8; plen];
                rng.fill_bytes(&mut p);
                p
            })
            .collect();

        let t0 = Instant::now();
        let mut coded = Vec::with_capacity(total);
        for p in &packets {
            coded.extend(encoder.push(p).map_err(|e| HarnessError::Runtime(e.to_string()))?);
        }
        enc_time += t0.elapsed();

        let mut keep = vec![true; coded.len()];
        for i in index::sample(&mut rng, coded.len(), drop) {
            keep[i] = false;
        }

        let t0 = Instant::now();
        let mut dec = Decoder::for_packet(&coded[0]);
        // Early release may hand out a recovered slot after later ones.
        let mut out: Vec<Option<Vec<u8>>> = vec![None; n];
        let mut decoded = false;
        for (cp, _) in coded.iter().zip(&keep).filter(|(_, &k)| k) {
            let status = dec.push(cp).map_err(|e| HarnessError::Runtime(e.to_string()))?;
            for s in dec.release() {
                out[s.slot - 1] = s.packet.ok();
            }
            decoded |= status == DecodeStatus::Decoded;
        }
        dec_time += t0.elapsed();

        if !decoded || out.iter().zip(&packets).any(|(o, p)| o.as_ref() != Some(p)) {
            failures += 1;
        }
    }

    let bits = (generations * n * plen * 8) as f64;
    let mbps = |d: Duration| bits / d.as_secs_f64().max(1e-9) / 1e6;
    Ok(CodecBenchReport {
        generation_size: config.generation_size,
        overhead: config.overhead,
        symbol_size: config.symbol_size,
        generations,
        dropped_per_generation: drop,
        failures,
        encode_mbps: mbps(enc_time),
        decode_mbps: mbps(dec_time),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BurstReport {
    pub burst_len: usize,
    pub generations: u64,
    pub datagrams_sent: u64,
    pub datagrams_lost: u64,
    pub inner_sent: u64,
    pub inner_delivered: u64,
    pub generations_decoded: u64,
    pub generations_failed: u64,
}

impl std::fmt::Display for BurstReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(
            f,
            "burst of {} datagrams: {} of {} datagrams lost",
            self.burst_len, self.datagrams_lost, self.datagrams_sent
        )?;
        writeln!(
            f,
            "generations: {} sent, {} decoded, {} failed",
            self.generations, self.generations_decoded, self.generations_failed
        )?;
        writeln!(f, "inner packets: {} sent, {} delivered", self.inner_sent, self.inner_delivered)
    }
}

/// Sends full generations of inner packets through the scenario's codec and
/// downlink at half the link rate, with the stochastic loss model disabled,
/// and drops `burst_len` consecutive datagrams starting with the first
/// datagram of the second generation.
pub fn burst_test(scenario: &Scenario, burst_len: usize, seed: u64) -> Result<BurstReport, HarnessError> {
    scenario.validate()?;
    if burst_len == 0 {
        return Err(HarnessError::Config("burst length must be at least 1".into()));
    }
    // Generations are always filled, so partial flushes would only blur the
    // generation boundaries on slow links.
    let config = scenario
        .codec
        .codec_config()?
        .with_flush_timeout(SimDuration::from_secs(3600));
    let n = config.generation_size as usize;
    let per_gen = config.emissions_per_generation();
    let generations = burst_len.div_ceil(per_gen) + 3;

    let mut profile = scenario.downlink.clone();
    profile.random_loss = 0.0;
    profile.burst = None;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut link: Link<Vec<u8>> = Link::new(profile.clone(), rng.random());
    let mut world = TunnelEndpoint::new(Role::WorldGateway, config.clone(), scenario.codec.decode_window, rng.random())
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let mut island = TunnelEndpoint::new(Role::IslandGateway, config.clone(), scenario.codec.decode_window, rng.random())
        .map_err(|e| HarnessError::Config(e.to_string()))?;

    // Half the link rate, counting coding overhead at full datagram size.
    let datagram = scenario.codec.outer_mtu;
    let gap = SimDuration::from_nanos(
        profile.transmission_time(datagram).as_nanos() * 2 * per_gen as u64 / n as u64,
    );
    let plen = config.max_packet_len();
    let mut now = SimTime::ZERO;
    let mut delivered = 0u64;
    let mut sent = 0u64;
    for g in 0..generations {
        for _ in 0..n {
            let mut p = vec![0u8; plen];
            rng.fill_bytes(&mut p);
            let datagrams = world
                .ingress(&p, now)
                .map_err(|e| HarnessError::Runtime(e.to_string()))?;
            for d in datagrams {
                let size = d.len() + OUTER_OVERHEAD;
                let OfferOutcome::Enqueued { departure } = link.offer(d, size, now) else {
                    return Err(HarnessError::Runtime("probe traffic overflowed the queue".into()));
                };
                // Departures strictly increase, so the burst starts exactly here.
                if g == 1 && sent == per_gen as u64 {
                    link.inject_burst(departure, burst_len)
                        .map_err(|e| HarnessError::Runtime(e.to_string()))?;
                }
                sent += 1;
            }
            for d in link.advance(now) {
                delivered += island.egress(&d.packet).len() as u64;
            }
            now += gap;
        }
    }
    let horizon = now + profile.propagation_delay + SimDuration::from_secs(60);
    for d in link.advance(horizon) {
        delivered += island.egress(&d.packet).len() as u64;
    }
    island.close_window();
    let stats = island.stats();
    Ok(BurstReport {
        burst_len,
        generations: generations as u64,
        datagrams_sent: sent,
        datagrams_lost: link.stats().lost(),
        inner_sent: (generations * n) as u64,
        inner_delivered: delivered,
        generations_decoded: stats.generations_decoded,
        generations_failed: stats.generations_failed,
    })
}
