//! The event loop wiring TCP flows, tunnel gateways and the two link directions.
//!
//! Data flows from the world side to the island over the downlink; ACKs
//! return over the uplink. Tunneled flows enter the world gateway as inner
//! packets and leave the island gateway after decoding.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::output::SampleRow;
use super::scenario::{AckPath, Scenario};
use super::HarnessError;
use crate::event::EventQueue;
use crate::framing::OUTER_OVERHEAD;
use crate::link::{Link, LinkStats, LossCause, OfferOutcome};
use crate::tcp::{LossSignal, Segment, SenderStats, TcpConfig, TcpReceiver, TcpSender, TCP_IP_HEADER};
use crate::time::SimTime;
use crate::tunnel::{Role, TunnelEndpoint, TunnelStats};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum FlowClass {
    Plain,
    Tunneled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropRecord {
    TailDrop,
    Lost(LossCause),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClassSummary {
    pub flows: usize,
    pub delivered_bytes: u64,
    /// Delivered bytes over the whole run duration.
    pub goodput_mbps: f64,
    pub mean_sample_mbps: f64,
    pub median_sample_mbps: f64,
    pub segments_sent: u64,
    pub retransmissions: u64,
    pub fast_retransmits: u64,
    pub timeouts: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub scenario: String,
    pub seed: u64,
    pub duration_s: f64,
    pub plain: ClassSummary,
    pub tunneled: ClassSummary,
    pub mean_utilization: f64,
    pub downlink: LinkStats,
    pub uplink: LinkStats,
    /// Encoder side of the downlink tunnel direction.
    pub tunnel_encoder: Option<TunnelStats>,
    /// Decoder side of the downlink tunnel direction.
    pub tunnel_decoder: Option<TunnelStats>,
    /// Inner packets whose payload did not match what was sent.
    pub integrity_errors: u64,
}

impl Summary {
    pub fn generations_decoded(&self) -> u64 {
        self.tunnel_decoder.as_ref().map_or(0, |s| s.generations_decoded)
    }

    pub fn generations_failed(&self) -> u64 {
        self.tunnel_decoder.as_ref().map_or(0, |s| s.generations_failed)
    }

    pub fn overhead_ratio(&self) -> f64 {
        self.tunnel_encoder.as_ref().map_or(0.0, TunnelStats::overhead_ratio)
    }
}

impl std::fmt::Display for Summary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "scenario {} seed {} duration {:.1} s", self.scenario, self.seed, self.duration_s)?;
        for (label, c) in [("tcp", &self.plain), ("tcp/nc", &self.tunneled)] {
            if c.flows == 0 {
                continue;
            }
            writeln!(
                f,
                "{label:>7}: {} flows, goodput {:.3} Mbps (sample mean {:.3}, median {:.3}), \
                 {} retransmissions, {} fast retransmits, {} timeouts",
                c.flows,
                c.goodput_mbps,
                c.mean_sample_mbps,
                c.median_sample_mbps,
                c.retransmissions,
                c.fast_retransmits,
                c.timeouts
            )?;
        }
        writeln!(f, "downlink utilization {:.3}", self.mean_utilization)?;
        let d = &self.downlink;
        writeln!(
            f,
            "downlink: {} offered, {} delivered, {} tail drops, {} lost in transit",
            d.offered,
            d.delivered,
            d.tail_dropped,
            d.lost()
        )?;
        if let (Some(enc), Some(dec)) = (&self.tunnel_encoder, &self.tunnel_decoder) {
            writeln!(
                f,
                "tunnel: {} generations decoded, {} failed, {:.4} datagrams per inner packet",
                dec.generations_decoded,
                dec.generations_failed,
                enc.overhead_ratio()
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub rows: Vec<SampleRow>,
    pub summary: Summary,
    /// Per flow: class and every loss reaction.
    pub loss_signals: Vec<(FlowClass, Vec<(SimTime, LossSignal)>)>,
    /// Downlink drops with the data flow they hit, if the packet was uncoded.
    pub downlink_drops: Vec<(SimTime, Option<usize>, DropRecord)>,
}

#[derive(Debug)]
enum Wire {
    Data { flow: usize, conn: u32, seq: u64 },
    Ack { flow: usize, conn: u32, ack: u64 },
    Coded(Vec<u8>),
}

#[derive(Debug, Clone, Copy)]
enum Event {
    FlowStart(usize),
    Rto(usize),
    Flush(Side),
    Sample,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    World,
    Island,
}

struct Flow {
    class: FlowClass,
    /// Connection counter; packets of earlier connections are ignored.
    conn: u32,
    sender: TcpSender,
    receiver: TcpReceiver,
    rto_armed: Option<SimTime>,
    /// Totals of finished connections.
    past: SenderStats,
    signals: Vec<(SimTime, LossSignal)>,
}

impl Flow {
    fn totals(&self) -> SenderStats {
        self.totals_with(self.sender.stats())
    }

    fn totals_with(&self, s: &SenderStats) -> SenderStats {
        SenderStats {
            segments_sent: self.past.segments_sent + s.segments_sent,
            retransmissions: self.past.retransmissions + s.retransmissions,
            fast_retransmits: self.past.fast_retransmits + s.fast_retransmits,
            timeouts: self.past.timeouts + s.timeouts,
        }
    }

    fn all_signals(&self) -> Vec<(SimTime, LossSignal)> {
        let mut v = self.signals.clone();
        v.extend_from_slice(self.sender.loss_signals());
        v
    }
}

const INNER_DATA: u8 = 0;
const INNER_ACK: u8 = 1;

// Inner packets carry a 40-byte stand-in for the TCP/IP header:
// version byte, kind, total length, flow id, sequence or ack number,
// connection counter.
fn inner_packet(kind: u8, flow: usize, conn: u32, seq: u64, payload: usize) -> Vec<u8> {
    let total = TCP_IP_HEADER + payload;
    let mut p = vec![0u8; total];
    p[0] = 0x45;
    p[1] = kind;
    p[2..4].copy_from_slice(&(total as u16).to_be_bytes());
    p[4..8].copy_from_slice(&(flow as u32).to_be_bytes());
    p[8..16].copy_from_slice(&seq.to_be_bytes());
    p[16..20].copy_from_slice(&conn.to_be_bytes());
    for (i, b) in p[TCP_IP_HEADER..].iter_mut().enumerate() {
        *b = pattern(flow, seq, i);
    }
    p
}

fn pattern(flow: usize, seq: u64, i: usize) -> u8 {
    (seq as u8).wrapping_mul(31) ^ (i as u8) ^ (flow as u8).rotate_left(3)
}

/// Returns `(kind, flow, conn, seq)` if the packet is well formed and intact.
fn parse_inner(p: &[u8]) -> Option<(u8, usize, u32, u64)> {
    if p.len() < TCP_IP_HEADER || p[0] != 0x45 {
        return None;
    }
    if u16::from_be_bytes([p[2], p[3]]) as usize != p.len() {
        return None;
    }
    let flow = u32::from_be_bytes(p[4..8].try_into().ok()?) as usize;
    let seq = u64::from_be_bytes(p[8..16].try_into().ok()?);
    let conn = u32::from_be_bytes(p[16..20].try_into().ok()?);
    let intact = p[TCP_IP_HEADER..]
        .iter()
        .enumerate()
        .all(|(i, &b)| b == pattern(flow, seq, i));
    intact.then_some((p[1], flow, conn, seq))
}

struct Sim<'a> {
    sc: &'a Scenario,
    events: EventQueue<Event>,
    down: Link<Wire>,
    up: Link<Wire>,
    flows: Vec<Flow>,
    world: Option<TunnelEndpoint>,
    island: Option<TunnelEndpoint>,
    flush_armed: [Option<SimTime>; 2],
    tunnel_mss: usize,
    delivered: [u64; 2],
    integrity_errors: u64,
    drops: Vec<(SimTime, Option<usize>, DropRecord)>,
}

impl<'a> Sim<'a> {
    fn new(sc: &'a Scenario, seed: u64) -> Result<Self, HarnessError> {
        let mut master = ChaCha8Rng::seed_from_u64(seed);
        let mut down = Link::new(sc.downlink.clone(), master.random());
        down.record_losses();
        let up = Link::new(sc.uplink.clone(), master.random());
        let codec = sc.codec.codec_config()?;
        let (world_seed, island_seed): (u64, u64) = (master.random(), master.random());
        let (world, island) = if sc.flows.tunneled > 0 {
            let mk = |role, s| {
                TunnelEndpoint::new(role, codec.clone(), sc.codec.decode_window, s)
                    .map_err(|e| HarnessError::Config(e.to_string()))
            };
            (
                Some(mk(Role::WorldGateway, world_seed)?),
                Some(mk(Role::IslandGateway, island_seed)?),
            )
        } else {
            (None, None)
        };
        let tunnel_mss = codec.max_packet_len() - TCP_IP_HEADER;

        let mut events = EventQueue::new();
        let mut flows = Vec::new();
        let classes = std::iter::repeat_n(FlowClass::Plain, sc.flows.plain)
            .chain(std::iter::repeat_n(FlowClass::Tunneled, sc.flows.tunneled));
        for (i, class) in classes.enumerate() {
            let mss = match class {
                FlowClass::Plain => sc.flows.mss,
                FlowClass::Tunneled => tunnel_mss,
            };
            let jitter = sc.flows.start_jitter.as_nanos();
            let start = if jitter == 0 {
                0
            } else {
                master.random_range(0..jitter)
            };
            events.push(SimTime::from_nanos(start), Event::FlowStart(i));
            flows.push(Flow {
                class,
                conn: 0,
                sender: new_sender(sc, mss),
                receiver: TcpReceiver::new(),
                rto_armed: None,
                past: SenderStats::default(),
                signals: Vec::new(),
            });
        }
        let mut t = SimTime::ZERO + sc.sample_interval;
        while t <= SimTime::ZERO + sc.duration {
            events.push(t, Event::Sample);
            t += sc.sample_interval;
        }

        Ok(Sim {
            sc,
            events,
            down,
            up,
            flows,
            world,
            island,
            flush_armed: [None, None],
            tunnel_mss,
            delivered: [0, 0],
            integrity_errors: 0,
            drops: Vec::new(),
        })
    }

    fn send_segments(&mut self, flow: usize, segs: Vec<Segment>, now: SimTime) -> Result<(), HarnessError> {
        let conn = self.flows[flow].conn;
        for s in segs {
            match self.flows[flow].class {
                FlowClass::Plain => {
                    let size = self.sc.plain_packet_len();
                    let out = self.down.offer(Wire::Data { flow, conn, seq: s.seq }, size, now);
                    self.note_tail_drop(out, now);
                }
                FlowClass::Tunneled => {
                    let inner = inner_packet(INNER_DATA, flow, conn, s.seq, self.tunnel_mss);
                    let world = self.world.as_mut().expect("tunneled flows imply gateways");
                    let datagrams = world
                        .ingress(&inner, now)
                        .map_err(|e| HarnessError::Runtime(e.to_string()))?;
                    self.offer_coded(Side::World, datagrams, now);
                }
            }
        }
        self.arm_rto(flow);
        Ok(())
    }

    fn send_ack(&mut self, flow: usize, conn: u32, ack: u64, now: SimTime) -> Result<(), HarnessError> {
        if self.flows[flow].class == FlowClass::Tunneled && self.sc.flows.ack_path == AckPath::Tunnel {
            let inner = inner_packet(INNER_ACK, flow, conn, ack, 0);
            let island = self.island.as_mut().expect("tunneled flows imply gateways");
            let datagrams = island
                .ingress(&inner, now)
                .map_err(|e| HarnessError::Runtime(e.to_string()))?;
            self.offer_coded(Side::Island, datagrams, now);
        } else {
            self.up.offer(Wire::Ack { flow, conn, ack }, TCP_IP_HEADER, now);
        }
        Ok(())
    }

    fn offer_coded(&mut self, side: Side, datagrams: Vec<Vec<u8>>, now: SimTime) {
        for d in datagrams {
            let size = d.len() + OUTER_OVERHEAD;
            match side {
                Side::World => {
                    let out = self.down.offer(Wire::Coded(d), size, now);
                    self.note_tail_drop(out, now);
                }
                Side::Island => {
                    self.up.offer(Wire::Coded(d), size, now);
                }
            }
        }
        self.arm_flush(side);
    }

    fn note_tail_drop(&mut self, out: OfferOutcome<Wire>, now: SimTime) {
        if let OfferOutcome::TailDropped(w) = out {
            self.drops.push((now, data_flow(&w), DropRecord::TailDrop));
        }
    }

    fn endpoint(&mut self, side: Side) -> Option<&mut TunnelEndpoint> {
        match side {
            Side::World => self.world.as_mut(),
            Side::Island => self.island.as_mut(),
        }
    }

    fn arm_flush(&mut self, side: Side) {
        let idx = side as usize;
        let Some(deadline) = self.endpoint(side).and_then(|e| e.flush_deadline()) else {
            return;
        };
        if self.flush_armed[idx].is_none_or(|a| deadline < a) {
            self.flush_armed[idx] = Some(deadline);
            self.events.push(deadline, Event::Flush(side));
        }
    }

    // At most one pending timer event per flow: an event is only added when
    // the deadline moves earlier than the pending one, and re-armed on fire.
    fn arm_rto(&mut self, flow: usize) {
        let f = &mut self.flows[flow];
        if let Some(d) = f.sender.rto_deadline() {
            if f.rto_armed.is_none_or(|a| d < a) {
                f.rto_armed = Some(d);
                self.events.push(d, Event::Rto(flow));
            }
        }
    }

    fn on_data(&mut self, flow: usize, conn: u32, seq: u64, now: SimTime) -> Result<(), HarnessError> {
        let Some(f) = self.flows.get_mut(flow) else {
            self.integrity_errors += 1;
            return Ok(());
        };
        if conn != f.conn {
            return Ok(());
        }
        let (ack, newly) = f.receiver.on_segment(seq);
        self.delivered[f.class as usize] += newly * f.sender.config().mss as u64;
        self.send_ack(flow, conn, ack, now)
    }

    fn on_ack(&mut self, flow: usize, conn: u32, ack: u64, now: SimTime) -> Result<(), HarnessError> {
        let Some(f) = self.flows.get_mut(flow) else {
            self.integrity_errors += 1;
            return Ok(());
        };
        if conn != f.conn {
            return Ok(());
        }
        let mut segs = f.sender.on_ack(ack, now);
        if f.sender.is_complete() {
            let mss = f.sender.config().mss;
            let old = std::mem::replace(&mut f.sender, new_sender(self.sc, mss));
            f.past = f.totals_with(old.stats());
            f.signals.extend_from_slice(old.loss_signals());
            f.receiver = TcpReceiver::new();
            f.conn += 1;
            segs = f.sender.poll_send(now);
        }
        self.send_segments(flow, segs, now)
    }

    fn on_inner(&mut self, packets: Vec<Vec<u8>>, now: SimTime) -> Result<(), HarnessError> {
        for p in packets {
            match parse_inner(&p) {
                Some((INNER_DATA, flow, conn, seq)) => self.on_data(flow, conn, seq, now)?,
                Some((INNER_ACK, flow, conn, ack)) => self.on_ack(flow, conn, ack, now)?,
                _ => self.integrity_errors += 1,
            }
        }
        Ok(())
    }

    fn step(&mut self, now: SimTime) -> Result<(), HarnessError> {
        for d in self.down.advance(now) {
            match d.packet {
                Wire::Data { flow, conn, seq } => self.on_data(flow, conn, seq, now)?,
                Wire::Coded(bytes) => {
                    let island = self.island.as_mut().expect("coded traffic implies gateways");
                    let inner = island.egress(&bytes);
                    self.on_inner(inner, now)?;
                }
                Wire::Ack { .. } => self.integrity_errors += 1,
            }
        }
        for (t, cause, w) in self.down.take_losses() {
            self.drops.push((t, data_flow(&w), DropRecord::Lost(cause)));
        }
        for d in self.up.advance(now) {
            match d.packet {
                Wire::Ack { flow, conn, ack } => self.on_ack(flow, conn, ack, now)?,
                Wire::Coded(bytes) => {
                    let world = self.world.as_mut().expect("coded traffic implies gateways");
                    let inner = world.egress(&bytes);
                    self.on_inner(inner, now)?;
                }
                Wire::Data { .. } => self.integrity_errors += 1,
            }
        }
        Ok(())
    }

    fn run(mut self, seed: u64) -> Result<RunOutput, HarnessError> {
        let end = SimTime::ZERO + self.sc.duration;
        let si = self.sc.sample_interval;
        let mut rows = Vec::new();
        let mut last_delivered = [0u64; 2];
        let mut last_stats = *self.down.stats();
        let mut window_start = SimTime::ZERO;

        loop {
            let next = [self.events.peek_time(), self.down.next_event(), self.up.next_event()]
                .into_iter()
                .flatten()
                .min();
            let Some(now) = next.filter(|&t| t <= end) else {
                break;
            };
            self.step(now)?;
            while let Some((_, ev)) = self.events.pop_until(now) {
                match ev {
                    Event::FlowStart(i) => {
                        let segs = self.flows[i].sender.poll_send(now);
                        self.send_segments(i, segs, now)?;
                    }
                    Event::Rto(i) => {
                        let f = &mut self.flows[i];
                        if f.rto_armed == Some(now) {
                            f.rto_armed = None;
                        }
                        let segs = f.sender.on_timer(now);
                        self.send_segments(i, segs, now)?;
                    }
                    Event::Flush(side) => {
                        if self.flush_armed[side as usize] == Some(now) {
                            self.flush_armed[side as usize] = None;
                        }
                        let datagrams = self.endpoint(side).map(|e| e.tick(now)).unwrap_or_default();
                        self.offer_coded(side, datagrams, now);
                    }
                    Event::Sample => {
                        let stats = *self.down.stats();
                        let offered = stats.offered - last_stats.offered;
                        let dropped = stats.dropped() - last_stats.dropped();
                        let mbps = |bytes: u64| bytes as f64 * 8.0 / si.as_secs_f64() / 1e6;
                        let busy = self.down.busy_between(window_start, now);
                        rows.push(SampleRow {
                            time_s: now.as_secs_f64(),
                            tcp_goodput_mbps: mbps(self.delivered[0] - last_delivered[0]),
                            nc_goodput_mbps: mbps(self.delivered[1] - last_delivered[1]),
                            utilization: (busy.as_secs_f64() / si.as_secs_f64()).min(1.0),
                            loss_pct: if offered == 0 {
                                0.0
                            } else {
                                100.0 * dropped as f64 / offered as f64
                            },
                            queue_bytes: self.down.queued_bytes() as u64,
                        });
                        last_delivered = self.delivered;
                        last_stats = stats;
                        window_start = now;
                    }
                }
            }
            self.events.advance_to(now);
        }
        Ok(self.finish(rows, seed))
    }

    fn finish(self, rows: Vec<SampleRow>, seed: u64) -> RunOutput {
        let duration_s = self.sc.duration.as_secs_f64();
        let class = |c: FlowClass, samples: Vec<f64>| {
            let flows: Vec<&Flow> = self.flows.iter().filter(|f| f.class == c).collect();
            let delivered = self.delivered[c as usize];
            let mut sorted = samples.clone();
            sorted.sort_by(f64::total_cmp);
            ClassSummary {
                flows: flows.len(),
                delivered_bytes: delivered,
                goodput_mbps: delivered as f64 * 8.0 / duration_s / 1e6,
                mean_sample_mbps: mean(&samples),
                median_sample_mbps: median(&sorted),
                segments_sent: flows.iter().map(|f| f.totals().segments_sent).sum(),
                retransmissions: flows.iter().map(|f| f.totals().retransmissions).sum(),
                fast_retransmits: flows.iter().map(|f| f.totals().fast_retransmits).sum(),
                timeouts: flows.iter().map(|f| f.totals().timeouts).sum(),
            }
        };
        let summary = Summary {
            scenario: self.sc.name.clone(),
            seed,
            duration_s,
            plain: class(FlowClass::Plain, rows.iter().map(|r| r.tcp_goodput_mbps).collect()),
            tunneled: class(FlowClass::Tunneled, rows.iter().map(|r| r.nc_goodput_mbps).collect()),
            mean_utilization: mean(&rows.iter().map(|r| r.utilization).collect::<Vec<_>>()),
            downlink: *self.down.stats(),
            uplink: *self.up.stats(),
            tunnel_encoder: self.world.as_ref().map(|w| w.stats().clone()),
            tunnel_decoder: self.island.as_ref().map(|i| i.stats().clone()),
            integrity_errors: self.integrity_errors,
        };
        RunOutput {
            rows,
            summary,
            loss_signals: self
                .flows
                .iter()
                .map(|f| (f.class, f.all_signals()))
                .collect(),
            downlink_drops: self.drops,
        }
    }
}

fn new_sender(sc: &Scenario, mss: usize) -> TcpSender {
    let s = TcpSender::new(TcpConfig {
        mss,
        ..TcpConfig::default()
    });
    match sc.flows.transfer_bytes {
        Some(bytes) => s.with_limit(bytes.div_ceil(mss) as u64),
        None => s,
    }
}

fn data_flow(w: &Wire) -> Option<usize> {
    match w {
        Wire::Data { flow, .. } => Some(*flow),
        _ => None,
    }
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn median(sorted: &[f64]) -> f64 {
    match sorted.len() {
        0 => 0.0,
        n if n % 2 == 1 => sorted[n / 2],
        n => (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0,
    }
}

/// Runs a scenario to completion. The result depends only on the scenario
/// and its seed.
pub fn run(scenario: &Scenario) -> Result<RunOutput, HarnessError> {
    scenario.validate()?;
    let seed = scenario.seed()?;
    Sim::new(scenario, seed)?.run(seed)
}
