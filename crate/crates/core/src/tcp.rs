//! Segment-granular Reno sender and cumulative-ACK receiver.
//!
//! Sequence numbers count segments, not bytes. Every arriving segment is
//! acknowledged immediately (no delayed ACK) and the receive window is
//! unbounded, so the sender is limited only by `cwnd`.

use std::collections::{BTreeSet, VecDeque};

use crate::link::LinkProfile;
use crate::time::{SimDuration, SimTime};

/// TCP/IP header bytes added to every segment and carried alone by an ACK.
pub const TCP_IP_HEADER: usize = 40;
pub const DEFAULT_MSS: usize = 1400;

/// Bandwidth-delay product in bytes.
pub fn bdp(profile: &LinkProfile, rtt: SimDuration) -> usize {
    (profile.bandwidth_bps as u128 * rtt.as_nanos() as u128 / 8_000_000_000) as usize
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TcpConfig {
    pub mss: usize,
    pub initial_cwnd: f64,
    pub initial_rto: SimDuration,
    pub min_rto: SimDuration,
    pub max_rto: SimDuration,
}

impl Default for TcpConfig {
    fn default() -> Self {
        TcpConfig {
            mss: DEFAULT_MSS,
            initial_cwnd: 10.0,
            initial_rto: SimDuration::from_secs(1),
            min_rto: SimDuration::from_secs(1),
            max_rto: SimDuration::from_secs(60),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TcpState {
    SlowStart,
    CongestionAvoidance,
    FastRecovery,
    /// A partial ACK arrived during fast recovery. Nothing new is sent until
    /// the retransmission timer fires or the whole recovery window is acked.
    RtoWait,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossSignal {
    TripleDupack,
    Rto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub seq: u64,
    pub retransmission: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SenderStats {
    pub segments_sent: u64,
    pub retransmissions: u64,
    pub fast_retransmits: u64,
    pub timeouts: u64,
}

#[derive(Debug, Clone, Copy)]
struct SentInfo {
    at: SimTime,
    retransmitted: bool,
}

#[derive(Debug, Clone)]
pub struct TcpSender {
    cfg: TcpConfig,
    cwnd: f64,
    ssthresh: f64,
    state: TcpState,
    snd_una: u64,
    snd_nxt: u64,
    /// One past the highest sequence ever sent.
    high: u64,
    /// Highest sequence outstanding at the last loss event.
    recover: Option<u64>,
    dupacks: u32,
    ca_acks: u64,
    srtt: Option<SimDuration>,
    rttvar: SimDuration,
    rto: SimDuration,
    rto_deadline: Option<SimTime>,
    sent: VecDeque<SentInfo>,
    /// Segments in the transfer; `None` sends forever.
    limit: Option<u64>,
    stats: SenderStats,
    signals: Vec<(SimTime, LossSignal)>,
}

impl TcpSender {
    pub fn new(cfg: TcpConfig) -> Self {
        TcpSender {
            cwnd: cfg.initial_cwnd,
            ssthresh: f64::INFINITY,
            state: TcpState::SlowStart,
            snd_una: 0,
            snd_nxt: 0,
            high: 0,
            recover: None,
            dupacks: 0,
            ca_acks: 0,
            srtt: None,
            rttvar: SimDuration::ZERO,
            rto: cfg.initial_rto,
            rto_deadline: None,
            sent: VecDeque::new(),
            limit: None,
            stats: SenderStats::default(),
            signals: Vec::new(),
            cfg,
        }
    }

    /// Ends the transfer after `segments` segments.
    pub fn with_limit(mut self, segments: u64) -> Self {
        self.limit = Some(segments);
        self
    }

    /// Whether a finite transfer has been fully acknowledged.
    pub fn is_complete(&self) -> bool {
        self.limit.is_some_and(|l| self.snd_una >= l)
    }

    pub fn config(&self) -> &TcpConfig {
        &self.cfg
    }

    pub fn cwnd(&self) -> f64 {
        self.cwnd
    }

    pub fn ssthresh(&self) -> f64 {
        self.ssthresh
    }

    pub fn state(&self) -> TcpState {
        self.state
    }

    pub fn snd_una(&self) -> u64 {
        self.snd_una
    }

    pub fn in_flight(&self) -> u64 {
        self.snd_nxt - self.snd_una
    }

    pub fn rto(&self) -> SimDuration {
        self.rto
    }

    pub fn srtt(&self) -> Option<SimDuration> {
        self.srtt
    }

    pub fn dupacks(&self) -> u32 {
        self.dupacks
    }

    pub fn rto_deadline(&self) -> Option<SimTime> {
        self.rto_deadline
    }

    pub fn stats(&self) -> &SenderStats {
        &self.stats
    }

    /// Every loss reaction so far, in order.
    pub fn loss_signals(&self) -> &[(SimTime, LossSignal)] {
        &self.signals
    }

    /// Segments the window allows right now.
    pub fn poll_send(&mut self, now: SimTime) -> Vec<Segment> {
        let mut out = Vec::new();
        if matches!(self.state, TcpState::FastRecovery | TcpState::RtoWait) {
            return out;
        }
        while ((self.snd_nxt - self.snd_una) as f64) < self.cwnd.floor()
            && self.limit.is_none_or(|l| self.snd_nxt < l)
        {
            out.push(self.transmit(self.snd_nxt, now));
            self.snd_nxt += 1;
        }
        out
    }

    /// Processes a cumulative ACK (`ack` is the next segment the receiver
    /// expects) and returns segments to send.
    pub fn on_ack(&mut self, ack: u64, now: SimTime) -> Vec<Segment> {
        if ack > self.snd_nxt {
            // After go-back-N the receiver may already hold data beyond snd_nxt.
            self.snd_nxt = ack.min(self.high);
        }
        if ack < self.snd_una || (ack == self.snd_una && self.snd_nxt == self.snd_una) {
            return Vec::new();
        }
        if ack == self.snd_una {
            self.dupacks += 1;
            let recovered = self.recover.is_none_or(|r| self.snd_una > r);
            if self.dupacks == 3
                && recovered
                && matches!(self.state, TcpState::SlowStart | TcpState::CongestionAvoidance)
            {
                return self.on_loss_signal(LossSignal::TripleDupack, now);
            }
            return Vec::new();
        }

        let newly = ack - self.snd_una;
        self.sample_rtt(ack, now);
        for _ in 0..newly {
            self.sent.pop_front();
        }
        self.snd_una = ack;
        self.dupacks = 0;
        self.rto_deadline = (self.snd_nxt > self.snd_una).then(|| now + self.rto);

        match self.state {
            TcpState::SlowStart => {
                self.cwnd += 1.0;
                if self.cwnd >= self.ssthresh {
                    self.state = TcpState::CongestionAvoidance;
                    self.ca_acks = 0;
                }
            }
            TcpState::CongestionAvoidance => self.grow_avoidance(),
            TcpState::FastRecovery | TcpState::RtoWait => {
                if self.recover.is_some_and(|r| ack > r) {
                    self.cwnd = self.ssthresh;
                    self.state = TcpState::CongestionAvoidance;
                    self.ca_acks = 0;
                } else {
                    self.state = TcpState::RtoWait;
                }
            }
        }
        self.poll_send(now)
    }

    /// Applies a loss reaction and returns the retransmission, if any.
    pub fn on_loss_signal(&mut self, kind: LossSignal, now: SimTime) -> Vec<Segment> {
        self.signals.push((now, kind));
        self.ssthresh = (self.cwnd / 2.0).max(2.0);
        self.recover = Some(self.snd_nxt.saturating_sub(1));
        self.dupacks = 0;
        self.ca_acks = 0;
        match kind {
            LossSignal::TripleDupack => {
                self.stats.fast_retransmits += 1;
                self.cwnd = self.ssthresh;
                self.state = TcpState::FastRecovery;
                self.rto_deadline = Some(now + self.rto);
                vec![self.transmit(self.snd_una, now)]
            }
            LossSignal::Rto => {
                self.stats.timeouts += 1;
                self.cwnd = 1.0;
                self.state = TcpState::SlowStart;
                self.rto = (self.rto + self.rto).min(self.cfg.max_rto);
                self.snd_nxt = self.snd_una;
                self.rto_deadline = None;
                self.poll_send(now)
            }
        }
    }

    /// Fires the retransmission timer if it is due at `now`.
    pub fn on_timer(&mut self, now: SimTime) -> Vec<Segment> {
        match self.rto_deadline {
            Some(d) if now >= d && self.snd_una < self.high => {
                self.on_loss_signal(LossSignal::Rto, now)
            }
            _ => Vec::new(),
        }
    }

    fn grow_avoidance(&mut self) {
        self.ca_acks += 1;
        let w = self.cwnd.floor().max(1.0) as u64;
        if self.ca_acks >= w {
            self.ca_acks -= w;
            self.cwnd += 1.0;
        }
    }

    fn transmit(&mut self, seq: u64, now: SimTime) -> Segment {
        let retransmission = seq < self.high;
        let idx = (seq - self.snd_una) as usize;
        if idx < self.sent.len() {
            self.sent[idx] = SentInfo {
                at: now,
                retransmitted: true,
            };
        } else {
            self.sent.push_back(SentInfo {
                at: now,
                retransmitted: retransmission,
            });
        }
        self.high = self.high.max(seq + 1);
        self.stats.segments_sent += 1;
        if retransmission {
            self.stats.retransmissions += 1;
        }
        if self.rto_deadline.is_none() {
            self.rto_deadline = Some(now + self.rto);
        }
        Segment {
            seq,
            retransmission,
        }
    }

    // Karn: only segments sent exactly once yield samples.
    fn sample_rtt(&mut self, ack: u64, now: SimTime) {
        let idx = (ack - 1 - self.snd_una) as usize;
        let Some(info) = self.sent.get(idx).copied() else {
            return;
        };
        if info.retransmitted {
            return;
        }
        let r = now - info.at;
        let (srtt, rttvar) = match self.srtt {
            None => (r, SimDuration::from_nanos(r.as_nanos() / 2)),
            Some(s) => {
                let err = s.as_nanos().abs_diff(r.as_nanos());
                (
                    SimDuration::from_nanos((7 * s.as_nanos() + r.as_nanos()) / 8),
                    SimDuration::from_nanos((3 * self.rttvar.as_nanos() + err) / 4),
                )
            }
        };
        self.srtt = Some(srtt);
        self.rttvar = rttvar;
        let rto = srtt + SimDuration::from_nanos(4 * rttvar.as_nanos());
        self.rto = rto.max(self.cfg.min_rto).min(self.cfg.max_rto);
    }
}

#[derive(Debug, Clone, Default)]
pub struct TcpReceiver {
    rcv_nxt: u64,
    out_of_order: BTreeSet<u64>,
    delivered: u64,
}

impl TcpReceiver {
    pub fn new() -> Self {
        Self::default()
    }

    /// Accepts a segment; returns the cumulative ACK and how many segments
    /// became newly deliverable in order.
    pub fn on_segment(&mut self, seq: u64) -> (u64, u64) {
        let before = self.rcv_nxt;
        if seq == self.rcv_nxt {
            self.rcv_nxt += 1;
            while self.out_of_order.remove(&self.rcv_nxt) {
                self.rcv_nxt += 1;
            }
        } else if seq > self.rcv_nxt {
            self.out_of_order.insert(seq);
        }
        let newly = self.rcv_nxt - before;
        self.delivered += newly;
        (self.rcv_nxt, newly)
    }

    pub fn rcv_nxt(&self) -> u64 {
        self.rcv_nxt
    }

    /// Segments delivered in order; each counted once.
    pub fn delivered_segments(&self) -> u64 {
        self.delivered
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(ms: u64) -> SimTime {
        SimTime::ZERO + SimDuration::from_millis(ms)
    }

    fn sender(cwnd: f64) -> TcpSender {
        TcpSender::new(TcpConfig {
            initial_cwnd: cwnd,
            ..TcpConfig::default()
        })
    }

    #[test]
    fn slow_start_one_ack() {
        let mut s = sender(1.0);
        assert_eq!(s.poll_send(t(0)).len(), 1);
        let out = s.on_ack(1, t(100));
        assert_eq!(s.cwnd(), 2.0);
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn avoidance_ten_acks_add_one() {
        let mut s = sender(10.0);
        s.ssthresh = 5.0;
        s.state = TcpState::CongestionAvoidance;
        s.poll_send(t(0));
        for a in 1..=10 {
            s.on_ack(a, t(100));
        }
        assert_eq!(s.cwnd(), 11.0);
    }

    #[test]
    fn duplicate_acks_count() {
        let mut s = sender(10.0);
        s.poll_send(t(0));
        s.on_ack(2, t(10));
        s.on_ack(2, t(11));
        s.on_ack(1, t(12));
        assert_eq!(s.dupacks(), 1);
    }

    #[test]
    fn triple_dupack_halves() {
        let mut s = sender(64.0);
        s.poll_send(t(0));
        let out = s.on_loss_signal(LossSignal::TripleDupack, t(1));
        assert_eq!(s.cwnd(), 32.0);
        assert_eq!(s.ssthresh(), 32.0);
        assert_eq!(out, vec![Segment { seq: 0, retransmission: true }]);
    }

    #[test]
    fn third_dupack_triggers_fast_retransmit() {
        let mut s = sender(64.0);
        s.poll_send(t(0));
        s.on_ack(3, t(600));
        for i in 0..3 {
            let out = s.on_ack(3, t(601 + i));
            if i < 2 {
                assert!(out.is_empty());
            } else {
                assert_eq!(out, vec![Segment { seq: 3, retransmission: true }]);
            }
        }
        // The first ACK grew cwnd to 65 and released segments 64..=67.
        assert_eq!(s.state(), TcpState::FastRecovery);
        assert_eq!(s.cwnd(), 32.5);
        assert!(s.on_ack(67, t(1200)).is_empty());
        assert_eq!(s.state(), TcpState::RtoWait);

        let mut s = sender(64.0);
        s.poll_send(t(0));
        s.on_ack(3, t(600));
        for i in 0..3 {
            s.on_ack(3, t(601 + i));
        }
        // A full ACK leaves recovery at ssthresh.
        let out = s.on_ack(68, t(1200));
        assert_eq!(s.state(), TcpState::CongestionAvoidance);
        assert_eq!(s.cwnd(), 32.5);
        assert_eq!(out.len(), 32);
    }

    #[test]
    fn partial_ack_waits_for_timer() {
        let mut s = sender(20.0);
        s.poll_send(t(0));
        s.on_ack(2, t(600));
        for i in 0..3 {
            s.on_ack(2, t(601 + i));
        }
        assert!(s.on_ack(7, t(1200)).is_empty());
        assert_eq!(s.state(), TcpState::RtoWait);
        let d = s.rto_deadline().unwrap();
        assert!(s.on_timer(t(1201)).is_empty());
        let out = s.on_timer(d);
        assert_eq!(s.state(), TcpState::SlowStart);
        assert_eq!(out, vec![Segment { seq: 7, retransmission: true }]);
    }

    #[test]
    fn rto_resets_window_and_backs_off() {
        let mut s = sender(64.0);
        s.poll_send(t(0));
        let rto = s.rto();
        s.on_loss_signal(LossSignal::Rto, t(1000));
        assert_eq!(s.cwnd(), 1.0);
        assert_eq!(s.ssthresh(), 32.0);
        assert_eq!(s.state(), TcpState::SlowStart);
        assert_eq!(s.rto(), rto + rto);
        for _ in 0..10 {
            s.on_loss_signal(LossSignal::Rto, t(1000));
        }
        assert_eq!(s.rto(), SimDuration::from_secs(60));
    }

    #[test]
    fn rtt_estimation() {
        let mut s = sender(2.0);
        s.cfg.min_rto = SimDuration::from_millis(1);
        s.poll_send(t(0));
        s.on_ack(1, t(500));
        assert_eq!(s.srtt(), Some(SimDuration::from_millis(500)));
        // srtt + 4 * srtt/2
        assert_eq!(s.rto(), SimDuration::from_millis(1500));
    }

    #[test]
    fn karn_skips_retransmitted_samples() {
        let mut s = sender(1.0);
        s.poll_send(t(0));
        s.on_timer(t(1000));
        s.on_ack(1, t(1100));
        assert_eq!(s.srtt(), None);
    }

    #[test]
    fn finite_transfer_completes() {
        let mut s = sender(10.0).with_limit(4);
        assert_eq!(s.poll_send(t(0)).len(), 4);
        assert!(!s.is_complete());
        assert!(s.on_ack(4, t(500)).is_empty());
        assert!(s.is_complete());
        assert_eq!(s.rto_deadline(), None);
    }

    #[test]
    fn receiver_reorders_and_counts_once() {
        let mut r = TcpReceiver::new();
        assert_eq!(r.on_segment(0), (1, 1));
        assert_eq!(r.on_segment(2), (1, 0));
        assert_eq!(r.on_segment(3), (1, 0));
        assert_eq!(r.on_segment(1), (4, 3));
        assert_eq!(r.on_segment(1), (4, 0));
        assert_eq!(r.delivered_segments(), 4);
    }

    #[test]
    fn bdp_examples() {
        let p = |mbps: u64| LinkProfile::new(mbps * 1_000_000, SimDuration::ZERO, 1);
        assert_eq!(bdp(&p(8), SimDuration::from_millis(550)), 550_000);
        assert_eq!(bdp(&p(16), SimDuration::from_millis(550)), 1_100_000);
        assert_eq!(bdp(&p(160), SimDuration::from_millis(130)), 2_600_000);
    }
}
