//! One direction of a satellite link: a serializing transmitter behind a
//! byte-bounded drop-tail FIFO, followed by propagation delay. Random and
//! Gilbert-Elliott loss, and injected bursts, strike at departure.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::time::{SimDuration, SimTime};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinkError {
    #[error("invalid link profile: {0}")]
    InvalidProfile(String),
    #[error("burst length must be at least 1")]
    EmptyBurst,
    #[error("utilization window must be a positive multiple of {bucket}")]
    Window { bucket: SimDuration },
}

/// Two-state Markov loss model, stepped once per departing packet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GilbertElliott {
    pub p_good_to_bad: f64,
    pub p_bad_to_good: f64,
    /// Drop probability while in the bad state.
    pub bad_loss: f64,
}

impl GilbertElliott {
    /// Long-run fraction of packets dropped by the model alone.
    pub fn stationary_loss(&self) -> f64 {
        let denom = self.p_good_to_bad + self.p_bad_to_good;
        if denom == 0.0 {
            return 0.0;
        }
        self.p_good_to_bad / denom * self.bad_loss
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkProfile {
    pub bandwidth_bps: u64,
    pub propagation_delay: SimDuration,
    pub queue_capacity: usize,
    pub random_loss: f64,
    pub burst: Option<GilbertElliott>,
}

impl LinkProfile {
    pub fn new(bandwidth_bps: u64, propagation_delay: SimDuration, queue_capacity: usize) -> Self {
        LinkProfile {
            bandwidth_bps,
            propagation_delay,
            queue_capacity,
            random_loss: 0.0,
            burst: None,
        }
    }

    pub fn with_random_loss(mut self, p: f64) -> Self {
        self.random_loss = p;
        self
    }

    pub fn with_burst(mut self, ge: GilbertElliott) -> Self {
        self.burst = Some(ge);
        self
    }

    /// Checks the profile can carry packets of up to `max_packet` bytes.
    pub fn validate(&self, max_packet: usize) -> Result<(), LinkError> {
        let bad = |m: String| Err(LinkError::InvalidProfile(m));
        if self.bandwidth_bps == 0 {
            return bad("bandwidth must be positive".into());
        }
        if self.queue_capacity < max_packet {
            return bad(format!(
                "queue capacity {} is below one {max_packet}-byte packet",
                self.queue_capacity
            ));
        }
        let mut probs = vec![("random_loss", self.random_loss)];
        if let Some(ge) = &self.burst {
            probs.extend([
                ("p_good_to_bad", ge.p_good_to_bad),
                ("p_bad_to_good", ge.p_bad_to_good),
                ("bad_loss", ge.bad_loss),
            ]);
        }
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name} = {p} is not a probability"));
            }
        }
        Ok(())
    }

    pub fn transmission_time(&self, bytes: usize) -> SimDuration {
        SimDuration::transmission(bytes, self.bandwidth_bps)
    }
}

#[derive(Debug)]
pub enum OfferOutcome<P> {
    Enqueued { departure: SimTime },
    /// The queue had no room; the packet is handed back.
    TailDropped(P),
}

impl<P> OfferOutcome<P> {
    pub fn is_dropped(&self) -> bool {
        matches!(self, OfferOutcome::TailDropped(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossCause {
    Random,
    Burst,
    Injected,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LinkStats {
    pub offered: u64,
    pub offered_bytes: u64,
    pub tail_dropped: u64,
    pub lost_random: u64,
    pub lost_burst: u64,
    pub lost_injected: u64,
    pub delivered: u64,
    pub delivered_bytes: u64,
    /// Sum over departed packets of (departure - enqueue - transmission).
    pub queue_delay_ns: u128,
    pub departed: u64,
}

impl LinkStats {
    pub fn lost(&self) -> u64 {
        self.lost_random + self.lost_burst + self.lost_injected
    }

    pub fn dropped(&self) -> u64 {
        self.tail_dropped + self.lost()
    }

    pub fn mean_queue_delay(&self) -> SimDuration {
        if self.departed == 0 {
            return SimDuration::ZERO;
        }
        SimDuration::from_nanos((self.queue_delay_ns / self.departed as u128) as u64)
    }
}

#[derive(Debug)]
pub struct Delivery<P> {
    pub packet: P,
    pub arrival: SimTime,
}

struct Queued<P> {
    packet: P,
    size: usize,
    enqueued: SimTime,
    departure: SimTime,
}

struct Burst {
    start: SimTime,
    remaining: usize,
}

/// Default resolution of the busy-time accumulator.
pub const UTILIZATION_BUCKET: SimDuration = SimDuration::from_millis(10);

pub struct Link<P> {
    profile: LinkProfile,
    queue: VecDeque<Queued<P>>,
    queued_bytes: usize,
    busy_until: SimTime,
    in_flight: VecDeque<Delivery<P>>,
    rng: ChaCha8Rng,
    ge_bad: bool,
    bursts: Vec<Burst>,
    stats: LinkStats,
    busy_ns: Vec<u64>,
    bucket: SimDuration,
    loss_log: Option<Vec<(SimTime, LossCause, P)>>,
}

impl<P> Link<P> {
    pub fn new(profile: LinkProfile, seed: u64) -> Self {
        Link {
            profile,
            queue: VecDeque::new(),
            queued_bytes: 0,
            busy_until: SimTime::ZERO,
            in_flight: VecDeque::new(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            ge_bad: false,
            bursts: Vec::new(),
            stats: LinkStats::default(),
            busy_ns: Vec::new(),
            bucket: UTILIZATION_BUCKET,
            loss_log: None,
        }
    }

    /// Keeps packets lost at departure for later inspection via [`Link::take_losses`].
    pub fn record_losses(&mut self) {
        self.loss_log.get_or_insert_with(Vec::new);
    }

    pub fn take_losses(&mut self) -> Vec<(SimTime, LossCause, P)> {
        self.loss_log.as_mut().map(std::mem::take).unwrap_or_default()
    }

    pub fn profile(&self) -> &LinkProfile {
        &self.profile
    }

    pub fn stats(&self) -> &LinkStats {
        &self.stats
    }

    /// Bytes waiting for or undergoing transmission.
    pub fn queued_bytes(&self) -> usize {
        self.queued_bytes
    }

    pub fn queued_packets(&self) -> usize {
        self.queue.len()
    }

    /// Earliest pending departure or arrival.
    pub fn next_event(&self) -> Option<SimTime> {
        let d = self.queue.front().map(|q| q.departure);
        let a = self.in_flight.front().map(|d| d.arrival);
        match (d, a) {
            (Some(d), Some(a)) => Some(d.min(a)),
            (x, None) | (None, x) => x,
        }
    }

    pub fn offer(&mut self, packet: P, size: usize, now: SimTime) -> OfferOutcome<P> {
        self.depart_until(now);
        self.stats.offered += 1;
        self.stats.offered_bytes += size as u64;
        if self.queued_bytes + size > self.profile.queue_capacity {
            self.stats.tail_dropped += 1;
            return OfferOutcome::TailDropped(packet);
        }
        let start = now.max(self.busy_until);
        let departure = start + self.profile.transmission_time(size);
        self.account_busy(start, departure);
        self.busy_until = departure;
        self.queued_bytes += size;
        self.queue.push_back(Queued {
            packet,
            size,
            enqueued: now,
            departure,
        });
        OfferOutcome::Enqueued { departure }
    }

    /// Processes every departure and arrival due at or before `until` and
    /// returns the arrivals in order.
    pub fn advance(&mut self, until: SimTime) -> Vec<Delivery<P>> {
        self.depart_until(until);
        let mut out = Vec::new();
        while self.in_flight.front().is_some_and(|d| d.arrival <= until) {
            let d = self.in_flight.pop_front().expect("front checked");
            out.push(d);
        }
        out
    }

    /// Drops the next `length` departures at or after `start`, regardless of
    /// the stochastic loss model.
    pub fn inject_burst(&mut self, start: SimTime, length: usize) -> Result<(), LinkError> {
        if length == 0 {
            return Err(LinkError::EmptyBurst);
        }
        self.bursts.push(Burst {
            start,
            remaining: length,
        });
        Ok(())
    }

    /// Busy fraction of each full `window` in `[0, end)`.
    pub fn utilization(&self, window: SimDuration, end: SimTime) -> Result<Vec<f64>, LinkError> {
        let w = window.as_nanos();
        let b = self.bucket.as_nanos();
        if w == 0 || w % b != 0 {
            return Err(LinkError::Window {
                bucket: self.bucket,
            });
        }
        let per = (w / b) as usize;
        let windows = (end.as_nanos() / w) as usize;
        Ok((0..windows)
            .map(|i| {
                let busy: u64 = (i * per..(i + 1) * per)
                    .map(|j| self.busy_ns.get(j).copied().unwrap_or(0))
                    .sum();
                (busy as f64 / w as f64).min(1.0)
            })
            .collect())
    }

    /// Busy time of the transmitter within `[from, to)`; both must lie on bucket boundaries.
    pub fn busy_between(&self, from: SimTime, to: SimTime) -> SimDuration {
        let b = self.bucket.as_nanos();
        let (i, j) = ((from.as_nanos() / b) as usize, (to.as_nanos() / b) as usize);
        SimDuration::from_nanos(
            (i..j)
                .map(|k| self.busy_ns.get(k).copied().unwrap_or(0))
                .sum(),
        )
    }

    fn account_busy(&mut self, start: SimTime, end: SimTime) {
        let b = self.bucket.as_nanos();
        let (mut t, end) = (start.as_nanos(), end.as_nanos());
        while t < end {
            let idx = (t / b) as usize;
            let edge = ((idx as u64) + 1) * b;
            let chunk = edge.min(end) - t;
            if self.busy_ns.len() <= idx {
                self.busy_ns.resize(idx + 1, 0);
            }
            self.busy_ns[idx] += chunk;
            t += chunk;
        }
    }

    fn depart_until(&mut self, until: SimTime) {
        while self.queue.front().is_some_and(|q| q.departure <= until) {
            let q = self.queue.pop_front().expect("front checked");
            self.queued_bytes -= q.size;
            let tx = self.profile.transmission_time(q.size);
            self.stats.departed += 1;
            self.stats.queue_delay_ns +=
                (q.departure.since(q.enqueued).as_nanos() - tx.as_nanos()) as u128;
            match self.loss_at(q.departure) {
                Some(cause) => {
                    match cause {
                        LossCause::Random => self.stats.lost_random += 1,
                        LossCause::Burst => self.stats.lost_burst += 1,
                        LossCause::Injected => self.stats.lost_injected += 1,
                    }
                    if let Some(log) = &mut self.loss_log {
                        log.push((q.departure, cause, q.packet));
                    }
                }
                None => {
                    self.stats.delivered += 1;
                    self.stats.delivered_bytes += q.size as u64;
                    self.in_flight.push_back(Delivery {
                        packet: q.packet,
                        arrival: q.departure + self.profile.propagation_delay,
                    });
                }
            }
        }
    }

    // The stochastic draws happen on every departure, so an injected burst
    // does not shift the random sequence seen by later packets.
    fn loss_at(&mut self, t: SimTime) -> Option<LossCause> {
        let ge_drop = match self.profile.burst {
            Some(ge) => {
                let flip = if self.ge_bad {
                    ge.p_bad_to_good
                } else {
                    ge.p_good_to_bad
                };
                if self.rng.random_bool(flip) {
                    self.ge_bad = !self.ge_bad;
                }
                self.ge_bad && self.rng.random_bool(ge.bad_loss)
            }
            None => false,
        };
        let random_drop = self.rng.random_bool(self.profile.random_loss);

        if let Some(b) = self
            .bursts
            .iter_mut()
            .find(|b| b.remaining > 0 && b.start <= t)
        {
            b.remaining -= 1;
            self.bursts.retain(|b| b.remaining > 0);
            return Some(LossCause::Injected);
        }
        if ge_drop {
            Some(LossCause::Burst)
        } else if random_drop {
            Some(LossCause::Random)
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ten_mbps(queue: usize) -> LinkProfile {
        LinkProfile::new(10_000_000, SimDuration::from_millis(5), queue)
    }

    #[test]
    fn transmission_of_1250_bytes_at_10_mbps() {
        let mut l = Link::new(ten_mbps(10_000), 1);
        match l.offer((), 1250, SimTime::ZERO) {
            OfferOutcome::Enqueued { departure } => {
                assert_eq!(departure, SimTime::ZERO + SimDuration::from_millis(1))
            }
            OfferOutcome::TailDropped(_) => panic!("dropped"),
        }
        let d = l.advance(SimTime::from_secs_f64(1.0));
        assert_eq!(d[0].arrival, SimTime::ZERO + SimDuration::from_millis(6));
    }

    #[test]
    fn ninth_packet_tail_dropped() {
        let mut l = Link::new(ten_mbps(10_000), 1);
        for _ in 0..8 {
            assert!(!l.offer((), 1250, SimTime::ZERO).is_dropped());
        }
        assert_eq!(l.queued_bytes(), 10_000);
        assert!(l.offer((), 1250, SimTime::ZERO).is_dropped());
        assert_eq!(l.stats().tail_dropped, 1);
        // The head departs at 1 ms and frees room.
        assert!(!l
            .offer((), 1250, SimTime::ZERO + SimDuration::from_millis(1))
            .is_dropped());
    }

    #[test]
    fn certain_loss_loses_everything() {
        let mut l = Link::new(ten_mbps(100_000), 3);
        l.profile.random_loss = 1.0;
        for i in 0..50 {
            l.offer(i, 1000, SimTime::ZERO);
        }
        assert!(l.advance(SimTime::from_secs_f64(10.0)).is_empty());
        assert_eq!(l.stats().lost_random, 50);
    }

    #[test]
    fn back_to_back_serialization() {
        let mut l = Link::new(ten_mbps(10_000), 1);
        l.offer('a', 1250, SimTime::ZERO);
        l.offer('b', 1250, SimTime::ZERO);
        let d = l.advance(SimTime::from_secs_f64(1.0));
        assert_eq!(d[1].arrival - d[0].arrival, SimDuration::from_millis(1));
        assert_eq!((d[0].packet, d[1].packet), ('a', 'b'));
    }

    #[test]
    fn nothing_pending() {
        let mut l: Link<()> = Link::new(ten_mbps(10_000), 1);
        assert!(l.advance(SimTime::from_secs_f64(5.0)).is_empty());
        assert_eq!(l.next_event(), None);
    }

    #[test]
    fn utilization_idle_and_saturated() {
        let l: Link<()> = Link::new(ten_mbps(10_000), 1);
        let u = l
            .utilization(SimDuration::from_secs(1), SimTime::from_secs_f64(3.0))
            .unwrap();
        assert_eq!(u, vec![0.0; 3]);

        // Constant-rate sender at twice capacity.
        let mut l = Link::new(ten_mbps(20_000), 1);
        let gap = SimDuration::from_micros(500);
        let mut t = SimTime::ZERO;
        while t < SimTime::from_secs_f64(5.0) {
            l.offer((), 1250, t);
            l.advance(t);
            t += gap;
        }
        let u = l
            .utilization(SimDuration::from_secs(1), SimTime::from_secs_f64(5.0))
            .unwrap();
        assert_eq!(u.len(), 5);
        assert!(u.iter().all(|&x| x >= 0.99), "{u:?}");
        assert!(l
            .utilization(SimDuration::from_micros(1500), SimTime::ZERO)
            .is_err());
    }

    #[test]
    fn burst_injection() {
        let mut l = Link::new(ten_mbps(100_000), 1);
        assert_eq!(l.inject_burst(SimTime::ZERO, 0), Err(LinkError::EmptyBurst));
        l.inject_burst(SimTime::ZERO + SimDuration::from_millis(3), 4)
            .unwrap();
        for i in 0..20u32 {
            l.offer(i, 1250, SimTime::ZERO);
        }
        let got: Vec<u32> = l
            .advance(SimTime::from_secs_f64(1.0))
            .into_iter()
            .map(|d| d.packet)
            .collect();
        // Departures at 1, 2, 3 ms ...; packets 2..=5 depart at 3..=6 ms.
        let want: Vec<u32> = (0..20).filter(|i| !(2..=5).contains(i)).collect();
        assert_eq!(got, want);
        assert_eq!(l.stats().lost_injected, 4);
    }

    #[test]
    fn conservation() {
        let ge = GilbertElliott {
            p_good_to_bad: 0.01,
            p_bad_to_good: 0.2,
            bad_loss: 0.7,
        };
        let mut l = Link::new(ten_mbps(8_000).with_random_loss(0.02).with_burst(ge), 9);
        let mut delivered = 0;
        let mut t = SimTime::ZERO;
        for i in 0..5000u32 {
            l.offer(i, 1000 + (i as usize % 7) * 50, t);
            delivered += l.advance(t).len();
            t += SimDuration::from_micros(900);
        }
        delivered += l.advance(SimTime::from_secs_f64(100.0)).len();
        let s = l.stats();
        assert_eq!(s.delivered as usize, delivered);
        assert_eq!(s.delivered + s.dropped(), s.offered);
        assert!(s.tail_dropped > 0 && s.lost_burst > 0 && s.lost_random > 0);
    }

    #[test]
    fn queue_never_exceeds_capacity_and_departures_increase() {
        let mut l = Link::new(ten_mbps(5_000), 4);
        let mut last = SimTime::ZERO;
        let mut t = SimTime::ZERO;
        for i in 0..2000usize {
            if let OfferOutcome::Enqueued { departure } = l.offer((), 200 + (i * 37) % 1300, t) {
                assert!(departure > last);
                last = departure;
            }
            assert!(l.queued_bytes() <= 5_000);
            t += SimDuration::from_micros(300 + (i as u64 * 13) % 500);
        }
    }

    #[test]
    fn profile_validation() {
        assert!(ten_mbps(1500).validate(1500).is_ok());
        assert!(ten_mbps(1499).validate(1500).is_err());
        assert!(LinkProfile::new(0, SimDuration::ZERO, 10_000)
            .validate(1500)
            .is_err());
        assert!(ten_mbps(10_000).with_random_loss(1.5).validate(1500).is_err());
    }
}
