//! Scenario files: `key = value` lines grouped under `[section]` headers.
//! `#` starts a comment. Unknown sections and keys are errors.
//!
//! ```text
//! [scenario]
//! name = niue
//! duration_s = 120
//! seed = 7
//!
//! [downlink]
//! bandwidth_mbps = 8
//! propagation_delay_ms = 275
//! queue_bdp = 1.0
//! random_loss = 0.01
//!
//! [uplink]
//! bandwidth_mbps = 2
//! propagation_delay_ms = 275
//!
//! [flows]
//! plain = 1
//! tunneled = 1
//!
//! [codec]
//! n = 30
//! omega = 6
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use super::HarnessError;
use crate::codec::{CodecConfig, RepairPlacement};
use crate::link::{GilbertElliott, LinkProfile, UTILIZATION_BUCKET};
use crate::tcp::{self, TCP_IP_HEADER};
use crate::time::SimDuration;
use crate::tunnel::{codec_config_for_path, DEFAULT_DECODE_WINDOW};

pub const GEO_ONE_WAY: SimDuration = SimDuration::from_millis(270);
pub const MEO_ONE_WAY: SimDuration = SimDuration::from_millis(65);

/// How tunneled flows return their ACKs to the sender.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AckPath {
    /// Uncoded 40-byte ACKs on the uplink.
    #[default]
    Plain,
    /// ACKs ride the island-to-world tunnel direction.
    Tunnel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowMix {
    pub plain: usize,
    pub tunneled: usize,
    /// Segment payload of plain flows. Tunneled flows use `inner_mtu - 40`.
    pub mss: usize,
    /// Flow `i` starts at a uniform time in `[0, start_jitter)`.
    pub start_jitter: SimDuration,
    pub ack_path: AckPath,
    /// Bytes per connection. A flow whose transfer completes immediately
    /// opens a fresh connection; `None` means one unbounded transfer.
    pub transfer_bytes: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TunnelSettings {
    pub generation_size: u16,
    pub overhead: u16,
    pub outer_mtu: usize,
    pub flush_timeout: SimDuration,
    pub decode_window: usize,
    pub repair_placement: RepairPlacement,
}

impl TunnelSettings {
    pub fn codec_config(&self) -> Result<CodecConfig, HarnessError> {
        Ok(
            codec_config_for_path(self.generation_size, self.overhead, self.outer_mtu)
                .map_err(|e| HarnessError::Config(e.to_string()))?
                .with_flush_timeout(self.flush_timeout)
                .with_repair_placement(self.repair_placement),
        )
    }
}

impl Default for TunnelSettings {
    fn default() -> Self {
        TunnelSettings {
            generation_size: 30,
            overhead: 6,
            outer_mtu: 1500,
            flush_timeout: SimDuration::from_millis(100),
            decode_window: DEFAULT_DECODE_WINDOW,
            repair_placement: RepairPlacement::Trailing,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub duration: SimDuration,
    pub seed: Option<u64>,
    pub sample_interval: SimDuration,
    pub downlink: LinkProfile,
    pub uplink: LinkProfile,
    pub flows: FlowMix,
    pub codec: TunnelSettings,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        let mut doc = Document::parse(text)?;
        let s = doc.scenario()?;
        doc.finish()?;
        s.validate()?;
        Ok(s)
    }

    /// Round-trip time from propagation alone.
    pub fn base_rtt(&self) -> SimDuration {
        self.downlink.propagation_delay + self.uplink.propagation_delay
    }

    pub fn seed(&self) -> Result<u64, HarnessError> {
        self.seed
            .ok_or_else(|| HarnessError::Config("no seed given in scenario or on the command line".into()))
    }

    /// Packet size of plain data segments on the wire.
    pub fn plain_packet_len(&self) -> usize {
        self.flows.mss + TCP_IP_HEADER
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.duration == SimDuration::ZERO {
            return bad("duration must be positive".into());
        }
        if self.flows.plain + self.flows.tunneled == 0 {
            return bad("at least one flow is required".into());
        }
        let si = self.sample_interval.as_nanos();
        if si == 0 || si % UTILIZATION_BUCKET.as_nanos() != 0 {
            return bad(format!("sample interval must be a positive multiple of {UTILIZATION_BUCKET}"));
        }
        if self.sample_interval > self.duration {
            return bad("sample interval exceeds duration".into());
        }
        if self.flows.mss == 0 {
            return bad("mss must be positive".into());
        }
        let codec = self.codec.codec_config()?;
        if codec.max_packet_len() <= TCP_IP_HEADER {
            return bad("inner MTU leaves no room for TCP payload".into());
        }
        if self.codec.decode_window == 0 {
            return bad("decode_window must be at least 1".into());
        }
        let largest = self.plain_packet_len().max(self.codec.outer_mtu);
        for (name, p) in [("downlink", &self.downlink), ("uplink", &self.uplink)] {
            p.validate(largest)
                .map_err(|e| HarnessError::Config(format!("{name}: {e}")))?;
        }
        Ok(())
    }
}

struct Document {
    sections: BTreeMap<String, BTreeMap<String, (usize, String)>>,
}

const KNOWN: &[(&str, &[&str])] = &[
    ("scenario", &["name", "duration_s", "seed", "sample_interval_s"]),
    (
        "downlink",
        &[
            "bandwidth_mbps",
            "propagation_delay_ms",
            "orbit",
            "queue_bytes",
            "queue_bdp",
            "random_loss",
            "ge_p_good_to_bad",
            "ge_p_bad_to_good",
            "ge_bad_loss",
        ],
    ),
    (
        "uplink",
        &[
            "bandwidth_mbps",
            "propagation_delay_ms",
            "orbit",
            "queue_bytes",
            "queue_bdp",
            "random_loss",
            "ge_p_good_to_bad",
            "ge_p_bad_to_good",
            "ge_bad_loss",
        ],
    ),
    (
        "flows",
        &["plain", "tunneled", "mss", "start_jitter_s", "ack_path", "transfer_kb"],
    ),
    (
        "codec",
        &[
            "n",
            "omega",
            "outer_mtu",
            "flush_timeout_ms",
            "decode_window",
            "repair_placement",
            "adaptive_overhead",
        ],
    ),
];

impl Document {
    fn parse(text: &str) -> Result<Self, HarnessError> {
        let mut sections: BTreeMap<String, BTreeMap<String, (usize, String)>> = BTreeMap::new();
        let mut current: Option<String> = None;
        for (i, raw) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |m: &str| HarnessError::Config(format!("line {lineno}: {m}"));
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| err("unterminated section header"))?
                    .trim();
                if !KNOWN.iter().any(|(s, _)| *s == name) {
                    return Err(err(&format!("unknown section [{name}]")));
                }
                if sections.contains_key(name) {
                    return Err(err(&format!("duplicate section [{name}]")));
                }
                sections.insert(name.to_string(), BTreeMap::new());
                current = Some(name.to_string());
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| err("expected `key = value`"))?;
            let (k, v) = (k.trim(), v.trim());
            let section = current
                .as_deref()
                .ok_or_else(|| err("key outside of any section"))?;
            let allowed = KNOWN
                .iter()
                .find(|(s, _)| *s == section)
                .map(|(_, keys)| *keys)
                .unwrap_or(&[]);
            if !allowed.contains(&k) {
                return Err(err(&format!("unknown key `{k}` in [{section}]")));
            }
            let map = sections.get_mut(section).expect("section inserted above");
            if map.insert(k.to_string(), (lineno, v.to_string())).is_some() {
                return Err(err(&format!("duplicate key `{k}`")));
            }
        }
        Ok(Document { sections })
    }

    fn take(&mut self, section: &str, key: &str) -> Option<(usize, String)> {
        self.sections.get_mut(section)?.remove(key)
    }

    fn get<T: std::str::FromStr>(&mut self, section: &str, key: &str) -> Result<Option<T>, HarnessError>
    where
        T::Err: std::fmt::Display,
    {
        match self.take(section, key) {
            None => Ok(None),
            Some((line, v)) => v.parse().map(Some).map_err(|e| {
                HarnessError::Config(format!("line {line}: invalid value `{v}` for {key}: {e}"))
            }),
        }
    }

    fn require<T: std::str::FromStr>(&mut self, section: &str, key: &str) -> Result<T, HarnessError>
    where
        T::Err: std::fmt::Display,
    {
        self.get(section, key)?
            .ok_or_else(|| HarnessError::Config(format!("missing `{key}` in [{section}]")))
    }

    fn seconds(&mut self, section: &str, key: &str) -> Result<Option<SimDuration>, HarnessError> {
        match self.get::<f64>(section, key)? {
            Some(s) if !(s.is_finite() && s >= 0.0) => Err(HarnessError::Config(format!(
                "{key} must be a non-negative number of seconds"
            ))),
            other => Ok(other.map(SimDuration::from_secs_f64)),
        }
    }

    fn link(&mut self, section: &str) -> Result<(LinkProfile, Option<f64>), HarnessError> {
        if !self.sections.contains_key(section) {
            return Err(HarnessError::Config(format!("missing section [{section}]")));
        }
        let mbps: f64 = self.require(section, "bandwidth_mbps")?;
        if !(mbps.is_finite() && mbps > 0.0) {
            return Err(HarnessError::Config(format!("[{section}] bandwidth must be positive")));
        }
        let orbit = self.get::<String>(section, "orbit")?;
        let delay = match (self.get::<f64>(section, "propagation_delay_ms")?, orbit.as_deref()) {
            (Some(ms), _) if ms.is_finite() && ms >= 0.0 => SimDuration::from_secs_f64(ms / 1e3),
            (Some(_), _) => {
                return Err(HarnessError::Config(format!("[{section}] propagation delay must be non-negative")))
            }
            (None, Some("geo")) => GEO_ONE_WAY,
            (None, Some("meo")) => MEO_ONE_WAY,
            (None, Some(o)) => return Err(HarnessError::Config(format!("[{section}] unknown orbit `{o}`"))),
            (None, None) => {
                return Err(HarnessError::Config(format!(
                    "[{section}] needs propagation_delay_ms or orbit"
                )))
            }
        };
        let queue_bytes = self.get::<usize>(section, "queue_bytes")?;
        let queue_bdp = self.get::<f64>(section, "queue_bdp")?;
        if queue_bytes.is_some() && queue_bdp.is_some() {
            return Err(HarnessError::Config(format!(
                "[{section}] queue_bytes and queue_bdp are mutually exclusive"
            )));
        }
        let mut p = LinkProfile::new((mbps * 1e6).round() as u64, delay, queue_bytes.unwrap_or(0))
            .with_random_loss(self.get(section, "random_loss")?.unwrap_or(0.0));
        let ge = (
            self.get::<f64>(section, "ge_p_good_to_bad")?,
            self.get::<f64>(section, "ge_p_bad_to_good")?,
            self.get::<f64>(section, "ge_bad_loss")?,
        );
        match ge {
            (None, None, None) => {}
            (Some(g), Some(b), Some(l)) => {
                p = p.with_burst(GilbertElliott {
                    p_good_to_bad: g,
                    p_bad_to_good: b,
                    bad_loss: l,
                })
            }
            _ => {
                return Err(HarnessError::Config(format!(
                    "[{section}] Gilbert-Elliott needs all of ge_p_good_to_bad, ge_p_bad_to_good, ge_bad_loss"
                )))
            }
        }
        // Sized by the caller once both directions are known.
        let bdp_factor = match queue_bytes {
            Some(_) => None,
            None => Some(queue_bdp.unwrap_or(1.0)),
        };
        Ok((p, bdp_factor))
    }

    fn scenario(&mut self) -> Result<Scenario, HarnessError> {
        if !self.sections.contains_key("scenario") {
            return Err(HarnessError::Config("missing section [scenario]".into()));
        }
        let name: String = self.require("scenario", "name")?;
        let duration = self
            .seconds("scenario", "duration_s")?
            .ok_or_else(|| HarnessError::Config("missing `duration_s` in [scenario]".into()))?;
        let seed = self.get::<u64>("scenario", "seed")?;
        let sample_interval = self
            .seconds("scenario", "sample_interval_s")?
            .unwrap_or(SimDuration::from_secs(1));

        let (mut downlink, down_bdp) = self.link("downlink")?;
        let (mut uplink, up_bdp) = self.link("uplink")?;
        let rtt = downlink.propagation_delay + uplink.propagation_delay;
        if let Some(f) = down_bdp {
            downlink.queue_capacity = (tcp::bdp(&downlink, rtt) as f64 * f).round() as usize;
        }
        if let Some(f) = up_bdp {
            uplink.queue_capacity = (tcp::bdp(&uplink, rtt) as f64 * f).round() as usize;
        }

        let ack_path = match self.get::<String>("flows", "ack_path")?.as_deref() {
            None | Some("plain") => AckPath::Plain,
            Some("tunnel") => AckPath::Tunnel,
            Some(o) => return Err(HarnessError::Config(format!("unknown ack_path `{o}`"))),
        };
        let flows = FlowMix {
            plain: self.get("flows", "plain")?.unwrap_or(0),
            tunneled: self.get("flows", "tunneled")?.unwrap_or(0),
            mss: self.get("flows", "mss")?.unwrap_or(tcp::DEFAULT_MSS),
            start_jitter: self
                .seconds("flows", "start_jitter_s")?
                .unwrap_or(SimDuration::ZERO),
            ack_path,
            transfer_bytes: match self.get::<usize>("flows", "transfer_kb")? {
                None | Some(0) => None,
                Some(kb) => Some(kb * 1000),
            },
        };

        if self.get::<bool>("codec", "adaptive_overhead")? == Some(true) {
            return Err(HarnessError::Config("adaptive_overhead: not implemented".into()));
        }
        let d = TunnelSettings::default();
        let codec = TunnelSettings {
            generation_size: self.get("codec", "n")?.unwrap_or(d.generation_size),
            overhead: self.get("codec", "omega")?.unwrap_or(d.overhead),
            outer_mtu: self.get("codec", "outer_mtu")?.unwrap_or(d.outer_mtu),
            flush_timeout: self
                .get::<f64>("codec", "flush_timeout_ms")?
                .map(|ms| SimDuration::from_secs_f64(ms / 1e3))
                .unwrap_or(d.flush_timeout),
            decode_window: self.get("codec", "decode_window")?.unwrap_or(d.decode_window),
            repair_placement: self
                .get::<RepairPlacement>("codec", "repair_placement")?
                .unwrap_or_default(),
        };

        Ok(Scenario {
            name,
            duration,
            seed,
            sample_interval,
            downlink,
            uplink,
            flows,
            codec,
        })
    }

    fn finish(self) -> Result<(), HarnessError> {
        // Every key is consumed by `scenario`; leftovers mean a parser bug.
        for (section, keys) in self.sections {
            if let Some((k, (line, _))) = keys.into_iter().next() {
                return Err(HarnessError::Config(format!("line {line}: unused key `{k}` in [{section}]")));
            }
        }
        Ok(())
    }
}
