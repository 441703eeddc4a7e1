use super::CodecConfig;

/// Where the `ω` repair equations of a generation are placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RepairPlacement {
    /// All repairs follow the last source push and span the whole generation.
    /// Any `ω` losses leave a system that is full rank with probability at
    /// least `Π_{k=1..ω}(1 − 256^-k)`.
    #[default]
    Trailing,
    /// Repair `i` follows source push `ceil(i·n/ω)` and spans only the slots
    /// pushed so far. Lower repair latency, but losses near the end of a
    /// generation are covered by few equations.
    Interleaved,
}

impl std::str::FromStr for RepairPlacement {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "trailing" => Ok(RepairPlacement::Trailing),
            "interleaved" => Ok(RepairPlacement::Interleaved),
            other => Err(format!("unknown repair placement `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmissionKind {
    /// Sent immediately after a source push; spans slots `1..=k`.
    Source,
    Repair,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScheduledEmission {
    /// 1-based index of the source push this emission follows.
    pub after_source: usize,
    pub kind: EmissionKind,
}

/// Repair equations owed by a generation holding `k` of `n` symbols:
/// `ceil(ω·k/n)`.
pub fn repair_budget(config: &CodecConfig, k: usize) -> usize {
    let n = config.generation_size as usize;
    (config.overhead as usize * k).div_ceil(n)
}

/// Repairs due right after source push `k` of a full-size generation.
pub(crate) fn repairs_after(config: &CodecConfig, k: usize) -> usize {
    let n = config.generation_size as usize;
    let omega = config.overhead as usize;
    match config.repair_placement {
        RepairPlacement::Trailing => {
            if k == n {
                omega
            } else {
                0
            }
        }
        // #{i in 1..=ω : ceil(i·n/ω) == k} = floor(ω·k/n) - floor(ω·(k-1)/n)
        RepairPlacement::Interleaved => omega * k / n - omega * (k - 1) / n,
    }
}

/// The full emission order for one full generation: `n + ω` events.
pub fn emission_schedule(config: &CodecConfig) -> Vec<ScheduledEmission> {
    let n = config.generation_size as usize;
    let mut out = Vec::with_capacity(config.emissions_per_generation());
    for k in 1..=n {
        out.push(ScheduledEmission {
            after_source: k,
            kind: EmissionKind::Source,
        });
        for _ in 0..repairs_after(config, k) {
            out.push(ScheduledEmission {
                after_source: k,
                kind: EmissionKind::Repair,
            });
        }
    }
    out
}
