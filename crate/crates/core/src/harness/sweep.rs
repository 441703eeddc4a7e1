//! Goodput against random downlink loss, one class at a time.

use super::output::ScatterRow;
use super::scenario::Scenario;
use super::sim::run;
use super::HarnessError;

/// For each loss value, runs the scenario `runs_per_loss` times per class:
/// once with only its plain flows and once with only its tunneled flows (a
/// class with no flows configured gets one). Run `i` overall uses seed
/// `seed + i`; both classes of a run share the seed.
pub fn sweep_loss(
    scenario: &Scenario,
    losses: &[f64],
    runs_per_loss: usize,
) -> Result<Vec<ScatterRow>, HarnessError> {
    if losses.is_empty() {
        return Err(HarnessError::Config("loss list is empty".into()));
    }
    if runs_per_loss == 0 {
        return Err(HarnessError::Config("runs per loss must be at least 1".into()));
    }
    if let Some(bad) = losses.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(HarnessError::Config(format!("loss {bad} is not a probability")));
    }
    let base = scenario.seed()?;
    let mut rows = Vec::with_capacity(losses.len() * runs_per_loss);
    for (li, &loss) in losses.iter().enumerate() {
        for r in 0..runs_per_loss {
            let seed = base.wrapping_add((li * runs_per_loss + r) as u64);
            let mut plain = scenario.clone();
            plain.seed = Some(seed);
            plain.downlink.random_loss = loss;
            let mut coded = plain.clone();
            plain.flows.plain = scenario.flows.plain.max(1);
            plain.flows.tunneled = 0;
            coded.flows.plain = 0;
            coded.flows.tunneled = scenario.flows.tunneled.max(1);
            let tcp = run(&plain)?.summary.plain.goodput_mbps;
            let nc = run(&coded)?.summary.tunneled.goodput_mbps;
            rows.push(ScatterRow {
                loss_pct: loss * 100.0,
                tcp_goodput_mbps: tcp,
                nc_goodput_mbps: nc,
            });
        }
    }
    Ok(rows)
}
