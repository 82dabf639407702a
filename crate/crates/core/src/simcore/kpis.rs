use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::SimConfig;

/// Fate of one emitted packet. `recv_time` is `None` for dropped packets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PacketRecord {
    pub send_time: f64,
    pub recv_time: Option<f64>,
}

/// Per-flow measurements of a single run.
///
/// `delay_ms` needs one received packet and `jitter_ms` two; otherwise they
/// are `None` (serialized as `null`), never zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowKpis {
    pub delay_ms: Option<f64>,
    pub jitter_ms: Option<f64>,
    pub throughput_kbps: f64,
    pub drops: u64,
    #[serde(rename = "tx")]
    pub tx_packets: u64,
    #[serde(rename = "rx")]
    pub rx_packets: u64,
}

/// Element-wise mean of several runs' [`FlowKpis`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanKpis {
    pub delay_ms: Option<f64>,
    pub jitter_ms: Option<f64>,
    pub throughput_kbps: f64,
    pub drops: f64,
    pub tx_packets: f64,
    pub rx_packets: f64,
}

impl From<&FlowKpis> for MeanKpis {
    fn from(k: &FlowKpis) -> Self {
        Self {
            delay_ms: k.delay_ms,
            jitter_ms: k.jitter_ms,
            throughput_kbps: k.throughput_kbps,
            drops: k.drops as f64,
            tx_packets: k.tx_packets as f64,
            rx_packets: k.rx_packets as f64,
        }
    }
}

impl MeanKpis {
    /// Averages runs for one flow; undefined entries are left out of the mean.
    pub fn average(runs: &[&FlowKpis]) -> Self {
        assert!(!runs.is_empty(), "average of zero runs");
        let n = runs.len() as f64;
        let mean_defined = |f: fn(&FlowKpis) -> Option<f64>| {
            let vals: Vec<f64> = runs.iter().filter_map(|k| f(k)).collect();
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        };
        Self {
            delay_ms: mean_defined(|k| k.delay_ms),
            jitter_ms: mean_defined(|k| k.jitter_ms),
            throughput_kbps: runs.iter().map(|k| k.throughput_kbps).sum::<f64>() / n,
            drops: runs.iter().map(|k| k.drops as f64).sum::<f64>() / n,
            tx_packets: runs.iter().map(|k| k.tx_packets as f64).sum::<f64>() / n,
            rx_packets: runs.iter().map(|k| k.rx_packets as f64).sum::<f64>() / n,
        }
    }
}

/// The four predicted per-flow indicators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kpi {
    Delay,
    Jitter,
    Throughput,
    Drops,
}

impl Kpi {
    pub const ALL: [Kpi; 4] = [Kpi::Delay, Kpi::Jitter, Kpi::Throughput, Kpi::Drops];

    pub fn name(self) -> &'static str {
        match self {
            Kpi::Delay => "delay",
            Kpi::Jitter => "jitter",
            Kpi::Throughput => "throughput",
            Kpi::Drops => "drops",
        }
    }

    pub fn of(self, k: &FlowKpis) -> Option<f64> {
        match self {
            Kpi::Delay => k.delay_ms,
            Kpi::Jitter => k.jitter_ms,
            Kpi::Throughput => Some(k.throughput_kbps),
            Kpi::Drops => Some(k.drops as f64),
        }
    }

    pub fn of_mean(self, k: &MeanKpis) -> Option<f64> {
        match self {
            Kpi::Delay => k.delay_ms,
            Kpi::Jitter => k.jitter_ms,
            Kpi::Throughput => Some(k.throughput_kbps),
            Kpi::Drops => Some(k.drops),
        }
    }
}

impl fmt::Display for Kpi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kpi {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "delay" => Ok(Kpi::Delay),
            "jitter" => Ok(Kpi::Jitter),
            "throughput" => Ok(Kpi::Throughput),
            "drops" => Ok(Kpi::Drops),
            other => Err(format!("unknown KPI '{other}' (expected delay, jitter, throughput or drops)")),
        }
    }
}

/// Inverse CDF of the exponential distribution with the given mean.
pub fn exp_inverse_cdf(u: f64, mean: f64) -> f64 {
    -mean * (-u).ln_1p()
}

/// Reduces per-packet records of one flow to its KPIs.
///
/// Delay is the mean over received packets; jitter is the mean absolute
/// difference between the delays of consecutively delivered packets.
pub fn kpis_from_records(records: &[PacketRecord], config: &SimConfig) -> FlowKpis {
    let tx_packets = records.len() as u64;
    let mut delivered: Vec<(f64, f64)> = records
        .iter()
        .filter_map(|r| r.recv_time.map(|recv| (recv, recv - r.send_time)))
        .collect();
    // Stable sort: packets delivered at the same instant keep send order.
    delivered.sort_by(|a, b| a.0.total_cmp(&b.0));
    let rx_packets = delivered.len() as u64;
    let delay_ms = (rx_packets >= 1)
        .then(|| delivered.iter().map(|&(_, d)| d).sum::<f64>() / rx_packets as f64 * 1000.0);
    let jitter_ms = (rx_packets >= 2).then(|| {
        let total: f64 = delivered.windows(2).map(|w| (w[1].1 - w[0].1).abs()).sum();
        total / (rx_packets - 1) as f64 * 1000.0
    });
    FlowKpis {
        delay_ms,
        jitter_ms,
        throughput_kbps: rx_packets as f64 * config.packet_bits() / config.duration_s / 1000.0,
        drops: tx_packets - rx_packets,
        tx_packets,
        rx_packets,
    }
}
