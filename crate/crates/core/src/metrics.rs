//! Per-flow counters, network throughput and average delay, and the CSV
//! report format.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::engine::SimTime;
use crate::error::MetricsError;

/// Counters for one station's flow to the sink.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FlowStats {
    pub flow_id: usize,
    pub tx_packets: u64,
    pub tx_bytes: u64,
    pub rx_packets: u64,
    /// Application payload bytes accepted by the sink.
    pub rx_bytes: u64,
    pub delay_sum: SimTime,
    pub time_first_tx: Option<SimTime>,
    pub time_last_rx: Option<SimTime>,
    /// Queue overflow, head-of-line expiry and retry-limit drops of packets
    /// the sink never received.
    pub packets_dropped: u64,
    /// Still queued or in flight, and not yet received, when the run stopped.
    pub residual: u64,
}

impl FlowStats {
    pub fn new(flow_id: usize) -> Self {
        FlowStats {
            flow_id,
            ..Default::default()
        }
    }

    pub fn mean_delay(&self) -> Option<f64> {
        (self.rx_packets > 0).then(|| self.delay_sum.as_secs() / self.rx_packets as f64)
    }

    /// `tx = rx + dropped + residual`.
    pub fn is_conserved(&self) -> bool {
        self.tx_packets == self.rx_packets + self.packets_dropped + self.residual
    }
}

/// Sum over flows of received payload bits divided by the run length.
#[allow(clippy::neg_cmp_op_on_partial_ord)]
pub fn throughput(stats: &[FlowStats], sim_time: f64) -> Result<f64, MetricsError> {
    if !(sim_time > 0.0) {
        return Err(MetricsError::NonPositiveTime(sim_time));
    }
    Ok(stats
        .iter()
        .map(|f| f.rx_bytes as f64 * 8.0 / sim_time)
        .sum())
}

#[derive(Debug, Copy, Clone, PartialEq, Eq)]
pub enum DelayMode {
    /// Sum over flows of each flow's mean delay.
    SumOfFlowMeans,
    /// Total delay over total received packets.
    PooledMean,
}

/// Average delay in seconds over flows that received at least one packet;
/// `None` when no flow did.
pub fn average_delay(stats: &[FlowStats], mode: DelayMode) -> Option<f64> {
    let live: Vec<&FlowStats> = stats.iter().filter(|f| f.rx_packets > 0).collect();
    if live.is_empty() {
        return None;
    }
    Some(match mode {
        DelayMode::SumOfFlowMeans => live.iter().filter_map(|f| f.mean_delay()).sum(),
        DelayMode::PooledMean => {
            let delay: f64 = live.iter().map(|f| f.delay_sum.as_secs()).sum();
            let packets: u64 = live.iter().map(|f| f.rx_packets).sum();
            delay / packets as f64
        }
    })
}

/// Flows excluded from the delay average because nothing reached the sink.
pub fn silent_flows(stats: &[FlowStats]) -> Vec<usize> {
    stats
        .iter()
        .filter(|f| f.rx_packets == 0)
        .map(|f| f.flow_id)
        .collect()
}

pub const CSV_COLUMNS: [&str; 15] = [
    "scenario_id",
    "seed",
    "n_sta",
    "access",
    "mobility",
    "uav_speed_mps",
    "traffic_rate_bps",
    "sim_time_s",
    "throughput_bps",
    "avg_delay_pooled_s",
    "avg_delay_eq2_s",
    "tx_packets",
    "rx_packets",
    "dropped_packets",
    "collision_events",
];

/// One CSV row: run metadata plus the headline metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub scenario_id: String,
    pub seed: u64,
    pub n_sta: usize,
    pub access: String,
    pub mobility: String,
    pub uav_speed_mps: f64,
    pub traffic_rate_bps: f64,
    pub sim_time_s: f64,
    pub throughput_bps: f64,
    pub avg_delay_pooled_s: Option<f64>,
    pub avg_delay_eq2_s: Option<f64>,
    pub tx_packets: u64,
    pub rx_packets: u64,
    pub dropped_packets: u64,
    pub collision_events: u64,
}

fn bits(v: f64) -> String {
    format!("{v:.3}")
}

fn secs(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

impl RunRecord {
    pub fn csv_fields(&self) -> [String; 15] {
        [
            self.scenario_id.clone(),
            self.seed.to_string(),
            self.n_sta.to_string(),
            self.access.clone(),
            self.mobility.clone(),
            format!("{:.3}", self.uav_speed_mps),
            bits(self.traffic_rate_bps),
            secs(Some(self.sim_time_s)),
            bits(self.throughput_bps),
            secs(self.avg_delay_pooled_s),
            secs(self.avg_delay_eq2_s),
            self.tx_packets.to_string(),
            self.rx_packets.to_string(),
            self.dropped_packets.to_string(),
            self.collision_events.to_string(),
        ]
    }
}

pub fn csv_header() -> String {
    CSV_COLUMNS.join(",")
}

/// Header plus one line per record, `\n` terminated.
pub fn export_csv(records: &[RunRecord]) -> String {
    let mut out = csv_header();
    out.push('\n');
    for r in records {
        out.push_str(&r.csv_fields().join(","));
        out.push('\n');
    }
    out
}

pub fn write_csv(path: &Path, records: &[RunRecord]) -> Result<(), MetricsError> {
    std::fs::write(path, export_csv(records)).map_err(|source| MetricsError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Appends rows, writing the header first if the file is new or empty.
pub fn append_csv(path: &Path, records: &[RunRecord]) -> Result<(), MetricsError> {
    use std::io::Write;
    let io = |source| MetricsError::Io {
        path: path.to_path_buf(),
        source,
    };
    let fresh = std::fs::metadata(path)
        .map(|m| m.len() == 0)
        .unwrap_or(true);
    let mut f = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(io)?;
    let mut buf = String::new();
    if fresh {
        buf.push_str(&csv_header());
        buf.push('\n');
    }
    for r in records {
        buf.push_str(&r.csv_fields().join(","));
        buf.push('\n');
    }
    f.write_all(buf.as_bytes()).map_err(io)
}

/// Mean over replications of the numeric columns of `group`. Absent delays
/// are left out of their column's mean; metadata comes from the first row.
pub fn mean_record(group: &[RunRecord]) -> MeanRecord {
    let n = group.len().max(1) as f64;
    let mean = |f: &dyn Fn(&RunRecord) -> f64| group.iter().map(f).sum::<f64>() / n;
    let mean_opt = |f: &dyn Fn(&RunRecord) -> Option<f64>| {
        let xs: Vec<f64> = group.iter().filter_map(f).collect();
        (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
    };
    let first = group.first().cloned().unwrap_or_else(|| RunRecord {
        scenario_id: String::new(),
        seed: 0,
        n_sta: 0,
        access: String::new(),
        mobility: String::new(),
        uav_speed_mps: 0.0,
        traffic_rate_bps: 0.0,
        sim_time_s: 0.0,
        throughput_bps: 0.0,
        avg_delay_pooled_s: None,
        avg_delay_eq2_s: None,
        tx_packets: 0,
        rx_packets: 0,
        dropped_packets: 0,
        collision_events: 0,
    });
    MeanRecord {
        scenario_id: first.scenario_id,
        seed: first.seed,
        n_sta: first.n_sta,
        access: first.access,
        mobility: first.mobility,
        uav_speed_mps: first.uav_speed_mps,
        traffic_rate_bps: first.traffic_rate_bps,
        sim_time_s: first.sim_time_s,
        throughput_bps: mean(&|r| r.throughput_bps),
        avg_delay_pooled_s: mean_opt(&|r| r.avg_delay_pooled_s),
        avg_delay_eq2_s: mean_opt(&|r| r.avg_delay_eq2_s),
        tx_packets: mean(&|r| r.tx_packets as f64),
        rx_packets: mean(&|r| r.rx_packets as f64),
        dropped_packets: mean(&|r| r.dropped_packets as f64),
        collision_events: mean(&|r| r.collision_events as f64),
    }
}

/// Replication-averaged row; counters become fractional.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanRecord {
    pub scenario_id: String,
    /// Base seed of the replication set.
    pub seed: u64,
    pub n_sta: usize,
    pub access: String,
    pub mobility: String,
    pub uav_speed_mps: f64,
    pub traffic_rate_bps: f64,
    pub sim_time_s: f64,
    pub throughput_bps: f64,
    pub avg_delay_pooled_s: Option<f64>,
    pub avg_delay_eq2_s: Option<f64>,
    pub tx_packets: f64,
    pub rx_packets: f64,
    pub dropped_packets: f64,
    pub collision_events: f64,
}

pub fn export_mean_csv(rows: &[MeanRecord]) -> String {
    let mut out = csv_header();
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{:.3},{},{},{},{},{},{:.3},{:.3},{:.3},{:.3}",
            r.scenario_id,
            r.seed,
            r.n_sta,
            r.access,
            r.mobility,
            r.uav_speed_mps,
            bits(r.traffic_rate_bps),
            secs(Some(r.sim_time_s)),
            bits(r.throughput_bps),
            secs(r.avg_delay_pooled_s),
            secs(r.avg_delay_eq2_s),
            r.tx_packets,
            r.rx_packets,
            r.dropped_packets,
            r.collision_events,
        );
    }
    out
}

/// A parsed CSV: header and string cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn parse(text: &str) -> Result<Table, String> {
        let mut rd = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header: Vec<String> = match rd.headers() {
            Ok(h) => h.iter().map(str::to_string).collect(),
            Err(e) => return Err(e.to_string()),
        };
        if header.iter().all(|h| h.is_empty()) {
            return Ok(Table {
                header: Vec::new(),
                rows: Vec::new(),
            });
        }
        let rows = rd
            .records()
            .map(|r| r.map(|r| r.iter().map(str::to_string).collect()))
            .collect::<Result<Vec<Vec<String>>, _>>()
            .map_err(|e| e.to_string())?;
        Ok(Table { header, rows })
    }

    pub fn column(&self, name: &str) -> Result<usize, MetricsError> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| MetricsError::UnknownColumn(name.to_string()))
    }
}

/// Groups `table` by the `series` column and returns `(x, y)` points per
/// series value, sorted by x. Rows with an empty or non-numeric x or y are
/// skipped. An empty table yields no series.
pub fn plot_tables(
    table: &Table,
    x: &str,
    series: &str,
    y: &str,
) -> Result<BTreeMap<String, Vec<(f64, f64)>>, MetricsError> {
    let mut out: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    if table.header.is_empty() {
        return Ok(out);
    }
    let (xi, si, yi) = (table.column(x)?, table.column(series)?, table.column(y)?);
    for row in &table.rows {
        let (Ok(xv), Ok(yv)) = (row[xi].parse::<f64>(), row[yi].parse::<f64>()) else {
            continue;
        };
        out.entry(row[si].clone()).or_default().push((xv, yv));
    }
    for pts in out.values_mut() {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    Ok(out)
}

/// `<x> <y>` lines.
pub fn render_plot_table(points: &[(f64, f64)]) -> String {
    let mut s = String::new();
    for (x, y) in points {
        let _ = writeln!(s, "{x} {y}");
    }
    s
}
