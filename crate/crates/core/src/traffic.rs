//! Constant-bit-rate on-off sources on the sensors and the packet sink on the UAV.

use crate::engine::SimTime;

#[derive(Debug, Clone, PartialEq)]
pub struct FlowSpec {
    /// Equal to the station's node id.
    pub flow_id: usize,
    pub rate: f64,
    pub payload: u32,
    pub on_duration: f64,
    pub off_duration: f64,
    pub start: f64,
    pub stop: f64,
}

impl FlowSpec {
    pub fn interval(&self) -> f64 {
        f64::from(self.payload) * 8.0 / self.rate
    }

    /// Time of the `k`-th packet (0-based), or `None` once past `stop`.
    ///
    /// With no OFF phase the source is strictly periodic. Otherwise each ON
    /// phase restarts the packet grid at its own beginning.
    pub fn packet_time(&self, k: u64) -> Option<f64> {
        let gap = self.interval();
        let t = if self.off_duration <= 0.0 {
            self.start + k as f64 * gap
        } else {
            let per_on = (self.on_duration / gap).ceil().max(1.0) as u64;
            let cycle = k / per_on;
            let within = k % per_on;
            self.start + cycle as f64 * (self.on_duration + self.off_duration) + within as f64 * gap
        };
        (t < self.stop).then_some(t)
    }
}

/// Next emission after `t_prev`, skipping OFF windows; `None` past `stop`.
pub fn next_packet_time(f: &FlowSpec, t_prev: f64) -> Option<f64> {
    let gap = f.interval();
    let mut t = t_prev + gap;
    if f.off_duration > 0.0 {
        let period = f.on_duration + f.off_duration;
        let phase = (t - f.start).rem_euclid(period);
        if phase >= f.on_duration {
            t += period - phase;
        }
    }
    (t < f.stop).then_some(t)
}

/// Per-flow emission cursor used by the simulator.
#[derive(Debug, Clone)]
pub struct Source {
    pub spec: FlowSpec,
    next_index: u64,
    next_seq: u64,
}

impl Source {
    pub fn new(spec: FlowSpec) -> Self {
        Source {
            spec,
            next_index: 0,
            next_seq: 0,
        }
    }

    /// Time of the next emission, if any.
    pub fn next_time(&self) -> Option<SimTime> {
        self.spec
            .packet_time(self.next_index)
            .map(SimTime::from_secs)
    }

    /// Consumes one emission and returns its sequence number.
    pub fn emit(&mut self) -> u64 {
        self.next_index += 1;
        let s = self.next_seq;
        self.next_seq += 1;
        s
    }
}

/// A packet accepted by the sink.
#[derive(Debug, Copy, Clone, PartialEq)]
pub struct Delivery {
    pub flow_id: usize,
    pub seq: u64,
    pub bytes: u32,
    pub delay: SimTime,
    pub at: SimTime,
}

/// Packet sink at the AP. Flows deliver in order, so a sequence number at or
/// below the last one accepted is a retransmitted duplicate.
#[derive(Debug, Clone, Default)]
pub struct Sink {
    last_seq: Vec<Option<u64>>,
    pub duplicates: u64,
}

impl Sink {
    pub fn new(flows: usize) -> Self {
        Sink {
            last_seq: vec![None; flows],
            duplicates: 0,
        }
    }

    pub fn has_delivered(&self, flow_id: usize, seq: u64) -> bool {
        self.last_seq
            .get(flow_id)
            .copied()
            .flatten()
            .is_some_and(|last| seq <= last)
    }

    pub fn receive(
        &mut self,
        flow_id: usize,
        seq: u64,
        bytes: u32,
        enqueue_time: SimTime,
        t: SimTime,
    ) -> Option<Delivery> {
        if flow_id >= self.last_seq.len() {
            self.last_seq.resize(flow_id + 1, None);
        }
        if self.has_delivered(flow_id, seq) {
            self.duplicates += 1;
            return None;
        }
        self.last_seq[flow_id] = Some(seq);
        Some(Delivery {
            flow_id,
            seq,
            bytes,
            delay: t.saturating_sub(enqueue_time),
            at: t,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flow(rate: f64) -> FlowSpec {
        FlowSpec {
            flow_id: 1,
            rate,
            payload: 512,
            on_duration: 1.0,
            off_duration: 0.0,
            start: 0.0,
            stop: 30.0,
        }
    }

    #[test]
    fn half_megabit_gap() {
        let f = flow(0.5e6);
        let t = next_packet_time(&f, 1.0).unwrap();
        assert!((t - 1.0 - 0.008192).abs() < 1e-12);
    }

    #[test]
    fn six_megabit_gap() {
        let f = flow(6e6);
        let gap = next_packet_time(&f, 0.0).unwrap();
        assert!((gap - 512.0 * 8.0 / 6e6).abs() < 1e-15);
        assert!((gap - 0.6827e-3).abs() < 1e-7);
    }

    #[test]
    fn off_windows_are_silent() {
        let f = FlowSpec {
            on_duration: 0.1,
            off_duration: 0.2,
            ..flow(0.5e6)
        };
        let mut t = f.start;
        let mut count = 0;
        while let Some(n) = next_packet_time(&f, t) {
            let phase = (n - f.start).rem_euclid(0.3);
            assert!(phase < 0.1 + 1e-12, "packet at {n} inside OFF window");
            t = n;
            count += 1;
        }
        assert!(count > 0);
        let mut k = 0;
        while let Some(n) = f.packet_time(k) {
            assert!((n - f.start).rem_euclid(0.3) < 0.1 + 1e-12);
            k += 1;
        }
    }

    #[test]
    fn stops_at_stop_time() {
        let f = FlowSpec {
            stop: 0.02,
            ..flow(0.5e6)
        };
        assert!(next_packet_time(&f, 0.015).is_none());
        assert_eq!((0..).take_while(|&k| f.packet_time(k).is_some()).count(), 3);
    }

    #[test]
    fn sink_ignores_duplicates() {
        let mut sink = Sink::new(3);
        let t = SimTime::from_micros(700);
        let d = sink.receive(1, 0, 512, SimTime::ZERO, t).unwrap();
        assert_eq!(d.delay, t);
        assert!(sink.receive(1, 0, 512, SimTime::ZERO, t).is_none());
        assert_eq!(sink.duplicates, 1);
        assert!(sink.receive(1, 1, 512, SimTime::ZERO, t).is_some());
        assert!(sink.receive(2, 0, 512, SimTime::ZERO, t).is_some());
        assert!(sink.has_delivered(1, 0) && !sink.has_delivered(1, 2));
    }
}
