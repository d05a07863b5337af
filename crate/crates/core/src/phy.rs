//! Range-limited broadcast channel at 12 Mbit/s OFDM: frame airtime, carrier
//! sense and per-receiver collision resolution.

use std::collections::VecDeque;

use crate::engine::SimTime;
use crate::geom::Vec3;

pub type NodeId = usize;

/// The UAV access point is always node 0; sensors are 1..=n.
pub const AP: NodeId = 0;

pub const PLCP_PREAMBLE_HEADER: SimTime = SimTime::from_micros(20);
pub const SYMBOL: SimTime = SimTime::from_micros(4);
/// Data bits per OFDM symbol at 12 Mbit/s.
pub const BITS_PER_SYMBOL: u64 = 48;
const SERVICE_BITS: u64 = 16;
const TAIL_BITS: u64 = 6;

/// 24 MAC header + 4 FCS + 8 LLC/SNAP + 20 IPv4 + 8 UDP.
pub const DATA_OVERHEAD_BYTES: u32 = 64;
pub const ACK_BYTES: u32 = 14;
pub const CTS_BYTES: u32 = 14;
pub const RTS_BYTES: u32 = 20;
pub const BEACON_BYTES: u32 = 80;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Airtime of an MPDU: preamble and PLCP header, then whole symbols covering
/// SERVICE + payload + tail bits.
pub fn frame_airtime(mpdu_bytes: u32) -> SimTime {
    let bits = SERVICE_BITS + 8 * u64::from(mpdu_bytes) + TAIL_BITS;
    let symbols = bits.div_ceil(BITS_PER_SYMBOL);
    PLCP_PREAMBLE_HEADER + SYMBOL * symbols
}

pub fn frame_airtime_secs(mpdu_bytes: u32) -> f64 {
    frame_airtime(mpdu_bytes).as_secs()
}

/// Closed-ball range test.
pub fn in_range(a: Vec3, b: Vec3, max_range: f64) -> bool {
    a.distance(b) <= max_range
}

pub fn propagation_delay(a: Vec3, b: Vec3) -> SimTime {
    SimTime::from_nanos((a.distance(b) / SPEED_OF_LIGHT * 1e9).round() as u64)
}

#[derive(Debug, Copy, Clone, PartialEq, Eq, Hash)]
pub enum FrameKind {
    Beacon,
    Rts,
    Cts,
    Data,
    Ack,
}

impl FrameKind {
    pub fn label(self) -> &'static str {
        match self {
            FrameKind::Beacon => "BEACON",
            FrameKind::Rts => "RTS",
            FrameKind::Cts => "CTS",
            FrameKind::Data => "DATA",
            FrameKind::Ack => "ACK",
        }
    }
}

#[derive(Debug, Copy, Clone, PartialEq, Eq)]
pub enum Dest {
    Node(NodeId),
    Broadcast,
}

impl Dest {
    pub fn is(self, node: NodeId) -> bool {
        self == Dest::Node(node)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub kind: FrameKind,
    pub src: NodeId,
    pub dst: Dest,
    pub mpdu_bytes: u32,
    /// NAV reservation carried by the frame.
    pub duration: SimTime,
    /// Originating flow and per-flow sequence number (DATA, and the RTS that
    /// precedes it).
    pub flow_id: Option<usize>,
    pub seq: u64,
    pub enqueue_time: SimTime,
}

impl Frame {
    pub fn control(kind: FrameKind, src: NodeId, dst: Dest, duration: SimTime) -> Self {
        let mpdu_bytes = match kind {
            FrameKind::Rts => RTS_BYTES,
            FrameKind::Cts => CTS_BYTES,
            FrameKind::Ack => ACK_BYTES,
            FrameKind::Beacon => BEACON_BYTES,
            FrameKind::Data => panic!("DATA is not a control frame"),
        };
        Frame {
            kind,
            src,
            dst,
            mpdu_bytes,
            duration,
            flow_id: None,
            seq: 0,
            enqueue_time: SimTime::ZERO,
        }
    }
}

/// A frame on the air. `listeners` are the nodes within range of the
/// transmitter when it started, with their one-way propagation delay.
#[derive(Debug, Clone)]
pub struct Transmission {
    pub id: u64,
    pub frame: Frame,
    pub tx_pos: Vec3,
    pub start: SimTime,
    pub end: SimTime,
    pub listeners: Vec<(NodeId, SimTime)>,
}

impl Transmission {
    pub fn delay_to(&self, node: NodeId) -> Option<SimTime> {
        self.listeners
            .iter()
            .find_map(|&(n, d)| (n == node).then_some(d))
    }
}

#[derive(Debug, Copy, Clone, PartialEq, Eq, Hash)]
pub enum RxOutcome {
    Delivered,
    CollisionLoss,
    OutOfRange,
}

pub trait PositionOracle {
    fn position(&self, node: NodeId, t: SimTime) -> Vec3;
}

/// Shared medium: the log of recent transmissions plus the range model.
#[derive(Debug)]
pub struct Channel {
    max_range: f64,
    log: VecDeque<Transmission>,
    next_id: u64,
    max_airtime: SimTime,
}

impl Channel {
    pub fn new(max_range: f64) -> Self {
        Channel {
            max_range,
            log: VecDeque::new(),
            next_id: 0,
            max_airtime: SimTime::ZERO,
        }
    }

    pub fn max_range(&self) -> f64 {
        self.max_range
    }

    /// Puts `frame` on the air at `start`. Listeners are the `candidates`
    /// within range of the transmitter at that instant.
    pub fn begin<P: PositionOracle>(
        &mut self,
        frame: Frame,
        start: SimTime,
        positions: &P,
        candidates: impl IntoIterator<Item = NodeId>,
    ) -> &Transmission {
        let airtime = frame_airtime(frame.mpdu_bytes);
        if airtime > self.max_airtime {
            self.max_airtime = airtime;
        }
        self.prune(start);
        let src = frame.src;
        let tx_pos = positions.position(src, start);
        let listeners = candidates
            .into_iter()
            .filter(|&n| n != src)
            .filter_map(|n| {
                let p = positions.position(n, start);
                in_range(tx_pos, p, self.max_range).then(|| (n, propagation_delay(tx_pos, p)))
            })
            .collect();
        let id = self.next_id;
        self.next_id += 1;
        self.log.push_back(Transmission {
            id,
            frame,
            tx_pos,
            start,
            end: start + airtime,
            listeners,
        });
        self.log.back().expect("just pushed")
    }

    // Anything that ended before the longest possible frame could have
    // started can no longer overlap a reception still being resolved.
    fn prune(&mut self, now: SimTime) {
        let horizon = now.saturating_sub(self.max_airtime + SimTime::from_micros(10));
        while self.log.front().is_some_and(|t| t.end < horizon) {
            self.log.pop_front();
        }
    }

    pub fn get(&self, id: u64) -> Option<&Transmission> {
        let first = self.log.front()?.id;
        let idx = id.checked_sub(first)? as usize;
        self.log.get(idx).filter(|t| t.id == id)
    }

    pub fn transmissions(&self) -> impl Iterator<Item = &Transmission> {
        self.log.iter()
    }

    /// Physical carrier sense: some in-range signal is arriving at `listener`
    /// at `t` (open interval, so a signal arriving exactly at `t` is not yet
    /// sensed).
    pub fn channel_busy(&self, listener: NodeId, t: SimTime) -> bool {
        self.log.iter().any(|tx| {
            tx.frame.src != listener
                && tx
                    .delay_to(listener)
                    .is_some_and(|d| tx.start + d < t && t < tx.end + d)
        })
    }

    /// Outcome of `tx` at `receiver`: out of range at frame start or end,
    /// lost to any overlapping in-range signal (or to the receiver's own
    /// transmission), otherwise delivered. There is no capture.
    pub fn resolve_reception<P: PositionOracle>(
        &self,
        receiver: NodeId,
        tx: &Transmission,
        positions: &P,
    ) -> RxOutcome {
        let Some(d) = tx.delay_to(receiver) else {
            return RxOutcome::OutOfRange;
        };
        let src_end = positions.position(tx.frame.src, tx.end);
        let rcv_end = positions.position(receiver, tx.end);
        if !in_range(src_end, rcv_end, self.max_range) {
            return RxOutcome::OutOfRange;
        }
        let (a0, a1) = (tx.start + d, tx.end + d);
        let collided = self.log.iter().any(|u| {
            if u.id == tx.id {
                return false;
            }
            if u.frame.src == receiver {
                return u.start < a1 && a0 < u.end;
            }
            match u.delay_to(receiver) {
                Some(du) => u.start + du < a1 && a0 < u.end + du,
                None => false,
            }
        });
        if collided {
            RxOutcome::CollisionLoss
        } else {
            RxOutcome::Delivered
        }
    }
}
