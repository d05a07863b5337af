//! IEEE 802.11a DCF building blocks: timing constants, the per-station
//! contention state, binary exponential backoff, NAV and the MAC queue.
//!
//! Event plumbing lives in [`crate::sim`]; everything here is a pure state
//! transition so it can be exercised without a running simulation.

use std::collections::VecDeque;

use rand::Rng;

use crate::engine::{RngStream, SimTime};
use crate::phy::{frame_airtime, ACK_BYTES, CTS_BYTES, RTS_BYTES};

pub const SLOT: SimTime = SimTime::from_micros(9);
pub const SIFS: SimTime = SimTime::from_micros(16);
pub const DIFS: SimTime = SimTime::from_micros(34);
pub const CW_MIN: u32 = 15;
pub const CW_MAX: u32 = 1023;
pub const RETRY_LIMIT: u32 = 7;

/// SIFS + ACK airtime + DIFS.
pub fn eifs() -> SimTime {
    SIFS + frame_airtime(ACK_BYTES) + DIFS
}

pub fn ack_timeout() -> SimTime {
    SIFS + SLOT + frame_airtime(ACK_BYTES)
}

pub fn cts_timeout() -> SimTime {
    SIFS + SLOT + frame_airtime(CTS_BYTES)
}

#[derive(Debug, Copy, Clone, PartialEq, Eq, Hash)]
pub enum AccessMechanism {
    Basic,
    RtsCts,
}

impl AccessMechanism {
    pub fn tag(self) -> &'static str {
        match self {
            AccessMechanism::Basic => "basic",
            AccessMechanism::RtsCts => "rtscts",
        }
    }
}

/// Four-way handshake iff the MPDU is strictly larger than the threshold.
pub fn select_access_mechanism(mpdu_bytes: u32, rts_threshold: u32) -> AccessMechanism {
    if mpdu_bytes > rts_threshold {
        AccessMechanism::RtsCts
    } else {
        AccessMechanism::Basic
    }
}

/// Uniform integer in `[0, cw]`.
pub fn draw_backoff(cw: u32, rng: &mut RngStream) -> u32 {
    rng.random_range(0..=cw)
}

/// NAV carried by an RTS: the rest of the exchange after the RTS itself.
pub fn rts_duration(data_mpdu: u32) -> SimTime {
    SIFS * 3 + frame_airtime(CTS_BYTES) + frame_airtime(data_mpdu) + frame_airtime(ACK_BYTES)
}

/// NAV carried by a CTS answering an RTS with `rts_nav`.
pub fn cts_duration(rts_nav: SimTime) -> SimTime {
    rts_nav.saturating_sub(SIFS + frame_airtime(CTS_BYTES))
}

pub fn data_duration() -> SimTime {
    SIFS + frame_airtime(ACK_BYTES)
}

/// Airtime an RTS occupies, exposed for reporting.
pub fn rts_airtime() -> SimTime {
    frame_airtime(RTS_BYTES)
}

#[derive(Debug, Copy, Clone, PartialEq, Eq)]
pub struct QueuedPacket {
    pub flow: usize,
    pub seq: u64,
    pub enqueue_time: SimTime,
}

/// Drop-tail FIFO with a head-of-line residence limit.
#[derive(Debug, Clone)]
pub struct MacQueue {
    items: VecDeque<QueuedPacket>,
    capacity: usize,
    max_delay: SimTime,
}

impl MacQueue {
    pub fn new(capacity: usize, max_delay: SimTime) -> Self {
        MacQueue {
            items: VecDeque::new(),
            capacity,
            max_delay,
        }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn max_delay(&self) -> SimTime {
        self.max_delay
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> impl Iterator<Item = &QueuedPacket> {
        self.items.iter()
    }

    /// Rejects the packet when full.
    pub fn enqueue(&mut self, p: QueuedPacket) -> Result<(), QueuedPacket> {
        if self.items.len() >= self.capacity {
            return Err(p);
        }
        self.items.push_back(p);
        Ok(())
    }

    /// Removes head-of-line packets older than the residence limit.
    pub fn purge_expired(&mut self, now: SimTime) -> Vec<QueuedPacket> {
        let mut dropped = Vec::new();
        while let Some(head) = self.items.front() {
            if now.saturating_sub(head.enqueue_time) > self.max_delay {
                dropped.push(self.items.pop_front().expect("non-empty"));
            } else {
                break;
            }
        }
        dropped
    }

    pub fn pop(&mut self) -> Option<QueuedPacket> {
        self.items.pop_front()
    }
}

/// Where a station is in its current exchange.
#[derive(Debug, Copy, Clone, PartialEq, Eq)]
pub enum Phase {
    Idle,
    TxRts,
    WaitCts,
    SifsBeforeData,
    TxData,
    WaitAck,
}

#[derive(Debug, Clone)]
pub struct DcfState {
    pub cw: u32,
    pub backoff: u32,
    pub retries: u32,
    pub nav_until: SimTime,
    pub queue: MacQueue,
    pub active: bool,
    pub phase: Phase,
    /// Head frame being (re)transmitted.
    pub current: Option<QueuedPacket>,
    /// Use EIFS instead of DIFS until the next clean reception.
    pub eifs_pending: bool,
}

impl DcfState {
    pub fn new(queue: MacQueue) -> Self {
        DcfState {
            cw: CW_MIN,
            backoff: 0,
            retries: 0,
            nav_until: SimTime::ZERO,
            queue,
            active: false,
            phase: Phase::Idle,
            current: None,
            eifs_pending: false,
        }
    }

    pub fn has_traffic(&self) -> bool {
        self.current.is_some() || !self.queue.is_empty()
    }

    /// Contending means: associated, no exchange in flight, something to send.
    pub fn wants_access(&self) -> bool {
        self.active && self.phase == Phase::Idle && self.has_traffic()
    }

    pub fn ifs(&self, use_eifs: bool) -> SimTime {
        if use_eifs && self.eifs_pending {
            eifs()
        } else {
            DIFS
        }
    }

    /// Instant the slot countdown begins: the medium (physical and virtual)
    /// must have been idle for one IFS since `ready_since`.
    pub fn countdown_start(
        &self,
        phys_idle_since: SimTime,
        ready_since: SimTime,
        ifs: SimTime,
    ) -> SimTime {
        phys_idle_since.max(self.nav_until).max(ready_since) + ifs
    }

    /// Transmission instant if the medium stays idle.
    pub fn access_time(&self, countdown_start: SimTime) -> SimTime {
        countdown_start + SLOT * u64::from(self.backoff)
    }

    /// Medium went busy at `now`: keep only the whole idle slots counted
    /// since `countdown_start`.
    pub fn freeze(&mut self, countdown_start: SimTime, now: SimTime) {
        if now > countdown_start {
            let elapsed = (now - countdown_start).as_nanos() / SLOT.as_nanos();
            let counted = elapsed.min(u64::from(self.backoff)) as u32;
            self.backoff -= counted;
        }
    }

    /// ACK (or CTS) never arrived. Doubles the window, counts the retry and
    /// returns the head packet if it has exhausted the retry limit.
    pub fn on_tx_failure(&mut self, rng: &mut RngStream) -> Option<QueuedPacket> {
        self.cw = (2 * (self.cw + 1) - 1).min(CW_MAX);
        self.retries += 1;
        let mut dropped = None;
        if self.retries > RETRY_LIMIT {
            dropped = self.current.take();
            self.cw = CW_MIN;
            self.retries = 0;
        }
        self.backoff = draw_backoff(self.cw, rng);
        self.phase = Phase::Idle;
        dropped
    }

    /// DATA acknowledged: reset the window and start a post-backoff.
    pub fn on_tx_success(&mut self, rng: &mut RngStream) -> Option<QueuedPacket> {
        self.cw = CW_MIN;
        self.retries = 0;
        self.backoff = draw_backoff(self.cw, rng);
        self.phase = Phase::Idle;
        self.current.take()
    }

    /// Virtual carrier sense from an overheard frame's duration field.
    pub fn update_nav(&mut self, duration: SimTime, t: SimTime) {
        if duration > SimTime::ZERO {
            self.nav_until = self.nav_until.max(t + duration);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::rng_stream;

    fn state() -> DcfState {
        DcfState::new(MacQueue::new(500, SimTime::from_secs(0.5)))
    }

    fn pkt(seq: u64, at_ms: u64) -> QueuedPacket {
        QueuedPacket {
            flow: 1,
            seq,
            enqueue_time: SimTime::from_micros(at_ms * 1000),
        }
    }

    #[test]
    fn access_mechanism_threshold() {
        assert_eq!(select_access_mechanism(576, 0), AccessMechanism::RtsCts);
        assert_eq!(select_access_mechanism(576, 65535), AccessMechanism::Basic);
        assert_eq!(select_access_mechanism(0, 0), AccessMechanism::Basic);
        assert_eq!(select_access_mechanism(577, 576), AccessMechanism::RtsCts);
        assert_eq!(select_access_mechanism(576, 576), AccessMechanism::Basic);
    }

    #[test]
    fn backoff_within_window() {
        let mut rng = rng_stream(1, "backoff");
        for _ in 0..10_000 {
            assert!(draw_backoff(15, &mut rng) <= 15);
        }
    }

    #[test]
    fn backoff_replays() {
        let mut a = rng_stream(5, "backoff/1");
        let mut b = rng_stream(5, "backoff/1");
        for _ in 0..100 {
            assert_eq!(draw_backoff(1023, &mut a), draw_backoff(1023, &mut b));
        }
    }

    #[test]
    fn failure_doubles_window() {
        let mut rng = rng_stream(1, "backoff");
        let mut s = state();
        s.current = Some(pkt(0, 0));
        assert!(s.on_tx_failure(&mut rng).is_none());
        assert_eq!(s.cw, 31);
        assert_eq!(s.retries, 1);
        assert!(s.backoff <= 31);
    }

    #[test]
    fn window_saturates() {
        let mut rng = rng_stream(1, "backoff");
        let mut s = state();
        s.current = Some(pkt(0, 0));
        s.cw = 1023;
        s.on_tx_failure(&mut rng);
        assert_eq!(s.cw, 1023);
    }

    #[test]
    fn retry_limit_drops_and_resets() {
        let mut rng = rng_stream(1, "backoff");
        let mut s = state();
        s.current = Some(pkt(4, 0));
        s.retries = 7;
        s.cw = 255;
        let dropped = s.on_tx_failure(&mut rng);
        assert_eq!(dropped, Some(pkt(4, 0)));
        assert_eq!(s.cw, 15);
        assert_eq!(s.retries, 0);
        assert!(s.current.is_none());
        assert!(s.backoff <= 15);
    }

    #[test]
    fn eight_attempts_before_drop() {
        let mut rng = rng_stream(1, "backoff");
        let mut s = state();
        s.current = Some(pkt(0, 0));
        let mut cws = vec![];
        for _ in 0..7 {
            assert!(s.on_tx_failure(&mut rng).is_none());
            cws.push(s.cw);
        }
        assert_eq!(cws, vec![31, 63, 127, 255, 511, 1023, 1023]);
        assert!(s.on_tx_failure(&mut rng).is_some());
    }

    #[test]
    fn success_resets_window() {
        let mut rng = rng_stream(1, "backoff");
        let mut s = state();
        s.cw = 127;
        s.retries = 3;
        s.current = Some(pkt(1, 0));
        assert_eq!(s.on_tx_success(&mut rng), Some(pkt(1, 0)));
        assert_eq!((s.cw, s.retries), (15, 0));
    }

    #[test]
    fn nav_takes_the_later_reservation() {
        let mut s = state();
        let t = SimTime::from_micros(1000);
        s.update_nav(SimTime::from_micros(500), t);
        assert_eq!(s.nav_until, SimTime::from_micros(1500));
        s.update_nav(SimTime::ZERO, SimTime::from_micros(1200));
        assert_eq!(s.nav_until, SimTime::from_micros(1500));
        s.update_nav(SimTime::from_micros(100), SimTime::from_micros(1100));
        assert_eq!(s.nav_until, SimTime::from_micros(1500));
        s.update_nav(SimTime::from_micros(600), SimTime::from_micros(1100));
        assert_eq!(s.nav_until, SimTime::from_micros(1700));
    }

    #[test]
    fn freeze_counts_whole_slots() {
        let mut s = state();
        s.backoff = 10;
        let start = SimTime::from_micros(100);
        s.freeze(start, start + SLOT * 3 + SimTime::from_micros(4));
        assert_eq!(s.backoff, 7);
        s.freeze(start, start - SimTime::from_micros(1));
        assert_eq!(s.backoff, 7);
        s.freeze(start, start + SLOT * 50);
        assert_eq!(s.backoff, 0);
    }

    #[test]
    fn countdown_waits_out_nav() {
        let mut s = state();
        s.backoff = 2;
        s.nav_until = SimTime::from_micros(500);
        let c = s.countdown_start(SimTime::from_micros(100), SimTime::ZERO, DIFS);
        assert_eq!(c, SimTime::from_micros(534));
        assert_eq!(s.access_time(c), SimTime::from_micros(552));
    }

    #[test]
    fn interframe_spaces() {
        assert_eq!(eifs(), SimTime::from_micros(82));
        assert_eq!(ack_timeout(), SimTime::from_micros(57));
        assert_eq!(cts_timeout(), SimTime::from_micros(57));
        assert_eq!(rts_duration(576), SimTime::from_micros(48 + 32 + 408 + 32));
        assert_eq!(
            cts_duration(rts_duration(576)),
            SimTime::from_micros(32 + 408 + 32)
        );
    }

    #[test]
    fn queue_drop_tail_and_expiry() {
        let mut q = MacQueue::new(2, SimTime::from_secs(0.5));
        q.enqueue(pkt(0, 0)).unwrap();
        q.enqueue(pkt(1, 100)).unwrap();
        assert_eq!(q.enqueue(pkt(2, 200)), Err(pkt(2, 200)));
        assert!(q.purge_expired(SimTime::from_secs(0.5)).is_empty());
        let gone = q.purge_expired(SimTime::from_secs(0.55));
        assert_eq!(gone, vec![pkt(0, 0)]);
        assert_eq!(q.len(), 1);
    }
}
