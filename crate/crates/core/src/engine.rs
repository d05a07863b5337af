//! Discrete-event core: a nanosecond virtual clock, a (time, seq) ordered
//! queue with tombstone cancellation, and seeded per-purpose random streams.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::EngineError;

/// Virtual time in integer nanoseconds.
#[derive(Debug, Default, Copy, Clone, Eq, PartialEq, Ord, PartialOrd, Hash)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);
    pub const MAX: SimTime = SimTime(u64::MAX);

    pub const fn from_nanos(ns: u64) -> Self {
        SimTime(ns)
    }

    pub const fn from_micros(us: u64) -> Self {
        SimTime(us * 1_000)
    }

    /// Rounds to the nearest nanosecond; negative inputs saturate at zero.
    pub fn from_secs(s: f64) -> Self {
        if s <= 0.0 {
            SimTime(0)
        } else {
            SimTime((s * 1e9).round() as u64)
        }
    }

    pub const fn as_nanos(self) -> u64 {
        self.0
    }

    pub fn as_secs(self) -> f64 {
        self.0 as f64 * 1e-9
    }

    pub fn saturating_sub(self, other: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(other.0))
    }
}

impl std::ops::Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl std::ops::AddAssign for SimTime {
    fn add_assign(&mut self, rhs: SimTime) {
        self.0 += rhs.0;
    }
}

impl std::ops::Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 - rhs.0)
    }
}

impl std::ops::Mul<u64> for SimTime {
    type Output = SimTime;
    fn mul(self, rhs: u64) -> SimTime {
        SimTime(self.0 * rhs)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Opaque handle returned by [`Scheduler::schedule`], usable for cancellation.
#[derive(Debug, Copy, Clone, Eq, PartialEq, Hash)]
pub struct EventHandle(u64);

/// A dispatched event.
#[derive(Debug, Clone)]
pub struct Event<P> {
    pub time: SimTime,
    pub seq: u64,
    pub payload: P,
}

struct Queued<P> {
    time: SimTime,
    seq: u64,
    payload: P,
}

impl<P> PartialEq for Queued<P> {
    fn eq(&self, other: &Self) -> bool {
        self.time == other.time && self.seq == other.seq
    }
}

impl<P> Eq for Queued<P> {}

impl<P> PartialOrd for Queued<P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<P> Ord for Queued<P> {
    // reversed: BinaryHeap is a max-heap
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .cmp(&self.time)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Event queue plus virtual clock.
///
/// Events fire in `(time, seq)` order, where `seq` is the insertion counter,
/// so simultaneous events are dispatched first-scheduled-first. Cancelled
/// events stay in the heap and are dropped when they reach the front.
pub struct Scheduler<P> {
    now: SimTime,
    next_seq: u64,
    heap: BinaryHeap<Queued<P>>,
    cancelled: HashSet<u64>,
    dispatched: u64,
    finished: bool,
}

impl<P> Default for Scheduler<P> {
    fn default() -> Self {
        Self::new()
    }
}

impl<P> Scheduler<P> {
    pub fn new() -> Self {
        Scheduler {
            now: SimTime::ZERO,
            next_seq: 0,
            heap: BinaryHeap::new(),
            cancelled: HashSet::new(),
            dispatched: 0,
            finished: false,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    /// Number of events dispatched so far (cancelled ones excluded).
    pub fn dispatched(&self) -> u64 {
        self.dispatched
    }

    /// Live plus tombstoned entries still in the heap.
    pub fn pending(&self) -> usize {
        self.heap.len()
    }

    pub fn schedule(&mut self, time: SimTime, payload: P) -> Result<EventHandle, EngineError> {
        if time < self.now {
            return Err(EngineError::PastEvent {
                at: time.as_nanos(),
                now: self.now.as_nanos(),
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Queued { time, seq, payload });
        Ok(EventHandle(seq))
    }

    /// Schedules `delay` after the current time. Never fails.
    pub fn schedule_in(&mut self, delay: SimTime, payload: P) -> EventHandle {
        let time = self.now + delay;
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Queued { time, seq, payload });
        EventHandle(seq)
    }

    /// Marks an event as cancelled. Cancelling an event that already fired is a no-op.
    pub fn cancel(&mut self, handle: EventHandle) {
        if handle.0 < self.next_seq {
            self.cancelled.insert(handle.0);
        }
    }

    /// Pops the next live event with `time < stop`, advancing the clock to it.
    pub fn pop_before(&mut self, stop: SimTime) -> Option<Event<P>> {
        loop {
            let head = self.heap.peek()?;
            if head.time >= stop {
                return None;
            }
            let q = self.heap.pop().expect("peeked");
            if !self.cancelled.is_empty() && self.cancelled.remove(&q.seq) {
                continue;
            }
            debug_assert!(q.time >= self.now);
            self.now = q.time;
            self.dispatched += 1;
            return Some(Event {
                time: q.time,
                seq: q.seq,
                payload: q.payload,
            });
        }
    }

    /// Dispatches events in order until the queue drains or the next event is
    /// at or beyond `stop`. Returns the clock value afterwards, which is the
    /// time of the last dispatched event (or the starting time if none fired).
    pub fn run<F>(&mut self, stop: SimTime, mut handler: F) -> Result<SimTime, EngineError>
    where
        F: FnMut(&mut Scheduler<P>, Event<P>),
    {
        if self.finished {
            return Err(EngineError::AlreadyFinished);
        }
        if stop == SimTime::ZERO {
            return Err(EngineError::InvalidStop);
        }
        while let Some(ev) = self.pop_before(stop) {
            handler(self, ev);
        }
        self.finished = true;
        Ok(self.now)
    }
}

/// Independent, reproducible random stream keyed by `(seed, purpose)`.
///
/// The seed fixes the ChaCha key and the purpose label selects the 64-bit
/// stream id, so two purposes under one seed never share keystream.
pub type RngStream = ChaCha8Rng;

pub fn rng_stream(seed: u64, purpose: &str) -> RngStream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(label_hash(purpose));
    rng
}

// FNV-1a, stable across platforms and releases.
fn label_hash(label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn fires_at_scheduled_time() {
        let mut s = Scheduler::new();
        s.schedule(SimTime::from_secs(1.0), "a").unwrap();
        let mut fired = vec![];
        s.run(SimTime::from_secs(30.0), |s, ev| {
            fired.push((s.now(), ev.payload))
        })
        .unwrap();
        assert_eq!(fired, vec![(SimTime::from_secs(1.0), "a")]);
    }

    #[test]
    fn ties_break_by_insertion() {
        let mut s = Scheduler::new();
        let t = SimTime::from_secs(2.0);
        s.schedule(t, 1).unwrap();
        s.schedule(t, 2).unwrap();
        s.schedule(SimTime::from_secs(1.0), 0).unwrap();
        let mut order = vec![];
        s.run(SimTime::from_secs(3.0), |_, ev| order.push(ev.payload))
            .unwrap();
        assert_eq!(order, vec![0, 1, 2]);
    }

    #[test]
    fn past_event_rejected() {
        let mut s: Scheduler<()> = Scheduler::new();
        s.schedule(SimTime::from_nanos(10), ()).unwrap();
        s.pop_before(SimTime::MAX).unwrap();
        assert!(matches!(
            s.schedule(SimTime::from_nanos(9), ()),
            Err(EngineError::PastEvent { .. })
        ));
    }

    #[test]
    fn empty_queue_returns_start() {
        let mut s: Scheduler<()> = Scheduler::new();
        let end = s.run(SimTime::from_secs(30.0), |_, _| {}).unwrap();
        assert_eq!(end, SimTime::ZERO);
        assert_eq!(s.dispatched(), 0);
    }

    #[test]
    fn stop_time_excludes_late_events() {
        let mut s = Scheduler::new();
        for t in [5.0, 10.0, 35.0] {
            s.schedule(SimTime::from_secs(t), t).unwrap();
        }
        let mut seen = vec![];
        let end = s
            .run(SimTime::from_secs(30.0), |_, ev| seen.push(ev.payload))
            .unwrap();
        assert_eq!(seen, vec![5.0, 10.0]);
        assert_eq!(end, SimTime::from_secs(10.0));
    }

    #[test]
    fn event_at_stop_time_not_dispatched() {
        let mut s = Scheduler::new();
        s.schedule(SimTime::from_secs(30.0), ()).unwrap();
        s.run(SimTime::from_secs(30.0), |_, _| {
            panic!("dispatched at stop")
        })
        .unwrap();
    }

    #[test]
    fn cancelled_events_skipped() {
        let mut s = Scheduler::new();
        let h = s.schedule(SimTime::from_nanos(5), 'x').unwrap();
        s.schedule(SimTime::from_nanos(6), 'y').unwrap();
        s.cancel(h);
        let mut seen = vec![];
        s.run(SimTime::from_nanos(100), |_, ev| seen.push(ev.payload))
            .unwrap();
        assert_eq!(seen, vec!['y']);
    }

    #[test]
    fn rerun_is_usage_error() {
        let mut s: Scheduler<()> = Scheduler::new();
        s.run(SimTime::from_secs(1.0), |_, _| {}).unwrap();
        assert!(matches!(
            s.run(SimTime::from_secs(2.0), |_, _| {}),
            Err(EngineError::AlreadyFinished)
        ));
    }

    #[test]
    fn handler_can_schedule_follow_ups() {
        let mut s = Scheduler::new();
        s.schedule(SimTime::ZERO, 0u32).unwrap();
        let mut count = 0;
        s.run(SimTime::from_nanos(1_000), |s, ev| {
            count += 1;
            s.schedule_in(SimTime::from_nanos(100), ev.payload + 1);
        })
        .unwrap();
        assert_eq!(count, 10);
    }

    #[test]
    fn same_stream_replays() {
        let mut a = rng_stream(42, "backoff");
        let mut b = rng_stream(42, "backoff");
        for _ in 0..1000 {
            assert_eq!(a.random::<u64>(), b.random::<u64>());
        }
    }

    #[test]
    fn purposes_do_not_share_draws() {
        let mut a = rng_stream(42, "backoff");
        let mut b = rng_stream(42, "mobility");
        let xs: Vec<u64> = (0..1000).map(|_| a.random()).collect();
        let ys: Vec<u64> = (0..1000).map(|_| b.random()).collect();
        assert_ne!(xs, ys);
        let same = xs.iter().zip(&ys).filter(|(x, y)| x == y).count();
        assert_eq!(same, 0);
    }
}
