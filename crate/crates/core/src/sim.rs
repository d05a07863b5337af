//! One simulation run: a UAV access point and a grid of sensors sharing one
//! range-limited channel under DCF.
//!
//! Node 0 is the UAV. It sends beacons, answers RTS with CTS and DATA with
//! ACK, and sinks all traffic. Nodes 1..=n are fixed sensors, each with one
//! constant-rate uplink flow.
//!
//! Backoff is not simulated slot by slot. A contending station schedules a
//! single timer for the instant its countdown would reach zero; when its
//! medium goes busy the timer is cancelled and only the whole idle slots
//! that elapsed are deducted.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::Rng;

use crate::engine::{rng_stream, Event, EventHandle, RngStream, Scheduler, SimTime};
use crate::geom::Vec3;
use crate::mac::{
    self, ack_timeout, cts_duration, cts_timeout, data_duration, draw_backoff, rts_duration,
    select_access_mechanism, AccessMechanism, DcfState, MacQueue, Phase, QueuedPacket, SIFS, SLOT,
};
use crate::metrics::{self, DelayMode, FlowStats, RunRecord};
use crate::mobility::{gauss_markov_step, random_direction_2d_step, MobilityState, Track};
use crate::phy::{
    frame_airtime, in_range, Channel, Dest, Frame, FrameKind, NodeId, PositionOracle, RxOutcome, AP,
};
use crate::scenario::{MobilityKind, Scenario};
use crate::traffic::{Delivery, FlowSpec, Sink, Source};

/// What to record besides the counters.
#[derive(Debug, Clone, Default)]
pub struct SimOptions {
    /// `t_ns kind node payload` per dispatched event.
    pub event_trace: bool,
    /// `t node seq kind outcome cw backoff retries` per finished exchange.
    pub mac_trace: bool,
    /// `t x y z speed direction` per UAV mobility update.
    pub mobility_trace: bool,
    /// Check protocol invariants while running and report violations.
    pub audit: bool,
    /// Keep every sink delivery.
    pub record_deliveries: bool,
}

#[derive(Debug, Clone)]
enum Ev {
    MobilityTick,
    BeaconTick,
    BeaconRetry,
    AppPacket(NodeId),
    TxEnd(NodeId, u64),
    RxStart(NodeId, u64),
    RxEnd(NodeId, u64),
    BackoffEnd(NodeId),
    Timeout(NodeId),
    Respond(NodeId),
    BeaconLoss(NodeId),
}

impl Ev {
    fn kind(&self) -> &'static str {
        match self {
            Ev::MobilityTick => "mobility-tick",
            Ev::BeaconTick => "beacon-tick",
            Ev::BeaconRetry => "beacon-retry",
            Ev::AppPacket(_) => "app-packet",
            Ev::TxEnd(..) => "phy-tx-end",
            Ev::RxStart(..) => "phy-rx-start",
            Ev::RxEnd(..) => "phy-rx-end",
            Ev::BackoffEnd(_) => "backoff-slot",
            Ev::Timeout(_) => "timer",
            Ev::Respond(_) => "timer",
            Ev::BeaconLoss(_) => "timer",
        }
    }

    fn node(&self) -> NodeId {
        match *self {
            Ev::MobilityTick | Ev::BeaconTick | Ev::BeaconRetry => AP,
            Ev::AppPacket(n)
            | Ev::TxEnd(n, _)
            | Ev::RxStart(n, _)
            | Ev::RxEnd(n, _)
            | Ev::BackoffEnd(n)
            | Ev::Timeout(n)
            | Ev::Respond(n)
            | Ev::BeaconLoss(n) => n,
        }
    }

    fn summary(&self) -> String {
        match self {
            Ev::TxEnd(_, id) | Ev::RxStart(_, id) | Ev::RxEnd(_, id) => format!("tx={id}"),
            Ev::Timeout(_) => "timeout".into(),
            Ev::Respond(_) => "respond".into(),
            Ev::BeaconLoss(_) => "beacon-loss".into(),
            _ => "-".into(),
        }
    }
}

#[derive(Debug, Default, Clone)]
struct Radio {
    tx_until: Option<SimTime>,
    incoming: u32,
    idle_since: SimTime,
}

impl Radio {
    fn busy(&self) -> bool {
        self.tx_until.is_some() || self.incoming > 0
    }
}

struct Station {
    dcf: DcfState,
    rng: RngStream,
    radio: Radio,
    source: Source,
    neighbors: Vec<NodeId>,
    ready_since: SimTime,
    countdown_from: SimTime,
    backoff_timer: Option<EventHandle>,
    timeout: Option<EventHandle>,
    beacon_loss: Option<EventHandle>,
    pending_data: Option<Frame>,
    flow: FlowStats,
    activations: u32,
}

struct AccessPoint {
    rng: RngStream,
    radio: Radio,
    pending_response: Option<Frame>,
    beacon_pending: bool,
    beacon_retry: Option<EventHandle>,
    last_cts_to: Option<NodeId>,
    /// End of the exchange the UAV itself granted with its last CTS.
    reserved_until: SimTime,
}

struct Positions<'a> {
    sensors: &'a [Vec3],
    uav: &'a Track,
}

impl PositionOracle for Positions<'_> {
    fn position(&self, node: NodeId, t: SimTime) -> Vec3 {
        if node == AP {
            self.uav.position(t.as_secs())
        } else {
            self.sensors[node]
        }
    }
}

/// Frame-level counters for the whole run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FrameCounters {
    pub beacons: u64,
    pub rts: u64,
    pub cts: u64,
    pub data: u64,
    pub acks: u64,
    pub data_delivered: u64,
    pub data_collisions: u64,
    pub data_out_of_range: u64,
    pub rts_delivered: u64,
    pub rts_collisions: u64,
    pub rts_out_of_range: u64,
    pub ack_timeouts: u64,
    pub cts_timeouts: u64,
    pub retry_drops: u64,
    pub expiry_drops: u64,
    pub overflow_drops: u64,
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub scenario: Scenario,
    pub access: AccessMechanism,
    pub flows: Vec<FlowStats>,
    pub frames: FrameCounters,
    pub duplicates: u64,
    pub events_dispatched: u64,
    pub final_time: SimTime,
    pub event_trace: Option<String>,
    pub mac_trace: Option<String>,
    pub mobility_trace: Option<String>,
    pub deliveries: Vec<Delivery>,
    /// Invariant violations found when auditing; empty otherwise.
    pub violations: Vec<String>,
    /// Number of station activations (first beacon or re-association).
    pub activations: u64,
    /// When auditing: the widest start-time spread among frames that
    /// collided at the UAV, `None` if nothing collided there.
    pub max_collision_gap: Option<SimTime>,
}

impl RunReport {
    pub fn throughput(&self) -> f64 {
        metrics::throughput(&self.flows, self.scenario.sim_time).expect("sim_time validated")
    }

    pub fn average_delay(&self, mode: DelayMode) -> Option<f64> {
        metrics::average_delay(&self.flows, mode)
    }

    /// DATA and RTS frames lost to collision at the UAV.
    pub fn collision_events(&self) -> u64 {
        self.frames.data_collisions + self.frames.rts_collisions
    }

    pub fn tx_packets(&self) -> u64 {
        self.flows.iter().map(|f| f.tx_packets).sum()
    }

    pub fn rx_packets(&self) -> u64 {
        self.flows.iter().map(|f| f.rx_packets).sum()
    }

    pub fn dropped_packets(&self) -> u64 {
        self.flows.iter().map(|f| f.packets_dropped).sum()
    }

    pub fn residual_packets(&self) -> u64 {
        self.flows.iter().map(|f| f.residual).sum()
    }

    pub fn record(&self, scenario_id: &str) -> RunRecord {
        RunRecord {
            scenario_id: scenario_id.to_string(),
            seed: self.scenario.seed,
            n_sta: self.scenario.n_sta,
            access: self.access.tag().to_string(),
            mobility: self.scenario.uav_mobility.tag().to_string(),
            uav_speed_mps: self.scenario.uav_mean_speed,
            traffic_rate_bps: self.scenario.traffic_rate_per_sta,
            sim_time_s: self.scenario.sim_time,
            throughput_bps: self.throughput(),
            avg_delay_pooled_s: self.average_delay(DelayMode::PooledMean),
            avg_delay_eq2_s: self.average_delay(DelayMode::SumOfFlowMeans),
            tx_packets: self.tx_packets(),
            rx_packets: self.rx_packets(),
            dropped_packets: self.dropped_packets(),
            collision_events: self.collision_events(),
        }
    }
}

struct World {
    sc: Scenario,
    opts: SimOptions,
    stop: SimTime,
    beacon_interval: SimTime,
    data_mpdu: u32,
    mechanism: AccessMechanism,
    channel: Channel,
    sensors: Vec<Vec3>,
    track: Track,
    ap: AccessPoint,
    stations: Vec<Station>,
    sink: Sink,
    frames: FrameCounters,
    deliveries: Vec<Delivery>,
    event_trace: String,
    mac_trace: String,
    mobility_trace: String,
    violations: Vec<String>,
    last_time: SimTime,
    data_outcomes: HashMap<u64, (u32, SimTime)>,
    max_collision_gap: Option<SimTime>,
}

/// Runs one scenario to `sim_time`.
pub fn run(sc: &Scenario, opts: &SimOptions) -> RunReport {
    let mut sched: Scheduler<Ev> = Scheduler::new();
    let mut world = World::new(sc.clone(), opts.clone(), &mut sched);
    let stop = world.stop;
    let end = sched
        .run(stop, |s, ev| world.handle(s, ev))
        .expect("fresh scheduler with positive stop");
    world.finish(end, sched.dispatched())
}

impl World {
    fn new(sc: Scenario, opts: SimOptions, sched: &mut Scheduler<Ev>) -> Self {
        let n = sc.n_sta;
        let mut sensors = Vec::with_capacity(n + 1);
        let start = sc.uav_initial_position();
        sensors.push(start);
        sensors.extend(sc.sensor_positions());

        let mut mob_rng = rng_stream(sc.seed, "mobility");
        let uav = MobilityState::uav_from_scenario(&sc, &mut mob_rng);
        let track = Track::new(uav);

        let data_mpdu = sc.data_mpdu_bytes();
        let mechanism = select_access_mechanism(data_mpdu, sc.rts_threshold);
        let stop = SimTime::from_secs(sc.sim_time);
        let queue = MacQueue::new(sc.queue_capacity, SimTime::from_secs(sc.queue_max_delay));

        let mut stations = Vec::with_capacity(n + 1);
        for id in 0..=n {
            let mut traffic_rng = rng_stream(sc.seed, &format!("traffic/{id}"));
            let spec = FlowSpec {
                flow_id: id,
                rate: sc.traffic_rate_per_sta,
                payload: sc.payload_size,
                on_duration: sc.on_duration,
                off_duration: sc.off_duration,
                start: sc.traffic_start,
                stop: sc.sim_time,
            };
            let offset = if sc.traffic_jitter {
                traffic_rng.random::<f64>() * spec.interval()
            } else {
                0.0
            };
            let spec = FlowSpec {
                start: spec.start + offset,
                ..spec
            };
            let neighbors = if id == AP {
                Vec::new()
            } else {
                (1..=n)
                    .filter(|&j| j != id && in_range(sensors[id], sensors[j], sc.max_range))
                    .collect()
            };
            stations.push(Station {
                dcf: DcfState::new(queue.clone()),
                rng: rng_stream(sc.seed, &format!("backoff/{id}")),
                radio: Radio::default(),
                source: Source::new(spec),
                neighbors,
                ready_since: SimTime::ZERO,
                countdown_from: SimTime::ZERO,
                backoff_timer: None,
                timeout: None,
                beacon_loss: None,
                pending_data: None,
                flow: FlowStats::new(id),
                activations: 0,
            });
        }

        let mut w = World {
            beacon_interval: SimTime::from_secs(sc.beacon_interval),
            stop,
            data_mpdu,
            mechanism,
            channel: Channel::new(sc.max_range),
            sensors,
            track,
            ap: AccessPoint {
                rng: mob_rng,
                radio: Radio::default(),
                pending_response: None,
                beacon_pending: false,
                beacon_retry: None,
                last_cts_to: None,
                reserved_until: SimTime::ZERO,
            },
            stations,
            sink: Sink::new(n + 1),
            frames: FrameCounters::default(),
            deliveries: Vec::new(),
            event_trace: String::new(),
            mac_trace: String::new(),
            mobility_trace: String::new(),
            violations: Vec::new(),
            last_time: SimTime::ZERO,
            data_outcomes: HashMap::new(),
            max_collision_gap: None,
            sc,
            opts,
        };

        w.log_mobility(SimTime::ZERO);
        match w.sc.uav_mobility {
            MobilityKind::ConstantPosition => {}
            MobilityKind::GaussMarkov => {
                sched.schedule_in(SimTime::from_secs(w.sc.gm_timestep), Ev::MobilityTick);
            }
            MobilityKind::RandomDirection2D => {
                sched.schedule_in(SimTime::ZERO, Ev::MobilityTick);
            }
        }
        sched.schedule_in(SimTime::ZERO, Ev::BeaconTick);
        for id in 1..=n {
            if let Some(t) = w.stations[id].source.next_time() {
                sched
                    .schedule(t, Ev::AppPacket(id))
                    .expect("first packet not in the past");
            }
        }
        w
    }

    fn violation(&mut self, now: SimTime, msg: String) {
        if self.violations.len() < 100 {
            self.violations.push(format!("t={now}: {msg}"));
        }
    }

    fn handle(&mut self, sched: &mut Scheduler<Ev>, ev: Event<Ev>) {
        let now = ev.time;
        if self.opts.audit && now < self.last_time {
            self.violation(now, format!("clock went backwards from {}", self.last_time));
        }
        if self.opts.audit && now >= self.stop {
            self.violation(now, "event dispatched at or after the stop time".into());
        }
        self.last_time = now;
        if self.opts.event_trace {
            let _ = writeln!(
                self.event_trace,
                "{} {} {} {}",
                now,
                ev.payload.kind(),
                ev.payload.node(),
                ev.payload.summary()
            );
        }
        match ev.payload {
            Ev::MobilityTick => self.on_mobility_tick(sched),
            Ev::BeaconTick => self.on_beacon_tick(sched),
            Ev::BeaconRetry => self.on_beacon_retry(sched),
            Ev::AppPacket(n) => self.on_app_packet(sched, n),
            Ev::TxEnd(n, id) => self.on_tx_end(sched, n, id),
            Ev::RxStart(n, id) => self.on_rx_start(sched, n, id),
            Ev::RxEnd(n, id) => self.on_rx_end(sched, n, id),
            Ev::BackoffEnd(n) => self.on_backoff_end(sched, n),
            Ev::Timeout(n) => self.on_timeout(sched, n),
            Ev::Respond(n) => self.on_respond(sched, n),
            Ev::BeaconLoss(n) => self.on_beacon_loss(sched, n),
        }
    }

    fn radio(&mut self, node: NodeId) -> &mut Radio {
        if node == AP {
            &mut self.ap.radio
        } else {
            &mut self.stations[node].radio
        }
    }

    fn log_mobility(&mut self, now: SimTime) {
        let s = self.track.current();
        let (inside, speed, direction) = (s.bounds.contains(s.position), s.speed, s.direction);
        let p0 = s.position;
        if self.opts.audit && !inside {
            let p = p0;
            self.violation(
                now,
                format!("UAV left the area at ({}, {}, {})", p.x, p.y, p.z),
            );
        }
        if self.opts.mobility_trace {
            let p = self.track.position(now.as_secs());
            let _ = writeln!(
                self.mobility_trace,
                "{:.9} {:.6} {:.6} {:.6} {:.6} {:.6}",
                now.as_secs(),
                p.x,
                p.y,
                p.z,
                speed,
                direction
            );
        }
    }

    fn on_mobility_tick(&mut self, sched: &mut Scheduler<Ev>) {
        let now = sched.now();
        match self.sc.uav_mobility {
            MobilityKind::ConstantPosition => {}
            MobilityKind::GaussMarkov => {
                let next =
                    gauss_markov_step(self.track.current(), self.sc.gm_timestep, &mut self.ap.rng);
                self.track.push(next);
                sched.schedule_in(SimTime::from_secs(self.sc.gm_timestep), Ev::MobilityTick);
            }
            MobilityKind::RandomDirection2D => {
                let (mut next, delay) =
                    random_direction_2d_step(self.track.current(), &mut self.ap.rng);
                // keep segment clocks aligned with the event clock
                let t0 = now.as_secs();
                next.segment_end = t0 + (next.segment_end - next.segment_start);
                next.segment_start = t0;
                self.track.push(next);
                if delay.is_finite() {
                    sched.schedule_in(SimTime::from_secs(delay), Ev::MobilityTick);
                }
            }
        }
        self.log_mobility(now);
    }

    // ---- transmission plumbing -------------------------------------------------

    fn transmit(&mut self, sched: &mut Scheduler<Ev>, node: NodeId, frame: Frame) {
        let now = sched.now();
        match frame.kind {
            FrameKind::Beacon => self.frames.beacons += 1,
            FrameKind::Rts => self.frames.rts += 1,
            FrameKind::Cts => self.frames.cts += 1,
            FrameKind::Data => self.frames.data += 1,
            FrameKind::Ack => self.frames.acks += 1,
        }
        let is_data = frame.kind == FrameKind::Data;
        let positions = Positions {
            sensors: &self.sensors,
            uav: &self.track,
        };
        let n = self.sc.n_sta;
        let tx = if node == AP {
            self.channel.begin(frame, now, &positions, 1..=n)
        } else {
            let nb = &self.stations[node].neighbors;
            self.channel.begin(
                frame,
                now,
                &positions,
                std::iter::once(AP).chain(nb.iter().copied()),
            )
        };
        let id = tx.id;
        let airtime = tx.end - tx.start;
        for &(l, d) in &tx.listeners {
            sched.schedule_in(d, Ev::RxStart(l, id));
            sched.schedule_in(airtime + d, Ev::RxEnd(l, id));
        }
        sched.schedule_in(airtime, Ev::TxEnd(node, id));
        if self.opts.audit && is_data {
            self.data_outcomes.insert(id, (0, now + airtime));
        }
        if node != AP {
            self.suspend(sched, node);
        }
        self.radio(node).tx_until = Some(now + airtime);
    }

    fn record_data_outcome(&mut self, id: u64, outcome: RxOutcome) {
        match outcome {
            RxOutcome::Delivered => self.frames.data_delivered += 1,
            RxOutcome::CollisionLoss => self.frames.data_collisions += 1,
            RxOutcome::OutOfRange => self.frames.data_out_of_range += 1,
        }
        if let Some(e) = self.data_outcomes.get_mut(&id) {
            e.0 += 1;
        }
    }

    fn record_rts_outcome(&mut self, outcome: RxOutcome) {
        match outcome {
            RxOutcome::Delivered => self.frames.rts_delivered += 1,
            RxOutcome::CollisionLoss => self.frames.rts_collisions += 1,
            RxOutcome::OutOfRange => self.frames.rts_out_of_range += 1,
        }
    }

    fn on_tx_end(&mut self, sched: &mut Scheduler<Ev>, node: NodeId, id: u64) {
        let now = sched.now();
        let radio = self.radio(node);
        radio.tx_until = None;
        if radio.incoming == 0 {
            radio.idle_since = now;
        }
        let tx = self.channel.get(id).expect("transmission still logged");
        let frame = tx.frame.clone();
        let reached_dst = match frame.dst {
            Dest::Node(d) => tx.delay_to(d).is_some(),
            Dest::Broadcast => true,
        };
        if !reached_dst {
            match frame.kind {
                FrameKind::Data => self.record_data_outcome(id, RxOutcome::OutOfRange),
                FrameKind::Rts => self.record_rts_outcome(RxOutcome::OutOfRange),
                _ => {}
            }
        }
        if node == AP {
            self.ap_became_idle(sched);
            return;
        }
        let st = &mut self.stations[node];
        match st.dcf.phase {
            Phase::TxRts => {
                st.dcf.phase = Phase::WaitCts;
                st.timeout = Some(sched.schedule_in(cts_timeout(), Ev::Timeout(node)));
            }
            Phase::TxData => {
                st.dcf.phase = Phase::WaitAck;
                st.timeout = Some(sched.schedule_in(ack_timeout(), Ev::Timeout(node)));
            }
            _ => {}
        }
        self.resume(sched, node);
    }

    fn on_rx_start(&mut self, sched: &mut Scheduler<Ev>, node: NodeId, _id: u64) {
        self.radio(node).incoming += 1;
        if node != AP {
            self.suspend(sched, node);
        }
    }

    fn on_rx_end(&mut self, sched: &mut Scheduler<Ev>, node: NodeId, id: u64) {
        let now = sched.now();
        let radio = self.radio(node);
        radio.incoming -= 1;
        if !radio.busy() {
            radio.idle_since = now;
        }
        let positions = Positions {
            sensors: &self.sensors,
            uav: &self.track,
        };
        let tx = self.channel.get(id).expect("transmission still logged");
        let outcome = self.channel.resolve_reception(node, tx, &positions);
        let frame = tx.frame.clone();
        let addressed = frame.dst.is(node);
        if addressed {
            match frame.kind {
                FrameKind::Data => self.record_data_outcome(id, outcome),
                FrameKind::Rts => self.record_rts_outcome(outcome),
                _ => {}
            }
        }
        if node == AP {
            if self.opts.audit && outcome == RxOutcome::CollisionLoss {
                self.note_collision_spread(id);
            }
            if outcome == RxOutcome::Delivered && addressed {
                self.ap_receive(sched, &frame);
            }
            self.ap_became_idle(sched);
            return;
        }
        match outcome {
            RxOutcome::CollisionLoss => {
                if self.sc.eifs {
                    self.stations[node].dcf.eifs_pending = true;
                }
            }
            RxOutcome::OutOfRange => {}
            RxOutcome::Delivered => {
                self.stations[node].dcf.eifs_pending = false;
                self.station_receive(sched, node, &frame);
            }
        }
        self.resume(sched, node);
    }

    // ---- access point ------------------------------------------------------------

    /// Radio in use or a SIFS response queued; the beacon waits for the
    /// next idle edge.
    fn ap_radio_busy(&self) -> bool {
        self.ap.radio.busy() || self.ap.pending_response.is_some()
    }

    fn ap_became_idle(&mut self, sched: &mut Scheduler<Ev>) {
        if self.ap.beacon_pending && !self.ap_radio_busy() && self.ap.beacon_retry.is_none() {
            let at = sched.now().max(self.ap.reserved_until) + SIFS + SLOT;
            self.ap.beacon_retry = Some(
                sched
                    .schedule(at, Ev::BeaconRetry)
                    .expect("not in the past"),
            );
        }
    }

    fn on_beacon_tick(&mut self, sched: &mut Scheduler<Ev>) {
        sched.schedule_in(self.beacon_interval, Ev::BeaconTick);
        if self.ap_radio_busy() || sched.now() < self.ap.reserved_until {
            self.ap.beacon_pending = true;
            self.ap_became_idle(sched);
        } else {
            self.send_beacon(sched);
        }
    }

    fn on_beacon_retry(&mut self, sched: &mut Scheduler<Ev>) {
        self.ap.beacon_retry = None;
        if !self.ap.beacon_pending || self.ap_radio_busy() {
            return;
        }
        if sched.now() < self.ap.reserved_until {
            self.ap_became_idle(sched);
            return;
        }
        self.send_beacon(sched);
    }

    fn send_beacon(&mut self, sched: &mut Scheduler<Ev>) {
        self.ap.beacon_pending = false;
        let frame = Frame::control(FrameKind::Beacon, AP, Dest::Broadcast, SimTime::ZERO);
        self.transmit(sched, AP, frame);
    }

    fn ap_receive(&mut self, sched: &mut Scheduler<Ev>, frame: &Frame) {
        let now = sched.now();
        if self.ap.pending_response.is_some() {
            return;
        }
        let response = match frame.kind {
            FrameKind::Data => {
                let flow = frame.flow_id.expect("DATA carries a flow");
                if self.opts.audit
                    && self.mechanism == AccessMechanism::RtsCts
                    && self.ap.last_cts_to != Some(frame.src)
                {
                    self.violation(
                        now,
                        format!("DATA from {} without a preceding CTS", frame.src),
                    );
                }
                if let Some(d) = self.sink.receive(
                    flow,
                    frame.seq,
                    self.sc.payload_size,
                    frame.enqueue_time,
                    now,
                ) {
                    let fs = &mut self.stations[flow].flow;
                    fs.rx_packets += 1;
                    fs.rx_bytes += u64::from(d.bytes);
                    fs.delay_sum += d.delay;
                    fs.time_last_rx = Some(now);
                    if self.opts.record_deliveries {
                        self.deliveries.push(d);
                    }
                }
                Frame::control(FrameKind::Ack, AP, Dest::Node(frame.src), SimTime::ZERO)
            }
            FrameKind::Rts => {
                self.ap.last_cts_to = Some(frame.src);
                Frame::control(
                    FrameKind::Cts,
                    AP,
                    Dest::Node(frame.src),
                    cts_duration(frame.duration),
                )
            }
            _ => return,
        };
        self.ap.pending_response = Some(response);
        sched.schedule_in(SIFS, Ev::Respond(AP));
    }

    // ---- stations ----------------------------------------------------------------

    fn station_receive(&mut self, sched: &mut Scheduler<Ev>, node: NodeId, frame: &Frame) {
        let now = sched.now();
        let interval = self.beacon_interval;
        let st = &mut self.stations[node];
        match frame.kind {
            FrameKind::Beacon => {
                if let Some(h) = st.beacon_loss.take() {
                    sched.cancel(h);
                }
                st.beacon_loss = Some(sched.schedule_in(interval * 3, Ev::BeaconLoss(node)));
                if !st.dcf.active {
                    st.dcf.active = true;
                    st.activations += 1;
                    st.dcf.backoff = draw_backoff(st.dcf.cw, &mut st.rng);
                    st.ready_since = now;
                }
            }
            FrameKind::Cts if frame.dst.is(node) => {
                if st.dcf.phase == Phase::WaitCts {
                    if let Some(h) = st.timeout.take() {
                        sched.cancel(h);
                    }
                    let pkt = st.dcf.current.expect("exchange in progress");
                    st.dcf.phase = Phase::SifsBeforeData;
                    st.pending_data = Some(Frame {
                        kind: FrameKind::Data,
                        src: node,
                        dst: Dest::Node(AP),
                        mpdu_bytes: self.data_mpdu,
                        duration: data_duration(),
                        flow_id: Some(pkt.flow),
                        seq: pkt.seq,
                        enqueue_time: pkt.enqueue_time,
                    });
                    sched.schedule_in(SIFS, Ev::Respond(node));
                }
            }
            FrameKind::Ack if frame.dst.is(node) => {
                if st.dcf.phase == Phase::WaitAck {
                    if let Some(h) = st.timeout.take() {
                        sched.cancel(h);
                    }
                    let pkt = st.dcf.on_tx_success(&mut st.rng);
                    st.ready_since = now;
                    if let Some(p) = pkt {
                        self.mac_log(now, node, p.seq, "success");
                    }
                    self.audit_dcf(now, node);
                }
            }
            _ => {
                if !frame.dst.is(node) {
                    st.dcf.update_nav(frame.duration, now);
                }
            }
        }
    }

    fn on_respond(&mut self, sched: &mut Scheduler<Ev>, node: NodeId) {
        if node == AP {
            if let Some(f) = self.ap.pending_response.take() {
                match f.kind {
                    FrameKind::Ack => self.ap.last_cts_to = None,
                    FrameKind::Cts => {
                        let now = sched.now();
                        self.ap.reserved_until = now + frame_airtime(f.mpdu_bytes) + f.duration;
                    }
                    _ => {}
                }
                self.transmit(sched, AP, f);
            }
            return;
        }
        if let Some(f) = self.stations[node].pending_data.take() {
            self.stations[node].dcf.phase = Phase::TxData;
            self.transmit(sched, node, f);
        }
    }

    fn on_timeout(&mut self, sched: &mut Scheduler<Ev>, node: NodeId) {
        let now = sched.now();
        let st = &mut self.stations[node];
        st.timeout = None;
        match st.dcf.phase {
            Phase::WaitCts => self.frames.cts_timeouts += 1,
            Phase::WaitAck => self.frames.ack_timeouts += 1,
            _ => return,
        }
        let seq = st.dcf.current.map(|p| p.seq).unwrap_or(0);
        let dropped = st.dcf.on_tx_failure(&mut st.rng);
        st.ready_since = now;
        match dropped {
            Some(p) => {
                self.frames.retry_drops += 1;
                if !self.sink.has_delivered(p.flow, p.seq) {
                    self.stations[node].flow.packets_dropped += 1;
                }
                self.mac_log(now, node, seq, "drop");
            }
            None => self.mac_log(now, node, seq, "retry"),
        }
        self.audit_dcf(now, node);
        self.resume(sched, node);
    }

    fn on_beacon_loss(&mut self, sched: &mut Scheduler<Ev>, node: NodeId) {
        let st = &mut self.stations[node];
        st.beacon_loss = None;
        st.dcf.active = false;
        self.suspend(sched, node);
    }

    fn on_app_packet(&mut self, sched: &mut Scheduler<Ev>, node: NodeId) {
        let now = sched.now();
        let payload = u64::from(self.sc.payload_size);
        let st = &mut self.stations[node];
        let seq = st.source.emit();
        st.flow.tx_packets += 1;
        st.flow.tx_bytes += payload;
        st.flow.time_first_tx.get_or_insert(now);
        let had_traffic = st.dcf.has_traffic();
        let expired = st.dcf.queue.purge_expired(now).len() as u64;
        st.flow.packets_dropped += expired;
        self.frames.expiry_drops += expired;
        let pkt = QueuedPacket {
            flow: node,
            seq,
            enqueue_time: now,
        };
        if st.dcf.queue.enqueue(pkt).is_err() {
            st.flow.packets_dropped += 1;
            self.frames.overflow_drops += 1;
        }
        if let Some(t) = st.source.next_time() {
            let t = t.max(now);
            sched
                .schedule(t, Ev::AppPacket(node))
                .expect("not in the past");
        }
        if !had_traffic && st.dcf.has_traffic() {
            st.ready_since = now;
        }
        if self.opts.audit && st.dcf.queue.len() > st.dcf.queue.capacity() {
            self.violation(now, format!("queue of {node} exceeds capacity"));
        }
        self.resume(sched, node);
    }

    fn on_backoff_end(&mut self, sched: &mut Scheduler<Ev>, node: NodeId) {
        let now = sched.now();
        let st = &mut self.stations[node];
        st.backoff_timer = None;
        st.dcf.backoff = 0;
        if self.opts.audit {
            let nav = st.dcf.nav_until;
            let radio_busy = st.radio.busy();
            if radio_busy || self.channel.channel_busy(node, now) {
                self.violation(now, format!("station {node} accessed a busy medium"));
            }
            if now < nav {
                self.violation(now, format!("station {node} transmitted before NAV expiry"));
            }
        }
        let st = &mut self.stations[node];
        if st.dcf.current.is_none() {
            let expired = st.dcf.queue.purge_expired(now).len() as u64;
            st.flow.packets_dropped += expired;
            self.frames.expiry_drops += expired;
            st.dcf.current = st.dcf.queue.pop();
            if let Some(p) = st.dcf.current {
                let limit = st.dcf.queue.max_delay();
                if self.opts.audit && now.saturating_sub(p.enqueue_time) > limit {
                    self.violation(
                        now,
                        format!("station {node} sent a packet older than {limit}"),
                    );
                }
            }
        }
        let st = &mut self.stations[node];
        let Some(pkt) = st.dcf.current else {
            return;
        };
        let frame = match self.mechanism {
            AccessMechanism::RtsCts => {
                st.dcf.phase = Phase::TxRts;
                Frame {
                    kind: FrameKind::Rts,
                    src: node,
                    dst: Dest::Node(AP),
                    mpdu_bytes: crate::phy::RTS_BYTES,
                    duration: rts_duration(self.data_mpdu),
                    flow_id: Some(pkt.flow),
                    seq: pkt.seq,
                    enqueue_time: pkt.enqueue_time,
                }
            }
            AccessMechanism::Basic => {
                st.dcf.phase = Phase::TxData;
                Frame {
                    kind: FrameKind::Data,
                    src: node,
                    dst: Dest::Node(AP),
                    mpdu_bytes: self.data_mpdu,
                    duration: data_duration(),
                    flow_id: Some(pkt.flow),
                    seq: pkt.seq,
                    enqueue_time: pkt.enqueue_time,
                }
            }
        };
        self.transmit(sched, node, frame);
    }

    /// Medium went busy or access was withdrawn: bank whole idle slots and
    /// cancel the pending access.
    fn suspend(&mut self, sched: &mut Scheduler<Ev>, node: NodeId) {
        let now = sched.now();
        let st = &mut self.stations[node];
        if let Some(h) = st.backoff_timer.take() {
            sched.cancel(h);
            st.dcf.freeze(st.countdown_from, now);
        }
    }

    /// Starts (or keeps) the countdown if the station may contend and its
    /// medium is idle.
    fn resume(&mut self, sched: &mut Scheduler<Ev>, node: NodeId) {
        let use_eifs = self.sc.eifs;
        let st = &mut self.stations[node];
        if st.backoff_timer.is_some() || !st.dcf.wants_access() || st.radio.busy() {
            return;
        }
        let ifs = st.dcf.ifs(use_eifs);
        let start = st
            .dcf
            .countdown_start(st.radio.idle_since, st.ready_since, ifs);
        let at = st.dcf.access_time(start);
        st.countdown_from = start;
        st.backoff_timer = Some(
            sched
                .schedule(at, Ev::BackoffEnd(node))
                .expect("access time is in the future"),
        );
    }

    /// Largest start-time gap between a collided frame and any other frame
    /// overlapping it at the UAV.
    fn note_collision_spread(&mut self, id: u64) {
        let tx = self.channel.get(id).expect("transmission still logged");
        let (start, end) = (tx.start, tx.end);
        let mut gap = SimTime::ZERO;
        for other in self.channel.transmissions() {
            if other.id == id {
                continue;
            }
            let heard = other.frame.src == AP || other.delay_to(AP).is_some();
            if heard && other.start < end && start < other.end {
                let g = if other.start > start {
                    other.start - start
                } else {
                    start - other.start
                };
                gap = gap.max(g);
            }
        }
        self.max_collision_gap = Some(self.max_collision_gap.map_or(gap, |m| m.max(gap)));
    }

    fn audit_dcf(&mut self, now: SimTime, node: NodeId) {
        if !self.opts.audit {
            return;
        }
        let d = &self.stations[node].dcf;
        let (cw, backoff, retries) = (d.cw, d.backoff, d.retries);
        if !(mac::CW_MIN..=mac::CW_MAX).contains(&cw) || backoff > cw || retries > mac::RETRY_LIMIT
        {
            self.violation(
                now,
                format!("station {node}: cw={cw} backoff={backoff} retries={retries}"),
            );
        }
    }

    fn mac_log(&mut self, now: SimTime, node: NodeId, seq: u64, outcome: &str) {
        if !self.opts.mac_trace {
            return;
        }
        let d = &self.stations[node].dcf;
        let kind = match self.mechanism {
            AccessMechanism::Basic => "basic",
            AccessMechanism::RtsCts => "rtscts",
        };
        let _ = writeln!(
            self.mac_trace,
            "{} {} {} {} {} {} {} {}",
            now, node, seq, kind, outcome, d.cw, d.backoff, d.retries
        );
    }

    fn finish(mut self, end: SimTime, dispatched: u64) -> RunReport {
        for id in 1..=self.sc.n_sta {
            let st = &self.stations[id];
            let mut residual = st.dcf.queue.len() as u64;
            if let Some(p) = st.dcf.current {
                if !self.sink.has_delivered(p.flow, p.seq) {
                    residual += 1;
                }
            }
            self.stations[id].flow.residual = residual;
        }
        if self.opts.audit {
            let stop = self.stop;
            let mut bad = Vec::new();
            for (id, (count, end_t)) in &self.data_outcomes {
                let resolved_in_time = *end_t + SimTime::from_micros(1) < stop;
                if *count > 1 || (*count == 0 && resolved_in_time) {
                    bad.push(format!("DATA tx {id} has {count} outcomes"));
                }
            }
            bad.sort();
            for b in bad {
                self.violation(stop, b);
            }
            let payload = u64::from(self.sc.payload_size);
            let mut msgs = Vec::new();
            for f in self.stations.iter().skip(1).map(|s| &s.flow) {
                if !f.is_conserved() {
                    msgs.push(format!(
                        "flow {} not conserved: tx={} rx={} dropped={} residual={}",
                        f.flow_id, f.tx_packets, f.rx_packets, f.packets_dropped, f.residual
                    ));
                }
                if f.rx_packets > f.tx_packets || f.rx_bytes != f.rx_packets * payload {
                    msgs.push(format!("flow {} byte accounting", f.flow_id));
                }
            }
            for m in msgs {
                self.violation(stop, m);
            }
        }
        let activations = self.stations.iter().map(|s| u64::from(s.activations)).sum();
        let flows: Vec<FlowStats> = self.stations.into_iter().skip(1).map(|s| s.flow).collect();
        RunReport {
            access: self.mechanism,
            flows,
            frames: self.frames,
            duplicates: self.sink.duplicates,
            events_dispatched: dispatched,
            final_time: end,
            event_trace: self.opts.event_trace.then_some(self.event_trace),
            mac_trace: self.opts.mac_trace.then_some(self.mac_trace),
            mobility_trace: self.opts.mobility_trace.then_some(self.mobility_trace),
            deliveries: self.deliveries,
            violations: self.violations,
            activations,
            max_collision_gap: self.max_collision_gap,
            scenario: self.sc,
        }
    }
}
