//! Browser bindings for the simulator. Every entry point takes plain strings
//! or numbers and returns a JSON document, so the page needs no glue beyond
//! `JSON.parse`.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use uavsim::engine::rng_stream;
use uavsim::mobility::{gauss_markov_step, random_direction_2d_step, MobilityState, Track};
use uavsim::scenario::{parse_scenario, MobilityKind, Scenario};
use uavsim::sim::{run, SimOptions};

fn error(msg: impl std::fmt::Display) -> String {
    json!({ "error": msg.to_string() }).to_string()
}

fn scenario_from(config: &str) -> Result<Scenario, String> {
    let sc = parse_scenario(config).map_err(|e| e.to_string())?;
    sc.validate().map_err(|e| e.to_string())?;
    Ok(sc)
}

fn parse_trace(trace: &str) -> Vec<Value> {
    trace
        .lines()
        .filter_map(|l| {
            let v: Vec<f64> = l.split(' ').filter_map(|c| c.parse().ok()).collect();
            (v.len() == 6).then(|| json!([v[0], v[1], v[2], v[3]]))
        })
        .collect()
}

/// Runs one scenario given as `key = value` lines.
///
/// Returns the headline metrics, the sensor grid, per-sensor delivered
/// packets and the UAV trajectory as `[t, x, y, z]` points.
#[wasm_bindgen]
pub fn simulate(config: &str) -> String {
    let sc = match scenario_from(config) {
        Ok(sc) => sc,
        Err(e) => return error(e),
    };
    let rep = run(
        &sc,
        &SimOptions {
            mobility_trace: true,
            ..SimOptions::default()
        },
    );
    let rec = rep.record("browser");
    let trajectory = parse_trace(rep.mobility_trace.as_deref().unwrap_or(""));
    let sensors: Vec<Value> = sc
        .sensor_positions()
        .iter()
        .zip(&rep.flows)
        .map(|(p, f)| json!({ "x": p.x, "y": p.y, "rx": f.rx_packets, "tx": f.tx_packets }))
        .collect();
    json!({
        "access": rec.access,
        "throughput_bps": rec.throughput_bps,
        "avg_delay_pooled_s": rec.avg_delay_pooled_s,
        "avg_delay_eq2_s": rec.avg_delay_eq2_s,
        "tx_packets": rec.tx_packets,
        "rx_packets": rec.rx_packets,
        "dropped_packets": rec.dropped_packets,
        "collision_events": rec.collision_events,
        "area": [sc.area.x_min, sc.area.x_max, sc.area.y_min, sc.area.y_max],
        "max_range": sc.max_range,
        "sensors": sensors,
        "trajectory": trajectory,
    })
    .to_string()
}

/// Samples a UAV trajectory every `step` seconds without running the network.
///
/// `model` is `gauss_markov`, `random_direction_2d` or `constant_position`.
#[wasm_bindgen]
pub fn trajectory(
    model: &str,
    speed: f64,
    alpha: f64,
    seed: u64,
    duration: f64,
    step: f64,
) -> String {
    let mut sc = Scenario::default();
    let kind: MobilityKind = match model.parse() {
        Ok(k) => k,
        Err(e) => return error(e),
    };
    sc.uav_mobility = kind;
    sc.uav_mean_speed = speed;
    sc.gm_alpha = alpha;
    sc.seed = seed;
    if let Err(e) = sc.validate() {
        return error(e);
    }
    if !(duration > 0.0 && step > 0.0) || duration / step > 1e6 {
        return error("duration and step must be positive, at most 1e6 samples");
    }
    let mut rng = rng_stream(seed, "mobility");
    let mut track = Track::new(MobilityState::uav_from_scenario(&sc, &mut rng));
    let mut points = Vec::new();
    let mut k = 0u64;
    loop {
        let t = k as f64 * step;
        if t > duration {
            break;
        }
        loop {
            let cur = track.current();
            if kind == MobilityKind::ConstantPosition || cur.segment_end > t {
                break;
            }
            let next = match kind {
                MobilityKind::GaussMarkov => gauss_markov_step(cur, sc.gm_timestep, &mut rng),
                _ => random_direction_2d_step(cur, &mut rng).0,
            };
            track.push(next);
        }
        let p = track.position(t);
        points.push(json!([t, p.x, p.y, p.z]));
        k += 1;
    }
    json!({ "area": [sc.area.x_min, sc.area.x_max, sc.area.y_min, sc.area.y_max], "points": points }).to_string()
}

/// Throughput and pooled delay against sensor count, for Basic access and
/// RTS/CTS, on top of the scenario in `config`. `counts` is a comma list.
#[wasm_bindgen]
pub fn sweep_sensors(config: &str, counts: &str) -> String {
    let base = match scenario_from(config) {
        Ok(sc) => sc,
        Err(e) => return error(e),
    };
    let mut ns = Vec::new();
    for c in counts.split(',').map(str::trim).filter(|c| !c.is_empty()) {
        match c.parse::<usize>() {
            Ok(n) => ns.push(n),
            Err(_) => return error(format!("bad sensor count {c:?}")),
        }
    }
    let mut rows = Vec::new();
    for n in ns {
        let mut row = json!({ "n_sta": n });
        for (tag, threshold) in [("basic", 65535u32), ("rtscts", 0)] {
            let sc = Scenario {
                n_sta: n,
                rts_threshold: threshold,
                ..base.clone()
            };
            if let Err(e) = sc.validate() {
                return error(e);
            }
            let rep = run(&sc, &SimOptions::default());
            let rec = rep.record("sweep");
            row[tag] = json!({ "throughput_bps": rec.throughput_bps, "avg_delay_pooled_s": rec.avg_delay_pooled_s });
        }
        rows.push(row);
    }
    json!({ "rows": rows }).to_string()
}
