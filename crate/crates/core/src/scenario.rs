//! Experiment description: a flat `key = value` configuration, its defaults
//! and validation, sensor grid placement, and sweep expansion.

use std::fmt;
use std::str::FromStr;

use crate::error::ConfigError;
use crate::geom::{Bounds, Vec3};

/// UAV trajectory model. Sensors always use [`MobilityKind::ConstantPosition`].
#[derive(Debug, Copy, Clone, PartialEq, Eq, Hash)]
pub enum MobilityKind {
    ConstantPosition,
    GaussMarkov,
    RandomDirection2D,
}

impl MobilityKind {
    /// Short tag used in CSV output.
    pub fn tag(self) -> &'static str {
        match self {
            MobilityKind::ConstantPosition => "const",
            MobilityKind::GaussMarkov => "gm",
            MobilityKind::RandomDirection2D => "rd2d",
        }
    }
}

impl FromStr for MobilityKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "const" | "constant" | "constant_position" => Ok(MobilityKind::ConstantPosition),
            "gm" | "gauss_markov" | "gaussmarkov" => Ok(MobilityKind::GaussMarkov),
            "rd2d" | "random_direction_2d" | "random_direction" => {
                Ok(MobilityKind::RandomDirection2D)
            }
            _ => Err("expected constant_position, gauss_markov or random_direction_2d".into()),
        }
    }
}

impl fmt::Display for MobilityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MobilityKind::ConstantPosition => "constant_position",
            MobilityKind::GaussMarkov => "gauss_markov",
            MobilityKind::RandomDirection2D => "random_direction_2d",
        })
    }
}

/// The only PHY rate modelled (OFDM, 48 data bits per 4 us symbol).
pub const PHY_RATE_BPS: f64 = 12e6;

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub n_sta: usize,
    pub sta_grid_spacing: f64,
    pub area: Bounds,
    pub uav_mobility: MobilityKind,
    pub uav_mean_speed: f64,
    /// Initial UAV coordinates; `None` means the center of the corresponding axis.
    pub uav_x: Option<f64>,
    pub uav_y: Option<f64>,
    pub uav_z: Option<f64>,
    pub gm_alpha: f64,
    pub gm_timestep: f64,
    /// `None` means 10% of the mean speed.
    pub gm_speed_std: Option<f64>,
    pub gm_direction_std: f64,
    pub gm_pitch_std: f64,
    pub gm_mean_pitch: f64,
    pub rd2d_pause: f64,
    /// Mirror the heading at the boundary instead of drawing a new one.
    pub rd2d_reflect: bool,
    pub max_range: f64,
    pub rts_threshold: u32,
    pub data_rate_phy: f64,
    pub traffic_rate_per_sta: f64,
    pub payload_size: u32,
    pub on_duration: f64,
    pub off_duration: f64,
    pub traffic_start: f64,
    /// Offset each source's first packet by a uniform fraction of its period.
    pub traffic_jitter: bool,
    pub sim_time: f64,
    pub seed: u64,
    pub beacon_interval: f64,
    pub eifs: bool,
    pub queue_capacity: usize,
    pub queue_max_delay: f64,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            n_sta: 25,
            sta_grid_spacing: 50.0,
            area: Bounds {
                x_min: 0.0,
                x_max: 400.0,
                y_min: 0.0,
                y_max: 400.0,
                z_min: 20.0,
                z_max: 50.0,
            },
            uav_mobility: MobilityKind::GaussMarkov,
            uav_mean_speed: 50.0,
            uav_x: None,
            uav_y: None,
            uav_z: None,
            gm_alpha: 0.85,
            gm_timestep: 1.0,
            gm_speed_std: None,
            gm_direction_std: 0.2,
            gm_pitch_std: 0.02,
            gm_mean_pitch: 0.0,
            rd2d_pause: 0.5,
            rd2d_reflect: false,
            max_range: 100.0,
            rts_threshold: 65535,
            data_rate_phy: PHY_RATE_BPS,
            traffic_rate_per_sta: 6e6,
            payload_size: 512,
            on_duration: 1.0,
            off_duration: 0.0,
            traffic_start: 0.0,
            traffic_jitter: true,
            sim_time: 30.0,
            seed: 1,
            beacon_interval: 0.1,
            eifs: true,
            queue_capacity: 500,
            queue_max_delay: 0.5,
        }
    }
}

/// Every recognised configuration key, in documentation order.
pub const KEYS: &[&str] = &[
    "n_sta",
    "sta_grid_spacing",
    "area",
    "uav_mobility",
    "uav_mean_speed",
    "uav_x",
    "uav_y",
    "uav_z",
    "gm_alpha",
    "gm_timestep",
    "gm_speed_std",
    "gm_direction_std",
    "gm_pitch_std",
    "gm_mean_pitch",
    "rd2d_pause",
    "rd2d_reflect",
    "max_range",
    "rts_threshold",
    "data_rate_phy",
    "traffic_rate_per_sta",
    "payload_size",
    "on_duration",
    "off_duration",
    "traffic_start",
    "traffic_jitter",
    "sim_time",
    "seed",
    "beacon_interval",
    "eifs",
    "queue_capacity",
    "queue_max_delay",
];

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: fmt::Display,
{
    value.parse::<T>().map_err(|e| ConfigError::BadValue {
        key: key.to_string(),
        value: value.to_string(),
        msg: e.to_string(),
    })
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value.to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(ConfigError::BadValue {
            key: key.into(),
            value: value.into(),
            msg: "expected a boolean".into(),
        }),
    }
}

fn parse_opt(key: &str, value: &str) -> Result<Option<f64>, ConfigError> {
    if value.eq_ignore_ascii_case("auto") || value.is_empty() {
        Ok(None)
    } else {
        parse_num(key, value).map(Some)
    }
}

impl Scenario {
    /// Assigns one field from its textual form. Does not validate cross-field invariants.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let v = value.trim();
        match key {
            "n_sta" => self.n_sta = parse_num(key, v)?,
            "sta_grid_spacing" => self.sta_grid_spacing = parse_num(key, v)?,
            "area" => {
                let parts: Vec<&str> = v.split(',').map(str::trim).collect();
                if parts.len() != 6 {
                    return Err(ConfigError::BadValue {
                        key: key.into(),
                        value: v.into(),
                        msg: "expected x_min,x_max,y_min,y_max,z_min,z_max".into(),
                    });
                }
                let mut n = [0.0; 6];
                for (slot, p) in n.iter_mut().zip(parts) {
                    *slot = parse_num(key, p)?;
                }
                self.area = Bounds {
                    x_min: n[0],
                    x_max: n[1],
                    y_min: n[2],
                    y_max: n[3],
                    z_min: n[4],
                    z_max: n[5],
                };
            }
            "uav_mobility" => {
                self.uav_mobility = v.parse().map_err(|msg| ConfigError::BadValue {
                    key: key.into(),
                    value: v.into(),
                    msg,
                })?
            }
            "uav_mean_speed" => self.uav_mean_speed = parse_num(key, v)?,
            "uav_x" => self.uav_x = parse_opt(key, v)?,
            "uav_y" => self.uav_y = parse_opt(key, v)?,
            "uav_z" => self.uav_z = parse_opt(key, v)?,
            "gm_alpha" => self.gm_alpha = parse_num(key, v)?,
            "gm_timestep" => self.gm_timestep = parse_num(key, v)?,
            "gm_speed_std" => self.gm_speed_std = parse_opt(key, v)?,
            "gm_direction_std" => self.gm_direction_std = parse_num(key, v)?,
            "gm_pitch_std" => self.gm_pitch_std = parse_num(key, v)?,
            "gm_mean_pitch" => self.gm_mean_pitch = parse_num(key, v)?,
            "rd2d_pause" => self.rd2d_pause = parse_num(key, v)?,
            "rd2d_reflect" => self.rd2d_reflect = parse_bool(key, v)?,
            "max_range" => self.max_range = parse_num(key, v)?,
            "rts_threshold" => self.rts_threshold = parse_num(key, v)?,
            "data_rate_phy" => self.data_rate_phy = parse_num(key, v)?,
            "traffic_rate_per_sta" => self.traffic_rate_per_sta = parse_num(key, v)?,
            "payload_size" => self.payload_size = parse_num(key, v)?,
            "on_duration" => self.on_duration = parse_num(key, v)?,
            "off_duration" => self.off_duration = parse_num(key, v)?,
            "traffic_start" => self.traffic_start = parse_num(key, v)?,
            "traffic_jitter" => self.traffic_jitter = parse_bool(key, v)?,
            "sim_time" => self.sim_time = parse_num(key, v)?,
            "seed" => self.seed = parse_num(key, v)?,
            "beacon_interval" => self.beacon_interval = parse_num(key, v)?,
            "eifs" => self.eifs = parse_bool(key, v)?,
            "queue_capacity" => self.queue_capacity = parse_num(key, v)?,
            "queue_max_delay" => self.queue_max_delay = parse_num(key, v)?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Applies `key=value` override strings, as given on the command line.
    pub fn apply_overrides<S: AsRef<str>>(&mut self, overrides: &[S]) -> Result<(), ConfigError> {
        for (i, o) in overrides.iter().enumerate() {
            let o = o.as_ref();
            let (k, v) = o.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                msg: format!("override `{o}` is not key=value"),
            })?;
            self.set(k.trim(), v)?;
        }
        self.validate()
    }

    // negated comparisons also reject NaN
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), ConfigError> {
        let dom = |msg: String| Err(ConfigError::Domain(msg));
        let a = &self.area;
        if !(a.x_min < a.x_max && a.y_min < a.y_max && a.z_min <= a.z_max) {
            return dom("area bounds must satisfy min < max".into());
        }
        if !(self.sim_time > 0.0) {
            return dom(format!("sim_time must be > 0, got {}", self.sim_time));
        }
        if !(0.0..=1.0).contains(&self.gm_alpha) {
            return dom(format!(
                "gm_alpha must lie in [0, 1], got {}",
                self.gm_alpha
            ));
        }
        if !(self.gm_timestep > 0.0) {
            return dom("gm_timestep must be > 0".into());
        }
        if !(self.max_range > 0.0) {
            return dom(format!("max_range must be > 0, got {}", self.max_range));
        }
        if self.rts_threshold > 65535 {
            return dom(format!(
                "rts_threshold must lie in [0, 65535], got {}",
                self.rts_threshold
            ));
        }
        if self.data_rate_phy != PHY_RATE_BPS {
            return dom(format!(
                "data_rate_phy is fixed at {PHY_RATE_BPS}, got {}",
                self.data_rate_phy
            ));
        }
        if !(self.traffic_rate_per_sta > 0.0) {
            return dom("traffic_rate_per_sta must be > 0".into());
        }
        if self.payload_size == 0 {
            return dom("payload_size must be > 0".into());
        }
        if !(self.uav_mean_speed >= 0.0) || !self.uav_mean_speed.is_finite() {
            return dom("uav_mean_speed must be a finite value >= 0".into());
        }
        for (name, v) in [
            ("gm_direction_std", self.gm_direction_std),
            ("gm_pitch_std", self.gm_pitch_std),
            ("rd2d_pause", self.rd2d_pause),
            ("off_duration", self.off_duration),
            ("traffic_start", self.traffic_start),
            ("sta_grid_spacing", self.sta_grid_spacing),
        ] {
            if !(v >= 0.0) {
                return dom(format!("{name} must be >= 0, got {v}"));
            }
        }
        if let Some(s) = self.gm_speed_std {
            if !(s >= 0.0) {
                return dom(format!("gm_speed_std must be >= 0, got {s}"));
            }
        }
        if !(self.on_duration > 0.0) {
            return dom("on_duration must be > 0".into());
        }
        if !(self.beacon_interval > 0.0) {
            return dom("beacon_interval must be > 0".into());
        }
        if self.queue_capacity == 0 || !(self.queue_max_delay > 0.0) {
            return dom("queue_capacity and queue_max_delay must be > 0".into());
        }
        if self.traffic_start >= self.sim_time {
            return dom("traffic_start must precede sim_time".into());
        }
        if let Some(p) = self
            .sensor_positions()
            .into_iter()
            .find(|p| !a.contains_xy(*p))
        {
            return dom(format!(
                "sensor grid does not fit the area footprint (sensor at {:.1},{:.1})",
                p.x, p.y
            ));
        }
        let start = self.uav_initial_position();
        if !a.contains(start) {
            return dom(format!(
                "UAV start ({}, {}, {}) lies outside the area",
                start.x, start.y, start.z
            ));
        }
        Ok(())
    }

    /// Row-major `k x k` lattice with `k = ceil(sqrt(n))`, centered in the
    /// footprint, at ground level.
    pub fn sensor_positions(&self) -> Vec<Vec3> {
        let n = self.n_sta;
        if n == 0 {
            return Vec::new();
        }
        let k = (n as f64).sqrt().ceil() as usize;
        let k = if k * k < n { k + 1 } else { k };
        let c = self.area.center();
        let half = (k as f64 - 1.0) / 2.0;
        (0..n)
            .map(|i| {
                let row = (i / k) as f64;
                let col = (i % k) as f64;
                Vec3::new(
                    c.x + (col - half) * self.sta_grid_spacing,
                    c.y + (row - half) * self.sta_grid_spacing,
                    0.0,
                )
            })
            .collect()
    }

    pub fn uav_initial_position(&self) -> Vec3 {
        let c = self.area.center();
        Vec3::new(
            self.uav_x.unwrap_or(c.x),
            self.uav_y.unwrap_or(c.y),
            self.uav_z.unwrap_or(c.z),
        )
    }

    pub fn gm_speed_std(&self) -> f64 {
        self.gm_speed_std.unwrap_or(0.1 * self.uav_mean_speed)
    }

    /// DATA MPDU size: payload plus MAC, LLC/SNAP, IP and UDP overhead.
    pub fn data_mpdu_bytes(&self) -> u32 {
        self.payload_size + crate::phy::DATA_OVERHEAD_BYTES
    }
}

/// Parses a configuration document.
///
/// One `key = value` per line; `#` starts a comment. A line may also carry
/// several whitespace-separated `key=value` tokens. Omitted keys keep their
/// defaults and the result is validated.
pub fn parse_scenario(text: &str) -> Result<Scenario, ConfigError> {
    let mut sc = Scenario::default();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let pairs: Vec<(String, String)> = if line.matches('=').count() == 1 {
            let (k, v) = line.split_once('=').expect("one '='");
            vec![(k.trim().to_string(), v.trim().to_string())]
        } else {
            let mut out = Vec::new();
            for tok in line.split_whitespace() {
                let (k, v) = tok.split_once('=').ok_or_else(|| ConfigError::Syntax {
                    line: line_no,
                    msg: format!("expected key=value, found `{tok}`"),
                })?;
                out.push((k.to_string(), v.to_string()));
            }
            out
        };
        for (k, v) in pairs {
            if k.is_empty() {
                return Err(ConfigError::Syntax {
                    line: line_no,
                    msg: "missing key before '='".into(),
                });
            }
            if v.is_empty() {
                return Err(ConfigError::Syntax {
                    line: line_no,
                    msg: format!("missing value for `{k}`"),
                });
            }
            sc.set(&k, &v).map_err(|e| match e {
                ConfigError::UnknownKey(_) => ConfigError::Syntax {
                    line: line_no,
                    msg: e.to_string(),
                },
                other => other,
            })?;
        }
    }
    sc.validate()?;
    Ok(sc)
}

/// One concrete run produced by [`expand_sweep`].
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRun {
    pub point: usize,
    pub replication: u32,
    pub scenario: Scenario,
}

/// Expands a one-axis sweep. Output is value-major, then replication; run
/// `r` of each point uses seed `base.seed + r`.
pub fn expand_sweep<S: AsRef<str>>(
    base: &Scenario,
    param: &str,
    values: &[S],
    replications: u32,
) -> Result<Vec<SweepRun>, ConfigError> {
    if param == "seed" {
        return Err(ConfigError::NotSweepable(param.into()));
    }
    if !KEYS.contains(&param) {
        return Err(ConfigError::UnknownKey(param.into()));
    }
    let mut out = Vec::with_capacity(values.len() * replications as usize);
    for (point, value) in values.iter().enumerate() {
        let mut sc = base.clone();
        sc.set(param, value.as_ref())?;
        sc.validate()?;
        for r in 0..replications {
            let mut run = sc.clone();
            run.seed = base.seed.wrapping_add(u64::from(r));
            out.push(SweepRun {
                point,
                replication: r,
                scenario: run,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inline_tokens_override_defaults() {
        let sc =
            parse_scenario("n_sta=25 uav_mobility=gauss_markov uav_mean_speed=50 rts_threshold=0")
                .unwrap();
        assert_eq!(sc.n_sta, 25);
        assert_eq!(sc.uav_mobility, MobilityKind::GaussMarkov);
        assert_eq!(sc.uav_mean_speed, 50.0);
        assert_eq!(sc.rts_threshold, 0);
        let rest = Scenario {
            n_sta: 25,
            uav_mobility: MobilityKind::GaussMarkov,
            uav_mean_speed: 50.0,
            rts_threshold: 0,
            ..Scenario::default()
        };
        assert_eq!(sc, rest);
    }

    #[test]
    fn empty_document_is_default() {
        assert_eq!(parse_scenario("").unwrap(), Scenario::default());
        assert_eq!(
            parse_scenario("# only a comment\n\n   \n").unwrap(),
            Scenario::default()
        );
    }

    #[test]
    fn one_pair_per_line_with_comments() {
        let sc =
            parse_scenario("n_sta = 4   # four sensors\nsim_time = 2\narea = 0,200,0,200,10,30\n")
                .unwrap();
        assert_eq!(sc.n_sta, 4);
        assert_eq!(sc.sim_time, 2.0);
        assert_eq!(sc.area.x_max, 200.0);
        assert_eq!(sc.area.z_min, 10.0);
    }

    #[test]
    fn alpha_out_of_range_is_domain_error() {
        assert!(matches!(
            parse_scenario("gm_alpha=2"),
            Err(ConfigError::Domain(_))
        ));
        assert!(matches!(
            parse_scenario("gm_alpha=1.5"),
            Err(ConfigError::Domain(_))
        ));
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let err = parse_scenario("n_sta = 3\nthis line is junk\n").unwrap_err();
        assert_eq!(
            err,
            ConfigError::Syntax {
                line: 2,
                msg: "expected key=value, found `this`".into()
            }
        );
        let err = parse_scenario("\n\nbogus = 1").unwrap_err();
        assert!(matches!(err, ConfigError::Syntax { line: 3, .. }));
    }

    #[test]
    fn bad_values_rejected() {
        assert!(matches!(
            parse_scenario("n_sta = many"),
            Err(ConfigError::BadValue { .. })
        ));
        assert!(parse_scenario("rts_threshold = 70000").is_err());
        assert!(parse_scenario("sim_time = 0").is_err());
        assert!(parse_scenario("max_range = 0").is_err());
        assert!(parse_scenario("data_rate_phy = 6e6").is_err());
        assert!(parse_scenario("uav_mobility = teleport").is_err());
    }

    #[test]
    fn grid_is_centered_row_major() {
        let sc = Scenario {
            n_sta: 5,
            ..Scenario::default()
        };
        let p = sc.sensor_positions();
        assert_eq!(p.len(), 5);
        assert_eq!(p[0], Vec3::new(150.0, 150.0, 0.0));
        assert_eq!(p[1], Vec3::new(200.0, 150.0, 0.0));
        assert_eq!(p[2], Vec3::new(250.0, 150.0, 0.0));
        assert_eq!(p[3], Vec3::new(150.0, 200.0, 0.0));
        assert_eq!(p[4], Vec3::new(200.0, 200.0, 0.0));
        assert_eq!(p, sc.sensor_positions());
    }

    #[test]
    fn single_sensor_sits_at_center() {
        let sc = Scenario {
            n_sta: 1,
            ..Scenario::default()
        };
        assert_eq!(sc.sensor_positions(), vec![Vec3::new(200.0, 200.0, 0.0)]);
    }

    #[test]
    fn oversized_grid_rejected() {
        assert!(parse_scenario("n_sta = 100\nsta_grid_spacing = 50").is_err());
        assert!(parse_scenario("n_sta = 60\nsta_grid_spacing = 50").is_ok());
    }

    #[test]
    fn sweep_over_sensor_counts() {
        let values = ["1", "10", "20", "30", "40", "50", "60"];
        let runs = expand_sweep(&Scenario::default(), "n_sta", &values, 1).unwrap();
        assert_eq!(runs.len(), 7);
        let ns: Vec<usize> = runs.iter().map(|r| r.scenario.n_sta).collect();
        assert_eq!(ns, vec![1, 10, 20, 30, 40, 50, 60]);
    }

    #[test]
    fn empty_sweep_is_empty() {
        let none: [&str; 0] = [];
        assert!(expand_sweep(&Scenario::default(), "n_sta", &none, 3)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn replications_use_consecutive_seeds() {
        let base = Scenario {
            seed: 11,
            ..Scenario::default()
        };
        let runs =
            expand_sweep(&base, "traffic_rate_per_sta", &["0.5e6", "3e6", "6e6"], 3).unwrap();
        assert_eq!(runs.len(), 9);
        let got: Vec<(usize, u64, f64)> = runs
            .iter()
            .map(|r| (r.point, r.scenario.seed, r.scenario.traffic_rate_per_sta))
            .collect();
        assert_eq!(
            got,
            vec![
                (0, 11, 0.5e6),
                (0, 12, 0.5e6),
                (0, 13, 0.5e6),
                (1, 11, 3e6),
                (1, 12, 3e6),
                (1, 13, 3e6),
                (2, 11, 6e6),
                (2, 12, 6e6),
                (2, 13, 6e6),
            ]
        );
    }

    #[test]
    fn unknown_sweep_parameter() {
        assert!(matches!(
            expand_sweep(&Scenario::default(), "warp_factor", &["1"], 1),
            Err(ConfigError::UnknownKey(_))
        ));
        assert!(matches!(
            expand_sweep(&Scenario::default(), "seed", &["1"], 1),
            Err(ConfigError::NotSweepable(_))
        ));
    }
}
