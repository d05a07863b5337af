//! Node kinematics.
//!
//! Every model is expressed as a sequence of constant-velocity segments. A
//! [`MobilityState`] always carries the segment it is currently on, so
//! [`position_at`] is plain linear interpolation and containment in the
//! bounds box follows from both segment endpoints being inside it.

use std::collections::VecDeque;
use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::engine::RngStream;
use crate::error::MobilityError;
use crate::geom::{Bounds, Vec3};
use crate::scenario::{MobilityKind, Scenario};

const SEGMENT_EPS: f64 = 1e-9;

#[derive(Debug, Copy, Clone, PartialEq)]
pub struct NoiseStd {
    pub speed: f64,
    pub direction: f64,
    pub pitch: f64,
}

#[derive(Debug, Copy, Clone, PartialEq, Eq)]
pub enum RdPhase {
    Paused,
    Moving,
}

/// Which walls stopped the last random-direction leg.
#[derive(Debug, Copy, Clone, PartialEq, Eq, Default)]
pub struct WallHit {
    pub x: bool,
    pub y: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MobilityState {
    pub model: MobilityKind,
    /// Position at `segment_start`.
    pub position: Vec3,
    pub speed: f64,
    /// Heading in the horizontal plane, radians in `[0, 2pi)`.
    pub direction: f64,
    pub pitch: f64,
    pub mean_speed: f64,
    pub mean_direction: f64,
    pub mean_pitch: f64,
    pub alpha: f64,
    pub noise_std: NoiseStd,
    pub bounds: Bounds,
    pub pause_remaining: f64,
    pub pause_duration: f64,
    pub reflect: bool,
    pub rd_phase: RdPhase,
    pub last_wall: WallHit,
    /// True when planning the current segment had to mirror the heading.
    pub reflected: bool,
    pub segment_start: f64,
    pub segment_end: f64,
    pub velocity: Vec3,
}

fn wrap_angle(a: f64) -> f64 {
    let w = a.rem_euclid(TAU);
    // rem_euclid can return TAU itself for tiny negative inputs
    if w >= TAU {
        0.0
    } else {
        w
    }
}

fn velocity_of(speed: f64, direction: f64, pitch: f64) -> Vec3 {
    let (sd, cd) = direction.sin_cos();
    let (sp, cp) = pitch.sin_cos();
    Vec3::new(speed * cd * cp, speed * sd * cp, speed * sp)
}

impl MobilityState {
    pub fn constant(position: Vec3) -> Self {
        MobilityState {
            model: MobilityKind::ConstantPosition,
            position,
            speed: 0.0,
            direction: 0.0,
            pitch: 0.0,
            mean_speed: 0.0,
            mean_direction: 0.0,
            mean_pitch: 0.0,
            alpha: 1.0,
            noise_std: NoiseStd {
                speed: 0.0,
                direction: 0.0,
                pitch: 0.0,
            },
            bounds: Bounds {
                x_min: position.x,
                x_max: position.x,
                y_min: position.y,
                y_max: position.y,
                z_min: position.z,
                z_max: position.z,
            },
            pause_remaining: 0.0,
            pause_duration: 0.0,
            reflect: false,
            rd_phase: RdPhase::Paused,
            last_wall: WallHit::default(),
            reflected: false,
            segment_start: 0.0,
            segment_end: f64::INFINITY,
            velocity: Vec3::ZERO,
        }
    }

    /// Gauss-Markov state at `t0` with the first segment already planned.
    #[allow(clippy::too_many_arguments)]
    pub fn gauss_markov(
        position: Vec3,
        bounds: Bounds,
        mean_speed: f64,
        direction: f64,
        mean_pitch: f64,
        alpha: f64,
        noise_std: NoiseStd,
        dt: f64,
        t0: f64,
    ) -> Self {
        let direction = wrap_angle(direction);
        let mut s = MobilityState {
            model: MobilityKind::GaussMarkov,
            position: bounds.clamp(position),
            speed: mean_speed,
            direction,
            pitch: mean_pitch,
            mean_speed,
            mean_direction: direction,
            mean_pitch,
            alpha,
            noise_std,
            bounds,
            pause_remaining: 0.0,
            pause_duration: 0.0,
            reflect: false,
            rd_phase: RdPhase::Moving,
            last_wall: WallHit::default(),
            reflected: false,
            segment_start: t0,
            segment_end: t0 + dt,
            velocity: Vec3::ZERO,
        };
        s.plan_gm_segment(dt);
        s
    }

    /// Random-direction state paused (for zero time) at `position`; the first
    /// step draws a heading.
    pub fn random_direction_2d(
        position: Vec3,
        bounds: Bounds,
        speed: f64,
        pause: f64,
        reflect: bool,
        t0: f64,
    ) -> Self {
        MobilityState {
            model: MobilityKind::RandomDirection2D,
            position: bounds.clamp(position),
            speed,
            direction: 0.0,
            pitch: 0.0,
            mean_speed: speed,
            mean_direction: 0.0,
            mean_pitch: 0.0,
            alpha: 1.0,
            noise_std: NoiseStd {
                speed: 0.0,
                direction: 0.0,
                pitch: 0.0,
            },
            bounds,
            pause_remaining: 0.0,
            pause_duration: pause,
            reflect,
            rd_phase: RdPhase::Paused,
            last_wall: WallHit::default(),
            reflected: false,
            segment_start: t0,
            segment_end: t0,
            velocity: Vec3::ZERO,
        }
    }

    /// UAV state for a scenario at time zero. The Gauss-Markov heading (and
    /// mean heading) are drawn from `rng`.
    pub fn uav_from_scenario(sc: &Scenario, rng: &mut RngStream) -> Self {
        let start = sc.uav_initial_position();
        match sc.uav_mobility {
            MobilityKind::ConstantPosition => MobilityState::constant(start),
            MobilityKind::GaussMarkov => {
                let heading = rng.random::<f64>() * TAU;
                MobilityState::gauss_markov(
                    start,
                    sc.area,
                    sc.uav_mean_speed,
                    heading,
                    sc.gm_mean_pitch,
                    sc.gm_alpha,
                    NoiseStd {
                        speed: sc.gm_speed_std(),
                        direction: sc.gm_direction_std,
                        pitch: sc.gm_pitch_std,
                    },
                    sc.gm_timestep,
                    0.0,
                )
            }
            MobilityKind::RandomDirection2D => MobilityState::random_direction_2d(
                start,
                sc.area,
                sc.uav_mean_speed,
                sc.rd2d_pause,
                sc.rd2d_reflect,
                0.0,
            ),
        }
    }

    pub fn segment_end_position(&self) -> Vec3 {
        if self.segment_end.is_finite() {
            self.bounds
                .clamp(self.position + self.velocity * (self.segment_end - self.segment_start))
        } else {
            self.position
        }
    }

    // Velocity for the segment starting at `self.position`, mirrored off any
    // wall it would cross and shortened if it still would not fit.
    fn plan_gm_segment(&mut self, dt: f64) {
        let b = self.bounds;
        let mut v = velocity_of(self.speed, self.direction, self.pitch);
        let end = self.position + v * dt;
        self.reflected = false;
        if end.x < b.x_min || end.x > b.x_max {
            self.direction = wrap_angle(PI - self.direction);
            self.mean_direction = wrap_angle(PI - self.mean_direction);
            self.reflected = true;
        }
        if end.y < b.y_min || end.y > b.y_max {
            self.direction = wrap_angle(-self.direction);
            self.mean_direction = wrap_angle(-self.mean_direction);
            self.reflected = true;
        }
        if end.z < b.z_min || end.z > b.z_max {
            self.pitch = -self.pitch;
            self.mean_pitch = -self.mean_pitch;
            self.reflected = true;
        }
        if self.reflected {
            v = velocity_of(self.speed, self.direction, self.pitch);
        }
        let end = b.clamp(self.position + v * dt);
        self.velocity = (end - self.position) * (1.0 / dt);
    }

    fn time_to_wall(&self, v: Vec3) -> (f64, WallHit) {
        let b = &self.bounds;
        let p = self.position;
        let tx = if v.x > 0.0 {
            (b.x_max - p.x) / v.x
        } else if v.x < 0.0 {
            (b.x_min - p.x) / v.x
        } else {
            f64::INFINITY
        };
        let ty = if v.y > 0.0 {
            (b.y_max - p.y) / v.y
        } else if v.y < 0.0 {
            (b.y_min - p.y) / v.y
        } else {
            f64::INFINITY
        };
        let t = tx.min(ty);
        (
            t,
            WallHit {
                x: tx <= ty,
                y: ty <= tx,
            },
        )
    }
}

fn sample_normal(rng: &mut RngStream, std: f64) -> f64 {
    if std > 0.0 {
        Normal::new(0.0, std).expect("finite std").sample(rng)
    } else {
        0.0
    }
}

/// Advances a Gauss-Markov state by one timestep.
///
/// The position moves along the velocity planned from the pre-step speed,
/// heading and pitch; then each of the three follows
/// `x' = a*x + (1-a)*mean + sqrt(1-a^2)*noise`, and the next segment is
/// planned with reflection at the walls.
pub fn gauss_markov_step(s: &MobilityState, dt: f64, rng: &mut RngStream) -> MobilityState {
    debug_assert_eq!(s.model, MobilityKind::GaussMarkov);
    let mut n = s.clone();
    n.position = s.bounds.clamp(s.position + s.velocity * dt);
    let a = s.alpha;
    let k = (1.0 - a * a).max(0.0).sqrt();
    let xi_s = sample_normal(rng, s.noise_std.speed);
    let xi_d = sample_normal(rng, s.noise_std.direction);
    let xi_p = sample_normal(rng, s.noise_std.pitch);

    n.speed = (a * s.speed + (1.0 - a) * s.mean_speed + k * xi_s).max(0.0);
    // pull the mean heading to the branch nearest the current heading
    let mut mean_dir = s.mean_direction;
    if mean_dir - s.direction > PI {
        mean_dir -= TAU;
    } else if s.direction - mean_dir > PI {
        mean_dir += TAU;
    }
    n.direction = wrap_angle(a * s.direction + (1.0 - a) * mean_dir + k * xi_d);
    n.pitch = (a * s.pitch + (1.0 - a) * s.mean_pitch + k * xi_p).clamp(-FRAC_PI_2, FRAC_PI_2);

    n.segment_start = s.segment_start + dt;
    n.segment_end = n.segment_start + dt;
    n.plan_gm_segment(dt);
    n
}

/// Draws a heading uniform on `[0, 2pi)`, rejecting headings that would not
/// move the node into the interior from its current point.
pub fn draw_direction(s: &MobilityState, rng: &mut RngStream) -> f64 {
    for _ in 0..10_000 {
        let d = rng.random::<f64>() * TAU;
        let v = velocity_of(1.0, d, 0.0);
        let (t, _) = s.time_to_wall(v);
        if t > SEGMENT_EPS {
            return d;
        }
    }
    // unreachable for a box with positive area; head for the center
    let c = s.bounds.center() - s.position;
    wrap_angle(c.y.atan2(c.x))
}

/// Advances a random-direction state at the end of its current segment.
///
/// A finished pause draws a new heading and returns the exact time to the
/// next wall; a finished leg snaps to the wall and pauses. Zero speed yields
/// an infinite delay.
pub fn random_direction_2d_step(s: &MobilityState, rng: &mut RngStream) -> (MobilityState, f64) {
    debug_assert_eq!(s.model, MobilityKind::RandomDirection2D);
    let mut n = s.clone();
    let t = s.segment_end;
    match s.rd_phase {
        RdPhase::Paused => {
            n.position = s.position;
            n.direction = if s.reflect && (s.last_wall.x || s.last_wall.y) {
                let mut d = s.direction;
                if s.last_wall.x {
                    d = PI - d;
                }
                if s.last_wall.y {
                    d = -d;
                }
                wrap_angle(d)
            } else {
                draw_direction(s, rng)
            };
            n.speed = s.mean_speed;
            let v = velocity_of(n.speed, n.direction, 0.0);
            let (tau, wall) = n.time_to_wall(v);
            n.velocity = v;
            n.last_wall = wall;
            n.rd_phase = RdPhase::Moving;
            n.pause_remaining = 0.0;
            n.segment_start = t;
            n.segment_end = t + tau;
            (n, tau)
        }
        RdPhase::Moving => {
            let mut end = s.segment_end_position();
            let b = s.bounds;
            if s.last_wall.x {
                end.x = if s.velocity.x > 0.0 { b.x_max } else { b.x_min };
            }
            if s.last_wall.y {
                end.y = if s.velocity.y > 0.0 { b.y_max } else { b.y_min };
            }
            n.position = end;
            n.velocity = Vec3::ZERO;
            n.rd_phase = RdPhase::Paused;
            n.pause_remaining = s.pause_duration;
            n.segment_start = t;
            n.segment_end = t + s.pause_duration;
            (n, s.pause_duration)
        }
    }
}

/// Position on the current segment. Constant-position nodes answer for any time.
pub fn position_at(s: &MobilityState, t: f64) -> Result<Vec3, MobilityError> {
    if s.model == MobilityKind::ConstantPosition {
        return Ok(s.position);
    }
    let tol = SEGMENT_EPS * (1.0 + t.abs());
    if t < s.segment_start - tol || t > s.segment_end + tol {
        return Err(MobilityError::OutsideSegment {
            t,
            start: s.segment_start,
            end: s.segment_end,
        });
    }
    let dt = (t - s.segment_start).max(0.0);
    Ok(s.bounds.clamp(s.position + s.velocity * dt))
}

/// Bounded history of segments so positions slightly in the past (at a frame
/// start, say) remain answerable after the model has stepped.
#[derive(Debug, Clone)]
pub struct Track {
    history: VecDeque<MobilityState>,
}

impl Track {
    const DEPTH: usize = 8;

    pub fn new(state: MobilityState) -> Self {
        let mut history = VecDeque::with_capacity(Self::DEPTH);
        history.push_back(state);
        Track { history }
    }

    pub fn current(&self) -> &MobilityState {
        self.history.back().expect("track never empty")
    }

    pub fn push(&mut self, state: MobilityState) {
        if self.history.len() == Self::DEPTH {
            self.history.pop_front();
        }
        self.history.push_back(state);
    }

    pub fn position(&self, t: f64) -> Vec3 {
        for s in self.history.iter().rev() {
            if t >= s.segment_start || s.model == MobilityKind::ConstantPosition {
                return position_at(s, t.min(s.segment_end)).unwrap_or(s.position);
            }
        }
        self.history.front().expect("track never empty").position
    }
}
