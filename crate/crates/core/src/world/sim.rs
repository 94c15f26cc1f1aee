//! Kinematic traverse simulation.
//!
//! The vehicle follows a waypoint path with a pure-pursuit controller. The
//! vertical acceleration is Gaussian around `g` with a standard deviation
//! that grows with terrain roughness, speed and turn rate:
//!
//! `σ = σ₀ (1 + ρ̃ (1 + k_v |v| + k_ω |ω|))`
//!
//! where `ρ̃` is the cell roughness passed through a first-order lag with
//! time constant `suspension_tau`, so the response carries some memory of the
//! terrain just driven over.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::World;
use crate::dataset::{OdomSample, OdomTrace};
use crate::error::{Error, Result};
use crate::risk::{ImuSample, ImuTrace, GRAVITY};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimParams {
    pub sigma0: f64,
    pub k_v: f64,
    pub k_omega: f64,
    /// Gain on deceleration (braking pitches the body onto the front axle).
    pub k_brake: f64,
    pub suspension_tau: f64,
    pub imu_rate: f64,
    pub odom_period: f64,
    pub lookahead: f64,
    pub max_yaw_rate: f64,
    pub goal_tolerance: f64,
    /// Hard stop in seconds; `None` allows three times the nominal path time.
    pub max_duration: Option<f64>,
    pub seed: u64,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            sigma0: 0.05,
            k_v: 0.5,
            k_omega: 1.0,
            k_brake: 2.0,
            suspension_tau: 0.3,
            imu_rate: 100.0,
            odom_period: 0.1,
            lookahead: 0.8,
            max_yaw_rate: 1.2,
            goal_tolerance: 0.3,
            max_duration: None,
            seed: 0,
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("sigma0", self.sigma0),
            ("imu_rate", self.imu_rate),
            ("odom_period", self.odom_period),
            ("lookahead", self.lookahead),
            ("max_yaw_rate", self.max_yaw_rate),
            ("goal_tolerance", self.goal_tolerance),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("sim.{name} must be > 0, got {v}")));
            }
        }
        for (name, v) in [
            ("k_v", self.k_v),
            ("k_omega", self.k_omega),
            ("k_brake", self.k_brake),
            ("suspension_tau", self.suspension_tau),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("sim.{name} must be >= 0, got {v}")));
            }
        }
        let ratio = self.odom_period * self.imu_rate;
        if (ratio - ratio.round()).abs() > 1e-9 || ratio < 1.0 {
            return Err(Error::Config("sim.odom_period must be a whole number of IMU periods".into()));
        }
        Ok(())
    }

    /// Vertical-acceleration standard deviation for the given state.
    /// `accel` is the longitudinal acceleration; only its braking part
    /// counts.
    pub fn sigma(&self, roughness: f64, speed: f64, yaw_rate: f64, accel: f64) -> f64 {
        let excitation = 1.0 + self.k_v * speed.abs() + self.k_omega * yaw_rate.abs() + self.k_brake * (-accel).max(0.0);
        self.sigma0 * (1.0 + roughness * excitation)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpeedProfile {
    Constant { speed: f64 },
    /// Speed oscillating between `min` and `max` with the given period.
    Sinusoid { min: f64, max: f64, period: f64, phase: f64 },
}

impl SpeedProfile {
    pub fn at(&self, t: f64) -> f64 {
        match *self {
            SpeedProfile::Constant { speed } => speed,
            SpeedProfile::Sinusoid { min, max, period, phase } => {
                let s = 0.5 * (1.0 - (std::f64::consts::TAU * t / period + phase).cos());
                min + (max - min) * s
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            SpeedProfile::Constant { speed } => speed,
            SpeedProfile::Sinusoid { min, max, .. } => 0.5 * (min + max),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match *self {
            SpeedProfile::Constant { speed } => speed > 0.0 && speed.is_finite(),
            SpeedProfile::Sinusoid { min, max, period, phase } => {
                min > 0.0 && max >= min && max.is_finite() && period > 0.0 && phase.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid speed profile {self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Traverse {
    pub odom: OdomTrace,
    pub imu: ImuTrace,
    /// Position where the vehicle entered an untraversable cell or left the
    /// world; the traces end there.
    pub collision: Option<[f64; 2]>,
    pub reached_goal: bool,
}

impl Traverse {
    pub fn duration(&self) -> f64 {
        self.imu.samples().last().map_or(0.0, |s| s.t)
    }

    /// Length of the driven polyline sampled at the odometry rate.
    pub fn path_length(&self) -> f64 {
        self.odom.samples().windows(2).map(|w| (w[1].position[0] - w[0].position[0]).hypot(w[1].position[1] - w[0].position[1])).sum()
    }
}

/// Index of the path vertex that starts the segment closest to `p`, searched
/// forward from `from` so the follower never skips back.
fn advance(path: &[[f64; 2]], from: usize, p: [f64; 2]) -> usize {
    let mut best = (f64::INFINITY, from);
    for i in from..path.len().saturating_sub(1).min(from + 50) {
        let d = segment_distance(path[i], path[i + 1], p);
        if d < best.0 - 1e-12 {
            best = (d, i);
        }
    }
    best.1
}

fn segment_distance(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 { (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
    (a[0] + t * dx - p[0]).hypot(a[1] + t * dy - p[1])
}

/// Point `lookahead` meters further along the path than the projection of
/// `p` on segment `seg`.
fn carrot(path: &[[f64; 2]], seg: usize, p: [f64; 2], lookahead: f64) -> [f64; 2] {
    let (a, b) = (path[seg], path[seg + 1]);
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len = dx.hypot(dy);
    let t = if len > 0.0 { (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len).clamp(0.0, len) } else { 0.0 };
    let mut remaining = lookahead + t;
    for i in seg..path.len() - 1 {
        let (a, b) = (path[i], path[i + 1]);
        let l = (b[0] - a[0]).hypot(b[1] - a[1]);
        if remaining <= l && l > 0.0 {
            let f = remaining / l;
            return [a[0] + f * (b[0] - a[0]), a[1] + f * (b[1] - a[1])];
        }
        remaining -= l;
    }
    path[path.len() - 1]
}

fn wrap_angle(a: f64) -> f64 {
    (a + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU) - std::f64::consts::PI
}

/// Drives `path` (at least two waypoints, all inside the world) and records
/// odometry and IMU traces.
pub fn simulate_traverse(world: &World, path: &[[f64; 2]], speed: &SpeedProfile, params: &SimParams) -> Result<Traverse> {
    params.validate()?;
    speed.validate()?;
    if path.len() < 2 {
        return Err(Error::invalid("a traverse needs at least two waypoints"));
    }
    if let Some(p) = path.iter().find(|p| !world.contains(p[0], p[1])) {
        return Err(Error::OutsideWorld { x: p[0], y: p[1] });
    }
    let path_len: f64 = path.windows(2).map(|w| (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1])).sum();
    let dt = 1.0 / params.imu_rate;
    let odom_every = (params.odom_period * params.imu_rate).round() as usize;
    let max_steps = (params.max_duration.unwrap_or(3.0 * path_len / speed.mean() + 5.0) / dt).ceil() as usize;
    let goal = path[path.len() - 1];
    let lag = if params.suspension_tau > 0.0 { 1.0 - (-dt / params.suspension_tau).exp() } else { 1.0 };
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let mut pos = path[0];
    let mut yaw = (path[1][1] - path[0][1]).atan2(path[1][0] - path[0][0]);
    let mut v = 0.0;
    let mut omega = 0.0;
    let mut seg = 0;
    let mut rho = world.roughness_at(pos[0], pos[1]).unwrap_or(0.0);
    let mut imu = Vec::with_capacity(max_steps.min(1 << 20));
    let mut odom = Vec::with_capacity(max_steps / odom_every + 1);
    let mut collision = None;
    let mut reached_goal = false;

    for step in 0..=max_steps {
        let t = step as f64 * dt;
        let z = world.height_at(pos[0], pos[1]);
        let (s, c) = yaw.sin_cos();
        let sample = OdomSample { t, position: [pos[0], pos[1], z], yaw, velocity: [v * c, v * s, 0.0], yaw_rate: omega };
        if step % odom_every == 0 {
            odom.push(sample);
        }
        let stop = if !world.contains(pos[0], pos[1]) || !world.is_traversable_at(pos[0], pos[1]) {
            collision = Some(pos);
            true
        } else if (pos[0] - goal[0]).hypot(pos[1] - goal[1]) <= params.goal_tolerance {
            reached_goal = true;
            true
        } else {
            step == max_steps
        };
        if stop {
            // Close the odometry trace at the final pose.
            if step % odom_every != 0 {
                odom.push(sample);
            }
            break;
        }

        seg = advance(path, seg, pos);
        let target = carrot(path, seg, pos, params.lookahead);
        let heading_err = wrap_angle((target[1] - pos[1]).atan2(target[0] - pos[0]) - yaw);
        let v_cmd = speed.at(t);
        // Pure pursuit curvature 2 sin(α) / L_d, with a rate limit.
        let kappa = 2.0 * heading_err.sin() / params.lookahead;
        let new_omega = (v_cmd * kappa).clamp(-params.max_yaw_rate, params.max_yaw_rate);
        let accel = (v_cmd - v) / dt;
        v = v_cmd;
        omega = new_omega;

        let cell_rho = world.roughness_at(pos[0], pos[1]).unwrap_or(rho);
        rho += lag * (cell_rho - rho);
        let sigma = params.sigma(rho, v, omega, accel);
        let n: f64 = StandardNormal.sample(&mut rng);
        imu.push(ImuSample { t: t + dt, accel: [accel, v * omega, GRAVITY + sigma * n], gyro: [0.0, 0.0, omega] });

        yaw = wrap_angle(yaw + omega * dt);
        pos = [pos[0] + v * yaw.cos() * dt, pos[1] + v * yaw.sin() * dt];
    }

    Ok(Traverse { odom: OdomTrace::new(odom)?, imu: ImuTrace::new(imu)?, collision, reached_goal })
}

/// IMU trace of straight driving at `speed` over uniform terrain of
/// roughness `roughness`, used as the steady reference for labelling.
pub fn simulate_steady(roughness: f64, speed: f64, duration: f64, params: &SimParams) -> Result<ImuTrace> {
    params.validate()?;
    if !(duration > 0.0) || !roughness.is_finite() || roughness < 0.0 {
        return Err(Error::invalid("steady run needs a positive duration and finite roughness"));
    }
    let n = (duration * params.imu_rate).round() as usize;
    let sigma = params.sigma(roughness, speed, 0.0, 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let samples = (1..=n)
        .map(|i| {
            let z: f64 = StandardNormal.sample(&mut rng);
            ImuSample::vertical(i as f64 / params.imu_rate, GRAVITY + sigma * z)
        })
        .collect();
    ImuTrace::new(samples)
}
