//! Traversability labels from IMU vertical acceleration.
//!
//! Deviations of `a_z` from a steady-motion Gaussian are folded onto the
//! half-normal `|a_z - μ| / σ`; the label is the risk level `α` at which the
//! observed value is the value-at-risk, i.e. the two-sided tail probability
//! `α = P[|Z| > |a_z - μ| / σ] = erfc(|a_z - μ| / (σ √2))`. A reading at the
//! mean gives `α = 1` (lowest cost), large excursions drive `α` towards 0.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

pub const GRAVITY: f64 = 9.81;
pub const LABEL_FRAMES: usize = 5;
pub const MIN_STEADY_SAMPLES: usize = 200;
pub const MIN_STEADY_STD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImuSample {
    pub t: f64,
    pub accel: [f64; 3],
    pub gyro: [f64; 3],
}

impl ImuSample {
    pub fn vertical(t: f64, a_z: f64) -> Self {
        Self { t, accel: [0.0, 0.0, a_z], gyro: [0.0; 3] }
    }

    pub fn a_z(&self) -> f64 {
        self.accel[2]
    }
}

/// Time-ordered IMU samples with strictly increasing timestamps.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ImuTrace {
    samples: Vec<ImuSample>,
}

impl ImuTrace {
    pub fn new(samples: Vec<ImuSample>) -> Result<Self> {
        for (i, s) in samples.iter().enumerate() {
            if !s.t.is_finite() || !s.accel.iter().chain(&s.gyro).all(|v| v.is_finite()) {
                return Err(Error::invalid(format!("IMU sample {i} is not finite")));
            }
            if i > 0 && s.t <= samples[i - 1].t {
                return Err(Error::invalid(format!("IMU timestamps not strictly increasing at sample {i}")));
            }
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[ImuSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Number of samples with `t_i <= t`.
    pub fn count_until(&self, t: f64) -> usize {
        self.samples.partition_point(|s| s.t <= t)
    }

    pub fn to_ascii(&self) -> String {
        let mut out = String::with_capacity(self.samples.len() * 64);
        for s in &self.samples {
            let [ax, ay, az] = s.accel;
            let [wx, wy, wz] = s.gyro;
            let _ = writeln!(out, "{} {ax} {ay} {az} {wx} {wy} {wz}", s.t);
        }
        out
    }

    pub fn from_ascii(text: &str) -> Result<Self> {
        let mut samples = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let v: Vec<f64> = line
                .split_whitespace()
                .map(|f| f.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::invalid(format!("IMU line {}: bad number", n + 1)))?;
            if v.len() != 7 {
                return Err(Error::invalid(format!("IMU line {}: expected 7 fields, found {}", n + 1, v.len())));
            }
            samples.push(ImuSample { t: v[0], accel: [v[1], v[2], v[3]], gyro: [v[4], v[5], v[6]] });
        }
        Self::new(samples)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_ascii(&fs::read_to_string(path)?)
            .map_err(|e| Error::Parse { path: path.to_path_buf(), message: e.to_string() })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_ascii())?;
        Ok(())
    }
}

/// Gaussian fitted to `a_z` during steady motion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyDistribution {
    pub mean: f64,
    pub std: f64,
    pub window: (f64, f64),
}

impl SteadyDistribution {
    pub fn new(mean: f64, std: f64, window: (f64, f64)) -> Result<Self> {
        if !(std >= MIN_STEADY_STD) || !std.is_finite() {
            return Err(Error::ConstantSignal(std));
        }
        if !(0.5 * GRAVITY..=1.5 * GRAVITY).contains(&mean) {
            return Err(Error::invalid(format!(
                "steady mean {mean:.3} m/s² is outside [{:.3}, {:.3}]",
                0.5 * GRAVITY,
                1.5 * GRAVITY
            )));
        }
        Ok(Self { mean, std, window })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SteadyWindow {
    /// Samples with `start <= t <= end`.
    Interval { start: f64, end: f64 },
    /// Sliding window of `duration` seconds with the smallest variance.
    Automatic { duration: f64 },
}

impl Default for SteadyWindow {
    fn default() -> Self {
        SteadyWindow::Automatic { duration: 5.0 }
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn fit_steady_distribution(trace: &ImuTrace, window: SteadyWindow) -> Result<SteadyDistribution> {
    let s = trace.samples();
    let (lo, hi) = match window {
        SteadyWindow::Interval { start, end } => {
            let lo = s.partition_point(|x| x.t < start);
            let hi = s.partition_point(|x| x.t <= end);
            (lo, hi.max(lo))
        }
        SteadyWindow::Automatic { duration } => {
            if s.len() < 2 {
                return Err(Error::TooFewSamples { needed: MIN_STEADY_SAMPLES, available: s.len() });
            }
            let rate = (s.len() - 1) as f64 / (s[s.len() - 1].t - s[0].t);
            let len = ((duration * rate).round() as usize).max(MIN_STEADY_SAMPLES);
            if len > s.len() {
                return Err(Error::TooFewSamples { needed: len, available: s.len() });
            }
            // Prefix sums of offsets from the global mean keep the running
            // variance well conditioned.
            let offset = s.iter().map(|x| x.a_z()).sum::<f64>() / s.len() as f64;
            let mut s1 = vec![0.0; s.len() + 1];
            let mut s2 = vec![0.0; s.len() + 1];
            for (i, x) in s.iter().enumerate() {
                let d = x.a_z() - offset;
                s1[i + 1] = s1[i] + d;
                s2[i + 1] = s2[i] + d * d;
            }
            let n = len as f64;
            let mut best = (f64::INFINITY, 0);
            for start in 0..=s.len() - len {
                let a = s1[start + len] - s1[start];
                let b = s2[start + len] - s2[start];
                let var = (b - a * a / n) / (n - 1.0);
                if var < best.0 {
                    best = (var, start);
                }
            }
            (best.1, best.1 + len)
        }
    };
    let count = hi - lo;
    if count < MIN_STEADY_SAMPLES {
        return Err(Error::TooFewSamples { needed: MIN_STEADY_SAMPLES, available: count });
    }
    let values: Vec<f64> = s[lo..hi].iter().map(|x| x.a_z()).collect();
    let (mean, std) = mean_std(&values);
    SteadyDistribution::new(mean, std, (s[lo].t, s[hi - 1].t))
}

/// Two-sided standard-normal tail probability `P[|Z| > z]`.
pub fn two_sided_tail(z: f64) -> f64 {
    erfc(z.abs() / std::f64::consts::SQRT_2)
}

pub fn risk_level_from(a_z: f64, mean: f64, std: f64) -> f64 {
    two_sided_tail((a_z - mean) / std).clamp(0.0, 1.0)
}

/// Risk level `α ∈ [0, 1]` of one vertical-acceleration reading.
pub fn risk_level(a_z: f64, dist: &SteadyDistribution) -> f64 {
    risk_level_from(a_z, dist.mean, dist.std)
}

/// Mean risk level over the `frames` most recent samples at or before `t`.
pub fn label_at_with(t: f64, trace: &ImuTrace, dist: &SteadyDistribution, frames: usize) -> Result<f64> {
    let end = trace.count_until(t);
    if end < frames || frames == 0 {
        return Err(Error::TooFewSamples { needed: frames.max(1), available: end });
    }
    let sum: f64 = trace.samples()[end - frames..end].iter().map(|s| risk_level(s.a_z(), dist)).sum();
    Ok((sum / frames as f64).clamp(0.0, 1.0))
}

pub fn label_at(t: f64, trace: &ImuTrace, dist: &SteadyDistribution) -> Result<f64> {
    label_at_with(t, trace, dist, LABEL_FRAMES)
}
