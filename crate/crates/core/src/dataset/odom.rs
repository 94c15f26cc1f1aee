use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motion::speed_norm;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdomSample {
    pub t: f64,
    pub position: [f64; 3],
    pub yaw: f64,
    /// World-frame linear velocity.
    pub velocity: [f64; 3],
    pub yaw_rate: f64,
}

impl OdomSample {
    pub fn speed(&self) -> f64 {
        speed_norm(self.velocity[0], self.velocity[1])
    }
}

/// Odometry with strictly increasing timestamps.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OdomTrace {
    samples: Vec<OdomSample>,
}

impl OdomTrace {
    pub fn new(samples: Vec<OdomSample>) -> Result<Self> {
        for (i, s) in samples.iter().enumerate() {
            let finite = s.t.is_finite()
                && s.yaw.is_finite()
                && s.yaw_rate.is_finite()
                && s.position.iter().chain(&s.velocity).all(|v| v.is_finite());
            if !finite {
                return Err(Error::invalid(format!("odometry sample {i} is not finite")));
            }
            if i > 0 && s.t <= samples[i - 1].t {
                return Err(Error::invalid(format!("odometry timestamps not strictly increasing at sample {i}")));
            }
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[OdomSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// One line per sample: `t x y z yaw vx vy vz wz`.
    pub fn to_ascii(&self) -> String {
        let mut out = String::with_capacity(self.samples.len() * 96);
        for s in &self.samples {
            let [x, y, z] = s.position;
            let [vx, vy, vz] = s.velocity;
            let _ = writeln!(out, "{} {x} {y} {z} {} {vx} {vy} {vz} {}", s.t, s.yaw, s.yaw_rate);
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
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::invalid(format!("odometry line {}: bad number", n + 1)))?;
            if v.len() != 9 {
                return Err(Error::invalid(format!("odometry line {}: expected 9 fields, found {}", n + 1, v.len())));
            }
            samples.push(OdomSample {
                t: v[0],
                position: [v[1], v[2], v[3]],
                yaw: v[4],
                velocity: [v[5], v[6], v[7]],
                yaw_rate: v[8],
            });
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

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(t: f64) -> OdomSample {
        OdomSample { t, position: [1.0, 2.0, 0.5], yaw: 0.3, velocity: [0.6, 0.8, 0.0], yaw_rate: -0.1 }
    }

    #[test]
    fn ascii_round_trip_and_ordering() {
        let trace = OdomTrace::new(vec![sample(0.0), sample(0.1), sample(0.2)]).unwrap();
        assert_eq!(OdomTrace::from_ascii(&trace.to_ascii()).unwrap(), trace);
        assert_eq!(trace.samples()[0].speed(), 1.0);
        assert!(OdomTrace::new(vec![sample(0.1), sample(0.1)]).is_err());
        assert!(OdomTrace::from_ascii("0 1 2 3").is_err());
    }
}
