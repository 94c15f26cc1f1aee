use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SemanticPoint {
    pub position: [f64; 3],
    pub class_id: u8,
    pub rgb: [u8; 3],
}

impl SemanticPoint {
    pub fn new(x: f64, y: f64, z: f64, class_id: u8) -> Self {
        Self { position: [x, y, z], class_id, rgb: [0, 0, 0] }
    }

    pub fn z(&self) -> f64 {
        self.position[2]
    }
}

/// Colored, semantically labelled point cloud. `num_classes` bounds every
/// `class_id`.
#[derive(Debug, Clone, PartialEq)]
pub struct SemanticPointCloud {
    points: Vec<SemanticPoint>,
    num_classes: u8,
}

impl SemanticPointCloud {
    pub fn new(points: Vec<SemanticPoint>, num_classes: u8) -> Result<Self> {
        for (i, p) in points.iter().enumerate() {
            if !p.position.iter().all(|v| v.is_finite()) {
                return Err(Error::invalid(format!("point {i} has non-finite coordinates")));
            }
            if p.class_id >= num_classes {
                return Err(Error::invalid(format!(
                    "point {i} has class {} but only {num_classes} classes are configured",
                    p.class_id
                )));
            }
        }
        Ok(Self { points, num_classes })
    }

    pub fn points(&self) -> &[SemanticPoint] {
        &self.points
    }

    pub fn num_classes(&self) -> u8 {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// ASCII table: a header line holding the point count, then one
    /// `x y z class_id r g b` line per point.
    pub fn to_ascii(&self) -> String {
        let mut out = String::with_capacity(self.points.len() * 48);
        let _ = writeln!(out, "{}", self.points.len());
        for p in &self.points {
            let [x, y, z] = p.position;
            let [r, g, b] = p.rgb;
            let _ = writeln!(out, "{x} {y} {z} {} {r} {g} {b}", p.class_id);
        }
        out
    }

    pub fn from_ascii(text: &str, num_classes: u8) -> Result<Self> {
        let bad = |line: usize, msg: String| Error::invalid(format!("point cloud line {line}: {msg}"));
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| Error::invalid("empty point cloud file"))?;
        let count: usize = header
            .trim()
            .parse()
            .map_err(|_| bad(1, format!("header must be the point count, got {header:?}")))?;
        let mut points = Vec::with_capacity(count);
        for (n, line) in lines {
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 7 {
                return Err(bad(n + 1, format!("expected 7 fields, found {}", fields.len())));
            }
            let f = |i: usize| -> Result<f64> {
                fields[i].parse().map_err(|_| bad(n + 1, format!("bad number {:?}", fields[i])))
            };
            let u = |i: usize| -> Result<u8> {
                fields[i].parse().map_err(|_| bad(n + 1, format!("bad integer {:?}", fields[i])))
            };
            points.push(SemanticPoint {
                position: [f(0)?, f(1)?, f(2)?],
                class_id: u(3)?,
                rgb: [u(4)?, u(5)?, u(6)?],
            });
        }
        if points.len() != count {
            return Err(Error::invalid(format!(
                "header announces {count} points, file has {}",
                points.len()
            )));
        }
        Self::new(points, num_classes)
    }

    pub fn load(path: &Path, num_classes: u8) -> Result<Self> {
        Self::from_ascii(&fs::read_to_string(path)?, num_classes).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_ascii())?;
        Ok(())
    }
}
