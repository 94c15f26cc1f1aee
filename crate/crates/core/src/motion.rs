//! Fourier-feature encoding of vehicle speed and yaw rate.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FourierConfig {
    /// Number of frequency pairs `m`.
    pub pairs: usize,
    /// Standard deviation of the Gaussian the frequencies are drawn from.
    pub sigma: f64,
    pub seed: u64,
}

impl Default for FourierConfig {
    fn default() -> Self {
        Self { pairs: 8, sigma: 1.0, seed: 0 }
    }
}

impl FourierConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pairs == 0 {
            return Err(Error::Config("fourier.pairs must be >= 1".into()));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::Config(format!("fourier.sigma must be > 0, got {}", self.sigma)));
        }
        Ok(())
    }
}

/// Sampled frequencies `b_1..b_m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FrequencyBank(Vec<f64>);

impl FrequencyBank {
    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || !values.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("frequency bank needs at least one finite frequency"));
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn pairs(&self) -> usize {
        self.0.len()
    }

    /// Length of the flattened feature vector, `4m`.
    pub fn feature_len(&self) -> usize {
        4 * self.0.len()
    }

    /// Bitwise equality, used to refuse inference with foreign frequencies.
    pub fn same_as(&self, other: &FrequencyBank) -> bool {
        self.0.len() == other.0.len() && self.0.iter().zip(&other.0).all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

pub fn sample_frequencies(config: &FourierConfig) -> Result<FrequencyBank> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let normal = Normal::new(0.0, config.sigma).map_err(|e| Error::Config(e.to_string()))?;
    FrequencyBank::from_values((0..config.pairs).map(|_| normal.sample(&mut rng)).collect())
}

/// `2m × 2` block: row `2i` holds `cos(2π b_i v), cos(2π b_i ω)` and row
/// `2i + 1` the matching sines.
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityFeatures {
    rows: Vec<[f64; 2]>,
}

impl VelocityFeatures {
    pub fn rows(&self) -> &[[f64; 2]] {
        &self.rows
    }

    /// Row-major flattening to a `4m` vector.
    pub fn flatten(&self) -> Vec<f64> {
        self.rows.iter().flat_map(|r| r.iter().copied()).collect()
    }

    /// Same block with the yaw-rate column set to zero.
    pub fn without_yaw_rate(&self) -> Self {
        Self { rows: self.rows.iter().map(|r| [r[0], 0.0]).collect() }
    }
}

pub fn fourier_encode(speed: f64, yaw_rate: f64, bank: &FrequencyBank) -> VelocityFeatures {
    let tau = std::f64::consts::TAU;
    let mut rows = Vec::with_capacity(2 * bank.pairs());
    for &b in bank.values() {
        let (sv, cv) = (tau * b * speed).sin_cos();
        let (sw, cw) = (tau * b * yaw_rate).sin_cos();
        rows.push([cv, cw]);
        rows.push([sv, sw]);
    }
    VelocityFeatures { rows }
}

/// Planar speed from the x/y velocity components.
pub fn speed_norm(vx: f64, vy: f64) -> f64 {
    vx.hypot(vy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn frequencies_are_seeded() {
        let cfg = FourierConfig { pairs: 10, sigma: 1.0, seed: 42 };
        assert_eq!(sample_frequencies(&cfg).unwrap(), sample_frequencies(&cfg).unwrap());
        let other = sample_frequencies(&FourierConfig { seed: 43, ..cfg }).unwrap();
        assert!(!sample_frequencies(&cfg).unwrap().same_as(&other));
    }

    #[test]
    fn frequency_spread_matches_sigma() {
        let draws: Vec<f64> = (0..1000)
            .flat_map(|seed| {
                sample_frequencies(&FourierConfig { pairs: 10, sigma: 1.0, seed }).unwrap().values().to_vec()
            })
            .collect();
        let n = draws.len() as f64;
        let mean = draws.iter().sum::<f64>() / n;
        let std = (draws.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((std - 1.0).abs() < 0.05, "std = {std}");
    }

    #[test]
    fn zero_pairs_is_a_config_error() {
        let cfg = FourierConfig { pairs: 0, sigma: 1.0, seed: 0 };
        assert!(matches!(sample_frequencies(&cfg), Err(Error::Config(_))));
        assert!(sample_frequencies(&FourierConfig { sigma: 0.0, ..FourierConfig::default() }).is_err());
    }

    #[test]
    fn zero_velocity_gives_unit_cosines() {
        let bank = sample_frequencies(&FourierConfig::default()).unwrap();
        let f = fourier_encode(0.0, 0.0, &bank);
        assert_eq!(f.rows().len(), 16);
        for (i, row) in f.rows().iter().enumerate() {
            let expected = if i % 2 == 0 { 1.0 } else { 0.0 };
            assert_eq!(*row, [expected, expected]);
        }
    }

    #[test]
    fn half_frequency_at_unit_speed() {
        let bank = FrequencyBank::from_values(vec![0.5]).unwrap();
        let f = fourier_encode(1.0, 0.0, &bank);
        assert!((f.rows()[0][0] + 1.0).abs() < 1e-15);
        assert!(f.rows()[1][0].abs() < 1e-15);
        assert_eq!(f.rows()[0][1], 1.0);
        assert_eq!(f.flatten().len(), bank.feature_len());
    }

    #[test]
    fn speed_norm_examples() {
        assert_eq!(speed_norm(3.0, 4.0), 5.0);
        assert_eq!(speed_norm(0.0, 0.0), 0.0);
        assert_eq!(speed_norm(-1.0, 0.0), 1.0);
    }

    proptest! {
        #[test]
        fn entries_bounded(v in -100.0..100.0f64, w in -10.0..10.0f64, seed in 0u64..100) {
            let bank = sample_frequencies(&FourierConfig { pairs: 6, sigma: 3.0, seed }).unwrap();
            for x in fourier_encode(v, w, &bank).flatten() {
                prop_assert!((-1.0..=1.0).contains(&x));
            }
        }

        #[test]
        fn periodic_in_speed(b in 0.1..3.0f64, v in -5.0..5.0f64, k in -5i32..5) {
            let bank = FrequencyBank::from_values(vec![b]).unwrap();
            let f0 = fourier_encode(v, 0.3, &bank);
            let f1 = fourier_encode(v + k as f64 / b, 0.3, &bank);
            prop_assert!((f0.rows()[0][0] - f1.rows()[0][0]).abs() < 1e-9);
            prop_assert!((f0.rows()[1][0] - f1.rows()[1][0]).abs() < 1e-9);
        }
    }
}
