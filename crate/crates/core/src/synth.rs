//! Seeded synthetic series.
//!
//! Gaussian noise comes from the Box–Muller transform applied to uniforms
//! drawn from a ChaCha8 stream (a counter-based generator) keyed by the seed.
//! Transcendentals go through `libm`, so a given seed yields the same bits on
//! every platform.

use std::f64::consts::PI;

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// Standard normal draws via Box–Muller; both outputs of each pair are used.
pub struct GaussianStream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl GaussianStream {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    pub fn next_standard(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // u1 in (0, 1] keeps the log finite
        let u1 = 1.0 - self.rng.gen::<f64>();
        let u2 = self.rng.gen::<f64>();
        let r = libm::sqrt(-2.0 * libm::log(u1));
        let theta = 2.0 * PI * u2;
        self.spare = Some(r * libm::sin(theta));
        r * libm::cos(theta)
    }

    pub fn next(&mut self, sd: f64) -> f64 {
        sd * self.next_standard()
    }
}

fn check_common(n: usize, noise_sd: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::invalid("series length must be positive"));
    }
    if !(noise_sd >= 0.0) || !noise_sd.is_finite() {
        return Err(Error::invalid(format!(
            "noise_sd must be finite and >= 0, got {noise_sd}"
        )));
    }
    Ok(())
}

/// `level + amplitude·sin(2πi/period) + trend·i + N(0, noise_sd²)` for `i = 0..n`.
pub fn synth_seasonal(
    n: usize,
    period: f64,
    amplitude: f64,
    trend: f64,
    noise_sd: f64,
    seed: u64,
) -> Result<TimeSeries> {
    synth_seasonal_with_level(n, period, amplitude, trend, 0.0, noise_sd, seed)
}

pub fn synth_seasonal_with_level(
    n: usize,
    period: f64,
    amplitude: f64,
    trend: f64,
    level: f64,
    noise_sd: f64,
    seed: u64,
) -> Result<TimeSeries> {
    check_common(n, noise_sd)?;
    if !(period > 0.0) || !period.is_finite() {
        return Err(Error::invalid(format!("period must be positive, got {period}")));
    }
    if (n as f64) < 4.0 * period {
        warn!("seasonal series of {n} points covers fewer than 4 periods of {period}");
    }
    let mut noise = GaussianStream::new(seed);
    let values = (0..n)
        .map(|i| {
            let i = i as f64;
            level + amplitude * libm::sin(2.0 * PI * i / period) + trend * i + noise.next(noise_sd)
        })
        .collect();
    TimeSeries::new(format!("seasonal-{seed}"), values)
}

/// Gaussian random walk starting at 0.
pub fn synth_random_walk(n: usize, drift: f64, noise_sd: f64, seed: u64) -> Result<TimeSeries> {
    synth_random_walk_from(n, 0.0, drift, noise_sd, seed)
}

pub fn synth_random_walk_from(n: usize, start: f64, drift: f64, noise_sd: f64, seed: u64) -> Result<TimeSeries> {
    check_common(n, noise_sd)?;
    let mut noise = GaussianStream::new(seed);
    let mut values = Vec::with_capacity(n);
    let mut v = start;
    values.push(v);
    for _ in 1..n {
        v += drift + noise.next(noise_sd);
        values.push(v);
    }
    TimeSeries::new(format!("walk-{seed}"), values)
}

/// Linear autoregression `v_i = Σ_k coeffs[k]·v_{i-1-k} + noise`.
///
/// The first `coeffs.len()` values are standard normal draws from the same stream.
pub fn synth_ar(coeffs: &[f64], n: usize, noise_sd: f64, seed: u64) -> Result<TimeSeries> {
    check_common(n, noise_sd)?;
    if coeffs.is_empty() {
        return Err(Error::invalid("AR coefficient vector must be non-empty"));
    }
    if n <= coeffs.len() {
        return Err(Error::TooFewObservations {
            found: n,
            needed: coeffs.len() + 1,
        });
    }
    if coeffs.iter().map(|c| c.abs()).sum::<f64>() >= 1.0 {
        warn!("AR coefficients {coeffs:?} may be non-stationary (sum of |coeffs| >= 1)");
    }
    let p = coeffs.len();
    let mut noise = GaussianStream::new(seed);
    let mut values: Vec<f64> = (0..p).map(|_| noise.next_standard()).collect();
    for i in p..n {
        let mut v = 0.0;
        for (k, c) in coeffs.iter().enumerate() {
            v += c * values[i - 1 - k];
        }
        v += noise.next(noise_sd);
        values.push(v);
    }
    TimeSeries::new(format!("ar-{seed}"), values)
}

/// Serializable description of a synthetic series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SynthSpec {
    Seasonal {
        n: usize,
        period: f64,
        amplitude: f64,
        #[serde(default)]
        trend: f64,
        #[serde(default)]
        level: f64,
        noise_sd: f64,
        seed: u64,
    },
    Walk {
        n: usize,
        #[serde(default)]
        start: f64,
        #[serde(default)]
        drift: f64,
        noise_sd: f64,
        seed: u64,
    },
    Ar {
        coeffs: Vec<f64>,
        n: usize,
        noise_sd: f64,
        seed: u64,
    },
}

impl SynthSpec {
    pub fn generate(&self) -> Result<TimeSeries> {
        match self {
            SynthSpec::Seasonal {
                n,
                period,
                amplitude,
                trend,
                level,
                noise_sd,
                seed,
            } => synth_seasonal_with_level(*n, *period, *amplitude, *trend, *level, *noise_sd, *seed),
            SynthSpec::Walk {
                n,
                start,
                drift,
                noise_sd,
                seed,
            } => synth_random_walk_from(*n, *start, *drift, *noise_sd, *seed),
            SynthSpec::Ar {
                coeffs,
                n,
                noise_sd,
                seed,
            } => synth_ar(coeffs, *n, *noise_sd, *seed),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seasonal_degenerates_to_ramp() {
        let s = synth_seasonal(6, 12.0, 0.0, 1.0, 0.0, 3).unwrap();
        assert_eq!(s.values(), &[0., 1., 2., 3., 4., 5.]);
    }

    #[test]
    fn seasonal_noiseless_is_periodic() {
        let s = synth_seasonal(40, 4.0, 1.0, 0.0, 0.0, 9).unwrap();
        let v = s.values();
        for i in 0..v.len() - 4 {
            assert!((v[i] - v[i + 4]).abs() < 1e-12, "{i}");
        }
        assert!((v[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn seasonal_is_deterministic() {
        let a = synth_seasonal(200, 12.0, 3.0, 0.1, 0.7, 42).unwrap();
        let b = synth_seasonal(200, 12.0, 3.0, 0.1, 0.7, 42).unwrap();
        let c = synth_seasonal(200, 12.0, 3.0, 0.1, 0.7, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn walk_cases() {
        let s = synth_random_walk(5, 1.0, 0.0, 0).unwrap();
        assert_eq!(s.values(), &[0., 1., 2., 3., 4.]);
        let z = synth_random_walk(4, 0.0, 0.0, 0).unwrap();
        assert_eq!(z.values(), &[0.; 4]);
        assert_eq!(
            synth_random_walk(50, 0.1, 2.0, 8).unwrap(),
            synth_random_walk(50, 0.1, 2.0, 8).unwrap()
        );
    }

    #[test]
    fn ar_fixed_points() {
        let s = synth_ar(&[1.0], 10, 0.0, 5).unwrap();
        let c = s.values()[0];
        assert!(s.values().iter().all(|&v| v == c));
        let z = synth_ar(&[0.0], 10, 0.0, 5).unwrap();
        assert!(z.values()[1..].iter().all(|&v| v == 0.0));
        assert_eq!(
            synth_ar(&[0.5, 0.2], 100, 1.0, 1).unwrap(),
            synth_ar(&[0.5, 0.2], 100, 1.0, 1).unwrap()
        );
    }

    #[test]
    fn argument_errors() {
        assert!(synth_seasonal(0, 12.0, 1.0, 0.0, 0.0, 1).is_err());
        assert!(synth_seasonal(10, 12.0, 1.0, 0.0, -1.0, 1).is_err());
        assert!(synth_seasonal(10, 0.0, 1.0, 0.0, 0.0, 1).is_err());
        assert!(synth_random_walk(0, 0.0, 1.0, 1).is_err());
        assert!(synth_random_walk(5, 0.0, -0.1, 1).is_err());
        assert!(synth_ar(&[0.5, 0.1], 2, 0.0, 1).is_err());
        assert!(synth_ar(&[], 10, 0.0, 1).is_err());
    }

    #[test]
    fn gaussian_moments() {
        let mut g = GaussianStream::new(11);
        let n = 200_000;
        let xs: Vec<f64> = (0..n).map(|_| g.next_standard()).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.01, "{mean}");
        assert!((var - 1.0).abs() < 0.01, "{var}");
    }

    #[test]
    fn spec_roundtrips_through_json() {
        let spec = SynthSpec::Walk {
            n: 10,
            start: 5.0,
            drift: 0.0,
            noise_sd: 1.0,
            seed: 3,
        };
        let s = serde_json::to_string(&spec).unwrap();
        assert!(s.contains("\"kind\":\"walk\""));
        let back: SynthSpec = serde_json::from_str(&s).unwrap();
        assert_eq!(back, spec);
    }
}
