use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HTReading {
    /// °C
    pub temperature: f64,
    /// % RH
    pub humidity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HTConfig {
    pub sigma_temp: f64,
    pub sigma_humidity: f64,
}

impl Default for HTConfig {
    fn default() -> Self {
        Self { sigma_temp: 0.5, sigma_humidity: 2.0 }
    }
}

/// Ambient `(°C, %RH)` plus sensor noise; humidity is clamped to [0, 100].
pub fn ht_sample<R: Rng + ?Sized>(ambient: (f64, f64), cfg: &HTConfig, rng: &mut R) -> HTReading {
    let mut draw = |sigma: f64| {
        if sigma > 0.0 {
            Normal::new(0.0, sigma).expect("finite sigma").sample(rng)
        } else {
            0.0
        }
    };
    let temperature = ambient.0 + draw(cfg.sigma_temp);
    let humidity = (ambient.1 + draw(cfg.sigma_humidity)).clamp(0.0, 100.0);
    HTReading { temperature, humidity }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn noiseless_passthrough() {
        let cfg = HTConfig { sigma_temp: 0.0, sigma_humidity: 0.0 };
        let r = ht_sample((30.0, 80.0), &cfg, &mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(r, HTReading { temperature: 30.0, humidity: 80.0 });
    }

    #[test]
    fn humidity_clamped() {
        let cfg = HTConfig { sigma_temp: 0.0, sigma_humidity: 5.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let readings: Vec<_> = (0..200).map(|_| ht_sample((30.0, 99.9), &cfg, &mut rng)).collect();
        assert!(readings.iter().all(|r| r.humidity <= 100.0 && r.humidity >= 0.0));
        assert!(readings.iter().any(|r| r.humidity == 100.0));
    }

    #[test]
    fn mean_converges() {
        let cfg = HTConfig { sigma_temp: 0.5, sigma_humidity: 0.0 };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mean = (0..1000).map(|_| ht_sample((30.0, 50.0), &cfg, &mut rng).temperature).sum::<f64>() / 1000.0;
        // standard error 0.5 / sqrt(1000) ≈ 0.016
        assert!((mean - 30.0).abs() < 0.1, "{mean}");
    }
}
