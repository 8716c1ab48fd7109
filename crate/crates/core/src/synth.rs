//! Seeded synthetic feature tensors for end-to-end checks without a backbone.
//!
//! Reproducing a stream elsewhere needs three pieces:
//!
//! * Per-image seeds: the dataset seed drives a SplitMix64 sequence. Output
//!   `0` seeds the shared base tensor, output `k + 1` seeds image `k` in
//!   dataset order (mon-build normals, then evaluation normals, then
//!   anomalies).
//! * Each image seed initializes `ChaCha8Rng::seed_from_u64` from
//!   `rand_chacha` 0.9.
//! * Gaussian noise is Box-Muller over pairs of `u64` draws `(a, b)`:
//!   `u1 = ((a >> 11) + 1) * 2^-53`, `u2 = (b >> 11) * 2^-53`,
//!   `r = sqrt(-2 ln u1)`, emitting `r cos(2 pi u2)` then `r sin(2 pi u2)`,
//!   filled in row-major `(h, w, c)` order. After the noise, an anomalous
//!   image draws the bump's top row then left column as `next_u64() % span`.

use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use thiserror::Error;

use crate::tensor::{Dims, FeatureTensor};

/// Identifier recorded alongside generated datasets.
pub const GENERATOR_ALGORITHM: &str = "splitmix64-seeds/chacha8/box-muller";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("bump extent {extent_h}x{extent_w} does not fit in {height}x{width}")]
    ExtentTooLarge {
        extent_h: usize,
        extent_w: usize,
        height: usize,
        width: usize,
    },
    #[error("noise sigma must be finite and >= 0, got {0}")]
    BadSigma(f64),
    #[error("bump amplitude must be finite, got {0}")]
    BadAmplitude(f64),
    #[error("tensor dims must be positive, got {0}")]
    ZeroDims(Dims),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub dims: Dims,
    pub n_normal_mon: usize,
    pub n_normal_eval: usize,
    pub n_anomalous: usize,
    pub noise_sigma: f64,
    pub bump_amplitude: f64,
    pub bump_extent: (usize, usize),
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            dims: Dims::new(14, 14, 192),
            n_normal_mon: 64,
            n_normal_eval: 64,
            n_anomalous: 32,
            noise_sigma: 1.0,
            bump_amplitude: 3.0,
            bump_extent: (3, 3),
            seed: 0,
        }
    }
}

/// What a generated image is for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthKind {
    MonBuild,
    EvalNormal,
    Anomalous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthItem {
    pub kind: SynthKind,
    /// Position within its kind.
    pub ordinal: usize,
    pub seed: u64,
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let d = self.dims;
        if d.is_empty() {
            return Err(SynthError::ZeroDims(d));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(SynthError::BadSigma(self.noise_sigma));
        }
        if !self.bump_amplitude.is_finite() {
            return Err(SynthError::BadAmplitude(self.bump_amplitude));
        }
        check_extent(d, self.bump_extent)
    }

    pub fn total(&self) -> usize {
        self.n_normal_mon + self.n_normal_eval + self.n_anomalous
    }

    pub fn base_seed(&self) -> u64 {
        splitmix64_output(self.seed, 0)
    }

    /// Every image in dataset order with its derived seed.
    pub fn plan(&self) -> Vec<SynthItem> {
        let kinds = [
            (SynthKind::MonBuild, self.n_normal_mon),
            (SynthKind::EvalNormal, self.n_normal_eval),
            (SynthKind::Anomalous, self.n_anomalous),
        ];
        let mut out = Vec::with_capacity(self.total());
        for (kind, count) in kinds {
            for ordinal in 0..count {
                let k = out.len() as u64;
                out.push(SynthItem {
                    kind,
                    ordinal,
                    seed: splitmix64_output(self.seed, k + 1),
                });
            }
        }
        out
    }

    pub fn base(&self) -> Result<FeatureTensor, SynthError> {
        self.validate()?;
        let zeros = FeatureTensor::zeros(self.dims).map_err(|_| SynthError::ZeroDims(self.dims))?;
        generate_normal(&zeros, 1.0, self.base_seed())
    }

    pub fn generate(
        &self,
        base: &FeatureTensor,
        item: &SynthItem,
    ) -> Result<FeatureTensor, SynthError> {
        match item.kind {
            SynthKind::MonBuild | SynthKind::EvalNormal => {
                generate_normal(base, self.noise_sigma, item.seed)
            }
            SynthKind::Anomalous => generate_anomalous(
                base,
                self.noise_sigma,
                self.bump_amplitude,
                self.bump_extent,
                item.seed,
            ),
        }
    }
}

fn check_extent(d: Dims, (eh, ew): (usize, usize)) -> Result<(), SynthError> {
    if eh == 0 || ew == 0 || eh > d.height || ew > d.width {
        return Err(SynthError::ExtentTooLarge {
            extent_h: eh,
            extent_w: ew,
            height: d.height,
            width: d.width,
        });
    }
    Ok(())
}

const GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// Output `k` (0-based) of SplitMix64 started from `seed`.
pub fn splitmix64_output(seed: u64, k: u64) -> u64 {
    let mut z = seed.wrapping_add(GAMMA.wrapping_mul(k.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

struct BoxMuller {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl BoxMuller {
    fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    fn next(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        let u1 = ((self.rng.next_u64() >> 11) + 1) as f64 * SCALE;
        let u2 = (self.rng.next_u64() >> 11) as f64 * SCALE;
        let r = libm::sqrt(-2.0 * libm::log(u1));
        let theta = 2.0 * core::f64::consts::PI * u2;
        self.spare = Some(r * libm::sin(theta));
        r * libm::cos(theta)
    }
}

fn noisy_values(base: &FeatureTensor, sigma: f64, gauss: &mut BoxMuller) -> Vec<f32> {
    base.values()
        .iter()
        .map(|&b| (b as f64 + sigma * gauss.next()) as f32)
        .collect()
}

fn finish(dims: Dims, values: Vec<f32>) -> Result<FeatureTensor, SynthError> {
    // only reachable with absurd sigma or amplitude overflowing f32
    FeatureTensor::new(dims, values).map_err(|_| SynthError::BadSigma(f64::INFINITY))
}

/// `base` plus i.i.d. `N(0, sigma^2)` noise.
pub fn generate_normal(
    base: &FeatureTensor,
    noise_sigma: f64,
    seed: u64,
) -> Result<FeatureTensor, SynthError> {
    if !(noise_sigma.is_finite() && noise_sigma >= 0.0) {
        return Err(SynthError::BadSigma(noise_sigma));
    }
    let mut gauss = BoxMuller::new(seed);
    finish(base.dims(), noisy_values(base, noise_sigma, &mut gauss))
}

/// [`generate_normal`] plus a constant `bump_amplitude` on every channel of a
/// seeded-random `bump_extent` rectangle.
pub fn generate_anomalous(
    base: &FeatureTensor,
    noise_sigma: f64,
    bump_amplitude: f64,
    bump_extent: (usize, usize),
    seed: u64,
) -> Result<FeatureTensor, SynthError> {
    let dims = base.dims();
    check_extent(dims, bump_extent)?;
    if !(noise_sigma.is_finite() && noise_sigma >= 0.0) {
        return Err(SynthError::BadSigma(noise_sigma));
    }
    if !bump_amplitude.is_finite() {
        return Err(SynthError::BadAmplitude(bump_amplitude));
    }
    let mut gauss = BoxMuller::new(seed);
    let mut values = noisy_values(base, noise_sigma, &mut gauss);

    let (eh, ew) = bump_extent;
    let top = (gauss.rng.next_u64() % (dims.height - eh + 1) as u64) as usize;
    let left = (gauss.rng.next_u64() % (dims.width - ew + 1) as u64) as usize;
    if bump_amplitude != 0.0 {
        let c = dims.channels;
        for h in top..top + eh {
            for w in left..left + ew {
                let start = (h * dims.width + w) * c;
                for v in &mut values[start..start + c] {
                    *v = (*v as f64 + bump_amplitude) as f32;
                }
            }
        }
    }
    finish(dims, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normality::{distance_heatmap, ModelOfNormality};

    fn base(d: Dims) -> FeatureTensor {
        let cfg = SynthConfig {
            dims: d,
            ..SynthConfig::default()
        };
        cfg.base().unwrap()
    }

    #[test]
    fn zero_sigma_returns_base() {
        let b = base(Dims::new(3, 4, 5));
        assert_eq!(generate_normal(&b, 0.0, 99).unwrap(), b);
    }

    #[test]
    fn same_seed_same_tensor() {
        let b = base(Dims::new(3, 4, 5));
        let x = generate_normal(&b, 0.7, 5).unwrap();
        assert_eq!(x, generate_normal(&b, 0.7, 5).unwrap());
        assert_ne!(x, generate_normal(&b, 0.7, 6).unwrap());
    }

    #[test]
    fn unit_sigma_sample_std() {
        let d = Dims::new(32, 32, 8);
        let zeros = FeatureTensor::zeros(d).unwrap();
        let out = generate_normal(&zeros, 1.0, 2024).unwrap();
        let n = out.values().len() as f64;
        let mean = out.values().iter().map(|&v| v as f64).sum::<f64>() / n;
        let var = out
            .values()
            .iter()
            .map(|&v| (v as f64 - mean).powi(2))
            .sum::<f64>()
            / (n - 1.0);
        let std = var.sqrt();
        assert!((0.97..=1.03).contains(&std), "std {std}");
        assert!(mean.abs() < 0.05, "mean {mean}");
    }

    #[test]
    fn zero_amplitude_matches_normal() {
        let b = base(Dims::new(5, 5, 3));
        assert_eq!(
            generate_anomalous(&b, 1.0, 0.0, (2, 2), 17).unwrap(),
            generate_normal(&b, 1.0, 17).unwrap()
        );
    }

    #[test]
    fn single_position_bump_closed_form() {
        let d = Dims::new(6, 5, 16);
        let b = base(d);
        let a = 2.0;
        let out = generate_anomalous(&b, 0.0, a, (1, 1), 3).unwrap();
        let mon = ModelOfNormality::from_parts(b, 1).unwrap();
        let hm = distance_heatmap(&out, &mon).unwrap();
        let changed: alloc::vec::Vec<f64> =
            hm.values().iter().copied().filter(|&v| v != 0.0).collect();
        assert_eq!(changed.len(), 1);
        let expected = a * (d.channels as f64).sqrt();
        assert!(
            (changed[0] - expected).abs() < 1e-5 * expected,
            "{changed:?}"
        );
    }

    #[test]
    fn oversize_extent_rejected() {
        let b = base(Dims::new(3, 3, 2));
        assert!(matches!(
            generate_anomalous(&b, 1.0, 1.0, (4, 1), 0),
            Err(SynthError::ExtentTooLarge { .. })
        ));
        assert!(generate_anomalous(&b, 1.0, 1.0, (3, 3), 0).is_ok());
        assert!(generate_normal(&b, -1.0, 0).is_err());
    }

    #[test]
    fn plan_order_and_seeds() {
        let cfg = SynthConfig {
            n_normal_mon: 2,
            n_normal_eval: 1,
            n_anomalous: 1,
            ..SynthConfig::default()
        };
        let plan = cfg.plan();
        let kinds: alloc::vec::Vec<_> = plan.iter().map(|p| p.kind).collect();
        assert_eq!(
            kinds,
            [
                SynthKind::MonBuild,
                SynthKind::MonBuild,
                SynthKind::EvalNormal,
                SynthKind::Anomalous
            ]
        );
        assert_eq!(plan[1].ordinal, 1);
        assert_eq!(plan[3].seed, splitmix64_output(0, 4));
    }

    #[test]
    fn splitmix_reference_values() {
        // first outputs of SplitMix64 seeded with 0 (Vigna's reference code)
        assert_eq!(splitmix64_output(0, 0), 0xe220_a839_7b1d_cdaf);
        assert_eq!(splitmix64_output(0, 1), 0x6e78_9e6a_a1b9_65f4);
    }
}
