//! The nine bounded photometric test-time augmentations.
//!
//! All transforms are non-geometric: output dimensions always equal input
//! dimensions and nothing is displaced, so boxes predicted on augmented
//! views stay comparable by IoU. Parameters are drawn from fixed, narrow
//! intervals; changing the seed changes which value inside an interval is
//! sampled, never the interval itself.

use image::RgbImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// The transform catalog.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AugKind {
    MildBrightness,
    MildContrast,
    MildBlur,
    MildNoise,
    Brightness,
    Contrast,
    Noise,
    Sharpen,
    ColorShift,
}

impl AugKind {
    pub const ALL: [AugKind; 9] = [
        AugKind::MildBrightness,
        AugKind::MildContrast,
        AugKind::MildBlur,
        AugKind::MildNoise,
        AugKind::Brightness,
        AugKind::Contrast,
        AugKind::Noise,
        AugKind::Sharpen,
        AugKind::ColorShift,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            AugKind::MildBrightness => "mild_brightness",
            AugKind::MildContrast => "mild_contrast",
            AugKind::MildBlur => "mild_blur",
            AugKind::MildNoise => "mild_noise",
            AugKind::Brightness => "brightness",
            AugKind::Contrast => "contrast",
            AugKind::Noise => "noise",
            AugKind::Sharpen => "sharpen",
            AugKind::ColorShift => "color_shift",
        }
    }

    fn index(&self) -> u64 {
        Self::ALL.iter().position(|k| k == self).unwrap() as u64
    }
}

/// Sampled transform parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AugParams {
    /// y = clamp(alpha * x + beta)
    Brightness { alpha: f64, beta: f64 },
    /// y = clamp(alpha * (x - 128) + 128)
    Contrast { alpha: f64 },
    /// Per-pixel Gaussian, sigma on a normalized [0, 1] pixel scale.
    Noise { sigma: f64 },
    /// Normalized box kernel.
    Blur { kernel: u32 },
    /// Unsharp masking with a 3x3 box base: y = clamp(x + amount * (x - blur(x)))
    Sharpen { amount: f64 },
    /// Constant per-channel offset.
    ColorShift { offset: [f64; 3] },
}

/// A fully determined augmentation: kind, sampled parameters and the seed
/// that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationSpec {
    pub kind: AugKind,
    pub params: AugParams,
    pub seed: u64,
}

/// Manifest entry emitted alongside each augmented output for
/// reproducibility.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub kind: String,
    pub file: String,
    pub spec: AugmentationSpec,
}

// ChaCha8 is the fixed, portable generator for all parameter sampling; the
// stream index separates parameter draws (kind index) from the pixel noise
// field (kind index + 64).
fn param_rng(kind: AugKind, seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(kind.index());
    rng
}

fn noise_rng(kind: AugKind, seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(kind.index() + 64);
    rng
}

/// Draw the parameters for one transform kind; deterministic in
/// `(kind, seed)`.
pub fn sample_spec(kind: AugKind, seed: u64) -> AugmentationSpec {
    let mut rng = param_rng(kind, seed);
    let params = match kind {
        AugKind::Brightness | AugKind::MildBrightness => AugParams::Brightness {
            alpha: rng.gen_range(0.9..=1.1),
            beta: rng.gen_range(-10.0..=10.0),
        },
        AugKind::Contrast => AugParams::Contrast {
            alpha: rng.gen_range(0.85..=1.15),
        },
        AugKind::MildContrast => AugParams::Contrast {
            alpha: rng.gen_range(0.95..=1.05),
        },
        AugKind::Noise => AugParams::Noise {
            sigma: rng.gen_range(0.005..=0.01),
        },
        AugKind::MildNoise => AugParams::Noise {
            sigma: rng.gen_range(0.003..=0.005),
        },
        AugKind::MildBlur => AugParams::Blur { kernel: 3 },
        AugKind::Sharpen => AugParams::Sharpen {
            amount: rng.gen_range(0.2..=0.5),
        },
        AugKind::ColorShift => AugParams::ColorShift {
            offset: [
                rng.gen_range(-8.0..=8.0),
                rng.gen_range(-8.0..=8.0),
                rng.gen_range(-8.0..=8.0),
            ],
        },
    };
    AugmentationSpec { kind, params, seed }
}

fn clamp_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

fn map_pixels(img: &RgbImage, f: impl Fn(usize, f64) -> f64) -> RgbImage {
    let mut out = img.clone();
    for p in out.pixels_mut() {
        for c in 0..3 {
            p.0[c] = clamp_u8(f(c, p.0[c] as f64));
        }
    }
    out
}

fn box_blur(img: &RgbImage, kernel: u32) -> RgbImage {
    let (w, h) = img.dimensions();
    let r = (kernel / 2) as i64;
    let mut out = RgbImage::new(w, h);
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let mut acc = [0.0f64; 3];
            let mut count = 0.0;
            for dy in -r..=r {
                for dx in -r..=r {
                    let sx = (x + dx).clamp(0, w as i64 - 1) as u32;
                    let sy = (y + dy).clamp(0, h as i64 - 1) as u32;
                    let p = img.get_pixel(sx, sy);
                    for c in 0..3 {
                        acc[c] += p.0[c] as f64;
                    }
                    count += 1.0;
                }
            }
            let p = out.get_pixel_mut(x as u32, y as u32);
            for c in 0..3 {
                p.0[c] = clamp_u8(acc[c] / count);
            }
        }
    }
    out
}

/// Apply one sampled transform. Output dimensions always equal input
/// dimensions; pixel values are clamped to [0, 255].
pub fn apply(img: &RgbImage, spec: &AugmentationSpec) -> RgbImage {
    match &spec.params {
        AugParams::Brightness { alpha, beta } => map_pixels(img, |_, x| alpha * x + beta),
        AugParams::Contrast { alpha } => map_pixels(img, |_, x| alpha * (x - 128.0) + 128.0),
        AugParams::Noise { sigma } => {
            let mut rng = noise_rng(spec.kind, spec.seed);
            let normal = Normal::new(0.0, sigma * 255.0).unwrap();
            let mut out = img.clone();
            for p in out.pixels_mut() {
                for c in 0..3 {
                    p.0[c] = clamp_u8(p.0[c] as f64 + normal.sample(&mut rng));
                }
            }
            out
        }
        AugParams::Blur { kernel } => box_blur(img, *kernel),
        AugParams::Sharpen { amount } => {
            let base = box_blur(img, 3);
            let mut out = img.clone();
            for (p, b) in out.pixels_mut().zip(base.pixels()) {
                for c in 0..3 {
                    let x = p.0[c] as f64;
                    p.0[c] = clamp_u8(x + amount * (x - b.0[c] as f64));
                }
            }
            out
        }
        AugParams::ColorShift { offset } => map_pixels(img, |c, x| x + offset[c]),
    }
}

/// Apply one sampled transform of each kind: nine outputs with the specs
/// that produced them, all the same size as the input and bit-reproducible
/// from `(image, seed)`.
pub fn augment_all(img: &RgbImage, seed: u64) -> Vec<(AugmentationSpec, RgbImage)> {
    AugKind::ALL
        .iter()
        .map(|&kind| {
            let spec = sample_spec(kind, seed);
            let out = apply(img, &spec);
            (spec, out)
        })
        .collect()
}
