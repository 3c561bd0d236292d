//! Seeded synthetic candidate sets with a controllable class imbalance.
//!
//! Every patch is three consecutive "slices" of a noisy tissue background.
//! Nodules are Gaussian blobs that persist across slices. Easy non-nodules
//! are background only; hard ones carry vessel-like lines that drift between
//! slices, rib-like arcs, or faint single-slice specks. Geometry is given for
//! 48-pixel patches and scales with `patch_size`.

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{CandidateSet, Label, Patch};
use crate::nn::Tensor;
use crate::seed::{self, Rng};
use crate::{Error, Result};

const SLICES: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub n_scans: usize,
    pub positives_per_scan: usize,
    pub negatives_per_scan: usize,
    pub hard_negative_fraction: f64,
    pub noise_level: f64,
    /// Height and width of every patch.
    pub patch_size: usize,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    /// 50 scans with 2 nodules and 800 non-nodules each: 400 non-nodules per nodule.
    fn default() -> Self {
        SyntheticConfig {
            n_scans: 50,
            positives_per_scan: 2,
            negatives_per_scan: 800,
            hard_negative_fraction: 0.3,
            noise_level: 0.08,
            patch_size: 48,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_scans == 0 {
            return Err(Error::Config("n_scans must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.hard_negative_fraction) {
            return Err(Error::Config(
                "hard_negative_fraction must lie in [0, 1]".into(),
            ));
        }
        if !(self.noise_level > 0.0 && self.noise_level.is_finite()) {
            return Err(Error::Config("noise_level must be positive".into()));
        }
        if self.patch_size < 4 {
            return Err(Error::Config("patch_size must be at least 4".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
enum Structure {
    Nodule {
        cx: f64,
        cy: f64,
        sigma: f64,
        amp: f64,
    },
    Vessel {
        nx: f64,
        ny: f64,
        offset: f64,
        drift: f64,
        sigma: f64,
        amp: f64,
    },
    Arc {
        ox: f64,
        oy: f64,
        radius: f64,
        sigma: f64,
        amp: f64,
    },
    Speck {
        cx: f64,
        cy: f64,
        sigma: f64,
        amp: f64,
    },
    Background,
}

impl Structure {
    fn intensity(&self, x: f64, y: f64, z: f64, unit: f64) -> f64 {
        let gauss = |d2: f64, s: f64| (-d2 / (2.0 * s * s)).exp();
        match *self {
            Structure::Nodule { cx, cy, sigma, amp } => {
                let dz = z * 2.0 * unit;
                amp * gauss((x - cx).powi(2) + (y - cy).powi(2) + dz * dz, sigma)
            }
            Structure::Vessel {
                nx,
                ny,
                offset,
                drift,
                sigma,
                amp,
            } => {
                let d = x * nx + y * ny - offset - z * drift;
                amp * gauss(d * d, sigma)
            }
            Structure::Arc {
                ox,
                oy,
                radius,
                sigma,
                amp,
            } => {
                let d = ((x - ox).powi(2) + (y - oy).powi(2)).sqrt() - radius;
                amp * gauss(d * d, sigma)
            }
            Structure::Speck { cx, cy, sigma, amp } => {
                if z == 0.0 {
                    amp * gauss((x - cx).powi(2) + (y - cy).powi(2), sigma)
                } else {
                    0.0
                }
            }
            Structure::Background => 0.0,
        }
    }
}

fn draw_structure(label: Label, hard: bool, unit: f64, rng: &mut Rng) -> Structure {
    let jitter = |rng: &mut Rng, r: f64| rng.gen_range(-r..=r);
    match (label, hard) {
        (Label::Nodule, _) => Structure::Nodule {
            cx: jitter(rng, 6.0 * unit),
            cy: jitter(rng, 6.0 * unit),
            sigma: rng.gen_range(4.0..=10.0) * unit / 2.0,
            amp: rng.gen_range(0.25..0.7),
        },
        (Label::NonNodule, false) => Structure::Background,
        (Label::NonNodule, true) => {
            let pick: f64 = rng.gen();
            if pick < 0.4 {
                let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                Structure::Vessel {
                    nx: phi.cos(),
                    ny: phi.sin(),
                    offset: jitter(rng, 6.0 * unit),
                    drift: rng.gen_range(1.0..3.0) * unit * if rng.gen() { 1.0 } else { -1.0 },
                    sigma: rng.gen_range(0.8..1.6) * unit,
                    amp: rng.gen_range(0.3..0.7),
                }
            } else if pick < 0.7 {
                let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                let radius = rng.gen_range(30.0..60.0) * unit;
                let reach = radius + jitter(rng, 10.0 * unit);
                Structure::Arc {
                    ox: reach * phi.cos(),
                    oy: reach * phi.sin(),
                    radius,
                    sigma: rng.gen_range(1.5..3.0) * unit,
                    amp: rng.gen_range(0.3..0.6),
                }
            } else {
                Structure::Speck {
                    cx: jitter(rng, 6.0 * unit),
                    cy: jitter(rng, 6.0 * unit),
                    sigma: rng.gen_range(2.0..3.5) * unit / 2.0,
                    amp: rng.gen_range(0.1..0.3),
                }
            }
        }
    }
}

fn render(label: Label, hard: bool, cfg: &SyntheticConfig, rng: &mut Rng) -> Result<Tensor> {
    let n = cfg.patch_size;
    let unit = n as f64 / 48.0;
    let centre = (n as f64 - 1.0) / 2.0;
    let structure = draw_structure(label, hard, unit, rng);
    let base = rng.gen_range(0.05..0.25);
    let noise = Normal::new(0.0, cfg.noise_level).expect("validated noise level");
    let mut data = Vec::with_capacity(SLICES * n * n);
    for s in 0..SLICES {
        let z = s as f64 - 1.0;
        for y in 0..n {
            for x in 0..n {
                let v = base
                    + structure.intensity(x as f64 - centre, y as f64 - centre, z, unit)
                    + noise.sample(rng);
                data.push(v.clamp(0.0, 1.0) as f32);
            }
        }
    }
    Tensor::new(vec![SLICES, n, n], data)
}

pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<CandidateSet> {
    cfg.validate()?;
    let n_hard = (cfg.hard_negative_fraction * cfg.negatives_per_scan as f64).round() as usize;
    let mut patches =
        Vec::with_capacity(cfg.n_scans * (cfg.positives_per_scan + cfg.negatives_per_scan));
    for scan in 0..cfg.n_scans {
        let scan_id = format!("scan-{scan:04}");
        let lesions = (0..cfg.positives_per_scan)
            .map(|i| (Label::Nodule, i, false))
            .chain((0..cfg.negatives_per_scan).map(|i| (Label::NonNodule, i, i < n_hard)));
        for (label, i, hard) in lesions {
            let tag = if label == Label::Nodule { 'n' } else { 'c' };
            let mut rng = seed::rng(seed::derive(
                cfg.seed,
                &[scan as u64, label.as_u8() as u64, i as u64],
            ));
            patches.push(Patch {
                pixels: render(label, hard, cfg, &mut rng)?,
                label,
                scan_id: scan_id.clone(),
                lesion_id: format!("{scan_id}/{tag}{i:05}"),
                augmented_from: None,
            });
        }
    }
    CandidateSet::new(patches)
}
