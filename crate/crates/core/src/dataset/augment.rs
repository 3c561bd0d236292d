use serde::{Deserialize, Serialize};

use super::Patch;
use crate::nn::Tensor;
use crate::{Error, Result};

/// Ranges for random rotation/scale augmentation. Sampling is always
/// bilinear and out-of-frame pixels replicate the nearest edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentParams {
    /// Degrees, half-open `[lo, hi)`.
    pub angle_range: (f64, f64),
    pub scale_range: (f64, f64),
}

impl Default for AugmentParams {
    fn default() -> Self {
        AugmentParams {
            angle_range: (0.0, 360.0),
            scale_range: (0.85, 1.15),
        }
    }
}

impl AugmentParams {
    pub fn validate(&self) -> Result<()> {
        let (a0, a1) = self.angle_range;
        let (s0, s1) = self.scale_range;
        if !(a0.is_finite() && a1.is_finite() && a0 <= a1) {
            return Err(Error::Config(format!(
                "bad angle range {:?}",
                self.angle_range
            )));
        }
        if !(s0 > 0.0 && s0 <= s1 && s1.is_finite()) {
            return Err(Error::Config(format!(
                "bad scale range {:?}",
                self.scale_range
            )));
        }
        Ok(())
    }
}

/// Rotates the patch about its centre by `angle` degrees (counter-clockwise
/// as displayed, rows growing downwards), then scales it isotropically.
/// Every channel gets the same transform.
pub fn augment_patch(p: &Patch, angle: f64, scale: f64) -> Result<Patch> {
    if !(scale > 0.0 && scale.is_finite()) || !angle.is_finite() {
        return Err(Error::Config(format!(
            "invalid augmentation angle {angle} / scale {scale}"
        )));
    }
    let [c, h, w]: [usize; 3] = p
        .pixels
        .shape()
        .try_into()
        .map_err(|_| Error::Data("patch pixels must be [C,H,W]".into()))?;
    let (sin, cos) = angle.to_radians().sin_cos();
    let (cy, cx) = ((h as f64 - 1.0) / 2.0, (w as f64 - 1.0) / 2.0);
    let (max_y, max_x) = (h as f64 - 1.0, w as f64 - 1.0);
    let src = p.pixels.data();
    let mut out = vec![0.0f32; c * h * w];
    for y in 0..h {
        for x in 0..w {
            let (dx, dy) = ((x as f64 - cx) / scale, (y as f64 - cy) / scale);
            let sx = (cx + dx * cos - dy * sin).clamp(0.0, max_x);
            let sy = (cy + dx * sin + dy * cos).clamp(0.0, max_y);
            let (x0, y0) = (sx.floor() as usize, sy.floor() as usize);
            let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
            let (fx, fy) = (sx - x0 as f64, sy - y0 as f64);
            for ch in 0..c {
                let plane = &src[ch * h * w..(ch + 1) * h * w];
                let v = |yy: usize, xx: usize| plane[yy * w + xx] as f64;
                let top = v(y0, x0) * (1.0 - fx) + v(y0, x1) * fx;
                let bottom = v(y1, x0) * (1.0 - fx) + v(y1, x1) * fx;
                out[ch * h * w + y * w + x] = (top * (1.0 - fy) + bottom * fy) as f32;
            }
        }
    }
    Ok(Patch {
        pixels: Tensor::new(vec![c, h, w], out)?,
        label: p.label,
        scan_id: p.scan_id.clone(),
        lesion_id: p.lesion_id.clone(),
        augmented_from: Some(p.root_lesion().to_string()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Label;

    fn ramp(h: usize, w: usize) -> Patch {
        let data = (0..3 * h * w)
            .map(|i| ((i * 37) % 101) as f32 / 100.0)
            .collect();
        Patch {
            pixels: Tensor::new(vec![3, h, w], data).unwrap(),
            label: Label::Nodule,
            scan_id: "s".into(),
            lesion_id: "l".into(),
            augmented_from: None,
        }
    }

    fn blob(n: usize) -> Patch {
        let c = (n as f64 - 1.0) / 2.0;
        let mut data = Vec::new();
        for _ in 0..3 {
            for y in 0..n {
                for x in 0..n {
                    let d2 = (y as f64 - c).powi(2) + (x as f64 - c).powi(2);
                    data.push((0.1 + 0.8 * (-d2 / 18.0).exp()) as f32);
                }
            }
        }
        Patch {
            pixels: Tensor::new(vec![3, n, n], data).unwrap(),
            ..ramp(n, n)
        }
    }

    #[test]
    fn identity_transform() {
        let p = ramp(12, 9);
        let a = augment_patch(&p, 0.0, 1.0).unwrap();
        for (x, y) in a.pixels.data().iter().zip(p.pixels.data()) {
            assert!((x - y).abs() <= 1e-6);
        }
        assert_eq!(a.augmented_from.as_deref(), Some("l"));
        assert_eq!((a.label, a.scan_id.as_str()), (p.label, p.scan_id.as_str()));
    }

    #[test]
    fn full_turn_matches_no_turn() {
        let p = ramp(16, 16);
        let a = augment_patch(&p, 0.0, 1.0).unwrap();
        let b = augment_patch(&p, 360.0, 1.0).unwrap();
        for (x, y) in a.pixels.data().iter().zip(b.pixels.data()) {
            assert!((x - y).abs() <= 1e-5);
        }
    }

    #[test]
    fn quarter_turn_matches_array_rotation() {
        let p = ramp(10, 10);
        let a = augment_patch(&p, 90.0, 1.0).unwrap();
        // counter-clockwise rot90: out[i][j] = in[j][n-1-i]
        for ch in 0..3 {
            for i in 0..10 {
                for j in 0..10 {
                    let got = a.pixels.data()[ch * 100 + i * 10 + j];
                    let want = p.pixels.data()[ch * 100 + j * 10 + 9 - i];
                    assert!((got - want).abs() < 1e-5);
                }
            }
        }
    }

    #[test]
    fn symmetric_blob_keeps_centre_mean_under_rotation() {
        let p = blob(48);
        let centre_mean = |q: &Patch| {
            let mut s = 0.0;
            for y in 16..32 {
                for x in 16..32 {
                    s += q.pixels.data()[48 * 48 + y * 48 + x];
                }
            }
            s / 256.0
        };
        let a = augment_patch(&p, 90.0, 1.0).unwrap();
        assert!((centre_mean(&a) - centre_mean(&p)).abs() < 1e-3);
        let b = augment_patch(&p, 33.0, 1.0).unwrap();
        assert!((centre_mean(&b) - centre_mean(&p)).abs() < 1e-2);
    }

    #[test]
    fn scaling_up_magnifies_and_fills_from_edges() {
        let p = blob(21);
        let zoomed = augment_patch(&p, 0.0, 2.0).unwrap();
        // the blob spreads: an off-centre pixel gets brighter
        let idx = 10 * 21 + 14;
        assert!(zoomed.pixels.data()[idx] > p.pixels.data()[idx]);
        let shrunk = augment_patch(&p, 0.0, 0.5).unwrap();
        assert!(shrunk
            .pixels
            .data()
            .iter()
            .all(|v| v.is_finite() && *v >= 0.0));
        assert!(augment_patch(&p, 0.0, 0.0).is_err());
        assert!(augment_patch(&p, f64::NAN, 1.0).is_err());
    }
}
