//! Hand-built dense features for desk-scale runs.
//!
//! With `L` the per-pixel channel mean, the eight channels are:
//!
//! | ch | feature |
//! |----|---------|
//! | 0–2 | raw channels 0, 1, 2 (the last channel repeats when `C < 3`) |
//! | 3 | horizontal forward difference `L[y][x+1] − L[y][x]` (0 in the last column) |
//! | 4 | vertical forward difference `L[y+1][x] − L[y][x]` (0 in the last row) |
//! | 5 | 3×3 local mean of `L`, borders replicated |
//! | 6 | 3×3 local standard deviation of `L` |
//! | 7 | gradient magnitude `√(ch3² + ch4²)` |
//!
//! The full-resolution maps are then average-pooled over `stride × stride`
//! cells, giving `H' = H / stride`, `W' = W / stride` (remainders dropped).
//! `stride` is clamped to `1..=min(H, W)`.

use super::features::FeatureStack;
use crate::tensor::{Dims4, Tensor4};

pub const TOY_FEATURE_DIM: usize = 8;

pub fn toy_feature_extractor(frames: &Tensor4, stride: usize) -> FeatureStack {
    let d = frames.dims();
    let (h, w) = (d.height, d.width);
    let stride = stride.clamp(1, h.min(w));
    let (oh, ow) = (h / stride, w / stride);
    let plane = h * w;
    let mut out = Vec::with_capacity(d.frames * TOY_FEATURE_DIM * oh * ow);

    for t in 0..d.frames {
        let frame = frames.frame(t);
        let lum: Vec<f64> = (0..plane)
            .map(|p| (0..d.channels).map(|c| frame[c * plane + p] as f64).sum::<f64>() / d.channels as f64)
            .collect();
        let at = |y: usize, x: usize| lum[y * w + x];
        let mut feats = vec![0.0f64; TOY_FEATURE_DIM * plane];
        for y in 0..h {
            for x in 0..w {
                let p = y * w + x;
                for c in 0..3 {
                    feats[c * plane + p] = frame[c.min(d.channels - 1) * plane + p] as f64;
                }
                let dx = if x + 1 < w { at(y, x + 1) - at(y, x) } else { 0.0 };
                let dy = if y + 1 < h { at(y + 1, x) - at(y, x) } else { 0.0 };
                feats[3 * plane + p] = dx;
                feats[4 * plane + p] = dy;

                // Deviations from the center value keep constant windows at exactly zero spread.
                let center = at(y, x);
                let (mut s, mut s2) = (0.0, 0.0);
                for oy in [-1isize, 0, 1] {
                    for ox in [-1isize, 0, 1] {
                        let yy = (y as isize + oy).clamp(0, h as isize - 1) as usize;
                        let xx = (x as isize + ox).clamp(0, w as isize - 1) as usize;
                        let dv = at(yy, xx) - center;
                        s += dv;
                        s2 += dv * dv;
                    }
                }
                let mean_dev = s / 9.0;
                feats[5 * plane + p] = center + mean_dev;
                feats[6 * plane + p] = (s2 / 9.0 - mean_dev * mean_dev).max(0.0).sqrt();
                feats[7 * plane + p] = (dx * dx + dy * dy).sqrt();
            }
        }
        let cell = (stride * stride) as f64;
        for c in 0..TOY_FEATURE_DIM {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = 0.0;
                    for yy in oy * stride..(oy + 1) * stride {
                        for xx in ox * stride..(ox + 1) * stride {
                            acc += feats[c * plane + yy * w + xx];
                        }
                    }
                    out.push((acc / cell) as f32);
                }
            }
        }
    }
    FeatureStack::new(
        Tensor4::new(Dims4::new(d.frames, TOY_FEATURE_DIM, oh, ow), out).expect("finite features of finite input"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_input_has_flat_features() {
        let x = Tensor4::filled(Dims4::new(2, 3, 5, 5), 0.37).unwrap();
        let f = toy_feature_extractor(&x, 1);
        let t = f.tensor();
        for fr in 0..2 {
            for y in 0..5 {
                for xx in 0..5 {
                    for c in [3, 4, 6, 7] {
                        assert_eq!(t.get(fr, c, y, xx), 0.0);
                    }
                    assert_eq!(t.get(fr, 5, y, xx), 0.37);
                }
            }
        }
    }

    #[test]
    fn deterministic() {
        let x = Tensor4::randn(Dims4::new(2, 1, 8, 8), 4).unwrap();
        assert!(toy_feature_extractor(&x, 2).tensor().bit_eq(toy_feature_extractor(&x, 2).tensor()));
    }

    // 4x4 frame, columns 0-1 are 0 and columns 2-3 are 1: the forward
    // horizontal difference is 1 in column 1 and 0 elsewhere, and the
    // vertical difference is 0 everywhere.
    #[test]
    fn vertical_step_edge() {
        let x = Tensor4::from_fn(Dims4::new(1, 1, 4, 4), |_, _, _, c| if c >= 2 { 1.0 } else { 0.0 }).unwrap();
        let f = toy_feature_extractor(&x, 1);
        let t = f.tensor();
        for y in 0..4 {
            for c in 0..4 {
                assert_eq!(t.get(0, 3, y, c), if c == 1 { 1.0 } else { 0.0 });
                assert_eq!(t.get(0, 4, y, c), 0.0);
                assert_eq!(t.get(0, 7, y, c), if c == 1 { 1.0 } else { 0.0 });
            }
        }
        // Local mean at (0, 1): window columns 0..=2 with row 0 replicated -> 3/9.
        assert!((t.get(0, 5, 0, 1) - 1.0 / 3.0).abs() < 1e-7);
    }

    #[test]
    fn stride_pools_and_clamps() {
        let x = Tensor4::randn(Dims4::new(1, 2, 6, 4), 1).unwrap();
        let f = toy_feature_extractor(&x, 2);
        assert_eq!(f.dims(), Dims4::new(1, 8, 3, 2));
        let full = toy_feature_extractor(&x, 1);
        let t = full.tensor();
        let want = (t.get(0, 0, 2, 2) + t.get(0, 0, 2, 3) + t.get(0, 0, 3, 2) + t.get(0, 0, 3, 3)) as f64 / 4.0;
        assert!((f.tensor().get(0, 0, 1, 1) as f64 - want).abs() < 1e-6);
        assert_eq!(toy_feature_extractor(&x, 0).dims(), Dims4::new(1, 8, 6, 4));
        assert_eq!(toy_feature_extractor(&x, 99).dims(), Dims4::new(1, 8, 1, 1));
    }
}
