//! Trace the seeded block backbone and show where the control branch adds
//! its residual, and how that residual scales with the control weight.

use std::sync::Arc;

use svr::denoiser::{BackboneConfig, ControlInput, ControlKind, FrameShape};
use svr::{text_embed, BlockBackbone, ConditioningBundle, Dims4, SpatialMaps, Tensor4};

fn rms(v: &[f64]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
}

fn main() {
    let d = Dims4::new(1, 1, 8, 8);
    let mut maps = SpatialMaps::default();
    maps.set(ControlKind::Depth, Some(Tensor4::from_fn(d, |_, _, y, _| 1.0 - y as f32 / 8.0).unwrap()));
    maps.set(ControlKind::Edge, Some(Tensor4::from_fn(d, |_, _, y, x| (x == 4 || y == 4) as u8 as f32).unwrap()));
    let cond = ConditioningBundle::new(Some(Arc::new(maps)), text_embed("a road at dusk")).unwrap();

    let cfg = BackboneConfig::new(FrameShape::of(d), 42).with_control(vec![
        ControlInput { kind: ControlKind::Depth, channels: 1 },
        ControlInput { kind: ControlKind::Edge, channels: 1 },
    ]);
    let bb = BlockBackbone::new(cfg).unwrap();
    let x = Tensor4::randn(d, 9).unwrap();

    for w_c in [0.0, 0.5, 1.0, 2.0] {
        let (_, traces) = bb.with_control_weight(w_c).unwrap().predict_traced(&x, 1.0, &cond).unwrap();
        print!("w_c = {w_c:<4}");
        for tap in &traces[0].blocks {
            let added: Vec<f64> = tap.final_.iter().zip(&tap.main).map(|(f, m)| f - m).collect();
            print!("  block {}: {:.3e}", tap.block, rms(&added));
        }
        println!();
    }
}
