//! Score how well objects keep their features between an original and a
//! perturbed clip, under both aggregation modes.

use svr::metrics::{frame_perceptual_distance, object_consistency, toy_feature_extractor, MaskSet, Normalization, ObjectMask};
use svr::{Dims4, Tensor4};

fn main() {
    let d = Dims4::new(3, 1, 16, 16);
    let orig = Tensor4::from_fn(d, |t, _, y, x| ((x * 3 + y + t) as f32 * 0.2).sin()).unwrap();
    let noise = Tensor4::randn(d, 5).unwrap();
    let frames = (0..3)
        .map(|t| {
            vec![
                ObjectMask::from_fn("left box", 16, 16, |y, x| x < 6 && y < 6).unwrap(),
                ObjectMask::from_fn("band", 16, 16, move |y, _| y == 10 + t).unwrap(),
            ]
        })
        .collect();
    let masks = MaskSet::new(frames).unwrap();

    for amount in [0.0f32, 0.1, 0.5, 2.0] {
        let gen = orig.zip_map(&noise, |o, n| o + amount * n).unwrap();
        let (fo, fg) = (toy_feature_extractor(&orig, 1), toy_feature_extractor(&gen, 1));
        let mean = object_consistency(&fo, &fg, &masks, Normalization::PerObjectMean).unwrap();
        let lit = object_consistency(&fo, &fg, &masks, Normalization::Eq7Literal).unwrap();
        let pd = frame_perceptual_distance(&fo, &fg).unwrap();
        println!(
            "noise {amount:<4} per_object_mean {:.4}  literal {:.4}  perceptual {:.4}",
            mean.overall.unwrap(),
            lit.overall.unwrap(),
            pd.mean
        );
    }
    let gen = orig.zip_map(&noise, |o, n| o + 0.5 * n).unwrap();
    let r = object_consistency(&toy_feature_extractor(&orig, 1), &toy_feature_extractor(&gen, 1), &masks, Normalization::default()).unwrap();
    print!("{}", String::from_utf8(r.to_csv().unwrap()).unwrap());
}
