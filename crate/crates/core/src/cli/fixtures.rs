//! A tiny night-driving scene: a bright traffic light sliding right across
//! a road gradient plus a static dark sign, with matching spatial maps,
//! object masks and ready-to-run configs.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::manifest::PendingWrites;
use super::CliError;
use crate::format::encode_tensor;
use crate::metrics::{MaskSet, ObjectMask};
use crate::tensor::{Dims4, Tensor4};

pub const FIXTURE_FRAMES: usize = 8;
pub const FIXTURE_SIZE: usize = 16;
const LIGHT: usize = 4;
const SIGN: usize = 3;
const SIGN_AT: [usize; 2] = [11, 11];

pub const PROMPT_INV: &str = "a computer-rendered driving scene at night with a red traffic light";
pub const PROMPT_REAL: &str = "a photorealistic dashcam video of a city street at night with a red traffic light";
pub const PROMPT_NEG: &str = "cartoon, CGI, video game render, low quality";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureInfo {
    pub seed: u64,
    pub n_frames: usize,
    pub height: usize,
    pub width: usize,
    /// Top-left `[row, col]` of the 4x4 traffic light per frame.
    pub light_positions: Vec<[usize; 2]>,
    /// Top-left `[row, col]` of the 3x3 sign.
    pub sign_position: [usize; 2],
    pub files: Vec<String>,
}

fn light_at(t: usize) -> [usize; 2] {
    [2, 1 + t]
}

fn inside(p: [usize; 2], size: usize, y: usize, x: usize) -> bool {
    (p[0]..p[0] + size).contains(&y) && (p[1]..p[1] + size).contains(&x)
}

#[derive(Clone, Copy, PartialEq)]
enum Region {
    Road,
    Light,
    Sign,
}

fn region(t: usize, y: usize, x: usize) -> Region {
    if inside(light_at(t), LIGHT, y, x) {
        Region::Light
    } else if inside(SIGN_AT, SIGN, y, x) {
        Region::Sign
    } else {
        Region::Road
    }
}

fn json_bytes(v: &serde_json::Value) -> Vec<u8> {
    let mut b = serde_json::to_vec_pretty(v).expect("serializable");
    b.push(b'\n');
    b
}

pub fn cmd_make_fixtures(out: &Path, seed: u64) -> Result<FixtureInfo, CliError> {
    let d = Dims4::new(FIXTURE_FRAMES, 1, FIXTURE_SIZE, FIXTURE_SIZE);
    let last = (FIXTURE_SIZE - 1) as f32;
    let clean = Tensor4::from_fn(d, |t, _, y, x| match region(t, y, x) {
        Region::Light => 0.95,
        Region::Sign => -0.5,
        Region::Road => -0.3 + 0.4 * y as f32 / last + 0.05 * (0.7 * x as f32).sin(),
    })
    .expect("finite");
    let noise = Tensor4::randn(d, seed).expect("finite");
    let video = clean.zip_map(&noise, |c, n| c + 0.02 * n).expect("finite");
    let depth = Tensor4::from_fn(d, |t, _, y, x| match region(t, y, x) {
        Region::Light => 0.2,
        Region::Sign => 0.4,
        Region::Road => 1.0 - y as f32 / FIXTURE_SIZE as f32,
    })
    .expect("finite");
    let seg_value = |r: Region| match r {
        Region::Road => 0.0,
        Region::Light => 1.0,
        Region::Sign => 0.5,
    };
    let segmentation = Tensor4::from_fn(d, |t, _, y, x| seg_value(region(t, y, x))).expect("finite");
    let edge = Tensor4::from_fn(d, |t, _, y, x| {
        let here = region(t, y, x);
        let right = x + 1 < FIXTURE_SIZE && region(t, y, x + 1) != here;
        let down = y + 1 < FIXTURE_SIZE && region(t, y + 1, x) != here;
        if right || down {
            1.0
        } else {
            0.0
        }
    })
    .expect("finite");

    let frames: Vec<Vec<ObjectMask>> = (0..FIXTURE_FRAMES)
        .map(|t| {
            vec![
                ObjectMask::from_fn("traffic light", FIXTURE_SIZE, FIXTURE_SIZE, |y, x| region(t, y, x) == Region::Light)
                    .expect("binary"),
                ObjectMask::from_fn("traffic sign", FIXTURE_SIZE, FIXTURE_SIZE, |y, x| region(t, y, x) == Region::Sign)
                    .expect("binary"),
            ]
        })
        .collect();
    let (mask_tensor, sidecar) = MaskSet::new(frames)?.to_tensor().expect("non-empty, one resolution");

    let spatial = json!({ "depth": "depth.svrt", "segmentation": "segmentation.svrt", "edge": "edge.svrt" });
    let prompts = json!({ "inv": PROMPT_INV, "real": PROMPT_REAL, "neg": PROMPT_NEG });
    let enhance = json!({
        "schedule": { "n_steps": 35 },
        "denoiser": { "kind": "backbone", "seed": seed },
        "prompts": prompts,
        "w_cfg": 7.0,
        "w_c": 1.0,
        "input": "video.svrt",
        "spatial": spatial,
        "output": "out/enhanced.svrt",
        "seed": seed,
        "metrics": { "masks": "masks.svrt", "mask_sidecar": "masks.json", "stride": 1 },
    });
    let roundtrip = json!({
        "schedule": { "n_steps": 64 },
        "denoiser": { "kind": "gaussian", "mean": "gauss_mean.svrt", "var": 0.04 },
        "prompts": prompts,
        "input": "video.svrt",
        "output": "out/roundtrip.json",
    });
    let identity = json!({
        "denoiser": { "kind": "constant", "value": 0.0 },
        "prompts": { "inv": PROMPT_INV, "real": PROMPT_INV, "neg": PROMPT_NEG },
        "w_cfg": 0.0,
        "input": "video.svrt",
        "output": "out/identity.svrt",
    });

    let mut writes = PendingWrites::default();
    let mut files = Vec::new();
    let mut add = |name: &str, bytes: Vec<u8>| {
        files.push(name.to_string());
        writes.push(name, out.join(name), bytes);
    };
    add("video.svrt", encode_tensor(&video));
    add("gauss_mean.svrt", encode_tensor(&clean));
    add("depth.svrt", encode_tensor(&depth));
    add("segmentation.svrt", encode_tensor(&segmentation));
    add("edge.svrt", encode_tensor(&edge));
    add("masks.svrt", encode_tensor(&mask_tensor));
    add("masks.json", json_bytes(&serde_json::to_value(&sidecar).expect("serializable")));
    add("enhance.json", json_bytes(&enhance));
    add("roundtrip.json", json_bytes(&roundtrip));
    add("identity.json", json_bytes(&identity));

    let mut info = FixtureInfo {
        seed,
        n_frames: FIXTURE_FRAMES,
        height: FIXTURE_SIZE,
        width: FIXTURE_SIZE,
        light_positions: (0..FIXTURE_FRAMES).map(light_at).collect(),
        sign_position: SIGN_AT,
        files,
    };
    info.files.push("fixtures.json".into());
    writes.push("fixtures.json", out.join("fixtures.json"), json_bytes(&serde_json::to_value(&info).expect("serializable")));
    writes.commit()?;
    Ok(info)
}
