//! Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
//! criterion fails. Runs as a plain binary (`harness = false`).

mod common;

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use common::{brute_force_scores, gaussian_problem, rk4_tensor, rmse_vs, two_object_fixture, VIDEO};
use serde_json::Value;
use svr::cli::run_with_io;
use svr::denoiser::{BackboneConfig, ControlInput, ControlKind, FrameShape, INJECTED_BLOCKS};
use svr::metrics::{object_consistency, FeatureStack, MaskSet, Normalization, ObjectMask};
use svr::precond::{c_out, c_skip};
use svr::rng::SeededRng;
use svr::sampler::{cfg_combine, predict_x0};
use svr::{
    generate, invert, make_power_schedule, read_tensor, text_embed, BlockBackbone, ConditioningBundle,
    ConstantDenoiser, DenoiserModel, Dims4, GaussianAnalyticDenoiser, GuidanceParams, SpatialMaps, Tensor4,
};

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn rel(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(f64::MIN_POSITIVE)
}

fn text_cond(prompt: &str) -> ConditioningBundle {
    ConditioningBundle::text_only(text_embed(prompt)).unwrap()
}

fn clean_estimate_algebra() -> Outcome {
    let sd = 0.5;
    let (cs, co) = (c_skip(sd, sd), c_out(sd, sd));
    ensure(rel(cs, 0.5) <= 1e-6, || format!("c_skip {cs}"))?;
    ensure(rel(co, sd / 2f64.sqrt()) <= 1e-6, || format!("c_out {co}"))?;

    let x = Tensor4::randn(Dims4::new(1, 1, 2, 4), 11).unwrap();
    let n = Tensor4::randn(Dims4::new(1, 1, 2, 4), 12).unwrap();
    let got = predict_x0(&x, &n, 2.0, 0.5).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for (g, w) in got.data().iter().zip(common::PREDICT_X0_GOLDEN) {
        worst = worst.max(rel(*g as f64, w));
    }

    let d = Dims4::new(1, 1, 1, 4);
    let mk = |v: [f32; 4]| Tensor4::new(d, v.to_vec()).unwrap();
    let g = GaussianAnalyticDenoiser::new(mk([0.3, -0.7, 1.1, 0.0]), mk([0.25, 2.0, 0.01, 1.0]), 0.5).unwrap();
    let out = g.predict(&mk([1.5, -2.0, 0.4, 3.3]), 1.3, &text_cond("")).map_err(|e| e.to_string())?;
    for (o, w) in out.data().iter().zip(common::GAUSSIAN_GOLDEN) {
        worst = worst.max(rel(*o as f64, w));
    }
    ensure(worst <= 1e-6, || format!("golden rel err {worst:e}"))?;
    Ok(format!("c_skip={cs} c_out={co:.9} golden max rel err {worst:.2e}"))
}

fn guidance_identities() -> Outcome {
    let d = Dims4::new(2, 3, 4, 4);
    let mut rng = SeededRng::new(5);
    for trial in 0..50 {
        let mut draw = |_, _, _, _| if rng.uniform_f32() < 0.1 { -0.0 } else { rng.normal() as f32 };
        let cond = Tensor4::from_fn(d, &mut draw).unwrap();
        let uncond = Tensor4::from_fn(d, &mut draw).unwrap();
        let w = 20.0 * rng.uniform_f64();
        let at_zero = cfg_combine(&cond, &uncond, 0.0).map_err(|e| e.to_string())?;
        ensure(at_zero.bit_eq(&cond), || format!("trial {trial}: w=0 differs from conditional"))?;
        let same = cfg_combine(&cond, &cond, w).map_err(|e| e.to_string())?;
        ensure(same.bit_eq(&cond), || format!("trial {trial}: cond==uncond changed at w={w}"))?;
    }
    let one = Tensor4::filled(d, 1.0).unwrap();
    let zero = Tensor4::zeros(d).unwrap();
    let eight = cfg_combine(&one, &zero, 7.0).map_err(|e| e.to_string())?;
    ensure(eight.data().iter().all(|&v| v == 8.0), || "(1, 0, 7) is not 8".into())?;
    Ok("50 random trials bit-exact, (1,0,w=7) = 8".into())
}

fn exact_round_trip() -> Outcome {
    let s = make_power_schedule(50, 0.002, 80.0, 7.0).map_err(|e| e.to_string())?;
    let d = ConstantDenoiser::scalar(0.4, 0.5).unwrap();
    let x0 = Tensor4::randn(VIDEO, 2024).unwrap();
    let cond = text_cond("a synthetic scene");
    let x_t = invert(&x0, &s, &d, &cond, None).map_err(|e| e.to_string())?;
    let g = GuidanceParams::new(0.0, cond.clone(), cond).unwrap();
    let back = generate(&x_t, &s, &d, &g).map_err(|e| e.to_string())?;
    let err = back.max_abs_diff(&x0).unwrap();
    ensure(err <= 1e-4, || format!("max abs err {err:e}"))?;
    Ok(format!("max abs err {err:.2e} (N=50)"))
}

fn first_order_convergence() -> Outcome {
    let cond = text_cond("sim");
    let guidance = GuidanceParams::new(0.0, cond.clone(), cond.clone()).unwrap();
    let (s64, s128) = (make_power_schedule(64, 0.002, 80.0, 7.0).unwrap(), make_power_schedule(128, 0.002, 80.0, 7.0).unwrap());
    let mut ratios = Vec::new();
    let mut oracle_ratios = Vec::new();
    let mut oracle_rt = 0.0f64;
    for seed in 0..5 {
        let (d, x0) = gaussian_problem(seed);
        // One-shot oracle trajectory from σ_min to σ_max, and back.
        let oracle_t = rk4_tensor(&x0, &d, 0.002, 80.0, 4096);
        let oracle_t_tensor = Tensor4::new(VIDEO, oracle_t.iter().map(|&v| v as f32).collect()).unwrap();
        let there_and_back = rk4_tensor(&oracle_t_tensor, &d, 80.0, 0.002, 4096);
        oracle_rt = oracle_rt.max(rmse_vs(&x0, &there_and_back));

        let mut rt = Vec::new();
        let mut inv_err = Vec::new();
        for s in [&s64, &s128] {
            let x_t = invert(&x0, s, &d, &cond, None).map_err(|e| e.to_string())?;
            inv_err.push(rmse_vs(&x_t, &oracle_t));
            let back = generate(&x_t, s, &d, &guidance).map_err(|e| e.to_string())?;
            rt.push(back.rmse(&x0).unwrap());
        }
        ratios.push(rt[0] / rt[1]);
        oracle_ratios.push(inv_err[0] / inv_err[1]);
    }
    let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let oracle_mean = oracle_ratios.iter().sum::<f64>() / oracle_ratios.len() as f64;
    ensure((1.7..=2.3).contains(&mean), || format!("mean RMSE(64)/RMSE(128) = {mean:.4} over {ratios:?}"))?;
    ensure((1.7..=2.3).contains(&oracle_mean), || format!("inversion vs RK4 error ratio {oracle_mean:.4}"))?;
    ensure(oracle_rt <= 1e-4, || format!("RK4 oracle round trip rmse {oracle_rt:e}"))?;
    Ok(format!(
        "mean RMSE(64)/RMSE(128) = {mean:.4}; inversion-vs-RK4(4096) error ratio {oracle_mean:.4}; oracle round trip rmse {oracle_rt:.1e}"
    ))
}

fn control_gating() -> Outcome {
    let d = Dims4::new(2, 1, 4, 4);
    let mut m = SpatialMaps::default();
    m.set(ControlKind::Depth, Some(Tensor4::from_fn(d, |t, _, y, x| ((y * 4 + x + t) % 7) as f32 / 7.0).unwrap()));
    let cond = ConditioningBundle::new(Some(Arc::new(m)), text_embed("p")).unwrap();
    let cfg = BackboneConfig::new(FrameShape::of(d), 42)
        .with_control(vec![ControlInput { kind: ControlKind::Depth, channels: 1 }]);
    let bb = BlockBackbone::new(cfg).unwrap();
    let x = Tensor4::randn(d, 3).unwrap();

    let (_, traces) = bb.predict_traced(&x, 1.0, &cond).map_err(|e| e.to_string())?;
    let mut injected_at = Vec::new();
    for tap in &traces[0].blocks {
        let added = tap.final_.iter().zip(&tap.main).any(|(f, m)| f != m);
        ensure(added == tap.control.is_some(), || format!("block {} trace is inconsistent", tap.block))?;
        if added {
            injected_at.push(tap.block);
        }
    }
    ensure(injected_at == INJECTED_BLOCKS, || format!("residual added at {injected_at:?}"))?;

    let off = bb.with_control_weight(0.0).unwrap().predict(&x, 1.0, &cond).map_err(|e| e.to_string())?;
    let bare = bb.without_control().predict(&x, 1.0, &text_cond("p")).map_err(|e| e.to_string())?;
    ensure(off.bit_eq(&bare), || "w_c = 0 differs from control-free backbone".into())?;

    let residual = |w: f64| -> Vec<f64> {
        let (_, tr) = bb.with_control_weight(w).unwrap().predict_traced(&x, 1.0, &cond).unwrap();
        tr.iter().flat_map(|f| f.blocks[0].final_.iter().zip(&f.blocks[0].main).map(|(a, b)| a - b)).collect()
    };
    let unit = residual(1.0);
    let mut worst = 0.0f64;
    for w in [0.1, 0.5, 2.0, 4.0] {
        for (r, u) in residual(w).iter().zip(&unit) {
            worst = worst.max(rel(*r, w * u));
        }
    }
    ensure(worst <= 1e-6, || format!("first-block linearity rel err {worst:e}"))?;
    Ok(format!("residual only at blocks {injected_at:?}; w_c=0 bit-equal; linearity rel err {worst:.1e}"))
}

fn consistency_metric() -> Outcome {
    let d = Dims4::new(3, 4, 5, 5);
    let f = FeatureStack::new(Tensor4::from_fn(d, |t, c, y, x| 0.1 + ((t * 5 + c * 3 + y * 2 + x) % 7) as f32).unwrap());
    let neg = FeatureStack::new(f.tensor().map(|v| -v).unwrap());
    let masks = MaskSet::new(
        (0..3).map(|t| vec![ObjectMask::from_fn("o", 5, 5, move |y, x| (y * x + t) % 2 == 0).unwrap()]).collect(),
    )
    .unwrap();
    let same = object_consistency(&f, &f, &masks, Normalization::PerObjectMean).map_err(|e| e.to_string())?;
    ensure((same.overall.unwrap() - 1.0).abs() <= 1e-6, || format!("identical: {:?}", same.overall))?;
    let anti = object_consistency(&f, &neg, &masks, Normalization::PerObjectMean).map_err(|e| e.to_string())?;
    ensure((anti.overall.unwrap() + 1.0).abs() <= 1e-6, || format!("antipodal: {:?}", anti.overall))?;

    let (orig, gen, two) = two_object_fixture();
    let brute = brute_force_scores(&orig, &gen, &two);
    let brute_mean = brute[0].iter().map(|s| s.unwrap()).sum::<f64>() / 2.0;
    let brute_lit = brute[0].iter().map(|s| s.unwrap()).sum::<f64>() / 1.0;
    let mean = object_consistency(&orig, &gen, &two, Normalization::PerObjectMean).unwrap().overall.unwrap();
    let lit = object_consistency(&orig, &gen, &two, Normalization::Eq7Literal).unwrap().overall.unwrap();
    ensure((mean - 0.7).abs() <= 1e-12 && (mean - brute_mean).abs() <= 1e-12, || format!("per_object_mean {mean}"))?;
    ensure((lit - 1.4).abs() <= 1e-12 && (lit - brute_lit).abs() <= 1e-12, || format!("literal {lit}"))?;

    let dd = Dims4::new(4, 3, 6, 6);
    let a = FeatureStack::new(Tensor4::randn(dd, 1).unwrap());
    let b = FeatureStack::new(Tensor4::randn(dd, 2).unwrap());
    let mut rng = SeededRng::new(3);
    let frames: Vec<Vec<ObjectMask>> = (0..4)
        .map(|t| {
            (0..4)
                .map(|k| {
                    let bits = (0..36).map(|_| (rng.uniform_f32() < 0.35) as u8).collect();
                    ObjectMask::new(format!("{t}.{k}"), 6, 6, bits).unwrap()
                })
                .collect()
        })
        .collect();
    let set = MaskSet::new(frames.clone()).unwrap();
    let modes = [Normalization::PerObjectMean, Normalization::Eq7Literal];
    let base: Vec<u64> = modes.iter().map(|&m| object_consistency(&a, &b, &set, m).unwrap().overall.unwrap().to_bits()).collect();
    for i in 0..100 {
        let shuffled: Vec<Vec<ObjectMask>> = frames
            .iter()
            .map(|f| {
                let mut f = f.clone();
                for j in (1..f.len()).rev() {
                    let k = ((rng.uniform_f64() * (j + 1) as f64) as usize).min(j);
                    f.swap(j, k);
                }
                f
            })
            .collect();
        let set = MaskSet::new(shuffled).unwrap();
        for (&m, &want) in modes.iter().zip(&base) {
            let got = object_consistency(&a, &b, &set, m).unwrap().overall.unwrap().to_bits();
            ensure(got == want, || format!("shuffle {i} changed the {m:?} score"))?;
        }
    }
    Ok(format!("identical {:.7}, antipodal {:.7}, fixture {mean} / {lit}, 100 shuffles exact", same.overall.unwrap(), anti.overall.unwrap()))
}

fn cli(args: &[&str]) -> Result<String, String> {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run_with_io(std::iter::once("svr").chain(args.iter().copied()), &mut out, &mut err);
    if code != 0 {
        return Err(format!("`svr {}` exited {code}: {}", args.join(" "), String::from_utf8_lossy(&err).trim()));
    }
    Ok(String::from_utf8(out).unwrap())
}

fn snapshot(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.clone(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_variant(fx: &Path, base: &str, name: &str, edit: impl FnOnce(&mut Value)) -> PathBuf {
    let mut v: Value = serde_json::from_slice(&std::fs::read(fx.join(base)).unwrap()).unwrap();
    edit(&mut v);
    let p = fx.join(name);
    std::fs::write(&p, serde_json::to_vec_pretty(&v).unwrap()).unwrap();
    p
}

fn determinism_and_identity() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let fx = tmp.path().join("fx");
    cli(&["make-fixtures", "--out", s(&fx), "--seed", "7"])?;

    let identity = write_variant(&fx, "identity.json", "identity50.json", |v| {
        v["schedule"] = serde_json::json!({"n_steps": 50});
    });
    cli(&["enhance", "--config", s(&identity)])?;
    let x = read_tensor(fx.join("video.svrt")).map_err(|e| e.to_string())?;
    let y = read_tensor(fx.join("out/identity.svrt")).map_err(|e| e.to_string())?;
    let err = y.max_abs_diff(&x).unwrap();
    ensure(err <= 1e-4, || format!("identity max abs err {err:e}"))?;

    let small = write_variant(&fx, "enhance.json", "small.json", |v| v["schedule"]["n_steps"] = serde_json::json!(6));
    let inv = write_variant(&fx, "small.json", "inv.json", |v| v["output"] = serde_json::json!("out/x_t.svrt"));
    let gen = write_variant(&fx, "small.json", "gen.json", |v| {
        v["input"] = serde_json::json!("out/x_t.svrt");
        v["output"] = serde_json::json!("out/x_0.svrt");
    });
    let fx2 = tmp.path().join("fx2");
    let (masks, sidecar, video) = (fx.join("masks.svrt"), fx.join("masks.json"), fx.join("video.svrt"));
    let enhanced = fx.join("out/enhanced.svrt");
    let metric_out = fx.join("out/metric");
    let sweep_out = fx.join("sweep");
    let roundtrip = fx.join("roundtrip.json");
    let commands: Vec<(&str, Vec<&str>)> = vec![
        ("make-fixtures", vec!["make-fixtures", "--out", s(&fx2), "--seed", "7"]),
        ("enhance", vec!["enhance", "--config", s(&small)]),
        ("invert", vec!["invert", "--config", s(&inv)]),
        ("generate", vec!["generate", "--config", s(&gen)]),
        ("roundtrip", vec!["roundtrip", "--config", s(&roundtrip)]),
        (
            "metric",
            vec![
                "metric", "--orig", s(&video), "--gen", s(&enhanced), "--masks", s(&masks), "--sidecar", s(&sidecar),
                "--toy-stride", "1", "--out", s(&metric_out),
            ],
        ),
        ("sweep-cfg", vec!["sweep-cfg", "--config", s(&small), "--out", s(&sweep_out)]),
        ("schedule", vec!["schedule", "--n-steps", "35"]),
    ];
    let mut checked = Vec::new();
    for (name, args) in &commands {
        let out1 = cli(args)?;
        let snap1 = snapshot(tmp.path());
        let out2 = cli(args)?;
        let snap2 = snapshot(tmp.path());
        ensure(out1 == out2, || format!("{name}: stdout differs"))?;
        ensure(snap1 == snap2, || {
            let diff: Vec<_> = snap1.iter().zip(&snap2).filter(|(a, b)| a != b).map(|(a, _)| a.0.display().to_string()).collect();
            format!("{name}: artifacts differ {diff:?}")
        })?;
        checked.push(*name);
    }
    Ok(format!("identity max abs err {err:.1e}; byte-identical reruns: {}", checked.join(", ")))
}

fn desk_demo() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let fx = tmp.path().join("fx");
    cli(&["make-fixtures", "--out", s(&fx), "--seed", "0"])?;
    let cfg: Value = serde_json::from_slice(&std::fs::read(fx.join("enhance.json")).unwrap()).unwrap();
    ensure(cfg["schedule"]["n_steps"] == 35 && cfg["w_cfg"] == 7.0, || "fixture config is not N=35, w_cfg=7".into())?;
    cli(&["enhance", "--config", s(&fx.join("enhance.json"))])?;
    let prefix = fx.join("out/consistency");
    cli(&[
        "metric",
        "--orig",
        s(&fx.join("video.svrt")),
        "--gen",
        s(&fx.join("out/enhanced.svrt")),
        "--masks",
        s(&fx.join("masks.svrt")),
        "--sidecar",
        s(&fx.join("masks.json")),
        "--toy-stride",
        "1",
        "--out",
        s(&prefix),
    ])?;
    let report: Value = serde_json::from_slice(&std::fs::read(fx.join("out/consistency.json")).unwrap()).unwrap();
    let rows = report["rows"].as_array().ok_or("no rows")?;
    ensure(report["status"] == "ok", || format!("status {}", report["status"]))?;
    ensure(rows.len() == 16, || format!("{} rows, expected 16", rows.len()))?;
    for r in rows {
        let sc = r["score"].as_f64().ok_or_else(|| format!("null score in {r}"))?;
        ensure(sc.is_finite() && (-1.0..=1.0).contains(&sc), || format!("score {sc} out of range"))?;
    }
    let overall = report["overall"].as_f64().ok_or("null overall")?;
    ensure(overall.is_finite() && (-1.0..=1.0).contains(&overall), || format!("overall {overall}"))?;
    ensure(report["per_frame_means"].as_array().map(|a| a.len()) == Some(8), || "per-frame means".into())?;
    ensure(fx.join("out/consistency.csv").exists(), || "CSV missing".into())?;
    Ok(format!("16 object rows, overall consistency {overall:.6}"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome, Duration); 8] = [
        ("clean-estimate algebra and goldens", clean_estimate_algebra, Duration::from_secs(1)),
        ("guidance identities", guidance_identities, Duration::from_secs(1)),
        ("exact constant-target round trip", exact_round_trip, Duration::from_secs(5)),
        ("first-order convergence", first_order_convergence, Duration::from_secs(60)),
        ("control injection gating", control_gating, Duration::from_secs(5)),
        ("object consistency metric", consistency_metric, Duration::from_secs(5)),
        ("pipeline determinism and identity", determinism_and_identity, Duration::from_secs(10)),
        ("end-to-end desk demo", desk_demo, Duration::from_secs(30)),
    ];
    let mut failed = 0;
    for (i, (name, f, limit)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > *limit => Err(format!("{detail}; runtime over {limit:?}")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS [{}] {name} ({:.2} s): {detail}", i + 1, elapsed.as_secs_f64()),
            Err(why) => {
                failed += 1;
                println!("FAIL [{}] {name} ({:.2} s): {why}", i + 1, elapsed.as_secs_f64());
            }
        }
    }
    println!("{} of {} acceptance criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
