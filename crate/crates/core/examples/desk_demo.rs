//! The whole workflow through the command layer: build fixtures, enhance
//! the clip, score it, and print the report.
//!
//! ```text
//! cargo run --example desk_demo -- /tmp/desk
//! ```

use std::path::PathBuf;

use svr::cli::run_with_io;

fn svr(args: &[&str]) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run_with_io(std::iter::once("svr").chain(args.iter().copied()), &mut out, &mut err);
    print!("$ svr {}\n{}", args.join(" "), String::from_utf8_lossy(&out));
    if code != 0 {
        eprint!("{}", String::from_utf8_lossy(&err));
        std::process::exit(code);
    }
}

fn main() {
    let tmp = tempfile::tempdir().unwrap();
    let root = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| tmp.path().to_path_buf());
    let p = |s: &str| root.join(s).to_str().unwrap().to_owned();

    svr(&["make-fixtures", "--out", &p(""), "--seed", "0"]);
    svr(&["enhance", "--config", &p("enhance.json")]);
    svr(&[
        "metric", "--orig", &p("video.svrt"), "--gen", &p("out/enhanced.svrt"), "--masks", &p("masks.svrt"),
        "--sidecar", &p("masks.json"), "--toy-stride", "1", "--out", &p("out/consistency"),
    ]);
    print!("{}", std::fs::read_to_string(p("out/consistency.csv")).unwrap());
}
