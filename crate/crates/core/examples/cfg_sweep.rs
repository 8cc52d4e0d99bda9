//! Generate the desk fixtures in a scratch directory and sweep the guidance
//! weight, printing the consistency of each output against the source.

use svr::cli::{cmd_make_fixtures, cmd_sweep_cfg, Overrides, SweepArgs};

fn main() {
    let dir = tempfile::tempdir().unwrap();
    cmd_make_fixtures(dir.path(), 0).unwrap();
    let args = SweepArgs {
        config: dir.path().join("enhance.json"),
        values: vec![0.0, 1.0, 3.0, 7.0, 11.0],
        out: dir.path().join("sweep"),
        overrides: Overrides { n_steps: Some(12), ..Default::default() },
    };
    for row in cmd_sweep_cfg(&args).unwrap() {
        println!(
            "w_cfg {:>5}  {:<10} consistency {:>8}  perceptual {:.5}",
            row.w_cfg,
            format!("{:?}", row.status),
            row.consistency.map(|c| format!("{c:.5}")).unwrap_or_else(|| "-".into()),
            row.perceptual_distance,
        );
    }
    print!("{}", std::fs::read_to_string(dir.path().join("sweep/sweep.csv")).unwrap());
}
