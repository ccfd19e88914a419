use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use gael_cli::manifest::RunManifest;
use gael_cli::svg;

fn gael(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gael"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str], dir: &Path) {
    let out = gael(args, dir);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn code(args: &[&str], dir: &Path) -> i32 {
    gael(args, dir).status.code().expect("exit code")
}

const TINY: &[&str] = &["--hidden", "8,8", "--batch-size", "16", "--steps", "4"];

fn train_args<'a>(extra: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec!["train", "--data", "data.csv", "--truth-gmm", "data.gmm.json"];
    v.extend_from_slice(TINY);
    v.extend_from_slice(extra);
    v
}

#[test]
fn make_data_defaults_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["make-data", "--n", "300", "--out", "a.csv"], d);
    ok(&["make-data", "--n", "300", "--out", "b.csv"], d);
    assert_eq!(fs::read(d.join("a.csv")).unwrap(), fs::read(d.join("b.csv")).unwrap());
    assert_eq!(fs::read(d.join("a.gmm.json")).unwrap(), fs::read(d.join("b.gmm.json")).unwrap());
    let truth = gael::gmm::GmmModel::<f64>::from_json(&fs::read_to_string(d.join("a.gmm.json")).unwrap()).unwrap();
    assert_eq!(truth.n_components(), 25);
    let text = fs::read_to_string(d.join("a.csv")).unwrap();
    assert!(text.starts_with("x0,x1,label\n"));
    assert_eq!(text.lines().count(), 301);
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&["make-data", "--n", "0", "--out", "x.csv"], d), 2);
    assert_eq!(code(&["make-data", "--out", "x.csv", "--std", "-1"], d), 2);
    assert_eq!(code(&["no-such-command"], d), 2);
    assert_eq!(code(&["generate", "--ckpt", "c.json", "--prior", "--gmm", "g.json", "--out", "o.csv"], d), 2);
}

#[test]
fn io_errors_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&["train", "--data", "missing.csv", "--out-dir", "run"], d), 4);
    fs::write(d.join("bad.csv"), "x0,x1\n1,2\n3\n").unwrap();
    let out = gael(&["plot", "--points", "bad.csv", "--out", "p.svg"], d);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn numeric_abort_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["make-data", "--n", "200", "--out", "data.csv"], d);
    let mut args = train_args(&["--out-dir", "run", "--lr", "1e30", "--precision", "f32"]);
    let i = args.iter().position(|a| *a == "4").unwrap();
    args[i] = "50";
    let out = gael(&args, d);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("non-finite"));
}

#[test]
fn training_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["make-data", "--n", "200", "--out", "data.csv"], d);
    ok(&train_args(&["--out-dir", "r1", "--checkpoint-every", "2"]), d);
    ok(&train_args(&["--out-dir", "r2", "--checkpoint-every", "2"]), d);
    for f in ["metrics.csv", "checkpoint.json", "checkpoint_step000002.json"] {
        assert_eq!(fs::read(d.join("r1").join(f)).unwrap(), fs::read(d.join("r2").join(f)).unwrap(), "{f}");
    }
    let log = fs::read_to_string(d.join("r1/metrics.csv")).unwrap();
    assert!(log.starts_with("step,adv,enc,gp,modes_covered,off_manifold_frac\n"));
    assert_eq!(log.lines().count(), 5);
    let m: RunManifest = serde_json::from_str(&fs::read_to_string(d.join("r1/manifest.json")).unwrap()).unwrap();
    assert_eq!(m.checkpoints.len(), 3);
    assert_eq!(m.commands[0].config["lambda"], 10.0);

    ok(&train_args(&["--out-dir", "base", "--lambda", "0"]), d);
    let m: RunManifest = serde_json::from_str(&fs::read_to_string(d.join("base/manifest.json")).unwrap()).unwrap();
    assert_eq!(m.commands[0].config["lambda"], 0.0);
    assert_eq!(m.commands[0].config["gan_kind"], "wgan_gp");
}

#[test]
fn full_pipeline_with_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mf = ["--manifest", "run.json"];
    let with = |args: &[&str]| -> Vec<String> {
        args.iter().chain(mf.iter()).map(|s| s.to_string()).collect()
    };
    let run = |args: Vec<String>| {
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        ok(&refs, d);
    };
    run(with(&["make-data", "--n", "400", "--out", "data.csv"]));
    run(with(&train_args(&["--out-dir", "run"])));
    run(with(&["encode", "--ckpt", "run/checkpoint.json", "--data", "data.csv", "--out", "z.csv"]));
    run(with(&["fit-gmm", "--latents", "z.csv", "--k", "25", "--restarts", "1", "--out", "gmm.json"]));
    run(with(&["generate", "--ckpt", "run/checkpoint.json", "--prior", "--n", "500", "--out", "prior.csv"]));
    run(with(&["generate", "--ckpt", "run/checkpoint.json", "--gmm", "gmm.json", "--n", "500", "--out", "gen.csv"]));
    run(with(&["cluster", "--gmm", "gmm.json", "--latents", "z.csv", "--labels", "data.csv", "--report", "cluster.json"]));
    run(with(&["eval", "--samples", "gen.csv", "--truth-gmm", "data.gmm.json", "--report", "eval.json"]));
    run(with(&["plot", "--points", "gen.csv", "--centers", "data.gmm.json", "--out", "gen.svg"]));

    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("cluster.json")).unwrap()).unwrap();
    for key in ["nmi", "ari", "acc"] {
        assert!(report[key].is_f64(), "{key} missing from {report}");
    }
    let eval: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("eval.json")).unwrap()).unwrap();
    assert!(eval["modes_covered"].is_u64() && eval["off_manifold_frac"].is_f64());

    let m: RunManifest = serde_json::from_str(&fs::read_to_string(d.join("run.json")).unwrap()).unwrap();
    assert_eq!(m.dataset.as_deref(), Some(Path::new("data.csv")));
    assert_eq!(m.latents.as_deref(), Some(Path::new("z.csv")));
    assert_eq!(m.gmm.as_deref(), Some(Path::new("gmm.json")));
    assert_eq!(m.samples.len(), 2);
    assert_eq!(m.reports.len(), 2);
    assert_eq!(m.plots.len(), 1);
    assert_eq!(m.commands.len(), 9);
    assert!(!d.join(".run.json.tmp").exists());

    // Latents keep the dataset labels and row order.
    let z = fs::read_to_string(d.join("z.csv")).unwrap();
    let data = fs::read_to_string(d.join("data.csv")).unwrap();
    let last = |l: &str| l.rsplit(',').next().unwrap().to_string();
    assert!(z.lines().zip(data.lines()).skip(1).all(|(a, b)| last(a) == last(b)));
}

#[test]
fn cluster_with_true_mixture_scores_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["make-data", "--n", "300", "--out", "data.csv"], d);
    ok(&["cluster", "--gmm", "data.gmm.json", "--latents", "data.csv", "--labels", "data.csv", "--report", "r.json"], d);
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("r.json")).unwrap()).unwrap();
    assert_eq!(r["acc"], 1.0);
    assert_eq!(r["nmi"], 1.0);
    assert_eq!(r["ari"], 1.0);
}

#[test]
fn plot_contract() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("empty.csv"), "x0,x1\n").unwrap();
    ok(&["plot", "--points", "empty.csv", "--out", "e.svg"], d);
    let e = fs::read_to_string(d.join("e.svg")).unwrap();
    assert!(e.contains(r#"<g id="axes""#) && !e.contains("<circle") && e.trim_end().ends_with("</svg>"));

    fs::write(d.join("p.csv"), "x0,x1,label\n0,0,0\n1,2,1\n-3,0.5,1\n").unwrap();
    ok(&["plot", "--points", "p.csv", "--out", "a.svg"], d);
    ok(&["plot", "--points", "p.csv", "--out", "b.svg"], d);
    assert_eq!(fs::read(d.join("a.svg")).unwrap(), fs::read(d.join("b.svg")).unwrap());
    assert_eq!(svg::circle_positions(&fs::read_to_string(d.join("a.svg")).unwrap()).len(), 3);

    fs::write(d.join("three.csv"), "x0,x1,x2\n0,0,0\n").unwrap();
    assert_eq!(code(&["plot", "--points", "three.csv", "--out", "t.svg"], d), 2);
}

#[test]
fn svg_viewport_maps_bounds_with_margin() {
    let pts = [[0.0, 0.0], [10.0, 20.0]];
    let vp = svg::Viewport::fit(pts.iter());
    assert_eq!((vp.x_min, vp.x_max), (-0.5, 10.5));
    assert_eq!((vp.y_min, vp.y_max), (-1.0, 21.0));
    let s = svg::scatter(&pts, &[[5.0, 10.0]]);
    let pos = svg::circle_positions(&s);
    let (lo, hi) = (vp.map([0.0, 0.0]), vp.map([10.0, 20.0]));
    assert!((pos[0].0 - lo.0).abs() < 1e-3 && (pos[0].1 - lo.1).abs() < 1e-3);
    assert!((pos[1].0 - hi.0).abs() < 1e-3 && (pos[1].1 - hi.1).abs() < 1e-3);
    // Larger y plots higher on the page.
    assert!(hi.1 < lo.1);
    assert!(s.contains(r#"r="1.5""#) && s.contains("<path d=\"M"));
}

#[test]
fn exit_code_contract() {
    use gael::Error;
    assert_eq!(gael_cli::exit_code(&Error::NonFinite { step: 1, component: "encoder" }), 3);
    assert_eq!(gael_cli::exit_code(&Error::Io(std::io::Error::other("x"))), 4);
    assert_eq!(gael_cli::exit_code(&Error::InvalidArgument("x".into())), 2);
}
