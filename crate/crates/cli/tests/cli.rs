use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use hetssnet::imaging::{read_hsif, wald_degrade, write_hsif, Image};
use tempfile::TempDir;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hetssnet")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &Path, count: &str, size: &str) {
    let o = run(&["synth", "--seed", "3", "--count", count, "--size", size, "--out", p(dir)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

/// Compact model so training commands finish quickly.
const SMALL: [&str; 8] = ["--set", "d=8", "--set", "patch=4", "--set", "stride=4", "--set", "k=2"];

#[test]
fn synth_layout_and_determinism() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    synth(a.path(), "2", "64");
    synth(b.path(), "2", "64");
    let mut files = 0;
    for i in 0..2 {
        for name in ["pan", "lrms", "gt"] {
            let rel = format!("scene_{i}/{name}.hsif");
            assert_eq!(fs::read(a.path().join(&rel)).unwrap(), fs::read(b.path().join(&rel)).unwrap());
            files += 1;
        }
    }
    assert_eq!(files, 6);
    let gt = read_hsif(a.path().join("scene_0/gt.hsif")).unwrap();
    let lrms = read_hsif(a.path().join("scene_0/lrms.hsif")).unwrap();
    assert_eq!((gt.height(), gt.width(), gt.channels()), (64, 64, 4));
    assert_eq!((lrms.height(), lrms.width(), lrms.channels()), (16, 16, 4));
}

#[test]
fn train_writes_log_and_checkpoint() {
    let data = TempDir::new().unwrap();
    let out = TempDir::new().unwrap();
    synth(data.path(), "1", "16");
    let o = run(&["train", "--data", p(data.path()), "--out", p(out.path()), "--iters", "50"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("lr0 = 0.0001\n"));
    assert!(text.contains("decay = 0.85\n") && text.contains("decay_every = 3000\n"));
    assert_eq!(text.lines().filter(|l| l.starts_with("iter ")).count(), 5);
    let log = fs::read_to_string(out.path().join("train_log.csv")).unwrap();
    let rows: Vec<&str> = log.lines().collect();
    assert_eq!(rows[0], "iter,l1,lcl,total,lr");
    assert_eq!(rows.len(), 51);
    assert!(out.path().join("checkpoint.hssn").exists());
}

#[test]
fn ablation_zeroes_contrastive_term() {
    let data = TempDir::new().unwrap();
    let out = TempDir::new().unwrap();
    synth(data.path(), "1", "16");
    let mut args = vec!["train", "--data", p(data.path()), "--out", p(out.path()), "--iters", "5", "--ablate", "local-only"];
    args.extend(SMALL);
    assert_eq!(code(&run(&args)), 0);
    let log = fs::read_to_string(out.path().join("train_log.csv")).unwrap();
    for row in log.lines().skip(1) {
        let cols: Vec<&str> = row.split(',').collect();
        assert_eq!(cols[2].parse::<f64>().unwrap(), 0.0);
        assert_eq!(cols[1], cols[3]);
    }
}

#[test]
fn config_precedence() {
    let data = TempDir::new().unwrap();
    let out = TempDir::new().unwrap();
    synth(data.path(), "1", "16");
    let cfg = out.path().join("run.cfg");
    fs::write(&cfg, "# test config\niters = 7\nbatch = 2\ntau = 0.25\n").unwrap();
    let mut args = vec![
        "train", "--data", p(data.path()), "--out", p(out.path()), "--config", p(&cfg), "--iters", "3", "--set", "tau=0.75",
    ];
    args.extend(SMALL);
    let o = run(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    // flag over file, file over default, --set over file
    assert!(text.contains("iters = 3\n"));
    assert!(text.contains("batch = 2\n"));
    assert!(text.contains("tau = 0.75\n"));
    assert!(text.contains("gamma = 0.01\n"));
    let log = fs::read_to_string(out.path().join("train_log.csv")).unwrap();
    assert_eq!(log.lines().count(), 4);
}

fn parse_csv(text: &str) -> (Vec<String>, Vec<(String, Vec<f64>)>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| {
            let mut cells = l.split(',');
            let name = cells.next().unwrap().to_string();
            (name, cells.map(|c| c.parse().unwrap()).collect())
        })
        .collect();
    (header, rows)
}

#[test]
fn eval_modes_and_mean_row() {
    let data = TempDir::new().unwrap();
    let out = TempDir::new().unwrap();
    synth(data.path(), "2", "32");
    let train = run(&["train", "--data", p(data.path()), "--out", p(out.path()), "--iters", "0"]);
    assert_eq!(code(&train), 0);
    let ckpt = out.path().join("checkpoint.hssn");

    let o = run(&["eval", "--data", p(data.path()), "--checkpoint", p(&ckpt)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = parse_csv(&stdout(&o));
    assert_eq!(header.join(","), "scene,psnr,ssim,sam,ergas,scc");
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[2].0, "mean");
    for c in 0..5 {
        let mean = (rows[0].1[c] + rows[1].1[c]) / 2.0;
        assert!((rows[2].1[c] - mean).abs() < 2e-6);
        assert!(rows[0].1[c].is_finite());
    }

    let csv_path = out.path().join("full.csv");
    let o = run(&["eval", "--data", p(data.path()), "--checkpoint", p(&ckpt), "--mode", "full", "--out", p(&csv_path)]);
    assert_eq!(code(&o), 0);
    let (header, rows) = parse_csv(&fs::read_to_string(&csv_path).unwrap());
    assert_eq!(header.join(","), "scene,psnr,ssim,sam,ergas,scc,d_lambda,d_s,qnr");
    for (_, r) in &rows[..2] {
        assert!(((1.0 - r[5]) * (1.0 - r[6]) - r[7]).abs() < 2e-6);
    }
}

#[test]
fn eval_ideal_row_for_reference_input() {
    let data = TempDir::new().unwrap();
    synth(data.path(), "1", "32");
    let o = run(&["eval", "--data", p(data.path()), "--fused-name", "gt"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (_, rows) = parse_csv(&stdout(&o));
    assert_eq!(rows[0].1, vec![99.0, 1.0, 0.0, 0.0, 1.0]);
}

#[test]
fn infer_writes_image_and_preview() {
    let data = TempDir::new().unwrap();
    let out = TempDir::new().unwrap();
    synth(data.path(), "1", "32");
    assert_eq!(code(&run(&["train", "--data", p(data.path()), "--out", p(out.path()), "--iters", "0"])), 0);
    let fused = out.path().join("fused.hsif");
    let o = run(&[
        "infer",
        "--checkpoint",
        p(&out.path().join("checkpoint.hssn")),
        "--scene",
        p(&data.path().join("scene_0")),
        "--out",
        p(&fused),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let img = read_hsif(&fused).unwrap();
    assert_eq!((img.height(), img.width(), img.channels()), (32, 32, 4));
    let ppm = fs::read(out.path().join("fused.ppm")).unwrap();
    assert!(ppm.starts_with(b"P6\n32 32\n255\n"));
    assert_eq!(ppm.len(), "P6\n32 32\n255\n".len() + 32 * 32 * 3);
}

#[test]
fn patterns_dump_two_patch_graph() {
    let dir = TempDir::new().unwrap();
    let scene_dir = dir.path().join("toy");
    fs::create_dir(&scene_dir).unwrap();
    let gt: Vec<f32> = (0..4 * 8 * 4).map(|i| 0.2 + 0.6 * ((i * 37 % 101) as f32 / 101.0)).collect();
    let gt = Image::new(4, 8, 4, gt).unwrap();
    let pan = gt.channel_mean();
    let scene = wald_degrade(&gt, &pan, 4).unwrap();
    write_hsif(scene_dir.join("pan.hsif"), &scene.pan).unwrap();
    write_hsif(scene_dir.join("lrms.hsif"), &scene.lrms).unwrap();

    let o = run(&[
        "patterns-dump", "--scene", p(&scene_dir), "--set", "patch=4", "--set", "stride=4", "--set", "k=1", "--set", "d=8",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let headers: Vec<&str> = text.lines().filter(|l| l.starts_with("pattern ")).collect();
    assert_eq!(headers.len(), 3, "{text}");
    for h in &headers {
        let subset = h.split_whitespace().nth(1).unwrap();
        assert!(["S={1}", "S={2}", "S={3}"].contains(&subset), "{h}");
    }
}

#[test]
fn grad_check_table_and_failure_code() {
    let o = run(&["grad-check"]);
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let text = stdout(&o);
    assert_eq!(text.lines().filter(|l| l.ends_with(" ok")).count(), 7);
    let o = run(&["grad-check", "--tolerance", "0"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn analyze_priors_table() {
    let data = TempDir::new().unwrap();
    synth(data.path(), "2", "32");
    let o = run(&["analyze-priors", "--data", p(data.path()), "--bins", "32"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.starts_with("scene,kind,a,b,emd,coefficient\n"));
    assert_eq!(text.lines().filter(|l| l.starts_with("scene_")).count(), 2 * 14);
    assert_eq!(text.lines().filter(|l| l.starts_with("mean,")).count(), 4);
}

#[test]
fn bench_table_and_threshold() {
    let o = run(&["bench", "--sizes", "20,40", "--min-time-ms", "1"]);
    assert_eq!(code(&o), 0);
    let text = stdout(&o);
    assert!(text.starts_with("n,pattern_secs,global_secs\n20,"));
    assert!(text.contains("# exponent global_aggregation"));
    let o = run(&["bench", "--sizes", "20,40", "--min-time-ms", "1", "--max-exponent=-5"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn validation_errors_exit_one() {
    assert_eq!(code(&run(&["train", "--bogus"])), 1);
    assert_eq!(code(&run(&["eval", "--data", "/nonexistent/x", "--fused-name", "gt"])), 1);
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "not_a_key = 3\n").unwrap();
    synth(dir.path(), "1", "16");
    let o = run(&["train", "--data", p(dir.path()), "--out", p(dir.path()), "--config", p(&cfg)]);
    assert_eq!(code(&o), 1);
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn divergence_exits_two() {
    let data = TempDir::new().unwrap();
    let out = TempDir::new().unwrap();
    synth(data.path(), "1", "16");
    let mut args = vec![
        "train", "--data", p(data.path()), "--out", p(out.path()), "--iters", "5", "--lr0", "1e300", "--set", "adam_eps=1e-300",
    ];
    args.extend(SMALL);
    let o = run(&args);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("divergence"));
    assert!(out.path().join("checkpoint.hssn").exists());
}
