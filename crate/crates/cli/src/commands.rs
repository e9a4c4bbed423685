use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Duration;

use anyhow::{bail, ensure, Context, Result};
use hetssnet::aggregation::{forward, ModelParams};
use hetssnet::bench::{run_bench, BenchConfig};
use hetssnet::imaging::{read_hsif, synth_scene, write_hsif, write_ppm, Image, ScenePair};
use hetssnet::metrics::{full_reference, no_reference, prior_analysis, PriorKind};
use hetssnet::training::{grad_check as check_gradients, read_checkpoint, toy_scene, train_with, write_checkpoint, TrainEvent};
use hetssnet::TrainConfig;

use crate::dataset::{read_dataset, read_scene, write_scene};
use crate::{CheckFailed, EvalMode};

pub fn synth(seed: u64, count: usize, size: usize, out: &Path) -> Result<()> {
    for i in 0..count {
        let scene = synth_scene(seed.wrapping_add(i as u64), size)?;
        write_scene(&out.join(format!("scene_{i}")), &scene)?;
    }
    println!("wrote {count} scene(s) to {}", out.display());
    Ok(())
}

/// Parameters from a checkpoint, checked against the config's patch size.
fn load_params(path: &Path, cfg: &TrainConfig) -> Result<ModelParams> {
    let params = read_checkpoint(path).with_context(|| format!("loading {}", path.display()))?;
    ensure!(
        params.patch_len() == cfg.patch * cfg.patch,
        "checkpoint was trained with {} samples per patch, config has patch = {}",
        params.patch_len(),
        cfg.patch
    );
    Ok(params)
}

pub fn train(data: &Path, out: &Path, cfg: &TrainConfig) -> Result<()> {
    let scenes: Vec<ScenePair> = read_dataset(data)?.into_iter().map(|s| s.scene).collect();
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    print!("{}", cfg.to_text());
    fs::write(out.join("config.txt"), cfg.to_text())?;

    let params = ModelParams::init(cfg.patch, cfg.d, cfg.layers, cfg.seed);
    let mut log = String::from("iter,l1,lcl,total,lr\n");
    let result = train_with(&scenes, cfg, params, &mut |event| {
        match event {
            TrainEvent::Iteration { iter, loss, lr } => {
                let _ = writeln!(log, "{iter},{},{},{},{lr}", loss.l1, loss.lcl, loss.total);
                if (iter + 1) % 10 == 0 {
                    println!(
                        "iter {:>6}  l1 {:.6}  lcl {:.6}  total {:.6}  lr {:.3e}",
                        iter + 1,
                        loss.l1,
                        loss.lcl,
                        loss.total,
                        lr
                    );
                }
            }
            TrainEvent::Checkpoint { iter, params } => {
                if iter != cfg.iters {
                    write_checkpoint(out.join(format!("checkpoint_{iter}.hssn")), params)?;
                }
            }
            TrainEvent::Diverged { params, .. } => write_checkpoint(out.join("checkpoint.hssn"), params)?,
        }
        Ok(())
    });
    fs::write(out.join("train_log.csv"), &log)?;
    let outcome = result.context("training stopped; last finite parameters saved")?;
    write_checkpoint(out.join("checkpoint.hssn"), &outcome.params)?;
    println!("checkpoint: {}", out.join("checkpoint.hssn").display());
    Ok(())
}

fn mean_row(rows: &[Vec<f64>]) -> Vec<f64> {
    let n = rows.len() as f64;
    (0..rows[0].len()).map(|c| rows.iter().map(|r| r[c]).sum::<f64>() / n).collect()
}

pub fn eval(
    data: &Path,
    checkpoint: Option<&Path>,
    fused_name: Option<&str>,
    mode: EvalMode,
    out: Option<&Path>,
    cfg: &TrainConfig,
) -> Result<()> {
    let scenes = read_dataset(data)?;
    let params = checkpoint.map(|p| load_params(p, cfg)).transpose()?;
    let with_reference = scenes.iter().all(|s| s.scene.gt.is_some());
    let header = match mode {
        EvalMode::Reduced => {
            ensure!(with_reference, "reduced-resolution evaluation needs gt.hsif in every scene");
            "scene,psnr,ssim,sam,ergas,scc"
        }
        EvalMode::Full if with_reference => "scene,psnr,ssim,sam,ergas,scc,d_lambda,d_s,qnr",
        EvalMode::Full => "scene,d_lambda,d_s,qnr",
    };
    let mut rows = Vec::new();
    for s in &scenes {
        let fused = match (&params, fused_name) {
            (Some(p), _) => forward(&s.scene, p, cfg)?.fused,
            (None, Some(name)) => {
                let path = s.dir.join(format!("{name}.hsif"));
                read_hsif(&path).with_context(|| format!("reading {}", path.display()))?
            }
            (None, None) => bail!("either a checkpoint or a fused image name is needed"),
        };
        let mut row = Vec::new();
        if let Some(gt) = s.scene.gt.as_ref().filter(|_| with_reference) {
            let r = full_reference(&fused, gt).with_context(|| format!("scene {}", s.name))?;
            row.extend([r.psnr, r.ssim, r.sam, r.ergas, r.scc]);
        }
        if matches!(mode, EvalMode::Full) {
            let r = no_reference(&fused, &s.scene.pan, &s.scene.lrms, s.scene.scale)
                .with_context(|| format!("scene {}", s.name))?;
            row.extend([r.d_lambda, r.d_s, r.qnr]);
        }
        rows.push((s.name.clone(), row));
    }
    let mut csv = format!("{header}\n");
    let fmt = |name: &str, row: &[f64]| {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.6}")).collect();
        format!("{name},{}\n", cells.join(","))
    };
    for (name, row) in &rows {
        csv.push_str(&fmt(name, row));
    }
    let values: Vec<Vec<f64>> = rows.into_iter().map(|(_, r)| r).collect();
    csv.push_str(&fmt("mean", &mean_row(&values)));
    match out {
        Some(path) => fs::write(path, csv).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{csv}"),
    }
    Ok(())
}

pub fn infer(
    checkpoint: &Path,
    scene_dir: &Path,
    out: &Path,
    preview: Option<&Path>,
    rgb: &[usize],
    cfg: &TrainConfig,
) -> Result<()> {
    let rgb: [usize; 3] = rgb
        .try_into()
        .map_err(|_| anyhow::anyhow!("--rgb takes exactly three band indices"))?;
    let params = load_params(checkpoint, cfg)?;
    let scene = read_scene(scene_dir)?;
    let fused: Image = forward(&scene, &params, cfg)?.fused;
    write_hsif(out, &fused)?;
    let preview = preview.map_or_else(|| out.with_extension("ppm"), Path::to_path_buf);
    write_ppm(&preview, &fused, rgb)?;
    println!("wrote {} and {}", out.display(), preview.display());
    Ok(())
}

pub fn patterns_dump(scene_dir: &Path, checkpoint: Option<&Path>, cfg: &TrainConfig) -> Result<()> {
    let scene = read_scene(scene_dir)?;
    let params = match checkpoint {
        Some(p) => load_params(p, cfg)?,
        None => ModelParams::init(cfg.patch, cfg.d, cfg.layers, cfg.seed),
    };
    let out = forward(&scene, &params, cfg)?;
    print!("{}", out.patterns.dump());
    Ok(())
}

pub fn grad_check(seed: u64, eps: f64, tolerance: f64) -> Result<()> {
    let (prep, params, cfg) = toy_scene(seed)?;
    let report = check_gradients(&prep, &params, &cfg, eps)?;
    println!("{:<10} {:>7} {:>12}  status", "group", "coords", "max_rel_err");
    let mut failed = Vec::new();
    for g in &report {
        let ok = g.max_rel <= tolerance;
        println!("{:<10} {:>7} {:>12.3e}  {}", g.group, g.coords, g.max_rel, if ok { "ok" } else { "FAIL" });
        if !ok {
            failed.push(g.group.clone());
        }
    }
    if !failed.is_empty() {
        return Err(CheckFailed(format!("gradient mismatch in {}", failed.join(", "))).into());
    }
    Ok(())
}

pub fn analyze_priors(data: &Path, bins: usize) -> Result<()> {
    let scenes = read_dataset(data)?;
    let kinds = [PriorKind::PanVsGt, PriorKind::LrmsVsGt, PriorKind::LrmsAdjacent, PriorKind::GtAdjacent];
    let mut sums = [0.0; 4];
    println!("scene,kind,a,b,emd,coefficient");
    for s in &scenes {
        let table = prior_analysis(&s.scene, bins).with_context(|| format!("scene {}", s.name))?;
        for r in &table.rows {
            println!("{},{},{},{},{:.6},{:.6}", s.name, r.kind.label(), r.a, r.b, r.emd, r.coefficient);
        }
        for (sum, kind) in sums.iter_mut().zip(kinds) {
            *sum += table.mean(kind);
        }
    }
    for (sum, kind) in sums.iter().zip(kinds) {
        println!("mean,{},,,,{:.6}", kind.label(), sum / scenes.len() as f64);
    }
    Ok(())
}

pub fn bench(sizes: Vec<usize>, min_time_ms: u64, seed: u64, max_exponent: Option<f64>) -> Result<()> {
    let report = run_bench(&BenchConfig {
        sizes,
        min_time: Duration::from_millis(min_time_ms),
        seed,
        ..BenchConfig::default()
    })?;
    print!("{}", report.to_csv());
    if let Some(limit) = max_exponent {
        let worst = report.pattern_exponent.max(report.global_exponent);
        if worst > limit {
            return Err(CheckFailed(format!("scaling exponent {worst:.3} exceeds {limit}")).into());
        }
    }
    Ok(())
}
