//! Acceptance suite: one PASS/FAIL line per criterion. Runs as a plain
//! binary (`cargo test -p seld-cli --test acceptance`) and exits non-zero
//! if any criterion fails.

#[path = "../../../core/tests/common/mod.rs"]
mod common;

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use common::checks::{self, Check};
use common::grad_cases::{self, CASES, MODEL_TOLERANCE, OP_TOLERANCE, SEEDS};
use seld_core::checkpoint::Checkpoint;
use seld_core::data::{load_split, FoldPlan, Stage, N_CLASSES};
use seld_core::dsp::{read_feature_file, read_manifest};
use seld_core::model::{evaluate_segments, ModelConfig, SeldModel};

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Check + 'a>);

const GRADIENT_BUDGET: Duration = Duration::from_secs(300);
const OVERFIT_EPOCHS: usize = 200;
const DIRECTIONAL_EPOCHS: usize = 8;

/// Runs each check, stopping at the first failure.
fn all(checks: &[(&str, &dyn Fn() -> Check)]) -> Check {
    let mut notes = Vec::new();
    for (name, check) in checks {
        notes.push(format!("{name}: {}", check().map_err(|e| format!("{name}: {e}"))?));
    }
    Ok(notes.join("; "))
}

fn gradient_integrity() -> Check {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut checked = 0;
    for &(name, case) in CASES {
        for seed in SEEDS {
            let r = case(seed).map_err(|e| format!("{name} seed {seed}: {e}"))?;
            if r.checked == 0 || r.max_rel_error() >= OP_TOLERANCE {
                return Err(format!("{name} seed {seed}: {:?}", r.worst));
            }
            worst = worst.max(r.max_rel_error());
            checked += r.checked;
        }
    }
    let mut model_worst = 0.0f64;
    for seed in SEEDS {
        let r = grad_cases::full_model(seed).map_err(|e| format!("full model seed {seed}: {e}"))?;
        if r.max_rel_error() >= MODEL_TOLERANCE {
            return Err(format!("full model seed {seed}: {:?}", r.worst));
        }
        model_worst = model_worst.max(r.max_rel_error());
        checked += r.checked;
    }
    let elapsed = start.elapsed();
    if elapsed > GRADIENT_BUDGET {
        return Err(format!("took {:.0} s", elapsed.as_secs_f64()));
    }
    Ok(format!(
        "{} cases x {} seeds + full model, {checked} coordinates, worst {worst:.1e} (model {model_worst:.1e}), {:.0} s",
        CASES.len(),
        SEEDS.len(),
        elapsed.as_secs_f64()
    ))
}

fn trainability() -> Check {
    let start = Instant::now();
    let run = checks::overfit(OVERFIT_EPOCHS, 5, None)?;
    let elapsed = start.elapsed().as_secs_f64();
    // Determinism: a fresh run with the same seeds repeats the early losses bit for bit.
    let repeat = checks::overfit(OVERFIT_EPOCHS, 5, Some(3))?;
    if repeat
        .losses
        .iter()
        .zip(&run.losses)
        .any(|(a, b)| a.to_bits() != b.to_bits())
    {
        return Err(format!(
            "rerun losses {:?} differ from {:?}",
            repeat.losses,
            &run.losses[..3]
        ));
    }
    Ok(format!(
        "F20 {:.3} at epoch {}, {elapsed:.0} s; rerun matches bit for bit",
        run.f20, run.epochs
    ))
}

fn seld(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_seld"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("seld {}: {}", args[0], String::from_utf8_lossy(&out.stderr)));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn path(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

fn check_table(text: &str, title: &str, header: &str, labels: &[&str]) -> Result<(), String> {
    let block: Vec<&str> = text
        .lines()
        .skip_while(|l| *l != title)
        .skip(1)
        .take(2 + labels.len())
        .collect();
    let fail = || format!("`{title}` table malformed:\n{text}");
    if block.len() != 2 + labels.len() || !block[0].starts_with("framework") || !block[0].contains(header) {
        return Err(fail());
    }
    for (row, label) in block[2..].iter().zip(labels) {
        let cells: Vec<&str> = row.split('|').map(str::trim).collect();
        if cells.len() != 5 || cells[0] != *label || cells[1..].iter().any(|c| c.parse::<f64>().is_err()) {
            return Err(fail());
        }
    }
    Ok(())
}

/// Gridsearch tables on a 40-file synthetic set, then validation ER20 of
/// each trained variant against the same network untrained.
fn desk_scale(root: &Path) -> Check {
    let (data, feats, grid) = (root.join("data"), root.join("features"), root.join("grid"));
    seld(&[
        "synth",
        "--folders",
        "8",
        "--files-per-folder",
        "5",
        "--duration",
        "6",
        "--seed",
        "11",
        "--out",
        path(&data),
    ])?;
    seld(&["extract", "--in", path(&data), "--out", path(&feats)])?;
    let meta = data.join("metadata_dev");
    let epochs = DIRECTIONAL_EPOCHS.to_string();
    let common_args = [
        "--epochs",
        &epochs,
        "--batch-size",
        "4",
        "--seed",
        "0",
        "--features",
        path(&feats),
        "--metadata",
        path(&meta),
    ];
    let mut args = vec!["gridsearch", "--ratios", "1", "--out", path(&grid)];
    args.extend(common_args);
    seld(&args)?;
    let text = std::fs::read_to_string(grid.join("gridsearch.txt")).map_err(|e| e.to_string())?;
    let labels = ["baseline", "Conv-Residual", "ρ = 1"];
    check_table(&text, "dev results, 2019 metrics", "LR (%)", &labels)?;
    check_table(&text, "dev results, 2020 metrics", "LRcd (%)", &labels)?;

    // Evaluation-stage layout: 2020 table only.
    let eval_grid = root.join("grid_eval");
    let mut args = vec![
        "gridsearch",
        "--stage",
        "eval",
        "--ratios",
        "1,8,16",
        "--epochs",
        "1",
        "--out",
        path(&eval_grid),
    ];
    args.extend(&common_args[2..]);
    seld(&args)?;
    let eval_text = std::fs::read_to_string(eval_grid.join("gridsearch.txt")).map_err(|e| e.to_string())?;
    check_table(
        &eval_text,
        "eval results, 2020 metrics",
        "ER20º",
        &["baseline", "Conv-Residual", "ρ = 1", "ρ = 8", "ρ = 16"],
    )?;
    if eval_text.contains("2019 metrics") {
        return Err("evaluation-stage gridsearch reported 2019 metrics".into());
    }

    let manifest = read_manifest(&feats).map_err(|e| e.to_string())?;
    if manifest.len() != 40 {
        return Err(format!("{} files in manifest", manifest.len()));
    }
    let hash = read_feature_file(&feats.join(format!("{}.feat", manifest[0].file)), None)
        .map_err(|e| e.to_string())?
        .config_hash;
    let plan = FoldPlan::new(Stage::Development);
    let mut notes = Vec::new();
    for (cfg, dir) in [
        (ModelConfig::baseline(), "baseline_r0"),
        (ModelConfig::conv_residual(), "conv-residual_r0"),
        (
            ModelConfig::standard_post(1).map_err(|e| e.to_string())?,
            "standard-post_r1",
        ),
    ] {
        let l = cfg.label_frames();
        let val = load_split(&feats, &meta, &plan.validation, hash, l, N_CLASSES, true).map_err(|e| e.to_string())?;
        let untrained = SeldModel::<f64>::new(cfg.clone(), 0).map_err(|e| e.to_string())?;
        let ckpt = std::fs::read_dir(grid.join(dir))
            .map_err(|e| e.to_string())?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .find(|p| p.extension().is_some_and(|x| x == "ckpt"))
            .ok_or(format!("no checkpoint in {dir}"))?;
        let trained = Checkpoint::load(&ckpt)
            .and_then(|c| SeldModel::<f64>::from_checkpoint(&c))
            .map_err(|e| e.to_string())?;
        let before = evaluate_segments(&untrained, &val, 4, 0.5)
            .map_err(|e| e.to_string())?
            .er20;
        let after = evaluate_segments(&trained, &val, 4, 0.5)
            .map_err(|e| e.to_string())?
            .er20;
        if after >= before {
            return Err(format!(
                "{}: validation ER20 {after:.3} not below untrained {before:.3}",
                cfg.variant
            ));
        }
        notes.push(format!("{} {before:.2} -> {after:.2}", cfg.variant));
    }
    Ok(format!(
        "dev and eval tables in layout; validation ER20 {}",
        notes.join(", ")
    ))
}

fn main() {
    let tmp = tempfile::tempdir().expect("temp dir");
    let criteria: Vec<Criterion> = vec![
        ("gradient integrity", Box::new(gradient_integrity)),
        ("shape law", Box::new(checks::shape_law)),
        (
            "SE identity at init",
            Box::new(|| {
                all(&[
                    ("bit-equality", &|| checks::se_identity_at_init(100)),
                    ("overhead", &checks::se_parameter_overhead),
                ])
            }),
        ),
        (
            "DSP oracles",
            Box::new(|| {
                all(&[
                    ("frames", &checks::frames_per_segment),
                    ("GCC-PHAT", &checks::gcc_delay_recovery),
                    ("mel", &checks::mel_probe_tones),
                ])
            }),
        ),
        (
            "metric oracles",
            Box::new(|| {
                all(&[
                    ("perfect", &checks::perfect_prediction),
                    ("hand-evaluated", &checks::hand_scenarios),
                    ("assignment", &|| checks::assignment_vs_exhaustive(200)),
                    ("F20 <= F", &|| checks::gated_f_bounded(1000)),
                ])
            }),
        ),
        ("end-to-end trainability", Box::new(trainability)),
        (
            "determinism",
            Box::new(|| {
                all(&[
                    ("epoch-1 loss", &checks::epoch_one_loss_reproducible),
                    ("checkpoint", &|| checks::checkpoint_round_trip(tmp.path())),
                ])
            }),
        ),
        ("desk-scale comparison", Box::new(|| desk_scale(tmp.path()))),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {}. {name} ({secs:.0} s): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {}. {name} ({secs:.0} s): {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
