//! End-to-end runs of the `srres` binary: exit codes, file outputs, and
//! byte-level reproducibility.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use srres_cli::report::{parse_metric_csv, parse_train_log};
use srres_core::baselines::bicubic_upscale;
use srres_core::checkpoint;
use srres_core::data::{load_image, save_gray_png, save_rgb_png};
use srres_core::model::{ModelConfig, SrModel};
use srres_core::tensor::{Shape, Tensor};

fn srres(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_srres"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// Smooth ramp plus blobs; structured enough that interpolation quality
/// differences show up.
fn texture(w: usize, h: usize, phase: f32) -> Tensor<f32> {
    let mut vals = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let fx = x as f32 / w as f32;
            let fy = y as f32 / h as f32;
            let blob = ((x as f32 * 0.7 + phase).sin() * (y as f32 * 0.6 - phase).cos()) * 0.2;
            vals.push((0.3 + 0.4 * fx + 0.2 * fy + blob).clamp(0.0, 1.0));
        }
    }
    Tensor::from_vec(Shape::new(1, 1, h, w), vals).unwrap()
}

fn write_gray_dataset(dir: &Path, count: usize, side: usize) {
    std::fs::create_dir_all(dir).unwrap();
    for i in 0..count {
        let img = texture(side, side, i as f32 * 1.7);
        save_gray_png(&img, &dir.join(format!("img_{i:02}.png"))).unwrap();
    }
}

fn toy_train_args<'a>(data: &'a str, out: &'a str) -> Vec<&'a str> {
    vec![
        "train",
        "--data-root",
        data,
        "--out-dir",
        out,
        "--epochs",
        "2",
        "--batch-size",
        "4",
        "--patch",
        "8",
        "--features",
        "4",
        "--mapping-layers",
        "1",
        "--feature-kernel",
        "3",
        "--seed",
        "5",
    ]
}

#[test]
fn unknown_flag_and_unknown_method_exit_1() {
    let out = srres(&["train", "--no-such-flag"]);
    assert_eq!(code(&out), 1);

    let dir = tempfile::tempdir().unwrap();
    write_gray_dataset(&dir.path().join("d"), 1, 16);
    let data = dir.path().join("d");
    let report = dir.path().join("r.csv");
    let out = srres(&[
        "bench",
        "--data",
        data.to_str().unwrap(),
        "--methods",
        "lanczos",
        "--scale",
        "2",
        "--report",
        report.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1, "{}", stderr_of(&out));
    assert!(stderr_of(&out).contains("lanczos"));
}

#[test]
fn help_exits_0() {
    let out = srres(&["--help"]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("srres"));
}

#[test]
fn infer_scales_dims_and_zero_weight_model_matches_bicubic() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.png");
    save_gray_png(&texture(8, 8, 0.3), &input).unwrap();

    // A zero-weight residual model contributes nothing on top of the skip
    // connection, so its output must be the bicubic upscale bit for bit.
    let cfg = ModelConfig {
        features: 4,
        mapping_layers: 1,
        ..ModelConfig::default()
    };
    let ckpt = dir.path().join("zero.srck");
    checkpoint::save(&SrModel::<f32>::empty(cfg).unwrap(), &ckpt).unwrap();

    let out_png = dir.path().join("sr.png");
    let out = srres(&[
        "infer",
        "--ckpt",
        ckpt.to_str().unwrap(),
        "--input",
        input.to_str().unwrap(),
        "--out",
        out_png.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr_of(&out));
    let (w, h) = image::image_dimensions(&out_png).unwrap();
    assert_eq!((w, h), (16, 16));

    let mut expected = bicubic_upscale(&load_image(&input).unwrap(), 2).unwrap();
    expected.clamp01_counting();
    let reference = dir.path().join("ref.png");
    save_gray_png(&expected, &reference).unwrap();
    assert_eq!(
        std::fs::read(&out_png).unwrap(),
        std::fs::read(&reference).unwrap(),
        "infer output differs from quantized bicubic"
    );

    // Same checkpoint and input again: identical bytes.
    let out_png2 = dir.path().join("sr2.png");
    let out = srres(&[
        "infer",
        "--ckpt",
        ckpt.to_str().unwrap(),
        "--input",
        input.to_str().unwrap(),
        "--out",
        out_png2.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(
        std::fs::read(&out_png).unwrap(),
        std::fs::read(&out_png2).unwrap()
    );
}

#[test]
fn corrupted_checkpoint_magic_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.png");
    save_gray_png(&texture(8, 8, 0.0), &input).unwrap();
    let cfg = ModelConfig {
        features: 4,
        mapping_layers: 1,
        ..ModelConfig::default()
    };
    let ckpt = dir.path().join("m.srck");
    checkpoint::save(&SrModel::<f32>::empty(cfg).unwrap(), &ckpt).unwrap();
    let mut bytes = std::fs::read(&ckpt).unwrap();
    bytes[0] ^= 0xFF;
    std::fs::write(&ckpt, bytes).unwrap();

    let out = srres(&[
        "infer",
        "--ckpt",
        ckpt.to_str().unwrap(),
        "--input",
        input.to_str().unwrap(),
        "--out",
        dir.path().join("x.png").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2, "{}", stderr_of(&out));
}

#[test]
fn missing_dataset_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty");
    std::fs::create_dir_all(&empty).unwrap();
    let mut args = toy_train_args("", "");
    let data = empty.to_str().unwrap().to_string();
    let out_dir = dir.path().join("run").to_str().unwrap().to_string();
    args[2] = &data;
    args[4] = &out_dir;
    let out = srres(&args);
    assert_eq!(code(&out), 2, "{}", stderr_of(&out));
}

#[test]
fn train_writes_log_checkpoints_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d");
    write_gray_dataset(&data, 2, 32);
    let run_dir = dir.path().join("run");
    let out = srres(&toy_train_args(
        data.to_str().unwrap(),
        run_dir.to_str().unwrap(),
    ));
    assert_eq!(code(&out), 0, "{}", stderr_of(&out));

    assert!(data.join("manifest.json").is_file(), "manifest persisted");
    assert!(run_dir.join("best.srck").is_file());
    assert!(run_dir.join("best.srck.json").is_file());
    assert!(run_dir.join("last.srck").is_file());
    assert!(run_dir.join("config.toml").is_file());

    let log = parse_train_log(&std::fs::read_to_string(run_dir.join("training_log.csv")).unwrap())
        .unwrap();
    assert_eq!(log.len(), 2, "one row per epoch");
    for pair in log.windows(2) {
        assert!(pair[0].step < pair[1].step, "step column must increase");
        assert_eq!(pair[0].epoch + 1, pair[1].epoch);
    }
    for row in &log {
        assert!(row.train_loss.is_finite());
        assert!(row.val_psnr.is_finite());
    }

    // Resume picks up last.srck and runs again without error.
    let mut resume_args = toy_train_args(data.to_str().unwrap(), run_dir.to_str().unwrap());
    resume_args.push("--resume");
    let out = srres(&resume_args);
    assert_eq!(code(&out), 0, "{}", stderr_of(&out));
}

#[test]
fn identical_train_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d");
    write_gray_dataset(&data, 2, 32);
    let run_a = dir.path().join("a");
    let run_b = dir.path().join("b");
    for run in [&run_a, &run_b] {
        let out = srres(&toy_train_args(
            data.to_str().unwrap(),
            run.to_str().unwrap(),
        ));
        assert_eq!(code(&out), 0, "{}", stderr_of(&out));
    }
    for name in ["best.srck", "last.srck", "training_log.csv"] {
        assert_eq!(
            std::fs::read(run_a.join(name)).unwrap(),
            std::fs::read(run_b.join(name)).unwrap(),
            "{name} differs between identical runs"
        );
    }
}

#[test]
fn pathological_learning_rate_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d");
    write_gray_dataset(&data, 2, 32);
    let mut args = toy_train_args(data.to_str().unwrap(), "");
    let run = dir.path().join("run").to_str().unwrap().to_string();
    args[4] = &run;
    // Adam's updates are magnitude-capped near lr, which can keep an
    // absurd rate finite for a long time; plain SGD amplifies the huge
    // gradients directly and overflows within a few steps.
    args[6] = "50";
    assert_eq!(args[5], "--epochs");
    args.extend_from_slice(&["--optimizer", "sgd", "--lr", "1000"]);
    let out = srres(&args);
    assert_eq!(code(&out), 3, "{}", stderr_of(&out));
    assert!(stderr_of(&out).contains("non-finite"));
}

#[test]
fn bench_scale_1_identity_reports_infinite_psnr() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d");
    write_gray_dataset(&data, 2, 24);
    let report = dir.path().join("r.csv");
    let out = srres(&[
        "bench",
        "--data",
        data.to_str().unwrap(),
        "--methods",
        "bicubic",
        "--scale",
        "1",
        "--report",
        report.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr_of(&out));
    let text = std::fs::read_to_string(&report).unwrap();
    let (rows, means) = parse_metric_csv(&text).unwrap();
    assert_eq!(rows.len(), 2);
    for row in &rows {
        assert!(row.psnr_db.is_infinite(), "scale-1 bicubic is an identity");
        assert_eq!(row.ssim, 1.0);
    }
    assert!(text.contains(",inf,"), "infinity must serialize as `inf`");
    assert!(means[0].psnr_db.is_infinite());
}

#[test]
fn bench_orders_bicubic_above_nearest_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d");
    write_gray_dataset(&data, 3, 32);
    let report_a = dir.path().join("a.csv");
    let report_b = dir.path().join("b.csv");
    for (report, threads) in [(&report_a, "1"), (&report_b, "2")] {
        let out = Command::new(env!("CARGO_BIN_EXE_srres"))
            .env("SRRES_THREADS", threads)
            .args([
                "bench",
                "--data",
                data.to_str().unwrap(),
                "--methods",
                "nearest,bilinear,bicubic",
                "--scale",
                "2",
                "--report",
                report.to_str().unwrap(),
            ])
            .output()
            .unwrap();
        assert_eq!(code(&out), 0, "{}", stderr_of(&out));
    }
    assert_eq!(
        std::fs::read(&report_a).unwrap(),
        std::fs::read(&report_b).unwrap(),
        "worker count must not change the table"
    );

    let (rows, means) = parse_metric_csv(&std::fs::read_to_string(&report_a).unwrap()).unwrap();
    assert_eq!(rows.len(), 9, "3 methods x 3 images");
    let mean_of = |m: &str| means.iter().find(|r| r.method == m).unwrap().psnr_db;
    assert!(
        mean_of("bicubic") > mean_of("nearest"),
        "bicubic {} vs nearest {}",
        mean_of("bicubic"),
        mean_of("nearest")
    );
}

#[test]
fn eval_scores_validation_split_of_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d");
    write_gray_dataset(&data, 3, 32);
    let run_dir = dir.path().join("run");
    let out = srres(&toy_train_args(
        data.to_str().unwrap(),
        run_dir.to_str().unwrap(),
    ));
    assert_eq!(code(&out), 0, "{}", stderr_of(&out));

    let ckpt = run_dir.join("best.srck");
    let report = dir.path().join("eval.csv");
    let out = srres(&[
        "eval",
        "--ckpt",
        ckpt.to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
        "--report",
        report.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr_of(&out));
    let (rows, means) = parse_metric_csv(&std::fs::read_to_string(&report).unwrap()).unwrap();
    // 3 images split 0.9 -> 2 train, 1 val.
    assert_eq!(rows.len(), 1);
    assert_eq!(means.len(), 1);
    assert!(rows[0].method.starts_with("model:"));
    assert!(rows[0].psnr_db.is_finite());
}

#[test]
fn degrade_writes_downscaled_copies() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in");
    std::fs::create_dir_all(&input).unwrap();
    // 17x13 RGB: crop to 16x12, then halve.
    let mut vals = Vec::new();
    for _c in 0..3 {
        for y in 0..13 {
            for x in 0..17 {
                vals.push(((x * 5 + y * 3) % 32) as f32 / 31.0);
            }
        }
    }
    let rgb = Tensor::from_vec(Shape::new(1, 3, 13, 17), vals).unwrap();
    save_rgb_png(&rgb, &input.join("pic.png")).unwrap();

    let out_dir = dir.path().join("lr");
    let out = srres(&[
        "degrade",
        "--input",
        input.to_str().unwrap(),
        "--scale",
        "2",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr_of(&out));
    let (w, h) = image::image_dimensions(out_dir.join("pic.png")).unwrap();
    assert_eq!((w, h), (8, 6));
}

#[test]
fn config_file_plus_flag_precedence_reaches_training() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d");
    write_gray_dataset(&data, 2, 32);
    let run_dir: PathBuf = dir.path().join("run");
    let config = dir.path().join("run.toml");
    std::fs::write(
        &config,
        format!(
            "data_root = {:?}\nout_dir = {:?}\nepochs = 1\nbatch_size = 2\npatch = 8\nfeatures = 4\nmapping_layers = 1\nfeature_kernel = 3\nseed = 9\n",
            data.to_str().unwrap(),
            run_dir.to_str().unwrap(),
        ),
    )
    .unwrap();
    // The flag must beat the file's epochs = 1.
    let out = srres(&[
        "train",
        "--config",
        config.to_str().unwrap(),
        "--epochs",
        "3",
    ]);
    assert_eq!(code(&out), 0, "{}", stderr_of(&out));
    let log = parse_train_log(&std::fs::read_to_string(run_dir.join("training_log.csv")).unwrap())
        .unwrap();
    assert_eq!(log.len(), 3, "flag overrides file");
    let recorded = std::fs::read_to_string(run_dir.join("config.toml")).unwrap();
    assert!(recorded.contains("epochs = 3"));
}
