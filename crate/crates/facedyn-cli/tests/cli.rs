//! End-to-end tests of the `facedyn` binary: stage composition, caching,
//! determinism, and error surfacing.

use std::path::Path;
use std::process::{Command, Output};

use facedyn::{read_feature_matrix, write_feature_matrix, DescriptorKind, FeatureMatrix};

fn facedyn_bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_facedyn"))
}

fn run_ok(args: &[&str], dir: &Path) -> Output {
    let out = facedyn_bin().args(args).current_dir(dir).output().unwrap();
    assert!(
        out.status.success(),
        "facedyn {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

#[test]
fn unknown_subcommand_exits_2() {
    let out = facedyn_bin().arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn pipeline_runs_are_cached_and_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&["synth", "--out", "data", "--n", "8", "--seed", "5"], dir.path());

    let pipeline = |csv: &str| {
        run_ok(
            &[
                "pipeline",
                "--manifest",
                "data/manifest.json",
                "--descriptor",
                "hog",
                "--cell",
                "8",
                "--layout-scale",
                "0.2",
                "--target-len",
                "24",
                "--cache-dir",
                "cache",
                "--report-csv",
                csv,
            ],
            dir.path(),
        );
        std::fs::read(dir.path().join(csv)).unwrap()
    };
    let first = pipeline("a.csv");
    assert!(std::fs::read_dir(dir.path().join("cache")).unwrap().count() >= 8);
    let second = pipeline("b.csv");
    assert_eq!(first, second);
    let text = String::from_utf8(first).unwrap();
    assert!(text.starts_with("fold,tp,fn,tn,fp,posed_acc,spont_acc,overall_acc\n"));
    assert!(text.trim_end().lines().last().unwrap().starts_with("aggregate,"));
}

#[test]
fn external_descriptor_without_paths_fails_before_processing() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&["synth", "--out", "data", "--n", "2", "--seed", "1"], dir.path());
    let out = facedyn_bin()
        .args([
            "pipeline",
            "--manifest",
            "data/manifest.json",
            "--descriptor",
            "external",
        ])
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("external"), "stderr: {stderr}");
}

#[test]
fn stage_subcommands_compose() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&["synth", "--out", "data", "--n", "2", "--seed", "3"], dir.path());

    // Boxes match the synthetic face geometry written by `synth`.
    run_ok(
        &[
            "track",
            "--video",
            "data/synth_000",
            "--face-box",
            "22,20,52,60",
            "--left-eye-box",
            "29,34,10,8",
            "--right-eye-box",
            "53,34,10,8",
            "--out",
            "track.json",
        ],
        dir.path(),
    );
    let track: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("track.json")).unwrap())
            .unwrap();
    assert_eq!(track["frames"].as_array().unwrap().len(), 40);

    run_ok(
        &[
            "normalize",
            "--video",
            "data/synth_000",
            "--track",
            "track.json",
            "--layout-scale",
            "0.2",
            "--out",
            "norm",
        ],
        dir.path(),
    );
    assert!(dir.path().join("norm/frame_000000.png").exists());

    run_ok(
        &[
            "extract",
            "--video",
            "norm",
            "--descriptor",
            "hog",
            "--cell",
            "8",
            "--out",
            "feat.fdm",
        ],
        dir.path(),
    );
    let feat = read_feature_matrix(dir.path().join("feat.fdm"), DescriptorKind::Hog).unwrap();
    // Normalized frames are 80x100 at layout scale 0.2; cell 8 -> 10x12
    // cells of 31 values.
    assert_eq!(feat.rows(), 40);
    assert_eq!(feat.cols(), 10 * 12 * 31);

    run_ok(
        &[
            "temporal",
            "--input",
            "feat.fdm",
            "--descriptor",
            "hog",
            "--target-len",
            "24",
            "--out",
            "vec.fdm",
        ],
        dir.path(),
    );
    let vec = read_feature_matrix(dir.path().join("vec.fdm"), DescriptorKind::Hog).unwrap();
    assert_eq!((vec.rows(), vec.cols()), (1, 24 * 10 * 12 * 31));
}

#[test]
fn train_then_evaluate_separable_features() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&["synth", "--out", "data", "--n", "8", "--seed", "2"], dir.path());
    let manifest = facedyn::parse_manifest(dir.path().join("data/manifest.json")).unwrap();

    let features = dir.path().join("features");
    std::fs::create_dir(&features).unwrap();
    for (i, rec) in manifest.records.iter().enumerate() {
        let sign = rec.label.to_sign();
        let row = vec![sign, 0.1 * i as f64, -sign * 0.5];
        let m = FeatureMatrix::new(1, 3, row, DescriptorKind::External).unwrap();
        write_feature_matrix(&m, features.join(format!("{}.fdm", rec.video_id))).unwrap();
    }

    run_ok(
        &[
            "train",
            "--manifest",
            "data/manifest.json",
            "--features-dir",
            "features",
            "--test-fold",
            "1",
            "--out",
            "model.json",
        ],
        dir.path(),
    );
    let out = run_ok(
        &[
            "evaluate",
            "--manifest",
            "data/manifest.json",
            "--features-dir",
            "features",
            "--fold",
            "1",
            "--model",
            "model.json",
        ],
        dir.path(),
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("100.0000"), "stdout: {stdout}");
}

#[test]
fn make_folds_assigns_stratified_folds() {
    let dir = tempfile::tempdir().unwrap();
    run_ok(&["synth", "--out", "data", "--n", "20", "--seed", "9"], dir.path());
    run_ok(
        &[
            "make-folds",
            "--manifest",
            "data/manifest.json",
            "--seed",
            "4",
            "--out",
            "refolded.json",
        ],
        dir.path(),
    );
    let m = facedyn::parse_manifest(dir.path().join("refolded.json")).unwrap();
    let folds = m.folds_present();
    assert_eq!(folds.len(), 10);
    for fold in folds {
        let in_fold: Vec<_> = m.records.iter().filter(|r| r.fold == fold).collect();
        assert_eq!(in_fold.len(), 2);
        assert_ne!(in_fold[0].label, in_fold[1].label);
    }
}
