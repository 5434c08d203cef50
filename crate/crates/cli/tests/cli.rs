use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const TINY: &str = r#"
seed = 5

[hyperparams.rf]
n_trees = 20

[hyperparams.gbt_exact]
n_trees = 20

[hyperparams.gbt_hist]
n_trees = 20

[sweep]
window_s = 4.0

[ablation]
feature_counts = [1, 12]
samples_per_class = [5, 1000]

[filter]
t_star_s = 4.0

[[corpus.classes]]
label = "ECG"
count = 14
sample_rates_hz = [100.0]
segment_s = 4.0

[[corpus.classes]]
label = "EEG"
count = 14
sample_rates_hz = [100.0]
segment_s = 4.0

[[corpus.classes]]
label = "B_MOV"
count = 14
sample_rates_hz = [100.0]
segment_s = 4.0

[[corpus.classes]]
label = "NON_BIO"
count = 14
sample_rates_hz = [200.0]
segment_s = 4.0
"#;

fn biogate(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_biogate"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) {
    let out = biogate(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn setup() -> (tempfile::TempDir, PathBuf) {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("tiny.toml"), TINY).unwrap();
    ok(tmp.path(), &["--config", "tiny.toml", "synth", "--out", "c"]);
    let root = tmp.path().to_path_buf();
    (tmp, root)
}

#[test]
fn pipeline_runs_and_is_deterministic() {
    let (_tmp, d) = setup();
    let cfg = ["--config", "tiny.toml"];
    let run = |args: &[&str]| ok(&d, &[&cfg[..], args].concat());

    run(&["synth", "--out", "c2"]);
    assert_eq!(
        fs::read(d.join("c/manifest.json")).unwrap(),
        fs::read(d.join("c2/manifest.json")).unwrap()
    );

    run(&["train", "--algo", "rf", "--corpus", "c", "--out", "rf.model"]);
    run(&["train", "--algo", "gbt_hist", "--corpus", "c", "--out", "hist.model"]);
    run(&["train", "--algo", "rf", "--corpus", "c", "--out", "rf2.model"]);
    assert_eq!(fs::read(d.join("rf.model")).unwrap(), fs::read(d.join("rf2.model")).unwrap());

    run(&["eval", "--model", "rf.model", "--model", "hist.model", "--corpus", "c", "--out", "m.csv"]);
    let metrics = fs::read_to_string(d.join("m.csv")).unwrap();
    assert!(metrics.starts_with("algorithm,class,metric,value\n"));
    assert!(metrics.contains("rf,ALL,macro_f1,"));
    assert!(metrics.contains("gbt_hist,B_MOV,f1,"));

    run(&["extract", "--corpus", "c", "--split", "train", "--out", "train.csv"]);
    run(&["train", "--algo", "rf", "--features", "train.csv", "--out", "rf3.model"]);
    assert_eq!(fs::read(d.join("rf.model")).unwrap(), fs::read(d.join("rf3.model")).unwrap());

    for out in ["s1", "s2"] {
        run(&[
            "sweep", "--kind", "awgn", "--grid", "0,0.5", "--model", "rf.model", "--model", "hist.model",
            "--eval-corpus", "c2", "--out", out,
        ]);
    }
    let sweep = fs::read_to_string(d.join("s1/sweep_awgn.csv")).unwrap();
    assert_eq!(sweep, fs::read_to_string(d.join("s2/sweep_awgn.csv")).unwrap());
    assert_eq!(sweep.lines().count(), 1 + 2 * 2);
    assert!(sweep.starts_with("kind,value,algorithm,accuracy,macro_f1\n"));
    assert!(fs::read_to_string(d.join("s1/sweep_awgn.svg")).unwrap().contains("<polyline"));

    run(&["ablate", "--corpus", "c", "--algo", "rf", "--out", "ab.csv"]);
    let ab = fs::read_to_string(d.join("ab.csv")).unwrap();
    // 2 feature counts x (5 per class + all); 1000 is skipped
    assert_eq!(ab.lines().count(), 1 + 4);
    assert!(ab.contains("rf,12,all,"));

    run(&["importance", "--model", "rf.model", "--corpus", "c", "--repeats", "2", "--out", "imp.csv"]);
    let imp = fs::read_to_string(d.join("imp.csv")).unwrap();
    assert_eq!(imp.lines().count(), 13);
    assert!(imp.starts_with("feature,gain_importance,permutation_importance,selection_rank,selection_accuracy\n"));

    run(&["timing", "--corpus", "c", "--algo", "rf", "--out", "t.csv"]);
    assert_eq!(fs::read_to_string(d.join("t.csv")).unwrap().lines().count(), 2);
}

#[test]
fn filter_copies_only_passing_files() {
    let (_tmp, d) = setup();
    ok(&d, &["--config", "tiny.toml", "train", "--algo", "rf", "--corpus", "c", "--out", "rf.model"]);
    let inbox = d.join("inbox");
    fs::create_dir(&inbox).unwrap();
    let mut copied = 0;
    for label in ["ECG", "EEG", "B_MOV", "NON_BIO"] {
        let mut files: Vec<_> = fs::read_dir(d.join("c").join(label)).unwrap().map(|e| e.unwrap().path()).collect();
        files.sort();
        for f in files.iter().take(3) {
            fs::copy(f, inbox.join(f.file_name().unwrap())).unwrap();
            copied += 1;
        }
    }
    fs::write(inbox.join("garbage.csv"), "sample_rate_hz,100\n1\nxyz\n").unwrap();
    let mut short = String::from("sample_rate_hz,100\n");
    for i in 0..100 {
        short += &format!("{}\n", (i as f64).sin());
    }
    fs::write(inbox.join("short.csv"), short).unwrap();

    ok(&d, &["--config", "tiny.toml", "filter", "--model", "rf.model", "--in", "inbox", "--out", "f"]);
    let verdicts = fs::read_to_string(d.join("f/verdicts.csv")).unwrap();
    assert_eq!(verdicts.lines().count(), 1 + copied + 2);
    assert!(verdicts.contains("garbage,NONE,0,false,FEATURE_ERROR"));
    assert!(verdicts.contains("short,NONE,0,false,TOO_SHORT"));

    let passed: Vec<String> = fs::read_dir(d.join("f/passed"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    for line in verdicts.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        let file = format!("{}.csv", cols[0]);
        let allowed = cols[3] == "true";
        assert_eq!(passed.contains(&file), allowed, "{line}");
        if allowed {
            assert_eq!(cols[1], "NON_BIO");
        }
    }
    assert!(passed.iter().all(|f| f.starts_with("non_bio-")), "{passed:?}");
}

#[test]
fn usage_errors_exit_with_2() {
    let tmp = tempfile::tempdir().unwrap();
    for args in [&["train"][..], &["frobnicate"], &["train", "--algo", "svm", "--corpus", "c"], &[]] {
        let out = biogate(tmp.path(), args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn runtime_errors_exit_nonzero_with_diagnostic() {
    let tmp = tempfile::tempdir().unwrap();
    let out = biogate(tmp.path(), &["eval", "--model", "missing.model", "--corpus", "nowhere"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    fs::write(tmp.path().join("bad.toml"), "seed = \"x\"").unwrap();
    let out = biogate(tmp.path(), &["--config", "bad.toml", "synth"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.toml"));
}

#[test]
fn ingest_builds_a_corpus_from_directories() {
    let (_tmp, d) = setup();
    ok(&d, &[
        "ingest", "--class", "ECG=c/ECG", "--class", "NON_BIO=c/NON_BIO", "--segment-s", "2", "--out", "ic",
    ]);
    let manifest = fs::read_to_string(d.join("ic/manifest.json")).unwrap();
    // 14 recordings of 4 s per class, two 2 s segments each
    assert_eq!(manifest.matches("\"file\": \"ECG/").count(), 28);
    assert_eq!(manifest.matches("\"file\": \"NON_BIO/").count(), 28);

    let out = biogate(&d, &["ingest", "--class", "ECG=c/ECG", "--segment-s", "60", "--out", "none"]);
    assert_eq!(out.status.code(), Some(1));
}
