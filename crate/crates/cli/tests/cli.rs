use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn diffgt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_diffgt"))
        .args(args)
        .env_remove("DIFFGT_SEED")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// 12 users, 10 items in two genres.
fn write_toy(dir: &Path) -> (PathBuf, PathBuf) {
    let mut ratings = String::new();
    for u in 0..12 {
        for i in 0..10 {
            if (u * 3 + i * 7) % 4 != 0 {
                ratings.push_str(&format!("u{u}\tm{i}\t1\n"));
            }
        }
    }
    let side: String = (0..10)
        .map(|i| format!("m{i}\t{}\n", if i < 5 { "Drama" } else { "Comedy|Drama" }))
        .collect();
    let r = dir.join("ratings.tsv");
    let s = dir.join("items.tsv");
    fs::write(&r, ratings).unwrap();
    fs::write(&s, side).unwrap();
    (r, s)
}

struct Run {
    dir: TempDir,
}

impl Run {
    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    fn read(&self, rel: &str) -> String {
        fs::read_to_string(self.path(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
    }
}

/// Ingests the toy data and writes a small run config next to it.
fn setup(extra_train: &str) -> Run {
    let dir = tempfile::tempdir().unwrap();
    let (r, s) = write_toy(dir.path());
    let out = diffgt(&["ingest", "--data", p(&r), "--side", p(&s), "--out", p(&dir.path().join("bundle"))]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let config = format!(
        "version = 1\ndata = \"bundle\"\n\n[train]\nseed = 5\nmax_epochs = 3\nbatch_size = 32\nside_top_n = 2\n{extra_train}\n\
         [train.model]\ndim = 8\nprojected_len = 4\nsteps = 10\nreverse_samples = 3\n"
    );
    fs::write(dir.path().join("run.toml"), config).unwrap();
    Run { dir }
}

fn train(run: &Run, out: &str, extra: &[&str]) -> Output {
    let config = run.path("run.toml");
    let out_dir = run.path(out);
    let mut args = vec!["train", "--config", p(&config), "--out", p(&out_dir)];
    args.extend_from_slice(extra);
    diffgt(&args)
}

#[test]
fn ingest_writes_bundle_and_stats() {
    let run = setup("");
    let stats: serde_json::Value = serde_json::from_str(&run.read("bundle/stats.json")).unwrap();
    assert_eq!(stats["num_users"], 12);
    assert_eq!(stats["num_items"], 10);
    assert!(stats["density"].as_f64().unwrap() > 0.0);
    let manifest: serde_json::Value = serde_json::from_str(&run.read("bundle/manifest.json")).unwrap();
    assert_eq!(manifest["runs"]["ingest"]["seed"], 2024);
}

#[test]
fn ingest_missing_file_names_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.tsv");
    let out = diffgt(&["ingest", "--data", p(&missing), "--out", p(dir.path())]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("nope.tsv"), "{}", stderr(&out));
}

#[test]
fn ingest_parse_error_has_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("bad.tsv");
    fs::write(&data, "a\tb\nc\td\nbroken\n").unwrap();
    let out = diffgt(&["ingest", "--data", p(&data), "--out", p(dir.path())]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("bad.tsv:3"), "{}", stderr(&out));
}

#[test]
fn ingest_foursquare_shaped_density() {
    // 2,060 users × 2,876 items with 27,149 distinct pairs; k ↦ (k mod 2060,
    // k mod 2876) is injective below lcm(2060, 2876) = 1,481,140.
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("venues.tsv");
    let text: String = (0..27_149).map(|k| format!("u{}\tv{}\n", k % 2060, k % 2876)).collect();
    fs::write(&data, text).unwrap();
    let out_dir = dir.path().join("out");
    let out = diffgt(&["ingest", "--data", p(&data), "--out", p(&out_dir)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let stats: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("stats.json")).unwrap()).unwrap();
    assert_eq!(stats["num_users"], 2060);
    assert_eq!(stats["num_items"], 2876);
    assert_eq!(stats["density_percent"], 0.46);
}

#[test]
fn train_is_byte_identical_across_runs() {
    let run = setup("");
    for out in ["a", "b"] {
        let o = train(&run, out, &[]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    assert_eq!(run.read("a/checkpoint.json"), run.read("b/checkpoint.json"));
    assert_eq!(run.read("a/logs/train_log.csv"), run.read("b/logs/train_log.csv"));
    assert!(run.read("a/logs/train_log.csv").starts_with("epoch,bpr,diff,cl,total,val_loss\n"));
    for sub in ["reports", "figures"] {
        assert!(run.path("a").join(sub).is_dir());
    }
}

#[test]
fn ablation_switch_is_recorded() {
    let run = setup("");
    let o = train(&run, "iso", &["--ablate", "-Direction"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let m: serde_json::Value = serde_json::from_str(&run.read("iso/manifest.json")).unwrap();
    assert_eq!(m["runs"]["train"]["variant"], "-Direction");
    assert_eq!(m["runs"]["train"]["config"]["model"]["noise"], "isotropic");

    let o = train(&run, "bad", &["--ablate=-Nothing"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("-DiffL"), "{}", stderr(&o));
}

#[test]
fn seed_env_overrides_config() {
    let run = setup("");
    let o = Command::new(env!("CARGO_BIN_EXE_diffgt"))
        .args(["train", "--config", p(&run.path("run.toml")), "--out", p(&run.path("s"))])
        .env("DIFFGT_SEED", "77")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let m: serde_json::Value = serde_json::from_str(&run.read("s/manifest.json")).unwrap();
    assert_eq!(m["runs"]["train"]["seed"], 77);
}

#[test]
fn unknown_config_key_is_an_input_error() {
    let run = setup("learnin_rate = 0.1");
    let o = train(&run, "x", &[]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("learnin_rate"), "{}", stderr(&o));
}

#[test]
fn divergence_exits_3_with_dump() {
    let run = setup("learning_rate = 1e300");
    let o = train(&run, "div", &[]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    let dump = run.path("div/divergence_dump.json");
    assert!(stderr(&o).contains(p(&dump)), "{}", stderr(&o));
    let ckpt: serde_json::Value = serde_json::from_str(&run.read("div/divergence_dump.json")).unwrap();
    assert_eq!(ckpt["version"], 1);
}

#[test]
fn evaluate_reports_and_integrity() {
    let run = setup("");
    assert_eq!(code(&train(&run, "t", &[])), 0);
    let ckpt = run.path("t/checkpoint.json");
    let bundle = run.path("bundle");

    let o = diffgt(&["evaluate", "--checkpoint", p(&ckpt), "--data", p(&bundle)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("recall@20"));
    let summary = run.read("t/reports/metrics_summary.csv");
    assert!(summary.starts_with("metric,mean,std\nrecall@20,"));
    let per_set = run.read("t/reports/metrics_per_set.csv");
    assert_eq!(per_set.lines().count(), 11);

    let o = diffgt(&["evaluate", "--checkpoint", p(&ckpt), "--data", p(&bundle), "--k", "10"]);
    assert_eq!(code(&o), 0);
    let again = run.read("t/reports/metrics_summary.csv");
    assert!(again.contains("recall@10") && again.contains("ndcg@10"));
    let m: serde_json::Value = serde_json::from_str(&run.read("t/manifest.json")).unwrap();
    assert!(m["runs"]["train"].is_object() && m["runs"]["evaluate"].is_object());

    // a different split of the same interactions is a different dataset
    let (r, s) = (run.path("ratings.tsv"), run.path("items.tsv"));
    let other = run.path("other");
    let args = ["ingest", "--data", p(&r), "--side", p(&s), "--seed", "9", "--out", p(&other)];
    assert_eq!(code(&diffgt(&args)), 0);
    let o = diffgt(&["evaluate", "--checkpoint", p(&ckpt), "--data", p(&other)]);
    assert_eq!(code(&o), 4, "{}", stderr(&o));
    assert!(stderr(&o).contains("dataset"), "{}", stderr(&o));
}

#[test]
fn evaluation_is_repeatable() {
    let run = setup("");
    assert_eq!(code(&train(&run, "t", &[])), 0);
    let ckpt = run.path("t/checkpoint.json");
    let bundle = run.path("bundle");
    let mut reports = Vec::new();
    for out in ["e1", "e2"] {
        let o = diffgt(&["evaluate", "--checkpoint", p(&ckpt), "--data", p(&bundle), "--out", p(&run.path(out))]);
        assert_eq!(code(&o), 0);
        reports.push(run.read(&format!("{out}/reports/metrics_per_set.csv")));
    }
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn diagnose_artifacts() {
    let run = setup("");
    assert_eq!(code(&train(&run, "t", &[])), 0);
    let ckpt = run.path("t/checkpoint.json");
    let bundle = run.path("bundle");
    let d = run.path("diag");
    let diag = |mode: &str| {
        diffgt(&[
            "diagnose", "--checkpoint", p(&ckpt), "--data", p(&bundle), "--mode", mode, "--out", p(&d), "--nodes", "60",
            "--repeats", "1",
        ])
    };

    let o = diag("snr");
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let svg = run.read("diag/figures/snr.svg");
    assert_eq!(svg.matches("<polyline").count(), 2);
    let csv = run.read("diag/reports/snr.csv");
    assert!(csv.starts_with("# embeddings:"));
    assert!(csv.contains("\nstep,isotropic,directional\n"));

    let o = diag("svd");
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = run.read("diag/reports/svd.csv");
    assert!(csv.starts_with("# sigma1="));
    for genre in [",Drama", ",Comedy"] {
        assert_eq!(csv.lines().filter(|l| l.ends_with(genre)).count(), 5, "{csv}");
    }
    assert!(run.path("diag/figures/svd.svg").exists());

    let o = diag("timing");
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let csv = run.read("diag/reports/timing.csv");
    let variants: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(
        variants,
        ["discrete", "continuous", "continuous-linear", "continuous-sampling", "combined"]
    );

    let o = diag("lda");
    assert_eq!(code(&o), 2);
}
