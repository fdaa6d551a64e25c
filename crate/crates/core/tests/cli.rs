use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use xsl::eval::MetricsReport;
use xsl::experiment::{EXIT_CONFIG, EXIT_DATA};

fn xsl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xsl")).args(args).env("RUST_LOG", "warn").output().expect("run xsl")
}

fn repo_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

/// A few-minute experiment shrunk to a few seconds.
const SMALL: &str = r#"
seed = 3

[world]
n_categories = 6
n_speakers = 3
filler_vocab_size = 10

[statistics]
source = "synthetic_zipf"
exponent = 1.0
base_rate = 3.0

[pool]
size = 1200
auditory_utterances = 80
validation_max = 40

[[age_bins]]
name = "a"
duration_days = 5
condition = "natural"

[[age_bins]]
name = "b"
duration_days = 10
condition = "uniform"

[model]
hidden = 8
visual_hidden = 8
proj_hidden = 8
embed_dim = 6
codebook_size = 8

[train.auditory]
epochs = 2
batch_size = 16
validate_every = 1

[train.audiovisual]
epochs = 3
batch_size = 16
validate_every = 2

[eval]
permutations = 200

[eval.tests]
tokens_per_type = 4
abx_tokens_per_cell = 2
"#;

fn small_config(dir: &Path) -> PathBuf {
    let p = dir.join("small.toml");
    fs::write(&p, SMALL).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_tree(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn stats_reproduces_the_shipped_table() {
    let out = tempfile::tempdir().unwrap();
    let o = xsl(&["stats", "--config", s(&repo_config("coco80.toml")), "--out", s(out.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let person = |bin: &str| {
        let text = fs::read_to_string(out.path().join(format!("stats/{bin}.csv"))).unwrap();
        text.lines().find(|l| l.split(',').nth(1) == Some("person")).unwrap().rsplit(',').next().unwrap().to_string()
    };
    assert_eq!(person("2mo"), "89");
    assert_eq!(person("4mo"), "178");
    assert_eq!(person("6mo"), "267");
    let uniform = fs::read_to_string(out.path().join("stats/4mo-uniform.csv")).unwrap();
    let rows: Vec<&str> = uniform.lines().skip(1).filter(|l| !l.starts_with("total")).collect();
    assert_eq!(rows.len(), 80);
    assert!(rows.iter().all(|l| l.ends_with(",37")));
}

#[test]
fn shipped_toy_config_is_the_default() {
    let text = fs::read_to_string(repo_config("toy.toml")).unwrap();
    let cfg = xsl::experiment::ExperimentConfig::from_toml(&text).unwrap();
    assert_eq!(cfg, xsl::experiment::ExperimentConfig::default());
}

#[test]
fn unknown_config_key_exits_with_config_status() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[train.audiovisual]\nlearnin_rate = 1e-3\n").unwrap();
    let o = xsl(&["stats", "--config", s(&cfg), "--out", s(&dir.path().join("out"))]);
    assert_eq!(o.status.code(), Some(EXIT_CONFIG));
    assert!(String::from_utf8_lossy(&o.stderr).contains("learnin_rate"));
}

#[test]
fn eval_without_checkpoint_fails_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("out");
    assert!(xsl(&["generate", "--config", s(&cfg), "--out", s(&out)]).status.success());
    let o = xsl(&["eval", "--config", s(&cfg), "--out", s(&out), "--bin", "a"]);
    assert_eq!(o.status.code(), Some(EXIT_DATA));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing checkpoint"));
    assert!(!out.join("reports/a.json").exists());
}

#[test]
fn unknown_bin_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("out");
    assert!(xsl(&["generate", "--config", s(&cfg), "--out", s(&out)]).status.success());
    let o = xsl(&["train", "--config", s(&cfg), "--out", s(&out), "--bin", "nope"]);
    assert_eq!(o.status.code(), Some(EXIT_CONFIG));
}

#[test]
fn locked_output_directory_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    fs::create_dir_all(&out).unwrap();
    fs::write(out.join(".lock"), "").unwrap();
    let o = xsl(&["stats", "--out", s(&out)]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("locked"));
}

#[test]
fn gradcheck_command_passes_and_writes_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = xsl(&["gradcheck", "--out", s(dir.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("gradcheck.json")).unwrap()).unwrap();
    assert!(v["max_relative_error"].as_f64().unwrap() < 1e-4);
}

#[test]
fn small_pipeline_is_reproducible_and_seed_sensitive() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let (a, b, c) = (dir.path().join("a"), dir.path().join("b"), dir.path().join("c"));
    for out in [&a, &b] {
        let o = xsl(&["run", "--config", s(&cfg), "--out", s(out)]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert!(!a.join(".lock").exists());
    assert_eq!(read_tree(&a), read_tree(&b));

    for name in ["auditory", "a", "b"] {
        let r = MetricsReport::load(&a.join(format!("reports/{name}.json"))).unwrap();
        assert_eq!(r.bin, name);
        assert_eq!(r.semtest_per_category.len(), 6);
        assert!(a.join(format!("checkpoints/{name}.best.ckpt")).exists());
        assert!(a.join(format!("checkpoints/{name}.final.ckpt")).exists());
    }
    let vocab = fs::read_to_string(a.join("curves/vocab.csv")).unwrap();
    assert!(vocab.starts_with("bin,days,above_chance,two_thirds,four_fifths\n"));
    assert_eq!(vocab.lines().count(), 4);
    assert!(vocab.contains("\nauditory,0,"));

    let o = xsl(&["generate", "--config", s(&cfg), "--out", s(&c), "--seed", "4"]);
    assert!(o.status.success());
    assert_ne!(fs::read(a.join("data/pool.jsonl")).unwrap(), fs::read(c.join("data/pool.jsonl")).unwrap());
}

#[test]
fn auditory_trace_has_no_audiovisual_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("out");
    assert!(xsl(&["generate", "--config", s(&cfg), "--out", s(&out)]).status.success());
    assert!(xsl(&["train", "--config", s(&cfg), "--out", s(&out), "--bin", "auditory"]).status.success());
    let trace = fs::read_to_string(out.join("traces/auditory.trace.csv")).unwrap();
    let header = trace.lines().next().unwrap();
    assert!(!header.contains("loss_av"));
    assert!(!header.contains("recall"));
    assert_eq!(trace.lines().count(), 3);
}
