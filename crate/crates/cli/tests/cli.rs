use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, body).unwrap();
    path
}

fn ppoinc(config: &Path, out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ppoinc"))
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn toy_config(dir: &Path) -> PathBuf {
    write_config(
        dir,
        &format!(
            r#"
[dataset]
kind = "graph-dir"
path = "{0}"

[test_dataset]
kind = "graph-dir"
path = "{0}"

[[filtrations]]
type = "rips"

[[filtrations]]
type = "degree"

[model]
bases = 3

[train]
epochs = 2
batch_size = 2
hidden = [8, 4]

[gradcheck]
samples = 2

[stability]
diagrams = 2
"#,
            fixtures().join("toy_graphs").display()
        ),
    )
}

fn synth_config(dir: &Path, generator: &str, n_per_class: usize, extra: &str) -> PathBuf {
    write_config(
        dir,
        &format!(
            r#"
seed = 3

[dataset]
kind = "synth"
generator = "{generator}"
n_per_class = {n_per_class}
seed = 3

[[filtrations]]
type = "rips"

{extra}
"#
        ),
    )
}

fn metric_rows(out: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(out.join("metrics.csv"))
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn four_cycle_diagram_has_the_loop() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = ppoinc(&toy_config(tmp.path()), &out, &["diagrams"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let file = out.join("diagrams/rips/000000-cycle4.jsonl");
    let text = fs::read_to_string(&file).unwrap();
    let h1: Vec<serde_json::Value> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .filter(|v: &serde_json::Value| v["dim"] == 1)
        .collect();
    assert_eq!(h1.len(), 1, "{text}");
    assert_eq!(
        (h1[0]["birth"].as_f64(), h1[0]["death"].as_f64()),
        (Some(1.0), Some(2.0))
    );
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.contains("cycle4,1,rips,1,1,0"), "{summary}");
    assert!(out.join("config.resolved.toml").exists());
    assert!(out.join("diagrams/header.json").exists());
}

#[test]
fn phi_dump_lists_point_images() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = ppoinc(&toy_config(tmp.path()), &out, &["diagrams", "--dump-phi"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(out.join("phi_points.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("id,channel,slot,dim,birth,death,multiplicity,rho_0,rho_1,rho_2,phi_0,phi_1,phi_2")
    );
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').skip(2).map(|v| v.parse().unwrap()).collect())
        .collect();
    assert!(!rows.is_empty());
    for r in rows {
        // φ lands inside the unit ball
        assert!(r[8..].iter().map(|y| y * y).sum::<f64>() < 1.0, "{r:?}");
    }
}

#[test]
fn empty_input_directory_is_an_error() {
    let tmp = tempfile::tempdir().unwrap();
    let empty = tmp.path().join("empty");
    fs::create_dir(&empty).unwrap();
    let cfg = write_config(
        tmp.path(),
        &format!(
            "[dataset]\nkind = \"graph-dir\"\npath = \"{}\"\n[[filtrations]]\ntype = \"degree\"\n",
            empty.display()
        ),
    );
    let o = ppoinc(&cfg, &tmp.path().join("out"), &["diagrams"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("error"), "{}", stderr(&o));
}

#[test]
fn images_give_cubical_and_height_channels() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        &format!(
            "[dataset]\nkind = \"pgm-dir\"\npath = \"{}\"\n[[filtrations]]\ntype = \"cubical\"\n[[filtrations]]\ntype = \"height\"\ndirections = 4\n",
            fixtures().join("images").display()
        ),
    );
    let out = tmp.path().join("out");
    let o = ppoinc(&cfg, &out, &["diagrams"]);
    assert!(o.status.success(), "{}", stderr(&o));
    for channel in ["cubical", "height-0", "height-1", "height-2", "height-3"] {
        let dir = out.join("diagrams").join(channel);
        assert_eq!(fs::read_dir(&dir).unwrap().count(), 2, "{channel}");
    }
}

#[test]
fn two_fold_smoke_run_is_quick() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = synth_config(
        tmp.path(),
        "cycles-vs-trees",
        10,
        "[model]\nbases = 3\n[train]\nfolds = 2\nepochs = 3\nbatch_size = 8\nhidden = [16, 8]\n",
    );
    let out = tmp.path().join("out");
    let t = Instant::now();
    let o = ppoinc(&cfg, &out, &["train"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(t.elapsed() < Duration::from_secs(60));
    let rows = metric_rows(&out);
    assert_eq!(rows.len(), 1);
    assert_eq!(
        (rows[0][0].as_str(), rows[0][1].as_str()),
        ("p-poinc", "2-fold-cv")
    );
    let log = fs::read_to_string(out.join("train_log_p-poinc.csv")).unwrap();
    assert_eq!(log.lines().count(), 1 + 2 * 3);
    assert!(out.join("checkpoint_p-poinc.json").exists());
}

#[test]
fn variant_sweep_gives_three_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = synth_config(
        tmp.path(),
        "cycles-vs-trees",
        8,
        "[model]\nbases = 2\n[train]\nfolds = 2\nepochs = 2\nbatch_size = 8\nhidden = [8, 4]\n",
    );
    let out = tmp.path().join("out");
    let o = ppoinc(
        &cfg,
        &out,
        &[
            "train",
            "--variant",
            "poinc",
            "--variant",
            "hybrid",
            "--variant",
            "eucl",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let methods: Vec<String> = metric_rows(&out)
        .into_iter()
        .map(|r| r[0].clone())
        .collect();
    assert_eq!(methods, ["p-poinc", "p-hybrid", "p-eucl"]);
}

#[test]
fn cycles_vs_trees_is_learned() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = synth_config(
        tmp.path(),
        "cycles-vs-trees",
        50,
        "[model]\nbases = 5\n[train]\nfolds = 2\nepochs = 20\nbatch_size = 16\nhidden = [32, 16]\n",
    );
    let out = tmp.path().join("out");
    let o = ppoinc(&cfg, &out, &["train"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let acc: f64 = metric_rows(&out)[0][3].parse().unwrap();
    assert!(acc >= 0.9, "accuracy {acc}");
}

#[test]
fn same_seed_gives_identical_files() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = synth_config(
        tmp.path(),
        "components-count",
        6,
        "[model]\nbases = 2\n[train]\nfolds = 2\nepochs = 2\nbatch_size = 4\nhidden = [8, 4]\n",
    );
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for out in [&a, &b] {
        let o = ppoinc(&cfg, out, &["--seed", "11", "train"]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    for f in [
        "metrics.csv",
        "train_log_p-poinc.csv",
        "checkpoint_p-poinc.json",
    ] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    let resolved = fs::read_to_string(a.join("config.resolved.toml")).unwrap();
    assert!(resolved.starts_with("seed = 11"), "{resolved}");
}

#[test]
fn gradcheck_passes_and_catches_a_corrupted_partial() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = toy_config(tmp.path());
    let out = tmp.path().join("out");
    let o = ppoinc(&cfg, &out, &["gradcheck"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = fs::read_to_string(out.join("gradcheck.csv")).unwrap();
    assert!(
        report.lines().skip(1).all(|l| l.ends_with(",true")),
        "{report}"
    );

    let bad = ppoinc(
        &cfg,
        &tmp.path().join("bad"),
        &["gradcheck", "--corrupt-index", "3"],
    );
    assert_eq!(bad.status.code(), Some(2));
    assert!(stderr(&bad).contains("at parameter 3"), "{}", stderr(&bad));
}

#[test]
fn eucl_theta_gradients_match_closely() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let o = ppoinc(&toy_config(tmp.path()), &out, &["gradcheck"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let cfg = fs::read_to_string(toy_config(tmp.path()))
        .unwrap()
        .replace("[model]\n", "[model]\nvariants = [\"eucl\"]\n");
    let cfg = write_config(tmp.path(), &cfg);
    let out = tmp.path().join("eucl");
    let o = ppoinc(&cfg, &out, &["gradcheck"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = fs::read_to_string(out.join("gradcheck.csv")).unwrap();
    let theta: Vec<f64> = report
        .lines()
        .filter(|l| l.starts_with("p-eucl,theta"))
        .map(|l| l.split(',').nth(3).unwrap().parse().unwrap())
        .collect();
    assert_eq!(theta.len(), 2, "{report}");
    assert!(theta.iter().all(|e| *e < 1e-6), "{theta:?}");
}

#[test]
fn stability_audit_reports_ratios() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = synth_config(
        tmp.path(),
        "components-count",
        5,
        "[stability]\ndiagrams = 10\n",
    );
    let out = tmp.path().join("out");
    let o = ppoinc(&cfg, &out, &["stability"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let rows = fs::read_to_string(out.join("stability.csv")).unwrap();
    assert_eq!(
        rows.lines().next(),
        Some("pair_id,dim,p,wasserstein,d_ball,ratio")
    );
    assert_eq!(rows.lines().count(), 1 + 10 * 3 * 2);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("stability.json")).unwrap()).unwrap();
    assert_eq!(summary["violations"], 0);
    assert_eq!(summary["diagonal_insertion_change"], 0.0);
}

#[test]
fn baseline_writes_two_rows_next_to_train_rows() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = synth_config(
        tmp.path(),
        "components-count",
        10,
        "[model]\nbases = 2\n[train]\nfolds = 2\nepochs = 2\nbatch_size = 8\nhidden = [8, 4]\n",
    );
    let out = tmp.path().join("out");
    for cmd in ["train", "baseline"] {
        let o = ppoinc(&cfg, &out, &[cmd]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let methods: Vec<String> = metric_rows(&out)
        .into_iter()
        .map(|r| r[0].clone())
        .collect();
    assert_eq!(
        methods,
        ["p-poinc", "baseline-w-essential", "baseline-wo-essential"]
    );
}

#[test]
fn eval_uses_a_saved_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = toy_config(tmp.path());
    let out = tmp.path().join("out");
    let o = ppoinc(&cfg, &out, &["train"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let ckpt = out.join("checkpoint_p-poinc.json");
    let o = ppoinc(
        &cfg,
        &out,
        &["eval", "--checkpoint", ckpt.to_str().unwrap()],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let preds = fs::read_to_string(out.join("predictions.csv")).unwrap();
    assert_eq!(preds.lines().next(), Some("id,label,pred,p_0,p_1"));
    assert_eq!(preds.lines().count(), 3);

    let missing = ppoinc(&cfg, &out, &["eval"]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn validation_failures_exit_with_one_and_list_every_problem() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = synth_config(
        tmp.path(),
        "cycles-vs-trees",
        4,
        "[model]\nm = 1\nbases = 0\n[train]\nlr = -1.0\n",
    );
    let o = ppoinc(&cfg, &tmp.path().join("out"), &["train"]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    for key in ["model.m", "model.bases", "lr"] {
        assert!(err.contains(key), "{key} missing from {err}");
    }

    let o = Command::new(env!("CARGO_BIN_EXE_ppoinc"))
        .arg("diagrams")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));

    let unknown = write_config(tmp.path(), "[dataset]\nkind = \"nope\"\n");
    assert_eq!(
        ppoinc(&unknown, &tmp.path().join("out"), &["diagrams"])
            .status
            .code(),
        Some(1)
    );
}
