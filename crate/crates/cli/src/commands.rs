use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use poincare_persistence::data::{precompute_diagrams, Dataset, DatasetSource};
use poincare_persistence::learn::{
    accuracy, gradcheck, load_checkpoint, save_checkpoint, train, train_cv, EpochLog,
    GradcheckOptions, InputLayer, LearnError, Model, Sample,
};
use poincare_persistence::metrics::{perturb, stability_audit};
use poincare_persistence::persistence::{
    write_jsonl, DiagramHeader, PersistenceDiagram, HOMOLOGY_DIMS,
};
use poincare_persistence::representation::{
    point_images, represent, rho_grid, ReprParams, Variant,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::{CliError, RunConfig};

/// A validated config and the directory artifacts go to.
#[derive(Debug, Clone)]
pub struct Context {
    pub cfg: RunConfig,
    pub out: PathBuf,
}

/// Validates `cfg`, creates `out` and writes `config.resolved.toml` there.
pub fn prepare(cfg: RunConfig, out: &Path) -> Result<Context, CliError> {
    cfg.validate()?;
    fs::create_dir_all(out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
    write_file(&out.join("config.resolved.toml"), &cfg.to_toml())?;
    Ok(Context {
        cfg,
        out: out.to_path_buf(),
    })
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn csv(header: &str, rows: impl IntoIterator<Item = String>) -> String {
    let mut s = String::from(header);
    s.push('\n');
    for r in rows {
        s.push_str(&r);
        s.push('\n');
    }
    s
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Loads a dataset and computes (or fetches from the cache) its diagrams.
pub fn load_dataset(cfg: &RunConfig, source: &DatasetSource) -> Result<Dataset, CliError> {
    let mut ds = source.load(Path::new("."))?;
    if ds.is_empty() {
        return Err(poincare_persistence::data::DataError::Empty.into());
    }
    precompute_diagrams(&mut ds, &cfg.filtrations, cfg.cache_dir.as_deref())?;
    Ok(ds)
}

fn dataset_max_scale(ds: &Dataset) -> f64 {
    match &ds.stats {
        Some(s) if s.max_filtration_value > 0.0 => s.max_filtration_value,
        _ => 1.0,
    }
}

fn channel_names(cfg: &RunConfig, ds: &Dataset) -> Vec<String> {
    cfg.model
        .channels
        .clone()
        .unwrap_or_else(|| ds.channel_names().iter().map(|s| s.to_string()).collect())
}

fn channel_diagrams<'a>(ds: &'a Dataset, name: &str) -> Result<&'a [PersistenceDiagram], CliError> {
    ds.channels
        .iter()
        .find(|c| c.name == name)
        .map(|c| c.diagrams.as_slice())
        .ok_or_else(|| {
            CliError::Validation(vec![format!(
                "unknown channel {name:?}; available: {}",
                ds.channel_names().join(", ")
            )])
        })
}

/// Representation parameters for one channel. The mean grid comes from the
/// diagrams of that channel over `ds`.
pub fn init_repr(
    cfg: &RunConfig,
    variant: Variant,
    diagrams: &[PersistenceDiagram],
    max_scale: f64,
    rng: &mut ChaCha8Rng,
) -> Result<ReprParams, CliError> {
    let rho = rho_grid(diagrams, cfg.model.m, max_scale)?;
    Ok(ReprParams::init(
        variant,
        cfg.model.bases,
        cfg.model.essential_policy,
        rho,
        max_scale,
        rng,
    )?)
}

/// What feeds the dense head.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Repr(Variant),
    Histogram { include_essential: bool },
}

impl Method {
    pub fn name(&self) -> String {
        match self {
            Self::Repr(v) => format!("p-{}", variant_name(*v)),
            Self::Histogram {
                include_essential: true,
            } => "baseline-w-essential".into(),
            Self::Histogram {
                include_essential: false,
            } => "baseline-wo-essential".into(),
        }
    }
}

fn variant_name(v: Variant) -> &'static str {
    match v {
        Variant::Poinc => "poinc",
        Variant::Hybrid => "hybrid",
        Variant::Eucl => "eucl",
    }
}

/// A fresh model with one input layer per configured channel.
pub fn build_model(
    cfg: &RunConfig,
    method: Method,
    ds: &Dataset,
    rng: &mut ChaCha8Rng,
) -> Result<Model, CliError> {
    let mut inputs = Vec::new();
    for name in channel_names(cfg, ds) {
        let diagrams = channel_diagrams(ds, &name)?;
        inputs.push(match method {
            Method::Repr(v) => {
                let ms = cfg.model.max_scale.unwrap_or_else(|| dataset_max_scale(ds));
                InputLayer::Representation(init_repr(cfg, v, diagrams, ms, rng)?)
            }
            Method::Histogram { include_essential } => InputLayer::Histogram {
                bins: cfg.baseline.bins,
                include_essential,
                max_scale: cfg
                    .baseline
                    .max_scale
                    .unwrap_or_else(|| dataset_max_scale(ds)),
            },
        });
    }
    Ok(Model::new(inputs, ds.classes(), &cfg.train.head(), rng)?)
}

/// One line of `metrics.csv`. Accuracies are taken at the last epoch;
/// the `best` columns use the best epoch of each fold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricRow {
    pub method: String,
    pub protocol: String,
    pub runs: usize,
    pub mean_acc: f64,
    pub std_acc: f64,
    pub mean_best_acc: f64,
    pub std_best_acc: f64,
}

const METRICS_HEADER: &str = "method,protocol,runs,mean_acc,std_acc,mean_best_acc,std_best_acc";

impl MetricRow {
    fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.method,
            self.protocol,
            self.runs,
            self.mean_acc,
            self.std_acc,
            self.mean_best_acc,
            self.std_best_acc
        )
    }
}

fn log_csv(logs: &[EpochLog]) -> String {
    csv(
        "epoch,fold,train_loss,val_acc,lr",
        logs.iter().map(|l| {
            format!(
                "{},{},{},{},{}",
                l.epoch,
                l.fold,
                l.train_loss,
                opt(l.val_acc),
                l.lr
            )
        }),
    )
}

fn run_method(ctx: &Context, method: Method, ds: &Dataset) -> Result<MetricRow, CliError> {
    let cfg = &ctx.cfg;
    let channels = channel_names(cfg, ds);
    let samples = ds.samples(Some(&channels))?;
    let name = method.name();
    let build_seed = cfg.seed ^ 0x5EED;
    let (row, logs, model) = match &cfg.test_dataset {
        Some(src) => {
            let test_ds = load_dataset(cfg, src)?;
            let test = test_ds.samples(Some(&channels))?;
            let mut rng = ChaCha8Rng::seed_from_u64(build_seed);
            let mut model = build_model(cfg, method, ds, &mut rng)?;
            let out = train(&mut model, &samples, Some(&test), &cfg.train, 0)?;
            let row = MetricRow {
                method: name.clone(),
                protocol: "holdout".into(),
                runs: 1,
                mean_acc: out.final_val_acc.unwrap_or(0.0),
                std_acc: 0.0,
                mean_best_acc: out.best_val_acc.unwrap_or(0.0),
                std_best_acc: 0.0,
            };
            (row, out.logs, model)
        }
        None => {
            let report = train_cv(&samples, &cfg.train, |_, rng| {
                build_model(cfg, method, ds, rng).map_err(|e| match e {
                    CliError::Learn(l) => l,
                    other => LearnError::Config(vec![other.to_string()]),
                })
            })?;
            // The checkpoint is a model fitted on every sample.
            let mut rng = ChaCha8Rng::seed_from_u64(build_seed);
            let mut model = build_model(cfg, method, ds, &mut rng)?;
            train(&mut model, &samples, None, &cfg.train, cfg.train.folds)?;
            let row = MetricRow {
                method: name.clone(),
                protocol: format!("{}-fold-cv", cfg.train.folds),
                runs: report.folds.len(),
                mean_acc: report.mean_final,
                std_acc: report.std_final,
                mean_best_acc: report.mean_best,
                std_best_acc: report.std_best,
            };
            (row, report.logs, model)
        }
    };
    write_file(
        &ctx.out.join(format!("train_log_{name}.csv")),
        &log_csv(&logs),
    )?;
    save_checkpoint(&ctx.out.join(format!("checkpoint_{name}.json")), &model)?;
    Ok(row)
}

/// Writes `rows` into `metrics.csv`, replacing earlier rows of the same
/// method and keeping the others, so `train` and `baseline` can share an
/// output directory.
fn write_metrics(ctx: &Context, rows: &[MetricRow]) -> Result<(), CliError> {
    let path = ctx.out.join("metrics.csv");
    let mut lines: Vec<String> = match fs::read_to_string(&path) {
        Ok(text) if text.lines().next() == Some(METRICS_HEADER) => text
            .lines()
            .skip(1)
            .filter(|l| {
                let method = l.split(',').next().unwrap_or_default();
                !rows.iter().any(|r| r.method == method)
            })
            .map(str::to_string)
            .collect(),
        _ => Vec::new(),
    };
    lines.extend(rows.iter().map(MetricRow::csv));
    write_file(&path, &csv(METRICS_HEADER, lines))
}

/// Trains every configured variant; writes `metrics.csv`, one training log
/// and one checkpoint per variant.
pub fn cmd_train(ctx: &Context) -> Result<Vec<MetricRow>, CliError> {
    let ds = load_dataset(&ctx.cfg, &ctx.cfg.dataset)?;
    let rows = ctx
        .cfg
        .model
        .variants
        .iter()
        .map(|&v| run_method(ctx, Method::Repr(v), &ds))
        .collect::<Result<Vec<_>, _>>()?;
    write_metrics(ctx, &rows)?;
    Ok(rows)
}

/// Histogram baseline with and without essential-point bins.
pub fn cmd_baseline(ctx: &Context) -> Result<Vec<MetricRow>, CliError> {
    let ds = load_dataset(&ctx.cfg, &ctx.cfg.dataset)?;
    let rows = [true, false]
        .into_iter()
        .map(|e| {
            run_method(
                ctx,
                Method::Histogram {
                    include_essential: e,
                },
                &ds,
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    write_metrics(ctx, &rows)?;
    Ok(rows)
}

fn file_stem(index: usize, id: &str) -> String {
    let safe: String = id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "-_.".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("{index:06}-{safe}")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagramsReport {
    pub samples: usize,
    pub channels: Vec<String>,
    pub label_histogram: Vec<usize>,
    pub max_filtration_value: f64,
}

/// Writes `diagrams/<channel>/<index>-<id>.jsonl`, `diagrams/header.json`
/// and `summary.csv` (points and essential points per sample, channel and
/// dimension, counted with multiplicity). With `dump_phi`, also writes
/// `phi_points.csv`: every point of the first model channel with its `ρ`
/// and `φ` images per slot, under the `eval.checkpoint` parameters or
/// seeded random ones.
pub fn cmd_diagrams(ctx: &Context, dump_phi: bool) -> Result<DiagramsReport, CliError> {
    let ds = load_dataset(&ctx.cfg, &ctx.cfg.dataset)?;
    let root = ctx.out.join("diagrams");
    let mut summary = Vec::new();
    for c in &ds.channels {
        for (i, d) in c.diagrams.iter().enumerate() {
            let mut buf = Vec::new();
            write_jsonl(&mut buf, d).map_err(|e| CliError::Io(e.to_string()))?;
            let path = root
                .join(&c.name)
                .join(format!("{}.jsonl", file_stem(i, &ds.ids[i])));
            write_file(&path, &String::from_utf8(buf).expect("jsonl is utf-8"))?;
            for dim in 0..HOMOLOGY_DIMS {
                let points: usize = d.in_dim(dim).map(|p| p.multiplicity).sum();
                summary.push(format!(
                    "{},{},{},{},{},{}",
                    ds.ids[i],
                    ds.class_names[ds.labels[i]],
                    c.name,
                    dim,
                    points,
                    d.essential_count(dim)
                ));
            }
        }
    }
    let max_value = ds.stats.as_ref().map_or(0.0, |s| s.max_filtration_value);
    let header = serde_json::to_string_pretty(&DiagramHeader::new(max_value))
        .map_err(|e| CliError::Io(e.to_string()))?;
    write_file(&root.join("header.json"), &header)?;
    write_file(
        &ctx.out.join("summary.csv"),
        &csv("id,label,channel,dim,points,essential", summary),
    )?;
    if dump_phi {
        write_phi_points(ctx, &ds)?;
    }
    Ok(DiagramsReport {
        samples: ds.len(),
        channels: ds.channels.iter().map(|c| c.name.clone()).collect(),
        label_histogram: ds.label_histogram(),
        max_filtration_value: max_value,
    })
}

fn write_phi_points(ctx: &Context, ds: &Dataset) -> Result<(), CliError> {
    let cfg = &ctx.cfg;
    let channel = channel_names(cfg, ds).remove(0);
    let diagrams = channel_diagrams(ds, &channel)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let params = repr_params(cfg, ds, diagrams, cfg.eval.checkpoint.as_deref(), &mut rng)?;
    let m = params.m;
    let mut rows = Vec::new();
    for (i, d) in diagrams.iter().enumerate() {
        for img in point_images(d, &params)? {
            let mut line = format!(
                "{},{},{},{},{},{},{}",
                ds.ids[i],
                channel,
                img.slot,
                img.point.dim,
                img.point.birth,
                img.point.death,
                img.point.multiplicity
            );
            for v in img.rho.iter().chain(&img.phi) {
                let _ = write!(line, ",{v}");
            }
            rows.push(line);
        }
    }
    let mut header = String::from("id,channel,slot,dim,birth,death,multiplicity");
    for prefix in ["rho", "phi"] {
        for k in 0..m {
            let _ = write!(header, ",{prefix}_{k}");
        }
    }
    write_file(&ctx.out.join("phi_points.csv"), &csv(&header, rows))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub samples: usize,
    pub accuracy: f64,
}

/// Predicts the test set (or the dataset when there is none) with a saved
/// checkpoint; writes `predictions.csv` and `eval.csv`.
pub fn cmd_eval(ctx: &Context, checkpoint: Option<&Path>) -> Result<EvalReport, CliError> {
    let cfg = &ctx.cfg;
    let path = checkpoint
        .map(Path::to_path_buf)
        .or_else(|| cfg.eval.checkpoint.clone())
        .ok_or_else(|| {
            CliError::Validation(vec!["eval needs eval.checkpoint or --checkpoint".into()])
        })?;
    let model = load_checkpoint(&path)?;
    let src = cfg.test_dataset.as_ref().unwrap_or(&cfg.dataset);
    let ds = load_dataset(cfg, src)?;
    let samples: Vec<Sample> = ds.samples(Some(&channel_names(cfg, &ds)))?;
    if samples[0].diagrams.len() != model.inputs.len() {
        return Err(CliError::Validation(vec![format!(
            "checkpoint has {} input layers, config selects {} channels",
            model.inputs.len(),
            samples[0].diagrams.len()
        )]));
    }
    if ds.classes() > model.classes {
        return Err(CliError::Validation(vec![format!(
            "dataset has {} classes, checkpoint {}",
            ds.classes(),
            model.classes
        )]));
    }
    let mut rows = Vec::with_capacity(samples.len());
    let mut hits = 0;
    for (i, s) in samples.iter().enumerate() {
        let p = model.predict_proba(&s.diagrams)?;
        let pred = poincare_persistence::learn::argmax(&p);
        hits += usize::from(pred == s.label);
        let mut line = format!("{},{},{}", ds.ids[i], s.label, pred);
        for v in &p {
            let _ = write!(line, ",{v}");
        }
        rows.push(line);
    }
    let probs: Vec<String> = (0..model.classes).map(|c| format!("p_{c}")).collect();
    write_file(
        &ctx.out.join("predictions.csv"),
        &csv(&format!("id,label,pred,{}", probs.join(",")), rows),
    )?;
    let acc = hits as f64 / samples.len() as f64;
    debug_assert_eq!(acc, accuracy(&model, &samples)?);
    write_file(
        &ctx.out.join("eval.csv"),
        &csv("samples,accuracy", [format!("{},{acc}", samples.len())]),
    )?;
    Ok(EvalReport {
        samples: samples.len(),
        accuracy: acc,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradcheckRow {
    pub method: String,
    pub group: String,
    pub checked: usize,
    pub max_rel_error: f64,
    pub worst_index: usize,
    pub pass: bool,
}

/// Finite-difference check of every parameter group for every configured
/// variant; writes `gradcheck.csv`. `corrupt_index` perturbs the analytic
/// gradient at that flat index (a negative control).
pub fn cmd_gradcheck(
    ctx: &Context,
    corrupt_index: Option<usize>,
) -> Result<Vec<GradcheckRow>, CliError> {
    let cfg = &ctx.cfg;
    let ds = load_dataset(cfg, &cfg.dataset)?;
    let mut samples = ds.samples(Some(&channel_names(cfg, &ds)))?;
    samples.truncate(cfg.gradcheck.samples);
    let mut rows = Vec::new();
    for &v in &cfg.model.variants {
        let method = Method::Repr(v);
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let model = build_model(cfg, method, &ds, &mut rng)?;
        if let Some(i) = corrupt_index {
            if i >= model.param_count() {
                return Err(CliError::Validation(vec![format!(
                    "corrupt index {i} out of range for {} parameters",
                    model.param_count()
                )]));
            }
        }
        let opts = GradcheckOptions {
            step: cfg.gradcheck.step,
            per_group: cfg.gradcheck.per_group,
            corrupt_index,
            ..GradcheckOptions::default()
        };
        for g in gradcheck(&model, &samples, &opts, &mut rng)? {
            rows.push(GradcheckRow {
                method: method.name(),
                pass: g.max_rel_error <= cfg.gradcheck.tolerance,
                group: g.group,
                checked: g.checked,
                max_rel_error: g.max_rel_error,
                worst_index: g.worst_index,
            });
        }
    }
    write_file(
        &ctx.out.join("gradcheck.csv"),
        &csv(
            "method,group,checked,max_rel_error,worst_index,pass",
            rows.iter().map(|r| {
                format!(
                    "{},{},{},{},{},{}",
                    r.method, r.group, r.checked, r.max_rel_error, r.worst_index, r.pass
                )
            }),
        ),
    )?;
    let failed: Vec<String> = rows
        .iter()
        .filter(|r| !r.pass)
        .map(|r| {
            format!(
                "{} {}: relative error {:.3e} at parameter {}",
                r.method, r.group, r.max_rel_error, r.worst_index
            )
        })
        .collect();
    if failed.is_empty() {
        Ok(rows)
    } else {
        Err(CliError::Check(format!(
            "gradient check failed:\n  {}",
            failed.join("\n  ")
        )))
    }
}

/// Representation parameters of the first representation input of a
/// checkpoint, or freshly initialised ones for `diagrams`.
fn repr_params(
    cfg: &RunConfig,
    ds: &Dataset,
    diagrams: &[PersistenceDiagram],
    checkpoint: Option<&Path>,
    rng: &mut ChaCha8Rng,
) -> Result<ReprParams, CliError> {
    match checkpoint {
        Some(path) => load_checkpoint(path)?
            .inputs
            .into_iter()
            .find_map(|i| match i {
                InputLayer::Representation(p) => Some(p),
                InputLayer::Histogram { .. } => None,
            })
            .ok_or_else(|| {
                CliError::Validation(vec!["checkpoint has no representation input".into()])
            }),
        None => {
            let ms = cfg.model.max_scale.unwrap_or_else(|| dataset_max_scale(ds));
            init_repr(cfg, cfg.model.variants[0], diagrams, ms, rng)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilitySummary {
    /// Largest `d / δ` at the largest δ, over base diagrams.
    pub calibrated_c: f64,
    pub slack: f64,
    /// Per δ, the largest `d / (c_i δ)` over base diagrams, where `c_i` is
    /// the diagram's own ratio at the largest δ.
    pub worst_bound_fraction: Vec<(f64, f64)>,
    pub violations: usize,
    /// Largest `d / w₁` over all pairs with `w₁ > 0`.
    pub max_lipschitz_ratio: Option<f64>,
    /// Largest change of any representation coordinate after inserting
    /// diagonal points.
    pub diagonal_insertion_change: f64,
}

/// Stability audit: perturbs base diagrams by each δ, records Wasserstein
/// and representation distances, and checks that the representation
/// distance stays within `slack` times the linear bound calibrated at the
/// largest δ. Writes `stability.csv`, `stability_pairs.csv` and
/// `stability.json`.
pub fn cmd_stability(ctx: &Context) -> Result<StabilitySummary, CliError> {
    let cfg = &ctx.cfg;
    let sc = &cfg.stability;
    let ds = load_dataset(cfg, &cfg.dataset)?;
    let channel = sc
        .channel
        .clone()
        .unwrap_or_else(|| ds.channels[0].name.clone());
    let diagrams = channel_diagrams(&ds, &channel)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let params = repr_params(cfg, &ds, diagrams, sc.checkpoint.as_deref(), &mut rng)?;
    let directions: Vec<(f64, f64)> = (0..256)
        .map(|_| {
            let a = rng.gen_range(0.0..std::f64::consts::TAU);
            (a.cos(), a.sin())
        })
        .collect();
    let mut deltas = sc.deltas.clone();
    deltas.sort_by(|a, b| b.total_cmp(a));
    let d_max = deltas[0];

    let mut rows = Vec::new();
    let mut pair_rows = Vec::new();
    let mut per_base: Vec<Vec<f64>> = Vec::new();
    let mut max_lip: Option<f64> = None;
    let mut diag_change: f64 = 0.0;
    for (b, base) in diagrams.iter().take(sc.diagrams).enumerate() {
        let perturbed: Vec<PersistenceDiagram> = deltas
            .iter()
            .map(|&d| perturb(base, &directions, d))
            .collect();
        let report = stability_audit(base, &perturbed, &params)?;
        for r in &report.rows {
            let pair_id = b * deltas.len() + r.pair_id;
            rows.push(format!(
                "{},{},1,{},{},{}",
                pair_id,
                r.dim,
                r.wasserstein,
                r.d_ball,
                opt(r.ratio)
            ));
        }
        for (k, &(w, d)) in report.pairs.iter().enumerate() {
            pair_rows.push(format!(
                "{},{},{},{},{}",
                b * deltas.len() + k,
                b,
                deltas[k],
                w,
                d
            ));
        }
        if let Some(r) = report.max_ratio {
            max_lip = Some(max_lip.map_or(r, |m: f64| m.max(r)));
        }
        per_base.push(report.pairs.iter().map(|p| p.1).collect());

        let mut padded = base.points().to_vec();
        for p in base.points().iter().take(4) {
            padded.push(poincare_persistence::DiagramPoint::new(
                p.dim, p.birth, p.birth,
            ));
        }
        padded.push(poincare_persistence::DiagramPoint::new(0, 0.5, 0.5));
        let a = represent(base, &params)?;
        let z = represent(&PersistenceDiagram::new(padded), &params)?;
        for (x, y) in a.features.iter().zip(&z.features) {
            diag_change = diag_change.max((x - y).abs());
        }
    }

    let calibrated_c = per_base.iter().map(|d| d[0] / d_max).fold(0.0, f64::max);
    let mut violations = 0;
    let mut worst = vec![0.0f64; deltas.len()];
    for d in &per_base {
        let c_i = d[0] / d_max;
        for (k, &delta) in deltas.iter().enumerate() {
            let bound = c_i * delta;
            let frac = if bound > 0.0 {
                d[k] / bound
            } else if d[k] > 0.0 {
                f64::INFINITY
            } else {
                0.0
            };
            worst[k] = worst[k].max(frac);
            if frac > sc.slack {
                violations += 1;
            }
        }
    }
    let summary = StabilitySummary {
        calibrated_c,
        slack: sc.slack,
        worst_bound_fraction: deltas.iter().copied().zip(worst).collect(),
        violations,
        max_lipschitz_ratio: max_lip,
        diagonal_insertion_change: diag_change,
    };
    write_file(
        &ctx.out.join("stability.csv"),
        &csv("pair_id,dim,p,wasserstein,d_ball,ratio", rows),
    )?;
    write_file(
        &ctx.out.join("stability_pairs.csv"),
        &csv("pair_id,base,delta,wasserstein_total,d_ball_max", pair_rows),
    )?;
    write_file(
        &ctx.out.join("stability.json"),
        &serde_json::to_string_pretty(&summary).map_err(|e| CliError::Io(e.to_string()))?,
    )?;
    if violations > 0 || diag_change != 0.0 {
        return Err(CliError::Check(format!(
            "stability audit failed: {violations} bound violations, diagonal insertion change {diag_change:e}"
        )));
    }
    Ok(summary)
}
