use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use cvm_core::correlation::build_contrast_set;
use cvm_core::field::{normalize_minmax, threshold};
use cvm_core::io;
use cvm_core::metrics::{evaluate, MetricsReport};
use cvm_core::selective::{solve_selective, DistanceConstraint};
use cvm_core::supervision::{total_loss, SparseLabels};
use cvm_core::synth::{generate, SynthSpec};
use cvm_core::variational::{run_cvm, solve_cvm, SolveReport};
use cvm_core::{BinaryMask, FeatureMap, GridPoint, ScalarField};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::args::{
    BaselineArgs, ContrastArgs, DistanceArg, EvalArgs, LossesArgs, RenderArgs, SegmentArgs,
    SynthArgs,
};
use crate::config::{distance_config, eta, solver_config, ConfigFile};
use crate::error::CliError;

type Result<T> = std::result::Result<T, CliError>;

/// Provenance record written next to every output.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: &'static str,
    pub version: &'static str,
    pub config: serde_json::Value,
    pub inputs: BTreeMap<&'static str, String>,
    pub outputs: Vec<String>,
    pub wall_time_s: f64,
}

fn write_manifest(
    path: &Path,
    subcommand: &'static str,
    config: serde_json::Value,
    inputs: BTreeMap<&'static str, String>,
    outputs: Vec<String>,
    start: Instant,
) -> Result<()> {
    let manifest = RunManifest {
        subcommand,
        version: env!("CARGO_PKG_VERSION"),
        config,
        inputs,
        outputs,
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    Ok(io::write_json(&manifest, path)?)
}

/// Sibling path `<file>.manifest.json` for single-file outputs.
fn manifest_beside(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    out.with_file_name(name)
}

fn show(p: &Path) -> String {
    p.display().to_string()
}

/// Files written into one output directory, in write order.
struct OutDir {
    dir: PathBuf,
    names: Vec<String>,
}

impl OutDir {
    fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        Ok(OutDir {
            dir: dir.to_path_buf(),
            names: Vec::new(),
        })
    }

    fn path(&mut self, name: String) -> PathBuf {
        let p = self.dir.join(&name);
        self.names.push(name);
        p
    }

    fn scalar(&mut self, name: &str, f: &ScalarField) -> Result<()> {
        let p = self.path(format!("{name}.npy"));
        Ok(io::write_scalar(f, p)?)
    }

    fn heatmap(&mut self, name: &str, f: &ScalarField) -> Result<()> {
        let p = self.path(format!("{name}.png"));
        Ok(io::write_heatmap_png(f, p)?)
    }

    fn mask(&mut self, name: &str, m: &BinaryMask) -> Result<()> {
        let p = self.path(format!("{name}.png"));
        Ok(io::write_mask_png(m, p)?)
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let p = self.path(format!("{name}.json"));
        Ok(io::write_json(value, p)?)
    }

    fn finish(
        self,
        subcommand: &'static str,
        config: serde_json::Value,
        inputs: BTreeMap<&'static str, String>,
        start: Instant,
    ) -> Result<()> {
        let path = self.dir.join("manifest.json");
        write_manifest(&path, subcommand, config, inputs, self.names, start)
    }
}

fn check_unit(f: &ScalarField, what: &str) -> Result<()> {
    match f.data().iter().position(|v| !(0.0..=1.0).contains(v)) {
        Some(i) => Err(CliError::Internal(format!(
            "{what} has value {} at element {i}, outside [0, 1]",
            f.data()[i]
        ))),
        None => Ok(()),
    }
}

fn check_reports(reports: &[SolveReport]) -> Result<()> {
    for r in reports {
        if r.energy_trace.len() != r.iterations_used + 1 {
            return Err(CliError::Internal(format!(
                "energy trace has {} entries for {} iterations",
                r.energy_trace.len(),
                r.iterations_used
            )));
        }
    }
    Ok(())
}

fn read_scalar(path: &Path) -> Result<ScalarField> {
    Ok(io::read_array(path)?.into_scalar()?)
}

fn read_features(path: &Path) -> Result<FeatureMap> {
    Ok(io::read_array(path)?.into_features()?)
}

#[derive(Serialize)]
struct PointReport<'a> {
    point: [usize; 2],
    #[serde(flatten)]
    report: &'a SolveReport,
}

fn point_reports<'a>(points: &[GridPoint], reports: &'a [SolveReport]) -> Vec<PointReport<'a>> {
    points
        .iter()
        .zip(reports)
        .map(|(p, report)| PointReport {
            point: [p.x, p.y],
            report,
        })
        .collect()
}

pub fn contrast(args: &ContrastArgs) -> Result<()> {
    let start = Instant::now();
    let file = ConfigFile::load(args.config.as_deref())?;
    let eta = eta(args.eta, &file)?;
    let map = read_features(&args.features)?;
    let ann = io::read_annotations(&args.points)?;
    let set = build_contrast_set(&map, &ann, eta)?;

    let mut out = OutDir::create(&args.out_dir)?;
    for (j, (_, s_q)) in set.out_of_target.iter().enumerate() {
        out.scalar(&format!("s_q{j}"), s_q)?;
        out.heatmap(&format!("s_q{j}"), &s_q.map(|v| 0.5 * (v + 1.0)))?;
    }
    for (k, pc) in set.per_point.iter().enumerate() {
        out.scalar(&format!("s_p{k}"), &pc.correlation)?;
        out.heatmap(&format!("s_p{k}"), &pc.correlation.map(|v| 0.5 * (v + 1.0)))?;
        for (j, c) in pc.maps.iter().enumerate() {
            check_unit(c, "contrast map")?;
            out.scalar(&format!("c_p{k}_q{j}"), c)?;
            out.heatmap(&format!("c_p{k}_q{j}"), c)?;
        }
        out.scalar(&format!("z_p{k}"), &pc.mean)?;
        out.heatmap(&format!("z_p{k}"), &pc.mean)?;
    }
    let inputs = BTreeMap::from([("features", show(&args.features)), ("points", show(&args.points))]);
    out.finish("contrast", json!({ "eta": eta }), inputs, start)
}

pub fn segment(args: &SegmentArgs) -> Result<()> {
    let start = Instant::now();
    let file = ConfigFile::load(args.config.config.as_deref())?;
    let cfg = solver_config(&args.config, &file)?;
    let mut inputs = BTreeMap::new();
    let mut out;

    let config = if let Some(image) = &args.image {
        let f = read_scalar(image)?;
        inputs.insert("image", show(image));
        if let Some(points) = &args.points {
            io::read_annotations(points)?.check_fits(f.shape())?;
            inputs.insert("points", show(points));
        }
        let (u, report) = solve_cvm(&f, &cfg)?;
        check_unit(&u, "segmentation")?;
        check_reports(std::slice::from_ref(&report))?;
        out = OutDir::create(&args.out_dir)?;
        out.scalar("u", &u)?;
        out.heatmap("u", &u)?;
        out.mask("mask", &threshold(&u, cfg.gamma)?)?;
        out.json("report", &[&report])?;
        json!({ "mode": "image", "solver": cfg })
    } else {
        let features = args.features.as_ref().expect("clap requires features or image");
        let points = args.points.as_ref().expect("clap requires points with features");
        let eta = eta(args.eta, &file)?;
        let map = read_features(features)?;
        let ann = io::read_annotations(points)?;
        inputs.insert("features", show(features));
        inputs.insert("points", show(points));
        let res = run_cvm(&map, &ann, &cfg, eta)?;
        check_unit(&res.u, "segmentation")?;
        check_reports(&res.reports)?;
        out = OutDir::create(&args.out_dir)?;
        out.scalar("u", &res.u)?;
        out.heatmap("u", &res.u)?;
        out.mask("mask", &threshold(&res.u, cfg.gamma)?)?;
        for (k, u_p) in res.per_point.iter().enumerate() {
            check_unit(u_p, "per-point segmentation")?;
            out.scalar(&format!("u_p{k}"), u_p)?;
        }
        out.json("report", &point_reports(&ann.in_target_field(), &res.reports))?;
        json!({ "mode": "features", "solver": cfg, "eta": eta })
    };
    out.finish("segment", config, inputs, start)
}

pub fn baseline(args: &BaselineArgs) -> Result<()> {
    let start = Instant::now();
    let file = ConfigFile::load(args.config.config.as_deref())?;
    let cfg = solver_config(&args.config, &file)?;
    let dist = distance_config(args.theta, args.speed_eps, args.speed_beta, &file)?;
    let f = read_scalar(&args.image)?;
    let ann = io::read_annotations(&args.points)?;
    ann.check_fits(f.shape())?;
    let markers = ann.in_target_field();
    let constraint = match args.distance {
        DistanceArg::Euclidean => DistanceConstraint::euclidean(&markers, f.shape(), dist.theta)?,
        DistanceArg::Geodesic => {
            DistanceConstraint::geodesic(&f, &markers, dist.speed_eps, dist.speed_beta, dist.theta)?
        }
    };
    check_unit(&constraint.map, "distance map")?;
    let (u, report) = solve_selective(&f, &constraint, &cfg)?;
    check_unit(&u, "segmentation")?;
    check_reports(std::slice::from_ref(&report))?;

    let mut out = OutDir::create(&args.out_dir)?;
    out.scalar("distance", &constraint.map)?;
    out.heatmap("distance", &constraint.map)?;
    out.scalar("u", &u)?;
    out.heatmap("u", &u)?;
    out.mask("mask", &threshold(&u, cfg.gamma)?)?;
    out.json("report", &[&report])?;
    let distance = match args.distance {
        DistanceArg::Euclidean => "euclidean",
        DistanceArg::Geodesic => "geodesic",
    };
    let config = json!({ "solver": cfg, "distance": distance, "constraint": dist });
    let inputs = BTreeMap::from([("image", show(&args.image)), ("points", show(&args.points))]);
    out.finish("baseline", config, inputs, start)
}

/// Prints `value` as JSON and, with `out`, also writes it there plus a manifest.
fn emit<T: Serialize>(
    value: &T,
    out: Option<&Path>,
    subcommand: &'static str,
    config: serde_json::Value,
    inputs: BTreeMap<&'static str, String>,
    start: Instant,
) -> Result<()> {
    print!("{}", io::to_json_string(value));
    if let Some(path) = out {
        io::write_json(value, path)?;
        let outputs = vec![show(path)];
        write_manifest(&manifest_beside(path), subcommand, config, inputs, outputs, start)?;
    }
    Ok(())
}

pub fn losses(args: &LossesArgs) -> Result<()> {
    let start = Instant::now();
    let pred = read_scalar(&args.pred)?;
    let sup = read_scalar(&args.supervision)?;
    let ann = io::read_annotations(&args.points)?;
    if let Some(i) = pred.data().iter().position(|v| !(0.0..=1.0).contains(v)) {
        return Err(CliError::Validation(format!(
            "prediction value {} at element {i} outside [0, 1]",
            pred.data()[i]
        )));
    }
    let labels = SparseLabels::from_annotations(&ann, pred.shape(), args.expand)?;
    let report = total_loss(&pred, &labels, &sup)?;
    if !(report.total.is_finite() && report.pce >= 0.0 && report.wkl >= 0.0) {
        return Err(CliError::Internal(format!("loss report {report:?} is not finite and non-negative")));
    }
    let inputs = BTreeMap::from([
        ("pred", show(&args.pred)),
        ("supervision", show(&args.supervision)),
        ("points", show(&args.points)),
    ]);
    emit(&report, args.out.as_deref(), "losses", json!({ "expand": args.expand }), inputs, start)
}

fn eval_one(pred: &Path, gt: &Path, scores: Option<&Path>) -> Result<MetricsReport> {
    let p = io::read_mask_png(pred)?;
    let g = io::read_mask_png(gt)?;
    let s = scores.map(read_scalar).transpose()?;
    Ok(evaluate(&p, &g, s.as_ref())?)
}

#[derive(Debug, Serialize)]
struct InstanceMetrics {
    name: String,
    #[serde(flatten)]
    metrics: MetricsReport,
}

#[derive(Debug, Serialize)]
struct BatchMetrics {
    instances: Vec<InstanceMetrics>,
    mean: MetricsReport,
    /// Sample standard deviation (zero for a single instance).
    std: MetricsReport,
}

fn summarize(all: &[MetricsReport]) -> (MetricsReport, MetricsReport) {
    let n = all.len() as f64;
    let stat = |get: fn(&MetricsReport) -> f64| {
        let mean = all.iter().map(get).sum::<f64>() / n;
        let var = if all.len() > 1 {
            all.iter().map(|m| (get(m) - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        (mean, var.sqrt())
    };
    let (dice, accuracy, kappa, auc) = (
        stat(|m| m.dice),
        stat(|m| m.accuracy),
        stat(|m| m.kappa),
        stat(|m| m.auc),
    );
    (
        MetricsReport {
            dice: dice.0,
            accuracy: accuracy.0,
            kappa: kappa.0,
            auc: auc.0,
        },
        MetricsReport {
            dice: dice.1,
            accuracy: accuracy.1,
            kappa: kappa.1,
            auc: auc.1,
        },
    )
}

fn png_names(dir: &Path) -> Result<Vec<String>> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let mut names = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.ends_with(".png") && entry.path().is_file() {
            names.push(name);
        }
    }
    names.sort();
    if names.is_empty() {
        return Err(CliError::Validation(format!("no .png masks in {}", dir.display())));
    }
    Ok(names)
}

pub fn eval(args: &EvalArgs) -> Result<()> {
    let start = Instant::now();
    let mut inputs = BTreeMap::from([("pred", show(&args.pred)), ("gt", show(&args.gt))]);
    if let Some(s) = &args.scores {
        inputs.insert("scores", show(s));
    }
    if !args.pred.is_dir() {
        let report = eval_one(&args.pred, &args.gt, args.scores.as_deref())?;
        return emit(&report, args.out.as_deref(), "eval", json!({ "mode": "single" }), inputs, start);
    }

    if !args.gt.is_dir() {
        return Err(CliError::Validation(format!(
            "--pred is a directory, so --gt {} must be one too",
            args.gt.display()
        )));
    }
    let names = png_names(&args.pred)?;
    let metrics = names
        .par_iter()
        .map(|name| {
            let gt = args.gt.join(name);
            if !gt.is_file() {
                return Err(CliError::Validation(format!("no ground truth {}", gt.display())));
            }
            let scores = args.scores.as_ref().map(|dir| {
                let stem = name.trim_end_matches(".png");
                dir.join(format!("{stem}.npy"))
            });
            let metrics = eval_one(&args.pred.join(name), &gt, scores.as_deref())?;
            Ok(InstanceMetrics {
                name: name.clone(),
                metrics,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let all: Vec<MetricsReport> = metrics.iter().map(|m| m.metrics).collect();
    let (mean, std) = summarize(&all);
    let batch = BatchMetrics {
        instances: metrics,
        mean,
        std,
    };
    emit(&batch, args.out.as_deref(), "eval", json!({ "mode": "directory" }), inputs, start)
}

pub fn synth(args: &SynthArgs) -> Result<()> {
    let start = Instant::now();
    let spec: SynthSpec = io::read_json(&args.spec)?;
    let inst = generate(&spec)?;
    let mut out = OutDir::create(&args.out_dir)?;
    out.scalar("image", &inst.image)?;
    let p = out.path("features.npy".into());
    io::write_features(&inst.features, p)?;
    out.mask("gt", &inst.gt)?;
    out.mask("novel", &inst.novel)?;
    let p = out.path("points.json".into());
    io::write_annotations(&inst.annotations, p)?;
    out.json("spec", &spec)?;
    let config = serde_json::to_value(&spec).expect("spec serializes");
    out.finish("synth", config, BTreeMap::from([("spec", show(&args.spec))]), start)
}

pub fn render(args: &RenderArgs) -> Result<()> {
    let start = Instant::now();
    let f = read_scalar(&args.field)?;
    let f = if args.normalize { normalize_minmax(&f) } else { f };
    io::write_heatmap_png(&f, &args.out)?;
    write_manifest(
        &manifest_beside(&args.out),
        "render",
        json!({ "normalize": args.normalize }),
        BTreeMap::from([("field", show(&args.field))]),
        vec![show(&args.out)],
        start,
    )
}
