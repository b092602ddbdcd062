//! Acceptance suite: runs every criterion and prints one PASS/FAIL line each.
//!
//! The process exits successfully after reporting, so that a criterion that
//! is known not to hold shows up as a FAIL line instead of aborting the test
//! run. Set `CVM_ACCEPTANCE_STRICT=1` to turn any FAIL into a non-zero exit.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use cvm_core::correlation::{build_contrast_set, contrast_map, cosine_similarity_map};
use cvm_core::field::threshold;
use cvm_core::io::{self, AnnotationFile, Array};
use cvm_core::metrics::{accuracy, auc, confusion, dice, kappa, ConfusionCounts, MetricsReport};
use cvm_core::selective::{
    euclidean_distance_map, geodesic_distance_map, slowness_field, solve_selective,
    DistanceConstraint, DEFAULT_SPEED_BETA, DEFAULT_SPEED_EPS,
};
use cvm_core::supervision::{entropy_weights, weighted_kl};
use cvm_core::synth::{generate, mask_energy, oracle_best_mask, rng::Stream, SynthSpec};
use cvm_core::variational::{region_means, run_cvm, solve_cvm_with_edges, SolveReport, SolverConfig};
use cvm_core::{BinaryMask, FeatureMap, GridPoint, ScalarField, Shape};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn monotone(r: &SolveReport) -> bool {
    let (a, b) = (r.initial_energy(), r.final_energy());
    b <= a + 1e-9 * a.abs().max(f64::MIN_POSITIVE)
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Results of the synthetic suites shared by several criteria.
struct Suites {
    oracle_reports: Vec<SolveReport>,
    clean_dice: Vec<f64>,
    clean_reports: Vec<SolveReport>,
    noisy_dice: Vec<f64>,
    noisy_reports: Vec<SolveReport>,
    noisy_dice_eta0: Vec<f64>,
    novel_u: Vec<(f64, f64)>,
    novel_reports: Vec<SolveReport>,
    clean_noisy_secs: f64,
}

const SEEDS: u64 = 20;
const NOISE: f64 = 0.2;

fn suite_spec(seed: u64, noise: f64, novel: bool) -> SynthSpec {
    SynthSpec {
        seed,
        noise_sigma: noise,
        feature_separation: 60.0,
        novel_region: novel,
        ..Default::default()
    }
}

fn segment_dice(spec: &SynthSpec, eta: f64, reports: &mut Vec<SolveReport>) -> f64 {
    let cfg = SolverConfig::default();
    let inst = generate(spec).expect("suite instance");
    let out = run_cvm(&inst.features, &inst.annotations, &cfg, eta).expect("run_cvm");
    reports.extend(out.reports);
    let mask = threshold(&out.u, cfg.gamma).unwrap();
    dice(&confusion(&mask, &inst.gt).unwrap())
}

fn run_suites(oracle_reports: Vec<SolveReport>) -> Suites {
    let start = Instant::now();
    let mut clean_reports = Vec::new();
    let clean_dice: Vec<f64> = (0..SEEDS)
        .map(|s| segment_dice(&suite_spec(s, 0.0, false), 0.6, &mut clean_reports))
        .collect();
    let mut noisy_reports = Vec::new();
    let noisy_dice: Vec<f64> = (0..SEEDS)
        .map(|s| segment_dice(&suite_spec(s, NOISE, false), 0.6, &mut noisy_reports))
        .collect();
    let clean_noisy_secs = start.elapsed().as_secs_f64();
    let noisy_dice_eta0: Vec<f64> = (0..SEEDS)
        .map(|s| segment_dice(&suite_spec(s, NOISE, false), 0.0, &mut noisy_reports))
        .collect();

    let cfg = SolverConfig::default();
    let mut novel_reports = Vec::new();
    let novel_u = (0..SEEDS)
        .map(|s| {
            let inst = generate(&suite_spec(s, NOISE, true)).unwrap();
            let out = run_cvm(&inst.features, &inst.annotations, &cfg, 0.6).unwrap();
            novel_reports.extend(out.reports);
            let over = |m: &BinaryMask| {
                let vals: Vec<f64> = out
                    .u
                    .data()
                    .iter()
                    .zip(m.data())
                    .filter(|(_, &b)| b == 1)
                    .map(|(v, _)| *v)
                    .collect();
                mean(&vals)
            };
            (over(&inst.novel), over(&inst.gt))
        })
        .collect();
    Suites {
        oracle_reports,
        clean_dice,
        clean_reports,
        noisy_dice,
        noisy_reports,
        noisy_dice_eta0,
        novel_u,
        novel_reports,
        clean_noisy_secs,
    }
}

/// A small bright disk of random radius and position plus uniform noise,
/// min-max normalized.
fn oracle_field(rng: &mut Stream, side: usize) -> ScalarField {
    let radius = 0.6 + 1.4 * rng.uniform();
    let cy = rng.uniform() * side as f64;
    let cx = rng.uniform() * side as f64;
    let width = 0.3;
    let raw = ScalarField::from_fn(side, side, |r, c| {
        let inside = (r as f64 - cy).powi(2) + (c as f64 - cx).powi(2) <= radius * radius;
        inside as u8 as f64 + width * (rng.uniform() - 0.5)
    });
    cvm_core::field::normalize_minmax(&raw)
}

fn criterion_1() -> (Outcome, Vec<SolveReport>) {
    let start = Instant::now();
    let cfg = SolverConfig::default();
    let mut rng = Stream::new(2024);
    let (mut n, mut same_mask, mut same_energy) = (0, 0, 0);
    let mut worst_gap: f64 = 0.0;
    let mut reports = Vec::new();
    for side in [3, 4] {
        for _ in 0..100 {
            let z = oracle_field(&mut rng, side);
            let ones = ScalarField::filled(side, side, 1.0);
            let (u, report) = solve_cvm_with_edges(&z, &ones, &cfg).unwrap();
            reports.push(report);
            let mask = threshold(&u, cfg.gamma).unwrap();
            let best = oracle_best_mask(&z, cfg.lambda).unwrap();
            let gap = mask_energy(&z, &mask, cfg.lambda).0 - mask_energy(&z, &best, cfg.lambda).0;
            n += 1;
            same_mask += (mask == best) as usize;
            same_energy += (gap.abs() <= 1e-6) as usize;
            worst_gap = worst_gap.max(gap);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = same_mask * 100 >= 95 * n && same_energy == n && secs < 10.0;
    let detail = format!(
        "{same_mask}/{n} masks equal the exhaustive optimum, {same_energy}/{n} energies within 1e-6 \
         (largest excess {worst_gap:.4}), {secs:.2} s"
    );
    (outcome(pass, detail), reports)
}

fn criterion_2(s: &Suites) -> Outcome {
    let perfect = s.clean_dice.iter().filter(|&&d| d == 1.0).count();
    let noisy = mean(&s.noisy_dice);
    let pass = perfect == SEEDS as usize && noisy >= 0.95 && s.clean_noisy_secs < 60.0;
    outcome(
        pass,
        format!(
            "noiseless Dice 1.0 on {perfect}/{SEEDS} seeds; sigma {NOISE} mean Dice {noisy:.4}; {:.1} s",
            s.clean_noisy_secs
        ),
    )
}

fn criterion_3(s: &Suites) -> Outcome {
    let novel = mean(&s.novel_u.iter().map(|p| p.0).collect::<Vec<_>>());
    let target = mean(&s.novel_u.iter().map(|p| p.1).collect::<Vec<_>>());
    let worst = s.novel_u.iter().map(|p| p.0).fold(0.0, f64::max);
    outcome(
        novel <= 0.1 && target >= 0.6,
        format!("mean u on novel pixels {novel:.4} (worst seed {worst:.4}), on target pixels {target:.4}"),
    )
}

fn criterion_4(s: &Suites) -> Outcome {
    let (a, b) = (mean(&s.noisy_dice), mean(&s.noisy_dice_eta0));
    outcome(a > b, format!("mean Dice {a:.4} at eta 0.6 vs {b:.4} at eta 0"))
}

fn criterion_5(s: &Suites) -> Outcome {
    let all: Vec<&SolveReport> = s
        .oracle_reports
        .iter()
        .chain(&s.clean_reports)
        .chain(&s.noisy_reports)
        .chain(&s.novel_reports)
        .collect();
    let good = all.iter().filter(|r| monotone(r)).count();
    outcome(good == all.len(), format!("{good}/{} solves end at or below their initial energy", all.len()))
}

fn criterion_6() -> Outcome {
    let mut rng = Stream::new(6);
    let mut worst_mean: f64 = 0.0;
    for _ in 0..1000 {
        let (h, w) = (1 + rng.below(8), 1 + rng.below(8));
        let z = ScalarField::from_fn(h, w, |_, _| rng.uniform());
        let u = ScalarField::from_fn(h, w, |_, _| rng.uniform());
        let (c1, c2) = region_means(&z, &u).unwrap();
        let (mut a, mut b, mut c, mut d) = (0.0, 0.0, 0.0, 0.0);
        for (zv, uv) in z.data().iter().zip(u.data()) {
            a += zv * uv;
            b += uv;
            c += zv * (1.0 - uv);
            d += 1.0 - uv;
        }
        worst_mean = worst_mean.max((c1 - a / b).abs()).max((c2 - c / d).abs());
    }

    let mut worst_grad: f64 = 0.0;
    let step = 1e-6;
    for _ in 0..50 {
        let (h, w) = (3, 3);
        let u = ScalarField::from_fn(h, w, |_, _| rng.uniform());
        let y = ScalarField::from_fn(h, w, |_, _| 0.05 + 0.9 * rng.uniform());
        for i in 0..h * w {
            let (uv, yv) = (u.data()[i], y.data()[i]);
            let ent = -(uv * uv.ln() + (1.0 - uv) * (1.0 - uv).ln());
            let analytic = (-2.0 * ent).exp() * ((1.0 - uv) / (1.0 - yv) - uv / yv) / (h * w) as f64;
            let at = |delta: f64| {
                let mut data = y.data().to_vec();
                data[i] += delta;
                weighted_kl(&ScalarField::new(h, w, data).unwrap(), &u).unwrap()
            };
            let numeric = (at(step) - at(-step)) / (2.0 * step);
            worst_grad = worst_grad.max((numeric - analytic).abs() / analytic.abs().max(1e-3));
        }
    }

    let w = entropy_weights(&ScalarField::from_rows(&[[0.5, 0.0, 1.0]]));
    let exact = w.get(0, 0) == 0.25 && w.get(0, 1) == 1.0 && w.get(0, 2) == 1.0;
    outcome(
        worst_mean <= 1e-12 && worst_grad <= 1e-6 && exact,
        format!(
            "region means max error {worst_mean:.1e}; KL gradient max relative error {worst_grad:.1e}; \
             entropy weights exact: {exact}"
        ),
    )
}

fn criterion_7() -> Outcome {
    let mut rng = Stream::new(7);
    let mut agree = 0;
    for _ in 0..100 {
        let (h, w) = (2 + rng.below(9), 2 + rng.below(9));
        let gt = loop {
            let m = BinaryMask::from_fn(h, w, |_, _| rng.uniform() < 0.4);
            if m.area() > 0 && m.area() < h * w {
                break m;
            }
        };
        let s = ScalarField::from_fn(h, w, |_, _| rng.below(6) as f64 / 5.0);
        let mut twice_wins = 0u64;
        let mut pairs = 0u64;
        for i in 0..h * w {
            for j in 0..h * w {
                if gt.data()[i] == 1 && gt.data()[j] == 0 {
                    pairs += 1;
                    let (a, b) = (s.data()[i], s.data()[j]);
                    twice_wins += if a > b { 2 } else { (a == b) as u64 };
                }
            }
        }
        agree += (auc(&s, &gt).unwrap() == twice_wins as f64 / (2 * pairs) as f64) as usize;
    }
    let hand = confusion(
        &BinaryMask::from_rows(&[[1, 0], [1, 0]]),
        &BinaryMask::from_rows(&[[1, 1], [0, 0]]),
    )
    .unwrap();
    let hand_ok = hand == ConfusionCounts { tp: 1, fp: 1, tn: 1, fn_: 1 }
        && dice(&hand) == 0.5
        && accuracy(&hand) == 0.5
        && kappa(&hand) == 0.0;
    let four = auc(
        &ScalarField::from_rows(&[[0.9, 0.4, 0.6, 0.1]]),
        &BinaryMask::from_rows(&[[1, 1, 0, 0]]),
    )
    .unwrap();
    outcome(
        agree == 100 && hand_ok && four == 0.75,
        format!("rank AUC equals pairwise count on {agree}/100; hand case exact: {hand_ok}; 4-pixel AUC {four}"),
    )
}

/// Shortest paths on a graph refined `REFINE` times per pixel step, with
/// 16-neighbour edges and slowness bilinearly interpolated from the pixel
/// centers; costs are sampled at the coarse pixels.
const REFINE: usize = 8;

fn fine_graph_distance(slowness: &ScalarField, points: &[GridPoint]) -> Vec<f64> {
    let (h, w) = (slowness.height(), slowness.width());
    let (fh, fw) = ((h - 1) * REFINE + 1, (w - 1) * REFINE + 1);
    let k = REFINE as f64;
    let sample = |fy: usize, fx: usize| {
        let (y, x) = (fy as f64 / k, fx as f64 / k);
        let (y0, x0) = ((y.floor() as usize).min(h - 2), (x.floor() as usize).min(w - 2));
        let (ty, tx) = (y - y0 as f64, x - x0 as f64);
        let s = |r: usize, c: usize| slowness.get(r, c);
        (1.0 - ty) * ((1.0 - tx) * s(y0, x0) + tx * s(y0, x0 + 1))
            + ty * ((1.0 - tx) * s(y0 + 1, x0) + tx * s(y0 + 1, x0 + 1))
    };
    let f: Vec<f64> = (0..fh * fw).map(|i| sample(i / fw, i % fw)).collect();
    let steps: [(isize, isize); 16] = [
        (0, 1), (1, 0), (0, -1), (-1, 0), (1, 1), (1, -1), (-1, 1), (-1, -1),
        (1, 2), (2, 1), (-1, 2), (2, -1), (1, -2), (-2, 1), (-1, -2), (-2, -1),
    ];
    let mut dist = vec![f64::INFINITY; fh * fw];
    let mut heap = BinaryHeap::new();
    for p in points {
        let i = p.y * REFINE * fw + p.x * REFINE;
        dist[i] = 0.0;
        heap.push(Reverse((0u64, i)));
    }
    while let Some(Reverse((bits, i))) = heap.pop() {
        let d = f64::from_bits(bits);
        if d > dist[i] {
            continue;
        }
        let (r, c) = ((i / fw) as isize, (i % fw) as isize);
        for (dy, dx) in steps {
            let (nr, nc) = (r + dy, c + dx);
            if nr < 0 || nc < 0 || nr >= fh as isize || nc >= fw as isize {
                continue;
            }
            let n = nr as usize * fw + nc as usize;
            let len = ((dy * dy + dx * dx) as f64).sqrt() / k;
            let nd = d + len * 0.5 * (f[i] + f[n]);
            if nd < dist[n] {
                dist[n] = nd;
                heap.push(Reverse((nd.to_bits(), n)));
            }
        }
    }
    (0..h * w)
        .map(|i| dist[(i / w) * REFINE * fw + (i % w) * REFINE])
        .collect()
}

fn sup_gap_normalized(a: &ScalarField, b: &[f64]) -> f64 {
    let max = b.iter().cloned().fold(0.0, f64::max);
    a.data()
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y / max).abs())
        .fold(0.0, f64::max)
}

fn random_markers(rng: &mut Stream, shape: Shape, n: usize) -> Vec<GridPoint> {
    let mut pts: Vec<GridPoint> = Vec::new();
    while pts.len() < n {
        let p = GridPoint::new(rng.below(shape.width), rng.below(shape.height));
        if !pts.contains(&p) {
            pts.push(p);
        }
    }
    pts
}

/// Sum of three Gaussian bumps with random centers, widths and signs,
/// min-max normalized.
fn smooth_image(rng: &mut Stream, side: usize) -> ScalarField {
    let bumps: Vec<(f64, f64, f64, f64)> = (0..3)
        .map(|_| {
            let cy = rng.uniform() * side as f64;
            let cx = rng.uniform() * side as f64;
            let s = 1.5 + 1.5 * rng.uniform();
            let a = 2.0 * rng.uniform() - 1.0;
            (cy, cx, s, a)
        })
        .collect();
    let raw = ScalarField::from_fn(side, side, |r, c| {
        bumps
            .iter()
            .map(|&(cy, cx, s, a)| {
                a * (-((r as f64 - cy).powi(2) + (c as f64 - cx).powi(2)) / (2.0 * s * s)).exp()
            })
            .sum()
    });
    cvm_core::field::normalize_minmax(&raw)
}

fn two_blob_check(kind: &str) -> (bool, String) {
    let disk = |cy: f64, cx: f64| {
        BinaryMask::from_fn(40, 40, move |r, c| (r as f64 - cy).powi(2) + (c as f64 - cx).powi(2) <= 49.0)
    };
    let (a, b) = (disk(12.0, 12.0), disk(27.0, 27.0));
    let f = ScalarField::from_fn(40, 40, |r, c| (a.get(r, c) || b.get(r, c)) as u8 as f64);
    let marker = [GridPoint::new(12, 12)];
    let cfg = SolverConfig::default();
    let make = |theta: f64| match kind {
        "euclidean" => DistanceConstraint::euclidean(&marker, f.shape(), theta).unwrap(),
        _ => DistanceConstraint::geodesic(&f, &marker, DEFAULT_SPEED_EPS, DEFAULT_SPEED_BETA, theta).unwrap(),
    };
    let seg = |theta: f64| {
        let (u, _) = solve_selective(&f, &make(theta), &cfg).unwrap();
        threshold(&u, cfg.gamma).unwrap()
    };
    let (free, held) = (seg(0.0), seg(10.0));
    let da = dice(&confusion(&held, &a).unwrap());
    let db = dice(&confusion(&held, &b).unwrap());
    let pass = held.area() < free.area() && da >= 0.9 && db <= 0.1;
    (pass, format!("{kind} area {} vs {} at theta 0, Dice {da:.3}/{db:.3}", held.area(), free.area()))
}

fn criterion_8() -> Outcome {
    let mut rng = Stream::new(8);
    let shape = Shape::new(32, 32);
    let flat = ScalarField::filled(32, 32, 0.5);
    let mut worst_euclid: f64 = 0.0;
    for n in [1, 1, 2, 2, 3] {
        let pts = random_markers(&mut rng, shape, n);
        let geo = geodesic_distance_map(&flat, &pts, DEFAULT_SPEED_EPS, DEFAULT_SPEED_BETA).unwrap();
        let euc = euclidean_distance_map(&pts, shape).unwrap();
        worst_euclid = worst_euclid.max(geo.max_abs_diff(&euc));
    }

    let mut gaps = Vec::new();
    for _ in 0..20 {
        let f = smooth_image(&mut rng, 8);
        let n = 1 + rng.below(2);
        let pts = random_markers(&mut rng, Shape::new(8, 8), n);
        let geo = geodesic_distance_map(&f, &pts, DEFAULT_SPEED_EPS, DEFAULT_SPEED_BETA).unwrap();
        let oracle = fine_graph_distance(&slowness_field(&f, DEFAULT_SPEED_EPS, DEFAULT_SPEED_BETA), &pts);
        gaps.push(sup_gap_normalized(&geo, &oracle));
    }
    let worst_dijkstra = gaps.iter().cloned().fold(0.0, f64::max);
    let corner = [GridPoint::new(0, 0)];
    let flat8 = ScalarField::filled(8, 8, 0.5);
    let control = sup_gap_normalized(
        &geodesic_distance_map(&flat8, &corner, DEFAULT_SPEED_EPS, DEFAULT_SPEED_BETA).unwrap(),
        &fine_graph_distance(&slowness_field(&flat8, DEFAULT_SPEED_EPS, DEFAULT_SPEED_BETA), &corner),
    );
    let within = gaps.iter().filter(|&&g| g <= 0.05).count();

    let (euc_ok, euc_msg) = two_blob_check("euclidean");
    let (geo_ok, geo_msg) = two_blob_check("geodesic");
    outcome(
        worst_euclid <= 0.05 && within == gaps.len() && euc_ok && geo_ok,
        format!(
            "constant image vs Euclidean max gap {worst_euclid:.4}; vs fine-graph Dijkstra {within}/20 \
             within 0.05 (mean {:.4}, max {worst_dijkstra:.4}, constant-image control {control:.4}); {euc_msg}; {geo_msg}",
            mean(&gaps)
        ),
    )
}

fn cvm_bin(args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_cvm"))
        .args(args)
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

/// Every file except the manifest, by name.
fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap())
        .filter(|e| e.file_name() != "manifest.json")
        .map(|e| (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap()))
        .collect();
    files.sort();
    files
}

fn cli_determinism(root: &Path) -> (bool, String) {
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let spec = root.join("spec.json");
    fs::write(&spec, r#"{"seed": 5, "height": 40, "width": 40, "noise_sigma": 0.2, "novel_region": true}"#).unwrap();
    let (inst_a, inst_b) = (root.join("inst_a"), root.join("inst_b"));
    let mut ok = cvm_bin(&["synth", "--spec", &s(&spec), "--out-dir", &s(&inst_a)])
        && cvm_bin(&["synth", "--spec", &s(&spec), "--out-dir", &s(&inst_b)]);
    ok &= snapshot(&inst_a) == snapshot(&inst_b);

    let feats = s(&inst_a.join("features.npy"));
    let points = s(&inst_a.join("points.json"));
    let image = s(&inst_a.join("image.npy"));
    let mut runs = Vec::new();
    for (tag, jobs) in [("a", "1"), ("b", "4"), ("c", "4"), ("d", "2")] {
        let dir = |name: &str| root.join(format!("{name}_{tag}"));
        ok &= cvm_bin(&["segment", "--jobs", jobs, "--features", &feats, "--points", &points, "--out-dir", &s(&dir("seg"))]);
        ok &= cvm_bin(&["contrast", "--jobs", jobs, "--features", &feats, "--points", &points, "--out-dir", &s(&dir("con"))]);
        ok &= cvm_bin(&[
            "baseline", "--jobs", jobs, "--image", &image, "--points", &points, "--distance", "geodesic",
            "--theta", "2", "--out-dir", &s(&dir("base")),
        ]);
        runs.push([dir("seg"), dir("con"), dir("base")].map(|d| snapshot(&d)));
    }
    let files: usize = runs[0].iter().map(|r| r.len()).sum();
    let same = runs.windows(2).all(|w| w[0] == w[1]);
    (ok && same, format!("{files} output files byte-identical over 4 runs with 1, 2 and 4 jobs: {}", ok && same))
}

fn round_trips(root: &Path) -> (bool, String) {
    let mut rng = Stream::new(9);
    // scalar npy, feature npy, mask png, metrics json, annotation json
    let mut bad = [0usize; 5];
    for k in 0..200 {
        let (h, w) = (1 + rng.below(20), 1 + rng.below(20));
        let field = ScalarField::from_fn(h, w, |_, _| (100.0 * rng.normal()) as f32 as f64);
        let p = root.join(format!("rt{k}.npy"));
        io::write_scalar(&field, &p).unwrap();
        let bytes = fs::read(&p).unwrap();
        let back = io::read_array(&p).unwrap();
        io::write_array(&back, &p).unwrap();
        bad[0] += (back != Array::Scalar(field) || fs::read(&p).unwrap() != bytes) as usize;

        let c = 1 + rng.below(4);
        let data: Vec<f64> = (0..c * h * w).map(|_| rng.uniform() as f32 as f64).collect();
        let map = FeatureMap::new(c, h, w, data).unwrap();
        io::write_features(&map, &p).unwrap();
        bad[1] += (io::read_array(&p).unwrap().into_features().unwrap() != map) as usize;

        let mask = BinaryMask::from_fn(h, w, |_, _| rng.uniform() < 0.5);
        let p = root.join(format!("rt{k}.png"));
        io::write_mask_png(&mask, &p).unwrap();
        bad[2] += (io::read_mask_png(&p).unwrap() != mask) as usize;

        let report = MetricsReport {
            dice: rng.uniform(),
            accuracy: rng.uniform(),
            kappa: 2.0 * rng.uniform() - 1.0,
            auc: rng.uniform(),
        };
        let p = root.join(format!("rt{k}.json"));
        io::write_json(&report, &p).unwrap();
        bad[3] += (io::read_json::<MetricsReport>(&p).unwrap() != report) as usize;

        let pts = random_markers(&mut rng, Shape::new(h.max(2), w.max(2)), 2);
        let ann = AnnotationFile::new(w.max(2), h.max(2), 1, &pts[..1], &pts[1..]).unwrap();
        io::write_annotations(&ann, &p).unwrap();
        bad[4] += (io::read_annotations(&p).unwrap() != ann) as usize;
    }
    let ok = bad.iter().all(|&b| b == 0);
    let msg = if ok {
        "NPY/PNG/JSON round-trips exact on 200 random cases".to_string()
    } else {
        format!("round-trip mismatches (scalar npy, feature npy, png, metrics, annotations): {bad:?}")
    };
    (ok, msg)
}

fn features(c: usize, h: usize, w: usize) -> impl Strategy<Value = FeatureMap> {
    prop::collection::vec(-1.0f64..1.0, c * h * w).prop_map(move |d| FeatureMap::new(c, h, w, d).unwrap())
}

fn annotated(h: usize, w: usize, np: usize, nq: usize) -> impl Strategy<Value = (FeatureMap, AnnotationFile)> {
    let cells = Just((0..h * w).collect::<Vec<usize>>()).prop_shuffle();
    (features(3, h, w), cells).prop_map(move |(map, cells)| {
        let pt = |i: usize| GridPoint::new(i % w, i / w);
        let p: Vec<_> = cells[..np].iter().map(|&i| pt(i)).collect();
        let q: Vec<_> = cells[np..np + nq].iter().map(|&i| pt(i)).collect();
        (map, AnnotationFile::new(w, h, 1, &p, &q).unwrap())
    })
}

fn runner() -> TestRunner {
    TestRunner::new(Config {
        cases: 1000,
        failure_persistence: None,
        ..Config::default()
    })
}

fn property_suites() -> (bool, String) {
    let cfg = SolverConfig {
        max_iters: 50,
        ..Default::default()
    };
    let mut results: Vec<(&str, Result<(), String>)> = Vec::new();

    results.push((
        "u range",
        runner().run(&annotated(5, 5, 2, 2), |(map, ann)| {
            let out = run_cvm(&map, &ann, &cfg, 0.6).unwrap();
            prop_assert!(out.u.data().iter().all(|v| (0.0..=1.0).contains(v)));
            for u in &out.per_point {
                prop_assert!(u.data().iter().all(|v| (0.0..=1.0).contains(v)));
            }
            Ok(())
        }).map_err(|e| e.to_string()),
    ));

    results.push((
        "contrast range",
        runner().run(&(features(3, 4, 4), 0usize..16, 0usize..16, 0.0f64..=1.0), |(map, i, j, eta)| {
            let sp = cosine_similarity_map(&map.vector_at_index(i), &map).unwrap();
            let sq = cosine_similarity_map(&map.vector_at_index(j), &map).unwrap();
            let c = contrast_map(&sp, &sq, eta).unwrap();
            prop_assert!(c.data().iter().all(|v| (0.0..=1.0).contains(v)));
            Ok(())
        }).map_err(|e| e.to_string()),
    ));

    results.push((
        "P/Q permutation",
        runner().run(&(annotated(5, 5, 3, 3), 1usize..3, 1usize..3), |((map, ann), rp, rq)| {
            let mut other = ann.clone();
            other.in_target.rotate_left(rp);
            other.out_of_target.rotate_left(rq);
            let a = run_cvm(&map, &ann, &cfg, 0.6).unwrap();
            let b = run_cvm(&map, &other, &cfg, 0.6).unwrap();
            prop_assert_eq!(a.u, b.u);
            let ca = build_contrast_set(&map, &ann, 0.6).unwrap();
            let cb = build_contrast_set(&map, &other, 0.6).unwrap();
            for pc in &ca.per_point {
                let twin = cb.per_point.iter().find(|x| x.point == pc.point).unwrap();
                prop_assert_eq!(&pc.mean, &twin.mean);
            }
            Ok(())
        }).map_err(|e| e.to_string()),
    ));

    results.push((
        "cosine scale",
        runner().run(&(features(4, 3, 3), 0usize..9, 0.001f64..1000.0), |(map, i, k)| {
            let f = map.vector_at_index(i);
            let scaled: Vec<f64> = f.iter().map(|v| v * k).collect();
            let a = cosine_similarity_map(&f, &map).unwrap();
            let b = cosine_similarity_map(&scaled, &map).unwrap();
            prop_assert!(a.max_abs_diff(&b) <= 1e-12);
            Ok(())
        }).map_err(|e| e.to_string()),
    ));

    let failed: Vec<String> = results
        .iter()
        .filter(|(_, r)| r.is_err())
        .map(|(name, r)| format!("{name}: {}", r.as_ref().unwrap_err()))
        .collect();
    let names: Vec<&str> = results.iter().map(|(n, _)| *n).collect();
    let msg = if failed.is_empty() {
        format!("properties hold on 1000 cases each ({})", names.join(", "))
    } else {
        format!("property failures: {}", failed.join("; "))
    };
    (failed.is_empty(), msg)
}

fn criterion_9() -> Outcome {
    let root = tempfile::tempdir().unwrap();
    let (det_ok, det) = cli_determinism(root.path());
    let (rt_ok, rt) = round_trips(root.path());
    let (prop_ok, props) = property_suites();
    outcome(det_ok && rt_ok && prop_ok, format!("{det}; {rt}; {props}"))
}

fn main() {
    let mut results: Vec<(usize, &str, Outcome, f64)> = Vec::new();
    let mut timed = |n: usize, name: &'static str, f: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let o = f();
        let secs = t.elapsed().as_secs_f64();
        println!(
            "{} criterion {n} ({name}): {} [{secs:.1} s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        results.push((n, name, o, secs));
    };

    let mut oracle_reports = Vec::new();
    timed(1, "oracle equivalence", &mut || {
        let (o, reports) = criterion_1();
        oracle_reports = reports;
        o
    });
    let suites = run_suites(oracle_reports);
    timed(2, "synthetic recovery", &mut || criterion_2(&suites));
    timed(3, "novel-region robustness", &mut || criterion_3(&suites));
    timed(4, "eta ablation", &mut || criterion_4(&suites));
    timed(5, "energy monotonicity", &mut || criterion_5(&suites));
    timed(6, "closed-form checks", &mut criterion_6);
    timed(7, "metric oracles", &mut criterion_7);
    timed(8, "distance maps", &mut criterion_8);
    timed(9, "determinism and formats", &mut criterion_9);

    let passed = results.iter().filter(|r| r.2.pass).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    let strict = std::env::var("CVM_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if strict && passed < results.len() {
        std::process::exit(1);
    }
}
