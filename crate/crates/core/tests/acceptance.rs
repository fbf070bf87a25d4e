//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.
//!
//! Runs as a plain binary (`harness = false`) so the report is always printed.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use aekmc::autoencoder::{
    gradient, read_checkpoint, train_sgd, write_checkpoint, Activation, NetworkParams, TrainConfig, DEFAULT_LAYER_DIMS,
};
use aekmc::clustering::{kmeans_best_of, kmeans_fit, KMeansConfig};
use aekmc::encounter::{
    detect_all, fit_normalization, read_features, to_feature_vector, write_features, DetectParams, FeatureConfig,
    FeatureRow,
};
use aekmc::evaluation::{compare_pipelines, eta, eta_exact, CompareConfig, StageSeeds};
use aekmc::ingest::{parse_trip_log, write_trip_log, Trajectory, TrajectoryPoint};
use aekmc::seed::rng;
use aekmc::synthgen::{generate_dataset, DatasetOptions};
use aekmc::Category;

type Outcome = Result<String, String>;

// ---------------------------------------------------------------------------------------------
// 1. Gradient correctness

const FD_STEP: f64 = 1e-6;
const GRAD_REL_TOL: f64 = 1e-6;

/// Loss evaluated through the public forward pass only.
fn loss_of(p: &NetworkParams, x: &[f64]) -> f64 {
    let y = p.reconstruct(x).unwrap();
    x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Relative deviation, scaled by the larger magnitude but never by less than one so that
/// near-zero components are held to the same absolute accuracy.
fn rel_dev(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

fn criterion_gradient() -> Outcome {
    let dims = [4, 3, 2, 3, 4];
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    for act in [Activation::Affine, Activation::Tanh, Activation::Relu] {
        let mut r = rng(1000 + act as u64);
        for case in 0..100 {
            let p = NetworkParams::init(&dims, act, r.random()).unwrap();
            let x: Vec<f64> = (0..4).map(|_| r.random_range(-1.0..1.0)).collect();
            let (_, g) = gradient(&p, &x).unwrap();
            for l in 0..p.n_transitions() {
                for i in 0..p.weights(l).len() + p.biases(l).len() {
                    let eval = |delta: f64| {
                        let mut q = p.clone();
                        let nw = q.weights(l).len();
                        if i < nw {
                            q.weights_mut(l)[i] += delta;
                        } else {
                            q.biases_mut(l)[i - nw] += delta;
                        }
                        loss_of(&q, &x)
                    };
                    let fd = (eval(FD_STEP) - eval(-FD_STEP)) / (2.0 * FD_STEP);
                    let nw = p.weights(l).len();
                    let an = if i < nw { g.weights[l][i] } else { g.biases[l][i - nw] };
                    let dev = rel_dev(an, fd);
                    if dev > GRAD_REL_TOL {
                        return Err(format!(
                            "{act} case {case} layer {l} param {i}: backprop {an} vs finite difference {fd} (dev {dev:.2e})"
                        ));
                    }
                    worst = worst.max(dev);
                    checked += 1;
                }
            }
        }
    }
    Ok(format!("{checked} components over 300 networks, max deviation {worst:.2e}"))
}

// ---------------------------------------------------------------------------------------------
// 2. Lloyd monotonicity

/// Slack for floating-point rounding in the recomputed objective.
const MONOTONE_SLACK: f64 = 1e-12;

fn random_points(r: &mut ChaCha8Rng, n: usize, d: usize, blobs: usize) -> Vec<Vec<f64>> {
    let centers: Vec<Vec<f64>> = (0..blobs.max(1))
        .map(|_| (0..d).map(|_| r.random_range(-10.0..10.0)).collect())
        .collect();
    (0..n)
        .map(|_| {
            let c = &centers[r.random_range(0..centers.len())];
            c.iter().map(|v| v + r.random_range(-2.0..2.0)).collect()
        })
        .collect()
}

fn criterion_lloyd() -> Outcome {
    let mut r = rng(2000);
    let mut steps = 0;
    for case in 0..100 {
        let k = r.random_range(1..=10);
        let n = r.random_range(k..=500);
        let d = r.random_range(1..=25);
        let blobs = r.random_range(1..=12);
        let points = random_points(&mut r, n, d, blobs);
        let fit = kmeans_fit(&points, &KMeansConfig { k, seed: r.random(), ..Default::default() })
            .map_err(|e| format!("case {case}: {e}"))?;
        for w in fit.history.windows(2) {
            if w[1] > w[0] + MONOTONE_SLACK * w[0].abs() {
                return Err(format!("case {case} (n={n}, d={d}, k={k}): objective rose {} -> {}", w[0], w[1]));
            }
            steps += 1;
        }
    }
    Ok(format!("100 instances, {steps} consecutive steps non-increasing"))
}

// ---------------------------------------------------------------------------------------------
// 3. Clustering exactness against exhaustive search

const EXACT_TOL: f64 = 1e-9;

/// Minimum over every labeling of the points into `k` groups of the within-group scatter.
fn brute_force_inertia(points: &[Vec<f64>], k: usize) -> f64 {
    let n = points.len();
    let d = points[0].len();
    let mut best = f64::INFINITY;
    let total = k.pow(n as u32);
    let mut labels = vec![0usize; n];
    for code in 0..total {
        let mut c = code;
        for l in labels.iter_mut() {
            *l = c % k;
            c /= k;
        }
        let mut cost = 0.0;
        for g in 0..k {
            let members: Vec<&Vec<f64>> = points.iter().zip(&labels).filter(|(_, &l)| l == g).map(|(p, _)| p).collect();
            if members.is_empty() {
                continue;
            }
            for j in 0..d {
                let mean = members.iter().map(|p| p[j]).sum::<f64>() / members.len() as f64;
                cost += members.iter().map(|p| (p[j] - mean).powi(2)).sum::<f64>();
            }
        }
        best = best.min(cost);
    }
    best
}

fn criterion_exactness() -> Outcome {
    let mut r = rng(3000);
    let mut worst = 0.0f64;
    let mut cases = 0;
    for n in 1..=8 {
        for d in 1..=2 {
            for k in 1..=3usize.min(n) {
                for rep in 0..8 {
                    let mut points = random_points(&mut r, n, d, 3);
                    if rep % 4 == 3 && n > 1 {
                        // Duplicate a point to exercise coincident data.
                        points[n - 1] = points[0].clone();
                    }
                    let fit = kmeans_best_of(&points, &KMeansConfig { k, seed: r.random(), ..Default::default() }, 20)
                        .map_err(|e| format!("n={n} d={d} k={k}: {e}"))?;
                    let opt = brute_force_inertia(&points, k);
                    let gap = fit.model.inertia - opt;
                    if gap.abs() > EXACT_TOL {
                        return Err(format!("n={n} d={d} k={k} rep {rep}: k-means {} vs optimum {opt}", fit.model.inertia));
                    }
                    worst = worst.max(gap.abs());
                    cases += 1;
                }
            }
        }
    }
    Ok(format!("{cases} instances, max |inertia - optimum| {worst:.2e}"))
}

// ---------------------------------------------------------------------------------------------
// 4. Grid detection against a brute-force scan

const EARTH_R: f64 = 6_371_000.0;

fn oracle_distance(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
    let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
    let dp = p2 - p1;
    let dl = (lon2 - lon1).to_radians();
    let a = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
    2.0 * EARTH_R * a.sqrt().atan2((1.0 - a).sqrt())
}

fn tick(t: f64) -> i64 {
    (t * 10.0).round() as i64
}

/// (trip a, trip b, first tick, last tick) for every encounter, by exhaustive pair scan.
fn oracle_encounters(trajs: &[Trajectory], p: &DetectParams) -> BTreeSet<(String, String, i64, i64)> {
    let min_ticks = (p.min_duration_s * p.rate_hz).round() as i64;
    let gap_ticks = (p.gap_tolerance_s * p.rate_hz).round() as i64;
    let mut out = BTreeSet::new();
    for i in 0..trajs.len() {
        for j in 0..trajs.len() {
            let (a, b) = (&trajs[i], &trajs[j]);
            if (a.trip_id.as_str(), a.vehicle_id.as_str()) >= (b.trip_id.as_str(), b.vehicle_id.as_str())
                || a.vehicle_id == b.vehicle_id
            {
                continue;
            }
            let mut close = Vec::new();
            for pa in &a.points {
                for pb in &b.points {
                    if tick(pa.t) == tick(pb.t) && oracle_distance(pa.lat, pa.lon, pb.lat, pb.lon) < p.threshold_m {
                        close.push(tick(pa.t));
                    }
                }
            }
            close.sort_unstable();
            let mut runs: Vec<(i64, i64)> = Vec::new();
            for t in close {
                match runs.last_mut() {
                    // Interruptions shorter than the tolerance are bridged.
                    Some(run) if t - run.1 - 1 < gap_ticks.max(1) => run.1 = t,
                    _ => runs.push((t, t)),
                }
            }
            for (s, e) in runs {
                if e - s + 1 >= min_ticks {
                    out.insert((a.trip_id.clone(), b.trip_id.clone(), s, e));
                }
            }
        }
    }
    out
}

fn random_scenario(r: &mut ChaCha8Rng, case: usize) -> Vec<Trajectory> {
    let n = r.random_range(2..=10);
    let m_per_deg_lat = EARTH_R * std::f64::consts::PI / 180.0;
    let m_per_deg_lon = m_per_deg_lat * 42.28f64.to_radians().cos();
    (0..n)
        .map(|v| {
            let len = r.random_range(50..=600usize);
            let start = r.random_range(0..200i64);
            let (mut x, mut y) = (r.random_range(-250.0..250.0), r.random_range(-250.0..250.0));
            let speed = r.random_range(0.0..12.0);
            let heading: f64 = r.random_range(0.0..std::f64::consts::TAU);
            let wobble = r.random_range(0.0..3.0);
            let points = (0..len)
                .map(|i| {
                    let h = heading + wobble * (i as f64 / 40.0).sin();
                    x += speed * h.sin() / 10.0;
                    y += speed * h.cos() / 10.0;
                    TrajectoryPoint {
                        t: (start + i as i64) as f64 / 10.0,
                        lat: 42.28 + y / m_per_deg_lat,
                        lon: -83.74 + x / m_per_deg_lon,
                        speed,
                        heading: 0.0,
                    }
                })
                .collect();
            // Every fifth scenario reuses a vehicle for two trips.
            let vehicle = if case % 5 == 0 && v == 1 { 0 } else { v };
            Trajectory::new(format!("s{case}-t{v}"), format!("veh{vehicle}"), points)
        })
        .collect()
}

fn criterion_detection() -> Outcome {
    let mut r = rng(4000);
    let params = DetectParams::default();
    let mut total = 0;
    for case in 0..50 {
        let trajs = random_scenario(&mut r, case);
        let got = detect_all(&trajs, &params).map_err(|e| format!("case {case}: {e}"))?;
        let got_set: BTreeSet<_> = got
            .iter()
            .map(|e| {
                (
                    e.a.trip_id.clone(),
                    e.b.trip_id.clone(),
                    tick(e.a.points[0].t),
                    tick(e.a.points.last().unwrap().t),
                )
            })
            .collect();
        for e in &got {
            if e.a.points.len() != e.b.points.len() || e.a.points.iter().zip(&e.b.points).any(|(p, q)| p.t != q.t) {
                return Err(format!("case {case}: {} segments are not tick-aligned", e.id));
            }
        }
        let want = oracle_encounters(&trajs, &params);
        if got_set != want || got.len() != want.len() {
            return Err(format!("case {case}: grid found {got_set:?}, brute force {want:?}"));
        }
        total += want.len();
    }
    Ok(format!("50 scenarios, {total} encounters identical to the brute-force scan"))
}

// ---------------------------------------------------------------------------------------------
// 5 and 6. The four-category synthetic benchmark

fn benchmark() -> (Vec<Vec<f64>>, Vec<Category>) {
    let counts: BTreeMap<Category, usize> = Category::ALL[..4].iter().map(|&c| (c, 200)).collect();
    let encounters = generate_dataset(&counts, 1, &DatasetOptions::default()).unwrap();
    let cfg = FeatureConfig::default();
    let features = encounters.iter().map(|e| to_feature_vector(e, &cfg).unwrap().0).collect();
    let labels = encounters.iter().map(|e| e.label.unwrap()).collect();
    (features, labels)
}

const CONVERGENCE_RATIO: f64 = 0.10;

fn criterion_training(features: &[Vec<f64>]) -> Outcome {
    let norm = fit_normalization(features).unwrap();
    let data: Vec<Vec<f64>> = features.iter().map(|f| norm.apply(f).unwrap()).collect();
    let seeds = StageSeeds::from_seed(1);
    let init = NetworkParams::init(&DEFAULT_LAYER_DIMS, Activation::Tanh, seeds.init).unwrap();
    let cfg = TrainConfig {
        learning_rate: 0.01,
        epochs: 500,
        seed: seeds.shuffle,
        ..Default::default()
    };
    let out = train_sgd(init, &data, &cfg).map_err(|e| e.to_string())?;
    let curve = &out.loss_curve;
    if curve.iter().any(|v| !v.is_finite()) {
        return Err("loss curve contains non-finite values".into());
    }
    let (first, last) = (curve[0], curve[curve.len() - 1]);
    let ratio = last / first;
    let detail = format!(
        "{} epochs, epoch-1 loss {first:.4}, final {last:.4}, ratio {ratio:.4} (needs < {CONVERGENCE_RATIO})",
        curve.len()
    );
    if ratio < CONVERGENCE_RATIO {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn criterion_directional(features: &[Vec<f64>], labels: &[Category]) -> Outcome {
    let config = CompareConfig::default();
    let (mut ae, mut km) = (Vec::new(), Vec::new());
    for seed in 1..=5 {
        let run = compare_pipelines(features, labels, &config, seed).map_err(|e| format!("seed {seed}: {e}"))?;
        ae.push(run.report.aekmc.mean_eta());
        km.push(run.report.kmeans.mean_eta());
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let pct = |v: &[f64]| v.iter().map(|x| format!("{:.1}", 100.0 * x)).collect::<Vec<_>>().join("/");
    let detail = format!(
        "mean eta AE-kMC {:.2}% [{}] vs k-means {:.2}% [{}]",
        100.0 * mean(&ae),
        pct(&ae),
        100.0 * mean(&km),
        pct(&km)
    );
    if mean(&ae) >= mean(&km) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------------------------------------
// 7. Exact eta

fn criterion_eta() -> Outcome {
    // (cluster size, abnormal members)
    let cases: [(usize, usize); 20] = [
        (100, 27),
        (1, 0),
        (1, 1),
        (2, 1),
        (3, 1),
        (7, 3),
        (10, 0),
        (10, 10),
        (25, 4),
        (50, 13),
        (64, 1),
        (99, 98),
        (100, 0),
        (120, 37),
        (250, 17),
        (333, 111),
        (500, 100),
        (1000, 162),
        (17, 16),
        (42, 21),
    ];
    let mut r = rng(7000);
    for (i, &(n, abnormal)) in cases.iter().enumerate() {
        let majority = Category::ALL[i % 5];
        let mut members = vec![majority; n - abnormal];
        for _ in 0..abnormal {
            let other = loop {
                let c = Category::ALL[r.random_range(0..5)];
                if c != majority {
                    break c;
                }
            };
            members.push(other);
        }
        let want = (n - abnormal) as f64 / n as f64;
        let exact = eta_exact(&members, majority).map_err(|e| e.to_string())?;
        let covered = eta(&members, majority, n, 1).map_err(|e| e.to_string())?;
        if (exact - want).abs() > 1e-15 || (covered - want).abs() > 1e-15 {
            return Err(format!("{abnormal}/{n}: got {exact} and {covered}, expected {want}"));
        }
    }
    let anchor = eta_exact(&[vec![Category::Intersection; 73], vec![Category::Bypass; 27]].concat(), Category::Intersection)
        .map_err(|e| e.to_string())?;
    if anchor != 0.73 {
        return Err(format!("27 abnormal of 100 gave {anchor}"));
    }
    Ok("20 clusters match the hand-computed fractions; 27/100 -> 0.73".into())
}

// ---------------------------------------------------------------------------------------------
// 8. End-to-end determinism

fn collect_files(dir: &Path, prefix: &Path, out: &mut BTreeMap<String, Vec<u8>>) {
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            collect_files(&path, prefix, out);
        } else {
            let rel = path.strip_prefix(prefix).unwrap().display().to_string();
            out.insert(rel, std::fs::read(&path).unwrap());
        }
    }
}

fn run_pipeline(dir: &Path) -> Result<(), String> {
    let config = dir.join("pipeline.toml");
    std::fs::write(
        &config,
        format!(
            "[pipeline]\nseed = 42\nout_dir = {:?}\n\n[synthgen]\nintersection = 25\nopposite_direction = 25\nbypass = 25\nsame_road = 25\n\n[autoencoder]\nepochs = 40\n\n[clustering]\nk = 8\nrestarts = 4\n",
            dir.join("out").display().to_string()
        ),
    )
    .unwrap();
    for stage in ["generate", "extract", "train", "encode", "cluster", "evaluate", "plot"] {
        let out = Command::new(env!("CARGO_BIN_EXE_aekmc"))
            .args([stage, "--config"])
            .arg(&config)
            .output()
            .map_err(|e| e.to_string())?;
        if !out.status.success() {
            return Err(format!("{stage} failed: {}", String::from_utf8_lossy(&out.stderr)));
        }
    }
    Ok(())
}

fn criterion_determinism() -> Outcome {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_pipeline(a.path())?;
    run_pipeline(b.path())?;
    let (mut fa, mut fb) = (BTreeMap::new(), BTreeMap::new());
    collect_files(&a.path().join("out"), &a.path().join("out"), &mut fa);
    collect_files(&b.path().join("out"), &b.path().join("out"), &mut fb);
    for required in ["model.bin", "assignments.csv", "report.csv", "clusters.csv"] {
        if !fa.contains_key(required) {
            return Err(format!("{required} was not produced"));
        }
    }
    if fa.keys().ne(fb.keys()) {
        return Err("the two runs produced different file sets".into());
    }
    let differing: Vec<&String> = fa.keys().filter(|k| fa[*k] != fb[*k]).collect();
    if !differing.is_empty() {
        return Err(format!("files differ: {differing:?}"));
    }
    Ok(format!("{} artifacts byte-identical across two runs", fa.len()))
}

// ---------------------------------------------------------------------------------------------
// 9. Format round-trips

fn criterion_round_trips() -> Outcome {
    let counts: BTreeMap<Category, usize> = Category::ALL.iter().map(|&c| (c, 3)).collect();
    let encounters = generate_dataset(&counts, 9, &DatasetOptions::default()).map_err(|e| e.to_string())?;
    let trajs: Vec<Trajectory> = encounters.iter().flat_map(|e| [e.a.clone(), e.b.clone()]).collect();

    let mut first = Vec::new();
    write_trip_log(&mut first, &trajs).map_err(|e| e.to_string())?;
    let parsed = parse_trip_log(first.as_slice(), true).map_err(|e| e.to_string())?;
    let mut second = Vec::new();
    write_trip_log(&mut second, &parsed.trajectories).map_err(|e| e.to_string())?;
    if first != second {
        return Err("trip log changed on the second write".into());
    }

    let cfg = FeatureConfig::default();
    let rows: Vec<FeatureRow> = encounters
        .iter()
        .map(|e| FeatureRow {
            values: to_feature_vector(e, &cfg).unwrap().0,
            label: e.label,
        })
        .collect();
    let mut first = Vec::new();
    write_features(&mut first, &rows).map_err(|e| e.to_string())?;
    let back = read_features(first.as_slice()).map_err(|e| e.to_string())?;
    let mut second = Vec::new();
    write_features(&mut second, &back).map_err(|e| e.to_string())?;
    if first != second || back != rows {
        return Err("feature CSV changed on the second write".into());
    }

    let p = NetworkParams::init(&DEFAULT_LAYER_DIMS, Activation::Tanh, 5).map_err(|e| e.to_string())?;
    let mut first = Vec::new();
    write_checkpoint(&mut first, &p).map_err(|e| e.to_string())?;
    let q = read_checkpoint(first.as_slice()).map_err(|e| e.to_string())?;
    let mut second = Vec::new();
    write_checkpoint(&mut second, &q).map_err(|e| e.to_string())?;
    if first != second || p != q {
        return Err("checkpoint changed on the second write".into());
    }
    Ok(format!(
        "trip log ({} trajectories), features ({} rows), checkpoint ({} bytes) all byte-identical",
        trajs.len(),
        rows.len(),
        first.len()
    ))
}

// ---------------------------------------------------------------------------------------------

fn report(id: usize, name: &str, budget: Option<Duration>, f: impl FnOnce() -> Outcome) -> bool {
    let t = Instant::now();
    let outcome = f();
    let elapsed = t.elapsed();
    let over = budget.filter(|b| elapsed > *b);
    let (ok, detail) = match (&outcome, over) {
        (Ok(d), None) => (true, d.clone()),
        (Ok(d), Some(b)) => (false, format!("{d}; exceeded the {b:?} budget")),
        (Err(d), _) => (false, d.clone()),
    };
    println!(
        "[{}] {id}. {name}: {detail} ({:.1?})",
        if ok { "PASS" } else { "FAIL" },
        elapsed
    );
    ok
}

fn main() {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let wanted = |id: usize| filter.is_empty() || filter.iter().any(|f| f == &id.to_string());
    let secs = Duration::from_secs;
    let mut results = Vec::new();
    println!("acceptance criteria");
    if wanted(1) {
        results.push(report(1, "gradient correctness", Some(secs(10)), criterion_gradient));
    }
    if wanted(2) {
        results.push(report(2, "Lloyd monotonicity", Some(secs(10)), criterion_lloyd));
    }
    if wanted(3) {
        results.push(report(3, "clustering exactness", None, criterion_exactness));
    }
    if wanted(4) {
        results.push(report(4, "detection oracle equivalence", Some(secs(30)), criterion_detection));
    }
    if wanted(5) || wanted(6) {
        let (features, labels) = benchmark();
        if wanted(5) {
            results.push(report(5, "training convergence", Some(secs(120)), || criterion_training(&features)));
        }
        if wanted(6) {
            results.push(report(6, "AE-kMC vs k-means direction", Some(secs(600)), || {
                criterion_directional(&features, &labels)
            }));
        }
    }
    if wanted(7) {
        results.push(report(7, "eta exactness", None, criterion_eta));
    }
    if wanted(8) {
        results.push(report(8, "pipeline determinism", None, criterion_determinism));
    }
    if wanted(9) {
        results.push(report(9, "format round-trips", None, criterion_round_trips));
    }
    let passed = results.iter().filter(|&&ok| ok).count();
    println!("{passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
