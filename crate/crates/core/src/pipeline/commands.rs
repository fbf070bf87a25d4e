//! One function per pipeline stage. Each reads its inputs from and writes its artifacts to
//! the configured output directory, and returns a one-line summary.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use super::config::{ClusterSpace, PipelineConfig};
use crate::autoencoder::{read_checkpoint, train_sgd, write_checkpoint, write_text_export, NetworkParams, TrainConfig};
use crate::category::Category;
use crate::clustering::{kmeans_best_of, read_assignments, read_model, write_assignments, write_model, KMeansConfig};
use crate::encounter::{
    detect_all, fit_normalization, read_encounters, read_features, read_labels, read_normalization, to_feature_vector,
    write_encounters, write_features, write_labels, write_normalization, Encounter, FeatureRow, GeneratedLabel,
};
use crate::error::{Error, Result};
use crate::evaluation::{score_clustering, EvaluationReport, StageSeeds};
use crate::ingest::{filter_bbox, parse_trip_log, resample_on_ticks, split_on_gaps, write_trip_log};
use crate::plot::{cluster_grid_svg, encounter_svg, loss_curve_svg};
use crate::seed::derive_seed;
use crate::synthgen::generate_dataset;

/// Stream of the top-level seed used by `generate`.
const GENERATE_STREAM: u64 = 0;

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

/// Runs `f` against a fresh file and flushes it, attaching the path to any failure.
fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let mut w = create(path)?;
    f(&mut w).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        e => e,
    })?;
    w.flush().map_err(|e| Error::io(path, e))
}

fn read_file<T>(path: &Path, f: impl FnOnce(BufReader<File>) -> Result<T>) -> Result<T> {
    f(open(path)?).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        e => e,
    })
}

/// Writes `trips.csv` and `labels.csv`.
pub fn generate(cfg: &PipelineConfig) -> Result<String> {
    cfg.validate()?;
    let run = || -> Result<String> {
        let encounters = generate_dataset(&cfg.counts, derive_seed(cfg.seed, GENERATE_STREAM), &cfg.dataset_options())?;
        let trajectories: Vec<_> = encounters.iter().flat_map(|e| [e.a.clone(), e.b.clone()]).collect();
        let labels: Vec<GeneratedLabel> = encounters
            .iter()
            .map(|e| GeneratedLabel {
                encounter_id: e.id.clone(),
                trip_a: e.a.trip_id.clone(),
                trip_b: e.b.trip_id.clone(),
                label: e.label.expect("generated encounters are labeled"),
            })
            .collect();
        let trips = cfg.trip_log_path();
        write_file(&trips, |w| write_trip_log(w, &trajectories))?;
        write_file(&cfg.labels_path(), |w| write_labels(w, &labels))?;
        Ok(format!(
            "generated {} encounters ({} trajectories) into {}",
            encounters.len(),
            trajectories.len(),
            trips.display()
        ))
    };
    run().map_err(|e| e.in_stage("generate"))
}

fn pair_key(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

/// Reads the trip log, detects encounters and writes `encounters.csv` and `features.csv`.
/// Labels are attached from the labels file when it exists.
pub fn extract(cfg: &PipelineConfig) -> Result<String> {
    cfg.validate()?;
    let run = || -> Result<String> {
        let log = read_file(&cfg.trip_log_path(), |r| parse_trip_log(r, cfg.ingest.strict))?;
        let mut segments = Vec::new();
        for traj in &log.trajectories {
            let inside = filter_bbox(traj, &cfg.ingest.bbox);
            for seg in split_on_gaps(&inside, cfg.ingest.max_gap_s) {
                let seg = resample_on_ticks(&seg, cfg.ingest.rate_hz)?;
                if seg.len() >= 2 {
                    segments.push(seg);
                }
            }
        }
        let mut encounters = detect_all(&segments, &cfg.detect_params())?;

        let labels_path = cfg.labels_path();
        let labeled = labels_path.exists();
        if labeled {
            let labels = read_file(&labels_path, read_labels)?;
            let lookup: HashMap<(String, String), Category> = labels
                .into_iter()
                .map(|l| (pair_key(&l.trip_a, &l.trip_b), l.label))
                .collect();
            for e in &mut encounters {
                e.label = lookup.get(&pair_key(&e.a.trip_id, &e.b.trip_id)).copied();
            }
        }
        let rows = encounters
            .iter()
            .map(|e| {
                Ok(FeatureRow {
                    values: to_feature_vector(e, &cfg.features)?.0,
                    label: e.label,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        write_file(&cfg.path("encounters.csv"), |w| write_encounters(w, &encounters))?;
        write_file(&cfg.path("features.csv"), |w| write_features(w, &rows))?;
        let unlabeled = encounters.iter().filter(|e| e.label.is_none()).count();
        let mut msg = format!(
            "extracted {} encounters from {} trajectories ({} segments, {} rows skipped)",
            encounters.len(),
            log.trajectories.len(),
            segments.len(),
            log.skipped.len()
        );
        if labeled {
            msg.push_str(&format!(", {unlabeled} without a ground-truth label"));
        }
        Ok(msg)
    };
    run().map_err(|e| e.in_stage("extract"))
}

fn load_features(cfg: &PipelineConfig) -> Result<Vec<FeatureRow>> {
    let rows = read_file(&cfg.path("features.csv"), read_features)?;
    if rows.is_empty() {
        return Err(Error::InsufficientData("features.csv holds no encounters".into()));
    }
    Ok(rows)
}

fn normalized(cfg: &PipelineConfig, rows: &[FeatureRow]) -> Result<Vec<Vec<f64>>> {
    let norm = read_file(&cfg.path("normalization.csv"), read_normalization)?;
    rows.iter().map(|r| norm.apply(&r.values)).collect()
}

fn check_input_width(cfg: &PipelineConfig, rows: &[FeatureRow]) -> Result<()> {
    let width = rows[0].values.len();
    if width != cfg.layer_dims[0] {
        return Err(Error::Shape {
            expected: cfg.layer_dims[0],
            actual: width,
        });
    }
    Ok(())
}

/// Fits normalization, trains the autoencoder and writes `normalization.csv`, `model.bin`,
/// `model.txt` and `loss.csv`.
pub fn train(cfg: &PipelineConfig) -> Result<String> {
    cfg.validate()?;
    let run = || -> Result<String> {
        let rows = load_features(cfg)?;
        check_input_width(cfg, &rows)?;
        let raw: Vec<&[f64]> = rows.iter().map(|r| r.values.as_slice()).collect();
        let norm = fit_normalization(&raw)?;
        let data = raw.iter().map(|x| norm.apply(x)).collect::<Result<Vec<_>>>()?;
        let seeds = StageSeeds::from_seed(cfg.seed);
        let init = NetworkParams::init(&cfg.layer_dims, cfg.activation, seeds.init)?
            .with_output_activation(cfg.output_activation.unwrap_or(cfg.activation));
        let train_cfg = TrainConfig {
            seed: seeds.shuffle,
            ..cfg.train
        };
        let out = train_sgd(init, &data, &train_cfg)?;
        write_file(&cfg.path("normalization.csv"), |w| write_normalization(w, &norm))?;
        write_file(&cfg.path("model.bin"), |w| write_checkpoint(w, &out.params))?;
        write_file(&cfg.path("model.txt"), |w| write_text_export(w, &out.params))?;
        write_file(&cfg.path("loss.csv"), |w| write_loss_curve(w, &out.loss_curve))?;
        let first = out.loss_curve[0];
        let last = *out.loss_curve.last().unwrap();
        Ok(format!(
            "trained on {} encounters for {} epochs: loss {first:.6} -> {last:.6}",
            data.len(),
            out.loss_curve.len()
        ))
    };
    run().map_err(|e| e.in_stage("train"))
}

/// `epoch,mean_loss` rows, epochs counted from 1.
pub fn write_loss_curve<W: Write>(output: W, curve: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(output);
    w.write_record(["epoch", "mean_loss"])?;
    for (i, v) in curve.iter().enumerate() {
        w.write_record([(i + 1).to_string(), v.to_string()])?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))
}

pub fn read_loss_curve<R: std::io::Read>(input: R) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_reader(input);
    r.records()
        .map(|rec| {
            let rec = rec?;
            rec.get(1)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Format("loss curve rows must be epoch,mean_loss".into()))
        })
        .collect()
}

/// Encodes every normalized feature vector and writes `codes.csv`.
pub fn encode(cfg: &PipelineConfig) -> Result<String> {
    cfg.validate()?;
    let run = || -> Result<String> {
        let rows = load_features(cfg)?;
        let data = normalized(cfg, &rows)?;
        let params = read_file(&cfg.path("model.bin"), read_checkpoint)?;
        let codes = data
            .iter()
            .zip(&rows)
            .map(|(x, r)| {
                Ok(FeatureRow {
                    values: params.encode(x)?,
                    label: r.label,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        write_file(&cfg.path("codes.csv"), |w| write_features(w, &codes))?;
        Ok(format!("encoded {} encounters into {}-dimensional codes", codes.len(), params.code_dim()))
    };
    run().map_err(|e| e.in_stage("encode"))
}

fn encounter_ids(cfg: &PipelineConfig, expected: usize) -> Result<Vec<String>> {
    let ids: Vec<String> = read_file(&cfg.path("encounters.csv"), read_encounters)?
        .into_iter()
        .map(|e| e.id)
        .collect();
    if ids.len() != expected {
        return Err(Error::Shape {
            expected,
            actual: ids.len(),
        });
    }
    Ok(ids)
}

fn kmeans_config(cfg: &PipelineConfig) -> KMeansConfig {
    KMeansConfig {
        seed: StageSeeds::from_seed(cfg.seed).kmeans,
        ..cfg.kmeans
    }
}

/// Runs k-means on codes (or raw normalized features) and writes `clusters.csv` and
/// `assignments.csv`.
pub fn cluster(cfg: &PipelineConfig) -> Result<String> {
    cfg.validate()?;
    let run = || -> Result<String> {
        let points: Vec<Vec<f64>> = match cfg.space {
            ClusterSpace::Latent => read_file(&cfg.path("codes.csv"), read_features)?
                .into_iter()
                .map(|r| r.values)
                .collect(),
            ClusterSpace::Raw => normalized(cfg, &load_features(cfg)?)?,
        };
        let ids = encounter_ids(cfg, points.len())?;
        let fit = kmeans_best_of(&points, &kmeans_config(cfg), cfg.restarts)?;
        write_file(&cfg.path("clusters.csv"), |w| write_model(w, &fit.model))?;
        write_file(&cfg.path("assignments.csv"), |w| write_assignments(w, &ids, &fit.assignments))?;
        Ok(format!(
            "clustered {} encounters ({} space) into k = {}, inertia {:.6}",
            points.len(),
            cfg.space.name(),
            fit.model.k(),
            fit.model.inertia
        ))
    };
    run().map_err(|e| e.in_stage("cluster"))
}

/// Scores the stored assignments against the labels, runs the raw k-means baseline and writes
/// `baseline_assignments.csv`, `report.csv` and `report.txt`.
pub fn evaluate(cfg: &PipelineConfig) -> Result<String> {
    cfg.validate()?;
    let run = || -> Result<String> {
        let rows = load_features(cfg)?;
        let labels = rows
            .iter()
            .map(|r| r.label)
            .collect::<Option<Vec<Category>>>()
            .ok_or_else(|| Error::InsufficientData("every encounter needs a ground-truth label to be evaluated".into()))?;
        let (ids, assignments) = read_file(&cfg.path("assignments.csv"), read_assignments)?;
        if assignments.len() != labels.len() {
            return Err(Error::Shape {
                expected: labels.len(),
                actual: assignments.len(),
            });
        }
        let k = read_file(&cfg.path("clusters.csv"), read_model)?.k();
        let data = normalized(cfg, &rows)?;
        let baseline = kmeans_best_of(&data, &KMeansConfig { k, ..kmeans_config(cfg) }, cfg.restarts)?;
        let sampling = StageSeeds::from_seed(cfg.seed).sampling;
        let report = EvaluationReport {
            aekmc: score_clustering(&assignments, &labels, k, cfg.sample_size, sampling)?,
            kmeans: score_clustering(&baseline.assignments, &labels, k, cfg.sample_size, sampling)?,
            sample_size: cfg.sample_size,
            seed: cfg.seed,
        };
        write_file(&cfg.path("baseline_assignments.csv"), |w| {
            write_assignments(w, &ids, &baseline.assignments)
        })?;
        write_file(&cfg.path("report.csv"), |w| report.write_csv(w))?;
        let table = report.to_table();
        write_file(&cfg.path("report.txt"), |w| {
            w.write_all(table.as_bytes()).map_err(|e| Error::Format(e.to_string()))
        })?;
        Ok(table)
    };
    run().map_err(|e| e.in_stage("evaluate"))
}

/// Encounter ids contain characters that are awkward in file names.
fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

/// Writes SVG figures under `<out_dir>/plots/`: the first few encounters, one grid per
/// cluster when assignments exist, and the loss curve when it exists.
pub fn plot(cfg: &PipelineConfig) -> Result<String> {
    cfg.validate()?;
    let run = || -> Result<String> {
        let encounters = read_file(&cfg.path("encounters.csv"), read_encounters)?;
        let dir = cfg.path("plots");
        let mut written: Vec<PathBuf> = Vec::new();
        for e in encounters.iter().take(cfg.plot_encounters) {
            let path = dir.join(format!("encounter_{}.svg", file_stem(&e.id)));
            let svg = encounter_svg(e, &cfg.plot);
            write_file(&path, |w| w.write_all(svg.as_bytes()).map_err(|e| Error::Format(e.to_string())))?;
            written.push(path);
        }
        let assignments_path = cfg.path("assignments.csv");
        if assignments_path.exists() {
            let (ids, assignments) = read_file(&assignments_path, read_assignments)?;
            let k = match cfg.path("clusters.csv") {
                p if p.exists() => read_file(&p, read_model)?.k(),
                _ => assignments.iter().max().map_or(0, |m| m + 1),
            };
            let by_id: HashMap<&str, &Encounter> = encounters.iter().map(|e| (e.id.as_str(), e)).collect();
            for c in 0..k {
                let members: Vec<&Encounter> = ids
                    .iter()
                    .zip(&assignments)
                    .filter(|(_, &a)| a == c)
                    .filter_map(|(id, _)| by_id.get(id.as_str()).copied())
                    .collect();
                let title = format!("Cluster {c} ({} encounters)", members.len());
                let svg = cluster_grid_svg(&title, &members, &cfg.plot);
                let path = dir.join(format!("cluster_{c:02}.svg"));
                write_file(&path, |w| w.write_all(svg.as_bytes()).map_err(|e| Error::Format(e.to_string())))?;
                written.push(path);
            }
        }
        let loss_path = cfg.path("loss.csv");
        if loss_path.exists() {
            let curve = read_file(&loss_path, read_loss_curve)?;
            let svg = loss_curve_svg(&curve, &cfg.plot);
            let path = dir.join("loss.svg");
            write_file(&path, |w| w.write_all(svg.as_bytes()).map_err(|e| Error::Format(e.to_string())))?;
            written.push(path);
        }
        Ok(format!("wrote {} SVG files to {}", written.len(), dir.display()))
    };
    run().map_err(|e| e.in_stage("plot"))
}
