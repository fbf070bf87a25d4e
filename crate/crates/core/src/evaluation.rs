//! Cluster quality metric and the AE-kMC versus raw k-means comparison.
//!
//! A cluster member is abnormal when its ground-truth label differs from the category the
//! cluster is mapped to. The score of a category is `1 - n_abnormal / n_sample` over the
//! members of every cluster mapped to it.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::Write;

use rand::Rng;

use crate::autoencoder::{train_sgd, Activation, NetworkParams, TrainConfig, DEFAULT_LAYER_DIMS};
use crate::category::Category;
use crate::clustering::{kmeans_best_of, KMeansConfig};
use crate::encounter::fit_normalization;
use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng};

pub const DEFAULT_SAMPLE_SIZE: usize = 100;

/// Published reference scores for categories A-D (AE-kMC, k-means) on the naturalistic data.
pub const REFERENCE_ETA: [(Category, f64, f64); 4] = [
    (Category::Intersection, 0.73, 0.416),
    (Category::OppositeDirection, 0.744, 0.379),
    (Category::Bypass, 0.682, 0.476),
    (Category::SameRoad, 0.838, 0.784),
];

/// Exact share of members whose label equals `majority`.
pub fn eta_exact(labels: &[Category], majority: Category) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::InsufficientData("eta of an empty cluster".into()));
    }
    let abnormal = labels.iter().filter(|&&l| l != majority).count();
    Ok(1.0 - abnormal as f64 / labels.len() as f64)
}

/// Score from `sample_size` members drawn with replacement; exact when the sample would cover
/// the whole cluster.
pub fn eta(labels: &[Category], majority: Category, sample_size: usize, seed: u64) -> Result<f64> {
    if sample_size == 0 {
        return Err(Error::validation("sample_size", "must be at least 1"));
    }
    if labels.is_empty() {
        return Err(Error::InsufficientData("eta of an empty cluster".into()));
    }
    if sample_size >= labels.len() {
        return eta_exact(labels, majority);
    }
    let mut r = rng(seed);
    let abnormal = (0..sample_size)
        .filter(|_| labels[r.random_range(0..labels.len())] != majority)
        .count();
    Ok(1.0 - abnormal as f64 / sample_size as f64)
}

/// Maps each cluster to its majority label (ties to the lower category index). Empty clusters
/// map to `None`.
pub fn map_clusters(assignments: &[usize], labels: &[Category], k: usize) -> Result<Vec<Option<Category>>> {
    if assignments.len() != labels.len() {
        return Err(Error::Shape {
            expected: assignments.len(),
            actual: labels.len(),
        });
    }
    let mut counts = vec![[0usize; Category::ALL.len()]; k];
    for (&a, &l) in assignments.iter().zip(labels) {
        let row = counts
            .get_mut(a)
            .ok_or_else(|| Error::Data(format!("cluster index {a} out of range for k = {k}")))?;
        row[l.index()] += 1;
    }
    Ok(counts
        .iter()
        .map(|row| {
            let (best, &n) = row
                .iter()
                .enumerate()
                .max_by(|(i, a), (j, b)| a.cmp(b).then(j.cmp(i)))
                .unwrap();
            (n > 0).then(|| Category::from_index(best).unwrap())
        })
        .collect())
}

/// Per-category scores of one clustering.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineScores {
    pub mapping: Vec<Option<Category>>,
    /// `(category, eta)` for every category present in the labels, in category order.
    pub eta: Vec<(Category, f64)>,
}

impl PipelineScores {
    pub fn mean_eta(&self) -> f64 {
        self.eta.iter().map(|(_, e)| e).sum::<f64>() / self.eta.len().max(1) as f64
    }

    pub fn get(&self, c: Category) -> Option<f64> {
        self.eta.iter().find(|(x, _)| *x == c).map(|(_, e)| *e)
    }
}

/// Scores a clustering against ground truth. A category that no cluster maps to scores 0.
pub fn score_clustering(
    assignments: &[usize],
    labels: &[Category],
    k: usize,
    sample_size: usize,
    seed: u64,
) -> Result<PipelineScores> {
    let mapping = map_clusters(assignments, labels, k)?;
    let present: BTreeSet<Category> = labels.iter().copied().collect();
    let mut eta_rows = Vec::new();
    for c in present {
        let members: Vec<Category> = assignments
            .iter()
            .zip(labels)
            .filter(|(&a, _)| mapping[a] == Some(c))
            .map(|(_, &l)| l)
            .collect();
        let value = if members.is_empty() {
            0.0
        } else {
            eta(&members, c, sample_size, derive_seed(seed, c.index() as u64))?
        };
        eta_rows.push((c, value));
    }
    Ok(PipelineScores { mapping, eta: eta_rows })
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub aekmc: PipelineScores,
    pub kmeans: PipelineScores,
    pub sample_size: usize,
    pub seed: u64,
}

impl EvaluationReport {
    /// Writes `category,eta_aekmc,eta_kmeans` rows.
    pub fn write_csv<W: Write>(&self, output: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(output);
        w.write_record(["category", "eta_aekmc", "eta_kmeans"])?;
        for (c, e) in &self.aekmc.eta {
            let base = self.kmeans.get(*c).unwrap_or(0.0);
            w.write_record([c.name(), &e.to_string(), &base.to_string()])?;
        }
        w.flush().map_err(|e| Error::Format(e.to_string()))
    }

    /// Aligned table with the published reference values alongside.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<14} {:>9} {:>9}   {:>9} {:>9}", "Cluster", "AE-kMC", "k-means", "ref AE", "ref km");
        let _ = writeln!(s, "{}", "-".repeat(57));
        let pct = |v: f64| format!("{:.1}%", 100.0 * v);
        for (c, e) in &self.aekmc.eta {
            let base = self.kmeans.get(*c).unwrap_or(0.0);
            let (ra, rk) = REFERENCE_ETA
                .iter()
                .find(|(rc, _, _)| rc == c)
                .map(|(_, a, k)| (pct(*a), pct(*k)))
                .unwrap_or(("-".into(), "-".into()));
            let _ = writeln!(s, "{:<14} {:>9} {:>9}   {:>9} {:>9}", c.title(), pct(*e), pct(base), ra, rk);
        }
        let _ = writeln!(s, "{}", "-".repeat(57));
        let _ = writeln!(
            s,
            "{:<14} {:>9} {:>9}",
            "Mean",
            pct(self.aekmc.mean_eta()),
            pct(self.kmeans.mean_eta())
        );
        s
    }
}

/// Settings for both pipelines of [`compare_pipelines`].
#[derive(Debug, Clone, PartialEq)]
pub struct CompareConfig {
    pub layer_dims: Vec<usize>,
    pub activation: Activation,
    /// Activation of the reconstruction layer; `None` reuses `activation`.
    pub output_activation: Option<Activation>,
    pub train: TrainConfig,
    pub kmeans: KMeansConfig,
    pub restarts: usize,
    pub sample_size: usize,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            layer_dims: DEFAULT_LAYER_DIMS.to_vec(),
            activation: Activation::Tanh,
            output_activation: None,
            train: TrainConfig::default(),
            kmeans: KMeansConfig::default(),
            restarts: 10,
            sample_size: DEFAULT_SAMPLE_SIZE,
        }
    }
}

/// Stage seeds derived from one top-level seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageSeeds {
    pub init: u64,
    pub shuffle: u64,
    pub kmeans: u64,
    pub sampling: u64,
}

impl StageSeeds {
    pub fn from_seed(seed: u64) -> Self {
        Self {
            init: derive_seed(seed, 1),
            shuffle: derive_seed(seed, 2),
            kmeans: derive_seed(seed, 3),
            sampling: derive_seed(seed, 4),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub report: EvaluationReport,
    pub loss_curve: Vec<f64>,
    pub params: NetworkParams,
}

/// Runs normalize, train, encode, k-means (AE-kMC) and normalize, k-means on raw features,
/// then scores both against the labels.
pub fn compare_pipelines<V: AsRef<[f64]>>(
    features: &[V],
    labels: &[Category],
    config: &CompareConfig,
    seed: u64,
) -> Result<Comparison> {
    if features.len() != labels.len() {
        return Err(Error::Shape {
            expected: features.len(),
            actual: labels.len(),
        });
    }
    if features.len() < config.kmeans.k {
        return Err(Error::InsufficientData(format!(
            "{} encounters cannot fill k = {} clusters",
            features.len(),
            config.kmeans.k
        )));
    }
    let seeds = StageSeeds::from_seed(seed);
    let norm = fit_normalization(features).map_err(|e| e.in_stage("normalize"))?;
    let normalized = features
        .iter()
        .map(|f| norm.apply(f.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    let kmeans_cfg = KMeansConfig {
        seed: seeds.kmeans,
        ..config.kmeans
    };

    let (ae, raw) = rayon::join(
        || -> Result<(Vec<usize>, Vec<f64>, NetworkParams)> {
            let init = NetworkParams::init(&config.layer_dims, config.activation, seeds.init)?
                .with_output_activation(config.output_activation.unwrap_or(config.activation));
            let train_cfg = TrainConfig {
                seed: seeds.shuffle,
                ..config.train
            };
            let trained = train_sgd(init, &normalized, &train_cfg).map_err(|e| e.in_stage("train"))?;
            let codes = normalized
                .iter()
                .map(|x| trained.params.encode(x))
                .collect::<Result<Vec<_>>>()?;
            let fit = kmeans_best_of(&codes, &kmeans_cfg, config.restarts).map_err(|e| e.in_stage("cluster"))?;
            Ok((fit.assignments, trained.loss_curve, trained.params))
        },
        || -> Result<Vec<usize>> {
            let fit = kmeans_best_of(&normalized, &kmeans_cfg, config.restarts).map_err(|e| e.in_stage("cluster"))?;
            Ok(fit.assignments)
        },
    );
    let (ae_assign, loss_curve, params) = ae?;
    let raw_assign = raw?;
    let k = config.kmeans.k;
    let report = EvaluationReport {
        aekmc: score_clustering(&ae_assign, labels, k, config.sample_size, seeds.sampling)?,
        kmeans: score_clustering(&raw_assign, labels, k, config.sample_size, seeds.sampling)?,
        sample_size: config.sample_size,
        seed,
    };
    Ok(Comparison {
        report,
        loss_curve,
        params,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use Category::*;

    fn cluster(normal: usize, abnormal: usize) -> Vec<Category> {
        let mut v = vec![Intersection; normal];
        v.extend(std::iter::repeat_n(SameRoad, abnormal));
        v
    }

    #[test]
    fn eta_exact_values() {
        assert_eq!(eta_exact(&cluster(73, 27), Intersection).unwrap(), 0.73);
        assert_eq!(eta_exact(&cluster(10, 0), Intersection).unwrap(), 1.0);
        assert_eq!(eta_exact(&cluster(0, 10), Intersection).unwrap(), 0.0);
        assert!(eta_exact(&[], Intersection).is_err());
        // Sample covering the whole cluster switches to exact mode.
        assert_eq!(eta(&cluster(73, 27), Intersection, 100, 5).unwrap(), 0.73);
    }

    #[test]
    fn sampled_eta_converges() {
        let c = cluster(400, 100);
        let exact = eta_exact(&c, Intersection).unwrap();
        let sampled = eta(&c, Intersection, 10_000, 3).unwrap();
        assert!((sampled - exact).abs() < 0.02, "{sampled} vs {exact}");
        let small = eta(&c, Intersection, 100, 3).unwrap();
        assert!((0.0..=1.0).contains(&small));
        assert_eq!(small, eta(&c, Intersection, 100, 3).unwrap());
    }

    #[test]
    fn majority_mapping_and_ties() {
        let m = map_clusters(&[0, 0, 0, 1, 1], &[Intersection, Intersection, OppositeDirection, Intersection, OppositeDirection], 3)
            .unwrap();
        assert_eq!(m, vec![Some(Intersection), Some(Intersection), None]);
        assert!(map_clusters(&[0], &[], 1).is_err());
    }

    #[test]
    fn mapping_matches_counting_oracle() {
        let mut r = rng(6);
        for _ in 0..50 {
            let n = r.random_range(1..60);
            let k = r.random_range(1..6);
            let assign: Vec<usize> = (0..n).map(|_| r.random_range(0..k)).collect();
            let labels: Vec<Category> = (0..n).map(|_| Category::ALL[r.random_range(0..5)]).collect();
            let got = map_clusters(&assign, &labels, k).unwrap();
            for c in 0..k {
                let mut best: Option<(Category, usize)> = None;
                for cat in Category::ALL {
                    let count = (0..n).filter(|&i| assign[i] == c && labels[i] == cat).count();
                    if count > 0 && best.is_none_or(|(_, b)| count > b) {
                        best = Some((cat, count));
                    }
                }
                assert_eq!(got[c], best.map(|(c, _)| c));
            }
        }
    }

    #[test]
    fn single_category_scores_one() {
        let labels = vec![Bypass; 12];
        let assign: Vec<usize> = (0..12).map(|i| i % 3).collect();
        let s = score_clustering(&assign, &labels, 3, 100, 1).unwrap();
        assert_eq!(s.eta, vec![(Bypass, 1.0)]);
    }

    #[test]
    fn unmapped_category_scores_zero() {
        let labels = vec![Bypass, Bypass, Bypass, Merge];
        let s = score_clustering(&[0, 0, 0, 0], &labels, 1, 100, 1).unwrap();
        assert_eq!(s.eta, vec![(Bypass, 0.75), (Merge, 0.0)]);
    }

    #[test]
    fn report_formats() {
        let scores = PipelineScores {
            mapping: vec![Some(Intersection)],
            eta: vec![(Intersection, 0.73), (SameRoad, 0.838)],
        };
        let report = EvaluationReport {
            aekmc: scores.clone(),
            kmeans: scores,
            sample_size: 100,
            seed: 1,
        };
        let mut buf = Vec::new();
        report.write_csv(&mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "category,eta_aekmc,eta_kmeans\nintersection,0.73,0.73\nsame_road,0.838,0.838\n"
        );
        let table = report.to_table();
        assert!(table.contains("Category A"));
        assert!(table.contains("73.0%"));
    }
}
