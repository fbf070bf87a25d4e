//! k-means by Lloyd's algorithm with k-means++ seeding.
//!
//! Points are processed in a canonical (lexicographically sorted) order, so the fitted
//! centroids do not depend on the order in which points are supplied.

use std::io::{Read, Write};

use rand::Rng;

use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng};

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub centroids: Vec<Vec<f64>>,
    /// Sum of squared distances of the training points to their nearest centroid.
    pub inertia: f64,
}

impl ClusterModel {
    pub fn k(&self) -> usize {
        self.centroids.len()
    }

    pub fn dim(&self) -> usize {
        self.centroids.first().map_or(0, Vec::len)
    }

    /// Index of the nearest centroid; ties go to the lowest index.
    pub fn assign(&self, point: &[f64]) -> Result<usize> {
        if point.len() != self.dim() {
            return Err(Error::Shape {
                expected: self.dim(),
                actual: point.len(),
            });
        }
        Ok(nearest(&self.centroids, point).0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansConfig {
    pub k: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            k: 10,
            seed: 0,
            max_iter: 300,
            tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub model: ClusterModel,
    pub assignments: Vec<usize>,
    /// Objective after the initial assignment and after every update and assignment step.
    pub history: Vec<f64>,
    pub iterations: usize,
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(centroids: &[Vec<f64>], p: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centroids.iter().enumerate() {
        let d = sq_dist(c, p);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

/// Sum of squared distances of each point to its assigned centroid.
pub fn inertia<V: AsRef<[f64]>>(points: &[V], model: &ClusterModel, assignments: &[usize]) -> Result<f64> {
    if points.len() != assignments.len() {
        return Err(Error::Shape {
            expected: points.len(),
            actual: assignments.len(),
        });
    }
    let mut total = 0.0;
    for (p, &a) in points.iter().zip(assignments) {
        let p = p.as_ref();
        let c = model
            .centroids
            .get(a)
            .ok_or_else(|| Error::Data(format!("assignment {a} out of range for k = {}", model.k())))?;
        if c.len() != p.len() {
            return Err(Error::Shape {
                expected: c.len(),
                actual: p.len(),
            });
        }
        total += sq_dist(c, p);
    }
    Ok(total)
}

fn validate_points<V: AsRef<[f64]>>(points: &[V], k: usize) -> Result<usize> {
    if points.is_empty() {
        return Err(Error::InsufficientData("k-means needs at least one point".into()));
    }
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    if k > points.len() {
        return Err(Error::Config(format!("k = {k} exceeds the {} available points", points.len())));
    }
    let dim = points[0].as_ref().len();
    for p in points {
        let p = p.as_ref();
        if p.len() != dim {
            return Err(Error::Shape {
                expected: dim,
                actual: p.len(),
            });
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("k-means input contains a non-finite value".into()));
        }
    }
    Ok(dim)
}

/// k-means++ seeding over points in canonical order.
fn seed_centroids(points: &[&[f64]], k: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centroids = vec![points[rng.random_range(0..n)].to_vec()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut idx = n - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    idx = i;
                    break;
                }
                target -= w;
            }
            idx
        } else {
            rng.random_range(0..n)
        };
        let c = points[pick].to_vec();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

/// Nearest-centroid assignment. Empty clusters are repaired by moving their centroid onto the
/// point farthest from its own centroid, repeating until none is empty or no point is left
/// with positive distance.
fn assign_all(points: &[&[f64]], centroids: &mut [Vec<f64>], out: &mut Vec<usize>) -> f64 {
    let k = centroids.len();
    for _ in 0..=k {
        out.clear();
        let mut counts = vec![0usize; k];
        let mut dist = Vec::with_capacity(points.len());
        for p in points {
            let (i, d) = nearest(centroids, p);
            out.push(i);
            counts[i] += 1;
            dist.push(d);
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            return dist.iter().sum();
        };
        let far = (0..points.len())
            .filter(|&i| counts[out[i]] > 1)
            .max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a)));
        match far {
            Some(i) if dist[i] > 0.0 => centroids[empty] = points[i].to_vec(),
            _ => return dist.iter().sum(),
        }
    }
    points.iter().zip(out.iter()).map(|(p, &a)| sq_dist(p, &centroids[a])).sum()
}

/// Recomputes each non-empty cluster's mean, summing members in canonical order.
fn update_centroids(points: &[&[f64]], assignments: &[usize], centroids: &mut [Vec<f64>]) {
    let dim = centroids[0].len();
    let mut sums = vec![vec![0.0; dim]; centroids.len()];
    let mut counts = vec![0usize; centroids.len()];
    for (p, &a) in points.iter().zip(assignments) {
        counts[a] += 1;
        for (s, v) in sums[a].iter_mut().zip(p.iter()) {
            *s += v;
        }
    }
    for ((c, s), n) in centroids.iter_mut().zip(sums).zip(counts) {
        if n > 0 {
            *c = s.into_iter().map(|v| v / n as f64).collect();
        }
    }
}

/// Fits k-means with Lloyd iterations from a k-means++ start.
///
/// Stops when assignments no longer change, the objective improves by less than `tol`, or
/// after `max_iter` update steps.
pub fn kmeans_fit<V: AsRef<[f64]>>(points: &[V], config: &KMeansConfig) -> Result<KMeansFit> {
    validate_points(points, config.k)?;
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        let (pa, pb) = (points[a].as_ref(), points[b].as_ref());
        pa.iter()
            .zip(pb)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let sorted: Vec<&[f64]> = order.iter().map(|&i| points[i].as_ref()).collect();

    let mut rng = rng(config.seed);
    let mut centroids = seed_centroids(&sorted, config.k, &mut rng);
    let mut assign = Vec::with_capacity(sorted.len());
    let mut objective = assign_all(&sorted, &mut centroids, &mut assign);
    let mut history = vec![objective];
    let mut next = Vec::with_capacity(sorted.len());
    let mut iterations = 0;

    while iterations < config.max_iter {
        iterations += 1;
        update_centroids(&sorted, &assign, &mut centroids);
        let updated: f64 = sorted.iter().zip(&assign).map(|(p, &a)| sq_dist(p, &centroids[a])).sum();
        history.push(updated);
        let reassigned = assign_all(&sorted, &mut centroids, &mut next);
        history.push(reassigned);
        let changed = next != assign;
        std::mem::swap(&mut assign, &mut next);
        let improvement = objective - reassigned;
        objective = reassigned;
        if !changed || improvement < config.tol {
            break;
        }
    }

    let mut assignments = vec![0; points.len()];
    for (pos, &orig) in order.iter().enumerate() {
        assignments[orig] = assign[pos];
    }
    Ok(KMeansFit {
        model: ClusterModel {
            centroids,
            inertia: objective,
        },
        assignments,
        history,
        iterations,
    })
}

/// Runs `restarts` seeded fits and keeps the lowest-inertia one (earliest on ties).
pub fn kmeans_best_of<V: AsRef<[f64]>>(points: &[V], config: &KMeansConfig, restarts: usize) -> Result<KMeansFit> {
    let mut best: Option<KMeansFit> = None;
    for r in 0..restarts.max(1) {
        let cfg = KMeansConfig {
            seed: derive_seed(config.seed, r as u64),
            ..*config
        };
        let fit = kmeans_fit(points, &cfg)?;
        if best.as_ref().is_none_or(|b| fit.model.inertia < b.model.inertia) {
            best = Some(fit);
        }
    }
    Ok(best.unwrap())
}

/// Writes the model: a `k,<k>,dim,<d>,inertia,<J>` row, then one centroid per row.
pub fn write_model<W: Write>(output: W, model: &ClusterModel) -> Result<()> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(output);
    w.write_record([
        "k".to_string(),
        model.k().to_string(),
        "dim".to_string(),
        model.dim().to_string(),
        "inertia".to_string(),
        model.inertia.to_string(),
    ])?;
    for c in &model.centroids {
        w.write_record(c.iter().map(|v| v.to_string()))?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))
}

pub fn read_model<R: Read>(input: R) -> Result<ClusterModel> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(input);
    let mut records = r.records();
    let head = records.next().ok_or_else(|| Error::Format("empty cluster model file".into()))??;
    let field = |i: usize| head.get(i).unwrap_or("");
    if head.len() != 6 || field(0) != "k" || field(2) != "dim" || field(4) != "inertia" {
        return Err(Error::Format("cluster model header must be k,<k>,dim,<d>,inertia,<J>".into()));
    }
    let num = |s: &str| -> Result<f64> { s.parse().map_err(|_| Error::Format(format!("bad number {s:?} in model header"))) };
    let k = num(field(1))? as usize;
    let dim = num(field(3))? as usize;
    let inertia = num(field(5))?;
    let mut centroids = Vec::with_capacity(k);
    for rec in records {
        let rec = rec?;
        let c = rec
            .iter()
            .map(|s| s.parse::<f64>().map_err(|_| Error::Format(format!("bad centroid value {s:?}"))))
            .collect::<Result<Vec<_>>>()?;
        if c.len() != dim {
            return Err(Error::Shape {
                expected: dim,
                actual: c.len(),
            });
        }
        centroids.push(c);
    }
    if centroids.len() != k {
        return Err(Error::Format(format!("header says k = {k} but {} centroids follow", centroids.len())));
    }
    Ok(ClusterModel { centroids, inertia })
}

pub fn write_assignments<W: Write>(output: W, ids: &[String], assignments: &[usize]) -> Result<()> {
    if ids.len() != assignments.len() {
        return Err(Error::Shape {
            expected: ids.len(),
            actual: assignments.len(),
        });
    }
    let mut w = csv::Writer::from_writer(output);
    w.write_record(["encounter_id", "cluster"])?;
    for (id, a) in ids.iter().zip(assignments) {
        w.write_record([id.as_str(), &a.to_string()])?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))
}

pub fn read_assignments<R: Read>(input: R) -> Result<(Vec<String>, Vec<usize>)> {
    let mut r = csv::Reader::from_reader(input);
    if r.headers()?.iter().collect::<Vec<_>>() != ["encounter_id", "cluster"] {
        return Err(Error::Format("assignments header must be encounter_id,cluster".into()));
    }
    let mut ids = Vec::new();
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        ids.push(rec[0].to_string());
        out.push(
            rec[1]
                .parse()
                .map_err(|_| Error::Format(format!("bad cluster index {:?}", &rec[1])))?,
        );
    }
    Ok((ids, out))
}
