//! AE-kMC against k-means on raw features, on the four-category synthetic benchmark.
//!
//! ```text
//! cargo run --release --example compare_pipelines -- [n_seeds] [per_category]
//! ```

use std::collections::BTreeMap;
use std::time::Instant;

use aekmc::encounter::{to_feature_vector, FeatureConfig};
use aekmc::evaluation::{compare_pipelines, CompareConfig};
use aekmc::synthgen::{generate_dataset, DatasetOptions};
use aekmc::Category;

fn main() -> aekmc::Result<()> {
    let mut args = std::env::args().skip(1);
    let n_seeds: u64 = args.next().map_or(5, |s| s.parse().expect("n_seeds"));
    let per_category: usize = args.next().map_or(200, |s| s.parse().expect("per_category"));

    let counts: BTreeMap<Category, usize> = Category::ALL[..4].iter().map(|&c| (c, per_category)).collect();
    let encounters = generate_dataset(&counts, 1, &DatasetOptions::default())?;
    let cfg = FeatureConfig::default();
    let features = encounters
        .iter()
        .map(|e| to_feature_vector(e, &cfg).map(|f| f.0))
        .collect::<aekmc::Result<Vec<_>>>()?;
    let labels: Vec<Category> = encounters.iter().map(|e| e.label.unwrap()).collect();

    let config = CompareConfig::default();
    let (mut ae_sum, mut km_sum) = (0.0, 0.0);
    for seed in 1..=n_seeds {
        let t = Instant::now();
        let run = compare_pipelines(&features, &labels, &config, seed)?;
        let curve = &run.loss_curve;
        println!(
            "seed {seed}: {} epochs, loss {:.3} -> {:.3}, {:.1?}",
            curve.len(),
            curve[0],
            curve[curve.len() - 1],
            t.elapsed()
        );
        println!("{}", run.report.to_table());
        ae_sum += run.report.aekmc.mean_eta();
        km_sum += run.report.kmeans.mean_eta();
    }
    println!(
        "mean over {n_seeds} seeds: AE-kMC {:.1}%, k-means {:.1}%",
        100.0 * ae_sum / n_seeds as f64,
        100.0 * km_sum / n_seeds as f64
    );
    Ok(())
}
