//! Lloyd's k-means with restarts on three Gaussian blobs.

use aekmc::clustering::{kmeans_best_of, KMeansConfig};
use aekmc::seed::rng;
use rand_distr::{Distribution, Normal};

fn main() -> aekmc::Result<()> {
    let mut r = rng(9);
    let noise = Normal::new(0.0, 0.6).unwrap();
    let centers = [[0.0, 0.0], [5.0, 1.0], [2.0, 6.0]];
    let points: Vec<Vec<f64>> = (0..150)
        .map(|i| centers[i % 3].iter().map(|c| c + noise.sample(&mut r)).collect())
        .collect();

    let cfg = KMeansConfig {
        k: 3,
        seed: 4,
        ..Default::default()
    };
    let fit = kmeans_best_of(&points, &cfg, 10)?;
    println!("{} iterations, inertia {:.3}", fit.iterations, fit.model.inertia);
    for (i, c) in fit.model.centroids.iter().enumerate() {
        let size = fit.assignments.iter().filter(|&&a| a == i).count();
        println!("cluster {i}: ({:.2}, {:.2}), {size} points", c[0], c[1]);
    }
    println!("inertia history: {:?}", fit.history.iter().map(|v| format!("{v:.1}")).collect::<Vec<_>>());
    println!("(1, 1) -> cluster {}", fit.model.assign(&[1.0, 1.0])?);
    Ok(())
}
