//! Trains a small autoencoder on noisy low-rank data and prints the loss curve.

use aekmc::autoencoder::{reconstruction_error, train_sgd, Activation, NetworkParams, TrainConfig};
use aekmc::seed::rng;
use rand::Rng;

fn main() -> aekmc::Result<()> {
    let mut r = rng(3);
    let data: Vec<Vec<f64>> = (0..300)
        .map(|_| {
            let (u, v) = (r.random_range(-1.0..1.0), r.random_range(-1.0..1.0));
            (0..12).map(|j| 0.4 * (u * (j as f64).cos() + v * (j as f64 * 0.5).sin())).collect()
        })
        .collect();

    let init = NetworkParams::init(&[12, 6, 2, 6, 12], Activation::Tanh, 1)?.with_output_activation(Activation::Affine);
    let before: f64 = data.iter().map(|x| reconstruction_error(x, &init.reconstruct(x).unwrap()).unwrap()).sum();
    let cfg = TrainConfig {
        learning_rate: 0.005,
        epochs: 200,
        seed: 2,
        ..Default::default()
    };
    let out = train_sgd(init, &data, &cfg)?;
    for (epoch, loss) in out.loss_curve.iter().enumerate().step_by(20) {
        println!("epoch {:>3}: {loss:.4}", epoch + 1);
    }
    let after: f64 = data.iter().map(|x| reconstruction_error(x, &out.params.reconstruct(x).unwrap()).unwrap()).sum();
    println!("total reconstruction error {before:.2} -> {after:.2}");
    println!("code of first sample: {:?}", out.params.encode(&data[0])?);
    Ok(())
}
