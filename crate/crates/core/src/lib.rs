//! Driving-encounter clustering: synthetic trip generation, encounter extraction, a symmetric
//! autoencoder, k-means in the latent space and a cluster-purity evaluation.

pub mod autoencoder;
pub mod category;
pub mod clustering;
pub mod encounter;
pub mod error;
pub mod evaluation;
pub mod geo;
pub mod ingest;
pub mod pipeline;
pub mod plot;
pub mod seed;
pub mod synthgen;

pub use category::Category;
pub use error::{Error, Result};
