//! Reads a trip log (path or stdin) and lists the encounters it contains.
//!
//! ```text
//! cargo run --example generate_dataset | cargo run --example detect_encounters
//! ```

use aekmc::encounter::{detect_all, to_feature_vector, DetectParams, FeatureConfig};
use aekmc::ingest::{parse_trip_log, resample_on_ticks};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let log = match std::env::args().nth(1) {
        Some(path) => parse_trip_log(std::fs::File::open(path)?, false)?,
        None => parse_trip_log(std::io::stdin().lock(), false)?,
    };
    for skipped in &log.skipped {
        eprintln!("skipped {skipped:?}");
    }
    let params = DetectParams::default();
    let resampled = log
        .trajectories
        .iter()
        .map(|t| resample_on_ticks(t, params.rate_hz))
        .collect::<aekmc::Result<Vec<_>>>()?;
    let encounters = detect_all(&resampled, &params)?;
    let features = FeatureConfig::default();
    for e in &encounters {
        let v = to_feature_vector(e, &features)?;
        println!(
            "{}: {} x {}, {:.1} s, feature dim {}",
            e.id,
            e.a.vehicle_id,
            e.b.vehicle_id,
            e.len() as f64 / params.rate_hz,
            v.len()
        );
    }
    println!("{} encounters among {} trajectories", encounters.len(), resampled.len());
    Ok(())
}
