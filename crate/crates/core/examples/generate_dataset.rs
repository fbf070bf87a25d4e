//! Writes a labeled synthetic trip log to stdout.
//!
//! ```text
//! cargo run --example generate_dataset -- [per_category] [seed] > trips.csv
//! ```

use std::collections::BTreeMap;

use aekmc::ingest::write_trip_log;
use aekmc::synthgen::{generate_dataset, DatasetOptions};
use aekmc::Category;

fn main() -> aekmc::Result<()> {
    let mut args = std::env::args().skip(1);
    let per_category: usize = args.next().map_or(3, |s| s.parse().expect("per_category"));
    let seed: u64 = args.next().map_or(7, |s| s.parse().expect("seed"));

    let counts: BTreeMap<Category, usize> = Category::ALL[..4].iter().map(|&c| (c, per_category)).collect();
    let encounters = generate_dataset(&counts, seed, &DatasetOptions::default())?;
    for e in &encounters {
        eprintln!("{} {:>18} {} + {} ({} samples)", e.id, e.label.unwrap(), e.a.trip_id, e.b.trip_id, e.len());
    }
    let trajectories: Vec<_> = encounters.iter().flat_map(|e| [e.a.clone(), e.b.clone()]).collect();
    write_trip_log(std::io::stdout().lock(), &trajectories)
}
