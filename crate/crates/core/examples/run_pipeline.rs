//! Every pipeline stage in-process, the same sequence the `aekmc` binary runs.
//!
//! ```text
//! cargo run --release --example run_pipeline -- [out_dir] [section.key=value ...]
//! ```

use aekmc::pipeline::{self, load_config};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let out_dir = args.next().unwrap_or_else(|| "out".into());
    let mut overrides = vec![
        format!("pipeline.out_dir={out_dir:?}"),
        "synthgen.intersection=30".into(),
        "synthgen.opposite_direction=30".into(),
        "synthgen.bypass=30".into(),
        "synthgen.same_road=30".into(),
        "autoencoder.epochs=60".into(),
    ];
    overrides.extend(args);
    let cfg = load_config(None, &overrides, None)?;

    let stages: [(&str, fn(&pipeline::PipelineConfig) -> aekmc::Result<String>); 7] = [
        ("generate", pipeline::generate),
        ("extract", pipeline::extract),
        ("train", pipeline::train),
        ("encode", pipeline::encode),
        ("cluster", pipeline::cluster),
        ("evaluate", pipeline::evaluate),
        ("plot", pipeline::plot),
    ];
    for (name, stage) in stages {
        println!("[{name}] {}", stage(&cfg)?);
    }
    print!("{}", std::fs::read_to_string(cfg.path("report.txt"))?);
    Ok(())
}
