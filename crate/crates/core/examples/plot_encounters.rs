//! Renders one SVG per generated category into a directory (default `plots`).

use aekmc::plot::{cluster_grid_svg, encounter_svg, PlotStyle};
use aekmc::synthgen::{generate_encounter, ScenarioSpec};
use aekmc::Category;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::path::PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "plots".into()));
    std::fs::create_dir_all(&dir)?;
    let style = PlotStyle::default();
    for c in Category::ALL {
        let encounters = (0..4)
            .map(|i| generate_encounter(&ScenarioSpec::new(c, i), &format!("{}-{i}", c.name())))
            .collect::<aekmc::Result<Vec<_>>>()?;
        std::fs::write(dir.join(format!("{}.svg", c.name())), encounter_svg(&encounters[0], &style))?;
        let refs: Vec<_> = encounters.iter().collect();
        std::fs::write(dir.join(format!("{}_grid.svg", c.name())), cluster_grid_svg(c.title(), &refs, &style))?;
    }
    println!("wrote {} files to {}", 2 * Category::ALL.len(), dir.display());
    Ok(())
}
