//! Runs a reduced occlusion sweep through the experiment runner and prints
//! the per-estimator summary. Pass a config path to run something else.
//!
//! ```text
//! cargo run --release --example occlusion_sweep -- [config.toml]
//! ```

use drus::experiment::run_experiment;
use drus::io::ExperimentConfig;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = match std::env::args().nth(1) {
        Some(path) => ExperimentConfig::load(path)?,
        None => {
            let mut cfg = ExperimentConfig::default();
            cfg.grid.width_px = 128;
            cfg.grid.depth_px = 128;
            cfg.experiment.num_seeds = 3;
            cfg.experiment.output_dir = std::env::temp_dir().join("drus_occlusion_sweep");
            cfg
        }
    };
    let report = run_experiment(&cfg)?;
    print!("{}", report.summary());
    println!("outputs in {}", report.output_dir.display());
    Ok(())
}
