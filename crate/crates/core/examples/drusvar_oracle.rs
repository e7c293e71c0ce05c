//! DRUSvar against the empirical stochasticity model: draws reflectivity
//! samples `p + |p|^(2β)·ε` directly and shows the estimate converging to
//! the echogenicity as the ensemble grows.

use drus::phantom::{make_occlusion_phantom, OcclusionSpec};
use drus::variance::{EmpiricalModel, VarianceModelParams};
use drus::ImageGrid;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let grid = ImageGrid::standard();
    let p = make_occlusion_phantom(&grid, &OcclusionSpec::default())?;
    let params = VarianceModelParams::new(0.5)?;
    let model = EmpiricalModel::new(&p, 1, params)?;
    for c in [10, 100, 1000, 10_000] {
        let est = model.accumulate(2, c).drus_var(params)?;
        let (mut sq, mut n) = (0.0, 0.0);
        for (t, e) in p.values().iter().zip(est.values()) {
            if *t >= 0.5 {
                sq += ((e - t) / t).powi(2);
                n += 1.0;
            }
        }
        println!("C = {c:>6}: relative RMSE {:.4}", (sq / n).sqrt());
    }
    Ok(())
}
