//! Writes every container kind, reads it back and shows that corruption is
//! reported as a typed error.

use drus::io::{read_container, write_container, Container};
use drus::phantom::{apply_multiplicative_noise, make_occlusion_phantom, OcclusionSpec};
use drus::{ImageGrid, RegionMask, RfChannelData};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("drus_container_example");
    std::fs::create_dir_all(&dir)?;
    let grid = ImageGrid::with_size(64, 64);
    let p = make_occlusion_phantom(&grid, &OcclusionSpec::default())?;
    let o = apply_multiplicative_noise(&p, 5);
    let rf = RfChannelData::new(4, 100, 20.8e6, (0..400).map(|i| (i as f64 * 0.1).sin()).collect())?;
    let mask = RegionMask::from_fn(grid, |x, z| x * x + (z - 28.0).powi(2) < 25.0);

    let items = [
        ("image", Container::from_image(&o)),
        ("rf", Container::from_rf(&rf)),
        ("mask", Container::from_mask(&mask)),
        ("ensemble", Container::from_ensemble(&[o.clone(), o.clone()])?),
    ];
    for (name, c) in &items {
        let path = dir.join(format!("{name}.usir"));
        write_container(&path, c)?;
        let back = read_container(&path)?;
        let exact = back.payload().iter().zip(c.payload()).all(|(a, b)| a.to_bits() == b.to_bits());
        println!("{name:>8}: dims {:?}, {} bytes, bit-exact {exact}", back.dims(), c.encode().len());
    }

    let mut bytes = items[0].1.encode();
    bytes[40] ^= 0x10;
    println!("flipped payload bit -> {}", Container::decode(&bytes).unwrap_err());
    println!("truncated file     -> {}", Container::decode(&bytes[..30]).unwrap_err());
    println!("wrong magic        -> {}", Container::decode(b"PNG\0....").unwrap_err());
    Ok(())
}
