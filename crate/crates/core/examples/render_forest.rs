//! Grows a procedural forest over a surface field and renders one nadir
//! thermal frame with its visibility mask at several densities.
//!
//!     cargo run --release --example render_forest [out_dir]

use std::path::PathBuf;

use aos_thermal::forest::RenderOptions;
use aos_thermal::plot::write_png;
use aos_thermal::sim::{build_flight_scene, FlightConfig};
use aos_thermal::{render_thermal, write_raster, HotspotSpec};

fn main() -> aos_thermal::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("aos-render"));
    std::fs::create_dir_all(&out).map_err(|e| aos_thermal::Error::io(&out, e))?;

    for density in [0.0, 220.0, 585.0, 950.0] {
        let cfg = FlightConfig {
            seed: 1,
            density_tpha: density,
            image_size: 128,
            sun_absorption_c: 7.0,
            hotspots: vec![HotspotSpec {
                center_m: [0.0, 0.0],
                radius_m: 1.5,
                peak_c: 90.0,
                falloff: 2.0,
            }],
            ..FlightConfig::default()
        };
        let (layout, _surface, scene) = build_flight_scene(&cfg)?;
        let pose = cfg
            .grid
            .poses(layout.center_m, 0.0, layout.intrinsics)
            .into_iter()
            .find(|(i, _)| *i == cfg.grid.center_index())
            .map(|(_, p)| p)
            .expect("grid has a center");
        let (image, mask) = render_thermal(&scene, &pose, RenderOptions::default())?;
        let stem = format!("d{density:.0}");
        write_raster(&image, out.join(format!("{stem}.tgr")))?;
        write_png(&image, 0.0, 60.0, out.join(format!("{stem}.png")))?;
        write_png(mask.raster(), 0.0, 1.0, out.join(format!("{stem}_mask.png")))?;
        println!(
            "{density:>5.0} t/ha: {:>4} trees, {:.0} % of the ground visible from the center",
            scene.trees().len(),
            100.0 * mask.mean().unwrap_or(0.0)
        );
    }
    println!("frames written to {}", out.display());
    Ok(())
}
