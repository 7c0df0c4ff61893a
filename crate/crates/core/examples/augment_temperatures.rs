//! Shifts a reference surface field (recorded at 9 °C) to other ambient
//! temperatures and rescales its fire pixels onto a hotter range.
//!
//!     cargo run --example augment_temperatures

use aos_thermal::raster::raster_stats;
use aos_thermal::surface::{augment_raster, gen_surface_field, nonfire_weight, SurfaceParams};
use aos_thermal::{augment_fire, augment_nonfire, AugmentationParams, HotspotSpec, RegimeMask};

fn main() -> aos_thermal::Result<()> {
    let reference = gen_surface_field(&SurfaceParams {
        seed: 3,
        ambient_c: 9.0,
        size: 128,
        ground_res_m: 0.1,
        hotspots: vec![HotspotSpec {
            center_m: [6.4, 6.4],
            radius_m: 2.0,
            peak_c: 98.0,
            falloff: 2.0,
        }],
    })?;
    let stats = raster_stats(&reference, None)?;
    println!("reference field: {:.1} .. {:.1} °C", stats.min, stats.max);

    println!("\nnon-fire shift towards 27 °C ambient (T_lower 0, T_upper 24, alpha 0.5):");
    let p = AugmentationParams::for_shift(9.0, 27.0, 98.0, 300.0)?;
    for t in [-5.0f32, 0.0, 5.0, 12.0, 20.0, 24.0, 30.0] {
        println!(
            "  {t:>5.1} °C -> {:>6.2} °C  (weight {:.3})",
            augment_nonfire(t, &p),
            nonfire_weight(t as f64, &p)
        );
    }

    println!("\nfire rescale, T_max 98 -> T'_max 300:");
    for t in [30.0f32, 50.0, 75.0, 98.0] {
        println!("  {t:>5.1} °C -> {:>6.1} °C", augment_fire(t, &p)?);
    }

    println!("\nwhole-field augmentation:");
    for ambient in [0.0f32, 9.0, 15.0, 30.0] {
        let p = AugmentationParams::for_shift(9.0, ambient, 98.0, 300.0)?;
        let r = augment_raster(&reference, &p)?;
        let all = raster_stats(&r, None)?;
        let fire = raster_stats(&r, Some(RegimeMask::new(50.0, 301.0)?)).map(|s| s.count).unwrap_or(0);
        println!(
            "  ambient {ambient:>4.1} °C: header ambient {:.1}, range {:.1} .. {:.1} °C, {fire} fire pixels",
            r.ambient_c(),
            all.min,
            all.max
        );
    }
    Ok(())
}
