//! Removes the canopy's contribution from a 2D integral using the
//! aggregated visibility mask and the canopy temperature.
//!
//!     cargo run --release --example analytic_correction

use aos_thermal::correction::{estimate_vegetation, PixelFlag, DEFAULT_MIN_VISIBILITY};
use aos_thermal::eval::{aperture_integral, SaType};
use aos_thermal::sim::{simulate_flight, FrameSet};
use aos_thermal::{correct_analytic, estimate_ambient, rmse, CorrectionInput, RegimeMask, SweepConfig};

fn main() -> aos_thermal::Result<()> {
    let sweep = SweepConfig {
        image_size: 128,
        ..SweepConfig::default()
    };
    let cfg = sweep.flight(585.0, 15.0, None, None, 4);
    let flight = simulate_flight(&cfg, FrameSet::All)?;
    let (sigma, f) = aperture_integral(&flight.capture, &cfg.grid, SaType::TwoD)?;
    let f = f.expect("simulated frames carry masks");

    // what a field crew would do: average everything they recorded
    let images: Vec<_> = flight.capture.frames.iter().map(|fr| fr.image.clone()).collect();
    println!("ambient estimate from all frames: {:.1} °C (true {:.1})", estimate_ambient(&images)?, cfg.ambient_c);

    let frames: Vec<_> = flight.capture.frames.iter().filter_map(|fr| fr.mask.as_ref().map(|m| (&fr.image, m))).collect();
    let measured = estimate_vegetation(&frames)?;

    let full = Some(RegimeMask::FULL);
    println!("integral        RMSE {:.2} °C", rmse(&sigma, &flight.truth, full)?.rmse);
    for (label, tv) in [("assumed canopy", None), ("measured canopy", Some(measured))] {
        let mut input = CorrectionInput::new(&sigma, cfg.ambient_c)
            .with_visibility(&f)
            .with_sun_absorption(cfg.sun_absorption_c);
        if let Some(tv) = tv {
            input = input.with_vegetation(tv);
        }
        let out = correct_analytic(&input, DEFAULT_MIN_VISIBILITY)?;
        println!(
            "{label:<15} RMSE {:.2} °C (T_v {:.1} °C; {} low-confidence, {} clamped pixels)",
            rmse(&out.raster, &flight.truth, full)?.rmse,
            input.vegetation_reference_c(),
            out.count(PixelFlag::LowConfidence),
            out.count(PixelFlag::Clamped)
        );
    }
    Ok(())
}
