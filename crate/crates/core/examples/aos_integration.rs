//! Simulates an 11 x 11 flight and compares the central single image with
//! the 2D and 1D synthetic-aperture integrals. On one scene a strip can
//! match or beat the full grid when its direction happens to see past the
//! local canopy; averaged over many scenes the grid wins.
//!
//!     cargo run --release --example aos_integration [seed]

use aos_thermal::eval::{aperture_integral, SaType};
use aos_thermal::sim::{simulate_flight, FlightConfig, FrameSet};
use aos_thermal::{rmse, HotspotSpec, RegimeMask};

fn main() -> aos_thermal::Result<()> {
    let cfg = FlightConfig {
        seed: std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3),
        density_tpha: 585.0,
        image_size: 128,
        hotspots: vec![HotspotSpec {
            center_m: [2.0, -1.0],
            radius_m: 1.8,
            peak_c: 85.0,
            falloff: 2.0,
        }],
        ..FlightConfig::default()
    };
    let flight = simulate_flight(&cfg, FrameSet::All)?;
    println!(
        "{} frames over {} trees, ground resolution {:.3} m/px",
        flight.capture.frames.len(),
        flight.scene.trees().len(),
        flight.layout.ground_res_m
    );

    let fire = RegimeMask::new(50.0, 300.0)?;
    let report = |name: &str, r: &aos_thermal::TemperatureRaster| -> aos_thermal::Result<()> {
        let full = rmse(r, &flight.truth, Some(RegimeMask::FULL))?;
        let hot = rmse(r, &flight.truth, Some(fire)).map(|e| format!("{:.2}", e.rmse)).unwrap_or("-".into());
        println!("{name:<14} RMSE full {:>6.2} °C, fire {hot:>6} °C", full.rmse);
        Ok(())
    };
    report("single image", &flight.center_frame().image)?;
    for (name, sa) in [("2D integral", SaType::TwoD), ("1D row", SaType::OneDRow), ("1D column", SaType::OneDCol)] {
        let (sigma, f) = aperture_integral(&flight.capture, &cfg.grid, sa)?;
        report(name, &sigma)?;
        if let Some(f) = f {
            println!("{:<14} mean visibility {:.2}", "", f.mean().unwrap_or(0.0));
        }
    }
    Ok(())
}
