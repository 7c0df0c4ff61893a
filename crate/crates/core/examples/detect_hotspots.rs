//! Thresholds the single image, the integral and the corrected integral of
//! an occluded scene and scores the hotspots found against the truth.
//!
//!     cargo run --release --example detect_hotspots [seed]

use aos_thermal::correction::DEFAULT_MIN_VISIBILITY;
use aos_thermal::detect::DEFAULT_THRESHOLD_C;
use aos_thermal::eval::{aperture_integral, flight_vegetation_c, score_detection, SaType, DEFAULT_MATCH_IOU};
use aos_thermal::sim::{simulate_flight, FrameSet};
use aos_thermal::{correct_analytic, detect_hotspots, CorrectionInput, SweepConfig};

fn main() -> aos_thermal::Result<()> {
    let sweep = SweepConfig {
        image_size: 128,
        hotspots: [3, 3],
        ..SweepConfig::default()
    };
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(4);
    let cfg = sweep.flight(585.0, 15.0, None, None, seed);
    let flight = simulate_flight(&cfg, FrameSet::All)?;
    let (sigma, f) = aperture_integral(&flight.capture, &cfg.grid, SaType::TwoD)?;
    let f = f.expect("simulated frames carry masks");
    let input = CorrectionInput::new(&sigma, cfg.ambient_c)
        .with_visibility(&f)
        .with_vegetation(flight_vegetation_c(&flight)?);
    let corrected = correct_analytic(&input, DEFAULT_MIN_VISIBILITY)?.raster;

    for h in detect_hotspots(&flight.truth, DEFAULT_THRESHOLD_C) {
        println!(
            "true hotspot at ({:.1}, {:.1}) m: {} px, mean {:.0} °C, max {:.0} °C",
            h.centroid_m[0], h.centroid_m[1], h.area_px, h.mean_c, h.max_c
        );
    }
    for (name, r) in [("single image", &flight.center_frame().image), ("integral", &sigma), ("corrected", &corrected)] {
        let s = score_detection(r, &flight.truth, DEFAULT_THRESHOLD_C, 1, DEFAULT_MATCH_IOU);
        let ious: Vec<String> = s.ious.iter().map(|v| format!("{v:.2}")).collect();
        println!(
            "{name:<13} {} regions, {}/{} hotspots found, IoU per hotspot [{}]",
            detect_hotspots(r, DEFAULT_THRESHOLD_C).len(),
            s.detected,
            s.truth_hotspots,
            ious.join(", ")
        );
    }
    Ok(())
}
