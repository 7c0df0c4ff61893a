//! Slides a 5 x 5 aperture across an 11 x 11 capture, with and without
//! padding at the border.
//!
//!     cargo run --release --example sliding_window

use aos_thermal::sim::{simulate_flight, FlightConfig, FrameSet};
use aos_thermal::{sliding_integrate, SaGrid};

fn main() -> aos_thermal::Result<()> {
    let cfg = FlightConfig {
        seed: 2,
        image_size: 64,
        ..FlightConfig::default()
    };
    let flight = simulate_flight(&cfg, FrameSet::All)?;
    let window = SaGrid { n: 5, m: 5, ..cfg.grid };
    for pad in [false, true] {
        let integrals = sliding_integrate(&flight.capture, &window, [3, 3], pad, 0.0)?;
        println!("stride 3, padding {pad}: {} windows", integrals.len());
        for i in &integrals {
            let covered = i.counts.iter().filter(|&&c| c > 0).count();
            let max = i.counts.iter().max().copied().unwrap_or(0);
            println!(
                "  center {:?}: {:>5.1} % of pixels covered, up to {max} samples per pixel",
                i.center_index,
                100.0 * covered as f64 / i.counts.len() as f64
            );
        }
    }
    Ok(())
}
