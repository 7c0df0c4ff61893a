//! Surface generation, rendering, integration and correction chained together.

use aos_thermal::correction::{correct_analytic, CorrectionInput};
use aos_thermal::eval::{aperture_integral, flight_vegetation_c, run_sweep, Method, Regime, SaType, SweepConfig};
use aos_thermal::raster::{RegimeMask, TemperatureRaster};
use aos_thermal::rmse;
use aos_thermal::sim::{simulate_flight, FrameSet};

#[test]
fn tree_free_flight_integrates_to_the_truth() {
    let sweep = SweepConfig::default();
    let cfg = sweep.flight(0.0, 15.0, None, None, 11);
    assert!(!cfg.hotspots.is_empty());
    let flight = simulate_flight(&cfg, FrameSet::All).unwrap();
    assert_eq!(flight.capture.frames.len(), 121);
    let single = &flight.center_frame().image;
    assert!(rmse(single, &flight.truth, None).unwrap().rmse < 1e-4);
    for sa in [SaType::TwoD, SaType::OneDRow, SaType::OneDCol] {
        let (sigma, f) = aperture_integral(&flight.capture, &cfg.grid, sa).unwrap();
        let e = rmse(&sigma, &flight.truth, Some(RegimeMask::FULL)).unwrap();
        assert_eq!(e.count, 256 * 256, "{sa:?} leaves no pixel uncovered");
        assert!(e.rmse <= 0.2, "{sa:?}: {}", e.rmse);
        let f = f.unwrap();
        assert!(f.raster().data().iter().all(|&v| v == 1.0), "{sa:?}");
    }
}

#[test]
fn tree_free_sweep_is_resampling_limited() {
    let sweep = SweepConfig {
        densities_tpha: vec![0.0],
        seeds: vec![3],
        ..SweepConfig::default()
    };
    let report = run_sweep(&sweep).unwrap();
    assert!(report.failures.is_empty());
    for method in [Method::Single, Method::Integral, Method::Corrected] {
        assert!(report.records.iter().any(|r| r.method == method));
    }
    for r in &report.records {
        // fire pixels sit on the steepest gradients, where bilinear resampling errs most
        let bound = match r.regime {
            Regime::Full => 0.2,
            Regime::Fire => 1.0,
        };
        assert!(r.rmse <= bound, "{r:?}");
    }
}

fn hot_fraction(r: &TemperatureRaster, pixels: &[usize]) -> f64 {
    pixels.iter().filter(|&&i| r.data()[i] >= 50.0).count() as f64 / pixels.len() as f64
}

fn mean_over(r: &TemperatureRaster, pixels: &[usize]) -> f64 {
    pixels.iter().map(|&i| r.data()[i] as f64).sum::<f64>() / pixels.len() as f64
}

#[test]
fn occluded_hotspot_emerges_in_the_integral() {
    let sweep = SweepConfig {
        image_size: 128,
        hotspots: [1, 1],
        ..SweepConfig::default()
    };
    let cfg = sweep.flight(585.0, 15.0, None, None, 3);
    let flight = simulate_flight(&cfg, FrameSet::All).unwrap();
    let fire: Vec<usize> = flight
        .truth
        .data()
        .iter()
        .enumerate()
        .filter(|(_, &t)| t >= 50.0)
        .map(|(i, _)| i)
        .collect();
    assert!(fire.len() > 50);

    let single = &flight.center_frame().image;
    let (sigma, f) = aperture_integral(&flight.capture, &cfg.grid, SaType::TwoD).unwrap();
    let f = f.unwrap();
    let tv = flight_vegetation_c(&flight).unwrap();
    let corrected = correct_analytic(
        &CorrectionInput::new(&sigma, cfg.ambient_c).with_visibility(&f).with_vegetation(tv),
        sweep.min_visibility,
    )
    .unwrap()
    .raster;

    // the canopy hides most of the hotspot from the central view
    assert!(hot_fraction(single, &fire) < 0.5);
    // the integral reveals more of its footprint, but cooled by the canopy
    assert!(hot_fraction(&sigma, &fire) > hot_fraction(single, &fire));
    assert!(mean_over(&sigma, &fire) < 0.6 * mean_over(&flight.truth, &fire));
    // unmixing the canopy contribution restores the footprint and the heat
    assert!(hot_fraction(&corrected, &fire) > hot_fraction(&sigma, &fire));
    assert!(hot_fraction(&corrected, &fire) > 0.9);
    let fire_regime = Some(Regime::Fire.mask());
    let e_sigma = rmse(&sigma, &flight.truth, fire_regime).unwrap().rmse;
    let e_corrected = rmse(&corrected, &flight.truth, fire_regime).unwrap().rmse;
    assert!(e_corrected < e_sigma, "{e_corrected} vs {e_sigma}");
}

#[test]
fn visibility_falls_with_forest_density() {
    let sweep = SweepConfig {
        image_size: 128,
        ..SweepConfig::default()
    };
    let visibility: Vec<f64> = [0.0, 220.0, 585.0, 950.0]
        .iter()
        .map(|&d| {
            let flight = simulate_flight(&sweep.flight(d, 15.0, None, None, 2), FrameSet::CenterOnly).unwrap();
            flight.center_frame().mask.as_ref().unwrap().mean().unwrap()
        })
        .collect();
    assert_eq!(visibility[0], 1.0);
    for w in visibility.windows(2) {
        assert!(w[1] < w[0], "{visibility:?}");
    }
    // the design target for the reference density: roughly a third of the ground visible
    assert!((0.2..0.6).contains(&visibility[2]), "{visibility:?}");
}

#[test]
fn full_grid_beats_a_strip() {
    let sweep = SweepConfig {
        image_size: 128,
        ..SweepConfig::default()
    };
    let cfg = sweep.flight(585.0, 15.0, None, None, 1);
    let flight = simulate_flight(&cfg, FrameSet::All).unwrap();
    let e = |sa| {
        let (sigma, _) = aperture_integral(&flight.capture, &cfg.grid, sa).unwrap();
        rmse(&sigma, &flight.truth, Some(RegimeMask::FULL)).unwrap().rmse
    };
    let single = rmse(&flight.center_frame().image, &flight.truth, Some(RegimeMask::FULL)).unwrap().rmse;
    let (two_d, row, col) = (e(SaType::TwoD), e(SaType::OneDRow), e(SaType::OneDCol));
    assert!(two_d <= row.min(col), "2D {two_d}, row {row}, col {col}");
    assert!(row.max(col) < single, "row {row}, col {col}, single {single}");
}
