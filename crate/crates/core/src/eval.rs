//! Error metrics, detection scoring, and the parameter-sweep harness.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aos::{Capture, SaGrid, WindowPlacement};
use crate::correction::{correct_analytic, estimate_vegetation, CorrectionInput, DEFAULT_MIN_VISIBILITY};
use crate::detect::{detect_hotspots, morphology_iou};
use crate::error::{Error, Result};
use crate::forest::ForestParams;
use crate::raster::{RegimeMask, TemperatureRaster};
use crate::sim::{simulate_flight, Flight, FlightConfig, FrameSet};
use crate::surface::HotspotSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorStats {
    pub mse: f64,
    pub rmse: f64,
    pub count: usize,
}

/// Error of `pred` against `truth` over pixels valid in both, optionally
/// restricted to truth temperatures inside `regime`.
pub fn rmse(pred: &TemperatureRaster, truth: &TemperatureRaster, regime: Option<RegimeMask>) -> Result<ErrorStats> {
    if !pred.same_dims(truth) {
        return Err(Error::param(format!(
            "prediction {:?} and truth {:?} differ in size",
            pred.dims(),
            truth.dims()
        )));
    }
    let (sum, count) = pred
        .data()
        .iter()
        .zip(truth.data())
        .filter(|(p, t)| !p.is_nan() && !t.is_nan() && regime.is_none_or(|m| m.contains(**t)))
        .fold((0f64, 0usize), |(s, n), (&p, &t)| {
            let d = p as f64 - t as f64;
            (s + d * d, n + 1)
        });
    if count == 0 {
        return Err(Error::EmptySelection("no pixels to score".into()));
    }
    let mse = sum / count as f64;
    Ok(ErrorStats {
        mse,
        rmse: mse.sqrt(),
        count,
    })
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman_rho(xs: &[f64], ys: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0 + 1.0;
            for k in i..=j {
                r[idx[k]] = avg;
            }
            i = j + 1;
        }
        r
    }
    assert_eq!(xs.len(), ys.len());
    let (rx, ry) = (ranks(xs), ranks(ys));
    let n = xs.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

/// How well the hotspots of `truth` are found in `pred`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionScore {
    pub truth_hotspots: usize,
    pub detected: usize,
    /// Best IoU per truth hotspot against any predicted region (0 when missed).
    pub ious: Vec<f64>,
}

impl DetectionScore {
    pub fn recall(&self) -> f64 {
        if self.truth_hotspots == 0 {
            return 0.0;
        }
        self.detected as f64 / self.truth_hotspots as f64
    }
}

/// IoU a predicted region needs to count as a match (the usual object-detection convention).
pub const DEFAULT_MATCH_IOU: f64 = 0.5;

/// Matches thresholded regions of `pred` against those of `truth`. Regions
/// smaller than `min_area_px` are discarded on both sides. A truth hotspot
/// counts as detected when some predicted region reaches `min_iou` with it.
pub fn score_detection(
    pred: &TemperatureRaster,
    truth: &TemperatureRaster,
    threshold_c: f32,
    min_area_px: usize,
    min_iou: f64,
) -> DetectionScore {
    let keep = |r: &TemperatureRaster| -> Vec<_> {
        detect_hotspots(r, threshold_c)
            .into_iter()
            .filter(|h| h.area_px >= min_area_px)
            .collect()
    };
    let truths = keep(truth);
    let preds = keep(pred);
    let mut detected = 0;
    let mut ious = Vec::with_capacity(truths.len());
    for t in &truths {
        let best = preds
            .iter()
            .map(|p| morphology_iou(&p.pixels, &t.pixels))
            .fold(0.0f64, f64::max);
        if best >= min_iou && best > 0.0 {
            detected += 1;
        }
        ious.push(best);
    }
    DetectionScore {
        truth_hotspots: truths.len(),
        detected,
        ious,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Single,
    Integral,
    Corrected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SaType {
    #[serde(rename = "none")]
    None,
    #[serde(rename = "2d")]
    TwoD,
    /// Horizontal strip through the aperture center.
    #[serde(rename = "1d-row")]
    OneDRow,
    /// Vertical strip through the aperture center.
    #[serde(rename = "1d-col")]
    OneDCol,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Full,
    Fire,
}

impl Regime {
    pub fn mask(&self) -> RegimeMask {
        match self {
            Regime::Full => RegimeMask::FULL,
            Regime::Fire => RegimeMask::FIRE,
        }
    }
}

/// One scored output; serialized as one CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub density_tpha: f64,
    pub ambient_c: f32,
    pub sun_abs_c: f32,
    pub solar_deg: f32,
    pub sa_type: SaType,
    pub method: Method,
    pub regime: Regime,
    pub mse: f64,
    pub rmse: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub densities_tpha: Vec<f64>,
    pub ambients_c: Vec<f32>,
    /// Fixed values to sweep; empty draws one uniformly from `[0, 15]` per seed.
    pub sun_abs_c: Vec<f32>,
    /// Fixed values to sweep; empty draws one uniformly from `[-90, 90]` per seed.
    pub solar_deg: Vec<f32>,
    pub seeds: Vec<u64>,
    pub image_size: u32,
    /// Side of the square aperture; 11 by default, 7 for a fast run.
    pub aperture: u32,
    pub spacing_m: f64,
    pub altitude_m: f64,
    pub sa_types: Vec<SaType>,
    pub methods: Vec<Method>,
    /// Hotspots per scene, inclusive range.
    pub hotspots: [u32; 2],
    pub t_max_target_c: f32,
    pub supersample: u32,
    pub min_visibility: f32,
    /// Measure the canopy reference temperature from fully occluded pixels
    /// instead of assuming ambient plus half the sun absorption.
    pub estimate_vegetation: bool,
    pub forest: ForestParams,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            densities_tpha: vec![585.0],
            ambients_c: vec![15.0],
            sun_abs_c: Vec::new(),
            solar_deg: Vec::new(),
            seeds: (0..20).collect(),
            image_size: 256,
            aperture: 11,
            spacing_m: 2.0,
            altitude_m: 35.0,
            sa_types: vec![SaType::TwoD, SaType::OneDCol],
            methods: vec![Method::Single, Method::Integral, Method::Corrected],
            hotspots: [1, 3],
            t_max_target_c: 300.0,
            supersample: 1,
            min_visibility: DEFAULT_MIN_VISIBILITY,
            estimate_vegetation: true,
            forest: ForestParams::default(),
        }
    }
}

impl SweepConfig {
    /// Density sweep from 220 to 950 t/ha in steps of 70 (plus 950).
    pub fn density_sweep() -> Self {
        let mut d: Vec<f64> = (0..11).map(|k| 220.0 + 70.0 * k as f64).collect();
        d.push(950.0);
        Self {
            densities_tpha: d,
            ..Self::default()
        }
    }

    pub fn fast(mut self) -> Self {
        self.aperture = 7;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.densities_tpha.is_empty() || self.ambients_c.is_empty() || self.seeds.is_empty() {
            return Err(Error::param("sweep needs densities, ambients, and seeds"));
        }
        if self.aperture == 0 || self.image_size == 0 {
            return Err(Error::param("aperture and image size must be positive"));
        }
        if self.hotspots[0] > self.hotspots[1] {
            return Err(Error::param("hotspot range must be ordered"));
        }
        if self.methods.is_empty() {
            return Err(Error::param("sweep needs at least one method"));
        }
        Ok(())
    }

    fn needs_aperture(&self) -> bool {
        self.methods.iter().any(|m| *m != Method::Single)
    }

    /// Flight configuration for one sweep cell and seed.
    pub fn flight(&self, density: f64, ambient: f32, sun: Option<f32>, solar: Option<f32>, seed: u64) -> FlightConfig {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x05EE_D0FF_1E1D);
        let sun = sun.unwrap_or_else(|| rng.gen_range(0..=15) as f32);
        let solar = solar.unwrap_or_else(|| rng.gen_range(-90.0f32..=90.0));
        let footprint = 2.0 * self.altitude_m * (11.0 / 35.0);
        let reach = 0.4 * footprint;
        let k = rng.gen_range(self.hotspots[0]..=self.hotspots[1]);
        let hotspots = (0..k)
            .map(|_| HotspotSpec {
                center_m: [rng.gen_range(-reach..reach), rng.gen_range(-reach..reach)],
                radius_m: rng.gen_range(0.8..2.0),
                peak_c: rng.gen_range(60.0f32..95.0),
                falloff: 2.0,
            })
            .collect();
        FlightConfig {
            seed,
            ambient_c: ambient,
            sun_absorption_c: sun,
            solar_angle_deg: solar,
            density_tpha: density,
            image_size: self.image_size,
            grid: SaGrid {
                n: self.aperture,
                m: self.aperture,
                spacing_m: self.spacing_m,
                altitude_agl_m: self.altitude_m,
            },
            hotspots,
            t_max_target_c: self.t_max_target_c,
            supersample: self.supersample,
            forest: self.forest.clone(),
            ..FlightConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepFailure {
    pub density_tpha: f64,
    pub ambient_c: f32,
    pub seed: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SweepReport {
    pub records: Vec<EvaluationRecord>,
    pub failures: Vec<SweepFailure>,
}

/// Integral and aggregated visibility of a strip or grid aperture through
/// the capture center.
pub fn aperture_integral(
    capture: &Capture,
    grid: &SaGrid,
    sa: SaType,
) -> Result<(TemperatureRaster, Option<crate::forest::VisibilityMask>)> {
    let c = grid.center_index();
    let (sub, window) = match sa {
        SaType::TwoD => (capture.clone(), *grid),
        SaType::OneDRow => (capture.row(c[1]), SaGrid { m: 1, ..*grid }),
        SaType::OneDCol => (capture.col(c[0]), SaGrid { n: 1, ..*grid }),
        SaType::None => return Err(Error::param("single images have no aperture")),
    };
    let wc = window.center_index();
    let place = WindowPlacement {
        origin: [0, 0],
        center: wc,
    };
    let integral = sub.integrate_window(&window, &place, 0.0)?;
    let mask = sub.integrate_window_mask(&window, &place, 0.0)?;
    Ok((integral.sigma, mask))
}

/// Canopy temperature seen across all rendered frames of a flight.
pub fn flight_vegetation_c(flight: &Flight) -> Result<f32> {
    let frames: Vec<_> = flight
        .capture
        .frames
        .iter()
        .filter_map(|f| f.mask.as_ref().map(|m| (&f.image, m)))
        .collect();
    match estimate_vegetation(&frames) {
        Ok(tv) => Ok(tv),
        // nothing occluded anywhere: the reference temperature never matters
        Err(Error::EmptySelection(_)) => Ok(flight.config.env().mean_vegetation_c()),
        Err(e) => Err(e),
    }
}

/// Scores one flight: the central single image, then integral and corrected
/// results for each requested aperture type.
pub fn evaluate_flight(flight: &Flight, sweep: &SweepConfig) -> Result<Vec<EvaluationRecord>> {
    let cfg = &flight.config;
    let mut outputs: Vec<(SaType, Method, TemperatureRaster)> = Vec::new();
    if sweep.methods.contains(&Method::Single) {
        outputs.push((SaType::None, Method::Single, flight.center_frame().image.clone()));
    }
    if sweep.needs_aperture() {
        let vegetation_c = if sweep.estimate_vegetation {
            Some(flight_vegetation_c(flight)?)
        } else {
            None
        };
        for &sa in sweep.sa_types.iter().filter(|s| **s != SaType::None) {
            let (sigma, f) = aperture_integral(&flight.capture, &cfg.grid, sa)?;
            if sweep.methods.contains(&Method::Corrected) {
                let f = f.ok_or_else(|| Error::param("corrected method needs visibility masks"))?;
                let input = CorrectionInput::new(&sigma, cfg.ambient_c)
                    .with_visibility(&f)
                    .with_sun_absorption(cfg.sun_absorption_c);
                let input = match vegetation_c {
                    Some(tv) => input.with_vegetation(tv),
                    None => input,
                };
                let corrected = correct_analytic(&input, sweep.min_visibility)?;
                outputs.push((sa, Method::Corrected, corrected.raster));
            }
            if sweep.methods.contains(&Method::Integral) {
                outputs.push((sa, Method::Integral, sigma));
            }
        }
    }
    let mut records = Vec::new();
    for (sa, method, pred) in &outputs {
        for regime in [Regime::Full, Regime::Fire] {
            let stats = match rmse(pred, &flight.truth, Some(regime.mask())) {
                Ok(s) => s,
                // a scene without fire pixels has nothing to score in the fire regime
                Err(Error::EmptySelection(_)) => continue,
                Err(e) => return Err(e),
            };
            records.push(EvaluationRecord {
                density_tpha: cfg.density_tpha,
                ambient_c: cfg.ambient_c,
                sun_abs_c: cfg.sun_absorption_c,
                solar_deg: cfg.solar_angle_deg,
                sa_type: *sa,
                method: *method,
                regime,
                mse: stats.mse,
                rmse: stats.rmse,
                seed: cfg.seed,
            });
        }
    }
    records.sort_by_key(|r| (r.method as u8, r.sa_type as u8, r.regime as u8));
    Ok(records)
}

/// Runs every (density, ambient, sun, solar, seed) cell. A failing cell is
/// logged and reported; the rest of the sweep continues.
pub fn run_sweep(sweep: &SweepConfig) -> Result<SweepReport> {
    sweep.validate()?;
    let suns: Vec<Option<f32>> = if sweep.sun_abs_c.is_empty() {
        vec![None]
    } else {
        sweep.sun_abs_c.iter().map(|&v| Some(v)).collect()
    };
    let solars: Vec<Option<f32>> = if sweep.solar_deg.is_empty() {
        vec![None]
    } else {
        sweep.solar_deg.iter().map(|&v| Some(v)).collect()
    };
    let mut cells = Vec::new();
    for &d in &sweep.densities_tpha {
        for &a in &sweep.ambients_c {
            for &s in &suns {
                for &z in &solars {
                    for &seed in &sweep.seeds {
                        cells.push(sweep.flight(d, a, s, z, seed));
                    }
                }
            }
        }
    }
    let frames = if !sweep.needs_aperture() {
        FrameSet::CenterOnly
    } else if sweep.sa_types.contains(&SaType::TwoD) {
        FrameSet::All
    } else {
        FrameSet::CenterCross
    };
    let results: Vec<std::result::Result<Vec<EvaluationRecord>, SweepFailure>> = cells
        .par_iter()
        .map(|cfg| {
            simulate_flight(cfg, frames)
                .and_then(|flight| evaluate_flight(&flight, sweep))
                .map_err(|e| {
                    log::error!(
                        "sweep cell density={} ambient={} seed={} failed: {e}",
                        cfg.density_tpha,
                        cfg.ambient_c,
                        cfg.seed
                    );
                    SweepFailure {
                        density_tpha: cfg.density_tpha,
                        ambient_c: cfg.ambient_c,
                        seed: cfg.seed,
                        message: e.to_string(),
                    }
                })
        })
        .collect();
    let mut report = SweepReport::default();
    for r in results {
        match r {
            Ok(records) => report.records.extend(records),
            Err(f) => report.failures.push(f),
        }
    }
    Ok(report)
}

pub fn write_csv<W: Write>(records: &[EvaluationRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

pub fn write_csv_file(records: &[EvaluationRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(records, std::io::BufWriter::new(file))
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<EvaluationRecord>> {
    let mut r = csv::Reader::from_path(path.as_ref())?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Mean RMSE over records matching a predicate.
pub fn mean_rmse<'a>(records: impl IntoIterator<Item = &'a EvaluationRecord>, pred: impl Fn(&EvaluationRecord) -> bool) -> Option<f64> {
    let (s, n) = records
        .into_iter()
        .filter(|r| pred(r))
        .fold((0.0, 0usize), |(s, n), r| (s + r.rmse, n + 1));
    (n > 0).then(|| s / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(data: Vec<f32>) -> TemperatureRaster {
        TemperatureRaster::new(data.len() as u32, 1, 15.0, 1.0, data).unwrap()
    }

    #[test]
    fn rmse_cases() {
        let a = r(vec![1.0, 2.0]);
        assert_eq!(rmse(&a, &a, None).unwrap().rmse, 0.0);
        let s = rmse(&r(vec![13.0, 24.0]), &r(vec![10.0, 20.0]), None).unwrap();
        assert!((s.mse - 12.5).abs() < 1e-12);
        assert!((s.rmse - 3.535_533_9).abs() < 1e-6);
        let fire = rmse(&r(vec![0.0, 70.0]), &r(vec![20.0, 60.0]), Some(RegimeMask::FIRE)).unwrap();
        assert_eq!((fire.count, fire.mse), (1, 100.0));
        assert!(matches!(
            rmse(&r(vec![1.0]), &r(vec![1.0]), Some(RegimeMask::FIRE)),
            Err(Error::EmptySelection(_))
        ));
        assert!(rmse(&r(vec![1.0]), &r(vec![1.0, 2.0]), None).is_err());
    }

    #[test]
    fn spearman_basics() {
        assert!((spearman_rho(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]) - 1.0).abs() < 1e-12);
        assert!((spearman_rho(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
        // ties share the average rank
        let rho = spearman_rho(&[1.0, 1.0, 2.0, 2.0], &[1.0, 2.0, 3.0, 4.0]);
        assert!((rho - 0.894_427_19).abs() < 1e-6);
    }

    #[test]
    fn detection_scoring() {
        let mut truth = vec![20.0f32; 100];
        let mut pred = vec![20.0f32; 100];
        for i in [11, 12, 21, 22] {
            truth[i] = 80.0;
        }
        for i in [12, 22, 77] {
            pred[i] = 80.0;
        }
        let t = TemperatureRaster::new(10, 10, 15.0, 0.1, truth).unwrap();
        let p = TemperatureRaster::new(10, 10, 15.0, 0.1, pred).unwrap();
        let s = score_detection(&p, &t, 50.0, 1, DEFAULT_MATCH_IOU);
        assert_eq!((s.truth_hotspots, s.detected), (1, 1));
        assert!((s.ious[0] - 0.5).abs() < 1e-12);
        assert_eq!(score_detection(&p, &t, 50.0, 1, 0.6).detected, 0);
        let strict = score_detection(&p, &t, 50.0, 3, DEFAULT_MATCH_IOU);
        assert_eq!(strict.detected, 0);
        assert_eq!(strict.recall(), 0.0);
    }

    #[test]
    fn csv_header_is_frozen() {
        let rec = EvaluationRecord {
            density_tpha: 585.0,
            ambient_c: 15.0,
            sun_abs_c: 7.0,
            solar_deg: -30.5,
            sa_type: SaType::TwoD,
            method: Method::Corrected,
            regime: Regime::Fire,
            mse: 4.0,
            rmse: 2.0,
            seed: 3,
        };
        let mut buf = Vec::new();
        write_csv(&[rec], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "density_tpha,ambient_c,sun_abs_c,solar_deg,sa_type,method,regime,mse,rmse,seed\n\
             585.0,15.0,7.0,-30.5,2d,corrected,fire,4.0,2.0,3\n"
        );
    }
}
