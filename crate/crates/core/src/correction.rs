//! Recovery of surface temperatures from integral images.
//!
//! An integral pixel mixes ground and canopy: `σ = f·T_s + (1 − f)·T_v`,
//! where `f` is the fraction of integrated rays that reached the ground. The
//! analytic backend inverts that mixture when `f` is known. The external
//! backend hands `σ` to another process through an exchange directory.

use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forest::VisibilityMask;
use crate::raster::{read_raster, write_raster, TemperatureRaster, NO_DATA};

pub const DEFAULT_MIN_VISIBILITY: f32 = 0.1;
/// Physically plausible output range, °C.
pub const PHYSICAL_RANGE_C: (f32, f32) = (-40.0, 400.0);
pub const DEFAULT_BACKEND_TIMEOUT: Duration = Duration::from_secs(60);
pub const EXCHANGE_VERSION: u32 = 1;
/// Environment variable naming the root under which exchange directories are created.
pub const EXCHANGE_ROOT_ENV: &str = "AOSFIRE_EXCHANGE_DIR";

/// Mean temperature over every valid pixel of every image.
pub fn estimate_ambient(images: &[TemperatureRaster]) -> Result<f32> {
    let (sum, count) = images
        .iter()
        .flat_map(|r| r.data().iter())
        .filter(|v| !v.is_nan())
        .fold((0f64, 0usize), |(s, n), &v| (s + v as f64, n + 1));
    if count == 0 {
        return Err(Error::EmptySelection("no valid pixels to estimate ambient from".into()));
    }
    Ok((sum / count as f64) as f32)
}

/// Mean temperature of the pixels whose visibility is zero, i.e. pixels that
/// saw only canopy. With binary per-frame masks this is the mean temperature
/// of the canopy as the camera sees it.
pub fn estimate_vegetation(frames: &[(&TemperatureRaster, &VisibilityMask)]) -> Result<f32> {
    let mut sum = 0f64;
    let mut count = 0usize;
    for (image, mask) in frames {
        if image.dims() != mask.dims() {
            return Err(Error::param(format!(
                "mask {:?} does not match image {:?}",
                mask.dims(),
                image.dims()
            )));
        }
        for (&t, &f) in image.data().iter().zip(mask.raster().data()) {
            if f == 0.0 && !t.is_nan() {
                sum += t as f64;
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::EmptySelection("no fully occluded pixels".into()));
    }
    Ok((sum / count as f64) as f32)
}

#[derive(Debug, Clone, Copy)]
pub struct CorrectionInput<'a> {
    pub sigma: &'a TemperatureRaster,
    pub ambient_c: f32,
    pub visibility: Option<&'a VisibilityMask>,
    /// Canopy reference temperature; defaults to ambient plus half the sun absorption.
    pub vegetation_c: Option<f32>,
    pub sun_absorption_c: f32,
}

impl<'a> CorrectionInput<'a> {
    pub fn new(sigma: &'a TemperatureRaster, ambient_c: f32) -> Self {
        Self {
            sigma,
            ambient_c,
            visibility: None,
            vegetation_c: None,
            sun_absorption_c: 0.0,
        }
    }

    pub fn with_visibility(mut self, f: &'a VisibilityMask) -> Self {
        self.visibility = Some(f);
        self
    }

    pub fn with_sun_absorption(mut self, sun_absorption_c: f32) -> Self {
        self.sun_absorption_c = sun_absorption_c;
        self
    }

    pub fn with_vegetation(mut self, vegetation_c: f32) -> Self {
        self.vegetation_c = Some(vegetation_c);
        self
    }

    pub fn vegetation_reference_c(&self) -> f32 {
        self.vegetation_c
            .unwrap_or(self.ambient_c + 0.5 * self.sun_absorption_c)
    }

    fn validate(&self) -> Result<()> {
        if let Some(f) = self.visibility {
            if f.dims() != self.sigma.dims() {
                return Err(Error::param(format!(
                    "visibility mask {:?} does not match integral {:?}",
                    f.dims(),
                    self.sigma.dims()
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PixelFlag {
    Ok,
    /// Visibility below the cutoff; passed through uncorrected.
    LowConfidence,
    /// Unmixed value left the physical range and was clamped.
    Clamped,
    NoData,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectedRaster {
    pub raster: TemperatureRaster,
    pub flags: Vec<PixelFlag>,
}

impl CorrectedRaster {
    pub fn count(&self, flag: PixelFlag) -> usize {
        self.flags.iter().filter(|&&f| f == flag).count()
    }
}

/// Per-pixel inversion `σ' = (σ − (1 − f)·T_v) / f` for `f ≥ min_visibility`.
pub fn correct_analytic(input: &CorrectionInput<'_>, min_visibility: f32) -> Result<CorrectedRaster> {
    input.validate()?;
    let f = input.visibility.ok_or_else(|| Error::Capability {
        backend: "analytic".into(),
        message: "needs a visibility mask".into(),
    })?;
    let tv = input.vegetation_reference_c() as f64;
    let (lo, hi) = PHYSICAL_RANGE_C;
    let (data, flags): (Vec<f32>, Vec<PixelFlag>) = input
        .sigma
        .data()
        .par_iter()
        .zip(f.raster().data().par_iter())
        .map(|(&s, &fv)| {
            if s.is_nan() || fv.is_nan() {
                return (NO_DATA, PixelFlag::NoData);
            }
            if fv < min_visibility {
                return (s, PixelFlag::LowConfidence);
            }
            let fv = fv as f64;
            let t = (s as f64 - (1.0 - fv) * tv) / fv;
            if t < lo as f64 || t > hi as f64 {
                ((t as f32).clamp(lo, hi), PixelFlag::Clamped)
            } else {
                (t as f32, PixelFlag::Ok)
            }
        })
        .unzip();
    let raster = TemperatureRaster::new(
        input.sigma.width(),
        input.sigma.height(),
        input.ambient_c,
        input.sigma.ground_res_m(),
        data,
    )?;
    Ok(CorrectedRaster { raster, flags })
}

/// Request manifest written into the exchange directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExchangeRequest {
    pub version: u32,
    pub ambient_c: f32,
    pub input: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<String>,
    pub output: String,
}

/// Command line of an external restoration backend, invoked as
/// `<program> <args...> --request <dir>/request.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendEndpoint {
    pub program: PathBuf,
    #[serde(default)]
    pub args: Vec<String>,
    #[serde(default = "default_timeout_s")]
    pub timeout_s: f64,
    /// Directory under which exchange directories are created; falls back to
    /// the `AOSFIRE_EXCHANGE_DIR` environment variable, then the system temp dir.
    #[serde(default)]
    pub exchange_root: Option<PathBuf>,
}

fn default_timeout_s() -> f64 {
    DEFAULT_BACKEND_TIMEOUT.as_secs_f64()
}

impl BackendEndpoint {
    pub fn new(program: impl Into<PathBuf>) -> Self {
        Self {
            program: program.into(),
            args: Vec::new(),
            timeout_s: default_timeout_s(),
            exchange_root: None,
        }
    }

    fn root(&self) -> PathBuf {
        self.exchange_root
            .clone()
            .or_else(|| std::env::var_os(EXCHANGE_ROOT_ENV).map(PathBuf::from))
            .unwrap_or_else(std::env::temp_dir)
    }
}

fn backend_err(message: impl Into<String>, diagnostics: impl Into<String>) -> Error {
    Error::Backend {
        message: message.into(),
        diagnostics: diagnostics.into(),
    }
}

/// Runs an external backend over the exchange protocol and reads back `σ'`.
pub fn correct_external(input: &CorrectionInput<'_>, endpoint: &BackendEndpoint) -> Result<TemperatureRaster> {
    input.validate()?;
    let root = endpoint.root();
    std::fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
    let dir = tempfile::Builder::new()
        .prefix("exchange-")
        .tempdir_in(&root)
        .map_err(|e| Error::io(&root, e))?;
    match run_exchange(input, endpoint, dir.path()) {
        Ok(r) => Ok(r),
        Err(e) => {
            // keep the directory for post-mortem inspection
            let kept = dir.keep();
            log::error!("exchange directory kept at {}", kept.display());
            Err(e)
        }
    }
}

fn run_exchange(input: &CorrectionInput<'_>, endpoint: &BackendEndpoint, dir: &Path) -> Result<TemperatureRaster> {
    let sigma = input.sigma.clone().with_ambient(input.ambient_c);
    write_raster(&sigma, dir.join("sigma.tgr"))?;
    let mask = match input.visibility {
        Some(f) => {
            write_raster(f.raster(), dir.join("f.tgr"))?;
            Some("f.tgr".to_string())
        }
        None => None,
    };
    let request = ExchangeRequest {
        version: EXCHANGE_VERSION,
        ambient_c: input.ambient_c,
        input: "sigma.tgr".into(),
        mask,
        output: "sigma_prime.tgr".into(),
    };
    let request_path = dir.join("request.json");
    std::fs::write(&request_path, serde_json::to_vec_pretty(&request)?).map_err(|e| Error::io(&request_path, e))?;

    let stdout_path = dir.join("backend.stdout");
    let stderr_path = dir.join("backend.stderr");
    let stdout = std::fs::File::create(&stdout_path).map_err(|e| Error::io(&stdout_path, e))?;
    let stderr = std::fs::File::create(&stderr_path).map_err(|e| Error::io(&stderr_path, e))?;
    let mut child = Command::new(&endpoint.program)
        .args(&endpoint.args)
        .arg("--request")
        .arg(&request_path)
        .stdin(Stdio::null())
        .stdout(stdout)
        .stderr(stderr)
        .spawn()
        .map_err(|e| backend_err(format!("cannot start {}: {e}", endpoint.program.display()), ""))?;

    let deadline = Instant::now() + Duration::from_secs_f64(endpoint.timeout_s.max(0.0));
    let status = loop {
        match child.try_wait() {
            Ok(Some(status)) => break status,
            Ok(None) if Instant::now() >= deadline => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(backend_err(
                    format!("backend timed out after {:.1} s", endpoint.timeout_s),
                    read_tail(&stderr_path),
                ));
            }
            Ok(None) => std::thread::sleep(Duration::from_millis(5)),
            Err(e) => return Err(backend_err(format!("waiting on backend failed: {e}"), "")),
        }
    };
    if !status.success() {
        return Err(backend_err(
            format!("backend exited with {status}"),
            read_tail(&stderr_path),
        ));
    }
    let out_path = dir.join(&request.output);
    if !out_path.exists() {
        return Err(backend_err("backend produced no output file", read_tail(&stderr_path)));
    }
    let out = read_raster(&out_path)
        .map_err(|e| backend_err(format!("malformed backend output: {e}"), read_tail(&stderr_path)))?;
    if out.dims() != input.sigma.dims() {
        return Err(backend_err(
            format!(
                "dimension mismatch: sent {:?}, received {:?}",
                input.sigma.dims(),
                out.dims()
            ),
            read_tail(&stderr_path),
        ));
    }
    Ok(out)
}

fn read_tail(path: &Path) -> String {
    let text = std::fs::read_to_string(path).unwrap_or_default();
    let start = text.len().saturating_sub(2000);
    text[text.char_indices().map(|(i, _)| i).find(|&i| i >= start).unwrap_or(text.len())..].to_string()
}

/// Selected correction backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CorrectionBackend {
    Analytic { min_visibility: f32 },
    External(BackendEndpoint),
}

impl Default for CorrectionBackend {
    fn default() -> Self {
        CorrectionBackend::Analytic {
            min_visibility: DEFAULT_MIN_VISIBILITY,
        }
    }
}

impl CorrectionBackend {
    pub fn identifier(&self) -> &'static str {
        match self {
            CorrectionBackend::Analytic { .. } => "analytic",
            CorrectionBackend::External(_) => "external",
        }
    }

    pub fn needs_mask(&self) -> bool {
        matches!(self, CorrectionBackend::Analytic { .. })
    }

    pub fn is_external(&self) -> bool {
        matches!(self, CorrectionBackend::External(_))
    }

    pub fn correct(&self, input: &CorrectionInput<'_>) -> Result<TemperatureRaster> {
        match self {
            CorrectionBackend::Analytic { min_visibility } => {
                correct_analytic(input, *min_visibility).map(|c| c.raster)
            }
            CorrectionBackend::External(endpoint) => correct_external(input, endpoint),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raster(data: Vec<f32>) -> TemperatureRaster {
        TemperatureRaster::new(data.len() as u32, 1, 15.0, 0.1, data).unwrap()
    }

    fn mask(data: Vec<f32>) -> VisibilityMask {
        VisibilityMask::new(raster(data)).unwrap()
    }

    #[test]
    fn ambient_estimates() {
        let a = TemperatureRaster::filled(4, 4, 13.0, 0.0, 1.0).unwrap();
        assert_eq!(estimate_ambient(&[a]).unwrap(), 13.0);
        let lo = TemperatureRaster::filled(4, 4, 10.0, 0.0, 1.0).unwrap();
        let hi = TemperatureRaster::filled(4, 4, 16.0, 0.0, 1.0).unwrap();
        assert_eq!(estimate_ambient(&[lo, hi]).unwrap(), 13.0);
        let empty = TemperatureRaster::filled(1, 1, f32::NAN, 0.0, 1.0).unwrap();
        assert!(matches!(estimate_ambient(&[empty]), Err(Error::EmptySelection(_))));
    }

    #[test]
    fn unmixing_by_hand() {
        let s = raster(vec![45.0]);
        let f = mask(vec![0.6]);
        let input = CorrectionInput::new(&s, 15.0).with_visibility(&f).with_vegetation(15.0);
        let out = correct_analytic(&input, DEFAULT_MIN_VISIBILITY).unwrap();
        assert!((out.raster.get(0, 0) - 65.0).abs() < 1e-4);
    }

    #[test]
    fn full_visibility_is_identity() {
        let s = raster(vec![3.0, 45.0, 120.0]);
        let f = mask(vec![1.0; 3]);
        let input = CorrectionInput::new(&s, 15.0).with_visibility(&f).with_sun_absorption(7.0);
        let out = correct_analytic(&input, DEFAULT_MIN_VISIBILITY).unwrap();
        assert_eq!(out.raster.data(), s.data());
    }

    #[test]
    fn low_visibility_passes_through_and_clamping_is_flagged() {
        let s = raster(vec![30.0, 390.0, f32::NAN]);
        let f = mask(vec![0.05, 0.5, 0.5]);
        let input = CorrectionInput::new(&s, 15.0).with_visibility(&f).with_vegetation(15.0);
        let out = correct_analytic(&input, DEFAULT_MIN_VISIBILITY).unwrap();
        assert_eq!(out.raster.get(0, 0), 30.0);
        assert_eq!(out.flags[0], PixelFlag::LowConfidence);
        assert_eq!(out.raster.get(1, 0), 400.0);
        assert_eq!(out.flags[1], PixelFlag::Clamped);
        assert_eq!(out.flags[2], PixelFlag::NoData);
    }

    #[test]
    fn missing_mask_is_a_capability_error() {
        let s = raster(vec![1.0]);
        let input = CorrectionInput::new(&s, 15.0);
        assert!(matches!(
            correct_analytic(&input, DEFAULT_MIN_VISIBILITY),
            Err(Error::Capability { .. })
        ));
        assert!(CorrectionBackend::default().needs_mask());
    }

    #[test]
    fn mask_shape_must_match() {
        let s = raster(vec![1.0, 2.0]);
        let f = mask(vec![1.0]);
        let input = CorrectionInput::new(&s, 15.0).with_visibility(&f);
        assert!(matches!(correct_analytic(&input, 0.1), Err(Error::Param(_))));
    }

    #[test]
    fn default_vegetation_reference() {
        let s = raster(vec![1.0]);
        let input = CorrectionInput::new(&s, 15.0).with_sun_absorption(7.0);
        assert_eq!(input.vegetation_reference_c(), 18.5);
    }
}
