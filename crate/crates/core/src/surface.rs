//! Occlusion-free ground-truth surface temperatures and the ambient/fire
//! temperature augmentation applied to them.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::TemperatureRaster;

/// Ambient temperature of the reference surface data.
pub const REFERENCE_AMBIENT_C: f32 = 9.0;
/// Highest fire temperature in the reference surface data.
pub const REFERENCE_MAX_FIRE_C: f32 = 98.0;
/// Forest-floor biomass never exceeds ambient by more than this through solar heating.
pub const SOLAR_HEATING_LIMIT_C: f32 = 15.0;
/// Freezing point, the lower non-fire bound.
pub const FREEZING_C: f32 = 0.0;
pub const DEFAULT_ALPHA: f32 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentationParams {
    pub t_lower_c: f32,
    pub t_upper_c: f32,
    pub alpha: f32,
    pub delta_t_c: f32,
    pub t_max_c: f32,
    pub t_max_target_c: f32,
}

impl AugmentationParams {
    /// Parameters that move a field recorded at `source_ambient_c` to
    /// `target_ambient_c` and rescale fire so `t_max_c` lands on `t_max_target_c`.
    pub fn for_shift(
        source_ambient_c: f32,
        target_ambient_c: f32,
        t_max_c: f32,
        t_max_target_c: f32,
    ) -> Result<Self> {
        let p = Self {
            t_lower_c: FREEZING_C,
            t_upper_c: source_ambient_c + SOLAR_HEATING_LIMIT_C,
            alpha: DEFAULT_ALPHA,
            delta_t_c: target_ambient_c - source_ambient_c,
            t_max_c,
            t_max_target_c,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.t_lower_c,
            self.t_upper_c,
            self.alpha,
            self.delta_t_c,
            self.t_max_c,
            self.t_max_target_c,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::param("augmentation parameters must be finite"));
        }
        if !(self.t_lower_c < self.t_upper_c) {
            return Err(Error::param("t_lower_c must be below t_upper_c"));
        }
        if !(self.t_max_c > self.t_upper_c && self.t_max_target_c > self.t_upper_c) {
            return Err(Error::param("fire maxima must exceed t_upper_c"));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::param("alpha must be positive"));
        }
        Ok(())
    }

    /// Ratio mapping `(T_upper, T_max]` onto `(T_upper, T'_max]`.
    pub fn fire_scale(&self) -> f64 {
        (self.t_max_target_c as f64 - self.t_upper_c as f64)
            / (self.t_max_c as f64 - self.t_upper_c as f64)
    }
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Smooth non-fire weight: near 1 inside `(T_lower, T_upper)`, near 0 outside.
pub fn nonfire_weight(t: f64, p: &AugmentationParams) -> f64 {
    let a = p.alpha as f64;
    sigmoid(a * (t - p.t_lower_c as f64)) - sigmoid(a * (t - p.t_upper_c as f64))
}

/// Ambient shift of a non-fire temperature, faded out smoothly at both bounds.
pub fn augment_nonfire(t: f32, p: &AugmentationParams) -> f32 {
    let t = t as f64;
    (t + nonfire_weight(t, p) * p.delta_t_c as f64) as f32
}

/// Linear rescaling of a fire temperature anchored at `T_upper`.
pub fn augment_fire(t: f32, p: &AugmentationParams) -> Result<f32> {
    if !(t > p.t_upper_c) {
        return Err(Error::Domain(format!(
            "{t} °C is not above T_upper = {} °C",
            p.t_upper_c
        )));
    }
    let upper = p.t_upper_c as f64;
    Ok((upper + p.fire_scale() * (t as f64 - upper)) as f32)
}

fn augment_pixel(t: f32, p: &AugmentationParams) -> f32 {
    if t > p.t_upper_c {
        let upper = p.t_upper_c as f64;
        (upper + p.fire_scale() * (t as f64 - upper)) as f32
    } else {
        augment_nonfire(t, p)
    }
}

/// Augments every valid pixel; the result carries ambient `old + ΔT`.
pub fn augment_raster(r: &TemperatureRaster, p: &AugmentationParams) -> Result<TemperatureRaster> {
    p.validate()?;
    let data: Vec<f32> = r
        .data()
        .par_iter()
        .map(|&t| if t.is_nan() { t } else { augment_pixel(t, p) })
        .collect();
    TemperatureRaster::new(
        r.width(),
        r.height(),
        r.ambient_c() + p.delta_t_c,
        r.ground_res_m(),
        data,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HotspotSpec {
    /// Ground position in meters (x east, y north) in the raster's frame.
    pub center_m: [f64; 2],
    pub radius_m: f64,
    pub peak_c: f32,
    /// Exponent of the `(1 - ρ²)^falloff` radial profile.
    #[serde(default = "default_falloff")]
    pub falloff: f64,
}

fn default_falloff() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurfaceParams {
    pub seed: u64,
    pub ambient_c: f32,
    /// Square raster side in pixels.
    pub size: u32,
    pub ground_res_m: f32,
    #[serde(default)]
    pub hotspots: Vec<HotspotSpec>,
}

/// Largest background wavelength of the value noise, meters.
const NOISE_BASE_WAVELENGTH_M: f64 = 12.0;
const NOISE_OCTAVES: u32 = 5;
/// Kernel gain; values above 1 give every hotspot a flat core at its peak.
const HOTSPOT_CORE_GAIN: f64 = 1.25;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn lattice(seed: u64, octave: u32, ix: i64, iy: i64) -> f64 {
    let h = splitmix64(
        seed ^ splitmix64(octave as u64 ^ splitmix64(ix as u64 ^ splitmix64(iy as u64).rotate_left(17))),
    );
    (h >> 11) as f64 / (1u64 << 53) as f64
}

#[inline]
fn fade(t: f64) -> f64 {
    t * t * t * (t * (t * 6.0 - 15.0) + 10.0)
}

/// Multi-octave value noise in `[0, 1]` at a ground position. Pure function of
/// `(seed, x, y)`, so any evaluation order gives the same field.
pub fn value_noise(seed: u64, x: f64, y: f64) -> f64 {
    let mut sum = 0.0;
    let mut norm = 0.0;
    let mut amp = 1.0;
    let mut wavelength = NOISE_BASE_WAVELENGTH_M;
    for octave in 0..NOISE_OCTAVES {
        let u = x / wavelength;
        let v = y / wavelength;
        let (x0, y0) = (u.floor(), v.floor());
        let (fx, fy) = (fade(u - x0), fade(v - y0));
        let (ix, iy) = (x0 as i64, y0 as i64);
        let a = lattice(seed, octave, ix, iy);
        let b = lattice(seed, octave, ix + 1, iy);
        let c = lattice(seed, octave, ix, iy + 1);
        let d = lattice(seed, octave, ix + 1, iy + 1);
        let top = a + (b - a) * fx;
        let bottom = c + (d - c) * fx;
        sum += amp * (top + (bottom - top) * fy);
        norm += amp;
        amp *= 0.5;
        wavelength *= 0.5;
    }
    sum / norm
}

/// Kernel weight in `[0, 1]` for a ground point relative to a hotspot.
fn hotspot_weight(h: &HotspotSpec, gx: f64, gy: f64) -> f64 {
    let dx = gx - h.center_m[0];
    let dy = gy - h.center_m[1];
    let rho2 = (dx * dx + dy * dy) / (h.radius_m * h.radius_m);
    if rho2 >= 1.0 {
        return 0.0;
    }
    (HOTSPOT_CORE_GAIN * (1.0 - rho2).powf(h.falloff)).min(1.0)
}

/// Synthesizes a surface-temperature field: smooth background texture in
/// `[max(ambient - 4, 0), ambient + 15]` with radial hotspots on top.
pub fn gen_surface_field(params: &SurfaceParams) -> Result<TemperatureRaster> {
    let SurfaceParams {
        seed,
        ambient_c,
        size,
        ground_res_m,
        ref hotspots,
    } = *params;
    if size == 0 {
        return Err(Error::param("surface size must be positive"));
    }
    if !(ground_res_m.is_finite() && ground_res_m > 0.0) {
        return Err(Error::param("surface ground resolution must be positive"));
    }
    if !ambient_c.is_finite() {
        return Err(Error::param("ambient temperature must be finite"));
    }
    let extent = size as f64 * ground_res_m as f64;
    let t_upper = ambient_c + SOLAR_HEATING_LIMIT_C;
    for (i, h) in hotspots.iter().enumerate() {
        let [cx, cy] = h.center_m;
        if !(cx >= 0.0 && cx <= extent && cy >= 0.0 && cy <= extent) {
            return Err(Error::param(format!(
                "hotspot {i} at ({cx}, {cy}) lies outside the {extent} m raster"
            )));
        }
        if !(h.radius_m > 0.0) || !(h.falloff > 0.0) {
            return Err(Error::param(format!("hotspot {i} needs positive radius and falloff")));
        }
        if !(h.peak_c > t_upper) || !h.peak_c.is_finite() {
            return Err(Error::param(format!(
                "hotspot {i} peak {} °C must exceed {t_upper} °C",
                h.peak_c
            )));
        }
    }

    let lo = (ambient_c - 4.0).max(FREEZING_C) as f64;
    let hi = t_upper as f64;
    let n = size as usize;
    let res = ground_res_m as f64;
    let mut data = vec![0f32; n * n];
    data.par_chunks_mut(n).enumerate().for_each(|(row, out)| {
        let gy = (n as f64 - row as f64 - 0.5) * res;
        for (col, px) in out.iter_mut().enumerate() {
            let gx = (col as f64 + 0.5) * res;
            let bg = lo + (hi - lo) * value_noise(seed, gx, gy);
            let mut t = bg;
            for h in hotspots {
                let w = hotspot_weight(h, gx, gy);
                if w > 0.0 {
                    t = t.max(bg + (h.peak_c as f64 - bg) * w);
                }
            }
            *px = t as f32;
        }
    });
    TemperatureRaster::new(size, size, ambient_c, ground_res_m, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reference_params(delta: f32) -> AugmentationParams {
        AugmentationParams {
            t_lower_c: 0.0,
            t_upper_c: 24.0,
            alpha: 0.5,
            delta_t_c: delta,
            t_max_c: 98.0,
            t_max_target_c: 300.0,
        }
    }

    #[test]
    fn nonfire_hand_values() {
        let p = reference_params(10.0);
        assert!((augment_nonfire(12.0, &p) - 21.9505).abs() < 1e-4);
        assert!((augment_nonfire(0.0, &p) - 4.99994).abs() < 1e-4);
        let far = augment_nonfire(-50.0, &p);
        assert!((far + 50.0).abs() < 2e-5);
    }

    #[test]
    fn fire_hand_values() {
        let p = reference_params(0.0);
        assert!((augment_fire(98.0, &p).unwrap() - 300.0).abs() < 1e-3);
        assert!((augment_fire(50.0, &p).unwrap() - 120.973).abs() < 1e-3);
        let eps = 1e-3f32;
        let near = augment_fire(24.0 + eps, &p).unwrap();
        assert!((near - (24.0 + (276.0 / 74.0) * eps)).abs() < 1e-4);
        assert!(matches!(augment_fire(24.0, &p), Err(Error::Domain(_))));
    }

    #[test]
    fn constant_field_shift() {
        let r = TemperatureRaster::filled(4, 4, 9.0, 9.0, 1.0).unwrap();
        let out = augment_raster(&r, &reference_params(6.0)).unwrap();
        assert_eq!(out.ambient_c(), 15.0);
        for &v in out.data() {
            assert!((v - 14.93).abs() < 0.005, "{v}");
        }
    }

    #[test]
    fn identity_parameters() {
        let mut p = reference_params(0.0);
        p.t_max_target_c = p.t_max_c;
        let r = TemperatureRaster::new(4, 1, 9.0, 1.0, vec![3.0, 17.5, 53.0, f32::NAN]).unwrap();
        let out = augment_raster(&r, &p).unwrap();
        for (a, b) in r.data().iter().zip(out.data()) {
            if a.is_nan() {
                assert!(b.is_nan());
            } else {
                assert!((a - b).abs() <= f32::EPSILON * a.abs());
            }
        }
    }

    #[test]
    fn fire_pixel_survives_ambient_shifts() {
        for target in [0.0f32, 10.0, 20.0, 30.0] {
            let p = AugmentationParams::for_shift(9.0, target, 98.0, 98.0).unwrap();
            let r = TemperatureRaster::new(2, 1, 9.0, 1.0, vec![9.0, 53.0]).unwrap();
            let out = augment_raster(&r, &p).unwrap();
            assert!((out.get(1, 0) - 53.0).abs() < 1e-4);
        }
    }

    #[test]
    fn params_validation() {
        let mut p = reference_params(0.0);
        p.alpha = 0.0;
        assert!(p.validate().is_err());
        let mut p = reference_params(0.0);
        p.t_max_c = 20.0;
        assert!(p.validate().is_err());
    }

    fn surface(hotspots: Vec<HotspotSpec>) -> SurfaceParams {
        SurfaceParams {
            seed: 7,
            ambient_c: 9.0,
            size: 96,
            ground_res_m: 0.1,
            hotspots,
        }
    }

    #[test]
    fn background_stays_below_upper_bound() {
        let r = gen_surface_field(&surface(vec![])).unwrap();
        let s = crate::raster::raster_stats(&r, None).unwrap();
        assert!(s.max <= 24.0 && s.min >= 5.0, "{s:?}");
    }

    #[test]
    fn hotspot_reaches_peak() {
        let h = HotspotSpec {
            center_m: [4.83, 5.11],
            radius_m: 1.2,
            peak_c: 98.0,
            falloff: 2.0,
        };
        let r = gen_surface_field(&surface(vec![h])).unwrap();
        let s = crate::raster::raster_stats(&r, None).unwrap();
        assert!((s.max - 98.0).abs() <= 0.5);
    }

    #[test]
    fn deterministic_per_seed() {
        let a = gen_surface_field(&surface(vec![])).unwrap();
        let b = gen_surface_field(&surface(vec![])).unwrap();
        assert_eq!(crate::raster::encode_tgr(&a), crate::raster::encode_tgr(&b));
        let mut other = surface(vec![]);
        other.seed = 8;
        assert_ne!(a, gen_surface_field(&other).unwrap());
    }

    #[test]
    fn hotspot_outside_extent_rejected() {
        let h = HotspotSpec {
            center_m: [50.0, 1.0],
            radius_m: 1.0,
            peak_c: 80.0,
            falloff: 2.0,
        };
        assert!(matches!(gen_surface_field(&surface(vec![h])), Err(Error::Param(_))));
    }
}
