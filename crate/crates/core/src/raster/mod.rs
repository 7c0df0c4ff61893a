//! Temperature rasters: the image type shared by every stage of the pipeline.
//!
//! Temperatures are `f32` degrees Celsius, stored row-major with a top-left
//! origin. A quiet NaN marks a no-data pixel; no-data pixels never enter a
//! statistic, a resampling result, or an integral.

mod tgr;

pub use tgr::{decode_tgr, encode_tgr, read_raster, write_raster, TGR_HEADER_LEN, TGR_MAGIC};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Value used for no-data pixels.
pub const NO_DATA: f32 = f32::NAN;

#[derive(Debug, Clone, PartialEq)]
pub struct TemperatureRaster {
    width: u32,
    height: u32,
    ambient_c: f32,
    ground_res_m: f32,
    data: Vec<f32>,
}

impl TemperatureRaster {
    pub fn new(
        width: u32,
        height: u32,
        ambient_c: f32,
        ground_res_m: f32,
        data: Vec<f32>,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::param(format!(
                "raster dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() as u64 != width as u64 * height as u64 {
            return Err(Error::param(format!(
                "raster data length {} does not match {width}x{height}",
                data.len()
            )));
        }
        if !ambient_c.is_finite() {
            return Err(Error::param("ambient temperature must be finite"));
        }
        if !(ground_res_m.is_finite() && ground_res_m > 0.0) {
            return Err(Error::param(format!(
                "ground resolution must be positive, got {ground_res_m}"
            )));
        }
        if let Some(i) = data.iter().position(|v| v.is_infinite()) {
            return Err(Error::param(format!("infinite temperature at index {i}")));
        }
        Ok(Self {
            width,
            height,
            ambient_c,
            ground_res_m,
            data,
        })
    }

    pub fn filled(width: u32, height: u32, value: f32, ambient_c: f32, ground_res_m: f32) -> Result<Self> {
        Self::new(
            width,
            height,
            ambient_c,
            ground_res_m,
            vec![value; width as usize * height as usize],
        )
    }

    /// Builds a raster by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(
        width: u32,
        height: u32,
        ambient_c: f32,
        ground_res_m: f32,
        mut f: impl FnMut(u32, u32) -> f32,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, ambient_c, ground_res_m, data)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn ambient_c(&self) -> f32 {
        self.ambient_c
    }

    pub fn ground_res_m(&self) -> f32 {
        self.ground_res_m
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> f32 {
        self.data[y as usize * self.width as usize + x as usize]
    }

    pub fn is_valid_at(&self, x: u32, y: u32) -> bool {
        !self.get(x, y).is_nan()
    }

    pub fn valid_count(&self) -> usize {
        self.data.iter().filter(|v| !v.is_nan()).count()
    }

    pub fn with_ambient(mut self, ambient_c: f32) -> Self {
        self.ambient_c = ambient_c;
        self
    }

    /// Applies `f` to every valid pixel; no-data stays no-data.
    pub fn map(&self, mut f: impl FnMut(f32) -> f32) -> Result<Self> {
        let data = self
            .data
            .iter()
            .map(|&v| if v.is_nan() { NO_DATA } else { f(v) })
            .collect();
        Self::new(self.width, self.height, self.ambient_c, self.ground_res_m, data)
    }

    /// Copies a `width` x `height` window whose top-left pixel is `(x0, y0)`.
    pub fn crop(&self, x0: u32, y0: u32, width: u32, height: u32) -> Result<Self> {
        if x0 as u64 + width as u64 > self.width as u64 || y0 as u64 + height as u64 > self.height as u64 {
            return Err(Error::param(format!(
                "crop {width}x{height}+{x0}+{y0} exceeds {}x{}",
                self.width, self.height
            )));
        }
        Self::from_fn(width, height, self.ambient_c, self.ground_res_m, |x, y| {
            self.get(x0 + x, y0 + y)
        })
    }

    pub fn same_dims(&self, other: &TemperatureRaster) -> bool {
        self.dims() == other.dims()
    }

    /// Ground coordinates (meters, x east, y north) of a pixel-index position.
    /// The raster's bottom-left corner sits at the ground origin.
    pub fn pixel_to_ground(&self, x: f64, y: f64) -> (f64, f64) {
        let res = self.ground_res_m as f64;
        ((x + 0.5) * res, (self.height as f64 - y - 0.5) * res)
    }

    /// Inverse of [`TemperatureRaster::pixel_to_ground`].
    pub fn ground_to_pixel(&self, gx: f64, gy: f64) -> (f64, f64) {
        let res = self.ground_res_m as f64;
        (gx / res - 0.5, self.height as f64 - gy / res - 0.5)
    }

    /// Ground extent `(width_m, height_m)` covered by the raster.
    pub fn extent_m(&self) -> (f64, f64) {
        let res = self.ground_res_m as f64;
        (self.width as f64 * res, self.height as f64 * res)
    }

    /// Bilinear sample at continuous pixel-index coordinates (pixel centers
    /// sit on integers). See [`resample_bilinear`].
    pub fn sample(&self, x: f64, y: f64) -> f32 {
        bilinear(&self.data, self.width as usize, self.height as usize, x, y)
    }
}

/// Half-open temperature interval `[lower_c, upper_c)` selecting pixels by value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeMask {
    lower_c: f32,
    upper_c: f32,
}

impl RegimeMask {
    /// Every temperature the evaluation considers, `[0, 300)`.
    pub const FULL: RegimeMask = RegimeMask {
        lower_c: 0.0,
        upper_c: 300.0,
    };
    /// Confirmed active fire, `[50, 300)`.
    pub const FIRE: RegimeMask = RegimeMask {
        lower_c: 50.0,
        upper_c: 300.0,
    };

    pub fn new(lower_c: f32, upper_c: f32) -> Result<Self> {
        if !(lower_c < upper_c) {
            return Err(Error::param(format!(
                "regime lower bound {lower_c} must be below upper bound {upper_c}"
            )));
        }
        Ok(Self { lower_c, upper_c })
    }

    pub fn lower_c(&self) -> f32 {
        self.lower_c
    }

    pub fn upper_c(&self) -> f32 {
        self.upper_c
    }

    #[inline]
    pub fn contains(&self, t: f32) -> bool {
        t >= self.lower_c && t < self.upper_c
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RasterStats {
    pub min: f32,
    pub max: f32,
    pub mean: f64,
    pub count: usize,
}

/// Statistics over valid pixels, optionally restricted to a temperature regime.
pub fn raster_stats(r: &TemperatureRaster, mask: Option<RegimeMask>) -> Result<RasterStats> {
    let mut min = f32::INFINITY;
    let mut max = f32::NEG_INFINITY;
    let mut sum = 0.0f64;
    let mut count = 0usize;
    for &v in r.data() {
        if v.is_nan() || !mask.is_none_or(|m| m.contains(v)) {
            continue;
        }
        min = min.min(v);
        max = max.max(v);
        sum += v as f64;
        count += 1;
    }
    if count == 0 {
        return Err(Error::EmptySelection(
            "no valid pixel matches the selection".into(),
        ));
    }
    Ok(RasterStats {
        min,
        max,
        mean: sum / count as f64,
        count,
    })
}

/// Bilinear interpolation at continuous pixel-index coordinates.
///
/// Pixel `(i, j)` has its center at `(i, j)`; the raster covers
/// `[-0.5, width - 0.5] x [-0.5, height - 0.5]`. Samples in the outer half
/// pixel replicate the edge. Outside that extent, or when a contributing
/// neighbour is no-data, the result is no-data.
pub fn resample_bilinear(r: &TemperatureRaster, x: f64, y: f64) -> f32 {
    r.sample(x, y)
}

/// Below this fractional offset a coordinate is taken to hit the pixel center
/// exactly; projection round trips leave noise of order 1e-14 px, which must
/// not pull a zero-weight (possibly no-data) neighbor into the sample.
const CENTER_SNAP: f64 = 1e-9;

#[inline]
fn split_coordinate(t: f64) -> (usize, f64) {
    let i = t.floor();
    let f = t - i;
    if f < CENTER_SNAP {
        (i as usize, 0.0)
    } else if f > 1.0 - CENTER_SNAP {
        (i as usize + 1, 0.0)
    } else {
        (i as usize, f)
    }
}

#[inline]
pub(crate) fn bilinear(data: &[f32], w: usize, h: usize, x: f64, y: f64) -> f32 {
    if !(x >= -0.5 && x <= w as f64 - 0.5 && y >= -0.5 && y <= h as f64 - 0.5) {
        return NO_DATA;
    }
    let xc = x.clamp(0.0, (w - 1) as f64);
    let yc = y.clamp(0.0, (h - 1) as f64);
    let (x0, fx) = split_coordinate(xc);
    let (y0, fy) = split_coordinate(yc);
    let x1 = if fx > 0.0 { x0 + 1 } else { x0 };
    let y1 = if fy > 0.0 { y0 + 1 } else { y0 };
    let a = data[y0 * w + x0] as f64;
    let b = data[y0 * w + x1] as f64;
    let c = data[y1 * w + x0] as f64;
    let d = data[y1 * w + x1] as f64;
    let top = a + (b - a) * fx;
    let bottom = c + (d - c) * fx;
    // NaN propagates through the arithmetic
    (top + (bottom - top) * fy) as f32
}

/// [`bilinear`] restricted to one fixed `y`, with the row lookup done once.
/// Gives bit-identical results to [`bilinear`] at the same coordinates.
pub(crate) struct RowSampler<'a> {
    top: &'a [f32],
    bottom: &'a [f32],
    fy: f64,
}

impl<'a> RowSampler<'a> {
    /// `None` when `y` lies outside the raster.
    pub(crate) fn new(data: &'a [f32], w: usize, h: usize, y: f64) -> Option<Self> {
        if !(y >= -0.5 && y <= h as f64 - 0.5) {
            return None;
        }
        let (y0, fy) = split_coordinate(y.clamp(0.0, (h - 1) as f64));
        let y1 = if fy > 0.0 { y0 + 1 } else { y0 };
        Some(Self {
            top: &data[y0 * w..(y0 + 1) * w],
            bottom: &data[y1 * w..(y1 + 1) * w],
            fy,
        })
    }

    #[inline]
    pub(crate) fn sample(&self, x: f64) -> f32 {
        let w = self.top.len();
        if !(x >= -0.5 && x <= w as f64 - 0.5) {
            return NO_DATA;
        }
        let (x0, fx) = split_coordinate(x.clamp(0.0, (w - 1) as f64));
        let x1 = if fx > 0.0 { (x0 + 1).min(w - 1) } else { x0 };
        let a = self.top[x0] as f64;
        let b = self.top[x1] as f64;
        let c = self.bottom[x0] as f64;
        let d = self.bottom[x1] as f64;
        let top = a + (b - a) * fx;
        let bottom = c + (d - c) * fx;
        (top + (bottom - top) * self.fy) as f32
    }
}
