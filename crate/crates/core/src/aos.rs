//! Airborne optical sectioning: reprojection of synthetic-aperture samples to
//! the aperture's central perspective and per-pixel integration.
//!
//! Every output pixel averages only the samples whose back-projection covers
//! it with valid data. Samples falling outside a source frame, or touching a
//! no-data neighbour, are excluded rather than zero-padded, so the divisor is
//! the per-pixel valid count.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::camera::{CameraPose, Intrinsics, PixelMap};
use crate::error::{Error, Result};
use crate::forest::VisibilityMask;
use crate::raster::{bilinear, RowSampler, TemperatureRaster, NO_DATA};

/// Waypoint layout of a synthetic aperture. Index `[n, m]` sits
/// `(n - n/2) * spacing` east and `(m - m/2) * spacing` south of the center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaGrid {
    pub n: u32,
    pub m: u32,
    pub spacing_m: f64,
    pub altitude_agl_m: f64,
}

impl Default for SaGrid {
    fn default() -> Self {
        Self {
            n: 11,
            m: 11,
            spacing_m: 2.0,
            altitude_agl_m: 35.0,
        }
    }
}

impl SaGrid {
    pub fn new(n: u32, m: u32, spacing_m: f64, altitude_agl_m: f64) -> Result<Self> {
        let g = Self {
            n,
            m,
            spacing_m,
            altitude_agl_m,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 {
            return Err(Error::param("aperture needs at least one waypoint per axis"));
        }
        if !(self.spacing_m > 0.0 && self.spacing_m.is_finite()) {
            return Err(Error::param("waypoint spacing must be positive"));
        }
        if !(self.altitude_agl_m > 0.0 && self.altitude_agl_m.is_finite()) {
            return Err(Error::param("aperture altitude must be positive"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n as usize * self.m as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn center_index(&self) -> [u32; 2] {
        [self.n / 2, self.m / 2]
    }

    pub fn is_strip(&self) -> bool {
        self.n == 1 || self.m == 1
    }

    /// Ground offset `(east, north)` of a waypoint from the center waypoint.
    pub fn offset_m(&self, index: [i64; 2]) -> [f64; 2] {
        let c = self.center_index();
        [
            (index[0] - c[0] as i64) as f64 * self.spacing_m,
            -((index[1] - c[1] as i64) as f64) * self.spacing_m,
        ]
    }

    /// Nadir poses for every waypoint, row-major in `m`, centered over `center_xy`.
    pub fn poses(&self, center_xy: [f64; 2], ground_height_m: f64, intrinsics: Intrinsics) -> Vec<([u32; 2], CameraPose)> {
        let mut out = Vec::with_capacity(self.len());
        for m in 0..self.m {
            for n in 0..self.n {
                let [dx, dy] = self.offset_m([n as i64, m as i64]);
                out.push((
                    [n, m],
                    CameraPose::nadir(
                        center_xy[0] + dx,
                        center_xy[1] + dy,
                        ground_height_m + self.altitude_agl_m,
                        intrinsics,
                    ),
                ));
            }
        }
        out
    }
}

/// One captured sample of an aperture.
#[derive(Debug, Clone, Copy)]
pub struct SaSample<'a> {
    pub index: [u32; 2],
    pub image: &'a TemperatureRaster,
    pub pose: CameraPose,
}

#[derive(Debug, Clone, Copy)]
pub struct MaskSample<'a> {
    pub index: [u32; 2],
    pub mask: &'a VisibilityMask,
    pub pose: CameraPose,
}

/// Occlusion-suppressed integral image at an aperture's central perspective.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralImage {
    pub sigma: TemperatureRaster,
    /// Number of samples averaged at each pixel.
    pub counts: Vec<u32>,
    pub grid: SaGrid,
    pub center: CameraPose,
    /// Capture index of the central waypoint.
    pub center_index: [u32; 2],
}

impl IntegralImage {
    pub fn counts_raster(&self) -> TemperatureRaster {
        TemperatureRaster::new(
            self.sigma.width(),
            self.sigma.height(),
            self.sigma.ambient_c(),
            self.sigma.ground_res_m(),
            self.counts.iter().map(|&c| c as f32).collect(),
        )
        .expect("counts share the integral's shape")
    }
}

const POSITION_TOLERANCE: f64 = 0.01;

/// Checks that `(index, pose)` pairs form a consistent aperture and returns
/// the center pose. `require_complete` demands one sample per waypoint.
fn check_layout(
    layout: &[([u32; 2], &CameraPose, (u32, u32))],
    grid: &SaGrid,
    ground_height_m: f64,
    require_complete: bool,
) -> Result<CameraPose> {
    grid.validate()?;
    if layout.is_empty() {
        return Err(Error::param("no images to integrate"));
    }
    let mut seen: HashMap<[u32; 2], &CameraPose> = HashMap::with_capacity(layout.len());
    for &(index, pose, dims) in layout {
        if index[0] >= grid.n || index[1] >= grid.m {
            return Err(Error::param(format!(
                "waypoint {index:?} outside the {}x{} aperture",
                grid.n, grid.m
            )));
        }
        if seen.insert(index, pose).is_some() {
            return Err(Error::param(format!("duplicate waypoint {index:?}")));
        }
        if dims != (pose.intrinsics.width, pose.intrinsics.height) {
            return Err(Error::param(format!(
                "image at {index:?} is {}x{} but its camera is {}x{}",
                dims.0, dims.1, pose.intrinsics.width, pose.intrinsics.height
            )));
        }
    }
    if require_complete && seen.len() != grid.len() {
        let missing = (0..grid.m)
            .flat_map(|m| (0..grid.n).map(move |n| [n, m]))
            .find(|i| !seen.contains_key(i))
            .expect("a waypoint is missing");
        return Err(Error::param(format!(
            "aperture expects {} images, got {}; missing waypoint {missing:?}",
            grid.len(),
            seen.len()
        )));
    }
    let ci = grid.center_index();
    let center = **seen
        .get(&ci)
        .ok_or_else(|| Error::param(format!("central waypoint {ci:?} has no image")))?;
    let tol = POSITION_TOLERANCE * grid.spacing_m;
    for (&index, pose) in &seen {
        let [dx, dy] = grid.offset_m([index[0] as i64, index[1] as i64]);
        let ex = center.position_m[0] + dx;
        let ey = center.position_m[1] + dy;
        let agl = pose.position_m[2] - ground_height_m;
        if (pose.position_m[0] - ex).abs() > tol
            || (pose.position_m[1] - ey).abs() > tol
            || (agl - grid.altitude_agl_m).abs() > POSITION_TOLERANCE * grid.altitude_agl_m
        {
            return Err(Error::param(format!(
                "pose of waypoint {index:?} at {:?} does not match the aperture layout",
                pose.position_m
            )));
        }
    }
    Ok(center)
}

/// Averages reprojected rasters at the center perspective. Returns the mean
/// (no-data where nothing contributed) and the per-pixel counts.
fn integrate_rasters(
    sources: &[(&TemperatureRaster, &CameraPose)],
    center: &CameraPose,
    ground_height_m: f64,
) -> Result<(Vec<f32>, Vec<u32>)> {
    let w = center.intrinsics.width as usize;
    let h = center.intrinsics.height as usize;
    let maps = sources
        .iter()
        .map(|(_, pose)| PixelMap::between(center, pose, ground_height_m))
        .collect::<Result<Vec<_>>>()?;

    let mut mean = vec![0f32; w * h];
    let mut counts = vec![0u32; w * h];
    mean.par_chunks_mut(w)
        .zip(counts.par_chunks_mut(w))
        .enumerate()
        .for_each_init(
            || vec![0f64; w],
            |sum, (row, (mean_row, count_row))| {
                sum.iter_mut().for_each(|s| *s = 0.0);
                let v = row as f64 + 0.5;
                for ((img, _), map) in sources.iter().zip(&maps) {
                    accumulate_row(img, map, v, sum, count_row);
                }
                for ((out, &s), &c) in mean_row.iter_mut().zip(sum.iter()).zip(count_row.iter()) {
                    *out = if c > 0 { (s / c as f64) as f32 } else { NO_DATA };
                }
            },
        );
    Ok((mean, counts))
}

/// Adds one source image's contribution to an output row.
#[inline]
fn accumulate_row(img: &TemperatureRaster, map: &PixelMap, v: f64, sum: &mut [f64], count: &mut [u32]) {
    let sw = img.width() as usize;
    let sh = img.height() as usize;
    let data = img.data();
    // pixel-center image coordinates map to source index coordinates by -0.5
    let [x0, y0] = map.apply(0.5, v);
    let (dxu, dyu) = (map.m[0][0], map.m[1][0]);
    let xmax = sw as f64 - 0.5;
    if map.is_translation() {
        // constant y for the whole row
        let Some(row) = RowSampler::new(data, sw, sh, y0 - 0.5) else {
            return;
        };
        let first = ((-0.5 - (x0 - 0.5)).ceil().max(0.0)) as usize;
        for (i, (s, c)) in sum.iter_mut().zip(count.iter_mut()).enumerate().skip(first) {
            let x = x0 - 0.5 + i as f64;
            if x > xmax {
                break;
            }
            let t = row.sample(x);
            if !t.is_nan() {
                *s += t as f64;
                *c += 1;
            }
        }
    } else {
        for (i, (s, c)) in sum.iter_mut().zip(count.iter_mut()).enumerate() {
            let x = x0 - 0.5 + dxu * i as f64;
            let y = y0 - 0.5 + dyu * i as f64;
            let t = bilinear(data, sw, sh, x, y);
            if !t.is_nan() {
                *s += t as f64;
                *c += 1;
            }
        }
    }
}

fn build_integral(
    sources: &[(&TemperatureRaster, &CameraPose)],
    center: CameraPose,
    center_index: [u32; 2],
    grid: SaGrid,
    ground_height_m: f64,
    ambient_c: f32,
) -> Result<IntegralImage> {
    let (mean, counts) = integrate_rasters(sources, &center, ground_height_m)?;
    let res = ((center.altitude_m() - ground_height_m) / center.intrinsics.focal_px()) as f32;
    let sigma = TemperatureRaster::new(center.intrinsics.width, center.intrinsics.height, ambient_c, res, mean)?;
    Ok(IntegralImage {
        sigma,
        counts,
        grid,
        center,
        center_index,
    })
}

/// Integrates one image per waypoint of `grid` into the central perspective.
pub fn integrate(images: &[SaSample<'_>], grid: &SaGrid, ground_height_m: f64) -> Result<IntegralImage> {
    integrate_impl(images, grid, ground_height_m, true)
}

fn integrate_impl(
    images: &[SaSample<'_>],
    grid: &SaGrid,
    ground_height_m: f64,
    require_complete: bool,
) -> Result<IntegralImage> {
    let layout: Vec<_> = images.iter().map(|s| (s.index, &s.pose, s.image.dims())).collect();
    let center = check_layout(&layout, grid, ground_height_m, require_complete)?;
    let sources: Vec<_> = images.iter().map(|s| (s.image, &s.pose)).collect();
    let ci = grid.center_index();
    let ambient = images
        .iter()
        .find(|s| s.index == ci)
        .map(|s| s.image.ambient_c())
        .expect("center checked");
    build_integral(&sources, center, ci, *grid, ground_height_m, ambient)
}

/// Aggregates per-sample visibility masks exactly as [`integrate`] aggregates images.
pub fn integrate_mask(masks: &[MaskSample<'_>], grid: &SaGrid, ground_height_m: f64) -> Result<VisibilityMask> {
    integrate_mask_impl(masks, grid, ground_height_m, true)
}

fn integrate_mask_impl(
    masks: &[MaskSample<'_>],
    grid: &SaGrid,
    ground_height_m: f64,
    require_complete: bool,
) -> Result<VisibilityMask> {
    let as_images: Vec<SaSample<'_>> = masks
        .iter()
        .map(|m| SaSample {
            index: m.index,
            image: m.mask.raster(),
            pose: m.pose,
        })
        .collect();
    let integral = integrate_impl(&as_images, grid, ground_height_m, require_complete)?;
    // averages of values in [0, 1] can overshoot by an ulp
    let clamped = integral.sigma.map(|f| f.clamp(0.0, 1.0))?;
    VisibilityMask::new(clamped)
}

/// One frame of a larger waypoint capture.
#[derive(Debug, Clone)]
pub struct Frame {
    pub index: [u32; 2],
    pub image: TemperatureRaster,
    pub mask: Option<VisibilityMask>,
    pub pose: CameraPose,
}

/// Frames captured over an `cols` x `rows` waypoint grid.
#[derive(Debug, Clone)]
pub struct Capture {
    pub cols: u32,
    pub rows: u32,
    pub frames: Vec<Frame>,
}

/// Where an aperture window sits on a capture grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowPlacement {
    /// Capture index of the window's `[0, 0]` waypoint (negative when padded).
    pub origin: [i64; 2],
    /// Capture index of the window's central waypoint.
    pub center: [u32; 2],
}

impl Capture {
    pub fn frame(&self, index: [u32; 2]) -> Option<&Frame> {
        self.frames.iter().find(|f| f.index == index)
    }

    /// Horizontal strip of row `m`, re-indexed as a `cols` x 1 capture.
    pub fn row(&self, m: u32) -> Capture {
        Capture {
            cols: self.cols,
            rows: 1,
            frames: self
                .frames
                .iter()
                .filter(|f| f.index[1] == m)
                .map(|f| Frame {
                    index: [f.index[0], 0],
                    ..f.clone()
                })
                .collect(),
        }
    }

    /// Vertical strip of column `n`, re-indexed as a 1 x `rows` capture.
    pub fn col(&self, n: u32) -> Capture {
        Capture {
            cols: 1,
            rows: self.rows,
            frames: self
                .frames
                .iter()
                .filter(|f| f.index[0] == n)
                .map(|f| Frame {
                    index: [0, f.index[1]],
                    ..f.clone()
                })
                .collect(),
        }
    }

    /// Window placements for a sliding aperture. Without padding the window
    /// stays inside the capture; with padding every `stride`-th waypoint
    /// becomes a center and border windows simply lack the outside samples.
    pub fn placements(&self, window: &SaGrid, stride: [u32; 2], pad: bool) -> Result<Vec<WindowPlacement>> {
        window.validate()?;
        if stride[0] == 0 || stride[1] == 0 {
            return Err(Error::param("stride must be at least 1"));
        }
        if stride[0] > self.cols || stride[1] > self.rows {
            log::warn!(
                "stride {stride:?} exceeds the {}x{} capture; no windows",
                self.cols,
                self.rows
            );
            return Ok(Vec::new());
        }
        let c = window.center_index();
        let axis = |len: u32, win: u32, center: u32, step: u32| -> Result<Vec<i64>> {
            if pad {
                Ok((0..len as i64).step_by(step as usize).map(|ctr| ctr - center as i64).collect())
            } else if len < win {
                Err(Error::param(format!(
                    "capture side {len} is smaller than the window side {win}; enable padding"
                )))
            } else {
                Ok((0..=(len - win) as i64).step_by(step as usize).collect())
            }
        };
        let xs = axis(self.cols, window.n, c[0], stride[0])?;
        let ys = axis(self.rows, window.m, c[1], stride[1])?;
        Ok(ys
            .iter()
            .flat_map(|&oy| {
                xs.iter().map(move |&ox| WindowPlacement {
                    origin: [ox, oy],
                    center: [(ox + c[0] as i64) as u32, (oy + c[1] as i64) as u32],
                })
            })
            .collect())
    }

    /// Frames inside a window, re-indexed relative to its origin.
    pub fn window_frames(&self, window: &SaGrid, place: &WindowPlacement) -> Vec<(&Frame, [u32; 2])> {
        self.frames
            .iter()
            .filter_map(|f| {
                let rx = f.index[0] as i64 - place.origin[0];
                let ry = f.index[1] as i64 - place.origin[1];
                (rx >= 0 && ry >= 0 && rx < window.n as i64 && ry < window.m as i64).then_some((f, [rx as u32, ry as u32]))
            })
            .collect()
    }

    /// A window lying entirely inside the capture must find every waypoint;
    /// only border windows of a padded aperture may be partial.
    fn check_window(&self, window: &SaGrid, place: &WindowPlacement, found: usize) -> Result<()> {
        let inside = place.origin[0] >= 0
            && place.origin[1] >= 0
            && place.origin[0] + window.n as i64 <= self.cols as i64
            && place.origin[1] + window.m as i64 <= self.rows as i64;
        if !inside || found == window.len() {
            return Ok(());
        }
        let missing = (0..window.m as i64)
            .flat_map(|m| (0..window.n as i64).map(move |n| [n, m]))
            .map(|[n, m]| [(place.origin[0] + n) as u32, (place.origin[1] + m) as u32])
            .find(|i| self.frame(*i).is_none())
            .expect("a waypoint is missing");
        Err(Error::param(format!(
            "aperture expects {} images, got {found}; missing waypoint {missing:?}",
            window.len()
        )))
    }

    /// Integral at one window placement.
    pub fn integrate_window(
        &self,
        window: &SaGrid,
        place: &WindowPlacement,
        ground_height_m: f64,
    ) -> Result<IntegralImage> {
        let frames = self.window_frames(window, place);
        let samples: Vec<SaSample<'_>> = frames
            .iter()
            .map(|(f, rel)| SaSample {
                index: *rel,
                image: &f.image,
                pose: f.pose,
            })
            .collect();
        self.check_window(window, place, frames.len())?;
        let complete = samples.len() == window.len();
        let mut out = integrate_impl(&samples, window, ground_height_m, complete)?;
        out.center_index = place.center;
        Ok(out)
    }

    /// Aggregated visibility at one window placement; `None` when a frame lacks a mask.
    pub fn integrate_window_mask(
        &self,
        window: &SaGrid,
        place: &WindowPlacement,
        ground_height_m: f64,
    ) -> Result<Option<VisibilityMask>> {
        let frames = self.window_frames(window, place);
        let mut samples = Vec::with_capacity(frames.len());
        for (f, rel) in &frames {
            match &f.mask {
                Some(mask) => samples.push(MaskSample {
                    index: *rel,
                    mask,
                    pose: f.pose,
                }),
                None => return Ok(None),
            }
        }
        self.check_window(window, place, frames.len())?;
        let complete = samples.len() == window.len();
        integrate_mask_impl(&samples, window, ground_height_m, complete).map(Some)
    }
}

/// Applies a fixed aperture over a larger capture in a sliding-window manner.
pub fn sliding_integrate(
    capture: &Capture,
    window: &SaGrid,
    stride: [u32; 2],
    pad: bool,
    ground_height_m: f64,
) -> Result<Vec<IntegralImage>> {
    let placements = capture.placements(window, stride, pad)?;
    placements
        .par_iter()
        .map(|p| capture.integrate_window(window, p, ground_height_m))
        .collect()
}
