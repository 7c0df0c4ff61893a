//! Fixtures and independent oracles shared by the integration tests.
#![allow(dead_code)]

use aos_thermal::aos::{SaGrid, SaSample};
use aos_thermal::camera::{CameraPose, Intrinsics};
use aos_thermal::raster::TemperatureRaster;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A small aperture whose frames overlap only partially.
pub struct Fixture {
    pub grid: SaGrid,
    pub frames: Vec<([u32; 2], TemperatureRaster, CameraPose)>,
}

impl Fixture {
    pub fn samples(&self) -> Vec<SaSample<'_>> {
        self.frames
            .iter()
            .map(|(index, image, pose)| SaSample {
                index: *index,
                image,
                pose: *pose,
            })
            .collect()
    }

    pub fn center(&self) -> CameraPose {
        let c = self.grid.center_index();
        self.frames.iter().find(|f| f.0 == c).expect("center frame").2
    }
}

/// Random grid, spacing, altitude, resolution, yaw, and pixel values with
/// scattered no-data. Spacing is a large fraction of the footprint, so most
/// output pixels see only some of the frames.
pub fn partial_overlap_fixture(seed: u64) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=4u32);
    let m = rng.gen_range(1..=4u32);
    let size = rng.gen_range(12..=32u32);
    let intrinsics = Intrinsics {
        width: size,
        height: size,
        fov_deg: rng.gen_range(20.0..60.0),
    };
    let altitude = rng.gen_range(20.0..60.0);
    let footprint = 2.0 * altitude * (intrinsics.fov_deg.to_radians() / 2.0).tan();
    let spacing = footprint * rng.gen_range(0.1..0.6);
    let grid = SaGrid::new(n, m, spacing, altitude).unwrap();
    let rotate_each = rng.gen_bool(0.5);
    let base_yaw = rng.gen_range(-180.0..180.0);
    let frames = grid
        .poses([rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0)], 0.0, intrinsics)
        .into_iter()
        .map(|(index, mut pose)| {
            pose.yaw_deg = if rotate_each { rng.gen_range(-180.0..180.0) } else { base_yaw };
            let data = (0..size * size)
                .map(|_| if rng.gen_bool(0.03) { f32::NAN } else { rng.gen_range(-10.0..300.0) })
                .collect();
            (index, TemperatureRaster::new(size, size, 15.0, 0.1, data).unwrap(), pose)
        })
        .collect();
    Fixture { grid, frames }
}

fn focal(pose: &CameraPose) -> f64 {
    (pose.intrinsics.width as f64 / 2.0) / (pose.intrinsics.fov_deg.to_radians() / 2.0).tan()
}

/// Ground point under image point `(u, v)`, from pinhole geometry.
pub fn oracle_ground(pose: &CameraPose, u: f64, v: f64) -> [f64; 2] {
    let f = focal(pose);
    let right = (u - pose.intrinsics.width as f64 / 2.0) / f;
    let north = (pose.intrinsics.height as f64 / 2.0 - v) / f;
    let (s, c) = pose.yaw_deg.to_radians().sin_cos();
    let h = pose.position_m[2];
    [
        pose.position_m[0] + h * (c * right - s * north),
        pose.position_m[1] + h * (s * right + c * north),
    ]
}

/// Image point of a ground point.
pub fn oracle_image(pose: &CameraPose, g: [f64; 2]) -> [f64; 2] {
    let f = focal(pose);
    let h = pose.position_m[2];
    let dx = (g[0] - pose.position_m[0]) / h;
    let dy = (g[1] - pose.position_m[1]) / h;
    let (s, c) = pose.yaw_deg.to_radians().sin_cos();
    let right = c * dx + s * dy;
    let north = -s * dx + c * dy;
    [
        pose.intrinsics.width as f64 / 2.0 + f * right,
        pose.intrinsics.height as f64 / 2.0 - f * north,
    ]
}

/// Bilinear sample at corner-based image point `(u, v)`: edge pixels extend
/// half a pixel; any neighbor with nonzero weight that is no-data voids it.
pub fn oracle_sample(r: &TemperatureRaster, u: f64, v: f64) -> Option<f64> {
    let (w, h) = (r.width() as f64, r.height() as f64);
    let (x, y) = (u - 0.5, v - 0.5);
    if x < -0.5 || y < -0.5 || x > w - 0.5 || y > h - 0.5 {
        return None;
    }
    let x = x.clamp(0.0, w - 1.0);
    let y = y.clamp(0.0, h - 1.0);
    // coordinates within rounding noise of a pixel center sample that pixel alone
    let snap = |t: f64| if (t - t.round()).abs() < 1e-9 { t.round() } else { t };
    let (x, y) = (snap(x), snap(y));
    let (x0, y0) = (x.floor(), y.floor());
    let (fx, fy) = (x - x0, y - y0);
    let mut acc = 0.0;
    for (dx, wx) in [(0.0, 1.0 - fx), (1.0, fx)] {
        for (dy, wy) in [(0.0, 1.0 - fy), (1.0, fy)] {
            let wgt = wx * wy;
            if wgt == 0.0 {
                continue;
            }
            let t = r.get((x0 + dx) as u32, (y0 + dy) as u32);
            if t.is_nan() {
                return None;
            }
            acc += wgt * t as f64;
        }
    }
    Some(acc)
}

/// Per output pixel of `center`: mean over frames of the reprojected sample,
/// skipping frames that do not see the point. Returns (mean, count).
pub fn oracle_integrate(frames: &[(&TemperatureRaster, CameraPose)], center: &CameraPose) -> Vec<(Option<f64>, u32)> {
    let (w, h) = (center.intrinsics.width, center.intrinsics.height);
    let mut out = Vec::with_capacity((w * h) as usize);
    for y in 0..h {
        for x in 0..w {
            let g = oracle_ground(center, x as f64 + 0.5, y as f64 + 0.5);
            let mut sum = 0.0;
            let mut count = 0;
            for (image, pose) in frames {
                let [u, v] = oracle_image(pose, g);
                if let Some(t) = oracle_sample(image, u, v) {
                    sum += t;
                    count += 1;
                }
            }
            out.push(((count > 0).then(|| sum / count as f64), count));
        }
    }
    out
}
