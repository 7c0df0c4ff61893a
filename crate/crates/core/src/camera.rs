//! Nadir pinhole cameras over a flat ground plane.
//!
//! Continuous image coordinates `(u, v)` put the image's top-left corner at
//! `(0, 0)` and its bottom-right corner at `(width, height)`; pixel `(i, j)` is
//! centered on `(i + 0.5, j + 0.5)`. With zero yaw, `+u` points east and `+v`
//! points south.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Full field of view that makes a 35 m AGL nadir view cover 22 m x 22 m.
pub fn default_fov_deg() -> f64 {
    2.0 * (11.0f64 / 35.0).atan().to_degrees()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub width: u32,
    pub height: u32,
    /// Full field of view across the image width, degrees.
    pub fov_deg: f64,
}

impl Intrinsics {
    pub fn square(size: u32) -> Self {
        Self {
            width: size,
            height: size,
            fov_deg: default_fov_deg(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::param("camera resolution must be positive"));
        }
        if !(self.fov_deg > 0.0 && self.fov_deg < 180.0) {
            return Err(Error::param(format!("field of view {} out of (0, 180)", self.fov_deg)));
        }
        Ok(())
    }

    /// Focal length in pixels.
    pub fn focal_px(&self) -> f64 {
        (self.width as f64 / 2.0) / (self.fov_deg.to_radians() / 2.0).tan()
    }

    pub fn principal_point(&self) -> (f64, f64) {
        (self.width as f64 / 2.0, self.height as f64 / 2.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraPose {
    /// ENU position in meters; `z` is altitude above the ground datum.
    pub position_m: [f64; 3],
    /// Rotation of the image axes about the up axis, counter-clockwise.
    pub yaw_deg: f64,
    pub intrinsics: Intrinsics,
}

impl CameraPose {
    pub fn nadir(x: f64, y: f64, altitude_m: f64, intrinsics: Intrinsics) -> Self {
        Self {
            position_m: [x, y, altitude_m],
            yaw_deg: 0.0,
            intrinsics,
        }
    }

    pub fn altitude_m(&self) -> f64 {
        self.position_m[2]
    }

    fn rotation(&self) -> (f64, f64) {
        let r = self.yaw_deg.to_radians();
        (r.cos(), r.sin())
    }

    /// Unnormalized world-space viewing direction through image point `(u, v)`.
    pub fn ray_direction(&self, u: f64, v: f64) -> [f64; 3] {
        let f = self.intrinsics.focal_px();
        let (cx, cy) = self.intrinsics.principal_point();
        let right = (u - cx) / f;
        let north = -(v - cy) / f;
        let (c, s) = self.rotation();
        [c * right - s * north, s * right + c * north, -1.0]
    }

    /// Ground `(x, y)` seen through image point `(u, v)` on the plane `z = ground_height_m`.
    pub fn project_to_ground(&self, u: f64, v: f64, ground_height_m: f64) -> Result<[f64; 2]> {
        project_to_ground(self, [u, v], ground_height_m)
    }
}

pub fn project_to_ground(pose: &CameraPose, pixel: [f64; 2], ground_height_m: f64) -> Result<[f64; 2]> {
    let depth = pose.position_m[2] - ground_height_m;
    if !(depth > 0.0) {
        return Err(Error::Projection(format!(
            "camera at {} m does not look down onto ground at {ground_height_m} m",
            pose.position_m[2]
        )));
    }
    let d = pose.ray_direction(pixel[0], pixel[1]);
    // d.z == -1 for a nadir camera
    Ok([pose.position_m[0] + depth * d[0], pose.position_m[1] + depth * d[1]])
}

/// Image coordinates of a ground point as seen from `pose`, without a frame check.
pub fn ground_to_image(point: [f64; 3], pose: &CameraPose) -> Option<[f64; 2]> {
    let depth = pose.position_m[2] - point[2];
    if !(depth > 0.0) {
        return None;
    }
    let dx = (point[0] - pose.position_m[0]) / depth;
    let dy = (point[1] - pose.position_m[1]) / depth;
    let (c, s) = pose.rotation();
    let right = c * dx + s * dy;
    let north = -s * dx + c * dy;
    let f = pose.intrinsics.focal_px();
    let (cx, cy) = pose.intrinsics.principal_point();
    Some([cx + f * right, cy - f * north])
}

/// Back-projects a ground point into the image of `center`. Returns `None`
/// when the point falls outside that camera's frame.
pub fn backproject_to_center(point: [f64; 3], center: &CameraPose) -> Option<[f64; 2]> {
    let [u, v] = ground_to_image(point, center)?;
    let w = center.intrinsics.width as f64;
    let h = center.intrinsics.height as f64;
    let tol = 1e-9 * w.max(h);
    if u < -tol || v < -tol || u > w + tol || v > h + tol {
        return None;
    }
    Some([u, v])
}

/// Affine map from one nadir camera's image coordinates to another's through
/// a ground plane: `dst = [a, b; c, d] * src + [e, f]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelMap {
    pub m: [[f64; 2]; 2],
    pub t: [f64; 2],
}

impl PixelMap {
    pub fn between(from: &CameraPose, to: &CameraPose, ground_height_m: f64) -> Result<Self> {
        let map = |u: f64, v: f64| -> Result<[f64; 2]> {
            let [gx, gy] = project_to_ground(from, [u, v], ground_height_m)?;
            ground_to_image([gx, gy, ground_height_m], to)
                .ok_or_else(|| Error::Projection("target camera is below the ground plane".into()))
        };
        let o = map(0.0, 0.0)?;
        let ex = map(1.0, 0.0)?;
        let ey = map(0.0, 1.0)?;
        Ok(Self {
            m: [[ex[0] - o[0], ey[0] - o[0]], [ex[1] - o[1], ey[1] - o[1]]],
            t: o,
        })
    }

    #[inline]
    pub fn apply(&self, u: f64, v: f64) -> [f64; 2] {
        [
            self.m[0][0] * u + self.m[0][1] * v + self.t[0],
            self.m[1][0] * u + self.m[1][1] * v + self.t[1],
        ]
    }

    /// True when the map is a pure translation.
    pub fn is_translation(&self) -> bool {
        const EPS: f64 = 1e-12;
        (self.m[0][0] - 1.0).abs() < EPS
            && self.m[0][1].abs() < EPS
            && self.m[1][0].abs() < EPS
            && (self.m[1][1] - 1.0).abs() < EPS
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pose(yaw: f64) -> CameraPose {
        CameraPose {
            position_m: [100.0, 50.0, 35.0],
            yaw_deg: yaw,
            intrinsics: Intrinsics::square(512),
        }
    }

    #[test]
    fn principal_ray_hits_nadir_point() {
        let g = pose(0.0).project_to_ground(256.0, 256.0, 0.0).unwrap();
        assert!((g[0] - 100.0).abs() < 1e-9 && (g[1] - 50.0).abs() < 1e-9);
    }

    #[test]
    fn corners_cover_22m_footprint() {
        let p = pose(0.0);
        let tl = p.project_to_ground(0.0, 0.0, 0.0).unwrap();
        let br = p.project_to_ground(512.0, 512.0, 0.0).unwrap();
        assert!((tl[0] - 89.0).abs() < 1e-9 && (tl[1] - 61.0).abs() < 1e-9);
        assert!((br[0] - 111.0).abs() < 1e-9 && (br[1] - 39.0).abs() < 1e-9);
    }

    #[test]
    fn yaw_rotates_footprint() {
        // image right (+u) points north after a quarter turn
        let g = pose(90.0).project_to_ground(512.0, 256.0, 0.0).unwrap();
        assert!((g[0] - 100.0).abs() < 1e-9 && (g[1] - 61.0).abs() < 1e-9);
        let tl = pose(90.0).project_to_ground(0.0, 0.0, 0.0).unwrap();
        assert!((tl[0] - 89.0).abs() < 1e-9 && (tl[1] - 39.0).abs() < 1e-9);
    }

    #[test]
    fn backprojection_inverts_projection() {
        for yaw in [0.0, 33.0, -120.0] {
            let p = pose(yaw);
            for &(u, v) in &[(0.0, 0.0), (13.25, 400.5), (511.9, 3.3)] {
                let g = p.project_to_ground(u, v, 2.0).unwrap();
                let back = backproject_to_center([g[0], g[1], 2.0], &p).unwrap();
                assert!((back[0] - u).abs() < 1e-4 && (back[1] - v).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn frame_bounds() {
        let p = pose(0.0);
        assert!(backproject_to_center([112.0, 50.0, 0.0], &p).is_none());
        let edge = backproject_to_center([111.0, 61.0, 0.0], &p).unwrap();
        assert!((edge[0] - 512.0).abs() < 1e-6 && edge[1].abs() < 1e-6);
    }

    #[test]
    fn ground_above_camera_is_an_error() {
        assert!(matches!(
            pose(0.0).project_to_ground(1.0, 1.0, 40.0),
            Err(Error::Projection(_))
        ));
    }

    #[test]
    fn translation_map_between_level_cameras() {
        let a = pose(0.0);
        let mut b = a;
        b.position_m[0] += 2.0;
        let map = PixelMap::between(&a, &b, 0.0).unwrap();
        assert!(map.is_translation());
        let px_per_m = 512.0 / 22.0;
        assert!((map.t[0] + 2.0 * px_per_m).abs() < 1e-9);
    }
}
