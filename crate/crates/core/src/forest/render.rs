use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::bvh::Ray;
use super::{ForestScene, VisibilityMask};
use crate::camera::CameraPose;
use crate::error::{Error, Result};
use crate::raster::{TemperatureRaster, NO_DATA};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderOptions {
    /// Rays per pixel along each axis; the pixel records their mean.
    pub supersample: u32,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self { supersample: 1 }
    }
}

/// Renders the nadir thermal image seen from `pose`, along with the fraction
/// of each pixel's rays that reached the ground.
pub fn render_thermal(
    scene: &ForestScene,
    pose: &CameraPose,
    opts: RenderOptions,
) -> Result<(TemperatureRaster, VisibilityMask)> {
    if !(pose.altitude_m() > scene.max_height_m()) {
        return Err(Error::param(format!(
            "camera at {} m is not above the canopy top at {:.2} m",
            pose.altitude_m(),
            scene.max_height_m()
        )));
    }
    render_impl(Some(scene), scene.surface(), scene.env().ambient_c, pose, opts)
}

/// Renders the bare surface field from `pose`, as an unoccluded camera would see it.
pub fn render_ground(surface: &TemperatureRaster, pose: &CameraPose, opts: RenderOptions) -> Result<TemperatureRaster> {
    if !(pose.altitude_m() > 0.0) {
        return Err(Error::param("camera must be above the ground"));
    }
    render_impl(None, surface, surface.ambient_c(), pose, opts).map(|(r, _)| r)
}

fn render_impl(
    scene: Option<&ForestScene>,
    surface: &TemperatureRaster,
    ambient_c: f32,
    pose: &CameraPose,
    opts: RenderOptions,
) -> Result<(TemperatureRaster, VisibilityMask)> {
    pose.intrinsics.validate()?;
    if opts.supersample == 0 {
        return Err(Error::param("supersample must be at least 1"));
    }
    let w = pose.intrinsics.width as usize;
    let h = pose.intrinsics.height as usize;
    let s = opts.supersample as usize;
    let inv_samples = 1.0 / (s * s) as f64;
    let origin = pose.position_m;
    // nadir rays have dir.z == -1, so the ground lies at t == altitude
    let t_ground = origin[2];
    let origin32 = [origin[0] as f32, origin[1] as f32, origin[2] as f32];

    let mut temps = vec![0f32; w * h];
    let mut vis = vec![0f32; w * h];
    temps
        .par_chunks_mut(w)
        .zip(vis.par_chunks_mut(w))
        .enumerate()
        .for_each(|(j, (trow, vrow))| {
            for i in 0..w {
                let mut sum = 0f64;
                let mut ground = 0usize;
                let mut valid = true;
                for b in 0..s {
                    for a in 0..s {
                        let u = i as f64 + (a as f64 + 0.5) / s as f64;
                        let v = j as f64 + (b as f64 + 0.5) / s as f64;
                        let d = pose.ray_direction(u, v);
                        let hit = scene.and_then(|sc| {
                            let ray = Ray::new(origin32, [d[0] as f32, d[1] as f32, d[2] as f32]);
                            sc.bvh.closest(&sc.shapes, &ray, 0.0, t_ground as f32)
                        });
                        match hit {
                            Some((id, _)) => {
                                let sc = scene.expect("hit implies scene");
                                sum += sc.elements[id as usize].temperature_c as f64;
                            }
                            None => {
                                let gx = origin[0] + t_ground * d[0];
                                let gy = origin[1] + t_ground * d[1];
                                let (px, py) = surface.ground_to_pixel(gx, gy);
                                let t = surface.sample(px, py);
                                if t.is_nan() {
                                    valid = false;
                                }
                                sum += t as f64;
                                ground += 1;
                            }
                        }
                    }
                }
                if valid {
                    trow[i] = (sum * inv_samples) as f32;
                    vrow[i] = (ground as f64 * inv_samples) as f32;
                } else {
                    trow[i] = NO_DATA;
                    vrow[i] = NO_DATA;
                }
            }
        });
    let res = (t_ground / pose.intrinsics.focal_px()) as f32;
    let image = TemperatureRaster::new(w as u32, h as u32, ambient_c, res, temps)?;
    let mask = VisibilityMask::new(TemperatureRaster::new(w as u32, h as u32, ambient_c, res, vis)?)?;
    Ok((image, mask))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::Intrinsics;
    use crate::forest::{Leaf, ThermalEnv, Tree};

    fn surface() -> TemperatureRaster {
        // 30 m square, 0.1 m pixels, gradient along x
        TemperatureRaster::from_fn(300, 300, 9.0, 0.1, |x, _| 5.0 + 0.05 * x as f32).unwrap()
    }

    fn env() -> ThermalEnv {
        ThermalEnv::new(9.0, 0.0, 0.0).unwrap()
    }

    #[test]
    fn empty_scene_sees_ground_everywhere() {
        let scene = ForestScene::from_trees(30.0, vec![], surface(), env()).unwrap();
        let pose = CameraPose::nadir(15.0, 15.0, 35.0, Intrinsics::square(64));
        let (img, mask) = render_thermal(&scene, &pose, RenderOptions::default()).unwrap();
        assert!(mask.raster().data().iter().all(|&f| f == 1.0));
        let bare = render_ground(scene.surface(), &pose, RenderOptions::default()).unwrap();
        assert_eq!(img, bare);
        // linear field is reproduced exactly up to rounding
        let (gx, _) = pose.project_to_ground(10.5, 3.5, 0.0).map(|g| (g[0], g[1])).unwrap();
        let expect = 5.0 + 0.05 * (gx / 0.1 - 0.5);
        assert!((img.get(10, 3) as f64 - expect).abs() < 1e-3);
    }

    #[test]
    fn disc_over_center_blocks_ground() {
        let tree = Tree {
            position_m: [15.0, 15.0],
            height_m: 10.0,
            trunk_length_m: 0.0,
            trunk_diameter_m: 0.0,
            crown_radius_m: 1.0,
            leaves: vec![Leaf {
                center: [15.0, 15.0, 10.0],
                normal: [0.0, 0.0, 1.0],
                radius: 1.0,
            }],
        };
        let env = ThermalEnv::new(9.0, 7.0, 0.0).unwrap();
        let scene = ForestScene::from_trees(30.0, vec![tree], surface(), env).unwrap();
        let pose = CameraPose::nadir(15.0, 15.0, 35.0, Intrinsics::square(64));
        let (img, mask) = render_thermal(&scene, &pose, RenderOptions::default()).unwrap();
        // disc radius 1 m at 25 m depth covers ~2.6 px around the center
        for (x, y) in [(31, 31), (32, 32), (31, 32), (32, 31)] {
            assert_eq!(img.get(x, y), 16.0);
            assert_eq!(mask.raster().get(x, y), 0.0);
        }
        assert_eq!(mask.raster().get(0, 0), 1.0);
        assert_ne!(img.get(0, 0), 16.0);
    }

    #[test]
    fn camera_below_canopy_rejected() {
        let tree = Tree {
            position_m: [15.0, 15.0],
            height_m: 20.0,
            trunk_length_m: 5.0,
            trunk_diameter_m: 0.3,
            crown_radius_m: 1.0,
            leaves: vec![],
        };
        let scene = ForestScene::from_trees(30.0, vec![tree], surface(), env()).unwrap();
        let pose = CameraPose::nadir(15.0, 15.0, 15.0, Intrinsics::square(8));
        assert!(matches!(
            render_thermal(&scene, &pose, RenderOptions::default()),
            Err(Error::Param(_))
        ));
    }
}
