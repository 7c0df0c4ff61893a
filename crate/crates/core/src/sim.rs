//! Simulated drone flights: surface field, augmentation, forest, and the
//! rendered synthetic-aperture capture with its ground truth.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aos::{Capture, Frame, SaGrid};
use crate::camera::{CameraPose, Intrinsics};
use crate::error::{Error, Result};
use crate::forest::{build_scene, render_ground, render_thermal, ForestParams, ForestScene, RenderOptions, ThermalEnv};
use crate::raster::TemperatureRaster;
use crate::surface::{
    augment_raster, gen_surface_field, AugmentationParams, HotspotSpec, SurfaceParams, DEFAULT_ALPHA, REFERENCE_AMBIENT_C,
    REFERENCE_MAX_FIRE_C,
};

/// Everything needed to reproduce one simulated flight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlightConfig {
    pub seed: u64,
    /// Target ambient temperature; the reference field is shifted onto it.
    pub ambient_c: f32,
    pub sun_absorption_c: f32,
    pub solar_angle_deg: f32,
    pub density_tpha: f64,
    pub image_size: u32,
    pub grid: SaGrid,
    /// Hotspots of the reference field. `center_m` is the offset in meters
    /// (east, north) from the aperture center; peaks are on the reference scale.
    pub hotspots: Vec<HotspotSpec>,
    /// Highest fire temperature of the reference scale.
    pub t_max_c: f32,
    /// Temperature the reference maximum is scaled to.
    pub t_max_target_c: f32,
    /// Sigmoid steepness of the non-fire weighting.
    pub alpha: f32,
    pub supersample: u32,
    /// Surface pixels per image pixel along each axis. A finer ground
    /// texture keeps the renderer's resampling blur out of the frames.
    pub surface_oversample: u32,
    /// Tree geometry; density, seed, and extent are overridden per flight.
    pub forest: ForestParams,
}

impl Default for FlightConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            ambient_c: 15.0,
            sun_absorption_c: 7.0,
            solar_angle_deg: 0.0,
            density_tpha: 585.0,
            image_size: 256,
            grid: SaGrid::default(),
            hotspots: Vec::new(),
            t_max_c: REFERENCE_MAX_FIRE_C,
            t_max_target_c: 300.0,
            alpha: DEFAULT_ALPHA,
            supersample: 1,
            surface_oversample: 2,
            forest: ForestParams::default(),
        }
    }
}

/// Which waypoints to render.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameSet {
    All,
    CenterOnly,
    /// Central row and column, enough for both strip apertures.
    CenterCross,
}

/// Geometry shared by the surface raster and the aperture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlightLayout {
    /// Ground sampling distance of the central camera.
    pub ground_res_m: f32,
    /// Pixel size of the surface raster.
    pub surface_res_m: f32,
    pub surface_size: u32,
    pub pad_px: u32,
    pub center_m: [f64; 2],
    pub intrinsics: Intrinsics,
}

impl FlightConfig {
    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        if self.image_size == 0 {
            return Err(Error::param("image size must be positive"));
        }
        if self.supersample == 0 {
            return Err(Error::param("supersample must be at least 1"));
        }
        if self.surface_oversample == 0 {
            return Err(Error::param("surface oversampling must be at least 1"));
        }
        ThermalEnv::new(self.ambient_c, self.sun_absorption_c, self.solar_angle_deg)?;
        Ok(())
    }

    pub fn env(&self) -> ThermalEnv {
        ThermalEnv {
            ambient_c: self.ambient_c,
            sun_absorption_c: self.sun_absorption_c,
            solar_angle_deg: self.solar_angle_deg,
        }
    }

    /// The surface extends past the central footprint by the aperture's reach
    /// so every waypoint sees mapped ground, and its pixel grid lines up with
    /// the central camera's.
    pub fn layout(&self) -> FlightLayout {
        let intrinsics = Intrinsics::square(self.image_size);
        let res = self.grid.altitude_agl_m / intrinsics.focal_px();
        let c = self.grid.center_index();
        let reach_n = c[0].max(self.grid.n - 1 - c[0]) as f64 * self.grid.spacing_m;
        let reach_m = c[1].max(self.grid.m - 1 - c[1]) as f64 * self.grid.spacing_m;
        let pad_px = (reach_n.max(reach_m) / res).ceil() as u32 + 1;
        let k = self.surface_oversample;
        let surface_size = (self.image_size + 2 * pad_px) * k;
        let surface_res = res / k as f64;
        let half = surface_size as f64 * surface_res / 2.0;
        FlightLayout {
            ground_res_m: res as f32,
            surface_res_m: surface_res as f32,
            surface_size,
            pad_px,
            center_m: [half, half],
            intrinsics,
        }
    }

    pub fn augmentation(&self) -> Result<AugmentationParams> {
        let p = AugmentationParams {
            alpha: self.alpha,
            ..AugmentationParams::for_shift(REFERENCE_AMBIENT_C, self.ambient_c, self.t_max_c, self.t_max_target_c)?
        };
        p.validate()?;
        Ok(p)
    }
}

/// A rendered flight with its ground truth.
#[derive(Debug, Clone)]
pub struct Flight {
    pub config: FlightConfig,
    pub layout: FlightLayout,
    /// Augmented surface field the forest stands on.
    pub surface: TemperatureRaster,
    pub scene: ForestScene,
    pub capture: Capture,
    /// Surface temperatures as seen by an unoccluded central camera.
    pub truth: TemperatureRaster,
}

impl Flight {
    pub fn center_pose(&self) -> CameraPose {
        self.poses()
            .into_iter()
            .find(|(i, _)| *i == self.config.grid.center_index())
            .map(|(_, p)| p)
            .expect("grid has a center")
    }

    pub fn poses(&self) -> Vec<([u32; 2], CameraPose)> {
        self.config.grid.poses(self.layout.center_m, 0.0, self.layout.intrinsics)
    }

    pub fn center_frame(&self) -> &Frame {
        self.capture
            .frame(self.config.grid.center_index())
            .expect("center frame is always rendered")
    }
}

fn scene_seed(seed: u64) -> u64 {
    seed ^ 0xA5A5_5A5A_F00D_CAFE
}

/// Builds the surface field and forest for a flight without rendering.
pub fn build_flight_scene(cfg: &FlightConfig) -> Result<(FlightLayout, TemperatureRaster, ForestScene)> {
    cfg.validate()?;
    let layout = cfg.layout();
    let hotspots = cfg
        .hotspots
        .iter()
        .map(|h| HotspotSpec {
            center_m: [layout.center_m[0] + h.center_m[0], layout.center_m[1] + h.center_m[1]],
            ..*h
        })
        .collect();
    let reference = gen_surface_field(&SurfaceParams {
        seed: cfg.seed,
        ambient_c: REFERENCE_AMBIENT_C,
        size: layout.surface_size,
        ground_res_m: layout.surface_res_m,
        hotspots,
    })?;
    let surface = augment_raster(&reference, &cfg.augmentation()?)?;
    let forest = ForestParams {
        density_tpha: cfg.density_tpha,
        extent_m: surface.extent_m().0,
        seed: scene_seed(cfg.seed),
        ..cfg.forest.clone()
    };
    let scene = build_scene(&forest, surface.clone(), cfg.env())?;
    Ok((layout, surface, scene))
}

/// Renders the frames of a flight over an already built scene.
pub fn render_flight(cfg: &FlightConfig, layout: FlightLayout, scene: ForestScene, frames: FrameSet) -> Result<Flight> {
    let c = cfg.grid.center_index();
    let poses: Vec<_> = cfg
        .grid
        .poses(layout.center_m, 0.0, layout.intrinsics)
        .into_iter()
        .filter(|(i, _)| match frames {
            FrameSet::All => true,
            FrameSet::CenterOnly => *i == c,
            FrameSet::CenterCross => i[0] == c[0] || i[1] == c[1],
        })
        .collect();
    let opts = RenderOptions {
        supersample: cfg.supersample,
    };
    let rendered = poses
        .par_iter()
        .map(|(index, pose)| {
            let (image, mask) = render_thermal(&scene, pose, opts)?;
            Ok(Frame {
                index: *index,
                image,
                mask: Some(mask),
                pose: *pose,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let center_pose = poses.iter().find(|(i, _)| *i == c).map(|(_, p)| *p).expect("center rendered");
    let truth = render_ground(scene.surface(), &center_pose, opts)?;
    Ok(Flight {
        config: cfg.clone(),
        layout,
        surface: scene.surface().clone(),
        scene,
        capture: Capture {
            cols: cfg.grid.n,
            rows: cfg.grid.m,
            frames: rendered,
        },
        truth,
    })
}

pub fn simulate_flight(cfg: &FlightConfig, frames: FrameSet) -> Result<Flight> {
    let (layout, _, scene) = build_flight_scene(cfg)?;
    render_flight(cfg, layout, scene, frames)
}
