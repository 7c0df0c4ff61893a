//! On-disk flight datasets: TGR1 frames and masks, a pose manifest, ground
//! truth, and a run manifest describing how the directory was produced.
//!
//! ```text
//! <dir>/
//!   poses.json          [{index, position_m, yaw_deg, image, mask?, fov_deg?}, ...]
//!   images/n05_m05.tgr  one frame per waypoint
//!   masks/n05_m05.tgr   per-frame ground visibility (0 or 1)
//!   truth.tgr           unoccluded surface seen from the aperture center
//!   surface.tgr         full surface field the forest stands on
//!   scene.json          tree list
//!   run.json            run manifest
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::aos::{Capture, Frame, SaGrid};
use crate::camera::{default_fov_deg, CameraPose, Intrinsics};
use crate::error::{Error, Result};
use crate::forest::VisibilityMask;
use crate::raster::{read_raster, write_raster, TemperatureRaster};
use crate::sim::Flight;

pub const POSES_FILE: &str = "poses.json";
pub const RUN_FILE: &str = "run.json";
pub const TRUTH_FILE: &str = "truth.tgr";
pub const SURFACE_FILE: &str = "surface.tgr";
pub const SCENE_FILE: &str = "scene.json";

/// One entry of the pose manifest. Paths are relative to the dataset directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoseRecord {
    pub index: [u32; 2],
    pub position_m: [f64; 3],
    pub yaw_deg: f64,
    pub image: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mask: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fov_deg: Option<f64>,
}

/// Written next to every output set; re-running it reproduces the outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub tool_version: String,
    pub parameters: serde_json::Value,
    pub seeds: Vec<u64>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(subcommand: &str, parameters: serde_json::Value) -> Self {
        Self {
            subcommand: subcommand.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            parameters,
            seeds: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(path, self)
    }
}

pub(crate) fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn frame_name(index: [u32; 2]) -> String {
    format!("n{:02}_m{:02}.tgr", index[0], index[1])
}

/// Writes a rendered flight. Returns the paths written, relative to `dir`.
pub fn write_flight(flight: &Flight, dir: impl AsRef<Path>) -> Result<Vec<String>> {
    let dir = dir.as_ref();
    for sub in ["images", "masks"] {
        let p = dir.join(sub);
        fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
    }
    let mut written = Vec::new();
    let mut poses = Vec::with_capacity(flight.capture.frames.len());
    let mut frames: Vec<&Frame> = flight.capture.frames.iter().collect();
    frames.sort_by_key(|f| (f.index[1], f.index[0]));
    for f in frames {
        let image = format!("images/{}", frame_name(f.index));
        write_raster(&f.image, dir.join(&image))?;
        written.push(image.clone());
        let mask = match &f.mask {
            Some(m) => {
                let rel = format!("masks/{}", frame_name(f.index));
                write_raster(m.raster(), dir.join(&rel))?;
                written.push(rel.clone());
                Some(rel)
            }
            None => None,
        };
        poses.push(PoseRecord {
            index: f.index,
            position_m: f.pose.position_m,
            yaw_deg: f.pose.yaw_deg,
            image,
            mask,
            fov_deg: Some(f.pose.intrinsics.fov_deg),
        });
    }
    write_json(dir.join(POSES_FILE), &poses)?;
    write_raster(&flight.truth, dir.join(TRUTH_FILE))?;
    write_raster(&flight.surface, dir.join(SURFACE_FILE))?;
    let scene = flight.scene.to_json()?;
    fs::write(dir.join(SCENE_FILE), scene + "\n").map_err(|e| Error::io(dir.join(SCENE_FILE), e))?;
    written.extend([POSES_FILE, TRUTH_FILE, SURFACE_FILE, SCENE_FILE].map(String::from));
    Ok(written)
}

/// A capture read back from a dataset directory.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub dir: PathBuf,
    pub capture: Capture,
    /// Grid inferred from the pose manifest.
    pub grid: SaGrid,
    pub truth: Option<TemperatureRaster>,
}

impl Dataset {
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        let poses_path = dir.join(POSES_FILE);
        let text = fs::read_to_string(&poses_path).map_err(|e| Error::io(&poses_path, e))?;
        let poses: Vec<PoseRecord> = serde_json::from_str(&text)?;
        if poses.is_empty() {
            return Err(Error::param(format!("{} lists no poses", poses_path.display())));
        }
        let grid = infer_grid(&poses)?;
        let mut frames = Vec::with_capacity(poses.len());
        for p in &poses {
            let image = read_raster(dir.join(&p.image))?;
            let mask = match &p.mask {
                Some(m) => Some(VisibilityMask::new(read_raster(dir.join(m))?)?),
                None => None,
            };
            let intrinsics = Intrinsics {
                width: image.width(),
                height: image.height(),
                fov_deg: p.fov_deg.unwrap_or_else(default_fov_deg),
            };
            intrinsics.validate()?;
            frames.push(Frame {
                index: p.index,
                pose: CameraPose {
                    position_m: p.position_m,
                    yaw_deg: p.yaw_deg,
                    intrinsics,
                },
                image,
                mask,
            });
        }
        let truth_path = dir.join(TRUTH_FILE);
        let truth = truth_path.exists().then(|| read_raster(&truth_path)).transpose()?;
        Ok(Self {
            dir,
            capture: Capture {
                cols: grid.n,
                rows: grid.m,
                frames,
            },
            grid,
            truth,
        })
    }

    /// Ambient temperature recorded in the frame headers.
    pub fn ambient_c(&self) -> f32 {
        self.capture.frames[0].image.ambient_c()
    }
}

/// Grid size from the largest waypoint index, spacing from neighboring
/// positions, altitude from the frame heights (ground at zero).
fn infer_grid(poses: &[PoseRecord]) -> Result<SaGrid> {
    let n = poses.iter().map(|p| p.index[0]).max().unwrap_or(0) + 1;
    let m = poses.iter().map(|p| p.index[1]).max().unwrap_or(0) + 1;
    let by_index: BTreeMap<[u32; 2], &PoseRecord> = poses.iter().map(|p| (p.index, p)).collect();
    let mut spacing = None;
    'outer: for p in poses {
        for (dn, dm) in [(1u32, 0u32), (0, 1)] {
            if let Some(q) = by_index.get(&[p.index[0] + dn, p.index[1] + dm]) {
                let dx = q.position_m[0] - p.position_m[0];
                let dy = q.position_m[1] - p.position_m[1];
                spacing = Some(dx.hypot(dy));
                break 'outer;
            }
        }
    }
    let altitude = poses.iter().map(|p| p.position_m[2]).sum::<f64>() / poses.len() as f64;
    // a single waypoint has no spacing; any positive value describes it
    SaGrid::new(n, m, spacing.unwrap_or(1.0), altitude)
}
