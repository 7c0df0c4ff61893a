//! Thermal synthetic-aperture imaging of ground fires under forest canopy.
//!
//! The crate simulates drone flights over procedurally generated forests,
//! suppresses canopy occlusion with airborne optical sectioning (AOS), and
//! recovers and scores surface temperatures.
//!
//! Pipeline stages, in order:
//!
//! - [`surface`]: ground-truth surface temperature fields and the ambient / fire
//!   temperature augmentation.
//! - [`forest`]: procedural trees, solar heating of the canopy, and nadir thermal
//!   rendering with per-pixel ground visibility.
//! - [`camera`] and [`aos`]: projection onto the ground plane, back-projection to
//!   the aperture center, and integration (single window or sliding).
//! - [`correction`]: analytic occlusion unmixing, plus a file-exchange protocol for
//!   external restoration backends.
//! - [`detect`] and [`eval`]: hotspot detection, RMSE per temperature regime, and
//!   parameter sweeps.
//!
//! [`raster`] holds the shared temperature image type and its TGR1 file format.

// `!(x > y)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aos;
pub mod camera;
pub mod correction;
pub mod dataset;
pub mod detect;
pub mod error;
pub mod eval;
pub mod forest;
pub mod plot;
pub mod raster;
pub mod sim;
pub mod surface;

pub use aos::{integrate, integrate_mask, sliding_integrate, Capture, Frame, IntegralImage, SaGrid, SaSample};
pub use camera::{backproject_to_center, project_to_ground, CameraPose, Intrinsics};
pub use correction::{correct_analytic, correct_external, estimate_ambient, CorrectionBackend, CorrectionInput};
pub use detect::{detect_hotspots, morphology_iou, Hotspot};
pub use error::{Error, Result};
pub use eval::{rmse, run_sweep, EvaluationRecord, SweepConfig};
pub use forest::{build_scene, render_thermal, ForestParams, ForestScene, ThermalEnv, VisibilityMask};
pub use raster::{raster_stats, read_raster, resample_bilinear, write_raster, RegimeMask, TemperatureRaster};
pub use surface::{augment_fire, augment_nonfire, augment_raster, gen_surface_field, AugmentationParams, HotspotSpec};
