//! Procedural broadleaf forest over a surface-temperature field, with nadir
//! thermal rendering and per-pixel ground-visibility bookkeeping.
//!
//! Trees are an opaque trunk cylinder plus an ellipsoidal crown filled with
//! randomly oriented opaque leaf discs. Vegetation temperature is the ambient
//! temperature plus a solar term weighted by each element's sun exposure,
//! found with shadow rays against the same scene.

mod bvh;
mod render;

pub use render::{render_ground, render_thermal, RenderOptions};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::TemperatureRaster;
use bvh::{Bvh, Ray, Shape};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeRange {
    pub min: f64,
    pub max: f64,
}

impl SizeRange {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    fn validate(&self, name: &str) -> Result<()> {
        if !(self.min > 0.0 && self.min <= self.max && self.max.is_finite()) {
            return Err(Error::param(format!(
                "{name} range [{}, {}] must be positive with min <= max",
                self.min, self.max
            )));
        }
        Ok(())
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        if self.max > self.min {
            rng.gen_range(self.min..self.max)
        } else {
            self.min
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    /// Trees per hectare.
    pub density_tpha: f64,
    /// Side of the square forest area, meters; trees stand in `[0, extent]²`.
    pub extent_m: f64,
    pub seed: u64,
    pub tree_height_m: SizeRange,
    pub trunk_length_m: SizeRange,
    pub trunk_diameter_m: SizeRange,
    pub leaf_size_m: SizeRange,
    /// One-sided leaf area per unit ground area along a crown's vertical axis.
    pub crown_leaf_area_index: f64,
    pub min_tree_spacing_m: f64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            density_tpha: 220.0,
            extent_m: 42.0,
            seed: 0,
            tree_height_m: SizeRange::new(5.0, 20.0),
            trunk_length_m: SizeRange::new(4.0, 8.0),
            trunk_diameter_m: SizeRange::new(0.20, 0.50),
            leaf_size_m: SizeRange::new(0.05, 0.20),
            crown_leaf_area_index: 1.6,
            min_tree_spacing_m: 1.5,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=2000.0).contains(&self.density_tpha) {
            return Err(Error::param(format!(
                "density {} t/ha outside [0, 2000]",
                self.density_tpha
            )));
        }
        if !(self.extent_m > 0.0 && self.extent_m.is_finite()) {
            return Err(Error::param("forest extent must be positive"));
        }
        self.tree_height_m.validate("tree height")?;
        self.trunk_length_m.validate("trunk length")?;
        self.trunk_diameter_m.validate("trunk diameter")?;
        self.leaf_size_m.validate("leaf size")?;
        if !(self.crown_leaf_area_index >= 0.0 && self.crown_leaf_area_index.is_finite()) {
            return Err(Error::param("crown leaf area index must be non-negative"));
        }
        if !(self.min_tree_spacing_m >= 0.0) {
            return Err(Error::param("minimum tree spacing must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalEnv {
    pub ambient_c: f32,
    /// Solar heating of fully exposed vegetation above ambient, `[0, 15]` °C.
    pub sun_absorption_c: f32,
    /// Sun direction from zenith in the east-west plane; positive is east.
    pub solar_angle_deg: f32,
}

impl ThermalEnv {
    pub fn new(ambient_c: f32, sun_absorption_c: f32, solar_angle_deg: f32) -> Result<Self> {
        let env = Self {
            ambient_c,
            sun_absorption_c,
            solar_angle_deg,
        };
        env.validate()?;
        Ok(env)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.ambient_c.is_finite() {
            return Err(Error::param("ambient temperature must be finite"));
        }
        if !(0.0..=15.0).contains(&self.sun_absorption_c) {
            return Err(Error::param(format!(
                "sun absorption {} outside [0, 15] °C",
                self.sun_absorption_c
            )));
        }
        if !(-90.0..=90.0).contains(&self.solar_angle_deg) {
            return Err(Error::param(format!(
                "solar angle {} outside [-90, 90]°",
                self.solar_angle_deg
            )));
        }
        Ok(())
    }

    /// Unit vector pointing towards the sun.
    pub fn sun_direction(&self) -> [f32; 3] {
        let a = (self.solar_angle_deg as f64).to_radians();
        [a.sin() as f32, 0.0, a.cos() as f32]
    }

    /// Canopy temperature midway between shaded and fully sunlit.
    pub fn mean_vegetation_c(&self) -> f32 {
        self.ambient_c + 0.5 * self.sun_absorption_c
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Leaf {
    pub center: [f32; 3],
    pub normal: [f32; 3],
    pub radius: f32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub position_m: [f64; 2],
    pub height_m: f64,
    pub trunk_length_m: f64,
    pub trunk_diameter_m: f64,
    pub crown_radius_m: f64,
    #[serde(skip)]
    pub leaves: Vec<Leaf>,
}

impl Tree {
    /// Vertical semi-axis and center height of the crown ellipsoid.
    pub fn crown_vertical(&self) -> (f64, f64) {
        let half = 0.5 * (self.height_m - self.trunk_length_m);
        (half, self.trunk_length_m + half)
    }
}

/// Index of a trunk or leaf within a [`ForestScene`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ElementId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ElementKind {
    Trunk,
    Leaf,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElementInfo {
    pub tree: u32,
    pub kind: ElementKind,
    /// Sun-facing fraction in `[0, 1]`; zero when shadowed.
    pub exposure: f32,
    pub temperature_c: f32,
}

/// Temperature of a vegetation element with the given sun exposure.
pub fn vegetation_temperature(exposure: f32, env: &ThermalEnv) -> f32 {
    env.ambient_c + env.sun_absorption_c * exposure.clamp(0.0, 1.0)
}

/// Immutable forest over a bound surface-temperature raster.
#[derive(Debug, Clone)]
pub struct ForestScene {
    extent_m: f64,
    trees: Vec<Tree>,
    surface: TemperatureRaster,
    env: ThermalEnv,
    shapes: Vec<Shape>,
    elements: Vec<ElementInfo>,
    bvh: Bvh,
    max_height_m: f64,
}

/// Crown radius grows with tree height.
fn crown_radius_for(height_m: f64) -> f64 {
    1.0 + 0.2 * height_m
}

/// Mean area of discs whose diameter is uniform over `range`.
fn mean_leaf_area(range: &SizeRange) -> f64 {
    let (a, b) = (range.min, range.max);
    let mean_d2 = if b > a {
        (b.powi(3) - a.powi(3)) / (3.0 * (b - a))
    } else {
        a * a
    };
    std::f64::consts::PI / 4.0 * mean_d2
}

fn place_trees(fp: &ForestParams, rng: &mut ChaCha8Rng) -> Vec<[f64; 2]> {
    let area_m2 = fp.extent_m * fp.extent_m;
    let cells = area_m2.round().max(1.0) as u64;
    let p = (fp.density_tpha * area_m2 / 10_000.0 / cells as f64).clamp(0.0, 1.0);
    let count = if p > 0.0 {
        Binomial::new(cells, p).expect("valid binomial").sample(rng)
    } else {
        0
    };
    let min_d2 = fp.min_tree_spacing_m * fp.min_tree_spacing_m;
    let mut placed: Vec<[f64; 2]> = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let mut candidate = [0.0; 2];
        for _attempt in 0..64 {
            candidate = [rng.gen_range(0.0..fp.extent_m), rng.gen_range(0.0..fp.extent_m)];
            let clear = placed.iter().all(|q| {
                let dx = q[0] - candidate[0];
                let dy = q[1] - candidate[1];
                dx * dx + dy * dy >= min_d2
            });
            if clear {
                break;
            }
        }
        placed.push(candidate);
    }
    placed
}

fn unit_sphere(rng: &mut impl Rng) -> [f32; 3] {
    let z: f64 = rng.gen_range(-1.0..1.0);
    let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let r = (1.0 - z * z).sqrt();
    [(r * phi.cos()) as f32, (r * phi.sin()) as f32, z as f32]
}

fn grow_tree(fp: &ForestParams, position: [f64; 2], tree_seed: u64) -> Tree {
    let mut rng = ChaCha8Rng::seed_from_u64(tree_seed);
    let height = fp.tree_height_m.sample(&mut rng);
    let trunk_length = fp.trunk_length_m.sample(&mut rng).min(height - 1.0).max(0.5);
    let trunk_diameter = fp.trunk_diameter_m.sample(&mut rng);
    let crown_radius = crown_radius_for(height);
    let mut tree = Tree {
        position_m: position,
        height_m: height,
        trunk_length_m: trunk_length,
        trunk_diameter_m: trunk_diameter,
        crown_radius_m: crown_radius,
        leaves: Vec::new(),
    };
    let (half, zc) = tree.crown_vertical();
    let leaf_area = 2.0 / 3.0 * std::f64::consts::PI * crown_radius * crown_radius * fp.crown_leaf_area_index;
    let n_leaves = (leaf_area / mean_leaf_area(&fp.leaf_size_m)).round() as usize;
    tree.leaves.reserve(n_leaves);
    while tree.leaves.len() < n_leaves {
        let p: [f64; 3] = [
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ];
        if p[0] * p[0] + p[1] * p[1] + p[2] * p[2] > 1.0 {
            continue;
        }
        let size = fp.leaf_size_m.sample(&mut rng);
        tree.leaves.push(Leaf {
            center: [
                (position[0] + p[0] * crown_radius) as f32,
                (position[1] + p[1] * crown_radius) as f32,
                (zc + p[2] * half) as f32,
            ],
            normal: unit_sphere(&mut rng),
            radius: (0.5 * size) as f32,
        });
    }
    tree
}

fn tree_seed(scene_seed: u64, index: usize) -> u64 {
    scene_seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add((index as u64 + 1).wrapping_mul(0xD1B5_4A32_D192_ED03))
}

/// Builds a procedural forest over `surface`.
pub fn build_scene(fp: &ForestParams, surface: TemperatureRaster, env: ThermalEnv) -> Result<ForestScene> {
    fp.validate()?;
    let (w, h) = surface.extent_m();
    if w + 1e-6 < fp.extent_m || h + 1e-6 < fp.extent_m {
        return Err(Error::param(format!(
            "surface covers {w:.2} m x {h:.2} m, smaller than the {} m forest",
            fp.extent_m
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(fp.seed);
    let positions = place_trees(fp, &mut rng);
    let trees: Vec<Tree> = positions
        .par_iter()
        .enumerate()
        .map(|(i, &p)| grow_tree(fp, p, tree_seed(fp.seed, i)))
        .collect();
    ForestScene::from_trees(fp.extent_m, trees, surface, env)
}

impl ForestScene {
    /// Assembles a scene from explicit trees. Leaves may lie anywhere above
    /// the ground; trunks stand on the ground plane.
    pub fn from_trees(extent_m: f64, trees: Vec<Tree>, surface: TemperatureRaster, env: ThermalEnv) -> Result<Self> {
        env.validate()?;
        for (i, t) in trees.iter().enumerate() {
            let [x, y] = t.position_m;
            if !(x >= 0.0 && x <= extent_m && y >= 0.0 && y <= extent_m) {
                return Err(Error::param(format!("tree {i} at ({x}, {y}) outside the forest extent")));
            }
        }
        let mut shapes = Vec::new();
        let mut owners = Vec::new();
        let mut max_height_m: f64 = 0.0;
        for (i, t) in trees.iter().enumerate() {
            if t.trunk_length_m > 0.0 && t.trunk_diameter_m > 0.0 {
                shapes.push(Shape::Cylinder {
                    axis: [t.position_m[0] as f32, t.position_m[1] as f32],
                    base_z: 0.0,
                    radius: (0.5 * t.trunk_diameter_m) as f32,
                    height: t.trunk_length_m as f32,
                });
                owners.push((i as u32, ElementKind::Trunk));
                max_height_m = max_height_m.max(t.trunk_length_m);
            }
            for leaf in &t.leaves {
                shapes.push(Shape::Disc {
                    center: leaf.center,
                    normal: leaf.normal,
                    radius: leaf.radius,
                });
                owners.push((i as u32, ElementKind::Leaf));
                max_height_m = max_height_m.max(leaf.center[2] as f64 + leaf.radius as f64);
            }
            max_height_m = max_height_m.max(t.height_m);
        }
        let bvh = Bvh::build(&shapes);
        let sun = env.sun_direction();
        let exposures: Vec<f32> = shapes
            .par_iter()
            .enumerate()
            .map(|(i, s)| exposure(&bvh, &shapes, i as u32, s, sun))
            .collect();
        let elements = owners
            .into_iter()
            .zip(exposures)
            .map(|((tree, kind), exposure)| ElementInfo {
                tree,
                kind,
                exposure,
                temperature_c: vegetation_temperature(exposure, &env),
            })
            .collect();
        Ok(Self {
            extent_m,
            trees,
            surface,
            env,
            shapes,
            elements,
            bvh,
            max_height_m,
        })
    }

    /// Same trees over a different surface field and thermal environment.
    pub fn rebind(&self, surface: TemperatureRaster, env: ThermalEnv) -> Result<Self> {
        Self::from_trees(self.extent_m, self.trees.clone(), surface, env)
    }

    pub fn extent_m(&self) -> f64 {
        self.extent_m
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn surface(&self) -> &TemperatureRaster {
        &self.surface
    }

    pub fn env(&self) -> &ThermalEnv {
        &self.env
    }

    pub fn element_count(&self) -> usize {
        self.elements.len()
    }

    pub fn element(&self, id: ElementId) -> Option<&ElementInfo> {
        self.elements.get(id.0 as usize)
    }

    pub fn elements(&self) -> impl Iterator<Item = (ElementId, &ElementInfo)> {
        self.elements.iter().enumerate().map(|(i, e)| (ElementId(i as u32), e))
    }

    /// Temperature of one element under the scene's environment.
    pub fn vegetation_temperature(&self, id: ElementId) -> Option<f32> {
        self.element(id).map(|e| vegetation_temperature(e.exposure, &self.env))
    }

    /// Highest point of any vegetation element.
    pub fn max_height_m(&self) -> f64 {
        self.max_height_m
    }

    /// First element hit by a ray, with its distance.
    pub fn first_hit(&self, origin: [f64; 3], dir: [f64; 3], max_t: f64) -> Option<(ElementId, f64)> {
        let ray = Ray::new(
            [origin[0] as f32, origin[1] as f32, origin[2] as f32],
            [dir[0] as f32, dir[1] as f32, dir[2] as f32],
        );
        self.bvh
            .closest(&self.shapes, &ray, 0.0, max_t as f32)
            .map(|(id, t)| (ElementId(id), t as f64))
    }

    /// Tree list for reproducibility exports.
    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Export<'a> {
            extent_m: f64,
            env: &'a ThermalEnv,
            trees: Vec<TreeExport<'a>>,
        }
        #[derive(Serialize)]
        struct TreeExport<'a> {
            #[serde(flatten)]
            tree: &'a Tree,
            leaf_count: usize,
        }
        let export = Export {
            extent_m: self.extent_m,
            env: &self.env,
            trees: self
                .trees
                .iter()
                .map(|tree| TreeExport {
                    tree,
                    leaf_count: tree.leaves.len(),
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&export)?)
    }
}

const SHADOW_EPS: f32 = 1e-3;

fn exposure(bvh: &Bvh, shapes: &[Shape], id: u32, shape: &Shape, sun: [f32; 3]) -> f32 {
    let lit = |p: [f32; 3]| {
        let origin = [
            p[0] + SHADOW_EPS * sun[0],
            p[1] + SHADOW_EPS * sun[1],
            p[2] + SHADOW_EPS * sun[2],
        ];
        !bvh.occluded(shapes, &Ray::new(origin, sun), 0.0, f32::INFINITY, id)
    };
    match *shape {
        Shape::Disc { center, normal, .. } => {
            let facing = bvh::dot(normal, sun).abs();
            if facing > 0.0 && lit(center) {
                facing
            } else {
                0.0
            }
        }
        Shape::Cylinder { axis, base_z, radius, height } => {
            let horizontal = (sun[0] * sun[0] + sun[1] * sun[1]).sqrt();
            if horizontal <= 0.0 {
                return 0.0;
            }
            let off = [sun[0] / horizontal * radius, sun[1] / horizontal * radius];
            let lit_samples = [0.25f32, 0.5, 0.75]
                .iter()
                .filter(|&&f| lit([axis[0] + off[0], axis[1] + off[1], base_z + f * height]))
                .count();
            horizontal * lit_samples as f32 / 3.0
        }
    }
}

/// Per-pixel fraction of rays that reached the ground, in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct VisibilityMask(TemperatureRaster);

impl VisibilityMask {
    pub fn new(raster: TemperatureRaster) -> Result<Self> {
        if let Some(v) = raster.data().iter().find(|v| !v.is_nan() && !(0.0..=1.0).contains(*v)) {
            return Err(Error::param(format!("visibility value {v} outside [0, 1]")));
        }
        Ok(Self(raster))
    }

    pub fn raster(&self) -> &TemperatureRaster {
        &self.0
    }

    pub fn into_raster(self) -> TemperatureRaster {
        self.0
    }

    pub fn dims(&self) -> (u32, u32) {
        self.0.dims()
    }

    pub fn mean(&self) -> Option<f64> {
        crate::raster::raster_stats(&self.0, None).ok().map(|s| s.mean)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_surface(size: u32, res: f32) -> TemperatureRaster {
        TemperatureRaster::filled(size, size, 12.0, 9.0, res).unwrap()
    }

    fn params(density: f64, seed: u64) -> ForestParams {
        ForestParams {
            density_tpha: density,
            extent_m: 100.0,
            seed,
            ..ForestParams::default()
        }
    }

    #[test]
    fn expected_tree_count() {
        // 1 ha at 220 t/ha; placement only, no leaves needed
        let mut total = 0usize;
        for seed in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            total += place_trees(&params(220.0, seed), &mut rng).len();
        }
        let mean = total as f64 / 100.0;
        assert!((mean - 220.0).abs() <= 15.0, "{mean}");
    }

    #[test]
    fn empty_and_deterministic() {
        let env = ThermalEnv::new(9.0, 5.0, 30.0).unwrap();
        let mut fp = params(0.0, 1);
        fp.extent_m = 10.0;
        let s = build_scene(&fp, flat_surface(100, 0.1), env).unwrap();
        assert!(s.trees().is_empty());
        fp.density_tpha = 600.0;
        let a = build_scene(&fp, flat_surface(100, 0.1), env).unwrap();
        let b = build_scene(&fp, flat_surface(100, 0.1), env).unwrap();
        assert!(!a.trees().is_empty());
        assert_eq!(a.trees(), b.trees());
    }

    #[test]
    fn surface_must_cover_extent() {
        let env = ThermalEnv::new(9.0, 0.0, 0.0).unwrap();
        assert!(matches!(
            build_scene(&params(100.0, 0), flat_surface(10, 1.0), env),
            Err(Error::Param(_))
        ));
    }

    #[test]
    fn tree_attributes_in_ranges() {
        let env = ThermalEnv::new(9.0, 0.0, 0.0).unwrap();
        let mut fp = params(400.0, 4);
        fp.extent_m = 20.0;
        let s = build_scene(&fp, flat_surface(200, 0.1), env).unwrap();
        for t in s.trees() {
            assert!((5.0..=20.0).contains(&t.height_m));
            assert!(t.trunk_length_m <= 8.0 && t.trunk_length_m < t.height_m);
            assert!((0.2..=0.5).contains(&t.trunk_diameter_m));
            for l in &t.leaves {
                assert!((0.025..=0.1).contains(&l.radius));
            }
        }
        for (a, b) in s.trees().iter().zip(s.trees().iter().skip(1)) {
            let d = ((a.position_m[0] - b.position_m[0]).powi(2) + (a.position_m[1] - b.position_m[1]).powi(2)).sqrt();
            assert!(d > 0.0);
        }
    }

    fn single_leaf_scene(normal: [f32; 3], env: ThermalEnv) -> ForestScene {
        let tree = Tree {
            position_m: [5.0, 5.0],
            height_m: 10.0,
            trunk_length_m: 0.0,
            trunk_diameter_m: 0.0,
            crown_radius_m: 1.0,
            leaves: vec![Leaf {
                center: [5.0, 5.0, 9.0],
                normal,
                radius: 0.5,
            }],
        };
        ForestScene::from_trees(10.0, vec![tree], flat_surface(100, 0.1), env).unwrap()
    }

    #[test]
    fn sunlit_leaf_reaches_full_absorption() {
        let env = ThermalEnv::new(9.0, 7.0, 30.0).unwrap();
        let leaf = single_leaf_scene(env.sun_direction(), env);
        let t = leaf.vegetation_temperature(ElementId(0)).unwrap();
        assert!((t - 16.0).abs() < 1e-5);
    }

    #[test]
    fn no_sun_means_ambient() {
        let env = ThermalEnv::new(9.0, 0.0, 30.0).unwrap();
        let leaf = single_leaf_scene(env.sun_direction(), env);
        assert_eq!(leaf.vegetation_temperature(ElementId(0)).unwrap(), 9.0);
    }

    #[test]
    fn shadowed_leaf_stays_at_ambient() {
        let env = ThermalEnv::new(9.0, 7.0, 0.0).unwrap();
        let mk = |z: f32| Leaf {
            center: [5.0, 5.0, z],
            normal: [0.0, 0.0, 1.0],
            radius: 0.5,
        };
        let tree = Tree {
            position_m: [5.0, 5.0],
            height_m: 10.0,
            trunk_length_m: 0.0,
            trunk_diameter_m: 0.0,
            crown_radius_m: 1.0,
            leaves: vec![mk(8.0), mk(9.0)],
        };
        let s = ForestScene::from_trees(10.0, vec![tree], flat_surface(100, 0.1), env).unwrap();
        assert_eq!(s.vegetation_temperature(ElementId(0)).unwrap(), 9.0);
        assert_eq!(s.vegetation_temperature(ElementId(1)).unwrap(), 16.0);
    }

    #[test]
    fn env_validation() {
        assert!(ThermalEnv::new(9.0, 16.0, 0.0).is_err());
        assert!(ThermalEnv::new(9.0, 5.0, 91.0).is_err());
    }

    #[test]
    fn mask_rejects_out_of_range() {
        let r = TemperatureRaster::new(2, 1, 0.0, 1.0, vec![0.5, 1.5]).unwrap();
        assert!(VisibilityMask::new(r).is_err());
    }
}
