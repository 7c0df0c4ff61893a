//! Bounding volume hierarchy over leaf discs and trunk cylinders.

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Shape {
    /// Two-sided disc.
    Disc {
        center: [f32; 3],
        normal: [f32; 3],
        radius: f32,
    },
    /// Vertical capped cylinder standing on `z = base_z`.
    Cylinder {
        axis: [f32; 2],
        base_z: f32,
        radius: f32,
        height: f32,
    },
}

impl Shape {
    pub(crate) fn bounds(&self) -> Aabb {
        match *self {
            Shape::Disc { center, normal, radius } => {
                // exact half-extent of a disc along each axis
                let mut min = [0f32; 3];
                let mut max = [0f32; 3];
                for k in 0..3 {
                    let e = radius * (1.0 - normal[k] * normal[k]).max(0.0).sqrt();
                    min[k] = center[k] - e;
                    max[k] = center[k] + e;
                }
                Aabb { min, max }
            }
            Shape::Cylinder { axis, base_z, radius, height } => Aabb {
                min: [axis[0] - radius, axis[1] - radius, base_z],
                max: [axis[0] + radius, axis[1] + radius, base_z + height],
            },
        }
    }

    pub(crate) fn centroid(&self) -> [f32; 3] {
        match *self {
            Shape::Disc { center, .. } => center,
            Shape::Cylinder { axis, base_z, height, .. } => [axis[0], axis[1], base_z + 0.5 * height],
        }
    }

    /// Nearest hit distance in `(t_min, t_max)`.
    #[inline]
    pub(crate) fn intersect(&self, ray: &Ray, t_min: f32, t_max: f32) -> Option<f32> {
        match *self {
            Shape::Disc { center, normal, radius } => {
                let denom = dot(ray.dir, normal);
                if denom.abs() < 1e-12 {
                    return None;
                }
                let oc = sub(center, ray.origin);
                let t = dot(oc, normal) / denom;
                if !(t > t_min && t < t_max) {
                    return None;
                }
                let p = add(ray.origin, scale(ray.dir, t));
                let d = sub(p, center);
                (dot(d, d) <= radius * radius).then_some(t)
            }
            Shape::Cylinder { axis, base_z, radius, height } => {
                let top = base_z + height;
                let mut best: Option<f32> = None;
                // caps
                if ray.dir[2].abs() > 1e-12 {
                    for z in [top, base_z] {
                        let t = (z - ray.origin[2]) / ray.dir[2];
                        if t > t_min && t < t_max && best.is_none_or(|b| t < b) {
                            let x = ray.origin[0] + t * ray.dir[0] - axis[0];
                            let y = ray.origin[1] + t * ray.dir[1] - axis[1];
                            if x * x + y * y <= radius * radius {
                                best = Some(t);
                            }
                        }
                    }
                }
                // side wall
                let ox = ray.origin[0] - axis[0];
                let oy = ray.origin[1] - axis[1];
                let a = ray.dir[0] * ray.dir[0] + ray.dir[1] * ray.dir[1];
                if a > 1e-12 {
                    let b = ox * ray.dir[0] + oy * ray.dir[1];
                    let c = ox * ox + oy * oy - radius * radius;
                    let disc = b * b - a * c;
                    if disc >= 0.0 {
                        let sq = disc.sqrt();
                        for t in [(-b - sq) / a, (-b + sq) / a] {
                            if t > t_min && t < t_max && best.is_none_or(|bt| t < bt) {
                                let z = ray.origin[2] + t * ray.dir[2];
                                if z >= base_z && z <= top {
                                    best = Some(t);
                                }
                            }
                        }
                    }
                }
                best
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Ray {
    pub origin: [f32; 3],
    pub dir: [f32; 3],
    pub inv_dir: [f32; 3],
}

impl Ray {
    pub(crate) fn new(origin: [f32; 3], dir: [f32; 3]) -> Self {
        Self {
            origin,
            dir,
            inv_dir: [1.0 / dir[0], 1.0 / dir[1], 1.0 / dir[2]],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Aabb {
    pub min: [f32; 3],
    pub max: [f32; 3],
}

impl Aabb {
    fn empty() -> Self {
        Self {
            min: [f32::INFINITY; 3],
            max: [f32::NEG_INFINITY; 3],
        }
    }

    fn grow(&mut self, other: &Aabb) {
        for k in 0..3 {
            self.min[k] = self.min[k].min(other.min[k]);
            self.max[k] = self.max[k].max(other.max[k]);
        }
    }

    fn grow_point(&mut self, p: [f32; 3]) {
        for k in 0..3 {
            self.min[k] = self.min[k].min(p[k]);
            self.max[k] = self.max[k].max(p[k]);
        }
    }

    /// Entry distance if the ray overlaps the box within `(t_min, t_max)`.
    #[inline]
    fn hit(&self, ray: &Ray, t_min: f32, t_max: f32) -> Option<f32> {
        let mut lo = t_min;
        let mut hi = t_max;
        for k in 0..3 {
            let t0 = (self.min[k] - ray.origin[k]) * ray.inv_dir[k];
            let t1 = (self.max[k] - ray.origin[k]) * ray.inv_dir[k];
            // f32::min/max drop a NaN operand, which keeps the test conservative
            lo = lo.max(t0.min(t1));
            hi = hi.min(t0.max(t1));
        }
        (lo <= hi).then_some(lo)
    }
}

#[derive(Debug, Clone, Copy)]
struct Node {
    bounds: Aabb,
    /// First child index for interior nodes, first primitive slot for leaves.
    start: u32,
    /// Number of primitives; zero marks an interior node.
    count: u32,
}

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone, Default)]
pub(crate) struct Bvh {
    nodes: Vec<Node>,
    order: Vec<u32>,
}

impl Bvh {
    pub(crate) fn build(shapes: &[Shape]) -> Self {
        if shapes.is_empty() {
            return Self::default();
        }
        let bounds: Vec<Aabb> = shapes.iter().map(Shape::bounds).collect();
        let centroids: Vec<[f32; 3]> = shapes.iter().map(Shape::centroid).collect();
        let mut order: Vec<u32> = (0..shapes.len() as u32).collect();
        let mut nodes = Vec::with_capacity(2 * shapes.len() / LEAF_SIZE + 1);
        nodes.push(Node {
            bounds: Aabb::empty(),
            start: 0,
            count: 0,
        });
        // explicit stack of (node, start, end)
        let mut stack = vec![(0usize, 0usize, shapes.len())];
        while let Some((node, start, end)) = stack.pop() {
            let mut b = Aabb::empty();
            let mut cb = Aabb::empty();
            for &i in &order[start..end] {
                b.grow(&bounds[i as usize]);
                cb.grow_point(centroids[i as usize]);
            }
            nodes[node].bounds = b;
            let n = end - start;
            if n <= LEAF_SIZE {
                nodes[node].start = start as u32;
                nodes[node].count = n as u32;
                continue;
            }
            let ext = [
                cb.max[0] - cb.min[0],
                cb.max[1] - cb.min[1],
                cb.max[2] - cb.min[2],
            ];
            let axis = if ext[0] >= ext[1] && ext[0] >= ext[2] {
                0
            } else if ext[1] >= ext[2] {
                1
            } else {
                2
            };
            let mid = start + n / 2;
            order[start..end].select_nth_unstable_by(n / 2, |&a, &b| {
                centroids[a as usize][axis]
                    .total_cmp(&centroids[b as usize][axis])
                    .then(a.cmp(&b))
            });
            let left = nodes.len();
            nodes.push(Node {
                bounds: Aabb::empty(),
                start: 0,
                count: 0,
            });
            nodes.push(Node {
                bounds: Aabb::empty(),
                start: 0,
                count: 0,
            });
            nodes[node].start = left as u32;
            stack.push((left + 1, mid, end));
            stack.push((left, start, mid));
        }
        Self { nodes, order }
    }

    /// Closest primitive hit in `(t_min, t_max)`.
    pub(crate) fn closest(&self, shapes: &[Shape], ray: &Ray, t_min: f32, t_max: f32) -> Option<(u32, f32)> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best_t = t_max;
        let mut best = None;
        let mut stack = [0u32; 64];
        let mut sp = 0usize;
        self.nodes[0].bounds.hit(ray, t_min, best_t)?;
        stack[sp] = 0;
        sp += 1;
        while sp > 0 {
            sp -= 1;
            let node = &self.nodes[stack[sp] as usize];
            if node.count > 0 {
                for &p in &self.order[node.start as usize..(node.start + node.count) as usize] {
                    if let Some(t) = shapes[p as usize].intersect(ray, t_min, best_t) {
                        best_t = t;
                        best = Some((p, t));
                    }
                }
                continue;
            }
            let l = node.start as usize;
            let r = l + 1;
            let hl = self.nodes[l].bounds.hit(ray, t_min, best_t);
            let hr = self.nodes[r].bounds.hit(ray, t_min, best_t);
            match (hl, hr) {
                (Some(a), Some(b)) => {
                    // near child on top
                    let (near, far) = if a <= b { (l, r) } else { (r, l) };
                    stack[sp] = far as u32;
                    stack[sp + 1] = near as u32;
                    sp += 2;
                }
                (Some(_), None) => {
                    stack[sp] = l as u32;
                    sp += 1;
                }
                (None, Some(_)) => {
                    stack[sp] = r as u32;
                    sp += 1;
                }
                (None, None) => {}
            }
        }
        best
    }

    /// True when anything other than `skip` blocks the ray within `(t_min, t_max)`.
    pub(crate) fn occluded(&self, shapes: &[Shape], ray: &Ray, t_min: f32, t_max: f32, skip: u32) -> bool {
        if self.nodes.is_empty() {
            return false;
        }
        let mut stack = [0u32; 64];
        let mut sp = 1usize;
        stack[0] = 0;
        while sp > 0 {
            sp -= 1;
            let node = &self.nodes[stack[sp] as usize];
            if node.bounds.hit(ray, t_min, t_max).is_none() {
                continue;
            }
            if node.count > 0 {
                for &p in &self.order[node.start as usize..(node.start + node.count) as usize] {
                    if p != skip && shapes[p as usize].intersect(ray, t_min, t_max).is_some() {
                        return true;
                    }
                }
                continue;
            }
            stack[sp] = node.start;
            stack[sp + 1] = node.start + 1;
            sp += 2;
        }
        false
    }
}

#[inline]
pub(crate) fn dot(a: [f32; 3], b: [f32; 3]) -> f32 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
fn sub(a: [f32; 3], b: [f32; 3]) -> [f32; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
fn add(a: [f32; 3], b: [f32; 3]) -> [f32; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

#[inline]
fn scale(a: [f32; 3], s: f32) -> [f32; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}
