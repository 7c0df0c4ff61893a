//! Threshold hotspot detection with 8-connected component labeling.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::raster::TemperatureRaster;

/// Common threshold for confirming an active surface fire.
pub const DEFAULT_THRESHOLD_C: f32 = 50.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hotspot {
    /// Member pixel indices (`y * width + x`), ascending.
    pub pixels: Vec<u32>,
    pub area_px: usize,
    pub area_m2: f64,
    /// Centroid in pixel-index coordinates `(x, y)`.
    pub centroid_px: [f64; 2],
    /// Centroid in meters from the raster's top-left corner (x right, y down).
    pub centroid_m: [f64; 2],
    pub mean_c: f32,
    pub max_c: f32,
    /// Inclusive pixel bounds `[x_min, y_min, x_max, y_max]`.
    pub bbox: [u32; 4],
}

/// Connected regions of valid pixels at or above `threshold_c`, largest first.
pub fn detect_hotspots(r: &TemperatureRaster, threshold_c: f32) -> Vec<Hotspot> {
    let w = r.width() as usize;
    let h = r.height() as usize;
    let data = r.data();
    let hot = |i: usize| data[i] >= threshold_c;
    let mut label = vec![false; w * h];
    let mut out = Vec::new();
    let mut stack = Vec::new();
    let res = r.ground_res_m() as f64;
    for start in 0..w * h {
        if label[start] || !hot(start) {
            continue;
        }
        label[start] = true;
        stack.push(start);
        let mut pixels = Vec::new();
        while let Some(i) = stack.pop() {
            pixels.push(i as u32);
            let (x, y) = ((i % w) as i64, (i / w) as i64);
            for dy in -1..=1i64 {
                for dx in -1..=1i64 {
                    let (nx, ny) = (x + dx, y + dy);
                    if (dx, dy) == (0, 0) || nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    let j = ny as usize * w + nx as usize;
                    if !label[j] && hot(j) {
                        label[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        pixels.sort_unstable();
        out.push(summarize(pixels, data, w, res));
    }
    out.sort_by(|a, b| {
        b.area_px
            .cmp(&a.area_px)
            .then(a.centroid_px[1].total_cmp(&b.centroid_px[1]))
            .then(a.centroid_px[0].total_cmp(&b.centroid_px[0]))
    });
    out
}

fn summarize(pixels: Vec<u32>, data: &[f32], w: usize, res: f64) -> Hotspot {
    let n = pixels.len();
    let (mut sx, mut sy, mut st) = (0f64, 0f64, 0f64);
    let mut max_c = f32::NEG_INFINITY;
    let mut bbox = [u32::MAX, u32::MAX, 0, 0];
    for &p in &pixels {
        let (x, y) = (p as usize % w, p as usize / w);
        let t = data[p as usize];
        sx += x as f64;
        sy += y as f64;
        st += t as f64;
        max_c = max_c.max(t);
        bbox = [
            bbox[0].min(x as u32),
            bbox[1].min(y as u32),
            bbox[2].max(x as u32),
            bbox[3].max(y as u32),
        ];
    }
    let c = [sx / n as f64, sy / n as f64];
    Hotspot {
        pixels,
        area_px: n,
        area_m2: n as f64 * res * res,
        centroid_px: c,
        centroid_m: [(c[0] + 0.5) * res, (c[1] + 0.5) * res],
        mean_c: (st / n as f64) as f32,
        max_c,
        bbox,
    }
}

/// Intersection over union of two pixel sets; zero when both are empty.
pub fn morphology_iou(detected: &[u32], truth: &[u32]) -> f64 {
    let a: HashSet<u32> = detected.iter().copied().collect();
    let b: HashSet<u32> = truth.iter().copied().collect();
    let union = a.union(&b).count();
    if union == 0 {
        return 0.0;
    }
    a.intersection(&b).count() as f64 / union as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_field_has_no_hotspots() {
        let r = TemperatureRaster::filled(16, 16, 20.0, 15.0, 0.1).unwrap();
        assert!(detect_hotspots(&r, DEFAULT_THRESHOLD_C).is_empty());
    }

    #[test]
    fn two_disjoint_blobs() {
        let mut data = vec![20.0f32; 100];
        for i in [11, 12, 13, 66, 76, 86] {
            data[i] = 60.0;
        }
        let r = TemperatureRaster::new(10, 10, 15.0, 0.5, data).unwrap();
        let found = detect_hotspots(&r, 50.0);
        assert_eq!(found.len(), 2);
        assert_eq!(found.iter().map(|h| h.area_px).collect::<Vec<_>>(), vec![3, 3]);
        // equal areas order by centroid row
        assert_eq!(found[0].pixels, vec![11, 12, 13]);
        assert_eq!(found[0].bbox, [1, 1, 3, 1]);
        assert!((found[0].area_m2 - 0.75).abs() < 1e-12);
        assert_eq!(found[1].centroid_px, [6.0, 7.0]);
    }

    #[test]
    fn diagonal_pixels_connect() {
        let mut data = vec![0.0f32; 9];
        data[0] = 70.0;
        data[4] = 80.0;
        data[8] = 90.0;
        let r = TemperatureRaster::new(3, 3, 15.0, 1.0, data).unwrap();
        let found = detect_hotspots(&r, 50.0);
        assert_eq!(found.len(), 1);
        assert_eq!(found[0].max_c, 90.0);
        assert_eq!(found[0].mean_c, 80.0);
    }

    #[test]
    fn no_data_is_never_hot() {
        let r = TemperatureRaster::new(2, 1, 15.0, 1.0, vec![f32::NAN, 60.0]).unwrap();
        assert_eq!(detect_hotspots(&r, 50.0)[0].pixels, vec![1]);
    }

    #[test]
    fn iou_cases() {
        assert_eq!(morphology_iou(&[1, 2, 3], &[1, 2, 3]), 1.0);
        assert_eq!(morphology_iou(&[1, 2], &[3, 4]), 0.0);
        assert_eq!(morphology_iou(&[], &[]), 0.0);
        // 2x2 squares shifted by one column share half their pixels
        let a = [0, 1, 10, 11];
        let b = [1, 2, 11, 12];
        assert!((morphology_iou(&a, &b) - 1.0 / 3.0).abs() < 1e-12);
    }
}
