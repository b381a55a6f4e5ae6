//! Attention maps over image space: Gaussian-mixture gaze maps, binary
//! bounding-box maps, area resampling, IoU scoring and the `GAMAP1` codec.
//!
//! Pixel `(i, j)` sits at image coordinate `(i, j)`; maps are row-major.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

pub const GAMAP_MAGIC: &[u8; 6] = b"GAMAP1";
/// Screen size the reference kernel was tuned for.
pub const REFERENCE_DISPLAY_PX: f64 = 800.0;
pub const DEFAULT_IOU_LEVEL: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AttnMapError {
    #[error("invalid bounding box ({x}, {y}, {w}, {h})")]
    InvalidBox { x: f64, y: f64, w: f64, h: f64 },
    #[error("detected region and boxes are both empty")]
    EmptyUnion,
    #[error("map shapes differ: {0}x{1} vs {2}x{3}")]
    ShapeMismatch(usize, usize, usize, usize),
    #[error("map dimensions must be positive")]
    EmptyShape,
    #[error("not a GAMAP1 payload")]
    BadMagic,
    #[error("GAMAP1 payload has {got} bytes, expected {expected}")]
    BadLength { expected: usize, got: usize },
    #[error("map value at {0} is negative or not finite")]
    BadValue(usize),
}

/// Truncated Gaussian kernel used to splat gaze points.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize), serde(default))]
pub struct KernelConfig {
    pub radius: f64,
    pub sigma: f64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self { radius: 99.0, sigma: 30.2 }
    }
}

impl KernelConfig {
    pub fn scaled(self, factor: f64) -> Self {
        Self { radius: self.radius * factor, sigma: self.sigma * factor }
    }

    /// Kernel in image pixels for an image of `image_px` shown across
    /// `display_px` screen pixels. The default kernel is in screen pixels.
    pub fn for_display(self, image_px: f64, display_px: f64) -> Self {
        self.scaled(image_px / display_px)
    }
}

/// Axis-aligned box in image pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub const fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn contains(&self, px: f64, py: f64) -> bool {
        px >= self.x && px < self.x + self.w && py >= self.y && py < self.y + self.h
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn validate(&self, width: usize, height: usize) -> Result<(), AttnMapError> {
        let finite = [self.x, self.y, self.w, self.h].iter().all(|v| v.is_finite());
        let overlaps =
            self.x < width as f64 && self.x + self.w > 0.0 && self.y < height as f64 && self.y + self.h > 0.0;
        if finite && self.w > 0.0 && self.h > 0.0 && overlaps {
            Ok(())
        } else {
            Err(AttnMapError::InvalidBox { x: self.x, y: self.y, w: self.w, h: self.h })
        }
    }

    /// Maps the box from a `from` frame into a `to` frame of different size.
    pub fn rescaled(&self, from: (usize, usize), to: (usize, usize)) -> Self {
        let sx = to.0 as f64 / from.0 as f64;
        let sy = to.1 as f64 / from.1 as f64;
        Self { x: self.x * sx, y: self.y * sy, w: self.w * sx, h: self.h * sy }
    }
}

/// Dense non-negative grid.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl AttentionMap {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self { width, height, values: vec![0.0; width * height] }
    }

    pub fn from_values(width: usize, height: usize, values: Vec<f64>) -> Result<Self, AttnMapError> {
        if width == 0 || height == 0 {
            return Err(AttnMapError::EmptyShape);
        }
        if values.len() != width * height {
            return Err(AttnMapError::BadLength { expected: width * height, got: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(AttnMapError::BadValue(i));
        }
        Ok(Self { width, height, values })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// First pixel holding the maximum, as `(x, y)`.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        (best % self.width, best / self.width)
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// Divides by the maximum so the peak is exactly 1. No-op on an all-zero map.
    pub fn normalize_max(&mut self) {
        let m = self.max();
        if m > 0.0 {
            for v in &mut self.values {
                *v /= m;
            }
        }
    }

    /// 8-bit rendering, `value·255` rounded half-up and saturated.
    pub fn to_gray8(&self) -> Vec<u8> {
        self.values
            .iter()
            .map(|&v| libm::floor(v * 255.0 + 0.5).clamp(0.0, 255.0) as u8)
            .collect()
    }
}

/// Sums one truncated Gaussian per point, then max-normalizes.
pub fn render_gaze_map(points: &[(f64, f64)], width: usize, height: usize, cfg: &KernelConfig) -> AttentionMap {
    let mut map = AttentionMap::zeros(width, height);
    if width == 0 || height == 0 {
        return map;
    }
    let r = cfg.radius;
    let r2 = r * r;
    let inv = 1.0 / (2.0 * cfg.sigma * cfg.sigma);
    // exp(-(dx²+dy²)k) = exp(-dx²k)·exp(-dy²k): one row and one column of
    // factors per point.
    let mut col_factors = Vec::new();
    for &(px, py) in points {
        let x0 = libm::ceil(px - r).max(0.0) as usize;
        let y0 = libm::ceil(py - r).max(0.0) as usize;
        let x1 = libm::floor(px + r).min((width - 1) as f64);
        let y1 = libm::floor(py + r).min((height - 1) as f64);
        if x1 < 0.0 || y1 < 0.0 || x0 > x1 as usize || y0 > y1 as usize {
            continue;
        }
        let (x1, y1) = (x1 as usize, y1 as usize);
        col_factors.clear();
        col_factors.extend((x0..=x1).map(|x| {
            let dx = x as f64 - px;
            (dx * dx, libm::exp(-dx * dx * inv))
        }));
        for y in y0..=y1 {
            let dy = y as f64 - py;
            let dy2 = dy * dy;
            let fy = libm::exp(-dy2 * inv);
            let row = &mut map.values[y * width + x0..=y * width + x1];
            for (cell, &(dx2, fx)) in row.iter_mut().zip(&col_factors) {
                if dx2 + dy2 <= r2 {
                    *cell += fx * fy;
                }
            }
        }
    }
    map.normalize_max();
    map
}

/// 1 inside the union of `boxes`, 0 elsewhere.
pub fn bbox_map(boxes: &[BBox], width: usize, height: usize) -> Result<AttentionMap, AttnMapError> {
    for b in boxes {
        b.validate(width, height)?;
    }
    let mut map = AttentionMap::zeros(width, height);
    for y in 0..height {
        for x in 0..width {
            if boxes.iter().any(|b| b.contains(x as f64, y as f64)) {
                map.values[y * width + x] = 1.0;
            }
        }
    }
    Ok(map)
}

/// Overlap of the input interval `[i, i+1)` with each output cell along one axis.
fn pooling_weights(n_in: usize, n_out: usize) -> Vec<Vec<(usize, f64)>> {
    let scale = n_in as f64 / n_out as f64;
    (0..n_out)
        .map(|o| {
            let lo = o as f64 * scale;
            let hi = (o + 1) as f64 * scale;
            let first = libm::floor(lo) as usize;
            let last = (libm::ceil(hi) as usize).min(n_in);
            (first..last)
                .filter_map(|i| {
                    let overlap = hi.min(i as f64 + 1.0) - lo.max(i as f64);
                    (overlap > 0.0).then_some((i, overlap / scale))
                })
                .collect()
        })
        .collect()
}

/// Area-weighted average pooling to `out_w x out_h`, then max-normalization.
pub fn downsample(map: &AttentionMap, out_w: usize, out_h: usize) -> AttentionMap {
    let wx = pooling_weights(map.width, out_w);
    let wy = pooling_weights(map.height, out_h);
    let mut out = AttentionMap::zeros(out_w, out_h);
    for (oy, ys) in wy.iter().enumerate() {
        for (ox, xs) in wx.iter().enumerate() {
            let mut acc = 0.0;
            for &(y, fy) in ys {
                for &(x, fx) in xs {
                    acc += fy * fx * map.get(x, y);
                }
            }
            out.values[oy * out_w + ox] = acc;
        }
    }
    out.normalize_max();
    out
}

/// Nearest-neighbour resize.
pub fn upsample_nearest(map: &AttentionMap, out_w: usize, out_h: usize) -> AttentionMap {
    let mut out = AttentionMap::zeros(out_w, out_h);
    for y in 0..out_h {
        let sy = y * map.height / out_h;
        for x in 0..out_w {
            let sx = x * map.width / out_w;
            out.values[y * out_w + x] = map.get(sx, sy);
        }
    }
    out
}

/// IoU between the region where `map >= level·max(map)` (and is positive)
/// and the union of `boxes`, counted in pixels.
pub fn iou(map: &AttentionMap, boxes: &[BBox], level: f64) -> Result<f64, AttnMapError> {
    let cut = level * map.max();
    let (mut inter, mut union) = (0usize, 0usize);
    for y in 0..map.height {
        for x in 0..map.width {
            let v = map.get(x, y);
            let detected = v > 0.0 && v >= cut;
            let boxed = boxes.iter().any(|b| b.contains(x as f64, y as f64));
            inter += (detected && boxed) as usize;
            union += (detected || boxed) as usize;
        }
    }
    if union == 0 {
        return Err(AttnMapError::EmptyUnion);
    }
    Ok(inter as f64 / union as f64)
}

/// `GAMAP1` encoding: magic, LE u32 width, LE u32 height, LE f32 values.
pub fn encode_gamap(map: &AttentionMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(14 + 4 * map.values.len());
    out.extend_from_slice(GAMAP_MAGIC);
    out.extend_from_slice(&(map.width as u32).to_le_bytes());
    out.extend_from_slice(&(map.height as u32).to_le_bytes());
    for &v in &map.values {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn decode_gamap(bytes: &[u8]) -> Result<AttentionMap, AttnMapError> {
    if bytes.len() < 14 || &bytes[..6] != GAMAP_MAGIC {
        return Err(AttnMapError::BadMagic);
    }
    let width = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let height = u32::from_le_bytes(bytes[10..14].try_into().unwrap()) as usize;
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(14))
        .ok_or(AttnMapError::BadLength { expected: usize::MAX, got: bytes.len() })?;
    if bytes.len() != expected {
        return Err(AttnMapError::BadLength { expected, got: bytes.len() });
    }
    let values = bytes[14..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    AttentionMap::from_values(width, height, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_point_peak_and_sigma_falloff() {
        let cfg = KernelConfig::default();
        let m = render_gaze_map(&[(100.0, 100.0)], 800, 800, &cfg);
        assert_eq!(m.argmax(), (100, 100));
        assert_eq!(m.get(100, 100), 1.0);
        // 30 px away on the grid; the analytic kernel gives exp(-30²/(2σ²)).
        let expected = libm::exp(-900.0 / (2.0 * 30.2 * 30.2));
        assert!((m.get(130, 100) - expected).abs() < 1e-12);
        // At exactly one sigma the kernel is e^{-1/2}.
        let one_sigma = libm::exp(-(30.2f64 * 30.2) / (2.0 * 30.2 * 30.2));
        assert!((one_sigma - 0.6065306597126334).abs() < 1e-15);
        // Outside the radius nothing is drawn.
        assert_eq!(m.get(200, 100), 0.0);
        assert!(m.get(199, 100) > 0.0);
    }

    #[test]
    fn two_far_points_two_unit_peaks() {
        let m = render_gaze_map(&[(150.0, 150.0), (600.0, 600.0)], 800, 800, &KernelConfig::default());
        assert_eq!(m.get(150, 150), 1.0);
        assert_eq!(m.get(600, 600), 1.0);
    }

    #[test]
    fn empty_points_zero_map() {
        let m = render_gaze_map(&[], 32, 16, &KernelConfig::default());
        assert!(m.is_zero());
        assert_eq!(m.values().len(), 512);
    }

    #[test]
    fn bbox_maps() {
        let full = bbox_map(&[BBox::new(0.0, 0.0, 20.0, 10.0)], 20, 10).unwrap();
        assert!(full.values().iter().all(|&v| v == 1.0));

        let boxes = [BBox::new(1.0, 1.0, 4.0, 3.0), BBox::new(10.0, 2.0, 5.0, 5.0)];
        let m = bbox_map(&boxes, 20, 10).unwrap();
        assert_eq!(m.values().iter().sum::<f64>(), 12.0 + 25.0);

        assert!(matches!(
            bbox_map(&[BBox::new(1.0, 1.0, 0.0, 3.0)], 20, 10),
            Err(AttnMapError::InvalidBox { .. })
        ));
        assert!(matches!(
            bbox_map(&[BBox::new(30.0, 1.0, 4.0, 3.0)], 20, 10),
            Err(AttnMapError::InvalidBox { .. })
        ));
    }

    #[test]
    fn downsample_constant_and_block() {
        let c = AttentionMap::from_values(64, 48, vec![0.3; 64 * 48]).unwrap();
        let d = downsample(&c, 16, 16);
        assert!(d.values().iter().all(|&v| (v - 1.0).abs() < 1e-12));

        let mut vals = vec![0.0; 32 * 32];
        for (x, y) in [(6, 10), (7, 10), (6, 11), (7, 11)] {
            vals[y * 32 + x] = 1.0;
        }
        let d = downsample(&AttentionMap::from_values(32, 32, vals).unwrap(), 16, 16);
        let nonzero: Vec<usize> = (0..256).filter(|&i| d.values()[i] != 0.0).collect();
        assert_eq!(nonzero, vec![5 * 16 + 3]);
        assert_eq!(d.get(3, 5), 1.0);
    }

    #[test]
    fn downsample_idempotent_at_target() {
        let m = render_gaze_map(&[(40.0, 70.0), (90.0, 20.0)], 128, 128, &KernelConfig::default().scaled(0.16));
        let once = downsample(&m, 16, 16);
        assert_eq!(downsample(&once, 16, 16), once);
    }

    #[test]
    fn downsample_non_divisible_preserves_mass_fraction() {
        let m = AttentionMap::from_values(10, 10, (0..100).map(|i| (i % 7) as f64).collect()).unwrap();
        let d = downsample(&m, 3, 3);
        assert_eq!(d.max(), 1.0);
        // Area weights per output cell sum to one along each axis.
        for ws in pooling_weights(10, 3) {
            assert!((ws.iter().map(|w| w.1).sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn iou_cases() {
        let b = BBox::new(2.0, 3.0, 5.0, 4.0);
        let exact = bbox_map(&[b], 12, 12).unwrap();
        assert_eq!(iou(&exact, &[b], 0.5).unwrap(), 1.0);

        let far = bbox_map(&[BBox::new(9.0, 9.0, 2.0, 2.0)], 12, 12).unwrap();
        assert_eq!(iou(&far, &[b], 0.5).unwrap(), 0.0);

        let left = bbox_map(&[BBox::new(0.0, 0.0, 6.0, 12.0)], 12, 12).unwrap();
        assert_eq!(iou(&left, &[BBox::new(0.0, 0.0, 12.0, 12.0)], 0.5).unwrap(), 0.5);

        assert_eq!(iou(&AttentionMap::zeros(4, 4), &[], 0.5), Err(AttnMapError::EmptyUnion));
    }

    #[test]
    fn upsample_nearest_blocks() {
        let m = AttentionMap::from_values(2, 2, vec![0.0, 1.0, 0.5, 0.25]).unwrap();
        let u = upsample_nearest(&m, 4, 4);
        assert_eq!(u.get(3, 0), 1.0);
        assert_eq!(u.get(1, 3), 0.5);
        assert_eq!(u.get(2, 2), 0.25);
    }

    #[test]
    fn gamap_layout() {
        let m = AttentionMap::from_values(2, 1, vec![1.0, 0.5]).unwrap();
        let bytes = encode_gamap(&m);
        assert_eq!(&bytes[..6], b"GAMAP1");
        assert_eq!(&bytes[6..14], &[2, 0, 0, 0, 1, 0, 0, 0]);
        assert_eq!(&bytes[14..18], &1.0f32.to_le_bytes());
        assert_eq!(decode_gamap(&bytes).unwrap(), m);
        assert_eq!(decode_gamap(b"GAMAP2xxxxxxxxxxxx"), Err(AttnMapError::BadMagic));
        assert!(matches!(decode_gamap(&bytes[..17]), Err(AttnMapError::BadLength { .. })));
    }

    #[test]
    fn gray8_rounds_half_up() {
        let m = AttentionMap::from_values(3, 1, vec![1.0, 0.5, 0.0]).unwrap();
        assert_eq!(m.to_gray8(), vec![255, 128, 0]);
    }

    proptest! {
        #[test]
        fn render_permutation_invariant(
            pts in prop::collection::vec((0.0f64..64.0, 0.0f64..64.0), 1..12),
            rot in 0usize..12,
        ) {
            let cfg = KernelConfig { radius: 10.0, sigma: 3.0 };
            let mut shuffled = pts.clone();
            shuffled.reverse();
            let k = rot % shuffled.len();
            shuffled.rotate_left(k);
            let a = render_gaze_map(&pts, 64, 64, &cfg);
            let b = render_gaze_map(&shuffled, 64, 64, &cfg);
            for (u, v) in a.values().iter().zip(b.values()) {
                prop_assert!((u - v).abs() < 1e-12);
            }
        }

        #[test]
        fn render_translation_equivariant(
            pts in prop::collection::vec((20.0f64..40.0, 20.0f64..40.0), 1..8),
            dx in 0i32..8,
            dy in 0i32..8,
        ) {
            // Kernels stay inside the grid, so shifting the points shifts the map.
            let cfg = KernelConfig { radius: 6.0, sigma: 2.0 };
            let shifted: Vec<_> = pts.iter().map(|&(x, y)| (x + dx as f64, y + dy as f64)).collect();
            let a = render_gaze_map(&pts, 64, 64, &cfg);
            let b = render_gaze_map(&shifted, 64, 64, &cfg);
            for y in 0..56 {
                for x in 0..56 {
                    let u = a.get(x, y);
                    let v = b.get(x + dx as usize, y + dy as usize);
                    prop_assert!((u - v).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn gamap_roundtrip(w in 1usize..20, h in 1usize..20, seed in any::<u64>()) {
            let mut state = seed;
            let vals: Vec<f64> = (0..w * h)
                .map(|_| {
                    state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    ((state >> 40) as f32 / (1u32 << 24) as f32) as f64
                })
                .collect();
            let m = AttentionMap::from_values(w, h, vals).unwrap();
            let bytes = encode_gamap(&m);
            let back = decode_gamap(&bytes).unwrap();
            prop_assert_eq!(&back, &m);
            prop_assert_eq!(encode_gamap(&back), bytes);
        }
    }
}
