//! Binary test objects: disks, seeded blobs, silhouette-equivalent pairs and
//! volumes.
//!
//! All randomness comes from [`SplitMix64`], so a seed gives the same object
//! on every platform. Geometry uses only additions, multiplications and
//! comparisons of `f64` values (no transcendental functions).

use crate::error::{Error, Result};
use crate::geometry::ParallelGeometry;
use crate::silhouette::{BinaryImage, SilhouetteOperator};

/// SplitMix64 (Steele, Lea & Flood): state advances by `0x9E3779B97F4A7C15`;
/// output mixes with multipliers `0xBF58476D1CE4E5B9`, `0x94D049BB133111EB`
/// and shifts 30, 27, 31.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Uniform integer in `[0, n)`; `n` must be positive.
    pub fn below(&mut self, n: u64) -> u64 {
        // multiply-shift; bias is below 2^-32 for the small n used here
        ((self.next_u64() >> 32) * n) >> 32
    }
}

/// Pixel `(row, col)` is on iff its centre `(col + 0.5, row + 0.5)` lies
/// strictly inside the circle. `center` is `(x, y)` in pixel units.
pub fn disk(size: usize, center: [f64; 2], radius: f64) -> BinaryImage {
    let mut img = BinaryImage::zeros(size);
    paint_disk(&mut img, center, radius);
    img
}

fn paint_disk(img: &mut BinaryImage, center: [f64; 2], radius: f64) {
    let size = img.size();
    let r2 = radius * radius;
    for row in 0..size {
        let dy = row as f64 + 0.5 - center[1];
        for col in 0..size {
            let dx = col as f64 + 0.5 - center[0];
            if dx * dx + dy * dy < r2 {
                img.set(row, col, true);
            }
        }
    }
}

/// 3×3 dilation; out-of-image neighbours are ignored.
fn dilate(img: &BinaryImage) -> BinaryImage {
    morph(img, |on, _| on > 0)
}

/// 3×3 erosion; out-of-image neighbours are ignored.
fn erode(img: &BinaryImage) -> BinaryImage {
    morph(img, |on, total| on == total)
}

/// 3×3 erosion treating everything outside the image as background.
fn erode_bounded(img: &BinaryImage) -> BinaryImage {
    morph(img, |on, _| on == 9)
}

fn morph(img: &BinaryImage, keep: impl Fn(usize, usize) -> bool) -> BinaryImage {
    let n = img.size() as isize;
    let mut out = BinaryImage::zeros(img.size());
    for row in 0..n {
        for col in 0..n {
            let (mut on, mut total) = (0, 0);
            for dr in -1..=1 {
                for dc in -1..=1 {
                    let (r, c) = (row + dr, col + dc);
                    if r >= 0 && r < n && c >= 0 && c < n {
                        total += 1;
                        on += img.get(r as usize, c as usize) as usize;
                    }
                }
            }
            out.set(row as usize, col as usize, keep(on, total));
        }
    }
    out
}

/// Morphological closing with a 3×3 square. The result contains the input.
pub fn close(img: &BinaryImage) -> BinaryImage {
    erode(&dilate(img))
}

struct Circle {
    center: [f64; 2],
    radius: f64,
}

/// A smooth connected blob: the closed union of 3–6 overlapping disks.
///
/// The first disk sits near the image centre; each further disk is centred
/// within half the radius of an earlier one, so the union is connected.
/// Centres stay inside the middle 60% of the image and radii are at most
/// `size/5`, which keeps the corners empty for `size ≥ 16`.
pub fn random_blob(size: usize, seed: u64) -> Result<BinaryImage> {
    if size < 8 {
        return Err(Error::validation(format!("blob size must be at least 8, got {size}")));
    }
    let mut rng = SplitMix64::new(seed);
    let s = size as f64;
    let (lo, hi) = (0.2 * s, 0.8 * s);
    let clamp = |v: f64| v.clamp(lo, hi);
    let r_max = s / 5.0;
    let r_min = (s / 12.0).max(1.5).min(r_max);

    let count = 3 + rng.below(4) as usize;
    let mut circles = Vec::with_capacity(count);
    circles.push(Circle {
        center: [
            clamp(0.5 * s + rng.uniform(-0.125, 0.125) * s),
            clamp(0.5 * s + rng.uniform(-0.125, 0.125) * s),
        ],
        radius: rng.uniform((s / 8.0).max(1.5).min(r_max), r_max),
    });
    while circles.len() < count {
        let parent = &circles[rng.below(circles.len() as u64) as usize];
        let (dx, dy) = loop {
            let dx = rng.uniform(-1.0, 1.0);
            let dy = rng.uniform(-1.0, 1.0);
            if dx * dx + dy * dy <= 1.0 {
                break (dx, dy);
            }
        };
        let reach = 0.5 * parent.radius;
        // clamping projects onto a box holding the parent centre, which only
        // moves the point closer to it
        let center = [
            clamp(parent.center[0] + reach * dx),
            clamp(parent.center[1] + reach * dy),
        ];
        let radius = rng.uniform(r_min, r_max);
        circles.push(Circle { center, radius });
    }

    let mut img = BinaryImage::zeros(size);
    for c in &circles {
        paint_disk(&mut img, c.center, c.radius);
    }
    Ok(close(&img))
}

/// Chessboard distance to the background (0 outside the object), with the
/// outside of the image counted as background.
pub fn interior_depth(img: &BinaryImage) -> Vec<u32> {
    let mut depth: Vec<u32> = img.data().iter().map(|&v| v as u32).collect();
    let mut cur = img.clone();
    let mut level = 1;
    loop {
        cur = erode_bounded(&cur);
        if cur.count_ones() == 0 {
            break depth;
        }
        level += 1;
        for (d, &v) in depth.iter_mut().zip(cur.data()) {
            if v == 1 {
                *d = level;
            }
        }
    }
}

const NOTCH_BLOBS: u64 = 4;
const NOTCH_MARGINS: [u32; 4] = [2, 3, 4, 6];

/// Two distinct objects `(A, B)` with `B ⊊ A` and identical silhouettes under
/// `g`.
///
/// `A` is a seeded blob and `B` is `A` with a pocket carved out of its
/// interior. Every ray reaching the pocket must first cross the surrounding
/// wall, so the silhouettes agree. Each attempt is verified; failing attempts
/// retry with a thicker wall, then with a fresh blob.
pub fn notch_pair(
    size: usize,
    seed: u64,
    g: &ParallelGeometry,
) -> Result<(BinaryImage, BinaryImage)> {
    if size < 16 {
        return Err(Error::validation(format!(
            "notch pair size must be at least 16, got {size}"
        )));
    }
    g.check_image_size(size)?;
    let op = SilhouetteOperator::new(g);
    let mut seeds = SplitMix64::new(seed);
    for _ in 0..NOTCH_BLOBS {
        let a = random_blob(size, seeds.next_u64())?;
        let depth = interior_depth(&a);
        let (deepest, &max_depth) = depth
            .iter()
            .enumerate()
            .max_by_key(|&(i, d)| (*d, std::cmp::Reverse(i)))
            .expect("image is non-empty");
        let (drow, dcol) = ((deepest / size) as f64, (deepest % size) as f64);
        let ya = op.forward(&a)?;
        for margin in NOTCH_MARGINS {
            if max_depth <= margin {
                break;
            }
            let reach = (max_depth - margin) as f64;
            let mut b = a.clone();
            let mut carved = 0;
            for (i, &d) in depth.iter().enumerate() {
                let (r, c) = ((i / size) as f64, (i % size) as f64);
                let dist2 = (r - drow) * (r - drow) + (c - dcol) * (c - dcol);
                if d > margin && dist2 < reach * reach {
                    b.set(i / size, i % size, false);
                    carved += 1;
                }
            }
            if carved == 0 {
                continue;
            }
            if op.forward(&b)? == ya {
                return Ok((a, b));
            }
        }
    }
    Err(Error::NoPairFound(NOTCH_BLOBS as usize * NOTCH_MARGINS.len()))
}

/// Binary voxels, depth-major then row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Volume {
    depth: usize,
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl Volume {
    pub fn new(depth: usize, height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::validation("volume height and width must be positive"));
        }
        if data.len() != depth * height * width {
            return Err(Error::validation(format!(
                "volume {depth}x{height}x{width} needs {} voxels, got {}",
                depth * height * width,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|&v| v > 1) {
            return Err(Error::validation(format!("voxel {i} is not binary")));
        }
        Ok(Self {
            depth,
            height,
            width,
            data,
        })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.depth, self.height, self.width)
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    fn slice_data(&self, k: usize) -> &[u8] {
        let len = self.height * self.width;
        &self.data[k * len..(k + 1) * len]
    }
}

pub fn stack_slices(slices: &[BinaryImage]) -> Result<Volume> {
    let size = slices
        .first()
        .ok_or_else(|| Error::validation("cannot stack an empty list of slices"))?
        .size();
    if let Some(k) = slices.iter().position(|s| s.size() != size) {
        return Err(Error::validation(format!(
            "slice {k} has size {} but slice 0 has size {size}",
            slices[k].size()
        )));
    }
    let data = slices.iter().flat_map(|s| s.data().iter().copied()).collect();
    Volume::new(slices.len(), size, size, data)
}

pub fn volume_slices(v: &Volume) -> Result<Vec<BinaryImage>> {
    if v.height != v.width {
        return Err(Error::validation(format!(
            "slices must be square, volume is {}x{}",
            v.height, v.width
        )));
    }
    (0..v.depth)
        .map(|k| BinaryImage::new(v.width, v.slice_data(k).to_vec()))
        .collect()
}

/// Keep slices with at least one on voxel, in order, together with their
/// original indices.
pub fn drop_empty_slices(v: &Volume) -> (Volume, Vec<usize>) {
    let kept: Vec<usize> = (0..v.depth)
        .filter(|&k| v.slice_data(k).iter().any(|&b| b == 1))
        .collect();
    let data = kept
        .iter()
        .flat_map(|&k| v.slice_data(k).iter().copied())
        .collect();
    let out = Volume {
        depth: kept.len(),
        height: v.height,
        width: v.width,
        data,
    };
    (out, kept)
}

/// Ellipsoid phantom whose cross-sections are disks, with empty slices at both
/// ends of the depth axis.
pub fn ellipsoid_volume(depth: usize, size: usize, seed: u64) -> Result<Volume> {
    if depth == 0 || size == 0 {
        return Err(Error::validation("volume dims must be positive"));
    }
    let mut rng = SplitMix64::new(seed);
    let s = size as f64;
    let semi_depth = depth as f64 * rng.uniform(0.25, 0.4);
    let semi_plane = s * rng.uniform(0.2, 0.35);
    let center = [
        0.5 * s + rng.uniform(-0.05, 0.05) * s,
        0.5 * s + rng.uniform(-0.05, 0.05) * s,
    ];
    let mid = 0.5 * depth as f64;
    let slices: Vec<BinaryImage> = (0..depth)
        .map(|k| {
            let dz = (k as f64 + 0.5 - mid) / semi_depth;
            let f = 1.0 - dz * dz;
            if f > 0.0 {
                disk(size, center, semi_plane * f.sqrt())
            } else {
                BinaryImage::zeros(size)
            }
        })
        .collect();
    stack_slices(&slices)
}
