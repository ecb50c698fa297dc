//! Linear X-ray transform `H` and its matched adjoint `Hᵀ`.
//!
//! Row `m` of `H` holds the exact intersection lengths of ray `m` with every
//! pixel square it crosses, found by a Siddon-style parametric traversal.
//! The adjoint re-uses the same stored weights, so `⟨Hx, y⟩ = ⟨x, Hᵀy⟩` holds
//! to rounding error.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{ParallelGeometry, Ray};

/// Segments shorter than this fraction of a pixel are dropped.
pub const MIN_SEGMENT: f64 = 1e-12;

/// Views accumulated concurrently by the adjoint. Fixed so that the summation
/// order does not depend on the thread count.
const ADJOINT_VIEW_BATCH: usize = 8;

/// Real-valued square slice, row-major (row = image y, col = image x).
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    size: usize,
    data: Vec<f64>,
}

/// Real-valued measurements, view-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Sinogram {
    n_views: usize,
    n_det: usize,
    data: Vec<f64>,
}

/// Intersection of a ray with one pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RaySegment {
    pub pixel_index: usize,
    pub length: f64,
}

impl Image {
    pub fn new(size: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != size * size {
            return Err(Error::validation(format!(
                "image of side {size} needs {} values, got {}",
                size * size,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(format!("non-finite image value at {i}")));
        }
        Ok(Self { size, data })
    }

    pub fn zeros(size: usize) -> Self {
        Self {
            size,
            data: vec![0.0; size * size],
        }
    }

    pub fn filled(size: usize, value: f64) -> Self {
        Self {
            size,
            data: vec![value; size * size],
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.size + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.size + col] = value;
    }
}

impl Sinogram {
    pub fn new(n_views: usize, n_det: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n_views * n_det {
            return Err(Error::validation(format!(
                "sinogram {n_views}x{n_det} needs {} values, got {}",
                n_views * n_det,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(format!("non-finite sinogram value at {i}")));
        }
        Ok(Self {
            n_views,
            n_det,
            data,
        })
    }

    pub fn zeros(n_views: usize, n_det: usize) -> Self {
        Self {
            n_views,
            n_det,
            data: vec![0.0; n_views * n_det],
        }
    }

    pub fn n_views(&self) -> usize {
        self.n_views
    }

    pub fn n_det(&self) -> usize {
        self.n_det
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, view: usize, det: usize) -> f64 {
        self.data[view * self.n_det + det]
    }
}

/// Exact pixel intersections of `ray` with the image square, in traversal
/// order. A ray that misses the square yields no segments.
pub fn trace(ray: &Ray, g: &ParallelGeometry) -> Vec<RaySegment> {
    let mut out = Vec::new();
    trace_into(ray, g, &mut out);
    out
}

fn trace_into(ray: &Ray, g: &ParallelGeometry, out: &mut Vec<RaySegment>) {
    out.clear();
    let n = g.img_size();
    let px = g.pixel_size();
    let h = g.half_width();

    let mut t_enter = f64::NEG_INFINITY;
    let mut t_exit = f64::INFINITY;
    for axis in 0..2 {
        let o = ray.origin[axis];
        let d = ray.direction[axis];
        if d == 0.0 {
            if o <= -h || o >= h {
                return;
            }
        } else {
            let t1 = (-h - o) / d;
            let t2 = (h - o) / d;
            t_enter = t_enter.max(t1.min(t2));
            t_exit = t_exit.min(t1.max(t2));
        }
    }
    if !(t_exit - t_enter >= MIN_SEGMENT * px) {
        return;
    }

    // Parametric positions of interior grid-line crossings, per axis, in
    // increasing order of t.
    let crossings = |axis: usize| -> Vec<f64> {
        let o = ray.origin[axis];
        let d = ray.direction[axis];
        if d == 0.0 {
            return Vec::new();
        }
        let mut ts: Vec<f64> = (1..n)
            .map(|k| (k as f64 * px - h - o) / d)
            .filter(|&t| t > t_enter && t < t_exit)
            .collect();
        if d < 0.0 {
            ts.reverse();
        }
        ts
    };
    let tx = crossings(0);
    let ty = crossings(1);

    let mut prev = t_enter;
    let (mut i, mut j) = (0, 0);
    let mut done = false;
    while !done {
        let next = match (tx.get(i), ty.get(j)) {
            (Some(&a), Some(&b)) if a <= b => {
                i += 1;
                a
            }
            (Some(_), Some(&b)) => {
                j += 1;
                b
            }
            (Some(&a), None) => {
                i += 1;
                a
            }
            (None, Some(&b)) => {
                j += 1;
                b
            }
            (None, None) => {
                done = true;
                t_exit
            }
        };
        let length = next - prev;
        if length >= MIN_SEGMENT * px {
            let mid = 0.5 * (prev + next);
            let x = ray.origin[0] + mid * ray.direction[0];
            let y = ray.origin[1] + mid * ray.direction[1];
            let col = (((x + h) / px).floor().max(0.0) as usize).min(n - 1);
            let row = (((y + h) / px).floor().max(0.0) as usize).min(n - 1);
            out.push(RaySegment {
                pixel_index: row * n + col,
                length,
            });
        }
        prev = next;
    }
}

/// The system matrix `H` for one geometry, stored row-compressed.
///
/// Build once and reuse when projecting many slices with the same geometry.
#[derive(Debug, Clone)]
pub struct XrayTransform {
    geometry: ParallelGeometry,
    row_start: Vec<usize>,
    pixels: Vec<u32>,
    weights: Vec<f64>,
}

impl XrayTransform {
    pub fn new(geometry: &ParallelGeometry) -> Self {
        let rows: Vec<Vec<RaySegment>> = geometry
            .rays()
            .par_iter()
            .map(|r| trace(r, geometry))
            .collect();
        let nnz = rows.iter().map(Vec::len).sum();
        let mut row_start = Vec::with_capacity(rows.len() + 1);
        let mut pixels = Vec::with_capacity(nnz);
        let mut weights = Vec::with_capacity(nnz);
        row_start.push(0);
        for row in rows {
            for seg in row {
                pixels.push(seg.pixel_index as u32);
                weights.push(seg.length);
            }
            row_start.push(pixels.len());
        }
        Self {
            geometry: geometry.clone(),
            row_start,
            pixels,
            weights,
        }
    }

    pub fn geometry(&self) -> &ParallelGeometry {
        &self.geometry
    }

    /// Number of stored nonzero weights.
    pub fn nnz(&self) -> usize {
        self.weights.len()
    }

    /// `(pixel, weight)` pairs of row `m`, in traversal order.
    pub fn row(&self, m: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_start[m]..self.row_start[m + 1];
        self.pixels[span.clone()]
            .iter()
            .zip(&self.weights[span])
            .map(|(&p, &w)| (p as usize, w))
    }

    /// `y = Hx` on raw pixel data.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.geometry.n_pixels());
        (0..self.geometry.n_measurements())
            .into_par_iter()
            .map(|m| self.row(m).map(|(p, w)| w * x[p]).sum())
            .collect()
    }

    /// `x = Hᵀy` on raw measurement data.
    pub fn apply_adjoint(&self, y: &[f64]) -> Vec<f64> {
        debug_assert_eq!(y.len(), self.geometry.n_measurements());
        let n_det = self.geometry.n_det();
        let n_pixels = self.geometry.n_pixels();
        let mut out = vec![0.0; n_pixels];
        let views: Vec<usize> = (0..self.geometry.n_views()).collect();
        for batch in views.chunks(ADJOINT_VIEW_BATCH) {
            let partials: Vec<Vec<f64>> = batch
                .par_iter()
                .map(|&v| {
                    let mut acc = vec![0.0; n_pixels];
                    for m in v * n_det..(v + 1) * n_det {
                        let ym = y[m];
                        if ym == 0.0 {
                            continue;
                        }
                        for (p, w) in self.row(m) {
                            acc[p] += w * ym;
                        }
                    }
                    acc
                })
                .collect();
            for acc in &partials {
                for (o, a) in out.iter_mut().zip(acc) {
                    *o += a;
                }
            }
        }
        out
    }

    pub fn forward(&self, x: &Image) -> Result<Sinogram> {
        self.geometry.check_image_size(x.size())?;
        Ok(Sinogram {
            n_views: self.geometry.n_views(),
            n_det: self.geometry.n_det(),
            data: self.apply(x.data()),
        })
    }

    pub fn adjoint(&self, y: &Sinogram) -> Result<Image> {
        self.geometry.check_sinogram_dims(y.n_views(), y.n_det())?;
        Ok(Image {
            size: self.geometry.img_size(),
            data: self.apply_adjoint(y.data()),
        })
    }

    /// Per-pixel flag: touched by at least one ray with positive weight.
    pub fn coverage(&self) -> Vec<bool> {
        let mut covered = vec![false; self.geometry.n_pixels()];
        for &p in &self.pixels {
            covered[p as usize] = true;
        }
        covered
    }
}

/// `y = Hx`.
pub fn forward_project(x: &Image, g: &ParallelGeometry) -> Result<Sinogram> {
    g.check_image_size(x.size())?;
    XrayTransform::new(g).forward(x)
}

/// `Hᵀy` with the same weights as [`forward_project`].
pub fn back_project(y: &Sinogram, g: &ParallelGeometry) -> Result<Image> {
    g.check_sinogram_dims(y.n_views(), y.n_det())?;
    XrayTransform::new(g).adjoint(y)
}
