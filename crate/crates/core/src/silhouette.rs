//! Binary images and sinograms, the silhouette operator `S = T₍>0₎ ∘ H`, and the
//! closed-form maximal reconstruction `¬T₍>0₎(Hᵀ(¬y))`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::ParallelGeometry;
use crate::xray::{Image, Sinogram, XrayTransform};

/// Square `{0,1}` slice, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryImage {
    size: usize,
    data: Vec<u8>,
}

/// `{0,1}` measurements, view-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BinarySinogram {
    n_views: usize,
    n_det: usize,
    data: Vec<u8>,
}

fn check_binary(data: &[u8]) -> Result<()> {
    match data.iter().position(|&v| v > 1) {
        Some(i) => Err(Error::validation(format!(
            "value {} at index {i} is not binary",
            data[i]
        ))),
        None => Ok(()),
    }
}

impl BinaryImage {
    pub fn new(size: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != size * size {
            return Err(Error::validation(format!(
                "binary image of side {size} needs {} values, got {}",
                size * size,
                data.len()
            )));
        }
        check_binary(&data)?;
        Ok(Self { size, data })
    }

    pub fn zeros(size: usize) -> Self {
        Self {
            size,
            data: vec![0; size * size],
        }
    }

    pub fn ones(size: usize) -> Self {
        Self {
            size,
            data: vec![1; size * size],
        }
    }

    /// Image whose pixel `n` is bit `n` of `bits`.
    pub fn from_bits(size: usize, bits: u64) -> Self {
        let data = (0..size * size).map(|n| ((bits >> n) & 1) as u8).collect();
        Self { size, data }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.data[row * self.size + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.data[row * self.size + col] = value as u8;
    }

    /// Number of on pixels, which is also the squared Euclidean norm.
    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&v| v == 1).count()
    }

    /// Pointwise `self ≤ other`.
    pub fn is_subset_of(&self, other: &BinaryImage) -> bool {
        self.size == other.size && self.data.iter().zip(&other.data).all(|(a, b)| a <= b)
    }

    pub fn to_image(&self) -> Image {
        Image::new(self.size, self.data.iter().map(|&v| v as f64).collect())
            .expect("binary data is finite")
    }
}

impl BinarySinogram {
    pub fn new(n_views: usize, n_det: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != n_views * n_det {
            return Err(Error::validation(format!(
                "binary sinogram {n_views}x{n_det} needs {} values, got {}",
                n_views * n_det,
                data.len()
            )));
        }
        check_binary(&data)?;
        Ok(Self {
            n_views,
            n_det,
            data,
        })
    }

    pub fn n_views(&self) -> usize {
        self.n_views
    }

    pub fn n_det(&self) -> usize {
        self.n_det
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn get(&self, view: usize, det: usize) -> u8 {
        self.data[view * self.n_det + det]
    }

    /// Boolean negation.
    pub fn negate(&self) -> BinarySinogram {
        BinarySinogram {
            n_views: self.n_views,
            n_det: self.n_det,
            data: self.data.iter().map(|&v| 1 - v).collect(),
        }
    }

    pub fn to_sinogram(&self) -> Sinogram {
        Sinogram::new(
            self.n_views,
            self.n_det,
            self.data.iter().map(|&v| v as f64).collect(),
        )
        .expect("binary data is finite")
    }
}

/// `1` where `v > threshold`, else `0`.
pub fn threshold_values(v: &[f64], threshold: f64) -> Vec<u8> {
    v.iter().map(|&x| (x > threshold) as u8).collect()
}

/// Arrays that the strict-positivity threshold `T₍>0₎` applies to.
pub trait Threshold {
    type Output;

    /// `1` where the entry exceeds `threshold` (strictly), else `0`.
    fn threshold(&self, threshold: f64) -> Self::Output;

    fn threshold_pos(&self) -> Self::Output {
        self.threshold(0.0)
    }
}

impl Threshold for Image {
    type Output = BinaryImage;

    fn threshold(&self, threshold: f64) -> BinaryImage {
        BinaryImage {
            size: self.size(),
            data: threshold_values(self.data(), threshold),
        }
    }
}

impl Threshold for Sinogram {
    type Output = BinarySinogram;

    fn threshold(&self, threshold: f64) -> BinarySinogram {
        BinarySinogram {
            n_views: self.n_views(),
            n_det: self.n_det(),
            data: threshold_values(self.data(), threshold),
        }
    }
}

pub fn threshold_pos<T: Threshold>(v: &T) -> T::Output {
    v.threshold_pos()
}

pub fn binarize_sinogram(s: &Sinogram, threshold: f64) -> BinarySinogram {
    s.threshold(threshold)
}

/// Default threshold for network outputs.
pub const DEFAULT_IMAGE_THRESHOLD: f64 = 0.5;

pub fn binarize_image(x: &Image, threshold: f64) -> BinaryImage {
    x.threshold(threshold)
}

/// Outcome of checking `S(x) = y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Verification {
    pub is_solution: bool,
    pub first_mismatch: Option<usize>,
}

/// Silhouette operator and maximal reconstruction bound to one geometry.
#[derive(Debug, Clone)]
pub struct SilhouetteOperator {
    transform: XrayTransform,
    covered: Vec<bool>,
}

impl SilhouetteOperator {
    pub fn new(g: &ParallelGeometry) -> Self {
        Self::from_transform(XrayTransform::new(g))
    }

    pub fn from_transform(transform: XrayTransform) -> Self {
        let covered = transform.coverage();
        Self { transform, covered }
    }

    pub fn geometry(&self) -> &ParallelGeometry {
        self.transform.geometry()
    }

    pub fn transform(&self) -> &XrayTransform {
        &self.transform
    }

    /// Pixels that no ray touches.
    pub fn uncovered_pixels(&self) -> usize {
        self.covered.iter().filter(|c| !**c).count()
    }

    /// `S(x) = T₍>0₎(Hx)`.
    pub fn forward(&self, x: &BinaryImage) -> Result<BinarySinogram> {
        let g = self.geometry();
        g.check_image_size(x.size())?;
        let xf: Vec<f64> = x.data.iter().map(|&v| v as f64).collect();
        Ok(BinarySinogram {
            n_views: g.n_views(),
            n_det: g.n_det(),
            data: threshold_values(&self.transform.apply(&xf), 0.0),
        })
    }

    /// `¬T₍>0₎(Hᵀ(¬y))` exactly as written, leaving never-traced pixels at 1.
    pub fn maximal_solution_raw(&self, y: &BinarySinogram) -> Result<BinaryImage> {
        let g = self.geometry();
        g.check_sinogram_dims(y.n_views(), y.n_det())?;
        let not_y: Vec<f64> = y.data.iter().map(|&v| (1 - v) as f64).collect();
        let back = self.transform.apply_adjoint(&not_y);
        Ok(BinaryImage {
            size: g.img_size(),
            data: back.iter().map(|&v| (v <= 0.0) as u8).collect(),
        })
    }

    /// Maximal reconstruction with pixels outside every ray forced to 0.
    pub fn maximal_solution(&self, y: &BinarySinogram) -> Result<BinaryImage> {
        let mut x = self.maximal_solution_raw(y)?;
        let uncovered = self.uncovered_pixels();
        if uncovered > 0 {
            log::warn!(
                "{uncovered} pixel(s) are not crossed by any ray of {}; setting them to 0",
                self.geometry()
            );
            for (v, &c) in x.data.iter_mut().zip(&self.covered) {
                if !c {
                    *v = 0;
                }
            }
        }
        Ok(x)
    }

    pub fn verify(&self, x: &BinaryImage, y: &BinarySinogram) -> Result<Verification> {
        self.geometry()
            .check_sinogram_dims(y.n_views(), y.n_det())?;
        let sx = self.forward(x)?;
        let first_mismatch = sx.data.iter().zip(&y.data).position(|(a, b)| a != b);
        Ok(Verification {
            is_solution: first_mismatch.is_none(),
            first_mismatch,
        })
    }
}

pub fn silhouette_forward(x: &BinaryImage, g: &ParallelGeometry) -> Result<BinarySinogram> {
    g.check_image_size(x.size())?;
    SilhouetteOperator::new(g).forward(x)
}

pub fn maximal_solution(y: &BinarySinogram, g: &ParallelGeometry) -> Result<BinaryImage> {
    g.check_sinogram_dims(y.n_views(), y.n_det())?;
    SilhouetteOperator::new(g).maximal_solution(y)
}

pub fn verify_solution(
    x: &BinaryImage,
    y: &BinarySinogram,
    g: &ParallelGeometry,
) -> Result<Verification> {
    g.check_image_size(x.size())?;
    SilhouetteOperator::new(g).verify(x, y)
}

/// Maximal reconstruction of every slice of a stack of binary sinograms.
///
/// Slices are independent; the output order is the input order.
pub fn reconstruct_slices(
    sinograms: &[BinarySinogram],
    g: &ParallelGeometry,
) -> Result<Vec<BinaryImage>> {
    for y in sinograms {
        g.check_sinogram_dims(y.n_views(), y.n_det())?;
    }
    let op = SilhouetteOperator::new(g);
    sinograms
        .par_iter()
        .map(|y| op.maximal_solution(y))
        .collect()
}
