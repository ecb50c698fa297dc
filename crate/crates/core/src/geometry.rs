//! Parallel-beam acquisition geometry.
//!
//! Coordinates are in pixel-size units with the origin at the centre of the
//! image grid. Pixel `(row, col)` covers
//! `x ∈ [col·px − W/2, (col+1)·px − W/2)` and `y ∈ [row·px − W/2, (row+1)·px − W/2)`
//! where `W = img_size·px`, so image rows run along `+y` and columns along `+x`.
//!
//! A view at angle `θ` has rays travelling along `(sin θ, −cos θ)` and a
//! detector axis `(cos θ, sin θ)`. Detector bin `d` is centred at offset
//! `(d − (n_det − 1)/2)·det_spacing` along the detector axis. At `θ = 0` rays are
//! vertical and bin `d` runs down image column `d` (when `n_det = img_size` and
//! spacing equals the pixel size). This convention is fixed.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ParallelGeometry {
    angles: Vec<f64>,
    equispaced: bool,
    n_det: usize,
    det_spacing: f64,
    img_size: usize,
    pixel_size: f64,
}

/// One row of the system matrix: a line through a detector bin centre.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub view_index: usize,
    pub det_index: usize,
    /// A point on the ray, placed upstream of the image square.
    pub origin: [f64; 2],
    /// Unit travel direction.
    pub direction: [f64; 2],
}

impl ParallelGeometry {
    /// `n_views` angles `k·π/n_views`, a detector as wide as the image, unit
    /// spacing and unit pixels.
    pub fn equispaced(n_views: usize, img_size: usize) -> Result<Self> {
        if n_views == 0 {
            return Err(Error::validation("n_views must be at least 1"));
        }
        if img_size == 0 {
            return Err(Error::validation("img_size must be at least 1"));
        }
        Ok(Self {
            angles: equispaced_angles(n_views),
            equispaced: true,
            n_det: img_size,
            det_spacing: 1.0,
            img_size,
            pixel_size: 1.0,
        })
    }

    /// General constructor with an explicit angle list.
    pub fn new(
        angles: Vec<f64>,
        n_det: usize,
        det_spacing: f64,
        img_size: usize,
        pixel_size: f64,
    ) -> Result<Self> {
        validate_angles(&angles)?;
        if n_det == 0 {
            return Err(Error::validation("n_det must be at least 1"));
        }
        if img_size == 0 {
            return Err(Error::validation("img_size must be at least 1"));
        }
        if !(det_spacing.is_finite() && det_spacing > 0.0) {
            return Err(Error::validation(format!(
                "det_spacing must be positive and finite, got {det_spacing}"
            )));
        }
        if !(pixel_size.is_finite() && pixel_size > 0.0) {
            return Err(Error::validation(format!(
                "pixel_size must be positive and finite, got {pixel_size}"
            )));
        }
        Ok(Self {
            angles,
            equispaced: false,
            n_det,
            det_spacing,
            img_size,
            pixel_size,
        })
    }

    pub fn n_views(&self) -> usize {
        self.angles.len()
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn n_det(&self) -> usize {
        self.n_det
    }

    pub fn det_spacing(&self) -> f64 {
        self.det_spacing
    }

    pub fn img_size(&self) -> usize {
        self.img_size
    }

    pub fn pixel_size(&self) -> f64 {
        self.pixel_size
    }

    pub fn n_pixels(&self) -> usize {
        self.img_size * self.img_size
    }

    /// Total number of measurements, `V·n_det`.
    pub fn n_measurements(&self) -> usize {
        self.angles.len() * self.n_det
    }

    /// Half the side length of the image square.
    pub fn half_width(&self) -> f64 {
        0.5 * self.img_size as f64 * self.pixel_size
    }

    /// Offset of a detector bin centre along the detector axis.
    pub fn det_offset(&self, det_index: usize) -> f64 {
        (det_index as f64 - 0.5 * (self.n_det as f64 - 1.0)) * self.det_spacing
    }

    pub fn measurement_index(&self, view_index: usize, det_index: usize) -> usize {
        view_index * self.n_det + det_index
    }

    /// Inverse of [`measurement_index`](Self::measurement_index).
    pub fn split_measurement_index(&self, m: usize) -> (usize, usize) {
        (m / self.n_det, m % self.n_det)
    }

    pub fn ray(&self, view_index: usize, det_index: usize) -> Ray {
        let theta = self.angles[view_index];
        let (sin, cos) = theta.sin_cos();
        let direction = [sin, -cos];
        let axis = [cos, sin];
        let s = self.det_offset(det_index);
        let back = self.half_width() * std::f64::consts::SQRT_2 + self.pixel_size;
        Ray {
            view_index,
            det_index,
            origin: [s * axis[0] - back * direction[0], s * axis[1] - back * direction[1]],
            direction,
        }
    }

    /// All rays, view-major then detector index, so that position `m` in the
    /// returned vector is measurement `m`.
    pub fn rays(&self) -> Vec<Ray> {
        (0..self.n_views())
            .flat_map(|v| (0..self.n_det).map(move |d| (v, d)))
            .map(|(v, d)| self.ray(v, d))
            .collect()
    }

    /// Single-line descriptor, e.g. `views=8;det=64;size=64;spacing=1;px=1;angles=equispaced`.
    pub fn descriptor(&self) -> String {
        self.to_string()
    }

    pub fn check_image_size(&self, size: usize) -> Result<()> {
        if size != self.img_size {
            return Err(Error::validation(format!(
                "image size {size} does not match geometry size {}",
                self.img_size
            )));
        }
        Ok(())
    }

    pub fn check_sinogram_dims(&self, n_views: usize, n_det: usize) -> Result<()> {
        if n_views != self.n_views() || n_det != self.n_det {
            return Err(Error::validation(format!(
                "sinogram {n_views}x{n_det} does not match geometry {}x{}",
                self.n_views(),
                self.n_det
            )));
        }
        Ok(())
    }
}

fn equispaced_angles(n_views: usize) -> Vec<f64> {
    (0..n_views)
        .map(|k| k as f64 * PI / n_views as f64)
        .collect()
}

fn validate_angles(angles: &[f64]) -> Result<()> {
    if angles.is_empty() {
        return Err(Error::validation("at least one view angle is required"));
    }
    for &a in angles {
        if !(a.is_finite() && (0.0..PI).contains(&a)) {
            return Err(Error::validation(format!("angle {a} is outside [0, pi)")));
        }
    }
    if angles.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::validation("angles must be strictly increasing"));
    }
    Ok(())
}

impl fmt::Display for ParallelGeometry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "views={};det={};size={};spacing={};px={};angles=",
            self.n_views(),
            self.n_det,
            self.img_size,
            self.det_spacing,
            self.pixel_size
        )?;
        if self.equispaced {
            f.write_str("equispaced")
        } else {
            for (i, a) in self.angles.iter().enumerate() {
                if i > 0 {
                    f.write_str(",")?;
                }
                write!(f, "{a}")?;
            }
            Ok(())
        }
    }
}

impl FromStr for ParallelGeometry {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut views = None;
        let mut det = None;
        let mut size = None;
        let mut spacing = None;
        let mut px = None;
        let mut angles = None;

        for field in s.trim().split(';').filter(|f| !f.is_empty()) {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| Error::Descriptor(format!("field '{field}' is not key=value")))?;
            let value = value.trim();
            let slot_taken = match key.trim() {
                "views" => views.replace(parse_field::<usize>(key, value)?).is_some(),
                "det" => det.replace(parse_field::<usize>(key, value)?).is_some(),
                "size" => size.replace(parse_field::<usize>(key, value)?).is_some(),
                "spacing" => spacing.replace(parse_field::<f64>(key, value)?).is_some(),
                "px" => px.replace(parse_field::<f64>(key, value)?).is_some(),
                "angles" => angles.replace(value.to_string()).is_some(),
                other => return Err(Error::Descriptor(format!("unknown key '{other}'"))),
            };
            if slot_taken {
                return Err(Error::Descriptor(format!("duplicate key '{}'", key.trim())));
            }
        }

        let missing = |k: &str| Error::Descriptor(format!("missing key '{k}'"));
        let views = views.ok_or_else(|| missing("views"))?;
        let n_det = det.ok_or_else(|| missing("det"))?;
        let img_size = size.ok_or_else(|| missing("size"))?;
        let det_spacing = spacing.ok_or_else(|| missing("spacing"))?;
        let pixel_size = px.ok_or_else(|| missing("px"))?;
        let angles = angles.ok_or_else(|| missing("angles"))?;

        if views == 0 {
            return Err(Error::validation("n_views must be at least 1"));
        }
        if angles == "equispaced" {
            let mut g = Self::new(
                equispaced_angles(views),
                n_det,
                det_spacing,
                img_size,
                pixel_size,
            )?;
            g.equispaced = true;
            Ok(g)
        } else {
            let list = angles
                .split(',')
                .map(|a| parse_field::<f64>("angles", a.trim()))
                .collect::<Result<Vec<_>>>()?;
            if list.len() != views {
                return Err(Error::Descriptor(format!(
                    "views={views} but {} angles were listed",
                    list.len()
                )));
            }
            Self::new(list, n_det, det_spacing, img_size, pixel_size)
        }
    }
}

fn parse_field<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Descriptor(format!("cannot parse {key}='{value}'")))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ulps(a: f64, b: f64) -> u64 {
        (a.to_bits() as i64 - b.to_bits() as i64).unsigned_abs()
    }

    #[test]
    fn equispaced_eight_views() {
        let g = ParallelGeometry::equispaced(8, 511).unwrap();
        assert_eq!(g.n_views(), 8);
        assert_eq!(g.n_det(), 511);
        assert_eq!(g.angles()[0], 0.0);
        assert!(ulps(g.angles()[4], PI / 2.0) <= 4);
        assert!(ulps(g.angles()[7], 7.0 * PI / 8.0) <= 4);
        assert!(g.angles().iter().all(|&a| (0.0..PI).contains(&a)));
    }

    #[test]
    fn small_cases() {
        let g = ParallelGeometry::equispaced(1, 4).unwrap();
        assert_eq!(g.angles(), &[0.0]);
        assert_eq!(g.n_det(), 4);

        let g = ParallelGeometry::equispaced(4, 4).unwrap();
        let want = [0.0, PI / 4.0, PI / 2.0, 3.0 * PI / 4.0];
        for (a, w) in g.angles().iter().zip(want) {
            assert!(ulps(*a, w) <= 4);
        }
    }

    #[test]
    fn rejects_zero() {
        assert!(matches!(
            ParallelGeometry::equispaced(0, 4),
            Err(Error::Validation(_))
        ));
        assert!(matches!(
            ParallelGeometry::equispaced(4, 0),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn rejects_bad_angles() {
        assert!(ParallelGeometry::new(vec![0.0, 0.0], 2, 1.0, 2, 1.0).is_err());
        assert!(ParallelGeometry::new(vec![1.0, 0.5], 2, 1.0, 2, 1.0).is_err());
        assert!(ParallelGeometry::new(vec![PI], 2, 1.0, 2, 1.0).is_err());
        assert!(ParallelGeometry::new(vec![-0.1], 2, 1.0, 2, 1.0).is_err());
        assert!(ParallelGeometry::new(vec![], 2, 1.0, 2, 1.0).is_err());
    }

    #[test]
    fn ray_order_matches_measurement_index() {
        let g = ParallelGeometry::equispaced(2, 2).unwrap();
        let rays = g.rays();
        assert_eq!(rays.len(), 4);
        for (m, r) in rays.iter().enumerate() {
            assert_eq!(g.measurement_index(r.view_index, r.det_index), m);
            assert_eq!(g.split_measurement_index(m), (r.view_index, r.det_index));
        }
    }

    #[test]
    fn ray_directions_are_unit() {
        let g = ParallelGeometry::equispaced(7, 9).unwrap();
        for r in g.rays() {
            let n = r.direction[0].hypot(r.direction[1]);
            assert!((n - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn view_zero_rays_are_vertical_through_columns() {
        let g = ParallelGeometry::equispaced(1, 5).unwrap();
        for r in g.rays() {
            assert_eq!(r.direction, [0.0, -1.0]);
            // x coordinate equals the centre of column det_index
            let col_centre = (r.det_index as f64 + 0.5) - g.half_width();
            assert_eq!(r.origin[0], col_centre);
        }
    }

    #[test]
    fn descriptor_round_trip() {
        let g = ParallelGeometry::equispaced(8, 64).unwrap();
        assert_eq!(
            g.descriptor(),
            "views=8;det=64;size=64;spacing=1;px=1;angles=equispaced"
        );
        let back: ParallelGeometry = g.descriptor().parse().unwrap();
        assert_eq!(back, g);

        let g = ParallelGeometry::new(vec![0.0, 1.5707963, 2.5], 5, 0.75, 3, 1.0).unwrap();
        let back: ParallelGeometry = g.descriptor().parse().unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn descriptor_errors() {
        for bad in [
            "views=8;det=64;size=64;spacing=1;px=1",
            "views=8;det=64;size=64;spacing=1;px=1;angles=equispaced;foo=1",
            "views=2;det=4;size=4;spacing=1;px=1;angles=0.1",
            "views=x;det=4;size=4;spacing=1;px=1;angles=equispaced",
            "views=1;views=1;det=4;size=4;spacing=1;px=1;angles=equispaced",
            "views=0;det=4;size=4;spacing=1;px=1;angles=equispaced",
        ] {
            assert!(bad.parse::<ParallelGeometry>().is_err(), "{bad}");
        }
    }
}
