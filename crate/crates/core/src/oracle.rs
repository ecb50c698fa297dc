//! Exhaustive enumeration of small binary images, grouped by silhouette.
//!
//! Used to check the closed-form maximal reconstruction against brute force
//! and to exhibit distinct objects that no measurement can tell apart.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::ParallelGeometry;
use crate::silhouette::{BinaryImage, BinarySinogram, SilhouetteOperator};

/// Largest pixel count for which enumeration is attempted (`2^20` images).
pub const MAX_ENUMERATION_PIXELS: usize = 20;

const CHUNK: u64 = 1 << 12;

/// All binary images sharing one silhouette.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleClass {
    pub y: BinarySinogram,
    /// Members in increasing bit-pattern order.
    pub solutions: Vec<BinaryImage>,
    pub max_norm_solution: BinaryImage,
}

/// Summary of a full brute-force check of the maximal reconstruction.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub geometry: String,
    pub n_images: u64,
    pub class_count: usize,
    pub max_class_size: usize,
    /// Classes whose formula output is not a solution.
    pub not_solution: usize,
    /// Classes whose formula output is not the unique max-norm member.
    pub not_max_norm: usize,
    /// Classes with a member not dominated by the formula output.
    pub not_dominating: usize,
}

impl OracleReport {
    pub fn passed(&self) -> bool {
        self.not_solution == 0 && self.not_max_norm == 0 && self.not_dominating == 0
    }
}

impl std::fmt::Display for OracleReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "geometry: {}", self.geometry)?;
        writeln!(f, "images enumerated: {}", self.n_images)?;
        writeln!(f, "classes: {}", self.class_count)?;
        writeln!(f, "max class size: {}", self.max_class_size)?;
        writeln!(f, "formula output not a solution: {}", self.not_solution)?;
        writeln!(f, "formula output not unique max-norm member: {}", self.not_max_norm)?;
        writeln!(f, "members not dominated: {}", self.not_dominating)?;
        write!(
            f,
            "formula-oracle equivalence: {}",
            if self.passed() { "PASS" } else { "FAIL" }
        )
    }
}

fn check_capacity(g: &ParallelGeometry) -> Result<()> {
    let pixels = g.n_pixels();
    if pixels > MAX_ENUMERATION_PIXELS {
        return Err(Error::Capacity {
            pixels,
            max: MAX_ENUMERATION_PIXELS,
        });
    }
    Ok(())
}

/// Bit patterns of all images, keyed by their silhouette bytes.
fn partition(op: &SilhouetteOperator) -> Result<BTreeMap<Vec<u8>, Vec<u64>>> {
    let g = op.geometry();
    let size = g.img_size();
    let total = 1u64 << g.n_pixels();
    let n_chunks = total.div_ceil(CHUNK);
    let parts: Vec<BTreeMap<Vec<u8>, Vec<u64>>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut map: BTreeMap<Vec<u8>, Vec<u64>> = BTreeMap::new();
            for bits in c * CHUNK..((c + 1) * CHUNK).min(total) {
                let y = op.forward(&BinaryImage::from_bits(size, bits))?;
                map.entry(y.into_data()).or_default().push(bits);
            }
            Ok(map)
        })
        .collect::<Result<_>>()?;

    // chunks cover increasing bit ranges, so appending keeps members sorted
    let mut merged: BTreeMap<Vec<u8>, Vec<u64>> = BTreeMap::new();
    for part in parts {
        for (k, mut v) in part {
            merged.entry(k).or_default().append(&mut v);
        }
    }
    Ok(merged)
}

/// Partition every binary image on the grid by its silhouette.
///
/// Classes are returned in increasing order of silhouette bytes. Fails with
/// [`Error::Invariant`] if some class has two members of maximal norm.
pub fn enumerate_classes(g: &ParallelGeometry) -> Result<Vec<FeasibleClass>> {
    check_capacity(g)?;
    let op = SilhouetteOperator::new(g);
    let size = g.img_size();
    partition(&op)?
        .into_iter()
        .map(|(y, members)| {
            let best = members.iter().map(|b| b.count_ones()).max().unwrap_or(0);
            let mut at_best = members.iter().filter(|b| b.count_ones() == best);
            let max_bits = *at_best.next().expect("class is non-empty");
            if at_best.next().is_some() {
                return Err(Error::Invariant(format!(
                    "class {y:?} has several members of squared norm {best}"
                )));
            }
            Ok(FeasibleClass {
                y: BinarySinogram::new(g.n_views(), g.n_det(), y)?,
                solutions: members
                    .iter()
                    .map(|&b| BinaryImage::from_bits(size, b))
                    .collect(),
                max_norm_solution: BinaryImage::from_bits(size, max_bits),
            })
        })
        .collect()
}

/// Two distinct images with the same silhouette, if any exist.
///
/// Picks the first class (in silhouette byte order) with several members and
/// returns its max-norm member together with its smallest other member.
pub fn find_nonunique(g: &ParallelGeometry) -> Result<Option<(BinaryImage, BinaryImage)>> {
    check_capacity(g)?;
    let op = SilhouetteOperator::new(g);
    let size = g.img_size();
    Ok(partition(&op)?.into_values().find(|m| m.len() >= 2).map(|members| {
        let max_bits = *members
            .iter()
            .max_by_key(|b| (b.count_ones(), std::cmp::Reverse(**b)))
            .expect("class is non-empty");
        let other = *members
            .iter()
            .find(|&&b| b != max_bits)
            .expect("class has two members");
        (
            BinaryImage::from_bits(size, max_bits),
            BinaryImage::from_bits(size, other),
        )
    }))
}

/// Compare the raw closed-form maximal reconstruction against every
/// enumerated class.
pub fn check_maximal_formula(g: &ParallelGeometry) -> Result<OracleReport> {
    check_capacity(g)?;
    let op = SilhouetteOperator::new(g);
    let size = g.img_size();
    let classes = partition(&op)?;

    let mut report = OracleReport {
        geometry: g.descriptor(),
        n_images: 1u64 << g.n_pixels(),
        class_count: classes.len(),
        max_class_size: classes.values().map(Vec::len).max().unwrap_or(0),
        not_solution: 0,
        not_max_norm: 0,
        not_dominating: 0,
    };
    for (y, members) in &classes {
        let y = BinarySinogram::new(g.n_views(), g.n_det(), y.clone())?;
        let formula = op.maximal_solution_raw(&y)?;
        if !op.verify(&formula, &y)?.is_solution {
            report.not_solution += 1;
        }
        let norm = formula.count_ones();
        let formula_bits = image_bits(&formula);
        let unique_max = members
            .iter()
            .all(|&b| b == formula_bits || (b.count_ones() as usize) < norm);
        if !unique_max || !members.contains(&formula_bits) {
            report.not_max_norm += 1;
        }
        if members
            .iter()
            .any(|&b| !BinaryImage::from_bits(size, b).is_subset_of(&formula))
        {
            report.not_dominating += 1;
        }
    }
    Ok(report)
}

fn image_bits(x: &BinaryImage) -> u64 {
    x.data()
        .iter()
        .enumerate()
        .fold(0u64, |acc, (n, &v)| acc | ((v as u64) << n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn single_pixel_single_view() {
        let g = ParallelGeometry::equispaced(1, 1).unwrap();
        let classes = enumerate_classes(&g).unwrap();
        assert_eq!(classes.len(), 2);
        assert!(classes.iter().all(|c| c.solutions.len() == 1));
        assert_eq!(find_nonunique(&g).unwrap(), None);
    }

    #[test]
    fn two_by_two_has_ambiguous_class() {
        let g = ParallelGeometry::new(vec![0.0, FRAC_PI_2], 2, 1.0, 2, 1.0).unwrap();
        let classes = enumerate_classes(&g).unwrap();
        assert_eq!(classes.iter().map(|c| c.solutions.len()).sum::<usize>(), 16);
        let full = classes
            .iter()
            .find(|c| c.y.data().iter().all(|&v| v == 1))
            .unwrap();
        assert!(full.solutions.len() >= 2);
        assert!(full
            .solutions
            .contains(&BinaryImage::new(2, vec![1, 0, 0, 1]).unwrap()));
        assert_eq!(full.max_norm_solution, BinaryImage::ones(2));

        let (a, b) = find_nonunique(&g).unwrap().unwrap();
        assert_ne!(a, b);
        let op = SilhouetteOperator::new(&g);
        assert_eq!(op.forward(&a).unwrap(), op.forward(&b).unwrap());
    }

    #[test]
    fn capacity_is_enforced() {
        let g = ParallelGeometry::equispaced(2, 5).unwrap();
        assert!(matches!(
            enumerate_classes(&g),
            Err(Error::Capacity { pixels: 25, max: 20 })
        ));
        assert!(find_nonunique(&g).is_err());
        assert!(check_maximal_formula(&g).is_err());
    }

    #[test]
    fn bits_round_trip() {
        for bits in [0u64, 1, 0b1011, 0x1ff] {
            assert_eq!(image_bits(&BinaryImage::from_bits(3, bits)), bits);
        }
    }
}
