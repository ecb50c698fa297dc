use std::collections::BTreeSet;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use proptest::prelude::*;
use st_core::geometry::ParallelGeometry;
use st_core::oracle::find_nonunique;
use st_core::phantom::{random_blob, SplitMix64};
use st_core::silhouette::{
    binarize_sinogram, silhouette_forward, BinaryImage, SilhouetteOperator,
};
use st_core::xray::forward_project;

fn view_sets() -> Vec<Vec<f64>> {
    vec![
        vec![0.0],
        vec![0.0, FRAC_PI_2],
        vec![FRAC_PI_4, 3.0 * FRAC_PI_4],
        vec![0.0, FRAC_PI_4, FRAC_PI_2, 3.0 * FRAC_PI_4],
    ]
}

fn geometry(size: usize, angles: &[f64]) -> ParallelGeometry {
    ParallelGeometry::new(angles.to_vec(), size, 1.0, size, 1.0).unwrap()
}

/// Every image on grids up to 3×3 for all view subsets: the formula output
/// solves the problem, dominates every solution, and is idempotent.
#[test]
fn exhaustive_solution_dominance_idempotence() {
    for size in 1..=3 {
        for angles in view_sets() {
            let g = geometry(size, &angles);
            let op = SilhouetteOperator::new(&g);
            for bits in 0..1u64 << (size * size) {
                let x = BinaryImage::from_bits(size, bits);
                let y = op.forward(&x).unwrap();
                let xm = op.maximal_solution_raw(&y).unwrap();
                assert!(op.verify(&xm, &y).unwrap().is_solution);
                assert!(x.is_subset_of(&xm), "{g} bits {bits:b}");
                let again = op.maximal_solution_raw(&op.forward(&xm).unwrap()).unwrap();
                assert_eq!(again, xm);
            }
        }
    }
}

/// On 3×3 with views {0, π/2}, every feasible y is reconstructed to a
/// solution; the feasible set is enumerated independently.
#[test]
fn every_feasible_measurement_is_solved() {
    let g = geometry(3, &[0.0, FRAC_PI_2]);
    let op = SilhouetteOperator::new(&g);
    let feasible: BTreeSet<Vec<u8>> = (0..1u64 << 9)
        .map(|b| op.forward(&BinaryImage::from_bits(3, b)).unwrap().into_data())
        .collect();
    assert!(feasible.len() > 1);
    for y in feasible {
        let y = st_core::BinarySinogram::new(2, 3, y).unwrap();
        let xm = op.maximal_solution(&y).unwrap();
        assert!(op.verify(&xm, &y).unwrap().is_solution);
    }
}

#[test]
fn binarized_projection_equals_silhouette() {
    let g = ParallelGeometry::equispaced(8, 32).unwrap();
    for seed in 0..50 {
        let x = random_blob(32, seed).unwrap();
        let y = forward_project(&x.to_image(), &g).unwrap();
        assert_eq!(binarize_sinogram(&y, 0.0), silhouette_forward(&x, &g).unwrap());
    }
}

proptest! {
    #[test]
    fn silhouette_is_monotone(size in 2usize..10, views in 1usize..9, seed in any::<u64>()) {
        let g = ParallelGeometry::equispaced(views, size).unwrap();
        let op = SilhouetteOperator::new(&g);
        let mut rng = SplitMix64::new(seed);
        let n = size * size;
        let lo: Vec<u8> = (0..n).map(|_| (rng.below(4) == 0) as u8).collect();
        let hi: Vec<u8> = lo.iter().map(|&v| v | (rng.below(3) == 0) as u8).collect();
        let (lo, hi) = (BinaryImage::new(size, lo).unwrap(), BinaryImage::new(size, hi).unwrap());
        let (ylo, yhi) = (op.forward(&lo).unwrap(), op.forward(&hi).unwrap());
        prop_assert!(ylo.data().iter().zip(yhi.data()).all(|(a, b)| a <= b));
    }

    #[test]
    fn maximal_dominates_truth(size in 8usize..40, views in 1usize..9, seed in any::<u64>()) {
        let g = ParallelGeometry::equispaced(views, size).unwrap();
        let op = SilhouetteOperator::new(&g);
        let x = random_blob(size, seed).unwrap();
        let xm = op.maximal_solution(&op.forward(&x).unwrap()).unwrap();
        prop_assert!(x.is_subset_of(&xm));
    }
}

fn render(x: &BinaryImage) -> String {
    let n = x.size();
    (0..n)
        .map(|r| (0..n).map(|c| char::from(b'0' + x.get(r, c))).collect::<String>() + "\n")
        .collect()
}

#[test]
fn nonunique_3x3_four_views_golden() {
    let g = ParallelGeometry::equispaced(4, 3).unwrap();
    let got = match find_nonunique(&g).unwrap() {
        None => format!("geometry={g}\nnone\n"),
        Some((a, b)) => {
            let op = SilhouetteOperator::new(&g);
            assert_eq!(op.forward(&a).unwrap(), op.forward(&b).unwrap());
            format!("geometry={g}\nfirst\n{}second\n{}", render(&a), render(&b))
        }
    };
    let golden = include_str!("golden/nonunique_3x3_4views.txt");
    assert_eq!(got, golden);
}
