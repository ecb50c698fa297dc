use std::path::Path;
use std::process::{Command, Output};

use st_core::dataio::{SinogramFile, VolumeFile};
use st_core::silhouette::{binarize_sinogram, SilhouetteOperator};
use st_core::xray::forward_project;
use st_core::ParallelGeometry;

const GEOMETRY: &str = "views=8;det=32;size=32;spacing=1;px=1;angles=equispaced";

fn st(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_st"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = st(args);
    assert!(
        out.status.success(),
        "st {:?}: {}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

#[test]
fn phantom_then_project() {
    let tmp = tempfile::tempdir().unwrap();
    let (x, y) = (path(tmp.path(), "x.stv"), path(tmp.path(), "y.sts"));
    ok(&["phantom", "--kind", "blob", "--size", "32", "--seed", "7", "--out", &x]);
    ok(&["project", "--geometry", GEOMETRY, "--in", &x, "--out", &y]);

    let sino = SinogramFile::read(Path::new(&y)).unwrap();
    let s = sino.to_sinogram().unwrap();
    assert_eq!((s.n_views(), s.n_det()), (8, 32));
    assert!(s.data().iter().all(|v| v.is_finite() && *v >= 0.0));
    assert!(s.data().iter().any(|v| *v > 0.0));
}

#[test]
fn oracle_reports_pass() {
    let out = ok(&["oracle", "--size", "3", "--views", "0,1.5707963"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("formula-oracle equivalence: PASS"), "{text}");
}

#[test]
fn binarize_and_maximal_match_library() {
    let tmp = tempfile::tempdir().unwrap();
    let x = path(tmp.path(), "x.stv");
    let (y, yb, xm) = (
        path(tmp.path(), "y.sts"),
        path(tmp.path(), "yb.sts"),
        path(tmp.path(), "xm.stv"),
    );
    ok(&["phantom", "--kind", "blob", "--size", "32", "--seed", "3", "--out", &x]);
    ok(&["project", "--geometry", GEOMETRY, "--in", &x, "--out", &y]);
    ok(&["binarize", "--threshold", "0", "--in", &y, "--out", &yb]);
    ok(&["maximal", "--geometry", GEOMETRY, "--in", &yb, "--out", &xm]);

    let g: ParallelGeometry = GEOMETRY.parse().unwrap();
    let truth = VolumeFile::read(Path::new(&x)).unwrap().binary_slices().unwrap();
    let sino = forward_project(&truth[0].to_image(), &g).unwrap();
    let op = SilhouetteOperator::new(&g);
    let want = op.maximal_solution(&binarize_sinogram(&sino, 0.0)).unwrap();
    let got = VolumeFile::read(Path::new(&xm)).unwrap().binary_slices().unwrap();
    assert_eq!(got, vec![want]);
}

#[test]
fn metrics_csv_header() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, csv) = (path(tmp.path(), "a.stv"), path(tmp.path(), "m.csv"));
    ok(&["phantom", "--kind", "volume", "--size", "16", "--count", "3", "--out", &a]);
    let out = ok(&["metrics", "--truth", &a, "--recon", &a, "--out", &csv]);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("slice_id,mse,psnr,ssim\n"), "{text}");
    assert!(String::from_utf8_lossy(&out.stdout).contains("mean_psnr=undefined"));
}

#[test]
fn exit_codes() {
    assert_eq!(st(&["oracle", "--bogus"]).status.code(), Some(1));
    let tmp = tempfile::tempdir().unwrap();
    let out = st(&[
        "maximal",
        "--geometry",
        GEOMETRY,
        "--in",
        &path(tmp.path(), "missing.sts"),
        "--out",
        &path(tmp.path(), "o.stv"),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(st(&["oracle", "--size", "5", "--views", "0"]).status.code(), Some(1));
}
