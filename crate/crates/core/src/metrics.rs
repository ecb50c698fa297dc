//! Slice-wise MSE, PSNR and SSIM, and their averaging over a test set.
//!
//! SSIM uses an 11×11 Gaussian window with σ = 1.5, K₁ = 0.01, K₂ = 0.03 and a
//! data range of 1.0. Only window positions lying fully inside the image are
//! evaluated (no padding).

use std::fmt;
use std::io::Write;

use crate::error::{Error, Result};
use crate::xray::Image;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;
pub const SSIM_DATA_RANGE: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Psnr {
    Finite(f64),
    /// The images are identical.
    Infinite,
}

impl Psnr {
    pub fn finite(self) -> Option<f64> {
        match self {
            Psnr::Finite(v) => Some(v),
            Psnr::Infinite => None,
        }
    }
}

impl fmt::Display for Psnr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Psnr::Finite(v) => write!(f, "{v}"),
            Psnr::Infinite => f.write_str("inf"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceMetrics {
    pub mse: f64,
    pub psnr: Psnr,
    pub ssim: f64,
}

/// Test-set means. Infinite-PSNR slices are left out of the PSNR mean only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub mse: f64,
    /// `None` when every slice had infinite PSNR.
    pub psnr: Option<f64>,
    pub ssim: f64,
    pub n_discarded_psnr: usize,
    pub n_slices: usize,
}

fn check_dims(a: &Image, b: &Image) -> Result<()> {
    if a.size() != b.size() {
        return Err(Error::validation(format!(
            "image sizes differ: {} vs {}",
            a.size(),
            b.size()
        )));
    }
    Ok(())
}

pub fn mse(a: &Image, b: &Image) -> Result<f64> {
    check_dims(a, b)?;
    let n = a.data().len();
    if n == 0 {
        return Err(Error::validation("cannot compare empty images"));
    }
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(sum / n as f64)
}

pub fn psnr_from_mse(mse: f64, peak: f64) -> Psnr {
    if mse == 0.0 {
        Psnr::Infinite
    } else {
        Psnr::Finite(10.0 * (peak * peak / mse).log10())
    }
}

pub fn psnr(a: &Image, b: &Image, peak: f64) -> Result<Psnr> {
    if !(peak > 0.0) {
        return Err(Error::validation(format!("peak must be positive, got {peak}")));
    }
    Ok(psnr_from_mse(mse(a, b)?, peak))
}

/// Normalised 1D Gaussian taps.
fn gaussian_taps() -> [f64; SSIM_WINDOW] {
    let mut taps = [0.0; SSIM_WINDOW];
    let half = (SSIM_WINDOW / 2) as f64;
    for (i, t) in taps.iter_mut().enumerate() {
        let d = i as f64 - half;
        *t = (-(d * d) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let sum: f64 = taps.iter().sum();
    taps.iter_mut().for_each(|t| *t /= sum);
    taps
}

/// Valid-mode separable filtering of an `n × n` image.
fn filter_valid(src: &[f64], n: usize, taps: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let m = n + 1 - SSIM_WINDOW;
    let mut rows = vec![0.0; n * m];
    for r in 0..n {
        for c in 0..m {
            rows[r * m + c] = taps
                .iter()
                .enumerate()
                .map(|(k, t)| t * src[r * n + c + k])
                .sum();
        }
    }
    let mut out = vec![0.0; m * m];
    for r in 0..m {
        for c in 0..m {
            out[r * m + c] = taps
                .iter()
                .enumerate()
                .map(|(k, t)| t * rows[(r + k) * m + c])
                .sum();
        }
    }
    out
}

pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    check_dims(a, b)?;
    let n = a.size();
    if n < SSIM_WINDOW {
        return Err(Error::validation(format!(
            "SSIM needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}, got {n}x{n}"
        )));
    }
    let taps = gaussian_taps();
    let (xa, xb) = (a.data(), b.data());
    let sq = |v: &[f64]| v.iter().map(|x| x * x).collect::<Vec<_>>();
    let prod: Vec<f64> = xa.iter().zip(xb).map(|(x, y)| x * y).collect();

    let mu_a = filter_valid(xa, n, &taps);
    let mu_b = filter_valid(xb, n, &taps);
    let e_aa = filter_valid(&sq(xa), n, &taps);
    let e_bb = filter_valid(&sq(xb), n, &taps);
    let e_ab = filter_valid(&prod, n, &taps);

    let c1 = (SSIM_K1 * SSIM_DATA_RANGE).powi(2);
    let c2 = (SSIM_K2 * SSIM_DATA_RANGE).powi(2);
    let total: f64 = (0..mu_a.len())
        .map(|i| {
            let (ma, mb) = (mu_a[i], mu_b[i]);
            let var_a = e_aa[i] - ma * ma;
            let var_b = e_bb[i] - mb * mb;
            let cov = e_ab[i] - ma * mb;
            ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2))
        })
        .sum();
    Ok(total / mu_a.len() as f64)
}

/// MSE, PSNR (peak 1) and SSIM of a reconstruction against the truth.
pub fn slice_metrics(truth: &Image, recon: &Image) -> Result<SliceMetrics> {
    let m = mse(truth, recon)?;
    Ok(SliceMetrics {
        mse: m,
        psnr: psnr_from_mse(m, 1.0),
        ssim: ssim(truth, recon)?,
    })
}

pub fn aggregate(per_slice: &[SliceMetrics]) -> Result<Aggregate> {
    if per_slice.is_empty() {
        return Err(Error::validation("cannot aggregate an empty list of slices"));
    }
    let n = per_slice.len() as f64;
    let finite: Vec<f64> = per_slice.iter().filter_map(|s| s.psnr.finite()).collect();
    Ok(Aggregate {
        mse: per_slice.iter().map(|s| s.mse).sum::<f64>() / n,
        psnr: (!finite.is_empty()).then(|| finite.iter().sum::<f64>() / finite.len() as f64),
        ssim: per_slice.iter().map(|s| s.ssim).sum::<f64>() / n,
        n_discarded_psnr: per_slice.len() - finite.len(),
        n_slices: per_slice.len(),
    })
}

/// Per-slice CSV with header `slice_id,mse,psnr,ssim`; infinite PSNR is
/// written as `inf`.
pub fn write_csv<W: Write>(
    mut w: W,
    rows: &[(usize, SliceMetrics)],
) -> std::io::Result<()> {
    writeln!(w, "slice_id,mse,psnr,ssim")?;
    for (id, m) in rows {
        writeln!(w, "{id},{},{},{}", m.mse, m.psnr, m.ssim)?;
    }
    Ok(())
}

impl fmt::Display for Aggregate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "slices={} mean_mse={} mean_psnr=", self.n_slices, self.mse)?;
        match self.psnr {
            Some(p) => write!(f, "{p}")?,
            None => f.write_str("undefined")?,
        }
        write!(
            f,
            " mean_ssim={} discarded_psnr={}",
            self.ssim, self.n_discarded_psnr
        )
    }
}
