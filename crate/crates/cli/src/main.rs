//! `st`: batch front-end for silhouette tomography pipelines.
//!
//! Exit codes: 0 success, 1 validation error (bad flags, shapes, values),
//! 2 I/O or file-format error, 3 internal error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::info;
use rayon::prelude::*;

use st_core::dataio::{
    export_training_pairs, write_pgm, ExportOptions, Payload, PhantomSource, SinogramFile,
    TrainingMode, VolumeFile, SINOGRAM_MAGIC, VOLUME_MAGIC,
};
use st_core::metrics::{aggregate, slice_metrics, write_csv};
use st_core::oracle::check_maximal_formula;
use st_core::phantom::{ellipsoid_volume, notch_pair, stack_slices, SplitMix64};
use st_core::silhouette::{reconstruct_slices, threshold_values, SilhouetteOperator};
use st_core::{BinaryImage, BinarySinogram, Error, ParallelGeometry, XrayTransform};

#[derive(Parser)]
#[command(name = "st", version, about = "Silhouette tomography pipelines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum PhantomKind {
    Disk,
    Blob,
    NotchPair,
    Volume,
}

#[derive(Clone, Copy, ValueEnum)]
enum SourceKind {
    Blob,
    Disk,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Silhouette,
    Linear,
}

#[derive(Subcommand)]
enum Command {
    /// Generate binary phantoms as a volume file (one slice per phantom).
    Phantom {
        /// disk | blob | notch-pair (slices A0, B0, A1, B1, ...) | volume (ellipsoid, COUNT slices deep)
        #[arg(long, value_enum)]
        kind: PhantomKind,
        /// Slice side length in pixels.
        #[arg(long)]
        size: usize,
        /// Number of phantoms (slice depth for --kind volume).
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Geometry the notch pairs must agree under (default: 8 equispaced views).
        #[arg(long)]
        geometry: Option<ParallelGeometry>,
        /// Output volume (.stv).
        #[arg(long)]
        out: PathBuf,
    },
    /// Forward-project a volume: one slice gives a sinogram (.sts), several
    /// give a sinogram stack (.stv with dims depth x views x det).
    Project {
        #[arg(long)]
        geometry: ParallelGeometry,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Threshold a sinogram, sinogram stack or volume: 1 where value > threshold.
    Binarize {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        threshold: f64,
    },
    /// Maximal reconstruction of one binary sinogram.
    Maximal {
        #[arg(long)]
        geometry: ParallelGeometry,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also write the reconstruction as a PGM image.
        #[arg(long)]
        pgm: Option<PathBuf>,
    },
    /// Apply the adjoint to a sinogram or sinogram stack.
    Backproject {
        #[arg(long)]
        geometry: ParallelGeometry,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-slice MSE, PSNR and SSIM as CSV; means are printed to stdout.
    Metrics {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        recon: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (0 = all cores).
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
    /// Brute-force check of the maximal reconstruction on a tiny grid.
    Oracle {
        /// Grid side; at most 4.
        #[arg(long)]
        size: usize,
        /// Comma-separated view angles in radians.
        #[arg(long, value_delimiter = ',', required = true)]
        views: Vec<f64>,
    },
    /// Export (truth, backprojection) training pairs and a manifest.
    ExportTraining {
        #[arg(long)]
        geometry: ParallelGeometry,
        #[arg(long, value_enum, default_value = "blob")]
        kind: SourceKind,
        #[arg(long, value_enum)]
        mode: ModeArg,
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Overwrite an existing manifest.
        #[arg(long)]
        force: bool,
    },
    /// Maximal reconstruction of every slice of a binary sinogram stack.
    ReconVolume {
        #[arg(long)]
        geometry: ParallelGeometry,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads (0 = all cores).
        #[arg(long, default_value_t = 0)]
        threads: usize,
        /// Also write the middle slice as a PGM image.
        #[arg(long)]
        pgm: Option<PathBuf>,
    },
}

/// A file read by magic number.
enum ArrayFile {
    Volume(VolumeFile),
    Sinogram(SinogramFile),
}

fn read_any(path: &Path) -> st_core::Result<ArrayFile> {
    let bytes = fs::read(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    match bytes.get(..4) {
        Some(m) if m == VOLUME_MAGIC => Ok(ArrayFile::Volume(VolumeFile::decode(&bytes)?)),
        Some(m) if m == SINOGRAM_MAGIC => Ok(ArrayFile::Sinogram(SinogramFile::decode(&bytes)?)),
        _ => Err(Error::Parse {
            offset: 0,
            message: format!("{}: not a volume or sinogram file", path.display()),
        }),
    }
}

/// Sinograms from a `.sts` file or a `.stv` stack (depth x views x det).
fn read_sinograms(path: &Path, g: &ParallelGeometry) -> st_core::Result<Vec<SinogramFile>> {
    let sinos = match read_any(path)? {
        ArrayFile::Sinogram(s) => vec![s],
        ArrayFile::Volume(v) => {
            let len = v.height * v.width;
            (0..v.depth)
                .map(|k| {
                    let payload = match &v.payload {
                        Payload::Float(d) => Payload::Float(d[k * len..(k + 1) * len].to_vec()),
                        Payload::Binary(d) => Payload::Binary(d[k * len..(k + 1) * len].to_vec()),
                    };
                    SinogramFile::new(v.height, v.width, payload)
                })
                .collect::<st_core::Result<_>>()?
        }
    };
    for s in &sinos {
        g.check_sinogram_dims(s.n_views, s.n_det)?;
    }
    Ok(sinos)
}

fn stack_sinograms(sinos: &[SinogramFile]) -> st_core::Result<VolumeFile> {
    let (nv, nd) = (sinos[0].n_views, sinos[0].n_det);
    let payload = if sinos.iter().all(|s| s.payload.is_binary()) {
        Payload::Binary(
            sinos
                .iter()
                .flat_map(|s| match &s.payload {
                    Payload::Binary(d) => d.clone(),
                    Payload::Float(_) => unreachable!(),
                })
                .collect(),
        )
    } else {
        Payload::Float(
            sinos
                .iter()
                .flat_map(|s| s.payload.to_f64().into_iter().map(|v| v as f32))
                .collect(),
        )
    };
    VolumeFile::new(sinos.len(), nv, nd, payload)
}

fn pool(threads: usize) -> st_core::Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Invariant(format!("cannot start thread pool: {e}")))
}

fn run(cmd: Command) -> st_core::Result<()> {
    match cmd {
        Command::Phantom {
            kind,
            size,
            count,
            seed,
            geometry,
            out,
        } => {
            if size == 0 || count == 0 {
                return Err(Error::Validation("size and count must be positive".into()));
            }
            let mut seeds = SplitMix64::new(seed);
            let volume = match kind {
                PhantomKind::Disk | PhantomKind::Blob => {
                    let source = match kind {
                        PhantomKind::Disk => PhantomSource::Disk,
                        _ => PhantomSource::Blob,
                    };
                    let slices = (0..count)
                        .map(|_| source.generate(size, seeds.next_u64()))
                        .collect::<st_core::Result<Vec<_>>>()?;
                    stack_slices(&slices)?
                }
                PhantomKind::NotchPair => {
                    let g = match geometry {
                        Some(g) => g,
                        None => ParallelGeometry::equispaced(8, size)?,
                    };
                    let mut slices = Vec::with_capacity(2 * count);
                    for _ in 0..count {
                        let (a, b) = notch_pair(size, seeds.next_u64(), &g)?;
                        slices.push(a);
                        slices.push(b);
                    }
                    stack_slices(&slices)?
                }
                PhantomKind::Volume => ellipsoid_volume(count, size, seed)?,
            };
            info!("phantom: {:?} voxels -> {}", volume.dims(), out.display());
            VolumeFile::from_volume(&volume).write(&out)
        }

        Command::Project {
            geometry,
            input,
            out,
        } => {
            let vol = VolumeFile::read(&input)?;
            let slices = vol.images()?;
            let h = XrayTransform::new(&geometry);
            let sinos = slices
                .iter()
                .map(|x| h.forward(x).map(|y| SinogramFile::from_sinogram(&y)))
                .collect::<st_core::Result<Vec<_>>>()?;
            info!("project: {} slice(s) -> {}", sinos.len(), out.display());
            if sinos.len() == 1 {
                sinos[0].write(&out)
            } else {
                stack_sinograms(&sinos)?.write(&out)
            }
        }

        Command::Binarize {
            input,
            out,
            threshold,
        } => {
            if !threshold.is_finite() {
                return Err(Error::Validation("threshold must be finite".into()));
            }
            match read_any(&input)? {
                ArrayFile::Sinogram(s) => {
                    let data = threshold_values(&s.payload.to_f64(), threshold);
                    SinogramFile::new(s.n_views, s.n_det, Payload::Binary(data))?.write(&out)
                }
                ArrayFile::Volume(v) => {
                    let data = threshold_values(&v.payload.to_f64(), threshold);
                    VolumeFile::new(v.depth, v.height, v.width, Payload::Binary(data))?.write(&out)
                }
            }
        }

        Command::Maximal {
            geometry,
            input,
            out,
            pgm,
        } => {
            let y = SinogramFile::read(&input)?.to_binary()?;
            let x = SilhouetteOperator::new(&geometry).maximal_solution(&y)?;
            if let Some(p) = pgm {
                write_pgm(&x.to_image(), p)?;
            }
            VolumeFile::from_binary_slices(&[x])?.write(&out)
        }

        Command::Backproject {
            geometry,
            input,
            out,
        } => {
            let sinos = read_sinograms(&input, &geometry)?;
            let h = XrayTransform::new(&geometry);
            let images = sinos
                .iter()
                .map(|s| h.adjoint(&s.to_sinogram()?))
                .collect::<st_core::Result<Vec<_>>>()?;
            VolumeFile::from_images(&images)?.write(&out)
        }

        Command::Metrics {
            truth,
            recon,
            out,
            threads,
        } => {
            let truth = VolumeFile::read(&truth)?.images()?;
            let recon = VolumeFile::read(&recon)?.images()?;
            if truth.len() != recon.len() {
                return Err(Error::Validation(format!(
                    "truth has {} slices, reconstruction has {}",
                    truth.len(),
                    recon.len()
                )));
            }
            let rows = pool(threads)?.install(|| {
                truth
                    .par_iter()
                    .zip(&recon)
                    .enumerate()
                    .map(|(k, (t, r))| slice_metrics(t, r).map(|m| (k, m)))
                    .collect::<st_core::Result<Vec<_>>>()
            })?;
            let summary = aggregate(&rows.iter().map(|(_, m)| *m).collect::<Vec<_>>())?;
            let mut buf = Vec::new();
            write_csv(&mut buf, &rows).expect("writing to memory");
            fs::write(&out, buf).map_err(|e| Error::Io {
                path: out.clone(),
                source: e,
            })?;
            println!("{summary}");
            Ok(())
        }

        Command::Oracle { size, views } => {
            let g = ParallelGeometry::new(views, size, 1.0, size, 1.0)?;
            let report = check_maximal_formula(&g)?;
            println!("{report}");
            if report.passed() {
                Ok(())
            } else {
                Err(Error::Invariant("formula-oracle equivalence failed".into()))
            }
        }

        Command::ExportTraining {
            geometry,
            kind,
            mode,
            count,
            seed,
            out,
            force,
        } => {
            let opts = ExportOptions {
                source: match kind {
                    SourceKind::Blob => PhantomSource::Blob,
                    SourceKind::Disk => PhantomSource::Disk,
                },
                mode: match mode {
                    ModeArg::Silhouette => TrainingMode::Silhouette,
                    ModeArg::Linear => TrainingMode::Linear,
                },
                count,
                seed,
                force,
            };
            let manifest = export_training_pairs(&geometry, &opts, &out)?;
            info!(
                "export-training: {} pair(s) -> {}",
                manifest.records.len(),
                out.display()
            );
            Ok(())
        }

        Command::ReconVolume {
            geometry,
            input,
            out,
            threads,
            pgm,
        } => {
            let sinos = read_sinograms(&input, &geometry)?
                .iter()
                .map(SinogramFile::to_binary)
                .collect::<st_core::Result<Vec<BinarySinogram>>>()?;
            if sinos.is_empty() {
                return Err(Error::Validation("input holds no slices".into()));
            }
            let slices: Vec<BinaryImage> =
                pool(threads)?.install(|| reconstruct_slices(&sinos, &geometry))?;
            info!("recon-volume: {} slice(s) -> {}", slices.len(), out.display());
            if let Some(p) = pgm {
                write_pgm(&slices[slices.len() / 2].to_image(), p)?;
            }
            VolumeFile::from_binary_slices(&slices)?.write(&out)
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Validation(_)
        | Error::Descriptor(_)
        | Error::Capacity { .. }
        | Error::ManifestExists(_)
        | Error::NoPairFound(_) => 1,
        Error::Io { .. } | Error::Parse { .. } => 2,
        Error::Invariant(_) => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::new()
        .filter_level(log::LevelFilter::Info)
        .format_timestamp(None)
        .parse_default_env()
        .init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Validation("x".into())), 1);
        assert_eq!(
            exit_code(&Error::Parse {
                offset: 0,
                message: "x".into()
            }),
            2
        );
        assert_eq!(exit_code(&Error::Invariant("x".into())), 3);
    }
}
