//! File formats.
//!
//! All integers and floats are little-endian.
//!
//! Volume (`.stv`):
//!
//! | offset | size | content                              |
//! |--------|------|--------------------------------------|
//! | 0      | 4    | magic `STV1`                         |
//! | 4      | 1    | dtype: 0 = f32, 1 = binary u8        |
//! | 5      | 12   | u32 depth, height, width             |
//! | 17     | ..   | payload, depth-major then row-major  |
//!
//! Sinogram (`.sts`): magic `STS1`, dtype byte, u32 `n_views`, u32 `n_det`,
//! then the view-major payload starting at offset 13.
//!
//! Training manifest (`manifest.tsv`): a header line
//! `geometry=<descriptor>\tmode=<silhouette|linear>` followed by one line per
//! pair: `pair_id\ttruth\tinput\tsinogram`, paths relative to the manifest's
//! directory. The manifest is written after every pair file, so its presence
//! means the export completed.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::geometry::ParallelGeometry;
use crate::phantom::{disk, random_blob, stack_slices, volume_slices, SplitMix64, Volume};
use crate::silhouette::{BinaryImage, BinarySinogram, SilhouetteOperator};
use crate::xray::{Image, Sinogram};

pub const VOLUME_MAGIC: &[u8; 4] = b"STV1";
pub const SINOGRAM_MAGIC: &[u8; 4] = b"STS1";
pub const DTYPE_F32: u8 = 0;
pub const DTYPE_BINARY: u8 = 1;
pub const MANIFEST_NAME: &str = "manifest.tsv";

const VOLUME_HEADER: usize = 17;
const SINOGRAM_HEADER: usize = 13;

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Float(Vec<f32>),
    Binary(Vec<u8>),
}

impl Payload {
    pub fn len(&self) -> usize {
        match self {
            Payload::Float(v) => v.len(),
            Payload::Binary(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dtype(&self) -> u8 {
        match self {
            Payload::Float(_) => DTYPE_F32,
            Payload::Binary(_) => DTYPE_BINARY,
        }
    }

    pub fn is_binary(&self) -> bool {
        matches!(self, Payload::Binary(_))
    }

    /// Values widened to `f64`.
    pub fn to_f64(&self) -> Vec<f64> {
        match self {
            Payload::Float(v) => v.iter().map(|&x| x as f64).collect(),
            Payload::Binary(v) => v.iter().map(|&x| x as f64).collect(),
        }
    }

    fn encode_into(&self, out: &mut Vec<u8>) {
        match self {
            Payload::Float(v) => v.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
            Payload::Binary(v) => out.extend_from_slice(v),
        }
    }

    fn decode(dtype: u8, bytes: &[u8], count: usize, offset: usize) -> Result<Self> {
        let elem = match dtype {
            DTYPE_F32 => 4,
            DTYPE_BINARY => 1,
            other => return Err(Error::parse(4, format!("unknown dtype code {other}"))),
        };
        let expected = count
            .checked_mul(elem)
            .ok_or_else(|| Error::parse(offset, "payload size overflows"))?;
        if bytes.len() != expected {
            return Err(Error::parse(
                offset,
                format!(
                    "payload length mismatch: expected {expected} bytes, got {}",
                    bytes.len()
                ),
            ));
        }
        if dtype == DTYPE_F32 {
            Ok(Payload::Float(
                bytes
                    .chunks_exact(4)
                    .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                    .collect(),
            ))
        } else {
            if let Some(i) = bytes.iter().position(|&b| b > 1) {
                return Err(Error::parse(
                    offset + i,
                    format!("binary payload holds value {}", bytes[i]),
                ));
            }
            Ok(Payload::Binary(bytes.to_vec()))
        }
    }
}

fn read_u32(bytes: &[u8], offset: usize) -> u32 {
    u32::from_le_bytes([
        bytes[offset],
        bytes[offset + 1],
        bytes[offset + 2],
        bytes[offset + 3],
    ])
}

fn dim_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::validation(format!("{what} {v} does not fit in u32")))
}

fn check_header(bytes: &[u8], magic: &[u8; 4], header: usize) -> Result<()> {
    if bytes.len() < header {
        return Err(Error::parse(
            bytes.len(),
            format!("truncated header: expected {header} bytes, got {}", bytes.len()),
        ));
    }
    if &bytes[..4] != magic {
        return Err(Error::parse(
            0,
            format!(
                "bad magic {:?}, expected {:?}",
                String::from_utf8_lossy(&bytes[..4]),
                String::from_utf8_lossy(magic)
            ),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct VolumeFile {
    pub depth: usize,
    pub height: usize,
    pub width: usize,
    pub payload: Payload,
}

impl VolumeFile {
    pub fn new(depth: usize, height: usize, width: usize, payload: Payload) -> Result<Self> {
        if payload.len() != depth * height * width {
            return Err(Error::validation(format!(
                "volume {depth}x{height}x{width} needs {} values, got {}",
                depth * height * width,
                payload.len()
            )));
        }
        if let Payload::Binary(v) = &payload {
            if v.iter().any(|&b| b > 1) {
                return Err(Error::validation("binary payload must hold only 0 and 1"));
            }
        }
        Ok(Self {
            depth,
            height,
            width,
            payload,
        })
    }

    pub fn from_volume(v: &Volume) -> Self {
        let (depth, height, width) = v.dims();
        Self {
            depth,
            height,
            width,
            payload: Payload::Binary(v.data().to_vec()),
        }
    }

    pub fn from_binary_slices(slices: &[BinaryImage]) -> Result<Self> {
        Ok(Self::from_volume(&stack_slices(slices)?))
    }

    /// Stack real slices, narrowing to `f32`.
    pub fn from_images(slices: &[Image]) -> Result<Self> {
        let size = slices
            .first()
            .ok_or_else(|| Error::validation("no slices to store"))?
            .size();
        if slices.iter().any(|s| s.size() != size) {
            return Err(Error::validation("slices have different sizes"));
        }
        let data = slices
            .iter()
            .flat_map(|s| s.data().iter().map(|&v| v as f32))
            .collect();
        Self::new(slices.len(), size, size, Payload::Float(data))
    }

    pub fn to_volume(&self) -> Result<Volume> {
        match &self.payload {
            Payload::Binary(v) => Volume::new(self.depth, self.height, self.width, v.clone()),
            Payload::Float(_) => Err(Error::validation("expected a binary volume, found f32")),
        }
    }

    pub fn binary_slices(&self) -> Result<Vec<BinaryImage>> {
        volume_slices(&self.to_volume()?)
    }

    /// Every slice as a real image (binary voxels become 0.0 / 1.0).
    pub fn images(&self) -> Result<Vec<Image>> {
        if self.height != self.width {
            return Err(Error::validation(format!(
                "slices must be square, volume is {}x{}",
                self.height, self.width
            )));
        }
        let all = self.payload.to_f64();
        let len = self.height * self.width;
        (0..self.depth)
            .map(|k| Image::new(self.width, all[k * len..(k + 1) * len].to_vec()))
            .collect()
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(VOLUME_HEADER + self.payload.len() * 4);
        out.extend_from_slice(VOLUME_MAGIC);
        out.push(self.payload.dtype());
        for d in [self.depth, self.height, self.width] {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        self.payload.encode_into(&mut out);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        check_header(bytes, VOLUME_MAGIC, VOLUME_HEADER)?;
        let dtype = bytes[4];
        let depth = read_u32(bytes, 5) as usize;
        let height = read_u32(bytes, 9) as usize;
        let width = read_u32(bytes, 13) as usize;
        let count = depth
            .checked_mul(height)
            .and_then(|v| v.checked_mul(width))
            .ok_or_else(|| Error::parse(5, "volume dims overflow"))?;
        let payload = Payload::decode(dtype, &bytes[VOLUME_HEADER..], count, VOLUME_HEADER)?;
        Ok(Self {
            depth,
            height,
            width,
            payload,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        dim_u32(self.depth, "depth")?;
        dim_u32(self.height, "height")?;
        dim_u32(self.width, "width")?;
        write_bytes(path.as_ref(), &self.encode())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::decode(&read_bytes(path.as_ref())?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SinogramFile {
    pub n_views: usize,
    pub n_det: usize,
    pub payload: Payload,
}

impl SinogramFile {
    pub fn new(n_views: usize, n_det: usize, payload: Payload) -> Result<Self> {
        if payload.len() != n_views * n_det {
            return Err(Error::validation(format!(
                "sinogram {n_views}x{n_det} needs {} values, got {}",
                n_views * n_det,
                payload.len()
            )));
        }
        if let Payload::Binary(v) = &payload {
            if v.iter().any(|&b| b > 1) {
                return Err(Error::validation("binary payload must hold only 0 and 1"));
            }
        }
        Ok(Self {
            n_views,
            n_det,
            payload,
        })
    }

    pub fn from_sinogram(s: &Sinogram) -> Self {
        Self {
            n_views: s.n_views(),
            n_det: s.n_det(),
            payload: Payload::Float(s.data().iter().map(|&v| v as f32).collect()),
        }
    }

    pub fn from_binary(s: &BinarySinogram) -> Self {
        Self {
            n_views: s.n_views(),
            n_det: s.n_det(),
            payload: Payload::Binary(s.data().to_vec()),
        }
    }

    pub fn to_sinogram(&self) -> Result<Sinogram> {
        Sinogram::new(self.n_views, self.n_det, self.payload.to_f64())
    }

    pub fn to_binary(&self) -> Result<BinarySinogram> {
        match &self.payload {
            Payload::Binary(v) => BinarySinogram::new(self.n_views, self.n_det, v.clone()),
            Payload::Float(_) => Err(Error::validation(
                "expected a binary sinogram, found f32 (binarize it first)",
            )),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(SINOGRAM_HEADER + self.payload.len() * 4);
        out.extend_from_slice(SINOGRAM_MAGIC);
        out.push(self.payload.dtype());
        out.extend_from_slice(&(self.n_views as u32).to_le_bytes());
        out.extend_from_slice(&(self.n_det as u32).to_le_bytes());
        self.payload.encode_into(&mut out);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        check_header(bytes, SINOGRAM_MAGIC, SINOGRAM_HEADER)?;
        let dtype = bytes[4];
        let n_views = read_u32(bytes, 5) as usize;
        let n_det = read_u32(bytes, 9) as usize;
        let count = n_views
            .checked_mul(n_det)
            .ok_or_else(|| Error::parse(5, "sinogram dims overflow"))?;
        let payload = Payload::decode(dtype, &bytes[SINOGRAM_HEADER..], count, SINOGRAM_HEADER)?;
        Ok(Self {
            n_views,
            n_det,
            payload,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        dim_u32(self.n_views, "n_views")?;
        dim_u32(self.n_det, "n_det")?;
        write_bytes(path.as_ref(), &self.encode())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::decode(&read_bytes(path.as_ref())?)
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// 8-bit binary PGM (P5). `[0, 1]` maps linearly onto `[0, 255]`, values are
/// clamped, and halves round to even (0.5 becomes 128).
pub fn encode_pgm(img: &Image) -> Vec<u8> {
    let n = img.size();
    let mut out = format!("P5\n{n} {n}\n255\n").into_bytes();
    out.extend(
        img.data()
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round_ties_even() as u8),
    );
    out
}

pub fn write_pgm(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    write_bytes(path.as_ref(), &encode_pgm(img))
}

/// What the stored measurements of a training pair are.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrainingMode {
    /// Binary `y = S(x)`.
    Silhouette,
    /// Real `y = Hx`.
    Linear,
}

impl fmt::Display for TrainingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TrainingMode::Silhouette => "silhouette",
            TrainingMode::Linear => "linear",
        })
    }
}

impl FromStr for TrainingMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "silhouette" => Ok(TrainingMode::Silhouette),
            "linear" => Ok(TrainingMode::Linear),
            other => Err(Error::validation(format!(
                "unknown mode '{other}' (expected silhouette or linear)"
            ))),
        }
    }
}

/// Phantom family used for exported truth slices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhantomSource {
    Blob,
    Disk,
}

impl PhantomSource {
    pub fn generate(self, size: usize, seed: u64) -> Result<BinaryImage> {
        match self {
            PhantomSource::Blob => random_blob(size, seed),
            PhantomSource::Disk => {
                let mut rng = SplitMix64::new(seed);
                let s = size as f64;
                let center = [rng.uniform(0.35, 0.65) * s, rng.uniform(0.35, 0.65) * s];
                Ok(disk(size, center, rng.uniform(s / 8.0, s / 4.0)))
            }
        }
    }
}

impl FromStr for PhantomSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "blob" => Ok(PhantomSource::Blob),
            "disk" => Ok(PhantomSource::Disk),
            other => Err(Error::validation(format!(
                "unknown phantom source '{other}' (expected blob or disk)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRecord {
    pub pair_id: String,
    pub truth: PathBuf,
    pub input: PathBuf,
    pub sinogram: PathBuf,
}

/// Index of exported `(x, Hᵀy)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingManifest {
    pub geometry: ParallelGeometry,
    pub mode: TrainingMode,
    pub records: Vec<ManifestRecord>,
}

impl TrainingManifest {
    pub fn to_text(&self) -> String {
        let mut s = format!("geometry={}\tmode={}\n", self.geometry, self.mode);
        for r in &self.records {
            s.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                r.pair_id,
                r.truth.display(),
                r.input.display(),
                r.sinogram.display()
            ));
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::parse(0, "empty manifest"))?;
        let mut geometry = None;
        let mut mode = None;
        for field in header.split('\t') {
            match field.split_once('=') {
                Some(("geometry", v)) => geometry = Some(v.parse::<ParallelGeometry>()?),
                Some(("mode", v)) => mode = Some(v.parse::<TrainingMode>()?),
                _ => {
                    return Err(Error::parse(0, format!("unexpected header field '{field}'")));
                }
            }
        }
        let geometry = geometry.ok_or_else(|| Error::parse(0, "header lacks geometry="))?;
        let mode = mode.ok_or_else(|| Error::parse(0, "header lacks mode="))?;

        let mut offset = header.len() + 1;
        let mut records = Vec::new();
        for line in lines {
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 4 {
                return Err(Error::parse(
                    offset,
                    format!("expected 4 tab-separated fields, got {}", fields.len()),
                ));
            }
            records.push(ManifestRecord {
                pair_id: fields[0].to_string(),
                truth: PathBuf::from(fields[1]),
                input: PathBuf::from(fields[2]),
                sinogram: PathBuf::from(fields[3]),
            });
            offset += line.len() + 1;
        }
        Ok(Self {
            geometry,
            mode,
            records,
        })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = read_bytes(path)?;
        let text = String::from_utf8(bytes)
            .map_err(|e| Error::parse(e.utf8_error().valid_up_to(), "manifest is not UTF-8"))?;
        Self::parse(&text)
    }

    /// Check that every referenced file exists, parses, and matches the
    /// geometry and mode. Paths are resolved against `base_dir`.
    pub fn validate(&self, base_dir: impl AsRef<Path>) -> Result<()> {
        let base = base_dir.as_ref();
        let g = &self.geometry;
        let n = g.img_size();
        for r in &self.records {
            let truth = VolumeFile::read(base.join(&r.truth))?;
            if !truth.payload.is_binary() || (truth.depth, truth.height, truth.width) != (1, n, n)
            {
                return Err(Error::validation(format!(
                    "{}: truth must be a 1x{n}x{n} binary volume",
                    r.pair_id
                )));
            }
            let input = VolumeFile::read(base.join(&r.input))?;
            if input.payload.is_binary() || (input.depth, input.height, input.width) != (1, n, n) {
                return Err(Error::validation(format!(
                    "{}: input must be a 1x{n}x{n} f32 volume",
                    r.pair_id
                )));
            }
            let sino = SinogramFile::read(base.join(&r.sinogram))?;
            g.check_sinogram_dims(sino.n_views, sino.n_det)?;
            let want_binary = self.mode == TrainingMode::Silhouette;
            if sino.payload.is_binary() != want_binary {
                return Err(Error::validation(format!(
                    "{}: sinogram dtype does not match mode {}",
                    r.pair_id, self.mode
                )));
            }
        }
        Ok(())
    }
}

/// Settings for [`export_training_pairs`].
#[derive(Debug, Clone)]
pub struct ExportOptions {
    pub source: PhantomSource,
    pub mode: TrainingMode,
    pub count: usize,
    pub seed: u64,
    /// Overwrite an existing manifest.
    pub force: bool,
}

/// Write `count` training pairs and their manifest into `out_dir`.
///
/// Each pair holds the truth slice `x`, the measurements (`S(x)` or `Hx`) and
/// the network input `Hᵀy`. Output depends only on the arguments.
pub fn export_training_pairs(
    g: &ParallelGeometry,
    opts: &ExportOptions,
    out_dir: impl AsRef<Path>,
) -> Result<TrainingManifest> {
    let out_dir = out_dir.as_ref();
    if opts.count == 0 {
        return Err(Error::validation("count must be at least 1"));
    }
    let manifest_path = out_dir.join(MANIFEST_NAME);
    if manifest_path.exists() {
        if !opts.force {
            return Err(Error::ManifestExists(manifest_path));
        }
        fs::remove_file(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    }
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let op = SilhouetteOperator::new(g);
    let h = op.transform();
    let mut seeds = SplitMix64::new(opts.seed);
    let width = opts.count.to_string().len().max(4);
    let mut records = Vec::with_capacity(opts.count);
    for i in 0..opts.count {
        let x = opts.source.generate(g.img_size(), seeds.next_u64())?;
        let (sino_file, y) = match opts.mode {
            TrainingMode::Silhouette => {
                let y = op.forward(&x)?;
                let yf = y.to_sinogram().into_data();
                (SinogramFile::from_binary(&y), yf)
            }
            TrainingMode::Linear => {
                let y = h.forward(&x.to_image())?;
                (SinogramFile::from_sinogram(&y), y.into_data())
            }
        };
        let input = Image::new(g.img_size(), h.apply_adjoint(&y))?;

        let pair_id = format!("pair_{i:0width$}");
        let record = ManifestRecord {
            truth: PathBuf::from(format!("{pair_id}_truth.stv")),
            input: PathBuf::from(format!("{pair_id}_input.stv")),
            sinogram: PathBuf::from(format!("{pair_id}_sino.sts")),
            pair_id,
        };
        VolumeFile::from_binary_slices(std::slice::from_ref(&x))?
            .write(out_dir.join(&record.truth))?;
        VolumeFile::from_images(std::slice::from_ref(&input))?
            .write(out_dir.join(&record.input))?;
        sino_file.write(out_dir.join(&record.sinogram))?;
        records.push(record);
    }

    let manifest = TrainingManifest {
        geometry: g.clone(),
        mode: opts.mode,
        records,
    };
    let tmp = out_dir.join(format!("{MANIFEST_NAME}.tmp"));
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(manifest.to_text().as_bytes())
        .and_then(|_| f.sync_all())
        .map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, &manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn volume_round_trip(depth in 0usize..4, h in 1usize..6, w in 1usize..6,
                             seed in any::<u64>(), binary in any::<bool>()) {
            let mut rng = SplitMix64::new(seed);
            let n = depth * h * w;
            let payload = if binary {
                Payload::Binary((0..n).map(|_| (rng.next_u64() & 1) as u8).collect())
            } else {
                Payload::Float((0..n).map(|_| f32::from_bits(rng.next_u64() as u32 & 0x7f7f_ffff)).collect())
            };
            let v = VolumeFile::new(depth, h, w, payload).unwrap();
            let bytes = v.encode();
            let back = VolumeFile::decode(&bytes).unwrap();
            prop_assert_eq!(back.encode(), bytes);
            prop_assert_eq!(back, v);
        }

        #[test]
        fn sinogram_round_trip(nv in 1usize..5, nd in 1usize..7, seed in any::<u64>()) {
            let mut rng = SplitMix64::new(seed);
            let data: Vec<f32> = (0..nv * nd).map(|_| rng.next_f64() as f32 * 100.0).collect();
            let s = SinogramFile::new(nv, nd, Payload::Float(data)).unwrap();
            let bytes = s.encode();
            prop_assert_eq!(SinogramFile::decode(&bytes).unwrap().encode(), bytes);
        }
    }

    #[test]
    fn header_layout() {
        let v = VolumeFile::new(1, 1, 2, Payload::Binary(vec![1, 0])).unwrap();
        assert_eq!(
            v.encode(),
            [b"STV1".as_slice(), &[1], &[1, 0, 0, 0], &[1, 0, 0, 0], &[2, 0, 0, 0], &[1, 0]]
                .concat()
        );
        let s = SinogramFile::new(1, 1, Payload::Float(vec![1.0])).unwrap();
        assert_eq!(
            s.encode(),
            [b"STS1".as_slice(), &[0], &[1, 0, 0, 0], &[1, 0, 0, 0], &1.0f32.to_le_bytes()]
                .concat()
        );
    }

    #[test]
    fn truncated_file_reports_lengths() {
        let v = VolumeFile::new(2, 3, 3, Payload::Float(vec![0.5; 18])).unwrap();
        let bytes = v.encode();
        let err = VolumeFile::decode(&bytes[..bytes.len() - 3]).unwrap_err();
        match err {
            Error::Parse { offset, message } => {
                assert_eq!(offset, 17);
                assert!(message.contains("expected 72 bytes, got 69"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            VolumeFile::decode(&bytes[..10]),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn bad_magic_and_dtype() {
        let mut bytes = VolumeFile::new(1, 1, 1, Payload::Binary(vec![1])).unwrap().encode();
        bytes[0] = b'X';
        assert!(matches!(VolumeFile::decode(&bytes), Err(Error::Parse { offset: 0, .. })));
        let mut bytes = SinogramFile::new(1, 1, Payload::Binary(vec![1])).unwrap().encode();
        bytes[4] = 7;
        assert!(matches!(SinogramFile::decode(&bytes), Err(Error::Parse { offset: 4, .. })));
        // volume bytes are not a sinogram
        let vb = VolumeFile::new(1, 1, 1, Payload::Binary(vec![1])).unwrap().encode();
        assert!(SinogramFile::decode(&vb).is_err());
    }

    #[test]
    fn binary_payload_rejects_two() {
        let mut bytes = VolumeFile::new(1, 1, 3, Payload::Binary(vec![0, 1, 0]))
            .unwrap()
            .encode();
        bytes[19] = 2;
        match VolumeFile::decode(&bytes) {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 19),
            other => panic!("unexpected {other:?}"),
        }
        assert!(VolumeFile::new(1, 1, 1, Payload::Binary(vec![2])).is_err());
    }

    #[test]
    fn pgm_mapping() {
        let body = |img: &Image| encode_pgm(img)[b"P5\n2 2\n255\n".len()..].to_vec();
        assert_eq!(body(&Image::zeros(2)), vec![0; 4]);
        assert_eq!(body(&Image::filled(2, 1.0)), vec![255; 4]);
        assert_eq!(body(&Image::filled(2, 0.5)), vec![128; 4]);
        let img = Image::new(2, vec![-1.0, 2.0, 0.25, 1.0 / 255.0]).unwrap();
        assert_eq!(body(&img), vec![0, 255, 64, 1]);
        assert!(encode_pgm(&img).starts_with(b"P5\n2 2\n255\n"));
    }

    #[test]
    fn manifest_text_round_trip() {
        let m = TrainingManifest {
            geometry: ParallelGeometry::equispaced(8, 16).unwrap(),
            mode: TrainingMode::Linear,
            records: vec![ManifestRecord {
                pair_id: "pair_0000".into(),
                truth: "a.stv".into(),
                input: "b.stv".into(),
                sinogram: "c.sts".into(),
            }],
        };
        let text = m.to_text();
        assert!(text.starts_with(
            "geometry=views=8;det=16;size=16;spacing=1;px=1;angles=equispaced\tmode=linear\n"
        ));
        assert_eq!(TrainingManifest::parse(&text).unwrap(), m);
        assert!(TrainingManifest::parse("geometry=views=1;det=1;size=1;spacing=1;px=1;angles=equispaced\n").is_err());
        assert!(TrainingManifest::parse("mode=linear\n").is_err());
    }

    #[test]
    fn export_silhouette_and_linear() {
        let dir = tempfile::tempdir().unwrap();
        let g = ParallelGeometry::equispaced(8, 16).unwrap();
        for mode in [TrainingMode::Silhouette, TrainingMode::Linear] {
            let out = dir.path().join(mode.to_string());
            let opts = ExportOptions {
                source: PhantomSource::Blob,
                mode,
                count: 3,
                seed: 11,
                force: false,
            };
            let m = export_training_pairs(&g, &opts, &out).unwrap();
            assert_eq!(m.records.len(), 3);
            let read = TrainingManifest::read(out.join(MANIFEST_NAME)).unwrap();
            assert_eq!(read, m);
            read.validate(&out).unwrap();

            let r = &m.records[1];
            let truth = VolumeFile::read(out.join(&r.truth)).unwrap().binary_slices().unwrap();
            let sino = SinogramFile::read(out.join(&r.sinogram)).unwrap();
            match mode {
                TrainingMode::Silhouette => {
                    assert!(sino.payload.is_binary());
                    let y = crate::silhouette::silhouette_forward(&truth[0], &g).unwrap();
                    assert_eq!(sino.to_binary().unwrap(), y);
                }
                TrainingMode::Linear => {
                    assert!(!sino.payload.is_binary());
                    let y = crate::xray::forward_project(&truth[0].to_image(), &g).unwrap();
                    let want: Vec<f32> = y.data().iter().map(|&v| v as f32).collect();
                    assert_eq!(sino.payload, Payload::Float(want));
                }
            }

            assert!(matches!(
                export_training_pairs(&g, &opts, &out),
                Err(Error::ManifestExists(_))
            ));
            let forced = ExportOptions { force: true, ..opts };
            assert_eq!(export_training_pairs(&g, &forced, &out).unwrap(), m);
        }
    }
}
