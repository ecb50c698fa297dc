//! Silhouette tomography: recovering the support of an object from binarized
//! parallel-beam X-ray projections.
//!
//! - [`geometry`]: acquisition geometry and ray enumeration.
//! - [`xray`]: exact-length ray tracing, the projector `H` and its adjoint.
//! - [`silhouette`]: thresholding, the silhouette operator and the maximal
//!   reconstruction.
//! - [`oracle`]: brute-force enumeration on tiny grids.
//! - [`phantom`]: seeded binary test objects and volumes.
//! - [`metrics`]: MSE, PSNR, SSIM and test-set averaging.
//! - [`dataio`]: binary file formats and training-pair export.

pub mod dataio;
pub mod error;
pub mod geometry;
pub mod metrics;
pub mod oracle;
pub mod phantom;
pub mod silhouette;
pub mod xray;

pub use error::{Error, Result};
pub use geometry::{ParallelGeometry, Ray};
pub use silhouette::{BinaryImage, BinarySinogram, SilhouetteOperator};
pub use xray::{Image, Sinogram, XrayTransform};
