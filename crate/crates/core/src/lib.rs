//! Unsupervised hyperspectral image segmentation.
//!
//! The pipeline pre-clusters pixel spectra with flat-kernel mean-shift,
//! builds superpixels with an augmented hyperspectral SLIC that also looks at
//! each pixel's cluster spectrum, and finally clusters per-pixel
//! `<spectrum, superpixel center>` features with mean-shift followed by
//! per-superpixel majority voting and small-region cleanup.
//!
//! Evaluation (undersegmentation error, NMI, ARI, unsupervised F1) and
//! noise injection used for robustness experiments live alongside.

pub mod cube;
pub mod error;
pub mod meanshift;
pub mod metrics;
pub mod noise;
pub mod npy;
pub mod pca;
pub mod regions;
pub mod regionseg;
pub mod superpixel;
pub mod synthetic;

pub use cube::{normalize, HyperCube, LabelMap};
pub use error::{Error, Result};
pub use meanshift::{estimate_bandwidth, mean_shift, ClusterModel, Points};
pub use pca::{apply_pca, fit_pca, PcaModel};
pub use superpixel::{build_augmented_image, slic, superpixel_features, SlicParams, SuperpixelSet};
pub use metrics::{ari, nmi, undersegmentation_error, unsupervised_f1, ContingencyTable, MetricsReport};
pub use noise::{add_gaussian, add_impulsive, add_poisson, NoiseSpec, PoissonMode};
pub use regionseg::{auto_k, assemble_features, segment, segment_oracle, SegmentationConfig, Segmentation};
