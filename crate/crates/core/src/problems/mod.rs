//! Problem generation: grids, random fields, discrete operators and datasets.

mod dataset;
mod direct;
mod grf;
mod grid;
mod system;
mod transfer;

pub use dataset::{
    generate_instances, load_dataset, save_dataset, DatasetSpec, Instance, Manifest, ManifestEntry,
    DATASET_FORMAT_VERSION,
};
pub use direct::direct_solve;
pub use grf::{make_coefficient, sample_grf, GrfConfig, GrfSampler};
pub use grid::{FieldSample, Grid1D};
pub use system::{assemble, assemble_diffusion, assemble_helmholtz, LinearSystem, ProblemKind};
pub use transfer::{interpolate, restrict, sample_piecewise_linear, TransferMatrix};

/// SplitMix64 finaliser; derives independent per-instance seeds from a master seed.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        ^ stream
            .wrapping_mul(0x9E37_79B9_7F4A_7C15)
            .wrapping_add(0x6A09_E667_F3BC_C909);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
