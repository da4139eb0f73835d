//! Dataset loading, synthetic generation and label corruption.

mod cache;
mod cifar;
mod corrupt;
mod dataset;
mod mnist;
mod synth;

pub use cache::{
    decode_dataset, encode_dataset, load_dataset, save_dataset, CacheHeader, CacheMeta,
};
pub use cifar::{cifar10_from_bytes, load_cifar10};
pub use corrupt::{apply_plan, corrupt_labels, corruption_count, CorruptionPlan};
pub use dataset::LabeledDataset;
pub use mnist::{encode_idx, load_mnist, mnist_from_bytes, parse_idx_images, parse_idx_labels};
pub use synth::synth_blobs;
