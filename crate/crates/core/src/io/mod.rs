//! File formats: tensors, checkpoints, flat config files and PNG previews.

pub mod checkpoint;
pub mod config;
pub mod png_export;
pub mod tensor_file;

pub use checkpoint::{apply_train_keys, train_entries, Checkpoint, TRAIN_KEYS};
pub use config::ConfigFile;
pub use png_export::{read_png, to_gray8, write_png, PngScaling};
pub use tensor_file::{
    load_complex, load_mask, load_tensor, read_tensor, save_complex, save_mask, save_tensor,
    write_tensor, DType, Tensor, TensorValues,
};
pub mod dataset;
pub use dataset::{load_dataset, load_kspace, sample_name};
