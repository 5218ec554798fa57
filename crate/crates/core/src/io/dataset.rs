//! Dataset directories written by `pmri simulate`.
//!
//! ```text
//! manifest.txt                 key = value summary
//! mask.pmrt                    f64 [h, w] of 0/1
//! sensitivities.pmrt           c128 [coils, h, w]
//! sample_0000.kspace.pmrt      c128 [coils, h, w], zero off the mask
//! sample_0000.truth.pmrt       c128 [coils, h, w]
//! ```

use std::path::{Path, PathBuf};

use super::config::ConfigFile;
use super::tensor_file::{load_complex, load_mask};
use crate::error::{Error, Result};
use crate::mri::{KSpaceData, SamplingMask, TrainingSample};

pub const MANIFEST: &str = "manifest.txt";
pub const MASK_FILE: &str = "mask.pmrt";
pub const SENSITIVITY_FILE: &str = "sensitivities.pmrt";
pub const KSPACE_SUFFIX: &str = ".kspace.pmrt";
pub const TRUTH_SUFFIX: &str = ".truth.pmrt";
pub const RECON_SUFFIX: &str = ".recon.pmrt";
pub const SINGLE_SUFFIX: &str = ".single.pmrt";

pub fn sample_name(index: usize) -> String {
    format!("sample_{index:04}")
}

/// Sorted `(stem, path)` pairs of files in `dir` ending in `suffix`.
pub fn files_with_suffix(dir: &Path, suffix: &str) -> Result<Vec<(String, PathBuf)>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(stem) = name.strip_suffix(suffix) {
            out.push((stem.to_string(), entry.path()));
        }
    }
    out.sort();
    Ok(out)
}

fn manifest_count(dir: &Path) -> Result<usize> {
    let manifest = ConfigFile::load(dir.join(MANIFEST))?;
    manifest
        .value::<usize>("samples")?
        .ok_or_else(|| Error::format(dir.join(MANIFEST), "missing key samples"))
}

/// Loads every sample listed by the manifest, with the shared mask.
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<Vec<TrainingSample>> {
    let dir = dir.as_ref();
    let count = manifest_count(dir)?;
    let mask = load_mask(dir.join(MASK_FILE))?;
    let noise: f64 = ConfigFile::load(dir.join(MANIFEST))?.value("noise_sigma")?.unwrap_or(0.0);
    (0..count)
        .map(|i| {
            let name = sample_name(i);
            let kpath = dir.join(format!("{name}{KSPACE_SUFFIX}"));
            let tpath = dir.join(format!("{name}{TRUTH_SUFFIX}"));
            let k = load_complex(&kpath)?;
            let truth = load_complex(&tpath)?;
            let kspace = KSpaceData::new(k, mask.clone(), noise).map_err(|e| Error::format(&kpath, e.to_string()))?;
            TrainingSample::new(kspace, truth).map_err(|e| Error::format(&tpath, e.to_string()))
        })
        .collect()
}

/// Loads one k-space file with an explicit mask.
pub fn load_kspace(path: impl AsRef<Path>, mask: &SamplingMask) -> Result<KSpaceData> {
    let path = path.as_ref();
    let k = load_complex(path)?;
    KSpaceData::new(k, mask.clone(), 0.0).map_err(|e| Error::format(path, e.to_string()))
}
