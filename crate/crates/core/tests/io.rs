//! File formats round-trip and reject damage.

mod common;

use common::small_arch;
use pmri_core::io::{
    load_complex, load_mask, load_tensor, read_png, save_complex, save_mask, save_tensor, write_png, Checkpoint,
    ConfigFile, Tensor, TensorValues,
};
use pmri_core::mri::make_cartesian_mask;
use pmri_core::numerics::{Complex64, ComplexTensor, RealImage};
use pmri_core::training::{LossConfig, TrainConfig, TrainState};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn complex_and_mask_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let data = (0..5 * 7 * 3).map(|_| Complex64::new(rng.random(), -rng.random::<f64>())).collect();
    let x = ComplexTensor::from_vec(5, 7, 3, data).unwrap();
    save_complex(dir.path().join("x.pmrt"), &x).unwrap();
    assert_eq!(load_complex(dir.path().join("x.pmrt")).unwrap(), x);

    let mask = make_cartesian_mask(6, 20, 0.4, 4).unwrap();
    save_mask(dir.path().join("m.pmrt"), &mask).unwrap();
    assert_eq!(load_mask(dir.path().join("m.pmrt")).unwrap(), mask);
}

#[test]
fn damaged_tensor_files_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.pmrt");
    save_tensor(&path, &Tensor::from_f64(vec![2, 3], vec![1.0; 6]).unwrap()).unwrap();
    let bytes = std::fs::read(&path).unwrap();

    std::fs::write(&path, &bytes[..bytes.len() - 1]).unwrap();
    assert!(load_tensor(&path).is_err());
    let mut extra = bytes.clone();
    extra.push(0);
    std::fs::write(&path, &extra).unwrap();
    assert!(load_tensor(&path).is_err());
    let mut bad_magic = bytes.clone();
    bad_magic[0] = b'X';
    std::fs::write(&path, &bad_magic).unwrap();
    assert!(load_tensor(&path).is_err());
    assert!(load_tensor(dir.path().join("missing.pmrt")).is_err());
    assert!(Tensor::from_f64(vec![2, 2], vec![0.0; 3]).is_err());
}

#[test]
fn png_preview_records_scaling() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.png");
    let img = RealImage::from_vec(3, 4, (0..12).map(|v| v as f64 * 0.5 - 1.0).collect()).unwrap();
    let scaling = write_png(&path, &img).unwrap();
    let (bytes, h, w, read) = read_png(&path).unwrap();
    assert_eq!((h, w), (3, 4));
    assert_eq!(read, scaling);
    assert_eq!((read.min, read.max), (-1.0, 4.5));
    assert_eq!(bytes[0], 0);
    assert_eq!(bytes[11], 255);
}

#[test]
fn config_parsing() {
    let file = ConfigFile::parse("# comment\nepochs = 5\n  lr=0.001  \n\ngamma = 1 # trailing\n", "cfg").unwrap();
    assert_eq!(file.value::<usize>("epochs").unwrap(), Some(5));
    assert_eq!(file.value::<f64>("lr").unwrap(), Some(0.001));
    assert_eq!(file.value::<f64>("gamma").unwrap(), Some(1.0));
    assert_eq!(file.value::<f64>("absent").unwrap(), None);
    assert!(file.value::<usize>("lr").is_err());
    assert!(file.check_known(&["epochs", "lr"]).is_err());
    assert!(ConfigFile::parse("a = 1\na = 2\n", "cfg").is_err());
    assert!(ConfigFile::parse("no equals sign\n", "cfg").is_err());
    let again = ConfigFile::parse(&file.render(), "cfg").unwrap();
    assert_eq!(again.get("lr"), Some("0.001"));
}

#[test]
fn checkpoint_round_trip_is_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = TrainConfig::new(2);
    cfg.arch = small_arch(2);
    cfg.phases = 2;
    cfg.alpha0 = 0.003;
    let mut state = TrainState::new(&cfg).unwrap();
    state.epochs_done = 7;
    state.adam.step = 21;
    state.adam.m.iter_mut().enumerate().for_each(|(i, v)| *v = (i as f64).sin() * 1e-7);
    state.adam.v.iter_mut().enumerate().for_each(|(i, v)| *v = (i as f64).cos().powi(2) / 3.0);
    let ck = Checkpoint {
        config: cfg,
        loss: LossConfig { gamma: 0.7, epsilon_sos: 1e-10 },
        state,
    };
    let path = dir.path().join("c.pmck");
    ck.save(&path).unwrap();
    let back = Checkpoint::load(&path).unwrap();
    assert_eq!(back, ck);
    let mut again = Vec::new();
    back.write_to(&mut again).unwrap();
    assert_eq!(again, std::fs::read(&path).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn every_dtype_round_trips(seed in any::<u64>(), dims in proptest::collection::vec(1usize..5, 1..4), kind in 0u8..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n: usize = dims.iter().product();
        let values = match kind {
            0 => TensorValues::F64((0..n).map(|_| rng.random::<f64>() * 1e3 - 5e2).collect()),
            1 => TensorValues::F32((0..n).map(|_| rng.random::<f32>()).collect()),
            2 => TensorValues::C128((0..n).map(|_| Complex64::new(rng.random(), rng.random())).collect()),
            _ => TensorValues::C64((0..n).map(|_| pmri_core::numerics::Complex32::new(rng.random(), rng.random())).collect()),
        };
        let t = Tensor::new(dims, values).unwrap();
        let mut buf = Vec::new();
        pmri_core::io::write_tensor(&mut buf, &t).unwrap();
        let back = pmri_core::io::read_tensor(&mut buf.as_slice(), std::path::Path::new("mem")).unwrap();
        prop_assert_eq!(back, t);
    }
}
