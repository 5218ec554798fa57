//! Training checkpoints.
//!
//! A `PMRCKPT1` text header with the training configuration and optimizer
//! scalars, then one named `PMRT1` block per parameter tensor followed by
//! the Adam moment vectors `adam.m` and `adam.v`.
//!
//! The only random state during training is the per-epoch shuffle, which is
//! a pure function of `seed` and the epoch index, so `seed` and
//! `epochs_done` together pin the generator.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::config::ConfigFile;
use super::tensor_file::{read_line, read_tensor, write_tensor, Tensor};
use crate::error::{Error, Result};
use crate::network::{Architecture, InitialGuess, NetworkParams, ShrinkMode};
use crate::training::{AdamState, LossConfig, TrainConfig, TrainState};

pub const CHECKPOINT_MAGIC: &str = "PMRCKPT1";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Config keys that map onto [`TrainConfig`] and [`LossConfig`].
pub const TRAIN_KEYS: &[&str] = &[
    "epochs",
    "batch_size",
    "lr",
    "seed",
    "phases",
    "rho0",
    "alpha0",
    "coils",
    "depth",
    "combiner_filters",
    "combiner_kernel",
    "encoder_filters",
    "encoder_kernel",
    "sparse_channels",
    "shrink",
    "init",
    "threads",
    "gamma",
    "epsilon_sos",
];

/// Key/value pairs for every entry of [`TRAIN_KEYS`], floats in
/// shortest round-trip form.
pub fn train_entries(cfg: &TrainConfig, loss: &LossConfig) -> Vec<(&'static str, String)> {
    let a = &cfg.arch;
    vec![
        ("epochs", cfg.epochs.to_string()),
        ("batch_size", cfg.batch_size.to_string()),
        ("lr", cfg.lr.to_string()),
        ("seed", cfg.seed.to_string()),
        ("phases", cfg.phases.to_string()),
        ("rho0", cfg.rho0.to_string()),
        ("alpha0", cfg.alpha0.to_string()),
        ("coils", a.coils.to_string()),
        ("depth", a.depth.to_string()),
        ("combiner_filters", a.combiner_filters.to_string()),
        ("combiner_kernel", a.combiner_kernel.to_string()),
        ("encoder_filters", a.encoder_filters.to_string()),
        ("encoder_kernel", a.encoder_kernel.to_string()),
        ("sparse_channels", a.sparse_channels.to_string()),
        ("shrink", cfg.shrink.name().to_string()),
        ("init", cfg.init.name().to_string()),
        ("threads", cfg.threads.to_string()),
        ("gamma", loss.gamma.to_string()),
        ("epsilon_sos", loss.epsilon_sos.to_string()),
    ]
}

/// Overrides fields of `cfg` and `loss` from the keys present in `file`.
///
/// Changing `coils` without other architecture keys keeps the current widths.
pub fn apply_train_keys(file: &ConfigFile, cfg: &mut TrainConfig, loss: &mut LossConfig) -> Result<()> {
    file.read_into("epochs", &mut cfg.epochs)?;
    file.read_into("batch_size", &mut cfg.batch_size)?;
    file.read_into("lr", &mut cfg.lr)?;
    file.read_into("seed", &mut cfg.seed)?;
    file.read_into("phases", &mut cfg.phases)?;
    file.read_into("rho0", &mut cfg.rho0)?;
    file.read_into("alpha0", &mut cfg.alpha0)?;
    let a: &mut Architecture = &mut cfg.arch;
    file.read_into("coils", &mut a.coils)?;
    file.read_into("depth", &mut a.depth)?;
    file.read_into("combiner_filters", &mut a.combiner_filters)?;
    file.read_into("combiner_kernel", &mut a.combiner_kernel)?;
    file.read_into("encoder_filters", &mut a.encoder_filters)?;
    file.read_into("encoder_kernel", &mut a.encoder_kernel)?;
    file.read_into("sparse_channels", &mut a.sparse_channels)?;
    if let Some(s) = file.get("shrink") {
        cfg.shrink = ShrinkMode::parse(s).map_err(|e| Error::format(file.source(), e.to_string()))?;
    }
    if let Some(s) = file.get("init") {
        cfg.init = InitialGuess::parse(s).map_err(|e| Error::format(file.source(), e.to_string()))?;
    }
    file.read_into("threads", &mut cfg.threads)?;
    file.read_into("gamma", &mut loss.gamma)?;
    file.read_into("epsilon_sos", &mut loss.epsilon_sos)?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub loss: LossConfig,
    pub state: TrainState,
}

impl Checkpoint {
    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        let adam = &self.state.adam;
        writeln!(w, "{CHECKPOINT_MAGIC}")?;
        writeln!(w, "version={CHECKPOINT_VERSION}")?;
        for (k, v) in train_entries(&self.config, &self.loss) {
            writeln!(w, "{k}={v}")?;
        }
        writeln!(w, "epochs_done={}", self.state.epochs_done)?;
        writeln!(w, "adam.lr={}", adam.lr)?;
        writeln!(w, "adam.beta1={}", adam.beta1)?;
        writeln!(w, "adam.beta2={}", adam.beta2)?;
        writeln!(w, "adam.eps={}", adam.eps)?;
        writeln!(w, "adam.step={}", adam.step)?;
        writeln!(w, "rng=chacha8 seed={} stream=epoch+1", self.config.seed)?;
        writeln!(w, "end")?;
        for t in self.state.params.tensors() {
            writeln!(w, "block {}", t.name)?;
            write_tensor(w, &Tensor::from_f64(vec![t.values.len()], t.values.to_vec()).expect("1-D"))?;
        }
        for (name, v) in [("adam.m", &adam.m), ("adam.v", &adam.v)] {
            writeln!(w, "block {name}")?;
            write_tensor(w, &Tensor::from_f64(vec![v.len()], v.clone()).expect("1-D"))?;
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl BufRead, source: &Path) -> Result<Self> {
        let bad = |m: String| Error::format(source, m);
        let io = |e: std::io::Error| Error::io(source, e);
        let magic = read_line(r).map_err(io)?.ok_or_else(|| bad("empty checkpoint".into()))?;
        if magic != CHECKPOINT_MAGIC {
            return Err(bad(format!("bad magic {magic:?}, expected {CHECKPOINT_MAGIC}")));
        }
        let mut header = String::new();
        loop {
            let line = read_line(r).map_err(io)?.ok_or_else(|| bad("header not terminated by 'end'".into()))?;
            if line == "end" {
                break;
            }
            header.push_str(&line);
            header.push('\n');
        }
        let kv = ConfigFile::parse(&header, source)?;
        let req = |k: &str| kv.get(k).ok_or_else(|| bad(format!("missing header key {k}")));
        let version: u32 = req("version")?.parse().map_err(|_| bad("bad version".into()))?;
        if version != CHECKPOINT_VERSION {
            return Err(bad(format!("unsupported checkpoint version {version}")));
        }
        for k in TRAIN_KEYS {
            req(k)?;
        }
        let coils: usize = kv.value("coils")?.expect("checked");
        let mut config = TrainConfig::new(coils);
        let mut loss = LossConfig::default();
        apply_train_keys(&kv, &mut config, &mut loss)?;
        let parse_f = |k: &str| -> Result<f64> { req(k)?.parse().map_err(|_| bad(format!("bad {k}"))) };
        let epochs_done: usize = req("epochs_done")?.parse().map_err(|_| bad("bad epochs_done".into()))?;
        let step: u64 = req("adam.step")?.parse().map_err(|_| bad("bad adam.step".into()))?;

        let mut params = NetworkParams::zeros(config.arch, config.phases)?;
        params.shrink = config.shrink;
        params.init = config.init;
        let mut read_block = |expected: &str, len: usize| -> Result<Vec<f64>> {
            let line = read_line(r).map_err(io)?.ok_or_else(|| bad(format!("missing block {expected}")))?;
            if line != format!("block {expected}") {
                return Err(bad(format!("expected block {expected}, found {line:?}")));
            }
            let t = read_tensor(r, source)?;
            let values = t.to_f64().map_err(|e| bad(e.to_string()))?;
            if values.len() != len {
                return Err(bad(format!("block {expected}: {} values, expected {len}", values.len())));
            }
            Ok(values)
        };
        for t in params.tensors_mut() {
            let values = read_block(&t.name, t.values.len())?;
            t.values.copy_from_slice(&values);
        }
        let n = params.num_values();
        let m = read_block("adam.m", n)?;
        let v = read_block("adam.v", n)?;
        let adam = AdamState {
            lr: parse_f("adam.lr")?,
            beta1: parse_f("adam.beta1")?,
            beta2: parse_f("adam.beta2")?,
            eps: parse_f("adam.eps")?,
            step,
            m,
            v,
        };
        Ok(Self {
            config,
            loss,
            state: TrainState {
                params,
                adam,
                epochs_done,
            },
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_from(&mut BufReader::new(file), path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Checkpoint {
        let mut config = TrainConfig::new(2);
        config.arch = Architecture {
            coils: 2,
            depth: 2,
            combiner_filters: 3,
            combiner_kernel: 3,
            encoder_filters: 2,
            encoder_kernel: 3,
            sparse_channels: 1,
        };
        config.phases = 2;
        config.lr = 3.3e-4;
        config.seed = 99;
        let mut state = TrainState::new(&config).unwrap();
        state.epochs_done = 4;
        state.adam.step = 17;
        state.adam.m.iter_mut().enumerate().for_each(|(i, m)| *m = (i as f64).sin() * 1e-3);
        state.adam.v.iter_mut().enumerate().for_each(|(i, v)| *v = (i as f64 * 0.1).cos().powi(2) * 1e-7);
        Checkpoint {
            config,
            loss: LossConfig { gamma: 7.5, epsilon_sos: 1e-12 },
            state,
        }
    }

    #[test]
    fn roundtrip_is_bitwise() {
        let c = small();
        let mut buf = Vec::new();
        c.write_to(&mut buf).unwrap();
        let back = Checkpoint::read_from(&mut buf.as_slice(), Path::new("mem")).unwrap();
        assert_eq!(back, c);
        let bits = |p: &NetworkParams| p.to_flat().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back.state.params), bits(&c.state.params));
    }

    #[test]
    fn truncated_checkpoint_fails() {
        let mut buf = Vec::new();
        small().write_to(&mut buf).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(matches!(
            Checkpoint::read_from(&mut buf.as_slice(), Path::new("ck")),
            Err(Error::Format { .. })
        ));
    }
}
