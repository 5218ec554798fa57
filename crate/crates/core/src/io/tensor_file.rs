//! `PMRT1` tensor files: a short text header followed by a raw
//! little-endian payload.
//!
//! ```text
//! PMRT1
//! dtype=c128
//! shape=4,64,64
//! order=little
//! end
//! <payload>
//! ```
//!
//! Complex values are stored as interleaved `(re, im)` pairs. Multi-coil
//! images use the shape `channels,height,width` (row-major, so the payload
//! order matches the in-memory layout of [`ComplexTensor`]).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rustfft::num_complex::Complex32;

use crate::error::{Error, Result};
use crate::mri::SamplingMask;
use crate::numerics::{Complex64, ComplexTensor, RealImage};

pub const MAGIC: &str = "PMRT1";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DType {
    C64,
    C128,
    F32,
    F64,
}

impl DType {
    pub fn name(self) -> &'static str {
        match self {
            DType::C64 => "c64",
            DType::C128 => "c128",
            DType::F32 => "f32",
            DType::F64 => "f64",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "c64" => Some(DType::C64),
            "c128" => Some(DType::C128),
            "f32" => Some(DType::F32),
            "f64" => Some(DType::F64),
            _ => None,
        }
    }

    /// Bytes per element.
    pub fn size(self) -> usize {
        match self {
            DType::C64 => 8,
            DType::C128 => 16,
            DType::F32 => 4,
            DType::F64 => 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum TensorValues {
    C64(Vec<Complex32>),
    C128(Vec<Complex64>),
    F32(Vec<f32>),
    F64(Vec<f64>),
}

impl TensorValues {
    pub fn dtype(&self) -> DType {
        match self {
            TensorValues::C64(_) => DType::C64,
            TensorValues::C128(_) => DType::C128,
            TensorValues::F32(_) => DType::F32,
            TensorValues::F64(_) => DType::F64,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            TensorValues::C64(v) => v.len(),
            TensorValues::C128(v) => v.len(),
            TensorValues::F32(v) => v.len(),
            TensorValues::F64(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    values: TensorValues,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, values: TensorValues) -> Result<Self> {
        let count: usize = shape.iter().product();
        if count != values.len() {
            return Err(Error::shape(format!(
                "tensor shape {shape:?} holds {count} values, got {}",
                values.len()
            )));
        }
        Ok(Self { shape, values })
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn values(&self) -> &TensorValues {
        &self.values
    }

    pub fn dtype(&self) -> DType {
        self.values.dtype()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn from_f64(shape: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        Self::new(shape, TensorValues::F64(values))
    }

    pub fn from_complex(x: &ComplexTensor) -> Self {
        Self {
            shape: vec![x.channels(), x.height(), x.width()],
            values: TensorValues::C128(x.data().to_vec()),
        }
    }

    pub fn from_real_image(x: &RealImage) -> Self {
        Self {
            shape: vec![x.height(), x.width()],
            values: TensorValues::F64(x.data().to_vec()),
        }
    }

    pub fn from_mask(mask: &SamplingMask) -> Self {
        Self {
            shape: vec![mask.height(), mask.width()],
            values: TensorValues::F64(mask.to_values()),
        }
    }

    /// Values as `f64`, widening `f32` exactly.
    pub fn to_f64(&self) -> Result<Vec<f64>> {
        match &self.values {
            TensorValues::F64(v) => Ok(v.clone()),
            TensorValues::F32(v) => Ok(v.iter().map(|&x| x as f64).collect()),
            other => Err(Error::param(format!("expected a real tensor, got {}", other.dtype().name()))),
        }
    }

    /// Values as `Complex64`, widening `c64` exactly.
    pub fn to_complex_values(&self) -> Result<Vec<Complex64>> {
        match &self.values {
            TensorValues::C128(v) => Ok(v.clone()),
            TensorValues::C64(v) => Ok(v.iter().map(|z| Complex64::new(z.re as f64, z.im as f64)).collect()),
            other => Err(Error::param(format!("expected a complex tensor, got {}", other.dtype().name()))),
        }
    }

    /// Interprets `[c, h, w]` or `[h, w]` as a complex image stack.
    pub fn to_complex_tensor(&self) -> Result<ComplexTensor> {
        let (c, h, w) = match self.shape[..] {
            [c, h, w] => (c, h, w),
            [h, w] => (1, h, w),
            _ => return Err(Error::shape(format!("expected [c,h,w] or [h,w], got {:?}", self.shape))),
        };
        ComplexTensor::from_vec(h, w, c, self.to_complex_values()?)
    }

    pub fn to_real_image(&self) -> Result<RealImage> {
        match self.shape[..] {
            [h, w] => RealImage::from_vec(h, w, self.to_f64()?),
            _ => Err(Error::shape(format!("expected [h,w], got {:?}", self.shape))),
        }
    }

    pub fn to_mask(&self) -> Result<SamplingMask> {
        match self.shape[..] {
            [h, w] => SamplingMask::from_values(h, w, &self.to_f64()?),
            _ => Err(Error::shape(format!("expected [h,w] mask, got {:?}", self.shape))),
        }
    }
}

/// Serializes `t` into `w`.
pub fn write_tensor(w: &mut impl Write, t: &Tensor) -> std::io::Result<()> {
    let shape: Vec<String> = t.shape.iter().map(|d| d.to_string()).collect();
    write!(
        w,
        "{MAGIC}\ndtype={}\nshape={}\norder=little\nend\n",
        t.dtype().name(),
        shape.join(",")
    )?;
    let mut buf = Vec::with_capacity(t.len() * t.dtype().size());
    match &t.values {
        TensorValues::C64(v) => v.iter().for_each(|z| {
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }),
        TensorValues::C128(v) => v.iter().for_each(|z| {
            buf.extend_from_slice(&z.re.to_le_bytes());
            buf.extend_from_slice(&z.im.to_le_bytes());
        }),
        TensorValues::F32(v) => v.iter().for_each(|x| buf.extend_from_slice(&x.to_le_bytes())),
        TensorValues::F64(v) => v.iter().for_each(|x| buf.extend_from_slice(&x.to_le_bytes())),
    }
    w.write_all(&buf)
}

/// Reads one header line without its newline terminator.
pub(crate) fn read_line(r: &mut impl BufRead) -> std::io::Result<Option<String>> {
    let mut bytes = Vec::new();
    let n = r.read_until(b'\n', &mut bytes)?;
    if n == 0 {
        return Ok(None);
    }
    if bytes.last() == Some(&b'\n') {
        bytes.pop();
    }
    Ok(Some(String::from_utf8_lossy(&bytes).into_owned()))
}

/// Parses one tensor from `r`; `source` names the input in error messages.
pub fn read_tensor(r: &mut impl BufRead, source: &Path) -> Result<Tensor> {
    let bad = |m: String| Error::format(source, m);
    let io = |e: std::io::Error| Error::io(source, e);
    let magic = read_line(r).map_err(io)?.ok_or_else(|| bad("empty file".into()))?;
    if magic != MAGIC {
        return Err(bad(format!("bad magic {magic:?}, expected {MAGIC}")));
    }
    let (mut dtype, mut shape, mut order) = (None, None, None);
    loop {
        let line = read_line(r).map_err(io)?.ok_or_else(|| bad("header not terminated by 'end'".into()))?;
        if line == "end" {
            break;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| bad(format!("malformed header line {line:?}")))?;
        match key {
            "dtype" => dtype = Some(DType::parse(value).ok_or_else(|| bad(format!("unknown dtype {value:?}")))?),
            "shape" => {
                let dims = if value.is_empty() {
                    Vec::new()
                } else {
                    value
                        .split(',')
                        .map(|d| d.trim().parse::<usize>())
                        .collect::<std::result::Result<Vec<_>, _>>()
                        .map_err(|_| bad(format!("bad shape {value:?}")))?
                };
                shape = Some(dims);
            }
            "order" => order = Some(value.to_string()),
            other => return Err(bad(format!("unknown header key {other:?}"))),
        }
    }
    let dtype = dtype.ok_or_else(|| bad("missing dtype".into()))?;
    let shape = shape.ok_or_else(|| bad("missing shape".into()))?;
    if order.as_deref() != Some("little") {
        return Err(bad(format!("unsupported byte order {order:?}")));
    }
    let count = shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| bad("shape overflows".into()))?;
    let mut payload = vec![0u8; count * dtype.size()];
    r.read_exact(&mut payload)
        .map_err(|e| bad(format!("payload truncated, expected {} bytes: {e}", payload.len())))?;
    let f32s = |c: &[u8]| f32::from_le_bytes(c.try_into().expect("4 bytes"));
    let f64s = |c: &[u8]| f64::from_le_bytes(c.try_into().expect("8 bytes"));
    let values = match dtype {
        DType::C64 => TensorValues::C64(payload.chunks_exact(8).map(|c| Complex32::new(f32s(&c[..4]), f32s(&c[4..]))).collect()),
        DType::C128 => {
            TensorValues::C128(payload.chunks_exact(16).map(|c| Complex64::new(f64s(&c[..8]), f64s(&c[8..]))).collect())
        }
        DType::F32 => TensorValues::F32(payload.chunks_exact(4).map(f32s).collect()),
        DType::F64 => TensorValues::F64(payload.chunks_exact(8).map(f64s).collect()),
    };
    Tensor::new(shape, values).map_err(|e| bad(e.to_string()))
}

pub fn save_tensor(path: impl AsRef<Path>, t: &Tensor) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_tensor(&mut w, t).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

/// Loads a tensor and rejects trailing bytes after the payload.
pub fn load_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    let t = read_tensor(&mut r, path)?;
    let mut rest = [0u8; 1];
    if r.read(&mut rest).map_err(|e| Error::io(path, e))? != 0 {
        return Err(Error::format(path, "trailing bytes after payload"));
    }
    Ok(t)
}

pub fn save_complex(path: impl AsRef<Path>, x: &ComplexTensor) -> Result<()> {
    save_tensor(path, &Tensor::from_complex(x))
}

pub fn load_complex(path: impl AsRef<Path>) -> Result<ComplexTensor> {
    let path = path.as_ref();
    load_tensor(path)?.to_complex_tensor().map_err(|e| Error::format(path, e.to_string()))
}

pub fn save_mask(path: impl AsRef<Path>, mask: &SamplingMask) -> Result<()> {
    save_tensor(path, &Tensor::from_mask(mask))
}

pub fn load_mask(path: impl AsRef<Path>) -> Result<SamplingMask> {
    let path = path.as_ref();
    load_tensor(path)?.to_mask().map_err(|e| Error::format(path, e.to_string()))
}
