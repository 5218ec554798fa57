//! 8-bit grayscale PNG export of magnitude images.
//!
//! Values are min-max scaled to `0..=255`; the range is kept in `tEXt`
//! chunks `pmri.min` and `pmri.max`.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::RealImage;

pub const MIN_KEY: &str = "pmri.min";
pub const MAX_KEY: &str = "pmri.max";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PngScaling {
    pub min: f64,
    pub max: f64,
}

/// Maps `x` to 8-bit gray levels; a constant image becomes all zeros.
pub fn to_gray8(x: &RealImage) -> (Vec<u8>, PngScaling) {
    let (min, max) = (x.min(), x.max());
    let span = max - min;
    let bytes = x
        .data()
        .iter()
        .map(|&v| {
            if span > 0.0 {
                ((v - min) / span * 255.0).round().clamp(0.0, 255.0) as u8
            } else {
                0
            }
        })
        .collect();
    (bytes, PngScaling { min, max })
}

pub fn write_png(path: impl AsRef<Path>, x: &RealImage) -> Result<PngScaling> {
    let path = path.as_ref();
    let (bytes, scaling) = to_gray8(x);
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), x.width() as u32, x.height() as u32);
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(png::BitDepth::Eight);
    let fmt = |e: png::EncodingError| Error::format(path, e.to_string());
    enc.add_text_chunk(MIN_KEY.into(), scaling.min.to_string()).map_err(fmt)?;
    enc.add_text_chunk(MAX_KEY.into(), scaling.max.to_string()).map_err(fmt)?;
    let mut writer = enc.write_header().map_err(fmt)?;
    writer.write_image_data(&bytes).map_err(fmt)?;
    writer.finish().map_err(fmt)?;
    Ok(scaling)
}

/// Reads back the gray levels, the image size and the recorded scaling.
pub fn read_png(path: impl AsRef<Path>) -> Result<(Vec<u8>, usize, usize, PngScaling)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let fmt = |e: png::DecodingError| Error::format(path, e.to_string());
    let mut reader = png::Decoder::new(BufReader::new(file)).read_info().map_err(fmt)?;
    let mut buf = vec![0; reader.output_buffer_size().unwrap_or(0)];
    let frame = reader.next_frame(&mut buf).map_err(fmt)?;
    buf.truncate(frame.buffer_size());
    let text = |key: &str| -> Result<f64> {
        reader
            .info()
            .uncompressed_latin1_text
            .iter()
            .find(|c| c.keyword == key)
            .and_then(|c| c.text.parse().ok())
            .ok_or_else(|| Error::format(path, format!("missing or bad {key} text chunk")))
    };
    let scaling = PngScaling {
        min: text(MIN_KEY)?,
        max: text(MAX_KEY)?,
    };
    Ok((buf, frame.height as usize, frame.width as usize, scaling))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaling_endpoints() {
        let x = RealImage::from_vec(1, 3, vec![0.5, 1.0, 1.5]).unwrap();
        let (b, s) = to_gray8(&x);
        assert_eq!(b, [0, 128, 255]);
        assert_eq!(s, PngScaling { min: 0.5, max: 1.5 });
        let flat = RealImage::from_vec(1, 2, vec![2.0, 2.0]).unwrap();
        assert_eq!(to_gray8(&flat).0, [0, 0]);
    }

    #[test]
    fn file_roundtrip_keeps_metadata() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.png");
        let x = RealImage::from_vec(2, 3, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.123456789012345]).unwrap();
        let s = write_png(&p, &x).unwrap();
        let (bytes, h, w, back) = read_png(&p).unwrap();
        assert_eq!((h, w), (2, 3));
        assert_eq!(bytes, to_gray8(&x).0);
        assert_eq!(back, s);
    }
}
