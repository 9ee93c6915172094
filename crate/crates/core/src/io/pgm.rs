//! Grey-scale PGM images, ASCII (`P2`) and binary (`P5`).
//!
//! Intensities are `pixel / maxval`. Saving quantizes with round-half-up,
//! `⌊v·maxval + ½⌋`, so a load–save roundtrip is exact for integer levels and
//! otherwise off by at most `1/(2·maxval)`.

use std::path::Path;

use crate::error::{Error, Result};

use super::write_atomic;

/// Row-major intensities in `[0, 1]`, first row at the top of the image.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageBuffer {
    width: usize,
    height: usize,
    intensities: Vec<f64>,
}

impl ImageBuffer {
    pub fn new(width: usize, height: usize, intensities: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || width.checked_mul(height) != Some(intensities.len()) {
            return Err(Error::Shape(format!(
                "{width}×{height} image needs {} intensities, got {}",
                width.saturating_mul(height),
                intensities.len()
            )));
        }
        if let Some((k, v)) = intensities
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= 0.0 && **v <= 1.0))
        {
            return Err(Error::Domain(format!(
                "intensity {v} at pixel {k} outside [0, 1]"
            )));
        }
        Ok(Self {
            width,
            height,
            intensities,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn intensities(&self) -> &[f64] {
        &self.intensities
    }

    /// Intensity at column `x`, row `y` (row 0 at the top).
    pub fn at(&self, x: usize, y: usize) -> f64 {
        self.intensities[y * self.width + x]
    }
}

/// Sample encoding of a written file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PgmFormat {
    /// `P2`, decimal samples.
    Ascii,
    /// `P5`, one byte per sample (two, big-endian, when `maxval > 255`).
    Binary,
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            offset: self.pos,
            message: message.into(),
        })
    }

    fn skip_space_and_comments(&mut self) {
        while let Some(&b) = self.data.get(self.pos) {
            if b == b'#' {
                while self.data.get(self.pos).is_some_and(|c| *c != b'\n') {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.data.get(self.pos).is_some_and(|b| b.is_ascii_digit()) {
            self.pos += 1;
        }
        if start == self.pos {
            return match self.data.get(self.pos) {
                None => self.err(format!("unexpected end of file, expected {what}")),
                Some(b) => self.err(format!("expected {what}, found byte 0x{b:02x}")),
            };
        }
        let text = std::str::from_utf8(&self.data[start..self.pos]).expect("ascii digits");
        text.parse::<u32>().or_else(|_| {
            self.pos = start;
            self.err(format!("{what} {text} out of range"))
        })
    }
}

/// Parses a `P2` or `P5` file from memory.
pub fn parse_pgm(data: &[u8]) -> Result<ImageBuffer> {
    let mut c = Cursor { data, pos: 0 };
    let binary = match data.get(..2) {
        Some(b"P2") => false,
        Some(b"P5") => true,
        Some(m) => {
            return c.err(format!(
                "unsupported magic number {:?}; expected P2 or P5",
                String::from_utf8_lossy(m)
            ))
        }
        None => return c.err("file too short for a magic number"),
    };
    c.pos = 2;
    let width = c.number("width")? as usize;
    let height = c.number("height")? as usize;
    let header_pos = c.pos;
    let maxval = c.number("maxval")?;
    if width == 0 || height == 0 {
        c.pos = header_pos;
        return c.err(format!("empty image {width}×{height}"));
    }
    if maxval == 0 || maxval > 65535 {
        c.pos = header_pos;
        return c.err(format!("maxval {maxval} outside 1..=65535"));
    }
    let n = width
        .checked_mul(height)
        .ok_or_else(|| Error::Parse {
            offset: header_pos,
            message: "image dimensions overflow".into(),
        })?;
    let scale = f64::from(maxval);
    let mut out = Vec::with_capacity(n);
    if binary {
        match data.get(c.pos) {
            Some(b) if b.is_ascii_whitespace() => c.pos += 1,
            _ => return c.err("expected a single whitespace byte before the raster"),
        }
        let bytes = if maxval > 255 { 2 } else { 1 };
        for _ in 0..n {
            let Some(chunk) = data.get(c.pos..c.pos + bytes) else {
                return c.err(format!("raster truncated: expected {n} samples"));
            };
            let v = if bytes == 2 {
                u32::from(u16::from_be_bytes([chunk[0], chunk[1]]))
            } else {
                u32::from(chunk[0])
            };
            if v > maxval {
                return c.err(format!("sample {v} exceeds maxval {maxval}"));
            }
            out.push(f64::from(v) / scale);
            c.pos += bytes;
        }
    } else {
        for _ in 0..n {
            let v = c.number("sample")?;
            if v > maxval {
                return c.err(format!("sample {v} exceeds maxval {maxval}"));
            }
            out.push(f64::from(v) / scale);
        }
    }
    ImageBuffer::new(width, height, out)
}

/// Reads a `P2` or `P5` file.
pub fn load_pgm(path: impl AsRef<Path>) -> Result<ImageBuffer> {
    parse_pgm(&std::fs::read(path)?)
}

/// Round-half-up quantization of an intensity to `0..=maxval`.
pub fn quantize(v: f64, maxval: u16) -> u16 {
    let m = f64::from(maxval);
    (v * m + 0.5).floor().clamp(0.0, m) as u16
}

/// Encodes an image; the output is a pure function of its inputs.
pub fn encode_pgm(img: &ImageBuffer, maxval: u16, format: PgmFormat) -> Result<Vec<u8>> {
    if maxval == 0 {
        return Err(Error::Config("maxval must be at least 1".into()));
    }
    let magic = match format {
        PgmFormat::Ascii => "P2",
        PgmFormat::Binary => "P5",
    };
    let mut out = format!("{magic}\n{} {}\n{maxval}\n", img.width, img.height).into_bytes();
    match format {
        PgmFormat::Binary => {
            for v in &img.intensities {
                let q = quantize(*v, maxval);
                if maxval > 255 {
                    out.extend_from_slice(&q.to_be_bytes());
                } else {
                    out.push(q as u8);
                }
            }
        }
        PgmFormat::Ascii => {
            for row in img.intensities.chunks(img.width) {
                let line: Vec<String> = row.iter().map(|v| quantize(*v, maxval).to_string()).collect();
                out.extend_from_slice(line.join(" ").as_bytes());
                out.push(b'\n');
            }
        }
    }
    Ok(out)
}

/// Writes an image atomically (temporary file, then rename).
pub fn save_pgm(
    img: &ImageBuffer,
    path: impl AsRef<Path>,
    maxval: u16,
    format: PgmFormat,
) -> Result<()> {
    write_atomic(path.as_ref(), &encode_pgm(img, maxval, format)?)
}
