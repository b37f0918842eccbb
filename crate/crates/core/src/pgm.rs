//! Minimal PGM (P2 ASCII / P5 binary) codec, 8-bit only.

use crate::image::{GrayImage, ImageError};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PgmError {
    #[error("unsupported format {magic:?}: only P2 and P5 are accepted")]
    UnsupportedFormat { magic: String },
    #[error("malformed header at byte {offset}: {reason}")]
    MalformedHeader { offset: usize, reason: &'static str },
    #[error("maxval {maxval} at byte {offset} exceeds 255")]
    MaxvalTooLarge { offset: usize, maxval: u32 },
    #[error("pixel data truncated at byte {offset}: expected {expected} samples, found {found}")]
    Truncated { offset: usize, expected: usize, found: usize },
    #[error("invalid pixel sample at byte {offset}: {reason}")]
    InvalidSample { offset: usize, reason: &'static str },
    #[error(transparent)]
    Image(#[from] ImageError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PgmFormat {
    /// P2
    Ascii,
    /// P5
    Binary,
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_whitespace_and_comments(&mut self) {
        while self.pos < self.data.len() {
            match self.data[self.pos] {
                b'#' => {
                    while self.pos < self.data.len() && self.data[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    /// Reads an unsigned decimal token. Returns the value and the offset where
    /// the token started.
    fn read_number(&mut self, what: &'static str) -> Result<(u32, usize), PgmError> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        let mut value: u32 = 0;
        while self.pos < self.data.len() && self.data[self.pos].is_ascii_digit() {
            value = value
                .checked_mul(10)
                .and_then(|v| v.checked_add(u32::from(self.data[self.pos] - b'0')))
                .ok_or(PgmError::MalformedHeader { offset: start, reason: "number overflows" })?;
            self.pos += 1;
        }
        if self.pos == start {
            return Err(PgmError::MalformedHeader { offset: start, reason: what });
        }
        Ok((value, start))
    }
}

/// Decodes a P2 or P5 file. The result has `levels = maxval + 1`.
pub fn load_pgm(bytes: &[u8]) -> Result<GrayImage, PgmError> {
    if bytes.len() < 2 {
        return Err(PgmError::MalformedHeader { offset: 0, reason: "missing magic number" });
    }
    let format = match &bytes[..2] {
        b"P2" => PgmFormat::Ascii,
        b"P5" => PgmFormat::Binary,
        other => {
            return Err(PgmError::UnsupportedFormat { magic: String::from_utf8_lossy(other).into_owned() })
        }
    };
    let mut cur = Cursor { data: bytes, pos: 2 };
    if cur.pos < bytes.len() && !bytes[cur.pos].is_ascii_whitespace() && bytes[cur.pos] != b'#' {
        return Err(PgmError::MalformedHeader { offset: 2, reason: "magic number not followed by whitespace" });
    }
    let (width, w_at) = cur.read_number("expected width")?;
    let (height, h_at) = cur.read_number("expected height")?;
    let (maxval, m_at) = cur.read_number("expected maxval")?;
    if width == 0 {
        return Err(PgmError::MalformedHeader { offset: w_at, reason: "width must be positive" });
    }
    if height == 0 {
        return Err(PgmError::MalformedHeader { offset: h_at, reason: "height must be positive" });
    }
    if maxval > 255 {
        return Err(PgmError::MaxvalTooLarge { offset: m_at, maxval });
    }
    if maxval == 0 {
        return Err(PgmError::MalformedHeader { offset: m_at, reason: "maxval must be positive" });
    }
    let (width, height) = (width as usize, height as usize);
    let expected = width * height;

    let pixels = match format {
        PgmFormat::Binary => {
            // exactly one whitespace byte separates the header from the raster
            if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
                return Err(PgmError::MalformedHeader { offset: cur.pos, reason: "expected whitespace after maxval" });
            }
            let start = cur.pos + 1;
            let available = bytes.len() - start;
            if available < expected {
                return Err(PgmError::Truncated { offset: bytes.len(), expected, found: available });
            }
            let raster = &bytes[start..start + expected];
            if let Some(i) = raster.iter().position(|&p| u32::from(p) > maxval) {
                return Err(PgmError::InvalidSample { offset: start + i, reason: "sample exceeds maxval" });
            }
            raster.to_vec()
        }
        PgmFormat::Ascii => {
            let mut pixels = Vec::with_capacity(expected);
            for _ in 0..expected {
                cur.skip_whitespace_and_comments();
                if cur.pos >= bytes.len() {
                    return Err(PgmError::Truncated { offset: cur.pos, expected, found: pixels.len() });
                }
                let (v, at) = cur
                    .read_number("expected decimal sample")
                    .map_err(|_| PgmError::InvalidSample { offset: cur.pos, reason: "expected decimal sample" })?;
                if v > maxval {
                    return Err(PgmError::InvalidSample { offset: at, reason: "sample exceeds maxval" });
                }
                pixels.push(v as u8);
            }
            pixels
        }
    };
    Ok(GrayImage::new(width, height, (maxval + 1) as u16, pixels)?)
}

/// Encodes with `maxval = levels - 1`. P2 output wraps at one raster row per line.
pub fn emit_pgm(img: &GrayImage, format: PgmFormat) -> Vec<u8> {
    let maxval = img.levels() - 1;
    let magic = match format {
        PgmFormat::Ascii => "P2",
        PgmFormat::Binary => "P5",
    };
    let mut out = format!("{magic}\n{} {}\n{maxval}\n", img.width(), img.height()).into_bytes();
    match format {
        PgmFormat::Binary => out.extend_from_slice(img.pixels()),
        PgmFormat::Ascii => {
            for row in img.pixels().chunks(img.width()) {
                let line: Vec<String> = row.iter().map(|p| p.to_string()).collect();
                out.extend_from_slice(line.join(" ").as_bytes());
                out.push(b'\n');
            }
        }
    }
    out
}
