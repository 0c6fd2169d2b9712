//! Minimal PGM (P2 plain / P5 binary) grayscale I/O.
//!
//! Pixels are normalized to `[0, 1]` by the file's maxval on load. Images are
//! returned as `height × width` matrices; [`crate::tv::ImageGrid`] vectorizes
//! them column by column.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PgmFormat {
    Plain,
    Binary,
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_space_and_comments(&mut self) {
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

    fn token(&mut self, what: &str) -> Result<&str> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.data.len() && !self.data[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Parse(format!("PGM: missing {what}")));
        }
        std::str::from_utf8(&self.data[start..self.pos])
            .map_err(|_| Error::Parse(format!("PGM: malformed {what}")))
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        let tok = self.token(what)?;
        tok.parse()
            .map_err(|_| Error::Parse(format!("PGM: bad {what} '{tok}'")))
    }
}

/// Parses a P2 or P5 image into a `height × width` matrix in `[0, 1]`.
pub fn parse(data: &[u8]) -> Result<Matrix> {
    let mut c = Cursor { data, pos: 0 };
    let format = match c.token("magic number")? {
        "P2" => PgmFormat::Plain,
        "P5" => PgmFormat::Binary,
        other => return Err(Error::Parse(format!("PGM: unsupported magic '{other}'"))),
    };
    let width = c.number("width")?;
    let height = c.number("height")?;
    let maxval = c.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(Error::Parse("PGM: empty image".into()));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Parse(format!("PGM: maxval {maxval} out of range")));
    }
    let scale = maxval as f64;
    let mut out = Matrix::zeros(height, width);
    match format {
        PgmFormat::Plain => {
            for i in 0..height {
                for j in 0..width {
                    let v = c.number("pixel")?;
                    if v > maxval {
                        return Err(Error::Parse(format!("PGM: pixel {v} exceeds maxval")));
                    }
                    out[(i, j)] = v as f64 / scale;
                }
            }
        }
        PgmFormat::Binary => {
            // Exactly one whitespace byte separates the header from the raster.
            c.pos += 1;
            let bytes = if maxval < 256 { 1 } else { 2 };
            let raster = data.get(c.pos..).unwrap_or(&[]);
            if raster.len() < width * height * bytes {
                return Err(Error::Parse("PGM: truncated raster".into()));
            }
            for i in 0..height {
                for j in 0..width {
                    let k = (i * width + j) * bytes;
                    let v = if bytes == 1 {
                        raster[k] as usize
                    } else {
                        ((raster[k] as usize) << 8) | raster[k + 1] as usize
                    };
                    if v > maxval {
                        return Err(Error::Parse(format!("PGM: pixel {v} exceeds maxval")));
                    }
                    out[(i, j)] = v as f64 / scale;
                }
            }
        }
    }
    Ok(out)
}

pub fn read(path: &Path) -> Result<Matrix> {
    let mut data = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut data)?;
    parse(&data)
}

/// 8-bit encoding: values are clamped to `[0, 1]` and rounded to `0..=255`.
pub fn encode(img: &Matrix, format: PgmFormat) -> Vec<u8> {
    let (h, w) = img.shape();
    let level = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    let mut out = Vec::new();
    match format {
        PgmFormat::Binary => {
            out.extend_from_slice(format!("P5\n{w} {h}\n255\n").as_bytes());
            for i in 0..h {
                for j in 0..w {
                    out.push(level(img[(i, j)]));
                }
            }
        }
        PgmFormat::Plain => {
            out.extend_from_slice(format!("P2\n{w} {h}\n255\n").as_bytes());
            for i in 0..h {
                let row: Vec<String> = (0..w).map(|j| level(img[(i, j)]).to_string()).collect();
                out.extend_from_slice(row.join(" ").as_bytes());
                out.push(b'\n');
            }
        }
    }
    out
}

pub fn write(path: &Path, img: &Matrix, format: PgmFormat) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&encode(img, format))?;
    Ok(())
}
