//! Binary portable graymap (P5) and pixmap (P6) files with maxval 255.
//!
//! Files are written as `P5\n<w> <h>\n255\n<payload>`. The reader accepts
//! any whitespace between header tokens and exactly one whitespace byte
//! between the maxval and the payload.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

use super::Image;

pub fn encode(img: &Image) -> Vec<u8> {
    let magic = if img.channels() == 3 { "P6" } else { "P5" };
    let mut out = format!("{magic}\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(img.pixels());
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_whitespace(&mut self) -> Result<()> {
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(Error::Format(format!("expected whitespace at byte {}", self.pos)));
        }
        Ok(())
    }

    fn token(&mut self) -> Result<&[u8]> {
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        if self.pos == start {
            return Err(Error::Format("truncated header".into()));
        }
        Ok(&self.bytes[start..self.pos])
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        let tok = self.token()?;
        std::str::from_utf8(tok)
            .ok()
            .filter(|s| s.bytes().all(|b| b.is_ascii_digit()))
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format(format!("bad {what} `{}`", String::from_utf8_lossy(tok))))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Image> {
    let mut cur = Cursor { bytes, pos: 0 };
    let channels = match cur.token()? {
        b"P5" => 1,
        b"P6" => 3,
        other => {
            return Err(Error::Format(format!(
                "unsupported magic `{}`",
                String::from_utf8_lossy(other)
            )))
        }
    };
    cur.skip_whitespace()?;
    let width = cur.number("width")?;
    cur.skip_whitespace()?;
    let height = cur.number("height")?;
    cur.skip_whitespace()?;
    let maxval = cur.number("maxval")?;
    if maxval != 255 {
        return Err(Error::Format(format!("maxval {maxval}, only 255 is supported")));
    }
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(Error::Format("missing whitespace after maxval".into())),
    }
    if width == 0 || height == 0 {
        return Err(Error::Format(format!("empty image {width}x{height}")));
    }
    let need = width * height * channels;
    let payload = &bytes[cur.pos..];
    if payload.len() < need {
        return Err(Error::Format(format!(
            "truncated payload: {} of {need} bytes",
            payload.len()
        )));
    }
    if payload.len() > need {
        return Err(Error::Format(format!(
            "{} trailing bytes after payload",
            payload.len() - need
        )));
    }
    Image::new(width, height, channels, payload.to_vec())
}

pub fn read_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|e| match e {
        Error::Format(m) => Error::Format(format!("{}: {m}", path.display())),
        e => e,
    })
}

pub fn write_image(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(img)).map_err(|e| Error::io(path, e))
}
