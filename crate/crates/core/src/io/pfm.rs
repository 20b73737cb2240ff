//! Grayscale PFM ("Pf") images.
//!
//! Header: `Pf`, `width height`, scale. A negative scale marks little-endian
//! float32 payloads. Rows are stored bottom-to-top per the PFM convention.

use crate::error::{Error, Result};
use byteorder::{ByteOrder, LittleEndian, WriteBytesExt};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

/// Write a row-major (top-to-bottom) float image as grayscale PFM.
pub fn write(path: &Path, width: usize, height: usize, data: &[f32]) -> Result<()> {
    if data.len() != width * height {
        return Err(Error::mismatch(format!(
            "pfm payload {} != {}x{}",
            data.len(),
            width,
            height
        )));
    }
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    write_to(&mut w, width, height, data)
}

pub fn write_to(w: &mut dyn Write, width: usize, height: usize, data: &[f32]) -> Result<()> {
    write!(w, "Pf\n{} {}\n-1.0\n", width, height)?;
    for row in (0..height).rev() {
        for col in 0..width {
            w.write_f32::<LittleEndian>(data[row * width + col])?;
        }
    }
    Ok(())
}

/// Read a grayscale PFM into row-major (top-to-bottom) order.
pub fn read(path: &Path) -> Result<(usize, usize, Vec<f32>)> {
    let mut r = BufReader::new(std::fs::File::open(path)?);
    let magic = read_token(&mut r)?;
    if magic != "Pf" {
        return Err(Error::format(format!("expected Pf magic, got {magic:?}")));
    }
    let width: usize = parse_token(&read_token(&mut r)?)?;
    let height: usize = parse_token(&read_token(&mut r)?)?;
    let scale: f64 = parse_token(&read_token(&mut r)?)?;
    let little_endian = scale < 0.0;
    let mut raw = vec![0u8; width * height * 4];
    r.read_exact(&mut raw)?;
    let mut data = vec![0.0f32; width * height];
    for row in 0..height {
        // File rows are bottom-to-top.
        let file_row = height - 1 - row;
        for col in 0..width {
            let off = (file_row * width + col) * 4;
            let bytes = &raw[off..off + 4];
            data[row * width + col] = if little_endian {
                LittleEndian::read_f32(bytes)
            } else {
                byteorder::BigEndian::read_f32(bytes)
            };
        }
    }
    Ok((width, height, data))
}

/// One whitespace-delimited header token.
fn read_token(r: &mut impl BufRead) -> Result<String> {
    let mut token = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        r.read_exact(&mut byte)?;
        if byte[0].is_ascii_whitespace() {
            if token.is_empty() {
                continue;
            }
            break;
        }
        token.push(byte[0]);
    }
    String::from_utf8(token).map_err(|_| Error::format("non-utf8 pfm header"))
}

fn parse_token<T: std::str::FromStr>(token: &str) -> Result<T> {
    token
        .parse()
        .map_err(|_| Error::format(format!("bad pfm header token {token:?}")))
}
