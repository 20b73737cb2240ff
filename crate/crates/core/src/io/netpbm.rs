//! Binary netpbm writers/readers: PGM (P5), PBM (P4), PPM (P6).

use crate::error::{Error, Result};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

/// 8-bit grayscale PGM (P5, maxval 255), row-major top-to-bottom.
pub fn write_pgm(path: &Path, width: usize, height: usize, data: &[u8]) -> Result<()> {
    if data.len() != width * height {
        return Err(Error::mismatch("pgm payload size"));
    }
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    write!(w, "P5\n{} {}\n255\n", width, height)?;
    w.write_all(data)?;
    Ok(())
}

pub fn read_pgm(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let mut r = BufReader::new(std::fs::File::open(path)?);
    let (magic, width, height, maxval) = read_header(&mut r, true)?;
    if magic != "P5" {
        return Err(Error::format(format!("expected P5, got {magic}")));
    }
    if maxval != Some(255) {
        return Err(Error::format("only maxval 255 pgm supported"));
    }
    let mut data = vec![0u8; width * height];
    r.read_exact(&mut data)?;
    Ok((width, height, data))
}

/// 1-bit PBM (P4): 1 = set bit, rows padded to whole bytes, MSB first.
pub fn write_pbm(path: &Path, width: usize, height: usize, bits: &[bool]) -> Result<()> {
    if bits.len() != width * height {
        return Err(Error::mismatch("pbm payload size"));
    }
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    write!(w, "P4\n{} {}\n", width, height)?;
    let row_bytes = width.div_ceil(8);
    let mut row = vec![0u8; row_bytes];
    for y in 0..height {
        row.fill(0);
        for x in 0..width {
            if bits[y * width + x] {
                row[x / 8] |= 0x80 >> (x % 8);
            }
        }
        w.write_all(&row)?;
    }
    Ok(())
}

pub fn read_pbm(path: &Path) -> Result<(usize, usize, Vec<bool>)> {
    let mut r = BufReader::new(std::fs::File::open(path)?);
    let (magic, width, height, _) = read_header(&mut r, false)?;
    if magic != "P4" {
        return Err(Error::format(format!("expected P4, got {magic}")));
    }
    let row_bytes = width.div_ceil(8);
    let mut raw = vec![0u8; row_bytes * height];
    r.read_exact(&mut raw)?;
    let mut bits = vec![false; width * height];
    for y in 0..height {
        for x in 0..width {
            bits[y * width + x] = raw[y * row_bytes + x / 8] & (0x80 >> (x % 8)) != 0;
        }
    }
    Ok((width, height, bits))
}

/// 24-bit RGB PPM (P6, maxval 255).
pub fn write_ppm(path: &Path, width: usize, height: usize, rgb: &[[u8; 3]]) -> Result<()> {
    if rgb.len() != width * height {
        return Err(Error::mismatch("ppm payload size"));
    }
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    write!(w, "P6\n{} {}\n255\n", width, height)?;
    for px in rgb {
        w.write_all(px)?;
    }
    Ok(())
}

/// Parse `magic width height [maxval]`, skipping `#` comments.
fn read_header(
    r: &mut impl BufRead,
    with_maxval: bool,
) -> Result<(String, usize, usize, Option<usize>)> {
    let magic = read_token(r)?;
    let width = read_token(r)?
        .parse()
        .map_err(|_| Error::format("bad netpbm width"))?;
    let height = read_token(r)?
        .parse()
        .map_err(|_| Error::format("bad netpbm height"))?;
    let maxval = if with_maxval {
        Some(
            read_token(r)?
                .parse()
                .map_err(|_| Error::format("bad netpbm maxval"))?,
        )
    } else {
        None
    };
    Ok((magic, width, height, maxval))
}

fn read_token(r: &mut impl BufRead) -> Result<String> {
    let mut token = Vec::new();
    let mut byte = [0u8; 1];
    let mut in_comment = false;
    loop {
        r.read_exact(&mut byte)?;
        let b = byte[0];
        if in_comment {
            if b == b'\n' {
                in_comment = false;
            }
            continue;
        }
        if b == b'#' && token.is_empty() {
            in_comment = true;
            continue;
        }
        if b.is_ascii_whitespace() {
            if token.is_empty() {
                continue;
            }
            break;
        }
        token.push(b);
    }
    String::from_utf8(token).map_err(|_| Error::format("non-utf8 netpbm header"))
}
