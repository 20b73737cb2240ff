//! Binary little-endian PLY with float32 x,y,z and optional nx,ny,nz.

use crate::error::{Error, Result};
use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

pub struct PlyCloud {
    pub points: Vec<[f32; 3]>,
    pub normals: Option<Vec<[f32; 3]>>,
}

pub fn write(path: &Path, cloud: &PlyCloud) -> Result<()> {
    if let Some(normals) = &cloud.normals {
        if normals.len() != cloud.points.len() {
            return Err(Error::mismatch("normal count != point count"));
        }
    }
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    write!(
        w,
        "ply\nformat binary_little_endian 1.0\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\n",
        cloud.points.len()
    )?;
    if cloud.normals.is_some() {
        write!(
            w,
            "property float nx\nproperty float ny\nproperty float nz\n"
        )?;
    }
    writeln!(w, "end_header")?;
    for (i, p) in cloud.points.iter().enumerate() {
        for &v in p {
            w.write_f32::<LittleEndian>(v)?;
        }
        if let Some(normals) = &cloud.normals {
            for &v in &normals[i] {
                w.write_f32::<LittleEndian>(v)?;
            }
        }
    }
    Ok(())
}

pub fn read(path: &Path) -> Result<PlyCloud> {
    let mut r = BufReader::new(std::fs::File::open(path)?);
    let mut line = String::new();
    r.read_line(&mut line)?;
    if line.trim() != "ply" {
        return Err(Error::format("missing ply magic"));
    }
    let mut vertex_count = 0usize;
    let mut properties: Vec<String> = Vec::new();
    loop {
        line.clear();
        if r.read_line(&mut line)? == 0 {
            return Err(Error::format("unexpected end of ply header"));
        }
        let trimmed = line.trim();
        if trimmed == "end_header" {
            break;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        match fields.as_slice() {
            ["format", "binary_little_endian", "1.0"] => {}
            ["format", ..] => return Err(Error::format("only binary_little_endian ply supported")),
            ["comment", ..] => {}
            ["element", "vertex", n] => {
                vertex_count = n.parse().map_err(|_| Error::format("bad vertex count"))?;
            }
            ["element", ..] => return Err(Error::format("only vertex elements supported")),
            ["property", "float", name] => properties.push(name.to_string()),
            ["property", ..] => return Err(Error::format("only float properties supported")),
            _ => {
                return Err(Error::format(format!(
                    "unrecognized ply header line {trimmed:?}"
                )))
            }
        }
    }
    let has_normals = match properties.as_slice() {
        [x, y, z] if x == "x" && y == "y" && z == "z" => false,
        [x, y, z, nx, ny, nz]
            if x == "x" && y == "y" && z == "z" && nx == "nx" && ny == "ny" && nz == "nz" =>
        {
            true
        }
        _ => return Err(Error::format("unsupported ply property layout")),
    };
    let mut points = Vec::with_capacity(vertex_count);
    let mut normals = has_normals.then(|| Vec::with_capacity(vertex_count));
    for _ in 0..vertex_count {
        let mut p = [0.0f32; 3];
        for v in &mut p {
            *v = r.read_f32::<LittleEndian>()?;
        }
        points.push(p);
        if let Some(normals) = &mut normals {
            let mut n = [0.0f32; 3];
            for v in &mut n {
                *v = r.read_f32::<LittleEndian>()?;
            }
            normals.push(n);
        }
    }
    Ok(PlyCloud { points, normals })
}
