//! File format readers and writers shared by the pipeline artifacts.

pub mod netpbm;
pub mod pfm;
pub mod ply;

use std::io::Write;
use std::path::Path;

/// Write a file atomically: contents go to a sibling temp file which is
/// renamed into place once fully written.
pub fn write_atomic(
    path: &Path,
    write: impl FnOnce(&mut dyn Write) -> crate::Result<()>,
) -> crate::Result<()> {
    let tmp = path.with_extension(match path.extension() {
        Some(ext) => format!("{}.tmp", ext.to_string_lossy()),
        None => "tmp".to_string(),
    });
    {
        let mut file = std::io::BufWriter::new(std::fs::File::create(&tmp)?);
        write(&mut file)?;
        file.flush()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}
