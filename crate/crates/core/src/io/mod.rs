//! File formats, checkpoints and synthetic data.

mod binary;
mod checkpoint;
mod synth;
mod text;

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub use checkpoint::{
    load_checkpoint, load_tagger, round_tagger, save_checkpoint, save_tagger, tagger_from_bytes, tagger_to_bytes,
    Checkpoint, FORMAT_VERSION, MAGIC,
};
pub use synth::{
    final_character_corpus, generate_synthetic_teacher, Coherence, SyntheticSpec, SyntheticTeacher, SUFFIXES,
};
pub use text::{
    format_analogy, format_embeddings, format_similarity, format_tagged_corpus, parse_analogy, parse_embeddings,
    parse_similarity, parse_tagged_corpus, read_analogy, read_embeddings, read_similarity, read_tagged_corpus,
    write_embeddings,
};

pub(crate) fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn stem_of(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

/// Writes `bytes` to a temporary file beside `path`, then renames it into
/// place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    result.map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

/// Writes the table, gold datasets and outlier mask of a synthetic teacher
/// into `dir` as `teacher.txt`, `similarity.tsv`, `analogy.txt` and
/// `outliers.txt`.
pub fn write_synthetic(dir: &Path, teacher: &SyntheticTeacher) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_atomic(&dir.join("teacher.txt"), format_embeddings(&teacher.table, true).as_bytes())?;
    write_atomic(&dir.join("similarity.tsv"), format_similarity(&teacher.similarity).as_bytes())?;
    write_atomic(&dir.join("analogy.txt"), format_analogy(&teacher.analogy).as_bytes())?;
    let mask: String = teacher
        .table
        .words()
        .iter()
        .zip(&teacher.outliers)
        .map(|(w, &o)| format!("{w}\t{}\n", o as u8))
        .collect();
    write_atomic(&dir.join("outliers.txt"), mask.as_bytes())
}
