//! Plain-text formats: embeddings, similarity pairs, analogy questions and
//! tagged corpora. Parsers are pure functions over the file contents; the
//! `source` argument only labels error messages.

use std::fmt::Write as _;
use std::path::Path;

use crate::embeddings::EmbeddingTable;
use crate::error::{Error, Result};
use crate::eval::{AnalogyDataset, AnalogyQuestion, SimilarityDataset, SimilarityPair};
use crate::tagger::{Sentence, TaggedCorpus};

use super::{read_text, stem_of, write_atomic};

fn parse_err(source: &str, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: source.to_string(),
        line,
        message: message.into(),
    }
}

fn parse_float(source: &str, line: usize, field: &str) -> Result<f64> {
    let v: f64 = field
        .parse()
        .map_err(|_| parse_err(source, line, format!("non-numeric field {field:?}")))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(parse_err(source, line, format!("non-finite value {field:?}")))
    }
}

/// Parses "word v1 v2 ..." records with an optional "<count> <dim>" header.
///
/// The first line is a header iff it consists of exactly two tokens that
/// both parse as unsigned integers. Blank lines are ignored.
pub fn parse_embeddings(text: &str, source: &str) -> Result<EmbeddingTable> {
    let mut header: Option<(usize, usize)> = None;
    let mut table: Option<EmbeddingTable> = None;
    let mut last_line = 0;
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        last_line = lineno;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if i == 0 && fields.len() == 2 {
            if let (Ok(count), Ok(dim)) = (fields[0].parse::<usize>(), fields[1].parse::<usize>()) {
                if dim == 0 {
                    return Err(parse_err(source, lineno, "header declares dimension 0"));
                }
                header = Some((count, dim));
                continue;
            }
        }
        if fields.len() < 2 {
            return Err(parse_err(source, lineno, "record has no vector"));
        }
        let values = fields[1..]
            .iter()
            .map(|f| parse_float(source, lineno, f))
            .collect::<Result<Vec<f64>>>()?;
        let t = table.get_or_insert_with(|| EmbeddingTable::new(header.map_or(values.len(), |h| h.1)));
        if values.len() != t.dim() {
            return Err(parse_err(
                source,
                lineno,
                format!("expected {} values, found {}", t.dim(), values.len()),
            ));
        }
        if !t.insert(fields[0], &values)? {
            return Err(parse_err(source, lineno, format!("duplicate word {:?}", fields[0])));
        }
    }
    let table = match (table, header) {
        (Some(t), _) => t,
        (None, Some((_, dim))) => EmbeddingTable::new(dim),
        (None, None) => return Err(parse_err(source, last_line.max(1), "no embeddings found")),
    };
    if let Some((count, _)) = header {
        if count != table.len() {
            return Err(parse_err(
                source,
                last_line,
                format!("header declares {count} words, found {}", table.len()),
            ));
        }
    }
    Ok(table)
}

/// Writes one record per line, preceded by a header if requested. Floats
/// use the shortest representation that parses back to the same `f64`.
pub fn format_embeddings(table: &EmbeddingTable, header: bool) -> String {
    let mut out = String::new();
    if header {
        writeln!(out, "{} {}", table.len(), table.dim()).unwrap();
    }
    for (w, v) in table.iter() {
        out.push_str(w);
        for x in v {
            write!(out, " {x}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Parses "w1<TAB>w2<TAB>score" lines. Lines starting with `#` and blank
/// lines are skipped.
pub fn parse_similarity(text: &str, name: &str) -> Result<SimilarityDataset> {
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        if fields.len() != 3 || fields[0].is_empty() || fields[1].is_empty() {
            return Err(parse_err(name, lineno, "expected word1<TAB>word2<TAB>score"));
        }
        pairs.push(SimilarityPair {
            word1: fields[0].to_string(),
            word2: fields[1].to_string(),
            score: parse_float(name, lineno, fields[2])?,
        });
    }
    if pairs.is_empty() {
        return Err(parse_err(name, text.lines().count().max(1), "no similarity pairs"));
    }
    SimilarityDataset::new(name, pairs)
}

pub fn format_similarity(dataset: &SimilarityDataset) -> String {
    let mut out = String::new();
    for p in &dataset.pairs {
        writeln!(out, "{}\t{}\t{}", p.word1, p.word2, p.score).unwrap();
    }
    out
}

/// Parses "a b c d" lines; ": name" lines open a section.
pub fn parse_analogy(text: &str, label: &str) -> Result<AnalogyDataset> {
    let mut section: Option<String> = None;
    let mut questions = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix(':') {
            section = Some(rest.trim().to_string());
            continue;
        }
        let w: Vec<&str> = trimmed.split_whitespace().collect();
        if w.len() != 4 {
            return Err(parse_err(label, lineno, format!("expected 4 words, found {}", w.len())));
        }
        let mut q = AnalogyQuestion::new(w[0], w[1], w[2], w[3]);
        q.section = section.clone();
        questions.push(q);
    }
    AnalogyDataset::new(label, questions)
}

pub fn format_analogy(dataset: &AnalogyDataset) -> String {
    let mut out = String::new();
    let mut section: Option<&str> = None;
    for q in &dataset.questions {
        if q.section.as_deref() != section {
            section = q.section.as_deref();
            writeln!(out, ": {}", section.unwrap_or("")).unwrap();
        }
        writeln!(out, "{} {} {} {}", q.a, q.b, q.c, q.d).unwrap();
    }
    out
}

/// Parses "token<TAB>tag" lines; blank lines end sentences.
pub fn parse_tagged_corpus(text: &str, source: &str) -> Result<TaggedCorpus> {
    let mut sentences = Vec::new();
    let mut current: Sentence = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        if line.trim().is_empty() {
            if !current.is_empty() {
                sentences.push(std::mem::take(&mut current));
            }
            continue;
        }
        let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
        if fields.len() != 2 || fields[0].is_empty() || fields[1].is_empty() {
            return Err(parse_err(source, lineno, "expected token<TAB>tag"));
        }
        current.push((fields[0].to_string(), fields[1].to_string()));
    }
    if !current.is_empty() {
        sentences.push(current);
    }
    TaggedCorpus::new(sentences)
}

pub fn format_tagged_corpus(corpus: &TaggedCorpus) -> String {
    let mut out = String::new();
    for s in &corpus.sentences {
        for (w, t) in s {
            writeln!(out, "{w}\t{t}").unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn read_embeddings(path: &Path) -> Result<EmbeddingTable> {
    parse_embeddings(&read_text(path)?, &path.display().to_string())
}

pub fn write_embeddings(path: &Path, table: &EmbeddingTable, header: bool) -> Result<()> {
    write_atomic(path, format_embeddings(table, header).as_bytes())
}

/// Dataset name is the file stem.
pub fn read_similarity(path: &Path) -> Result<SimilarityDataset> {
    let text = read_text(path)?;
    parse_similarity(&text, &stem_of(path)).map_err(|e| relabel(e, path))
}

pub fn read_analogy(path: &Path) -> Result<AnalogyDataset> {
    let text = read_text(path)?;
    parse_analogy(&text, &stem_of(path)).map_err(|e| relabel(e, path))
}

pub fn read_tagged_corpus(path: &Path) -> Result<TaggedCorpus> {
    parse_tagged_corpus(&read_text(path)?, &path.display().to_string())
}

/// Parse errors name the full path rather than the dataset label.
fn relabel(e: Error, path: &Path) -> Error {
    match e {
        Error::Parse { line, message, .. } => Error::Parse {
            path: path.display().to_string(),
            line,
            message,
        },
        other => other,
    }
}
