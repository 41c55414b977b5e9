//! Little-endian primitives shared by the checkpoint and tagger model files.

use std::io::Cursor;

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};

use crate::encoder::CharVocab;
use crate::error::{Error, Result};

pub(crate) struct Writer {
    pub(crate) buf: Vec<u8>,
}

impl Writer {
    pub(crate) fn new() -> Self {
        Writer { buf: Vec::new() }
    }

    pub(crate) fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub(crate) fn u32(&mut self, v: usize) {
        let v = u32::try_from(v).expect("size fits in u32");
        self.buf.write_u32::<LE>(v).unwrap();
    }

    pub(crate) fn u64(&mut self, v: u64) {
        self.buf.write_u64::<LE>(v).unwrap();
    }

    pub(crate) fn f64(&mut self, v: f64) {
        self.buf.write_f64::<LE>(v).unwrap();
    }

    pub(crate) fn str(&mut self, s: &str) {
        self.u32(s.len());
        self.buf.extend_from_slice(s.as_bytes());
    }

    pub(crate) fn strings(&mut self, items: &[String]) {
        self.u32(items.len());
        for s in items {
            self.str(s);
        }
    }

    pub(crate) fn vocab(&mut self, vocab: &CharVocab) {
        self.u32(vocab.len());
        for &c in vocab.chars() {
            self.buf.write_u32::<LE>(c as u32).unwrap();
        }
    }

    /// Element count, then the values rounded to `f32`.
    pub(crate) fn tensor(&mut self, values: &[f64]) {
        self.u32(values.len());
        for &v in values {
            self.buf.write_f32::<LE>(v as f32).unwrap();
        }
    }
}

pub(crate) struct Reader<'a> {
    cur: Cursor<&'a [u8]>,
}

fn truncated(what: &str) -> Error {
    Error::CorruptCheckpoint(format!("truncated while reading {what}"))
}

impl<'a> Reader<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Reader { cur: Cursor::new(bytes) }
    }

    fn remaining(&self) -> usize {
        self.cur.get_ref().len() - self.cur.position() as usize
    }

    pub(crate) fn bytes(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(truncated(what));
        }
        let start = self.cur.position() as usize;
        self.cur.set_position((start + n) as u64);
        Ok(&self.cur.get_ref()[start..start + n])
    }

    pub(crate) fn u8(&mut self, what: &str) -> Result<u8> {
        self.cur.read_u8().map_err(|_| truncated(what))
    }

    pub(crate) fn u32(&mut self, what: &str) -> Result<usize> {
        self.cur.read_u32::<LE>().map(|v| v as usize).map_err(|_| truncated(what))
    }

    pub(crate) fn u64(&mut self, what: &str) -> Result<u64> {
        self.cur.read_u64::<LE>().map_err(|_| truncated(what))
    }

    pub(crate) fn f64(&mut self, what: &str) -> Result<f64> {
        self.cur.read_f64::<LE>().map_err(|_| truncated(what))
    }

    pub(crate) fn flag(&mut self, what: &str) -> Result<bool> {
        match self.u8(what)? {
            0 => Ok(false),
            1 => Ok(true),
            b => Err(Error::CorruptCheckpoint(format!("invalid flag {b} for {what}"))),
        }
    }

    /// A count whose items need at least `min_item` bytes each; rejects
    /// counts the remaining input could not possibly hold.
    pub(crate) fn count(&mut self, min_item: usize, what: &str) -> Result<usize> {
        let n = self.u32(what)?;
        if n.saturating_mul(min_item) > self.remaining() {
            return Err(truncated(what));
        }
        Ok(n)
    }

    pub(crate) fn str(&mut self, what: &str) -> Result<String> {
        let n = self.count(1, what)?;
        let b = self.bytes(n, what)?;
        String::from_utf8(b.to_vec()).map_err(|_| Error::CorruptCheckpoint(format!("invalid UTF-8 in {what}")))
    }

    pub(crate) fn strings(&mut self, what: &str) -> Result<Vec<String>> {
        let n = self.count(4, what)?;
        (0..n).map(|_| self.str(what)).collect()
    }

    pub(crate) fn vocab(&mut self) -> Result<CharVocab> {
        let n = self.count(4, "character vocabulary")?;
        let mut chars = Vec::with_capacity(n);
        for _ in 0..n {
            let code = self.cur.read_u32::<LE>().map_err(|_| truncated("character vocabulary"))?;
            let c = char::from_u32(code)
                .ok_or_else(|| Error::CorruptCheckpoint(format!("invalid character code {code}")))?;
            chars.push(c);
        }
        let vocab = CharVocab::from_chars(chars.iter().copied());
        if vocab.chars() != chars.as_slice() {
            return Err(Error::CorruptCheckpoint("character vocabulary is not sorted and unique".into()));
        }
        Ok(vocab)
    }

    /// Fills `out` from a stored tensor, which must have the same length.
    pub(crate) fn tensor_into(&mut self, out: &mut [f64], what: &str) -> Result<()> {
        let n = self.count(4, what)?;
        if n != out.len() {
            return Err(Error::CorruptCheckpoint(format!(
                "{what}: expected {} values, found {n}",
                out.len()
            )));
        }
        for v in out.iter_mut() {
            let x = self.cur.read_f32::<LE>().map_err(|_| truncated(what))?;
            if !x.is_finite() {
                return Err(Error::CorruptCheckpoint(format!("non-finite value in {what}")));
            }
            *v = x as f64;
        }
        Ok(())
    }

    pub(crate) fn finish(&self) -> Result<()> {
        match self.remaining() {
            0 => Ok(()),
            n => Err(Error::CorruptCheckpoint(format!("{n} trailing bytes"))),
        }
    }
}
