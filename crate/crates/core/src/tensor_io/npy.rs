//! Reader and writer for the npy subset used as the latent interchange format:
//! version 1.0, little-endian `float32`, C order, exactly two dimensions.

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use super::{write_atomically, Matrix};
use crate::error::{Error, Result};

pub const NPY_MAGIC: [u8; 6] = *b"\x93NUMPY";

/// Length of magic + version + u16 header length.
const PREAMBLE_LEN: usize = 10;
const ALIGN: usize = 64;

pub fn read_npy(path: impl AsRef<Path>) -> Result<Matrix> {
    let file = File::open(path)?;
    read_npy_from(BufReader::new(file))
}

pub fn read_npy_from<R: Read>(mut reader: R) -> Result<Matrix> {
    let mut preamble = [0u8; PREAMBLE_LEN];
    read_exact_or(&mut reader, &mut preamble, || {
        Error::MalformedHeader("file shorter than the npy preamble".into())
    })?;
    if preamble[..6] != NPY_MAGIC {
        return Err(Error::MalformedHeader("missing npy magic".into()));
    }
    if preamble[6..8] != [1, 0] {
        return Err(Error::MalformedHeader(format!(
            "unsupported npy version {}.{}",
            preamble[6], preamble[7]
        )));
    }
    let header_len = u16::from_le_bytes([preamble[8], preamble[9]]) as usize;
    let mut header = vec![0u8; header_len];
    read_exact_or(&mut reader, &mut header, || {
        Error::MalformedHeader("header shorter than its declared length".into())
    })?;
    let header = std::str::from_utf8(&header)
        .map_err(|_| Error::MalformedHeader("header is not ASCII".into()))?;
    let (rows, cols) = parse_header(header)?;
    if rows == 0 || cols == 0 {
        return Err(Error::EmptyMatrix);
    }

    let n_bytes = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| Error::MalformedHeader("shape overflows".into()))?;
    let mut payload = Vec::with_capacity(n_bytes.min(1 << 28));
    reader.by_ref().take(n_bytes as u64).read_to_end(&mut payload)?;
    if payload.len() < n_bytes {
        return Err(Error::TruncatedData {
            expected: n_bytes,
            found: payload.len(),
        });
    }
    let mut extra = [0u8; 1];
    if reader.read(&mut extra)? != 0 {
        return Err(Error::MalformedHeader(
            "trailing bytes after the array payload".into(),
        ));
    }

    let data: Vec<f32> = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    let m = Matrix::new(rows, cols, data)?;
    if let Some(i) = m.first_non_finite() {
        return Err(Error::NonFinite(i));
    }
    Ok(m)
}

pub fn write_npy(path: impl AsRef<Path>, m: &Matrix) -> Result<()> {
    validate_for_write(m)?;
    write_atomically(path.as_ref(), |w| write_npy_to(w, m))
}

pub fn write_npy_to<W: Write>(mut writer: W, m: &Matrix) -> Result<()> {
    validate_for_write(m)?;
    writer.write_all(&header_bytes(m.rows(), m.cols()))?;
    let mut buf = Vec::with_capacity(m.data().len() * 4);
    for v in m.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    writer.write_all(&buf)?;
    Ok(())
}

fn validate_for_write(m: &Matrix) -> Result<()> {
    if m.is_empty() {
        return Err(Error::EmptyMatrix);
    }
    if let Some(i) = m.first_non_finite() {
        return Err(Error::NonFinite(i));
    }
    Ok(())
}

/// Preamble plus the dict, space-padded and newline-terminated so the whole
/// header is a multiple of 64 bytes (the layout numpy itself produces).
fn header_bytes(rows: usize, cols: usize) -> Vec<u8> {
    let dict = format!("{{'descr': '<f4', 'fortran_order': False, 'shape': ({rows}, {cols}), }}");
    let unpadded = PREAMBLE_LEN + dict.len() + 1;
    let total = unpadded.div_ceil(ALIGN) * ALIGN;
    let header_len = total - PREAMBLE_LEN;

    let mut out = Vec::with_capacity(total);
    out.extend_from_slice(&NPY_MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(header_len as u16).to_le_bytes());
    out.extend_from_slice(dict.as_bytes());
    out.resize(total - 1, b' ');
    out.push(b'\n');
    out
}

fn read_exact_or<R: Read>(reader: &mut R, buf: &mut [u8], err: impl FnOnce() -> Error) -> Result<()> {
    match reader.read_exact(buf) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => Err(err()),
        Err(e) => Err(e.into()),
    }
}

#[derive(Debug, PartialEq)]
enum Value {
    Str(String),
    Bool(bool),
    Tuple(Vec<usize>),
}

/// Parses the Python-literal header dict and returns the 2-D shape.
fn parse_header(header: &str) -> Result<(usize, usize)> {
    let entries = parse_dict(header.trim_end())?;
    let mut descr = None;
    let mut fortran = None;
    let mut shape = None;
    for (key, value) in entries {
        match (key.as_str(), value) {
            ("descr", Value::Str(s)) => descr = Some(s),
            ("fortran_order", Value::Bool(b)) => fortran = Some(b),
            ("shape", Value::Tuple(t)) => shape = Some(t),
            (k, v) => {
                return Err(Error::MalformedHeader(format!(
                    "unexpected header entry {k:?}: {v:?}"
                )))
            }
        }
    }
    let descr = descr.ok_or_else(|| Error::MalformedHeader("missing 'descr'".into()))?;
    let fortran =
        fortran.ok_or_else(|| Error::MalformedHeader("missing 'fortran_order'".into()))?;
    let shape = shape.ok_or_else(|| Error::MalformedHeader("missing 'shape'".into()))?;

    if descr != "<f4" {
        return Err(Error::UnsupportedDtype(descr));
    }
    if fortran {
        return Err(Error::MalformedHeader(
            "Fortran-ordered arrays are not supported".into(),
        ));
    }
    match shape.as_slice() {
        [r, c] => Ok((*r, *c)),
        other => Err(Error::UnsupportedRank(other.len())),
    }
}

fn parse_dict(s: &str) -> Result<Vec<(String, Value)>> {
    let malformed = |what: &str| Error::MalformedHeader(what.to_string());
    let inner = s
        .strip_prefix('{')
        .and_then(|s| s.strip_suffix('}'))
        .ok_or_else(|| malformed("header is not a dict literal"))?;

    let mut out = Vec::new();
    let mut rest = inner.trim_start();
    while !rest.is_empty() {
        let (key, after) = parse_quoted(rest).ok_or_else(|| malformed("expected quoted key"))?;
        let after = after
            .trim_start()
            .strip_prefix(':')
            .ok_or_else(|| malformed("expected ':' after key"))?
            .trim_start();
        let (value, after) = parse_value(after).ok_or_else(|| malformed("unparseable value"))?;
        out.push((key, value));
        rest = after.trim_start();
        match rest.strip_prefix(',') {
            Some(r) => rest = r.trim_start(),
            None if rest.is_empty() => {}
            None => return Err(malformed("expected ',' between entries")),
        }
    }
    Ok(out)
}

fn parse_quoted(s: &str) -> Option<(String, &str)> {
    let quote = s.chars().next().filter(|c| *c == '\'' || *c == '"')?;
    let body = &s[1..];
    let end = body.find(quote)?;
    Some((body[..end].to_string(), &body[end + 1..]))
}

fn parse_value(s: &str) -> Option<(Value, &str)> {
    if let Some(r) = s.strip_prefix("True") {
        return Some((Value::Bool(true), r));
    }
    if let Some(r) = s.strip_prefix("False") {
        return Some((Value::Bool(false), r));
    }
    if let Some(body) = s.strip_prefix('(') {
        let end = body.find(')')?;
        let dims = body[..end]
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(|t| t.trim_end_matches('L').parse::<usize>().ok())
            .collect::<Option<Vec<_>>>()?;
        return Some((Value::Tuple(dims), &body[end + 1..]));
    }
    let (text, rest) = parse_quoted(s)?;
    Some((Value::Str(text), rest))
}
