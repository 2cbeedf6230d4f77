//! `TNSR v1` tensor container.
//!
//! A record is an ASCII header line `TNSR v1 <ndims> <d0> <d1> ...` followed by
//! a newline and the row-major payload as little-endian 32-bit floats. Bundles
//! concatenate records in one `.tnsr` file and list their names, one per line
//! as `name=index`, in a sibling `.manifest` file.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

const MAGIC: &str = "TNSR";
const VERSION: &str = "v1";

pub fn write_tensor<S: Scalar, W: Write>(w: &mut W, t: &Tensor<S>) -> Result<()> {
    let mut header = format!("{MAGIC} {VERSION} {}", t.ndim());
    for d in t.dims() {
        header.push_str(&format!(" {d}"));
    }
    header.push('\n');
    w.write_all(header.as_bytes())?;
    let mut buf = Vec::with_capacity(t.len() * 4);
    for &v in t.data() {
        buf.extend_from_slice(&v.to_le_f32());
    }
    w.write_all(&buf)?;
    Ok(())
}

/// Reads one record. Returns `Ok(None)` at a clean end of stream.
pub fn read_tensor<S: Scalar, R: BufRead>(r: &mut R) -> Result<Option<Tensor<S>>> {
    let mut line = Vec::new();
    if r.read_until(b'\n', &mut line)? == 0 {
        return Ok(None);
    }
    if line.last() != Some(&b'\n') {
        return Err(Error::format("truncated TNSR header"));
    }
    line.pop();
    let header = std::str::from_utf8(&line).map_err(|_| Error::format("TNSR header is not ASCII"))?;
    let mut fields = header.split(' ');
    if fields.next() != Some(MAGIC) || fields.next() != Some(VERSION) {
        return Err(Error::format(format!("bad TNSR header {header:?}")));
    }
    let parse = |s: Option<&str>| -> Result<usize> {
        s.and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::format(format!("bad TNSR header {header:?}")))
    };
    let ndims = parse(fields.next())?;
    let dims = (0..ndims).map(|_| parse(fields.next())).collect::<Result<Vec<_>>>()?;
    if fields.next().is_some() {
        return Err(Error::format(format!("trailing fields in TNSR header {header:?}")));
    }
    let n: usize = dims.iter().product();
    let mut raw = vec![0u8; n * 4];
    r.read_exact(&mut raw)?;
    let data = raw
        .chunks_exact(4)
        .map(|c| S::of(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64))
        .collect();
    Tensor::new(dims, data).map(Some)
}

pub fn save<S: Scalar>(path: impl AsRef<Path>, t: &Tensor<S>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_tensor(&mut w, t)?;
    w.flush()?;
    Ok(())
}

pub fn load<S: Scalar>(path: impl AsRef<Path>) -> Result<Tensor<S>> {
    let path = path.as_ref();
    let mut r = BufReader::new(File::open(path)?);
    read_tensor(&mut r)?.ok_or_else(|| Error::format(format!("{} is empty", path.display())))
}

fn bundle_paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("tnsr"), stem.with_extension("manifest"))
}

/// Writes `<stem>.tnsr` and `<stem>.manifest`.
pub fn save_bundle<S: Scalar>(stem: impl AsRef<Path>, entries: &[(String, &Tensor<S>)]) -> Result<()> {
    let (data_path, manifest_path) = bundle_paths(stem.as_ref());
    let mut data = BufWriter::new(File::create(data_path)?);
    let mut manifest = BufWriter::new(File::create(manifest_path)?);
    for (i, (name, t)) in entries.iter().enumerate() {
        if name.is_empty() || name.contains(['=', '\n']) {
            return Err(Error::invalid(format!("unusable tensor name {name:?}")));
        }
        write_tensor(&mut data, t)?;
        writeln!(manifest, "{name}={i}")?;
    }
    data.flush()?;
    manifest.flush()?;
    Ok(())
}

/// Loads a bundle written by [`save_bundle`], in manifest order.
pub fn load_bundle<S: Scalar>(stem: impl AsRef<Path>) -> Result<Vec<(String, Tensor<S>)>> {
    let (data_path, manifest_path) = bundle_paths(stem.as_ref());
    let mut records = Vec::new();
    let mut r = BufReader::new(File::open(&data_path)?);
    while let Some(t) = read_tensor::<S, _>(&mut r)? {
        records.push(Some(t));
    }
    let manifest = std::fs::read_to_string(&manifest_path)?;
    let mut out = Vec::new();
    for line in manifest.lines().filter(|l| !l.trim().is_empty()) {
        let (name, idx) = line
            .split_once('=')
            .ok_or_else(|| Error::format(format!("bad manifest line {line:?}")))?;
        let idx: usize = idx
            .trim()
            .parse()
            .map_err(|_| Error::format(format!("bad manifest index in {line:?}")))?;
        let t = records
            .get_mut(idx)
            .and_then(Option::take)
            .ok_or_else(|| Error::format(format!("manifest entry {name} points at missing record {idx}")))?;
        out.push((name.trim().to_string(), t));
    }
    Ok(out)
}
