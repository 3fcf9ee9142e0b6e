//! File formats for dense matrices and masked observations.
//!
//! Binary matrix (`LSMAT1`): the 6-byte magic, `rows` and `cols` as
//! little-endian `u64`, then `rows * cols` little-endian `f64` in row-major
//! order. Vectors are stored as one-column matrices.
//!
//! Binary masked data (`LSMSK1`): magic, `n`, `m`, `count` as `u64`, then
//! `count` index pairs `(i, j)` as `u64`, then `count` values as `f64`.
//!
//! CSV matrix: a first record `rows,cols`, then one record per row.
//! CSV masked data: header `i,j,value` and one record per observation, with
//! the shape in a sidecar file holding header `n,m` and one record.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::lowrank::MaskedData;
use crate::operators::{Matrix, Vector};

pub const MATRIX_MAGIC: &[u8; 6] = b"LSMAT1";
pub const MASK_MAGIC: &[u8; 6] = b"LSMSK1";
pub const MASK_CSV_HEADER: &str = "i,j,value";
pub const DIMS_CSV_HEADER: &str = "n,m";

fn format_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

fn csv_err(e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => format_err(format!("{other:?}")),
        }
    } else {
        format_err(e.to_string())
    }
}

/// Little-endian cursor over a byte slice.
struct Bytes<'a> {
    buf: &'a [u8],
    what: &'static str,
}

impl<'a> Bytes<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(format_err(format!("{}: truncated input", self.what)));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn magic(&mut self, magic: &[u8; 6]) -> Result<()> {
        if self.take(6)? != magic {
            return Err(format_err(format!(
                "{}: bad magic, expected {:?}",
                self.what,
                String::from_utf8_lossy(magic)
            )));
        }
        Ok(())
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn usize(&mut self) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| format_err(format!("{}: size {v} does not fit in memory", self.what)))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    /// Fail before allocating if `count` items of `width` bytes cannot be present.
    fn expect_items(&self, count: usize, width: usize) -> Result<()> {
        match count.checked_mul(width) {
            Some(n) if n <= self.buf.len() => Ok(()),
            _ => Err(format_err(format!(
                "{}: header promises {count} items but input is too short",
                self.what
            ))),
        }
    }

    fn finish(&self) -> Result<()> {
        if self.buf.is_empty() {
            Ok(())
        } else {
            Err(format_err(format!("{}: {} trailing bytes", self.what, self.buf.len())))
        }
    }
}

pub fn encode_matrix(m: &Matrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(22 + 8 * m.len());
    out.extend_from_slice(MATRIX_MAGIC);
    out.extend_from_slice(&(m.nrows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.ncols() as u64).to_le_bytes());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.extend_from_slice(&m[(i, j)].to_le_bytes());
        }
    }
    out
}

pub fn decode_matrix(bytes: &[u8]) -> Result<Matrix> {
    let mut b = Bytes {
        buf: bytes,
        what: "LSMAT1",
    };
    b.magic(MATRIX_MAGIC)?;
    let rows = b.usize()?;
    let cols = b.usize()?;
    let len = rows
        .checked_mul(cols)
        .ok_or_else(|| format_err(format!("LSMAT1: {rows} x {cols} overflows")))?;
    b.expect_items(len, 8)?;
    let mut data = Vec::with_capacity(len);
    for _ in 0..len {
        data.push(b.f64()?);
    }
    b.finish()?;
    Ok(Matrix::from_row_slice(rows, cols, &data))
}

pub fn encode_vector(v: &Vector) -> Vec<u8> {
    encode_matrix(&Matrix::from_column_slice(v.len(), 1, v.as_slice()))
}

pub fn decode_vector(bytes: &[u8]) -> Result<Vector> {
    let m = decode_matrix(bytes)?;
    if m.ncols() != 1 {
        return Err(format_err(format!("expected a one-column matrix, got {} columns", m.ncols())));
    }
    Ok(m.column(0).into_owned())
}

fn csv_reader(text: &str, headers: bool) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .has_headers(headers)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, k: usize, line: u64) -> Result<T> {
    let raw = rec
        .get(k)
        .ok_or_else(|| format_err(format!("line {line}: missing field {}", k + 1)))?;
    raw.parse().map_err(|_| format_err(format!("line {line}: cannot parse {raw:?}")))
}

fn line_of(rec: &csv::StringRecord) -> u64 {
    rec.position().map_or(0, |p| p.line())
}

fn expect_width(rec: &csv::StringRecord, width: usize) -> Result<()> {
    if rec.len() != width {
        return Err(format_err(format!(
            "line {}: expected {width} fields, found {}",
            line_of(rec),
            rec.len()
        )));
    }
    Ok(())
}

pub fn matrix_to_csv(m: &Matrix) -> String {
    let mut out = format!("{},{}\n", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| m[(i, j)].to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

pub fn matrix_from_csv(text: &str) -> Result<Matrix> {
    let mut records = csv_reader(text, false).into_records();
    let head = records.next().ok_or_else(|| format_err("matrix CSV is empty"))?.map_err(csv_err)?;
    expect_width(&head, 2)?;
    let rows: usize = field(&head, 0, line_of(&head))?;
    let cols: usize = field(&head, 1, line_of(&head))?;
    let mut data = Vec::new();
    let mut seen = 0usize;
    for rec in records {
        let rec = rec.map_err(csv_err)?;
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        expect_width(&rec, cols)?;
        seen += 1;
        if seen > rows {
            return Err(format_err(format!("matrix CSV has more than the declared {rows} rows")));
        }
        for k in 0..cols {
            data.push(field::<f64>(&rec, k, line_of(&rec))?);
        }
    }
    if seen != rows {
        return Err(format_err(format!("matrix CSV declares {rows} rows, found {seen}")));
    }
    Ok(Matrix::from_row_slice(rows, cols, &data))
}

pub fn encode_masked(data: &MaskedData) -> Vec<u8> {
    let (n, m) = data.dims();
    let mut out = Vec::with_capacity(30 + 24 * data.len());
    out.extend_from_slice(MASK_MAGIC);
    for v in [n, m, data.len()] {
        out.extend_from_slice(&(v as u64).to_le_bytes());
    }
    for &(i, j) in data.indices() {
        out.extend_from_slice(&(i as u64).to_le_bytes());
        out.extend_from_slice(&(j as u64).to_le_bytes());
    }
    for v in data.values().iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_masked(bytes: &[u8]) -> Result<MaskedData> {
    let mut b = Bytes {
        buf: bytes,
        what: "LSMSK1",
    };
    b.magic(MASK_MAGIC)?;
    let n = b.usize()?;
    let m = b.usize()?;
    let count = b.usize()?;
    b.expect_items(count, 24)?;
    let mut indices = Vec::with_capacity(count);
    for _ in 0..count {
        indices.push((b.usize()?, b.usize()?));
    }
    let mut values = Vec::with_capacity(count);
    for _ in 0..count {
        values.push(b.f64()?);
    }
    b.finish()?;
    MaskedData::new(n, m, indices, Vector::from_vec(values)).map_err(|e| format_err(format!("LSMSK1: {e}")))
}

/// Observation CSV and its dims sidecar, in that order.
pub fn masked_to_csv(data: &MaskedData) -> (String, String) {
    let mut body = format!("{MASK_CSV_HEADER}\n");
    for (&(i, j), v) in data.indices().iter().zip(data.values().iter()) {
        body.push_str(&format!("{i},{j},{v}\n"));
    }
    let (n, m) = data.dims();
    (body, format!("{DIMS_CSV_HEADER}\n{n},{m}\n"))
}

fn check_header(reader: &mut csv::Reader<&[u8]>, expected: &str) -> Result<()> {
    let got = reader.headers().map_err(csv_err)?;
    let got: Vec<&str> = got.iter().collect();
    if got.join(",") != expected {
        return Err(format_err(format!("expected header {expected:?}, found {:?}", got.join(","))));
    }
    Ok(())
}

pub fn masked_from_csv(body: &str, dims: &str) -> Result<MaskedData> {
    let mut dims_reader = csv_reader(dims, true);
    check_header(&mut dims_reader, DIMS_CSV_HEADER)?;
    let rec = dims_reader
        .records()
        .next()
        .ok_or_else(|| format_err("dims file has no record"))?
        .map_err(csv_err)?;
    expect_width(&rec, 2)?;
    let n: usize = field(&rec, 0, line_of(&rec))?;
    let m: usize = field(&rec, 1, line_of(&rec))?;

    let mut reader = csv_reader(body, true);
    check_header(&mut reader, MASK_CSV_HEADER)?;
    let mut indices = Vec::new();
    let mut values = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(csv_err)?;
        expect_width(&rec, 3)?;
        let line = line_of(&rec);
        indices.push((field(&rec, 0, line)?, field(&rec, 1, line)?));
        values.push(field::<f64>(&rec, 2, line)?);
    }
    MaskedData::new(n, m, indices, Vector::from_vec(values)).map_err(|e| format_err(e.to_string()))
}

/// Reads a matrix from `path`, as `LSMAT1` if the magic matches and as CSV
/// otherwise.
pub fn read_matrix(path: &Path) -> Result<Matrix> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(MATRIX_MAGIC) {
        decode_matrix(&bytes)
    } else {
        let text = String::from_utf8(bytes).map_err(|_| format_err(format!("{}: neither LSMAT1 nor UTF-8 CSV", path.display())))?;
        matrix_from_csv(&text)
    }
}

pub fn write_matrix(path: &Path, m: &Matrix, binary: bool) -> Result<()> {
    let mut f = fs::File::create(path)?;
    if binary {
        f.write_all(&encode_matrix(m))?;
    } else {
        f.write_all(matrix_to_csv(m).as_bytes())?;
    }
    Ok(())
}
