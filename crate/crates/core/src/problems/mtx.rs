//! Matrix Market reader and writer.
//!
//! Reads real/integer coordinate and array files with general, symmetric or
//! skew-symmetric storage. Complex array files are read only through
//! [`read_complex_dense`], which exists for reduced models written by this
//! crate. Values are written with 17 significant digits so a write/read round
//! trip reproduces every `f64` exactly.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{MorError, Result};
use crate::linalg::sparse::CscMatrix;
use crate::linalg::{CMat, RMat};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Coordinate,
    Array,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    Real,
    Integer,
    Complex,
    Pattern,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symmetry {
    General,
    Symmetric,
    SkewSymmetric,
    Hermitian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Header {
    pub format: Format,
    pub field: Field,
    pub symmetry: Symmetry,
}

/// Parsed file with symmetric storage already expanded. Entries are
/// zero-based `(row, col, value)`; array files list every stored entry.
#[derive(Debug, Clone)]
pub struct MtxMatrix {
    pub header: Header,
    pub nrows: usize,
    pub ncols: usize,
    pub entries: Vec<(usize, usize, Complex64)>,
}

impl MtxMatrix {
    fn require_real(&self, what: &str) -> Result<()> {
        match self.header.field {
            Field::Real | Field::Integer => Ok(()),
            Field::Complex => Err(MorError::Unsupported(format!("complex {what} matrices"))),
            Field::Pattern => Err(MorError::Unsupported(format!("pattern {what} matrices"))),
        }
    }

    pub fn to_csc(&self) -> Result<CscMatrix> {
        self.require_real("system")?;
        let t: Vec<_> = self.entries.iter().map(|&(i, j, v)| (i, j, v.re)).collect();
        Ok(CscMatrix::from_triplets(self.nrows, self.ncols, &t))
    }

    pub fn to_dense(&self) -> Result<RMat> {
        self.require_real("dense")?;
        let mut m = RMat::zeros(self.nrows, self.ncols);
        for &(i, j, v) in &self.entries {
            m[(i, j)] += v.re;
        }
        Ok(m)
    }

    pub fn to_complex_dense(&self) -> Result<CMat> {
        if self.header.field == Field::Pattern {
            return Err(MorError::Unsupported("pattern matrices".into()));
        }
        let mut m = CMat::zeros(self.nrows, self.ncols);
        for &(i, j, v) in &self.entries {
            m[(i, j)] += v;
        }
        Ok(m)
    }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> MorError {
    MorError::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> MorError + '_ {
    move |source| MorError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_header(line: &str, path: &Path) -> Result<Header> {
    let words: Vec<String> = line.split_whitespace().map(|w| w.to_ascii_lowercase()).collect();
    if words.len() != 5 || words[0] != "%%matrixmarket" || words[1] != "matrix" {
        return Err(parse_err(path, 1, "expected '%%MatrixMarket matrix <format> <field> <symmetry>'"));
    }
    let format = match words[2].as_str() {
        "coordinate" => Format::Coordinate,
        "array" => Format::Array,
        other => return Err(parse_err(path, 1, format!("unknown format '{other}'"))),
    };
    let field = match words[3].as_str() {
        "real" | "double" => Field::Real,
        "integer" => Field::Integer,
        "complex" => Field::Complex,
        "pattern" => Field::Pattern,
        other => return Err(parse_err(path, 1, format!("unknown field '{other}'"))),
    };
    let symmetry = match words[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        "skew-symmetric" => Symmetry::SkewSymmetric,
        "hermitian" => Symmetry::Hermitian,
        other => return Err(parse_err(path, 1, format!("unknown symmetry '{other}'"))),
    };
    if format == Format::Array && field == Field::Pattern {
        return Err(parse_err(path, 1, "pattern field is only valid for coordinate files"));
    }
    if symmetry == Symmetry::Hermitian && field != Field::Complex {
        return Err(parse_err(path, 1, "hermitian symmetry requires a complex field"));
    }
    Ok(Header {
        format,
        field,
        symmetry,
    })
}

fn parse_usize(tok: &str, path: &Path, line: usize) -> Result<usize> {
    tok.parse()
        .map_err(|_| parse_err(path, line, format!("expected a nonnegative integer, found '{tok}'")))
}

fn parse_f64(tok: &str, path: &Path, line: usize) -> Result<f64> {
    tok.parse()
        .map_err(|_| parse_err(path, line, format!("expected a number, found '{tok}'")))
}

fn parse_value<'a>(
    toks: &mut impl Iterator<Item = &'a str>,
    field: Field,
    path: &Path,
    line: usize,
) -> Result<Complex64> {
    let mut next = || toks.next().ok_or_else(|| parse_err(path, line, "missing value"));
    match field {
        Field::Pattern => Ok(Complex64::new(1.0, 0.0)),
        Field::Real | Field::Integer => Ok(Complex64::new(parse_f64(next()?, path, line)?, 0.0)),
        Field::Complex => {
            let re = parse_f64(next()?, path, line)?;
            let im = parse_f64(next()?, path, line)?;
            Ok(Complex64::new(re, im))
        }
    }
}

/// Mirror image of an off-diagonal entry under the header's symmetry.
fn mirrored(sym: Symmetry, v: Complex64) -> Option<Complex64> {
    match sym {
        Symmetry::General => None,
        Symmetry::Symmetric => Some(v),
        Symmetry::SkewSymmetric => Some(-v),
        Symmetry::Hermitian => Some(v.conj()),
    }
}

pub fn parse<R: BufRead>(reader: R, path: &Path) -> Result<MtxMatrix> {
    let mut lines = reader.lines().enumerate().map(|(k, l)| (k + 1, l));
    let header = match lines.next() {
        Some((_, l)) => parse_header(&l.map_err(io_err(path))?, path)?,
        None => return Err(parse_err(path, 1, "empty file")),
    };
    let mut data = Vec::new();
    for (no, l) in lines {
        let l = l.map_err(io_err(path))?;
        let t = l.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        data.push((no, l));
    }
    let mut it = data.iter();
    let (size_line, size) = it.next().ok_or_else(|| parse_err(path, 1, "missing size line"))?;
    let dims: Vec<&str> = size.split_whitespace().collect();
    let want = if header.format == Format::Coordinate { 3 } else { 2 };
    if dims.len() != want {
        return Err(parse_err(path, *size_line, format!("size line needs {want} integers")));
    }
    let nrows = parse_usize(dims[0], path, *size_line)?;
    let ncols = parse_usize(dims[1], path, *size_line)?;
    if header.symmetry != Symmetry::General && nrows != ncols {
        return Err(parse_err(path, *size_line, "symmetric storage requires a square matrix"));
    }
    let mut entries = Vec::new();
    match header.format {
        Format::Coordinate => {
            let nnz = parse_usize(dims[2], path, *size_line)?;
            entries.reserve(nnz);
            let mut count = 0;
            for (no, l) in it {
                let mut toks = l.split_whitespace();
                let mut index = |name: &str| -> Result<usize> {
                    let tok = toks.next().ok_or_else(|| parse_err(path, *no, format!("missing {name} index")))?;
                    let k = parse_usize(tok, path, *no)?;
                    if k == 0 {
                        return Err(parse_err(path, *no, format!("{name} index is 1-based, found 0")));
                    }
                    Ok(k - 1)
                };
                let i = index("row")?;
                let j = index("column")?;
                if i >= nrows || j >= ncols {
                    return Err(parse_err(path, *no, format!("entry ({}, {}) outside {nrows}x{ncols}", i + 1, j + 1)));
                }
                let v = parse_value(&mut toks, header.field, path, *no)?;
                if toks.next().is_some() {
                    return Err(parse_err(path, *no, "trailing tokens"));
                }
                if header.symmetry != Symmetry::General && j > i {
                    return Err(parse_err(path, *no, "symmetric storage must list the lower triangle only"));
                }
                entries.push((i, j, v));
                if i != j {
                    if let Some(w) = mirrored(header.symmetry, v) {
                        entries.push((j, i, w));
                    }
                }
                count += 1;
            }
            if count != nnz {
                let last = data.last().map_or(*size_line, |d| d.0);
                return Err(parse_err(path, last, format!("expected {nnz} entries, found {count}")));
            }
        }
        Format::Array => {
            let positions: Vec<(usize, usize)> = match header.symmetry {
                Symmetry::General => (0..ncols).flat_map(|j| (0..nrows).map(move |i| (i, j))).collect(),
                Symmetry::SkewSymmetric => (0..ncols).flat_map(|j| (j + 1..nrows).map(move |i| (i, j))).collect(),
                _ => (0..ncols).flat_map(|j| (j..nrows).map(move |i| (i, j))).collect(),
            };
            let mut pos = positions.iter();
            for (no, l) in it {
                let mut toks = l.split_whitespace().peekable();
                while toks.peek().is_some() {
                    let v = parse_value(&mut toks, header.field, path, *no)?;
                    let &(i, j) = pos
                        .next()
                        .ok_or_else(|| parse_err(path, *no, format!("more than {} values", positions.len())))?;
                    entries.push((i, j, v));
                    if i != j {
                        if let Some(w) = mirrored(header.symmetry, v) {
                            entries.push((j, i, w));
                        }
                    }
                }
            }
            if pos.next().is_some() {
                let last = data.last().map_or(*size_line, |d| d.0);
                return Err(parse_err(path, last, format!("expected {} values", positions.len())));
            }
        }
    }
    Ok(MtxMatrix {
        header,
        nrows,
        ncols,
        entries,
    })
}

pub fn read<P: AsRef<Path>>(path: P) -> Result<MtxMatrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(io_err(path))?;
    parse(BufReader::new(file), path)
}

pub fn read_sparse<P: AsRef<Path>>(path: P) -> Result<CscMatrix> {
    read(path)?.to_csc()
}

pub fn read_dense<P: AsRef<Path>>(path: P) -> Result<RMat> {
    read(path)?.to_dense()
}

pub fn read_complex_dense<P: AsRef<Path>>(path: P) -> Result<CMat> {
    read(path)?.to_complex_dense()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

/// Coordinate real general, entries in column order.
pub fn write_sparse_to<W: Write>(out: &mut W, a: &CscMatrix) -> std::io::Result<()> {
    writeln!(out, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(out, "{} {} {}", a.nrows(), a.ncols(), a.nnz())?;
    for j in 0..a.ncols() {
        for (i, v) in a.column(j) {
            writeln!(out, "{} {} {:.16e}", i + 1, j + 1, v)?;
        }
    }
    Ok(())
}

/// Array real general, column-major.
pub fn write_dense_to<W: Write>(out: &mut W, m: &RMat) -> std::io::Result<()> {
    writeln!(out, "%%MatrixMarket matrix array real general")?;
    writeln!(out, "{} {}", m.nrows(), m.ncols())?;
    for v in m.iter() {
        writeln!(out, "{v:.16e}")?;
    }
    Ok(())
}

/// Array complex general, column-major.
pub fn write_complex_dense_to<W: Write>(out: &mut W, m: &CMat) -> std::io::Result<()> {
    writeln!(out, "%%MatrixMarket matrix array complex general")?;
    writeln!(out, "{} {}", m.nrows(), m.ncols())?;
    for v in m.iter() {
        writeln!(out, "{:.16e} {:.16e}", v.re, v.im)?;
    }
    Ok(())
}

fn write_with<P: AsRef<Path>>(path: P, f: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let path = path.as_ref();
    let mut out = create(path)?;
    f(&mut out).and_then(|_| out.flush()).map_err(io_err(path))
}

pub fn write_sparse<P: AsRef<Path>>(path: P, a: &CscMatrix) -> Result<()> {
    write_with(path, |o| write_sparse_to(o, a))
}

pub fn write_dense<P: AsRef<Path>>(path: P, m: &RMat) -> Result<()> {
    write_with(path, |o| write_dense_to(o, m))
}

pub fn write_complex_dense<P: AsRef<Path>>(path: P, m: &CMat) -> Result<()> {
    write_with(path, |o| write_complex_dense_to(o, m))
}
