//! Binary bank format, CSV import and descriptor-group files.
//!
//! Binary layout (little-endian):
//!
//! ```text
//! "CSKB"            4 bytes
//! version           u32 (= 1)
//! n_kernels         u32
//! n_samples         u32
//! label encoding    u8  (0 = i8 in {+1,-1}, 1 = i32 class ids)
//! labels            n_samples * (1 | 4) bytes
//! per kernel:
//!   spec tag        u8  (0 precomputed, 1 gaussian, 2 polynomial, 3 linear)
//!   params          2 x f64
//!   values          n_samples^2 x f64, row-major
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;

use super::{GramMatrix, KernelBank, KernelKind, KernelSpec};
use crate::error::{Error, FormatError, Result};

const MAGIC: &[u8; 4] = b"CSKB";
const VERSION: u32 = 1;

/// Serializes a bank into the binary format.
pub fn write_bank(bank: &KernelBank) -> Vec<u8> {
    let m = bank.samples();
    let binary = bank.is_binary();
    let mut out = Vec::with_capacity(17 + m * 4 + bank.len() * (17 + m * m * 8));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(bank.len() as u32).to_le_bytes());
    out.extend_from_slice(&(m as u32).to_le_bytes());
    if binary {
        out.push(0);
        out.extend(bank.labels().iter().map(|&l| (l as i8) as u8));
    } else {
        out.push(1);
        for &l in bank.labels() {
            out.extend_from_slice(&l.to_le_bytes());
        }
    }
    for k in bank.kernels() {
        let (tag, p0, p1) = match k.source().map(|s| s.kind) {
            None => (0u8, 0.0, 0.0),
            Some(KernelKind::Gaussian { width }) => (1, width, 0.0),
            Some(KernelKind::Polynomial { degree, offset }) => (2, degree as f64, offset),
            Some(KernelKind::Linear) => (3, 0.0, 0.0),
        };
        out.push(tag);
        out.extend_from_slice(&f64::to_le_bytes(p0));
        out.extend_from_slice(&f64::to_le_bytes(p1));
        for v in k.values().iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(
        &mut self,
        n: usize,
        needed_total: usize,
    ) -> std::result::Result<&'a [u8], FormatError> {
        if self.pos + n > self.bytes.len() {
            return Err(FormatError::Truncated {
                needed: needed_total,
                found: self.bytes.len(),
            });
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u8(&mut self, total: usize) -> std::result::Result<u8, FormatError> {
        Ok(self.take(1, total)?[0])
    }

    fn u32(&mut self, total: usize) -> std::result::Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4, total)?.try_into().unwrap()))
    }

    fn f64(&mut self, total: usize) -> std::result::Result<f64, FormatError> {
        Ok(f64::from_le_bytes(self.take(8, total)?.try_into().unwrap()))
    }
}

/// Parses a bank from the binary format.
pub fn read_bank(bytes: &[u8]) -> Result<KernelBank> {
    const HEADER: usize = 17;
    let mut r = Reader { bytes, pos: 0 };
    let magic: [u8; 4] = r.take(4, HEADER)?.try_into().unwrap();
    if &magic != MAGIC {
        return Err(FormatError::BadMagic(magic).into());
    }
    let version = r.u32(HEADER)?;
    if version != VERSION {
        return Err(FormatError::UnsupportedVersion(version).into());
    }
    let n = r.u32(HEADER)? as usize;
    let m = r.u32(HEADER)? as usize;
    if n == 0 || m == 0 {
        return Err(FormatError::Dimension(format!("{n} kernels over {m} samples")).into());
    }
    let encoding = r.u8(HEADER)?;
    let label_width = match encoding {
        0 => 1,
        1 => 4,
        other => return Err(FormatError::Corrupt(format!("label encoding {other}")).into()),
    };
    let total = HEADER + m * label_width + n * (17 + m * m * 8);
    let mut labels = Vec::with_capacity(m);
    for _ in 0..m {
        let l = if encoding == 0 {
            let l = r.u8(total)? as i8 as i32;
            if l != 1 && l != -1 {
                return Err(FormatError::Corrupt(format!("binary label {l}")).into());
            }
            l
        } else {
            i32::from_le_bytes(r.take(4, total)?.try_into().unwrap())
        };
        labels.push(l);
    }
    let mut kernels = Vec::with_capacity(n);
    for _ in 0..n {
        let tag = r.u8(total)?;
        let p0 = r.f64(total)?;
        let p1 = r.f64(total)?;
        let kind = match tag {
            0 => None,
            1 => Some(KernelKind::Gaussian { width: p0 }),
            2 => Some(KernelKind::Polynomial {
                degree: p0 as u32,
                offset: p1,
            }),
            3 => Some(KernelKind::Linear),
            other => return Err(FormatError::Corrupt(format!("kernel spec tag {other}")).into()),
        };
        let raw = r.take(m * m * 8, total)?;
        let values: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let values = Array2::from_shape_vec((m, m), values).expect("length checked");
        let source = kind.map(|kind| KernelSpec {
            kind,
            features: None,
        });
        kernels.push(GramMatrix::new(values, source)?);
    }
    if r.pos != bytes.len() {
        return Err(FormatError::Dimension(format!(
            "{} trailing bytes after {n} kernels of {m} samples",
            bytes.len() - r.pos
        ))
        .into());
    }
    KernelBank::new(kernels, labels)
}

/// Writes `bank` to `path` through a temporary file and rename.
pub fn save_bank(bank: &KernelBank, path: &Path) -> Result<()> {
    write_atomic(path, &write_bank(bank))
}

pub fn load_bank(path: &Path) -> Result<KernelBank> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_bank(&bytes)
}

pub(crate) fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    let mut file = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    file.write_all(contents).map_err(|e| Error::io(&tmp, e))?;
    file.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn csv_reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::invalid(format!("{}: {e}", path.display()))
}

fn read_csv_matrix(path: &Path) -> Result<Array2<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in csv_reader(path)?.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let row = record
            .iter()
            .map(|field| {
                field.parse::<f64>().map_err(|_| {
                    Error::invalid(format!(
                        "{}: cannot parse {field:?} as a number",
                        path.display()
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let m = rows.len();
    if let Some(row) = rows.iter().find(|r| r.len() != m) {
        return Err(FormatError::Dimension(format!(
            "{}: expected {m} columns per row, found {}",
            path.display(),
            row.len()
        ))
        .into());
    }
    Ok(Array2::from_shape_vec((m, m), rows.into_iter().flatten().collect()).expect("square"))
}

fn read_csv_labels(path: &Path) -> Result<Vec<i32>> {
    let mut labels = Vec::new();
    for record in csv_reader(path)?.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        for field in record.iter().filter(|f| !f.is_empty()) {
            let l = field.parse::<i32>().map_err(|_| {
                Error::invalid(format!("{}: cannot parse label {field:?}", path.display()))
            })?;
            labels.push(l);
        }
    }
    Ok(labels)
}

/// Builds a bank from one CSV file per kernel (m rows of m values) plus a
/// labels file (one integer per line, or comma separated).
pub fn load_csv_bank(kernel_paths: &[impl AsRef<Path>], labels_path: &Path) -> Result<KernelBank> {
    let labels = read_csv_labels(labels_path)?;
    let kernels = kernel_paths
        .iter()
        .map(|p| GramMatrix::new(read_csv_matrix(p.as_ref())?, None))
        .collect::<Result<Vec<_>>>()?;
    KernelBank::new(kernels, labels)
}

/// Reads `kernel_index,group_name` lines; every kernel in `0..n_kernels`
/// must be assigned exactly once.
pub fn read_groups(path: &Path, n_kernels: usize) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut groups: Vec<Option<String>> = vec![None; n_kernels];
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = || {
            Error::invalid(format!(
                "{}:{}: expected \"kernel_index,group_name\"",
                path.display(),
                lineno + 1
            ))
        };
        let (idx, name) = line.split_once(',').ok_or_else(bad)?;
        let idx: usize = idx.trim().parse().map_err(|_| bad())?;
        if idx >= n_kernels {
            return Err(Error::invalid(format!(
                "{}:{}: kernel index {idx} out of range for {n_kernels} kernels",
                path.display(),
                lineno + 1
            )));
        }
        if groups[idx].replace(name.trim().to_string()).is_some() {
            return Err(Error::invalid(format!(
                "{}: kernel {idx} assigned twice",
                path.display()
            )));
        }
    }
    groups
        .into_iter()
        .enumerate()
        .map(|(i, g)| {
            g.ok_or_else(|| Error::invalid(format!("{}: kernel {i} has no group", path.display())))
        })
        .collect()
}

pub fn write_groups(groups: &[String]) -> String {
    groups
        .iter()
        .enumerate()
        .map(|(i, g)| format!("{i},{g}\n"))
        .collect()
}
