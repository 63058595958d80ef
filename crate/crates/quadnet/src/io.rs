//! Dataset container: a little-endian binary file plus a JSON sidecar.
//!
//! Layout of the binary file:
//!
//! ```text
//! magic      8 bytes   "QNDSET01"
//! dim        u64
//! samples    u64
//! width      u64       teacher units m*
//! seed       u64
//! mode       u64       0 gaussian, 1 goe
//! noise      f64
//! in_cols    u64       columns of the input block
//! W*         m* × d    f64, row-major
//! S*         d × d     f64, row-major
//! inputs     n × in_cols
//! labels     n
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, DatasetSpec, SensingMode};
use crate::error::SimError;

pub const MAGIC: &[u8; 8] = b"QNDSET01";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayInfo {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    /// Byte offset in the binary file.
    pub offset: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub format: String,
    pub spec: DatasetSpec,
    pub alpha: f64,
    pub kappa_star: f64,
    pub arrays: Vec<ArrayInfo>,
}

/// `data.bin` gets the sidecar `data.bin.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

const HEADER_BYTES: u64 = 8 + 8 * 7;

pub fn write_dataset(path: &Path, ds: &Dataset) -> Result<(), SimError> {
    let spec = &ds.spec;
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(MAGIC)?;
    let mode = match spec.mode {
        SensingMode::Gaussian => 0u64,
        SensingMode::Goe => 1,
    };
    for v in [
        spec.dim as u64,
        spec.samples as u64,
        spec.target_width as u64,
        spec.seed,
        mode,
    ] {
        out.write_all(&v.to_le_bytes())?;
    }
    out.write_all(&spec.noise.to_le_bytes())?;
    out.write_all(&(ds.inputs.ncols() as u64).to_le_bytes())?;

    let mut arrays = Vec::new();
    let mut offset = HEADER_BYTES;
    for (name, m) in [
        ("target_weights", &ds.target_weights),
        ("target", &ds.target),
        ("inputs", &ds.inputs),
    ] {
        write_rows(&mut out, m)?;
        arrays.push(ArrayInfo {
            name: name.into(),
            rows: m.nrows(),
            cols: m.ncols(),
            offset,
        });
        offset += 8 * m.len() as u64;
    }
    for x in ds.labels.iter() {
        out.write_all(&x.to_le_bytes())?;
    }
    arrays.push(ArrayInfo {
        name: "labels".into(),
        rows: ds.labels.len(),
        cols: 1,
        offset,
    });
    out.flush()?;

    let sidecar = Sidecar {
        format: String::from_utf8_lossy(MAGIC).into_owned(),
        spec: *spec,
        alpha: ds.alpha(),
        kappa_star: ds.kappa_star(),
        arrays,
    };
    let json = serde_json::to_string_pretty(&sidecar)?;
    std::fs::write(sidecar_path(path), json)?;
    Ok(())
}

fn write_rows(out: &mut impl Write, m: &DMatrix<f64>) -> Result<(), SimError> {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.write_all(&m[(i, j)].to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u64(r: &mut impl Read) -> Result<u64, SimError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64, SimError> {
    Ok(f64::from_bits(read_u64(r)?))
}

fn read_rows(r: &mut impl Read, rows: usize, cols: usize) -> Result<DMatrix<f64>, SimError> {
    let mut m = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = read_f64(r)?;
        }
    }
    Ok(m)
}

fn size(v: u64, what: &str) -> Result<usize, SimError> {
    usize::try_from(v).map_err(|_| SimError::Format(format!("{what} = {v} does not fit")))
}

pub fn read_dataset(path: &Path) -> Result<Dataset, SimError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(SimError::Format("bad magic".into()));
    }
    let dim = size(read_u64(&mut r)?, "dim")?;
    let samples = size(read_u64(&mut r)?, "samples")?;
    let target_width = size(read_u64(&mut r)?, "width")?;
    let seed = read_u64(&mut r)?;
    let mode = match read_u64(&mut r)? {
        0 => SensingMode::Gaussian,
        1 => SensingMode::Goe,
        m => return Err(SimError::Format(format!("unknown mode tag {m}"))),
    };
    let noise = read_f64(&mut r)?;
    let in_cols = size(read_u64(&mut r)?, "in_cols")?;
    let expected_cols = match mode {
        SensingMode::Gaussian => dim,
        SensingMode::Goe => dim * (dim + 1) / 2,
    };
    if in_cols != expected_cols {
        return Err(SimError::Format(format!(
            "{in_cols} input columns, expected {expected_cols}"
        )));
    }
    let body = [
        target_width.checked_mul(dim),
        dim.checked_mul(dim),
        samples.checked_mul(in_cols),
        Some(samples),
    ]
    .into_iter()
    .try_fold(0usize, |acc, n| n.and_then(|n| acc.checked_add(n)))
    .and_then(|n| (n as u64).checked_mul(8))
    .and_then(|n| n.checked_add(HEADER_BYTES))
    .ok_or_else(|| SimError::Format("header sizes overflow".into()))?;
    let actual = std::fs::metadata(path)?.len();
    if actual != body {
        return Err(SimError::Format(format!("file has {actual} bytes, header implies {body}")));
    }
    let target_weights = read_rows(&mut r, target_width, dim)?;
    let target = read_rows(&mut r, dim, dim)?;
    let inputs = read_rows(&mut r, samples, in_cols)?;
    let labels = DVector::from_iterator(
        samples,
        (0..samples).map(|_| read_f64(&mut r)).collect::<Result<Vec<_>, _>>()?,
    );
    Ok(Dataset {
        spec: DatasetSpec {
            dim,
            samples,
            target_width,
            noise,
            seed,
            mode,
        },
        inputs,
        labels,
        target_weights,
        target,
    })
}

pub fn read_sidecar(path: &Path) -> Result<Sidecar, SimError> {
    let text = std::fs::read_to_string(sidecar_path(path))?;
    Ok(serde_json::from_str(&text)?)
}
