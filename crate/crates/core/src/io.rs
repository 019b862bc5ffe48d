//! CSV output and the binary columnar path cache.
//!
//! Cache layout (little endian): magic `LMSVPATH`, `u32` version, `u64` rows,
//! `u32` columns, per column a `u16` name length and UTF-8 name, the SHA-256
//! of the data block, then each column as `rows` consecutive `f64`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};
use crate::sv_model::SvPath;

pub const CACHE_MAGIC: &[u8; 8] = b"LMSVPATH";
pub const CACHE_VERSION: u32 = 1;

/// Named `f64` columns of equal length.
#[derive(Debug, Clone, PartialEq)]
pub struct Columns {
    pub names: Vec<String>,
    pub data: Vec<Vec<f64>>,
}

impl Columns {
    pub fn new(names: Vec<String>, data: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != data.len() {
            return Err(invalid("one name per column"));
        }
        if data.windows(2).any(|w| w[0].len() != w[1].len()) {
            return Err(invalid("columns differ in length"));
        }
        Ok(Self { names, data })
    }

    pub fn rows(&self) -> usize {
        self.data.first().map_or(0, Vec::len)
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names.iter().position(|n| n == name).map(|k| self.data[k].as_slice())
    }

    /// `t, x, sigma, z, eta, y` with `t = 1..n`.
    pub fn from_path(path: &SvPath) -> Self {
        let t = (1..=path.len()).map(|k| k as f64).collect();
        let names = ["t", "x", "sigma", "z", "eta", "y"].map(String::from).to_vec();
        Self { names, data: vec![t, path.x.clone(), path.sigma.clone(), path.z.clone(), path.eta.clone(), path.y.clone()] }
    }
}

fn data_digest(cols: &Columns) -> [u8; 32] {
    let mut h = Sha256::new();
    for c in &cols.data {
        for v in c {
            h.update(v.to_le_bytes());
        }
    }
    h.finalize().into()
}

pub fn write_cache(path: &Path, cols: &Columns) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(CACHE_MAGIC)?;
    w.write_all(&CACHE_VERSION.to_le_bytes())?;
    w.write_all(&(cols.rows() as u64).to_le_bytes())?;
    w.write_all(&(cols.data.len() as u32).to_le_bytes())?;
    for name in &cols.names {
        let b = name.as_bytes();
        let len = u16::try_from(b.len()).map_err(|_| invalid("column name too long"))?;
        w.write_all(&len.to_le_bytes())?;
        w.write_all(b)?;
    }
    w.write_all(&data_digest(cols))?;
    for c in &cols.data {
        for v in c {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

fn read_array<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut b = [0u8; N];
    r.read_exact(&mut b)?;
    Ok(b)
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(format!("corrupt cache: {}", msg.into()))
}

/// Read a cache file, refusing unknown versions and checksum mismatches.
pub fn read_cache(path: &Path) -> Result<Columns> {
    let mut r = BufReader::new(File::open(path)?);
    if &read_array::<8>(&mut r)? != CACHE_MAGIC {
        return Err(corrupt("bad magic"));
    }
    let version = u32::from_le_bytes(read_array(&mut r)?);
    if version != CACHE_VERSION {
        return Err(corrupt(format!("version {version}, expected {CACHE_VERSION}")));
    }
    let rows = u64::from_le_bytes(read_array(&mut r)?) as usize;
    let ncols = u32::from_le_bytes(read_array(&mut r)?) as usize;
    let meta_len = std::fs::metadata(path)?.len();
    if (rows as u64).saturating_mul(ncols as u64).saturating_mul(8) > meta_len {
        return Err(corrupt("declared size exceeds file length"));
    }
    let mut names = Vec::with_capacity(ncols);
    for _ in 0..ncols {
        let len = u16::from_le_bytes(read_array(&mut r)?) as usize;
        let mut b = vec![0u8; len];
        r.read_exact(&mut b)?;
        names.push(String::from_utf8(b).map_err(|_| corrupt("column name is not UTF-8"))?);
    }
    let digest: [u8; 32] = read_array(&mut r)?;
    let mut data = Vec::with_capacity(ncols);
    for _ in 0..ncols {
        let mut col = Vec::with_capacity(rows);
        for _ in 0..rows {
            col.push(f64::from_le_bytes(read_array(&mut r)?));
        }
        data.push(col);
    }
    let cols = Columns { names, data };
    if data_digest(&cols) != digest {
        return Err(corrupt("checksum mismatch"));
    }
    Ok(cols)
}

/// CSV with a leading `# config_hash=<hash>` comment line.
pub fn write_csv(path: &Path, config_hash: &str, cols: &Columns) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# config_hash={config_hash}")?;
    writeln!(w, "{}", cols.names.join(","))?;
    for k in 0..cols.rows() {
        let row: Vec<String> = cols.data.iter().map(|c| format!("{:e}", c[k])).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// CSV of arbitrary string rows under `header`, with the config hash line.
pub fn write_csv_rows(path: &Path, config_hash: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# config_hash={config_hash}")?;
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        if row.len() != header.len() {
            return Err(invalid("row width differs from header"));
        }
        writeln!(w, "{}", row.join(","))?;
    }
    w.flush()?;
    Ok(())
}

/// Hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn flipped_byte_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.bin");
        let cols = Columns::new(vec!["a".into(), "b".into()], vec![vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        write_cache(&p, &cols).unwrap();
        let mut bytes = std::fs::read(&p).unwrap();
        let last = bytes.len() - 1;
        bytes[last] ^= 1;
        std::fs::write(&p, bytes).unwrap();
        assert!(read_cache(&p).is_err());
    }

    #[test]
    fn csv_has_hash_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.csv");
        let cols = Columns::new(vec!["a".into()], vec![vec![0.5]]).unwrap();
        write_csv(&p, "abc", &cols).unwrap();
        let s = std::fs::read_to_string(&p).unwrap();
        assert_eq!(s.lines().collect::<Vec<_>>(), ["# config_hash=abc", "a", "5e-1"]);
    }

    proptest! {
        #[test]
        fn cache_round_trip(data in proptest::collection::vec(proptest::collection::vec(-1e300f64..1e300, 7), 1..4)) {
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("c.bin");
            let names = (0..data.len()).map(|k| format!("c{k}")).collect();
            let cols = Columns::new(names, data).unwrap();
            write_cache(&p, &cols).unwrap();
            prop_assert_eq!(read_cache(&p).unwrap(), cols);
        }
    }
}
