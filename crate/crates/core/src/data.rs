//! Points, weight vectors, datasets, and the dataset file formats.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::OnceLock;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const DATASET_MAGIC: &[u8; 8] = b"WLSHDATA";
pub const DATASET_VERSION: u32 = 1;

/// A point of the search space. Stored dataset points have integer
/// coordinates; query points may carry arbitrary reals.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub id: u32,
    pub coords: Vec<f64>,
}

impl Point {
    pub fn new(id: u32, coords: Vec<f64>) -> Self {
        Point { id, coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }
}

/// A strictly positive per-dimension weight vector identifying a weighted
/// distance function.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    pub id: u32,
    pub weights: Vec<f64>,
}

impl WeightVector {
    pub fn new(id: u32, weights: Vec<f64>) -> Result<Self> {
        for (index, &value) in weights.iter().enumerate() {
            if !(value > 0.0) || !value.is_finite() {
                return Err(Error::NonPositiveWeight { index, value });
            }
        }
        if weights.is_empty() {
            return Err(Error::InvalidParameter("empty weight vector".into()));
        }
        Ok(WeightVector { id, weights })
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn min_weight(&self) -> f64 {
        self.weights.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }
}

/// An immutable set of integer-valued points sharing one dimensionality and
/// one declared per-dimension value range. Point ids are row positions.
#[derive(Debug, Clone)]
pub struct Dataset {
    d: usize,
    value_range: (i32, i32),
    coords: Vec<i32>,
    digest: OnceLock<[u8; 32]>,
}

impl Dataset {
    pub fn from_rows(rows: Vec<Vec<i32>>, value_range: (i32, i32)) -> Result<Self> {
        let d = match rows.first() {
            Some(r) => r.len(),
            None => return Err(Error::Format("dataset has no points".into())),
        };
        if d == 0 {
            return Err(Error::Format("dataset has zero dimensionality".into()));
        }
        let mut coords = Vec::with_capacity(rows.len() * d);
        for row in &rows {
            if row.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: row.len() });
            }
            coords.extend_from_slice(row);
        }
        Self::from_flat(coords, d, value_range)
    }

    pub fn from_flat(coords: Vec<i32>, d: usize, value_range: (i32, i32)) -> Result<Self> {
        if d == 0 || coords.is_empty() || !coords.len().is_multiple_of(d) {
            return Err(Error::Format("coordinate buffer does not tile into rows".into()));
        }
        let (lo, hi) = value_range;
        if lo > hi {
            return Err(Error::InvalidParameter(format!("value range lo {lo} > hi {hi}")));
        }
        if let Some(&bad) = coords.iter().find(|&&v| v < lo || v > hi) {
            return Err(Error::Format(format!(
                "coordinate {bad} outside declared value range [{lo}, {hi}]"
            )));
        }
        Ok(Dataset { d, value_range, coords, digest: OnceLock::new() })
    }

    pub fn n(&self) -> usize {
        self.coords.len() / self.d
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn value_range(&self) -> (i32, i32) {
        self.value_range
    }

    pub fn row(&self, i: usize) -> &[i32] {
        &self.coords[i * self.d..(i + 1) * self.d]
    }

    pub fn point(&self, i: usize) -> Point {
        Point::new(i as u32, self.row(i).iter().map(|&v| v as f64).collect())
    }

    /// Copies row `i` into `buf` as f64, reusing its allocation.
    pub fn copy_row_f64(&self, i: usize, buf: &mut Vec<f64>) {
        buf.clear();
        buf.extend(self.row(i).iter().map(|&v| v as f64));
    }

    /// SHA-256 of the canonical binary serialization; computed once.
    pub fn digest(&self) -> [u8; 32] {
        *self.digest.get_or_init(|| {
            let mut hasher = Sha256::new();
            let mut bytes = Vec::new();
            self.write_binary(&mut bytes).expect("in-memory write");
            hasher.update(&bytes);
            hasher.finalize().into()
        })
    }

    /// Splits off the points at `remove` (sorted, distinct row indices) and
    /// returns the reduced dataset plus the removed points. Removed points
    /// keep their original row index as id; the survivors are renumbered.
    pub fn remove_points(&self, remove: &[usize]) -> Result<(Dataset, Vec<Point>)> {
        let n = self.n();
        if remove.windows(2).any(|w| w[0] >= w[1]) || remove.iter().any(|&i| i >= n) {
            return Err(Error::InvalidParameter("removal indices must be sorted, distinct, in range".into()));
        }
        if remove.len() >= n {
            return Err(Error::InvalidParameter("cannot remove every point".into()));
        }
        let mut removed = Vec::with_capacity(remove.len());
        let mut kept = Vec::with_capacity((n - remove.len()) * self.d);
        let mut cursor = 0usize;
        for i in 0..n {
            if cursor < remove.len() && remove[cursor] == i {
                removed.push(self.point(i));
                cursor += 1;
            } else {
                kept.extend_from_slice(self.row(i));
            }
        }
        let reduced = Dataset::from_flat(kept, self.d, self.value_range)?;
        Ok((reduced, removed))
    }

    fn write_binary<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(DATASET_MAGIC)?;
        w.write_u32::<LittleEndian>(DATASET_VERSION)?;
        w.write_u32::<LittleEndian>(self.n() as u32)?;
        w.write_u32::<LittleEndian>(self.d as u32)?;
        w.write_i32::<LittleEndian>(self.value_range.0)?;
        w.write_i32::<LittleEndian>(self.value_range.1)?;
        for &v in &self.coords {
            w.write_i32::<LittleEndian>(v)?;
        }
        Ok(())
    }

    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        self.write_binary(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn read_binary<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != DATASET_MAGIC {
            return Err(Error::Format("bad dataset magic".into()));
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != DATASET_VERSION {
            return Err(Error::Format(format!("unsupported dataset version {version}")));
        }
        let n = r.read_u32::<LittleEndian>()? as usize;
        let d = r.read_u32::<LittleEndian>()? as usize;
        let lo = r.read_i32::<LittleEndian>()?;
        let hi = r.read_i32::<LittleEndian>()?;
        let cells = n.checked_mul(d).filter(|&c| c > 0 && c <= 1 << 33);
        let Some(cells) = cells else {
            return Err(Error::Format(format!("implausible dataset shape n={n}, d={d}")));
        };
        let mut coords = vec![0i32; cells];
        r.read_i32_into::<LittleEndian>(&mut coords)?;
        Dataset::from_flat(coords, d, (lo, hi))
    }

    /// Loads either the binary format or whitespace-separated integer text.
    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let mut reader = BufReader::new(file);
        let head = reader.fill_buf()?;
        if head.starts_with(DATASET_MAGIC) {
            Self::read_binary(&mut reader)
        } else {
            Self::read_text(reader)
        }
    }

    /// Text ingestion: one point per line, whitespace-separated integers.
    /// The value range is taken as the observed min/max.
    pub fn read_text<R: BufRead>(reader: R) -> Result<Self> {
        let mut rows: Vec<Vec<i32>> = Vec::new();
        for line in reader.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row = line
                .split_whitespace()
                .map(|tok| tok.parse::<i32>().map_err(|e| Error::Format(format!("bad coordinate {tok:?}: {e}"))))
                .collect::<Result<Vec<i32>>>()?;
            rows.push(row);
        }
        let lo = rows.iter().flatten().copied().min().ok_or_else(|| Error::Format("empty text dataset".into()))?;
        let hi = rows.iter().flatten().copied().max().unwrap();
        Dataset::from_rows(rows, (lo, hi))
    }
}

pub const WEIGHTS_MAGIC: &[u8; 8] = b"WLSHWVS1";

/// Writes a weight-vector set: magic, u32 version, u32 count, u32 d, then per
/// vector `u32 id` followed by `d` little-endian f64 weights.
pub fn save_weight_vectors<P: AsRef<Path>>(path: P, vectors: &[WeightVector]) -> Result<()> {
    let d = match vectors.first() {
        Some(v) => v.dim(),
        None => return Err(Error::InvalidParameter("empty weight vector set".into())),
    };
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    w.write_all(WEIGHTS_MAGIC)?;
    w.write_u32::<LittleEndian>(1)?;
    w.write_u32::<LittleEndian>(vectors.len() as u32)?;
    w.write_u32::<LittleEndian>(d as u32)?;
    for v in vectors {
        if v.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: v.dim() });
        }
        w.write_u32::<LittleEndian>(v.id)?;
        for &x in &v.weights {
            w.write_f64::<LittleEndian>(x)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Loads a weight-vector set: the binary format above, or text with one
/// vector per line (ids assigned by line order).
pub fn load_weight_vectors<P: AsRef<Path>>(path: P) -> Result<Vec<WeightVector>> {
    let file = std::fs::File::open(path)?;
    let mut reader = BufReader::new(file);
    let head = reader.fill_buf()?;
    if !head.starts_with(WEIGHTS_MAGIC) {
        let mut out = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let weights = line
                .split_whitespace()
                .map(|tok| tok.parse::<f64>().map_err(|e| Error::Format(format!("bad weight {tok:?}: {e}"))))
                .collect::<Result<Vec<f64>>>()?;
            out.push(WeightVector::new(out.len() as u32, weights)?);
            let _ = i;
        }
        if out.is_empty() {
            return Err(Error::Format("empty weight vector file".into()));
        }
        return Ok(out);
    }
    let mut magic = [0u8; 8];
    reader.read_exact(&mut magic)?;
    let version = reader.read_u32::<LittleEndian>()?;
    if version != 1 {
        return Err(Error::Format(format!("unsupported weight file version {version}")));
    }
    let count = reader.read_u32::<LittleEndian>()? as usize;
    let d = reader.read_u32::<LittleEndian>()? as usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let id = reader.read_u32::<LittleEndian>()?;
        let mut weights = vec![0f64; d];
        reader.read_f64_into::<LittleEndian>(&mut weights)?;
        out.push(WeightVector::new(id, weights)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_vector_rejects_nonpositive() {
        assert!(WeightVector::new(0, vec![1.0, 0.0]).is_err());
        assert!(WeightVector::new(0, vec![1.0, -2.0]).is_err());
        assert!(WeightVector::new(0, vec![1.0, 2.0]).is_ok());
    }

    #[test]
    fn dataset_range_validation() {
        let err = Dataset::from_rows(vec![vec![0, 12]], (0, 10));
        assert!(matches!(err, Err(Error::Format(_))));
    }

    #[test]
    fn dataset_binary_roundtrip() {
        let ds = Dataset::from_rows(vec![vec![1, 2, 3], vec![4, 5, 6]], (0, 10)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.bin");
        ds.save(&path).unwrap();
        let back = Dataset::load(&path).unwrap();
        assert_eq!(back.n(), 2);
        assert_eq!(back.d(), 3);
        assert_eq!(back.row(1), &[4, 5, 6]);
        assert_eq!(back.digest(), ds.digest());
    }

    #[test]
    fn corrupt_dataset_files_fail_cleanly() {
        let ds = Dataset::from_rows(vec![vec![1, 2], vec![3, 4]], (0, 9)).unwrap();
        let mut bytes = Vec::new();
        ds.write_binary(&mut bytes).unwrap();
        for cut in [4, 12, 20] {
            assert!(Dataset::read_binary(&mut &bytes[..cut]).is_err());
        }
        let mut huge = bytes.clone();
        huge[12..16].copy_from_slice(&u32::MAX.to_le_bytes()); // n field
        assert!(Dataset::read_binary(&mut huge.as_slice()).is_err());
    }

    #[test]
    fn negative_value_ranges_are_supported() {
        let ds = Dataset::from_rows(vec![vec![-5, 3], vec![0, -2]], (-5, 5)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("neg.bin");
        ds.save(&path).unwrap();
        let back = Dataset::load(&path).unwrap();
        assert_eq!(back.value_range(), (-5, 5));
        assert_eq!(back.row(0), &[-5, 3]);
    }

    #[test]
    fn dataset_text_ingestion() {
        let text = "1 2 3\n4 5 6\n";
        let ds = Dataset::read_text(std::io::Cursor::new(text)).unwrap();
        assert_eq!(ds.n(), 2);
        assert_eq!(ds.value_range(), (1, 6));
    }

    #[test]
    fn remove_points_renumbers() {
        let ds = Dataset::from_rows(vec![vec![0], vec![1], vec![2], vec![3]], (0, 3)).unwrap();
        let (reduced, removed) = ds.remove_points(&[1, 3]).unwrap();
        assert_eq!(reduced.n(), 2);
        assert_eq!(reduced.row(0), &[0]);
        assert_eq!(reduced.row(1), &[2]);
        assert_eq!(removed[0].id, 1);
        assert_eq!(removed[1].coords, vec![3.0]);
    }

    #[test]
    fn weight_file_roundtrip() {
        let vs = vec![
            WeightVector::new(0, vec![1.5, 2.5]).unwrap(),
            WeightVector::new(1, vec![3.0, 4.0]).unwrap(),
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.bin");
        save_weight_vectors(&path, &vs).unwrap();
        let back = load_weight_vectors(&path).unwrap();
        assert_eq!(back, vs);
    }
}
