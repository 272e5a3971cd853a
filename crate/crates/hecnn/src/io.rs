//! Binary tensor files for weights and inputs: magic "HETN", rank, dims,
//! then the values row-major as little-endian f64.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"HETN";

pub fn write_tensor(path: &Path, dims: &[usize], data: &[f64]) -> Result<()> {
    let count: usize = dims.iter().product();
    if count != data.len() {
        return Err(Error::Params(format!(
            "tensor dims {dims:?} imply {count} values, got {}",
            data.len()
        )));
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&(dims.len() as u32).to_le_bytes())?;
    for &d in dims {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    for &v in data {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_tensor(path: &Path) -> Result<(Vec<usize>, Vec<f64>)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Frame(format!("{}: not a tensor file", path.display())));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let rank = u32::from_le_bytes(b4) as usize;
    if rank == 0 || rank > 8 {
        return Err(Error::Frame(format!("unreasonable tensor rank {rank}")));
    }
    let mut dims = Vec::with_capacity(rank);
    let mut b8 = [0u8; 8];
    for _ in 0..rank {
        r.read_exact(&mut b8)?;
        dims.push(u64::from_le_bytes(b8) as usize);
    }
    let count: usize = dims.iter().product();
    if count > (1 << 28) {
        return Err(Error::Frame(format!("tensor too large: {count} values")));
    }
    let mut data = Vec::with_capacity(count);
    for _ in 0..count {
        r.read_exact(&mut b8)?;
        data.push(f64::from_le_bytes(b8));
    }
    // reject trailing garbage
    if r.read(&mut [0u8; 1])? != 0 {
        return Err(Error::Frame("trailing bytes after tensor data".into()));
    }
    Ok((dims, data))
}

/// Reshape a flat row-major buffer into [a][b][c] nesting.
pub fn nest3(data: &[f64], a: usize, b: usize, c: usize) -> Vec<Vec<Vec<f64>>> {
    (0..a)
        .map(|i| {
            (0..b)
                .map(|j| data[(i * b + j) * c..(i * b + j) * c + c].to_vec())
                .collect()
        })
        .collect()
}

/// Reshape a flat row-major buffer into [a][b][c][d] nesting.
pub fn nest4(data: &[f64], a: usize, b: usize, c: usize, d: usize) -> Vec<Vec<Vec<Vec<f64>>>> {
    (0..a).map(|i| nest3(&data[i * b * c * d..(i + 1) * b * c * d], b, c, d)).collect()
}

/// Reshape a flat row-major buffer into [a][b] nesting.
pub fn nest2(data: &[f64], a: usize, b: usize) -> Vec<Vec<f64>> {
    (0..a).map(|i| data[i * b..(i + 1) * b].to_vec()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip() {
        let dir = std::env::temp_dir();
        let path = dir.join("hecnn_io_roundtrip.tensor");
        let dims = [2usize, 3, 4];
        let data: Vec<f64> = (0..24).map(|i| i as f64 * 0.25 - 3.0).collect();
        write_tensor(&path, &dims, &data).unwrap();
        let (got_dims, got) = read_tensor(&path).unwrap();
        assert_eq!(got_dims, dims);
        assert_eq!(got, data);
        std::fs::remove_file(&path).unwrap();
    }

    #[test]
    fn dim_mismatch_and_bad_magic_rejected() {
        let dir = std::env::temp_dir();
        let path = dir.join("hecnn_io_bad.tensor");
        assert!(write_tensor(&path, &[2, 2], &[1.0; 3]).is_err());
        std::fs::write(&path, b"NOPE").unwrap();
        assert!(read_tensor(&path).is_err());
        // truncated data
        write_tensor(&path, &[4], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 8]).unwrap();
        assert!(read_tensor(&path).is_err());
        // trailing garbage
        let mut extended = bytes.clone();
        extended.push(0);
        std::fs::write(&path, &extended).unwrap();
        assert!(read_tensor(&path).is_err());
        std::fs::remove_file(&path).unwrap();
    }

    #[test]
    fn nesting_helpers() {
        let flat: Vec<f64> = (0..24).map(|i| i as f64).collect();
        let t = nest3(&flat, 2, 3, 4);
        assert_eq!(t[1][2][3], 23.0);
        assert_eq!(t[0][1][0], 4.0);
        let m = nest2(&flat[..6], 2, 3);
        assert_eq!(m[1], vec![3.0, 4.0, 5.0]);
        let f = nest4(&flat, 2, 3, 2, 2);
        assert_eq!(f[1][2][1][1], 23.0);
    }
}
