//! The `USIR` binary container.
//!
//! ```text
//! offset  size        field
//! 0       4           magic "USIR"
//! 4       2           format version, u16 LE (currently 1)
//! 6       2           kind, u16 LE: 1 image, 2 RF, 3 mask, 4 ensemble
//! 8       4·ndims     dims, u32 LE (3 for ensembles, 2 otherwise)
//! ...     8·Πdims     payload, f64 LE, row-major
//! end−4   4           CRC-32 (IEEE) of the payload bytes, u32 LE
//! ```
//!
//! Images and masks have dims `(depth, width)`. RF data has dims `(K, L)`,
//! so each row holds one time sample across all elements. Ensembles have
//! dims `(C, depth, width)`. Masks store 0.0 or 1.0.

use std::fs;
use std::io;
use std::path::Path;

use thiserror::Error;

use crate::grid::{GridError, ImageGrid, ReflectivityMap, RegionMask, RfChannelData};

pub const MAGIC: &[u8; 4] = b"USIR";
pub const FORMAT_VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum ContainerError {
    #[error("bad magic bytes {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u16),
    #[error("unknown container kind {0}")]
    BadKind(u16),
    #[error("file too short: {0} bytes")]
    Truncated(usize),
    #[error("payload CRC mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    CrcMismatch { stored: u32, computed: u32 },
    #[error("dims {dims:?} need {expected} values, payload holds {actual_bytes} bytes")]
    DimsMismatch { dims: Vec<u32>, expected: usize, actual_bytes: usize },
    #[error("expected a {expected:?} container, found {found:?}")]
    WrongKind { expected: ContainerKind, found: ContainerKind },
    #[error("mask value {value} at index {index} is neither 0 nor 1")]
    BadMaskValue { index: usize, value: f64 },
    #[error("container dims {dims:?} do not match the grid {depth}x{width}")]
    GridMismatch { dims: Vec<u32>, depth: usize, width: usize },
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContainerKind {
    Image = 1,
    Rf = 2,
    Mask = 3,
    Ensemble = 4,
}

impl ContainerKind {
    pub fn from_code(code: u16) -> Option<Self> {
        match code {
            1 => Some(Self::Image),
            2 => Some(Self::Rf),
            3 => Some(Self::Mask),
            4 => Some(Self::Ensemble),
            _ => None,
        }
    }

    pub fn code(self) -> u16 {
        self as u16
    }

    pub fn num_dims(self) -> usize {
        if self == Self::Ensemble {
            3
        } else {
            2
        }
    }
}

/// A decoded container: kind, dims and the raw row-major payload.
#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    kind: ContainerKind,
    dims: Vec<u32>,
    payload: Vec<f64>,
}

fn product(dims: &[u32]) -> usize {
    dims.iter().map(|&d| d as usize).product()
}

impl Container {
    pub fn new(kind: ContainerKind, dims: Vec<u32>, payload: Vec<f64>) -> Result<Self, ContainerError> {
        let expected = product(&dims);
        if dims.len() != kind.num_dims() || payload.len() != expected {
            return Err(ContainerError::DimsMismatch { dims, expected, actual_bytes: payload.len() * 8 });
        }
        if kind == ContainerKind::Mask {
            check_mask(&payload)?;
        }
        Ok(Self { kind, dims, payload })
    }

    pub fn kind(&self) -> ContainerKind {
        self.kind
    }

    pub fn dims(&self) -> &[u32] {
        &self.dims
    }

    pub fn payload(&self) -> &[f64] {
        &self.payload
    }

    pub fn into_payload(self) -> Vec<f64> {
        self.payload
    }

    pub fn from_image(map: &ReflectivityMap) -> Self {
        Self::image_values(map.grid(), map.values().to_vec())
    }

    pub fn image_values(grid: &ImageGrid, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), grid.len(), "values must cover the grid");
        let dims = vec![grid.depth_px() as u32, grid.width_px() as u32];
        Self { kind: ContainerKind::Image, dims, payload: values }
    }

    /// Stores element-major channel data as a `(K, L)` time-major table.
    pub fn from_rf(rf: &RfChannelData) -> Self {
        let (l, k) = (rf.num_elements(), rf.num_time_samples());
        let v = rf.values();
        let mut payload = vec![0.0; k * l];
        for j in 0..l {
            for t in 0..k {
                payload[t * l + j] = v[j * k + t];
            }
        }
        Self { kind: ContainerKind::Rf, dims: vec![k as u32, l as u32], payload }
    }

    pub fn from_mask(mask: &RegionMask) -> Self {
        let g = mask.grid();
        let payload = mask.member().iter().map(|&m| if m { 1.0 } else { 0.0 }).collect();
        Self { kind: ContainerKind::Mask, dims: vec![g.depth_px() as u32, g.width_px() as u32], payload }
    }

    pub fn from_ensemble(samples: &[ReflectivityMap]) -> Result<Self, ContainerError> {
        let first = samples.first().ok_or(ContainerError::DimsMismatch { dims: vec![0], expected: 0, actual_bytes: 0 })?;
        let g = *first.grid();
        let mut payload = Vec::with_capacity(samples.len() * g.len());
        for s in samples {
            if *s.grid() != g {
                return Err(ContainerError::Grid(GridError::GridMismatch));
            }
            payload.extend_from_slice(s.values());
        }
        let dims = vec![samples.len() as u32, g.depth_px() as u32, g.width_px() as u32];
        Ok(Self { kind: ContainerKind::Ensemble, dims, payload })
    }

    fn expect(&self, kind: ContainerKind) -> Result<(), ContainerError> {
        if self.kind != kind {
            return Err(ContainerError::WrongKind { expected: kind, found: self.kind });
        }
        Ok(())
    }

    fn check_grid(&self, grid: &ImageGrid) -> Result<(), ContainerError> {
        let n = self.dims.len();
        if self.dims[n - 2] as usize != grid.depth_px() || self.dims[n - 1] as usize != grid.width_px() {
            return Err(ContainerError::GridMismatch {
                dims: self.dims.clone(),
                depth: grid.depth_px(),
                width: grid.width_px(),
            });
        }
        Ok(())
    }

    /// Image payload placed on `grid`; physical extents come from the caller.
    pub fn to_image(&self, grid: &ImageGrid) -> Result<ReflectivityMap, ContainerError> {
        self.expect(ContainerKind::Image)?;
        self.check_grid(grid)?;
        Ok(ReflectivityMap::new(*grid, self.payload.clone())?)
    }

    pub fn to_rf(&self, sampling_rate_hz: f64) -> Result<RfChannelData, ContainerError> {
        self.expect(ContainerKind::Rf)?;
        let (k, l) = (self.dims[0] as usize, self.dims[1] as usize);
        let mut values = vec![0.0; k * l];
        for t in 0..k {
            for j in 0..l {
                values[j * k + t] = self.payload[t * l + j];
            }
        }
        Ok(RfChannelData::new(l, k, sampling_rate_hz, values)?)
    }

    pub fn to_mask(&self, grid: &ImageGrid) -> Result<RegionMask, ContainerError> {
        self.expect(ContainerKind::Mask)?;
        self.check_grid(grid)?;
        Ok(RegionMask::new(*grid, self.payload.iter().map(|&v| v == 1.0).collect())?)
    }

    pub fn to_ensemble(&self, grid: &ImageGrid) -> Result<Vec<ReflectivityMap>, ContainerError> {
        self.expect(ContainerKind::Ensemble)?;
        self.check_grid(grid)?;
        Ok(self
            .payload
            .chunks(grid.len().max(1))
            .map(|c| ReflectivityMap::new(*grid, c.to_vec()))
            .collect::<Result<_, _>>()?)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + 4 * self.dims.len() + 8 * self.payload.len() + 4);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&self.kind.code().to_le_bytes());
        for d in &self.dims {
            out.extend_from_slice(&d.to_le_bytes());
        }
        let start = out.len();
        for v in &self.payload {
            out.extend_from_slice(&v.to_le_bytes());
        }
        let crc = crc32fast::hash(&out[start..]);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, ContainerError> {
        if bytes.len() < 8 {
            return Err(ContainerError::Truncated(bytes.len()));
        }
        let magic: [u8; 4] = bytes[..4].try_into().expect("4 bytes");
        if &magic != MAGIC {
            return Err(ContainerError::BadMagic(magic));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != FORMAT_VERSION {
            return Err(ContainerError::UnsupportedVersion(version));
        }
        let code = u16::from_le_bytes([bytes[6], bytes[7]]);
        let kind = ContainerKind::from_code(code).ok_or(ContainerError::BadKind(code))?;
        let header = 8 + 4 * kind.num_dims();
        if bytes.len() < header + 4 {
            return Err(ContainerError::Truncated(bytes.len()));
        }
        let dims: Vec<u32> = bytes[8..header]
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        let body = &bytes[header..bytes.len() - 4];
        let stored = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().expect("4 bytes"));
        let computed = crc32fast::hash(body);
        if stored != computed {
            return Err(ContainerError::CrcMismatch { stored, computed });
        }
        let expected = product(&dims);
        if !body.len().is_multiple_of(8) || body.len() / 8 != expected {
            return Err(ContainerError::DimsMismatch { dims, expected, actual_bytes: body.len() });
        }
        let payload: Vec<f64> = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        if kind == ContainerKind::Mask {
            check_mask(&payload)?;
        }
        Ok(Self { kind, dims, payload })
    }
}

fn check_mask(payload: &[f64]) -> Result<(), ContainerError> {
    match payload.iter().position(|&v| v != 0.0 && v != 1.0) {
        Some(index) => Err(ContainerError::BadMaskValue { index, value: payload[index] }),
        None => Ok(()),
    }
}

pub fn write_container(path: impl AsRef<Path>, container: &Container) -> Result<(), ContainerError> {
    fs::write(path, container.encode())?;
    Ok(())
}

pub fn read_container(path: impl AsRef<Path>) -> Result<Container, ContainerError> {
    Container::decode(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn image_round_trip_is_bit_exact() {
        let grid = ImageGrid::standard();
        let mut values = rng::normals(1, grid.len());
        values[7] = -0.0;
        values[8] = f64::MIN_POSITIVE / 4.0;
        let map = ReflectivityMap::new(grid, values).unwrap();
        let back = Container::decode(&Container::from_image(&map).encode()).unwrap().to_image(&grid).unwrap();
        assert!(map.values().iter().zip(back.values()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn rf_layout_is_time_major() {
        let rf = RfChannelData::new(3, 4, 20e6, (0..12).map(f64::from).collect()).unwrap();
        let c = Container::from_rf(&rf);
        assert_eq!(c.dims(), &[4, 3]);
        assert_eq!(&c.payload()[..3], &[0.0, 4.0, 8.0]);
        assert_eq!(c.to_rf(20e6).unwrap(), rf);
    }

    #[test]
    fn rf_dims_enforce_payload_length() {
        let ok = Container::new(ContainerKind::Rf, vec![1024, 128], vec![0.0; 131_072]);
        assert!(ok.is_ok());
        let bad = Container::new(ContainerKind::Rf, vec![1024, 128], vec![0.0; 131_071]);
        assert!(matches!(bad, Err(ContainerError::DimsMismatch { expected: 131_072, .. })));
    }

    #[test]
    fn corruption_is_typed() {
        let grid = ImageGrid::with_size(8, 8);
        let bytes = Container::image_values(&grid, rng::normals(2, 64)).encode();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(Container::decode(&bad), Err(ContainerError::BadMagic(_))));
        let mut bad = bytes.clone();
        bad[6] = 9;
        assert!(matches!(Container::decode(&bad), Err(ContainerError::BadKind(9))));
        let mut bad = bytes.clone();
        bad[40] ^= 0x10;
        assert!(matches!(Container::decode(&bad), Err(ContainerError::CrcMismatch { .. })));
        assert!(matches!(Container::decode(&bytes[..bytes.len() - 9]), Err(ContainerError::CrcMismatch { .. })));
        assert!(matches!(Container::decode(&bytes[..10]), Err(ContainerError::Truncated(10))));
        let mut bad = bytes.clone();
        bad[8] = 9;
        assert!(matches!(Container::decode(&bad), Err(ContainerError::DimsMismatch { .. })));
    }

    #[test]
    fn masks_and_ensembles() {
        let grid = ImageGrid::with_size(5, 4);
        let mask = RegionMask::from_fn(grid, |x, _| x > 0.0);
        let back = Container::decode(&Container::from_mask(&mask).encode()).unwrap();
        assert_eq!(back.to_mask(&grid).unwrap(), mask);
        assert!(Container::new(ContainerKind::Mask, vec![1, 2], vec![0.0, 0.5]).is_err());
        let samples: Vec<_> = (0..3).map(|s| ReflectivityMap::new(grid, rng::normals(s, 20)).unwrap()).collect();
        let c = Container::from_ensemble(&samples).unwrap();
        assert_eq!(c.dims(), &[3, 4, 5]);
        assert_eq!(Container::decode(&c.encode()).unwrap().to_ensemble(&grid).unwrap(), samples);
        assert!(matches!(c.to_image(&grid), Err(ContainerError::WrongKind { .. })));
        assert!(matches!(
            Container::from_mask(&mask).to_mask(&ImageGrid::with_size(4, 5)),
            Err(ContainerError::GridMismatch { .. })
        ));
    }
}
