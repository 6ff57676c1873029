//! Dense little-endian f32 tensors with a CRC32 trailer.
//!
//! Layout: `"GZPL"`, version `u16`, dtype `u8` (0 = f32), rank `u8`, one `u32`
//! per dimension, row-major payload, then the CRC32 of the payload bytes.

use std::fs;
use std::path::Path;

use crate::error::{Error, FormatError, Result};
use crate::types::{ClassifierHead, FeatureMap, GridDims, TaskKind};

pub const MAGIC: [u8; 4] = *b"GZPL";
pub const VERSION: u16 = 1;
pub const DTYPE_F32: u8 = 0;
const FIXED_HEADER: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

impl Tensor {
    /// Panics if `data` does not match the shape; use for trusted in-memory values.
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Self {
        assert_eq!(dims.iter().product::<usize>(), data.len(), "tensor data does not match dims");
        Self { dims, data }
    }

    pub fn from_feature_map(map: &FeatureMap) -> Self {
        let g = map.grid();
        Self::new(vec![map.channels(), g.height, g.width], map.data().to_vec())
    }

    pub fn into_feature_map(self, image_id: &str) -> Result<FeatureMap, FormatError> {
        match self.dims[..] {
            [c, h, w] => FeatureMap::new(image_id, c, GridDims::new(h, w), self.data)
                .map_err(FormatError::Invalid),
            _ => Err(FormatError::TensorShape {
                expected: "[channels, height, width]".into(),
                found: self.dims,
            }),
        }
    }
}

pub fn encode(tensor: &Tensor) -> Vec<u8> {
    let rank = tensor.dims.len();
    let mut out = Vec::with_capacity(FIXED_HEADER + 4 * rank + 4 * tensor.data.len() + 4);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(DTYPE_F32);
    out.push(u8::try_from(rank).expect("rank fits in u8"));
    for &d in &tensor.dims {
        out.extend_from_slice(&u32::try_from(d).expect("dimension fits in u32").to_le_bytes());
    }
    let payload_start = out.len();
    for v in &tensor.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let crc = crc32fast::hash(&out[payload_start..]);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

pub fn decode(bytes: &[u8]) -> Result<Tensor, FormatError> {
    if bytes.len() < 4 {
        return Err(FormatError::TruncatedHeader {
            expected: FIXED_HEADER,
            actual: bytes.len(),
        });
    }
    if bytes[..4] != MAGIC {
        return Err(FormatError::BadMagic {
            found: bytes[..4].to_vec(),
        });
    }
    if bytes.len() < FIXED_HEADER {
        return Err(FormatError::TruncatedHeader {
            expected: FIXED_HEADER,
            actual: bytes.len(),
        });
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(FormatError::UnsupportedVersion { version });
    }
    if bytes[6] != DTYPE_F32 {
        return Err(FormatError::UnsupportedDtype { tag: bytes[6] });
    }
    let rank = bytes[7] as usize;
    let header = FIXED_HEADER + 4 * rank;
    if bytes.len() < header {
        return Err(FormatError::TruncatedHeader {
            expected: header,
            actual: bytes.len(),
        });
    }
    let dims: Vec<usize> = bytes[FIXED_HEADER..header]
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()) as usize)
        .collect();
    let count = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .and_then(|n| n.checked_mul(4));
    let actual = bytes.len().saturating_sub(header + 4);
    let expected = match count {
        Some(n) if n == actual && bytes.len() >= header + 4 => n,
        _ => {
            return Err(FormatError::PayloadLengthMismatch {
                offset: header,
                expected: count.unwrap_or(usize::MAX),
                actual,
            })
        }
    };
    let payload = &bytes[header..header + expected];
    let trailer = header + expected;
    let stored = u32::from_le_bytes(bytes[trailer..trailer + 4].try_into().unwrap());
    let computed = crc32fast::hash(payload);
    if stored != computed {
        return Err(FormatError::ChecksumMismatch {
            offset: trailer,
            stored,
            computed,
        });
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Tensor { dims, data })
}

pub fn read_tensor(path: &Path) -> Result<Tensor> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes).map_err(|k| Error::format(path, k))
}

pub fn write_tensor(path: &Path, tensor: &Tensor) -> Result<()> {
    fs::write(path, encode(tensor)).map_err(|e| Error::io(path, e))
}

pub fn read_feature_map(path: &Path, image_id: &str) -> Result<FeatureMap> {
    read_tensor(path)?
        .into_feature_map(image_id)
        .map_err(|k| Error::format(path, k))
}

pub fn write_feature_map(path: &Path, map: &FeatureMap) -> Result<()> {
    write_tensor(path, &Tensor::from_feature_map(map))
}

/// Loads a head from a `[rows, channels]` weight tensor and a `[rows]` bias tensor.
pub fn read_head(
    kind: TaskKind,
    labels: Vec<String>,
    weights_path: &Path,
    bias_path: &Path,
) -> Result<ClassifierHead> {
    let w = read_tensor(weights_path)?;
    let [_, channels] = w.dims[..] else {
        return Err(Error::format(
            weights_path,
            FormatError::TensorShape {
                expected: "[rows, channels]".into(),
                found: w.dims,
            },
        ));
    };
    let b = read_tensor(bias_path)?;
    if b.dims.len() != 1 {
        return Err(Error::format(
            bias_path,
            FormatError::TensorShape {
                expected: "[rows]".into(),
                found: b.dims,
            },
        ));
    }
    ClassifierHead::new(kind, labels, channels, w.data, b.data)
        .map_err(|v| Error::format(weights_path, FormatError::Invalid(v)))
}

pub fn write_head(head: &ClassifierHead, weights_path: &Path, bias_path: &Path) -> Result<()> {
    let rows = head.logit_rows();
    write_tensor(
        weights_path,
        &Tensor::new(vec![rows, head.feature_channels()], head.weights().to_vec()),
    )?;
    write_tensor(bias_path, &Tensor::new(vec![rows], head.bias().to_vec()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Tensor {
        Tensor::new(vec![2, 3], vec![0.0, -1.5, f32::MIN_POSITIVE, 3.25, 1e-30, -0.0])
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let t = sample();
        let back = decode(&encode(&t)).unwrap();
        assert_eq!(back.dims, t.dims);
        let bits = |v: &[f32]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back.data), bits(&t.data));
    }

    #[test]
    fn header_layout() {
        let bytes = encode(&sample());
        assert_eq!(&bytes[..4], b"GZPL");
        assert_eq!(&bytes[4..8], &[1, 0, 0, 2]);
        assert_eq!(&bytes[8..16], &[2, 0, 0, 0, 3, 0, 0, 0]);
        assert_eq!(bytes.len(), 16 + 24 + 4);
    }

    #[test]
    fn scalar_tensor() {
        let t = Tensor::new(vec![], vec![7.0]);
        assert_eq!(decode(&encode(&t)).unwrap(), t);
    }

    #[test]
    fn diagnostics() {
        let good = encode(&sample());
        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(decode(&bad), Err(FormatError::BadMagic { .. })));
        let mut bad = good.clone();
        bad[4] = 9;
        assert_eq!(decode(&bad), Err(FormatError::UnsupportedVersion { version: 9 }));
        let mut bad = good.clone();
        bad[6] = 3;
        assert_eq!(decode(&bad), Err(FormatError::UnsupportedDtype { tag: 3 }));
        assert!(matches!(decode(&good[..6]), Err(FormatError::TruncatedHeader { .. })));
        assert!(matches!(decode(&good[..12]), Err(FormatError::TruncatedHeader { expected: 16, actual: 12 })));
        assert_eq!(
            decode(&good[..good.len() - 8]),
            Err(FormatError::PayloadLengthMismatch { offset: 16, expected: 24, actual: 16 })
        );
        let mut bad = good.clone();
        bad[20] ^= 0x01;
        assert!(matches!(decode(&bad), Err(FormatError::ChecksumMismatch { offset: 40, .. })));
    }

    #[test]
    fn feature_map_shape_is_checked() {
        let err = sample().into_feature_map("x").unwrap_err();
        assert!(matches!(err, FormatError::TensorShape { .. }));
        let nan = Tensor::new(vec![1, 1, 1], vec![f32::NAN]);
        assert!(matches!(nan.into_feature_map("x"), Err(FormatError::Invalid(_))));
    }
}
