//! Trained residual model and its binary file format.
//!
//! Layout, all integers and floats little-endian:
//!
//! | field | type |
//! |---|---|
//! | magic `RLMLP\0\0\x01` | 8 bytes |
//! | version | u32 |
//! | layer-size count `L` | u32 |
//! | layer sizes | `L` × u32 |
//! | per layer: weights (`out × in`, row-major), then biases | f64 |
//! | input min, input max, output min, output max | f64 |

use std::io::{Read, Write};
use std::path::Path;

use super::features::{NormStats, FEATURE_DIM, LABEL_DIM};
use super::mlp::Mlp;
use crate::error::{Error, Result};
use crate::indi::{ResidualEstimate, ResidualSource};

pub const MODEL_MAGIC: [u8; 8] = *b"RLMLP\0\0\x01";
pub const MODEL_VERSION: u32 = 1;

/// Network plus the normalisation it was trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub network: Mlp,
    pub stats: NormStats,
}

impl MlpModel {
    pub fn new(network: Mlp, stats: NormStats) -> Result<Self> {
        if stats.in_dim() != network.input_dim() || stats.out_dim() != network.output_dim() {
            return Err(Error::ModelFormat(format!(
                "normalisation is {}→{} but network is {}→{}",
                stats.in_dim(),
                stats.out_dim(),
                network.input_dim(),
                network.output_dim()
            )));
        }
        Ok(MlpModel { network, stats })
    }

    /// Physical-unit prediction for raw (unnormalised) features.
    pub fn predict(&self, features: &[f64]) -> Result<Vec<f64>> {
        if features.len() != self.network.input_dim() {
            return Err(Error::LengthMismatch { expected: self.network.input_dim(), actual: features.len() });
        }
        let mut x = vec![0.0; features.len()];
        self.stats.normalize_input(features, &mut x);
        let mut y = vec![0.0; self.network.output_dim()];
        self.network.forward(&x, &mut y)?;
        let mut out = vec![0.0; y.len()];
        self.stats.denormalize_output(&y, &mut out);
        Ok(out)
    }

    /// Prediction as a residual estimate; the model must map 19 → 6.
    pub fn predict_residual(&self, features: &[f64; FEATURE_DIM], timestamp: f64) -> Result<ResidualEstimate> {
        let y = self.predict(features)?;
        let arr: [f64; LABEL_DIM] =
            y.try_into().map_err(|_| Error::ModelFormat("model does not output a 6-vector".into()))?;
        Ok(ResidualEstimate::from_array(arr).tagged(ResidualSource::Nn, timestamp))
    }

    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(&MODEL_MAGIC)?;
        w.write_all(&MODEL_VERSION.to_le_bytes())?;
        let dims = self.network.dims();
        w.write_all(&(dims.len() as u32).to_le_bytes())?;
        for &d in dims {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        let s = &self.stats;
        for v in self.network.params().iter().chain(&s.in_min).chain(&s.in_max).chain(&s.out_min).chain(&s.out_max) {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = bytes;
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|_| Error::ModelFormat("truncated header".into()))?;
        if magic != MODEL_MAGIC {
            return Err(Error::ModelFormat("bad magic".into()));
        }
        let read_u32 = |r: &mut &[u8]| -> Result<u32> {
            let mut b = [0u8; 4];
            r.read_exact(&mut b).map_err(|_| Error::ModelFormat("truncated header".into()))?;
            Ok(u32::from_le_bytes(b))
        };
        let version = read_u32(&mut r)?;
        if version != MODEL_VERSION {
            return Err(Error::ModelFormat(format!("unsupported version {version}")));
        }
        let count = read_u32(&mut r)? as usize;
        if !(2..=64).contains(&count) {
            return Err(Error::ModelFormat(format!("implausible layer count {count}")));
        }
        let dims = (0..count).map(|_| read_u32(&mut r).map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        if dims.iter().any(|&d| d == 0 || d > 1 << 16) {
            return Err(Error::ModelFormat(format!("implausible layer sizes {dims:?}")));
        }
        let n_params: usize = dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        let (ni, no) = (dims[0], dims[count - 1]);
        let expected = 8 * (n_params + 2 * ni + 2 * no);
        if r.len() != expected {
            return Err(Error::ModelFormat(format!("payload is {} bytes, expected {expected}", r.len())));
        }
        let floats: Vec<f64> = r.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        let (params, rest) = floats.split_at(n_params);
        let (in_min, rest) = rest.split_at(ni);
        let (in_max, rest) = rest.split_at(ni);
        let (out_min, out_max) = rest.split_at(no);
        let network = Mlp::from_params(&dims, params.to_vec())?;
        let stats = NormStats {
            in_min: in_min.to_vec(),
            in_max: in_max.to_vec(),
            out_min: out_min.to_vec(),
            out_max: out_max.to_vec(),
        };
        MlpModel::new(network, stats)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    /// Loads a model and checks it maps `in_dim` inputs to `out_dim` outputs.
    pub fn load_expecting(path: &Path, in_dim: usize, out_dim: usize) -> Result<Self> {
        let m = Self::load(path)?;
        if m.network.input_dim() != in_dim || m.network.output_dim() != out_dim {
            return Err(Error::ModelFormat(format!(
                "{}: model is {}→{}, expected {in_dim}→{out_dim}",
                path.display(),
                m.network.input_dim(),
                m.network.output_dim()
            )));
        }
        Ok(m)
    }
}
