//! Model files: `NVEC` container with a TOML header and the parameters as
//! little-endian f64 in the order W1, b1, Wa, a0..a3, b0..b2.

use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{ModelMeta, NeurVecModel, RationalCoeffs};
use crate::container;
use crate::error::{Error, Result};

pub const MODEL_MAGIC: &[u8; 4] = b"NVEC";
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    d: usize,
    width: usize,
    meta: ModelMeta,
}

impl NeurVecModel {
    pub fn to_bytes(&self) -> Vec<u8> {
        let header = ModelHeader { d: self.d(), width: self.width(), meta: self.meta.clone() };
        let text = toml::to_string(&header).expect("model header serializes");
        let payload: Vec<f64> = self.params().iter().flat_map(|p| p.iter().copied()).collect();
        container::encode(MODEL_MAGIC, MODEL_FORMAT_VERSION, &text, &payload)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let c = container::decode(bytes, MODEL_MAGIC, MODEL_FORMAT_VERSION)?;
        let header: ModelHeader = toml::from_str(&c.meta).map_err(|e| Error::Metadata(e.to_string()))?;
        let (d, w) = (header.d, header.width);
        if c.payload.len() != 2 * d * w + w + 7 {
            return Err(Error::Metadata(format!(
                "payload holds {} values, a {d} x {w} model needs {}",
                c.payload.len(),
                2 * d * w + w + 7
            )));
        }
        let p = &c.payload;
        let w1 = Array2::from_shape_vec((w, d), p[..w * d].to_vec()).expect("w1 shape");
        let b1 = Array1::from_vec(p[w * d..w * d + w].to_vec());
        let wa = Array2::from_shape_vec((d, w), p[w * d + w..2 * w * d + w].to_vec()).expect("wa shape");
        let tail = &p[2 * w * d + w..];
        let rational = RationalCoeffs {
            a: tail[..4].try_into().expect("4 coefficients"),
            b: tail[4..7].try_into().expect("3 coefficients"),
        };
        Ok(Self { w1, b1, wa, rational, meta: header.meta })
    }
}

pub fn save_model(model: &NeurVecModel, path: &Path) -> Result<()> {
    container::write_file(path, &model.to_bytes())
}

pub fn load_model(path: &Path) -> Result<NeurVecModel> {
    NeurVecModel::from_bytes(&container::read_file(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neurvec::test_meta;
    use crate::solvers::Scheme;
    use crate::systems::SystemId;

    #[test]
    fn round_trip_is_bitwise() {
        let m = NeurVecModel::init(4, 12, test_meta(SystemId::HenonHeiles, Scheme::Rk4), 21);
        let bytes = m.to_bytes();
        let back = NeurVecModel::from_bytes(&bytes).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_bytes(), bytes);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.nvec");
        save_model(&m, &path).unwrap();
        assert_eq!(load_model(&path).unwrap(), m);
    }

    #[test]
    fn corrupted_payload_is_rejected() {
        let m = NeurVecModel::init(2, 4, test_meta(SystemId::KLinkPendulum, Scheme::Euler), 1);
        let mut bytes = m.to_bytes();
        let i = bytes.len() - 20;
        bytes[i] ^= 0x01;
        assert!(matches!(NeurVecModel::from_bytes(&bytes), Err(Error::ChecksumMismatch { .. })));
    }

    #[test]
    fn dataset_bytes_are_not_a_model() {
        let bytes = container::encode(b"NVDS", 1, "", &[]);
        assert!(matches!(NeurVecModel::from_bytes(&bytes), Err(Error::BadMagic { .. })));
    }
}
