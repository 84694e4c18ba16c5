//! Model checkpoint format.
//!
//! ```text
//! magic        [u8; 8]  "IGCMODEL"
//! version      u32      little-endian
//! header_len   u32
//! header       JSON: config, normalization, feature widths, tensor shapes
//! parameters   every tensor in header order, row-major f64 little-endian
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::Tensor;
use crate::graph::{NormalizationScheme, EDGE_INPUT_FEATURES, NODE_FEATURES};

use super::{IgcNetConfig, IgcNetModel, ModelError};

const MAGIC: [u8; 8] = *b"IGCMODEL";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Header {
    config: IgcNetConfig,
    normalization: NormalizationScheme,
    node_features: usize,
    edge_input_features: usize,
    tensors: Vec<(String, Vec<usize>)>,
}

pub fn save_model(m: &IgcNetModel, path: impl AsRef<Path>) -> Result<(), ModelError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_model(m, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<IgcNetModel, ModelError> {
    read_model(&mut BufReader::new(File::open(path)?))
}

pub fn write_model(m: &IgcNetModel, w: &mut impl Write) -> Result<(), ModelError> {
    let header = Header {
        config: *m.config(),
        normalization: m.normalization,
        node_features: NODE_FEATURES,
        edge_input_features: EDGE_INPUT_FEATURES,
        tensors: m
            .param_names()
            .iter()
            .zip(m.params())
            .map(|(n, t)| (n.clone(), t.shape().to_vec()))
            .collect(),
    };
    let json = serde_json::to_vec(&header)
        .map_err(|e| ModelError::Checkpoint(format!("header encode: {e}")))?;
    w.write_all(&MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&(json.len() as u32).to_le_bytes())?;
    w.write_all(&json)?;
    for t in m.params() {
        for x in t.data() {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_model(r: &mut impl Read) -> Result<IgcNetModel, ModelError> {
    let truncated = |what: &str| ModelError::Checkpoint(format!("truncated {what}"));
    let mut head = [0u8; 16];
    r.read_exact(&mut head).map_err(|_| truncated("preamble"))?;
    if head[..8] != MAGIC {
        return Err(ModelError::Checkpoint("bad magic bytes".into()));
    }
    let version = u32::from_le_bytes(head[8..12].try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(ModelError::UnsupportedVersion {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let len = u32::from_le_bytes(head[12..16].try_into().unwrap()) as usize;
    let mut json = vec![0u8; len];
    r.read_exact(&mut json).map_err(|_| truncated("header"))?;
    let header: Header = serde_json::from_slice(&json)
        .map_err(|e| ModelError::Checkpoint(format!("header decode: {e}")))?;
    if header.node_features != NODE_FEATURES || header.edge_input_features != EDGE_INPUT_FEATURES {
        return Err(ModelError::Layout(format!(
            "checkpoint expects {}/{} features, this build uses {NODE_FEATURES}/{EDGE_INPUT_FEATURES}",
            header.node_features, header.edge_input_features
        )));
    }
    let mut params = Vec::with_capacity(header.tensors.len());
    for (name, shape) in &header.tensors {
        let n: usize = shape.iter().product();
        let mut buf = vec![0u8; n * 8];
        r.read_exact(&mut buf)
            .map_err(|_| truncated(&format!("parameter {name}")))?;
        let data = buf
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        params.push(Tensor::new(shape.clone(), data)?);
    }
    let mut probe = [0u8; 1];
    if r.read(&mut probe)? != 0 {
        return Err(ModelError::Checkpoint("trailing bytes".into()));
    }
    IgcNetModel::from_parts(header.config, header.normalization, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{gen_geometric, GeometricConfig};

    fn model() -> (IgcNetModel, crate::channel::Dataset) {
        let d = gen_geometric(&GeometricConfig::new(4, 8, 2)).unwrap();
        let norm = NormalizationScheme::fit_log_snr(&d);
        let cfg = IgcNetConfig {
            num_layers: 2,
            hidden_dim: 8,
            embed_dim: 4,
            ..Default::default()
        };
        (IgcNetModel::new(cfg, norm, 5).unwrap(), d)
    }

    #[test]
    fn scaled_normalization_round_trips_bit_exactly() {
        let d = gen_geometric(&GeometricConfig::new(3, 5, 8)).unwrap();
        let m = IgcNetModel::new(
            IgcNetConfig {
                num_layers: 1,
                hidden_dim: 4,
                embed_dim: 4,
                ..Default::default()
            },
            NormalizationScheme::fit_scaled(&d),
            1,
        )
        .unwrap();
        let mut buf = Vec::new();
        write_model(&m, &mut buf).unwrap();
        let back = read_model(&mut buf.as_slice()).unwrap();
        assert_eq!(back.normalization, m.normalization);
        assert_eq!(
            back.predict(&d.instances[0]).unwrap(),
            m.predict(&d.instances[0]).unwrap()
        );
    }

    #[test]
    fn round_trip_preserves_outputs() {
        let (m, d) = model();
        let mut buf = Vec::new();
        write_model(&m, &mut buf).unwrap();
        let back = read_model(&mut buf.as_slice()).unwrap();
        assert_eq!(back.params(), m.params());
        assert_eq!(back.normalization, m.normalization);
        assert_eq!(back.config(), m.config());
        for c in &d.instances {
            assert_eq!(back.predict(c).unwrap(), m.predict(c).unwrap());
        }
        let mut again = Vec::new();
        write_model(&back, &mut again).unwrap();
        assert_eq!(again, buf);
    }

    #[test]
    fn corrupted_checkpoints_are_errors() {
        let (m, _) = model();
        let mut buf = Vec::new();
        write_model(&m, &mut buf).unwrap();
        assert!(read_model(&mut &buf[..buf.len() - 3]).is_err());
        let mut bad = buf.clone();
        bad[8] = 7;
        assert!(matches!(
            read_model(&mut bad.as_slice()),
            Err(ModelError::UnsupportedVersion { found: 7, .. })
        ));
        let mut bad = buf.clone();
        bad[20] = b'#';
        assert!(matches!(
            read_model(&mut bad.as_slice()),
            Err(ModelError::Checkpoint(_))
        ));
    }

    #[test]
    fn shape_mismatch_rejected() {
        let (m, _) = model();
        let mut params = m.params().to_vec();
        params[0] = Tensor::zeros(&[3, 3]);
        assert!(IgcNetModel::from_parts(*m.config(), m.normalization, params).is_err());
    }
}
