//! Flat binary parameter container.
//!
//! Layout: magic bytes `DEMR`, format version (u32 LE), header length
//! (u32 LE), a JSON header describing layer shapes/activations/tag, then one
//! length-prefixed (u64 LE) array of f64 (LE) per parameter block in
//! declaration order: for each encoder layer weights then bias, then head
//! layers, then the translation head when present. Round-trips are
//! bit-exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Activation, DenseLayer, NetError, RegressorParams};
use crate::liegroups::Tag;
use crate::matlin::Matrix;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"DEMR";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct LayerHeader {
    input: usize,
    output: usize,
    activation: Activation,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    rot_head_tag: Tag,
    encoder: Vec<LayerHeader>,
    head: Vec<LayerHeader>,
    trans_head: Option<LayerHeader>,
}

fn layer_header(layer: &DenseLayer) -> LayerHeader {
    LayerHeader {
        input: layer.input_dim(),
        output: layer.output_dim(),
        activation: layer.activation,
    }
}

fn write_array(w: &mut impl Write, data: &[f64]) -> std::io::Result<()> {
    w.write_all(&(data.len() as u64).to_le_bytes())?;
    for x in data {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

fn read_array(r: &mut impl Read, expected: usize) -> Result<Vec<f64>, NetError> {
    let mut len_buf = [0u8; 8];
    r.read_exact(&mut len_buf)?;
    let len = u64::from_le_bytes(len_buf) as usize;
    if len != expected {
        return Err(NetError::Checkpoint(format!(
            "array length {len} does not match declared shape {expected}"
        )));
    }
    let mut out = Vec::with_capacity(len);
    let mut buf = [0u8; 8];
    for _ in 0..len {
        r.read_exact(&mut buf)?;
        out.push(f64::from_le_bytes(buf));
    }
    Ok(out)
}

/// Serialize parameters to the binary container.
pub fn save_checkpoint(params: &RegressorParams, path: &Path) -> Result<(), NetError> {
    let header = Header {
        rot_head_tag: params.rot_head_tag,
        encoder: params.encoder.iter().map(layer_header).collect(),
        head: params.head.iter().map(layer_header).collect(),
        trans_head: params.trans_head.as_ref().map(layer_header),
    };
    let header_json = serde_json::to_vec(&header)
        .map_err(|e| NetError::Checkpoint(format!("header serialization: {e}")))?;

    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&(header_json.len() as u32).to_le_bytes())?;
    w.write_all(&header_json)?;
    for layer in params
        .encoder
        .iter()
        .chain(params.head.iter())
        .chain(params.trans_head.iter())
    {
        write_array(&mut w, layer.w.data())?;
        write_array(&mut w, &layer.b)?;
    }
    w.flush()?;
    Ok(())
}

fn read_layer(r: &mut impl Read, h: &LayerHeader) -> Result<DenseLayer, NetError> {
    let w = read_array(r, h.output * h.input)?;
    let b = read_array(r, h.output)?;
    Ok(DenseLayer {
        w: Matrix::from_vec(h.output, h.input, w),
        b,
        activation: h.activation,
    })
}

/// Load parameters from the binary container.
pub fn load_checkpoint(path: &Path) -> Result<RegressorParams, NetError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(NetError::Checkpoint(format!(
            "bad magic bytes {magic:?}, expected \"DEMR\""
        )));
    }
    let mut version = [0u8; 4];
    r.read_exact(&mut version)?;
    let version = u32::from_le_bytes(version);
    if version != CHECKPOINT_VERSION {
        return Err(NetError::Checkpoint(format!(
            "unsupported format version {version}"
        )));
    }
    let mut header_len = [0u8; 4];
    r.read_exact(&mut header_len)?;
    let header_len = u32::from_le_bytes(header_len) as usize;
    let mut header_buf = vec![0u8; header_len];
    r.read_exact(&mut header_buf)?;
    let header: Header = serde_json::from_slice(&header_buf)
        .map_err(|e| NetError::Checkpoint(format!("header parse: {e}")))?;

    let mut encoder = Vec::with_capacity(header.encoder.len());
    for h in &header.encoder {
        encoder.push(read_layer(&mut r, h)?);
    }
    let mut head = Vec::with_capacity(header.head.len());
    for h in &header.head {
        head.push(read_layer(&mut r, h)?);
    }
    if head.is_empty() {
        return Err(NetError::Checkpoint("checkpoint has no head layers".into()));
    }
    let trans_head = match &header.trans_head {
        Some(h) => Some(read_layer(&mut r, h)?),
        None => None,
    };
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(NetError::Checkpoint(format!(
            "{} trailing bytes after the last declared array",
            rest.len()
        )));
    }
    Ok(RegressorParams {
        encoder,
        head,
        rot_head_tag: header.rot_head_tag,
        trans_head,
    })
}
