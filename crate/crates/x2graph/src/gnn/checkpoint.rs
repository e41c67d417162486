//! Model checkpoint files: a little-endian header describing the
//! architecture followed by the flat parameter buffer. Round trips are
//! bit-exact.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{Activation, Arch, GraphModel, LayerKind, Norm};
use crate::error::{Result, X2gError};

const MAGIC: &[u8; 4] = b"X2GM";
const VERSION: u32 = 1;

pub fn write_checkpoint(model: &GraphModel, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path)
        .map_err(|e| X2gError::io(path.display().to_string(), e))?;
    let mut w = BufWriter::new(file);
    let res: std::io::Result<()> = (|| {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        let a = &model.arch;
        w.write_all(&[
            match a.layer_kind {
                LayerKind::Gcn => 0u8,
                LayerKind::MeanAgg => 1,
            },
            a.n_layers as u8,
            match a.activation {
                Activation::Relu => 0,
                Activation::Gelu => 1,
            },
            match a.norm {
                Norm::None => 0,
                Norm::Layer => 1,
            },
            a.id_indexing as u8,
            a.value_bias as u8,
        ])?;
        w.write_all(&(a.d as u32).to_le_bytes())?;
        w.write_all(&(model.vocab_size as u32).to_le_bytes())?;
        w.write_all(&(model.n_classes as u32).to_le_bytes())?;
        w.write_all(&model.seed.to_le_bytes())?;
        w.write_all(&(model.params.len() as u64).to_le_bytes())?;
        for &p in &model.params {
            w.write_all(&p.to_le_bytes())?;
        }
        w.flush()
    })();
    res.map_err(|e| X2gError::io(path.display().to_string(), e))
}

pub fn read_checkpoint(path: &Path) -> Result<GraphModel> {
    let file =
        std::fs::File::open(path).map_err(|e| X2gError::io(path.display().to_string(), e))?;
    let mut r = BufReader::new(file);
    let fmt = |e: std::io::Error| X2gError::Format(format!("corrupt checkpoint: {e}"));
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(fmt)?;
    if &magic != MAGIC {
        return Err(X2gError::Format(format!(
            "{}: not a model checkpoint",
            path.display()
        )));
    }
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf).map_err(fmt)?;
    if u32::from_le_bytes(u32buf) != VERSION {
        return Err(X2gError::Format("unsupported checkpoint version".into()));
    }
    let mut flags = [0u8; 6];
    r.read_exact(&mut flags).map_err(fmt)?;
    let layer_kind = match flags[0] {
        0 => LayerKind::Gcn,
        1 => LayerKind::MeanAgg,
        k => return Err(X2gError::Format(format!("unknown layer kind code {k}"))),
    };
    let activation = match flags[2] {
        0 => Activation::Relu,
        1 => Activation::Gelu,
        k => return Err(X2gError::Format(format!("unknown activation code {k}"))),
    };
    let norm = match flags[3] {
        0 => Norm::None,
        1 => Norm::Layer,
        k => return Err(X2gError::Format(format!("unknown norm code {k}"))),
    };
    r.read_exact(&mut u32buf).map_err(fmt)?;
    let d = u32::from_le_bytes(u32buf) as usize;
    r.read_exact(&mut u32buf).map_err(fmt)?;
    let vocab_size = u32::from_le_bytes(u32buf) as usize;
    r.read_exact(&mut u32buf).map_err(fmt)?;
    let n_classes = u32::from_le_bytes(u32buf) as usize;
    let mut u64buf = [0u8; 8];
    r.read_exact(&mut u64buf).map_err(fmt)?;
    let seed = u64::from_le_bytes(u64buf);
    r.read_exact(&mut u64buf).map_err(fmt)?;
    let n_params = u64::from_le_bytes(u64buf) as usize;
    let mut params = Vec::with_capacity(n_params);
    let mut f64buf = [0u8; 8];
    for _ in 0..n_params {
        r.read_exact(&mut f64buf).map_err(fmt)?;
        params.push(f64::from_le_bytes(f64buf));
    }
    let arch = Arch {
        layer_kind,
        n_layers: flags[1] as usize,
        d,
        activation,
        norm,
        id_indexing: flags[4] != 0,
        value_bias: flags[5] != 0,
    };
    GraphModel::from_parts(arch, vocab_size, n_classes, seed, params)
}
