//! Binary model checkpoints.
//!
//! Layout (integers little-endian):
//!
//! ```text
//! magic            4 bytes  "NLCK"
//! version          u32      1
//! graph text       u32 length + UTF-8 (regiongraph description)
//! model spec text  u32 length + UTF-8 (canonical model spec)
//! model spec hash  u64      FNV-1a of the spec text
//! rng seed         u64
//! epochs completed u64
//! block count      u32
//! per block: name (u32 length + UTF-8), ndims u32, dims u32 each,
//!            values f64 little-endian, row-major
//! ```
//!
//! Save -> load -> save reproduces identical bytes.

use std::io::{Read, Write};
use std::path::Path;

use nltop_core::diffnet::{ParamLayout, ParamVector};
use nltop_core::learn::ModelParams;
use nltop_core::regiongraph::RegionGraph;

use crate::config::ModelSpecText;
use crate::error::{CliError, CliResult};

const MAGIC: &[u8; 4] = b"NLCK";
const VERSION: u32 = 1;

/// 64-bit FNV-1a; deterministic across runs and platforms.
pub fn fnv1a(data: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for &b in data {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub graph_text: String,
    pub model_spec_text: String,
    pub seed: u64,
    pub epochs_completed: u64,
    /// `(name, shape, values)` blocks in canonical component order.
    pub blocks: Vec<(String, Vec<usize>, Vec<f64>)>,
}

impl Checkpoint {
    pub fn from_params(
        graph: &RegionGraph,
        spec: &ModelSpecText,
        params: &ModelParams,
        seed: u64,
        epochs_completed: u64,
    ) -> Checkpoint {
        let mut blocks = Vec::new();
        let mut push = |prefix: &str, vector: &ParamVector| {
            let layout = vector.layout();
            for i in 0..layout.num_blocks() {
                let range = layout.block_range(i);
                blocks.push((
                    format!("{prefix}.{}", layout.block_name(i)),
                    layout.block_shape(i).to_vec(),
                    vector.values[range].to_vec(),
                ));
            }
        };
        push("unary", &params.unary);
        if let Some(pair) = &params.pair {
            push("pair", pair);
        }
        if let Some(top) = &params.top {
            push("top", top);
        }
        Checkpoint {
            graph_text: graph.description(),
            model_spec_text: spec.to_text(),
            seed,
            epochs_completed,
            blocks,
        }
    }

    pub fn write_to(&self, w: &mut impl Write) -> CliResult<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        write_string(w, &self.graph_text)?;
        write_string(w, &self.model_spec_text)?;
        w.write_all(&fnv1a(self.model_spec_text.as_bytes()).to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&self.epochs_completed.to_le_bytes())?;
        w.write_all(&(self.blocks.len() as u32).to_le_bytes())?;
        for (name, shape, values) in &self.blocks {
            write_string(w, name)?;
            w.write_all(&(shape.len() as u32).to_le_bytes())?;
            for &d in shape {
                w.write_all(&(d as u32).to_le_bytes())?;
            }
            let expected: usize = shape.iter().product();
            if expected != values.len() {
                return Err(CliError::config(format!(
                    "block {name} shape does not match value count"
                )));
            }
            for v in values {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut file)
    }

    pub fn read_from(r: &mut impl Read) -> CliResult<Checkpoint> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(CliError::config("bad checkpoint magic; not a checkpoint file"));
        }
        let version = read_u32(r)?;
        if version != VERSION {
            return Err(CliError::config(format!("unsupported checkpoint version {version}")));
        }
        let graph_text = read_string(r)?;
        let model_spec_text = read_string(r)?;
        let stored_hash = read_u64(r)?;
        if stored_hash != fnv1a(model_spec_text.as_bytes()) {
            return Err(CliError::config("checkpoint model spec hash mismatch"));
        }
        let seed = read_u64(r)?;
        let epochs_completed = read_u64(r)?;
        let block_count = read_u32(r)? as usize;
        let mut blocks = Vec::with_capacity(block_count);
        for _ in 0..block_count {
            let name = read_string(r)?;
            let ndims = read_u32(r)? as usize;
            let mut shape = Vec::with_capacity(ndims);
            for _ in 0..ndims {
                shape.push(read_u32(r)? as usize);
            }
            let len: usize = shape.iter().product();
            let mut values = Vec::with_capacity(len);
            let mut b = [0u8; 8];
            for _ in 0..len {
                r.read_exact(&mut b)?;
                values.push(f64::from_le_bytes(b));
            }
            blocks.push((name, shape, values));
        }
        Ok(Checkpoint { graph_text, model_spec_text, seed, epochs_completed, blocks })
    }

    pub fn load(path: &Path) -> CliResult<Checkpoint> {
        let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
        Checkpoint::read_from(&mut file)
    }

    /// Reconstruct the graph, model, and parameters.
    pub fn restore(&self) -> CliResult<(nltop_core::learn::StructuredModel, ModelParams)> {
        let graph = RegionGraph::parse_description(&self.graph_text)?;
        let spec = ModelSpecText::parse(&self.model_spec_text)?;
        let model = spec.build(graph)?;
        let mut params = model.init_params(self.seed)?;
        let fill = |prefix: &str, vector: &mut ParamVector| -> CliResult<()> {
            let layout: std::sync::Arc<ParamLayout> = vector.layout().clone();
            for i in 0..layout.num_blocks() {
                let name = format!("{prefix}.{}", layout.block_name(i));
                let (_, shape, values) = self
                    .blocks
                    .iter()
                    .find(|(n, _, _)| *n == name)
                    .ok_or_else(|| CliError::config(format!("checkpoint missing block {name}")))?;
                if shape != layout.block_shape(i) {
                    return Err(CliError::config(format!(
                        "checkpoint block {name} has shape {shape:?}, model expects {:?}",
                        layout.block_shape(i)
                    )));
                }
                let range = layout.block_range(i);
                vector.values[range].copy_from_slice(values);
            }
            Ok(())
        };
        fill("unary", &mut params.unary)?;
        if let Some(pair) = params.pair.as_mut() {
            fill("pair", pair)?;
        }
        if let Some(top) = params.top.as_mut() {
            fill("top", top)?;
        }
        Ok((model, params))
    }
}

fn write_string(w: &mut impl Write, s: &str) -> CliResult<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

fn read_string(r: &mut impl Read) -> CliResult<String> {
    let len = read_u32(r)? as usize;
    if len > 1 << 20 {
        return Err(CliError::config("checkpoint string field too long"));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|_| CliError::config("checkpoint string is not UTF-8"))
}

fn read_u32(r: &mut impl Read) -> CliResult<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> CliResult<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}
