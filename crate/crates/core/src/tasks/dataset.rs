//! In-memory datasets and the binary dataset file format.
//!
//! File layout (all integers little-endian):
//!
//! ```text
//! magic           4 bytes  "NLSD"
//! version         u32      1
//! kind            u32      1 = per-variable features, 2 = global features
//! example count   u64
//! variables K     u32
//! domain size     u32
//! feature dim     u32      per variable (kind 1) or total (kind 2)
//! records                  features as f64, then K labels as u16
//! ```

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::learn::{Example, ExampleInput};
use crate::regiongraph::Assignment;

const MAGIC: &[u8; 4] = b"NLSD";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    PerVariable,
    Global,
}

impl DatasetKind {
    fn code(self) -> u32 {
        match self {
            DatasetKind::PerVariable => 1,
            DatasetKind::Global => 2,
        }
    }

    fn from_code(code: u32) -> Result<Self> {
        match code {
            1 => Ok(DatasetKind::PerVariable),
            2 => Ok(DatasetKind::Global),
            other => Err(Error::parse(format!("unknown dataset kind {other}"))),
        }
    }
}

/// A labeled dataset with a fixed feature layout.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub kind: DatasetKind,
    pub num_vars: usize,
    pub domain: usize,
    pub feature_dim: usize,
    pub examples: Vec<Example>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    fn check_example(&self, ex: &Example) -> Result<()> {
        match (&ex.input, self.kind) {
            (ExampleInput::PerVariable(feats), DatasetKind::PerVariable) => {
                if feats.len() != self.num_vars
                    || feats.iter().any(|f| f.len() != self.feature_dim)
                {
                    return Err(Error::structure("example features do not match dataset dims"));
                }
            }
            (ExampleInput::Global(f), DatasetKind::Global) => {
                if f.len() != self.feature_dim {
                    return Err(Error::structure("example features do not match dataset dims"));
                }
            }
            _ => return Err(Error::structure("example kind does not match dataset kind")),
        }
        if ex.truth.labels.len() != self.num_vars
            || ex.truth.labels.iter().any(|&l| l >= self.domain)
        {
            return Err(Error::structure("example labels do not match dataset dims"));
        }
        Ok(())
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&self.kind.code().to_le_bytes())?;
        w.write_all(&(self.examples.len() as u64).to_le_bytes())?;
        w.write_all(&(self.num_vars as u32).to_le_bytes())?;
        w.write_all(&(self.domain as u32).to_le_bytes())?;
        w.write_all(&(self.feature_dim as u32).to_le_bytes())?;
        for ex in &self.examples {
            self.check_example(ex)?;
            match &ex.input {
                ExampleInput::PerVariable(feats) => {
                    for feat in feats {
                        for v in feat {
                            w.write_all(&v.to_le_bytes())?;
                        }
                    }
                }
                ExampleInput::Global(feat) => {
                    for v in feat {
                        w.write_all(&v.to_le_bytes())?;
                    }
                }
            }
            for &label in &ex.truth.labels {
                if label > u16::MAX as usize {
                    return Err(Error::structure("label exceeds 16-bit range"));
                }
                w.write_all(&(label as u16).to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut file)
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::parse("bad dataset magic; not a dataset file"));
        }
        let version = read_u32(r)?;
        if version != VERSION {
            return Err(Error::parse(format!("unsupported dataset version {version}")));
        }
        let kind = DatasetKind::from_code(read_u32(r)?)?;
        let count = read_u64(r)? as usize;
        let num_vars = read_u32(r)? as usize;
        let domain = read_u32(r)? as usize;
        let feature_dim = read_u32(r)? as usize;
        if num_vars == 0 || domain == 0 {
            return Err(Error::parse("dataset header has zero dims"));
        }
        let mut examples = Vec::with_capacity(count);
        for _ in 0..count {
            let input = match kind {
                DatasetKind::PerVariable => {
                    let mut feats = Vec::with_capacity(num_vars);
                    for _ in 0..num_vars {
                        feats.push(read_f64_vec(r, feature_dim)?);
                    }
                    ExampleInput::PerVariable(feats)
                }
                DatasetKind::Global => ExampleInput::Global(read_f64_vec(r, feature_dim)?),
            };
            let mut labels = Vec::with_capacity(num_vars);
            for _ in 0..num_vars {
                let mut b = [0u8; 2];
                r.read_exact(&mut b)?;
                let label = u16::from_le_bytes(b) as usize;
                if label >= domain {
                    return Err(Error::parse(format!(
                        "label {label} out of range for domain {domain}"
                    )));
                }
                labels.push(label);
            }
            examples.push(Example { input, truth: Assignment::new(labels) });
        }
        Ok(Dataset { kind, num_vars, domain, feature_dim, examples })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut file = std::io::BufReader::new(std::fs::File::open(path)?);
        Dataset::read_from(&mut file)
    }
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64_vec(r: &mut impl Read, len: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(len);
    let mut b = [0u8; 8];
    for _ in 0..len {
        r.read_exact(&mut b)?;
        out.push(f64::from_le_bytes(b));
    }
    Ok(out)
}
