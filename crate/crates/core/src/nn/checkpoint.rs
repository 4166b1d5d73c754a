//! Binary model checkpoints.
//!
//! Little-endian layout:
//!
//! ```text
//! magic "LSTM" | version u32 | task tag u8 | hidden u32 | input u32
//! | n_modules u32 | layers per module u32 × n_modules | dropout f64
//! | input shift f64 | input scale f64 | parameters f64 …
//! ```
//!
//! Parameters follow declaration order: for each layer the input weights,
//! recurrent weights, input bias and recurrent bias, then the head weights
//! and head bias.

use std::fs;
use std::path::Path;

use super::{Architecture, DenseHead, LstmLayerParams, LstmStack, Network, Parameters};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"LSTM";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub task_tag: u8,
    pub network: Network,
    /// Inputs are fed to the network as `(x - input_shift) / input_scale`.
    pub input_shift: f64,
    pub input_scale: f64,
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let stack = &self.network.stack;
        let mut buf = Vec::new();
        buf.extend_from_slice(CHECKPOINT_MAGIC);
        buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        buf.push(self.task_tag);
        buf.extend_from_slice(&(stack.hidden_size as u32).to_le_bytes());
        buf.extend_from_slice(&(stack.input_size as u32).to_le_bytes());
        buf.extend_from_slice(&(stack.module_layers.len() as u32).to_le_bytes());
        for &n in &stack.module_layers {
            buf.extend_from_slice(&(n as u32).to_le_bytes());
        }
        for v in [stack.dropout_p, self.input_shift, self.input_scale] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for t in self.network.tensors() {
            for v in t {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != CHECKPOINT_MAGIC {
            return Err(Error::Format("not a model checkpoint".into()));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Format(format!("unsupported checkpoint version {version}")));
        }
        let task_tag = r.take(1)?[0];
        let hidden_size = r.u32()? as usize;
        let input_size = r.u32()? as usize;
        let n_modules = r.u32()? as usize;
        if n_modules > 1024 {
            return Err(Error::Format(format!("implausible module count {n_modules}")));
        }
        let module_layers = (0..n_modules)
            .map(|_| r.u32().map(|v| v as usize))
            .collect::<Result<Vec<_>>>()?;
        let dropout_p = r.f64()?;
        let input_shift = r.f64()?;
        let input_scale = r.f64()?;

        let arch = Architecture {
            input_size,
            hidden_size,
            module_layers,
            dropout_p,
        };
        arch.validate().map_err(|e| Error::Format(format!("checkpoint header: {e}")))?;
        let layers = (0..arch.total_layers())
            .map(|l| {
                let d = if l == 0 { input_size } else { hidden_size };
                LstmLayerParams::zeros(hidden_size, d)
            })
            .collect();
        let stack = LstmStack {
            input_size,
            hidden_size,
            module_layers: arch.module_layers.clone(),
            dropout_p,
            layers,
        };
        let head = DenseHead::zeros(stack.output_size());
        let mut network = Network::new(stack, head)?;
        let expected = network.n_params();
        if r.remaining() != 8 * expected {
            return Err(Error::Format(format!(
                "checkpoint holds {} parameter bytes, layout needs {}",
                r.remaining(),
                8 * expected
            )));
        }
        for t in network.tensors_mut() {
            for v in t.iter_mut() {
                *v = r.f64()?;
            }
        }
        Ok(Checkpoint {
            task_tag,
            network,
            input_shift,
            input_scale,
        })
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::Format("checkpoint truncated".into()));
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }
}

pub fn write_checkpoint(path: &Path, checkpoint: &Checkpoint) -> Result<()> {
    fs::write(path, checkpoint.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes)
}
