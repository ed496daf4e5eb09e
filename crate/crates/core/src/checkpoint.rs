//! Versioned binary checkpoint format.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic        8 bytes  "RNNCKPT\0"
//! version      u32
//! dtype        u8       1 = f32 arrays, 2 = f64 arrays
//! arch         u32 input, u32 hidden, u32 classes, u8 output_bias
//! config       u32 epochs, u32 batch_size, f64 lr, f64 beta1, f64 beta2,
//!              f64 eps, u64 seed
//! epoch        u32      epochs completed
//! rng          u64 seed, u64 next_stream
//! adam_step    u64
//! 12 arrays    u32 ndim, ndim x u32 dims, then the elements row-major:
//!              w_in, w_rec, w_out, b_out, then the Adam first moments and
//!              second moments in the same order
//! checksum     u32      CRC-32 of every preceding byte
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::{Array, Dimension, IxDyn};
use thiserror::Error;

use crate::real::Real;
use crate::rnn::{AdamConfig, AdamState, Architecture, Gradients, RnnParams};
use crate::trainer::{Precision, TrainConfig};

pub const MAGIC: &[u8; 8] = b"RNNCKPT\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("checkpoint format version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("corrupt checkpoint: {0}")]
    CorruptFile(String),
    #[error("checkpoint stores {found:?} arrays, requested {requested:?}")]
    PrecisionMismatch { found: Precision, requested: Precision },
    #[error("checkpoint I/O on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Seeded shuffling state: epoch `e` draws from ChaCha stream `e + 1` of
/// `seed`, so the next stream to use is all that needs persisting.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngState {
    pub seed: u64,
    pub next_stream: u64,
}

/// Everything needed to resume or reproduce a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<T> {
    pub config: TrainConfig,
    pub params: RnnParams<T>,
    pub adam: AdamState<T>,
    /// Epochs completed.
    pub epoch: usize,
    pub rng: RngState,
}

impl<T: Real> Checkpoint<T> {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.push(T::DTYPE);
        let arch = &self.config.arch;
        for v in [arch.input, arch.hidden, arch.classes] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        out.push(arch.output_bias as u8);
        let c = &self.config;
        out.extend_from_slice(&(c.epochs as u32).to_le_bytes());
        out.extend_from_slice(&(c.batch_size as u32).to_le_bytes());
        for v in [c.adam.lr, c.adam.beta1, c.adam.beta2, c.adam.eps] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&c.seed.to_le_bytes());
        out.extend_from_slice(&(self.epoch as u32).to_le_bytes());
        out.extend_from_slice(&self.rng.seed.to_le_bytes());
        out.extend_from_slice(&self.rng.next_stream.to_le_bytes());
        out.extend_from_slice(&self.adam.step.to_le_bytes());

        let p = &self.params;
        write_array(&mut out, &p.w_in);
        write_array(&mut out, &p.w_rec);
        write_array(&mut out, &p.w_out);
        write_array(&mut out, &p.b_out);
        for g in [&self.adam.m, &self.adam.v] {
            write_array(&mut out, &g.g_in);
            write_array(&mut out, &g.g_rec);
            write_array(&mut out, &g.g_out);
            write_array(&mut out, &g.g_bout);
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CheckpointError> {
        let body = verify(bytes)?;
        let mut r = Reader {
            bytes: body,
            pos: MAGIC.len() + 4,
        };
        let dtype = r.u8()?;
        if dtype != T::DTYPE {
            let found = Precision::from_code(dtype)
                .ok_or_else(|| CheckpointError::CorruptFile(format!("unknown dtype {dtype}")))?;
            return Err(CheckpointError::PrecisionMismatch {
                found,
                requested: Precision::of::<T>(),
            });
        }
        let arch = Architecture {
            input: r.u32()? as usize,
            hidden: r.u32()? as usize,
            classes: r.u32()? as usize,
            output_bias: r.u8()? != 0,
        };
        let epochs = r.u32()? as usize;
        let batch_size = r.u32()? as usize;
        let adam = AdamConfig {
            lr: r.f64()?,
            beta1: r.f64()?,
            beta2: r.f64()?,
            eps: r.f64()?,
        };
        let config = TrainConfig {
            epochs,
            batch_size,
            adam,
            seed: r.u64()?,
            precision: Precision::of::<T>(),
            arch,
        };
        let epoch = r.u32()? as usize;
        let rng = RngState {
            seed: r.u64()?,
            next_stream: r.u64()?,
        };
        let step = r.u64()?;
        let (h, i, c) = (arch.hidden, arch.input, arch.classes);
        let params = RnnParams {
            arch,
            w_in: r.array(&[h, i])?.into_dimensionality().expect("2-d"),
            w_rec: r.array(&[h, h])?.into_dimensionality().expect("2-d"),
            w_out: r.array(&[c, h])?.into_dimensionality().expect("2-d"),
            b_out: r.array(&[c])?.into_dimensionality().expect("1-d"),
        };
        let mut moments = Vec::with_capacity(2);
        for _ in 0..2 {
            moments.push(Gradients {
                g_in: r.array(&[h, i])?.into_dimensionality().expect("2-d"),
                g_rec: r.array(&[h, h])?.into_dimensionality().expect("2-d"),
                g_out: r.array(&[c, h])?.into_dimensionality().expect("2-d"),
                g_bout: r.array(&[c])?.into_dimensionality().expect("1-d"),
            });
        }
        if r.pos != body.len() {
            return Err(CheckpointError::CorruptFile("trailing bytes after arrays".into()));
        }
        let v = moments.pop().expect("two moment sets");
        let m = moments.pop().expect("two moment sets");
        Ok(Checkpoint {
            config,
            params,
            adam: AdamState { m, v, step },
            epoch,
            rng,
        })
    }
}

/// Precision stored in a checkpoint file, read from its header.
pub fn peek_precision(bytes: &[u8]) -> Result<Precision, CheckpointError> {
    let body = verify(bytes)?;
    let code = body[MAGIC.len() + 4];
    Precision::from_code(code).ok_or_else(|| CheckpointError::CorruptFile(format!("unknown dtype {code}")))
}

/// Checks magic, checksum and version; returns the bytes before the checksum.
fn verify(bytes: &[u8]) -> Result<&[u8], CheckpointError> {
    if bytes.len() < MAGIC.len() + 4 + 1 + 4 || &bytes[..MAGIC.len()] != MAGIC {
        return Err(CheckpointError::CorruptFile("missing checkpoint header".into()));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
    if crc32fast::hash(body) != stored {
        return Err(CheckpointError::CorruptFile("checksum mismatch".into()));
    }
    let version = u32::from_le_bytes(body[MAGIC.len()..MAGIC.len() + 4].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(CheckpointError::VersionMismatch {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    Ok(body)
}

fn write_array<T: Real, D: Dimension>(out: &mut Vec<u8>, a: &Array<T, D>) {
    out.extend_from_slice(&(a.ndim() as u32).to_le_bytes());
    for &d in a.shape() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for &v in a.iter() {
        T::to_le_vec(v, out);
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8], CheckpointError> {
        let end = self.pos + n;
        let s = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| CheckpointError::CorruptFile("unexpected end of data".into()))?;
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, CheckpointError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn array<T: Real>(&mut self, expected: &[usize]) -> Result<Array<T, IxDyn>, CheckpointError> {
        let ndim = self.u32()? as usize;
        let mut shape = Vec::with_capacity(ndim);
        for _ in 0..ndim {
            shape.push(self.u32()? as usize);
        }
        if shape != expected {
            return Err(CheckpointError::CorruptFile(format!(
                "array shape {shape:?} does not match architecture {expected:?}"
            )));
        }
        let n: usize = shape.iter().product();
        let data = self
            .take(n * T::BYTES)?
            .chunks_exact(T::BYTES)
            .map(T::from_le_slice)
            .collect();
        Ok(Array::from_shape_vec(IxDyn(&shape), data).expect("length matches shape"))
    }
}

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

pub fn save_checkpoint<T: Real>(ckpt: &Checkpoint<T>, path: &Path) -> Result<(), CheckpointError> {
    write_atomic(path, &ckpt.to_bytes()).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_checkpoint<T: Real>(path: &Path) -> Result<Checkpoint<T>, CheckpointError> {
    let bytes = read(path)?;
    Checkpoint::from_bytes(&bytes)
}

pub(crate) fn read(path: &Path) -> Result<Vec<u8>, CheckpointError> {
    fs::read(path).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })
}
