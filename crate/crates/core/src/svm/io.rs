//! Little-endian model file:
//!
//! ```text
//! "TSRM" | version u32 | gamma f64 | C f64 | class count u32 | class ids u32[]
//! | pair count u32 | per pair: class_a u32, class_b u32, sv_count u32, dim u32,
//!   bias f64, dual_coeffs f64[sv_count], sv data f32[sv_count * dim]
//! | CRC32 (IEEE) of every preceding byte
//! ```

use std::fs;
use std::path::Path;

use super::{BinaryModel, MulticlassSvmModel, PairModel, SvmError};

pub const MODEL_MAGIC: &[u8; 4] = b"TSRM";
pub const MODEL_VERSION: u32 = 1;

pub fn encode_model(model: &MulticlassSvmModel) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MODEL_MAGIC);
    out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    out.extend_from_slice(&model.gamma.to_le_bytes());
    out.extend_from_slice(&model.c.to_le_bytes());
    out.extend_from_slice(&(model.classes.len() as u32).to_le_bytes());
    for &c in &model.classes {
        out.extend_from_slice(&c.to_le_bytes());
    }
    out.extend_from_slice(&(model.pairs.len() as u32).to_le_bytes());
    for p in &model.pairs {
        let m = &p.model;
        for v in [p.class_a, p.class_b, m.sv_count() as u32, m.dim() as u32] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&m.bias().to_le_bytes());
        for a in m.dual_coeffs() {
            out.extend_from_slice(&a.to_le_bytes());
        }
        for v in m.support_vectors() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N], SvmError> {
        let end = self.pos.checked_add(N).ok_or(SvmError::TruncatedPayload)?;
        let bytes = self
            .buf
            .get(self.pos..end)
            .ok_or(SvmError::TruncatedPayload)?;
        self.pos = end;
        Ok(bytes.try_into().expect("length checked"))
    }

    fn u32(&mut self) -> Result<u32, SvmError> {
        self.take().map(u32::from_le_bytes)
    }

    fn f64(&mut self) -> Result<f64, SvmError> {
        self.take().map(f64::from_le_bytes)
    }

    fn f32(&mut self) -> Result<f32, SvmError> {
        self.take().map(f32::from_le_bytes)
    }

    /// Bound a declared element count by what the buffer could still hold.
    fn count(&mut self, elem_size: usize) -> Result<usize, SvmError> {
        let n = self.u32()? as usize;
        if n.saturating_mul(elem_size) > self.buf.len() - self.pos {
            return Err(SvmError::TruncatedPayload);
        }
        Ok(n)
    }
}

pub fn decode_model(bytes: &[u8]) -> Result<MulticlassSvmModel, SvmError> {
    if bytes.len() < 12 {
        return Err(SvmError::TruncatedPayload);
    }
    let magic: [u8; 4] = bytes[..4].try_into().expect("4 bytes");
    if &magic != MODEL_MAGIC {
        return Err(SvmError::BadMagic(magic));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().expect("4 bytes"));
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(SvmError::ChecksumMismatch { stored, computed });
    }

    let mut r = Reader { buf: body, pos: 4 };
    let version = r.u32()?;
    if version != MODEL_VERSION {
        return Err(SvmError::VersionMismatch(version));
    }
    let gamma = r.f64()?;
    let c = r.f64()?;
    let n_classes = r.count(4)?;
    let classes = (0..n_classes)
        .map(|_| r.u32())
        .collect::<Result<Vec<_>, _>>()?;
    let n_pairs = r.count(24)?;
    let mut pairs = Vec::with_capacity(n_pairs);
    for _ in 0..n_pairs {
        let class_a = r.u32()?;
        let class_b = r.u32()?;
        let sv_count = r.u32()? as usize;
        let dim = r.u32()? as usize;
        if sv_count.saturating_mul(8 + dim.saturating_mul(4)) > body.len() - r.pos {
            return Err(SvmError::TruncatedPayload);
        }
        let bias = r.f64()?;
        let coeffs = (0..sv_count)
            .map(|_| r.f64())
            .collect::<Result<Vec<_>, _>>()?;
        let sv = (0..sv_count * dim)
            .map(|_| r.f32())
            .collect::<Result<Vec<_>, _>>()?;
        pairs.push(PairModel {
            class_a,
            class_b,
            model: BinaryModel::new(dim, sv, coeffs, bias, gamma)?,
        });
    }
    if r.pos != body.len() {
        return Err(SvmError::Malformed(format!(
            "{} trailing bytes",
            body.len() - r.pos
        )));
    }
    Ok(MulticlassSvmModel {
        classes,
        pairs,
        c,
        gamma,
    })
}

pub fn save_model(model: &MulticlassSvmModel, path: &Path) -> Result<(), SvmError> {
    fs::write(path, encode_model(model))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<MulticlassSvmModel, SvmError> {
    decode_model(&fs::read(path)?)
}
