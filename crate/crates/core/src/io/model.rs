//! `LSGM` model files.
//!
//! ```text
//! magic "LSGM" | version u16
//! n_dims u32 | n_classes u32
//! n_classes x (len u32, utf-8 label bytes)
//! params                                  base hyperparameters
//! n_members u32
//! per member:
//!   block_id u64 | points u64 | k_requested u32 | params | n_locals u32
//!   per local model:
//!     train_count u64 | center n_dims x f32
//!     n_local_classes u32 | class ids u32 (ascending) | planes n_local_classes x n_dims x f32
//!
//! params = lambda f64 | eta f64 | epochs u32 | seed u64 | schedule u8
//! ```

use std::fs::File;
use std::io::{self, BufReader, Read, Write};
use std::path::Path;

use super::write_atomic;
use crate::error::{Error, Result};
use crate::incremental::{BlockProvenance, IncKSgdModel};
use crate::linear::{OvrModel, Schedule, SgdParams};
use crate::local::{KSgdModel, LocalModel};
use crate::Classifier;

pub const MODEL_MAGIC: [u8; 4] = *b"LSGM";
pub const MODEL_VERSION: u16 = 1;

struct Encoder<W> {
    w: W,
}

impl<W: Write> Encoder<W> {
    fn bytes(&mut self, b: &[u8]) -> io::Result<()> {
        self.w.write_all(b)
    }
    fn u8(&mut self, v: u8) -> io::Result<()> {
        self.bytes(&[v])
    }
    fn u16(&mut self, v: u16) -> io::Result<()> {
        self.bytes(&v.to_le_bytes())
    }
    fn u32(&mut self, v: u32) -> io::Result<()> {
        self.bytes(&v.to_le_bytes())
    }
    fn u64(&mut self, v: u64) -> io::Result<()> {
        self.bytes(&v.to_le_bytes())
    }
    fn f64(&mut self, v: f64) -> io::Result<()> {
        self.bytes(&v.to_le_bytes())
    }
    fn f32s(&mut self, vs: &[f32]) -> io::Result<()> {
        vs.iter().try_for_each(|v| self.bytes(&v.to_le_bytes()))
    }
    fn len(&mut self, n: usize) -> io::Result<()> {
        let n = u32::try_from(n).map_err(|_| io::Error::new(io::ErrorKind::InvalidInput, "count exceeds u32"))?;
        self.u32(n)
    }
    fn params(&mut self, p: &SgdParams) -> io::Result<()> {
        self.f64(p.lambda)?;
        self.f64(p.eta)?;
        self.u32(p.epochs)?;
        self.u64(p.seed)?;
        self.u8(p.schedule.to_byte())
    }
}

pub fn write_model<W: Write>(model: &IncKSgdModel, w: W) -> Result<()> {
    let mut e = Encoder { w };
    e.bytes(&MODEL_MAGIC)?;
    e.u16(MODEL_VERSION)?;
    e.len(model.dimensionality())?;
    e.len(model.labels().len())?;
    for l in model.labels() {
        e.len(l.len())?;
        e.bytes(l.as_bytes())?;
    }
    e.params(model.params())?;
    e.len(model.members().len())?;
    for (member, prov) in model.members().iter().zip(model.provenance()) {
        e.u64(prov.block_id)?;
        e.u64(prov.points)?;
        e.len(member.k_requested())?;
        e.params(member.params())?;
        e.len(member.locals().len())?;
        for local in member.locals() {
            e.u64(local.train_count)?;
            e.f32s(&local.center)?;
            e.len(local.model.classes().len())?;
            for &c in local.model.classes() {
                e.u32(c)?;
            }
            for plane in local.model.planes() {
                e.f32s(plane)?;
            }
        }
    }
    e.w.flush()?;
    Ok(())
}

pub fn model_to_bytes(model: &IncKSgdModel) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    write_model(model, &mut buf)?;
    Ok(buf)
}

/// Writes the model through a temp file and a rename.
pub fn save_model(model: &IncKSgdModel, path: impl AsRef<Path>) -> Result<()> {
    write_atomic(path.as_ref(), &model_to_bytes(model)?)?;
    Ok(())
}

struct Decoder<R> {
    r: R,
    offset: u64,
}

impl<R: Read> Decoder<R> {
    fn fill(&mut self, buf: &mut [u8]) -> Result<()> {
        let mut got = 0;
        while got < buf.len() {
            match self.r.read(&mut buf[got..]) {
                Ok(0) => return Err(Error::Truncated { offset: self.offset + got as u64 }),
                Ok(n) => got += n,
                Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
                Err(e) => return Err(e.into()),
            }
        }
        self.offset += buf.len() as u64;
        Ok(())
    }
    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        let mut b = [0u8; N];
        self.fill(&mut b)?;
        Ok(b)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.array::<1>()?[0])
    }
    fn u16(&mut self) -> Result<u16> {
        self.array().map(u16::from_le_bytes)
    }
    fn u32(&mut self) -> Result<u32> {
        self.array().map(u32::from_le_bytes)
    }
    fn u64(&mut self) -> Result<u64> {
        self.array().map(u64::from_le_bytes)
    }
    fn f64(&mut self) -> Result<f64> {
        self.array().map(f64::from_le_bytes)
    }
    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let at = self.offset;
        let mut out = Vec::with_capacity(n.min(1 << 20));
        for _ in 0..n {
            out.push(f32::from_le_bytes(self.array()?));
        }
        if out.iter().any(|v| !v.is_finite()) {
            return Err(self.corrupt_at(at, "non-finite float"));
        }
        Ok(out)
    }
    fn corrupt_at(&self, offset: u64, msg: impl Into<String>) -> Error {
        Error::Corrupt { offset, msg: msg.into() }
    }
    fn params(&mut self) -> Result<SgdParams> {
        let at = self.offset;
        let lambda = self.f64()?;
        let eta = self.f64()?;
        let epochs = self.u32()?;
        let seed = self.u64()?;
        let sched_at = self.offset;
        let schedule = Schedule::from_byte(self.u8()?).ok_or_else(|| self.corrupt_at(sched_at, "unknown schedule"))?;
        let p = SgdParams { lambda, eta, epochs, seed, schedule };
        p.validate().map_err(|e| self.corrupt_at(at, e.to_string()))?;
        Ok(p)
    }
}

pub fn read_model<R: Read>(r: R) -> Result<IncKSgdModel> {
    let mut d = Decoder { r, offset: 0 };
    let magic: [u8; 4] = d.array()?;
    if magic != MODEL_MAGIC {
        return Err(Error::BadMagic { expected: MODEL_MAGIC, found: magic });
    }
    let version = d.u16()?;
    if version != MODEL_VERSION {
        return Err(Error::VersionMismatch { found: version, expected: MODEL_VERSION });
    }
    let at = d.offset;
    let dims = d.u32()? as usize;
    if dims == 0 {
        return Err(d.corrupt_at(at, "zero dimensionality"));
    }
    let n_classes = d.u32()?;
    let mut labels = Vec::new();
    for _ in 0..n_classes {
        let len = d.u32()? as usize;
        let at = d.offset;
        let mut bytes = Vec::with_capacity(len.min(1 << 12));
        for _ in 0..len {
            bytes.push(d.u8()?);
        }
        labels.push(String::from_utf8(bytes).map_err(|_| d.corrupt_at(at, "label is not utf-8"))?);
    }
    let params = d.params()?;
    let at = d.offset;
    let n_members = d.u32()?;
    if n_members == 0 {
        return Err(d.corrupt_at(at, "model has no members"));
    }
    let mut members = Vec::new();
    let mut provenance = Vec::new();
    for _ in 0..n_members {
        let block_id = d.u64()?;
        let points = d.u64()?;
        let k_requested = d.u32()? as usize;
        let member_params = d.params()?;
        let at = d.offset;
        let n_locals = d.u32()?;
        if n_locals == 0 {
            return Err(d.corrupt_at(at, "member has no local models"));
        }
        let mut locals = Vec::new();
        for _ in 0..n_locals {
            let at = d.offset;
            let train_count = d.u64()?;
            if train_count == 0 {
                return Err(d.corrupt_at(at, "local model with zero training points"));
            }
            let center = d.f32s(dims)?;
            let at = d.offset;
            let n_local = d.u32()?;
            if n_local == 0 || n_local > n_classes {
                return Err(d.corrupt_at(at, format!("bad local class count {n_local}")));
            }
            let at = d.offset;
            let mut classes = Vec::new();
            for _ in 0..n_local {
                classes.push(d.u32()?);
            }
            if classes.windows(2).any(|w| w[0] >= w[1]) || classes.iter().any(|&c| c >= n_classes) {
                return Err(d.corrupt_at(at, "class list not ascending or out of range"));
            }
            let mut planes = Vec::new();
            for c in classes {
                planes.push((c, d.f32s(dims)?));
            }
            let model = OvrModel::from_planes(dims, planes).map_err(|e| d.corrupt_at(at, e.to_string()))?;
            locals.push(LocalModel { center, model, train_count });
        }
        members.push(KSgdModel::new(locals, k_requested, member_params).map_err(|e| d.corrupt_at(at, e.to_string()))?);
        provenance.push(BlockProvenance { block_id, points });
    }
    let end = d.offset;
    let mut extra = [0u8; 1];
    if d.r.read(&mut extra)? != 0 {
        return Err(d.corrupt_at(end, "trailing bytes after model"));
    }
    IncKSgdModel::with_parts(members, provenance, labels, params).map_err(|e| d.corrupt_at(end, e.to_string()))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<IncKSgdModel> {
    read_model(BufReader::new(File::open(path)?))
}
