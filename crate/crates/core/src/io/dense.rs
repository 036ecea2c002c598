use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Seek, SeekFrom, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::linear::LabeledPoint;

pub const DENSE_MAGIC: [u8; 4] = *b"LSGD";
pub const DENSE_VERSION: u16 = 1;
const HEADER_LEN: u64 = 4 + 2 + 8 + 4 + 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DatasetHeader {
    pub n_points: u64,
    pub n_dims: u32,
    pub n_classes: u32,
}

impl DatasetHeader {
    pub fn record_len(&self) -> u64 {
        4 * (u64::from(self.n_dims) + 1)
    }

    fn encode(&self) -> [u8; HEADER_LEN as usize] {
        let mut buf = [0u8; HEADER_LEN as usize];
        buf[..4].copy_from_slice(&DENSE_MAGIC);
        buf[4..6].copy_from_slice(&DENSE_VERSION.to_le_bytes());
        buf[6..14].copy_from_slice(&self.n_points.to_le_bytes());
        buf[14..18].copy_from_slice(&self.n_dims.to_le_bytes());
        buf[18..22].copy_from_slice(&self.n_classes.to_le_bytes());
        buf
    }
}

fn read_full<R: Read>(r: &mut R, buf: &mut [u8], offset: u64) -> Result<()> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => return Err(Error::Truncated { offset: offset + filled as u64 }),
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e.into()),
        }
    }
    Ok(())
}

/// Record-at-a-time reader over a dense binary dataset.
pub struct DenseBinaryReader<R> {
    inner: R,
    header: DatasetHeader,
    next_point: u64,
    buf: Vec<u8>,
    failed: bool,
}

pub fn read_dense_binary(path: impl AsRef<Path>) -> Result<DenseBinaryReader<BufReader<File>>> {
    DenseBinaryReader::new(BufReader::new(File::open(path)?))
}

impl<R: Read> DenseBinaryReader<R> {
    pub fn new(mut inner: R) -> Result<Self> {
        let mut head = [0u8; HEADER_LEN as usize];
        read_full(&mut inner, &mut head[..4], 0)?;
        let magic: [u8; 4] = head[..4].try_into().unwrap();
        if magic != DENSE_MAGIC {
            return Err(Error::BadMagic { expected: DENSE_MAGIC, found: magic });
        }
        read_full(&mut inner, &mut head[4..6], 4)?;
        let version = u16::from_le_bytes([head[4], head[5]]);
        if version != DENSE_VERSION {
            return Err(Error::VersionMismatch { found: version, expected: DENSE_VERSION });
        }
        read_full(&mut inner, &mut head[6..], 6)?;
        let header = DatasetHeader {
            n_points: u64::from_le_bytes(head[6..14].try_into().unwrap()),
            n_dims: u32::from_le_bytes(head[14..18].try_into().unwrap()),
            n_classes: u32::from_le_bytes(head[18..22].try_into().unwrap()),
        };
        if header.n_dims == 0 {
            return Err(Error::Corrupt { offset: 14, msg: "n_dims must be positive".into() });
        }
        if header.n_classes == 0 {
            return Err(Error::Corrupt { offset: 18, msg: "n_classes must be positive".into() });
        }
        if header.n_points == 0 {
            return Err(Error::NoData);
        }
        let buf = vec![0u8; header.record_len() as usize];
        Ok(DenseBinaryReader { inner, header, next_point: 0, buf, failed: false })
    }

    pub fn header(&self) -> &DatasetHeader {
        &self.header
    }

    fn offset_of(&self, point: u64) -> u64 {
        HEADER_LEN + point * self.header.record_len()
    }

    fn read_record(&mut self) -> Result<LabeledPoint> {
        let offset = self.offset_of(self.next_point);
        read_full(&mut self.inner, &mut self.buf, offset)?;
        let label = u32::from_le_bytes(self.buf[..4].try_into().unwrap());
        if label >= self.header.n_classes {
            return Err(Error::Corrupt {
                offset,
                msg: format!("label {label} >= n_classes {}", self.header.n_classes),
            });
        }
        let mut features = Vec::with_capacity(self.header.n_dims as usize);
        for (j, chunk) in self.buf[4..].chunks_exact(4).enumerate() {
            let v = f32::from_le_bytes(chunk.try_into().unwrap());
            if !v.is_finite() {
                return Err(Error::Corrupt { offset: offset + 4 + 4 * j as u64, msg: "non-finite feature".into() });
            }
            features.push(v);
        }
        self.next_point += 1;
        Ok(LabeledPoint { features, label })
    }
}

impl<R: Read + Seek> DenseBinaryReader<R> {
    /// Positions the reader so the next record yielded is point `index`.
    pub fn seek_to_point(&mut self, index: u64) -> Result<()> {
        if index > self.header.n_points {
            return Err(Error::invalid(format!("point {index} beyond {} points", self.header.n_points)));
        }
        self.inner.seek(SeekFrom::Start(self.offset_of(index)))?;
        self.next_point = index;
        self.failed = false;
        Ok(())
    }
}

impl<R: Read> Iterator for DenseBinaryReader<R> {
    type Item = Result<LabeledPoint>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed || self.next_point >= self.header.n_points {
            return None;
        }
        let r = self.read_record();
        self.failed = r.is_err();
        Some(r)
    }
}

/// Streams records out; the point count in the header is patched on `finish`.
pub struct DenseBinaryWriter<W: Write + Seek> {
    inner: W,
    header: DatasetHeader,
}

impl DenseBinaryWriter<BufWriter<File>> {
    pub fn create(path: impl AsRef<Path>, n_dims: u32, n_classes: u32) -> Result<Self> {
        Self::new(BufWriter::new(File::create(path)?), n_dims, n_classes)
    }
}

impl<W: Write + Seek> DenseBinaryWriter<W> {
    pub fn new(mut inner: W, n_dims: u32, n_classes: u32) -> Result<Self> {
        if n_dims == 0 || n_classes == 0 {
            return Err(Error::invalid("n_dims and n_classes must be positive"));
        }
        let header = DatasetHeader { n_points: 0, n_dims, n_classes };
        inner.write_all(&header.encode())?;
        Ok(DenseBinaryWriter { inner, header })
    }

    pub fn write(&mut self, p: &LabeledPoint) -> Result<()> {
        crate::error::check_dims(self.header.n_dims as usize, p.features.len())?;
        if p.label >= self.header.n_classes {
            return Err(Error::invalid(format!("label {} >= n_classes {}", p.label, self.header.n_classes)));
        }
        self.inner.write_all(&p.label.to_le_bytes())?;
        for v in &p.features {
            self.inner.write_all(&v.to_le_bytes())?;
        }
        self.header.n_points += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.inner.seek(SeekFrom::Start(0))?;
        self.inner.write_all(&self.header.encode())?;
        self.inner.seek(SeekFrom::End(0))?;
        self.inner.flush()?;
        Ok(self.inner)
    }
}
