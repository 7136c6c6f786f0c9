//! Sampled beat-signal frames and their binary dump format.
//!
//! A frame is a `[chirp][sample]` matrix stored row-major. Real and complex
//! frames share one generic container; an uncorrected quadrature pair is kept
//! as two real frames ([`IqFrames`]).
//!
//! # Dump layout (version 1, little-endian)
//!
//! | offset | size | field                                   |
//! |--------|------|-----------------------------------------|
//! | 0      | 8    | magic `b"FMCWFRM\0"`                    |
//! | 8      | 4    | version (`u32`, = 1)                    |
//! | 12     | 4    | kind (`u32`: 0 real, 1 complex, 2 I/Q)  |
//! | 16     | 8    | samples per chirp (`u64`)               |
//! | 24     | 8    | chirps (`u64`)                          |
//! | 32     | 8    | sample rate, Hz (`f64`)                 |
//! | 40     | 8    | scenario hash (`u64`)                   |
//! | 48     | 8    | metres per hertz of beat (`f64`)        |
//! | 56     | 8    | centre wavelength, m (`f64`)            |
//! | 64     | 8    | sweep period, s (`f64`)                 |
//! | 72     | 16   | path tag, ASCII, NUL padded             |
//! | 88     | ...  | payload, `f64`, row-major [chirp][sample] |
//!
//! Complex payloads store `re, im` per sample; I/Q payloads store `i, q`.

use std::io::{Read, Write};

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const DUMP_MAGIC: [u8; 8] = *b"FMCWFRM\0";
pub const DUMP_VERSION: u32 = 1;
const TAG_LEN: usize = 16;

/// Element type of a frame.
pub trait Sample: Copy + Send + Sync + PartialEq + std::fmt::Debug + 'static {
    const IS_COMPLEX: bool;
    fn to_complex(self) -> Complex64;
    fn is_finite(self) -> bool;
}

impl Sample for f64 {
    const IS_COMPLEX: bool = false;
    fn to_complex(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
    fn is_finite(self) -> bool {
        f64::is_finite(self)
    }
}

impl Sample for Complex64 {
    const IS_COMPLEX: bool = true;
    fn to_complex(self) -> Complex64 {
        self
    }
    fn is_finite(self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

/// Where a frame came from and how to label its axes.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameMeta {
    pub scenario_hash: u64,
    pub path: String,
    pub range_per_hz: f64,
    pub wavelength: f64,
    pub sweep_period: f64,
}

impl FrameMeta {
    pub fn tagged(&self, path: &str) -> Self {
        Self {
            path: path.to_string(),
            ..self.clone()
        }
    }
}

impl Default for FrameMeta {
    fn default() -> Self {
        Self {
            scenario_hash: 0,
            path: String::new(),
            range_per_hz: 1.0,
            wavelength: 1.0,
            sweep_period: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameCube<T> {
    data: Vec<T>,
    samples: usize,
    chirps: usize,
    pub rate: f64,
    pub meta: FrameMeta,
}

pub type RealCube = FrameCube<f64>;
pub type ComplexCube = FrameCube<Complex64>;

impl<T: Sample> FrameCube<T> {
    pub fn from_vec(
        data: Vec<T>,
        samples: usize,
        chirps: usize,
        rate: f64,
        meta: FrameMeta,
    ) -> Result<Self> {
        if data.len() != samples * chirps {
            return Err(Error::DimensionMismatch {
                expected: format!("{samples}x{chirps} = {}", samples * chirps),
                got: data.len().to_string(),
            });
        }
        Ok(Self {
            data,
            samples,
            chirps,
            rate,
            meta,
        })
    }

    pub fn from_rows(rows: Vec<Vec<T>>, rate: f64, meta: FrameMeta) -> Result<Self> {
        let chirps = rows.len();
        let samples = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != samples) {
            return Err(Error::DimensionMismatch {
                expected: format!("{samples} samples per chirp"),
                got: "ragged rows".into(),
            });
        }
        Self::from_vec(
            rows.into_iter().flatten().collect(),
            samples,
            chirps,
            rate,
            meta,
        )
    }

    pub fn from_fn(
        samples: usize,
        chirps: usize,
        rate: f64,
        meta: FrameMeta,
        mut f: impl FnMut(usize, usize) -> T,
    ) -> Self {
        let mut data = Vec::with_capacity(samples * chirps);
        for m in 0..chirps {
            for n in 0..samples {
                data.push(f(n, m));
            }
        }
        Self {
            data,
            samples,
            chirps,
            rate,
            meta,
        }
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn chirps(&self) -> usize {
        self.chirps
    }

    pub fn is_empty(&self) -> bool {
        self.samples == 0 || self.chirps == 0
    }

    pub fn chirp(&self, m: usize) -> &[T] {
        &self.data[m * self.samples..(m + 1) * self.samples]
    }

    pub fn chirp_mut(&mut self, m: usize) -> &mut [T] {
        &mut self.data[m * self.samples..(m + 1) * self.samples]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.data
            .chunks_exact(self.samples.max(1))
            .take(self.chirps)
    }

    pub fn get(&self, n: usize, m: usize) -> T {
        self.data[m * self.samples + n]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn same_shape<U: Sample>(&self, other: &FrameCube<U>) -> Result<()> {
        if self.samples != other.samples || self.chirps != other.chirps {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{}", self.samples, self.chirps),
                got: format!("{}x{}", other.samples, other.chirps),
            });
        }
        Ok(())
    }

    pub fn map<U: Sample>(&self, f: impl Fn(T) -> U) -> FrameCube<U> {
        FrameCube {
            data: self.data.iter().map(|&v| f(v)).collect(),
            samples: self.samples,
            chirps: self.chirps,
            rate: self.rate,
            meta: self.meta.clone(),
        }
    }

    /// Keeps the first `chirps` chirps.
    pub fn truncated(&self, chirps: usize) -> Self {
        let chirps = chirps.min(self.chirps);
        Self {
            data: self.data[..chirps * self.samples].to_vec(),
            samples: self.samples,
            chirps,
            rate: self.rate,
            meta: self.meta.clone(),
        }
    }

    pub fn to_complex(&self) -> ComplexCube {
        self.map(Sample::to_complex)
    }
}

impl FrameCube<f64> {
    pub fn scale(&mut self, g: f64) {
        self.data.iter_mut().for_each(|v| *v *= g);
    }
}

impl FrameCube<Complex64> {
    pub fn re(&self) -> RealCube {
        self.map(|z| z.re)
    }

    pub fn im(&self) -> RealCube {
        self.map(|z| z.im)
    }
}

/// Uncorrected quadrature pair (I and Q as separate real channels).
#[derive(Debug, Clone, PartialEq)]
pub struct IqFrames {
    pub i: RealCube,
    pub q: RealCube,
}

impl IqFrames {
    pub fn new(i: RealCube, q: RealCube) -> Result<Self> {
        i.same_shape(&q)?;
        Ok(Self { i, q })
    }

    /// `I + jQ` without any correction.
    pub fn to_complex(&self) -> ComplexCube {
        let data = self
            .i
            .as_slice()
            .iter()
            .zip(self.q.as_slice())
            .map(|(&i, &q)| Complex64::new(i, q))
            .collect();
        FrameCube {
            data,
            samples: self.i.samples,
            chirps: self.i.chirps,
            rate: self.i.rate,
            meta: self.i.meta.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DumpKind {
    Real = 0,
    Complex = 1,
    IqPair = 2,
}

/// Any frame that can be written to or read from a dump.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyFrame {
    Real(RealCube),
    Complex(ComplexCube),
    IqPair(IqFrames),
}

impl AnyFrame {
    pub fn kind(&self) -> DumpKind {
        match self {
            AnyFrame::Real(_) => DumpKind::Real,
            AnyFrame::Complex(_) => DumpKind::Complex,
            AnyFrame::IqPair(_) => DumpKind::IqPair,
        }
    }

    fn header_source(&self) -> (usize, usize, f64, &FrameMeta) {
        match self {
            AnyFrame::Real(c) => (c.samples, c.chirps, c.rate, &c.meta),
            AnyFrame::Complex(c) => (c.samples, c.chirps, c.rate, &c.meta),
            AnyFrame::IqPair(p) => (p.i.samples, p.i.chirps, p.i.rate, &p.i.meta),
        }
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let (samples, chirps, rate, meta) = self.header_source();
        let mut header = Vec::with_capacity(88);
        header.extend_from_slice(&DUMP_MAGIC);
        header.extend_from_slice(&DUMP_VERSION.to_le_bytes());
        header.extend_from_slice(&(self.kind() as u32).to_le_bytes());
        header.extend_from_slice(&(samples as u64).to_le_bytes());
        header.extend_from_slice(&(chirps as u64).to_le_bytes());
        header.extend_from_slice(&rate.to_le_bytes());
        header.extend_from_slice(&meta.scenario_hash.to_le_bytes());
        header.extend_from_slice(&meta.range_per_hz.to_le_bytes());
        header.extend_from_slice(&meta.wavelength.to_le_bytes());
        header.extend_from_slice(&meta.sweep_period.to_le_bytes());
        let mut tag = [0u8; TAG_LEN];
        for (dst, src) in tag.iter_mut().zip(meta.path.bytes().filter(u8::is_ascii)) {
            *dst = src;
        }
        header.extend_from_slice(&tag);
        w.write_all(&header)?;

        let mut payload = Vec::new();
        match self {
            AnyFrame::Real(c) => {
                for v in &c.data {
                    payload.extend_from_slice(&v.to_le_bytes());
                }
            }
            AnyFrame::Complex(c) => {
                for z in &c.data {
                    payload.extend_from_slice(&z.re.to_le_bytes());
                    payload.extend_from_slice(&z.im.to_le_bytes());
                }
            }
            AnyFrame::IqPair(p) => {
                for (i, q) in p.i.data.iter().zip(&p.q.data) {
                    payload.extend_from_slice(&i.to_le_bytes());
                    payload.extend_from_slice(&q.to_le_bytes());
                }
            }
        }
        w.write_all(&payload)?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut header = [0u8; 88];
        r.read_exact(&mut header)
            .map_err(|_| Error::BadDump("truncated header".into()))?;
        if header[..8] != DUMP_MAGIC {
            return Err(Error::BadDump("bad magic".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(header[o..o + 4].try_into().unwrap());
        let u64_at = |o: usize| u64::from_le_bytes(header[o..o + 8].try_into().unwrap());
        let f64_at = |o: usize| f64::from_le_bytes(header[o..o + 8].try_into().unwrap());
        let version = u32_at(8);
        if version != DUMP_VERSION {
            return Err(Error::BadDump(format!("unsupported version {version}")));
        }
        let kind = u32_at(12);
        let samples = u64_at(16) as usize;
        let chirps = u64_at(24) as usize;
        let rate = f64_at(32);
        let path: String = header[72..88]
            .iter()
            .take_while(|&&b| b != 0)
            .map(|&b| b as char)
            .collect();
        let meta = FrameMeta {
            scenario_hash: u64_at(40),
            path,
            range_per_hz: f64_at(48),
            wavelength: f64_at(56),
            sweep_period: f64_at(64),
        };
        let values_per_sample = match kind {
            0 => 1,
            1 | 2 => 2,
            k => return Err(Error::BadDump(format!("unknown kind {k}"))),
        };
        let count = samples
            .checked_mul(chirps)
            .and_then(|n| n.checked_mul(values_per_sample))
            .ok_or_else(|| Error::BadDump("dimensions overflow".into()))?;
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() != count * 8 {
            return Err(Error::BadDump(format!(
                "payload holds {} bytes, header implies {}",
                bytes.len(),
                count * 8
            )));
        }
        let values: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(match kind {
            0 => AnyFrame::Real(FrameCube::from_vec(values, samples, chirps, rate, meta)?),
            1 => AnyFrame::Complex(FrameCube::from_vec(
                values
                    .chunks_exact(2)
                    .map(|p| Complex64::new(p[0], p[1]))
                    .collect(),
                samples,
                chirps,
                rate,
                meta,
            )?),
            _ => {
                let i = values.iter().step_by(2).copied().collect();
                let q = values.iter().skip(1).step_by(2).copied().collect();
                AnyFrame::IqPair(IqFrames {
                    i: FrameCube::from_vec(i, samples, chirps, rate, meta.clone())?,
                    q: FrameCube::from_vec(q, samples, chirps, rate, meta)?,
                })
            }
        })
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_to(std::io::BufWriter::new(file))
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(file))
    }
}
