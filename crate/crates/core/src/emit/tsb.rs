//! `tsb` time-series binary container.
//!
//! ```text
//! magic      4 bytes  "GSTB"
//! version    u16      1
//! channels   u32      N
//! N times:   u16 name length, UTF-8 name, u8 unit code
//! frames     u64      F
//! F times:   u64 UTC microseconds, N x f64
//! ```
//!
//! All integers and floats are little-endian.

use std::io::Write;
use std::path::Path;

use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"GSTB";
pub const VERSION: u16 = 1;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TsbError {
    #[error("not a tsb file (magic {0:?})")]
    BadMagic([u8; 4]),
    #[error("unsupported tsb version {0}")]
    UnsupportedVersion(u16),
    #[error("tsb truncated in {section} at byte {offset}")]
    Truncated { section: &'static str, offset: usize },
    #[error("{extra} unexpected bytes after the last frame")]
    TrailingBytes { extra: usize },
    #[error("channel {index} name is not valid UTF-8")]
    InvalidName { index: usize },
    #[error("channel {index} name is {len} bytes, limit is {}", u16::MAX)]
    NameTooLong { index: usize, len: usize },
    #[error("channel {index} has unknown unit code {code}")]
    UnknownUnit { index: usize, code: u8 },
    #[error("frame {frame} has {got} values, expected {expected}")]
    FrameWidth { frame: usize, expected: usize, got: usize },
    #[error("a tsb file needs at least one frame")]
    NoFrames,
    #[error("tsb i/o error: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Unit {
    Dimensionless,
    PerUnit,
    Radian,
    Megawatt,
    Megavar,
    MetersPerSecond,
}

impl Unit {
    pub fn code(self) -> u8 {
        match self {
            Unit::Dimensionless => 0,
            Unit::PerUnit => 1,
            Unit::Radian => 2,
            Unit::Megawatt => 3,
            Unit::Megavar => 4,
            Unit::MetersPerSecond => 5,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            0 => Unit::Dimensionless,
            1 => Unit::PerUnit,
            2 => Unit::Radian,
            3 => Unit::Megawatt,
            4 => Unit::Megavar,
            5 => Unit::MetersPerSecond,
            _ => return None,
        })
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Unit::Dimensionless => "",
            Unit::PerUnit => "pu",
            Unit::Radian => "rad",
            Unit::Megawatt => "MW",
            Unit::Megavar => "MVAr",
            Unit::MetersPerSecond => "m/s",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TsbChannel {
    pub name: String,
    pub unit: Unit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TsbFrame {
    pub timestamp_us: u64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TsbFile {
    pub channels: Vec<TsbChannel>,
    pub frames: Vec<TsbFrame>,
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, section: &'static str) -> Result<&'a [u8], TsbError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or(TsbError::Truncated { section, offset: self.buf.len() })?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn array<const N: usize>(&mut self, section: &'static str) -> Result<[u8; N], TsbError> {
        Ok(self.take(N, section)?.try_into().expect("length checked"))
    }
}

impl TsbFile {
    pub fn header_len(&self) -> usize {
        4 + 2 + 4 + self.channels.iter().map(|c| 2 + c.name.len() + 1).sum::<usize>() + 8
    }

    pub fn frame_len(&self) -> usize {
        8 + 8 * self.channels.len()
    }

    pub fn channel_index(&self, name: &str) -> Option<usize> {
        self.channels.iter().position(|c| c.name == name)
    }

    /// Equality that compares values by bit pattern, so NaN payloads and
    /// signed zeros count.
    pub fn bit_identical(&self, other: &TsbFile) -> bool {
        self.channels == other.channels
            && self.frames.len() == other.frames.len()
            && self.frames.iter().zip(&other.frames).all(|(a, b)| {
                a.timestamp_us == b.timestamp_us
                    && a.values.len() == b.values.len()
                    && a.values.iter().zip(&b.values).all(|(x, y)| x.to_bits() == y.to_bits())
            })
    }

    pub fn encode(&self) -> Result<Vec<u8>, TsbError> {
        let n = self.channels.len();
        let mut out = Vec::with_capacity(self.header_len() + self.frames.len() * self.frame_len());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        let count = u32::try_from(n).map_err(|_| TsbError::Io(format!("{n} channels exceed the u32 limit")))?;
        out.extend_from_slice(&count.to_le_bytes());
        for (index, c) in self.channels.iter().enumerate() {
            let len = u16::try_from(c.name.len()).map_err(|_| TsbError::NameTooLong { index, len: c.name.len() })?;
            out.extend_from_slice(&len.to_le_bytes());
            out.extend_from_slice(c.name.as_bytes());
            out.push(c.unit.code());
        }
        out.extend_from_slice(&(self.frames.len() as u64).to_le_bytes());
        for (i, f) in self.frames.iter().enumerate() {
            if f.values.len() != n {
                return Err(TsbError::FrameWidth { frame: i, expected: n, got: f.values.len() });
            }
            out.extend_from_slice(&f.timestamp_us.to_le_bytes());
            for v in &f.values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, TsbError> {
        let mut c = Cursor { buf: bytes, pos: 0 };
        let magic: [u8; 4] = c.array("magic")?;
        if magic != MAGIC {
            return Err(TsbError::BadMagic(magic));
        }
        let version = u16::from_le_bytes(c.array("version")?);
        if version != VERSION {
            return Err(TsbError::UnsupportedVersion(version));
        }
        let n = u32::from_le_bytes(c.array("channel count")?) as usize;
        // every directory entry takes at least 3 bytes
        if n > bytes.len() / 3 {
            return Err(TsbError::Truncated { section: "channel directory", offset: bytes.len() });
        }
        let mut channels = Vec::with_capacity(n);
        for index in 0..n {
            let len = u16::from_le_bytes(c.array("channel directory")?) as usize;
            let name = std::str::from_utf8(c.take(len, "channel directory")?)
                .map_err(|_| TsbError::InvalidName { index })?
                .to_string();
            let [code] = c.array("channel directory")?;
            let unit = Unit::from_code(code).ok_or(TsbError::UnknownUnit { index, code })?;
            channels.push(TsbChannel { name, unit });
        }
        let frame_count = u64::from_le_bytes(c.array("frame count")?);
        let frame_len = 8 + 8 * n;
        let remaining = bytes.len() - c.pos;
        let needed = usize::try_from(frame_count).ok().and_then(|f| f.checked_mul(frame_len));
        match needed {
            Some(need) if need == remaining => {}
            Some(need) if need < remaining => return Err(TsbError::TrailingBytes { extra: remaining - need }),
            _ => {
                let whole = remaining / frame_len;
                return Err(TsbError::Truncated { section: "frames", offset: c.pos + whole * frame_len });
            }
        }
        let mut frames = Vec::with_capacity(frame_count as usize);
        for _ in 0..frame_count {
            let timestamp_us = u64::from_le_bytes(c.array("frames")?);
            let mut values = Vec::with_capacity(n);
            for _ in 0..n {
                values.push(f64::from_le_bytes(c.array("frames")?));
            }
            frames.push(TsbFrame { timestamp_us, values });
        }
        Ok(TsbFile { channels, frames })
    }
}

pub fn write_tsb(file: &TsbFile, path: impl AsRef<Path>) -> Result<(), TsbError> {
    if file.frames.is_empty() {
        return Err(TsbError::NoFrames);
    }
    let bytes = file.encode()?;
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| TsbError::Io(e.to_string()))?);
    out.write_all(&bytes).and_then(|_| out.flush()).map_err(|e| TsbError::Io(e.to_string()))
}

pub fn read_tsb(path: impl AsRef<Path>) -> Result<TsbFile, TsbError> {
    let bytes = std::fs::read(path).map_err(|e| TsbError::Io(e.to_string()))?;
    TsbFile::decode(&bytes)
}
