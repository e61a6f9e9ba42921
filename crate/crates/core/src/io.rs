//! Signal files: a lossless raw `f64` container and 8/16-bit PGM/PPM.
//!
//! Raw layout: the 8-byte magic `PNPK0001`, a one-line UTF-8 JSON header
//! `{"shape":[...]}` terminated by `\n`, then the entries as little-endian
//! `f64` in row-major order.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::Signal;

pub const RAW_MAGIC: &[u8; 8] = b"PNPK0001";

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHeader {
    shape: Vec<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Raw,
    Pnm,
}

impl Format {
    pub fn from_path(path: &Path) -> Result<Self> {
        let ext = path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .unwrap_or_default();
        match ext.as_str() {
            "pnpk" | "raw" | "bin" | "f64" => Ok(Format::Raw),
            "pgm" | "ppm" | "pnm" => Ok(Format::Pnm),
            _ => Err(Error::Unsupported(format!(
                "cannot infer signal format from {}",
                path.display()
            ))),
        }
    }
}

pub fn load_signal(path: impl AsRef<Path>) -> Result<Signal> {
    let path = path.as_ref();
    let format = Format::from_path(path)?;
    let bytes = fs::read(path)?;
    match format {
        Format::Raw => decode_raw(&bytes),
        Format::Pnm => decode_pnm(&bytes),
    }
}

pub fn save_signal(x: &Signal, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = match Format::from_path(path)? {
        Format::Raw => encode_raw(x)?,
        Format::Pnm => encode_pnm(x, 255)?,
    };
    fs::write(path, bytes)?;
    Ok(())
}

pub fn encode_raw(x: &Signal) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(32 + 8 * x.len());
    write_raw(&mut out, x)?;
    Ok(out)
}

/// Appends one raw record to `w`. Several records may be written back to back.
pub fn write_raw(w: &mut impl Write, x: &Signal) -> Result<()> {
    w.write_all(RAW_MAGIC)?;
    let header = serde_json::to_string(&RawHeader {
        shape: x.shape().to_vec(),
    })?;
    w.write_all(header.as_bytes())?;
    w.write_all(b"\n")?;
    for v in x.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn decode_raw(bytes: &[u8]) -> Result<Signal> {
    let (signal, used) = decode_raw_record(bytes, 0)?;
    if used != bytes.len() {
        return Err(Error::Parse {
            offset: used,
            message: format!("{} trailing bytes after payload", bytes.len() - used),
        });
    }
    Ok(signal)
}

/// Decodes every record of a multi-record raw stream.
pub fn decode_raw_records(bytes: &[u8]) -> Result<Vec<Signal>> {
    let mut out = Vec::new();
    let mut pos = 0;
    while pos < bytes.len() {
        let (s, next) = decode_raw_record(bytes, pos)?;
        out.push(s);
        pos = next;
    }
    Ok(out)
}

fn decode_raw_record(bytes: &[u8], start: usize) -> Result<(Signal, usize)> {
    let parse = |offset: usize, message: &str| Error::Parse {
        offset,
        message: message.to_string(),
    };
    let rest = &bytes[start..];
    if rest.len() < RAW_MAGIC.len() || &rest[..8] != RAW_MAGIC {
        return Err(parse(start, "missing PNPK0001 magic"));
    }
    let header_start = start + 8;
    let newline = bytes[header_start..]
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| parse(header_start, "unterminated JSON header"))?;
    let header_bytes = &bytes[header_start..header_start + newline];
    let header: RawHeader = serde_json::from_slice(header_bytes)
        .map_err(|e| parse(header_start + e.column().saturating_sub(1), &e.to_string()))?;
    let payload_start = header_start + newline + 1;
    let n: usize = header.shape.iter().product();
    let payload_end = payload_start + 8 * n;
    if bytes.len() < payload_end {
        return Err(parse(
            bytes.len(),
            &format!("truncated payload: expected {} bytes", 8 * n),
        ));
    }
    let data = bytes[payload_start..payload_end]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let signal = Signal::new(data, header.shape).map_err(|e| parse(payload_start, &e.to_string()))?;
    Ok((signal, payload_end))
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            offset: self.pos,
            message: message.into(),
        }
    }

    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            let b = self.bytes[self.pos];
            if b == b'#' {
                while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if b.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn uint(&mut self) -> Result<u32> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(if self.pos >= self.bytes.len() {
                self.err("unexpected end of file")
            } else {
                self.err("expected an unsigned integer")
            });
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| Error::Parse {
                offset: start,
                message: "integer out of range".into(),
            })
    }
}

pub fn decode_pnm(bytes: &[u8]) -> Result<Signal> {
    let mut cur = Cursor { bytes, pos: 0 };
    if bytes.len() < 2 || bytes[0] != b'P' {
        return Err(cur.err("missing P2/P3/P5/P6 magic"));
    }
    let (channels, ascii) = match bytes[1] {
        b'2' => (1, true),
        b'5' => (1, false),
        b'3' => (3, true),
        b'6' => (3, false),
        _ => return Err(cur.err("unsupported PNM variant")),
    };
    cur.pos = 2;
    let width = cur.uint()? as usize;
    let height = cur.uint()? as usize;
    let maxval = cur.uint()?;
    if width == 0 || height == 0 {
        return Err(cur.err("zero image dimension"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(cur.err(format!("maxval {maxval} outside 1..=65535")));
    }
    let n = width * height * channels;
    let scale = maxval as f64;
    let mut data = Vec::with_capacity(n);
    if ascii {
        for _ in 0..n {
            let v = cur.uint()?;
            if v > maxval {
                return Err(cur.err(format!("sample {v} exceeds maxval {maxval}")));
            }
            data.push(v as f64 / scale);
        }
    } else {
        // exactly one whitespace byte separates the header from the raster
        if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
            return Err(cur.err("expected whitespace before raster"));
        }
        cur.pos += 1;
        let width_bytes = if maxval < 256 { 1 } else { 2 };
        let needed = n * width_bytes;
        if bytes.len() - cur.pos < needed {
            return Err(Error::Parse {
                offset: bytes.len(),
                message: format!("truncated raster: expected {needed} bytes"),
            });
        }
        let raster = &bytes[cur.pos..cur.pos + needed];
        for chunk in raster.chunks_exact(width_bytes) {
            let v = if width_bytes == 1 {
                chunk[0] as u32
            } else {
                u16::from_be_bytes([chunk[0], chunk[1]]) as u32
            };
            data.push(v.min(maxval) as f64 / scale);
        }
    }
    let shape = if channels == 1 {
        vec![height, width]
    } else {
        vec![height, width, 3]
    };
    Ok(Signal::new(data, shape)?.with_range_hint(0.0, 1.0))
}

/// Binary PGM (`P5`) for grayscale or PPM (`P6`) for 3-channel signals.
/// Values are clamped to `[0, 1]` and quantized to `maxval` levels.
pub fn encode_pnm(x: &Signal, maxval: u32) -> Result<Vec<u8>> {
    if maxval == 0 || maxval > 65535 {
        return Err(Error::param(format!("maxval {maxval} outside 1..=65535")));
    }
    let (h, w, c) = x.dims3();
    let magic = match c {
        1 => "P5",
        3 => "P6",
        _ => {
            return Err(Error::Unsupported(format!(
                "PNM needs 1 or 3 channels, signal has {c}"
            )))
        }
    };
    let mut out = format!("{magic}\n{w} {h}\n{maxval}\n").into_bytes();
    for &v in x.data() {
        let q = (v.clamp(0.0, 1.0) * maxval as f64).round() as u32;
        if maxval < 256 {
            out.push(q as u8);
        } else {
            out.extend_from_slice(&(q as u16).to_be_bytes());
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn raw_round_trip_is_bitwise() {
        let x = Signal::new(vec![0.1, -2.5, 1e-300, 3.0, 7.25, 0.0], vec![2, 3]).unwrap();
        let bytes = encode_raw(&x).unwrap();
        assert_eq!(&bytes[..8], RAW_MAGIC);
        let y = decode_raw(&bytes).unwrap();
        assert_eq!(y.shape(), x.shape());
        for (a, b) in x.data().iter().zip(y.data()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn ascii_pgm_is_scaled() {
        let s = decode_pnm(b"P2\n# comment\n2 2\n255\n0 255 128 64\n").unwrap();
        assert_eq!(s.shape(), &[2, 2]);
        assert_eq!(s.data(), &[0.0, 1.0, 128.0 / 255.0, 64.0 / 255.0]);
    }

    #[test]
    fn truncated_inputs_error_with_offset() {
        let x = Signal::zeros(&[4]);
        let bytes = encode_raw(&x).unwrap();
        match decode_raw(&bytes[..bytes.len() - 3]) {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, bytes.len() - 3),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(matches!(
            decode_pnm(b"P5\n4 4\n255\n\x00\x01"),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            decode_pnm(b"P2\n2 2\n255\n0 1 2"),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(decode_raw(b"NOPE"), Err(Error::Parse { offset: 0, .. })));
    }

    #[test]
    fn pnm_quantized_round_trip() {
        let x = Signal::new(vec![0.0, 0.25, 0.5, 1.0, 0.75, 0.1], vec![2, 3]).unwrap();
        for maxval in [255, 65535] {
            let y = decode_pnm(&encode_pnm(&x, maxval).unwrap()).unwrap();
            assert!(x.max_abs_diff(&y) <= 0.5 / maxval as f64 + 1e-15);
        }
        let rgb = Signal::filled(&[2, 2, 3], 0.5);
        let back = decode_pnm(&encode_pnm(&rgb, 255).unwrap()).unwrap();
        assert_eq!(back.shape(), &[2, 2, 3]);
    }

    #[test]
    fn multi_record_stream() {
        let mut buf = Vec::new();
        for k in 0..3 {
            write_raw(&mut buf, &Signal::filled(&[2], k as f64)).unwrap();
        }
        let recs = decode_raw_records(&buf).unwrap();
        assert_eq!(recs.len(), 3);
        assert_eq!(recs[2].data(), &[2.0, 2.0]);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let x = Signal::new(vec![0.5, 0.25, 1.0, 0.0], vec![2, 2]).unwrap();
        let raw = dir.path().join("x.pnpk");
        save_signal(&x, &raw).unwrap();
        assert_eq!(load_signal(&raw).unwrap(), x);
        let pgm = dir.path().join("x.pgm");
        save_signal(&x, &pgm).unwrap();
        assert!(load_signal(&pgm).unwrap().max_abs_diff(&x) < 1.0 / 255.0);
        assert!(save_signal(&x, dir.path().join("x.png")).is_err());
    }
}
