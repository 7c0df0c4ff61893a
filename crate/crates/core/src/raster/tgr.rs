//! TGR1 on-disk format.
//!
//! ```text
//! 0..4    b"TGR1"
//! 4..8    width,  u32 little-endian
//! 8..12   height, u32 little-endian
//! 12..16  ambient_c,    f32 little-endian
//! 16..20  ground_res_m, f32 little-endian
//! 20..    width * height f32 little-endian, row-major, top-left origin
//! ```
//!
//! NaN payload words are copied bit for bit in both directions.

use std::fs;
use std::path::Path;

use super::TemperatureRaster;
use crate::error::{Error, Result};

pub const TGR_MAGIC: &[u8; 4] = b"TGR1";
pub const TGR_HEADER_LEN: usize = 20;

fn format_err(offset: usize, message: impl Into<String>) -> Error {
    Error::Format {
        offset: offset as u64,
        message: message.into(),
    }
}

fn word(bytes: &[u8], offset: usize) -> [u8; 4] {
    bytes[offset..offset + 4].try_into().expect("4-byte slice")
}

pub fn encode_tgr(r: &TemperatureRaster) -> Vec<u8> {
    let mut out = Vec::with_capacity(TGR_HEADER_LEN + 4 * r.len());
    out.extend_from_slice(TGR_MAGIC);
    out.extend_from_slice(&r.width().to_le_bytes());
    out.extend_from_slice(&r.height().to_le_bytes());
    out.extend_from_slice(&r.ambient_c().to_le_bytes());
    out.extend_from_slice(&r.ground_res_m().to_le_bytes());
    for v in r.data() {
        out.extend_from_slice(&v.to_bits().to_le_bytes());
    }
    out
}

pub fn decode_tgr(bytes: &[u8]) -> Result<TemperatureRaster> {
    if bytes.len() < 4 {
        return Err(format_err(bytes.len(), "file shorter than magic"));
    }
    if &bytes[..4] != TGR_MAGIC {
        return Err(format_err(0, format!("bad magic {:?}", String::from_utf8_lossy(&bytes[..4]))));
    }
    if bytes.len() < TGR_HEADER_LEN {
        return Err(format_err(bytes.len(), "truncated header"));
    }
    let width = u32::from_le_bytes(word(bytes, 4));
    let height = u32::from_le_bytes(word(bytes, 8));
    let ambient_c = f32::from_le_bytes(word(bytes, 12));
    let ground_res_m = f32::from_le_bytes(word(bytes, 16));
    if width == 0 {
        return Err(format_err(4, "width is zero"));
    }
    if height == 0 {
        return Err(format_err(8, "height is zero"));
    }
    if !ambient_c.is_finite() {
        return Err(format_err(12, "ambient temperature is not finite"));
    }
    if !(ground_res_m.is_finite() && ground_res_m > 0.0) {
        return Err(format_err(16, "ground resolution is not a positive finite value"));
    }
    let n = width as u64 * height as u64;
    let expected = TGR_HEADER_LEN as u64 + 4 * n;
    if (bytes.len() as u64) < expected {
        return Err(format_err(
            bytes.len(),
            format!("truncated payload: expected {expected} bytes"),
        ));
    }
    if (bytes.len() as u64) > expected {
        return Err(format_err(expected as usize, "trailing bytes after payload"));
    }
    let mut data = Vec::with_capacity(n as usize);
    for (i, chunk) in bytes[TGR_HEADER_LEN..].chunks_exact(4).enumerate() {
        let v = f32::from_bits(u32::from_le_bytes(chunk.try_into().expect("4-byte chunk")));
        if v.is_infinite() {
            return Err(format_err(TGR_HEADER_LEN + 4 * i, "infinite temperature"));
        }
        data.push(v);
    }
    TemperatureRaster::new(width, height, ambient_c, ground_res_m, data)
}

pub fn read_raster(path: impl AsRef<Path>) -> Result<TemperatureRaster> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_tgr(&bytes)
}

pub fn write_raster(r: &TemperatureRaster, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_tgr(r)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file() {
        let mut bytes = b"TGR1".to_vec();
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&9.0f32.to_le_bytes());
        bytes.extend_from_slice(&1.0f32.to_le_bytes());
        bytes.extend_from_slice(&9.0f32.to_le_bytes());
        let r = decode_tgr(&bytes).unwrap();
        assert_eq!(r.dims(), (1, 1));
        assert_eq!(r.get(0, 0), 9.0);
        assert_eq!(encode_tgr(&r), bytes);
    }

    #[test]
    fn zeros_2x2_length() {
        let r = TemperatureRaster::filled(2, 2, 0.0, 0.0, 1.0).unwrap();
        assert_eq!(encode_tgr(&r).len(), 4 + 4 + 4 + 4 + 4 + 16);
    }

    #[test]
    fn bad_magic() {
        let mut bytes = encode_tgr(&TemperatureRaster::filled(1, 1, 0.0, 0.0, 1.0).unwrap());
        bytes[..4].copy_from_slice(b"XXXX");
        assert!(matches!(decode_tgr(&bytes), Err(Error::Format { offset: 0, .. })));
    }

    #[test]
    fn truncated_payload_reports_offset() {
        let bytes = encode_tgr(&TemperatureRaster::filled(3, 3, 1.0, 0.0, 1.0).unwrap());
        let cut = &bytes[..bytes.len() - 2];
        match decode_tgr(cut) {
            Err(Error::Format { offset, .. }) => assert_eq!(offset as usize, cut.len()),
            other => panic!("expected format error, got {other:?}"),
        }
        assert!(decode_tgr(&bytes[..10]).is_err());
    }

    #[test]
    fn non_finite_header() {
        let mut bytes = encode_tgr(&TemperatureRaster::filled(1, 1, 0.0, 0.0, 1.0).unwrap());
        bytes[12..16].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(decode_tgr(&bytes), Err(Error::Format { offset: 12, .. })));
        bytes[12..16].copy_from_slice(&0f32.to_le_bytes());
        bytes[16..20].copy_from_slice(&f32::INFINITY.to_le_bytes());
        assert!(matches!(decode_tgr(&bytes), Err(Error::Format { offset: 16, .. })));
    }

    #[test]
    fn nan_payload_is_bit_exact() {
        let odd_nan = f32::from_bits(0x7fc0_1234);
        let r = TemperatureRaster::new(2, 1, 0.0, 1.0, vec![odd_nan, 3.5]).unwrap();
        let back = decode_tgr(&encode_tgr(&r)).unwrap();
        assert_eq!(back.data()[0].to_bits(), 0x7fc0_1234);
    }
}
