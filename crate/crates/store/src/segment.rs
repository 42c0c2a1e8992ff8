//! Columnar segment container (`.lgtw`).
//!
//! All integers are little-endian.
//!
//! ```text
//! magic        4 bytes  "LGTW"
//! version      u16      1
//! series key   4 x (u16 byte length + UTF-8): source, station, variable, unit
//! count        u64      number of records
//! directory    u8 column count (3), then per column:
//!                u8 column id, u8 encoding, u64 offset, u64 byte length
//! columns      timestamps: zigzag LEB128 varints, first absolute, then deltas
//!              (signed 64-bit Unix seconds)
//!              values: raw IEEE-754 binary64, 8 bytes each
//!              quality: 1 byte each (0 measured, 1 imputed, 2 rejected)
//! footer       u32      CRC-32 (IEEE) of every preceding byte
//! ```
//!
//! Offsets are absolute from the start of the file. A CRC mismatch makes
//! the whole segment unreadable.

use twin_core::{Quality, SeriesKey};

use crate::error::{Result, StoreError};

pub const MAGIC: &[u8; 4] = b"LGTW";
pub const VERSION: u16 = 1;

const COL_TIMESTAMP: u8 = 1;
const COL_VALUE: u8 = 2;
const COL_QUALITY: u8 = 3;

const ENC_ZIGZAG_DELTA: u8 = 1;
const ENC_RAW_F64: u8 = 2;
const ENC_U8: u8 = 3;

const DIR_ENTRY_LEN: usize = 1 + 1 + 8 + 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentRecord {
    /// Unix seconds.
    pub timestamp: i64,
    pub value: f64,
    pub quality: Quality,
}

impl SegmentRecord {
    /// Bitwise equality, so NaN payloads and signed zeros compare exactly.
    pub fn bit_eq(&self, other: &SegmentRecord) -> bool {
        self.timestamp == other.timestamp
            && self.value.to_bits() == other.value.to_bits()
            && self.quality == other.quality
    }
}

fn put_str(buf: &mut Vec<u8>, s: &str) -> Result<()> {
    let len = u16::try_from(s.len())
        .map_err(|_| StoreError::Usage(format!("series key field too long: {} bytes", s.len())))?;
    buf.extend_from_slice(&len.to_le_bytes());
    buf.extend_from_slice(s.as_bytes());
    Ok(())
}

fn put_varint(buf: &mut Vec<u8>, v: i64) {
    let mut z = ((v << 1) ^ (v >> 63)) as u64;
    loop {
        let byte = (z & 0x7f) as u8;
        z >>= 7;
        if z == 0 {
            buf.push(byte);
            break;
        }
        buf.push(byte | 0x80);
    }
}

pub fn encode(series: &SeriesKey, records: &[SegmentRecord]) -> Result<Vec<u8>> {
    let mut buf = Vec::with_capacity(64 + records.len() * 11);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    for field in [&series.source_id, &series.station_id, &series.variable, &series.unit] {
        put_str(&mut buf, field)?;
    }
    buf.extend_from_slice(&(records.len() as u64).to_le_bytes());

    let mut ts_col = Vec::with_capacity(records.len() * 2);
    let mut prev = 0i64;
    for r in records {
        put_varint(&mut ts_col, r.timestamp.wrapping_sub(prev));
        prev = r.timestamp;
    }
    let mut val_col = Vec::with_capacity(records.len() * 8);
    for r in records {
        val_col.extend_from_slice(&r.value.to_bits().to_le_bytes());
    }
    let q_col: Vec<u8> = records.iter().map(|r| r.quality.code()).collect();

    buf.push(3);
    let dir_start = buf.len();
    let mut offset = (dir_start + 3 * DIR_ENTRY_LEN) as u64;
    for (id, enc, col) in [
        (COL_TIMESTAMP, ENC_ZIGZAG_DELTA, &ts_col),
        (COL_VALUE, ENC_RAW_F64, &val_col),
        (COL_QUALITY, ENC_U8, &q_col),
    ] {
        buf.push(id);
        buf.push(enc);
        buf.extend_from_slice(&offset.to_le_bytes());
        buf.extend_from_slice(&(col.len() as u64).to_le_bytes());
        offset += col.len() as u64;
    }
    buf.extend_from_slice(&ts_col);
    buf.extend_from_slice(&val_col);
    buf.extend_from_slice(&q_col);
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    Ok(buf)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    name: &'a str,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| StoreError::format(format!("segment {}", self.name), "truncated"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }
    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }
    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn string(&mut self) -> Result<String> {
        let len = self.u16()? as usize;
        let raw = self.take(len)?;
        String::from_utf8(raw.to_vec())
            .map_err(|_| StoreError::format(format!("segment {}", self.name), "series key not UTF-8"))
    }
}

/// Decodes a segment, verifying the footer checksum before anything else.
/// `name` is only used in error messages.
pub fn decode(bytes: &[u8], name: &str) -> Result<(SeriesKey, Vec<SegmentRecord>)> {
    if bytes.len() < MAGIC.len() + 2 + 4 {
        return Err(StoreError::Integrity {
            segment: name.to_string(),
            detail: "file too short".into(),
        });
    }
    let (body, footer) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(footer.try_into().unwrap());
    let actual = crc32fast::hash(body);
    if stored != actual {
        return Err(StoreError::Integrity {
            segment: name.to_string(),
            detail: format!("crc32 mismatch: stored {stored:08x}, computed {actual:08x}"),
        });
    }
    let what = || format!("segment {name}");
    let mut c = Cursor { bytes: body, pos: 0, name };
    if c.take(4)? != MAGIC {
        return Err(StoreError::format(what(), "bad magic"));
    }
    let version = c.u16()?;
    if version != VERSION {
        return Err(StoreError::format(what(), format!("unsupported version {version}")));
    }
    let series = SeriesKey {
        source_id: c.string()?,
        station_id: c.string()?,
        variable: c.string()?,
        unit: c.string()?,
    };
    let count = c.u64()? as usize;
    let ncols = c.u8()?;
    let mut cols: [Option<(u8, &[u8])>; 3] = [None, None, None];
    for _ in 0..ncols {
        let id = c.u8()?;
        let enc = c.u8()?;
        let offset = c.u64()? as usize;
        let len = c.u64()? as usize;
        let data = offset
            .checked_add(len)
            .and_then(|end| body.get(offset..end))
            .ok_or_else(|| StoreError::format(what(), format!("column {id} out of bounds")))?;
        let slot = match id {
            COL_TIMESTAMP => 0,
            COL_VALUE => 1,
            COL_QUALITY => 2,
            _ => continue,
        };
        cols[slot] = Some((enc, data));
    }
    let col = |i: usize, enc: u8| -> Result<&[u8]> {
        match cols[i] {
            Some((e, data)) if e == enc => Ok(data),
            Some((e, _)) => Err(StoreError::format(what(), format!("unexpected encoding {e}"))),
            None => Err(StoreError::format(what(), "missing column")),
        }
    };
    let ts = col(0, ENC_ZIGZAG_DELTA)?;
    let vals = col(1, ENC_RAW_F64)?;
    let quals = col(2, ENC_U8)?;
    if vals.len() != count * 8 || quals.len() != count {
        return Err(StoreError::format(what(), "column lengths disagree with record count"));
    }

    let mut records = Vec::with_capacity(count);
    let mut pos = 0usize;
    let mut prev = 0i64;
    for i in 0..count {
        let mut z = 0u64;
        let mut shift = 0u32;
        loop {
            let byte = *ts
                .get(pos)
                .ok_or_else(|| StoreError::format(what(), "timestamp column truncated"))?;
            pos += 1;
            if shift >= 64 {
                return Err(StoreError::format(what(), "varint overflow"));
            }
            z |= u64::from(byte & 0x7f) << shift;
            shift += 7;
            if byte & 0x80 == 0 {
                break;
            }
        }
        let delta = ((z >> 1) as i64) ^ -((z & 1) as i64);
        prev = prev.wrapping_add(delta);
        let value = f64::from_bits(u64::from_le_bytes(vals[i * 8..i * 8 + 8].try_into().unwrap()));
        let quality = Quality::from_code(quals[i])
            .ok_or_else(|| StoreError::format(what(), format!("bad quality byte {}", quals[i])))?;
        records.push(SegmentRecord {
            timestamp: prev,
            value,
            quality,
        });
    }
    if pos != ts.len() {
        return Err(StoreError::format(what(), "trailing bytes in timestamp column"));
    }
    Ok((series, records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn key() -> SeriesKey {
        SeriesKey::new("sdc-upct", "buoy-6", "salinity", "PSU")
    }

    fn quality() -> impl Strategy<Value = Quality> {
        prop_oneof![Just(Quality::Measured), Just(Quality::Imputed), Just(Quality::Rejected)]
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(recs in prop::collection::vec((any::<i64>(), any::<u64>(), quality()), 0..200)) {
            let records: Vec<SegmentRecord> = recs
                .iter()
                .map(|&(t, bits, q)| SegmentRecord { timestamp: t, value: f64::from_bits(bits), quality: q })
                .collect();
            let bytes = encode(&key(), &records).unwrap();
            let (k, back) = decode(&bytes, "prop").unwrap();
            prop_assert_eq!(k, key());
            prop_assert_eq!(back.len(), records.len());
            for (a, b) in records.iter().zip(&back) {
                prop_assert!(a.bit_eq(b));
            }
        }
    }

    #[test]
    fn empty_segment_has_fixed_layout() {
        let bytes = encode(&key(), &[]).unwrap();
        assert_eq!(&bytes[..4], b"LGTW");
        assert_eq!(u16::from_le_bytes([bytes[4], bytes[5]]), 1);
        let (_, recs) = decode(&bytes, "empty").unwrap();
        assert!(recs.is_empty());
    }

    #[test]
    fn every_single_byte_corruption_is_detected() {
        let records: Vec<_> = (0..20)
            .map(|i| SegmentRecord {
                timestamp: 1_700_000_000 + i * 300,
                value: i as f64 * 0.1,
                quality: Quality::Measured,
            })
            .collect();
        let bytes = encode(&key(), &records).unwrap();
        for i in 0..bytes.len() {
            let mut bad = bytes.clone();
            bad[i] ^= 0x01;
            assert!(
                matches!(decode(&bad, "seg-x"), Err(StoreError::Integrity { .. })),
                "byte {i} flip not detected"
            );
        }
    }

    #[test]
    fn truncated_file_is_integrity_error() {
        assert!(matches!(decode(b"LGT", "t"), Err(StoreError::Integrity { .. })));
    }
}
