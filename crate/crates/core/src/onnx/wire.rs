//! Protocol Buffers wire format, read directly from a byte slice.
//!
//! See <https://protobuf.dev/programming-guides/encoding/>. Length-delimited
//! payloads are returned as sub-slices of the input; nothing is copied.

use crate::error::{Error, Result};

/// Longest legal varint encoding of a 64-bit value.
const MAX_VARINT_LEN: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WireType {
    Varint = 0,
    Fixed64 = 1,
    LengthDelimited = 2,
    Fixed32 = 5,
}

impl WireType {
    fn from_tag(tag: u64) -> Result<WireType> {
        match tag & 7 {
            0 => Ok(WireType::Varint),
            1 => Ok(WireType::Fixed64),
            2 => Ok(WireType::LengthDelimited),
            5 => Ok(WireType::Fixed32),
            // 3 and 4 are the deprecated group markers
            other => Err(Error::Malformed(format!("unsupported wire type {other}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Payload<'a> {
    /// Varint value, or the raw bits of a fixed32/fixed64 field.
    Int(u64),
    Bytes(&'a [u8]),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WireRecord<'a> {
    pub field_number: u32,
    pub wire_type: WireType,
    pub payload: Payload<'a>,
}

impl<'a> WireRecord<'a> {
    pub fn as_int(&self) -> Option<u64> {
        match self.payload {
            Payload::Int(v) => Some(v),
            Payload::Bytes(_) => None,
        }
    }

    pub fn as_bytes(&self) -> Option<&'a [u8]> {
        match self.payload {
            Payload::Bytes(b) => Some(b),
            Payload::Int(_) => None,
        }
    }
}

/// Decodes a base-128 varint starting at `offset`. Returns the value and the
/// offset just past it.
pub fn decode_varint(bytes: &[u8], offset: usize) -> Result<(u64, usize)> {
    let mut value: u64 = 0;
    for i in 0..MAX_VARINT_LEN {
        let pos = offset + i;
        let Some(&byte) = bytes.get(pos) else {
            return Err(Error::Truncated(format!(
                "varint at offset {offset} runs past the end of the buffer"
            )));
        };
        if i == MAX_VARINT_LEN - 1 && byte > 1 {
            return Err(Error::Malformed(format!(
                "varint at offset {offset} overflows 64 bits"
            )));
        }
        value |= u64::from(byte & 0x7f) << (7 * i);
        if byte & 0x80 == 0 {
            return Ok((value, pos + 1));
        }
    }
    Err(Error::Malformed(format!(
        "varint at offset {offset} is longer than {MAX_VARINT_LEN} bytes"
    )))
}

/// Decodes one field (tag plus payload) starting at `offset`.
pub fn next_record(bytes: &[u8], offset: usize) -> Result<(WireRecord<'_>, usize)> {
    let (tag, pos) = decode_varint(bytes, offset)?;
    let wire_type = WireType::from_tag(tag)?;
    let field_number = tag >> 3;
    if field_number == 0 || field_number > (1 << 29) - 1 {
        return Err(Error::Malformed(format!(
            "invalid field number {field_number} at offset {offset}"
        )));
    }
    let field_number = field_number as u32;

    let fixed = |len: usize| -> Result<(u64, usize)> {
        let end = pos + len;
        let chunk = bytes.get(pos..end).ok_or_else(|| {
            Error::Truncated(format!(
                "field {field_number} at offset {offset} needs {len} bytes"
            ))
        })?;
        let mut buf = [0u8; 8];
        buf[..len].copy_from_slice(chunk);
        Ok((u64::from_le_bytes(buf), end))
    };

    let (payload, next) = match wire_type {
        WireType::Varint => {
            let (v, next) = decode_varint(bytes, pos)?;
            (Payload::Int(v), next)
        }
        WireType::Fixed64 => {
            let (v, next) = fixed(8)?;
            (Payload::Int(v), next)
        }
        WireType::Fixed32 => {
            let (v, next) = fixed(4)?;
            (Payload::Int(v), next)
        }
        WireType::LengthDelimited => {
            let (len, start) = decode_varint(bytes, pos)?;
            let remaining = bytes.len() - start;
            if len > remaining as u64 {
                return Err(Error::Truncated(format!(
                    "field {field_number} at offset {offset} declares {len} bytes, {remaining} remain"
                )));
            }
            let end = start + len as usize;
            (Payload::Bytes(&bytes[start..end]), end)
        }
    };
    Ok((
        WireRecord {
            field_number,
            wire_type,
            payload,
        },
        next,
    ))
}

/// Iterates over the fields of one message.
pub struct Fields<'a> {
    bytes: &'a [u8],
    offset: usize,
    failed: bool,
}

impl<'a> Fields<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Fields {
            bytes,
            offset: 0,
            failed: false,
        }
    }
}

impl<'a> Iterator for Fields<'a> {
    type Item = Result<WireRecord<'a>>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed || self.offset >= self.bytes.len() {
            return None;
        }
        match next_record(self.bytes, self.offset) {
            Ok((rec, next)) => {
                self.offset = next;
                Some(Ok(rec))
            }
            Err(e) => {
                self.failed = true;
                Some(Err(e))
            }
        }
    }
}
