use std::fs;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, FormatError, Result};
use crate::field::{Field2D, RealImage2D};

pub const MAGIC_FIELD: [u8; 4] = *b"FPMC";
pub const MAGIC_IMAGE: [u8; 4] = *b"FPMR";
pub const FORMAT_VERSION: u16 = 1;
/// magic (4) + version (2) + rows (4) + cols (4)
pub const HEADER_LEN: usize = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FileHeader {
    pub magic: [u8; 4],
    pub version: u16,
    pub rows: u32,
    pub cols: u32,
}

impl FileHeader {
    fn element_size(&self) -> usize {
        if self.magic == MAGIC_FIELD {
            16
        } else {
            8
        }
    }

    fn encode(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.magic);
        out.extend_from_slice(&self.version.to_le_bytes());
        out.extend_from_slice(&self.rows.to_le_bytes());
        out.extend_from_slice(&self.cols.to_le_bytes());
    }

    fn decode(bytes: &[u8], expected_magic: [u8; 4]) -> Result<Self, FormatError> {
        if bytes.len() < HEADER_LEN {
            return Err(FormatError::TruncatedHeader {
                expected: HEADER_LEN,
                found: bytes.len(),
            });
        }
        let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
        if magic != expected_magic {
            return Err(FormatError::BadMagic {
                expected: expected_magic,
                found: magic,
            });
        }
        let version = u16::from_le_bytes(bytes[4..6].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(FormatError::UnsupportedVersion {
                found: version,
                supported: FORMAT_VERSION,
            });
        }
        let rows = u32::from_le_bytes(bytes[6..10].try_into().unwrap());
        let cols = u32::from_le_bytes(bytes[10..14].try_into().unwrap());
        if rows == 0 || cols == 0 {
            return Err(FormatError::EmptyArray { rows, cols });
        }
        Ok(Self {
            magic,
            version,
            rows,
            cols,
        })
    }

    fn payload<'a>(&self, bytes: &'a [u8]) -> Result<&'a [u8], FormatError> {
        let expected = self.rows as usize * self.cols as usize * self.element_size();
        let found = bytes.len() - HEADER_LEN;
        if found < expected {
            return Err(FormatError::TruncatedPayload { expected, found });
        }
        if found > expected {
            return Err(FormatError::TrailingData { expected, found });
        }
        Ok(&bytes[HEADER_LEN..])
    }
}

fn header_for(magic: [u8; 4], rows: usize, cols: usize) -> FileHeader {
    FileHeader {
        magic,
        version: FORMAT_VERSION,
        rows: u32::try_from(rows).expect("row count fits in u32"),
        cols: u32::try_from(cols).expect("column count fits in u32"),
    }
}

pub fn encode_field(field: &Field2D) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 16 * field.len());
    header_for(MAGIC_FIELD, field.rows(), field.cols()).encode(&mut out);
    for z in field.data() {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    out
}

pub fn decode_field(bytes: &[u8]) -> Result<Field2D, FormatError> {
    let header = FileHeader::decode(bytes, MAGIC_FIELD)?;
    let payload = header.payload(bytes)?;
    let mut data = Vec::with_capacity(payload.len() / 16);
    for (index, chunk) in payload.chunks_exact(16).enumerate() {
        let re = f64::from_le_bytes(chunk[..8].try_into().unwrap());
        let im = f64::from_le_bytes(chunk[8..].try_into().unwrap());
        if !(re.is_finite() && im.is_finite()) {
            return Err(FormatError::NonFinite { index });
        }
        data.push(Complex64::new(re, im));
    }
    Ok(
        Field2D::from_vec(header.rows as usize, header.cols as usize, data)
            .expect("validated shape"),
    )
}

pub fn encode_image(image: &RealImage2D) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * image.len());
    header_for(MAGIC_IMAGE, image.rows(), image.cols()).encode(&mut out);
    for v in image.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_image(bytes: &[u8]) -> Result<RealImage2D, FormatError> {
    let header = FileHeader::decode(bytes, MAGIC_IMAGE)?;
    let payload = header.payload(bytes)?;
    let mut data = Vec::with_capacity(payload.len() / 8);
    for (index, chunk) in payload.chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(FormatError::NonFinite { index });
        }
        data.push(v);
    }
    Ok(
        RealImage2D::from_vec(header.rows as usize, header.cols as usize, data)
            .expect("validated shape"),
    )
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn in_file<T>(path: &Path, r: Result<T, FormatError>) -> Result<T> {
    r.map_err(|source| Error::Decode {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_field(path: impl AsRef<Path>, field: &Field2D) -> Result<()> {
    write_bytes(path.as_ref(), &encode_field(field))
}

pub fn read_field(path: impl AsRef<Path>) -> Result<Field2D> {
    let path = path.as_ref();
    in_file(path, decode_field(&read_bytes(path)?))
}

pub fn write_image(path: impl AsRef<Path>, image: &RealImage2D) -> Result<()> {
    write_bytes(path.as_ref(), &encode_image(image))
}

pub fn read_image(path: impl AsRef<Path>) -> Result<RealImage2D> {
    let path = path.as_ref();
    in_file(path, decode_image(&read_bytes(path)?))
}

/// Reads an `FPMR` image and enforces the amplitude-measurement contract
/// (every entry non-negative).
pub fn read_measurement(path: impl AsRef<Path>) -> Result<RealImage2D> {
    let image = read_image(path.as_ref())?;
    if let Some((index, &value)) = image.data().iter().enumerate().find(|(_, v)| **v < 0.0) {
        return Err(Error::Decode {
            path: path.as_ref().to_path_buf(),
            source: FormatError::NegativeMeasurement { index, value },
        });
    }
    Ok(image)
}
