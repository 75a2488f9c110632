//! NIfTI-1 single-file (`.nii`, `.nii.gz`) reading and writing.
//!
//! Geometry is taken from the sform when `sform_code > 0`, else from the
//! qform when `qform_code > 0`, else from `pixdim` with identity direction.
//! Written files always carry both an sform and a matching qform, a 4-byte
//! empty extension block and `vox_offset = 352`. Intensities are written as
//! float32 and masks as uint8, little-endian.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use crate::error::{Error, Result};
use crate::volume::{GridGeometry, Mask, Volume, IDENTITY};

pub const HEADER_SIZE: usize = 348;
pub const VOX_OFFSET: usize = 352;
pub const MAGIC: [u8; 4] = *b"n+1\0";

pub const DT_UINT8: i16 = 2;
pub const DT_INT16: i16 = 4;
pub const DT_INT32: i16 = 8;
pub const DT_FLOAT32: i16 = 16;
pub const DT_FLOAT64: i16 = 64;

const UNITS_MM: u8 = 2;
const UNITS_SEC: u8 = 8;

/// The subset of NIfTI-1 header fields this crate reads or writes.
#[derive(Debug, Clone, PartialEq)]
pub struct NiftiHeader {
    pub dim: [i16; 8],
    pub datatype: i16,
    pub bitpix: i16,
    pub pixdim: [f32; 8],
    pub vox_offset: f32,
    pub scl_slope: f32,
    pub scl_inter: f32,
    pub xyzt_units: u8,
    pub descrip: [u8; 80],
    pub qform_code: i16,
    pub sform_code: i16,
    pub quatern: [f32; 3],
    pub qoffset: [f32; 3],
    pub srow: [[f32; 4]; 3],
    pub magic: [u8; 4],
}

impl Default for NiftiHeader {
    fn default() -> Self {
        NiftiHeader {
            dim: [3, 1, 1, 1, 1, 1, 1, 1],
            datatype: DT_FLOAT32,
            bitpix: 32,
            pixdim: [1.0; 8],
            vox_offset: VOX_OFFSET as f32,
            scl_slope: 1.0,
            scl_inter: 0.0,
            xyzt_units: UNITS_MM | UNITS_SEC,
            descrip: [0; 80],
            qform_code: 0,
            sform_code: 0,
            quatern: [0.0; 3],
            qoffset: [0.0; 3],
            srow: [[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]],
            magic: MAGIC,
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    big_endian: bool,
}

impl Reader<'_> {
    fn arr<const N: usize>(&self, off: usize) -> [u8; N] {
        let mut a = [0u8; N];
        a.copy_from_slice(&self.bytes[off..off + N]);
        if self.big_endian {
            a.reverse();
        }
        a
    }
    fn i16(&self, off: usize) -> i16 {
        i16::from_le_bytes(self.arr(off))
    }
    fn f32(&self, off: usize) -> f32 {
        f32::from_le_bytes(self.arr(off))
    }
}

fn datatype_size(code: i16) -> Option<usize> {
    match code {
        DT_UINT8 => Some(1),
        DT_INT16 => Some(2),
        DT_INT32 => Some(4),
        DT_FLOAT32 => Some(4),
        DT_FLOAT64 => Some(8),
        _ => None,
    }
}

impl NiftiHeader {
    /// Parses the first 348 bytes. Returns the header and whether the file
    /// is big-endian.
    pub fn parse(bytes: &[u8], path: &Path) -> Result<(NiftiHeader, bool)> {
        if bytes.len() < HEADER_SIZE {
            return Err(Error::Truncated {
                path: path.to_path_buf(),
                expected: HEADER_SIZE,
                found: bytes.len(),
            });
        }
        let le = i32::from_le_bytes(bytes[0..4].try_into().unwrap());
        let be = i32::from_be_bytes(bytes[0..4].try_into().unwrap());
        let big_endian = match (le, be) {
            (348, _) => false,
            (_, 348) => true,
            _ => {
                return Err(Error::BadHeader {
                    path: path.to_path_buf(),
                    reason: format!("sizeof_hdr is {le}, expected 348"),
                })
            }
        };
        let mut magic = [0u8; 4];
        magic.copy_from_slice(&bytes[344..348]);
        if magic != MAGIC {
            return Err(Error::BadMagic {
                path: path.to_path_buf(),
                found: magic,
            });
        }
        let r = Reader { bytes, big_endian };
        let mut dim = [0i16; 8];
        for (k, d) in dim.iter_mut().enumerate() {
            *d = r.i16(40 + 2 * k);
        }
        let mut pixdim = [0f32; 8];
        for (k, p) in pixdim.iter_mut().enumerate() {
            *p = r.f32(76 + 4 * k);
        }
        let mut descrip = [0u8; 80];
        descrip.copy_from_slice(&bytes[148..228]);
        let mut srow = [[0f32; 4]; 3];
        for (row, s) in srow.iter_mut().enumerate() {
            for (c, v) in s.iter_mut().enumerate() {
                *v = r.f32(280 + 16 * row + 4 * c);
            }
        }
        let header = NiftiHeader {
            dim,
            datatype: r.i16(70),
            bitpix: r.i16(72),
            pixdim,
            vox_offset: r.f32(108),
            scl_slope: r.f32(112),
            scl_inter: r.f32(116),
            xyzt_units: bytes[123],
            descrip,
            qform_code: r.i16(252),
            sform_code: r.i16(254),
            quatern: [r.f32(256), r.f32(260), r.f32(264)],
            qoffset: [r.f32(268), r.f32(272), r.f32(276)],
            srow,
            magic,
        };
        Ok((header, big_endian))
    }

    /// Little-endian encoding of the 348-byte header.
    pub fn encode(&self) -> [u8; HEADER_SIZE] {
        let mut b = [0u8; HEADER_SIZE];
        let mut put = |off: usize, src: &[u8]| b[off..off + src.len()].copy_from_slice(src);
        put(0, &(HEADER_SIZE as i32).to_le_bytes());
        put(38, b"r"); // regular, legacy ANALYZE field
        for (k, d) in self.dim.iter().enumerate() {
            put(40 + 2 * k, &d.to_le_bytes());
        }
        put(70, &self.datatype.to_le_bytes());
        put(72, &self.bitpix.to_le_bytes());
        for (k, p) in self.pixdim.iter().enumerate() {
            put(76 + 4 * k, &p.to_le_bytes());
        }
        put(108, &self.vox_offset.to_le_bytes());
        put(112, &self.scl_slope.to_le_bytes());
        put(116, &self.scl_inter.to_le_bytes());
        put(123, &[self.xyzt_units]);
        put(148, &self.descrip);
        put(252, &self.qform_code.to_le_bytes());
        put(254, &self.sform_code.to_le_bytes());
        for (k, q) in self.quatern.iter().enumerate() {
            put(256 + 4 * k, &q.to_le_bytes());
        }
        for (k, q) in self.qoffset.iter().enumerate() {
            put(268 + 4 * k, &q.to_le_bytes());
        }
        for (row, s) in self.srow.iter().enumerate() {
            for (c, v) in s.iter().enumerate() {
                put(280 + 16 * row + 4 * c, &v.to_le_bytes());
            }
        }
        put(344, &self.magic);
        b
    }

    pub fn dims(&self) -> [usize; 3] {
        let nd = self.dim[0].clamp(1, 7) as usize;
        let mut out = [1usize; 3];
        for (a, o) in out.iter_mut().enumerate() {
            if a < nd {
                *o = self.dim[a + 1].max(0) as usize;
            }
        }
        out
    }

    fn geometry(&self, path: &Path) -> Result<GridGeometry> {
        let dims = self.dims();
        let bad = |reason: String| Error::BadHeader {
            path: path.to_path_buf(),
            reason,
        };
        let (spacing, origin, direction) = if self.sform_code > 0 {
            let mut spacing = [0.0; 3];
            let mut direction = [[0.0; 3]; 3];
            for c in 0..3 {
                let col: Vec<f64> = (0..3).map(|r| self.srow[r][c] as f64).collect();
                let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
                if !(norm > 0.0) {
                    return Err(bad(format!("sform column {c} has zero length")));
                }
                spacing[c] = norm;
                for r in 0..3 {
                    direction[r][c] = col[r] / norm;
                }
            }
            let origin = [
                self.srow[0][3] as f64,
                self.srow[1][3] as f64,
                self.srow[2][3] as f64,
            ];
            (spacing, origin, direction)
        } else if self.qform_code > 0 {
            let [b, c, d] = self.quatern.map(f64::from);
            let a = (1.0 - (b * b + c * c + d * d)).max(0.0).sqrt();
            let mut r = [
                [a * a + b * b - c * c - d * d, 2.0 * (b * c - a * d), 2.0 * (b * d + a * c)],
                [2.0 * (b * c + a * d), a * a + c * c - b * b - d * d, 2.0 * (c * d - a * b)],
                [2.0 * (b * d - a * c), 2.0 * (c * d + a * b), a * a + d * d - b * b - c * c],
            ];
            if self.pixdim[0] < 0.0 {
                for row in r.iter_mut() {
                    row[2] = -row[2];
                }
            }
            let spacing = [1, 2, 3].map(|k| (self.pixdim[k] as f64).abs());
            (spacing, self.qoffset.map(f64::from), r)
        } else {
            let spacing = [1, 2, 3].map(|k| {
                let p = (self.pixdim[k] as f64).abs();
                if p > 0.0 {
                    p
                } else {
                    1.0
                }
            });
            (spacing, [0.0; 3], IDENTITY)
        };
        GridGeometry::new(dims, spacing, origin, direction)
            .map_err(|e| bad(format!("invalid geometry: {e}")))
    }
}

fn load_bytes(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path).map_err(|e| Error::io(path, e))?;
    let gz = path.extension().is_some_and(|e| e == "gz")
        || (raw.len() >= 2 && raw[0] == 0x1f && raw[1] == 0x8b);
    if !gz {
        return Ok(raw);
    }
    let mut out = Vec::new();
    GzDecoder::new(raw.as_slice())
        .read_to_end(&mut out)
        .map_err(|e| Error::io(path, e))?;
    Ok(out)
}

/// Reads the header only.
pub fn read_header(path: impl AsRef<Path>) -> Result<NiftiHeader> {
    let path = path.as_ref();
    let bytes = load_bytes(path)?;
    NiftiHeader::parse(&bytes, path).map(|(h, _)| h)
}

fn decode(path: &Path) -> Result<(GridGeometry, Vec<f64>)> {
    let bytes = load_bytes(path)?;
    let (header, big_endian) = NiftiHeader::parse(&bytes, path)?;
    if header.dim[0] < 1 || header.dim[0] > 7 {
        return Err(Error::BadHeader {
            path: path.to_path_buf(),
            reason: format!("dim[0] = {} out of range", header.dim[0]),
        });
    }
    if (4..=header.dim[0] as usize).any(|k| header.dim[k] > 1) {
        return Err(Error::BadHeader {
            path: path.to_path_buf(),
            reason: "only 3D volumes are supported".into(),
        });
    }
    let size = datatype_size(header.datatype).ok_or_else(|| Error::UnsupportedDatatype {
        path: path.to_path_buf(),
        code: header.datatype,
    })?;
    let geometry = header.geometry(path)?;
    let offset = header.vox_offset as usize;
    if !(header.vox_offset >= HEADER_SIZE as f32) {
        return Err(Error::BadHeader {
            path: path.to_path_buf(),
            reason: format!("vox_offset {} before end of header", header.vox_offset),
        });
    }
    let n = geometry.len();
    let expected = offset + n * size;
    if bytes.len() < expected {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected,
            found: bytes.len(),
        });
    }
    let payload = &bytes[offset..expected];
    let word = |chunk: &[u8], out: &mut [u8]| {
        out.copy_from_slice(chunk);
        if big_endian {
            out.reverse();
        }
    };
    let mut data = Vec::with_capacity(n);
    for chunk in payload.chunks_exact(size) {
        let v = match header.datatype {
            DT_UINT8 => chunk[0] as f64,
            DT_INT16 => {
                let mut b = [0u8; 2];
                word(chunk, &mut b);
                i16::from_le_bytes(b) as f64
            }
            DT_INT32 => {
                let mut b = [0u8; 4];
                word(chunk, &mut b);
                i32::from_le_bytes(b) as f64
            }
            DT_FLOAT32 => {
                let mut b = [0u8; 4];
                word(chunk, &mut b);
                f32::from_le_bytes(b) as f64
            }
            _ => {
                let mut b = [0u8; 8];
                word(chunk, &mut b);
                f64::from_le_bytes(b)
            }
        };
        data.push(v);
    }
    let slope = header.scl_slope as f64;
    let inter = header.scl_inter as f64;
    if slope.is_finite() && slope != 0.0 && !(slope == 1.0 && inter == 0.0) {
        for v in data.iter_mut() {
            *v = *v * slope + inter;
        }
    }
    Ok((geometry, data))
}

/// Reads an intensity volume. Non-finite voxels are rejected.
pub fn read_volume(path: impl AsRef<Path>) -> Result<Volume> {
    let path = path.as_ref();
    let (geometry, data) = decode(path)?;
    Volume::new(geometry, data).map_err(|e| Error::BadHeader {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

/// Reads a binary mask; every voxel must be exactly 0 or 1.
pub fn read_mask(path: impl AsRef<Path>) -> Result<Mask> {
    let path = path.as_ref();
    let (geometry, data) = decode(path)?;
    if let Some(v) = data.iter().find(|&&v| v != 0.0 && v != 1.0) {
        return Err(Error::InvalidMask(format!(
            "{}: value {v} is not 0 or 1",
            path.display()
        )));
    }
    Mask::new(geometry, data.into_iter().map(|v| v as u8).collect())
}

fn determinant(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Quaternion `(b, c, d)` and qfac for an orthonormal direction matrix.
fn quaternion(direction: &[[f64; 3]; 3]) -> ([f64; 3], f64) {
    let mut r = *direction;
    let qfac = if determinant(&r) < 0.0 { -1.0 } else { 1.0 };
    if qfac < 0.0 {
        for row in r.iter_mut() {
            row[2] = -row[2];
        }
    }
    let (r11, r12, r13) = (r[0][0], r[0][1], r[0][2]);
    let (r21, r22, r23) = (r[1][0], r[1][1], r[1][2]);
    let (r31, r32, r33) = (r[2][0], r[2][1], r[2][2]);
    let trace = r11 + r22 + r33 + 1.0;
    let (a, mut b, mut c, mut d);
    if trace > 0.5 {
        a = 0.5 * trace.sqrt();
        b = 0.25 * (r32 - r23) / a;
        c = 0.25 * (r13 - r31) / a;
        d = 0.25 * (r21 - r12) / a;
    } else {
        let xd = 1.0 + r11 - (r22 + r33);
        let yd = 1.0 + r22 - (r11 + r33);
        let zd = 1.0 + r33 - (r11 + r22);
        if xd > 1.0 {
            b = 0.5 * xd.sqrt();
            c = 0.25 * (r12 + r21) / b;
            d = 0.25 * (r13 + r31) / b;
            a = 0.25 * (r32 - r23) / b;
        } else if yd > 1.0 {
            c = 0.5 * yd.sqrt();
            b = 0.25 * (r12 + r21) / c;
            d = 0.25 * (r23 + r32) / c;
            a = 0.25 * (r13 - r31) / c;
        } else {
            d = 0.5 * zd.sqrt();
            b = 0.25 * (r13 + r31) / d;
            c = 0.25 * (r23 + r32) / d;
            a = 0.25 * (r21 - r12) / d;
        }
        if a < 0.0 {
            b = -b;
            c = -c;
            d = -d;
        }
    }
    ([b, c, d], qfac)
}

fn header_for(geometry: &GridGeometry, datatype: i16, bitpix: i16) -> NiftiHeader {
    let (quat, qfac) = quaternion(&geometry.direction);
    let mut h = NiftiHeader {
        datatype,
        bitpix,
        qform_code: 1,
        sform_code: 1,
        quatern: quat.map(|v| v as f32),
        qoffset: geometry.origin.map(|v| v as f32),
        ..NiftiHeader::default()
    };
    for a in 0..3 {
        h.dim[a + 1] = geometry.dims[a] as i16;
        h.pixdim[a + 1] = geometry.spacing[a] as f32;
    }
    h.pixdim[0] = qfac as f32;
    for r in 0..3 {
        for c in 0..3 {
            h.srow[r][c] = (geometry.direction[r][c] * geometry.spacing[c]) as f32;
        }
        h.srow[r][3] = geometry.origin[r] as f32;
    }
    let tag = b"suvclip";
    h.descrip[..tag.len()].copy_from_slice(tag);
    h
}

fn write_file(path: &Path, header: &NiftiHeader, payload: &[u8]) -> Result<()> {
    if header.dim[1..4].iter().any(|&d| d <= 0) {
        return Err(Error::InvalidArgument(format!(
            "{}: grid too large for NIfTI-1 (dims must fit in i16)",
            path.display()
        )));
    }
    let mut bytes = Vec::with_capacity(VOX_OFFSET + payload.len());
    bytes.extend_from_slice(&header.encode());
    bytes.extend_from_slice(&[0u8; VOX_OFFSET - HEADER_SIZE]);
    bytes.extend_from_slice(payload);
    let out = if path.extension().is_some_and(|e| e == "gz") {
        let mut enc = GzEncoder::new(Vec::new(), Compression::default());
        enc.write_all(&bytes).map_err(|e| Error::io(path, e))?;
        enc.finish().map_err(|e| Error::io(path, e))?
    } else {
        bytes
    };
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn check_dims(geometry: &GridGeometry, path: &Path) -> Result<()> {
    if geometry.dims.iter().any(|&d| d > i16::MAX as usize) {
        return Err(Error::InvalidArgument(format!(
            "{}: dims {:?} exceed NIfTI-1 limits",
            path.display(),
            geometry.dims
        )));
    }
    Ok(())
}

/// Writes an intensity volume as float32.
pub fn write_volume(vol: &Volume, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    check_dims(vol.geometry(), path)?;
    let header = header_for(vol.geometry(), DT_FLOAT32, 32);
    let mut payload = Vec::with_capacity(vol.len() * 4);
    for &v in vol.data() {
        payload.extend_from_slice(&(v as f32).to_le_bytes());
    }
    write_file(path, &header, &payload)
}

/// Writes a mask as uint8.
pub fn write_mask(mask: &Mask, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    check_dims(mask.geometry(), path)?;
    let header = header_for(mask.geometry(), DT_UINT8, 8);
    write_file(path, &header, mask.data())
}
