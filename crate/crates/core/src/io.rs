//! Volume file formats.
//!
//! Native format "VVOL": a small text header (`.vvol`) next to a raw
//! little-endian binary file of voxels in x-fastest order:
//!
//! ```text
//! VVOL 1
//! dims: 128 128 128
//! spacing_mm: 1 1 1
//! origin_mm: 0 0 0
//! dtype: f64
//! byte_order: little
//! data_file: phantom.raw
//! ```
//!
//! A minimal NRRD subset (3-D, raw encoding, little endian, attached or
//! detached) is accepted read-only; files ending in `.nrrd`/`.nhdr` are
//! dispatched to that reader.

use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::vec3::Vec3;
use crate::volume::Volume;

/// On-disk voxel scalar types.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalarType {
    U8,
    I16,
    U16,
    F32,
    F64,
}

impl ScalarType {
    pub fn name(self) -> &'static str {
        match self {
            ScalarType::U8 => "u8",
            ScalarType::I16 => "i16",
            ScalarType::U16 => "u16",
            ScalarType::F32 => "f32",
            ScalarType::F64 => "f64",
        }
    }

    pub fn byte_size(self) -> usize {
        match self {
            ScalarType::U8 => 1,
            ScalarType::I16 | ScalarType::U16 => 2,
            ScalarType::F32 => 4,
            ScalarType::F64 => 8,
        }
    }

    fn from_vvol_name(s: &str) -> Result<Self> {
        match s {
            "u8" => Ok(ScalarType::U8),
            "i16" => Ok(ScalarType::I16),
            "u16" => Ok(ScalarType::U16),
            "f32" => Ok(ScalarType::F32),
            "f64" => Ok(ScalarType::F64),
            other => Err(Error::UnsupportedScalarType(other.to_string())),
        }
    }

    fn from_nrrd_name(s: &str) -> Result<Self> {
        match s {
            "uchar" | "unsigned char" | "uint8" | "uint8_t" => Ok(ScalarType::U8),
            "short" | "short int" | "signed short" | "signed short int" | "int16" | "int16_t" => {
                Ok(ScalarType::I16)
            }
            "ushort" | "unsigned short" | "unsigned short int" | "uint16" | "uint16_t" => {
                Ok(ScalarType::U16)
            }
            "float" => Ok(ScalarType::F32),
            "double" => Ok(ScalarType::F64),
            other => Err(Error::UnsupportedScalarType(other.to_string())),
        }
    }
}

/// Load a volume from a `.vvol` header or a `.nrrd`/`.nhdr` file.
/// Intensities are converted to the caller's scalar type.
pub fn load_volume<T: Real>(path: impl AsRef<Path>) -> Result<Volume<T>> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some("nrrd") | Some("nhdr") => load_nrrd(path),
        _ => load_vvol(path),
    }
}

/// Write `vol` as a VVOL header at `path` plus a raw data file next to it
/// (same stem, `.raw` extension).
pub fn save_volume<T: Real>(vol: &Volume<T>, path: impl AsRef<Path>, dtype: ScalarType) -> Result<()> {
    let path = path.as_ref();
    let raw_path = path.with_extension("raw");
    let raw_name = raw_path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| Error::format("VVOL path", "missing file name"))?
        .to_string();

    let d = vol.dims();
    let s = vol.spacing();
    let o = vol.origin();
    let header = format!(
        "VVOL 1\ndims: {} {} {}\nspacing_mm: {} {} {}\norigin_mm: {} {} {}\ndtype: {}\nbyte_order: little\ndata_file: {}\n",
        d[0], d[1], d[2],
        s.x.as_f64(), s.y.as_f64(), s.z.as_f64(),
        o.x.as_f64(), o.y.as_f64(), o.z.as_f64(),
        dtype.name(),
        raw_name,
    );
    fs::write(path, header).map_err(|e| Error::io(path, e))?;

    let mut bytes = Vec::with_capacity(vol.len() * dtype.byte_size());
    for &v in vol.data() {
        encode_scalar(v, dtype, &mut bytes);
    }
    fs::write(&raw_path, bytes).map_err(|e| Error::io(&raw_path, e))?;
    Ok(())
}

fn encode_scalar<T: Real>(v: T, dtype: ScalarType, out: &mut Vec<u8>) {
    let x = v.as_f64();
    match dtype {
        ScalarType::U8 => out.push(x.round().clamp(0.0, 255.0) as u8),
        ScalarType::I16 => out.extend_from_slice(&(x.round().clamp(-32768.0, 32767.0) as i16).to_le_bytes()),
        ScalarType::U16 => out.extend_from_slice(&(x.round().clamp(0.0, 65535.0) as u16).to_le_bytes()),
        ScalarType::F32 => out.extend_from_slice(&(x as f32).to_le_bytes()),
        ScalarType::F64 => out.extend_from_slice(&x.to_le_bytes()),
    }
}

fn decode_data<T: Real>(bytes: &[u8], dtype: ScalarType, expected: usize) -> Result<Vec<T>> {
    let size = dtype.byte_size();
    if bytes.len() != expected * size {
        return Err(Error::DataLengthMismatch {
            expected,
            actual: bytes.len() / size,
        });
    }
    let mut data = Vec::with_capacity(expected);
    match dtype {
        ScalarType::U8 => {
            for &b in bytes {
                data.push(T::of(b as f64));
            }
        }
        ScalarType::I16 => {
            for c in bytes.chunks_exact(2) {
                data.push(T::of(i16::from_le_bytes([c[0], c[1]]) as f64));
            }
        }
        ScalarType::U16 => {
            for c in bytes.chunks_exact(2) {
                data.push(T::of(u16::from_le_bytes([c[0], c[1]]) as f64));
            }
        }
        ScalarType::F32 => {
            for c in bytes.chunks_exact(4) {
                data.push(T::of(f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64));
            }
        }
        ScalarType::F64 => {
            for c in bytes.chunks_exact(8) {
                data.push(T::of(f64::from_le_bytes([
                    c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7],
                ])));
            }
        }
    }
    Ok(data)
}

fn parse_triple<V: Copy, F: Fn(&str) -> Option<V>>(value: &str, parse: F, what: &'static str) -> Result<[V; 3]> {
    let parts: Vec<_> = value.split_whitespace().collect();
    if parts.len() != 3 {
        return Err(Error::format(what, format!("expected 3 values, got `{value}`")));
    }
    let mut out = Vec::with_capacity(3);
    for p in parts {
        out.push(parse(p).ok_or_else(|| Error::format(what, format!("bad value `{p}`")))?);
    }
    Ok([out[0], out[1], out[2]])
}

fn load_vvol<T: Real>(path: &Path) -> Result<Volume<T>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let magic = lines.next().unwrap_or("");
    if !magic.starts_with("VVOL") {
        return Err(Error::format("VVOL header", "missing VVOL magic line"));
    }

    let mut dims: Option<[usize; 3]> = None;
    let mut spacing: Option<[f64; 3]> = None;
    let mut origin: [f64; 3] = [0.0; 3];
    let mut dtype: Option<ScalarType> = None;
    let mut data_file: Option<String> = None;

    for line in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once(':')
            .ok_or_else(|| Error::format("VVOL header", format!("expected `key: value`, got `{line}`")))?;
        let value = value.trim();
        match key.trim() {
            "dims" => dims = Some(parse_triple(value, |s| s.parse::<usize>().ok(), "VVOL dims")?),
            "spacing_mm" => spacing = Some(parse_triple(value, |s| s.parse::<f64>().ok(), "VVOL spacing_mm")?),
            "origin_mm" => origin = parse_triple(value, |s| s.parse::<f64>().ok(), "VVOL origin_mm")?,
            "dtype" => dtype = Some(ScalarType::from_vvol_name(value)?),
            "byte_order" => {
                if value != "little" {
                    return Err(Error::format("VVOL header", format!("unsupported byte_order `{value}`")));
                }
            }
            "data_file" => data_file = Some(value.to_string()),
            other => return Err(Error::format("VVOL header", format!("unknown key `{other}`"))),
        }
    }

    let dims = dims.ok_or_else(|| Error::format("VVOL header", "missing key `dims`"))?;
    let spacing = spacing.ok_or_else(|| Error::format("VVOL header", "missing key `spacing_mm`"))?;
    let dtype = dtype.ok_or_else(|| Error::format("VVOL header", "missing key `dtype`"))?;
    let data_file = data_file.ok_or_else(|| Error::format("VVOL header", "missing key `data_file`"))?;

    let raw_path = sibling(path, &data_file);
    let bytes = fs::read(&raw_path).map_err(|e| Error::io(&raw_path, e))?;
    let expected = dims[0] * dims[1] * dims[2];
    let data = decode_data::<T>(&bytes, dtype, expected)?;
    Volume::new(
        dims,
        Vec3::of(spacing[0], spacing[1], spacing[2]),
        Vec3::of(origin[0], origin[1], origin[2]),
        data,
    )
}

fn sibling(header: &Path, name: &str) -> PathBuf {
    let rel = Path::new(name);
    if rel.is_absolute() {
        rel.to_path_buf()
    } else {
        header.parent().unwrap_or_else(|| Path::new(".")).join(rel)
    }
}

fn load_nrrd<T: Real>(path: &Path) -> Result<Volume<T>> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;

    // Header is ASCII lines up to the first blank line.
    let mut offset = 0usize;
    let mut header_lines: Vec<String> = Vec::new();
    let mut saw_blank = false;
    while offset < bytes.len() {
        let end = bytes[offset..]
            .iter()
            .position(|&b| b == b'\n')
            .map(|p| offset + p)
            .unwrap_or(bytes.len());
        let line = String::from_utf8_lossy(&bytes[offset..end]).trim_end_matches('\r').to_string();
        offset = end + 1;
        if line.is_empty() {
            saw_blank = true;
            break;
        }
        header_lines.push(line);
    }

    if header_lines.is_empty() || !header_lines[0].starts_with("NRRD") {
        return Err(Error::format("NRRD header", "missing NRRD magic line"));
    }

    let mut sizes: Option<[usize; 3]> = None;
    let mut spacing = [1.0f64; 3];
    let mut origin = [0.0f64; 3];
    let mut dtype: Option<ScalarType> = None;
    let mut encoding: Option<String> = None;
    let mut data_file: Option<String> = None;

    for line in &header_lines[1..] {
        if line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once(':') else {
            continue; // NRRD key/value pairs with := are metadata we ignore
        };
        let key = key.trim().to_ascii_lowercase();
        let value = value.trim();
        match key.as_str() {
            "dimension" => {
                if value != "3" {
                    return Err(Error::format("NRRD header", format!("only 3-D supported, got dimension {value}")));
                }
            }
            "sizes" => sizes = Some(parse_triple(value, |s| s.parse::<usize>().ok(), "NRRD sizes")?),
            "spacings" => spacing = parse_triple(value, |s| s.parse::<f64>().ok(), "NRRD spacings")?,
            "space directions" => spacing = parse_space_directions(value)?,
            "space origin" => origin = parse_paren_triple(value, "NRRD space origin")?,
            "type" => dtype = Some(ScalarType::from_nrrd_name(value)?),
            "encoding" => encoding = Some(value.to_string()),
            "endian" => {
                if value != "little" {
                    return Err(Error::format("NRRD header", format!("unsupported endian `{value}`")));
                }
            }
            "data file" | "datafile" => data_file = Some(value.to_string()),
            _ => {} // tolerate unknown fields (kinds, space, etc.)
        }
    }

    let sizes = sizes.ok_or_else(|| Error::format("NRRD header", "missing `sizes`"))?;
    let dtype = dtype.ok_or_else(|| Error::format("NRRD header", "missing `type`"))?;
    match encoding.as_deref() {
        Some("raw") => {}
        other => {
            return Err(Error::format(
                "NRRD header",
                format!("only raw encoding supported, got {other:?}"),
            ))
        }
    }

    let expected = sizes[0] * sizes[1] * sizes[2];
    let payload: Vec<u8> = match data_file {
        Some(name) => {
            let p = sibling(path, &name);
            fs::read(&p).map_err(|e| Error::io(&p, e))?
        }
        None => {
            if !saw_blank {
                return Err(Error::format("NRRD header", "attached data requires blank line after header"));
            }
            bytes[offset..].to_vec()
        }
    };
    let data = decode_data::<T>(&payload, dtype, expected)?;
    Volume::new(
        sizes,
        Vec3::of(spacing[0], spacing[1], spacing[2]),
        Vec3::of(origin[0], origin[1], origin[2]),
        data,
    )
}

/// Parse `(sx,0,0) (0,sy,0) (0,0,sz)`, accepting only axis-aligned grids.
fn parse_space_directions(value: &str) -> Result<[f64; 3]> {
    let vecs: Vec<&str> = value.split_whitespace().collect();
    if vecs.len() != 3 {
        return Err(Error::format("NRRD space directions", format!("expected 3 vectors, got `{value}`")));
    }
    let mut spacing = [0.0f64; 3];
    for (axis, v) in vecs.iter().enumerate() {
        let comps = parse_paren_triple(v, "NRRD space directions")?;
        for (i, c) in comps.iter().enumerate() {
            if i == axis {
                spacing[axis] = c.abs();
            } else if c.abs() > 1e-12 {
                return Err(Error::format(
                    "NRRD space directions",
                    "only axis-aligned (diagonal) space directions supported",
                ));
            }
        }
        if spacing[axis] <= 0.0 {
            return Err(Error::format("NRRD space directions", "zero spacing"));
        }
    }
    Ok(spacing)
}

fn parse_paren_triple(value: &str, what: &'static str) -> Result<[f64; 3]> {
    let inner = value.trim().trim_start_matches('(').trim_end_matches(')');
    let parts: Vec<_> = inner.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(Error::format(what, format!("expected `(a,b,c)`, got `{value}`")));
    }
    let mut out = [0.0f64; 3];
    for (i, p) in parts.iter().enumerate() {
        out[i] = p
            .parse::<f64>()
            .map_err(|_| Error::format(what, format!("bad number `{p}`")))?;
    }
    Ok(out)
}
