//! PLY reader and writer for colored vertex clouds.
//!
//! Reads `ascii` and `binary_little_endian` files. Vertices need `x y z` as
//! float or double and `red green blue` as uchar; other scalar properties and
//! other elements are skipped.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{ColorRGB, Vec3};

use super::PointCloud;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Option<Scalar> {
        Some(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => f64::from(b[0] as i8),
            Scalar::U8 => f64::from(b[0]),
            Scalar::I16 => f64::from(i16::from_le_bytes([b[0], b[1]])),
            Scalar::U16 => f64::from(u16::from_le_bytes([b[0], b[1]])),
            Scalar::I32 => f64::from(i32::from_le_bytes([b[0], b[1], b[2], b[3]])),
            Scalar::U32 => f64::from(u32::from_le_bytes([b[0], b[1], b[2], b[3]])),
            Scalar::F32 => f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])),
            Scalar::F64 => f64::from_le_bytes([b[0], b[1], b[2], b[3], b[4], b[5], b[6], b[7]]),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { count: Scalar, item: Scalar },
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

struct Header {
    format: PlyFormat,
    elements: Vec<Element>,
    body_offset: usize,
}

fn err(offset: usize, message: impl Into<String>) -> Error {
    Error::Ply {
        offset,
        message: message.into(),
    }
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    let mut offset = 0;
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    let mut first = true;
    loop {
        let rest = &bytes[offset..];
        let Some(nl) = rest.iter().position(|&b| b == b'\n') else {
            return Err(err(offset, "header is not terminated by end_header"));
        };
        let line_start = offset;
        let line = std::str::from_utf8(&rest[..nl])
            .map_err(|_| err(line_start, "header line is not valid text"))?
            .trim_end_matches('\r');
        offset += nl + 1;
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if first {
            if line != "ply" {
                return Err(err(line_start, "missing 'ply' magic"));
            }
            first = false;
            continue;
        }
        match tokens.as_slice() {
            [] => {}
            ["comment", ..] | ["obj_info", ..] => {}
            ["format", kind, version] => {
                if *version != "1.0" {
                    return Err(err(line_start, format!("unsupported PLY version {version}")));
                }
                format = Some(match *kind {
                    "ascii" => PlyFormat::Ascii,
                    "binary_little_endian" => PlyFormat::BinaryLittleEndian,
                    other => return Err(err(line_start, format!("unsupported format {other}"))),
                });
            }
            ["element", name, count] => {
                let count = count
                    .parse()
                    .map_err(|_| err(line_start, format!("bad element count '{count}'")))?;
                elements.push(Element {
                    name: (*name).to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            ["property", "list", count, item, _name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| err(line_start, "property before any element"))?;
                let count = Scalar::parse(count)
                    .ok_or_else(|| err(line_start, format!("unsupported property type {count}")))?;
                let item =
                    Scalar::parse(item).ok_or_else(|| err(line_start, format!("unsupported property type {item}")))?;
                el.properties.push(Property::List { count, item });
            }
            ["property", ty, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| err(line_start, "property before any element"))?;
                let ty = Scalar::parse(ty).ok_or_else(|| err(line_start, format!("unsupported property type {ty}")))?;
                el.properties.push(Property::Scalar {
                    name: (*name).to_string(),
                    ty,
                });
            }
            ["end_header"] => break,
            _ => return Err(err(line_start, format!("malformed header line '{line}'"))),
        }
    }
    let format = format.ok_or_else(|| err(0, "header has no format line"))?;
    Ok(Header {
        format,
        elements,
        body_offset: offset,
    })
}

/// Column positions of the vertex properties we need.
struct VertexLayout {
    xyz: [usize; 3],
    rgb: [usize; 3],
}

fn vertex_layout(el: &Element, header_offset: usize) -> Result<VertexLayout> {
    let find = |wanted: &str, allowed: &[Scalar]| -> Result<usize> {
        for (i, prop) in el.properties.iter().enumerate() {
            match prop {
                Property::Scalar { name, ty } if name == wanted => {
                    if !allowed.contains(ty) {
                        return Err(err(
                            header_offset,
                            format!("unsupported property type {ty:?} for '{wanted}'"),
                        ));
                    }
                    return Ok(i);
                }
                _ => {}
            }
        }
        Err(err(
            header_offset,
            format!("vertex element is missing property '{wanted}'"),
        ))
    };
    let float = [Scalar::F32, Scalar::F64];
    let uchar = [Scalar::U8];
    if el.properties.iter().any(|p| matches!(p, Property::List { .. })) {
        return Err(err(header_offset, "list properties on vertices are not supported"));
    }
    Ok(VertexLayout {
        xyz: [find("x", &float)?, find("y", &float)?, find("z", &float)?],
        rgb: [find("red", &uchar)?, find("green", &uchar)?, find("blue", &uchar)?],
    })
}

/// Reads a colored point cloud; colors are rescaled from 8 bits to `[0, 1]`.
pub fn load_ply(path: &Path) -> Result<PointCloud> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_ply(&bytes)
}

pub(crate) fn decode_ply(bytes: &[u8]) -> Result<PointCloud> {
    let header = parse_header(bytes)?;
    let Some(vertex_idx) = header.elements.iter().position(|e| e.name == "vertex") else {
        return Err(err(header.body_offset, "no vertex element"));
    };
    let layout = vertex_layout(&header.elements[vertex_idx], header.body_offset)?;
    let mut cursor = Cursor {
        bytes,
        offset: header.body_offset,
    };
    for el in &header.elements[..vertex_idx] {
        for _ in 0..el.count {
            cursor.skip_record(header.format, el)?;
        }
    }
    let el = &header.elements[vertex_idx];
    let mut positions = Vec::with_capacity(el.count);
    let mut colors = Vec::with_capacity(el.count);
    let mut values = vec![0.0; el.properties.len()];
    for _ in 0..el.count {
        cursor.read_scalars(header.format, el, &mut values)?;
        let [x, y, z] = layout.xyz.map(|i| values[i]);
        let [r, g, b] = layout.rgb.map(|i| values[i]);
        for c in [r, g, b] {
            if !(0.0..=255.0).contains(&c) || c.fract() != 0.0 {
                return Err(err(cursor.offset, format!("color value {c} is not a uchar")));
            }
        }
        positions.push(Vec3::new(x, y, z));
        colors.push(ColorRGB::from_u8([r as u8, g as u8, b as u8]));
    }
    PointCloud::new(positions, colors)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.offset + n > self.bytes.len() {
            return Err(err(self.offset, "truncated payload"));
        }
        let s = &self.bytes[self.offset..self.offset + n];
        self.offset += n;
        Ok(s)
    }

    fn ascii_line(&mut self) -> Result<(usize, Vec<&str>)> {
        let bytes = self.bytes;
        loop {
            if self.offset >= bytes.len() {
                return Err(err(self.offset, "truncated payload"));
            }
            let start = self.offset;
            let end = bytes[start..]
                .iter()
                .position(|&b| b == b'\n')
                .map_or(bytes.len(), |p| start + p);
            self.offset = (end + 1).min(bytes.len());
            let line = std::str::from_utf8(&bytes[start..end]).map_err(|_| err(start, "record is not valid text"))?;
            let tokens: Vec<&str> = line.split_whitespace().collect();
            if !tokens.is_empty() {
                return Ok((start, tokens));
            }
        }
    }

    fn read_scalars(&mut self, format: PlyFormat, el: &Element, out: &mut [f64]) -> Result<()> {
        match format {
            PlyFormat::BinaryLittleEndian => {
                for (slot, prop) in out.iter_mut().zip(&el.properties) {
                    let Property::Scalar { ty, .. } = prop else {
                        unreachable!("vertex lists rejected by layout")
                    };
                    *slot = ty.read_le(self.take(ty.size())?);
                }
            }
            PlyFormat::Ascii => {
                let (start, tokens) = self.ascii_line()?;
                if tokens.len() < out.len() {
                    return Err(err(
                        start,
                        format!("expected {} values, found {}", out.len(), tokens.len()),
                    ));
                }
                for ((slot, tok), prop) in out.iter_mut().zip(tokens).zip(&el.properties) {
                    let value: f64 = tok.parse().map_err(|_| err(start, format!("bad number '{tok}'")))?;
                    // Match the declared precision, as a binary file would.
                    *slot = match prop {
                        Property::Scalar { ty: Scalar::F32, .. } => value as f32 as f64,
                        _ => value,
                    };
                }
            }
        }
        Ok(())
    }

    fn skip_record(&mut self, format: PlyFormat, el: &Element) -> Result<()> {
        match format {
            PlyFormat::Ascii => {
                self.ascii_line()?;
            }
            PlyFormat::BinaryLittleEndian => {
                for prop in &el.properties {
                    match prop {
                        Property::Scalar { ty, .. } => {
                            self.take(ty.size())?;
                        }
                        Property::List { count, item } => {
                            let at = self.offset;
                            let n = count.read_le(self.take(count.size())?);
                            if n < 0.0 {
                                return Err(err(at, "negative list length"));
                            }
                            self.take(n as usize * item.size())?;
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Blue-to-red ramp over the range of `values`; a constant field maps to the midpoint.
pub(crate) fn ramp_colors(values: &[f64]) -> Vec<ColorRGB> {
    let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
        (lo.min(v), hi.max(v))
    });
    values
        .iter()
        .map(|&v| {
            let t = if hi > lo { (v - lo) / (hi - lo) } else { 0.5 };
            ColorRGB::new(t, 0.0, 1.0 - t)
        })
        .collect()
}

/// Encodes a cloud; positions are stored as float32 and colors as uchar.
pub fn encode_ply(cloud: &PointCloud, format: PlyFormat, colors: Option<&[ColorRGB]>) -> Vec<u8> {
    let colors = colors.unwrap_or(cloud.colors());
    let fmt = match format {
        PlyFormat::Ascii => "ascii",
        PlyFormat::BinaryLittleEndian => "binary_little_endian",
    };
    let mut out = format!(
        "ply\nformat {fmt} 1.0\nelement vertex {}\n\
         property float x\nproperty float y\nproperty float z\n\
         property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n",
        cloud.len()
    )
    .into_bytes();
    for (p, c) in cloud.positions().iter().zip(colors) {
        let xyz = [p.x as f32, p.y as f32, p.z as f32];
        let rgb = c.to_u8();
        match format {
            PlyFormat::Ascii => {
                out.extend_from_slice(
                    format!("{} {} {} {} {} {}\n", xyz[0], xyz[1], xyz[2], rgb[0], rgb[1], rgb[2]).as_bytes(),
                );
            }
            PlyFormat::BinaryLittleEndian => {
                for v in xyz {
                    out.extend_from_slice(&v.to_le_bytes());
                }
                out.extend_from_slice(&rgb);
            }
        }
    }
    out
}

/// Writes a binary little-endian PLY. With `scalar_colormap`, each point is
/// recolored on a blue-to-red ramp spanning the scalar field's range.
pub fn save_ply(cloud: &PointCloud, path: &Path, scalar_colormap: Option<&[f64]>) -> Result<()> {
    if cloud.is_empty() {
        return Err(Error::InvalidArgument("refusing to write an empty cloud".into()));
    }
    let ramp = match scalar_colormap {
        Some(values) if values.len() != cloud.len() => {
            return Err(Error::DimensionMismatch(format!(
                "colormap has {} values for {} points",
                values.len(),
                cloud.len()
            )))
        }
        Some(values) => Some(ramp_colors(values)),
        None => None,
    };
    let bytes = encode_ply(cloud, PlyFormat::BinaryLittleEndian, ramp.as_deref());
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const ASCII_ONE: &str = "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\n\
        property float y\nproperty float z\nproperty uchar red\nproperty uchar green\n\
        property uchar blue\nend_header\n0 0 0 255 0 0\n";

    #[test]
    fn ascii_single_vertex() {
        let cloud = decode_ply(ASCII_ONE.as_bytes()).unwrap();
        assert_eq!(cloud.len(), 1);
        assert_eq!(cloud.positions()[0], Vec3::zeros());
        assert_eq!(cloud.colors()[0], ColorRGB::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn missing_blue_is_named() {
        let text = ASCII_ONE
            .replace("property uchar blue\n", "")
            .replace("255 0 0", "255 0");
        let e = decode_ply(text.as_bytes()).unwrap_err();
        assert!(e.to_string().contains("'blue'"), "{e}");
    }

    #[test]
    fn truncated_binary_reports_offset() {
        let cloud = PointCloud::new(
            vec![Vec3::new(1.0, 2.0, 3.0), Vec3::new(4.0, 5.0, 6.0)],
            vec![ColorRGB::new(0.0, 1.0, 0.0); 2],
        )
        .unwrap();
        let bytes = encode_ply(&cloud, PlyFormat::BinaryLittleEndian, None);
        let cut = &bytes[..bytes.len() - 4];
        match decode_ply(cut).unwrap_err() {
            Error::Ply { offset, message } => {
                assert_eq!(message, "truncated payload");
                let header_len = bytes.windows(11).position(|w| w == b"end_header\n").unwrap() + 11;
                assert!(offset > header_len + 15 && offset <= cut.len(), "offset {offset}");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn malformed_header_and_types() {
        assert!(matches!(decode_ply(b"plx\n"), Err(Error::Ply { offset: 0, .. })));
        let bad_ty = ASCII_ONE.replace("property float x", "property quad x");
        assert!(decode_ply(bad_ty.as_bytes())
            .unwrap_err()
            .to_string()
            .contains("unsupported"));
        let int_x = ASCII_ONE.replace("property float x", "property int x");
        assert!(decode_ply(int_x.as_bytes()).is_err());
        let be = ASCII_ONE.replace("ascii", "binary_big_endian");
        assert!(decode_ply(be.as_bytes()).is_err());
    }

    #[test]
    fn skips_extra_properties_and_leading_elements() {
        let text = "ply\nformat ascii 1.0\ncomment hi\nelement face 1\nproperty list uchar int idx\n\
            element vertex 2\nproperty double x\nproperty double y\nproperty double z\n\
            property float nx\nproperty uchar red\nproperty uchar green\nproperty uchar blue\n\
            end_header\n3 0 1 2\n1 2 3 0.5 10 20 30\n4 5 6 0.5 40 50 60\n";
        let cloud = decode_ply(text.as_bytes()).unwrap();
        assert_eq!(cloud.positions()[1], Vec3::new(4.0, 5.0, 6.0));
        assert_eq!(cloud.colors()[1].to_u8(), [40, 50, 60]);
    }

    #[test]
    fn ramp_endpoints_and_degenerate() {
        let ramp = ramp_colors(&[0.0, 1.0]);
        assert_eq!(ramp[0], ColorRGB::new(0.0, 0.0, 1.0));
        assert_eq!(ramp[1], ColorRGB::new(1.0, 0.0, 0.0));
        let flat = ramp_colors(&[3.0, 3.0, 3.0]);
        assert!(flat.iter().all(|c| *c == ColorRGB::new(0.5, 0.0, 0.5)));
    }

    #[test]
    fn save_with_colormap_recolors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("viz.ply");
        let cloud = PointCloud::new(vec![Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0)], vec![ColorRGB::BLACK; 2]).unwrap();
        save_ply(&cloud, &path, Some(&[0.0, 1.0])).unwrap();
        let back = load_ply(&path).unwrap();
        assert_eq!(back.colors()[0], ColorRGB::new(0.0, 0.0, 1.0));
        assert_eq!(back.colors()[1], ColorRGB::new(1.0, 0.0, 0.0));
        assert!(save_ply(&cloud, &path, Some(&[0.0])).is_err());
        assert!(save_ply(&PointCloud::default(), &path, None).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_is_float32_and_8bit_exact(
            pts in proptest::collection::vec(
                ((-8.0..8.0f64, -8.0..8.0f64, -8.0..8.0f64), (0u8.., 0u8.., 0u8..)), 1..40),
            ascii in any::<bool>(),
        ) {
            let positions: Vec<Vec3> = pts.iter().map(|((x, y, z), _)| Vec3::new(*x, *y, *z)).collect();
            let colors: Vec<ColorRGB> = pts.iter().map(|(_, (r, g, b))| ColorRGB::from_u8([*r, *g, *b])).collect();
            let cloud = PointCloud::new(positions, colors).unwrap();
            let format = if ascii { PlyFormat::Ascii } else { PlyFormat::BinaryLittleEndian };
            let back = decode_ply(&encode_ply(&cloud, format, None)).unwrap();
            prop_assert_eq!(back.len(), cloud.len());
            for (a, b) in cloud.positions().iter().zip(back.positions()) {
                prop_assert!((a - b).amax() <= 1e-6);
                prop_assert_eq!(b.map(|c| c as f32 as f64), *b);
            }
            for (a, b) in cloud.colors().iter().zip(back.colors()) {
                prop_assert_eq!(a, b);
            }
        }
    }
}
