use std::fmt::Write as _;

use tge_core::{ColoredMesh, Vec3};

use super::{fan, IoError};

#[derive(Debug, Clone, Copy, PartialEq)]
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
    fn parse(name: &str) -> Option<Self> {
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

    /// Divisor that maps an integer color channel onto `[0, 1]`.
    fn color_scale(self) -> f64 {
        match self {
            Scalar::I8 => 127.0,
            Scalar::U8 => 255.0,
            Scalar::I16 => 32767.0,
            Scalar::U16 => 65535.0,
            Scalar::I32 => 2147483647.0,
            Scalar::U32 => 4294967295.0,
            Scalar::F32 | Scalar::F64 => 1.0,
        }
    }

    fn read_le(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(b[..4].try_into().expect("4 bytes")) as f64,
            Scalar::U32 => u32::from_le_bytes(b[..4].try_into().expect("4 bytes")) as f64,
            Scalar::F32 => f32::from_le_bytes(b[..4].try_into().expect("4 bytes")) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().expect("8 bytes")),
        }
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar(String, Scalar),
    List(String, Scalar, Scalar),
}

impl Property {
    fn name(&self) -> &str {
        match self {
            Property::Scalar(n, _) | Property::List(n, _, _) => n,
        }
    }
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

/// One row of an element: scalars as one value, lists as many.
type Row = Vec<Vec<f64>>;

struct Header {
    binary: bool,
    elements: Vec<Element>,
    body: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header, IoError> {
    let end = b"end_header";
    let pos = bytes
        .windows(end.len())
        .position(|w| w == end)
        .ok_or_else(|| IoError::Format("PLY header has no end_header".into()))?;
    let mut body = pos + end.len();
    if bytes.get(body) == Some(&b'\r') {
        body += 1;
    }
    if bytes.get(body) == Some(&b'\n') {
        body += 1;
    }
    let text = String::from_utf8_lossy(&bytes[..pos]);
    let mut lines = text.lines().enumerate();
    if lines.next().map(|(_, l)| l.trim()) != Some("ply") {
        return Err(IoError::Format("not a PLY file".into()));
    }
    let mut binary = None;
    let mut elements: Vec<Element> = Vec::new();
    for (i, raw) in lines {
        let line = i + 1;
        let t: Vec<&str> = raw.split_whitespace().collect();
        match t.as_slice() {
            ["format", "ascii", _] => binary = Some(false),
            ["format", "binary_little_endian", _] => binary = Some(true),
            ["format", other, _] => return Err(IoError::Format(format!("unsupported PLY format {other}"))),
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count.parse().map_err(|_| IoError::parse(line, "bad element count"))?,
                properties: Vec::new(),
            }),
            ["property", "list", count, item, name] => {
                let (c, it) = (Scalar::parse(count), Scalar::parse(item));
                let el = elements.last_mut().ok_or_else(|| IoError::parse(line, "property before element"))?;
                match (c, it) {
                    (Some(c), Some(it)) => el.properties.push(Property::List(name.to_string(), c, it)),
                    _ => return Err(IoError::parse(line, "unknown list type")),
                }
            }
            ["property", ty, name] => {
                let ty = Scalar::parse(ty).ok_or_else(|| IoError::parse(line, format!("unknown type {ty}")))?;
                let el = elements.last_mut().ok_or_else(|| IoError::parse(line, "property before element"))?;
                el.properties.push(Property::Scalar(name.to_string(), ty));
            }
            [] | ["comment", ..] | ["obj_info", ..] => {}
            _ => return Err(IoError::parse(line, format!("unexpected header line `{raw}`"))),
        }
    }
    Ok(Header {
        binary: binary.ok_or_else(|| IoError::Format("PLY header has no format line".into()))?,
        elements,
        body,
    })
}

fn read_ascii(body: &[u8], elements: &[Element]) -> Result<Vec<Vec<Row>>, IoError> {
    let text = String::from_utf8_lossy(body);
    let mut tokens = text.split_whitespace();
    let mut next = |what: &str| -> Result<f64, IoError> {
        let t = tokens
            .next()
            .ok_or_else(|| IoError::Format(format!("PLY body ends inside {what}")))?;
        t.parse()
            .map_err(|_| IoError::Format(format!("bad number `{t}` in {what}")))
    };
    elements
        .iter()
        .map(|el| {
            (0..el.count)
                .map(|_| {
                    el.properties
                        .iter()
                        .map(|p| match p {
                            Property::Scalar(..) => Ok(vec![next(&el.name)?]),
                            Property::List(..) => {
                                let n = next(&el.name)? as usize;
                                (0..n).map(|_| next(&el.name)).collect()
                            }
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

fn read_binary(body: &[u8], elements: &[Element]) -> Result<Vec<Vec<Row>>, IoError> {
    let mut at = 0usize;
    let mut take = |s: Scalar, what: &str| -> Result<f64, IoError> {
        let b = body
            .get(at..at + s.size())
            .ok_or_else(|| IoError::Format(format!("PLY body ends inside {what}")))?;
        at += s.size();
        Ok(s.read_le(b))
    };
    elements
        .iter()
        .map(|el| {
            (0..el.count)
                .map(|_| {
                    el.properties
                        .iter()
                        .map(|p| match p {
                            Property::Scalar(_, s) => Ok(vec![take(*s, &el.name)?]),
                            Property::List(_, c, it) => {
                                let n = take(*c, &el.name)? as usize;
                                (0..n).map(|_| take(*it, &el.name)).collect()
                            }
                        })
                        .collect()
                })
                .collect()
        })
        .collect()
}

fn find(el: &Element, names: &[&str]) -> Option<(usize, Scalar)> {
    el.properties.iter().enumerate().find_map(|(i, p)| match p {
        Property::Scalar(n, s) if names.contains(&n.as_str()) => Some((i, *s)),
        _ => None,
    })
}

/// Parses ascii or binary little-endian PLY. Integer color channels are
/// rescaled by their type's maximum (255 for `uchar`); float channels are
/// taken as `[0, 1]`.
pub fn parse_ply(bytes: &[u8], name: &str) -> Result<ColoredMesh, IoError> {
    let header = parse_header(bytes)?;
    let body = &bytes[header.body..];
    let data = if header.binary {
        read_binary(body, &header.elements)?
    } else {
        read_ascii(body, &header.elements)?
    };
    let vi = header
        .elements
        .iter()
        .position(|e| e.name == "vertex")
        .ok_or_else(|| IoError::Format("PLY has no vertex element".into()))?;
    let vel = &header.elements[vi];
    let axis = |n: &str| find(vel, &[n]).ok_or_else(|| IoError::Format(format!("vertex property {n} missing")));
    let (x, y, z) = (axis("x")?, axis("y")?, axis("z")?);
    let rgb = [
        find(vel, &["red", "r", "diffuse_red"]),
        find(vel, &["green", "g", "diffuse_green"]),
        find(vel, &["blue", "b", "diffuse_blue"]),
    ];
    let [Some(r), Some(g), Some(b)] = rgb else {
        return Err(IoError::MissingColors);
    };
    let mut vertices: Vec<Vec3> = Vec::with_capacity(vel.count);
    let mut colors: Vec<Vec3> = Vec::with_capacity(vel.count);
    for row in &data[vi] {
        vertices.push([row[x.0][0], row[y.0][0], row[z.0][0]]);
        colors.push([r, g, b].map(|(i, s)| row[i][0] / s.color_scale()));
    }
    let mut faces = Vec::new();
    if let Some(fi) = header.elements.iter().position(|e| e.name == "face") {
        let fel = &header.elements[fi];
        let li = fel
            .properties
            .iter()
            .position(|p| matches!(p, Property::List(..)) && matches!(p.name(), "vertex_indices" | "vertex_index"))
            .ok_or_else(|| IoError::Format("face element has no vertex_indices list".into()))?;
        for (k, row) in data[fi].iter().enumerate() {
            let polygon: Vec<usize> = row[li].iter().map(|&v| v as usize).collect();
            if polygon.len() < 3 {
                return Err(IoError::Format(format!("face {k} has fewer than 3 vertices")));
            }
            fan(&polygon, &mut faces);
        }
    }
    Ok(ColoredMesh::new(name, vertices, colors, faces)?)
}

/// PLY with `double` positions and colors, so both encodings reproduce the
/// mesh exactly (ascii through shortest round-trip formatting).
pub fn write_ply(mesh: &ColoredMesh, binary: bool) -> Vec<u8> {
    let mut header = String::new();
    header.push_str("ply\n");
    header.push_str(if binary {
        "format binary_little_endian 1.0\n"
    } else {
        "format ascii 1.0\n"
    });
    let _ = writeln!(header, "comment {}", mesh.name());
    let _ = writeln!(header, "element vertex {}", mesh.vertices().len());
    for p in ["x", "y", "z", "red", "green", "blue"] {
        let _ = writeln!(header, "property double {p}");
    }
    let _ = writeln!(header, "element face {}", mesh.faces().len());
    header.push_str("property list uchar int vertex_indices\nend_header\n");
    let mut out = header.into_bytes();
    let rows = mesh.vertices().iter().zip(mesh.colors());
    if binary {
        for (p, c) in rows {
            for v in p.iter().chain(c) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        for f in mesh.faces() {
            out.push(3);
            for &i in f {
                out.extend_from_slice(&(i as i32).to_le_bytes());
            }
        }
    } else {
        let mut body = String::new();
        for (p, c) in rows {
            let _ = writeln!(body, "{} {} {} {} {} {}", p[0], p[1], p[2], c[0], c[1], c[2]);
        }
        for f in mesh.faces() {
            let _ = writeln!(body, "3 {} {} {}", f[0], f[1], f[2]);
        }
        out.extend_from_slice(body.as_bytes());
    }
    out
}
