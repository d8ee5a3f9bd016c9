use std::fmt::Write;

use tge_core::{ColoredMesh, Vec3};

use super::{fan, IoError};

/// Parses OBJ text. Vertex colors follow the position on each `v` line;
/// channels above 1 are read as 0–255 values. Faces may use `v/vt/vn`
/// tokens and negative (relative) indices; polygons are fan-split.
pub fn parse_obj(text: &str, name: &str) -> Result<ColoredMesh, IoError> {
    let mut vertices: Vec<Vec3> = Vec::new();
    let mut colors: Vec<Option<Vec3>> = Vec::new();
    let mut faces = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("");
        let mut tokens = content.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let values = tokens
                    .map(|t| t.parse::<f64>().map_err(|_| IoError::parse(line, format!("bad number `{t}`"))))
                    .collect::<Result<Vec<_>, _>>()?;
                match values.len() {
                    3 | 4 => colors.push(None),
                    6 | 7 => {
                        let rgb = [values[3], values[4], values[5]];
                        let max = rgb.iter().copied().fold(0.0, f64::max);
                        colors.push(Some(if max > 1.0 { rgb.map(|c| c / 255.0) } else { rgb }));
                    }
                    n => return Err(IoError::parse(line, format!("vertex with {n} values"))),
                }
                vertices.push([values[0], values[1], values[2]]);
            }
            Some("f") => {
                let polygon = tokens
                    .map(|t| {
                        let index = t.split('/').next().unwrap_or("");
                        let k: i64 = index
                            .parse()
                            .map_err(|_| IoError::parse(line, format!("bad face index `{t}`")))?;
                        let n = vertices.len() as i64;
                        let resolved = if k < 0 { n + k } else { k - 1 };
                        if k == 0 || resolved < 0 || resolved >= n {
                            return Err(IoError::parse(line, format!("face index {k} out of range")));
                        }
                        Ok(resolved as usize)
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                if polygon.len() < 3 {
                    return Err(IoError::parse(line, "face with fewer than 3 vertices"));
                }
                fan(&polygon, &mut faces);
            }
            _ => {}
        }
    }
    let colors = colors
        .into_iter()
        .collect::<Option<Vec<_>>>()
        .ok_or(IoError::MissingColors)?;
    Ok(ColoredMesh::new(name, vertices, colors, faces)?)
}

/// OBJ text with shortest round-trip float formatting, so reading the file
/// back reproduces every value exactly.
pub fn write_obj(mesh: &ColoredMesh) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# {}", mesh.name());
    for (p, c) in mesh.vertices().iter().zip(mesh.colors()) {
        let _ = writeln!(out, "v {} {} {} {} {} {}", p[0], p[1], p[2], c[0], c[1], c[2]);
    }
    for f in mesh.faces() {
        let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    out
}
