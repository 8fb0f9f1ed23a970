//! ASCII PLY 1.0 and PCD 0.7 readers and writers.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{CloudError, Point, PointCloud, ShadedPoint, DEFAULT_COLOR};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    PlyAscii,
    PcdAscii,
}

impl CloudFormat {
    /// Picks a format from the file extension.
    pub fn from_path(path: &Path) -> Result<Self, CloudError> {
        match path
            .extension()
            .and_then(|e| e.to_str())
            .map(|e| e.to_ascii_lowercase())
            .as_deref()
        {
            Some("ply") => Ok(CloudFormat::PlyAscii),
            Some("pcd") => Ok(CloudFormat::PcdAscii),
            other => Err(CloudError::UnsupportedFormat(format!(
                "unknown extension {:?}",
                other.unwrap_or("")
            ))),
        }
    }
}

pub fn load_cloud(path: &Path, format: CloudFormat) -> Result<PointCloud, CloudError> {
    let text = fs::read_to_string(path)?;
    let frame_id = path.file_stem().and_then(|s| s.to_str()).unwrap_or("cloud");
    match format {
        CloudFormat::PlyAscii => parse_ply(&text, frame_id),
        CloudFormat::PcdAscii => parse_pcd(&text, frame_id),
    }
}

pub fn save_cloud(path: &Path, cloud: &PointCloud, format: CloudFormat) -> Result<(), CloudError> {
    let text = match format {
        CloudFormat::PlyAscii => write_ply(cloud),
        CloudFormat::PcdAscii => write_pcd(cloud),
    };
    fs::write(path, text)?;
    Ok(())
}

struct Element {
    name: String,
    count: usize,
    properties: Vec<String>,
}

fn parse_f32(tok: &str, line: usize, what: &str) -> Result<f32, CloudError> {
    tok.parse::<f32>()
        .map_err(|_| CloudError::parse(line, format!("{what}: expected a number, got {tok:?}")))
}

fn parse_color(tok: &str, line: usize) -> Result<u8, CloudError> {
    if let Ok(v) = tok.parse::<u8>() {
        return Ok(v);
    }
    // some exporters write float colors in [0, 255]
    match tok.parse::<f32>() {
        Ok(v) if (0.0..=255.0).contains(&v) => Ok(v.round() as u8),
        _ => Err(CloudError::parse(
            line,
            format!("color: expected 0..=255, got {tok:?}"),
        )),
    }
}

/// Parses an ASCII PLY document. Only the `vertex` element is kept; rows of
/// other elements are skipped.
pub fn parse_ply(text: &str, frame_id: &str) -> Result<PointCloud, CloudError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    if lines.next().map(|(_, l)| l) != Some("ply") {
        return Err(CloudError::parse(1, "missing 'ply' magic"));
    }
    let mut elements: Vec<Element> = Vec::new();
    let mut saw_format = false;
    let mut header_end = None;
    for (n, line) in lines.by_ref() {
        let mut toks = line.split_whitespace();
        match toks.next() {
            Some("format") => {
                let fmt = toks.next().unwrap_or("");
                if fmt != "ascii" {
                    return Err(CloudError::UnsupportedFormat(format!(
                        "PLY format {fmt:?} (only ascii is supported)"
                    )));
                }
                if toks.next() != Some("1.0") {
                    return Err(CloudError::parse(n, "expected PLY version 1.0"));
                }
                saw_format = true;
            }
            Some("comment") | Some("obj_info") | None => {}
            Some("element") => {
                let name = toks
                    .next()
                    .ok_or_else(|| CloudError::parse(n, "element without a name"))?;
                let count = toks
                    .next()
                    .and_then(|c| c.parse::<usize>().ok())
                    .ok_or_else(|| CloudError::parse(n, "element count is not an integer"))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            Some("property") => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| CloudError::parse(n, "property before any element"))?;
                let rest: Vec<&str> = toks.collect();
                let name = match rest.as_slice() {
                    ["list", _, _, name] => *name,
                    [_, name] => *name,
                    _ => return Err(CloudError::parse(n, "malformed property line")),
                };
                el.properties.push(name.to_string());
            }
            Some("end_header") => {
                header_end = Some(n);
                break;
            }
            Some(other) => {
                return Err(CloudError::parse(
                    n,
                    format!("unexpected header keyword {other:?}"),
                ))
            }
        }
    }
    let header_end = header_end.ok_or_else(|| CloudError::parse(0, "missing end_header"))?;
    if !saw_format {
        return Err(CloudError::parse(header_end, "missing format line"));
    }

    let mut points = Vec::new();
    let mut data = lines.filter(|(_, l)| !l.is_empty());
    for el in &elements {
        if el.name != "vertex" {
            for _ in 0..el.count {
                data.next().ok_or_else(|| {
                    CloudError::parse(header_end, format!("truncated {} element", el.name))
                })?;
            }
            continue;
        }
        let idx = |name: &str| el.properties.iter().position(|p| p == name);
        let (ix, iy, iz) = match (idx("x"), idx("y"), idx("z")) {
            (Some(x), Some(y), Some(z)) => (x, y, z),
            _ => {
                return Err(CloudError::parse(
                    header_end,
                    "vertex element lacks x, y, z properties",
                ))
            }
        };
        let color_idx = match (idx("red"), idx("green"), idx("blue")) {
            (Some(r), Some(g), Some(b)) => Some([r, g, b]),
            _ => None,
        };
        points.reserve(el.count.min(super::DEFAULT_MAX_POINTS));
        for row in 0..el.count {
            let (n, line) = data.next().ok_or_else(|| {
                CloudError::parse(
                    header_end,
                    format!("expected {} vertex rows, found {row}", el.count),
                )
            })?;
            let toks: Vec<&str> = line.split_whitespace().collect();
            if toks.len() != el.properties.len() {
                return Err(CloudError::parse(
                    n,
                    format!(
                        "expected {} values, found {}",
                        el.properties.len(),
                        toks.len()
                    ),
                ));
            }
            let position = [
                parse_f32(toks[ix], n, "x")?,
                parse_f32(toks[iy], n, "y")?,
                parse_f32(toks[iz], n, "z")?,
            ];
            if position.iter().any(|v| !v.is_finite()) {
                return Err(CloudError::parse(n, "non-finite position"));
            }
            let color = match color_idx {
                Some([r, g, b]) => [
                    parse_color(toks[r], n)?,
                    parse_color(toks[g], n)?,
                    parse_color(toks[b], n)?,
                ],
                None => DEFAULT_COLOR,
            };
            points.push(Point { position, color });
        }
    }
    PointCloud::new(frame_id, 0, points)
}

/// Parses an ASCII PCD 0.7 document with fields `x y z` and optional `rgb`
/// or `rgba` (packed `0x00RRGGBB`, float-reinterpreted or integer).
pub fn parse_pcd(text: &str, frame_id: &str) -> Result<PointCloud, CloudError> {
    let mut fields: Vec<String> = Vec::new();
    let mut types: Vec<String> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    let mut npoints: Option<usize> = None;
    let mut data_line = None;
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    for (n, line) in lines.by_ref() {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut toks = line.split_whitespace();
        let key = toks.next().unwrap_or("").to_ascii_uppercase();
        let rest: Vec<&str> = toks.collect();
        match key.as_str() {
            "VERSION" => {
                let v = rest.first().copied().unwrap_or("");
                if v != "0.7" && v != ".7" {
                    return Err(CloudError::parse(
                        n,
                        format!("unsupported PCD version {v:?}"),
                    ));
                }
            }
            "FIELDS" => fields = rest.iter().map(|s| s.to_string()).collect(),
            "SIZE" | "WIDTH" | "HEIGHT" | "VIEWPOINT" => {}
            "TYPE" => types = rest.iter().map(|s| s.to_ascii_uppercase()).collect(),
            "COUNT" => {
                counts = rest
                    .iter()
                    .map(|s| s.parse::<usize>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| CloudError::parse(n, "COUNT values must be integers"))?
            }
            "POINTS" => {
                npoints = Some(
                    rest.first()
                        .and_then(|s| s.parse().ok())
                        .ok_or_else(|| CloudError::parse(n, "POINTS must be an integer"))?,
                )
            }
            "DATA" => {
                match rest.first().copied() {
                    Some("ascii") => {}
                    other => {
                        return Err(CloudError::UnsupportedFormat(format!(
                            "PCD DATA {} (only ascii is supported)",
                            other.unwrap_or("<missing>")
                        )))
                    }
                }
                data_line = Some(n);
                break;
            }
            other => {
                return Err(CloudError::parse(
                    n,
                    format!("unexpected header keyword {other:?}"),
                ))
            }
        }
    }
    let data_line = data_line.ok_or_else(|| CloudError::parse(0, "missing DATA line"))?;
    let npoints = npoints.ok_or_else(|| CloudError::parse(data_line, "missing POINTS line"))?;
    if counts.is_empty() {
        counts = vec![1; fields.len()];
    }
    if counts.len() != fields.len() || (!types.is_empty() && types.len() != fields.len()) {
        return Err(CloudError::parse(
            data_line,
            "FIELDS, TYPE and COUNT lengths disagree",
        ));
    }
    // column offset of each field in a data row
    let mut offsets = Vec::with_capacity(fields.len());
    let mut width = 0;
    for c in &counts {
        offsets.push(width);
        width += c;
    }
    let col = |name: &str| fields.iter().position(|f| f == name);
    let (ix, iy, iz) = match (col("x"), col("y"), col("z")) {
        (Some(x), Some(y), Some(z)) => (offsets[x], offsets[y], offsets[z]),
        _ => {
            return Err(CloudError::parse(
                data_line,
                "FIELDS must include x, y and z",
            ))
        }
    };
    let rgb = col("rgb").or_else(|| col("rgba")).map(|i| {
        let float = types.get(i).map(|t| t == "F").unwrap_or(true);
        (offsets[i], float)
    });

    let mut points = Vec::with_capacity(npoints.min(super::DEFAULT_MAX_POINTS));
    let mut data = lines.filter(|(_, l)| !l.is_empty());
    for row in 0..npoints {
        let (n, line) = data.next().ok_or_else(|| {
            CloudError::parse(
                data_line,
                format!("expected {npoints} data rows, found {row}"),
            )
        })?;
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != width {
            return Err(CloudError::parse(
                n,
                format!("expected {width} values, found {}", toks.len()),
            ));
        }
        let position = [
            parse_f32(toks[ix], n, "x")?,
            parse_f32(toks[iy], n, "y")?,
            parse_f32(toks[iz], n, "z")?,
        ];
        if position.iter().any(|v| !v.is_finite()) {
            return Err(CloudError::parse(n, "non-finite position"));
        }
        let color = match rgb {
            Some((off, true)) => unpack_rgb(parse_f32(toks[off], n, "rgb")?.to_bits()),
            Some((off, false)) => unpack_rgb(toks[off].parse::<u32>().map_err(|_| {
                CloudError::parse(n, format!("rgb: expected an integer, got {:?}", toks[off]))
            })?),
            None => DEFAULT_COLOR,
        };
        points.push(Point { position, color });
    }
    PointCloud::new(frame_id, 0, points)
}

fn unpack_rgb(v: u32) -> [u8; 3] {
    [(v >> 16) as u8, (v >> 8) as u8, v as u8]
}

fn pack_rgb(c: [u8; 3]) -> u32 {
    (c[0] as u32) << 16 | (c[1] as u32) << 8 | c[2] as u32
}

pub fn write_ply(cloud: &PointCloud) -> String {
    let mut s = String::with_capacity(128 + cloud.len() * 40);
    s.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(s, "comment frame_id {}", cloud.frame_id());
    let _ = writeln!(s, "element vertex {}", cloud.len());
    s.push_str(
        "property float x\nproperty float y\nproperty float z\n\
         property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n",
    );
    for p in cloud.points() {
        let [x, y, z] = p.position;
        let [r, g, b] = p.color;
        let _ = writeln!(s, "{x} {y} {z} {r} {g} {b}");
    }
    s
}

pub fn write_pcd(cloud: &PointCloud) -> String {
    let n = cloud.len();
    let mut s = String::with_capacity(256 + n * 40);
    s.push_str("# .PCD v0.7 - Point Cloud Data file format\nVERSION 0.7\n");
    s.push_str("FIELDS x y z rgb\nSIZE 4 4 4 4\nTYPE F F F U\nCOUNT 1 1 1 1\n");
    let _ = writeln!(
        s,
        "WIDTH {n}\nHEIGHT 1\nVIEWPOINT 0 0 0 1 0 0 0\nPOINTS {n}\nDATA ascii"
    );
    for p in cloud.points() {
        let [x, y, z] = p.position;
        let _ = writeln!(s, "{x} {y} {z} {}", pack_rgb(p.color));
    }
    s
}

/// Writes the kept points of a shading pass as a colored PLY.
pub fn save_shaded_ply(
    path: &Path,
    positions: &[[f32; 3]],
    shaded: &[ShadedPoint],
) -> Result<usize, CloudError> {
    if positions.len() != shaded.len() {
        return Err(CloudError::LengthMismatch {
            positions: positions.len(),
            shaded: shaded.len(),
        });
    }
    let kept = shaded.iter().filter(|s| s.keep).count();
    let mut s = String::with_capacity(256 + kept * 48);
    s.push_str("ply\nformat ascii 1.0\ncomment shaded snapshot\n");
    let _ = writeln!(s, "element vertex {kept}");
    s.push_str(
        "property float x\nproperty float y\nproperty float z\n\
         property uchar red\nproperty uchar green\nproperty uchar blue\nproperty uchar alpha\n\
         property float size_px\nend_header\n",
    );
    for (p, sp) in positions.iter().zip(shaded).filter(|(_, sp)| sp.keep) {
        let [x, y, z] = p;
        let [r, g, b, a] = sp.rgba;
        let _ = writeln!(s, "{x} {y} {z} {r} {g} {b} {a} {}", sp.size_px);
    }
    std::fs::write(path, s)?;
    Ok(kept)
}

/// Columns of [`write_shading_csv`].
pub const SHADING_CSV_HEADER: &str = "index,x,y,z,r,g,b,a,keep,size_px";

/// Every point of a shading pass, hidden ones included, one row each.
/// Hidden points carry `keep=0` and zero color and size.
pub fn write_shading_csv(
    positions: &[[f32; 3]],
    shaded: &[ShadedPoint],
) -> Result<String, CloudError> {
    if positions.len() != shaded.len() {
        return Err(CloudError::LengthMismatch {
            positions: positions.len(),
            shaded: shaded.len(),
        });
    }
    let mut s = String::with_capacity(64 + positions.len() * 48);
    s.push_str(SHADING_CSV_HEADER);
    s.push('\n');
    for (i, (p, sp)) in positions.iter().zip(shaded).enumerate() {
        let [x, y, z] = p;
        let [r, g, b, a] = sp.rgba;
        let _ = writeln!(
            s,
            "{i},{x},{y},{z},{r},{g},{b},{a},{},{}",
            sp.keep as u8, sp.size_px
        );
    }
    Ok(s)
}
