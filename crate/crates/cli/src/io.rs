//! Mesh loaders (OBJ, OFF) and point-cloud files (xyz, ASCII PLY).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use otsample_core::{Mesh, Vec3};
use otsample_core::sampler::PointCloud;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{0}: unsupported format (expected .obj, .off, .xyz or .ply)")]
    UnsupportedFormat(PathBuf),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] otsample_core::Error),
}

fn read(path: &Path) -> Result<String, IoError> {
    std::fs::read_to_string(path).map_err(|source| IoError::Io {
        path: path.into(),
        source,
    })
}

fn write(path: &Path, text: &str) -> Result<(), IoError> {
    std::fs::write(path, text).map_err(|source| IoError::Io {
        path: path.into(),
        source,
    })
}

fn extension(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .unwrap_or("")
        .to_ascii_lowercase()
}

pub fn load_mesh(path: &Path) -> Result<Mesh, IoError> {
    let text = read(path)?;
    match extension(path).as_str() {
        "obj" => parse_obj(&text, path),
        "off" => parse_off(&text, path),
        _ => Err(IoError::UnsupportedFormat(path.into())),
    }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> IoError {
    IoError::Parse {
        path: path.into(),
        line,
        message: message.into(),
    }
}

fn parse_f64(tok: Option<&str>, path: &Path, line: usize) -> Result<f64, IoError> {
    let t = tok.ok_or_else(|| parse_err(path, line, "missing coordinate"))?;
    t.parse::<f64>()
        .map_err(|_| parse_err(path, line, format!("invalid number {t:?}")))
}

fn fan(poly: &[usize], faces: &mut Vec<[usize; 3]>) {
    for i in 1..poly.len() - 1 {
        faces.push([poly[0], poly[i], poly[i + 1]]);
    }
}

/// OBJ `v` and `f` records; polygons are fan-triangulated, negative indices
/// count from the end, `v/vt/vn` forms keep the vertex index.
pub fn parse_obj(text: &str, path: &Path) -> Result<Mesh, IoError> {
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let body = raw.split('#').next().unwrap_or("");
        let mut tok = body.split_whitespace();
        match tok.next() {
            Some("v") => {
                let x = parse_f64(tok.next(), path, line)?;
                let y = parse_f64(tok.next(), path, line)?;
                let z = parse_f64(tok.next(), path, line)?;
                vertices.push(Vec3::new(x, y, z));
            }
            Some("f") => {
                let mut poly = Vec::new();
                for t in tok {
                    let head = t.split('/').next().unwrap_or("");
                    let i: i64 = head
                        .parse()
                        .map_err(|_| parse_err(path, line, format!("invalid face index {t:?}")))?;
                    let n = vertices.len() as i64;
                    let idx = if i > 0 { i - 1 } else { n + i };
                    if i == 0 || idx < 0 || idx >= n {
                        return Err(parse_err(path, line, format!("face index {i} out of range 1..={n}")));
                    }
                    poly.push(idx as usize);
                }
                if poly.len() < 3 {
                    return Err(parse_err(path, line, "face needs at least 3 vertices"));
                }
                fan(&poly, &mut faces);
            }
            _ => {}
        }
    }
    Ok(Mesh::new(vertices, faces)?)
}

/// OFF: optional `OFF` header, counts line, vertices, then `n i0 i1 …` faces.
pub fn parse_off(text: &str, path: &Path) -> Result<Mesh, IoError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let (mut ln, mut first) = lines.next().ok_or_else(|| parse_err(path, 1, "empty file"))?;
    if first.starts_with("OFF") {
        let rest = first[3..].trim();
        if rest.is_empty() {
            (ln, first) = lines.next().ok_or_else(|| parse_err(path, ln, "missing counts"))?;
        } else {
            first = rest;
        }
    }
    let counts: Vec<usize> = first
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| parse_err(path, ln, format!("invalid count {t:?}"))))
        .collect::<Result<_, _>>()?;
    if counts.len() < 2 {
        return Err(parse_err(path, ln, "expected vertex and face counts"));
    }
    let (nv, nf) = (counts[0], counts[1]);
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (l, s) = lines.next().ok_or_else(|| parse_err(path, ln, "missing vertex"))?;
        ln = l;
        let mut t = s.split_whitespace();
        let x = parse_f64(t.next(), path, l)?;
        let y = parse_f64(t.next(), path, l)?;
        let z = parse_f64(t.next(), path, l)?;
        vertices.push(Vec3::new(x, y, z));
    }
    let mut faces = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (l, s) = lines.next().ok_or_else(|| parse_err(path, ln, "missing face"))?;
        ln = l;
        let nums: Vec<usize> = s
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| parse_err(path, l, format!("invalid index {t:?}"))))
            .collect::<Result<_, _>>()?;
        let k = *nums.first().ok_or_else(|| parse_err(path, l, "empty face"))?;
        if k < 3 || nums.len() < k + 1 {
            return Err(parse_err(path, l, "face needs at least 3 indices"));
        }
        let poly = &nums[1..=k];
        if let Some(bad) = poly.iter().find(|&&i| i >= nv) {
            return Err(parse_err(path, l, format!("face index {bad} out of range 0..{nv}")));
        }
        fan(poly, &mut faces);
    }
    Ok(Mesh::new(vertices, faces)?)
}

pub fn mesh_to_obj(mesh: &Mesh) -> String {
    let mut s = String::new();
    for v in &mesh.vertices {
        let _ = writeln!(s, "v {:e} {:e} {:e}", v.x, v.y, v.z);
    }
    for f in &mesh.faces {
        let _ = writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    s
}

pub fn mesh_to_off(mesh: &Mesh) -> String {
    let mut s = format!("OFF\n{} {} 0\n", mesh.vertices.len(), mesh.faces.len());
    for v in &mesh.vertices {
        let _ = writeln!(s, "{:e} {:e} {:e}", v.x, v.y, v.z);
    }
    for f in &mesh.faces {
        let _ = writeln!(s, "3 {} {} {}", f[0], f[1], f[2]);
    }
    s
}

pub fn save_mesh(mesh: &Mesh, path: &Path) -> Result<(), IoError> {
    match extension(path).as_str() {
        "obj" => write(path, &mesh_to_obj(mesh)),
        "off" => write(path, &mesh_to_off(mesh)),
        _ => Err(IoError::UnsupportedFormat(path.into())),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    Xyz,
    PlyAscii,
}

impl CloudFormat {
    pub fn from_path(path: &Path) -> Result<Self, IoError> {
        match extension(path).as_str() {
            "xyz" | "txt" => Ok(CloudFormat::Xyz),
            "ply" => Ok(CloudFormat::PlyAscii),
            _ => Err(IoError::UnsupportedFormat(path.into())),
        }
    }
}

/// 17 significant digits, enough for an exact f64 round trip.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn cloud_to_string(cloud: &PointCloud, format: CloudFormat) -> String {
    let mut s = String::with_capacity(cloud.len() * 72);
    if format == CloudFormat::PlyAscii {
        s.push_str("ply\nformat ascii 1.0\n");
        let _ = writeln!(s, "element vertex {}", cloud.len());
        s.push_str("property double x\nproperty double y\nproperty double z\n");
        if cloud.normals.is_some() {
            s.push_str("property double nx\nproperty double ny\nproperty double nz\n");
        }
        s.push_str("end_header\n");
    }
    for (i, p) in cloud.points.iter().enumerate() {
        s.push_str(&format!("{} {} {}", num(p.x), num(p.y), num(p.z)));
        if let Some(n) = &cloud.normals {
            s.push_str(&format!(" {} {} {}", num(n[i].x), num(n[i].y), num(n[i].z)));
        }
        s.push('\n');
    }
    s
}

pub fn write_point_cloud(cloud: &PointCloud, path: &Path, format: CloudFormat) -> Result<(), IoError> {
    if cloud.is_empty() {
        return Err(IoError::Core(otsample_core::Error::EmptyCloud));
    }
    write(path, &cloud_to_string(cloud, format))
}

/// Reads xyz (3 or 6 columns) or the ASCII PLY written by this module.
pub fn read_point_cloud(path: &Path) -> Result<PointCloud, IoError> {
    let text = read(path)?;
    let format = CloudFormat::from_path(path)?;
    let mut lines = text.lines().enumerate();
    if format == CloudFormat::PlyAscii {
        loop {
            let (i, l) = lines.next().ok_or_else(|| parse_err(path, 1, "missing end_header"))?;
            if i == 0 && l.trim() != "ply" {
                return Err(parse_err(path, 1, "missing ply magic"));
            }
            if l.trim() == "end_header" {
                break;
            }
        }
    }
    let mut points = Vec::new();
    let mut normals = Vec::new();
    let mut width = None;
    for (i, l) in lines {
        let line = i + 1;
        let vals: Vec<f64> = l
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| parse_err(path, line, format!("invalid number {t:?}"))))
            .collect::<Result<_, _>>()?;
        if vals.is_empty() {
            continue;
        }
        if vals.len() != 3 && vals.len() != 6 {
            return Err(parse_err(path, line, format!("expected 3 or 6 columns, found {}", vals.len())));
        }
        if *width.get_or_insert(vals.len()) != vals.len() {
            return Err(parse_err(path, line, "inconsistent column count"));
        }
        points.push(Vec3::new(vals[0], vals[1], vals[2]));
        if vals.len() == 6 {
            normals.push(Vec3::new(vals[3], vals[4], vals[5]));
        }
    }
    Ok(PointCloud {
        points,
        face_ids: None,
        normals: (width == Some(6)).then_some(normals),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_obj_and_quads() {
        let p = Path::new("t.obj");
        let m = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n", p).unwrap();
        assert_eq!((m.vertices.len(), m.faces.len()), (3, 1));
        let q = parse_obj("v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1/1/1 2/2/2 3 -1\n", p).unwrap();
        assert_eq!(q.faces, vec![[0, 1, 2], [0, 2, 3]]);
    }

    #[test]
    fn obj_out_of_range_names_line() {
        let err = parse_obj("v 0 0 0\nv 1 0 0\nv 0 1 0\n# c\nf 1 2 9\n", Path::new("t.obj")).unwrap_err();
        match err {
            IoError::Parse { line, .. } => assert_eq!(line, 5),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn off_parsing() {
        let m = parse_off("OFF\n4 1 0\n0 0 0\n1 0 0\n1 1 0\n0 1 0\n4 0 1 2 3\n", Path::new("t.off")).unwrap();
        assert_eq!(m.faces.len(), 2);
        assert!(matches!(
            parse_off("OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 3\n", Path::new("t.off")),
            Err(IoError::Parse { line: 6, .. })
        ));
    }
}
