//! ASCII PLY reading and writing for clouds and triangle meshes.
//!
//! Writers emit a fixed header (`ply`, `format ascii 1.0`, `element vertex N`,
//! `property float x|y|z`, optional `nx|ny|nz`, optional face list,
//! `end_header`) and print every coordinate with six significant digits.
//! The reader accepts any ASCII PLY whose vertex element carries `x y z`,
//! ignoring unknown properties and trailing elements.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::geometry::{Point3, Vec3};
use crate::registration::SurfaceMesh;

/// Formats `x` like C's `%g`: six significant digits, trailing zeros trimmed,
/// scientific notation for very small or large magnitudes.
pub fn format_g6(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.5e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..6).contains(&exp) {
        let m = trim_fraction(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (5 - exp).max(0) as usize;
        trim_fraction(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn header(out: &mut String, n_vertices: usize, normals: bool, n_faces: Option<usize>) {
    out.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(out, "element vertex {n_vertices}");
    for axis in ["x", "y", "z"] {
        let _ = writeln!(out, "property float {axis}");
    }
    if normals {
        for axis in ["nx", "ny", "nz"] {
            let _ = writeln!(out, "property float {axis}");
        }
    }
    if let Some(n) = n_faces {
        let _ = writeln!(out, "element face {n}");
        out.push_str("property list uchar int vertex_indices\n");
    }
    out.push_str("end_header\n");
}

fn push_vec(out: &mut String, v: &Vec3) {
    let _ = write!(
        out,
        "{} {} {}",
        format_g6(v.x),
        format_g6(v.y),
        format_g6(v.z)
    );
}

/// Renders a cloud as ASCII PLY text.
pub fn cloud_to_string(cloud: &PointCloud) -> Result<String> {
    if cloud.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let mut out = String::with_capacity(cloud.len() * 32 + 128);
    header(&mut out, cloud.len(), cloud.normals.is_some(), None);
    for (i, p) in cloud.points.iter().enumerate() {
        push_vec(&mut out, p);
        if let Some(normals) = &cloud.normals {
            out.push(' ');
            push_vec(&mut out, &normals[i]);
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn write_cloud(cloud: &PointCloud, path: impl AsRef<Path>) -> Result<()> {
    let text = cloud_to_string(cloud)?;
    fs::write(path, text)?;
    Ok(())
}

/// Writes a triangle mesh with per-vertex normals and a face list.
pub fn write_mesh(mesh: &SurfaceMesh, path: impl AsRef<Path>) -> Result<()> {
    if mesh.vertices.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let mut out = String::with_capacity(mesh.vertices.len() * 64 + mesh.triangles.len() * 24);
    header(&mut out, mesh.vertices.len(), true, Some(mesh.triangles.len()));
    for (p, n) in mesh.vertices.iter().zip(&mesh.vertex_normals) {
        push_vec(&mut out, p);
        out.push(' ');
        push_vec(&mut out, n);
        out.push('\n');
    }
    for t in &mesh.triangles {
        let _ = writeln!(out, "3 {} {} {}", t[0], t[1], t[2]);
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads the vertex element of an ASCII PLY file as a point cloud.
pub fn read_cloud(path: impl AsRef<Path>) -> Result<PointCloud> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_cloud(&text).map_err(|msg| Error::Ply {
        path: path.to_path_buf(),
        msg,
    })
}

struct Element {
    name: String,
    count: usize,
    props: Vec<String>,
    is_list: bool,
}

pub(crate) fn parse_cloud(text: &str) -> std::result::Result<PointCloud, String> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err("missing `ply` magic".into());
    }
    let mut elements: Vec<Element> = Vec::new();
    let mut saw_end = false;
    for line in lines.by_ref() {
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("format") => {
                if tok.next() != Some("ascii") {
                    return Err("only ascii PLY is supported".into());
                }
            }
            Some("comment") | Some("obj_info") | None => {}
            Some("element") => {
                let name = tok.next().ok_or("element without name")?.to_string();
                let count = tok
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or("element without count")?;
                elements.push(Element {
                    name,
                    count,
                    props: Vec::new(),
                    is_list: false,
                });
            }
            Some("property") => {
                let el = elements.last_mut().ok_or("property before element")?;
                let rest: Vec<&str> = tok.collect();
                if rest.first() == Some(&"list") {
                    el.is_list = true;
                    el.props.push(rest.last().copied().unwrap_or("").to_string());
                } else {
                    el.props.push(rest.last().copied().ok_or("property without name")?.to_string());
                }
            }
            Some("end_header") => {
                saw_end = true;
                break;
            }
            Some(other) => return Err(format!("unexpected header keyword `{other}`")),
        }
    }
    if !saw_end {
        return Err("missing end_header".into());
    }

    let mut points = Vec::new();
    let mut normals = Vec::new();
    let mut has_normals = false;
    for el in &elements {
        if el.name != "vertex" {
            // Later elements (faces, edges) are skipped line by line.
            for _ in 0..el.count {
                lines.next().ok_or("truncated body")?;
            }
            continue;
        }
        let idx = |name: &str| el.props.iter().position(|p| p == name);
        let (ix, iy, iz) = match (idx("x"), idx("y"), idx("z")) {
            (Some(a), Some(b), Some(c)) => (a, b, c),
            _ => return Err("vertex element lacks x/y/z".into()),
        };
        let inormal = match (idx("nx"), idx("ny"), idx("nz")) {
            (Some(a), Some(b), Some(c)) => Some((a, b, c)),
            _ => None,
        };
        has_normals = inormal.is_some();
        for _ in 0..el.count {
            let line = lines.next().ok_or("truncated vertex list")?;
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| format!("bad number `{t}`: {e}")))
                .collect::<std::result::Result<_, _>>()?;
            if vals.len() < el.props.len() {
                return Err(format!("vertex line has {} values", vals.len()));
            }
            points.push(Point3::new(vals[ix], vals[iy], vals[iz]));
            if let Some((a, b, c)) = inormal {
                normals.push(Vec3::new(vals[a], vals[b], vals[c]));
            }
        }
    }
    if has_normals {
        PointCloud::with_normals(points, normals).map_err(|e| e.to_string())
    } else {
        Ok(PointCloud::new(points))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g6_matches_printf_conventions() {
        assert_eq!(format_g6(0.0), "0");
        assert_eq!(format_g6(-0.0), "0");
        assert_eq!(format_g6(1.0), "1");
        assert_eq!(format_g6(0.1), "0.1");
        assert_eq!(format_g6(-0.0123456789), "-0.0123457");
        assert_eq!(format_g6(123456.7), "123457");
        assert_eq!(format_g6(1234567.0), "1.23457e+06");
        assert_eq!(format_g6(0.00001234), "1.234e-05");
        assert_eq!(format_g6(0.0001), "0.0001");
        assert_eq!(format_g6(0.019), "0.019");
    }

    #[test]
    fn single_point_file_layout() {
        let cloud = PointCloud::new(vec![Point3::zeros()]);
        let text = cloud_to_string(&cloud).unwrap();
        assert_eq!(
            text,
            "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\n\
             property float z\nend_header\n0 0 0\n"
        );
    }

    #[test]
    fn empty_cloud_is_rejected() {
        assert!(matches!(
            cloud_to_string(&PointCloud::default()),
            Err(Error::EmptyCloud)
        ));
    }

    #[test]
    fn normals_survive_parsing() {
        let cloud = PointCloud::with_normals(
            vec![Point3::new(0.01, -0.02, 0.1)],
            vec![Vec3::new(0.0, 0.0, 2.0)],
        )
        .unwrap();
        let parsed = parse_cloud(&cloud_to_string(&cloud).unwrap()).unwrap();
        assert_eq!(parsed.normals.unwrap()[0], Vec3::new(0.0, 0.0, 1.0));
    }

    #[test]
    fn reader_skips_faces_and_unknown_properties() {
        let text = "ply\nformat ascii 1.0\ncomment scan\nelement vertex 2\nproperty double x\n\
                    property double y\nproperty double z\nproperty uchar red\nelement face 1\n\
                    property list uchar int vertex_indices\nend_header\n1 2 3 255\n4 5 6 0\n3 0 1 1\n";
        let cloud = parse_cloud(text).unwrap();
        assert_eq!(cloud.points, vec![Point3::new(1.0, 2.0, 3.0), Point3::new(4.0, 5.0, 6.0)]);
        assert!(cloud.normals.is_none());
    }

    #[test]
    fn binary_format_is_rejected() {
        let text = "ply\nformat binary_little_endian 1.0\nend_header\n";
        assert!(parse_cloud(text).is_err());
    }
}
