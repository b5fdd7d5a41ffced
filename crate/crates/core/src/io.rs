//! Plain-text mesh files, convergence-history CSV and SVG mesh pictures.

use std::fmt::Write as _;
use std::path::Path;

use crate::driver::AdaptHistory;
use crate::error::{Error, Result};
use crate::mesh::{Geometry, Mesh};

/// CSV header of [`history_csv`].
pub const HISTORY_HEADER: &str =
    "level,ndof,error,eta_f,eta_J,eta_sigma,osc_g,osc_chi_grad,osc_chi_edge,total,efficiency,marked";

fn float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Mesh in the `V T` / `x y flag` / `i j k` text format with 17 significant
/// digits per coordinate.
pub fn mesh_to_string(mesh: &Mesh) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} {}", mesh.num_vertices(), mesh.num_triangles());
    for (v, p) in mesh.vertices().iter().enumerate() {
        let flag = u8::from(mesh.is_boundary_vertex(v));
        let _ = writeln!(out, "{} {} {}", float(p[0]), float(p[1]), flag);
    }
    for t in mesh.triangles() {
        let _ = writeln!(out, "{} {} {}", t[0], t[1], t[2]);
    }
    out
}

pub fn write_mesh(mesh: &Mesh, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, mesh_to_string(mesh))?;
    Ok(())
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn fields(line: &str, n: usize, lineno: usize) -> Result<Vec<&str>> {
    let f: Vec<&str> = line.split_whitespace().collect();
    if f.len() != n {
        return Err(parse_err(lineno, format!("expected {n} fields, found {}", f.len())));
    }
    Ok(f)
}

/// Parses the text format. Boundary flags in the file must be 0 or 1 and
/// are otherwise recomputed from edge incidence; refinement edges are
/// initialised to the longest edges.
pub fn parse_mesh(text: &str, geometry: Geometry) -> Result<Mesh> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (ln, header) = lines.next().ok_or_else(|| parse_err(1, "missing header"))?;
    let h = fields(header, 2, ln)?;
    let nv: usize = h[0].parse().map_err(|_| parse_err(ln, "bad vertex count"))?;
    let nt: usize = h[1].parse().map_err(|_| parse_err(ln, "bad triangle count"))?;
    let mut coords = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, l) = lines.next().ok_or_else(|| parse_err(ln, "missing vertex line"))?;
        let f = fields(l, 3, ln)?;
        let x: f64 = f[0].parse().map_err(|_| parse_err(ln, "bad x coordinate"))?;
        let y: f64 = f[1].parse().map_err(|_| parse_err(ln, "bad y coordinate"))?;
        if !x.is_finite() || !y.is_finite() {
            return Err(parse_err(ln, "non-finite coordinate"));
        }
        match f[2] {
            "0" | "1" => {}
            other => return Err(parse_err(ln, format!("boundary flag must be 0 or 1, got {other}"))),
        }
        coords.push([x, y]);
    }
    let mut tris = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (ln, l) = lines.next().ok_or_else(|| parse_err(ln, "missing triangle line"))?;
        let f = fields(l, 3, ln)?;
        let mut t = [0usize; 3];
        for k in 0..3 {
            t[k] = f[k].parse().map_err(|_| parse_err(ln, "bad vertex index"))?;
        }
        tris.push(t);
    }
    if let Some((ln, _)) = lines.next() {
        return Err(parse_err(ln, "trailing content"));
    }
    Ok(Mesh::build(coords, tris, geometry)?)
}

pub fn read_mesh(path: impl AsRef<Path>, geometry: Geometry) -> Result<Mesh> {
    parse_mesh(&std::fs::read_to_string(path)?, geometry)
}

/// History as CSV with LF line endings; missing values are empty fields.
pub fn history_csv(history: &AdaptHistory) -> String {
    let opt = |v: Option<f64>| v.map(float).unwrap_or_default();
    let mut out = String::from(HISTORY_HEADER);
    out.push('\n');
    for r in &history.levels {
        let e = &r.estimator;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.level,
            r.ndof,
            opt(r.error),
            float(e.eta_f),
            float(e.eta_jump),
            float(e.eta_sigma),
            float(e.osc_g),
            float(e.osc_chi_grad),
            float(e.osc_chi_edge),
            float(e.total),
            opt(r.efficiency),
            r.marked
        );
    }
    out
}

pub fn write_history_csv(history: &AdaptHistory, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, history_csv(history))?;
    Ok(())
}

const LOW: [u8; 3] = [0x2c, 0x7b, 0xb6];
const HIGH: [u8; 3] = [0xd7, 0x19, 0x1c];
const SIZE: f64 = 800.0;

/// SVG 1.1 picture with one polygon per triangle. With `values`, triangles
/// are filled by a linear map from `LOW` (minimum) to `HIGH` (maximum).
pub fn svg_string(mesh: &Mesh, values: Option<&[f64]>) -> Result<String> {
    if let Some(v) = values {
        if v.len() != mesh.num_triangles() {
            return Err(Error::LengthMismatch {
                expected: mesh.num_triangles(),
                got: v.len(),
            });
        }
    }
    let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in mesh.vertices() {
        x0 = x0.min(p[0]);
        y0 = y0.min(p[1]);
        x1 = x1.max(p[0]);
        y1 = y1.max(p[1]);
    }
    let scale = SIZE / (x1 - x0).max(y1 - y0).max(f64::MIN_POSITIVE);
    let width = (x1 - x0) * scale;
    let height = (y1 - y0) * scale;
    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{:.3}" height="{:.3}" viewBox="-5 -5 {:.3} {:.3}">"#,
        width + 10.0,
        height + 10.0,
        width + 10.0,
        height + 10.0
    );
    let (lo, hi) = match values {
        Some(v) => v
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x))),
        None => (0.0, 0.0),
    };
    if values.is_some() {
        let _ = writeln!(
            out,
            "<!-- color map: linear, #{:02x}{:02x}{:02x} = {}, #{:02x}{:02x}{:02x} = {} -->",
            LOW[0],
            LOW[1],
            LOW[2],
            float(lo),
            HIGH[0],
            HIGH[1],
            HIGH[2],
            float(hi)
        );
    }
    let _ = writeln!(out, r#"<g stroke="black" stroke-width="0.5" stroke-linejoin="round">"#);
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let pts: Vec<String> = tri
            .iter()
            .map(|&v| {
                let p = mesh.vertices()[v];
                format!("{:.3},{:.3}", (p[0] - x0) * scale, (y1 - p[1]) * scale)
            })
            .collect();
        let fill = match values {
            Some(v) => {
                let a = if hi > lo { (v[t] - lo) / (hi - lo) } else { 0.0 };
                let c: Vec<u8> = (0..3)
                    .map(|k| (LOW[k] as f64 + a * (HIGH[k] as f64 - LOW[k] as f64)).round() as u8)
                    .collect();
                format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
            }
            None => "none".to_string(),
        };
        let _ = writeln!(out, r#"<polygon points="{}" fill="{}"/>"#, pts.join(" "), fill);
    }
    out.push_str("</g>\n</svg>\n");
    Ok(out)
}

pub fn write_svg(mesh: &Mesh, values: Option<&[f64]>, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, svg_string(mesh, values)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{criss_cross_square, disk_fan};

    #[test]
    fn mesh_round_trip_is_exact() {
        let m = disk_fan(16).refine_uniform().unwrap().refine_uniform().unwrap();
        let text = mesh_to_string(&m);
        let back = parse_mesh(&text, Geometry::UnitCircle).unwrap();
        assert_eq!(back.vertices(), m.vertices());
        assert_eq!(back.triangles(), m.triangles());
        assert_eq!(back.boundary_flags(), m.boundary_flags());
        assert_eq!(mesh_to_string(&back), text);
    }

    #[test]
    fn mesh_parse_errors() {
        assert!(matches!(parse_mesh("", Geometry::Polygonal), Err(Error::Parse { .. })));
        assert!(parse_mesh("3 1\n0 0 1\n1 0 1\n0 1 1\n0 1 5\n", Geometry::Polygonal).is_err());
        assert!(parse_mesh("3 1\n0 0 1\n1 0 1\n0 1 2\n0 1 2\n", Geometry::Polygonal).is_err());
        assert!(parse_mesh("3 1\n0 0 1\n1 0 1\n0 x 1\n0 1 2\n", Geometry::Polygonal).is_err());
        assert!(parse_mesh("3 1\n0 0 1\n1 0 1\n0 1 1\n0 1 2\n9\n", Geometry::Polygonal).is_err());
        let ok = parse_mesh("# tri\n3 1\n0 0 1\n1 0 1\n0 1 1\n0 1 2\n", Geometry::Polygonal).unwrap();
        assert_eq!(ok.num_triangles(), 1);
    }

    #[test]
    fn svg_examples() {
        let m = criss_cross_square();
        let s = svg_string(&m, None).unwrap();
        assert_eq!(s.matches("<polygon").count(), 4);
        assert!(s.starts_with("<?xml"));
        let s = svg_string(&m, Some(&[2.0; 4])).unwrap();
        let fills: Vec<&str> = s.match_indices("fill=\"#").map(|(i, _)| &s[i..i + 13]).collect();
        assert_eq!(fills.len(), 4);
        assert!(fills.iter().all(|f| *f == fills[0]));
        assert!(s.contains("color map: linear"));
        assert_eq!(
            svg_string(&m, Some(&[1.0, 2.0, 3.0, 4.0])).unwrap(),
            svg_string(&m, Some(&[1.0, 2.0, 3.0, 4.0])).unwrap()
        );
        assert!(svg_string(&m, Some(&[1.0])).is_err());
    }
}
