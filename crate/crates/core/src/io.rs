//! File formats: mesh, ellipse and residual CSV, the JSON report, and an
//! SVG rendering of a mesh with its ellipses.
//!
//! Every float is written with 17 significant digits so that reading a file
//! back reproduces the in-memory value exactly. Lines end in `\n`.
//!
//! The writers take the grid size `n` and node data in storage order (`i`
//! fastest) rather than a validated grid, so they also serve small
//! illustrative meshes.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::analysis::AnisotropyReport;
use crate::error::{Error, Result};
use crate::linalg::Vec2;
use crate::metric::EllipseRecord;

pub const MESH_HEADER: &str = "i,j,xi,eta,x,y";
pub const ELLIPSE_HEADER: &str = "i,j,cx,cy,a,b,angle";
pub const RESIDUAL_HEADER: &str = "i,j,residual";

/// `v` with 17 significant digits in scientific notation.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn check_len(n: usize, len: usize) -> io::Result<()> {
    if n == 0 || len != n * n {
        return Err(io::Error::new(
            io::ErrorKind::InvalidInput,
            format!("expected {} nodes for n = {n}, got {len}", n * n),
        ));
    }
    Ok(())
}

/// Mesh CSV with the periodic seam duplicated: `(n+1)²` rows, `ξ = i/n`,
/// and node `(n, j)` drawn as node `(0, j)` shifted by one period.
pub fn write_mesh_csv<W: Write>(mut w: W, n: usize, lifted: &[Vec2]) -> io::Result<()> {
    check_len(n, lifted.len())?;
    writeln!(w, "{MESH_HEADER}")?;
    let h = 1.0 / n as f64;
    for j in 0..=n {
        for i in 0..=n {
            let shift = Vec2::new((i / n) as f64, (j / n) as f64);
            let x = lifted[(j % n) * n + i % n] + shift;
            writeln!(
                w,
                "{i},{j},{},{},{},{}",
                format_float(i as f64 * h),
                format_float(j as f64 * h),
                format_float(x.x),
                format_float(x.y)
            )?;
        }
    }
    Ok(())
}

/// One row per node: `i,j,cx,cy,a,b,angle`.
pub fn write_ellipses_csv<W: Write>(mut w: W, n: usize, records: &[EllipseRecord]) -> io::Result<()> {
    check_len(n, records.len())?;
    writeln!(w, "{ELLIPSE_HEADER}")?;
    for (k, e) in records.iter().enumerate() {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            k % n,
            k / n,
            format_float(e.center.x),
            format_float(e.center.y),
            format_float(e.semi_axes.0),
            format_float(e.semi_axes.1),
            format_float(e.angle)
        )?;
    }
    Ok(())
}

/// One row per node: `i,j,residual` with `residual = ρ det J / θ − 1`.
pub fn write_residual_csv<W: Write>(mut w: W, n: usize, residual: &[f64]) -> io::Result<()> {
    check_len(n, residual.len())?;
    writeln!(w, "{RESIDUAL_HEADER}")?;
    for (k, r) in residual.iter().enumerate() {
        writeln!(w, "{},{},{}", k % n, k / n, format_float(*r))?;
    }
    Ok(())
}

/// Pretty-printed JSON with every float in [`format_float`] form.
struct ReportFormatter(PrettyFormatter<'static>);

impl Formatter for ReportFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        w.write_all(format_float(value).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, f64::from(value))
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }

    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }

    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }

    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }

    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }

    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }

    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }

    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }

    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

/// Serializes any value as the report JSON style (trailing newline
/// included).
pub fn to_json_string<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, ReportFormatter(PrettyFormatter::new()));
    value.serialize(&mut ser).expect("serializing to memory cannot fail");
    buf.push(b'\n');
    String::from_utf8(buf).expect("JSON is UTF-8")
}

pub fn write_report<W: Write>(mut w: W, report: &AnisotropyReport) -> io::Result<()> {
    w.write_all(to_json_string(report).as_bytes())
}

pub fn parse_report(text: &str) -> serde_json::Result<AnisotropyReport> {
    serde_json::from_str(text)
}

/// Side length of the SVG canvas in user units.
const SVG_SIZE: f64 = 1000.0;

fn svg_point(p: Vec2) -> (f64, f64) {
    (p.x * SVG_SIZE, (1.0 - p.y) * SVG_SIZE)
}

fn svg_num(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

/// Standalone SVG of the mesh on `[0, 1]²` (y up): `n` polylines of
/// constant `i` and `n` of constant `j`, each closed across the seam, plus
/// one rotated ellipse per record.
pub fn svg_string(n: usize, lifted: &[Vec2], ellipses: &[EllipseRecord]) -> io::Result<String> {
    check_len(n, lifted.len())?;
    let node = |i: usize, j: usize| {
        lifted[(j % n) * n + i % n] + Vec2::new((i / n) as f64, (j / n) as f64)
    };
    let mut s = String::new();
    let size = svg_num(SVG_SIZE);
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {size} {size}" width="{size}" height="{size}">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{size}" height="{size}" fill="white"/>"#);
    let stroke = svg_num(SVG_SIZE / 1000.0);
    let _ = writeln!(s, r#"<g fill="none" stroke="black" stroke-width="{stroke}">"#);
    let mut polyline = |pts: &mut dyn Iterator<Item = Vec2>| {
        let coords: Vec<String> = pts
            .map(|p| {
                let (x, y) = svg_point(p);
                format!("{},{}", svg_num(x), svg_num(y))
            })
            .collect();
        let _ = writeln!(s, r#"<polyline points="{}"/>"#, coords.join(" "));
    };
    for i in 0..n {
        polyline(&mut (0..=n).map(|j| node(i, j)));
    }
    for j in 0..n {
        polyline(&mut (0..=n).map(|i| node(i, j)));
    }
    let _ = writeln!(s, "</g>");
    if !ellipses.is_empty() {
        let _ = writeln!(s, r#"<g fill="none" stroke="blue" stroke-width="{stroke}">"#);
        for e in ellipses {
            let (cx, cy) = svg_point(e.center);
            let (cx, cy) = (svg_num(cx), svg_num(cy));
            // the y flip reverses the sense of rotation
            let _ = writeln!(
                s,
                r#"<ellipse cx="{cx}" cy="{cy}" rx="{}" ry="{}" transform="rotate({} {cx} {cy})"/>"#,
                svg_num(e.semi_axes.0 * SVG_SIZE),
                svg_num(e.semi_axes.1 * SVG_SIZE),
                svg_num(-e.angle.to_degrees()),
            );
        }
        let _ = writeln!(s, "</g>");
    }
    let _ = writeln!(s, "</svg>");
    Ok(s)
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<fs::File>) -> io::Result<()>) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn export_mesh(n: usize, lifted: &[Vec2], path: &Path) -> Result<()> {
    write_file(path, |w| write_mesh_csv(w, n, lifted))
}

pub fn export_ellipses(n: usize, records: &[EllipseRecord], path: &Path) -> Result<()> {
    write_file(path, |w| write_ellipses_csv(w, n, records))
}

pub fn export_residual(n: usize, residual: &[f64], path: &Path) -> Result<()> {
    write_file(path, |w| write_residual_csv(w, n, residual))
}

pub fn export_report(report: &AnisotropyReport, path: &Path) -> Result<()> {
    write_file(path, |w| write_report(w, report))
}

pub fn render_svg(n: usize, lifted: &[Vec2], ellipses: &[EllipseRecord], path: &Path) -> Result<()> {
    let svg = svg_string(n, lifted, ellipses).map_err(|e| Error::io(path, e))?;
    write_file(path, |w| w.write_all(svg.as_bytes()))
}

pub fn read_report(path: &Path) -> Result<AnisotropyReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_report(&text).map_err(|e| Error::Parse { path: path.into(), reason: e.to_string() })
}

/// Parses a mesh CSV written by [`write_mesh_csv`], returning `n` and the
/// lifted images of the `n²` distinct nodes in storage order.
pub fn parse_mesh_csv(text: &str) -> std::result::Result<(usize, Vec<Vec2>), String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == MESH_HEADER => {}
        Some(h) => return Err(format!("unexpected header `{h}`")),
        None => return Err("file is empty".into()),
    }
    let rows: Vec<&str> = lines.filter(|l| !l.trim().is_empty()).collect();
    let side = (rows.len() as f64).sqrt().round() as usize;
    if side < 2 || side * side != rows.len() {
        return Err(format!("{} rows do not form a square grid with a duplicated seam", rows.len()));
    }
    let n = side - 1;
    let mut lifted = vec![Vec2::ZERO; n * n];
    for (line_no, row) in rows.iter().enumerate() {
        let fields: Vec<&str> = row.split(',').map(str::trim).collect();
        if fields.len() != 6 {
            return Err(format!("row {}: expected 6 fields, got {}", line_no + 2, fields.len()));
        }
        let int = |s: &str| s.parse::<usize>().map_err(|e| format!("row {}: {e}", line_no + 2));
        let float = |s: &str| s.parse::<f64>().map_err(|e| format!("row {}: {e}", line_no + 2));
        let (i, j) = (int(fields[0])?, int(fields[1])?);
        if (i, j) != (line_no % side, line_no / side) {
            return Err(format!("row {}: nodes out of order at ({i}, {j})", line_no + 2));
        }
        let x = Vec2::new(float(fields[4])?, float(fields[5])?);
        if !x.is_finite() {
            return Err(format!("row {}: non-finite coordinate", line_no + 2));
        }
        if i < n && j < n {
            lifted[j * n + i] = x;
        }
    }
    Ok((n, lifted))
}

pub fn read_mesh(path: &Path) -> Result<(usize, Vec<Vec2>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_mesh_csv(&text).map_err(|reason| Error::Parse { path: path.into(), reason })
}
