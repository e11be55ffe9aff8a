//! Solution CSV and mesh files.
//!
//! Floats are written with 17 significant digits, which round-trips every
//! `f64` exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use slpants_core::grid::{Field, Grid};
use slpants_core::reconstruction::GraphMesh;
use slpants_core::Vec2;

use crate::config::MeshFormat;
use crate::error::CliError;

fn num(out: &mut String, x: f64) {
    write!(out, "{x:.16e}").unwrap();
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> CliError {
    CliError::Parse { path: path.to_path_buf(), line, message: message.into() }
}

/// Header `u1,u2,phi`, one row per interior node in grid order.
pub fn solution_csv(grid: &Grid, phi: &Field) -> String {
    let mut out = String::from("u1,u2,phi\n");
    for (p, v) in grid.nodes().iter().zip(&phi.values) {
        num(&mut out, p.x);
        out.push(',');
        num(&mut out, p.y);
        out.push(',');
        num(&mut out, *v);
        out.push('\n');
    }
    out
}

pub fn write_solution(path: &Path, grid: &Grid, phi: &Field) -> Result<(), CliError> {
    write_file(path, &solution_csv(grid, phi))
}

/// Rows `(u1, u2, phi)` of a solution file.
pub fn read_solution(path: &Path) -> Result<Vec<[f64; 3]>, CliError> {
    let text = read_file(path)?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "u1,u2,phi" => {}
        _ => return Err(parse_err(path, 1, "expected header `u1,u2,phi`")),
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 3 {
            return Err(parse_err(path, i + 1, "expected 3 columns"));
        }
        let mut row = [0.0; 3];
        for (r, s) in row.iter_mut().zip(&f) {
            *r = s.trim().parse().map_err(|_| parse_err(path, i + 1, format!("bad number `{s}`")))?;
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Field values of `rows` if they sit on the nodes of `grid` in order.
pub fn match_grid(grid: &Grid, rows: &[[f64; 3]]) -> Result<Vec<f64>, CliError> {
    if rows.len() != grid.len() {
        return Err(CliError::GridMismatch(format!("{} rows for {} grid nodes", rows.len(), grid.len())));
    }
    let tol = 1e-9 * grid.spacing();
    for (k, (r, p)) in rows.iter().zip(grid.nodes()).enumerate() {
        if (r[0] - p.x).abs() > tol || (r[1] - p.y).abs() > tol {
            return Err(CliError::GridMismatch(format!(
                "row {} at ({}, {}) but node at ({}, {})",
                k + 1,
                r[0],
                r[1],
                p.x,
                p.y
            )));
        }
    }
    Ok(rows.iter().map(|r| r[2]).collect())
}

/// Legacy ASCII VTK polydata: points `(u₁, u₂, 0)`, scalars `phi`, vectors
/// `(y₁, y₂, 0)`.
pub fn mesh_vtk(mesh: &GraphMesh) -> String {
    let n = mesh.points.len();
    let mut out = String::new();
    out.push_str("# vtk DataFile Version 3.0\nslpants gradient graph\nASCII\nDATASET POLYDATA\n");
    writeln!(out, "POINTS {n} double").unwrap();
    for p in &mesh.points {
        num(&mut out, p[0]);
        out.push(' ');
        num(&mut out, p[1]);
        out.push_str(" 0\n");
    }
    let f = mesh.triangles.len();
    writeln!(out, "POLYGONS {f} {}", 4 * f).unwrap();
    for t in &mesh.triangles {
        writeln!(out, "3 {} {} {}", t[0], t[1], t[2]).unwrap();
    }
    writeln!(out, "POINT_DATA {n}\nSCALARS phi double 1\nLOOKUP_TABLE default").unwrap();
    for v in &mesh.phi {
        num(&mut out, *v);
        out.push('\n');
    }
    out.push_str("VECTORS y double\n");
    for p in &mesh.points {
        num(&mut out, p[2]);
        out.push(' ');
        num(&mut out, p[3]);
        out.push_str(" 0\n");
    }
    out
}

/// Wavefront OBJ height map with vertices `(u₁, u₂, φ)`.
pub fn mesh_obj(mesh: &GraphMesh) -> String {
    let mut out = String::from("# slpants gradient graph, vertices (u1, u2, phi)\n");
    for (p, v) in mesh.points.iter().zip(&mesh.phi) {
        out.push_str("v ");
        num(&mut out, p[0]);
        out.push(' ');
        num(&mut out, p[1]);
        out.push(' ');
        num(&mut out, *v);
        out.push('\n');
    }
    for t in &mesh.triangles {
        writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1).unwrap();
    }
    out
}

/// Header `u1,u2,y1,y2,phi`, one row per vertex.
pub fn mesh_csv(mesh: &GraphMesh) -> String {
    let mut out = String::from("u1,u2,y1,y2,phi\n");
    for (p, v) in mesh.points.iter().zip(&mesh.phi) {
        for x in p {
            num(&mut out, *x);
            out.push(',');
        }
        num(&mut out, *v);
        out.push('\n');
    }
    out
}

pub fn export_mesh(mesh: &GraphMesh, format: MeshFormat, path: &Path) -> Result<(), CliError> {
    if mesh.is_empty() {
        return Err(slpants_core::Error::EmptyMesh.into());
    }
    let text = match format {
        MeshFormat::Vtk => mesh_vtk(mesh),
        MeshFormat::Obj => mesh_obj(mesh),
        MeshFormat::Csv => mesh_csv(mesh),
    };
    write_file(path, &text)
}

/// Reads a file written by [`mesh_vtk`].
pub fn read_vtk(path: &Path) -> Result<GraphMesh, CliError> {
    let text = read_file(path)?;
    parse_vtk(&text).map_err(|(line, msg)| parse_err(path, line, msg))
}

fn parse_vtk(text: &str) -> Result<GraphMesh, (usize, String)> {
    let mut lines = text.lines().enumerate().peekable();
    let mut next = |what: &str| lines.next().ok_or((0, format!("unexpected end of file, expected {what}")));
    let (l, head) = next("header")?;
    if !head.starts_with("# vtk DataFile") {
        return Err((l + 1, "not a legacy VTK file".into()));
    }
    next("title")?;
    let (l, fmt) = next("ASCII")?;
    if fmt.trim() != "ASCII" {
        return Err((l + 1, "only ASCII files are supported".into()));
    }
    let (l, ds) = next("DATASET")?;
    if ds.trim() != "DATASET POLYDATA" {
        return Err((l + 1, "expected DATASET POLYDATA".into()));
    }
    let count = |line: (usize, &str), key: &str| -> Result<usize, (usize, String)> {
        let mut w = line.1.split_whitespace();
        if w.next() != Some(key) {
            return Err((line.0 + 1, format!("expected {key}")));
        }
        w.next().and_then(|s| s.parse().ok()).ok_or((line.0 + 1, format!("bad {key} count")))
    };
    let floats = |line: (usize, &str), k: usize| -> Result<Vec<f64>, (usize, String)> {
        let v: Vec<f64> = line.1.split_whitespace().map(|s| s.parse()).collect::<Result<_, _>>().map_err(|_| (line.0 + 1, "bad number".to_string()))?;
        if v.len() != k {
            return Err((line.0 + 1, format!("expected {k} values")));
        }
        Ok(v)
    };
    let n = count(next("POINTS")?, "POINTS")?;
    let mut u = Vec::with_capacity(n);
    for _ in 0..n {
        let v = floats(next("point")?, 3)?;
        u.push(Vec2::new(v[0], v[1]));
    }
    let f = count(next("POLYGONS")?, "POLYGONS")?;
    let mut tris = Vec::with_capacity(f);
    for _ in 0..f {
        let (l, s) = next("polygon")?;
        let v: Vec<u32> = s.split_whitespace().map(|x| x.parse()).collect::<Result<_, _>>().map_err(|_| (l + 1, "bad index".to_string()))?;
        if v.len() != 4 || v[0] != 3 {
            return Err((l + 1, "only triangles are supported".into()));
        }
        tris.push([v[1], v[2], v[3]]);
    }
    let pd = count(next("POINT_DATA")?, "POINT_DATA")?;
    if pd != n {
        return Err((0, "POINT_DATA count differs from POINTS".into()));
    }
    next("SCALARS")?;
    next("LOOKUP_TABLE")?;
    let mut phi = Vec::with_capacity(n);
    for _ in 0..n {
        phi.push(floats(next("scalar")?, 1)?[0]);
    }
    next("VECTORS")?;
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let v = floats(next("vector")?, 3)?;
        y.push(Vec2::new(v[0], v[1]));
    }
    GraphMesh::from_parts(&u, &y, &phi, tris).map_err(|e| (0, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_triangle() -> GraphMesh {
        let u = [Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)];
        let y = [Vec2::new(0.1, -0.2), Vec2::new(1.0 / 3.0, 0.0), Vec2::new(-1e-300, 7.5)];
        GraphMesh::from_parts(&u, &y, &[0.0, core::f64::consts::PI, -2.5], vec![[0, 1, 2]]).unwrap()
    }

    #[test]
    fn vtk_layout_and_round_trip() {
        let m = one_triangle();
        let text = mesh_vtk(&m);
        assert!(text.starts_with("# vtk DataFile Version 3.0\n"));
        assert!(text.contains("POINTS 3 double\n") && text.contains("POLYGONS 1 4\n3 0 1 2\n"));
        let back = parse_vtk(&text).unwrap();
        assert_eq!(back.points, m.points);
        assert_eq!(back.phi, m.phi);
        assert_eq!(back.triangles, m.triangles);
    }

    #[test]
    fn obj_and_csv_layout() {
        let m = one_triangle();
        let obj = mesh_obj(&m);
        assert_eq!(obj.lines().filter(|l| l.starts_with("v ")).count(), 3);
        assert!(obj.ends_with("f 1 2 3\n"));
        let csv = mesh_csv(&m);
        assert!(csv.starts_with("u1,u2,y1,y2,phi\n"));
        let row: Vec<f64> = csv.lines().nth(2).unwrap().split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(row, vec![1.0, 0.0, 1.0 / 3.0, 0.0, core::f64::consts::PI]);
    }

    #[test]
    fn empty_mesh_is_rejected() {
        let m = GraphMesh::from_parts(&[], &[], &[], vec![]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let err = export_mesh(&m, MeshFormat::Vtk, &dir.path().join("m.vtk")).unwrap_err();
        assert!(matches!(err, CliError::Core(slpants_core::Error::EmptyMesh)));
    }
}
