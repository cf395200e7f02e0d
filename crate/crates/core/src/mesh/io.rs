//! Plain-text mesh format.
//!
//! ```text
//! nv nt nf
//! x y                          (nv lines)
//! v0 v1 v2 refLocal            (nt lines)
//! v0 v1 leftElem rightElem boundaryFlag   (nf lines, rightElem = -1 on the boundary)
//! ```
//!
//! Coordinates are written with 17 significant digits so that reading a
//! written mesh reproduces every coordinate bit for bit.

use std::io::{BufRead, Write};

use super::{Cell, Mesh, Rect};
use crate::error::{Error, Result};
use crate::Point;

pub(super) fn write_text<W: Write>(mesh: &Mesh, out: W) -> Result<()> {
    let mut out = std::io::BufWriter::new(out);
    writeln!(out, "{} {} {}", mesh.n_vertices(), mesh.n_elements(), mesh.n_faces())?;
    for p in mesh.vertices() {
        writeln!(out, "{:.16e} {:.16e}", p.x, p.y)?;
    }
    for t in mesh.triangles() {
        let [a, b, c] = t.vertices;
        writeln!(out, "{a} {b} {c} {}", t.refinement_vertex)?;
    }
    for f in mesh.faces() {
        let right = f.right.map_or(-1, |r| r as i64);
        writeln!(out, "{} {} {} {} {}", f.vertices[0], f.vertices[1], f.left, right, u8::from(f.is_boundary()))?;
    }
    out.flush()?;
    Ok(())
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

pub(super) fn read_text<R: BufRead>(input: R) -> Result<Mesh> {
    let mut lines = input.lines().enumerate().filter_map(|(i, l)| match l {
        Ok(s) if s.trim().is_empty() => None,
        other => Some((i + 1, other)),
    });
    let mut next_fields = |what: &str| -> Result<(usize, Vec<String>)> {
        let (no, line) = lines.next().ok_or_else(|| parse_err(0, format!("unexpected end of file, expected {what}")))?;
        Ok((no, line?.split_whitespace().map(str::to_owned).collect()))
    };
    fn num<T: std::str::FromStr>(no: usize, s: &str) -> Result<T> {
        s.parse().map_err(|_| parse_err(no, format!("cannot parse '{s}'")))
    }

    let (no, header) = next_fields("header")?;
    if header.len() != 3 {
        return Err(parse_err(no, "header must be 'nv nt nf'"));
    }
    let nv: usize = num(no, &header[0])?;
    let nt: usize = num(no, &header[1])?;
    let nf: usize = num(no, &header[2])?;

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (no, f) = next_fields("vertex")?;
        if f.len() != 2 {
            return Err(parse_err(no, "vertex line must be 'x y'"));
        }
        vertices.push(Point::new(num(no, &f[0])?, num(no, &f[1])?));
    }
    let mut cells = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (no, f) = next_fields("triangle")?;
        if f.len() != 4 {
            return Err(parse_err(no, "triangle line must be 'v0 v1 v2 refLocal'"));
        }
        cells.push(Cell {
            vertices: [num(no, &f[0])?, num(no, &f[1])?, num(no, &f[2])?],
            refinement_vertex: num(no, &f[3])?,
            generation: 0,
        });
    }
    let mesh = Mesh::from_cells(vertices.clone(), &cells, Rect::bounding(&vertices))?;
    if mesh.n_faces() != nf {
        return Err(parse_err(1, format!("header declares {nf} faces, triangles define {}", mesh.n_faces())));
    }
    for face in mesh.faces() {
        let (no, f) = next_fields("face")?;
        if f.len() != 5 {
            return Err(parse_err(no, "face line must be 'v0 v1 leftElem rightElem boundaryFlag'"));
        }
        let v0: usize = num(no, &f[0])?;
        let v1: usize = num(no, &f[1])?;
        let left: usize = num(no, &f[2])?;
        let right: i64 = num(no, &f[3])?;
        let flag: u8 = num(no, &f[4])?;
        let expected_right = face.right.map_or(-1, |r| r as i64);
        if [v0, v1] != face.vertices || left != face.left || right != expected_right || flag != u8::from(face.is_boundary()) {
            return Err(parse_err(no, "face record does not match the triangulation"));
        }
    }
    Ok(mesh)
}
