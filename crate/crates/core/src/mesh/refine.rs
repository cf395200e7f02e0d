//! Newest vertex bisection with conformity closure.

use std::collections::HashMap;

use super::{Cell, Mesh};
use crate::error::{invalid, Result};
use crate::Point;

/// Refines `mesh` so that every element in `marked` is bisected at least
/// once across its refinement edge.
///
/// Bisection edges are collected first: the refinement edge of every marked
/// element, then, until nothing changes, the refinement edge of every
/// element that has a collected edge. Each element is then split across its
/// refinement edge, and the children are split again when their own
/// refinement edge (an edge of the parent) was collected. Children take the
/// new midpoint as their newest vertex.
pub fn nvb_refine(mesh: &Mesh, marked: &[usize]) -> Result<Mesh> {
    let nt = mesh.n_elements();
    if let Some(&t) = marked.iter().find(|&&t| t >= nt) {
        return invalid(format!("marked element {t} out of range ({nt} elements)"));
    }
    if marked.is_empty() {
        return Ok(mesh.clone());
    }

    let mut bisect_face = vec![false; mesh.n_faces()];
    let mut stack = Vec::new();
    for &t in marked {
        let f = mesh.triangle(t).refinement_face();
        if !bisect_face[f] {
            bisect_face[f] = true;
            stack.push(f);
        }
    }
    while let Some(f) = stack.pop() {
        for t in mesh.face(f).elements() {
            let g = mesh.triangle(t).refinement_face();
            if !bisect_face[g] {
                bisect_face[g] = true;
                stack.push(g);
            }
        }
    }

    let mut vertices: Vec<Point> = mesh.vertices().to_vec();
    let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
    for (f, _) in bisect_face.iter().enumerate().filter(|(_, &b)| b) {
        let [a, b] = mesh.face(f).vertices;
        let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
        midpoint.insert((a, b), vertices.len());
        vertices.push(Point::from((pa.coords + pb.coords) * 0.5));
    }

    let mut cells = Vec::with_capacity(nt + 2 * midpoint.len());
    for cell in mesh.cells() {
        bisect(cell, &midpoint, &mut cells);
    }
    Mesh::from_cells(vertices, &cells, mesh.domain())
}

fn bisect(cell: Cell, midpoint: &HashMap<(usize, usize), usize>, out: &mut Vec<Cell>) {
    let r = cell.refinement_vertex;
    let z = cell.vertices[r];
    let a = cell.vertices[(r + 1) % 3];
    let b = cell.vertices[(r + 2) % 3];
    match midpoint.get(&(a.min(b), a.max(b))) {
        None => out.push(cell),
        Some(&m) => {
            let generation = cell.generation + 1;
            bisect(Cell { vertices: [z, a, m], refinement_vertex: 2, generation }, midpoint, out);
            bisect(Cell { vertices: [z, m, b], refinement_vertex: 1, generation }, midpoint, out);
        }
    }
}
