//! Conforming triangulations of a rectangular domain.
//!
//! A [`Mesh`] stores vertices, counterclockwise triangles and the faces
//! (edges) of the skeleton. Each triangle carries a refinement vertex for
//! newest vertex bisection: the edge opposite that vertex is the one the
//! triangle is split across. Local face `k` of a triangle is the edge
//! opposite its local vertex `k`.
//!
//! Faces are oriented by ascending global vertex id. The left element of a
//! face is the lowest-numbered adjacent triangle and the stored unit normal
//! points out of it, so jumps `φ⁺ − φ⁻` are always "left minus right".

mod conformity;
mod io;
mod refine;

use std::collections::HashMap;

use crate::error::{invalid, Error, Result};
use crate::{Point, Vec2};

pub use conformity::{ConformityIssue, ConformityReport};
pub use refine::nvb_refine;

/// Axis-aligned rectangle covered by the mesh.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect {
    pub min: Point,
    pub max: Point,
}

impl Rect {
    pub fn unit_square() -> Self {
        Rect {
            min: Point::new(0.0, 0.0),
            max: Point::new(1.0, 1.0),
        }
    }

    pub fn area(&self) -> f64 {
        (self.max.x - self.min.x) * (self.max.y - self.min.y)
    }

    fn bounding(points: &[Point]) -> Self {
        let mut min = Point::new(f64::INFINITY, f64::INFINITY);
        let mut max = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in points {
            min.x = min.x.min(p.x);
            min.y = min.y.min(p.y);
            max.x = max.x.max(p.x);
            max.y = max.y.max(p.y);
        }
        Rect { min, max }
    }

    /// Whether the segment `a`–`b` lies on one side of the rectangle.
    pub fn contains_segment_on_boundary(&self, a: &Point, b: &Point) -> bool {
        let scale = (self.max - self.min).norm().max(1.0);
        let tol = 1e-12 * scale;
        let on = |u: f64, v: f64, c: f64| (u - c).abs() <= tol && (v - c).abs() <= tol;
        on(a.x, b.x, self.min.x)
            || on(a.x, b.x, self.max.x)
            || on(a.y, b.y, self.min.y)
            || on(a.y, b.y, self.max.y)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Triangle {
    /// Vertex ids in counterclockwise order.
    pub vertices: [usize; 3],
    /// `faces[k]` is the face opposite `vertices[k]`.
    pub faces: [usize; 3],
    /// Local index of the newest vertex; the opposite edge is the refinement edge.
    pub refinement_vertex: usize,
    pub generation: u32,
}

impl Triangle {
    /// Local vertex indices `(k+1, k+2)` spanning local face `k`.
    pub fn face_local_vertices(k: usize) -> (usize, usize) {
        ((k + 1) % 3, (k + 2) % 3)
    }

    pub fn refinement_face(&self) -> usize {
        self.faces[self.refinement_vertex]
    }

    /// Local index of face `f` in this triangle.
    pub fn local_face(&self, f: usize) -> Option<usize> {
        self.faces.iter().position(|&g| g == f)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Face {
    /// Vertex ids, ascending.
    pub vertices: [usize; 2],
    pub left: usize,
    /// `None` on the domain boundary.
    pub right: Option<usize>,
    /// Unit normal pointing out of the left element.
    pub unit_normal: Vec2,
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        self.right.is_none()
    }

    /// The elements sharing this face (`ω_F`).
    pub fn elements(&self) -> impl Iterator<Item = usize> {
        std::iter::once(self.left).chain(self.right)
    }
}

/// A triangle description used to build meshes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cell {
    pub vertices: [usize; 3],
    pub refinement_vertex: usize,
    pub generation: u32,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ElementGeometry {
    /// Diameter (longest edge).
    pub diameter: f64,
    pub area: f64,
    pub centroid: Point,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FaceGeometry {
    /// `h_F`, the face length.
    pub length: f64,
    pub unit_normal: Vec2,
    pub midpoint: Point,
    pub left: usize,
    pub right: Option<usize>,
}

/// Direction of the cell diagonals of a structured grid.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Diagonal {
    /// Diagonals from lower left to upper right (`/`).
    #[default]
    Forward,
    /// Diagonals from upper left to lower right (`\`).
    Backward,
}

#[derive(Clone, Debug)]
pub struct Mesh {
    vertices: Vec<Point>,
    triangles: Vec<Triangle>,
    faces: Vec<Face>,
    vertex_elements: Vec<Vec<usize>>,
    domain: Rect,
}

fn signed_area(a: &Point, b: &Point, c: &Point) -> f64 {
    0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y))
}

fn outward_normal(a: &Point, b: &Point) -> Vec2 {
    // edge a -> b traversed counterclockwise around the element
    let e = b - a;
    Vec2::new(e.y, -e.x) / e.norm()
}

impl Mesh {
    /// Structured triangulation of `[0,1]²` into `2n²` right triangles.
    ///
    /// Every triangle's refinement edge starts out as its hypotenuse.
    pub fn structured_unit_square(n: usize, pattern: Diagonal) -> Result<Mesh> {
        if n == 0 {
            return invalid("structured mesh needs at least one subdivision per side");
        }
        let nv = n + 1;
        let mut vertices = Vec::with_capacity(nv * nv);
        for j in 0..nv {
            for i in 0..nv {
                vertices.push(Point::new(i as f64 / n as f64, j as f64 / n as f64));
            }
        }
        let id = |i: usize, j: usize| j * nv + i;
        let mut cells = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let a = id(i, j);
                let b = id(i + 1, j);
                let c = id(i + 1, j + 1);
                let d = id(i, j + 1);
                match pattern {
                    Diagonal::Forward => {
                        cells.push(Cell { vertices: [a, b, c], refinement_vertex: 1, generation: 0 });
                        cells.push(Cell { vertices: [a, c, d], refinement_vertex: 2, generation: 0 });
                    }
                    Diagonal::Backward => {
                        cells.push(Cell { vertices: [a, b, d], refinement_vertex: 0, generation: 0 });
                        cells.push(Cell { vertices: [b, c, d], refinement_vertex: 1, generation: 0 });
                    }
                }
            }
        }
        Mesh::from_cells(vertices, &cells, Rect::unit_square())
    }

    /// Builds faces and adjacency from a list of counterclockwise cells.
    ///
    /// Face numbering follows the first appearance of each edge when walking
    /// the cells in order and their local faces `0, 1, 2`.
    pub fn from_cells(vertices: Vec<Point>, cells: &[Cell], domain: Rect) -> Result<Mesh> {
        let nv = vertices.len();
        if let Some(i) = vertices.iter().position(|p| !p.x.is_finite() || !p.y.is_finite()) {
            return invalid(format!("vertex {i} has non-finite coordinates"));
        }
        let mut faces: Vec<Face> = Vec::with_capacity(3 * cells.len() / 2 + 4);
        let mut lookup: HashMap<(usize, usize), usize> = HashMap::with_capacity(faces.capacity());
        let mut triangles = Vec::with_capacity(cells.len());
        let mut vertex_elements = vec![Vec::new(); nv];
        for (t, cell) in cells.iter().enumerate() {
            if cell.vertices.iter().any(|&v| v >= nv) {
                return invalid(format!("triangle {t} references a missing vertex"));
            }
            if cell.refinement_vertex > 2 {
                return invalid(format!("triangle {t} has refinement vertex {}", cell.refinement_vertex));
            }
            let [a, b, c] = cell.vertices.map(|v| vertices[v]);
            if signed_area(&a, &b, &c) <= 0.0 {
                return invalid(format!("triangle {t} is not counterclockwise"));
            }
            let mut face_ids = [0; 3];
            for (k, face_id) in face_ids.iter_mut().enumerate() {
                let (la, lb) = Triangle::face_local_vertices(k);
                let (va, vb) = (cell.vertices[la], cell.vertices[lb]);
                let key = (va.min(vb), va.max(vb));
                match lookup.get(&key) {
                    Some(&f) => {
                        let face = &mut faces[f];
                        if face.right.is_some() || face.left == t {
                            return invalid(format!(
                                "edge ({}, {}) is shared by more than two triangles",
                                key.0, key.1
                            ));
                        }
                        face.right = Some(t);
                        *face_id = f;
                    }
                    None => {
                        let f = faces.len();
                        faces.push(Face {
                            vertices: [key.0, key.1],
                            left: t,
                            right: None,
                            unit_normal: outward_normal(&vertices[va], &vertices[vb]),
                        });
                        lookup.insert(key, f);
                        *face_id = f;
                    }
                }
            }
            for &v in &cell.vertices {
                vertex_elements[v].push(t);
            }
            triangles.push(Triangle {
                vertices: cell.vertices,
                faces: face_ids,
                refinement_vertex: cell.refinement_vertex,
                generation: cell.generation,
            });
        }
        Ok(Mesh { vertices, triangles, faces, vertex_elements, domain })
    }

    /// Assembles a mesh from raw parts without any validation.
    ///
    /// Intended for diagnostics: [`Mesh::conformity_check`] reports what is
    /// wrong with the result.
    pub fn from_raw_parts(
        vertices: Vec<Point>,
        triangles: Vec<Triangle>,
        faces: Vec<Face>,
        domain: Rect,
    ) -> Mesh {
        let mut vertex_elements = vec![Vec::new(); vertices.len()];
        for (t, tri) in triangles.iter().enumerate() {
            for &v in &tri.vertices {
                if let Some(list) = vertex_elements.get_mut(v) {
                    list.push(t);
                }
            }
        }
        Mesh { vertices, triangles, faces, vertex_elements, domain }
    }

    /// Decomposes the mesh into its vertices, triangles and faces.
    pub fn into_raw_parts(self) -> (Vec<Point>, Vec<Triangle>, Vec<Face>, Rect) {
        (self.vertices, self.triangles, self.faces, self.domain)
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_elements(&self) -> usize {
        self.triangles.len()
    }

    pub fn n_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn faces(&self) -> &[Face] {
        &self.faces
    }

    pub fn domain(&self) -> Rect {
        self.domain
    }

    pub fn triangle(&self, t: usize) -> &Triangle {
        &self.triangles[t]
    }

    pub fn face(&self, f: usize) -> &Face {
        &self.faces[f]
    }

    /// Elements incident to vertex `v`.
    pub fn vertex_elements(&self, v: usize) -> &[usize] {
        &self.vertex_elements[v]
    }

    pub fn cells(&self) -> Vec<Cell> {
        self.triangles
            .iter()
            .map(|t| Cell {
                vertices: t.vertices,
                refinement_vertex: t.refinement_vertex,
                generation: t.generation,
            })
            .collect()
    }

    pub fn element_points(&self, t: usize) -> [Point; 3] {
        self.triangles[t].vertices.map(|v| self.vertices[v])
    }

    pub fn face_points(&self, f: usize) -> [Point; 2] {
        self.faces[f].vertices.map(|v| self.vertices[v])
    }

    pub fn element_geometry(&self, t: usize) -> Result<ElementGeometry> {
        if t >= self.triangles.len() {
            return invalid(format!("element {t} out of range"));
        }
        let [a, b, c] = self.element_points(t);
        let diameter = (b - a).norm().max((c - b).norm()).max((a - c).norm());
        Ok(ElementGeometry {
            diameter,
            area: signed_area(&a, &b, &c),
            centroid: Point::from((a.coords + b.coords + c.coords) / 3.0),
        })
    }

    /// Element diameter `h_T` without bounds checking beyond indexing.
    pub fn diameter(&self, t: usize) -> f64 {
        let [a, b, c] = self.element_points(t);
        (b - a).norm().max((c - b).norm()).max((a - c).norm())
    }

    pub fn face_geometry(&self, f: usize) -> Result<FaceGeometry> {
        let Some(face) = self.faces.get(f) else {
            return invalid(format!("face {f} out of range"));
        };
        let [a, b] = self.face_points(f);
        Ok(FaceGeometry {
            length: (b - a).norm(),
            unit_normal: face.unit_normal,
            midpoint: Point::from((a.coords + b.coords) * 0.5),
            left: face.left,
            right: face.right,
        })
    }

    /// Outward unit normal of element `t` on its local face `k`.
    pub fn element_outward_normal(&self, t: usize, k: usize) -> Vec2 {
        let tri = &self.triangles[t];
        let (la, lb) = Triangle::face_local_vertices(k);
        outward_normal(&self.vertices[tri.vertices[la]], &self.vertices[tri.vertices[lb]])
    }

    pub fn total_area(&self) -> f64 {
        // Neumaier summation keeps the area identity at the 1e-12 level on big meshes.
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        for t in 0..self.triangles.len() {
            let [a, b, c] = self.element_points(t);
            let v = signed_area(&a, &b, &c);
            let s = sum + v;
            if sum.abs() >= v.abs() {
                comp += (sum - s) + v;
            } else {
                comp += (v - s) + sum;
            }
            sum = s;
        }
        sum + comp
    }

    /// Interior angles of element `t` in radians, at vertices `0, 1, 2`.
    pub fn angles(&self, t: usize) -> [f64; 3] {
        let p = self.element_points(t);
        let mut out = [0.0; 3];
        for (k, angle) in out.iter_mut().enumerate() {
            let u = p[(k + 1) % 3] - p[k];
            let v = p[(k + 2) % 3] - p[k];
            *angle = (u.dot(&v) / (u.norm() * v.norm())).clamp(-1.0, 1.0).acos();
        }
        out
    }

    pub fn min_angle(&self) -> f64 {
        (0..self.triangles.len())
            .flat_map(|t| self.angles(t))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_face_length(&self) -> f64 {
        (0..self.faces.len())
            .map(|f| {
                let [a, b] = self.face_points(f);
                (b - a).norm()
            })
            .fold(0.0, f64::max)
    }

    pub fn min_face_length(&self) -> f64 {
        (0..self.faces.len())
            .map(|f| {
                let [a, b] = self.face_points(f);
                (b - a).norm()
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn conformity_check(&self) -> ConformityReport {
        conformity::check(self)
    }

    pub fn refine(&self, marked: &[usize]) -> Result<Mesh> {
        nvb_refine(self, marked)
    }

    pub fn write_text<W: std::io::Write>(&self, out: W) -> Result<()> {
        io::write_text(self, out)
    }

    pub fn read_text<R: std::io::BufRead>(input: R) -> Result<Mesh> {
        io::read_text(input)
    }

    pub(crate) fn check_element(&self, t: usize) -> Result<()> {
        if t < self.triangles.len() {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("element {t} out of range")))
        }
    }
}
