use std::collections::HashSet;
use std::fmt;

use super::{signed_area, Mesh, Triangle};

#[derive(Clone, Debug, PartialEq)]
pub enum ConformityIssue {
    MissingVertex { element: usize },
    NonPositiveArea { element: usize, area: f64 },
    InvalidRefinementVertex { element: usize },
    /// Local face `local` of `element` does not name the matching vertex pair.
    FaceVertexMismatch { element: usize, local: usize },
    /// Face referencing a missing element, or not referenced back by it.
    DanglingFace { face: usize },
    DuplicateFace { face: usize },
    /// A face with two identical neighbours.
    DegenerateAdjacency { face: usize },
    /// A one-sided face in the interior of the domain (hanging node or hole).
    InteriorBoundaryFace { face: usize },
    BadNormal { face: usize },
    AreaMismatch { total: f64, expected: f64 },
}

impl fmt::Display for ConformityIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::MissingVertex { element } => write!(f, "element {element} references a missing vertex"),
            Self::NonPositiveArea { element, area } => write!(f, "element {element} has signed area {area:e}"),
            Self::InvalidRefinementVertex { element } => write!(f, "element {element} has an invalid refinement vertex"),
            Self::FaceVertexMismatch { element, local } => {
                write!(f, "local face {local} of element {element} does not match its vertices")
            }
            Self::DanglingFace { face } => write!(f, "face {face} is dangling"),
            Self::DuplicateFace { face } => write!(f, "face {face} duplicates another face"),
            Self::DegenerateAdjacency { face } => write!(f, "face {face} has identical neighbours"),
            Self::InteriorBoundaryFace { face } => write!(f, "face {face} is one-sided but not on the domain boundary"),
            Self::BadNormal { face } => write!(f, "face {face} has a wrong unit normal"),
            Self::AreaMismatch { total, expected } => write!(f, "element areas sum to {total} instead of {expected}"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConformityReport {
    pub issues: Vec<ConformityIssue>,
}

impl ConformityReport {
    pub fn passed(&self) -> bool {
        self.issues.is_empty()
    }
}

impl fmt::Display for ConformityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.issues.is_empty() {
            return write!(f, "conforming");
        }
        for issue in &self.issues {
            writeln!(f, "{issue}")?;
        }
        Ok(())
    }
}

pub(super) fn check(mesh: &Mesh) -> ConformityReport {
    let mut issues = Vec::new();
    let nv = mesh.vertices.len();
    let nt = mesh.triangles.len();
    let nf = mesh.faces.len();

    for (t, tri) in mesh.triangles.iter().enumerate() {
        if tri.vertices.iter().any(|&v| v >= nv) {
            issues.push(ConformityIssue::MissingVertex { element: t });
            continue;
        }
        let [a, b, c] = tri.vertices.map(|v| mesh.vertices[v]);
        let area = signed_area(&a, &b, &c);
        if !(area > 0.0) {
            issues.push(ConformityIssue::NonPositiveArea { element: t, area });
        }
        if tri.refinement_vertex > 2 {
            issues.push(ConformityIssue::InvalidRefinementVertex { element: t });
        }
        for k in 0..3 {
            let (la, lb) = Triangle::face_local_vertices(k);
            let (va, vb) = (tri.vertices[la], tri.vertices[lb]);
            let ok = mesh.faces.get(tri.faces[k]).is_some_and(|face| {
                face.vertices == [va.min(vb), va.max(vb)]
                    && (face.left == t || face.right == Some(t))
            });
            if !ok {
                issues.push(ConformityIssue::FaceVertexMismatch { element: t, local: k });
            }
        }
    }

    let mut seen = HashSet::with_capacity(nf);
    for (f, face) in mesh.faces.iter().enumerate() {
        if !seen.insert(face.vertices) {
            issues.push(ConformityIssue::DuplicateFace { face: f });
        }
        let references_back = |t: usize| nt > t && mesh.triangles[t].faces.contains(&f);
        if !references_back(face.left) || face.right.is_some_and(|r| !references_back(r)) {
            issues.push(ConformityIssue::DanglingFace { face: f });
            continue;
        }
        if face.right == Some(face.left) {
            issues.push(ConformityIssue::DegenerateAdjacency { face: f });
        }
        let left_ok = mesh.triangles[face.left].vertices.iter().all(|&v| v < nv);
        if face.vertices.iter().any(|&v| v >= nv) || !left_ok {
            continue;
        }
        let [a, b] = face.vertices.map(|v| mesh.vertices[v]);
        if face.right.is_none() && !mesh.domain.contains_segment_on_boundary(&a, &b) {
            issues.push(ConformityIssue::InteriorBoundaryFace { face: f });
        }
        let n = face.unit_normal;
        let tangent = b - a;
        let left_centroid = {
            let p = mesh.element_points(face.left);
            (p[0].coords + p[1].coords + p[2].coords) / 3.0
        };
        let outward = (a.coords - left_centroid).dot(&n) > 0.0;
        if (n.norm() - 1.0).abs() > 1e-12 || n.dot(&tangent).abs() > 1e-12 * tangent.norm() || !outward {
            issues.push(ConformityIssue::BadNormal { face: f });
        }
    }

    if issues.iter().all(|i| !matches!(i, ConformityIssue::MissingVertex { .. })) {
        let total = mesh.total_area();
        let expected = mesh.domain.area();
        if (total - expected).abs() > 1e-12 * expected {
            issues.push(ConformityIssue::AreaMismatch { total, expected });
        }
    }

    ConformityReport { issues }
}
