//! Conforming triangulations of polygonal domains.
//!
//! Meshes store counter-clockwise triangles and the list of boundary edges
//! together with their parent triangle. The uniform `2 M^2` mesh of the unit
//! square used throughout the experiments is built by
//! [`Mesh::uniform_unit_square`]; it additionally remembers its lattice size so
//! that point location is constant time.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::{Error, Point, Result};

const DUPLICATE_TOL: f64 = 1e-12;

/// Owning triangle and oriented endpoints of one edge occurrence.
type EdgeUse = (usize, usize, usize);

/// A boundary edge, oriented as in its parent triangle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub triangle: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
    lattice: Option<usize>,
}

/// Affine geometry of one triangle.
///
/// The map `F(xh) = jacobian * xh + origin` sends the reference triangle
/// `(0,0), (1,0), (0,1)` onto the element.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementGeometry {
    pub origin: Point,
    /// Columns are `v1 - v0` and `v2 - v0`.
    pub jacobian: [[f64; 2]; 2],
    pub area: f64,
    /// Longest edge.
    pub diameter: f64,
    /// Edge `i` is opposite to local vertex `i`.
    pub edge_lengths: [f64; 3],
}

impl ElementGeometry {
    pub fn det(&self) -> f64 {
        let j = &self.jacobian;
        j[0][0] * j[1][1] - j[0][1] * j[1][0]
    }

    pub fn map(&self, xh: Point) -> Point {
        let j = &self.jacobian;
        [
            self.origin[0] + j[0][0] * xh[0] + j[0][1] * xh[1],
            self.origin[1] + j[1][0] * xh[0] + j[1][1] * xh[1],
        ]
    }

    /// Inverse transpose of the jacobian, mapping reference gradients to
    /// physical ones.
    pub fn inverse_transpose(&self) -> [[f64; 2]; 2] {
        let j = &self.jacobian;
        let d = self.det();
        [[j[1][1] / d, -j[1][0] / d], [-j[0][1] / d, j[0][0] / d]]
    }

    /// Physical gradient from a reference gradient.
    pub fn push_gradient(&self, g: Point) -> Point {
        let it = self.inverse_transpose();
        [
            it[0][0] * g[0] + it[0][1] * g[1],
            it[1][0] * g[0] + it[1][1] * g[1],
        ]
    }

    /// Reference coordinates of a physical point.
    pub fn pull(&self, x: Point) -> Point {
        let j = &self.jacobian;
        let d = self.det();
        let dx = x[0] - self.origin[0];
        let dy = x[1] - self.origin[1];
        [(j[1][1] * dx - j[0][1] * dy) / d, (-j[1][0] * dx + j[0][0] * dy) / d]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshQuality {
    pub h_max: f64,
    pub h_min: f64,
    pub shape_ratio: f64,
}

fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

impl Mesh {
    /// Builds a mesh from raw vertex and triangle lists, validating all
    /// invariants and extracting the boundary edges.
    pub fn new(vertices: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        Self::build(vertices, triangles, None)
    }

    /// The uniform triangulation of `[0,1]^2` into `2 M^2` triangles.
    ///
    /// Vertices are numbered row-major (`j * (M+1) + i` for the vertex at
    /// `(i/M, j/M)`). Each cell is split along its bottom-left to top-right
    /// diagonal; triangle `2c` is the lower one of cell `c = j*M + i` and
    /// `2c + 1` the upper.
    pub fn uniform_unit_square(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument(
                "uniform mesh needs at least one cell per side".into(),
            ));
        }
        let n = m + 1;
        let mut vertices = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                vertices.push([i as f64 / m as f64, j as f64 / m as f64]);
            }
        }
        let mut triangles = Vec::with_capacity(2 * m * m);
        for j in 0..m {
            for i in 0..m {
                let v00 = j * n + i;
                let v10 = v00 + 1;
                let v01 = v00 + n;
                let v11 = v01 + 1;
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            }
        }
        Self::build(vertices, triangles, Some(m))
    }

    fn build(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        lattice: Option<usize>,
    ) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::InvalidMesh("no triangles".into()));
        }
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= vertices.len() {
                    return Err(Error::IndexOutOfRange {
                        what: "vertex",
                        index: v,
                        len: vertices.len(),
                    });
                }
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::DegenerateElement(t));
            }
            let a = signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            if !(a > 0.0) {
                return Err(Error::DegenerateElement(t));
            }
        }
        check_duplicates(&vertices)?;

        // Interior edges are shared by exactly two triangles, with opposite
        // orientations.
        let mut edge_count: HashMap<(usize, usize), Vec<EdgeUse>> = HashMap::new();
        for (t, tri) in triangles.iter().enumerate() {
            for k in 0..3 {
                let a = tri[(k + 1) % 3];
                let b = tri[(k + 2) % 3];
                edge_count
                    .entry((a.min(b), a.max(b)))
                    .or_default()
                    .push((t, a, b));
            }
        }
        let mut boundary_edges = Vec::new();
        for (key, owners) in &edge_count {
            match owners.len() {
                1 => {
                    let (t, a, b) = owners[0];
                    boundary_edges.push(BoundaryEdge {
                        vertices: [a, b],
                        triangle: t,
                    });
                }
                2 => {
                    if owners[0].1 == owners[1].1 {
                        return Err(Error::InvalidMesh(format!(
                            "edge {key:?} has inconsistent orientation"
                        )));
                    }
                }
                n => {
                    return Err(Error::InvalidMesh(format!(
                        "edge {key:?} shared by {n} triangles"
                    )))
                }
            }
        }
        boundary_edges.sort_by_key(|e| (e.triangle, e.vertices));

        Ok(Self {
            vertices,
            triangles,
            boundary_edges,
            lattice,
        })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Cells per side when the mesh is the uniform unit-square lattice.
    pub fn lattice_size(&self) -> Option<usize> {
        self.lattice
    }

    /// All distinct edges as sorted vertex pairs, in order of first
    /// appearance while walking triangles and their local edges `01, 12, 20`.
    pub fn edges(&self) -> Vec<[usize; 2]> {
        let mut seen = HashMap::new();
        let mut out = Vec::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let a = tri[k];
                let b = tri[(k + 1) % 3];
                let key = [a.min(b), a.max(b)];
                if seen.insert(key, out.len()).is_none() {
                    out.push(key);
                }
            }
        }
        out
    }

    pub fn element_geometry(&self, t: usize) -> Result<ElementGeometry> {
        let tri = self.triangles.get(t).ok_or(Error::IndexOutOfRange {
            what: "triangle",
            index: t,
            len: self.triangles.len(),
        })?;
        let [p0, p1, p2] = tri.map(|v| self.vertices[v]);
        Ok(geometry_of(p0, p1, p2))
    }

    pub fn edge_length(&self, e: &BoundaryEdge) -> f64 {
        dist(self.vertices[e.vertices[0]], self.vertices[e.vertices[1]])
    }

    pub fn quality(&self) -> MeshQuality {
        let mut h_max = 0.0f64;
        let mut h_min = f64::INFINITY;
        for t in 0..self.triangles.len() {
            let [p0, p1, p2] = self.triangles[t].map(|v| self.vertices[v]);
            let h = geometry_of(p0, p1, p2).diameter;
            h_max = h_max.max(h);
            h_min = h_min.min(h);
        }
        MeshQuality {
            h_max,
            h_min,
            shape_ratio: h_max / h_min,
        }
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.triangles[t].map(|v| self.vertices[v]);
                signed_area(a, b, c)
            })
            .sum()
    }

    /// Index of the triangle containing `x`.
    ///
    /// On the uniform lattice, points on shared edges or vertices go to the
    /// lowest-index triangle that contains them. Other meshes fall back to a
    /// linear scan, which returns the first containing triangle.
    pub fn locate(&self, x: Point) -> Result<usize> {
        if !(x[0].is_finite() && x[1].is_finite()) {
            return Err(Error::OutsideDomain(x[0], x[1]));
        }
        match self.lattice {
            Some(m) => {
                if !(0.0..=1.0).contains(&x[0]) || !(0.0..=1.0).contains(&x[1]) {
                    return Err(Error::OutsideDomain(x[0], x[1]));
                }
                let mf = m as f64;
                let i = cell_index(x[0] * mf, m);
                let j = cell_index(x[1] * mf, m);
                let s = x[0] * mf - i as f64;
                let r = x[1] * mf - j as f64;
                let cell = j * m + i;
                // Lower triangle owns the diagonal; within a row the cell
                // index is smaller than the one above, so ties resolve low.
                Ok(if r <= s { 2 * cell } else { 2 * cell + 1 })
            }
            None => {
                const EPS: f64 = 1e-12;
                for (t, tri) in self.triangles.iter().enumerate() {
                    let [a, b, c] = tri.map(|v| self.vertices[v]);
                    let area = signed_area(a, b, c);
                    let l0 = signed_area(x, b, c) / area;
                    let l1 = signed_area(a, x, c) / area;
                    let l2 = signed_area(a, b, x) / area;
                    if l0 >= -EPS && l1 >= -EPS && l2 >= -EPS {
                        return Ok(t);
                    }
                }
                Err(Error::OutsideDomain(x[0], x[1]))
            }
        }
    }

    /// Plain-text dump: `v x y`, `t i j k`, `b i j` lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for v in &self.vertices {
            let _ = writeln!(s, "v {:?} {:?}", v[0], v[1]);
        }
        for t in &self.triangles {
            let _ = writeln!(s, "t {} {} {}", t[0], t[1], t[2]);
        }
        for e in &self.boundary_edges {
            let _ = writeln!(s, "b {} {}", e.vertices[0], e.vertices[1]);
        }
        s
    }

    /// Parses the text dump. Boundary lines are checked against the edges
    /// recomputed from the triangles.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        let mut boundary = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = || Error::InvalidMesh(format!("line {}: cannot parse {line:?}", lineno + 1));
            let mut parts = line.split_whitespace();
            let tag = parts.next().ok_or_else(bad)?;
            let rest: Vec<&str> = parts.collect();
            match (tag, rest.len()) {
                ("v", 2) => {
                    let x = rest[0].parse().map_err(|_| bad())?;
                    let y = rest[1].parse().map_err(|_| bad())?;
                    vertices.push([x, y]);
                }
                ("t", 3) => {
                    let mut t = [0usize; 3];
                    for (k, r) in rest.iter().enumerate() {
                        t[k] = r.parse().map_err(|_| bad())?;
                    }
                    triangles.push(t);
                }
                ("b", 2) => {
                    let a: usize = rest[0].parse().map_err(|_| bad())?;
                    let b: usize = rest[1].parse().map_err(|_| bad())?;
                    boundary.push([a, b]);
                }
                _ => return Err(bad()),
            }
        }
        let mesh = Self::new(vertices, triangles)?;
        let mut expected: Vec<[usize; 2]> = mesh
            .boundary_edges
            .iter()
            .map(|e| {
                let [a, b] = e.vertices;
                [a.min(b), a.max(b)]
            })
            .collect();
        let mut given: Vec<[usize; 2]> = boundary.iter().map(|&[a, b]| [a.min(b), a.max(b)]).collect();
        expected.sort_unstable();
        given.sort_unstable();
        if !given.is_empty() && given != expected {
            return Err(Error::InvalidMesh(
                "boundary edge list disagrees with triangles".into(),
            ));
        }
        Ok(mesh)
    }
}

/// `floor`-based cell index where exact lattice coordinates go to the lower
/// cell, clamped to `0..m`.
fn cell_index(scaled: f64, m: usize) -> usize {
    let c = scaled.ceil() - 1.0;
    if c < 0.0 {
        0
    } else {
        (c as usize).min(m - 1)
    }
}

fn geometry_of(p0: Point, p1: Point, p2: Point) -> ElementGeometry {
    let jacobian = [[p1[0] - p0[0], p2[0] - p0[0]], [p1[1] - p0[1], p2[1] - p0[1]]];
    let det = jacobian[0][0] * jacobian[1][1] - jacobian[0][1] * jacobian[1][0];
    let edge_lengths = [dist(p1, p2), dist(p2, p0), dist(p0, p1)];
    ElementGeometry {
        origin: p0,
        jacobian,
        area: 0.5 * det.abs(),
        diameter: edge_lengths[0].max(edge_lengths[1]).max(edge_lengths[2]),
        edge_lengths,
    }
}

fn check_duplicates(vertices: &[Point]) -> Result<()> {
    let mut order: Vec<usize> = (0..vertices.len()).collect();
    order.sort_by(|&a, &b| vertices[a][0].total_cmp(&vertices[b][0]));
    for (k, &a) in order.iter().enumerate() {
        for &b in &order[k + 1..] {
            if vertices[b][0] - vertices[a][0] > DUPLICATE_TOL {
                break;
            }
            if (vertices[b][1] - vertices[a][1]).abs() <= DUPLICATE_TOL {
                return Err(Error::InvalidMesh(format!(
                    "vertices {a} and {b} coincide"
                )));
            }
        }
    }
    Ok(())
}
