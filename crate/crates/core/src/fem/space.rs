use std::collections::HashMap;

use crate::mesh::Mesh;
use crate::{Error, Point, Result};

/// Lagrange reference elements on the triangle `(0,0), (1,0), (0,1)`.
///
/// Local node order: the three vertices, then (for P2) the midpoints of the
/// edges `01`, `12`, `20`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LagrangeBasis {
    P1,
    P2,
}

pub const MAX_LOCAL_DOFS: usize = 6;

const BARY_GRAD: [Point; 3] = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];
const EDGE_PAIRS: [(usize, usize); 3] = [(0, 1), (1, 2), (2, 0)];

impl LagrangeBasis {
    pub fn from_degree(q: usize) -> Result<Self> {
        match q {
            1 => Ok(Self::P1),
            2 => Ok(Self::P2),
            _ => Err(Error::InvalidArgument(format!(
                "Lagrange degree {q} not supported (use 1 or 2)"
            ))),
        }
    }

    pub fn degree(self) -> usize {
        match self {
            Self::P1 => 1,
            Self::P2 => 2,
        }
    }

    pub fn num_local(self) -> usize {
        match self {
            Self::P1 => 3,
            Self::P2 => 6,
        }
    }

    pub fn nodes(self) -> &'static [Point] {
        const NODES: [Point; 6] = [
            [0.0, 0.0],
            [1.0, 0.0],
            [0.0, 1.0],
            [0.5, 0.0],
            [0.5, 0.5],
            [0.0, 0.5],
        ];
        &NODES[..self.num_local()]
    }

    pub fn eval(self, xh: Point) -> [f64; MAX_LOCAL_DOFS] {
        let l = [1.0 - xh[0] - xh[1], xh[0], xh[1]];
        let mut out = [0.0; MAX_LOCAL_DOFS];
        match self {
            Self::P1 => out[..3].copy_from_slice(&l),
            Self::P2 => {
                for i in 0..3 {
                    out[i] = l[i] * (2.0 * l[i] - 1.0);
                }
                for (k, &(i, j)) in EDGE_PAIRS.iter().enumerate() {
                    out[3 + k] = 4.0 * l[i] * l[j];
                }
            }
        }
        out
    }

    pub fn grad(self, xh: Point) -> [Point; MAX_LOCAL_DOFS] {
        let mut out = [[0.0; 2]; MAX_LOCAL_DOFS];
        match self {
            Self::P1 => out[..3].copy_from_slice(&BARY_GRAD),
            Self::P2 => {
                let l = [1.0 - xh[0] - xh[1], xh[0], xh[1]];
                for i in 0..3 {
                    let c = 4.0 * l[i] - 1.0;
                    out[i] = [c * BARY_GRAD[i][0], c * BARY_GRAD[i][1]];
                }
                for (k, &(i, j)) in EDGE_PAIRS.iter().enumerate() {
                    out[3 + k] = [
                        4.0 * (l[i] * BARY_GRAD[j][0] + l[j] * BARY_GRAD[i][0]),
                        4.0 * (l[i] * BARY_GRAD[j][1] + l[j] * BARY_GRAD[i][1]),
                    ];
                }
            }
        }
        out
    }

    /// 1-D trace basis on an edge parametrised by `s in [0,1]`, nodes at
    /// `0`, `1` and (P2) `1/2`.
    pub fn edge_eval(self, s: f64) -> [f64; 3] {
        match self {
            Self::P1 => [1.0 - s, s, 0.0],
            Self::P2 => [
                (1.0 - s) * (1.0 - 2.0 * s),
                s * (2.0 * s - 1.0),
                4.0 * s * (1.0 - s),
            ],
        }
    }

    pub fn num_edge_local(self) -> usize {
        self.degree() + 1
    }
}

/// Continuous Lagrange space of degree 1 or 2 on a mesh, without boundary
/// constraints. The zero-trace subspace is obtained with
/// [`FeSpace::interpolate_zero_boundary`] or [`FeSpace::zero_boundary`].
#[derive(Debug, Clone)]
pub struct FeSpace {
    mesh: Mesh,
    basis: LagrangeBasis,
    dof_coords: Vec<Point>,
    element_dofs: Vec<[usize; MAX_LOCAL_DOFS]>,
    boundary: Vec<bool>,
    boundary_edge_dofs: Vec<[usize; 3]>,
}

/// Nodal coefficients of a finite element function.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalVector(pub Vec<f64>);

impl NodalVector {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for NodalVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl FeSpace {
    /// Vertex dofs keep the mesh vertex numbering; P2 edge dofs follow in the
    /// order returned by [`Mesh::edges`].
    pub fn new(mesh: &Mesh, degree: usize) -> Result<Self> {
        let basis = LagrangeBasis::from_degree(degree)?;
        let mut dof_coords = mesh.vertices().to_vec();
        let mut edge_dof: HashMap<[usize; 2], usize> = HashMap::new();
        if basis == LagrangeBasis::P2 {
            for e in mesh.edges() {
                let a = mesh.vertices()[e[0]];
                let b = mesh.vertices()[e[1]];
                edge_dof.insert(e, dof_coords.len());
                dof_coords.push([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
            }
        }
        let mid = |a: usize, b: usize| edge_dof[&[a.min(b), a.max(b)]];

        let element_dofs = mesh
            .triangles()
            .iter()
            .map(|t| {
                let mut d = [usize::MAX; MAX_LOCAL_DOFS];
                d[..3].copy_from_slice(t);
                if basis == LagrangeBasis::P2 {
                    for (k, &(i, j)) in EDGE_PAIRS.iter().enumerate() {
                        d[3 + k] = mid(t[i], t[j]);
                    }
                }
                d
            })
            .collect();

        let mut boundary = vec![false; dof_coords.len()];
        let boundary_edge_dofs: Vec<[usize; 3]> = mesh
            .boundary_edges()
            .iter()
            .map(|e| {
                let [a, b] = e.vertices;
                let m = if basis == LagrangeBasis::P2 {
                    mid(a, b)
                } else {
                    usize::MAX
                };
                [a, b, m]
            })
            .collect();
        for d in &boundary_edge_dofs {
            for &z in &d[..basis.num_edge_local()] {
                boundary[z] = true;
            }
        }

        Ok(Self {
            mesh: mesh.clone(),
            basis,
            dof_coords,
            element_dofs,
            boundary,
            boundary_edge_dofs,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn basis(&self) -> LagrangeBasis {
        self.basis
    }

    pub fn degree(&self) -> usize {
        self.basis.degree()
    }

    pub fn num_dofs(&self) -> usize {
        self.dof_coords.len()
    }

    pub fn dof_coords(&self) -> &[Point] {
        &self.dof_coords
    }

    pub fn element_dofs(&self, t: usize) -> &[usize] {
        &self.element_dofs[t][..self.basis.num_local()]
    }

    pub fn is_boundary(&self, z: usize) -> bool {
        self.boundary[z]
    }

    pub fn boundary_flags(&self) -> &[bool] {
        &self.boundary
    }

    /// Dofs of boundary edge `e`: its two vertices, then the midpoint for P2.
    pub fn boundary_edge_dofs(&self, e: usize) -> &[usize] {
        &self.boundary_edge_dofs[e][..self.basis.num_edge_local()]
    }

    pub fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.num_dofs() {
            return Err(Error::DimensionMismatch {
                expected: self.num_dofs(),
                found: v.len(),
            });
        }
        Ok(())
    }

    /// Nodal interpolant `values[z] = g(x_z)`.
    pub fn interpolate<F: Fn(Point) -> f64>(&self, g: F) -> NodalVector {
        NodalVector(self.dof_coords.iter().map(|&x| g(x)).collect())
    }

    /// Nodal interpolant with boundary dofs forced to zero.
    pub fn interpolate_zero_boundary<F: Fn(Point) -> f64>(&self, g: F) -> NodalVector {
        let mut v = self.interpolate(g);
        self.zero_boundary(&mut v);
        v
    }

    pub fn zero_boundary(&self, v: &mut NodalVector) {
        for (x, &b) in v.0.iter_mut().zip(&self.boundary) {
            if b {
                *x = 0.0;
            }
        }
    }

    /// Value and gradient of `sum_z v_z Phi_z` at `x`.
    pub fn evaluate(&self, v: &[f64], x: Point) -> Result<(f64, Point)> {
        self.check_len(v)?;
        let t = self.mesh.locate(x)?;
        let g = self.mesh.element_geometry(t)?;
        Ok(self.evaluate_local(v, t, &g, g.pull(x)))
    }

    /// Evaluation at reference coordinates `xh` of element `t`.
    pub(crate) fn evaluate_local(
        &self,
        v: &[f64],
        t: usize,
        geom: &crate::mesh::ElementGeometry,
        xh: Point,
    ) -> (f64, Point) {
        let phi = self.basis.eval(xh);
        let dphi = self.basis.grad(xh);
        let mut val = 0.0;
        let mut gh = [0.0; 2];
        for (k, &z) in self.element_dofs(t).iter().enumerate() {
            val += v[z] * phi[k];
            gh[0] += v[z] * dphi[k][0];
            gh[1] += v[z] * dphi[k][1];
        }
        (val, geom.push_gradient(gh))
    }
}
