use super::space::{FeSpace, NodalVector};
use super::sparse::{SparseMatrix, TripletBuilder};
use crate::quadrature::{edge_point, edge_rule, triangle_rule, TriangleRule};
use crate::{Error, Point, Result};

/// Element loop shared by the volume assemblers. `local` receives the
/// physical quadrature point, the weight times `|K|`, the basis values and
/// physical gradients, and the element matrix to accumulate into.
pub(crate) fn assemble_volume<F>(space: &FeSpace, rule: &TriangleRule, mut local: F) -> SparseMatrix
where
    F: FnMut(Point, f64, &[f64], &[Point], &mut [[f64; 6]; 6]),
{
    let basis = space.basis();
    let n = basis.num_local();
    let mesh = space.mesh();
    let mut builder = TripletBuilder::new(space.num_dofs());
    let tables: Vec<_> = rule
        .points
        .iter()
        .map(|&xh| (basis.eval(xh), basis.grad(xh)))
        .collect();
    for t in 0..mesh.num_triangles() {
        let geom = mesh.element_geometry(t).expect("triangle index in range");
        let mut ke = [[0.0; 6]; 6];
        for (i, &xh) in rule.points.iter().enumerate() {
            let (phi, dphi) = &tables[i];
            let mut grads = [[0.0; 2]; 6];
            for k in 0..n {
                grads[k] = geom.push_gradient(dphi[k]);
            }
            local(
                geom.map(xh),
                geom.area * rule.weights[i],
                &phi[..n],
                &grads[..n],
                &mut ke,
            );
        }
        let dofs = space.element_dofs(t);
        for a in 0..n {
            for b in 0..n {
                builder.push(dofs[a], dofs[b], ke[a][b]);
            }
        }
    }
    builder.build()
}

/// `K[z, w] = int grad Phi_z . grad Phi_w`, integrated exactly.
pub fn assemble_stiffness(space: &FeSpace) -> SparseMatrix {
    let degree = (2 * space.degree() - 2).max(1);
    let rule = triangle_rule(degree).expect("supported degree");
    assemble_volume(space, &rule, |_, w, _, g, ke| {
        for a in 0..g.len() {
            for b in 0..g.len() {
                ke[a][b] += w * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
            }
        }
    })
}

/// Consistent mass matrix `int Phi_z Phi_w`, integrated exactly.
pub fn assemble_mass(space: &FeSpace) -> SparseMatrix {
    let rule = triangle_rule(2 * space.degree()).expect("supported degree");
    assemble_volume(space, &rule, |_, w, phi, _, ke| {
        for a in 0..phi.len() {
            for b in 0..phi.len() {
                ke[a][b] += w * phi[a] * phi[b];
            }
        }
    })
}

/// `L[z] = int Phi_z`, so that `int I(f g) = sum_z f(z) g(z) L[z]`.
pub fn assemble_load_lumped(space: &FeSpace) -> NodalVector {
    let basis = space.basis();
    let n = basis.num_local();
    let rule = triangle_rule(space.degree()).expect("supported degree");
    let mut load = vec![0.0; space.num_dofs()];
    let mesh = space.mesh();
    for t in 0..mesh.num_triangles() {
        let area = mesh.element_geometry(t).expect("triangle index in range").area;
        let dofs = space.element_dofs(t);
        for (xh, w) in rule.points.iter().zip(&rule.weights) {
            let phi = basis.eval(*xh);
            for k in 0..n {
                load[dofs[k]] += area * w * phi[k];
            }
        }
    }
    NodalVector(load)
}

/// Weak Dirichlet terms: for every `v` in the space,
/// `sum_e alpha / h_e int_e |v - g0|^2 = v^T P v - 2 v^T r + s`.
#[derive(Debug, Clone)]
pub struct NitscheTerms {
    pub alpha: f64,
    pub matrix: SparseMatrix,
    pub rhs: NodalVector,
    pub constant: f64,
}

impl NitscheTerms {
    pub fn penalty(&self, v: &[f64]) -> Result<f64> {
        let pv = self.matrix.quad_form(v)?;
        let rv: f64 = v.iter().zip(&self.rhs.0).map(|(a, b)| a * b).sum();
        Ok(pv - 2.0 * rv + self.constant)
    }
}

/// Edge integrals use a Gauss rule of degree `2q`, exact for the polynomial
/// part of `|v - g0|^2`.
pub fn assemble_nitsche<G>(space: &FeSpace, alpha: f64, g0: G) -> Result<NitscheTerms>
where
    G: Fn(Point) -> f64,
{
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "Nitsche weight must be positive, got {alpha}"
        )));
    }
    let basis = space.basis();
    let rule = edge_rule(2 * space.degree())?;
    let n = basis.num_edge_local();
    let mesh = space.mesh();
    let mut builder = TripletBuilder::new(space.num_dofs());
    let mut rhs = vec![0.0; space.num_dofs()];
    let mut constant = 0.0;
    for (e, edge) in mesh.boundary_edges().iter().enumerate() {
        let dofs = space.boundary_edge_dofs(e);
        // alpha / h_e times the edge measure h_e.
        let mut pe = [[0.0; 3]; 3];
        for (&s, &w) in rule.points.iter().zip(&rule.weights) {
            let phi = basis.edge_eval(s);
            let g = g0(edge_point(mesh, edge, s));
            for a in 0..n {
                rhs[dofs[a]] += alpha * w * phi[a] * g;
                for b in 0..n {
                    pe[a][b] += alpha * w * phi[a] * phi[b];
                }
            }
            constant += alpha * w * g * g;
        }
        for a in 0..n {
            for b in 0..n {
                builder.push(dofs[a], dofs[b], pe[a][b]);
            }
        }
    }
    Ok(NitscheTerms {
        alpha,
        matrix: builder.build(),
        rhs: NodalVector(rhs),
        constant,
    })
}
