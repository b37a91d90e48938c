use std::f64::consts::PI;

use crate::mesh::Mesh;
use crate::network::ResNet;
use crate::quadrature::triangle_rule;
use crate::{Error, Point, Result};

/// A Poisson problem `-lap u = f` with known solution and Dirichlet data.
#[derive(Debug, Clone, Copy)]
pub struct ManufacturedProblem {
    pub name: &'static str,
    pub u: fn(Point) -> f64,
    pub grad_u: fn(Point) -> Point,
    pub f: fn(Point) -> f64,
    pub g0: fn(Point) -> f64,
    /// `sup |f|` over the domain.
    pub f_sup: f64,
}

fn sine_u(p: Point) -> f64 {
    (2.0 * PI * p[0]).sin() * (2.0 * PI * p[1]).sin()
}

fn sine_grad(p: Point) -> Point {
    let (sx, cx) = (2.0 * PI * p[0]).sin_cos();
    let (sy, cy) = (2.0 * PI * p[1]).sin_cos();
    [2.0 * PI * cx * sy, 2.0 * PI * sx * cy]
}

fn sine_f(p: Point) -> f64 {
    8.0 * PI * PI * sine_u(p)
}

fn zero(_: Point) -> f64 {
    0.0
}

impl ManufacturedProblem {
    /// `u = sin(2 pi x) sin(2 pi y)`, `f = 8 pi^2 u`, homogeneous boundary data.
    pub fn sine() -> Self {
        Self {
            name: "sine",
            u: sine_u,
            grad_u: sine_grad,
            f: sine_f,
            g0: zero,
            f_sup: 8.0 * PI * PI,
        }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "sine" => Ok(Self::sine()),
            other => Err(Error::Config(format!("unknown problem `{other}`"))),
        }
    }

    /// The exact energy `1/2 int |grad u|^2 - int f u`, which equals `-pi^2`
    /// for the sine problem.
    pub fn exact_energy(&self) -> f64 {
        match self.name {
            "sine" => -PI * PI,
            _ => f64::NAN,
        }
    }
}

/// `(||u_net - u||_L2, |u_net - u|_H1)` by quadrature of the given degree on
/// the uniform `m_ref` mesh, with network gradients from forward tangents.
pub fn l2_h1_error(net: &ResNet, problem: &ManufacturedProblem, m_ref: usize, degree: usize) -> Result<(f64, f64)> {
    let mesh = Mesh::uniform_unit_square(m_ref)?;
    let rule = triangle_rule(degree)?;
    let mut points = Vec::with_capacity(mesh.num_triangles() * rule.len());
    let mut weights = Vec::with_capacity(points.capacity());
    for t in 0..mesh.num_triangles() {
        let geom = mesh.element_geometry(t)?;
        for (&xh, &w) in rule.points.iter().zip(&rule.weights) {
            points.push(geom.map(xh));
            weights.push(w * geom.area);
        }
    }
    let (vals, grads) = net.forward_with_gradient(&points);
    let mut l2 = 0.0;
    let mut h1 = 0.0;
    for i in 0..points.len() {
        let d = vals[i] - (problem.u)(points[i]);
        let du = (problem.grad_u)(points[i]);
        l2 += weights[i] * d * d;
        h1 += weights[i] * ((grads[i][0] - du[0]).powi(2) + (grads[i][1] - du[1]).powi(2));
    }
    Ok((l2.sqrt(), h1.sqrt()))
}
