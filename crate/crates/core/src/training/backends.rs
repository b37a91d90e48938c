//! The three discretisations of the Ritz energy used as training losses.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fem::{FeSpace, FemEnergy};
use crate::harness::ManufacturedProblem;
use crate::mesh::Mesh;
use crate::network::{CollocationSet, ParamGradient, ResNet};
use crate::quadrature::{edge_point, edge_rule, triangle_rule};
use crate::{Point, Result};

/// Monte-Carlo collocation: fresh uniform draws of `2 M^2` interior and
/// `4 M` boundary points on every call, loss
/// `|Omega|/N sum (|grad u|^2/2 - f u) + c/N_b sum u^2`.
#[derive(Debug, Clone)]
pub struct McLoss {
    m: usize,
    c_pen: f64,
    f: fn(Point) -> f64,
    rng: ChaCha8Rng,
}

impl McLoss {
    pub fn new(m: usize, problem: &ManufacturedProblem, c_pen: f64, seed: u64) -> Self {
        Self {
            m,
            c_pen,
            f: problem.f,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn num_interior(&self) -> usize {
        2 * self.m * self.m
    }

    pub fn num_boundary(&self) -> usize {
        4 * self.m
    }

    /// Uniform point on the perimeter of the unit square.
    fn boundary_point(rng: &mut ChaCha8Rng) -> Point {
        let s: f64 = rng.random_range(0.0..4.0);
        let side = (s.floor() as usize).min(3);
        let t = s - side as f64;
        match side {
            0 => [t, 0.0],
            1 => [1.0, t],
            2 => [1.0 - t, 1.0],
            _ => [0.0, 1.0 - t],
        }
    }

    /// Draws the next point set.
    pub fn draw(&mut self) -> CollocationSet {
        let n = self.num_interior();
        let nb = self.num_boundary();
        let interior: Vec<Point> = (0..n)
            .map(|_| [self.rng.random::<f64>(), self.rng.random::<f64>()])
            .collect();
        let boundary: Vec<Point> = (0..nb).map(|_| Self::boundary_point(&mut self.rng)).collect();
        CollocationSet {
            loads: interior.iter().map(|&p| (self.f)(p)).collect(),
            weights: vec![1.0 / n as f64; n],
            interior,
            boundary,
            boundary_weights: vec![self.c_pen / nb as f64; nb],
        }
    }

    pub fn loss_grad(&mut self, net: &ResNet) -> Result<(f64, ParamGradient)> {
        let set = self.draw();
        net.collocation_loss_grad(&set)
    }
}

/// Quadrature collocation on a fixed mesh: the triangle rule of the chosen
/// degree on every element plus the penalty `sum_e alpha/h_e int_e u^2`
/// with the Gauss rule of the same degree on boundary edges.
#[derive(Debug, Clone)]
pub struct QuadLoss {
    set: CollocationSet,
}

impl QuadLoss {
    pub fn new(mesh: &Mesh, degree: usize, problem: &ManufacturedProblem, alpha: f64) -> Result<Self> {
        let rule = triangle_rule(degree)?;
        let erule = edge_rule(degree)?;
        let mut set = CollocationSet::default();
        for t in 0..mesh.num_triangles() {
            let geom = mesh.element_geometry(t)?;
            for (&xh, &w) in rule.points.iter().zip(&rule.weights) {
                let x = geom.map(xh);
                set.interior.push(x);
                set.weights.push(w * geom.area);
                set.loads.push((problem.f)(x));
            }
        }
        for e in mesh.boundary_edges() {
            for (&s, &w) in erule.points.iter().zip(&erule.weights) {
                // alpha / h_e times the edge measure h_e.
                set.boundary.push(edge_point(mesh, e, s));
                set.boundary_weights.push(alpha * w);
            }
        }
        Ok(Self { set })
    }

    pub fn points(&self) -> &CollocationSet {
        &self.set
    }

    pub fn loss(&self, net: &ResNet) -> Result<f64> {
        net.collocation_loss(&self.set)
    }

    pub fn loss_grad(&self, net: &ResNet) -> Result<(f64, ParamGradient)> {
        net.collocation_loss_grad(&self.set)
    }
}

/// Finite element training: the network enters only through its values at
/// the Lagrange nodes, `E(u(z))`, and the parameter gradient is the
/// vector-Jacobian product of the nodal gradient.
#[derive(Debug, Clone)]
pub struct FemLoss {
    space: FeSpace,
    energy: FemEnergy,
}

impl FemLoss {
    pub fn new(mesh: &Mesh, degree: usize, problem: &ManufacturedProblem, alpha: f64) -> Result<Self> {
        let space = FeSpace::new(mesh, degree)?;
        let energy = FemEnergy::assemble(&space, problem.f, Some(alpha), problem.g0)?;
        Ok(Self { space, energy })
    }

    pub fn space(&self) -> &FeSpace {
        &self.space
    }

    pub fn energy(&self) -> &FemEnergy {
        &self.energy
    }

    pub fn nodal_values(&self, net: &ResNet) -> Vec<f64> {
        net.forward_batch(self.space.dof_coords())
    }

    pub fn loss(&self, net: &ResNet) -> Result<f64> {
        self.energy.value(&self.nodal_values(net))
    }

    /// Returns the loss, its parameter gradient and the nodal values used.
    pub fn loss_grad_nodal(&self, net: &ResNet) -> Result<(f64, ParamGradient, Vec<f64>)> {
        let g = self.nodal_values(net);
        let (e, de) = self.energy.evaluate(&g)?;
        let grad = net.param_vjp(self.space.dof_coords(), &de)?;
        Ok((e, grad, g))
    }

    pub fn loss_grad(&self, net: &ResNet) -> Result<(f64, ParamGradient)> {
        let (e, g, _) = self.loss_grad_nodal(net)?;
        Ok((e, g))
    }
}
