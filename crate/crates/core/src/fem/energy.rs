use super::assembly::{assemble_load_lumped, assemble_nitsche, assemble_stiffness, NitscheTerms};
use super::space::{FeSpace, NodalVector};
use super::sparse::{conjugate_gradient, SparseMatrix};
use crate::quadrature::triangle_rule;
use crate::{Error, Point, Result};

/// CG tolerance for the Galerkin oracle, relative to the right-hand side.
pub const GALERKIN_TOL: f64 = 1e-10;

/// The finite element energy of a nodal vector `g`:
///
/// `E(g) = 1/2 g^T A g - sum_z f(z) g_z L_z + (g^T P g - 2 g^T r + s)`
///
/// with `A` the stiffness (or any symmetric bilinear form), `L` the lumped
/// load and `(P, r, s)` the optional weak boundary terms. The load is the
/// integral of the interpolant of the product `f g`, not a quadrature of
/// `f I(g)`.
#[derive(Debug, Clone)]
pub struct FemEnergy {
    operator: SparseMatrix,
    load: NodalVector,
    f_load: Vec<f64>,
    nitsche: Option<NitscheTerms>,
}

#[derive(Debug, Clone)]
pub struct GalerkinSolution {
    pub values: NodalVector,
    pub energy: f64,
    pub iterations: usize,
    pub relative_residual: f64,
}

impl FemEnergy {
    /// Assembles stiffness, lumped load and (when `alpha` is given) the
    /// boundary penalty for data `g0`.
    pub fn assemble<F, G>(space: &FeSpace, f: F, alpha: Option<f64>, g0: G) -> Result<Self>
    where
        F: Fn(Point) -> f64,
        G: Fn(Point) -> f64,
    {
        let stiffness = assemble_stiffness(space);
        let load = assemble_load_lumped(space);
        let nitsche = alpha.map(|a| assemble_nitsche(space, a, g0)).transpose()?;
        Self::from_operators(space, stiffness, load, nitsche, f)
    }

    /// Builds the energy from pre-assembled operators.
    pub fn from_operators<F>(
        space: &FeSpace,
        operator: SparseMatrix,
        load: NodalVector,
        nitsche: Option<NitscheTerms>,
        f: F,
    ) -> Result<Self>
    where
        F: Fn(Point) -> f64,
    {
        let n = space.num_dofs();
        let mismatch = |found| Error::DimensionMismatch { expected: n, found };
        if operator.dim() != n {
            return Err(mismatch(operator.dim()));
        }
        space.check_len(&load.0)?;
        if let Some(nt) = &nitsche {
            if nt.matrix.dim() != n {
                return Err(mismatch(nt.matrix.dim()));
            }
        }
        let f_load = space
            .dof_coords()
            .iter()
            .zip(&load.0)
            .map(|(&x, &l)| f(x) * l)
            .collect();
        Ok(Self {
            operator,
            load,
            f_load,
            nitsche,
        })
    }

    pub fn operator(&self) -> &SparseMatrix {
        &self.operator
    }

    pub fn load(&self) -> &NodalVector {
        &self.load
    }

    /// `(f(z) L_z)_z`.
    pub fn f_load(&self) -> &[f64] {
        &self.f_load
    }

    pub fn nitsche(&self) -> Option<&NitscheTerms> {
        self.nitsche.as_ref()
    }

    pub fn num_dofs(&self) -> usize {
        self.operator.dim()
    }

    fn check(&self, g: &[f64]) -> Result<()> {
        if g.len() != self.num_dofs() {
            return Err(Error::DimensionMismatch {
                expected: self.num_dofs(),
                found: g.len(),
            });
        }
        Ok(())
    }

    /// Energy and its gradient `A g - f L + 2 (P g - r)`.
    pub fn evaluate(&self, g: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check(g)?;
        let mut grad = vec![0.0; g.len()];
        self.operator.mul_vec_into(g, &mut grad);
        let mut energy = 0.0;
        for i in 0..g.len() {
            energy += g[i] * (0.5 * grad[i] - self.f_load[i]);
            grad[i] -= self.f_load[i];
        }
        if let Some(nt) = &self.nitsche {
            let mut pg = vec![0.0; g.len()];
            nt.matrix.mul_vec_into(g, &mut pg);
            let mut pen = nt.constant;
            for i in 0..g.len() {
                pen += g[i] * (pg[i] - 2.0 * nt.rhs.0[i]);
                grad[i] += 2.0 * (pg[i] - nt.rhs.0[i]);
            }
            energy += pen;
        }
        Ok((energy, grad))
    }

    pub fn value(&self, g: &[f64]) -> Result<f64> {
        Ok(self.evaluate(g)?.0)
    }

    /// Normal equations of the quadratic: `(A + 2P) g = f L + 2 r`.
    pub fn system(&self) -> Result<(SparseMatrix, Vec<f64>)> {
        match &self.nitsche {
            Some(nt) => {
                let a = self.operator.add_scaled(&nt.matrix, 2.0)?;
                let b = self
                    .f_load
                    .iter()
                    .zip(&nt.rhs.0)
                    .map(|(f, r)| f + 2.0 * r)
                    .collect();
                Ok((a, b))
            }
            None => Ok((self.operator.clone(), self.f_load.clone())),
        }
    }

    /// Exact minimiser over all nodal vectors, by CG to relative residual
    /// [`GALERKIN_TOL`] within `10 * n` iterations.
    pub fn minimize(&self) -> Result<GalerkinSolution> {
        let (a, b) = self.system()?;
        let out = conjugate_gradient(&a, &b, GALERKIN_TOL, 10 * self.num_dofs().max(1))?;
        let energy = self.value(&out.solution)?;
        Ok(GalerkinSolution {
            values: NodalVector(out.solution),
            energy,
            iterations: out.iterations,
            relative_residual: out.relative_residual,
        })
    }
}

/// Galerkin solution of `-Lap u = f` with the weak boundary penalty.
pub fn galerkin_solve<F, G>(space: &FeSpace, f: F, alpha: f64, g0: G) -> Result<GalerkinSolution>
where
    F: Fn(Point) -> f64,
    G: Fn(Point) -> f64,
{
    FemEnergy::assemble(space, f, Some(alpha), g0)?.minimize()
}

/// `(||v - u||_L2, |v - u|_H1)` for a finite element function `v`, using the
/// triangle rule of the given degree on every element.
pub fn error_norms<U, DU>(space: &FeSpace, v: &[f64], u: U, grad_u: DU, degree: usize) -> Result<(f64, f64)>
where
    U: Fn(Point) -> f64,
    DU: Fn(Point) -> Point,
{
    space.check_len(v)?;
    let rule = triangle_rule(degree)?;
    let mesh = space.mesh();
    let mut l2 = 0.0;
    let mut h1 = 0.0;
    for t in 0..mesh.num_triangles() {
        let geom = mesh.element_geometry(t)?;
        let mut el2 = 0.0;
        let mut eh1 = 0.0;
        for (&xh, &w) in rule.points.iter().zip(&rule.weights) {
            let x = geom.map(xh);
            let (val, g) = space.evaluate_local(v, t, &geom, xh);
            let du = grad_u(x);
            let d = val - u(x);
            el2 += w * d * d;
            eh1 += w * ((g[0] - du[0]).powi(2) + (g[1] - du[1]).powi(2));
        }
        l2 += geom.area * el2;
        h1 += geom.area * eh1;
    }
    Ok((l2.sqrt(), h1.sqrt()))
}

/// Largest ratio `sum_z L_z v_z^2 / ||v||_L2^2` on one element, for the
/// lumped weights `L_z = int Phi_z`. Affine invariant, so one number per
/// degree; the P2 value is the top generalised eigenvalue of
/// `(diag(0,0,0,1,1,1)/3, M_ref / |K|)`.
pub fn lumped_mass_ratio(degree: usize) -> Result<f64> {
    match degree {
        1 => Ok(4.0),
        2 => Ok(35.0 / 8.0),
        q => Err(Error::InvalidArgument(format!("no lumped ratio for degree {q}"))),
    }
}

/// Constants of the H1 stability estimate for the penalised energy with
/// zero boundary data.
///
/// With `A = |v|_1^2`, `B = ||v||^2_{L2(boundary)}` and a Friedrichs constant
/// `C_F` (`||v||^2 <= C_F (A + B)`), the energy satisfies
/// `E >= kappa / (1 + C_F) ||v||_1^2 - ||f||_inf c_L ||v||_1` where
/// `kappa = min(1/2, alpha / h_max)` and `c_L = sqrt(|Omega| * ratio)` bounds
/// the lumped load. Solving the quadratic inequality for `||v||_1` gives
/// [`StabilityConstants::h1_bound`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityConstants {
    pub f_sup: f64,
    pub friedrichs: f64,
    pub boundary_weight: f64,
    pub lumped_ratio: f64,
    pub domain_area: f64,
}

impl StabilityConstants {
    /// `friedrichs = 1`, which dominates the unit-square constant.
    pub fn for_space(space: &FeSpace, alpha: f64, f_sup: f64) -> Result<Self> {
        let mesh = space.mesh();
        let h_max = mesh
            .boundary_edges()
            .iter()
            .map(|e| mesh.edge_length(e))
            .fold(0.0, f64::max);
        Ok(Self {
            f_sup,
            friedrichs: 1.0,
            boundary_weight: alpha / h_max,
            lumped_ratio: lumped_mass_ratio(space.degree())?,
            domain_area: mesh.total_area(),
        })
    }

    /// Upper bound on `||I g||_H1` for any `g` with energy at most
    /// `loss_bound`.
    pub fn h1_bound(&self, loss_bound: f64) -> f64 {
        let kappa = self.boundary_weight.min(0.5);
        let a = kappa / (1.0 + self.friedrichs);
        let b = self.f_sup * (self.domain_area * self.lumped_ratio).sqrt();
        let disc = (b * b + 4.0 * a * loss_bound).max(0.0);
        (b + disc.sqrt()) / (2.0 * a)
    }
}

/// `sqrt(g^T (K + M) g)`.
pub fn h1_norm(stiffness: &SparseMatrix, mass: &SparseMatrix, g: &[f64]) -> Result<f64> {
    Ok((stiffness.quad_form(g)? + mass.quad_form(g)?).max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::assembly::assemble_mass;
    use crate::mesh::Mesh;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn ue(p: Point) -> f64 {
        (2.0 * PI * p[0]).sin() * (2.0 * PI * p[1]).sin()
    }

    fn f(p: Point) -> f64 {
        8.0 * PI * PI * ue(p)
    }

    fn space(m: usize, q: usize) -> FeSpace {
        FeSpace::new(&Mesh::uniform_unit_square(m).unwrap(), q).unwrap()
    }

    #[test]
    fn energy_at_zero() {
        let s = space(6, 1);
        let e = FemEnergy::assemble(&s, f, Some(40.0), |_| 0.0).unwrap();
        let (val, grad) = e.evaluate(&vec![0.0; s.num_dofs()]).unwrap();
        assert_eq!(val, 0.0);
        for (g, fl) in grad.iter().zip(e.f_load()) {
            assert_eq!(*g, -fl);
        }
        assert!(e.evaluate(&[0.0; 3]).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for q in [1, 2] {
            let s = space(5, q);
            let e = FemEnergy::assemble(&s, f, Some(40.0), |p| p[0] - p[1]).unwrap();
            let g: Vec<f64> = (0..s.num_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (_, grad) = e.evaluate(&g).unwrap();
            for _ in 0..5 {
                let d: Vec<f64> = (0..s.num_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect();
                let h = 1e-5;
                let plus: Vec<f64> = g.iter().zip(&d).map(|(a, b)| a + h * b).collect();
                let minus: Vec<f64> = g.iter().zip(&d).map(|(a, b)| a - h * b).collect();
                let fd = (e.value(&plus).unwrap() - e.value(&minus).unwrap()) / (2.0 * h);
                let an: f64 = grad.iter().zip(&d).map(|(a, b)| a * b).sum();
                assert!((fd - an).abs() <= 1e-8 * an.abs().max(1.0), "{fd} vs {an}");
            }
        }
    }

    #[test]
    fn galerkin_of_zero_data_is_zero() {
        let s = space(8, 2);
        let sol = galerkin_solve(&s, |_| 0.0, 40.0, |_| 0.0).unwrap();
        assert!(sol.values.0.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn galerkin_is_minimal() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = space(10, 1);
        let e = FemEnergy::assemble(&s, f, Some(40.0), |_| 0.0).unwrap();
        let sol = e.minimize().unwrap();
        for _ in 0..100 {
            let scale = rng.random_range(0.0..0.2);
            let g: Vec<f64> = sol
                .values
                .0
                .iter()
                .map(|v| v + scale * rng.random_range(-1.0..1.0))
                .collect();
            assert!(e.value(&g).unwrap() >= sol.energy - 1e-9 * sol.energy.abs());
        }
    }

    #[test]
    fn galerkin_error_decreases() {
        let grad = |p: Point| {
            let w = 2.0 * PI;
            [w * (w * p[0]).cos() * (w * p[1]).sin(), w * (w * p[0]).sin() * (w * p[1]).cos()]
        };
        let errs: Vec<f64> = [10, 20]
            .iter()
            .map(|&m| {
                let s = space(m, 1);
                let sol = galerkin_solve(&s, f, 40.0, |_| 0.0).unwrap();
                error_norms(&s, &sol.values.0, ue, grad, 5).unwrap().0
            })
            .collect();
        assert!(errs[1] < errs[0] / 3.0, "{errs:?}");
    }

    #[test]
    fn error_norms_vanish_on_reproduced_functions() {
        let s = space(4, 2);
        let u = |p: Point| p[0] * p[0] - p[0] * p[1];
        let du = |p: Point| [2.0 * p[0] - p[1], -p[0]];
        let v = s.interpolate(u);
        let (l2, h1) = error_norms(&s, &v.0, u, du, 5).unwrap();
        assert!(l2 < 1e-13 && h1 < 1e-12);
        let zero = vec![0.0; s.num_dofs()];
        let (l2, _) = error_norms(&s, &zero, ue, |_| [0.0, 0.0], 5).unwrap();
        assert!((l2 - 0.5).abs() < 2e-3);
    }

    #[test]
    fn lumped_ratio_bounds_random_vectors() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for q in [1, 2] {
            let s = space(3, q);
            let mass = assemble_mass(&s);
            let load = assemble_load_lumped(&s);
            let ratio = lumped_mass_ratio(q).unwrap();
            let mut best = 0.0f64;
            for _ in 0..2000 {
                let v: Vec<f64> = (0..s.num_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect();
                let lumped: f64 = v.iter().zip(&load.0).map(|(a, l)| a * a * l).sum();
                best = best.max(lumped / mass.quad_form(&v).unwrap());
            }
            assert!(best <= ratio + 1e-12, "q={q}: {best}");
        }
    }

    #[test]
    fn stability_bound_holds_for_galerkin_and_interpolant() {
        for q in [1, 2] {
            let s = space(12, q);
            let e = FemEnergy::assemble(&s, f, Some(40.0), |_| 0.0).unwrap();
            let k = assemble_stiffness(&s);
            let mass = assemble_mass(&s);
            let c = StabilityConstants::for_space(&s, 40.0, 8.0 * PI * PI).unwrap();
            for g in [e.minimize().unwrap().values, s.interpolate(ue)] {
                let energy = e.value(&g.0).unwrap();
                assert!(h1_norm(&k, &mass, &g.0).unwrap() <= c.h1_bound(energy));
            }
        }
    }
}
