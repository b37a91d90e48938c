//! Variable-coefficient self-adjoint operators `-div(a grad u) + c u`.
//!
//! The bilinear form is approximated element by element with a triangle
//! rule, giving `B_h`; the generalised finite element energy is then
//! `1/2 g^T B_h g - int I(f g)` plus the optional boundary penalty, exactly as
//! for the Laplacian.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::fem::{
    assemble_load_lumped, assemble_mass, assemble_stiffness, assemble_volume, FeSpace, FemEnergy,
    NitscheTerms, SparseMatrix,
};
use crate::quadrature::triangle_rule;
use crate::{Error, Point, Result};

type MatrixField = Box<dyn Fn(Point) -> [[f64; 2]; 2] + Send + Sync>;
type ScalarField = Box<dyn Fn(Point) -> f64 + Send + Sync>;

/// Coefficients `a(x)` (symmetric, uniformly elliptic with constant `theta`)
/// and `c(x) >= c_min`.
pub struct EllipticCoefficients {
    a: MatrixField,
    c: ScalarField,
    pub theta: f64,
    pub c_min: f64,
}

impl std::fmt::Debug for EllipticCoefficients {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EllipticCoefficients")
            .field("theta", &self.theta)
            .field("c_min", &self.c_min)
            .finish_non_exhaustive()
    }
}

impl EllipticCoefficients {
    pub fn new<A, C>(a: A, c: C, theta: f64, c_min: f64) -> Result<Self>
    where
        A: Fn(Point) -> [[f64; 2]; 2] + Send + Sync + 'static,
        C: Fn(Point) -> f64 + Send + Sync + 'static,
    {
        if !(theta > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "ellipticity constant must be positive, got {theta}"
            )));
        }
        if !(c_min >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "c_min must be nonnegative, got {c_min}"
            )));
        }
        Ok(Self {
            a: Box::new(a),
            c: Box::new(c),
            theta,
            c_min,
        })
    }

    /// `a(x) = s(x) I`.
    pub fn isotropic<S, C>(s: S, c: C, theta: f64, c_min: f64) -> Result<Self>
    where
        S: Fn(Point) -> f64 + Send + Sync + 'static,
        C: Fn(Point) -> f64 + Send + Sync + 'static,
    {
        Self::new(
            move |x| {
                let v = s(x);
                [[v, 0.0], [0.0, v]]
            },
            c,
            theta,
            c_min,
        )
    }

    /// The Laplacian: `a = I`, `c = 0`.
    pub fn laplacian() -> Self {
        Self::isotropic(|_| 1.0, |_| 0.0, 1.0, 0.0).expect("valid constants")
    }

    pub fn a(&self, x: Point) -> [[f64; 2]; 2] {
        (self.a)(x)
    }

    pub fn c(&self, x: Point) -> f64 {
        (self.c)(x)
    }

    /// Samples `trials` points of the unit square and directions and checks
    /// symmetry, `xi^T a xi >= theta |xi|^2` and `c >= c_min`.
    pub fn spot_check(&self, trials: usize, seed: u64) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..trials {
            let x = [rng.random::<f64>(), rng.random::<f64>()];
            let xi = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let a = self.a(x);
            let scale = a[0][0].abs().max(a[1][1].abs()).max(1.0);
            if (a[0][1] - a[1][0]).abs() > 1e-12 * scale {
                return Err(Error::InvalidArgument(format!("a({x:?}) is not symmetric")));
            }
            let q = xi[0] * (a[0][0] * xi[0] + a[0][1] * xi[1]) + xi[1] * (a[1][0] * xi[0] + a[1][1] * xi[1]);
            let n2 = xi[0] * xi[0] + xi[1] * xi[1];
            if q < self.theta * n2 * (1.0 - 1e-12) {
                return Err(Error::InvalidArgument(format!(
                    "ellipticity violated at {x:?}: {q} < {} |xi|^2",
                    self.theta
                )));
            }
            if self.c(x) < self.c_min {
                return Err(Error::InvalidArgument(format!(
                    "c({x:?}) = {} below c_min = {}",
                    self.c(x),
                    self.c_min
                )));
            }
        }
        Ok(())
    }
}

/// `B_h[z,w] = sum_K |K| sum_i w_i (grad Phi_z^T a grad Phi_w + c Phi_z Phi_w)(x_i)`.
pub fn assemble_b_h(space: &FeSpace, coeffs: &EllipticCoefficients, quad_degree: usize) -> Result<SparseMatrix> {
    let needed = 2 * (space.degree() - 1);
    if quad_degree < needed {
        return Err(Error::InvalidArgument(format!(
            "quadrature degree {quad_degree} below {needed} for P{} gradients",
            space.degree()
        )));
    }
    let rule = triangle_rule(quad_degree)?;
    Ok(assemble_volume(space, &rule, |x, w, phi, g, ke| {
        let a = coeffs.a(x);
        let c = coeffs.c(x);
        for i in 0..phi.len() {
            let ag = [a[0][0] * g[i][0] + a[0][1] * g[i][1], a[1][0] * g[i][0] + a[1][1] * g[i][1]];
            for j in 0..phi.len() {
                ke[i][j] += w * (ag[0] * g[j][0] + ag[1] * g[j][1] + c * phi[i] * phi[j]);
            }
        }
    }))
}

/// H1 Gram matrix `K + M` (exact stiffness plus exact mass).
pub fn h1_gram(space: &FeSpace) -> Result<SparseMatrix> {
    assemble_stiffness(space).add_scaled(&assemble_mass(space), 1.0)
}

/// Smallest Rayleigh ratio `v^T B_h v / v^T G v` over `trials` random
/// vectors; an empirical lower bound for the coercivity constant.
pub fn coercivity_probe(b_h: &SparseMatrix, gram: &SparseMatrix, trials: usize, seed: u64) -> Result<f64> {
    if b_h.dim() != gram.dim() {
        return Err(Error::DimensionMismatch {
            expected: gram.dim(),
            found: b_h.dim(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    for _ in 0..trials {
        let v: Vec<f64> = (0..gram.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
        worst = worst.min(b_h.quad_form(&v)? / gram.quad_form(&v)?);
    }
    Ok(worst)
}

/// Generalised finite element energy `1/2 g^T B_h g - sum f(z) g_z L_z`
/// (+ penalty).
pub fn general_energy<F>(space: &FeSpace, b_h: SparseMatrix, f: F, nitsche: Option<NitscheTerms>) -> Result<FemEnergy>
where
    F: Fn(Point) -> f64,
{
    FemEnergy::from_operators(space, b_h, assemble_load_lumped(space), nitsche, f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::assemble_nitsche;
    use crate::mesh::Mesh;
    use std::f64::consts::PI;

    fn space(m: usize, q: usize) -> FeSpace {
        FeSpace::new(&Mesh::uniform_unit_square(m).unwrap(), q).unwrap()
    }

    fn ue(p: Point) -> f64 {
        (2.0 * PI * p[0]).sin() * (2.0 * PI * p[1]).sin()
    }

    fn max_diff(a: &SparseMatrix, b: &SparseMatrix) -> f64 {
        let d = a.add_scaled(b, -1.0).unwrap();
        (0..d.dim()).flat_map(|i| d.row(i).map(|(_, v)| v.abs()).collect::<Vec<_>>()).fold(0.0, f64::max)
    }

    #[test]
    fn laplacian_reduces_to_stiffness() {
        let lap = EllipticCoefficients::laplacian();
        for (q, degrees) in [(1, 1..=5), (2, 2..=5)] {
            let s = space(5, q);
            let k = assemble_stiffness(&s);
            for d in degrees {
                let b = assemble_b_h(&s, &lap, d).unwrap();
                assert!(b.asymmetry() <= 1e-12);
                assert!(max_diff(&b, &k) < 1e-12, "q={q} d={d}");
            }
        }
        assert!(assemble_b_h(&space(3, 2), &lap, 1).is_err());
    }

    #[test]
    fn reaction_term_adds_mass() {
        let s = space(6, 1);
        let coeffs = EllipticCoefficients::isotropic(|_| 1.0, |_| 1.0, 1.0, 1.0).unwrap();
        let b = assemble_b_h(&s, &coeffs, 2).unwrap();
        let g = h1_gram(&s).unwrap();
        assert!(max_diff(&b, &g) < 1e-12);
        let k = assemble_stiffness(&s);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let v: Vec<f64> = (0..s.num_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect();
            assert!(b.quad_form(&v).unwrap() >= k.quad_form(&v).unwrap());
        }
    }

    #[test]
    fn coercivity_probes() {
        let s = space(6, 1);
        let gram = h1_gram(&s).unwrap();
        let unit = EllipticCoefficients::isotropic(|_| 1.0, |_| 1.0, 1.0, 1.0).unwrap();
        let p = coercivity_probe(&assemble_b_h(&s, &unit, 2).unwrap(), &gram, 50, 1).unwrap();
        assert!((p - 1.0).abs() < 1e-10);
        let two = EllipticCoefficients::isotropic(|_| 2.0, |_| 2.0, 2.0, 2.0).unwrap();
        let p = coercivity_probe(&assemble_b_h(&s, &two, 2).unwrap(), &gram, 50, 1).unwrap();
        assert!((p - 2.0).abs() < 1e-10);
        let var = EllipticCoefficients::isotropic(|x| 1.0 + x[0], |_| 1.0, 1.0, 1.0).unwrap();
        let p = coercivity_probe(&assemble_b_h(&s, &var, 2).unwrap(), &gram, 200, 1).unwrap();
        assert!(p >= 1.0 - 1e-9, "{p}");
    }

    #[test]
    fn spot_check_detects_violations() {
        let var = EllipticCoefficients::isotropic(|x| 1.0 + x[0], |_| 1.0, 1.0, 1.0).unwrap();
        var.spot_check(500, 9).unwrap();
        let bad = EllipticCoefficients::isotropic(|x| 0.5 + x[0], |_| 1.0, 1.0, 1.0).unwrap();
        assert!(bad.spot_check(500, 9).is_err());
        let asym = EllipticCoefficients::new(|_| [[2.0, 0.1], [0.0, 2.0]], |_| 0.0, 1.0, 0.0).unwrap();
        assert!(asym.spot_check(10, 9).is_err());
        let low_c = EllipticCoefficients::isotropic(|_| 1.0, |x| x[0], 1.0, 0.5).unwrap();
        assert!(low_c.spot_check(500, 9).is_err());
        assert!(EllipticCoefficients::isotropic(|_| 1.0, |_| 0.0, 0.0, 0.0).is_err());
    }

    fn consistency_gaps(coeffs: &EllipticCoefficients, q: usize, low: usize, ms: &[usize]) -> Vec<f64> {
        let w = |p: Point| p[0] * (1.0 - p[0]) * (3.0 * p[1]).cos();
        ms.iter()
            .map(|&m| {
                let s = space(m, q);
                let v = s.interpolate(ue);
                let wv = s.interpolate(w);
                let bl = assemble_b_h(&s, coeffs, low).unwrap();
                let b5 = assemble_b_h(&s, coeffs, 5).unwrap();
                let gram = h1_gram(&s).unwrap();
                let d = b5.bilinear(&v.0, &wv.0).unwrap() - bl.bilinear(&v.0, &wv.0).unwrap();
                d.abs() / gram.quad_form(&wv.0).unwrap().sqrt()
            })
            .collect()
    }

    #[test]
    fn quadrature_consistency_linear_coefficient() {
        // For P1 the degree-2 rule already integrates (1 + x) grad.grad and
        // phi phi exactly, so the gap sits far below h^2.
        let coeffs = EllipticCoefficients::isotropic(|x| 1.0 + x[0], |_| 1.0, 1.0, 1.0).unwrap();
        let gaps = consistency_gaps(&coeffs, 1, 2, &[40]);
        assert!(gaps[0] <= 1.0 / 1600.0, "{gaps:?}");
    }

    #[test]
    fn quadrature_consistency_improves_with_refinement() {
        let coeffs = EllipticCoefficients::isotropic(
            |x| 2.0 + (3.0 * x[0]).sin() * (2.0 * x[1]).cos(),
            |x| (x[0] * x[1]).exp(),
            1.0,
            1.0,
        )
        .unwrap();
        for q in [1, 2] {
            let gaps = consistency_gaps(&coeffs, q, 2, &[10, 20, 40]);
            assert!(gaps[1] < gaps[0] && gaps[2] < gaps[1], "q={q} {gaps:?}");
        }
    }

    #[test]
    fn general_energy_matches_fem_energy_for_laplacian() {
        let s = space(5, 2);
        let f = |p: Point| 8.0 * PI * PI * ue(p);
        let nt = assemble_nitsche(&s, 40.0, |_| 0.0).unwrap();
        let b = assemble_b_h(&s, &EllipticCoefficients::laplacian(), 2).unwrap();
        let general = general_energy(&s, b, f, Some(nt)).unwrap();
        let plain = FemEnergy::assemble(&s, f, Some(40.0), |_| 0.0).unwrap();
        let g = s.interpolate(|p| p[0] * p[1] + 0.3);
        let (e1, g1) = general.evaluate(&g.0).unwrap();
        let (e2, g2) = plain.evaluate(&g.0).unwrap();
        assert!((e1 - e2).abs() < 1e-12);
        for (a, b) in g1.iter().zip(&g2) {
            assert!((a - b).abs() < 1e-12);
        }
        let zero = vec![0.0; s.num_dofs()];
        assert_eq!(general.value(&zero).unwrap(), 0.0);
    }

    #[test]
    fn general_energy_gradient_matches_finite_differences() {
        let s = space(6, 1);
        let coeffs = EllipticCoefficients::isotropic(|x| 1.0 + x[0], |x| 1.0 + x[1] * x[1], 1.0, 1.0).unwrap();
        let b = assemble_b_h(&s, &coeffs, 3).unwrap();
        let e = general_energy(&s, b, |p| p[0] - p[1], None).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g: Vec<f64> = (0..s.num_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let (_, grad) = e.evaluate(&g).unwrap();
        for _ in 0..5 {
            let d: Vec<f64> = (0..s.num_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let h = 1e-5;
            let p: Vec<f64> = g.iter().zip(&d).map(|(a, b)| a + h * b).collect();
            let m: Vec<f64> = g.iter().zip(&d).map(|(a, b)| a - h * b).collect();
            let fd = (e.value(&p).unwrap() - e.value(&m).unwrap()) / (2.0 * h);
            let an: f64 = grad.iter().zip(&d).map(|(a, b)| a * b).sum();
            assert!((fd - an).abs() <= 1e-8 * an.abs().max(1.0));
        }
    }
}
