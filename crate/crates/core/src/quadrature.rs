//! Symmetric triangle rules of exactness 1 to 5 and Gauss-Legendre edge rules.
//!
//! Triangle weights sum to one and are scaled by the element area, so that
//! `int_K f ~ |K| sum_i w_i f(F_K(xh_i))`.

#![allow(clippy::excessive_precision)]

use crate::mesh::{BoundaryEdge, Mesh};
use crate::{Error, Point, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TriangleRule {
    pub degree: usize,
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeRule {
    pub degree: usize,
    /// Nodes on `[0, 1]`.
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl TriangleRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

impl EdgeRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Orbit of a point with barycentric coordinates `(a, a, 1-2a)`.
fn orbit3(a: f64) -> [Point; 3] {
    let b = 1.0 - 2.0 * a;
    [[a, a], [b, a], [a, b]]
}

/// Symmetric rule integrating polynomials of total degree `degree` exactly.
///
/// | degree | points |
/// |--------|--------|
/// | 1      | 1 (centroid) |
/// | 2      | 3 |
/// | 3      | 4 (one negative weight) |
/// | 4      | 6 |
/// | 5      | 7 |
pub fn triangle_rule(degree: usize) -> Result<TriangleRule> {
    let (points, weights): (Vec<Point>, Vec<f64>) = match degree {
        1 => (vec![[1.0 / 3.0, 1.0 / 3.0]], vec![1.0]),
        2 => (orbit3(1.0 / 6.0).to_vec(), vec![1.0 / 3.0; 3]),
        3 => {
            let mut p = vec![[1.0 / 3.0, 1.0 / 3.0]];
            p.extend(orbit3(0.2));
            (p, vec![-27.0 / 48.0, 25.0 / 48.0, 25.0 / 48.0, 25.0 / 48.0])
        }
        4 => {
            const A: f64 = 0.445_948_490_915_964_886_318_329_253_883;
            const WA: f64 = 0.223_381_589_678_011_465_944_827_323_324;
            const B: f64 = 0.091_576_213_509_770_743_459_571_463_402_2;
            const WB: f64 = 0.109_951_743_655_321_867_388_505_909_970;
            let mut p = orbit3(A).to_vec();
            p.extend(orbit3(B));
            (p, vec![WA, WA, WA, WB, WB, WB])
        }
        5 => {
            // (6 -+ sqrt 15) / 21 and (155 -+ sqrt 15) / 1200.
            const A: f64 = 0.101_286_507_323_456_338_800_987_361_915;
            const WA: f64 = 0.125_939_180_544_827_152_595_683_945_500;
            const B: f64 = 0.470_142_064_105_115_089_770_441_209_513;
            const WB: f64 = 0.132_394_152_788_506_180_737_649_387_833;
            let mut p = vec![[1.0 / 3.0, 1.0 / 3.0]];
            p.extend(orbit3(A));
            p.extend(orbit3(B));
            (p, vec![9.0 / 40.0, WA, WA, WA, WB, WB, WB])
        }
        d => {
            return Err(Error::InvalidArgument(format!(
                "no triangle rule of degree {d} (supported: 1..=5)"
            )))
        }
    };
    Ok(TriangleRule {
        degree,
        points,
        weights,
    })
}

// Gauss-Legendre nodes and weights on [-1, 1], nonnegative half only.
const GL_TABLE: [&[(f64, f64)]; 5] = [
    &[(0.0, 2.0)],
    &[(0.577_350_269_189_625_764_509_148_780_502, 1.0)],
    &[
        (0.0, 0.888_888_888_888_888_888_888_888_888_889),
        (0.774_596_669_241_483_377_035_853_079_956, 0.555_555_555_555_555_555_555_555_555_556),
    ],
    &[
        (0.339_981_043_584_856_264_802_665_759_103, 0.652_145_154_862_546_142_626_936_050_778),
        (0.861_136_311_594_052_575_223_946_488_893, 0.347_854_845_137_453_857_373_063_949_222),
    ],
    &[
        (0.0, 0.568_888_888_888_888_888_888_888_888_889),
        (0.538_469_310_105_683_091_036_314_420_700, 0.478_628_670_499_366_468_041_291_514_836),
        (0.906_179_845_938_663_992_797_626_878_299, 0.236_926_885_056_189_087_514_264_040_720),
    ],
];

/// Gauss-Legendre rule on `[0, 1]` with `ceil((degree + 1) / 2)` nodes.
pub fn edge_rule(degree: usize) -> Result<EdgeRule> {
    let n = (degree + 1).div_ceil(2);
    if degree == 0 || n > GL_TABLE.len() {
        return Err(Error::InvalidArgument(format!(
            "no edge rule of degree {degree} (supported: 1..={})",
            2 * GL_TABLE.len() - 1
        )));
    }
    let half = GL_TABLE[n - 1];
    let mut nodes: Vec<(f64, f64)> = Vec::with_capacity(n);
    for &(x, w) in half.iter().rev() {
        if x > 0.0 {
            nodes.push((-x, w));
        }
    }
    for &(x, w) in half {
        nodes.push((x, w));
    }
    Ok(EdgeRule {
        degree: 2 * n - 1,
        points: nodes.iter().map(|&(x, _)| 0.5 * (x + 1.0)).collect(),
        weights: nodes.iter().map(|&(_, w)| 0.5 * w).collect(),
    })
}

/// `|K_t| sum_i w_i f(F_K(xh_i))`.
pub fn integrate_element<F>(mesh: &Mesh, t: usize, rule: &TriangleRule, f: F) -> Result<f64>
where
    F: Fn(Point) -> f64,
{
    let g = mesh.element_geometry(t)?;
    let s: f64 = rule
        .points
        .iter()
        .zip(&rule.weights)
        .map(|(&xh, &w)| w * f(g.map(xh)))
        .sum();
    Ok(g.area * s)
}

/// Affine parametrisation of a boundary edge.
pub fn edge_point(mesh: &Mesh, e: &BoundaryEdge, s: f64) -> Point {
    let a = mesh.vertices()[e.vertices[0]];
    let b = mesh.vertices()[e.vertices[1]];
    [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]
}

/// `h_e sum_i w_i f(gamma_e(s_i))`.
pub fn integrate_edge<F>(mesh: &Mesh, e: &BoundaryEdge, rule: &EdgeRule, f: F) -> f64
where
    F: Fn(Point) -> f64,
{
    let h = mesh.edge_length(e);
    let s: f64 = rule
        .points
        .iter()
        .zip(&rule.weights)
        .map(|(&s, &w)| w * f(edge_point(mesh, e, s)))
        .sum();
    h * s
}
