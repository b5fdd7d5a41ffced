//! Quadrature on triangles (barycentric points, weights normalised to sum
//! to one) and Gauss-Legendre rules on `[0, 1]`.

use crate::error::{Error, Result};
use crate::mesh::Point;

#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureRule {
    /// Barycentric coordinates of the nodes.
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

/// Highest degree available from [`quadrature_rule`].
pub const MAX_DEGREE: usize = 30;

/// A rule exact for polynomials of total degree `degree` on triangles.
///
/// Degrees 1, 2, 4 and 5 use the classical centroid, edge-midpoint and
/// Dunavant rules; degree 3 reuses the 6-point degree-4 rule (all weights
/// positive). Higher degrees use a collapsed Gauss-Legendre product rule.
pub fn quadrature_rule(degree: usize) -> Result<QuadratureRule> {
    let rule = match degree {
        1 => QuadratureRule {
            points: vec![[1.0 / 3.0; 3]],
            weights: vec![1.0],
            degree,
        },
        2 => QuadratureRule {
            points: vec![[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]],
            weights: vec![1.0 / 3.0; 3],
            degree,
        },
        3 | 4 => {
            let (a, wa) = (0.445_948_490_915_965, 0.223_381_589_678_011);
            let (b, wb) = (0.091_576_213_509_771, 0.109_951_743_655_322);
            let mut points = Vec::new();
            let mut weights = Vec::new();
            for (x, w) in [(a, wa), (b, wb)] {
                let y = 1.0 - 2.0 * x;
                points.extend([[y, x, x], [x, y, x], [x, x, y]]);
                weights.extend([w; 3]);
            }
            QuadratureRule {
                points,
                weights,
                degree,
            }
        }
        5 => {
            let (a, wa) = (0.470_142_064_105_115, 0.132_394_152_788_506);
            let (b, wb) = (0.101_286_507_323_456, 0.125_939_180_544_827);
            let mut points = vec![[1.0 / 3.0; 3]];
            let mut weights = vec![0.225];
            for (x, w) in [(a, wa), (b, wb)] {
                let y = 1.0 - 2.0 * x;
                points.extend([[y, x, x], [x, y, x], [x, x, y]]);
                weights.extend([w; 3]);
            }
            QuadratureRule {
                points,
                weights,
                degree,
            }
        }
        d if (6..=MAX_DEGREE).contains(&d) => collapsed_rule(d),
        d => return Err(Error::UnsupportedDegree(d)),
    };
    Ok(rule)
}

/// Duffy-collapsed tensor Gauss rule; exact for degree `degree`.
fn collapsed_rule(degree: usize) -> QuadratureRule {
    // The Jacobian of the collapse adds one degree in the collapsed variable.
    let n = (degree + 3) / 2;
    let (x, w) = gauss_legendre(n);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let u = x[i];
            let v = x[j];
            let l1 = u;
            let l2 = (1.0 - u) * v;
            points.push([1.0 - l1 - l2, l1, l2]);
            // Reference triangle area is 1/2; weights normalised to sum to 1.
            weights.push(2.0 * w[i] * w[j] * (1.0 - u));
        }
    }
    QuadratureRule {
        points,
        weights,
        degree,
    }
}

/// `n`-point Gauss-Legendre nodes and weights on `[0, 1]` (weights sum to 1).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let p = if n == 0 { p0 } else { p1 };
    let d = n as f64 * (x * p - p0) / (x * x - 1.0);
    (p, d)
}

/// Gauss-Legendre rule on `[0, 1]` exact for polynomials of degree `degree`.
pub fn line_rule(degree: usize) -> (Vec<f64>, Vec<f64>) {
    gauss_legendre(degree / 2 + 1)
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Physical nodes on the triangle with vertices `p`.
    pub fn map_points(&self, p: &[Point; 3]) -> impl Iterator<Item = (Point, f64)> + '_ {
        let p = *p;
        self.points.iter().zip(&self.weights).map(move |(b, &w)| {
            (
                [
                    b[0] * p[0][0] + b[1] * p[1][0] + b[2] * p[2][0],
                    b[0] * p[0][1] + b[1] * p[1][1] + b[2] * p[2][1],
                ],
                w,
            )
        })
    }

    /// `∫_T f` over the triangle with vertices `p`.
    pub fn integrate<F: FnMut(Point) -> f64>(&self, p: &[Point; 3], mut f: F) -> f64 {
        let area = crate::mesh::signed_area(p[0], p[1], p[2]).abs();
        let mut acc = 0.0;
        for (x, w) in self.map_points(p) {
            acc += w * f(x);
        }
        area * acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const REF: [Point; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    /// ∫ x^a y^b over the reference triangle.
    fn monomial(a: u32, b: u32) -> f64 {
        factorial(a) * factorial(b) / factorial(a + b + 2)
    }

    #[test]
    fn centroid_rule() {
        let r = quadrature_rule(1).unwrap();
        assert_eq!(r.points, vec![[1.0 / 3.0; 3]]);
        assert_eq!(r.weights, vec![1.0]);
    }

    #[test]
    fn degree_two_integrates_x_squared() {
        let r = quadrature_rule(2).unwrap();
        assert_relative_eq!(r.integrate(&REF, |p| p[0] * p[0]), 1.0 / 12.0, epsilon = 1e-15);
    }

    #[test]
    fn degree_five_integrates_x2y3() {
        let r = quadrature_rule(5).unwrap();
        let exact = monomial(2, 3);
        assert_relative_eq!(exact, 1.0 / 420.0, epsilon = 1e-18);
        assert_relative_eq!(
            r.integrate(&REF, |p| p[0].powi(2) * p[1].powi(3)),
            exact,
            max_relative = 1e-12
        );
    }

    #[test]
    fn every_rule_is_exact_to_its_degree() {
        for d in 1..=MAX_DEGREE {
            let r = quadrature_rule(d).unwrap();
            assert_relative_eq!(r.weights.iter().sum::<f64>(), 1.0, epsilon = 1e-13);
            assert!(r.weights.iter().all(|&w| w > 0.0));
            for a in 0..=d as u32 {
                for b in 0..=(d as u32 - a) {
                    let got = r.integrate(&REF, |p| p[0].powi(a as i32) * p[1].powi(b as i32));
                    assert_relative_eq!(got, monomial(a, b), max_relative = 1e-11);
                }
            }
        }
    }

    #[test]
    fn unsupported_degrees() {
        assert!(matches!(quadrature_rule(0), Err(Error::UnsupportedDegree(0))));
        assert!(quadrature_rule(MAX_DEGREE + 1).is_err());
    }

    #[test]
    fn gauss_legendre_exactness() {
        for n in 1..12 {
            let (x, w) = gauss_legendre(n);
            for k in 0..(2 * n) as i32 {
                let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(k)).sum();
                assert_relative_eq!(got, 1.0 / (k as f64 + 1.0), max_relative = 1e-13);
            }
        }
    }
}
