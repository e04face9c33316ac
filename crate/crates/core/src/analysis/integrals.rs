//! Integrals of squared P1 functions over balls intersected with the domain.

use crate::geometry::Point;
use crate::mesh::Mesh;

/// Quadrature for `∫_{B_ρ(c) ∩ Ω} f_h²` with `f_h` piecewise linear.
///
/// Every triangle is split uniformly into `4^level` sub-triangles; those whose
/// centroid lies in the closed ball are kept, integrated exactly with the
/// edge-midpoint rule. Rules for nested radii are nested, so the integral is
/// monotone in the radius.
#[derive(Debug, Clone)]
pub struct BallRule {
    /// `(vertex indices, barycentric point, weight)` entries.
    nodes: Vec<([usize; 3], [f64; 3], f64)>,
    measure: f64,
}

pub const DEFAULT_BALL_LEVEL: u32 = 3;

impl BallRule {
    pub fn new(mesh: &Mesh, center: Point, radius: f64, level: u32) -> Self {
        let n = 1usize << level;
        let mut nodes = Vec::new();
        let mut measure = 0.0;
        let v = mesh.vertices();
        for (k, tri) in mesh.triangles().iter().enumerate() {
            let [a, b, c] = [v[tri[0]], v[tri[1]], v[tri[2]]];
            let reach = a.distance(b).max(b.distance(c)).max(c.distance(a));
            if a.distance(center) > radius + reach {
                continue;
            }
            let area = mesh.triangle_area(k).abs() / (n * n) as f64;
            // sub-triangles of the uniform split, in barycentric lattice units
            for i in 0..n {
                for j in 0..n - i {
                    let mut subs = vec![[(i, j), (i + 1, j), (i, j + 1)]];
                    if i + j + 1 < n {
                        subs.push([(i + 1, j), (i + 1, j + 1), (i, j + 1)]);
                    }
                    for s in subs {
                        let bary: Vec<[f64; 3]> = s
                            .iter()
                            .map(|&(p, q)| {
                                let (l1, l2) = (p as f64 / n as f64, q as f64 / n as f64);
                                [1.0 - l1 - l2, l1, l2]
                            })
                            .collect();
                        let centroid = avg(&[bary[0], bary[1], bary[2]]);
                        let pc = at(&[a, b, c], centroid);
                        if pc.distance(center) > radius {
                            continue;
                        }
                        measure += area;
                        for (e0, e1) in [(0, 1), (1, 2), (2, 0)] {
                            nodes.push((*tri, avg(&[bary[e0], bary[e1]]), area / 3.0));
                        }
                    }
                }
            }
        }
        Self { nodes, measure }
    }

    /// `|B_ρ ∩ Ω|` as resolved by the rule.
    pub fn measure(&self) -> f64 {
        self.measure
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate_squared(&self, nodal: &[f64]) -> f64 {
        self.nodes
            .iter()
            .map(|(tri, bary, w)| {
                let f: f64 = (0..3).map(|i| bary[i] * nodal[tri[i]]).sum();
                w * f * f
            })
            .sum()
    }
}

fn avg(points: &[[f64; 3]]) -> [f64; 3] {
    let n = points.len() as f64;
    let mut out = [0.0; 3];
    for p in points {
        for i in 0..3 {
            out[i] += p[i] / n;
        }
    }
    out
}

fn at(corners: &[Point; 3], bary: [f64; 3]) -> Point {
    Point::new(
        bary[0] * corners[0].x + bary[1] * corners[1].x + bary[2] * corners[2].x,
        bary[0] * corners[0].y + bary[1] * corners[1].y + bary[2] * corners[2].y,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_domain, AprioriConstants, BoundaryProfile, SigmaArc};
    use crate::mesh::generate_mesh;

    #[test]
    fn ball_measure_and_monotonicity() {
        let d = build_domain(
            BoundaryProfile::flat(1.0, 0.0),
            1.0,
            1.0,
            SigmaArc {
                start: 0.25,
                end: 0.75,
            },
            AprioriConstants {
                r0: 0.25,
                lipschitz: 1.0,
                area_bound: 16.0,
            },
        )
        .unwrap();
        let m = generate_mesh(&d, 1.0 / 32.0).unwrap();
        let c = Point::new(0.5, 0.5);
        let ones = vec![1.0; m.num_vertices()];
        let mut last = 0.0;
        for k in 1..8 {
            let r = 0.05 * k as f64;
            let rule = BallRule::new(&m, c, r, DEFAULT_BALL_LEVEL);
            let area = std::f64::consts::PI * r * r;
            assert!((rule.measure() - area).abs() < 0.05 * area);
            let v = rule.integrate_squared(&ones);
            assert!((v - rule.measure()).abs() < 1e-12);
            assert!(v >= last);
            last = v;
        }
        // half ball on the flat bottom
        let half = BallRule::new(&m, Point::new(0.5, 0.0), 0.2, DEFAULT_BALL_LEVEL);
        let area = 0.5 * std::f64::consts::PI * 0.04;
        assert!((half.measure() - area).abs() < 0.05 * area);
    }
}
