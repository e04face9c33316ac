//! P1 finite element assembly on a tagged triangulation.

use std::sync::Arc;

use crate::geometry::Point;
use crate::mesh::{BoundaryEdge, BoundaryPart, EdgeTag, Mesh};

use super::data::{FluxSpec, ImpedanceSpec};
use super::linalg::{CsrMatrix, Pattern};
use super::VerificationSource;

/// 3-point Gauss rule on `[0, 1]`.
const EDGE_RULE: [(f64, f64); 3] = [
    (0.112_701_665_379_258_3, 5.0 / 18.0),
    (0.5, 8.0 / 18.0),
    (0.887_298_334_620_741_7, 5.0 / 18.0),
];

/// Degree-4 six-point rule on the reference triangle: barycentric
/// coordinates and weights summing to one.
const TRIANGLE_RULE: [([f64; 3], f64); 6] = [
    (
        [
            0.445_948_490_915_965,
            0.445_948_490_915_965,
            0.108_103_018_168_070,
        ],
        0.223_381_589_678_011,
    ),
    (
        [
            0.445_948_490_915_965,
            0.108_103_018_168_070,
            0.445_948_490_915_965,
        ],
        0.223_381_589_678_011,
    ),
    (
        [
            0.108_103_018_168_070,
            0.445_948_490_915_965,
            0.445_948_490_915_965,
        ],
        0.223_381_589_678_011,
    ),
    (
        [
            0.091_576_213_509_771,
            0.091_576_213_509_771,
            0.816_847_572_980_459,
        ],
        0.109_951_743_655_322,
    ),
    (
        [
            0.091_576_213_509_771,
            0.816_847_572_980_459,
            0.091_576_213_509_771,
        ],
        0.109_951_743_655_322,
    ),
    (
        [
            0.816_847_572_980_459,
            0.091_576_213_509_771,
            0.091_576_213_509_771,
        ],
        0.109_951_743_655_322,
    ),
];

pub fn mesh_pattern(mesh: &Mesh) -> Arc<Pattern> {
    let pairs = mesh
        .triangles()
        .iter()
        .flat_map(|&[a, b, c]| [(a, b), (b, c), (c, a)]);
    Arc::new(Pattern::from_pairs(mesh.num_vertices(), pairs))
}

fn corners(mesh: &Mesh, t: &[usize; 3]) -> [Point; 3] {
    let v = mesh.vertices();
    [v[t[0]], v[t[1]], v[t[2]]]
}

pub fn mass_matrix(mesh: &Mesh, pattern: &Arc<Pattern>) -> CsrMatrix {
    let mut m = CsrMatrix::zeros(pattern.clone());
    for (k, tri) in mesh.triangles().iter().enumerate() {
        let area = mesh.triangle_area(k).abs();
        for i in 0..3 {
            for j in 0..3 {
                let w = if i == j { area / 6.0 } else { area / 12.0 };
                m.add(tri[i], tri[j], w);
            }
        }
    }
    m
}

pub fn stiffness_matrix(mesh: &Mesh, pattern: &Arc<Pattern>) -> CsrMatrix {
    let mut k = CsrMatrix::zeros(pattern.clone());
    for tri in mesh.triangles() {
        let [p0, p1, p2] = corners(mesh, tri);
        let det = (p1.x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (p1.y - p0.y);
        let area = 0.5 * det.abs();
        // gradients of the barycentric coordinates times det
        let grads = [
            (p1.y - p2.y, p2.x - p1.x),
            (p2.y - p0.y, p0.x - p2.x),
            (p0.y - p1.y, p1.x - p0.x),
        ];
        for i in 0..3 {
            for j in 0..3 {
                let g = grads[i].0 * grads[j].0 + grads[i].1 * grads[j].1;
                k.add(tri[i], tri[j], area * g / (det * det));
            }
        }
    }
    k
}

fn edge_points(mesh: &Mesh, e: &BoundaryEdge) -> (Point, Point) {
    let v = mesh.vertices();
    (v[e.vertices[0]], v[e.vertices[1]])
}

/// Outward unit normal of a counter-clockwise boundary edge.
pub fn outward_normal(mesh: &Mesh, e: &BoundaryEdge) -> Point {
    let (a, b) = edge_points(mesh, e);
    let len = a.distance(b);
    Point::new((b.y - a.y) / len, (a.x - b.x) / len)
}

/// `∫_e w φ_i φ_j` over the edges accepted by `filter`.
pub fn weighted_boundary_mass(
    mesh: &Mesh,
    pattern: &Arc<Pattern>,
    filter: impl Fn(EdgeTag) -> bool,
    weight: impl Fn(Point) -> f64,
) -> CsrMatrix {
    let mut m = CsrMatrix::zeros(pattern.clone());
    for e in mesh.boundary_edges().iter().filter(|e| filter(e.tag)) {
        let (a, b) = edge_points(mesh, e);
        let len = a.distance(b);
        let mut local = [[0.0; 2]; 2];
        for &(s, w) in &EDGE_RULE {
            let p = Point::new(a.x + s * (b.x - a.x), a.y + s * (b.y - a.y));
            let phi = [1.0 - s, s];
            let c = w * len * weight(p);
            for i in 0..2 {
                for j in 0..2 {
                    local[i][j] += c * phi[i] * phi[j];
                }
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                m.add(e.vertices[i], e.vertices[j], local[i][j]);
            }
        }
    }
    m
}

pub fn robin_matrix(
    mesh: &Mesh,
    pattern: &Arc<Pattern>,
    gamma: &ImpedanceSpec,
    t: f64,
) -> CsrMatrix {
    weighted_boundary_mass(
        mesh,
        pattern,
        |tag| tag == EdgeTag::Inaccessible,
        |p| gamma.eval(p, t),
    )
}

pub fn part_mass_matrix(mesh: &Mesh, pattern: &Arc<Pattern>, part: BoundaryPart) -> CsrMatrix {
    weighted_boundary_mass(mesh, pattern, |tag| part.contains(tag), |_| 1.0)
}

/// `∫_e f φ_i` over the edges accepted by `filter`, added into `load`.
fn add_edge_load(
    mesh: &Mesh,
    load: &mut [f64],
    filter: impl Fn(EdgeTag) -> bool,
    f: impl Fn(Point, Point, EdgeTag) -> f64,
) {
    for e in mesh.boundary_edges().iter().filter(|e| filter(e.tag)) {
        let (a, b) = edge_points(mesh, e);
        let len = a.distance(b);
        let normal = outward_normal(mesh, e);
        for &(s, w) in &EDGE_RULE {
            let p = Point::new(a.x + s * (b.x - a.x), a.y + s * (b.y - a.y));
            let v = w * len * f(p, normal, e.tag);
            load[e.vertices[0]] += (1.0 - s) * v;
            load[e.vertices[1]] += s * v;
        }
    }
}

/// Flux load `∫_A g(·, t) φ_i`.
pub fn accessible_load(mesh: &Mesh, flux: &FluxSpec, t: f64) -> Vec<f64> {
    let mut load = vec![0.0; mesh.num_vertices()];
    if flux.amplitude != 0.0 {
        add_edge_load(mesh, &mut load, EdgeTag::is_accessible, |p, _, _| {
            flux.eval(p, t)
        });
    }
    load
}

/// Boundary part of a verification source on `part`.
pub fn source_boundary_load(
    mesh: &Mesh,
    source: &dyn VerificationSource,
    part: BoundaryPart,
    t: f64,
) -> Vec<f64> {
    let mut load = vec![0.0; mesh.num_vertices()];
    add_edge_load(
        mesh,
        &mut load,
        |tag| part.contains(tag),
        |p, n, tag| source.boundary(p, n, tag, t),
    );
    load
}

/// Volume part of a verification source.
pub fn source_volume_load(mesh: &Mesh, source: &dyn VerificationSource, t: f64) -> Vec<f64> {
    let mut load = vec![0.0; mesh.num_vertices()];
    for (k, tri) in mesh.triangles().iter().enumerate() {
        let area = mesh.triangle_area(k).abs();
        let c = corners(mesh, tri);
        for (bary, w) in &TRIANGLE_RULE {
            let p = Point::new(
                bary[0] * c[0].x + bary[1] * c[1].x + bary[2] * c[2].x,
                bary[0] * c[0].y + bary[1] * c[1].y + bary[2] * c[2].y,
            );
            let v = w * area * source.volume(p, t);
            for i in 0..3 {
                load[tri[i]] += bary[i] * v;
            }
        }
    }
    load
}

/// `∫_Ω f²` with the degree-4 rule, for error norms against exact fields.
pub fn l2_error_squared(mesh: &Mesh, nodal: &[f64], exact: impl Fn(Point) -> f64) -> f64 {
    let mut total = 0.0;
    for (k, tri) in mesh.triangles().iter().enumerate() {
        let area = mesh.triangle_area(k).abs();
        let c = corners(mesh, tri);
        for (bary, w) in &TRIANGLE_RULE {
            let p = Point::new(
                bary[0] * c[0].x + bary[1] * c[1].x + bary[2] * c[2].x,
                bary[0] * c[0].y + bary[1] * c[1].y + bary[2] * c[2].y,
            );
            let uh: f64 = (0..3).map(|i| bary[i] * nodal[tri[i]]).sum();
            total += w * area * (uh - exact(p)).powi(2);
        }
    }
    total
}
