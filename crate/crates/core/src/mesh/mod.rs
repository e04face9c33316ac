//! Boundary-fitted triangulations of a [`DomainSpec`].
//!
//! The default mesher shears a uniform rectangle grid onto the domain: column
//! `i` runs from the profile point `(x_i, φ(x_i))` to the top side. Each quad is
//! split along its shorter diagonal.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;

use thiserror::Error;

use crate::geometry::{DomainSpec, Point};

/// Smallest interior angle accepted by the mesher.
pub const MIN_ANGLE_DEGREES: f64 = 20.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("mesh size h = {h} exceeds r0/4 = {limit}")]
    SpacingTooCoarse { h: f64, limit: f64 },
    #[error("minimum angle {min_angle:.2}° below the {MIN_ANGLE_DEGREES}° floor after {attempts} attempts")]
    QualityFailure { min_angle: f64, attempts: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeTag {
    /// Accessible boundary outside the measurement arc.
    Accessible,
    /// Measurement arc; geometrically part of the accessible boundary.
    Sigma,
    /// Unknown (Robin) boundary.
    Inaccessible,
}

impl EdgeTag {
    pub fn is_accessible(self) -> bool {
        matches!(self, EdgeTag::Accessible | EdgeTag::Sigma)
    }

    pub fn label(self) -> &'static str {
        match self {
            EdgeTag::Accessible => "A",
            EdgeTag::Sigma => "Sigma",
            EdgeTag::Inaccessible => "I",
        }
    }
}

/// Boundary edge oriented counter-clockwise (domain on the left).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryEdge {
    pub vertices: [usize; 2],
    pub tag: EdgeTag,
}

/// Which part of the boundary an operation refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundaryPart {
    Accessible,
    Inaccessible,
}

impl BoundaryPart {
    pub fn contains(self, tag: EdgeTag) -> bool {
        match self {
            BoundaryPart::Accessible => tag.is_accessible(),
            BoundaryPart::Inaccessible => tag == EdgeTag::Inaccessible,
        }
    }

    pub fn other(self) -> Self {
        match self {
            BoundaryPart::Accessible => BoundaryPart::Inaccessible,
            BoundaryPart::Inaccessible => BoundaryPart::Accessible,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    domain: Arc<DomainSpec>,
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary_edges: Vec<BoundaryEdge>,
    h: f64,
    level: u32,
}

const ROW_SLACK: f64 = 0.01;

/// Structured mapped mesh of `domain` with nominal spacing `h ≤ r0/4`.
pub fn generate_mesh(domain: &DomainSpec, h: f64) -> Result<Mesh, MeshError> {
    let limit = 0.25 * domain.r0();
    if !(h > 0.0) || h > limit * (1.0 + 1e-12) {
        return Err(MeshError::SpacingTooCoarse { h, limit });
    }
    let width = domain.width();
    let nx = ((width / h) - 1e-9).ceil().max(1.0) as usize;
    let tallest = (0..=nx)
        .map(|i| domain.top() - domain.bottom(domain.left() + width * i as f64 / nx as f64))
        .fold(0.0, f64::max);
    // rows may be up to 1% taller than h, so tiny profile changes keep ny
    let ny = ((tallest / h) - ROW_SLACK).ceil().max(1.0) as usize;
    structured_mesh(domain, nx, ny)
}

/// Sheared grid with `nx` columns and `ny` rows of quads. If the quality
/// floor is missed, up to three extra rows are tried.
pub fn structured_mesh(domain: &DomainSpec, nx: usize, ny: usize) -> Result<Mesh, MeshError> {
    let width = domain.width();
    let nx = nx.max(1);
    let xs: Vec<f64> = (0..=nx)
        .map(|i| domain.left() + width * i as f64 / nx as f64)
        .collect();
    let mut worst = 0.0;
    let attempts = 4;
    for attempt in 0..attempts {
        let mesh = sheared_grid(domain, &xs, ny.max(1) + attempt, width / nx as f64);
        let angle = mesh.min_angle_degrees();
        if angle >= MIN_ANGLE_DEGREES {
            return Ok(mesh);
        }
        worst = angle;
    }
    Err(MeshError::QualityFailure {
        min_angle: worst,
        attempts,
    })
}

const DIAGONAL_MARGIN: f64 = 0.1;

fn sheared_grid(domain: &DomainSpec, xs: &[f64], ny: usize, dx: f64) -> Mesh {
    let nx = xs.len() - 1;
    let stride = nx + 1;
    let top = domain.top();
    let mut vertices = Vec::with_capacity(stride * (ny + 1));
    let mut dy_max: f64 = 0.0;
    for j in 0..=ny {
        for &x in xs {
            let b = domain.bottom(x);
            dy_max = dy_max.max((top - b) / ny as f64);
            let y = if j == ny {
                top
            } else {
                b + (top - b) * j as f64 / ny as f64
            };
            vertices.push(Point::new(x, y));
        }
    }
    let id = |i: usize, j: usize| j * stride + i;
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            // the a-c diagonal unless the other is clearly shorter, so small
            // profile changes keep the connectivity
            let (ac, bd) = (
                vertices[a].distance(vertices[c]),
                vertices[b].distance(vertices[d]),
            );
            if ac <= (1.0 + DIAGONAL_MARGIN) * bd {
                triangles.push([a, b, c]);
                triangles.push([a, c, d]);
            } else {
                triangles.push([a, b, d]);
                triangles.push([b, c, d]);
            }
        }
    }
    let sigma = domain.sigma();
    let sigma_lo = domain.left() + sigma.start;
    let sigma_hi = domain.left() + sigma.end;
    let mut boundary_edges = Vec::with_capacity(2 * (nx + ny));
    for i in 0..nx {
        boundary_edges.push(BoundaryEdge {
            vertices: [id(i, 0), id(i + 1, 0)],
            tag: EdgeTag::Inaccessible,
        });
    }
    for j in 0..ny {
        boundary_edges.push(BoundaryEdge {
            vertices: [id(nx, j), id(nx, j + 1)],
            tag: EdgeTag::Accessible,
        });
    }
    let tol = 1e-9 * dx;
    for i in (0..nx).rev() {
        let (a, b) = (id(i + 1, ny), id(i, ny));
        let mid = 0.5 * (vertices[a].x + vertices[b].x);
        let tag = if mid > sigma_lo - tol && mid < sigma_hi + tol {
            EdgeTag::Sigma
        } else {
            EdgeTag::Accessible
        };
        boundary_edges.push(BoundaryEdge {
            vertices: [a, b],
            tag,
        });
    }
    for j in (0..ny).rev() {
        boundary_edges.push(BoundaryEdge {
            vertices: [id(0, j + 1), id(0, j)],
            tag: EdgeTag::Accessible,
        });
    }
    Mesh {
        domain: Arc::new(domain.clone()),
        vertices,
        triangles,
        boundary_edges,
        h: dx.max(dy_max),
        level: 0,
    }
}

/// Uniform 4-to-1 refinement. New vertices on the inaccessible boundary are
/// projected back onto the profile graph.
pub fn refine(mesh: &Mesh) -> Mesh {
    let mut vertices = mesh.vertices.clone();
    let mut midpoint_of: HashMap<(usize, usize), usize> = HashMap::new();
    let on_profile: std::collections::HashSet<(usize, usize)> = mesh
        .boundary_edges
        .iter()
        .filter(|e| e.tag == EdgeTag::Inaccessible)
        .map(|e| key(e.vertices[0], e.vertices[1]))
        .collect();
    let domain = &mesh.domain;
    let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Point>| -> usize {
        let k = key(a, b);
        if let Some(&m) = midpoint_of.get(&k) {
            return m;
        }
        let mut p = vertices[a].midpoint(vertices[b]);
        if on_profile.contains(&k) {
            p.y = domain.bottom(p.x);
        }
        vertices.push(p);
        let m = vertices.len() - 1;
        midpoint_of.insert(k, m);
        m
    };
    let mut triangles = Vec::with_capacity(4 * mesh.triangles.len());
    for &[a, b, c] in &mesh.triangles {
        let ab = midpoint(a, b, &mut vertices);
        let bc = midpoint(b, c, &mut vertices);
        let ca = midpoint(c, a, &mut vertices);
        triangles.push([a, ab, ca]);
        triangles.push([ab, b, bc]);
        triangles.push([ca, bc, c]);
        triangles.push([ab, bc, ca]);
    }
    let mut boundary_edges = Vec::with_capacity(2 * mesh.boundary_edges.len());
    for e in &mesh.boundary_edges {
        let [a, b] = e.vertices;
        let m = midpoint(a, b, &mut vertices);
        boundary_edges.push(BoundaryEdge {
            vertices: [a, m],
            tag: e.tag,
        });
        boundary_edges.push(BoundaryEdge {
            vertices: [m, b],
            tag: e.tag,
        });
    }
    Mesh {
        domain: mesh.domain.clone(),
        vertices,
        triangles,
        boundary_edges,
        h: 0.5 * mesh.h,
        level: mesh.level + 1,
    }
}

fn key(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

impl Mesh {
    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_edges(&self) -> &[BoundaryEdge] {
        &self.boundary_edges
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Number of refinements applied since generation.
    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    /// Number of distinct edges (interior and boundary).
    pub fn num_edges(&self) -> usize {
        let mut edges: Vec<(usize, usize)> = self
            .triangles
            .iter()
            .flat_map(|&[a, b, c]| [key(a, b), key(b, c), key(c, a)])
            .collect();
        edges.sort_unstable();
        edges.dedup();
        edges.len()
    }

    /// Signed area of triangle `t` (positive for counter-clockwise).
    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let (p, q, r) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        0.5 * ((q.x - p.x) * (r.y - p.y) - (r.x - p.x) * (q.y - p.y))
    }

    pub fn area(&self) -> f64 {
        (0..self.triangles.len())
            .map(|t| self.triangle_area(t))
            .sum()
    }

    pub fn min_angle_degrees(&self) -> f64 {
        let mut worst = 180.0_f64;
        for &[a, b, c] in &self.triangles {
            let p = [self.vertices[a], self.vertices[b], self.vertices[c]];
            for k in 0..3 {
                let (o, u, v) = (p[k], p[(k + 1) % 3], p[(k + 2) % 3]);
                let (ux, uy, vx, vy) = (u.x - o.x, u.y - o.y, v.x - o.x, v.y - o.y);
                let cos = (ux * vx + uy * vy) / ((ux.hypot(uy)) * (vx.hypot(vy)));
                worst = worst.min(cos.clamp(-1.0, 1.0).acos().to_degrees());
            }
        }
        worst
    }

    pub fn edge_length(&self, e: &BoundaryEdge) -> f64 {
        self.vertices[e.vertices[0]].distance(self.vertices[e.vertices[1]])
    }

    /// Total length of the boundary edges accepted by `filter`.
    pub fn boundary_length(&self, filter: impl Fn(EdgeTag) -> bool) -> f64 {
        self.boundary_edges
            .iter()
            .filter(|e| filter(e.tag))
            .map(|e| self.edge_length(e))
            .sum()
    }

    /// Vertices on Σ-tagged edges, sorted by abscissa.
    pub fn sigma_vertices(&self) -> Vec<usize> {
        self.part_vertices(|t| t == EdgeTag::Sigma)
    }

    /// Vertices touched by boundary edges accepted by `filter`, sorted by
    /// abscissa then ordinate.
    pub fn part_vertices(&self, filter: impl Fn(EdgeTag) -> bool) -> Vec<usize> {
        let mut vs: Vec<usize> = self
            .boundary_edges
            .iter()
            .filter(|e| filter(e.tag))
            .flat_map(|e| e.vertices)
            .collect();
        vs.sort_unstable();
        vs.dedup();
        vs.sort_by(|&a, &b| {
            let (p, q) = (self.vertices[a], self.vertices[b]);
            p.x.total_cmp(&q.x).then(p.y.total_cmp(&q.y))
        });
        vs
    }

    /// Plain-text export: vertex table, triangle table, tagged-edge table.
    pub fn export_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# vertices {}", self.vertices.len());
        for (i, p) in self.vertices.iter().enumerate() {
            let _ = writeln!(out, "{i} {:.15e} {:.15e}", p.x, p.y);
        }
        let _ = writeln!(out, "# triangles {}", self.triangles.len());
        for (t, [a, b, c]) in self.triangles.iter().enumerate() {
            let _ = writeln!(out, "{t} {a} {b} {c}");
        }
        let _ = writeln!(out, "# boundary_edges {}", self.boundary_edges.len());
        for e in &self.boundary_edges {
            let _ = writeln!(out, "{} {} {}", e.vertices[0], e.vertices[1], e.tag.label());
        }
        out
    }
}
