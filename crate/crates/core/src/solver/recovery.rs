//! Variational recovery of boundary fluxes and the discrete energy balance.

use std::sync::Arc;

use crate::geometry::Point;
use crate::mesh::{BoundaryPart, Mesh};

use super::data::{FluxSpec, ImpedanceSpec};
use super::field::Field;
use super::linalg::{dot, reverse_cuthill_mckee, CsrMatrix, EnvelopeCholesky};
use super::{add, part_mass_matrix, Discretisation, TimeGrid};

/// A function on the vertices of one boundary part, one row per time
/// interval `[t_n, t_{n+1}]`. Row `n` approximates the θ-average
/// `θ f(t_{n+1}) + (1 − θ) f(t_n)`.
#[derive(Debug, Clone)]
pub struct BoundaryField {
    mesh: Arc<Mesh>,
    part: BoundaryPart,
    vertices: Vec<usize>,
    grid: TimeGrid,
    /// θ of each row.
    thetas: Vec<f64>,
    values: Vec<f64>,
    part_mass: CsrMatrix,
}

impl BoundaryField {
    pub fn new(
        mesh: Arc<Mesh>,
        part: BoundaryPart,
        grid: TimeGrid,
        theta: f64,
        values: Vec<f64>,
    ) -> Self {
        let vertices = mesh.part_vertices(|t| part.contains(t));
        assert_eq!(values.len(), vertices.len() * grid.steps);
        let pattern = super::mesh_pattern(&mesh);
        let part_mass = part_mass_matrix(&mesh, &pattern, part).submatrix(&vertices);
        Self {
            mesh,
            part,
            vertices,
            grid,
            thetas: vec![theta; grid.steps],
            values,
            part_mass,
        }
    }

    pub fn part(&self) -> BoundaryPart {
        self.part
    }

    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    pub fn points(&self) -> Vec<Point> {
        self.vertices
            .iter()
            .map(|&v| self.mesh.vertices()[v])
            .collect()
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn theta(&self, row: usize) -> f64 {
        self.thetas[row]
    }

    pub fn rows(&self) -> usize {
        self.grid.steps
    }

    pub fn row(&self, n: usize) -> &[f64] {
        let k = self.vertices.len();
        &self.values[n * k..(n + 1) * k]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Representative time of row `n`.
    pub fn row_time(&self, n: usize) -> f64 {
        self.grid.time(n) + self.thetas[n] * self.grid.dt()
    }

    /// `f` sampled at the part vertices and θ-averaged per row.
    pub fn reference(&self, f: impl Fn(Point, f64) -> f64) -> Vec<f64> {
        let pts = self.points();
        (0..self.rows())
            .flat_map(|n| {
                let th = self.thetas[n];
                let (t0, t1) = (self.grid.time(n), self.grid.time(n + 1));
                let pts = &pts;
                let f = &f;
                pts.iter()
                    .map(move |&p| th * f(p, t1) + (1.0 - th) * f(p, t0))
            })
            .collect()
    }

    /// `Σ_n dt·‖e_n‖²_{L²(part)}` for row-major nodal values `e`.
    pub fn space_time_norm_squared(&self, e: &[f64]) -> f64 {
        let k = self.vertices.len();
        let dt = self.grid.dt();
        e.chunks(k)
            .map(|row| dt * dot(row, &self.part_mass.mul_vec(row)))
            .sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.space_time_norm_squared(&self.values).sqrt()
    }

    /// Space-time `L²` distance to the θ-averaged samples of `f`.
    pub fn l2_error(&self, f: impl Fn(Point, f64) -> f64) -> f64 {
        let r = self.reference(f);
        let e: Vec<f64> = self.values.iter().zip(&r).map(|(a, b)| a - b).collect();
        self.space_time_norm_squared(&e).sqrt()
    }
}

/// θ-average `θ u^{n+1} + (1 − θ) u^n` of a field at the vertices.
pub(crate) fn theta_average(field: &Field, n: usize) -> Vec<f64> {
    let th = field.theta_at(n);
    field
        .step(n + 1)
        .iter()
        .zip(field.step(n))
        .map(|(a, b)| th * a + (1.0 - th) * b)
        .collect()
}

fn problem_of(field: &Field) -> (FluxSpec, ImpedanceSpec) {
    match field.data() {
        Some(d) => (d.flux, d.impedance),
        None => (
            FluxSpec::zero(field.mesh().domain().r0(), field.grid().horizon),
            ImpedanceSpec::constant(0.0),
        ),
    }
}

/// `∂u/∂ν` on `part`, obtained by testing the discrete equation against the
/// boundary-supported basis functions and inverting the boundary mass matrix.
/// Synthetic fields are treated as having zero flux and impedance.
pub fn normal_derivative(field: &Field, part: BoundaryPart) -> BoundaryField {
    let mesh = field.mesh().clone();
    let (flux, gamma) = problem_of(field);
    let source = field.data().and_then(|d| d.source.clone());
    let disc = Discretisation::new(&mesh, &flux, &gamma, source.as_deref());
    let grid = field.grid();
    let dt = grid.dt();
    let vertices = mesh.part_vertices(|t| part.contains(t));
    let part_mass = part_mass_matrix(&mesh, &disc.pattern, part).submatrix(&vertices);
    let chol = EnvelopeCholesky::factor(&part_mass, &reverse_cuthill_mckee(part_mass.pattern()))
        .expect("boundary mass matrix is positive definite");

    let known = |t: f64| -> Vec<f64> {
        let mut f = disc.load_volume(t);
        match part {
            BoundaryPart::Inaccessible => add(&mut f, &disc.load_accessible(t)),
            BoundaryPart::Accessible => add(&mut f, &disc.load_inaccessible(t)),
        }
        f
    };
    let mut robin_prev = disc.robin(0.0);
    let mut known_prev = known(0.0);
    let mut values = Vec::with_capacity(grid.steps * vertices.len());
    for n in 0..grid.steps {
        let theta = field.theta_at(n);
        let t_next = grid.time(n + 1);
        let robin_next = if gamma.is_time_dependent() {
            disc.robin(t_next)
        } else {
            robin_prev.clone()
        };
        let known_next = known(t_next);
        let (u0, u1) = (field.step(n), field.step(n + 1));
        let du: Vec<f64> = u1.iter().zip(u0).map(|(a, b)| (a - b) / dt).collect();
        let ua = theta_average(field, n);
        let mut r = disc.mass.mul_vec(&du);
        add(&mut r, &disc.stiffness.mul_vec(&ua));
        if part == BoundaryPart::Accessible {
            let r1 = robin_next.mul_vec(u1);
            let r0 = robin_prev.mul_vec(u0);
            for i in 0..r.len() {
                r[i] += theta * r1[i] + (1.0 - theta) * r0[i];
            }
        }
        for i in 0..r.len() {
            r[i] -= theta * known_next[i] + (1.0 - theta) * known_prev[i];
        }
        let rhs: Vec<f64> = vertices.iter().map(|&v| r[v]).collect();
        values.extend(chol.solve(&rhs));
        robin_prev = robin_next;
        known_prev = known_next;
    }
    BoundaryField {
        mesh,
        part,
        vertices,
        grid,
        thetas: (0..grid.steps).map(|n| field.theta_at(n)).collect(),
        values,
        part_mass,
    }
}

/// Per-step relative residual of the balance obtained with test function 1:
/// `∫_Ω (u^{n+1} − u^n)/dt + ∫_I γ u − ∫_A g` (θ-weighted), divided by the
/// largest of the three terms.
pub fn energy_balance_residual(field: &Field, g: &FluxSpec, gamma: &ImpedanceSpec) -> Vec<f64> {
    let mesh = field.mesh().clone();
    let source = field.data().and_then(|d| d.source.clone());
    let disc = Discretisation::new(&mesh, g, gamma, source.as_deref());
    let grid = field.grid();
    let dt = grid.dt();
    let one = vec![1.0; mesh.num_vertices()];
    let mass_one = disc.mass.mul_vec(&one);
    let sum = |v: &[f64]| v.iter().sum::<f64>();
    let mut robin_prev = disc.robin(0.0);
    let mut load_prev = sum(&disc.load_total(0.0));
    (0..grid.steps)
        .map(|n| {
            let theta = field.theta_at(n);
            let t_next = grid.time(n + 1);
            let robin_next = if gamma.is_time_dependent() {
                disc.robin(t_next)
            } else {
                robin_prev.clone()
            };
            let load_next = sum(&disc.load_total(t_next));
            let (u0, u1) = (field.step(n), field.step(n + 1));
            let heat = (dot(&mass_one, u1) - dot(&mass_one, u0)) / dt;
            let loss =
                theta * sum(&robin_next.mul_vec(u1)) + (1.0 - theta) * sum(&robin_prev.mul_vec(u0));
            let input = theta * load_next + (1.0 - theta) * load_prev;
            robin_prev = robin_next;
            load_prev = load_next;
            let scale = heat.abs().max(loss.abs()).max(input.abs());
            if scale == 0.0 {
                0.0
            } else {
                (heat + loss - input).abs() / scale
            }
        })
        .collect()
}
