//! The relative difference `λ = ũ/u − 1` of two forward solutions and the
//! inequalities it is expected to satisfy.

mod inequalities;
mod integrals;

use std::fmt::Write as _;
use std::sync::Arc;

use thiserror::Error;

use crate::geometry::Point;
use crate::mesh::{EdgeTag, Mesh};
use crate::solver::linalg::{dot, reverse_cuthill_mckee, CsrMatrix, EnvelopeCholesky, FactorError};
use crate::solver::{
    mass_matrix, mesh_pattern, stiffness_matrix, Field, FluxSpec, SolverError, TimeGrid,
};

pub use inequalities::{
    harnack_check, harnack_windows, lambda_mass_lower_bound, lower_bound_check,
    trace_inequality_check, two_sphere_grid, two_sphere_one_cylinder_check, TwoSphereParams,
    DEFAULT_S1,
};
pub use integrals::{BallRule, DEFAULT_BALL_LEVEL};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("denominator too small: min u = {min:.3e} (max {max:.3e})")]
    DenominatorTooSmall { min: f64, max: f64 },
    #[error("fields are incompatible: {0}")]
    IncompatibleFields(String),
    #[error("ball of radius {rho} is not interior: distance to the boundary {distance:.4e}")]
    BallNotInterior { distance: f64, rho: f64 },
    #[error("field is not positive on the region: min {min:.3e}")]
    NonPositiveField { min: f64 },
    #[error("geometry violation: {0}")]
    GeometryViolation(String),
    #[error("ball does not meet the mesh")]
    EmptyIntersection,
    #[error(transparent)]
    Solver(#[from] SolverError),
}

pub const REPORT_HEADER: &str = "check,params,lhs,rhs,constant,exponent,pass";

/// Outcome of one inequality check. The meaning of `lhs` and `rhs` depends on
/// the check; `constant` is the fitted (dimensionless) constant.
#[derive(Debug, Clone, PartialEq)]
pub struct InequalityReport {
    pub check: String,
    pub params: Vec<(String, f64)>,
    pub lhs: f64,
    pub rhs: f64,
    pub constant: f64,
    pub exponent: Option<f64>,
    pub pass: bool,
}

impl InequalityReport {
    pub fn param(&self, key: &str) -> Option<f64> {
        self.params.iter().find(|(k, _)| k == key).map(|(_, v)| *v)
    }

    /// One CSV row matching [`REPORT_HEADER`]; parameters are `key=value`
    /// pairs separated by semicolons.
    pub fn csv_row(&self) -> String {
        let mut params = String::new();
        for (i, (k, v)) in self.params.iter().enumerate() {
            if i > 0 {
                params.push(';');
            }
            let _ = write!(params, "{k}={v:.6e}");
        }
        let exponent = self.exponent.map_or(String::new(), |e| format!("{e:.6e}"));
        format!(
            "{},{},{:.9e},{:.9e},{:.9e},{},{}",
            self.check, params, self.lhs, self.rhs, self.constant, exponent, self.pass
        )
    }
}

/// `λ` at every grid time in `[t1, T]`, stored row-major.
#[derive(Debug, Clone)]
pub struct LambdaField {
    mesh: Arc<Mesh>,
    grid: TimeGrid,
    first: usize,
    values: Vec<f64>,
    b0: f64,
    b1: f64,
}

impl LambdaField {
    /// Synthetic λ from explicit rows starting at grid step `first`.
    pub fn from_values(mesh: Arc<Mesh>, grid: TimeGrid, first: usize, values: Vec<f64>) -> Self {
        assert_eq!(
            values.len(),
            (grid.steps + 1 - first) * mesh.num_vertices(),
            "lambda size does not match mesh and grid"
        );
        Self {
            mesh,
            grid,
            first,
            values,
            b0: f64::NAN,
            b1: f64::NAN,
        }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    /// Grid index of `t1`.
    pub fn first_step(&self) -> usize {
        self.first
    }

    pub fn t1(&self) -> f64 {
        self.grid.time(self.first)
    }

    pub fn rows(&self) -> usize {
        self.grid.steps + 1 - self.first
    }

    pub fn time(&self, k: usize) -> f64 {
        self.grid.time(self.first + k)
    }

    pub fn row(&self, k: usize) -> &[f64] {
        let nv = self.mesh.num_vertices();
        &self.values[k * nv..(k + 1) * nv]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Lower bound of `u` on `[t1, T]` used to form λ.
    pub fn b0(&self) -> f64 {
        self.b0
    }

    /// Upper bound of `u` on `[t1, T]`.
    pub fn b1(&self) -> f64 {
        self.b1
    }

    /// Nodal values at time `t ∈ [t1, T]`, linear between grid times.
    pub fn at_time(&self, t: f64) -> Vec<f64> {
        let dt = self.grid.dt();
        let s = ((t - self.t1()) / dt).clamp(0.0, (self.rows() - 1) as f64);
        let k = (s.floor() as usize).min(self.rows() - 1);
        let w = s - k as f64;
        if w <= 1e-12 || k + 1 >= self.rows() {
            return self.row(k).to_vec();
        }
        self.row(k)
            .iter()
            .zip(self.row(k + 1))
            .map(|(a, b)| (1.0 - w) * a + w * b)
            .collect()
    }

    /// `‖λ(·, t)‖_{L²(Ω)}` at every row.
    pub fn l2_norms(&self) -> Vec<f64> {
        let m = mass_matrix(&self.mesh, &mesh_pattern(&self.mesh));
        (0..self.rows())
            .map(|k| dot(self.row(k), &m.mul_vec(self.row(k))).max(0.0).sqrt())
            .collect()
    }
}

/// Smallest `u/max u` accepted as a denominator.
pub const MIN_DENOMINATOR_RATIO: f64 = 1e-12;

/// `λ = ũ/u − 1` at the vertices for all grid times in `[t1, T]`.
pub fn compute_lambda(u: &Field, ut: &Field, t1: f64) -> Result<LambdaField, AnalysisError> {
    if u.mesh().num_vertices() != ut.mesh().num_vertices() || u.grid() != ut.grid() {
        return Err(AnalysisError::IncompatibleFields(
            "mesh or time grid differ".into(),
        ));
    }
    let grid = u.grid();
    let first = grid.index_of(t1)?;
    let nv = u.mesh().num_vertices();
    let (mut b0, mut b1) = (f64::INFINITY, 0.0f64);
    for n in first..=grid.steps {
        for &v in u.step(n) {
            b0 = b0.min(v);
            b1 = b1.max(v);
        }
    }
    if !(b0 > MIN_DENOMINATOR_RATIO * b1) || !b1.is_finite() {
        return Err(AnalysisError::DenominatorTooSmall { min: b0, max: b1 });
    }
    let mut values = Vec::with_capacity((grid.steps + 1 - first) * nv);
    for n in first..=grid.steps {
        values.extend(ut.step(n).iter().zip(u.step(n)).map(|(a, b)| a / b - 1.0));
    }
    Ok(LambdaField {
        mesh: u.mesh().clone(),
        grid,
        first,
        values,
        b0,
        b1,
    })
}

/// Weak residual of `u²∂tλ = div(u²∇λ)` with `u²∂νλ = u g̃ − ũ g` on `A`
/// and zero on `I`.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaResidual {
    /// `(Σ_n dt‖r^n‖²_*)^{1/2}` with `‖·‖_*` the discrete `H¹`-dual norm.
    pub dual_norm: f64,
    pub per_step: Vec<f64>,
}

const GAUSS3: [(f64, f64); 3] = [
    (0.112_701_665_379_258_3, 5.0 / 18.0),
    (0.5, 8.0 / 18.0),
    (0.887_298_334_620_741_7, 5.0 / 18.0),
];

/// Backward-Euler residual of the λ equation, tested against every P1 basis
/// function:
/// `∫ u²(λ^{n+1} − λ^n)/dt φ_i + ∫ u²∇λ^{n+1}·∇φ_i − ∫_A (u g̃ − ũ g)φ_i`,
/// with `ũ = u(1 + λ)` and `u = u^{n+1}` the discrete solution.
pub fn lambda_pde_residual(
    lam: &LambdaField,
    u: &Field,
    g: &FluxSpec,
    gt: &FluxSpec,
) -> Result<LambdaResidual, AnalysisError> {
    if u.mesh().num_vertices() != lam.mesh.num_vertices() || u.grid() != lam.grid {
        return Err(AnalysisError::IncompatibleFields(
            "lambda and u live on different grids".into(),
        ));
    }
    let mesh = lam.mesh.as_ref();
    let pattern = mesh_pattern(mesh);
    let mass = mass_matrix(mesh, &pattern);
    let stiff = stiffness_matrix(mesh, &pattern);
    let h1 = CsrMatrix::combination(&[(1.0, &stiff), (1.0, &mass)]);
    let chol =
        EnvelopeCholesky::factor(&h1, &reverse_cuthill_mckee(&pattern)).map_err(|e| match e {
            FactorError::NotPositiveDefinite { row, pivot } => {
                AnalysisError::Solver(SolverError::SingularSystem { row, pivot })
            }
        })?;
    let dt = lam.grid.dt();
    let mut per_step = Vec::with_capacity(lam.rows() - 1);
    let mut total = 0.0;
    for k in 0..lam.rows() - 1 {
        let (l0, l1) = (lam.row(k), lam.row(k + 1));
        let n = lam.first + k + 1;
        let t = lam.grid.time(n);
        let u1 = u.step(n);
        let dl: Vec<f64> = l1.iter().zip(l0).map(|(a, b)| (a - b) / dt).collect();
        let mut r = vec![0.0; dl.len()];
        add_degenerate_terms(mesh, u1, &dl, l1, &mut r);
        subtract_flux_mismatch(mesh, u1, l1, g, gt, t, &mut r);
        let z = chol.solve(&r);
        let norm = dot(&r, &z).max(0.0).sqrt();
        total += dt * norm * norm;
        per_step.push(norm);
    }
    Ok(LambdaResidual {
        dual_norm: total.sqrt(),
        per_step,
    })
}

/// Adds `∫_T u_h² (λ_t φ_i + ∇λ·∇φ_i)` for every triangle; the first term uses
/// the edge-midpoint rule.
fn add_degenerate_terms(mesh: &Mesh, u: &[f64], lam_t: &[f64], lam: &[f64], r: &mut [f64]) {
    let v = mesh.vertices();
    for tri in mesh.triangles() {
        let p = [v[tri[0]], v[tri[1]], v[tri[2]]];
        let two_area =
            (p[1].x - p[0].x) * (p[2].y - p[0].y) - (p[2].x - p[0].x) * (p[1].y - p[0].y);
        let grads: [Point; 3] = std::array::from_fn(|i| {
            let (j, k) = ((i + 1) % 3, (i + 2) % 3);
            Point::new((p[j].y - p[k].y) / two_area, (p[k].x - p[j].x) / two_area)
        });
        let uu = [u[tri[0]], u[tri[1]], u[tri[2]]];
        let sum: f64 = uu.iter().sum();
        let sq: f64 = uu.iter().map(|x| x * x).sum();
        let u2 = two_area.abs() / 24.0 * (sq + sum * sum);
        let gl = (0..3).fold(Point::new(0.0, 0.0), |acc, i| {
            Point::new(
                acc.x + lam[tri[i]] * grads[i].x,
                acc.y + lam[tri[i]] * grads[i].y,
            )
        });
        for i in 0..3 {
            r[tri[i]] += u2 * (gl.x * grads[i].x + gl.y * grads[i].y);
        }
        let lt = [lam_t[tri[0]], lam_t[tri[1]], lam_t[tri[2]]];
        for (a, b) in [(0, 1), (1, 2), (2, 0)] {
            let w = two_area.abs() / 6.0;
            let um = 0.5 * (uu[a] + uu[b]);
            let val = w * um * um * 0.5 * (lt[a] + lt[b]);
            r[tri[a]] += 0.5 * val;
            r[tri[b]] += 0.5 * val;
        }
    }
}

/// Subtracts `∫_A (u g̃ − ũ g) φ_i` with `ũ = u(1 + λ)`.
fn subtract_flux_mismatch(
    mesh: &Mesh,
    u: &[f64],
    lam: &[f64],
    g: &FluxSpec,
    gt: &FluxSpec,
    t: f64,
    r: &mut [f64],
) {
    let v = mesh.vertices();
    for e in mesh.boundary_edges() {
        if e.tag == EdgeTag::Inaccessible {
            continue;
        }
        let [i, j] = e.vertices;
        let (a, b) = (v[i], v[j]);
        let len = a.distance(b);
        let ut = [u[i] * (1.0 + lam[i]), u[j] * (1.0 + lam[j])];
        for &(s, w) in &GAUSS3 {
            let p = Point::new(a.x + s * (b.x - a.x), a.y + s * (b.y - a.y));
            let uh = (1.0 - s) * u[i] + s * u[j];
            let uth = (1.0 - s) * ut[0] + s * ut[1];
            let val = w * len * (uh * gt.eval(p, t) - uth * g.eval(p, t));
            r[i] -= (1.0 - s) * val;
            r[j] -= s * val;
        }
    }
}
