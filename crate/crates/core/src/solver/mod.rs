//! Forward heat problem: `u_t = Δu` with flux `g` on `A`, Robin condition
//! `∂u/∂ν + γu = 0` on `I` and zero initial data, discretised by P1 elements
//! and the θ-scheme.

mod assembly;
mod data;
mod field;
pub mod linalg;
mod recovery;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::geometry::Point;
use crate::mesh::{BoundaryPart, EdgeTag, Mesh};

pub use assembly::{
    accessible_load, l2_error_squared, mass_matrix, mesh_pattern, outward_normal, part_mass_matrix,
    robin_matrix, source_boundary_load, source_volume_load, stiffness_matrix,
    weighted_boundary_mass,
};
pub use data::{
    accessible_samples, flux_pair_checks, impedance_checks, ratio_deviation,
    sampled_lipschitz_norm, validate_flux_pair, validate_impedance, AssumptionCheck,
    FluxModulation, FluxProfile, FluxSpec, FluxValidation, ImpedanceKind, ImpedanceSpec,
    PROPORTIONAL_THRESHOLD,
};
pub use field::{boundary_trace, trace_distance, Field, MeasurementTrace, ProblemData};
pub use recovery::{energy_balance_residual, normal_derivative, BoundaryField};

use linalg::{conjugate_gradient, norm, reverse_cuthill_mckee, CsrMatrix, EnvelopeCholesky};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("system matrix is not positive definite (row {row}, pivot {pivot:.3e})")]
    SingularSystem { row: usize, pivot: f64 },
    #[error("non-finite value at time step {step}")]
    NonFiniteValue { step: usize },
    #[error("linear solve stalled at relative residual {residual:.3e}")]
    Convergence { residual: f64 },
    #[error("time {time} is not a grid point (dt = {dt})")]
    WindowOffGrid { time: f64, dt: f64 },
    #[error("incompatible traces: {0}")]
    IncompatibleTraces(String),
    #[error("incompatible fluxes: {0}")]
    IncompatibleFluxes(String),
    #[error("fluxes are proportional: Phi0 = {phi0:.3e}")]
    FluxesProportional { phi0: f64 },
    #[error("flux lower bound (3g) violated: {0}")]
    LowerBoundViolated(String),
    #[error("fluxes differ before t1, violating (3e): {0}")]
    EarlyTimeMismatch(String),
    #[error("flux support violates {0}")]
    SupportViolation(String),
    #[error("flux norm {measured:.6e} exceeds E = {bound:.6e} (3d)")]
    LipschitzBoundExceeded { measured: f64, bound: f64 },
    #[error("impedance violates {0}")]
    ImpedanceOutOfRange(String),
}

/// Uniform time grid `t_n = n·T/steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub horizon: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Self {
        Self { horizon, steps }
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn time(&self, n: usize) -> f64 {
        self.horizon * n as f64 / self.steps as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|n| self.time(n)).collect()
    }

    /// Index of grid point `t`, or `WindowOffGrid`.
    pub fn index_of(&self, t: f64) -> Result<usize, SolverError> {
        let s = t / self.dt();
        let n = s.round();
        if n < 0.0 || n > self.steps as f64 || (s - n).abs() > 1e-9 {
            return Err(SolverError::WindowOffGrid {
                time: t,
                dt: self.dt(),
            });
        }
        Ok(n as usize)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinearSolver {
    /// Envelope Cholesky under reverse Cuthill–McKee ordering with iterative
    /// refinement.
    Direct,
    /// Jacobi-preconditioned conjugate gradients.
    ConjugateGradient,
}

/// Extra data for manufactured-solution studies: a volume source and
/// boundary data added on both parts. Never used by experiment paths.
pub trait VerificationSource: Send + Sync + fmt::Debug {
    fn volume(&self, p: Point, t: f64) -> f64;
    /// Additional boundary datum at `p` with outward normal `normal`.
    fn boundary(&self, p: Point, normal: Point, tag: EdgeTag, t: f64) -> f64;
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub theta: f64,
    pub tolerance: f64,
    pub linear_solver: LinearSolver,
    pub max_iterations: usize,
    /// Leading backward Euler steps before switching to `theta`; damps the
    /// start-up layer of the trapezoidal rule.
    pub startup_steps: usize,
    pub source: Option<Arc<dyn VerificationSource>>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            theta: 1.0,
            tolerance: 1e-10,
            linear_solver: LinearSolver::Direct,
            max_iterations: 5000,
            startup_steps: 0,
            source: None,
        }
    }
}

impl SolverConfig {
    pub fn with_theta(mut self, theta: f64) -> Self {
        self.theta = theta;
        self
    }

    pub fn with_startup_steps(mut self, steps: usize) -> Self {
        self.startup_steps = steps;
        self
    }

    pub fn theta_at(&self, step: usize) -> f64 {
        if step < self.startup_steps {
            1.0
        } else {
            self.theta
        }
    }

    pub fn with_source(mut self, source: Arc<dyn VerificationSource>) -> Self {
        self.source = Some(source);
        self
    }

    pub fn with_linear_solver(mut self, solver: LinearSolver) -> Self {
        self.linear_solver = solver;
        self
    }
}

/// Assembled time-independent operators plus the load evaluation.
pub(crate) struct Discretisation<'a> {
    pub mesh: &'a Mesh,
    pub pattern: Arc<linalg::Pattern>,
    pub mass: CsrMatrix,
    pub stiffness: CsrMatrix,
    pub flux: &'a FluxSpec,
    pub gamma: &'a ImpedanceSpec,
    pub source: Option<&'a dyn VerificationSource>,
}

impl<'a> Discretisation<'a> {
    pub fn new(
        mesh: &'a Mesh,
        flux: &'a FluxSpec,
        gamma: &'a ImpedanceSpec,
        source: Option<&'a dyn VerificationSource>,
    ) -> Self {
        let pattern = mesh_pattern(mesh);
        let mass = mass_matrix(mesh, &pattern);
        let stiffness = stiffness_matrix(mesh, &pattern);
        Self {
            mesh,
            pattern,
            mass,
            stiffness,
            flux,
            gamma,
            source,
        }
    }

    pub fn robin(&self, t: f64) -> CsrMatrix {
        robin_matrix(self.mesh, &self.pattern, self.gamma, t)
    }

    /// Load on `A` (flux plus any verification boundary datum).
    pub fn load_accessible(&self, t: f64) -> Vec<f64> {
        let mut f = accessible_load(self.mesh, self.flux, t);
        if let Some(s) = self.source {
            add(
                &mut f,
                &source_boundary_load(self.mesh, s, BoundaryPart::Accessible, t),
            );
        }
        f
    }

    /// Load on `I` (verification boundary datum only).
    pub fn load_inaccessible(&self, t: f64) -> Vec<f64> {
        match self.source {
            Some(s) => source_boundary_load(self.mesh, s, BoundaryPart::Inaccessible, t),
            None => vec![0.0; self.mesh.num_vertices()],
        }
    }

    pub fn load_volume(&self, t: f64) -> Vec<f64> {
        match self.source {
            Some(s) => source_volume_load(self.mesh, s, t),
            None => vec![0.0; self.mesh.num_vertices()],
        }
    }

    pub fn load_total(&self, t: f64) -> Vec<f64> {
        let mut f = self.load_accessible(t);
        if self.source.is_some() {
            add(&mut f, &self.load_inaccessible(t));
            add(&mut f, &self.load_volume(t));
        }
        f
    }
}

pub(crate) fn add(a: &mut [f64], b: &[f64]) {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
}

enum Factor {
    Direct(EnvelopeCholesky),
    Iterative,
}

struct SystemSolver {
    matrix: CsrMatrix,
    factor: Factor,
}

impl SystemSolver {
    fn new(matrix: CsrMatrix, kind: LinearSolver, perm: &[usize]) -> Result<Self, SolverError> {
        let factor = match kind {
            LinearSolver::Direct => Factor::Direct(
                EnvelopeCholesky::factor(&matrix, perm).map_err(|e| match e {
                    linalg::FactorError::NotPositiveDefinite { row, pivot } => {
                        SolverError::SingularSystem { row, pivot }
                    }
                })?,
            ),
            LinearSolver::ConjugateGradient => Factor::Iterative,
        };
        Ok(Self { matrix, factor })
    }

    fn solve(
        &self,
        b: &[f64],
        guess: &[f64],
        config: &SolverConfig,
    ) -> Result<Vec<f64>, SolverError> {
        let bnorm = norm(b);
        if bnorm == 0.0 {
            return Ok(vec![0.0; b.len()]);
        }
        match &self.factor {
            Factor::Direct(chol) => {
                let mut x = chol.solve(b);
                for _ in 0..4 {
                    let ax = self.matrix.mul_vec(&x);
                    let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
                    let rel = norm(&r) / bnorm;
                    if rel <= config.tolerance {
                        return Ok(x);
                    }
                    add(&mut x, &chol.solve(&r));
                }
                let rel = linalg::relative_residual(&self.matrix, &x, b);
                if rel <= config.tolerance {
                    Ok(x)
                } else {
                    Err(SolverError::Convergence { residual: rel })
                }
            }
            Factor::Iterative => {
                let mut x = guess.to_vec();
                let stats = conjugate_gradient(
                    &self.matrix,
                    b,
                    &mut x,
                    config.tolerance,
                    config.max_iterations,
                );
                if stats.relative_residual <= config.tolerance {
                    Ok(x)
                } else {
                    Err(SolverError::Convergence {
                        residual: stats.relative_residual,
                    })
                }
            }
        }
    }
}

/// Solves the forward problem on `mesh` with zero initial data.
pub fn solve_forward(
    mesh: &Arc<Mesh>,
    gamma: &ImpedanceSpec,
    g: &FluxSpec,
    grid: TimeGrid,
    config: &SolverConfig,
) -> Result<Field, SolverError> {
    let nv = mesh.num_vertices();
    let dt = grid.dt();
    let disc = Discretisation::new(mesh, g, gamma, config.source.as_deref());
    let perm = reverse_cuthill_mckee(&disc.pattern);
    let time_dependent = gamma.is_time_dependent();

    let system = |robin: &CsrMatrix, theta: f64| -> Result<SystemSolver, SolverError> {
        let a = CsrMatrix::combination(&[
            (1.0 / dt, &disc.mass),
            (theta, &disc.stiffness),
            (theta, robin),
        ]);
        SystemSolver::new(a, config.linear_solver, &perm)
    };

    let mut values = vec![0.0; (grid.steps + 1) * nv];
    let mut robin_now = disc.robin(0.0);
    let mut load_now = disc.load_total(0.0);
    let mut solver: Option<(f64, SystemSolver)> = None;
    let mut u = vec![0.0; nv];
    for n in 0..grid.steps {
        let theta = config.theta_at(n);
        let t_next = grid.time(n + 1);
        let robin_next = if time_dependent {
            disc.robin(t_next)
        } else {
            robin_now.clone()
        };
        let stale = match &solver {
            Some((th, _)) => *th != theta || time_dependent,
            None => true,
        };
        if stale {
            solver = Some((theta, system(&robin_next, theta)?));
        }
        let load_next = disc.load_total(t_next);
        let mu = disc.mass.mul_vec(&u);
        let mut rhs: Vec<f64> = mu.iter().map(|v| v / dt).collect();
        if theta < 1.0 {
            let ku = disc.stiffness.mul_vec(&u);
            let ru = robin_now.mul_vec(&u);
            for i in 0..nv {
                rhs[i] -= (1.0 - theta) * (ku[i] + ru[i]);
            }
        }
        for i in 0..nv {
            rhs[i] += theta * load_next[i] + (1.0 - theta) * load_now[i];
        }
        let next = solver
            .as_ref()
            .expect("system assembled")
            .1
            .solve(&rhs, &u, config)?;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(SolverError::NonFiniteValue { step: n + 1 });
        }
        values[(n + 1) * nv..(n + 2) * nv].copy_from_slice(&next);
        u = next;
        robin_now = robin_next;
        load_now = load_next;
    }
    Ok(Field::from_solution(
        mesh.clone(),
        grid,
        config.theta,
        config.startup_steps,
        values,
        ProblemData {
            flux: *g,
            impedance: *gamma,
            source: config.source.clone(),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_lookup() {
        let g = TimeGrid::new(1.0, 40);
        assert_eq!(g.index_of(0.25).unwrap(), 10);
        assert_eq!(g.index_of(1.0).unwrap(), 40);
        assert!(matches!(
            g.index_of(0.26),
            Err(SolverError::WindowOffGrid { .. })
        ));
        assert!(g.index_of(1.5).is_err());
    }
}
