//! End-to-end experiments: stability sweeps over boundary perturbations,
//! logarithmic rate fits, impedance recovery and boundary reconstruction.

mod fit;
mod impedance;
mod reconstruct;

use std::fmt::Write as _;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use crate::analysis::AnalysisError;
use crate::geometry::{
    build_domain, cos2_bump, distance_report, AprioriConstants, BoundaryProfile, DomainSpec,
    GeometryError, SigmaArc,
};
use crate::mesh::{generate_mesh, refine, Mesh, MeshError};
use crate::solver::{
    boundary_trace, solve_forward, trace_distance, FluxSpec, ImpedanceSpec, MeasurementTrace,
    SolverConfig, SolverError, TimeGrid,
};

pub use fit::{fit_log_rate, RateFit, RATE_TOLERANCE};
pub use impedance::{
    impedance_csv, impedance_stability_check, recover_impedance, run_impedance_sweep,
    ImpedanceRecord, ImpedanceSweepRecord,
};
pub use reconstruct::{
    bump_basis, noise_floor, reconstruct_boundary, Reconstruction, ReconstructionConfig,
};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("rate fit needs at least 4 records with 0 < epsilon < 1 and d_H > 0, found {found}")]
    InsufficientPoints { found: usize },
    #[error("rate fit is degenerate: zero variance in log|log epsilon|")]
    DegenerateFit,
    #[error("u = {min:.3e} on I is too small to recover the impedance")]
    DenominatorTooSmall { min: f64 },
    #[error("no vertex pairs within the matching radius {radius:.3e}")]
    NoMatchedPairs { radius: f64 },
    #[error("impedance records are incompatible: {0}")]
    IncompatibleRecords(String),
    #[error("invalid experiment setting: {0}")]
    InvalidSetting(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("worker pool: {0}")]
    Pool(String),
}

/// `W = 1`, `H = 1/2`, flat bottom, `r0 = 0.1`, `L = 1`, `M = 100`,
/// `Σ = [0.3, 0.7]`.
pub fn default_domain() -> DomainSpec {
    build_domain(
        BoundaryProfile::flat(1.0, 0.0),
        1.0,
        0.5,
        SigmaArc {
            start: 0.3,
            end: 0.7,
        },
        AprioriConstants {
            r0: 0.1,
            lipschitz: 1.0,
            area_bound: 100.0,
        },
    )
    .expect("default domain is valid")
}

/// Flux pair on `[0, 1]` with `t1 = 1/4`: `g` is steady and vanishes within
/// `r0` of the bottom, `g̃ = g·(1 + ramp)`.
pub fn default_fluxes(r0: f64) -> (FluxSpec, FluxSpec) {
    let g = FluxSpec::new(1.0, r0, 0.25, 1.0)
        .lifted(0.0)
        .with_bounds(5.0, r0);
    let gt = g.modulated(crate::solver::FluxModulation::TimeRamp { kappa: 1.0 });
    (g, gt)
}

/// Constant impedance `0.5/r0`.
pub fn default_impedance(r0: f64) -> ImpedanceSpec {
    ImpedanceSpec::constant(0.5 / r0)
}

/// Discretisation and execution settings shared by the experiments.
#[derive(Debug, Clone)]
pub struct RunSettings {
    pub h: f64,
    pub steps: usize,
    pub horizon: f64,
    pub solver: SolverConfig,
    pub workers: usize,
}

impl RunSettings {
    /// `h = r0/4` and `dt = h` on `[0, horizon]`.
    pub fn coarse(r0: f64, horizon: f64) -> Self {
        let h = 0.25 * r0;
        Self {
            h,
            steps: (horizon / h).round() as usize,
            horizon,
            solver: SolverConfig::default(),
            workers: 0,
        }
    }

    /// `h = r0/8`, `dt = h`, Crank–Nicolson with two backward Euler start-up
    /// steps. Used for reconstruction, where the model error has to stay
    /// below the signal of the unknown perturbation.
    pub fn accurate(r0: f64, horizon: f64) -> Self {
        let h = 0.125 * r0;
        Self {
            h,
            steps: (horizon / h).round() as usize,
            horizon,
            solver: SolverConfig {
                theta: 0.5,
                startup_steps: 2,
                ..SolverConfig::default()
            },
            workers: 0,
        }
    }

    /// Same scheme on half the time step.
    pub fn halved_step(&self) -> Self {
        Self {
            steps: 2 * self.steps,
            ..self.clone()
        }
    }

    pub fn grid(&self) -> TimeGrid {
        TimeGrid::new(self.horizon, self.steps)
    }

    pub(crate) fn pool(&self) -> Result<rayon::ThreadPool, ExperimentError> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| ExperimentError::Pool(e.to_string()))
    }
}

/// Shape of a single perturbation mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModeShape {
    /// `cos²` bump of unit height.
    Bump { center: f64, half_width: f64 },
    /// `sin²(kπx/W)`, vanishing at both corners with zero slope.
    Sine { wavenumber: usize, width: f64 },
}

impl ModeShape {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            ModeShape::Bump { center, half_width } => cos2_bump(x, center, half_width),
            ModeShape::Sine { wavenumber, width } => (wavenumber as f64 * std::f64::consts::PI * x
                / width)
                .sin()
                .powi(2),
        }
    }
}

/// `φ_δ = φ_base + δ ψ` for a decreasing list of amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationFamily {
    pub base: BoundaryProfile,
    pub mode: ModeShape,
    pub amplitudes: Vec<f64>,
}

impl PerturbationFamily {
    /// `count` amplitudes halving from `first`.
    pub fn halving(base: BoundaryProfile, mode: ModeShape, first: f64, count: usize) -> Self {
        let amplitudes = (0..count).map(|k| first * 0.5f64.powi(k as i32)).collect();
        Self {
            base,
            mode,
            amplitudes,
        }
    }

    /// Default single-mode family on `domain`: a bump centred under `Σ` with
    /// half-width `W/4`, 8 amplitudes halving from `0.08 r0`.
    pub fn single_mode(domain: &DomainSpec) -> Self {
        let w = domain.width();
        Self::halving(
            domain.profile().clone(),
            ModeShape::Bump {
                center: 0.5 * w,
                half_width: 0.25 * w,
            },
            0.08 * domain.r0(),
            8,
        )
    }

    /// Profile resampled at spacing `r0/20` so the mode is resolved.
    pub fn profile(&self, delta: f64, r0: f64) -> BoundaryProfile {
        let w = self.base.width();
        let n = (w / (r0 / 20.0)).ceil() as usize;
        BoundaryProfile::from_fn(w, n, |x| self.base.eval(x) + delta * self.mode.eval(x))
    }

    pub fn domain(&self, base: &DomainSpec, delta: f64) -> Result<DomainSpec, GeometryError> {
        base.with_profile(self.profile(delta, base.r0()))
    }
}

/// One amplitude of a stability sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityRecord {
    pub delta: f64,
    /// Larger of the two flux-wise trace distances.
    pub epsilon: f64,
    pub epsilon_g: f64,
    pub epsilon_gt: f64,
    pub d_h: f64,
    pub d_m: f64,
    pub d_boundary: f64,
    pub r0: f64,
    pub runtime: f64,
    pub error: Option<String>,
}

impl StabilityRecord {
    pub const CSV_HEADER: &'static str = "delta,epsilon,d_H,d_m,d_boundary,runtime";

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{:.9e},{:.9e},{:.9e},{:.9e},{:.9e},{:.3}",
            self.delta, self.epsilon, self.d_h, self.d_m, self.d_boundary, self.runtime
        )
    }
}

/// Sampling resolution for the distances of a perturbation of size `delta`.
pub fn distance_resolution(delta: f64, r0: f64) -> f64 {
    (delta / 32.0).clamp(1e-6, r0 / 50.0)
}

pub(crate) fn mesh_for(domain: &DomainSpec, h: f64) -> Result<Arc<Mesh>, ExperimentError> {
    Ok(Arc::new(generate_mesh(domain, h)?))
}

/// Traces of both fluxes on `Σ × [t1, T]`.
pub(crate) fn trace_pair(
    mesh: &Arc<Mesh>,
    fluxes: (&FluxSpec, &FluxSpec),
    gamma: &ImpedanceSpec,
    settings: &RunSettings,
) -> Result<(MeasurementTrace, MeasurementTrace), ExperimentError> {
    let grid = settings.grid();
    let t1 = fluxes.0.t1;
    let mut out = Vec::with_capacity(2);
    for g in [fluxes.0, fluxes.1] {
        let u = solve_forward(mesh, gamma, g, grid, &settings.solver)?;
        out.push(boundary_trace(&u, t1, settings.horizon)?);
    }
    let b = out.pop().unwrap();
    let a = out.pop().unwrap();
    Ok((a, b))
}

/// Traces of both fluxes on `target`, computed one uniform refinement level
/// finer (in space and time) than `settings` describes, so that inverting
/// them on the `settings` mesh does not reuse the generating discretisation.
pub fn synthetic_measurements(
    target: &DomainSpec,
    fluxes: (&FluxSpec, &FluxSpec),
    gamma: &ImpedanceSpec,
    settings: &RunSettings,
) -> Result<(MeasurementTrace, MeasurementTrace), ExperimentError> {
    let mesh = Arc::new(refine(&generate_mesh(target, settings.h)?));
    trace_pair(&mesh, fluxes, gamma, &settings.halved_step())
}

/// Trace distance after resampling `b` onto the samples of `a` if needed.
pub(crate) fn distance_between(
    a: &MeasurementTrace,
    b: &MeasurementTrace,
) -> Result<f64, SolverError> {
    match trace_distance(a, b) {
        Ok(d) => Ok(d),
        Err(SolverError::IncompatibleTraces(_)) => trace_distance(a, &b.resample_onto(a)),
        Err(e) => Err(e),
    }
}

/// For every amplitude: four forward solves (two domains, two fluxes), the
/// trace distance `ε` and the three domain distances. A failing amplitude is
/// recorded with its error and the sweep continues. Records follow the order
/// of the family's amplitudes.
pub fn run_stability_sweep(
    base: &DomainSpec,
    family: &PerturbationFamily,
    fluxes: (&FluxSpec, &FluxSpec),
    gamma: &ImpedanceSpec,
    settings: &RunSettings,
) -> Result<Vec<StabilityRecord>, ExperimentError> {
    let r0 = base.r0();
    let base_mesh = mesh_for(base, settings.h)?;
    let (base_g, base_gt) = trace_pair(&base_mesh, fluxes, gamma, settings)?;
    let one = |delta: f64| -> Result<StabilityRecord, ExperimentError> {
        let start = Instant::now();
        let other = family.domain(base, delta)?;
        let dist = distance_report(base, &other, distance_resolution(delta, r0))?;
        let mesh = mesh_for(&other, settings.h)?;
        let (g, gt) = trace_pair(&mesh, fluxes, gamma, settings)?;
        let epsilon_g = distance_between(&base_g, &g)?;
        let epsilon_gt = distance_between(&base_gt, &gt)?;
        Ok(StabilityRecord {
            delta,
            epsilon: epsilon_g.max(epsilon_gt),
            epsilon_g,
            epsilon_gt,
            d_h: dist.d_h,
            d_m: dist.d_m,
            d_boundary: dist.d_boundary,
            r0,
            runtime: start.elapsed().as_secs_f64(),
            error: None,
        })
    };
    let run = || -> Vec<StabilityRecord> {
        family
            .amplitudes
            .par_iter()
            .map(|&delta| {
                one(delta).unwrap_or_else(|e| StabilityRecord {
                    delta,
                    epsilon: f64::NAN,
                    epsilon_g: f64::NAN,
                    epsilon_gt: f64::NAN,
                    d_h: f64::NAN,
                    d_m: f64::NAN,
                    d_boundary: f64::NAN,
                    r0,
                    runtime: 0.0,
                    error: Some(e.to_string()),
                })
            })
            .collect()
    };
    Ok(settings.pool()?.install(run))
}

/// Sweep table with the rate fit (if any) appended as `# key,value` lines.
pub fn sweep_csv(records: &[StabilityRecord], fit: Option<&RateFit>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{}", StabilityRecord::CSV_HEADER);
    for r in records {
        match &r.error {
            None => {
                let _ = writeln!(out, "{}", r.csv_row());
            }
            Some(e) => {
                let _ = writeln!(out, "{:.9e},NaN,NaN,NaN,NaN,0 # failed: {e}", r.delta);
            }
        }
    }
    if let Some(f) = fit {
        let _ = writeln!(out, "# fit,C,{:.9e}", f.c);
        let _ = writeln!(out, "# fit,beta,{:.9e}", f.beta);
        let _ = writeln!(out, "# fit,r_squared,{:.9e}", f.r_squared);
        let _ = writeln!(out, "# fit,envelope_C,{:.9e}", f.envelope_c);
        let _ = writeln!(out, "# fit,points,{}", f.points);
    }
    out
}
