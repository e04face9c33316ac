//! Output least squares for the bottom profile: Levenberg–Marquardt over the
//! coefficients of a few `cos²` bumps, with finite-difference Jacobians.

use crate::geometry::{cos2_bump, BoundaryProfile, DomainSpec};
use crate::solver::{FluxSpec, ImpedanceSpec, MeasurementTrace};

use super::{mesh_for, trace_pair, ExperimentError, RunSettings};

#[derive(Debug, Clone)]
pub struct ReconstructionConfig {
    pub settings: RunSettings,
    /// `(center, half_width)` of each basis bump.
    pub basis: Vec<(f64, f64)>,
    /// Weight of `∫ (p'')²` for the perturbation `p` from the initial profile.
    pub regularization: f64,
    pub max_iterations: usize,
    /// Finite-difference step for the coefficients.
    pub fd_step: f64,
}

impl ReconstructionConfig {
    pub fn new(domain: &DomainSpec, settings: RunSettings) -> Self {
        Self {
            settings,
            basis: bump_basis(domain.width(), 5),
            regularization: 1e-8,
            max_iterations: 20,
            fd_step: 1e-4 * domain.r0(),
        }
    }
}

/// `count` bumps of half-width `W/4` with centres evenly spread over
/// `[W/4, 3W/4]`; all vanish near the corners.
pub fn bump_basis(width: f64, count: usize) -> Vec<(f64, f64)> {
    let half = 0.25 * width;
    (0..count)
        .map(|k| {
            let s = if count == 1 {
                0.5
            } else {
                k as f64 / (count - 1) as f64
            };
            (width * (0.25 + 0.5 * s), half)
        })
        .collect()
}

/// Expected objective for pure measurement noise of standard deviation
/// `sigma` on both traces: `2 r0^{-4} σ² |Σ| (T − t1)`.
pub fn noise_floor(sigma: f64, sigma_length: f64, window: f64, r0: f64) -> f64 {
    2.0 * sigma * sigma * sigma_length * window / r0.powi(4)
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub profile: BoundaryProfile,
    pub coefficients: Vec<f64>,
    pub objective: f64,
    /// Objective after every accepted iterate, starting with the initial one.
    pub history: Vec<f64>,
    pub iterations: usize,
    /// The last step could not decrease the objective; the best iterate is
    /// returned.
    pub stalled: bool,
    pub evaluations: usize,
}

struct Problem<'a> {
    base: &'a DomainSpec,
    measured: (MeasurementTrace, MeasurementTrace),
    fluxes: (&'a FluxSpec, &'a FluxSpec),
    gamma: &'a ImpedanceSpec,
    config: &'a ReconstructionConfig,
    template: Option<MeasurementTrace>,
    weights: Vec<f64>,
    evaluations: usize,
}

impl Problem<'_> {
    fn profile(&self, c: &[f64]) -> BoundaryProfile {
        let w = self.base.width();
        let n = (w / (self.base.r0() / 20.0)).ceil() as usize;
        let initial = self.base.profile();
        let basis = &self.config.basis;
        BoundaryProfile::from_fn(w, n, |x| {
            initial.eval(x)
                + basis
                    .iter()
                    .zip(c)
                    .map(|(&(center, half), &ck)| ck * cos2_bump(x, center, half))
                    .sum::<f64>()
        })
    }

    /// Second differences of the perturbation, scaled so their squared sum
    /// approximates `α ∫ (p'')²`.
    fn penalty(&self, c: &[f64]) -> Vec<f64> {
        let w = self.base.width();
        let n = (w / (self.base.r0() / 5.0)).ceil() as usize;
        let s = w / n as f64;
        let p = |x: f64| -> f64 {
            self.config
                .basis
                .iter()
                .zip(c)
                .map(|(&(center, half), &ck)| ck * cos2_bump(x, center, half))
                .sum()
        };
        let scale = (self.config.regularization * s).sqrt();
        (1..n)
            .map(|i| {
                let x = i as f64 * s;
                scale * (p(x + s) - 2.0 * p(x) + p(x - s)) / (s * s)
            })
            .collect()
    }

    /// Residual vector, or `None` for an inadmissible profile.
    fn residual(&mut self, c: &[f64]) -> Result<Option<Vec<f64>>, ExperimentError> {
        let domain = match self.base.with_profile(self.profile(c)) {
            Ok(d) => d,
            Err(_) => return Ok(None),
        };
        let mesh = match mesh_for(&domain, self.config.settings.h) {
            Ok(m) => m,
            Err(ExperimentError::Mesh(_)) => return Ok(None),
            Err(e) => return Err(e),
        };
        self.evaluations += 1;
        let (a, b) = trace_pair(&mesh, self.fluxes, self.gamma, &self.config.settings)?;
        if self.template.is_none() {
            self.measured = (
                self.measured.0.resample_onto(&a),
                self.measured.1.resample_onto(&b),
            );
            self.weights = a.weights();
            self.template = Some(a.clone());
        }
        let scale = a.r0().powi(-2);
        let mut r = Vec::with_capacity(2 * self.weights.len());
        for (model, data) in [(&a, &self.measured.0), (&b, &self.measured.1)] {
            let model = if model.positions().len() == data.positions().len() {
                model.clone()
            } else {
                model.resample_onto(data)
            };
            for ((m, d), w) in model.values().iter().zip(data.values()).zip(&self.weights) {
                r.push(scale * w.sqrt() * (m - d));
            }
        }
        r.extend(self.penalty(c));
        Ok(Some(r))
    }
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|x| x * x).sum()
}

/// Solves the small symmetric positive definite system `a x = b` in place.
fn cholesky_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for j in 0..n {
        let mut d = a[j][j];
        for k in 0..j {
            d -= a[j][k] * a[j][k];
        }
        if !(d > 0.0) {
            return None;
        }
        let d = d.sqrt();
        a[j][j] = d;
        for i in j + 1..n {
            let mut s = a[i][j];
            for k in 0..j {
                s -= a[i][k] * a[j][k];
            }
            a[i][j] = s / d;
        }
    }
    for i in 0..n {
        for k in 0..i {
            b[i] -= a[i][k] * b[k];
        }
        b[i] /= a[i][i];
    }
    for i in (0..n).rev() {
        for k in i + 1..n {
            b[i] -= a[k][i] * b[k];
        }
        b[i] /= a[i][i];
    }
    Some(b)
}

/// Minimises the squared trace misfit of both fluxes plus the curvature
/// penalty over bump coefficients added to `base`'s profile. Inadmissible
/// trial profiles are rejected by the domain validation and the step is
/// shortened, so every iterate is a valid domain.
pub fn reconstruct_boundary(
    base: &DomainSpec,
    measurements: (&MeasurementTrace, &MeasurementTrace),
    fluxes: (&FluxSpec, &FluxSpec),
    gamma: &ImpedanceSpec,
    config: &ReconstructionConfig,
) -> Result<Reconstruction, ExperimentError> {
    let m = config.basis.len();
    if m == 0 {
        return Err(ExperimentError::InvalidSetting("empty basis".into()));
    }
    let mut problem = Problem {
        base,
        measured: (measurements.0.clone(), measurements.1.clone()),
        fluxes,
        gamma,
        config,
        template: None,
        weights: Vec::new(),
        evaluations: 0,
    };
    let mut c = vec![0.0; m];
    let mut r = problem.residual(&c)?.ok_or_else(|| {
        ExperimentError::InvalidSetting("initial profile is not admissible".into())
    })?;
    let mut f = sum_sq(&r);
    let mut history = vec![f];
    let mut mu = 0.0;
    let mut stalled = false;
    let mut iterations = 0;
    while iterations < config.max_iterations {
        // forward-difference Jacobian
        let mut jac = vec![vec![0.0; m]; r.len()];
        for k in 0..m {
            let mut ck = c.clone();
            ck[k] += config.fd_step;
            let rk = match problem.residual(&ck)? {
                Some(rk) => rk,
                None => {
                    ck[k] = c[k] - config.fd_step;
                    let rk = problem.residual(&ck)?.ok_or_else(|| {
                        ExperimentError::InvalidSetting("no admissible difference step".into())
                    })?;
                    rk.iter().zip(&r).map(|(a, b)| b - a + b).collect()
                }
            };
            for (row, (a, b)) in jac.iter_mut().zip(rk.iter().zip(&r)) {
                row[k] = (a - b) / config.fd_step;
            }
        }
        let mut jtj = vec![vec![0.0; m]; m];
        let mut grad = vec![0.0; m];
        for (row, ri) in jac.iter().zip(&r) {
            for a in 0..m {
                grad[a] += row[a] * ri;
                for b in 0..m {
                    jtj[a][b] += row[a] * row[b];
                }
            }
        }
        if grad.iter().all(|g| g.abs() <= 1e-14 * (1.0 + f)) {
            break;
        }
        let diag_max = (0..m).map(|a| jtj[a][a]).fold(0.0, f64::max);
        if mu == 0.0 {
            mu = 1e-6 * diag_max;
        }
        let mut accepted = None;
        for _ in 0..12 {
            let mut a = jtj.clone();
            for (k, row) in a.iter_mut().enumerate() {
                row[k] += mu * row[k].max(1e-12 * diag_max) + 1e-300;
            }
            let Some(step) = cholesky_solve(a, grad.iter().map(|g| -g).collect()) else {
                mu *= 10.0;
                continue;
            };
            let trial: Vec<f64> = c.iter().zip(&step).map(|(a, b)| a + b).collect();
            match problem.residual(&trial)? {
                Some(rt) if sum_sq(&rt) < f => {
                    accepted = Some((trial, rt, step));
                    break;
                }
                _ => mu *= 10.0,
            }
        }
        let Some((trial, rt, step)) = accepted else {
            stalled = true;
            break;
        };
        let ft = sum_sq(&rt);
        let decrease = (f - ft) / f;
        c = trial;
        r = rt;
        f = ft;
        history.push(f);
        mu = (mu / 3.0).max(1e-15 * diag_max);
        iterations += 1;
        let step_size = step.iter().map(|s| s.abs()).fold(0.0, f64::max);
        if decrease < 1e-10 || step_size <= 1e-12 * base.r0() {
            break;
        }
    }
    Ok(Reconstruction {
        profile: problem.profile(&c),
        coefficients: c,
        objective: f,
        history,
        iterations,
        stalled,
        evaluations: problem.evaluations,
    })
}
