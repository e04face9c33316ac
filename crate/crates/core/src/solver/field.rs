//! Discrete space-time fields and their measurement traces on `Σ`.

use std::fmt::Write as _;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::Point;
use crate::mesh::Mesh;

use super::data::{FluxSpec, ImpedanceSpec};
use super::{SolverError, TimeGrid, VerificationSource};

/// Data a field was computed from.
#[derive(Debug, Clone)]
pub struct ProblemData {
    pub flux: FluxSpec,
    pub impedance: ImpedanceSpec,
    pub source: Option<Arc<dyn VerificationSource>>,
}

/// Vertex values at every grid time, stored step-major.
#[derive(Debug, Clone)]
pub struct Field {
    mesh: Arc<Mesh>,
    grid: TimeGrid,
    theta: f64,
    startup_steps: usize,
    values: Vec<f64>,
    data: Option<ProblemData>,
}

impl Field {
    pub(crate) fn from_solution(
        mesh: Arc<Mesh>,
        grid: TimeGrid,
        theta: f64,
        startup_steps: usize,
        values: Vec<f64>,
        data: ProblemData,
    ) -> Self {
        Self {
            mesh,
            grid,
            theta,
            startup_steps,
            values,
            data: Some(data),
        }
    }

    /// Synthetic field from explicit values; panics on a size mismatch.
    pub fn from_values(mesh: Arc<Mesh>, grid: TimeGrid, theta: f64, values: Vec<f64>) -> Self {
        assert_eq!(
            values.len(),
            (grid.steps + 1) * mesh.num_vertices(),
            "field size does not match mesh and grid"
        );
        Self {
            mesh,
            grid,
            theta,
            startup_steps: 0,
            values,
            data: None,
        }
    }

    pub fn from_fn(mesh: Arc<Mesh>, grid: TimeGrid, f: impl Fn(Point, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity((grid.steps + 1) * mesh.num_vertices());
        for n in 0..=grid.steps {
            let t = grid.time(n);
            values.extend(mesh.vertices().iter().map(|&p| f(p, t)));
        }
        Self::from_values(mesh, grid, 1.0, values)
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn startup_steps(&self) -> usize {
        self.startup_steps
    }

    /// θ used for the step from `t_n` to `t_{n+1}`.
    pub fn theta_at(&self, n: usize) -> f64 {
        if n < self.startup_steps {
            1.0
        } else {
            self.theta
        }
    }

    pub fn data(&self) -> Option<&ProblemData> {
        self.data.as_ref()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Vertex values at step `n`.
    pub fn step(&self, n: usize) -> &[f64] {
        let nv = self.mesh.num_vertices();
        &self.values[n * nv..(n + 1) * nv]
    }

    pub fn scheme_label(&self) -> String {
        format!("theta={}", self.theta)
    }

    pub fn scaled(&self, factor: f64) -> Field {
        let mut f = self.clone();
        f.values.iter_mut().for_each(|v| *v *= factor);
        f
    }

    /// Minimum and maximum vertex value over grid times in `[t_start, t_end]`.
    pub fn range_over(&self, t_start: f64, t_end: f64) -> Result<(f64, f64), SolverError> {
        let (a, b) = (self.grid.index_of(t_start)?, self.grid.index_of(t_end)?);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for n in a..=b {
            for &v in self.step(n) {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        Ok((lo, hi))
    }

    /// Plain-text table `x y u` for step `n`.
    pub fn export_step(&self, n: usize) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# step {n} t={:.12e} {}",
            self.grid.time(n),
            self.scheme_label()
        );
        for (p, v) in self.mesh.vertices().iter().zip(self.step(n)) {
            let _ = writeln!(out, "{:.15e} {:.15e} {:.15e}", p.x, p.y, v);
        }
        out
    }
}

/// Samples of `u` on `Σ × [t_start, t_end]` on the P1 space-time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementTrace {
    positions: Vec<f64>,
    times: Vec<f64>,
    /// Time-major: `values[a * positions.len() + i]`.
    values: Vec<f64>,
    r0: f64,
}

/// Diagonal and super-diagonal of the 1D P1 mass matrix on `coords`.
fn tridiagonal_mass(coords: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = coords.len();
    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n.saturating_sub(1)];
    for k in 0..n.saturating_sub(1) {
        let h = coords[k + 1] - coords[k];
        diag[k] += h / 3.0;
        diag[k + 1] += h / 3.0;
        off[k] = h / 6.0;
    }
    (diag, off)
}

fn tridiagonal_apply(diag: &[f64], off: &[f64], x: &[f64]) -> Vec<f64> {
    let n = diag.len();
    (0..n)
        .map(|i| {
            let mut v = diag[i] * x[i];
            if i > 0 {
                v += off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                v += off[i] * x[i + 1];
            }
            v
        })
        .collect()
}

fn interpolation_weights(coords: &[f64], x: f64) -> (usize, f64) {
    let n = coords.len();
    if n == 1 {
        return (0, 0.0);
    }
    let k = match coords.binary_search_by(|c| c.total_cmp(&x)) {
        Ok(k) => k.min(n - 2),
        Err(k) => k.saturating_sub(1).min(n - 2),
    };
    let s = ((x - coords[k]) / (coords[k + 1] - coords[k])).clamp(0.0, 1.0);
    (k, s)
}

impl MeasurementTrace {
    pub fn new(positions: Vec<f64>, times: Vec<f64>, values: Vec<f64>, r0: f64) -> Self {
        assert_eq!(values.len(), positions.len() * times.len());
        Self {
            positions,
            times,
            values,
            r0,
        }
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    pub fn value(&self, time_index: usize, position_index: usize) -> f64 {
        self.values[time_index * self.positions.len() + position_index]
    }

    /// Lumped quadrature weights per sample; they sum to `|Σ|·(t_end − t_start)`.
    pub fn weights(&self) -> Vec<f64> {
        let (dx, ox) = tridiagonal_mass(&self.positions);
        let (dt, ot) = tridiagonal_mass(&self.times);
        let wx = tridiagonal_apply(&dx, &ox, &vec![1.0; dx.len()]);
        let wt = tridiagonal_apply(&dt, &ot, &vec![1.0; dt.len()]);
        wt.iter()
            .flat_map(|a| wx.iter().map(move |b| a * b))
            .collect()
    }

    /// Exact `∫∫ u_h²` of the bilinear interpolant.
    pub fn squared_norm(&self) -> f64 {
        squared_norm_of(&self.positions, &self.times, &self.values)
    }

    /// Bilinear interpolation at `(x, t)`.
    pub fn interpolate(&self, x: f64, t: f64) -> f64 {
        let (i, s) = interpolation_weights(&self.positions, x);
        let (a, r) = interpolation_weights(&self.times, t);
        let np = self.positions.len();
        let v = |a: usize, i: usize| self.values[a * np + i];
        let i1 = (i + 1).min(np - 1);
        let a1 = (a + 1).min(self.times.len() - 1);
        (1.0 - r) * ((1.0 - s) * v(a, i) + s * v(a, i1))
            + r * ((1.0 - s) * v(a1, i) + s * v(a1, i1))
    }

    /// This trace interpolated onto the sample grid of `template`.
    pub fn resample_onto(&self, template: &MeasurementTrace) -> MeasurementTrace {
        let values = template
            .times
            .iter()
            .flat_map(|&t| {
                template
                    .positions
                    .iter()
                    .map(move |&x| self.interpolate(x, t))
            })
            .collect();
        MeasurementTrace::new(
            template.positions.clone(),
            template.times.clone(),
            values,
            self.r0,
        )
    }

    /// Adds independent zero-mean uniform noise with standard deviation `sigma`.
    pub fn with_noise(&self, sigma: f64, seed: u64) -> MeasurementTrace {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let half = sigma * 3f64.sqrt();
        let mut out = self.clone();
        for v in &mut out.values {
            *v += rng.gen_range(-half..=half);
        }
        out
    }

    fn check_compatible(&self, other: &MeasurementTrace) -> Result<(), SolverError> {
        let close = |a: &[f64], b: &[f64]| {
            a.len() == b.len()
                && a.iter()
                    .zip(b)
                    .all(|(x, y)| (x - y).abs() <= 1e-12 * (1.0 + x.abs()))
        };
        if !close(&self.positions, &other.positions) {
            return Err(SolverError::IncompatibleTraces(format!(
                "Σ discretisations differ ({} and {} samples)",
                self.positions.len(),
                other.positions.len()
            )));
        }
        if !close(&self.times, &other.times) {
            return Err(SolverError::IncompatibleTraces(format!(
                "time windows differ ({} and {} samples)",
                self.times.len(),
                other.times.len()
            )));
        }
        if (self.r0 - other.r0).abs() > 1e-14 * self.r0 {
            return Err(SolverError::IncompatibleTraces(format!(
                "r0 differs: {} and {}",
                self.r0, other.r0
            )));
        }
        Ok(())
    }

    pub fn difference(&self, other: &MeasurementTrace) -> Result<MeasurementTrace, SolverError> {
        self.check_compatible(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(MeasurementTrace::new(
            self.positions.clone(),
            self.times.clone(),
            values,
            self.r0,
        ))
    }
}

fn squared_norm_of(positions: &[f64], times: &[f64], values: &[f64]) -> f64 {
    let np = positions.len();
    let (dx, ox) = tridiagonal_mass(positions);
    let (dt, ot) = tridiagonal_mass(times);
    let rows: Vec<&[f64]> = values.chunks(np).collect();
    let mx: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| tridiagonal_apply(&dx, &ox, r))
        .collect();
    let inner =
        |a: usize, b: usize| -> f64 { rows[b].iter().zip(&mx[a]).map(|(u, v)| u * v).sum() };
    let mut total = 0.0;
    for a in 0..times.len() {
        total += dt[a] * inner(a, a);
        if a + 1 < times.len() {
            total += 2.0 * ot[a] * inner(a, a + 1);
        }
    }
    total
}

/// Restriction of `field` to the `Σ` vertices over the grid window
/// `[t_start, t_end]`.
pub fn boundary_trace(
    field: &Field,
    t_start: f64,
    t_end: f64,
) -> Result<MeasurementTrace, SolverError> {
    let grid = field.grid();
    let a = grid.index_of(t_start)?;
    let b = grid.index_of(t_end)?;
    let mesh = field.mesh();
    let sigma = mesh.sigma_vertices();
    let positions: Vec<f64> = sigma.iter().map(|&v| mesh.vertices()[v].x).collect();
    let times: Vec<f64> = (a..=b).map(|n| grid.time(n)).collect();
    let values = (a..=b)
        .flat_map(|n| {
            let row = field.step(n);
            sigma.iter().map(move |&v| row[v])
        })
        .collect();
    Ok(MeasurementTrace::new(
        positions,
        times,
        values,
        mesh.domain().r0(),
    ))
}

/// `r0^{-2}·‖a − b‖_{L²(Σ × window)}`.
pub fn trace_distance(a: &MeasurementTrace, b: &MeasurementTrace) -> Result<f64, SolverError> {
    let d = a.difference(b)?;
    Ok(d.squared_norm().max(0.0).sqrt() / (a.r0 * a.r0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn norm_of_constant_and_linear() {
        let positions = vec![0.3, 0.35, 0.5, 0.7];
        let times = vec![0.25, 0.5, 0.75, 1.0];
        let ones = MeasurementTrace::new(positions.clone(), times.clone(), vec![1.0; 16], 1.0);
        assert!((ones.squared_norm() - 0.4 * 0.75).abs() < 1e-14);
        let w: f64 = ones.weights().iter().sum();
        assert!((w - 0.4 * 0.75).abs() < 1e-14);
        // u = x·t is bilinear, reproduced exactly
        let values = times
            .iter()
            .flat_map(|&t| positions.iter().map(move |&x| x * t))
            .collect();
        let tr = MeasurementTrace::new(positions, times, values, 1.0);
        let exact = (0.7f64.powi(3) - 0.3f64.powi(3)) / 3.0 * (1.0 - 0.25f64.powi(3)) / 3.0;
        assert!((tr.squared_norm() - exact).abs() < 1e-14);
    }

    #[test]
    fn incompatible_traces_are_rejected() {
        let a = MeasurementTrace::new(vec![0.0, 1.0], vec![0.0, 1.0], vec![0.0; 4], 1.0);
        let b = MeasurementTrace::new(vec![0.0, 0.5, 1.0], vec![0.0, 1.0], vec![0.0; 6], 1.0);
        assert!(matches!(
            trace_distance(&a, &b),
            Err(SolverError::IncompatibleTraces(_))
        ));
    }

    #[test]
    fn resampling_reproduces_bilinear_data() {
        let f = |x: f64, t: f64| 1.0 + 2.0 * x - t + x * t;
        let coarse_x = vec![0.0, 0.5, 1.0];
        let coarse_t = vec![0.0, 1.0];
        let fine_x = vec![0.0, 0.2, 0.5, 0.9, 1.0];
        let fine_t = vec![0.0, 0.4, 1.0];
        let mk = |xs: &Vec<f64>, ts: &Vec<f64>| {
            let v = ts
                .iter()
                .flat_map(|&t| xs.iter().map(move |&x| f(x, t)))
                .collect();
            MeasurementTrace::new(xs.clone(), ts.clone(), v, 1.0)
        };
        let a = mk(&coarse_x, &coarse_t);
        let b = mk(&fine_x, &fine_t);
        let r = a.resample_onto(&b);
        assert!(trace_distance(&r, &b).unwrap() < 1e-14);
    }
}
