//! Impedance recovery `γ̂ = −(∂u/∂ν)/u` on `I` and its comparison across
//! domains.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::analysis::InequalityReport;
use crate::geometry::{distance_report, DomainSpec, Point};
use crate::mesh::BoundaryPart;
use crate::solver::{normal_derivative, solve_forward, Field, FluxSpec, ImpedanceSpec};

use super::{distance_resolution, mesh_for, ExperimentError, PerturbationFamily, RunSettings};

/// Recovered impedance at the vertices of `I`, one row per time step in
/// `[t1, T]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpedanceRecord {
    pub points: Vec<Point>,
    /// Vertex lies in `I^{r0}` (at distance at least `r0` from `A`).
    pub interior: Vec<bool>,
    /// Representative time of each row.
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub t1: f64,
    pub horizon: f64,
    /// Smallest θ-averaged `u` on `I` over the rows.
    pub b0: f64,
}

impl ImpedanceRecord {
    pub fn rows(&self) -> usize {
        self.times.len()
    }

    pub fn value(&self, row: usize, i: usize) -> f64 {
        self.values[row * self.points.len() + i]
    }

    /// Rows whose time lies strictly inside `(t1, T)`.
    pub fn inner_rows(&self) -> impl Iterator<Item = usize> + '_ {
        let tol = 1e-9 * self.horizon;
        (0..self.rows())
            .filter(move |&n| self.times[n] > self.t1 + tol && self.times[n] < self.horizon - tol)
    }

    /// `sup |γ̂ − γ|` over `I^{r0}` and the inner rows.
    pub fn sup_error(&self, gamma: &ImpedanceSpec) -> f64 {
        let mut sup = 0.0f64;
        for n in self.inner_rows() {
            for (i, &p) in self.points.iter().enumerate() {
                if self.interior[i] {
                    sup = sup.max((self.value(n, i) - gamma.eval(p, self.times[n])).abs());
                }
            }
        }
        sup
    }
}

/// Smallest `u/max u` on `I` accepted as a denominator.
const MIN_RATIO: f64 = 1e-12;

/// `γ̂ = −q/ū` at the vertices of `I`, where `q` is the variationally
/// recovered normal derivative and `ū` the θ-average of `u` on each step.
pub fn recover_impedance(u: &Field, t1: f64) -> Result<ImpedanceRecord, ExperimentError> {
    let grid = u.grid();
    let first = grid.index_of(t1)?;
    let q = normal_derivative(u, BoundaryPart::Inaccessible);
    let verts = q.vertices().to_vec();
    let points = q.points();
    let domain = u.mesh().domain();
    let r0 = domain.r0();
    let interior = points
        .iter()
        .map(|&p| domain.distance_to_accessible(p) >= r0 * (1.0 - 1e-12))
        .collect();
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut b0 = f64::INFINITY;
    let mut top = 0.0f64;
    for n in first..grid.steps {
        let th = q.theta(n);
        let (u0, u1) = (u.step(n), u.step(n + 1));
        let qrow = q.row(n);
        times.push(q.row_time(n));
        for (k, &v) in verts.iter().enumerate() {
            let ubar = th * u1[v] + (1.0 - th) * u0[v];
            b0 = b0.min(ubar);
            top = top.max(ubar.abs());
            values.push(-qrow[k] / ubar);
        }
    }
    if !(b0 > MIN_RATIO * top) {
        return Err(ExperimentError::DenominatorTooSmall { min: b0 });
    }
    Ok(ImpedanceRecord {
        points,
        interior,
        times,
        values,
        t1,
        horizon: grid.horizon,
        b0,
    })
}

/// `sup |γ̂2(Q, t) − γ̂1(P, t)|` over `P ∈ I1^{r0}`, its nearest `Q ∈ I2^{r0}`
/// within `2d`, and rows strictly inside `(t1, T)`. Reports `lhs` = the
/// supremum, `rhs = d`.
pub fn impedance_stability_check(
    rec1: &ImpedanceRecord,
    rec2: &ImpedanceRecord,
    d: f64,
) -> Result<InequalityReport, ExperimentError> {
    let same_times = rec1.times.len() == rec2.times.len()
        && rec1
            .times
            .iter()
            .zip(&rec2.times)
            .all(|(a, b)| (a - b).abs() <= 1e-9 * rec1.horizon);
    if !same_times {
        return Err(ExperimentError::IncompatibleRecords(
            "time rows differ".into(),
        ));
    }
    let radius = 2.0 * d;
    let slack = 1e-12 * (1.0 + radius);
    let mut pairs = Vec::new();
    for (i, &p) in rec1.points.iter().enumerate() {
        if !rec1.interior[i] {
            continue;
        }
        let nearest = rec2
            .points
            .iter()
            .enumerate()
            .filter(|(j, _)| rec2.interior[*j])
            .map(|(j, q)| (j, p.distance(*q)))
            .min_by(|a, b| a.1.total_cmp(&b.1));
        if let Some((j, dist)) = nearest {
            if dist <= radius + slack {
                pairs.push((i, j));
            }
        }
    }
    if pairs.is_empty() {
        return Err(ExperimentError::NoMatchedPairs { radius });
    }
    let mut sup = 0.0f64;
    for n in rec1.inner_rows() {
        for &(i, j) in &pairs {
            sup = sup.max((rec2.value(n, j) - rec1.value(n, i)).abs());
        }
    }
    Ok(InequalityReport {
        check: "impedance".into(),
        params: vec![("d".into(), d), ("pairs".into(), pairs.len() as f64)],
        lhs: sup,
        rhs: d,
        constant: if d > 0.0 { sup / d } else { f64::NAN },
        exponent: None,
        pass: sup.is_finite(),
    })
}

/// Rows `p_index,x,y,t,gamma,interior`.
pub fn impedance_csv(rec: &ImpedanceRecord) -> String {
    let mut out = String::from("p_index,x,y,t,gamma,interior\n");
    for n in 0..rec.rows() {
        for (i, p) in rec.points.iter().enumerate() {
            let _ = writeln!(
                out,
                "{i},{:.9e},{:.9e},{:.9e},{:.9e},{}",
                p.x,
                p.y,
                rec.times[n],
                rec.value(n, i),
                rec.interior[i]
            );
        }
    }
    out
}

/// One amplitude of an impedance sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpedanceSweepRecord {
    pub delta: f64,
    pub d_h: f64,
    pub report: Result<InequalityReport, String>,
}

/// Recovers the impedance on the base domain and on every perturbed domain
/// (same flux and impedance) and compares them with matching radius `2 d_H`.
pub fn run_impedance_sweep(
    base: &DomainSpec,
    family: &PerturbationFamily,
    g: &FluxSpec,
    gamma: &ImpedanceSpec,
    settings: &RunSettings,
) -> Result<Vec<ImpedanceSweepRecord>, ExperimentError> {
    let grid = settings.grid();
    let recover = |domain: &DomainSpec| -> Result<ImpedanceRecord, ExperimentError> {
        let mesh = mesh_for(domain, settings.h)?;
        let u = solve_forward(&mesh, gamma, g, grid, &settings.solver)?;
        recover_impedance(&u, g.t1)
    };
    let reference = recover(base)?;
    let one = |delta: f64| -> Result<(f64, InequalityReport), ExperimentError> {
        let other = family.domain(base, delta)?;
        let d_h = distance_report(base, &other, distance_resolution(delta, base.r0()))?.d_h;
        let rec = recover(&other)?;
        Ok((d_h, impedance_stability_check(&reference, &rec, d_h)?))
    };
    let run = || {
        family
            .amplitudes
            .par_iter()
            .map(|&delta| match one(delta) {
                Ok((d_h, report)) => ImpedanceSweepRecord {
                    delta,
                    d_h,
                    report: Ok(report),
                },
                Err(e) => ImpedanceSweepRecord {
                    delta,
                    d_h: f64::NAN,
                    report: Err(e.to_string()),
                },
            })
            .collect()
    };
    Ok(settings.pool()?.install(run))
}
