//! One function per mode. Each returns its checks and report files; the
//! driver writes them out and derives the exit status.

use std::fmt::Write as _;
use std::sync::Arc;

use corrolab::analysis::{
    compute_lambda, harnack_check, harnack_windows, lambda_mass_lower_bound, lower_bound_check,
    trace_inequality_check, two_sphere_grid, two_sphere_one_cylinder_check, InequalityReport,
    REPORT_HEADER,
};
use corrolab::experiments::{
    bump_basis, distance_resolution, fit_log_rate, impedance_csv, noise_floor,
    reconstruct_boundary, recover_impedance, run_impedance_sweep, run_stability_sweep, sweep_csv,
    synthetic_measurements, ReconstructionConfig,
};
use corrolab::geometry::{
    build_domain, distance_report, write_profile, AprioriConstants, GeometryError, Point,
    ProfileHeader,
};
use corrolab::mesh::{generate_mesh, Mesh};
use corrolab::solver::{
    boundary_trace, energy_balance_residual, flux_pair_checks, impedance_checks, ratio_deviation,
    solve_forward, Field, FluxSpec,
};

use crate::config::{Mode, Resolved};
use crate::report::Check;

/// Largest per-step relative energy-balance residual accepted by `solve`.
pub const ENERGY_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Default)]
pub struct Outcome {
    pub checks: Vec<Check>,
    /// `(file name, contents)`.
    pub files: Vec<(String, String)>,
}

impl Outcome {
    fn file(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }
}

pub fn run(r: &Resolved, mode: Mode) -> Result<Outcome, String> {
    let mut out = Outcome {
        checks: assumption_checks(r),
        files: Vec::new(),
    };
    if mode == Mode::Validate {
        return Ok(out);
    }
    if let Some(e) = &r.domain_error {
        out.checks
            .push(Check::new(mode.to_string(), false, format!("not run: {e}")));
        return Ok(out);
    }
    match mode {
        Mode::Validate => {}
        Mode::Solve => solve(r, &mut out)?,
        Mode::Sweep => sweep(r, &mut out)?,
        Mode::Inequalities => inequalities(r, &mut out)?,
        Mode::Reconstruct => reconstruct(r, &mut out)?,
    }
    Ok(out)
}

/// (2a)–(2d), (3a)–(3g), (4a)–(4b).
pub fn assumption_checks(r: &Resolved) -> Vec<Check> {
    let mut checks = domain_checks(r);
    let (g, gt) = &r.fluxes;
    checks.extend(
        flux_pair_checks(&r.domain, g, gt)
            .checks
            .into_iter()
            .map(Check::from),
    );
    checks.extend(
        impedance_checks(&r.domain, &r.gamma, r.settings.horizon)
            .into_iter()
            .map(Check::from),
    );
    checks
}

/// Domain construction stops at the first failed assumption, so each one is
/// evaluated here on its own.
fn domain_checks(r: &Resolved) -> Vec<Check> {
    let d = &r.config.domain;
    let p = &r.profile;
    let r0 = d.r0;
    let spacing = r0 / 50.0;

    let area = d.width * d.height - p.integral();
    let area_max = d.area_bound * r0 * r0;
    let (_, top) = p.range(((d.width / spacing).ceil() as usize).max(64));
    let limit = d.height - r0;
    let dd = p.max_second_difference(spacing);
    let dd_max = d.lipschitz / r0;

    let relaxed = AprioriConstants {
        r0,
        lipschitz: f64::INFINITY,
        area_bound: f64::INFINITY,
    };
    let sigma = r.domain.sigma();
    let ball = match &r.domain_error {
        None => Check::new(
            "2d",
            true,
            format!("B_r0 around the centre of Σ meets ∂Ω only in Σ (r0 = {r0})"),
        ),
        Some(GeometryError::SigmaBallViolated(m)) => Check::new("2d", false, m.clone()),
        Some(_) => match build_domain(p.clone(), d.width, d.height, sigma, relaxed) {
            Ok(_) => Check::new(
                "2d",
                true,
                format!("B_r0 around the centre of Σ meets ∂Ω only in Σ (r0 = {r0})"),
            ),
            Err(GeometryError::SigmaBallViolated(m)) => Check::new("2d", false, m),
            Err(e) => Check::new("2d", false, format!("not evaluated: {e}")),
        },
    };
    vec![
        Check::new(
            "2a",
            area <= area_max,
            format!("|Ω| = {area:.6e} against M r0² = {area_max:.6e}"),
        ),
        Check::new(
            "2b",
            top < limit,
            format!("max profile {top:.6e} against H - r0 = {limit:.6e}"),
        ),
        Check::new(
            "2c",
            dd <= dd_max,
            format!("max second divided difference {dd:.6e} against L/r0 = {dd_max:.6e}"),
        ),
        ball,
    ]
}

fn mesh(r: &Resolved) -> Result<Arc<Mesh>, String> {
    generate_mesh(&r.domain, r.settings.h)
        .map(Arc::new)
        .map_err(|e| format!("mesh generation failed: {e}"))
}

fn forward(r: &Resolved, m: &Arc<Mesh>, g: &FluxSpec) -> Result<Field, String> {
    let s = &r.settings;
    solve_forward(m, &r.gamma, g, s.grid(), &s.solver)
        .map_err(|e| format!("forward solve failed: {e}"))
}

fn solve(r: &Resolved, out: &mut Outcome) -> Result<(), String> {
    let m = mesh(r)?;
    let (g, gt) = &r.fluxes;
    let steps = r.settings.steps;
    let mut traces = String::from("flux,x,t,u\n");
    for (name, flux) in [("g", g), ("gt", gt)] {
        let u = forward(r, &m, flux)?;
        let lower = lower_bound_check(&u, flux.t1, flux.phi1).map_err(|e| e.to_string())?;
        let mut check = Check::from(&lower);
        check.label = format!("lower_bound[{name}]");
        out.checks.push(check);
        let worst = energy_balance_residual(&u, flux, &r.gamma)
            .into_iter()
            .fold(0.0, f64::max);
        out.checks.push(Check::new(
            format!("energy_balance[{name}]"),
            worst <= ENERGY_TOLERANCE,
            format!("max relative per-step residual {worst:.3e} against {ENERGY_TOLERANCE:.0e}"),
        ));
        let trace = boundary_trace(&u, flux.t1, flux.horizon).map_err(|e| e.to_string())?;
        for (k, &t) in trace.times().iter().enumerate() {
            for (i, &x) in trace.positions().iter().enumerate() {
                let _ = writeln!(traces, "{name},{x:.9e},{t:.9e},{:.9e}", trace.value(k, i));
            }
        }
        out.file(&format!("final_{name}.txt"), u.export_step(steps));
        if name == "g" {
            let rec = recover_impedance(&u, flux.t1).map_err(|e| e.to_string())?;
            let err = rec.sup_error(&r.gamma);
            out.checks.push(Check::new(
                "impedance_recovery",
                err.is_finite(),
                format!("sup |recovered - gamma| = {err:.6e} at interior points of I^r0"),
            ));
            out.file("impedance.csv", impedance_csv(&rec));
        }
    }
    out.file("mesh.txt", m.export_text());
    out.file("traces.csv", traces);
    Ok(())
}

fn report_check(name: &str, result: &Result<InequalityReport, String>) -> Check {
    match result {
        Ok(rep) => {
            let mut c = Check::from(rep);
            c.label = name.to_string();
            c
        }
        Err(e) => Check::new(name, false, format!("error: {e}")),
    }
}

fn inequalities(r: &Resolved, out: &mut Outcome) -> Result<(), String> {
    let m = mesh(r)?;
    let (g, gt) = &r.fluxes;
    let (u, ut) = (forward(r, &m, g)?, forward(r, &m, gt)?);
    let lam = compute_lambda(&u, &ut, g.t1).map_err(|e| e.to_string())?;
    let d = &r.domain;
    let r0 = d.r0();
    let x = d.sigma_center().x;
    let on_bottom = Point::new(x, d.bottom(x));
    let inside = Point::new(x, 0.5 * (d.bottom(x) + d.top()));
    let rho = (0.8 * r0).min(0.5 * d.distance_to_boundary(inside));
    let (early, late) = harnack_windows(g.t1, g.horizon);
    let phi0 = ratio_deviation(d, g, gt);
    let e = |x: corrolab::analysis::AnalysisError| x.to_string();

    let mut rows: Vec<(String, Result<InequalityReport, String>)> = vec![
        (
            "lower_bound[g]".into(),
            lower_bound_check(&u, g.t1, g.phi1).map_err(e),
        ),
        (
            "lower_bound[gt]".into(),
            lower_bound_check(&ut, gt.t1, gt.phi1).map_err(e),
        ),
        ("trace".into(), Ok(trace_inequality_check(&lam))),
        (
            "harnack".into(),
            harnack_check(&u, on_bottom, 0.8 * r0, early, late).map_err(e),
        ),
        (
            "lambda_mass".into(),
            lambda_mass_lower_bound(&lam, inside, rho, phi0).map_err(e),
        ),
    ];
    let experiment = &r.config.experiment;
    let radii = experiment.radii.as_deref().unwrap_or_default();
    let times = experiment.times.as_deref().unwrap_or_default();
    for (k, params) in two_sphere_grid(on_bottom, true, radii, times)
        .iter()
        .enumerate()
    {
        let result = two_sphere_one_cylinder_check(&lam, params)
            .map_err(e)
            .map(|mut rep| {
                rep.pass &= rep.exponent.is_some_and(|t| t > 0.0 && t < 1.0);
                rep
            });
        rows.push((format!("two_sphere[{k}]"), result));
    }

    let mut csv = format!("{REPORT_HEADER}\n");
    for (name, result) in &rows {
        out.checks.push(report_check(name, result));
        match result {
            Ok(rep) => {
                let _ = writeln!(csv, "{}", rep.csv_row());
            }
            Err(_) => {
                let _ = writeln!(csv, "{name},,NaN,NaN,NaN,,false");
            }
        }
    }
    out.file("inequalities.csv", csv);
    Ok(())
}

fn sweep(r: &Resolved, out: &mut Outcome) -> Result<(), String> {
    let (g, gt) = &r.fluxes;
    let s = &r.settings;
    let records = run_stability_sweep(&r.domain, &r.family, (g, gt), &r.gamma, s)
        .map_err(|e| e.to_string())?;
    let failed: Vec<String> = records
        .iter()
        .filter_map(|rec| {
            rec.error
                .as_ref()
                .map(|e| format!("delta {:.3e}: {e}", rec.delta))
        })
        .collect();
    out.checks.push(Check::new(
        "sweep_records",
        failed.is_empty(),
        if failed.is_empty() {
            format!("{} amplitudes computed", records.len())
        } else {
            failed.join("; ")
        },
    ));
    let fit = fit_log_rate(&records);
    out.checks.push(match &fit {
        Ok(f) => Check::new(
            "rate_fit",
            f.beta > 0.0 && f.envelope_c.is_finite(),
            format!(
                "C = {:.6e}, beta = {:.6e}, R² = {:.4}, envelope C = {:.6e} over {} points",
                f.c, f.beta, f.r_squared, f.envelope_c, f.points
            ),
        ),
        Err(e) => Check::new("rate_fit", false, e.to_string()),
    });
    out.file("sweep.csv", sweep_csv(&records, fit.as_ref().ok()));

    let base = forward(r, &mesh(r)?, g)?;
    let rec = recover_impedance(&base, g.t1).map_err(|e| e.to_string())?;
    out.file("impedance.csv", impedance_csv(&rec));
    let imp =
        run_impedance_sweep(&r.domain, &r.family, g, &r.gamma, s).map_err(|e| e.to_string())?;
    let mut csv = format!("delta,d_H,{REPORT_HEADER}\n");
    for row in &imp {
        let label = format!("impedance_stability[{:.3e}]", row.delta);
        out.checks.push(report_check(&label, &row.report));
        match &row.report {
            Ok(rep) => {
                let _ = writeln!(csv, "{:.9e},{:.9e},{}", row.delta, row.d_h, rep.csv_row());
            }
            Err(_) => {
                let _ = writeln!(
                    csv,
                    "{:.9e},NaN,impedance_stability,,NaN,NaN,NaN,,false",
                    row.delta
                );
            }
        }
    }
    out.file("impedance_sweep.csv", csv);
    Ok(())
}

fn reconstruct(r: &Resolved, out: &mut Outcome) -> Result<(), String> {
    let (g, gt) = &r.fluxes;
    let d = &r.domain;
    let e = &r.config.experiment;
    let r0 = d.r0();
    let amplitude = e.target_amplitude.unwrap_or(0.2 * r0);
    let target = r
        .family
        .domain(d, amplitude)
        .map_err(|err| format!("target domain: {err}"))?;
    let (m1, m2) = synthetic_measurements(&target, (g, gt), &r.gamma, &r.settings)
        .map_err(|err| err.to_string())?;
    let (m1, m2) = if e.noise > 0.0 {
        (
            m1.with_noise(e.noise, e.seed),
            m2.with_noise(e.noise, e.seed.wrapping_add(1)),
        )
    } else {
        (m1, m2)
    };
    let mut cfg = ReconstructionConfig::new(d, r.settings.clone());
    cfg.basis = bump_basis(d.width(), e.basis_size);
    cfg.max_iterations = e.max_iterations;
    cfg.regularization = e.regularization;
    let rec = reconstruct_boundary(d, (&m1, &m2), (g, gt), &r.gamma, &cfg)
        .map_err(|err| err.to_string())?;
    let found = d
        .with_profile(rec.profile.clone())
        .map_err(|err| format!("reconstructed profile: {err}"))?;
    let res = distance_resolution(amplitude, r0);
    let before = distance_report(d, &target, res)
        .map_err(|err| err.to_string())?
        .d_h;
    let after = distance_report(&found, &target, res)
        .map_err(|err| err.to_string())?
        .d_h;

    let first = rec.history.first().copied().unwrap_or(f64::NAN);
    out.checks.push(Check::new(
        "objective_decrease",
        rec.objective <= first,
        format!(
            "objective {first:.6e} -> {:.6e} in {} iterations ({} evaluations{})",
            rec.objective,
            rec.iterations,
            rec.evaluations,
            if rec.stalled { ", stalled" } else { "" }
        ),
    ));
    out.checks.push(Check::new(
        "distance_halved",
        after <= 0.5 * before,
        format!("d_H to target {before:.6e} -> {after:.6e}"),
    ));
    if e.noise > 0.0 {
        let floor = noise_floor(e.noise, d.sigma().length(), g.horizon - g.t1, r0);
        out.checks.push(Check::new(
            "noise_floor",
            true,
            format!(
                "expected objective from noise alone {floor:.6e}, reached {:.6e}",
                rec.objective
            ),
        ));
    }

    let header = ProfileHeader {
        r0,
        lipschitz: d.constants().lipschitz,
        area_bound: d.constants().area_bound,
        width: d.width(),
        height: d.height(),
    };
    out.file(
        "reconstructed_profile.txt",
        write_profile(&rec.profile, &header),
    );
    out.file(
        "target_profile.txt",
        write_profile(target.profile(), &header),
    );
    let mut history = String::from("iteration,objective\n");
    for (k, f) in rec.history.iter().enumerate() {
        let _ = writeln!(history, "{k},{f:.9e}");
    }
    out.file("reconstruction.csv", history);
    let mut coefficients = String::from("center,half_width,coefficient\n");
    for ((c, w), a) in cfg.basis.iter().zip(&rec.coefficients) {
        let _ = writeln!(coefficients, "{c:.9e},{w:.9e},{a:.9e}");
    }
    out.file("coefficients.csv", coefficients);
    Ok(())
}
