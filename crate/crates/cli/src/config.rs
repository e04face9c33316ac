//! Experiment configuration: a sectioned TOML file.
//!
//! ```toml
//! [domain]
//! width = 1.0
//! height = 0.5
//! r0 = 0.1
//! lipschitz = 1.0
//! area_bound = 100.0
//! sigma_start = 0.3
//! sigma_end = 0.7
//! # profile_file = "bottom.txt"
//!
//! [flux]
//! amplitude = 1.0
//! t1 = 0.25
//! horizon = 1.0
//! lipschitz_bound = 5.0
//! phi1 = 0.1
//!
//! [impedance]
//! kind = "constant"
//! value = 5.0
//!
//! [solver]
//! h = 0.025
//!
//! [experiment]
//! mode = "validate"
//! ```
//!
//! Omitted keys take the defaults documented on each field.

use std::fmt;
use std::path::{Path, PathBuf};

use corrolab::experiments::{ModeShape, PerturbationFamily, RunSettings};
use corrolab::geometry::{
    build_domain, read_profile, AprioriConstants, BoundaryProfile, DomainSpec, GeometryError,
    SigmaArc,
};
use corrolab::solver::{
    FluxModulation, FluxSpec, ImpedanceKind, ImpedanceSpec, LinearSolver, SolverConfig,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Validate,
    Solve,
    Sweep,
    Inequalities,
    Reconstruct,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Mode::Validate => "validate",
            Mode::Solve => "solve",
            Mode::Sweep => "sweep",
            Mode::Inequalities => "inequalities",
            Mode::Reconstruct => "reconstruct",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domain: DomainBlock,
    pub flux: FluxBlock,
    pub impedance: ImpedanceBlock,
    #[serde(default)]
    pub solver: SolverBlock,
    pub experiment: ExperimentBlock,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainBlock {
    pub width: f64,
    pub height: f64,
    pub r0: f64,
    /// `L`.
    pub lipschitz: f64,
    /// `M`.
    pub area_bound: f64,
    pub sigma_start: f64,
    pub sigma_end: f64,
    /// Profile table relative to the configuration file; flat bottom if
    /// absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FluxShape {
    Uniform,
    Lifted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModulationKind {
    Steady,
    TimeRamp,
    SpaceTimeRamp,
    Dip,
}

/// The pair is `g` (steady) and `g̃ = g·modulation`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluxBlock {
    pub amplitude: f64,
    pub t1: f64,
    /// `T`.
    pub horizon: f64,
    /// `E`.
    pub lipschitz_bound: f64,
    /// `Φ1`.
    pub phi1: f64,
    /// Default `lifted`: zero within `floor + r0` of the bottom.
    #[serde(default = "default_shape")]
    pub shape: FluxShape,
    #[serde(default)]
    pub floor: f64,
    /// Default `time_ramp`.
    #[serde(default = "default_modulation")]
    pub modulation: ModulationKind,
    /// Ramp strength; default 1.
    #[serde(default = "one")]
    pub kappa: f64,
    /// Centre of the spatial ramp or dip; default `W/2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<f64>,
    /// Spatial ramp width or dip half-width; default `W` or `W/4`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spread: Option<f64>,
    /// Dip depth in `(0, 1)`; default 0.5.
    #[serde(default = "half")]
    pub depth: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImpedanceShape {
    Constant,
    SineX,
    SineXt,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImpedanceBlock {
    pub kind: ImpedanceShape,
    /// Constant value, or the base of the sine kinds.
    pub value: f64,
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default)]
    pub omega: f64,
    /// `γ̄`; default `|value| + |amplitude|`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_bar: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearSolverKind {
    Direct,
    Cg,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverBlock {
    /// Mesh size; default `r0/4`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    /// Time step; default `h`, rounded so that it divides `T`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default = "one")]
    pub theta: f64,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub startup_steps: usize,
    #[serde(default = "default_linear")]
    pub linear_solver: LinearSolverKind,
}

impl Default for SolverBlock {
    fn default() -> Self {
        Self {
            h: None,
            dt: None,
            theta: 1.0,
            tolerance: default_tolerance(),
            startup_steps: 0,
            linear_solver: default_linear(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    Bump,
    Sine,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentBlock {
    pub mode: Mode,
    #[serde(default = "default_family")]
    pub family: FamilyKind,
    /// Explicit amplitudes; otherwise `count` values halving from
    /// `first_amplitude` (default `0.08 r0`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub amplitudes: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub first_amplitude: Option<f64>,
    #[serde(default = "default_count")]
    pub count: usize,
    /// Bump centre and half-width; default `W/2`, `W/4`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
    #[serde(default = "default_wavenumber")]
    pub wavenumber: usize,
    /// 0 uses every core.
    #[serde(default)]
    pub workers: usize,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    /// Two-sphere radii `R`; default `0.64 r0`, `0.8 r0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<f64>>,
    /// Two-sphere times `t0`; default `(t1 + T)/2` and `T`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    /// Reconstruction target amplitude; default `0.2 r0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_amplitude: Option<f64>,
    /// Standard deviation of the measurement noise.
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_basis")]
    pub basis_size: usize,
    #[serde(default = "default_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_regularization")]
    pub regularization: f64,
}

fn one() -> f64 {
    1.0
}
fn half() -> f64 {
    0.5
}
fn default_shape() -> FluxShape {
    FluxShape::Lifted
}
fn default_modulation() -> ModulationKind {
    ModulationKind::TimeRamp
}
fn default_tolerance() -> f64 {
    1e-10
}
fn default_linear() -> LinearSolverKind {
    LinearSolverKind::Direct
}
fn default_family() -> FamilyKind {
    FamilyKind::Bump
}
fn default_count() -> usize {
    8
}
fn default_wavenumber() -> usize {
    1
}
fn default_output() -> PathBuf {
    PathBuf::from("runs")
}
fn default_basis() -> usize {
    5
}
fn default_iterations() -> usize {
    20
}
fn default_regularization() -> f64 {
    1e-8
}

/// Configuration problem, reported with exit status 2.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigParseError {
    /// Dotted key, e.g. `solver.h`.
    pub field: Option<String>,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "configuration error")?;
        if let Some(line) = self.line {
            write!(f, " at line {line}")?;
        }
        if let Some(field) = &self.field {
            write!(f, " in `{field}`")?;
        }
        write!(f, ": {}", self.message)
    }
}

impl std::error::Error for ConfigParseError {}

/// Configuration with every default filled in and the domain built.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: ExperimentConfig,
    pub domain: DomainSpec,
    /// Bottom profile as configured, also when it is not admissible.
    pub profile: BoundaryProfile,
    /// Set when the domain assumptions fail; `domain` then has a flat bottom
    /// so that the other checks can still run.
    pub domain_error: Option<GeometryError>,
    pub fluxes: (FluxSpec, FluxSpec),
    pub gamma: ImpedanceSpec,
    pub settings: RunSettings,
    pub family: PerturbationFamily,
}

pub fn parse(text: &str) -> Result<ExperimentConfig, ConfigParseError> {
    toml::from_str(text).map_err(|e| ConfigParseError {
        field: None,
        line: e.span().map(|s| line_of(text, s.start)),
        message: e.message().trim().to_string(),
    })
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// Line of `key = ...` inside `[section]`, if written explicitly.
fn locate(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = name.trim().to_string();
        } else if current == section {
            if let Some((lhs, _)) = line.split_once('=') {
                if lhs.trim() == key {
                    return Some(k + 1);
                }
            }
        }
    }
    None
}

struct Checker<'a> {
    text: &'a str,
}

impl Checker<'_> {
    fn fail(&self, field: &str, message: String) -> ConfigParseError {
        let (section, key) = field.split_once('.').unwrap_or(("", field));
        ConfigParseError {
            field: Some(field.to_string()),
            line: locate(self.text, section, key),
            message,
        }
    }

    fn positive(&self, field: &str, v: f64) -> Result<(), ConfigParseError> {
        if v.is_finite() && v > 0.0 {
            Ok(())
        } else {
            Err(self.fail(field, format!("must be positive, got {v}")))
        }
    }

    fn non_negative(&self, field: &str, v: f64) -> Result<(), ConfigParseError> {
        if v.is_finite() && v >= 0.0 {
            Ok(())
        } else {
            Err(self.fail(field, format!("must be non-negative, got {v}")))
        }
    }

    fn finite(&self, field: &str, v: f64) -> Result<(), ConfigParseError> {
        if v.is_finite() {
            Ok(())
        } else {
            Err(self.fail(field, format!("must be finite, got {v}")))
        }
    }
}

/// Checks every field and builds the solver-side objects. `source` is the
/// configuration text, used for line numbers; `base_dir` resolves
/// `profile_file`.
pub fn resolve(
    config: ExperimentConfig,
    source: &str,
    base_dir: &Path,
) -> Result<Resolved, ConfigParseError> {
    let ck = Checker { text: source };
    let d = &config.domain;
    for (name, v) in [
        ("domain.width", d.width),
        ("domain.height", d.height),
        ("domain.r0", d.r0),
        ("domain.lipschitz", d.lipschitz),
        ("domain.area_bound", d.area_bound),
    ] {
        ck.positive(name, v)?;
    }
    ck.non_negative("domain.sigma_start", d.sigma_start)?;
    ck.positive("domain.sigma_end", d.sigma_end)?;
    if d.sigma_end <= d.sigma_start || d.sigma_end > d.width {
        return Err(ck.fail(
            "domain.sigma_end",
            format!(
                "Σ = ({}, {}) must be a non-empty sub-interval of [0, {}]",
                d.sigma_start, d.sigma_end, d.width
            ),
        ));
    }
    let r0 = d.r0;
    let profile = match &d.profile_file {
        None => BoundaryProfile::flat(d.width, 0.0),
        Some(rel) => read_profile_file(&ck, d, &base_dir.join(rel))?,
    };

    let f = &config.flux;
    ck.positive("flux.amplitude", f.amplitude)?;
    ck.positive("flux.t1", f.t1)?;
    ck.positive("flux.horizon", f.horizon)?;
    if f.t1 >= f.horizon {
        return Err(ck.fail("flux.t1", format!("must be below horizon = {}", f.horizon)));
    }
    ck.positive("flux.lipschitz_bound", f.lipschitz_bound)?;
    ck.positive("flux.phi1", f.phi1)?;
    ck.non_negative("flux.floor", f.floor)?;
    ck.finite("flux.kappa", f.kappa)?;
    if let Some(c) = f.center {
        ck.finite("flux.center", c)?;
    }
    if let Some(s) = f.spread {
        ck.positive("flux.spread", s)?;
    }
    if !(f.depth > 0.0 && f.depth < 1.0) {
        return Err(ck.fail("flux.depth", format!("must lie in (0, 1), got {}", f.depth)));
    }
    let g = match f.shape {
        FluxShape::Uniform => FluxSpec::new(f.amplitude, r0, f.t1, f.horizon),
        FluxShape::Lifted => FluxSpec::new(f.amplitude, r0, f.t1, f.horizon).lifted(f.floor),
    }
    .with_bounds(f.lipschitz_bound, f.phi1);
    let center = f.center.unwrap_or(0.5 * d.width);
    let modulation = match f.modulation {
        ModulationKind::Steady => FluxModulation::Steady,
        ModulationKind::TimeRamp => FluxModulation::TimeRamp { kappa: f.kappa },
        ModulationKind::SpaceTimeRamp => FluxModulation::SpaceTimeRamp {
            kappa: f.kappa,
            center,
            width: f.spread.unwrap_or(d.width),
        },
        ModulationKind::Dip => FluxModulation::Dip {
            center,
            half_width: f.spread.unwrap_or(0.25 * d.width),
            depth: f.depth,
        },
    };
    let gt = g.modulated(modulation);

    let im = &config.impedance;
    ck.finite("impedance.value", im.value)?;
    ck.finite("impedance.amplitude", im.amplitude)?;
    ck.finite("impedance.omega", im.omega)?;
    let gamma_bar = im.gamma_bar.unwrap_or(im.value.abs() + im.amplitude.abs());
    ck.non_negative("impedance.gamma_bar", gamma_bar)?;
    let kind = match im.kind {
        ImpedanceShape::Constant => ImpedanceKind::Constant(im.value),
        ImpedanceShape::SineX => ImpedanceKind::SineX {
            base: im.value,
            amplitude: im.amplitude,
            width: d.width,
        },
        ImpedanceShape::SineXt => ImpedanceKind::SineXT {
            base: im.value,
            amplitude: im.amplitude,
            width: d.width,
            omega: im.omega,
        },
    };
    let gamma = ImpedanceSpec::new(kind, gamma_bar);

    let s = &config.solver;
    let h = s.h.unwrap_or(0.25 * r0);
    ck.positive("solver.h", h)?;
    if h > 0.25 * r0 * (1.0 + 1e-12) {
        return Err(ck.fail(
            "solver.h",
            format!("must not exceed r0/4 = {}, got {h}", 0.25 * r0),
        ));
    }
    let dt = s.dt.unwrap_or(h);
    ck.positive("solver.dt", dt)?;
    if !(s.theta >= 0.5 && s.theta <= 1.0) {
        return Err(ck.fail(
            "solver.theta",
            format!("must lie in [1/2, 1], got {}", s.theta),
        ));
    }
    ck.positive("solver.tolerance", s.tolerance)?;
    let steps = ((f.horizon / dt).round() as usize).max(1);
    let settings = RunSettings {
        h,
        steps,
        horizon: f.horizon,
        solver: SolverConfig {
            theta: s.theta,
            tolerance: s.tolerance,
            startup_steps: s.startup_steps,
            linear_solver: match s.linear_solver {
                LinearSolverKind::Direct => LinearSolver::Direct,
                LinearSolverKind::Cg => LinearSolver::ConjugateGradient,
            },
            ..SolverConfig::default()
        },
        workers: config.experiment.workers,
    };

    let e = &config.experiment;
    let amplitudes = match &e.amplitudes {
        Some(list) => {
            if list.is_empty() {
                return Err(ck.fail("experiment.amplitudes", "must not be empty".into()));
            }
            for &a in list {
                ck.positive("experiment.amplitudes", a)?;
            }
            list.clone()
        }
        None => {
            let first = e.first_amplitude.unwrap_or(0.08 * r0);
            ck.positive("experiment.first_amplitude", first)?;
            if e.count == 0 {
                return Err(ck.fail("experiment.count", "must be positive".into()));
            }
            (0..e.count)
                .map(|k| first * 0.5f64.powi(k as i32))
                .collect()
        }
    };
    let mode = match e.family {
        FamilyKind::Bump => {
            let center = e.center.unwrap_or(0.5 * d.width);
            let half_width = e.half_width.unwrap_or(0.25 * d.width);
            ck.positive("experiment.center", center)?;
            ck.positive("experiment.half_width", half_width)?;
            ModeShape::Bump { center, half_width }
        }
        FamilyKind::Sine => {
            if e.wavenumber == 0 {
                return Err(ck.fail("experiment.wavenumber", "must be positive".into()));
            }
            ModeShape::Sine {
                wavenumber: e.wavenumber,
                width: d.width,
            }
        }
    };
    for list in [
        ("experiment.radii", &e.radii),
        ("experiment.times", &e.times),
    ] {
        if let (name, Some(values)) = list {
            if values.is_empty() {
                return Err(ck.fail(name, "must not be empty".into()));
            }
            for &v in values {
                ck.positive(name, v)?;
            }
        }
    }
    if let Some(a) = e.target_amplitude {
        ck.positive("experiment.target_amplitude", a)?;
    }
    ck.non_negative("experiment.noise", e.noise)?;
    if e.basis_size == 0 {
        return Err(ck.fail("experiment.basis_size", "must be positive".into()));
    }
    ck.non_negative("experiment.regularization", e.regularization)?;

    let constants = AprioriConstants {
        r0,
        lipschitz: d.lipschitz,
        area_bound: d.area_bound,
    };
    let sigma = SigmaArc {
        start: d.sigma_start,
        end: d.sigma_end,
    };
    let (domain, domain_error) =
        match build_domain(profile.clone(), d.width, d.height, sigma, constants) {
            Ok(domain) => (domain, None),
            Err(err) => {
                let flat = BoundaryProfile::flat(d.width, 0.0);
                match build_domain(flat, d.width, d.height, sigma, constants) {
                    Ok(domain) => (domain, Some(err)),
                    // The failure does not come from the profile: nothing
                    // downstream can run.
                    Err(_) => (unchecked_domain(&ck, &err)?, Some(err)),
                }
            }
        };
    let family = PerturbationFamily {
        base: domain.profile().clone(),
        mode,
        amplitudes,
    };

    let (t1, horizon, width, spread, modulation_kind) =
        (f.t1, f.horizon, d.width, f.spread, f.modulation);
    let mut config = config;
    config.solver.h = Some(h);
    config.solver.dt = Some(horizon / steps as f64);
    config.impedance.gamma_bar = Some(gamma_bar);
    match modulation_kind {
        ModulationKind::SpaceTimeRamp => {
            config.flux.center = Some(center);
            config.flux.spread = Some(spread.unwrap_or(width));
        }
        ModulationKind::Dip => {
            config.flux.center = Some(center);
            config.flux.spread = Some(spread.unwrap_or(0.25 * width));
        }
        _ => {}
    }
    let e = &mut config.experiment;
    e.amplitudes = Some(family.amplitudes.clone());
    e.first_amplitude = None;
    if let ModeShape::Bump { center, half_width } = family.mode {
        e.center = Some(center);
        e.half_width = Some(half_width);
    }
    e.radii.get_or_insert_with(|| vec![0.64 * r0, 0.8 * r0]);
    e.times
        .get_or_insert_with(|| vec![0.5 * (t1 + horizon), horizon]);
    e.target_amplitude.get_or_insert(0.2 * r0);

    Ok(Resolved {
        config,
        domain,
        profile,
        domain_error,
        fluxes: (g, gt),
        gamma,
        settings,
        family,
    })
}

fn unchecked_domain(ck: &Checker, err: &GeometryError) -> Result<DomainSpec, ConfigParseError> {
    let field = match err {
        GeometryError::SigmaBallViolated(_) => "domain.sigma_end",
        GeometryError::AreaBoundViolated { .. } => "domain.area_bound",
        GeometryError::BoundaryOverlap { .. } => "domain.height",
        _ => "domain",
    };
    Err(ck.fail(field, format!("domain cannot be built: {err}")))
}

fn read_profile_file(
    ck: &Checker,
    d: &DomainBlock,
    path: &Path,
) -> Result<BoundaryProfile, ConfigParseError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        ck.fail(
            "domain.profile_file",
            format!("cannot read {}: {e}", path.display()),
        )
    })?;
    let (header, profile) = read_profile(&text)
        .map_err(|e| ck.fail("domain.profile_file", format!("{}: {e}", path.display())))?;
    for (name, file, config) in [
        ("domain.r0", header.r0, d.r0),
        ("domain.lipschitz", header.lipschitz, d.lipschitz),
        ("domain.area_bound", header.area_bound, d.area_bound),
        ("domain.width", header.width, d.width),
        ("domain.height", header.height, d.height),
    ] {
        if (file - config).abs() > 1e-12 * config.abs().max(1.0) {
            return Err(ck.fail(
                name,
                format!("{config} disagrees with {file} in {}", path.display()),
            ));
        }
    }
    Ok(profile)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[domain]
width = 1.0
height = 0.5
r0 = 0.1
lipschitz = 1.0
area_bound = 100.0
sigma_start = 0.3
sigma_end = 0.7

[flux]
amplitude = 1.0
t1 = 0.25
horizon = 1.0
lipschitz_bound = 5.0
phi1 = 0.1

[impedance]
kind = "constant"
value = 5.0

[solver]
h = 0.025

[experiment]
mode = "validate"
"#;

    #[test]
    fn minimal_config_resolves_with_defaults() {
        let cfg = parse(MINIMAL).unwrap();
        let r = resolve(cfg, MINIMAL, Path::new(".")).unwrap();
        assert!(r.domain_error.is_none());
        assert_eq!(r.settings.steps, 40);
        assert_eq!(r.family.amplitudes.len(), 8);
        assert!((r.family.amplitudes[0] - 0.008).abs() < 1e-15);
        assert_eq!(r.gamma.gamma_bar, 5.0);
    }

    #[test]
    fn negative_value_names_field_and_line() {
        let text = MINIMAL.replace("h = 0.025", "h = -0.025");
        let err = resolve(parse(&text).unwrap(), &text, Path::new(".")).unwrap_err();
        assert_eq!(err.field.as_deref(), Some("solver.h"));
        assert_eq!(err.line, locate(&text, "solver", "h"));
        assert!(err.line.is_some());
    }

    #[test]
    fn unknown_key_is_rejected_with_line() {
        let text = MINIMAL.replace("value = 5.0", "value = 5.0\nvalu = 1.0");
        let err = parse(&text).unwrap_err();
        assert!(err.message.contains("valu"), "{err}");
        assert_eq!(err.line, locate(&text, "impedance", "valu"));
    }

    #[test]
    fn unknown_mode_is_rejected() {
        let text = MINIMAL.replace("\"validate\"", "\"plot\"");
        assert!(parse(&text).is_err());
    }

    #[test]
    fn missing_profile_file_is_a_config_error() {
        let text = MINIMAL.replace(
            "sigma_end = 0.7",
            "sigma_end = 0.7\nprofile_file = \"nope.txt\"",
        );
        let err = resolve(parse(&text).unwrap(), &text, Path::new("/nonexistent")).unwrap_err();
        assert_eq!(err.field.as_deref(), Some("domain.profile_file"));
    }

    #[test]
    fn rough_profile_is_kept_as_a_failed_assumption() {
        let dir = tempfile::tempdir().unwrap();
        let profile = BoundaryProfile::from_fn(1.0, 100, |x| 0.05 * (40.0 * x).sin());
        let header = corrolab::geometry::ProfileHeader {
            r0: 0.1,
            lipschitz: 1.0,
            area_bound: 100.0,
            width: 1.0,
            height: 0.5,
        };
        std::fs::write(
            dir.path().join("p.txt"),
            corrolab::geometry::write_profile(&profile, &header),
        )
        .unwrap();
        let text = MINIMAL.replace(
            "sigma_end = 0.7",
            "sigma_end = 0.7\nprofile_file = \"p.txt\"",
        );
        let r = resolve(parse(&text).unwrap(), &text, dir.path()).unwrap();
        assert!(matches!(
            r.domain_error,
            Some(GeometryError::ProfileTooRough { .. })
        ));
    }
}
