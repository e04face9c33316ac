//! Boundary data: heat fluxes on `A` and surface impedances on `I`, with the
//! sampled assumption checks.

use crate::geometry::{cos2_bump, DomainSpec, Point};

use super::SolverError;

/// Spatial shape of a flux on `A`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FluxProfile {
    /// Constant on the whole accessible boundary.
    Uniform,
    /// Zero below height `floor + r0`, full above `floor + 2 r0`, linear in
    /// between. On the top side the flux is full.
    LiftedFromBottom { floor: f64 },
}

/// Multiplicative factor applied on top of the profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FluxModulation {
    Steady,
    /// `1 + κ·ramp(t)` with `ramp` rising linearly from 0 at `t1` to 1 at `T`.
    TimeRamp {
        kappa: f64,
    },
    /// `1 + κ·ramp(t)·(x − center)/width`.
    SpaceTimeRamp {
        kappa: f64,
        center: f64,
        width: f64,
    },
    /// `1 − depth·bump(x)` with a cos² bump on `[center ± half_width]`.
    Dip {
        center: f64,
        half_width: f64,
        depth: f64,
    },
}

/// Heat flux `g` on `A × [0, T]` together with its declared bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxSpec {
    pub amplitude: f64,
    pub profile: FluxProfile,
    pub modulation: FluxModulation,
    pub r0: f64,
    pub t1: f64,
    pub horizon: f64,
    /// Declared bound `E` on the r0-normalised `C^{0,1}` norm.
    pub lipschitz_bound: f64,
    /// Declared lower-bound constant `Φ1`.
    pub phi1: f64,
}

impl FluxSpec {
    pub fn new(amplitude: f64, r0: f64, t1: f64, horizon: f64) -> Self {
        Self {
            amplitude,
            profile: FluxProfile::Uniform,
            modulation: FluxModulation::Steady,
            r0,
            t1,
            horizon,
            lipschitz_bound: f64::INFINITY,
            phi1: 0.0,
        }
    }

    pub fn zero(r0: f64, horizon: f64) -> Self {
        Self::new(0.0, r0, 0.5 * horizon, horizon)
    }

    pub fn lifted(mut self, floor: f64) -> Self {
        self.profile = FluxProfile::LiftedFromBottom { floor };
        self
    }

    pub fn modulated(mut self, modulation: FluxModulation) -> Self {
        self.modulation = modulation;
        self
    }

    pub fn with_bounds(mut self, lipschitz_bound: f64, phi1: f64) -> Self {
        self.lipschitz_bound = lipschitz_bound;
        self.phi1 = phi1;
        self
    }

    pub fn scaled(mut self, factor: f64) -> Self {
        self.amplitude *= factor;
        self
    }

    pub fn ramp(&self, t: f64) -> f64 {
        if self.horizon <= self.t1 {
            return 0.0;
        }
        ((t - self.t1) / (self.horizon - self.t1)).clamp(0.0, 1.0)
    }

    pub fn cutoff(&self, p: Point) -> f64 {
        match self.profile {
            FluxProfile::Uniform => 1.0,
            FluxProfile::LiftedFromBottom { floor } => {
                ((p.y - floor - self.r0) / self.r0).clamp(0.0, 1.0)
            }
        }
    }

    pub fn factor(&self, p: Point, t: f64) -> f64 {
        match self.modulation {
            FluxModulation::Steady => 1.0,
            FluxModulation::TimeRamp { kappa } => 1.0 + kappa * self.ramp(t),
            FluxModulation::SpaceTimeRamp {
                kappa,
                center,
                width,
            } => 1.0 + kappa * self.ramp(t) * (p.x - center) / width,
            FluxModulation::Dip {
                center,
                half_width,
                depth,
            } => 1.0 - depth * cos2_bump(p.x, center, half_width),
        }
    }

    /// `g(p, t)` for `p` on the accessible boundary.
    pub fn eval(&self, p: Point, t: f64) -> f64 {
        if self.amplitude == 0.0 {
            return 0.0;
        }
        self.amplitude * self.cutoff(p) * self.factor(p, t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ImpedanceKind {
    Constant(f64),
    /// `base + amplitude·sin(π x / width)`.
    SineX {
        base: f64,
        amplitude: f64,
        width: f64,
    },
    /// `base + amplitude·sin(π x / width)·cos(ω t)`.
    SineXT {
        base: f64,
        amplitude: f64,
        width: f64,
        omega: f64,
    },
}

/// Surface impedance `γ` on `I × [0, T]` with its declared upper bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImpedanceSpec {
    pub kind: ImpedanceKind,
    pub gamma_bar: f64,
}

impl ImpedanceSpec {
    pub fn constant(gamma: f64) -> Self {
        Self {
            kind: ImpedanceKind::Constant(gamma),
            gamma_bar: gamma.max(0.0),
        }
    }

    pub fn new(kind: ImpedanceKind, gamma_bar: f64) -> Self {
        Self { kind, gamma_bar }
    }

    pub fn eval(&self, p: Point, t: f64) -> f64 {
        match self.kind {
            ImpedanceKind::Constant(g) => g,
            ImpedanceKind::SineX {
                base,
                amplitude,
                width,
            } => base + amplitude * (std::f64::consts::PI * p.x / width).sin(),
            ImpedanceKind::SineXT {
                base,
                amplitude,
                width,
                omega,
            } => base + amplitude * (std::f64::consts::PI * p.x / width).sin() * (omega * t).cos(),
        }
    }

    pub fn is_time_dependent(&self) -> bool {
        matches!(self.kind, ImpedanceKind::SineXT { amplitude, omega, .. } if amplitude != 0.0 && omega != 0.0)
    }

    pub fn is_zero(&self) -> bool {
        match self.kind {
            ImpedanceKind::Constant(g) => g == 0.0,
            ImpedanceKind::SineX {
                base, amplitude, ..
            }
            | ImpedanceKind::SineXT {
                base, amplitude, ..
            } => base == 0.0 && amplitude == 0.0,
        }
    }
}

/// Outcome of one sampled assumption check.
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionCheck {
    pub label: &'static str,
    pub pass: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FluxValidation {
    /// Declared Lipschitz bound.
    pub e: f64,
    /// Measured r0-normalised `C^{0,1}` norm, maximum over the pair.
    pub e_measured: f64,
    pub phi0: f64,
    pub phi1: f64,
    pub t1: f64,
    pub checks: Vec<AssumptionCheck>,
}

/// Points of `A` in path order: left lateral upward, top, right lateral
/// downward, at arc spacing at most `spacing`.
pub fn accessible_samples(domain: &DomainSpec, spacing: f64) -> Vec<Point> {
    let (l, r, top) = (domain.left(), domain.right(), domain.top());
    let (bl, br) = (domain.bottom(l), domain.bottom(r));
    let mut pts = Vec::new();
    let mut push_segment = |a: Point, b: Point, include_end: bool| {
        let n = ((a.distance(b) / spacing).ceil() as usize).max(1);
        let last = if include_end { n } else { n - 1 };
        for k in 0..=last {
            let s = k as f64 / n as f64;
            pts.push(Point::new(a.x + s * (b.x - a.x), a.y + s * (b.y - a.y)));
        }
    };
    push_segment(Point::new(l, bl), Point::new(l, top), false);
    push_segment(Point::new(l, top), Point::new(r, top), false);
    push_segment(Point::new(r, top), Point::new(r, br), true);
    pts
}

fn time_samples(horizon: f64, t1: f64, count: usize) -> Vec<f64> {
    let mut ts: Vec<f64> = (0..=count)
        .map(|k| horizon * k as f64 / count as f64)
        .collect();
    if t1 > 0.0 && t1 < horizon {
        ts.push(t1);
    }
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    ts
}

/// Sampled r0-normalised `C^{0,1}` norm: `sup|g| + r0·[g]` with the parabolic
/// seminorm `|Δg| / (|Δx|² + |Δt|)^{1/2}` over neighbouring samples.
pub fn sampled_lipschitz_norm(
    f: impl Fn(Point, f64) -> f64,
    points: &[Point],
    times: &[f64],
    r0: f64,
) -> f64 {
    let values: Vec<Vec<f64>> = times
        .iter()
        .map(|&t| points.iter().map(|&p| f(p, t)).collect())
        .collect();
    let mut sup = 0.0f64;
    let mut semi = 0.0f64;
    for (k, row) in values.iter().enumerate() {
        for (i, &v) in row.iter().enumerate() {
            sup = sup.max(v.abs());
            if i + 1 < row.len() {
                let d = points[i].distance(points[i + 1]);
                if d > 0.0 {
                    semi = semi.max((row[i + 1] - v).abs() / d);
                }
            }
            if k + 1 < values.len() {
                let dt = times[k + 1] - times[k];
                semi = semi.max((values[k + 1][i] - v).abs() / dt.sqrt());
            }
        }
    }
    sup + r0 * semi
}

const GAUSS4: [(f64, f64); 4] = [
    (-0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
    (-0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.339_981_043_584_856_3, 0.652_145_154_862_546_1),
    (0.861_136_311_594_052_6, 0.347_854_845_137_453_9),
];

/// Composite 4-point Gauss rule on `[a, b]` split at `breaks`, `n` panels per
/// piece. Returns `(node, weight)` pairs.
fn composite_gauss(a: f64, b: f64, breaks: &[f64], n: usize) -> Vec<(f64, f64)> {
    let mut cuts = vec![a, b];
    cuts.extend(breaks.iter().copied().filter(|&c| c > a && c < b));
    cuts.sort_by(f64::total_cmp);
    let mut out = Vec::new();
    for w in cuts.windows(2) {
        let h = (w[1] - w[0]) / n as f64;
        for k in 0..n {
            let lo = w[0] + k as f64 * h;
            for &(x, wt) in &GAUSS4 {
                out.push((lo + 0.5 * h * (x + 1.0), 0.5 * h * wt));
            }
        }
    }
    out
}

/// Quadrature nodes on `A` as `(point, weight)`, split at every kink of the
/// two fluxes.
fn accessible_quadrature(domain: &DomainSpec, fluxes: [&FluxSpec; 2]) -> Vec<(Point, f64)> {
    let (l, r, top) = (domain.left(), domain.right(), domain.top());
    let mut y_breaks = Vec::new();
    let mut x_breaks = Vec::new();
    for f in fluxes {
        if let FluxProfile::LiftedFromBottom { floor } = f.profile {
            y_breaks.extend([floor + f.r0, floor + 2.0 * f.r0]);
        }
        if let FluxModulation::Dip {
            center, half_width, ..
        } = f.modulation
        {
            x_breaks.extend([center - half_width, center, center + half_width]);
        }
    }
    let mut out = Vec::new();
    for (x, lo) in [(l, domain.bottom(l)), (r, domain.bottom(r))] {
        for (y, w) in composite_gauss(lo, top, &y_breaks, 64) {
            out.push((Point::new(x, y), w));
        }
    }
    for (x, w) in composite_gauss(l, r, &x_breaks, 128) {
        out.push((Point::new(x, top), w));
    }
    out
}

/// `Φ0 = r0^{-3/2}·‖g̃/g − mean‖_{L²}`, over the part of `A × [0, T]` where
/// `g > 0`.
pub fn ratio_deviation(domain: &DomainSpec, g: &FluxSpec, gt: &FluxSpec) -> f64 {
    let space = accessible_quadrature(domain, [g, gt]);
    let time = composite_gauss(0.0, g.horizon, &[g.t1, gt.t1], 64);
    let mut measure = 0.0;
    let mut first = 0.0;
    let mut samples = Vec::with_capacity(space.len() * time.len());
    for &(p, wp) in &space {
        for &(t, wt) in &time {
            let gv = g.eval(p, t);
            if gv > 0.0 {
                let ratio = gt.eval(p, t) / gv;
                let w = wp * wt;
                measure += w;
                first += w * ratio;
                samples.push((ratio, w));
            }
        }
    }
    if measure == 0.0 {
        return 0.0;
    }
    let mean = first / measure;
    let second: f64 = samples
        .iter()
        .map(|(ratio, w)| w * (ratio - mean).powi(2))
        .sum();
    g.r0.powf(-1.5) * second.sqrt()
}

/// Evaluates assumptions (3a)–(3g) on sample grids.
pub fn flux_pair_checks(domain: &DomainSpec, g: &FluxSpec, gt: &FluxSpec) -> FluxValidation {
    let r0 = domain.r0();
    let points = accessible_samples(domain, r0 / 50.0);
    let times = time_samples(g.horizon, g.t1, 200);
    let dist: Vec<f64> = points
        .iter()
        .map(|&p| domain.distance_to_inaccessible(p))
        .collect();
    let mut checks = Vec::new();

    let e_g = sampled_lipschitz_norm(|p, t| g.eval(p, t), &points, &times, r0);
    let e_gt = sampled_lipschitz_norm(|p, t| gt.eval(p, t), &points, &times, r0);
    let e_measured = e_g.max(e_gt);
    checks.push(AssumptionCheck {
        label: "3a",
        pass: e_measured.is_finite(),
        detail: format!("sampled C^0,1 norms {e_g:.6e}, {e_gt:.6e}"),
    });

    let mut support_violation = 0.0f64;
    for (p, &d) in points.iter().zip(&dist) {
        if d <= r0 {
            for &t in &times {
                support_violation = support_violation
                    .max(g.eval(*p, t).abs())
                    .max(gt.eval(*p, t).abs());
            }
        }
    }
    checks.push(AssumptionCheck {
        label: "3b",
        pass: support_violation == 0.0,
        detail: format!("max |g| within r0 of I: {support_violation:.3e}"),
    });

    let inner: Vec<usize> = (0..points.len()).filter(|&i| dist[i] > 2.0 * r0).collect();
    checks.push(AssumptionCheck {
        label: "3c",
        pass: !inner.is_empty(),
        detail: format!("{} samples of A farther than 2 r0 from I", inner.len()),
    });

    checks.push(AssumptionCheck {
        label: "3d",
        pass: e_measured <= g.lipschitz_bound && e_measured <= gt.lipschitz_bound,
        detail: format!(
            "measured {e_measured:.6e} against E = {:.6e}",
            g.lipschitz_bound
        ),
    });

    let mut early = 0.0f64;
    let mut scale = 0.0f64;
    for &t in times.iter().filter(|&&t| t <= g.t1) {
        for &p in &points {
            let (a, b) = (g.eval(p, t), gt.eval(p, t));
            early = early.max((a - b).abs());
            scale = scale.max(a.abs());
        }
    }
    checks.push(AssumptionCheck {
        label: "3e",
        pass: early <= 1e-14 * scale.max(1.0) && (g.t1 - gt.t1).abs() <= 1e-14 * g.horizon,
        detail: format!("max |g - g~| for t <= t1: {early:.3e}"),
    });

    let phi0 = ratio_deviation(domain, g, gt);
    checks.push(AssumptionCheck {
        label: "3f",
        pass: phi0 > PROPORTIONAL_THRESHOLD,
        detail: format!("Phi0 = {phi0:.6e}"),
    });

    let floor = g.phi1 / r0;
    let mut min_inner = f64::INFINITY;
    for &i in &inner {
        for &t in &times {
            min_inner = min_inner.min(g.eval(points[i], t));
        }
    }
    checks.push(AssumptionCheck {
        label: "3g",
        pass: min_inner >= floor * (1.0 - 1e-12),
        detail: format!("min g on A^2r0 = {min_inner:.6e}, Phi1/r0 = {floor:.6e}"),
    });

    FluxValidation {
        e: g.lipschitz_bound,
        e_measured,
        phi0,
        phi1: g.phi1,
        t1: g.t1,
        checks,
    }
}

/// Deviations `Φ0` at or below this value count as proportional fluxes.
pub const PROPORTIONAL_THRESHOLD: f64 = 1e-12;

/// Certifies (3a)–(3g) for the pair, returning the first violation as an error.
pub fn validate_flux_pair(
    domain: &DomainSpec,
    g: &FluxSpec,
    gt: &FluxSpec,
) -> Result<FluxValidation, SolverError> {
    if (g.horizon - gt.horizon).abs() > 1e-14 * g.horizon {
        return Err(SolverError::IncompatibleFluxes(format!(
            "horizons {} and {} differ",
            g.horizon, gt.horizon
        )));
    }
    let v = flux_pair_checks(domain, g, gt);
    for c in &v.checks {
        if c.pass {
            continue;
        }
        return Err(match c.label {
            "3e" => SolverError::EarlyTimeMismatch(c.detail.clone()),
            "3f" => SolverError::FluxesProportional { phi0: v.phi0 },
            "3g" => SolverError::LowerBoundViolated(c.detail.clone()),
            "3d" => SolverError::LipschitzBoundExceeded {
                measured: v.e_measured,
                bound: v.e,
            },
            _ => SolverError::SupportViolation(format!("({}) {}", c.label, c.detail)),
        });
    }
    Ok(v)
}

/// Checks (4a)–(4b) on `I` sample grids.
pub fn impedance_checks(
    domain: &DomainSpec,
    gamma: &ImpedanceSpec,
    horizon: f64,
) -> Vec<AssumptionCheck> {
    let r0 = domain.r0();
    let n = ((domain.width() / (r0 / 50.0)).ceil() as usize).max(2);
    let points: Vec<Point> = (0..=n)
        .map(|i| {
            let x = domain.left() + domain.width() * i as f64 / n as f64;
            Point::new(x, domain.bottom(x))
        })
        .collect();
    let times = time_samples(horizon, 0.0, 200);
    let norm = sampled_lipschitz_norm(|p, t| gamma.eval(p, t), &points, &times, r0);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &p in &points {
        for &t in &times {
            let v = gamma.eval(p, t);
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    vec![
        AssumptionCheck {
            label: "4a",
            pass: norm.is_finite(),
            detail: format!("sampled C^0,1 norm {norm:.6e}"),
        },
        AssumptionCheck {
            label: "4b",
            pass: lo >= 0.0 && hi <= gamma.gamma_bar,
            detail: format!(
                "range [{lo:.6e}, {hi:.6e}] against gamma_bar = {:.6e}",
                gamma.gamma_bar
            ),
        },
    ]
}

pub fn validate_impedance(
    domain: &DomainSpec,
    gamma: &ImpedanceSpec,
    horizon: f64,
) -> Result<(), SolverError> {
    match impedance_checks(domain, gamma, horizon)
        .into_iter()
        .find(|c| !c.pass)
    {
        Some(c) => Err(SolverError::ImpedanceOutOfRange(format!(
            "({}) {}",
            c.label, c.detail
        ))),
        None => Ok(()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_domain, AprioriConstants, BoundaryProfile, SigmaArc};

    fn domain() -> DomainSpec {
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
        .unwrap()
    }

    fn base() -> FluxSpec {
        FluxSpec::new(2.0, 0.1, 0.3, 1.0)
            .lifted(0.0)
            .with_bounds(10.0, 0.1)
    }

    #[test]
    fn identical_fluxes_are_proportional() {
        let d = domain();
        let g = base();
        let err = validate_flux_pair(&d, &g, &g).unwrap_err();
        assert!(matches!(err, SolverError::FluxesProportional { phi0 } if phi0 == 0.0));
    }

    #[test]
    fn ramp_pair_passes() {
        let d = domain();
        let g = base();
        let gt = g.modulated(FluxModulation::TimeRamp { kappa: 0.5 });
        let v = validate_flux_pair(&d, &g, &gt).unwrap();
        assert!(v.phi0 > 0.0);
        assert!(v.checks.iter().all(|c| c.pass));
    }

    #[test]
    fn floor_above_flux_is_rejected() {
        let d = domain();
        let g = base().with_bounds(10.0, 10.0 * d.r0());
        let gt = g.modulated(FluxModulation::TimeRamp { kappa: 0.5 });
        let err = validate_flux_pair(&d, &g, &gt).unwrap_err();
        assert!(matches!(err, SolverError::LowerBoundViolated(_)));
    }

    #[test]
    fn early_mismatch_is_rejected() {
        let d = domain();
        let g = base();
        let gt = base().scaled(1.5);
        assert!(matches!(
            validate_flux_pair(&d, &g, &gt),
            Err(SolverError::EarlyTimeMismatch(_))
        ));
    }

    #[test]
    fn uniform_flux_violates_support() {
        let d = domain();
        let g = FluxSpec::new(2.0, 0.1, 0.3, 1.0).with_bounds(10.0, 0.1);
        let gt = g.modulated(FluxModulation::TimeRamp { kappa: 0.5 });
        assert!(matches!(
            validate_flux_pair(&d, &g, &gt),
            Err(SolverError::SupportViolation(_))
        ));
    }

    #[test]
    fn impedance_bounds() {
        let d = domain();
        assert!(validate_impedance(&d, &ImpedanceSpec::constant(2.0), 1.0).is_ok());
        let bad = ImpedanceSpec::new(ImpedanceKind::Constant(3.0), 2.0);
        assert!(validate_impedance(&d, &bad, 1.0).is_err());
    }
}
