//! Admissible domains: a rectangle whose bottom side is replaced by the graph
//! of a smooth profile.
//!
//! The accessible boundary `A` is the top side plus the two laterals; the
//! inaccessible boundary `I` is the graph `x2 = φ(x1)`. Measurements are taken
//! on the sub-arc `Σ` of the top side.

mod distance;
mod io;
mod spline;

pub use distance::{
    boundary_hausdorff, cos2_bump, distance_report, hausdorff_distance, modified_distance,
    modified_distance_ratio_sweep, random_bump_profile, DistanceReport, RatioSweep,
};
pub use io::{read_profile, write_profile, ProfileHeader};
pub use spline::CubicSpline;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error(
        "assumption (2c) violated: second divided difference {max_second_difference:.4e} exceeds L/r0 = {bound:.4e}"
    )]
    ProfileTooRough {
        max_second_difference: f64,
        bound: f64,
    },
    #[error("assumption (2a) violated: |Ω| = {area:.6e} exceeds M·r0² = {bound:.6e}")]
    AreaBoundViolated { area: f64, bound: f64 },
    #[error("assumption (2b) violated: profile reaches {max_profile:.4e}, must stay below H - r0 = {limit:.4e}")]
    BoundaryOverlap { max_profile: f64, limit: f64 },
    #[error("assumption (2d) violated: {0}")]
    SigmaBallViolated(String),
    #[error("incompatible domains: {0}")]
    IncompatibleDomains(String),
    #[error("profile file line {line}: {message}")]
    ProfileParse { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn midpoint(self, other: Point) -> Point {
        Point::new(0.5 * (self.x + other.x), 0.5 * (self.y + other.y))
    }
}

impl std::ops::Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

/// Distance from `p` to the segment `[a, b]`.
pub fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return p.distance(a);
    }
    let s = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
    p.distance(Point::new(a.x + s * dx, a.y + s * dy))
}

/// The a-priori constants `(r0, L, M)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AprioriConstants {
    pub r0: f64,
    pub lipschitz: f64,
    pub area_bound: f64,
}

/// Graph `x2 = φ(x1)` of the inaccessible boundary, interpolated by a natural
/// cubic spline.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryProfile {
    spline: CubicSpline,
}

impl BoundaryProfile {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self, GeometryError> {
        if knots.len() < 2 || knots.len() != values.len() {
            return Err(GeometryError::InvalidProfile(format!(
                "need at least two knots with matching values, got {} knots and {} values",
                knots.len(),
                values.len()
            )));
        }
        if knots.windows(2).any(|w| w[1] <= w[0]) {
            return Err(GeometryError::InvalidProfile(
                "knots must be strictly increasing".into(),
            ));
        }
        if knots.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(GeometryError::InvalidProfile("non-finite entry".into()));
        }
        Ok(Self {
            spline: CubicSpline::natural(knots, values),
        })
    }

    /// Samples `f` at `intervals + 1` equispaced knots on `[0, width]`.
    pub fn from_fn(width: f64, intervals: usize, f: impl Fn(f64) -> f64) -> Self {
        let n = intervals.max(1);
        let knots: Vec<f64> = (0..=n).map(|i| width * i as f64 / n as f64).collect();
        let values = knots.iter().map(|&x| f(x)).collect();
        Self {
            spline: CubicSpline::natural(knots, values),
        }
    }

    pub fn flat(width: f64, level: f64) -> Self {
        Self::from_fn(width, 1, |_| level)
    }

    pub fn knots(&self) -> &[f64] {
        self.spline.knots()
    }

    pub fn values(&self) -> &[f64] {
        self.spline.values()
    }

    pub fn width(&self) -> f64 {
        *self.knots().last().unwrap()
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.spline.eval(x)
    }

    pub fn slope(&self, x: f64) -> f64 {
        self.spline.eval_all(x).1
    }

    pub fn integral(&self) -> f64 {
        self.spline.integral()
    }

    /// Extremes of the profile sampled at `samples + 1` points.
    pub fn range(&self, samples: usize) -> (f64, f64) {
        let w = self.width();
        let x0 = self.knots()[0];
        (0..=samples)
            .map(|i| self.eval(x0 + (w - x0) * i as f64 / samples as f64))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Largest second divided difference on a grid of the given spacing.
    pub fn max_second_difference(&self, spacing: f64) -> f64 {
        let x0 = self.knots()[0];
        let w = self.width();
        let n = ((w - x0) / spacing).ceil().max(2.0) as usize;
        let s = (w - x0) / n as f64;
        (1..n)
            .map(|i| {
                let x = x0 + i as f64 * s;
                ((self.eval(x + s) - 2.0 * self.eval(x) + self.eval(x - s)) / (s * s)).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Same knots, values `φ + amplitude·mode`.
    pub fn perturbed(&self, amplitude: f64, mode: impl Fn(f64) -> f64) -> Self {
        let knots = self.knots().to_vec();
        let values = knots
            .iter()
            .zip(self.values())
            .map(|(&x, &v)| v + amplitude * mode(x))
            .collect();
        Self {
            spline: CubicSpline::natural(knots, values),
        }
    }

    /// Same knots, values shifted by a constant.
    pub fn shifted(&self, offset: f64) -> Self {
        self.perturbed(offset, |_| 1.0)
    }
}

/// Measurement arc `Σ = {(x1, H) : start < x1 < end}` on the top side.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaArc {
    pub start: f64,
    pub end: f64,
}

impl SigmaArc {
    pub fn length(&self) -> f64 {
        self.end - self.start
    }

    pub fn center(&self) -> f64 {
        0.5 * (self.start + self.end)
    }
}

/// A validated domain `Ω = {0 < x1 < W, φ(x1) < x2 < H}` (in local
/// coordinates, placed at `origin`).
#[derive(Debug, Clone, PartialEq)]
pub struct DomainSpec {
    width: f64,
    height: f64,
    profile: BoundaryProfile,
    sigma: SigmaArc,
    constants: AprioriConstants,
    area: f64,
    origin: Point,
}

/// Constructs and validates a domain against the domain assumptions
/// (area bound, boundary decomposition, C^{1,1} regularity, Σ-ball).
pub fn build_domain(
    profile: BoundaryProfile,
    width: f64,
    height: f64,
    sigma: SigmaArc,
    constants: AprioriConstants,
) -> Result<DomainSpec, GeometryError> {
    let AprioriConstants {
        r0,
        lipschitz,
        area_bound,
    } = constants;
    if !(r0 > 0.0 && lipschitz > 0.0 && area_bound > 0.0 && width > 0.0 && height > 0.0) {
        return Err(GeometryError::InvalidProfile(
            "W, H, r0, L, M must all be positive".into(),
        ));
    }
    let knots = profile.knots();
    let tol = 1e-9 * width;
    if knots[0].abs() > tol || (profile.width() - width).abs() > tol {
        return Err(GeometryError::InvalidProfile(format!(
            "knots span [{}, {}], expected [0, {width}]",
            knots[0],
            profile.width()
        )));
    }

    let max_dd = profile.max_second_difference(r0 / 50.0);
    if max_dd > lipschitz / r0 {
        return Err(GeometryError::ProfileTooRough {
            max_second_difference: max_dd,
            bound: lipschitz / r0,
        });
    }

    let (_, max_phi) = profile.range(((width / (r0 / 50.0)).ceil() as usize).max(64));
    if max_phi >= height - r0 {
        return Err(GeometryError::BoundaryOverlap {
            max_profile: max_phi,
            limit: height - r0,
        });
    }

    let area = width * height - profile.integral();
    if area > area_bound * r0 * r0 {
        return Err(GeometryError::AreaBoundViolated {
            area,
            bound: area_bound * r0 * r0,
        });
    }

    if !(sigma.start >= 0.0 && sigma.end <= width && sigma.start < sigma.end) {
        return Err(GeometryError::SigmaBallViolated(format!(
            "Σ = ({}, {}) is not a sub-arc of the top side [0, {width}]",
            sigma.start, sigma.end
        )));
    }
    let domain = DomainSpec {
        width,
        height,
        profile,
        sigma,
        constants,
        area,
        origin: Point::default(),
    };
    // ∂Ω ∩ B_r0(P0) ⊂ Σ with P0 the centre of Σ: the ball must not reach the
    // laterals, the bottom, or the top outside Σ.
    let p0 = Point::new(sigma.center(), height);
    let half = 0.5 * sigma.length();
    let lateral = p0.x.min(width - p0.x);
    let bottom = domain.local_distance_to_inaccessible(p0);
    if half < r0 || lateral < r0 || bottom < r0 {
        return Err(GeometryError::SigmaBallViolated(format!(
            "B_r0(P0) with P0 = ({:.4}, {:.4}) meets ∂Ω outside Σ (half-length {half:.4}, lateral gap {lateral:.4}, bottom gap {bottom:.4}, r0 {r0})",
            p0.x, p0.y
        )));
    }
    Ok(domain)
}

impl DomainSpec {
    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn profile(&self) -> &BoundaryProfile {
        &self.profile
    }

    pub fn sigma(&self) -> SigmaArc {
        self.sigma
    }

    pub fn constants(&self) -> AprioriConstants {
        self.constants
    }

    pub fn r0(&self) -> f64 {
        self.constants.r0
    }

    /// `|Ω|`, integrated exactly from the spline.
    pub fn area(&self) -> f64 {
        self.area
    }

    pub fn origin(&self) -> Point {
        self.origin
    }

    /// Radius of the rounding assumed at the two A–I junctions.
    pub fn corner_radius(&self) -> f64 {
        0.5 * self.constants.r0
    }

    /// Copy of the domain moved rigidly by `offset`.
    pub fn translated(&self, offset: Point) -> Self {
        Self {
            origin: self.origin + offset,
            ..self.clone()
        }
    }

    /// Same geometry with a different inaccessible profile; revalidated.
    pub fn with_profile(&self, profile: BoundaryProfile) -> Result<Self, GeometryError> {
        let mut d = build_domain(profile, self.width, self.height, self.sigma, self.constants)?;
        d.origin = self.origin;
        Ok(d)
    }

    /// Profile height in global coordinates above global abscissa `x`.
    pub fn bottom(&self, x: f64) -> f64 {
        self.origin.y + self.profile.eval(x - self.origin.x)
    }

    pub fn top(&self) -> f64 {
        self.origin.y + self.height
    }

    pub fn left(&self) -> f64 {
        self.origin.x
    }

    pub fn right(&self) -> f64 {
        self.origin.x + self.width
    }

    /// Membership of the closure `Ω̄`.
    pub fn contains(&self, p: Point) -> bool {
        let eps = 1e-12 * (1.0 + self.width + self.height);
        p.x >= self.left() - eps
            && p.x <= self.right() + eps
            && p.y <= self.top() + eps
            && p.y >= self.bottom(p.x.clamp(self.left(), self.right())) - eps
    }

    /// Length of the accessible boundary (top side plus both laterals).
    pub fn accessible_length(&self) -> f64 {
        self.width + 2.0 * self.height - self.profile.eval(0.0) - self.profile.eval(self.width)
    }

    /// Measurement centre `P0`.
    pub fn sigma_center(&self) -> Point {
        self.origin + Point::new(self.sigma.center(), self.height)
    }

    fn local_distance_to_inaccessible(&self, p: Point) -> f64 {
        let n = ((self.width / (self.constants.r0 / 200.0)).ceil() as usize).max(64);
        let pts: Vec<Point> = (0..=n)
            .map(|i| {
                let x = self.width * i as f64 / n as f64;
                Point::new(x, self.profile.eval(x))
            })
            .collect();
        pts.windows(2)
            .map(|w| segment_distance(p, w[0], w[1]))
            .fold(f64::INFINITY, f64::min)
    }

    /// `dist(p, I)`, with `I` resolved at `r0/200`.
    pub fn distance_to_inaccessible(&self, p: Point) -> f64 {
        self.local_distance_to_inaccessible(p - self.origin)
    }

    /// `dist(p, A)` for `A` the top side and the two laterals.
    pub fn distance_to_accessible(&self, p: Point) -> f64 {
        let q = p - self.origin;
        let (w, h) = (self.width, self.height);
        let bl = Point::new(0.0, self.profile.eval(0.0));
        let br = Point::new(w, self.profile.eval(w));
        let tl = Point::new(0.0, h);
        let tr = Point::new(w, h);
        segment_distance(q, bl, tl)
            .min(segment_distance(q, tl, tr))
            .min(segment_distance(q, br, tr))
    }

    /// Distance from `p` to the whole boundary `∂Ω`.
    pub fn distance_to_boundary(&self, p: Point) -> f64 {
        self.distance_to_accessible(p)
            .min(self.distance_to_inaccessible(p))
    }

    /// Column abscissas used by every sampled distance at `resolution`.
    pub(crate) fn sample_columns(&self, resolution: f64) -> Vec<f64> {
        let n = (self.width / resolution).ceil().max(1.0) as usize;
        (0..=n)
            .map(|i| self.left() + self.width * i as f64 / n as f64)
            .collect()
    }

    /// Closure samples in column `x`, from the bottom boundary point to the top.
    pub(crate) fn column_samples(&self, x: f64, resolution: f64) -> impl Iterator<Item = Point> {
        let lo = self.bottom(x);
        let hi = self.top();
        let n = ((hi - lo) / resolution).ceil().max(1.0) as usize;
        (0..=n).map(move |j| {
            let y = if j == n {
                hi
            } else {
                lo + (hi - lo) * j as f64 / n as f64
            };
            Point::new(x, y)
        })
    }

    /// Closed counter-clockwise polygon through boundary samples. Every vertex
    /// also belongs to the closure sample set at the same resolution.
    pub fn boundary_polygon(&self, resolution: f64) -> Vec<Point> {
        let cols = self.sample_columns(resolution);
        let mut poly: Vec<Point> = cols
            .iter()
            .map(|&x| Point::new(x, self.bottom(x)))
            .collect();
        let last = *cols.last().unwrap();
        poly.extend(self.column_samples(last, resolution).skip(1));
        poly.extend(
            cols.iter()
                .rev()
                .skip(1)
                .map(|&x| Point::new(x, self.top())),
        );
        let first: Vec<Point> = self.column_samples(cols[0], resolution).collect();
        poly.extend(
            first
                .iter()
                .rev()
                .skip(1)
                .take(first.len().saturating_sub(2)),
        );
        poly
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn constants() -> AprioriConstants {
        AprioriConstants {
            r0: 0.1,
            lipschitz: 1.0,
            area_bound: 100.0,
        }
    }

    fn sigma() -> SigmaArc {
        SigmaArc {
            start: 0.3,
            end: 0.7,
        }
    }

    #[test]
    fn flat_unit_square_is_valid() {
        let d = build_domain(
            BoundaryProfile::flat(1.0, 0.0),
            1.0,
            1.0,
            sigma(),
            constants(),
        )
        .unwrap();
        assert!((d.area() - 1.0).abs() < 1e-14);
        assert!((d.accessible_length() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn literal_area_bound_rejects_small_m() {
        // |Ω| = 1 > M r0² = 0.02
        let c = AprioriConstants {
            area_bound: 2.0,
            ..constants()
        };
        let err = build_domain(BoundaryProfile::flat(1.0, 0.0), 1.0, 1.0, sigma(), c).unwrap_err();
        assert!(matches!(err, GeometryError::AreaBoundViolated { .. }));
        assert!(err.to_string().contains("(2a)"));
    }

    #[test]
    fn rough_profile_is_rejected() {
        // Curvature 10 L / r0 on a short arc, continued tangentially (C¹).
        let r0 = 0.1;
        let k = 10.0 / r0;
        let a = 0.02;
        let p = BoundaryProfile::from_fn(1.0, 1000, |x| {
            let s = x - 0.5;
            if s.abs() <= a {
                0.5 * k * s * s
            } else {
                0.5 * k * a * a + k * a * (s.abs() - a)
            }
        });
        let err = build_domain(p, 1.0, 1.0, sigma(), constants()).unwrap_err();
        match err {
            GeometryError::ProfileTooRough {
                max_second_difference,
                bound,
            } => assert!(max_second_difference > bound),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn sinusoidal_area_matches_closed_form() {
        let p =
            BoundaryProfile::from_fn(1.0, 400, |x| 0.05 * (2.0 * std::f64::consts::PI * x).sin());
        let d = build_domain(p.clone(), 1.0, 1.0, sigma(), constants()).unwrap();
        assert!((d.area() - 1.0).abs() < 1e-10);
        // dense trapezoid cross-check of ∫φ
        let n = 200_000;
        let trap: f64 = (0..n)
            .map(|i| {
                let a = i as f64 / n as f64;
                let b = (i + 1) as f64 / n as f64;
                0.5 * (p.eval(a) + p.eval(b)) / n as f64
            })
            .sum();
        assert!((1.0 - trap - d.area()).abs() < 1e-10);
    }

    #[test]
    fn sigma_ball_must_fit() {
        let narrow = SigmaArc {
            start: 0.45,
            end: 0.55,
        };
        let err = build_domain(
            BoundaryProfile::flat(1.0, 0.0),
            1.0,
            1.0,
            narrow,
            constants(),
        )
        .unwrap_err();
        assert!(matches!(err, GeometryError::SigmaBallViolated(_)));
    }

    #[test]
    fn profile_must_stay_below_top() {
        let err = build_domain(
            BoundaryProfile::flat(1.0, 0.95),
            1.0,
            1.0,
            sigma(),
            constants(),
        )
        .unwrap_err();
        assert!(matches!(err, GeometryError::BoundaryOverlap { .. }));
    }

    #[test]
    fn polygon_is_closed_and_counter_clockwise() {
        let d = build_domain(
            BoundaryProfile::flat(1.0, 0.0),
            1.0,
            0.5,
            sigma(),
            constants(),
        )
        .unwrap();
        let poly = d.boundary_polygon(0.1);
        let signed: f64 = poly
            .iter()
            .zip(poly.iter().cycle().skip(1))
            .map(|(a, b)| a.x * b.y - b.x * a.y)
            .sum::<f64>()
            * 0.5;
        assert!((signed - 0.5).abs() < 1e-12);
        // no duplicated consecutive vertices
        for (a, b) in poly.iter().zip(poly.iter().cycle().skip(1)) {
            assert!(a.distance(*b) > 1e-12);
        }
    }
}
