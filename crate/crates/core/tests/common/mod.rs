#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use corrolab::geometry::{
    build_domain, segment_distance, AprioriConstants, BoundaryProfile, DomainSpec, Point, SigmaArc,
};
use corrolab::mesh::{generate_mesh, refine, EdgeTag, Mesh};
use corrolab::solver::FluxSpec;
use corrolab::solver::VerificationSource;

/// Unit square with `r0 = 1/4` and `Σ = [1/4, 3/4]`.
pub fn unit_square() -> DomainSpec {
    build_domain(
        BoundaryProfile::flat(1.0, 0.0),
        1.0,
        1.0,
        SigmaArc {
            start: 0.25,
            end: 0.75,
        },
        AprioriConstants {
            r0: 0.25,
            lipschitz: 1.0,
            area_bound: 16.0,
        },
    )
    .unwrap()
}

/// Unit square whose bottom is a smooth bump of height `amplitude`.
pub fn curved_square(amplitude: f64) -> DomainSpec {
    let profile = BoundaryProfile::from_fn(1.0, 64, |x| amplitude * (PI * x).sin().powi(2));
    unit_square().with_profile(profile).unwrap()
}

/// Flux vanishing within `2 r0` of the bottom, with `t1 = 1/4`, `T = 1`.
pub fn lifted_flux() -> FluxSpec {
    FluxSpec::new(1.0, 0.25, 0.25, 1.0)
        .lifted(0.0)
        .with_bounds(5.0, 0.25)
}

pub fn steps_for(h: f64, horizon: f64) -> usize {
    (horizon / h).round() as usize
}

/// `h = 1/16` and two uniform refinements.
pub fn three_levels(domain: &DomainSpec) -> [Arc<Mesh>; 3] {
    let base = mesh(domain, 1.0 / 16.0);
    let mid = Arc::new(refine(&base));
    let fine = Arc::new(refine(&mid));
    [base, mid, fine]
}

pub fn mesh(domain: &DomainSpec, h: f64) -> Arc<Mesh> {
    Arc::new(generate_mesh(domain, h).unwrap())
}

/// Manufactured solution `u = s(t)·cos(π x / W)` with compensating source and
/// Robin data for constant impedance `gamma`.
#[derive(Debug, Clone, Copy)]
pub struct Manufactured {
    pub width: f64,
    pub gamma: f64,
    /// `true`: `s(t) = 1 − e^{−2t}`; `false`: `s(t) = t`.
    pub saturating: bool,
}

impl Manufactured {
    fn s(&self, t: f64) -> (f64, f64) {
        if self.saturating {
            (1.0 - (-2.0 * t).exp(), 2.0 * (-2.0 * t).exp())
        } else {
            (t, 1.0)
        }
    }

    pub fn exact(&self, p: Point, t: f64) -> f64 {
        self.s(t).0 * (PI * p.x / self.width).cos()
    }

    fn gradient(&self, p: Point, t: f64) -> Point {
        let k = PI / self.width;
        Point::new(-self.s(t).0 * k * (k * p.x).sin(), 0.0)
    }
}

impl VerificationSource for Manufactured {
    fn volume(&self, p: Point, t: f64) -> f64 {
        let k = PI / self.width;
        let (s, ds) = self.s(t);
        (ds + k * k * s) * (k * p.x).cos()
    }

    fn boundary(&self, p: Point, normal: Point, tag: EdgeTag, t: f64) -> f64 {
        let g = self.gradient(p, t);
        let flux = g.x * normal.x + g.y * normal.y;
        match tag {
            EdgeTag::Inaccessible => flux + self.gamma * self.exact(p, t),
            _ => flux,
        }
    }
}

/// Least-squares slope of `log(errors)` against `log(sizes)`.
pub fn observed_order(sizes: &[f64], errors: &[f64]) -> f64 {
    let xs: Vec<f64> = sizes.iter().map(|s| s.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

/// Closed polygon of `∂Ω` built directly from the profile at spacing `s`.
pub fn oracle_polygon(d: &DomainSpec, s: f64) -> Vec<Point> {
    let (l, r, top) = (d.left(), d.right(), d.top());
    let n = (d.width() / s).ceil() as usize;
    let mut pts: Vec<Point> = (0..=n)
        .map(|i| {
            let x = l + d.width() * i as f64 / n as f64;
            Point::new(x, d.bottom(x))
        })
        .collect();
    pts.push(Point::new(r, top));
    pts.push(Point::new(l, top));
    pts
}

pub fn to_polygon(poly: &[Point], p: Point) -> f64 {
    (0..poly.len())
        .map(|k| segment_distance(p, poly[k], poly[(k + 1) % poly.len()]))
        .fold(f64::INFINITY, f64::min)
}

pub fn to_closure(d: &DomainSpec, poly: &[Point], p: Point) -> f64 {
    if d.contains(p) {
        0.0
    } else {
        to_polygon(poly, p)
    }
}

/// Brute force `sup_{Ω̄1} dist(·, Ω̄2)` over a grid plus boundary samples.
pub fn oracle_directed(d1: &DomainSpec, d2: &DomainSpec, s: f64) -> f64 {
    let poly1 = oracle_polygon(d1, 0.5 * s);
    let poly2 = oracle_polygon(d2, 0.25 * s);
    let mut cloud = poly1.clone();
    let (nx, ny) = ((d1.width() / s) as usize, (d1.height() / s) as usize + 2);
    for i in 0..=nx {
        for j in 0..=ny {
            let p = Point::new(
                d1.left() + i as f64 * s,
                d1.bottom(d1.left() + i as f64 * s) + j as f64 * s,
            );
            if p.y <= d1.top() {
                cloud.push(p);
            }
        }
    }
    cloud
        .iter()
        .map(|&p| to_closure(d2, &poly2, p))
        .fold(0.0, f64::max)
}

pub fn oracle_hausdorff(d1: &DomainSpec, d2: &DomainSpec, s: f64) -> f64 {
    oracle_directed(d1, d2, s).max(oracle_directed(d2, d1, s))
}
