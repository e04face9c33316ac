//! Sampled distances between domains: Hausdorff distance of the closures,
//! the modified distance, and Hausdorff distance of the boundaries.
//!
//! The closure of each domain is sampled column by column (one column per
//! abscissa step, each column running from the bottom boundary point to the
//! top side). Distances to a closure are exact point-to-polyline distances to
//! its sampled boundary polygon, so the sampling error is governed by the
//! column spacing only.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{segment_distance, BoundaryProfile, DomainSpec, GeometryError, Point};

/// One comparison between two domains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceReport {
    pub d_h: f64,
    pub d_m: f64,
    pub d_boundary: f64,
    pub resolution: f64,
}

impl DistanceReport {
    pub const CSV_HEADER: &'static str = "d_H,d_m,d_boundary,resolution";

    pub fn csv_row(&self) -> String {
        format!(
            "{:.12e},{:.12e},{:.12e},{:.6e}",
            self.d_h, self.d_m, self.d_boundary, self.resolution
        )
    }
}

/// Uniform bucket grid over polyline segments for nearest-distance queries.
struct SegmentIndex {
    segments: Vec<(Point, Point)>,
    lo: Point,
    cell: f64,
    nx: usize,
    ny: usize,
    /// Segment lists of the non-empty cells, keyed by `j·nx + i`.
    buckets: HashMap<usize, Vec<u32>>,
}

impl SegmentIndex {
    fn closed_polygon(poly: &[Point], cell: f64) -> Self {
        let segments: Vec<(Point, Point)> = poly
            .iter()
            .zip(poly.iter().cycle().skip(1))
            .map(|(&a, &b)| (a, b))
            .collect();
        let (mut lo, mut hi) = (
            Point::new(f64::INFINITY, f64::INFINITY),
            Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY),
        );
        for p in poly {
            lo = Point::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Point::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        let nx = (((hi.x - lo.x) / cell).floor() as usize + 1).max(1);
        let ny = (((hi.y - lo.y) / cell).floor() as usize + 1).max(1);
        let mut buckets: HashMap<usize, Vec<u32>> = HashMap::new();
        for (k, (a, b)) in segments.iter().enumerate() {
            let (i0, j0) = Self::cell_of(lo, cell, nx, ny, Point::new(a.x.min(b.x), a.y.min(b.y)));
            let (i1, j1) = Self::cell_of(lo, cell, nx, ny, Point::new(a.x.max(b.x), a.y.max(b.y)));
            for j in j0..=j1 {
                for i in i0..=i1 {
                    buckets.entry(j * nx + i).or_default().push(k as u32);
                }
            }
        }
        Self {
            segments,
            lo,
            cell,
            nx,
            ny,
            buckets,
        }
    }

    fn cell_of(lo: Point, cell: f64, nx: usize, ny: usize, p: Point) -> (usize, usize) {
        let i = ((p.x - lo.x) / cell).floor().clamp(0.0, (nx - 1) as f64) as usize;
        let j = ((p.y - lo.y) / cell).floor().clamp(0.0, (ny - 1) as f64) as usize;
        (i, j)
    }

    fn nearest(&self, p: Point) -> f64 {
        let (ci, cj) = Self::cell_of(self.lo, self.cell, self.nx, self.ny, p);
        let mut best = f64::INFINITY;
        let max_ring = self.nx.max(self.ny);
        for ring in 0..=max_ring {
            if best <= (ring as f64 - 1.0) * self.cell {
                break;
            }
            let r = ring as isize;
            for dj in -r..=r {
                for di in -r..=r {
                    if di.abs() != r && dj.abs() != r {
                        continue;
                    }
                    let (i, j) = (ci as isize + di, cj as isize + dj);
                    if i < 0 || j < 0 || i >= self.nx as isize || j >= self.ny as isize {
                        continue;
                    }
                    if let Some(list) = self.buckets.get(&(j as usize * self.nx + i as usize)) {
                        for &k in list {
                            let (a, b) = self.segments[k as usize];
                            best = best.min(segment_distance(p, a, b));
                        }
                    }
                }
            }
        }
        best
    }
}

fn check_inputs(d1: &DomainSpec, d2: &DomainSpec, resolution: f64) -> Result<(), GeometryError> {
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(GeometryError::InvalidProfile(format!(
            "sampling resolution must be positive, got {resolution}"
        )));
    }
    let tol = 1e-12 * (1.0 + d1.width() + d1.height());
    let same = (d1.width() - d2.width()).abs() <= tol
        && (d1.height() - d2.height()).abs() <= tol
        && (d1.origin().x - d2.origin().x).abs() <= tol
        && (d1.origin().y - d2.origin().y).abs() <= tol
        && d1.sigma() == d2.sigma();
    if same {
        Ok(())
    } else {
        Err(GeometryError::IncompatibleDomains(format!(
            "accessible parts differ: W {} vs {}, H {} vs {}, origin {:?} vs {:?}, Σ {:?} vs {:?}",
            d1.width(),
            d2.width(),
            d1.height(),
            d2.height(),
            d1.origin(),
            d2.origin(),
            d1.sigma(),
            d2.sigma()
        )))
    }
}

fn index_for(d: &DomainSpec, resolution: f64) -> SegmentIndex {
    SegmentIndex::closed_polygon(&d.boundary_polygon(resolution), 4.0 * resolution)
}

/// `sup_{x ∈ S(Ω̄1)} dist(x, Ω̄2)` over the column samples of `Ω̄1`.
fn directed_closure(
    d1: &DomainSpec,
    d2: &DomainSpec,
    index2: &SegmentIndex,
    resolution: f64,
) -> f64 {
    let mut sup = 0.0_f64;
    for x in d1.sample_columns(resolution) {
        let floor2 = d2.bottom(x);
        let eps = 1e-12 * (1.0 + d2.height());
        for p in d1.column_samples(x, resolution) {
            if p.y >= floor2 - eps {
                // samples ascend; the rest of the column lies in Ω̄2
                break;
            }
            sup = sup.max(index2.nearest(p));
        }
    }
    sup
}

fn directed_boundary_to_closure(poly1: &[Point], d2: &DomainSpec, index2: &SegmentIndex) -> f64 {
    poly1
        .iter()
        .filter(|p| !d2.contains(**p))
        .map(|&p| index2.nearest(p))
        .fold(0.0, f64::max)
}

fn directed_boundary(poly1: &[Point], index2: &SegmentIndex) -> f64 {
    poly1.iter().map(|&p| index2.nearest(p)).fold(0.0, f64::max)
}

/// Hausdorff distance `d_H(Ω̄1, Ω̄2)` by dense sampling at `resolution`.
pub fn hausdorff_distance(
    d1: &DomainSpec,
    d2: &DomainSpec,
    resolution: f64,
) -> Result<f64, GeometryError> {
    check_inputs(d1, d2, resolution)?;
    let i1 = index_for(d1, resolution);
    let i2 = index_for(d2, resolution);
    Ok(directed_closure(d1, d2, &i2, resolution).max(directed_closure(d2, d1, &i1, resolution)))
}

/// Modified distance: the larger of `sup_{∂Ω1} dist(·, Ω̄2)` and
/// `sup_{∂Ω2} dist(·, Ω̄1)`.
pub fn modified_distance(
    d1: &DomainSpec,
    d2: &DomainSpec,
    resolution: f64,
) -> Result<f64, GeometryError> {
    check_inputs(d1, d2, resolution)?;
    let (p1, p2) = (
        d1.boundary_polygon(resolution),
        d2.boundary_polygon(resolution),
    );
    let i1 = index_for(d1, resolution);
    let i2 = index_for(d2, resolution);
    Ok(directed_boundary_to_closure(&p1, d2, &i2).max(directed_boundary_to_closure(&p2, d1, &i1)))
}

/// Hausdorff distance between the boundaries `∂Ω1` and `∂Ω2`.
pub fn boundary_hausdorff(
    d1: &DomainSpec,
    d2: &DomainSpec,
    resolution: f64,
) -> Result<f64, GeometryError> {
    check_inputs(d1, d2, resolution)?;
    let (p1, p2) = (
        d1.boundary_polygon(resolution),
        d2.boundary_polygon(resolution),
    );
    let i1 = index_for(d1, resolution);
    let i2 = index_for(d2, resolution);
    Ok(directed_boundary(&p1, &i2).max(directed_boundary(&p2, &i1)))
}

/// All three distances at once, sharing the sampled polygons.
pub fn distance_report(
    d1: &DomainSpec,
    d2: &DomainSpec,
    resolution: f64,
) -> Result<DistanceReport, GeometryError> {
    check_inputs(d1, d2, resolution)?;
    let (p1, p2) = (
        d1.boundary_polygon(resolution),
        d2.boundary_polygon(resolution),
    );
    let i1 = index_for(d1, resolution);
    let i2 = index_for(d2, resolution);
    let d_h =
        directed_closure(d1, d2, &i2, resolution).max(directed_closure(d2, d1, &i1, resolution));
    let d_m =
        directed_boundary_to_closure(&p1, d2, &i2).max(directed_boundary_to_closure(&p2, d1, &i1));
    let d_boundary = directed_boundary(&p1, &i2).max(directed_boundary(&p2, &i1));
    Ok(DistanceReport {
        d_h,
        d_m,
        d_boundary,
        resolution,
    })
}

/// Unit-height `cos²` bump of half-width `half_width` centred at `center`.
/// It is C^{1,1}: its second derivative is bounded by `(π/half_width)²/2`.
pub fn cos2_bump(x: f64, center: f64, half_width: f64) -> f64 {
    let s = (x - center) / half_width;
    if s.abs() >= 1.0 {
        0.0
    } else {
        (0.5 * std::f64::consts::PI * s).cos().powi(2)
    }
}

/// Random profile: the base profile plus three `cos²` bumps supported in the
/// middle 60% of the bottom side, scaled to keep the second derivative below
/// half of `L/r0` and the sup-amplitude below `max_amplitude`.
pub fn random_bump_profile(
    base: &DomainSpec,
    rng: &mut impl Rng,
    max_amplitude: f64,
) -> BoundaryProfile {
    let w = base.width();
    let c = base.constants();
    let curvature_budget = 0.5 * c.lipschitz / c.r0;
    let bumps: Vec<(f64, f64, f64)> = (0..3)
        .map(|_| {
            let half = rng.gen_range(0.1 * w..0.2 * w);
            let center = rng.gen_range(0.2 * w + half..0.8 * w - half + 1e-12 * w);
            let amp_cap = (curvature_budget / 3.0) * 2.0 * (half / std::f64::consts::PI).powi(2);
            let amp = rng.gen_range(-1.0..1.0) * amp_cap.min(max_amplitude / 3.0);
            (center, half, amp)
        })
        .collect();
    let n = base
        .profile()
        .knots()
        .len()
        .max(((w / (c.r0 / 20.0)).ceil()) as usize + 1);
    let profile = base.profile();
    BoundaryProfile::from_fn(w, n - 1, |x| {
        profile.eval(x)
            + bumps
                .iter()
                .map(|&(center, half, amp)| amp * cos2_bump(x, center, half))
                .sum::<f64>()
    })
}

/// Empirical check of `d_H ≤ C d_m` on random pairs with small `d_H`.
#[derive(Debug, Clone, PartialEq)]
pub struct RatioSweep {
    pub pairs: usize,
    pub max_ratio: f64,
    pub ratios: Vec<f64>,
    pub reports: Vec<DistanceReport>,
}

/// Draws `pairs` random pairs of valid perturbations of `base` with
/// `d_H ≤ r0/4`, and reports the largest ratio `d_H / d_m`.
pub fn modified_distance_ratio_sweep(
    base: &DomainSpec,
    pairs: usize,
    seed: u64,
    resolution: f64,
) -> Result<RatioSweep, GeometryError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d0 = 0.25 * base.r0();
    let mut ratios = Vec::with_capacity(pairs);
    let mut reports = Vec::with_capacity(pairs);
    let mut attempts = 0;
    while ratios.len() < pairs {
        attempts += 1;
        if attempts > 20 * pairs.max(1) {
            break;
        }
        let a = base.with_profile(random_bump_profile(base, &mut rng, d0))?;
        let b = base.with_profile(random_bump_profile(base, &mut rng, d0))?;
        let report = distance_report(&a, &b, resolution)?;
        if report.d_h > d0 || report.d_m <= 0.0 {
            continue;
        }
        ratios.push(report.d_h / report.d_m);
        reports.push(report);
    }
    let max_ratio = ratios.iter().copied().fold(0.0, f64::max);
    Ok(RatioSweep {
        pairs: ratios.len(),
        max_ratio,
        ratios,
        reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_domain, AprioriConstants, SigmaArc};

    fn domain(profile: BoundaryProfile) -> DomainSpec {
        build_domain(
            profile,
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

    #[test]
    fn identical_domains_are_at_distance_zero() {
        let d = domain(BoundaryProfile::from_fn(1.0, 200, |x| {
            0.02 * (6.0 * x).sin()
        }));
        let r = distance_report(&d, &d, 0.005).unwrap();
        assert_eq!((r.d_h, r.d_m, r.d_boundary), (0.0, 0.0, 0.0));
    }

    #[test]
    fn flat_shift_gives_delta_everywhere() {
        let delta = 0.013;
        let d1 = domain(BoundaryProfile::flat(1.0, 0.0));
        let d2 = domain(BoundaryProfile::flat(1.0, -delta));
        let r = distance_report(&d1, &d2, 0.002).unwrap();
        for v in [r.d_h, r.d_m, r.d_boundary] {
            assert!((v - delta).abs() < 1e-12, "{v}");
        }
    }

    #[test]
    fn nested_domains_modified_distance() {
        let delta = 0.02;
        let d1 = domain(BoundaryProfile::flat(1.0, 0.0));
        let d2 = domain(BoundaryProfile::flat(1.0, delta));
        assert!((modified_distance(&d1, &d2, 0.004).unwrap() - delta).abs() < 1e-12);
    }

    #[test]
    fn incompatible_domains_are_rejected() {
        let d1 = domain(BoundaryProfile::flat(1.0, 0.0));
        let d2 = d1.translated(Point::new(0.1, 0.0));
        assert!(matches!(
            hausdorff_distance(&d1, &d2, 0.01),
            Err(GeometryError::IncompatibleDomains(_))
        ));
        assert!(hausdorff_distance(&d1, &d1, 0.0).is_err());
    }

    #[test]
    fn distances_are_symmetric() {
        let d1 = domain(BoundaryProfile::from_fn(1.0, 200, |x| {
            0.03 * cos2_bump(x, 0.4, 0.2)
        }));
        let d2 = domain(BoundaryProfile::from_fn(1.0, 200, |x| {
            -0.02 * cos2_bump(x, 0.6, 0.15)
        }));
        let a = distance_report(&d1, &d2, 0.003).unwrap();
        let b = distance_report(&d2, &d1, 0.003).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn ratio_sweep_stays_bounded() {
        let base = domain(BoundaryProfile::flat(1.0, 0.0));
        let sweep = modified_distance_ratio_sweep(&base, 10, 7, 0.002).unwrap();
        assert_eq!(sweep.pairs, 10);
        assert!(sweep.max_ratio >= 1.0 && sweep.max_ratio.is_finite());
    }
}
