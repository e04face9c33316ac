mod common;

use std::collections::HashMap;

use common::{curved_square, observed_order, unit_square};
use corrolab::experiments::{default_domain, PerturbationFamily};
use corrolab::geometry::{BoundaryProfile, DomainSpec};
use corrolab::mesh::{generate_mesh, refine, EdgeTag, Mesh, MIN_ANGLE_DEGREES};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn exact_area(d: &DomainSpec) -> f64 {
    d.width() * d.top() - d.profile().integral()
}

/// Arc length of the bottom graph by composite Simpson on a fine grid.
fn exact_bottom_length(d: &DomainSpec) -> f64 {
    let n = 20_000;
    let h = d.width() / n as f64;
    let f = |x: f64| d.profile().slope(x).hypot(1.0);
    let mut s = f(0.0) + f(d.width());
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    s * h / 3.0
}

fn levels(d: &DomainSpec) -> Vec<Mesh> {
    let m0 = generate_mesh(d, 1.0 / 16.0).unwrap();
    let m1 = refine(&m0);
    let m2 = refine(&m1);
    vec![m0, m1, m2]
}

fn edge_use(m: &Mesh) -> HashMap<(usize, usize), usize> {
    let mut count = HashMap::new();
    for &[a, b, c] in m.triangles() {
        for (p, q) in [(a, b), (b, c), (c, a)] {
            *count.entry((p.min(q), p.max(q))).or_insert(0) += 1;
        }
    }
    count
}

/// Bottom `0.1 x²(1 − x)`: its slopes differ at the ends, so chord errors do
/// not cancel the way they do for periodic profiles.
fn skewed_square() -> DomainSpec {
    let profile = BoundaryProfile::from_fn(1.0, 64, |x| 0.1 * x * x * (1.0 - x));
    unit_square().with_profile(profile).unwrap()
}

#[test]
fn area_converges_at_second_order() {
    let d = skewed_square();
    let exact = exact_area(&d);
    let ms = levels(&d);
    let sizes: Vec<f64> = ms.iter().map(|m| m.h()).collect();
    let errors: Vec<f64> = ms.iter().map(|m| (m.area() - exact).abs()).collect();
    let order = observed_order(&sizes, &errors);
    assert!(order >= 1.9, "{order} {errors:?}");
}

#[test]
fn bottom_length_converges_at_second_order() {
    let d = skewed_square();
    let exact = exact_bottom_length(&d);
    let ms = levels(&d);
    let sizes: Vec<f64> = ms.iter().map(|m| m.h()).collect();
    let errors: Vec<f64> = ms
        .iter()
        .map(|m| (m.boundary_length(|t| t == EdgeTag::Inaccessible) - exact).abs())
        .collect();
    let order = observed_order(&sizes, &errors);
    assert!(order >= 1.9, "{order} {errors:?}");
}

#[test]
fn meshes_are_conforming_and_tagged() {
    for m in levels(&curved_square(0.05)) {
        let uses = edge_use(&m);
        assert!(uses.values().all(|&c| c == 1 || c == 2));
        let boundary: Vec<_> = uses
            .iter()
            .filter(|(_, &c)| c == 1)
            .map(|(k, _)| *k)
            .collect();
        assert_eq!(boundary.len(), m.boundary_edges().len());
        for e in m.boundary_edges() {
            let [a, b] = e.vertices;
            assert_eq!(uses.get(&(a.min(b), a.max(b))), Some(&1));
        }
        assert!((0..m.triangles().len()).all(|t| m.triangle_area(t) > 0.0));
        assert!(m.min_angle_degrees() >= MIN_ANGLE_DEGREES);
        assert!((m.boundary_length(|t| t == EdgeTag::Sigma) - 0.5).abs() < 1e-12);
        let verts = m.num_vertices() as i64;
        let edges = m.num_edges() as i64;
        let tris = m.triangles().len() as i64;
        assert_eq!(verts - edges + tris, 1);
    }
}

#[test]
fn refinement_levels_and_spacing() {
    let ms = levels(&unit_square());
    for (k, w) in ms.windows(2).enumerate() {
        assert_eq!(w[1].level(), k as u32 + 1);
        assert_eq!(w[1].triangles().len(), 4 * w[0].triangles().len());
        assert!((w[1].h() - 0.5 * w[0].h()).abs() < 1e-12);
    }
}

#[test]
fn connectivity_is_fixed_along_a_perturbation_family() {
    let d = default_domain();
    let fam = PerturbationFamily::single_mode(&d);
    let h = d.r0() / 8.0;
    let base = generate_mesh(&d, h).unwrap();
    for &delta in &fam.amplitudes {
        let m = generate_mesh(&fam.domain(&d, delta).unwrap(), h).unwrap();
        assert_eq!(m.triangles(), base.triangles());
        assert_eq!(m.num_vertices(), base.num_vertices());
    }
}

#[test]
fn export_lists_every_entity() {
    let m = generate_mesh(&unit_square(), 1.0 / 16.0).unwrap();
    let text = m.export_text();
    let expected = 3 + m.num_vertices() + m.triangles().len() + m.boundary_edges().len();
    assert_eq!(text.lines().count(), expected);
    assert!(text.lines().any(|l| l.ends_with(" Sigma")));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn random_domains_mesh_cleanly(seed in 0u64..10_000, amp in 0.0f64..0.03) {
        let base = default_domain();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = base
            .with_profile(corrolab::geometry::random_bump_profile(&base, &mut rng, amp))
            .unwrap();
        let m = generate_mesh(&d, d.r0() / 4.0).unwrap();
        prop_assert!(m.min_angle_degrees() >= MIN_ANGLE_DEGREES);
        prop_assert!((m.area() - exact_area(&d)).abs() < 1e-3);
        for v in m.part_vertices(|t| t == EdgeTag::Inaccessible) {
            let p = m.vertices()[v];
            prop_assert!((p.y - d.bottom(p.x)).abs() < 1e-12);
        }
    }
}
