use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::fixtures::{self, from_world, random_unicycle, TRUTH};
use crate::scenario::Measurements;
use crate::unicycle::ControlSegment;

fn p(x: f64, y: f64) -> Point2 {
    Point2::new(x, y)
}

fn report(s: &Scenario) -> GramianReport {
    build_gramian(s, s.truth.unwrap()).unwrap()
}

fn max_diff(a: &SymMat3, b: &SymMat3) -> f64 {
    (0..3)
        .flat_map(|i| (0..3).map(move |j| (i, j)))
        .map(|(i, j)| (a.get(i, j) - b.get(i, j)).abs())
        .fold(0.0, f64::max)
}

#[test]
fn contribution_on_measurement_ray() {
    let c = gramian_contribution(p(1.0, 0.0), p(0.0, 0.0), p(1.0, 0.0)).unwrap();
    assert_eq!(c.gamma, [1.0, 0.0, 0.0]);
    assert_eq!(c.matrix, SymMat3::diag(1.0, 0.0, 0.0));
}

#[test]
fn contribution_off_ray() {
    let c = gramian_contribution(p(0.0, 1.0), p(0.0, 0.0), p(1.0, 1.0)).unwrap();
    assert!(c.gamma[0].abs() < 1e-15);
    assert!((c.gamma[1] - 1.0).abs() < 1e-15);
    assert!((c.gamma[2] + 1.0).abs() < 1e-15);
    assert!(matches!(
        gramian_contribution(p(2.0, 2.0), p(2.0, 2.0), p(0.0, 0.0)),
        Err(Error::ZeroRange { .. })
    ));
}

fn coord() -> impl Strategy<Value = f64> {
    -20.0..20.0f64
}

fn point() -> impl Strategy<Value = Point2> {
    (coord(), coord()).prop_map(|(x, y)| p(x, y))
}

proptest! {
    #[test]
    fn contribution_is_rank_one_psd(pk in point(), b in point(), pf in point()) {
        prop_assume!(pk.dist(b) > 1e-3);
        let c = gramian_contribution(pk, b, pf).unwrap();
        let (ev, _) = c.matrix.eigen();
        let scale = c.matrix.trace();
        prop_assert!(ev[0] >= -1e-12 * scale);
        prop_assert!(ev[1].abs() <= 1e-12 * scale);
        prop_assert!((c.matrix.trace() - (1.0 + c.p * c.p)).abs() <= 1e-12 * scale);
        // |p| is the distance of the final point from the anchor–point line
        let line = Line2::through(b, pk).unwrap();
        prop_assert!((c.p.abs() - line.signed_distance(pf).abs()).abs() <= 1e-9 * (1.0 + c.p.abs()));
    }

    #[test]
    fn gramian_ignores_measured_ranges(seed in 0u64..1000, k in 1.1..3.0f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = fixtures::random_layout(&mut rng, &[2, 1, 1], 10.0, 0.1);
        let mut scaled = s.clone();
        let rho: Vec<f64> = s.rho().unwrap().iter().map(|r| r * k).collect();
        scaled.measurements = Some(Measurements { rho });
        let a = report(&s);
        let b = report(&scaled);
        prop_assert_eq!(a.gramian, b.gramian);
    }
}

#[test]
fn single_measurement_null_space() {
    let s = from_world(&[(1, p(2.0, -1.0))], &[p(4.0, 3.0)], &[1], TRUTH);
    let r = report(&s);
    assert_eq!(r.rank, 1);
    assert_eq!(r.verdict, WeakVerdict::WeaklyUnconstructible);
    assert_eq!(r.null_basis.len(), 2);
    let pf = r.final_point;
    for c in [p(2.0, -1.0), pf] {
        let g = [-(pf.y - c.y), pf.x - c.x, 1.0];
        // projection onto the null basis recovers the generator
        let n2: f64 = g.iter().map(|x| x * x).sum();
        let proj: f64 = r
            .null_basis
            .iter()
            .map(|v| {
                let d: f64 = v.iter().zip(&g).map(|(a, b)| a * b).sum();
                d * d
            })
            .sum();
        assert!((proj - n2).abs() < 1e-9 * n2, "{proj} vs {n2}");
    }
}

#[test]
fn null_basis_is_orthonormal() {
    let s = from_world(&[(1, p(0.0, 0.0))], &[p(1.0, 1.0), p(2.0, 2.0)], &[1, 1], TRUTH);
    let r = report(&s);
    for (i, u) in r.null_basis.iter().enumerate() {
        for (j, v) in r.null_basis.iter().enumerate() {
            let d: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((d - want).abs() < 1e-12);
        }
    }
}

#[test]
fn rank_catalogue() {
    for (name, s, rank) in fixtures::gramian_rank_catalogue() {
        let r = report(&s);
        assert_eq!(r.rank, rank, "{name}: eigenvalues {:?}", r.eigenvalues);
        assert_eq!(r.verdict == WeakVerdict::WeaklyConstructible, rank == 3, "{name}");
    }
}

#[test]
fn single_anchor_always_singular() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for n in 1..8 {
        let s = fixtures::random_layout(&mut rng, &[n], 10.0, 0.1);
        assert!(report(&s).rank <= 2);
    }
}

#[test]
fn final_point_override_and_weights() {
    let s = fixtures::taxonomy_suite().into_iter().find(|f| f.name == "2+2").unwrap().scenario;
    let t = s.truth.unwrap();
    let base = build_gramian(&s, t).unwrap();
    let same = build_gramian_with(
        &s,
        t,
        &GramianOptions {
            final_point: Some(base.final_point),
            ..Default::default()
        },
    )
    .unwrap();
    assert_eq!(base, same);
    let mut weights = BTreeMap::new();
    weights.insert(1, 2.0);
    weights.insert(2, 2.0);
    let doubled = build_gramian_with(&s, t, &GramianOptions { weights, ..Default::default() }).unwrap();
    assert!(max_diff(&doubled.gramian, &base.gramian.scale(2.0)) < 1e-12);
    assert_eq!(doubled.rank, base.rank);
}

#[test]
fn numerical_matches_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..20 {
        let n_anchors = 1 + trial % 3;
        let s = random_unicycle(&mut rng, n_anchors, 3 + trial % 5, 20.0);
        let t = s.truth.unwrap();
        let closed = build_gramian(&s, t).unwrap();
        let numerical = numerical_gramian(&s.controls.as_ref().unwrap().controls, &s, t).unwrap();
        let scale = closed.eigenvalues[2].max(1.0);
        let d = max_diff(&closed.gramian, &numerical) / scale;
        assert!(d <= 1e-6, "trial {trial}: {d}");
    }
}

#[test]
fn numerical_straight_segment() {
    let controls = UnicycleControls::new(vec![ControlSegment {
        v: 1.0,
        omega: 0.0,
        duration: 2.0,
    }])
    .unwrap();
    let traj = crate::unicycle::controls_to_trajectory_v(&controls, &[1.5]).unwrap();
    let mut s = Scenario::synthesized(
        vec![crate::scenario::Anchor {
            id: 1,
            position: p(0.0, 3.0),
        }],
        traj.points.clone(),
        vec![1],
        RigidTransform2::default(),
    )
    .unwrap();
    s.controls = Some(crate::scenario::ControlInput {
        controls: controls.clone(),
        sample_times: vec![1.5],
    });
    let t = RigidTransform2::default();
    let numerical = numerical_gramian(&controls, &s, t).unwrap();
    let a = GramianReport::from_matrix(numerical, DEFAULT_RANK_TOL, Point2::ORIGIN);
    assert_eq!(a.rank, 1);
    assert_eq!(build_gramian(&s, t).unwrap().rank, 1);
}

#[test]
fn numerical_rejects_inconsistent_controls() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let s = random_unicycle(&mut rng, 2, 4, 10.0);
    let mut controls = s.controls.as_ref().unwrap().controls.clone();
    controls.segments[0].v += 0.1;
    assert!(matches!(
        numerical_gramian(&controls, &s, s.truth.unwrap()),
        Err(Error::InconsistentControls { .. })
    ));
    let mut bare = s.clone();
    bare.controls = None;
    assert!(numerical_gramian(&controls, &bare, s.truth.unwrap()).is_err());
}

#[test]
fn numerical_without_measurements_is_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let s = random_unicycle(&mut rng, 2, 4, 10.0);
    let mut empty = s.prefix(0);
    empty.controls = Some(crate::scenario::ControlInput {
        controls: s.controls.as_ref().unwrap().controls.clone(),
        sample_times: Vec::new(),
    });
    let g = numerical_gramian(&empty.controls.as_ref().unwrap().controls, &empty, s.truth.unwrap()).unwrap();
    assert_eq!(g, SymMat3::ZERO);
}

#[test]
fn single_anchor_direction_is_rotation_about_anchor() {
    let s = fixtures::taxonomy_suite().into_iter().find(|f| f.name == "single-C3").unwrap().scenario;
    let t = s.truth.unwrap();
    let r = build_gramian(&s, t).unwrap();
    assert_eq!(r.rank, 2);
    let dirs = singular_direction_report(&r, &s, t);
    assert_eq!(dirs.len(), 1);
    assert_eq!(dirs[0].tag, DirectionTag::RotationAboutAnchor { anchor: 1 });
}

#[test]
fn collinear_1p1_has_two_tagged_directions() {
    let s = fixtures::case1_straight();
    let t = s.truth.unwrap();
    let r = build_gramian(&s, t).unwrap();
    assert_eq!(r.rank, 1);
    let dirs = singular_direction_report(&r, &s, t);
    assert_eq!(dirs.len(), 2);
    assert!(dirs.iter().all(|d| d.tag != DirectionTag::Unclassified));
    assert_eq!(dirs[0].tag, DirectionTag::RotationAboutAnchor { anchor: 1 });
    assert_eq!(dirs[1].tag, DirectionTag::RotationAboutAnchor { anchor: 2 });
}

#[test]
fn full_rank_has_no_directions() {
    let s = fixtures::taxonomy_suite().into_iter().find(|f| f.name == "2+2").unwrap().scenario;
    let t = s.truth.unwrap();
    let r = build_gramian(&s, t).unwrap();
    assert_eq!(r.rank, 3);
    assert!(singular_direction_report(&r, &s, t).is_empty());
}

#[test]
fn critical_line_through_third_anchor() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let mut checked = 0;
    while checked < 50 {
        let s = fixtures::random_layout(&mut rng, &[1, 1, 1], 10.0, 0.1);
        let t = s.truth.unwrap();
        let w = s.world_points(t);
        let (b1, b2, b3) = (s.anchor_at(0), s.anchor_at(1), s.anchor_at(2));
        let Ok(line) = critical_line_1p1p1_local(b1, b2, b3, w[0], w[1]) else {
            continue;
        };
        assert!(line.signed_distance(b3).abs() < 1e-9);
        // det[γ₀ γ₁ γ₂] as a function of the last point, evaluated directly
        let det = |p2: Point2| {
            let g: Vec<[f64; 3]> = [(w[0], b1), (w[1], b2), (p2, b3)]
                .iter()
                .map(|&(pk, b)| gramian_contribution(pk, b, p2).unwrap().gamma)
                .collect();
            nalgebra::Matrix3::new(
                g[0][0], g[0][1], g[0][2], g[1][0], g[1][1], g[1][2], g[2][0], g[2][1], g[2][2],
            )
            .determinant()
        };
        for s_ in [-3.0, -1.0, 0.7, 2.5] {
            let on = line.at(s_);
            assert!(det(on).abs() < 1e-9, "{}", det(on));
            let off = on + line.normal() * 0.5;
            assert!(det(off).abs() > 1e-6);
        }
        checked += 1;
    }
}

#[test]
fn critical_line_rank_drop() {
    let (b1, b2, b3) = (p(0.0, 0.0), p(5.0, 1.0), p(1.5, 5.5));
    let (p0, p1) = (p(1.0, 2.0), p(3.0, 3.0));
    let line = critical_line_1p1p1_local(b1, b2, b3, p0, p1).unwrap();
    let anchors = [(1, b1), (2, b2), (3, b3)];
    for s_ in [-2.0, 1.0, 4.0] {
        let on = line.at(s_);
        let s = from_world(&anchors, &[p0, p1, on], &[1, 2, 3], TRUTH);
        assert_eq!(report(&s).rank, 2);
        let s = from_world(&anchors, &[p0, p1, on + line.normal() * 0.05], &[1, 2, 3], TRUTH);
        assert_eq!(report(&s).rank, 3);
    }
}

#[test]
fn critical_line_degenerate_prefix() {
    // all four points on one line: γ₀ ∥ γ₁ wherever the last point goes
    let err = critical_line_1p1p1_local(p(0.0, 0.0), p(2.0, 0.0), p(5.0, 5.0), p(1.0, 0.0), p(3.0, 0.0));
    assert!(matches!(err, Err(Error::DegeneratePrefix)));
}
