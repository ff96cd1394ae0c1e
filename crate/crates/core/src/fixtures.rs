//! Canonical scenarios: one per measurement distribution, the measure-zero
//! degenerate layouts, the rotation and translation pathologies, and random
//! layouts. All are noise-free with a recorded truth transform.

use std::f64::consts::PI;

use rand::Rng;

use crate::geom::{Point2, RigidTransform2};
use crate::global::locus::Pair;
use crate::scenario::{Anchor, AnchorId, ControlInput, Scenario};
use crate::unicycle::{controls_to_trajectory_v, ControlSegment, UnicycleControls};

/// Truth transform shared by the hand-built fixtures.
pub const TRUTH: RigidTransform2 = RigidTransform2 {
    dx: 0.7,
    dy: -0.4,
    phi: 0.9,
};

/// A named fixture with the number of indistinguishable transforms it should
/// have, rendered like `Ind(4)`; `Ind(≤8)` for the random-count setting.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: &'static str,
    pub expected: &'static str,
    pub scenario: Scenario,
}

fn p(x: f64, y: f64) -> Point2 {
    Point2::new(x, y)
}

/// Scenario from world-frame measurement points placed by `truth`.
pub fn from_world(anchors: &[(AnchorId, Point2)], world: &[Point2], schedule: &[AnchorId], truth: RigidTransform2) -> Scenario {
    let inv = truth.inverse();
    Scenario::synthesized(
        anchors.iter().map(|&(id, position)| Anchor { id, position }).collect(),
        world.iter().map(|&w| inv.apply(w)).collect(),
        schedule.to_vec(),
        truth,
    )
    .expect("fixture is well formed")
}

const B1: Point2 = Point2::new(0.0, 0.0);
const B2: Point2 = Point2::new(5.0, 1.0);
const B3: Point2 = Point2::new(1.5, 5.5);
const B4: Point2 = Point2::new(6.0, 6.0);

fn two() -> [(AnchorId, Point2); 2] {
    [(1, B1), (2, B2)]
}

fn three() -> [(AnchorId, Point2); 3] {
    [(1, B1), (2, B2), (3, B3)]
}

/// One fixture per distribution of the taxonomy table.
pub fn taxonomy_suite() -> Vec<Fixture> {
    let f = |name, expected, scenario| Fixture { name, expected, scenario };
    vec![
        f("single-C1", "Ind(∞×∞)", from_world(&[(1, B1)], &[p(2.0, 1.0)], &[1], TRUTH)),
        f(
            "single-C2",
            "Ind(2×∞)",
            from_world(&[(1, B1)], &[p(2.0, 1.0), p(3.0, 2.0)], &[1, 1], TRUTH),
        ),
        f(
            "single-C3",
            "Ind(∞)",
            from_world(&[(1, B1)], &[p(2.0, 1.0), p(3.0, 2.0), p(1.5, 3.0)], &[1, 1, 1], TRUTH),
        ),
        f("1+1", "Ind(2×∞)", from_world(&two(), &[p(1.0, 2.0), p(3.0, 3.0)], &[1, 2], TRUTH)),
        f(
            "2+1",
            "Ind(4)",
            from_world(&two(), &[p(1.0, 2.0), p(2.0, 3.5), p(3.2, 2.1)], &[1, 1, 2], TRUTH),
        ),
        f(
            "3+1",
            "Ind(2)",
            from_world(&two(), &[p(1.0, 2.0), p(2.0, 3.5), p(3.0, 3.0), p(4.0, 2.5)], &[1, 1, 1, 2], TRUTH),
        ),
        f(
            "1+1+1",
            "Ind(≤8)",
            from_world(&three(), &[p(1.0, 2.0), p(3.0, 3.0), p(2.5, 4.0)], &[1, 2, 3], TRUTH),
        ),
        f(
            "2+2",
            "Ind(1)",
            from_world(&two(), &[p(1.0, 2.0), p(2.0, 3.5), p(3.2, 2.1), p(4.1, 3.3)], &[1, 1, 2, 2], TRUTH),
        ),
        f(
            "2+1+1",
            "Ind(1)",
            from_world(&three(), &[p(1.0, 2.0), p(2.0, 3.5), p(3.2, 2.1), p(3.9, 3.6)], &[1, 1, 2, 3], TRUTH),
        ),
        f(
            "3+2",
            "Ind(1)",
            from_world(
                &two(),
                &[p(1.0, 2.0), p(2.0, 3.5), p(3.0, 3.0), p(4.0, 2.5), p(4.6, 3.7)],
                &[1, 1, 1, 2, 2],
                TRUTH,
            ),
        ),
        f(
            "3+1+1",
            "Ind(1)",
            from_world(
                &three(),
                &[p(1.0, 2.0), p(2.0, 3.5), p(3.0, 3.0), p(4.0, 2.5), p(3.6, 4.2)],
                &[1, 1, 1, 2, 3],
                TRUTH,
            ),
        ),
        f(
            "1+1+1+1",
            "Ind(1)",
            from_world(
                &[(1, B1), (2, B2), (3, B3), (4, B4)],
                &[p(1.0, 2.0), p(3.0, 3.0), p(2.5, 4.0), p(3.7, 4.4)],
                &[1, 2, 3, 4],
                TRUTH,
            ),
        ),
    ]
}

/// 1+1 with both points on the anchor line, between the anchors.
pub fn case1_straight() -> Scenario {
    from_world(&[(1, p(0.0, 0.0)), (2, p(4.0, 0.0))], &[p(1.0, 0.0), p(2.5, 0.0)], &[1, 2], TRUTH)
}

/// 1+1+1 whose third range circle touches the locus from outside at the
/// truth and misses it everywhere else.
pub fn case2_tangent_locus() -> Scenario {
    let (b1, b2) = (p(0.0, 0.0), p(5.0, 1.0));
    let (p0, p1, p2) = (p(0.0, 0.0), p(2.0, 0.5), p(2.5, 2.5));
    let pair = Pair {
        b1,
        b2,
        p0,
        p1,
        rho0: 2.0,
        rho1: 2.2,
    };
    let dir = Point2::polar(1.0, 0.4);
    let domain = pair.domain().expect("non-empty domain");
    let height = |phi: f64, sign: f64| pair.place(phi, sign).map(|t| t.apply(p2).dot(dir));

    // coarse scan of both branches, then golden-section refinement
    let mut best = (f64::NEG_INFINITY, 0.0, 1.0);
    for d in &domain {
        for k in 0..=20000 {
            let phi = d.lo + d.len() * k as f64 / 20000.0;
            for sign in [1.0, -1.0] {
                if let Some(h) = height(phi, sign) {
                    if h > best.0 {
                        best = (h, phi, sign);
                    }
                }
            }
        }
    }
    let (_, phi0, sign) = best;
    let width = 1e-3;
    let (mut a, mut b) = (phi0 - width, phi0 + width);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..200 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        let hc = height(c, sign).unwrap_or(f64::NEG_INFINITY);
        let hd = height(d, sign).unwrap_or(f64::NEG_INFINITY);
        if hc > hd {
            b = d;
        } else {
            a = c;
        }
    }
    let phi = 0.5 * (a + b);
    let truth = pair.place(phi, sign).expect("on the domain");

    // outward normal of the locus at the touching point
    let h = 1e-6;
    let q_plus = pair.place(phi + h, sign).unwrap().apply(p2);
    let q_minus = pair.place(phi - h, sign).unwrap().apply(p2);
    let tangent = (q_plus - q_minus).normalized();
    let mut normal = tangent.perp();
    if normal.dot(dir) < 0.0 {
        normal = -normal;
    }
    let r = 0.3;
    let b3 = truth.apply(p2) + normal * r;
    let anchors = vec![Anchor { id: 1, position: b1 }, Anchor { id: 2, position: b2 }, Anchor { id: 3, position: b3 }];
    Scenario::synthesized(anchors, vec![p0, p1, p2], vec![1, 2, 3], truth).expect("fixture is well formed")
}

/// 2+1 where the second anchor's circle is tangent to the circle of one
/// virtual placement and misses the mirrored one.
pub fn case3_tangent_circles() -> Scenario {
    from_world(
        &[(1, p(0.0, 0.0)), (2, p(3.0, 0.0))],
        &[p(0.0, 1.0), p(2.0, 1.0), p(4.0, 0.0)],
        &[1, 1, 2],
        TRUTH,
    )
}

/// 3+1 with the single point on the anchor line beyond the second anchor.
pub fn case4_tangent_3p1() -> Scenario {
    from_world(
        &[(1, p(0.0, 0.0)), (2, p(3.0, 0.0))],
        &[p(0.0, 1.0), p(1.0, 1.5), p(-1.0, 2.0), p(4.0, 0.0)],
        &[1, 1, 1, 2],
        TRUTH,
    )
}

/// C3 set on a pivot anchor plus a C2 segment aligned with the pivot; with
/// `third`, a single measurement of a third anchor placed so that the same
/// rotation about the pivot preserves its range.
pub fn example1_rotation(third: bool) -> Scenario {
    let (b1, b2, b3) = (p(0.0, 0.0), p(4.0, 0.0), p(-1.0, 4.0));
    let line_angle: f64 = 0.6;
    let u = Point2::polar(1.0, line_angle);
    let mut world = vec![p(1.0, -1.0), p(2.0, -0.5), p(0.5, -2.0), u * 2.0, u * 3.5];
    let mut schedule = vec![1, 1, 1, 2, 2];
    let mut anchors = vec![(1, b1), (2, b2)];
    if third {
        // the rotation about b1 is 2(angle(b2 − b1) − line_angle); a point at
        // angle alpha from b1 keeps its range to b3 when it equals
        // 2(angle(b3 − b1) − alpha)
        let eta = (b2 - b1).angle() - line_angle;
        let alpha = (b3 - b1).angle() - eta;
        world.push(b1 + Point2::polar(2.5, alpha));
        schedule.push(3);
        anchors.push((3, b3));
    }
    from_world(&anchors, &world, &schedule, TRUTH)
}

/// Two (three with `third`) C2 segments, all parallel, each at the same
/// signed offset from its anchor.
pub fn example2_translation(third: bool) -> Scenario {
    let dir = Point2::polar(1.0, 0.3);
    let n = dir.perp();
    let delta = 0.8;
    let anchors_all = [(1, p(0.0, 0.0)), (2, p(5.0, 1.0)), (3, p(2.0, 6.0))];
    let k = if third { 3 } else { 2 };
    let mut world = Vec::new();
    let mut schedule = Vec::new();
    for (i, &(id, b)) in anchors_all.iter().take(k).enumerate() {
        let foot = b - n * delta;
        world.push(foot + dir * (0.5 + 0.3 * i as f64));
        world.push(foot + dir * (2.0 + 0.2 * i as f64));
        schedule.extend([id, id]);
    }
    from_world(&anchors_all[..k], &world, &schedule, TRUTH)
}

/// Random layout in a `side` × `side` box: `counts[i]` measurements from
/// anchor `i + 1`, every anchor and world point at least `min_sep` from every
/// other, random truth.
pub fn random_layout<R: Rng>(rng: &mut R, counts: &[usize], side: f64, min_sep: f64) -> Scenario {
    let n_anchors = counts.len();
    let n_points: usize = counts.iter().sum();
    let mut features: Vec<Point2> = Vec::with_capacity(n_anchors + n_points);
    while features.len() < n_anchors + n_points {
        let c = p(rng.random_range(0.0..side), rng.random_range(0.0..side));
        if features.iter().all(|f| f.dist(c) >= min_sep) {
            features.push(c);
        }
    }
    let anchors: Vec<(AnchorId, Point2)> = (0..n_anchors).map(|i| (i as AnchorId + 1, features[i])).collect();
    let schedule: Vec<AnchorId> = counts
        .iter()
        .enumerate()
        .flat_map(|(i, &c)| std::iter::repeat_n(i as AnchorId + 1, c))
        .collect();
    let truth = RigidTransform2::new(
        rng.random_range(-side..side),
        rng.random_range(-side..side),
        rng.random_range(-PI..PI),
    );
    from_world(&anchors, &features[n_anchors..], &schedule, truth)
}

/// Random piecewise-constant unicycle run over at most `horizon` seconds with
/// `n_meas` samples, each ranged by one of `n_anchors` random anchors.
pub fn random_unicycle<R: Rng>(rng: &mut R, n_anchors: usize, n_meas: usize, horizon: f64) -> Scenario {
    let n_seg = rng.random_range(1..=4);
    let segments: Vec<ControlSegment> = (0..n_seg)
        .map(|_| ControlSegment {
            v: rng.random_range(0.2..2.0),
            omega: rng.random_range(-1.0..1.0),
            duration: horizon / n_seg as f64 * rng.random_range(0.5..1.0),
        })
        .collect();
    let controls = UnicycleControls::new(segments).expect("valid segments");
    let mut times: Vec<f64> = (0..n_meas).map(|_| rng.random_range(0.0..controls.horizon())).collect();
    times.sort_by(f64::total_cmp);
    let traj = controls_to_trajectory_v(&controls, &times).expect("times inside horizon");
    let anchors: Vec<Anchor> = (0..n_anchors)
        .map(|i| Anchor {
            id: i as AnchorId + 1,
            position: p(rng.random_range(-15.0..15.0), rng.random_range(-15.0..15.0)),
        })
        .collect();
    let schedule: Vec<AnchorId> = (0..n_meas).map(|k| (k % n_anchors) as AnchorId + 1).collect();
    let truth = RigidTransform2::new(rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0), rng.random_range(-PI..PI));
    let mut s = Scenario::synthesized(anchors, traj.points.clone(), schedule, truth).expect("well formed");
    s.trajectory = traj;
    s.controls = Some(ControlInput {
        controls,
        sample_times: times,
    });
    s
}

/// One fixture per row of the Gramian rank catalogue with the rank the
/// Gramian at the truth should have.
pub fn gramian_rank_catalogue() -> Vec<(&'static str, Scenario, usize)> {
    let (b1, b2, b3) = (B1, B2, B3);
    let one_anchor = from_world(&[(1, b1)], &[p(2.0, 1.0), p(3.0, 2.0), p(1.5, 3.0)], &[1, 1, 1], TRUTH);
    // pair on a ray through the anchor
    let collinear_pair = from_world(&[(1, b1)], &[p(1.0, 1.0), p(2.0, 2.0)], &[1, 1], TRUTH);
    let p1p1 = from_world(&two(), &[p(1.0, 2.0), p(3.0, 3.0)], &[1, 2], TRUTH);
    let p2p1 = from_world(&two(), &[p(1.0, 2.0), p(2.0, 3.5), p(3.2, 2.1)], &[1, 1, 2], TRUTH);
    let aligned = b1 + (b2 - b1) * 1.4;
    let p2p1_aligned = from_world(&two(), &[p(1.0, 2.0), p(2.0, 3.5), aligned], &[1, 1, 2], TRUTH);
    let p2p2 = from_world(&two(), &[p(1.0, 2.0), p(2.0, 3.5), p(3.2, 2.1), p(4.1, 3.3)], &[1, 1, 2, 2], TRUTH);
    let (p0, p1) = (p(1.0, 2.0), p(3.0, 3.0));
    let line = crate::local::critical_line_1p1p1_local(b1, b2, b3, p0, p1).expect("independent prefix");
    let on_line = line.at(2.3);
    let off_line = on_line + line.normal() * 0.5;
    let p1p1p1_on = from_world(&three(), &[p0, p1, on_line], &[1, 2, 3], TRUTH);
    let p1p1p1_off = from_world(&three(), &[p0, p1, off_line], &[1, 2, 3], TRUTH);
    vec![
        ("single anchor", one_anchor, 2),
        ("pair collinear with anchor", collinear_pair, 1),
        ("1+1", p1p1, 2),
        ("1+1 four points collinear", case1_straight(), 1),
        ("2+1", p2p1, 3),
        ("2+1 anchors aligned with last point", p2p1_aligned, 2),
        ("2+2", p2p2, 3),
        ("1+1+1 last point on critical line", p1p1p1_on, 2),
        ("1+1+1", p1p1p1_off, 3),
    ]
}
