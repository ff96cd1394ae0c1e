use serde::Serialize;

use super::locus::Pair;
use super::{group_views, virtual_anchor, Distribution, GroupView, VirtualAnchor};
use crate::geom::{angle_diff, fit_line, point_line_distance, Point2, RigidTransform2};
use crate::scenario::{AnchorSetClass, Scenario};
use crate::solver::{jacobian, SolutionSet};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct DegenerateFlags {
    pub case1_straight: bool,
    pub case2_tangent_locus: bool,
    pub case3_tangent_circles: bool,
    pub case4_tangent_3p1: bool,
    pub pathological_rotation: bool,
    pub pathological_translation: bool,
}

impl DegenerateFlags {
    pub fn any_case(&self) -> bool {
        self.case1_straight || self.case2_tangent_locus || self.case3_tangent_circles || self.case4_tangent_3p1
    }

    pub fn any_pathology(&self) -> bool {
        self.pathological_rotation || self.pathological_translation
    }
}

/// Degenerate-case and pathology flags of a scenario given its solutions.
pub fn detect_pathologies(s: &Scenario, solutions: &SolutionSet) -> DegenerateFlags {
    let Ok(groups) = group_views(s) else {
        return DegenerateFlags::default();
    };
    let tol = s.tolerances.degenerate;
    let d = Distribution::of(s);
    let mut f = DegenerateFlags::default();
    match d.0.as_slice() {
        [1, 1] => f.case1_straight = Pair::from_groups(&groups[0], &groups[1]).flat_configuration(tol).is_some(),
        [1, 1, 1] => f.case2_tangent_locus = tangent_root(s, solutions),
        [2, 1] => f.case3_tangent_circles = tangent_second_anchor(s, &groups, AnchorSetClass::C2),
        [3, 1] => f.case4_tangent_3p1 = tangent_second_anchor(s, &groups, AnchorSetClass::C3),
        _ => {}
    }
    // a lone anchor is symmetric under both motions already
    let multi = groups.len() >= 2;
    for sol in solutions.solutions.iter().filter(|_| multi) {
        let world = WorldGroups::new(&groups, sol.transform);
        f.pathological_rotation |= rotation_symmetry(&world, tol);
        f.pathological_translation |= translation_symmetry(&world, tol);
    }
    f
}

/// A root where the range error of the third point touches zero without
/// crossing shows up as a rank drop of the Jacobian.
fn tangent_root(s: &Scenario, solutions: &SolutionSet) -> bool {
    let rank_tol = s.tolerances.rank;
    solutions.isolated().any(|sol| {
        let Ok(rows) = jacobian(s, sol.transform) else {
            return false;
        };
        let mut m = nalgebra::Matrix3::<f64>::zeros();
        for r in &rows {
            let v = nalgebra::Vector3::new(r[0], r[1], r[2]);
            m += v * v.transpose();
        }
        let ev = m.symmetric_eigenvalues();
        let max = ev.max();
        max > 0.0 && ev.min() <= rank_tol * max
    })
}

/// Distance from each virtual position of the multi-point anchor to the
/// single point equals `D ± ρ`: the two range circles are tangent.
fn tangent_second_anchor(s: &Scenario, groups: &[GroupView], class: AnchorSetClass) -> bool {
    let Some(i) = groups.iter().position(|g| g.class == class) else {
        return false;
    };
    let j = 1 - i;
    let tol = s.tolerances.degenerate;
    let big_d = groups[i].anchor.dist(groups[j].anchor);
    let rho = groups[j].rho[0];
    let p = groups[j].points[0];
    let VirtualAnchor::Points(vs) = virtual_anchor(&groups[i], s.tolerances.tangency, s.tolerances.accept) else {
        return false;
    };
    vs.iter().any(|&a| {
        let d = p.dist(a);
        (d - (big_d + rho)).abs() <= tol || (d - (big_d - rho).abs()).abs() <= tol
    })
}

/// Anchor groups with their points mapped to the world frame.
struct WorldGroups<'a> {
    groups: &'a [GroupView],
    points: Vec<Vec<Point2>>,
}

impl<'a> WorldGroups<'a> {
    fn new(groups: &'a [GroupView], t: RigidTransform2) -> Self {
        let points = groups.iter().map(|g| g.points.iter().map(|&p| t.apply(p)).collect()).collect();
        WorldGroups { groups, points }
    }
}

/// A rotation about an anchor holding a C3 set that maps every other
/// anchor's points onto their mirror images across the anchor pair's axis.
fn rotation_symmetry(w: &WorldGroups, tol: f64) -> bool {
    (0..w.groups.len())
        .filter(|&i| w.groups[i].class == AnchorSetClass::C3)
        .any(|i| {
            let pivot = w.groups[i].anchor;
            let mut eta: Option<f64> = None;
            let mut has_line = false;
            for (g, pts) in w.groups.iter().zip(&w.points).enumerate().filter(|(k, _)| *k != i).map(|(_, x)| x) {
                let beta = (g.anchor - pivot).angle();
                let alpha = match g.class {
                    AnchorSetClass::C3 => return false,
                    AnchorSetClass::C1 => {
                        if pts[0].dist(pivot) <= tol {
                            return false;
                        }
                        (pts[0] - pivot).angle()
                    }
                    AnchorSetClass::C2 => {
                        let Some(line) = fit_line(pts) else { return false };
                        if point_line_distance(pivot, &line) > tol {
                            return false;
                        }
                        has_line = true;
                        line.direction.angle()
                    }
                };
                let e = crate::geom::wrap_angle(2.0 * (beta - alpha));
                match eta {
                    None => eta = Some(e),
                    Some(prev) if angle_diff(prev, e).abs() > tol => return false,
                    _ => {}
                }
            }
            has_line && eta.is_some_and(|e| e.abs() > tol)
        })
}

/// A translation that maps every measurement line onto its mirror image
/// about its anchor, with single points kept on their range circles.
fn translation_symmetry(w: &WorldGroups, tol: f64) -> bool {
    if w.groups.iter().any(|g| g.class == AnchorSetClass::C3) {
        return false;
    }
    let mut shift: Option<Point2> = None;
    for (g, pts) in w.groups.iter().zip(&w.points) {
        if g.class != AnchorSetClass::C2 {
            continue;
        }
        let Some(line) = fit_line(pts) else { return false };
        let n = line.normal();
        let t = n * (2.0 * n.dot(g.anchor - line.point));
        match shift {
            None => shift = Some(t),
            Some(prev) if prev.dist(t) > tol => return false,
            _ => {}
        }
    }
    let Some(t) = shift else { return false };
    if t.norm() <= tol {
        return false;
    }
    w.groups
        .iter()
        .zip(&w.points)
        .filter(|(g, _)| g.class == AnchorSetClass::C1)
        .all(|(g, pts)| ((pts[0] - g.anchor).dot(t) + 0.5 * t.norm_sq()).abs() <= tol * t.norm().max(1.0))
}
