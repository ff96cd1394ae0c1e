//! Closed-form enumeration of indistinguishable roto-translations, taxonomy
//! classification, degenerate-case and pathology detection, and critical
//! lines.
//!
//! Most constructions work with *virtual anchors*: the position of an anchor
//! expressed in the vehicle frame, which is whatever point is at the measured
//! ranges from that anchor's measurement points. Two virtual anchors at the
//! true inter-anchor distance fix a roto-translation.

mod critical;
pub(crate) mod locus;
mod pathology;
mod registry;

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geom::{self, circle_circle_intersect, Circle, Point2, RigidTransform2};
use crate::scenario::{AnchorSetClass, Scenario};
use crate::solver::{
    levenberg_marquardt, make_solution, Dedup, FamilyInfo, IndClass, RangeProblem, Solution, SolutionSet,
    SolverConfig,
};

pub use critical::{critical_lines_2p2, critical_lines_next_point, CriticalLine, CriticalLineSet, LineProvenance};
pub use locus::{
    emit_locus_1p1p1, one_plus_one_domain, solve_1p1, solve_1p1p1, DomainInterval, Locus, OnePlusOneFamily,
};
pub use pathology::{detect_pathologies, DegenerateFlags};
pub use registry::{ClosedFormRegistry, ClosedFormStrategy};

/// Per-anchor informative counts, sorted descending.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Distribution(pub Vec<usize>);

impl Distribution {
    pub fn of(s: &Scenario) -> Distribution {
        let mut parts: Vec<usize> = s
            .group_classes()
            .into_iter()
            .map(|(_, c)| c.informative_count())
            .collect();
        parts.sort_unstable_by(|a, b| b.cmp(a));
        Distribution(parts)
    }

    pub fn parse(text: &str) -> Option<Distribution> {
        let mut parts = text
            .split('+')
            .map(|p| p.trim().parse::<usize>().ok())
            .collect::<Option<Vec<_>>>()?;
        parts.sort_unstable_by(|a, b| b.cmp(a));
        Some(Distribution(parts))
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn max(&self) -> usize {
        self.0.iter().copied().max().unwrap_or(0)
    }

    /// Settings that can never be constructible.
    pub fn in_unconstructible_region(&self) -> bool {
        self.0.len() == 1 || matches!(self.0.as_slice(), [1, 1] | [2, 1] | [3, 1] | [1, 1, 1])
    }

    /// Settings that are constructible unless the trajectory is pathological.
    pub fn in_constructible_region(&self) -> bool {
        let t = self.total();
        t >= 4 && self.max() + 2 <= t
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|p| p.to_string()).collect();
        f.write_str(&parts.join("+"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Unconstructible,
    ConstructibleGeneric,
    DegenerateConstructible,
    PathologicalUnconstructible,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaxonomyClass {
    pub distribution: String,
    pub verdict: Verdict,
    pub ind_count: IndClass,
}

/// Full result of the global analysis of one scenario.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GlobalAnalysis {
    pub taxonomy: TaxonomyClass,
    pub strategy: String,
    pub solutions: SolutionSet,
    pub flags: DegenerateFlags,
}

/// Law-of-cosines angle at the anchor between two measurement points.
///
/// Returns the polar-angle offsets `±δ` of the second point, `{0}` or `{π}`
/// in the diameter case, or nothing when no triangle exists.
pub fn delta_angle(rho0: f64, rho1: f64, s01: f64) -> Result<Vec<f64>> {
    delta_angle_tol(rho0, rho1, s01, geom::DEFAULT_TANGENCY_TOL)
}

pub fn delta_angle_tol(rho0: f64, rho1: f64, s01: f64, tol: f64) -> Result<Vec<f64>> {
    for (name, v) in [("rho0", rho0), ("rho1", rho1), ("s01", s01)] {
        if !(v > 0.0) {
            return Err(Error::NonPositiveInput(name));
        }
    }
    let c = (rho0 * rho0 + rho1 * rho1 - s01 * s01) / (2.0 * rho0 * rho1);
    if c.abs() > 1.0 + tol {
        return Ok(Vec::new());
    }
    if c >= 1.0 - tol {
        return Ok(vec![0.0]);
    }
    if c <= -1.0 + tol {
        return Ok(vec![std::f64::consts::PI]);
    }
    let d = c.acos();
    Ok(vec![d, -d])
}

/// Ind class of a single-anchor setting, with `anchor` given in the same
/// frame as `points`.
pub fn single_anchor_family(points: &[Point2], anchor: Point2, tol: f64) -> IndClass {
    match crate::scenario::classify_anchor_set(points, anchor, tol) {
        AnchorSetClass::C1 => IndClass::ContinuousFamily {
            dim: 2,
            multiplicity: 1,
        },
        AnchorSetClass::C2 => {
            let through_anchor = geom::fit_line(points)
                .is_some_and(|l| geom::point_line_distance(anchor, &l) <= tol);
            IndClass::ContinuousFamily {
                dim: 1,
                multiplicity: if through_anchor { 1 } else { 2 },
            }
        }
        AnchorSetClass::C3 => IndClass::ContinuousFamily {
            dim: 1,
            multiplicity: 1,
        },
    }
}

/// One anchor's measurements with their class.
#[derive(Debug, Clone)]
pub(crate) struct GroupView {
    pub anchor: Point2,
    pub class: AnchorSetClass,
    pub points: Vec<Point2>,
    pub rho: Vec<f64>,
}

pub(crate) fn group_views(s: &Scenario) -> Result<Vec<GroupView>> {
    let rho = s.require_rho()?;
    Ok(s.group_classes()
        .into_iter()
        .map(|(g, class)| GroupView {
            anchor: g.anchor,
            points: g.indices.iter().map(|&k| s.point(k)).collect(),
            rho: g.indices.iter().map(|&k| rho[k]).collect(),
            class,
        })
        .collect())
}

/// Where an anchor can sit in the vehicle frame given its own ranges.
#[derive(Debug, Clone, PartialEq)]
pub(crate) enum VirtualAnchor {
    Points(Vec<Point2>),
    Circle(Circle),
}

/// Virtual anchor positions of one group. `tangency` decides when two
/// candidates collapse into one; `accept` filters candidates against every
/// range of the group.
pub(crate) fn virtual_anchor(g: &GroupView, tangency: f64, accept: f64) -> VirtualAnchor {
    let consistent = |a: Point2| {
        g.points
            .iter()
            .zip(&g.rho)
            .all(|(p, r)| (p.dist(a) - r).abs() <= accept.max(1e-9 * r.max(1.0)))
    };
    match g.class {
        AnchorSetClass::C1 => VirtualAnchor::Circle(Circle::new(g.points[0], g.rho[0])),
        AnchorSetClass::C2 => {
            let (i, j) = farthest_pair(&g.points);
            let hit = circle_circle_intersect(
                Circle::new(g.points[i], g.rho[i]),
                Circle::new(g.points[j], g.rho[j]),
                tangency,
            );
            VirtualAnchor::Points(hit.points().into_iter().filter(|&a| consistent(a)).collect())
        }
        AnchorSetClass::C3 => {
            if let Some(k) = g.rho.iter().position(|&r| r <= tangency) {
                return VirtualAnchor::Points(vec![g.points[k]]);
            }
            VirtualAnchor::Points(trilaterate(&g.points, &g.rho).into_iter().filter(|&a| consistent(a)).collect())
        }
    }
}

fn farthest_pair(points: &[Point2]) -> (usize, usize) {
    let mut best = (0, 0, -1.0);
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let d = points[i].dist(points[j]);
            if d > best.2 {
                best = (i, j, d);
            }
        }
    }
    (best.0, best.1)
}

/// Least-squares position from ranges to three or more non-collinear points.
pub(crate) fn trilaterate(points: &[Point2], rho: &[f64]) -> Option<Point2> {
    let p0 = points[0];
    let (mut a00, mut a01, mut a11, mut b0, mut b1) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for k in 1..points.len() {
        let d = points[k] - p0;
        let rhs = 0.5 * (d.norm_sq() - rho[k] * rho[k] + rho[0] * rho[0]);
        a00 += d.x * d.x;
        a01 += d.x * d.y;
        a11 += d.y * d.y;
        b0 += d.x * rhs;
        b1 += d.y * rhs;
    }
    let det = a00 * a11 - a01 * a01;
    if det.abs() <= 1e-300 {
        return None;
    }
    let x = (a11 * b0 - a01 * b1) / det;
    let y = (a00 * b1 - a01 * b0) / det;
    Some(p0 + Point2::new(x, y))
}

/// Transforms placing virtual anchor `a` at `ba` and a position of the other
/// anchor's virtual set, at distance `‖ba − bb‖` from `a`, at `bb`.
pub(crate) fn pair_transforms(a: Point2, other: &VirtualAnchor, ba: Point2, bb: Point2, tangency: f64) -> Vec<RigidTransform2> {
    let dist = ba.dist(bb);
    let partners = match other {
        VirtualAnchor::Points(v) => v.clone(),
        VirtualAnchor::Circle(c) => circle_circle_intersect(Circle::new(a, dist), *c, tangency).points(),
    };
    partners
        .into_iter()
        .filter(|b| b.dist(a) > 0.0)
        .map(|b| RigidTransform2::from_two_points(a, b, ba, bb))
        .collect()
}

/// Candidate transforms from the smallest finite sub-pattern of the
/// scenario, or `None` when the setting has no finite sub-pattern.
pub(crate) fn finite_candidates(s: &Scenario, groups: &[GroupView]) -> Option<Vec<RigidTransform2>> {
    let tang = s.tolerances.tangency;
    let acc = s.tolerances.accept;
    let pivot = groups
        .iter()
        .position(|g| g.class == AnchorSetClass::C3)
        .or_else(|| groups.iter().position(|g| g.class == AnchorSetClass::C2));
    if let Some(i) = pivot {
        let j = (0..groups.len())
            .filter(|&j| j != i)
            .max_by_key(|&j| (groups[j].class, std::cmp::Reverse(j)))?;
        let VirtualAnchor::Points(pivots) = virtual_anchor(&groups[i], tang, acc) else {
            return None;
        };
        let other = virtual_anchor(&groups[j], tang, acc);
        let mut out = Vec::new();
        for a in pivots {
            out.extend(pair_transforms(a, &other, groups[i].anchor, groups[j].anchor, tang));
        }
        return Some(out);
    }
    if groups.len() >= 3 {
        return Some(locus::one_plus_one_plus_one_candidates(s, groups));
    }
    None
}

/// Polishes candidates against every range, keeps the accepted ones and
/// removes duplicates.
pub(crate) fn finalize(s: &Scenario, candidates: &[RigidTransform2]) -> Result<SolutionSet> {
    let p = RangeProblem::from_scenario(s)?;
    let cfg = SolverConfig::from_tolerances(&s.tolerances);
    let mut dedup = Dedup::new(cfg.dedup_len, cfg.dedup_ang);
    for &c in candidates {
        let t = if p.residual_norm(c) <= 1e-14 {
            c
        } else {
            levenberg_marquardt(&p, c, &cfg).transform
        };
        if p.residual_norm(t) <= cfg.accept_tol {
            dedup.insert(t);
        }
    }
    let solutions: Vec<Solution> = dedup
        .kept
        .iter()
        .map(|&t| make_solution(&p, t, &cfg, true))
        .collect();
    if solutions.is_empty() {
        return Err(Error::NoSolutionFound);
    }
    Ok(SolutionSet::finite(solutions))
}

/// Closed-form enumeration for any setting with a finite sub-pattern.
pub fn enumerate_closed_form(s: &Scenario) -> Result<SolutionSet> {
    let groups = group_views(s)?;
    let cands = finite_candidates(s, &groups).ok_or_else(|| Error::WrongDistribution {
        expected: "a setting with a finite sub-pattern".into(),
        found: Distribution::of(s).to_string(),
    })?;
    finalize(s, &cands)
}

fn require_distribution(s: &Scenario, expected: &str) -> Result<Vec<GroupView>> {
    let d = Distribution::of(s);
    if Some(&d) != Distribution::parse(expected).as_ref() {
        return Err(Error::WrongDistribution {
            expected: expected.into(),
            found: d.to_string(),
        });
    }
    group_views(s)
}

/// Two transforms per virtual pivot: the 2-set fixes the pivot up to the
/// reflection `±δ`, the single point then leaves two intersections each.
pub fn solve_2p1(s: &Scenario) -> Result<SolutionSet> {
    let groups = require_distribution(s, "2+1")?;
    let (two, one) = if groups[0].class == AnchorSetClass::C2 {
        (&groups[0], &groups[1])
    } else {
        (&groups[1], &groups[0])
    };
    let VirtualAnchor::Points(pivots) = virtual_anchor(two, s.tolerances.tangency, s.tolerances.accept) else {
        unreachable!("C2 group has finite virtual anchors");
    };
    if pivots.len() < 2 {
        return Err(Error::DegenerateInput(
            "the two same-anchor points are collinear with their anchor".into(),
        ));
    }
    let other = virtual_anchor(one, s.tolerances.tangency, s.tolerances.accept);
    let mut cands = Vec::new();
    for a in pivots {
        cands.extend(pair_transforms(a, &other, two.anchor, one.anchor, s.tolerances.tangency));
    }
    finalize(s, &cands)
}

/// The C3 set fixes its anchor in the vehicle frame; the single point leaves
/// two positions for the second anchor, mirror images across the anchor line.
pub fn solve_3p1(s: &Scenario) -> Result<SolutionSet> {
    let groups = require_distribution(s, "3+1")?;
    let cands = finite_candidates(s, &groups).unwrap_or_default();
    finalize(s, &cands)
}

const FAMILY_SAMPLES: usize = 32;

/// Solution set of a single-anchor scenario: rotations about the anchor of
/// each virtual anchor position (or of each point of the virtual circle).
pub fn solve_single_anchor(s: &Scenario) -> Result<SolutionSet> {
    let groups = group_views(s)?;
    if groups.len() != 1 {
        return Err(Error::MixedAnchors);
    }
    let g = &groups[0];
    let tol = s.tolerances;
    let (dim, virtuals): (u8, Vec<Point2>) = match virtual_anchor(g, tol.tangency, tol.accept) {
        VirtualAnchor::Points(v) => (1, v),
        VirtualAnchor::Circle(c) => (
            2,
            (0..8)
                .map(|k| c.center + Point2::polar(c.radius, k as f64 * std::f64::consts::TAU / 8.0))
                .collect(),
        ),
    };
    if virtuals.is_empty() {
        return Err(Error::NoSolutionFound);
    }
    let p = RangeProblem::from_scenario(s)?;
    let cfg = SolverConfig::from_tolerances(&tol);
    let per = (FAMILY_SAMPLES / virtuals.len()).max(1);
    let mut sols = Vec::new();
    for a in &virtuals {
        for k in 0..per {
            let phi = -std::f64::consts::PI + (k as f64 + 0.5) * std::f64::consts::TAU / per as f64;
            let d = g.anchor - a.rotate(phi);
            sols.push(make_solution(&p, RigidTransform2::new(d.x, d.y, phi), &cfg, false));
        }
    }
    crate::solver::sort_solutions(&mut sols);
    let multiplicity = if dim == 2 { 1 } else { virtuals.len() };
    Ok(SolutionSet {
        solutions: sols,
        family: Some(FamilyInfo {
            dimension: dim,
            multiplicity,
            description: match dim {
                2 => "rotations about the anchor of every point of the virtual-anchor circle".into(),
                _ => format!("rotations about the anchor, {multiplicity} virtual anchor position(s)"),
            },
        }),
        ind: IndClass::ContinuousFamily { dim, multiplicity },
        warnings: Vec::new(),
    })
}

fn verdict(d: &Distribution, ind: IndClass, flags: &DegenerateFlags) -> Verdict {
    if ind.is_unique() {
        if d.in_unconstructible_region() && flags.any_case() {
            Verdict::DegenerateConstructible
        } else {
            Verdict::ConstructibleGeneric
        }
    } else if d.in_constructible_region() && flags.any_pathology() {
        Verdict::PathologicalUnconstructible
    } else {
        Verdict::Unconstructible
    }
}

/// Closed-form analysis dispatched on the measurement distribution.
pub fn analyze(s: &Scenario, registry: &ClosedFormRegistry) -> Result<GlobalAnalysis> {
    let d = Distribution::of(s);
    let strategy = registry.for_distribution(&d).ok_or_else(|| Error::UnknownStrategy(d.to_string()))?;
    let (name, solutions) = match strategy.solve(s) {
        Ok(ss) => (strategy.name().to_string(), ss),
        Err(Error::DegenerateInput(_)) => {
            let fallback = registry
                .get(registry::ENUMERATE)
                .ok_or_else(|| Error::UnknownStrategy(registry::ENUMERATE.into()))?;
            (fallback.name().to_string(), fallback.solve(s)?)
        }
        Err(e) => return Err(e),
    };
    let flags = detect_pathologies(s, &solutions);
    let ind = solutions.ind;
    Ok(GlobalAnalysis {
        taxonomy: TaxonomyClass {
            distribution: d.to_string(),
            verdict: verdict(&d, ind, &flags),
            ind_count: ind,
        },
        strategy: name,
        solutions,
        flags,
    })
}

pub fn taxonomy_classify(s: &Scenario) -> Result<TaxonomyClass> {
    Ok(analyze(s, &ClosedFormRegistry::builtin())?.taxonomy)
}
