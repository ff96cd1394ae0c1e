//! The one-parameter family of two single measurements from two anchors, and
//! the locus it sweeps for a third point.

use std::f64::consts::{PI, TAU};

use serde::Serialize;

use super::{finalize, group_views, require_distribution, GroupView};
use crate::error::{Error, Result};
use crate::geom::{circle_circle_intersect, Circle, Point2, RigidTransform2};
use crate::scenario::Scenario;
use crate::solver::{make_solution, FamilyInfo, IndClass, RangeProblem, Solution, SolutionSet, SolverConfig};

/// Interval of the polar angle of `P₀` about the first anchor. `hi − lo`
/// reaches `2π` when the whole circle is admissible.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DomainInterval {
    pub lo: f64,
    pub hi: f64,
}

impl DomainInterval {
    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn is_full_circle(&self) -> bool {
        self.len() >= TAU - 1e-12
    }

    pub fn contains(&self, phi: f64) -> bool {
        let x = self.lo + (phi - self.lo).rem_euclid(TAU);
        x <= self.hi + 1e-12
    }
}

/// Transforms for one sampled polar angle; two generically, one where the
/// branches meet.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilySample {
    pub phi: f64,
    pub transforms: Vec<RigidTransform2>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OnePlusOneFamily {
    pub domain: Vec<DomainInterval>,
    pub samples: Vec<FamilySample>,
    pub ind: IndClass,
    /// The single solution when the configuration is rigid.
    pub unique: Option<RigidTransform2>,
}

impl OnePlusOneFamily {
    /// Sampled representatives as a solution set.
    pub fn solution_set(&self, s: &Scenario) -> Result<SolutionSet> {
        if let Some(t) = self.unique {
            return finalize(s, &[t]);
        }
        let p = RangeProblem::from_scenario(s)?;
        let cfg = SolverConfig::from_tolerances(&s.tolerances);
        let all: Vec<RigidTransform2> = self.samples.iter().flat_map(|x| x.transforms.iter().copied()).collect();
        if all.is_empty() {
            return Err(Error::NoSolutionFound);
        }
        let step = (all.len() / REPRESENTATIVES).max(1);
        let mut sols: Vec<Solution> = all
            .iter()
            .step_by(step)
            .map(|&t| make_solution(&p, t, &cfg, false))
            .collect();
        crate::solver::sort_solutions(&mut sols);
        let (dim, multiplicity) = match self.ind {
            IndClass::ContinuousFamily { dim, multiplicity } => (dim, multiplicity),
            IndClass::Finite(_) => unreachable!("finite case handled above"),
        };
        Ok(SolutionSet {
            solutions: sols,
            family: Some(FamilyInfo {
                dimension: dim,
                multiplicity,
                description: "P0 sweeps its range circle, P1 follows on one of two branches".into(),
            }),
            ind: self.ind,
            warnings: Vec::new(),
        })
    }
}

const REPRESENTATIVES: usize = 64;

/// Points of `P₂` swept by the two branches over one domain interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocusPiece {
    pub interval: DomainInterval,
    pub branch_a: Vec<LocusPoint>,
    pub branch_b: Vec<LocusPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LocusPoint {
    pub phi: f64,
    pub p2: Point2,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Locus {
    pub pieces: Vec<LocusPiece>,
}

impl Locus {
    pub fn branch_a(&self) -> impl Iterator<Item = &LocusPoint> {
        self.pieces.iter().flat_map(|p| p.branch_a.iter())
    }

    pub fn branch_b(&self) -> impl Iterator<Item = &LocusPoint> {
        self.pieces.iter().flat_map(|p| p.branch_b.iter())
    }
}

/// First measurement of two anchors: `P₀` ranged from `B₁`, `P₁` from `B₂`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Pair {
    pub b1: Point2,
    pub b2: Point2,
    pub p0: Point2,
    pub p1: Point2,
    pub rho0: f64,
    pub rho1: f64,
}

impl Pair {
    pub fn from_groups(g0: &GroupView, g1: &GroupView) -> Self {
        Pair {
            b1: g0.anchor,
            b2: g1.anchor,
            p0: g0.points[0],
            p1: g1.points[0],
            rho0: g0.rho[0],
            rho1: g1.rho[0],
        }
    }

    pub fn s(&self) -> f64 {
        self.p0.dist(self.p1)
    }

    pub fn big_d(&self) -> f64 {
        self.b1.dist(self.b2)
    }

    /// Transform with `P₀` at polar angle `phi` about `B₁`; `sign` picks the
    /// branch.
    pub fn place(&self, phi: f64, sign: f64) -> Option<RigidTransform2> {
        let s = self.s();
        let p0w = self.b1 + Point2::polar(self.rho0, phi);
        let v = self.b2 - p0w;
        let d = v.norm();
        if d <= 1e-300 {
            return None;
        }
        let e = v * (1.0 / d);
        let a = (s * s - self.rho1 * self.rho1 + d * d) / (2.0 * d);
        let h2 = s * s - a * a;
        if h2 < -1e-9 * (s * s + self.rho1 * self.rho1 + d * d) {
            return None;
        }
        let p1w = p0w + e * a + e.perp() * (sign * h2.max(0.0).sqrt());
        Some(RigidTransform2::from_two_points(self.p0, self.p1, p0w, p1w))
    }

    /// The rigid configuration when the four lengths close flat, if they do
    /// within `tol`.
    pub fn flat_configuration(&self, tol: f64) -> Option<RigidTransform2> {
        let (s, big_d) = (self.s(), self.big_d());
        if s <= tol || big_d <= 0.0 {
            return None;
        }
        let lens = [self.rho0, s, self.rho1, big_d];
        let total: f64 = lens.iter().sum();
        let (imax, &longest) = lens
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("four lengths");
        if (2.0 * longest - total).abs() > tol {
            return None;
        }
        let u = (self.b2 - self.b1) * (1.0 / big_d);
        let (p0w, p1w) = match imax {
            3 => {
                let p0w = self.b1 + u * self.rho0;
                (p0w, p0w + u * s)
            }
            0 => (self.b1 + u * self.rho0, self.b2 + u * self.rho1),
            1 => (self.b1 - u * self.rho0, self.b2 + u * self.rho1),
            _ => (self.b1 - u * self.rho0, self.b2 - u * self.rho1),
        };
        Some(RigidTransform2::from_two_points(self.p0, self.p1, p0w, p1w))
    }

    /// Admissible polar angles of `P₀`: those where `‖B₂ − P₀‖` lies within
    /// `[|s − ρ₁|, s + ρ₁]`.
    pub fn domain(&self) -> Result<Vec<DomainInterval>> {
        let (s, big_d, r0) = (self.s(), self.big_d(), self.rho0);
        if big_d <= 0.0 || r0 <= 0.0 {
            return Err(Error::DegenerateInput("coincident anchors or zero range".into()));
        }
        let theta = (self.b2 - self.b1).angle();
        let dmin = (s - self.rho1).abs();
        let dmax = s + self.rho1;
        let c1 = (big_d * big_d + r0 * r0 - dmin * dmin) / (2.0 * big_d * r0);
        let c2 = (big_d * big_d + r0 * r0 - dmax * dmax) / (2.0 * big_d * r0);
        if c1 < -1.0 || c2 > 1.0 {
            return Err(Error::EmptyDomain);
        }
        let lo_clamped = c1 >= 1.0;
        let hi_clamped = c2 <= -1.0;
        let a_lo = if lo_clamped { 0.0 } else { c1.acos() };
        let a_hi = if hi_clamped { PI } else { c2.acos() };
        if a_lo > a_hi {
            return Err(Error::EmptyDomain);
        }
        let iv = |lo: f64, hi: f64| DomainInterval { lo, hi };
        Ok(match (lo_clamped, hi_clamped) {
            (true, true) => vec![iv(theta - PI, theta + PI)],
            (true, false) => vec![iv(theta - a_hi, theta + a_hi)],
            (false, true) => vec![iv(theta + a_lo, theta + TAU - a_lo)],
            (false, false) => vec![iv(theta - a_hi, theta - a_lo), iv(theta + a_lo, theta + a_hi)],
        })
    }
}

fn pair_of(s: &Scenario) -> Result<Pair> {
    let groups = require_distribution(s, "1+1")?;
    Ok(Pair::from_groups(&groups[0], &groups[1]))
}

/// Admissible polar angles of `P₀` about the first anchor for a 1+1 prefix.
pub fn one_plus_one_domain(s: &Scenario) -> Result<Vec<DomainInterval>> {
    let groups = group_views(s)?;
    if groups.len() < 2 {
        return Err(Error::WrongDistribution {
            expected: "1+1".into(),
            found: super::Distribution::of(s).to_string(),
        });
    }
    Pair::from_groups(&groups[0], &groups[1]).domain()
}

/// Splits `n` samples over the intervals in proportion to their length.
fn sample_angles(domain: &[DomainInterval], n: usize) -> Vec<Vec<f64>> {
    let total: f64 = domain.iter().map(|d| d.len()).sum();
    let mut counts: Vec<usize> = domain
        .iter()
        .map(|d| if total > 0.0 { (n as f64 * d.len() / total).floor() as usize } else { 0 })
        .collect();
    let assigned: usize = counts.iter().sum();
    if let Some(last) = counts.last_mut() {
        *last += n - assigned;
    }
    domain
        .iter()
        .zip(counts)
        .map(|(d, k)| match k {
            0 => Vec::new(),
            1 => vec![0.5 * (d.lo + d.hi)],
            _ if d.is_full_circle() => (0..k).map(|i| d.lo + TAU * i as f64 / k as f64).collect(),
            _ => (0..k).map(|i| d.lo + d.len() * i as f64 / (k - 1) as f64).collect(),
        })
        .collect()
}

/// The 1+1 family sampled at `phi_samples` polar angles of `P₀`.
pub fn solve_1p1(s: &Scenario, phi_samples: usize) -> Result<OnePlusOneFamily> {
    let pair = pair_of(s)?;
    if let Some(t) = pair.flat_configuration(s.tolerances.degenerate) {
        return Ok(OnePlusOneFamily {
            domain: Vec::new(),
            samples: Vec::new(),
            ind: IndClass::Finite(1),
            unique: Some(t),
        });
    }
    if pair.s() <= s.tolerances.tangency {
        return coincident_pair_family(&pair, s, phi_samples);
    }
    let domain = pair.domain()?;
    let cfg = SolverConfig::from_tolerances(&s.tolerances);
    let mut samples = Vec::new();
    for phis in sample_angles(&domain, phi_samples) {
        for phi in phis {
            let mut ts: Vec<RigidTransform2> = Vec::new();
            for sign in [1.0, -1.0] {
                if let Some(t) = pair.place(phi, sign) {
                    if !ts.iter().any(|u| u.approx_eq(t, cfg.dedup_len, cfg.dedup_ang)) {
                        ts.push(t);
                    }
                }
            }
            samples.push(FamilySample { phi, transforms: ts });
        }
    }
    Ok(OnePlusOneFamily {
        domain,
        samples,
        ind: IndClass::ContinuousFamily { dim: 1, multiplicity: 2 },
        unique: None,
    })
}

/// Both measurements taken at one point: the point sits at an intersection of
/// the two range circles and the trajectory rotates freely about it.
fn coincident_pair_family(pair: &Pair, s: &Scenario, phi_samples: usize) -> Result<OnePlusOneFamily> {
    let hits = circle_circle_intersect(
        Circle::new(pair.b1, pair.rho0),
        Circle::new(pair.b2, pair.rho1),
        s.tolerances.tangency,
    )
    .points();
    if hits.is_empty() {
        return Err(Error::EmptyDomain);
    }
    let n = phi_samples.max(1);
    let samples = (0..n)
        .map(|k| {
            let phi = -PI + TAU * k as f64 / n as f64;
            let transforms = hits
                .iter()
                .map(|&x| {
                    let d = x - pair.p0.rotate(phi);
                    RigidTransform2::new(d.x, d.y, phi)
                })
                .collect();
            FamilySample { phi, transforms }
        })
        .collect();
    Ok(OnePlusOneFamily {
        domain: vec![DomainInterval { lo: -PI, hi: PI }],
        samples,
        ind: IndClass::ContinuousFamily {
            dim: 1,
            multiplicity: hits.len(),
        },
        unique: None,
    })
}

/// World positions of the third point swept by both branches of the 1+1
/// family formed by the first measurements of the first two anchors.
pub fn emit_locus_1p1p1(s: &Scenario, phi_samples: usize) -> Result<Locus> {
    let groups = group_views(s)?;
    if groups.len() < 3 {
        return Err(Error::WrongDistribution {
            expected: "1+1+1".into(),
            found: super::Distribution::of(s).to_string(),
        });
    }
    let pair = Pair::from_groups(&groups[0], &groups[1]);
    let p2 = groups[2].points[0];
    let domain = pair.domain()?;
    let pieces = domain
        .iter()
        .zip(sample_angles(&domain, phi_samples))
        .map(|(&interval, phis)| {
            let branch = |sign: f64| {
                phis.iter()
                    .filter_map(|&phi| pair.place(phi, sign).map(|t| LocusPoint { phi, p2: t.apply(p2) }))
                    .collect()
            };
            LocusPiece {
                interval,
                branch_a: branch(1.0),
                branch_b: branch(-1.0),
            }
        })
        .collect();
    Ok(Locus { pieces })
}

/// Isolated solutions of three single measurements from three anchors.
pub fn solve_1p1p1(s: &Scenario) -> Result<SolutionSet> {
    let groups = require_distribution(s, "1+1+1")?;
    let cands = one_plus_one_plus_one_candidates(s, &groups);
    let mut ss = finalize(s, &cands)?;
    if ss.len() > MAX_1P1P1 {
        ss.warnings.push(format!(
            "{} solutions exceed the bound of {MAX_1P1P1}; tolerances may be too loose",
            ss.len()
        ));
    }
    Ok(ss)
}

const MAX_1P1P1: usize = 8;
const LOOP_SAMPLES: usize = 8192;

/// A closed curve in the family: an open interval traversed on branch `a`
/// and back on branch `b`, or one branch over the full circle.
#[derive(Debug, Clone, Copy)]
enum FamilyLoop {
    Open { lo: f64, hi: f64 },
    Periodic { lo: f64, sign: f64 },
}

impl FamilyLoop {
    fn at(&self, pair: &Pair, u: f64) -> Option<RigidTransform2> {
        match *self {
            FamilyLoop::Open { lo, hi } => {
                let (v, sign) = if u < 0.5 { (2.0 * u, 1.0) } else { (2.0 - 2.0 * u, -1.0) };
                // cosine spacing crowds samples toward the endpoints, where
                // the branches meet with a square-root profile
                let phi = lo + (hi - lo) * 0.5 * (1.0 - (PI * v).cos());
                pair.place(phi, sign)
            }
            FamilyLoop::Periodic { lo, sign } => pair.place(lo + TAU * u, sign),
        }
    }
}

/// Candidate transforms for the first measurement of each of the first three
/// anchors: roots of the range error of the third point along the family.
pub(crate) fn one_plus_one_plus_one_candidates(s: &Scenario, groups: &[GroupView]) -> Vec<RigidTransform2> {
    let pair = Pair::from_groups(&groups[0], &groups[1]);
    let (p2, b3, rho2) = (groups[2].points[0], groups[2].anchor, groups[2].rho[0]);
    if pair.s() <= s.tolerances.tangency {
        return coincident_pair_candidates(&pair, p2, b3, rho2, s.tolerances.tangency);
    }
    let Ok(domain) = pair.domain() else {
        return Vec::new();
    };
    let loops: Vec<FamilyLoop> = domain
        .iter()
        .flat_map(|d| {
            if d.is_full_circle() {
                vec![
                    FamilyLoop::Periodic { lo: d.lo, sign: 1.0 },
                    FamilyLoop::Periodic { lo: d.lo, sign: -1.0 },
                ]
            } else {
                vec![FamilyLoop::Open { lo: d.lo, hi: d.hi }]
            }
        })
        .collect();
    let f = |t: RigidTransform2| t.apply(p2).dist(b3) - rho2;
    let mut out = Vec::new();
    for lp in loops {
        let n = LOOP_SAMPLES;
        let vals: Vec<Option<(RigidTransform2, f64)>> = (0..n)
            .map(|i| lp.at(&pair, i as f64 / n as f64).map(|t| (t, f(t))))
            .collect();
        for i in 0..n {
            let j = (i + 1) % n;
            let (Some((ti, fi)), Some((_, fj))) = (vals[i], vals[j]) else {
                continue;
            };
            if fi == 0.0 {
                out.push(ti);
                continue;
            }
            if fi * fj < 0.0 {
                let (mut a, mut b) = (i as f64 / n as f64, (i + 1) as f64 / n as f64);
                let mut fa = fi;
                for _ in 0..64 {
                    let m = 0.5 * (a + b);
                    let Some(tm) = lp.at(&pair, m % 1.0) else { break };
                    let fm = f(tm);
                    if fm * fa <= 0.0 {
                        b = m;
                    } else {
                        a = m;
                        fa = fm;
                    }
                }
                if let Some(t) = lp.at(&pair, (0.5 * (a + b)) % 1.0) {
                    out.push(t);
                }
            }
            // near-double roots: a dip of |f| that does not cross zero
            let h = (i + n - 1) % n;
            if let Some((_, fh)) = vals[h] {
                let dip = fi.abs() <= fh.abs() && fi.abs() <= fj.abs() && fi * fh > 0.0 && fi * fj > 0.0;
                let local = (fi - fh).abs().max((fj - fi).abs());
                if dip && fi.abs() <= 4.0 * local {
                    out.push(ti);
                }
            }
        }
    }
    out
}

/// Same-point case: the point is pinned at a circle intersection, the third
/// range then fixes the rotation about it.
fn coincident_pair_candidates(pair: &Pair, p2: Point2, b3: Point2, rho2: f64, tol: f64) -> Vec<RigidTransform2> {
    let hits = circle_circle_intersect(Circle::new(pair.b1, pair.rho0), Circle::new(pair.b2, pair.rho1), tol).points();
    let arm = pair.p0.dist(p2);
    let mut out = Vec::new();
    for x in hits {
        if arm <= tol {
            continue;
        }
        for y in circle_circle_intersect(Circle::new(x, arm), Circle::new(b3, rho2), tol).points() {
            out.push(RigidTransform2::from_two_points(pair.p0, p2, x, y));
        }
    }
    out
}
