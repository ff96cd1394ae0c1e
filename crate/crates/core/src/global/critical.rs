//! Lines of the vehicle frame on which the next measurement point fails to
//! separate the solutions of a prefix.
//!
//! Two prefix solutions `T`, `T'` stay indistinguishable after a measurement
//! of anchor `B` at `P` exactly when `‖P − T⁻¹B‖ = ‖P − T'⁻¹B‖`, i.e. when
//! `P` lies on the perpendicular bisector of the two virtual positions of
//! `B`.

use serde::Serialize;

use super::{analyze, group_views, virtual_anchor, ClosedFormRegistry, Distribution, VirtualAnchor};
use crate::error::{Error, Result};
use crate::geom::{circle_circle_intersect, classify_conic, Circle, ConicClass, Line2, Point2, RigidTransform2, SymMat3};
use crate::scenario::{AnchorSetClass, Scenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LineProvenance {
    /// Both solutions share the virtual position of the first anchor; they
    /// differ by a rotation about it.
    RotationAboutAnchor,
    /// The solutions come from the two mirrored placements of the 2-set.
    ReflectedPair,
    VirtualAnchorAxis,
    DetWLine,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriticalLine {
    pub line: Line2,
    pub provenance: LineProvenance,
    /// Indices into [`CriticalLineSet::prefix`] of the two solutions the line
    /// fails to separate.
    pub pair: (usize, usize),
}

impl CriticalLine {
    pub fn contains(&self, p: Point2, tol: f64) -> bool {
        self.line.signed_distance(p).abs() <= tol
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriticalLineSet {
    pub lines: Vec<CriticalLine>,
    pub prefix: Vec<RigidTransform2>,
}

/// `a x + b y + c = 0` coefficients of the bisector of `v w`.
fn bisector_coefficients(v: Point2, w: Point2) -> [f64; 3] {
    let d = w - v;
    [2.0 * d.x, 2.0 * d.y, v.norm_sq() - w.norm_sq()]
}

/// Critical lines for the fourth point of a 2+2 setting, from its 2+1 prefix
/// (the first three measurements).
pub fn critical_lines_2p2(s: &Scenario) -> Result<CriticalLineSet> {
    let prefix = s.prefix(3.min(s.n_measurements()));
    let d = Distribution::of(&prefix);
    if d.0 != [2, 1] {
        return Err(Error::WrongDistribution {
            expected: "2+1".into(),
            found: d.to_string(),
        });
    }
    let groups = group_views(&prefix)?;
    let (two, one) = if groups[0].class == AnchorSetClass::C2 {
        (&groups[0], &groups[1])
    } else {
        (&groups[1], &groups[0])
    };
    let tol = prefix.tolerances;
    let VirtualAnchor::Points(pivots) = virtual_anchor(two, tol.tangency, tol.accept) else {
        unreachable!("C2 group has finite virtual anchors");
    };
    if pivots.len() < 2 {
        return Err(Error::DegenerateInput(
            "the two same-anchor points are collinear with their anchor".into(),
        ));
    }
    let big_d = two.anchor.dist(one.anchor);
    let (p2, rho2) = (one.points[0], one.rho[0]);

    // virtual positions of the second anchor, tagged with the pivot side
    let mut virt: Vec<(usize, Point2)> = Vec::new();
    let mut prefix_t = Vec::new();
    for (beta, &a) in pivots.iter().enumerate() {
        for v in circle_circle_intersect(Circle::new(a, big_d), Circle::new(p2, rho2), tol.tangency).points() {
            virt.push((beta, v));
            prefix_t.push(RigidTransform2::from_two_points(a, v, two.anchor, one.anchor));
        }
    }

    let mut lines = Vec::new();
    for i in 0..virt.len() {
        for j in i + 1..virt.len() {
            let (vi, vj) = (virt[i].1, virt[j].1);
            if vi.dist(vj) <= tol.degenerate {
                return Err(Error::PathologicalConfiguration(
                    "two prefix solutions share the virtual second anchor; every fourth point is ambiguous".into(),
                ));
            }
            let [a, b, c] = bisector_coefficients(vi, vj);
            let line = Line2::from_coefficients(a, b, c).ok_or_else(|| Error::PathologicalConfiguration("degenerate bisector".into()))?;
            let provenance = if virt[i].0 == virt[j].0 {
                LineProvenance::RotationAboutAnchor
            } else {
                LineProvenance::ReflectedPair
            };
            lines.push(CriticalLine {
                line,
                provenance,
                pair: (i, j),
            });
        }
    }

    // each second-side virtual anchor pairs with both first-side ones into a
    // line-pair conic through P₂
    let side0: Vec<Point2> = virt.iter().filter(|v| v.0 == 0).map(|v| v.1).collect();
    for &(_, w) in virt.iter().filter(|v| v.0 == 1) {
        if let [v0, v1] = side0[..] {
            let q = SymMat3::sym_outer(bisector_coefficients(v0, w), bisector_coefficients(v1, w));
            if classify_conic(&q, tol.degenerate * tol.degenerate) != ConicClass::DegenerateLinePair {
                return Err(Error::PathologicalConfiguration("critical conic is not a line pair".into()));
            }
        }
    }
    Ok(CriticalLineSet { lines, prefix: prefix_t })
}

/// Critical lines for measurement `prefix_len` given the solutions of the
/// first `prefix_len` measurements: one bisector axis per pair of virtual
/// positions of the next anchor.
pub fn critical_lines_next_point(s: &Scenario, prefix_len: usize) -> Result<CriticalLineSet> {
    if prefix_len >= s.n_measurements() {
        return Err(Error::Schema(format!(
            "prefix length {prefix_len} leaves no next measurement out of {}",
            s.n_measurements()
        )));
    }
    let prefix = s.prefix(prefix_len);
    let ga = analyze(&prefix, &ClosedFormRegistry::builtin())?;
    if ga.solutions.family.is_some() {
        return Err(Error::DegenerateInput("the prefix admits a continuous family".into()));
    }
    let sols: Vec<RigidTransform2> = ga.solutions.isolated().map(|x| x.transform).collect();
    if sols.len() < 2 {
        return Err(Error::NoAmbiguity);
    }
    let b = s.anchor_at(prefix_len);
    let virt: Vec<Point2> = sols.iter().map(|t| t.inverse().apply(b)).collect();
    let mut lines = Vec::new();
    for i in 0..virt.len() {
        for j in i + 1..virt.len() {
            // coincident virtual anchors: no point separates this pair
            if let Some(line) = Line2::bisector(virt[i], virt[j]).filter(|_| virt[i].dist(virt[j]) > prefix.tolerances.degenerate) {
                lines.push(CriticalLine {
                    line,
                    provenance: LineProvenance::VirtualAnchorAxis,
                    pair: (i, j),
                });
            }
        }
    }
    Ok(CriticalLineSet { lines, prefix: sols })
}
