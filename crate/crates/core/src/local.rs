//! Local (weak) constructibility: the Constructibility Gramian over the final
//! state `(x_f, y_f, θ_f)`.
//!
//! Each range measurement contributes `γ γᵀ` with
//! `γ = [cos α, sin α, p]`, where `α` is the bearing of the measurement point
//! seen from its anchor and `p` the signed distance of the final point from
//! the anchor–point line.

use std::collections::BTreeMap;

use nalgebra::{Matrix1x3, Matrix3, Vector3};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geom::{Line2, Point2, RigidTransform2, SymMat3};
use crate::scenario::{AnchorId, Scenario};
use crate::unicycle::{integrate_from, sensitivity_from, UnicycleControls, UnicycleState};

/// Relative rank tolerance on eigenvalues when the scenario gives none.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GramianContribution {
    pub gamma: [f64; 3],
    pub matrix: SymMat3,
    pub alpha: f64,
    pub p: f64,
}

/// Contribution of a range measured at `p_k` from `anchor`, for final point
/// `p_f`. Independent of the measured range.
pub fn gramian_contribution(p_k: Point2, anchor: Point2, p_f: Point2) -> Result<GramianContribution> {
    let d = p_k - anchor;
    let rho = d.norm();
    if rho == 0.0 {
        return Err(Error::ZeroRange { index: 0 });
    }
    let alpha = d.y.atan2(d.x);
    let p = ((p_f.x - p_k.x) * (anchor.y - p_k.y) - (p_f.y - p_k.y) * (anchor.x - p_k.x)) / rho;
    let gamma = [alpha.cos(), alpha.sin(), p];
    Ok(GramianContribution {
        gamma,
        matrix: SymMat3::outer(gamma),
        alpha,
        p,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum WeakVerdict {
    WeaklyConstructible,
    WeaklyUnconstructible,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GramianReport {
    pub gramian: SymMat3,
    /// Ascending, negative round-off clamped to zero.
    pub eigenvalues: [f64; 3],
    pub rank: usize,
    /// Smallest eigenvalue before clamping.
    pub min_eig: f64,
    pub null_basis: Vec<[f64; 3]>,
    pub verdict: WeakVerdict,
    pub final_point: Point2,
}

impl GramianReport {
    /// Eigen-analysis of `g` with eigenvalues below `rank_tol · λ_max`
    /// treated as zero.
    pub fn from_matrix(g: SymMat3, rank_tol: f64, final_point: Point2) -> Self {
        let (ev, vecs) = g.eigen();
        let lmax = ev[2].max(0.0);
        let zero = |l: f64| lmax == 0.0 || l <= rank_tol * lmax;
        let rank = ev.iter().filter(|&&l| !zero(l)).count();
        let null_basis = ev
            .iter()
            .zip(vecs)
            .filter(|(l, _)| zero(**l))
            .map(|(_, v)| v)
            .collect();
        GramianReport {
            gramian: g,
            eigenvalues: ev.map(|l| l.max(0.0)),
            rank,
            min_eig: ev[0],
            null_basis,
            verdict: if rank == 3 {
                WeakVerdict::WeaklyConstructible
            } else {
                WeakVerdict::WeaklyUnconstructible
            },
            final_point,
        }
    }
}

/// Optional inputs to [`build_gramian_with`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GramianOptions {
    /// Final point in the world frame; defaults to the last trajectory point.
    pub final_point: Option<Point2>,
    /// Per-anchor measurement weights; missing anchors weigh 1.
    pub weights: BTreeMap<AnchorId, f64>,
}

pub fn build_gramian(s: &Scenario, t: RigidTransform2) -> Result<GramianReport> {
    build_gramian_with(s, t, &GramianOptions::default())
}

pub fn build_gramian_with(s: &Scenario, t: RigidTransform2, opts: &GramianOptions) -> Result<GramianReport> {
    let world = s.world_points(t);
    let p_f = opts
        .final_point
        .or_else(|| world.last().copied())
        .unwrap_or(Point2::ORIGIN);
    let mut g = SymMat3::ZERO;
    for k in 0..s.n_measurements() {
        let c = gramian_contribution(world[k], s.anchor_at(k), p_f).map_err(|_| Error::ZeroRange { index: k })?;
        let w = opts.weights.get(&s.schedule.entries[k]).copied().unwrap_or(1.0);
        g += c.matrix.scale(w);
    }
    Ok(GramianReport::from_matrix(g, s.tolerances.rank, p_f))
}

/// `Σ Φᵀ(t_k, t_f) Hᵀ H Φ(t_k, t_f)` with the state transition of the
/// unicycle integrated numerically, starting from the world pose `t`.
///
/// Sample times come from the scenario's control input; `t_f` is the last
/// sample time.
pub fn numerical_gramian(controls: &UnicycleControls, s: &Scenario, t: RigidTransform2) -> Result<SymMat3> {
    let times = s
        .controls
        .as_ref()
        .map(|c| c.sample_times.clone())
        .ok_or_else(|| Error::Schema("scenario has no sample times".into()))?;
    if times.len() != s.n_measurements() {
        return Err(Error::Schema(format!(
            "{} sample times for {} measurements",
            times.len(),
            s.n_measurements()
        )));
    }
    let Some(&t_f) = times.last() else {
        return Ok(SymMat3::ZERO);
    };
    let initial = UnicycleState::new(t.dx, t.dy, t.phi);
    let states = integrate_from(controls, initial, &times)?;
    let max_dev = states
        .iter()
        .enumerate()
        .map(|(k, q)| q.position().dist(t.apply(s.point(k))))
        .fold(0.0, f64::max);
    if max_dev > 1e-9 {
        return Err(Error::InconsistentControls { max_dev });
    }
    let mut g = Matrix3::zeros();
    for (k, q) in states.iter().enumerate() {
        let b = s.anchor_at(k);
        let d = q.position() - b;
        let rho = d.norm();
        if rho == 0.0 {
            return Err(Error::ZeroRange { index: k });
        }
        let h = Matrix1x3::new(d.x / rho, d.y / rho, 0.0);
        let phi = sensitivity_from(controls, initial, times[k], t_f)?.0;
        let row = h * phi;
        g += row.transpose() * row;
    }
    Ok(SymMat3::from_matrix(&g))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum DirectionTag {
    /// Rotation of the final pose about an anchor.
    RotationAboutAnchor { anchor: AnchorId },
    /// Rotation about a measurement point (world frame).
    RotationAboutPoint { index: usize },
    Unclassified,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SingularDirection {
    pub vector: [f64; 3],
    pub tag: DirectionTag,
}

/// Infinitesimal rotation of the final pose about `c`.
fn rotation_generator(p_f: Point2, c: Point2) -> Vector3<f64> {
    Vector3::new(-(p_f.y - c.y), p_f.x - c.x, 1.0)
}

/// Names the null directions of a singular Gramian: rotations about anchors
/// first, then about measurement points; directions left over are
/// unclassified.
pub fn singular_direction_report(report: &GramianReport, s: &Scenario, t: RigidTransform2) -> Vec<SingularDirection> {
    let dim = report.null_basis.len();
    if dim == 0 {
        return Vec::new();
    }
    let g = report.gramian.to_matrix();
    let lmax = report.eigenvalues[2];
    let p_f = report.final_point;
    let in_null = |v: &Vector3<f64>| (v.transpose() * g * v)[0] <= s.tolerances.rank * lmax * v.norm_squared();

    let mut candidates: Vec<(Vector3<f64>, DirectionTag)> = Vec::new();
    let mut seen_anchors = Vec::new();
    for k in 0..s.n_measurements() {
        let id = s.schedule.entries[k];
        if !seen_anchors.contains(&id) {
            seen_anchors.push(id);
            candidates.push((rotation_generator(p_f, s.anchor_at(k)), DirectionTag::RotationAboutAnchor { anchor: id }));
        }
    }
    for (k, w) in s.world_points(t).into_iter().enumerate() {
        candidates.push((rotation_generator(p_f, w), DirectionTag::RotationAboutPoint { index: k }));
    }

    let mut chosen: Vec<Vector3<f64>> = Vec::new();
    let mut out = Vec::new();
    for (v, tag) in candidates {
        if chosen.len() == dim {
            break;
        }
        if !in_null(&v) {
            continue;
        }
        let u = v.normalize();
        let mut r = u;
        for c in &chosen {
            r -= c * c.dot(&u);
        }
        if r.norm() <= 1e-6 {
            continue;
        }
        chosen.push(r.normalize());
        out.push(SingularDirection {
            vector: [u[0], u[1], u[2]],
            tag,
        });
    }
    // complete the null space with unnamed directions
    for b in &report.null_basis {
        if chosen.len() == dim {
            break;
        }
        let u = Vector3::new(b[0], b[1], b[2]);
        let mut r = u;
        for c in &chosen {
            r -= c * c.dot(&u);
        }
        if r.norm() <= 1e-6 {
            continue;
        }
        let r = r.normalize();
        chosen.push(r);
        out.push(SingularDirection {
            vector: [r[0], r[1], r[2]],
            tag: DirectionTag::Unclassified,
        });
    }
    out
}

/// Positions of the third point (taken as the final point) where the
/// three-anchor Gramian drops rank, given the first two measurements: a line
/// through `b3`.
pub fn critical_line_1p1p1_local(b1: Point2, b2: Point2, b3: Point2, p0: Point2, p1: Point2) -> Result<Line2> {
    let r0 = p0.dist(b1);
    let r1 = p1.dist(b2);
    if r0 == 0.0 {
        return Err(Error::ZeroRange { index: 0 });
    }
    if r1 == 0.0 {
        return Err(Error::ZeroRange { index: 1 });
    }
    let u0 = (p0 - b1) * (1.0 / r0);
    let u1 = (p1 - b2) * (1.0 / r1);
    let a0 = u0.cross(b3 - p0);
    let a1 = u1.cross(b3 - p1);
    let v = u1 * a0 - u0 * a1;
    let scale = 1.0 + (b3 - p0).norm() + (b3 - p1).norm();
    if v.norm() <= 1e-12 * scale {
        return Err(Error::DegeneratePrefix);
    }
    Line2::new(b3, v).ok_or(Error::DegeneratePrefix)
}

#[cfg(test)]
mod tests;
