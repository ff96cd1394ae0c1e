use nalgebra::{Matrix2, Matrix3, Vector2, Vector3};

use super::{RangeProblem, SolverConfig};
use crate::geom::{Point2, RigidTransform2};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOutcome {
    pub transform: RigidTransform2,
    pub residual_norm: f64,
    pub iterations: usize,
}

const MAX_DAMPING: f64 = 1e12;
const MIN_DAMPING: f64 = 1e-15;

/// Levenberg iteration on `½‖r‖²` over `(dx, dy, phi)`.
///
/// Runs until the step stalls rather than stopping at the acceptance
/// tolerance, so that rank-deficient solutions are still resolved to well
/// inside the dedup tolerance.
pub fn levenberg_marquardt(p: &RangeProblem, start: RigidTransform2, cfg: &SolverConfig) -> LmOutcome {
    let n = p.len();
    let mut t = start;
    let mut r = vec![0.0; n];
    let mut cost = eval(p, t, &mut r);
    let mut lambda = cfg.damping.initial;
    let mut it = 0;
    while it < cfg.max_iterations && cost > 0.0 {
        it += 1;
        let rows = p.jacobian(t);
        let mut a = Matrix3::zeros();
        let mut g = Vector3::zeros();
        for (row, &rk) in rows.iter().zip(&r) {
            let j = Vector3::new(row[0], row[1], row[2]);
            a += j * j.transpose();
            g += j * rk;
        }
        let mut improved = false;
        while lambda <= MAX_DAMPING {
            let Some(inv) = (a + Matrix3::identity() * lambda).try_inverse() else {
                lambda *= cfg.damping.increase;
                continue;
            };
            let d = -(inv * g);
            let cand = RigidTransform2::new(t.dx + d[0], t.dy + d[1], t.phi + d[2]);
            let mut rc = vec![0.0; n];
            let c = eval(p, cand, &mut rc);
            if c < cost {
                let small = d.norm() <= 1e-15 * (1.0 + t.dx.abs() + t.dy.abs() + 1.0);
                t = cand;
                r = rc;
                cost = c;
                lambda = (lambda / cfg.damping.decrease).max(MIN_DAMPING);
                improved = !small;
                break;
            }
            lambda *= cfg.damping.increase;
        }
        if !improved {
            break;
        }
    }
    LmOutcome {
        transform: t,
        residual_norm: (2.0 * cost).sqrt(),
        iterations: it,
    }
}

fn eval(p: &RangeProblem, t: RigidTransform2, r: &mut [f64]) -> f64 {
    let mut c = 0.0;
    for (k, rk) in r.iter_mut().enumerate() {
        *rk = p.residual(k, t);
        c += *rk * *rk;
    }
    0.5 * c
}

/// Same iteration with the heading held at `phi`.
pub fn levenberg_marquardt_slice(p: &RangeProblem, phi: f64, start: Point2, cfg: &SolverConfig) -> LmOutcome {
    let n = p.len();
    let mut t = RigidTransform2::new(start.x, start.y, phi);
    let mut r = vec![0.0; n];
    let mut cost = eval(p, t, &mut r);
    let mut lambda = cfg.damping.initial;
    let mut it = 0;
    while it < cfg.max_iterations && cost > 0.0 {
        it += 1;
        let rows = p.jacobian(t);
        let mut a = Matrix2::zeros();
        let mut g = Vector2::zeros();
        for (row, &rk) in rows.iter().zip(&r) {
            let j = Vector2::new(row[0], row[1]);
            a += j * j.transpose();
            g += j * rk;
        }
        let mut improved = false;
        while lambda <= MAX_DAMPING {
            let Some(inv) = (a + Matrix2::identity() * lambda).try_inverse() else {
                lambda *= cfg.damping.increase;
                continue;
            };
            let d = -(inv * g);
            let cand = RigidTransform2::new(t.dx + d[0], t.dy + d[1], phi);
            let mut rc = vec![0.0; n];
            let c = eval(p, cand, &mut rc);
            if c < cost {
                let small = d.norm() <= 1e-15 * (2.0 + t.dx.abs() + t.dy.abs());
                t = cand;
                r = rc;
                cost = c;
                lambda = (lambda / cfg.damping.decrease).max(MIN_DAMPING);
                improved = !small;
                break;
            }
            lambda *= cfg.damping.increase;
        }
        if !improved {
            break;
        }
    }
    LmOutcome {
        transform: t,
        residual_norm: (2.0 * cost).sqrt(),
        iterations: it,
    }
}
