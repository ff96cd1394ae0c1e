use std::f64::consts::PI;

use rayon::prelude::*;

use super::{
    assemble, halton_points, levenberg_marquardt, lies_on_family, slice_count, Dedup, RangeProblem, SolutionSet,
    SolverConfig,
};
use crate::error::{Error, Result};
use crate::geom::{Point2, RigidTransform2};
use crate::scenario::Scenario;

const SLICE_STARTS: usize = 256;

/// Damped least squares from a deterministic low-discrepancy set of starts
/// over the grid box and all headings.
pub fn solve_multistart(s: &Scenario, cfg: &SolverConfig) -> Result<SolutionSet> {
    cfg.validate()?;
    let p = RangeProblem::from_scenario(s)?;
    let (center, auto_extent) = p.covering_extent();
    let e = cfg.grid.extent.unwrap_or(auto_extent);
    let box_point = |u: f64, v: f64| Point2::new(center.x + (2.0 * u - 1.0) * e, center.y + (2.0 * v - 1.0) * e);

    let starts = halton_points(cfg.n_starts, cfg.seed);
    let outcomes: Vec<_> = starts
        .par_iter()
        .map(|h| {
            let b = box_point(h[0], h[1]);
            levenberg_marquardt(&p, RigidTransform2::new(b.x, b.y, -PI + 2.0 * PI * h[2]), cfg)
        })
        .collect();

    let mut dedup = Dedup::new(cfg.dedup_len, cfg.dedup_ang);
    for o in outcomes.iter().filter(|o| o.residual_norm <= cfg.accept_tol) {
        dedup.insert(o.transform);
    }
    if dedup.kept.is_empty() {
        return Err(Error::NoSolutionFound);
    }
    let refined: Vec<(RigidTransform2, bool)> = dedup
        .kept
        .par_iter()
        .map(|&t| (t, !lies_on_family(&p, t, cfg)))
        .collect();

    let slice_starts: Vec<Point2> = halton_points(SLICE_STARTS, cfg.seed ^ 0x5eed)
        .into_iter()
        .map(|h| box_point(h[0], h[1]))
        .collect();
    let multiplicity = |headings: &[RigidTransform2]| {
        headings
            .iter()
            .map(|t| slice_count(&p, t.phi, &slice_starts, cfg))
            .max()
            .unwrap_or(1)
    };
    Ok(assemble(&p, refined, cfg, multiplicity, "multistart"))
}
