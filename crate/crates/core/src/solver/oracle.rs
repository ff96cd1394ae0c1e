use std::collections::HashMap;
use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use super::{
    assemble, levenberg_marquardt, levenberg_marquardt_slice, Dedup, RangeProblem, SolutionSet, SolverConfig,
};
use crate::error::{Error, Result};
use crate::geom::{wrap_angle, Point2, RigidTransform2};
use crate::scenario::Scenario;

const DEFAULT_NODES: usize = 201;
/// Safety factor on the Lipschitz threshold.
const THRESHOLD_MARGIN: f64 = 1.05;
/// Up to this many candidate cells, every cell seeds a refinement.
const SEED_ALL_LIMIT: usize = 20_000;
const LATTICE_STRIDE: u32 = 3;
/// Refined solutions linked within this many cells belong to one group.
const LINK_CELLS: f64 = 4.0;
/// A group with at least this many distinct exact solutions is a family.
const FAMILY_MIN: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridCell {
    pub ix: u32,
    pub iy: u32,
    pub iphi: u32,
    pub max_residual: f64,
    pub component: u32,
}

/// Grid nodes whose largest residual is below the threshold, with their
/// connected components (26-neighbourhood, heading wraps around).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleGrid {
    pub center: Point2,
    pub extent: f64,
    pub cell: f64,
    pub nodes: usize,
    pub phi_cells: usize,
    pub threshold: f64,
    pub cells: Vec<GridCell>,
    pub n_components: usize,
}

impl OracleGrid {
    pub fn phi_step(&self) -> f64 {
        2.0 * PI / self.phi_cells as f64
    }

    pub fn node(&self, ix: u32, iy: u32, iphi: u32) -> RigidTransform2 {
        RigidTransform2::new(
            self.center.x - self.extent + ix as f64 * self.cell,
            self.center.y - self.extent + iy as f64 * self.cell,
            -PI + iphi as f64 * self.phi_step(),
        )
    }

    /// Nearest node indices of a transform (heading wrapped).
    fn nearest(&self, t: RigidTransform2) -> Option<(u32, u32, u32)> {
        let ix = ((t.dx - self.center.x + self.extent) / self.cell).round();
        let iy = ((t.dy - self.center.y + self.extent) / self.cell).round();
        let n = self.nodes as f64;
        if !(0.0..n).contains(&ix) || !(0.0..n).contains(&iy) {
            return None;
        }
        let ip = ((wrap_angle(t.phi) + PI) / self.phi_step()).round() as usize % self.phi_cells;
        Some((ix as u32, iy as u32, ip as u32))
    }
}

struct Layout {
    center: Point2,
    extent: f64,
    cell: f64,
    nodes: usize,
}

fn layout(p: &RangeProblem, cfg: &SolverConfig) -> Layout {
    let (center, auto) = p.covering_extent();
    let extent = cfg.grid.extent.unwrap_or(auto);
    let nodes = match cfg.grid.cell {
        Some(h) => ((2.0 * extent / h).ceil() as usize + 1).max(2),
        None => DEFAULT_NODES,
    };
    Layout {
        center,
        extent,
        cell: 2.0 * extent / (nodes - 1) as f64,
        nodes,
    }
}

/// Index ranges of grid nodes along one row that fall inside the annulus
/// `r_in ≤ ‖(x, y) − c‖ ≤ r_out`.
fn annulus_row(lay: &Layout, c: Point2, r_in: f64, r_out: f64, y: f64) -> Vec<(u32, u32)> {
    let dy = y - c.y;
    if dy.abs() > r_out {
        return Vec::new();
    }
    let xo = (r_out * r_out - dy * dy).sqrt();
    let spans = if r_in > 0.0 && dy.abs() < r_in {
        let xi = (r_in * r_in - dy * dy).sqrt();
        vec![(c.x - xo, c.x - xi), (c.x + xi, c.x + xo)]
    } else {
        vec![(c.x - xo, c.x + xo)]
    };
    let x0 = lay.center.x - lay.extent;
    let last = (lay.nodes - 1) as f64;
    spans
        .into_iter()
        .filter_map(|(a, b)| {
            let lo = ((a - x0) / lay.cell).ceil().max(0.0);
            let hi = ((b - x0) / lay.cell).floor().min(last);
            (lo <= hi).then_some((lo as u32, hi as u32))
        })
        .collect()
}

fn max_residual_at(p: &RangeProblem, rotated: &[Point2], d: Point2, cap: f64) -> Option<f64> {
    let mut m = 0.0f64;
    for (k, q) in rotated.iter().enumerate() {
        let r = ((*q + d).dist(p.anchors[k]) - p.rho[k]).abs();
        if r > cap {
            return None;
        }
        m = m.max(r);
    }
    Some(m)
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }
    fn find(&mut self, mut a: usize) -> usize {
        while self.0[a] != a {
            self.0[a] = self.0[self.0[a]];
            a = self.0[a];
        }
        a
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.0[hi] = lo;
        }
    }
}

/// Thresholds every grid node: the first constraint is rasterised as an
/// annulus per heading, the remaining residuals are evaluated on its nodes.
pub fn oracle_grid(s: &Scenario, cfg: &SolverConfig) -> Result<OracleGrid> {
    cfg.validate()?;
    let p = RangeProblem::from_scenario(s)?;
    Ok(grid_for(&p, cfg))
}

fn grid_for(p: &RangeProblem, cfg: &SolverConfig) -> OracleGrid {
    let lay = layout(p, cfg);
    let phi_cells = cfg.grid.phi_cells;
    let hphi = 2.0 * PI / phi_cells as f64;
    let threshold =
        THRESHOLD_MARGIN * (lay.cell * std::f64::consts::FRAC_1_SQRT_2 + p.max_point_norm() * hphi / 2.0);

    let per_heading: Vec<Vec<GridCell>> = (0..phi_cells as u32)
        .into_par_iter()
        .map(|j| {
            let phi = -PI + j as f64 * hphi;
            let rotated: Vec<Point2> = p.points.iter().map(|q| q.rotate(phi)).collect();
            let c0 = p.anchors[0] - rotated[0];
            let mut out = Vec::new();
            for iy in 0..lay.nodes as u32 {
                let y = lay.center.y - lay.extent + iy as f64 * lay.cell;
                for (lo, hi) in annulus_row(&lay, c0, p.rho[0] - threshold, p.rho[0] + threshold, y) {
                    for ix in lo..=hi {
                        let d = Point2::new(lay.center.x - lay.extent + ix as f64 * lay.cell, y);
                        if let Some(m) = max_residual_at(p, &rotated, d, threshold) {
                            out.push(GridCell {
                                ix,
                                iy,
                                iphi: j,
                                max_residual: m,
                                component: 0,
                            });
                        }
                    }
                }
            }
            out
        })
        .collect();
    let mut cells: Vec<GridCell> = per_heading.into_iter().flatten().collect();

    let index: HashMap<(u32, u32, u32), usize> = cells
        .iter()
        .enumerate()
        .map(|(i, c)| ((c.ix, c.iy, c.iphi), i))
        .collect();
    let mut uf = UnionFind::new(cells.len());
    for (i, c) in cells.iter().enumerate() {
        for_each_neighbour(c, lay.nodes, phi_cells, |key| {
            if let Some(&j) = index.get(&key) {
                uf.union(i, j);
            }
        });
    }
    let mut ids: HashMap<usize, u32> = HashMap::new();
    for i in 0..cells.len() {
        let root = uf.find(i);
        let next = ids.len() as u32;
        cells[i].component = *ids.entry(root).or_insert(next);
    }
    OracleGrid {
        center: lay.center,
        extent: lay.extent,
        cell: lay.cell,
        nodes: lay.nodes,
        phi_cells,
        threshold,
        n_components: ids.len(),
        cells,
    }
}

fn for_each_neighbour(c: &GridCell, nodes: usize, phi_cells: usize, mut f: impl FnMut((u32, u32, u32))) {
    for di in -1i64..=1 {
        for dj in -1i64..=1 {
            for dk in -1i64..=1 {
                if di == 0 && dj == 0 && dk == 0 {
                    continue;
                }
                let x = c.ix as i64 + di;
                let y = c.iy as i64 + dj;
                if x < 0 || y < 0 || x >= nodes as i64 || y >= nodes as i64 {
                    continue;
                }
                let k = (c.iphi as i64 + dk).rem_euclid(phi_cells as i64);
                f((x as u32, y as u32, k as u32));
            }
        }
    }
}

fn seeds(grid: &OracleGrid) -> Vec<usize> {
    if grid.cells.len() <= SEED_ALL_LIMIT {
        return (0..grid.cells.len()).collect();
    }
    let index: HashMap<(u32, u32, u32), usize> = grid
        .cells
        .iter()
        .enumerate()
        .map(|(i, c)| ((c.ix, c.iy, c.iphi), i))
        .collect();
    (0..grid.cells.len())
        .filter(|&i| {
            let c = &grid.cells[i];
            if c.ix.is_multiple_of(LATTICE_STRIDE) && c.iy.is_multiple_of(LATTICE_STRIDE) && c.iphi.is_multiple_of(LATTICE_STRIDE) {
                return true;
            }
            let mut minimum = true;
            for_each_neighbour(c, grid.nodes, grid.phi_cells, |key| {
                if let Some(&j) = index.get(&key) {
                    if grid.cells[j].max_residual < c.max_residual {
                        minimum = false;
                    }
                }
            });
            minimum
        })
        .collect()
}

/// Single-linkage groups of refined solutions, distances in cell units.
fn linkage_groups(sols: &[RigidTransform2], grid: &OracleGrid) -> Vec<usize> {
    let scale = |t: RigidTransform2| {
        [
            t.dx / grid.cell,
            t.dy / grid.cell,
            (wrap_angle(t.phi) + PI) / grid.phi_step(),
        ]
    };
    let pts: Vec<[f64; 3]> = sols.iter().map(|&t| scale(t)).collect();
    let key = |v: &[f64; 3]| {
        (
            (v[0] / LINK_CELLS).floor() as i64,
            (v[1] / LINK_CELLS).floor() as i64,
            (v[2] / LINK_CELLS).floor() as i64,
        )
    };
    let mut buckets: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
    for (i, v) in pts.iter().enumerate() {
        buckets.entry(key(v)).or_default().push(i);
    }
    let period = grid.phi_cells as f64;
    let wrap_buckets = (period / LINK_CELLS).ceil() as i64;
    let mut uf = UnionFind::new(pts.len());
    for (i, v) in pts.iter().enumerate() {
        let (a, b, c) = key(v);
        for da in -1..=1 {
            for db in -1..=1 {
                for dc in -1..=1 {
                    let cc = (c + dc).rem_euclid(wrap_buckets.max(1));
                    let candidates = [cc, c + dc];
                    for kk in candidates {
                        let Some(list) = buckets.get(&(a + da, b + db, kk)) else {
                            continue;
                        };
                        for &j in list {
                            if j <= i {
                                continue;
                            }
                            let w = &pts[j];
                            let dphi = (v[2] - w[2]).abs();
                            let dphi = dphi.min(period - dphi);
                            let d2 = (v[0] - w[0]).powi(2) + (v[1] - w[1]).powi(2) + dphi * dphi;
                            if d2 <= LINK_CELLS * LINK_CELLS {
                                uf.union(i, j);
                            }
                        }
                    }
                }
            }
        }
    }
    (0..pts.len()).map(|i| uf.find(i)).collect()
}

/// Dense grid search: threshold, cluster, refine each cluster by damped least
/// squares, then classify isolated points and families.
pub fn brute_force_oracle(s: &Scenario, cfg: &SolverConfig) -> Result<SolutionSet> {
    cfg.validate()?;
    let p = RangeProblem::from_scenario(s)?;
    let grid = grid_for(&p, cfg);
    let seed_cells = seeds(&grid);
    let refined: Vec<_> = seed_cells
        .par_iter()
        .map(|&i| {
            let c = &grid.cells[i];
            levenberg_marquardt(&p, grid.node(c.ix, c.iy, c.iphi), cfg)
        })
        .collect();
    let mut dedup = Dedup::new(cfg.dedup_len, cfg.dedup_ang);
    for o in refined.iter().filter(|o| o.residual_norm <= cfg.accept_tol) {
        dedup.insert(o.transform);
    }
    if dedup.kept.is_empty() {
        return Err(Error::NoSolutionFound);
    }

    let groups = linkage_groups(&dedup.kept, &grid);
    let mut sizes: HashMap<usize, usize> = HashMap::new();
    for &g in &groups {
        *sizes.entry(g).or_default() += 1;
    }
    let tagged: Vec<(RigidTransform2, bool)> = dedup
        .kept
        .iter()
        .zip(&groups)
        .map(|(&t, g)| (t, sizes[g] < FAMILY_MIN))
        .collect();

    let cell_index: std::collections::HashSet<(u32, u32, u32)> =
        grid.cells.iter().map(|c| (c.ix, c.iy, c.iphi)).collect();
    let mut warnings = Vec::new();
    for (t, iso) in &tagged {
        if !iso {
            continue;
        }
        match grid.nearest(*t) {
            Some(k) if cell_index.contains(&k) => {}
            _ => warnings.push(format!(
                "GridTooCoarse: solution ({:.6}, {:.6}, {:.6}) is not on a thresholded cell",
                t.dx, t.dy, t.phi
            )),
        }
    }

    let lay = layout(&p, cfg);
    let multiplicity = |headings: &[RigidTransform2]| {
        headings
            .iter()
            .map(|t| slice_grid_count(&p, &lay, t.phi, cfg))
            .max()
            .unwrap_or(1)
    };
    let mut ss = assemble(&p, tagged, cfg, multiplicity, "grid oracle");
    ss.warnings = warnings;
    Ok(ss)
}

/// Solutions of a fixed-heading slice found from a 2-D grid.
fn slice_grid_count(p: &RangeProblem, lay: &Layout, phi: f64, cfg: &SolverConfig) -> usize {
    let tau = THRESHOLD_MARGIN * lay.cell * std::f64::consts::FRAC_1_SQRT_2;
    let rotated: Vec<Point2> = p.points.iter().map(|q| q.rotate(phi)).collect();
    let c0 = p.anchors[0] - rotated[0];
    let mut starts = Vec::new();
    for iy in 0..lay.nodes as u32 {
        let y = lay.center.y - lay.extent + iy as f64 * lay.cell;
        for (lo, hi) in annulus_row(lay, c0, p.rho[0] - tau, p.rho[0] + tau, y) {
            for ix in lo..=hi {
                let d = Point2::new(lay.center.x - lay.extent + ix as f64 * lay.cell, y);
                if max_residual_at(p, &rotated, d, tau).is_some() {
                    starts.push(d);
                }
            }
        }
    }
    let mut d = Dedup::new(cfg.dedup_len, cfg.dedup_ang);
    for s in starts {
        let o = levenberg_marquardt_slice(p, phi, s, cfg);
        if o.residual_norm <= cfg.accept_tol {
            d.insert(o.transform);
        }
    }
    d.kept.len()
}
