//! Generic estimation of the roto-translation from ranges: residual model,
//! damped least squares, multistart, a dense grid oracle and solution
//! counting.

mod lm;
mod multistart;
mod oracle;
mod registry;

use std::collections::HashMap;
use std::fmt;

use nalgebra::{DMatrix, DVector, Matrix3, SymmetricEigen, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::geom::{angle_diff, wrap_angle, Point2, RigidTransform2};
use crate::scenario::{Scenario, Tolerances};

pub use lm::{levenberg_marquardt, levenberg_marquardt_slice, LmOutcome};
pub use multistart::solve_multistart;
pub use oracle::{brute_force_oracle, oracle_grid, GridCell, OracleGrid};
pub use registry::{Localizer, LocalizerRegistry, CLOSED_FORM, MULTISTART, ORACLE};

/// Number of distinct indistinguishable roto-translations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndClass {
    Finite(usize),
    ContinuousFamily { dim: u8, multiplicity: usize },
}

impl IndClass {
    pub fn is_unique(self) -> bool {
        self == IndClass::Finite(1)
    }

    pub fn finite_count(self) -> Option<usize> {
        match self {
            IndClass::Finite(n) => Some(n),
            IndClass::ContinuousFamily { .. } => None,
        }
    }
}

impl fmt::Display for IndClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            IndClass::Finite(n) => write!(f, "Ind({n})"),
            IndClass::ContinuousFamily { dim, .. } if dim >= 2 => write!(f, "Ind(∞×∞)"),
            IndClass::ContinuousFamily { multiplicity: 1, .. } => write!(f, "Ind(∞)"),
            IndClass::ContinuousFamily { multiplicity, .. } => write!(f, "Ind({multiplicity}×∞)"),
        }
    }
}

impl Serialize for IndClass {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Solution {
    pub transform: RigidTransform2,
    pub residual_norm: f64,
    pub jacobian_rank: usize,
    /// False when the solution lies on a continuous family.
    pub isolated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilyInfo {
    pub dimension: u8,
    pub multiplicity: usize,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolutionSet {
    /// Isolated solutions plus sampled representatives of any family, sorted
    /// by `(phi, dx, dy)`.
    pub solutions: Vec<Solution>,
    pub family: Option<FamilyInfo>,
    pub ind: IndClass,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl SolutionSet {
    /// Set made only of isolated solutions.
    pub fn finite(mut solutions: Vec<Solution>) -> Self {
        sort_solutions(&mut solutions);
        let n = solutions.len();
        SolutionSet {
            solutions,
            family: None,
            ind: IndClass::Finite(n.max(1)),
            warnings: Vec::new(),
        }
    }

    pub fn transforms(&self) -> Vec<RigidTransform2> {
        self.solutions.iter().map(|s| s.transform).collect()
    }

    pub fn isolated(&self) -> impl Iterator<Item = &Solution> {
        self.solutions.iter().filter(|s| s.isolated)
    }

    pub fn len(&self) -> usize {
        self.solutions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.solutions.is_empty()
    }
}

pub fn sort_solutions(v: &mut [Solution]) {
    v.sort_by(|a, b| {
        let (ta, tb) = (a.transform, b.transform);
        ta.phi
            .total_cmp(&tb.phi)
            .then(ta.dx.total_cmp(&tb.dx))
            .then(ta.dy.total_cmp(&tb.dy))
    });
}

/// Grid used by the oracle and to bound multistart initializations. Missing
/// extent/cell are derived from the scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridSpec {
    /// Half-width of the (dx, dy) box.
    pub extent: Option<f64>,
    pub cell: Option<f64>,
    pub phi_cells: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            extent: None,
            cell: None,
            phi_cells: 360,
        }
    }
}

/// Multiplicative Levenberg damping schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DampingSchedule {
    pub initial: f64,
    pub increase: f64,
    pub decrease: f64,
}

impl Default for DampingSchedule {
    fn default() -> Self {
        Self {
            initial: 1e-3,
            increase: 10.0,
            decrease: 10.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverConfig {
    pub accept_tol: f64,
    pub dedup_len: f64,
    pub dedup_ang: f64,
    /// Relative singular-value threshold for Jacobian rank.
    pub rank_tol: f64,
    pub n_starts: usize,
    pub grid: GridSpec,
    pub max_iterations: usize,
    pub damping: DampingSchedule,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self::from_tolerances(&Tolerances::default())
    }
}

impl SolverConfig {
    pub fn from_tolerances(t: &Tolerances) -> Self {
        Self {
            accept_tol: t.accept,
            dedup_len: t.dedup,
            dedup_ang: t.dedup,
            rank_tol: t.rank,
            n_starts: 4096,
            grid: GridSpec::default(),
            max_iterations: 500,
            damping: DampingSchedule::default(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("accept_tol", self.accept_tol),
            ("dedup_len", self.dedup_len),
            ("dedup_ang", self.dedup_ang),
            ("rank_tol", self.rank_tol),
            ("damping.initial", self.damping.initial),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Schema(format!("solver {name} must be > 0")));
            }
        }
        if self.damping.increase <= 1.0 || self.damping.decrease <= 1.0 {
            return Err(Error::Schema("damping factors must be > 1".into()));
        }
        if self.n_starts == 0 || self.max_iterations == 0 || self.grid.phi_cells == 0 {
            return Err(Error::Schema("n_starts, max_iterations and phi_cells must be > 0".into()));
        }
        for v in [self.grid.extent, self.grid.cell].into_iter().flatten() {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Schema("grid extent and cell must be > 0".into()));
            }
        }
        Ok(())
    }
}

/// Range constraints `‖R p_k + d − B_k‖ = ρ_k` flattened out of a scenario.
#[derive(Debug, Clone)]
pub struct RangeProblem {
    pub points: Vec<Point2>,
    pub anchors: Vec<Point2>,
    pub rho: Vec<f64>,
}

impl RangeProblem {
    pub fn from_scenario(s: &Scenario) -> Result<Self> {
        let rho = s.require_rho()?.to_vec();
        Ok(Self {
            points: s.trajectory.points.clone(),
            anchors: (0..s.n_measurements()).map(|k| s.anchor_at(k)).collect(),
            rho,
        })
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    pub fn residual(&self, k: usize, t: RigidTransform2) -> f64 {
        t.apply(self.points[k]).dist(self.anchors[k]) - self.rho[k]
    }

    pub fn residuals(&self, t: RigidTransform2) -> Vec<f64> {
        (0..self.len()).map(|k| self.residual(k, t)).collect()
    }

    pub fn residual_norm(&self, t: RigidTransform2) -> f64 {
        (0..self.len())
            .map(|k| self.residual(k, t).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs_residual(&self, t: RigidTransform2) -> f64 {
        (0..self.len()).fold(0.0f64, |m, k| m.max(self.residual(k, t).abs()))
    }

    /// Rows `∂r_k/∂(dx, dy, phi)`.
    pub fn jacobian(&self, t: RigidTransform2) -> Vec<[f64; 3]> {
        (0..self.len())
            .map(|k| {
                let q = self.points[k].rotate(t.phi);
                let w = q + t.translation() - self.anchors[k];
                let n = w.norm();
                if n == 0.0 {
                    return [0.0; 3];
                }
                let u = w * (1.0 / n);
                [u.x, u.y, u.dot(q.perp())]
            })
            .collect()
    }

    /// Half-width of a (dx, dy) box, centred on the anchor centroid, that
    /// contains every exact solution.
    pub fn covering_extent(&self) -> (Point2, f64) {
        let c = self.anchor_centroid();
        let e = (0..self.len())
            .map(|k| self.anchors[k].dist(c) + self.rho[k] + self.points[k].norm())
            .fold(0.0f64, f64::max);
        (c, e.max(1e-3))
    }

    pub fn anchor_centroid(&self) -> Point2 {
        if self.anchors.is_empty() {
            return Point2::ORIGIN;
        }
        let sum = self
            .anchors
            .iter()
            .fold(Point2::ORIGIN, |acc, &a| acc + a);
        sum * (1.0 / self.anchors.len() as f64)
    }

    pub fn max_point_norm(&self) -> f64 {
        self.points.iter().map(|p| p.norm()).fold(0.0, f64::max)
    }
}

/// `r_k` for every measurement under `t`.
pub fn residuals(s: &Scenario, t: RigidTransform2) -> Result<Vec<f64>> {
    Ok(RangeProblem::from_scenario(s)?.residuals(t))
}

pub fn jacobian(s: &Scenario, t: RigidTransform2) -> Result<Vec<[f64; 3]>> {
    Ok(RangeProblem::from_scenario(s)?.jacobian(t))
}

fn padded(rows: &[[f64; 3]]) -> DMatrix<f64> {
    let n = rows.len().max(3);
    DMatrix::from_fn(n, 3, |i, j| rows.get(i).map_or(0.0, |r| r[j]))
}

/// Rank with singular values below `rel_tol · σ_max` treated as zero.
pub fn numerical_rank(rows: &[[f64; 3]], rel_tol: f64) -> usize {
    let sv = padded(rows).singular_values();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax).count()
}

/// Right singular vectors ordered by ascending singular value.
pub fn right_singular_vectors(rows: &[[f64; 3]]) -> ([f64; 3], [[f64; 3]; 3]) {
    let m = padded(rows);
    let jtj: Matrix3<f64> = Matrix3::from_fn(|i, j| (0..m.nrows()).map(|k| m[(k, i)] * m[(k, j)]).sum());
    let eig = SymmetricEigen::new(jtj);
    let mut idx = [0usize, 1, 2];
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let sig = idx.map(|k| eig.eigenvalues[k].max(0.0).sqrt());
    let vecs = idx.map(|k| {
        let c = eig.eigenvectors.column(k);
        [c[0], c[1], c[2]]
    });
    (sig, vecs)
}

/// Minimum-norm Gauss-Newton step `−J⁺ r`.
pub(crate) fn gauss_newton_step(rows: &[[f64; 3]], r: &[f64], rel_tol: f64) -> [f64; 3] {
    let m = padded(rows);
    let mut b = DVector::zeros(m.nrows());
    for (i, v) in r.iter().enumerate() {
        b[i] = *v;
    }
    let svd = m.svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return [0.0; 3];
    }
    match svd.solve(&b, rel_tol * smax) {
        Ok(x) => [-x[0], -x[1], -x[2]],
        Err(_) => [0.0; 3],
    }
}

pub(crate) fn step_transform(t: RigidTransform2, d: [f64; 3]) -> RigidTransform2 {
    RigidTransform2::new(t.dx + d[0], t.dy + d[1], t.phi + d[2])
}

/// Projects `t` onto the solution set by minimum-norm Gauss-Newton.
pub(crate) fn project_to_solutions(
    p: &RangeProblem,
    mut t: RigidTransform2,
    rel_tol: f64,
    iterations: usize,
) -> RigidTransform2 {
    for _ in 0..iterations {
        let r = p.residuals(t);
        if r.iter().all(|v| v.abs() < 1e-15) {
            break;
        }
        let step = gauss_newton_step(&p.jacobian(t), &r, rel_tol);
        t = step_transform(t, step);
    }
    t
}

const CONTINUATION_STEP: f64 = 1e-2;

/// Whether a solution continues into a family: step along the Jacobian null
/// direction, project back, and check that the projection stays away from the
/// starting point with no residual growth.
pub(crate) fn lies_on_family(p: &RangeProblem, t: RigidTransform2, cfg: &SolverConfig) -> bool {
    let rows = p.jacobian(t);
    if numerical_rank(&rows, cfg.rank_tol) == 3 {
        return false;
    }
    let base = p.residual_norm(t);
    let (_, vecs) = right_singular_vectors(&rows);
    let n = vecs[0];
    [1.0, -1.0].iter().any(|&sgn| {
        let moved = step_transform(t, n.map(|v| v * sgn * CONTINUATION_STEP));
        let back = project_to_solutions(p, moved, cfg.rank_tol, 30);
        let res = p.residual_norm(back);
        let dist = transform_distance(back, t);
        res <= cfg.accept_tol.max(base + 1e-9) && dist >= 0.5 * CONTINUATION_STEP
    })
}

pub(crate) fn transform_distance(a: RigidTransform2, b: RigidTransform2) -> f64 {
    ((a.dx - b.dx).powi(2) + (a.dy - b.dy).powi(2) + angle_diff(a.phi, b.phi).powi(2)).sqrt()
}

const PCA_PROBES: usize = 12;
const PCA_RADIUS: f64 = 1e-3;
const PCA_GAP: f64 = 1e3;

/// Local dimension of the solution set at `t` from the principal spread of
/// nearby points projected back onto it.
pub(crate) fn family_dimension(p: &RangeProblem, t: RigidTransform2, cfg: &SolverConfig) -> u8 {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    let mut pts = Vec::with_capacity(PCA_PROBES);
    for i in 0..PCA_PROBES {
        let z = 1.0 - 2.0 * (i as f64 + 0.5) / PCA_PROBES as f64;
        let r = (1.0 - z * z).sqrt();
        let a = golden * i as f64;
        let dir = [r * a.cos(), r * a.sin(), z];
        let start = step_transform(t, dir.map(|v| v * PCA_RADIUS));
        let q = project_to_solutions(p, start, cfg.rank_tol, 30);
        if p.residual_norm(q) <= cfg.accept_tol.max(p.residual_norm(t) + 1e-9) {
            pts.push(Vector3::new(q.dx - t.dx, q.dy - t.dy, angle_diff(q.phi, t.phi)));
        }
    }
    if pts.len() < 3 {
        return 0;
    }
    let mean = pts.iter().fold(Vector3::zeros(), |a, v| a + v) / pts.len() as f64;
    let cov = pts
        .iter()
        .fold(Matrix3::zeros(), |a, v| a + (v - mean) * (v - mean).transpose());
    let ev = SymmetricEigen::new(cov).eigenvalues;
    let lmax = ev.iter().cloned().fold(0.0, f64::max);
    if lmax <= 0.0 {
        return 0;
    }
    ev.iter().filter(|&&l| l * PCA_GAP >= lmax).count() as u8
}

/// Greedy deduplication with a spatial hash; earlier entries win.
pub(crate) struct Dedup {
    len_tol: f64,
    ang_tol: f64,
    buckets: HashMap<(i64, i64, i64), Vec<usize>>,
    pub kept: Vec<RigidTransform2>,
}

impl Dedup {
    pub fn new(len_tol: f64, ang_tol: f64) -> Self {
        Self {
            len_tol,
            ang_tol,
            buckets: HashMap::new(),
            kept: Vec::new(),
        }
    }

    fn key(&self, t: RigidTransform2) -> (i64, i64, i64) {
        (
            (t.dx / self.len_tol).floor() as i64,
            (t.dy / self.len_tol).floor() as i64,
            (wrap_angle(t.phi) / self.ang_tol).floor() as i64,
        )
    }

    /// Index of an existing entry within tolerance of `t`.
    pub fn find(&self, t: RigidTransform2) -> Option<usize> {
        let (a, b, c) = self.key(t);
        let lo = (-std::f64::consts::PI / self.ang_tol).floor() as i64;
        let hi = (std::f64::consts::PI / self.ang_tol).floor() as i64;
        let span = hi - lo + 1;
        for i in -1..=1 {
            for j in -1..=1 {
                for k in -1..=1 {
                    let mut ck = c + k;
                    if ck < lo {
                        ck += span;
                    } else if ck > hi {
                        ck -= span;
                    }
                    let Some(v) = self.buckets.get(&(a + i, b + j, ck)) else {
                        continue;
                    };
                    for &idx in v {
                        if self.kept[idx].approx_eq(t, self.len_tol, self.ang_tol) {
                            return Some(idx);
                        }
                    }
                }
            }
        }
        None
    }

    /// Inserts `t` unless a duplicate exists; returns the kept index and
    /// whether it was new.
    pub fn insert(&mut self, t: RigidTransform2) -> (usize, bool) {
        if let Some(i) = self.find(t) {
            return (i, false);
        }
        let key = self.key(t);
        self.kept.push(t);
        let idx = self.kept.len() - 1;
        self.buckets.entry(key).or_default().push(idx);
        (idx, true)
    }
}

/// Low-discrepancy points in `[0,1)^3`, shifted by a seeded random offset.
pub(crate) fn halton_points(n: usize, seed: u64) -> Vec<[f64; 3]> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shift: [f64; 3] = [rng.random(), rng.random(), rng.random()];
    (1..=n)
        .map(|i| {
            let h = [radical_inverse(i, 2), radical_inverse(i, 3), radical_inverse(i, 5)];
            [
                (h[0] + shift[0]).fract(),
                (h[1] + shift[1]).fract(),
                (h[2] + shift[2]).fract(),
            ]
        })
        .collect()
}

fn radical_inverse(mut i: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

/// Evenly spaced subsample keeping at most `k` entries of a sorted list.
pub(crate) fn subsample<T: Clone>(v: &[T], k: usize) -> Vec<T> {
    if v.len() <= k {
        return v.to_vec();
    }
    (0..k).map(|i| v[i * v.len() / k].clone()).collect()
}

/// Reads the family/isolation data of a solution set back into an Ind class.
pub fn count_indistinguishable(ss: &SolutionSet) -> IndClass {
    match (&ss.family, ss.solutions.iter().any(|s| !s.isolated)) {
        (Some(f), _) => IndClass::ContinuousFamily {
            dim: f.dimension.max(1),
            multiplicity: f.multiplicity.max(1),
        },
        (None, true) => IndClass::ContinuousFamily {
            dim: 1,
            multiplicity: 1,
        },
        (None, false) => IndClass::Finite(ss.isolated().count().max(1)),
    }
}

/// Same Ind class and, for finite sets, a one-to-one match of transforms
/// within the dedup tolerance.
pub fn solution_sets_agree(a: &SolutionSet, b: &SolutionSet, cfg: &SolverConfig) -> bool {
    if a.ind != b.ind {
        return false;
    }
    if a.family.is_some() {
        return true;
    }
    let ta: Vec<_> = a.isolated().map(|s| s.transform).collect();
    let tb: Vec<_> = b.isolated().map(|s| s.transform).collect();
    ta.len() == tb.len()
        && ta
            .iter()
            .all(|x| tb.iter().any(|y| x.approx_eq(*y, cfg.dedup_len, cfg.dedup_ang)))
}

/// Solutions of the fixed-heading slice, deduplicated in (dx, dy).
pub(crate) fn slice_count(p: &RangeProblem, phi: f64, starts: &[Point2], cfg: &SolverConfig) -> usize {
    let mut d = Dedup::new(cfg.dedup_len, cfg.dedup_ang);
    for &s in starts {
        let out = levenberg_marquardt_slice(p, phi, s, cfg);
        if out.residual_norm <= cfg.accept_tol {
            d.insert(out.transform);
        }
    }
    d.kept.len()
}

/// Builds the set entry for a refined transform.
pub(crate) fn make_solution(p: &RangeProblem, t: RigidTransform2, cfg: &SolverConfig, isolated: bool) -> Solution {
    Solution {
        transform: t,
        residual_norm: p.residual_norm(t),
        jacobian_rank: numerical_rank(&p.jacobian(t), cfg.rank_tol),
        isolated,
    }
}

pub(crate) const MAX_FAMILY_REPRESENTATIVES: usize = 64;
pub(crate) const MULTIPLICITY_SLICES: usize = 8;

/// Assembles a set from refined solutions tagged isolated / on a family.
pub(crate) fn assemble(
    p: &RangeProblem,
    refined: Vec<(RigidTransform2, bool)>,
    cfg: &SolverConfig,
    multiplicity: impl Fn(&[RigidTransform2]) -> usize,
    source: &str,
) -> SolutionSet {
    let mut isolated: Vec<Solution> = Vec::new();
    let mut fam: Vec<Solution> = Vec::new();
    for (t, iso) in refined {
        let s = make_solution(p, t, cfg, iso);
        if iso {
            isolated.push(s);
        } else {
            fam.push(s);
        }
    }
    sort_solutions(&mut isolated);
    if fam.is_empty() {
        return SolutionSet::finite(isolated);
    }
    sort_solutions(&mut fam);
    let reps = subsample(&fam, MAX_FAMILY_REPRESENTATIVES);
    let dim = reps
        .iter()
        .step_by((reps.len() / 4).max(1))
        .map(|s| family_dimension(p, s.transform, cfg))
        .max()
        .unwrap_or(1)
        .clamp(1, 2);
    let mult = if dim >= 2 {
        1
    } else {
        let headings: Vec<RigidTransform2> = subsample(&reps, MULTIPLICITY_SLICES)
            .into_iter()
            .map(|s| s.transform)
            .collect();
        multiplicity(&headings).max(1)
    };
    let mut solutions = isolated;
    solutions.extend(reps);
    sort_solutions(&mut solutions);
    let ind = IndClass::ContinuousFamily {
        dim,
        multiplicity: mult,
    };
    SolutionSet {
        solutions,
        family: Some(FamilyInfo {
            dimension: dim,
            multiplicity: mult,
            description: format!("{dim}-dimensional family, {mult} sheet(s) per heading ({source})"),
        }),
        ind,
        warnings: Vec::new(),
    }
}
