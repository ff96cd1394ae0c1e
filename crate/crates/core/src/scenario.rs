//! Scenario data model: anchors in the world frame, measurement points in the
//! vehicle frame, the schedule of which anchor ranges at each instant, and the
//! measured distances.
//!
//! Scenarios are stored as a single JSON document:
//!
//! ```json
//! {
//!   "anchors":   [{"id": 1, "x": 0.0, "y": 0.0}],
//!   "points_v":  [{"x": 1.0, "y": 0.0}],
//!   "headings_v": [0.0],
//!   "schedule":  [1],
//!   "rho":       [1.0],
//!   "tolerances": {"collinear": 1e-9, "tangency": 1e-9, "rank": 1e-8, "dedup": 1e-5}
//! }
//! ```
//!
//! `controls` (list of `{v, omega, duration}`) together with `sample_times`
//! may replace `points_v`, in which case the points are generated by
//! integrating the unicycle model from the origin. The optional `truth` and
//! `synthesis` keys record how `rho` was produced.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{self, Point2, RigidTransform2};
use crate::unicycle::{self, ControlSegment, UnicycleControls};

pub type AnchorId = u32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub id: AnchorId,
    pub position: Point2,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrajectoryV {
    pub points: Vec<Point2>,
    pub headings: Option<Vec<f64>>,
}

impl TrajectoryV {
    pub fn new(points: Vec<Point2>) -> Self {
        Self {
            points,
            headings: None,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// `‖S_{k,k+1}‖` for consecutive points.
    pub fn segment_lengths(&self) -> Vec<f64> {
        self.points.windows(2).map(|w| w[0].dist(w[1])).collect()
    }

    /// Signed turn angle between consecutive segments (`μ_{k,k+1}`); zero-length
    /// segments contribute 0.
    pub fn turn_angles(&self) -> Vec<f64> {
        self.points
            .windows(3)
            .map(|w| {
                let a = w[1] - w[0];
                let b = w[2] - w[1];
                if a.norm() == 0.0 || b.norm() == 0.0 {
                    0.0
                } else {
                    geom::angle_diff(b.angle(), a.angle())
                }
            })
            .collect()
    }
}

/// Anchor id measured at each index `k`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MeasurementSchedule {
    pub entries: Vec<AnchorId>,
}

impl MeasurementSchedule {
    pub fn new(entries: Vec<AnchorId>) -> Self {
        Self { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Measurements {
    pub rho: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "defaults::collinear")]
    pub collinear: f64,
    #[serde(default = "defaults::tangency")]
    pub tangency: f64,
    #[serde(default = "defaults::rank")]
    pub rank: f64,
    #[serde(default = "defaults::dedup")]
    pub dedup: f64,
    /// Window for the measure-zero degenerate cases.
    #[serde(default = "defaults::degenerate")]
    pub degenerate: f64,
    #[serde(default = "defaults::accept")]
    pub accept: f64,
}

mod defaults {
    pub fn collinear() -> f64 {
        1e-9
    }
    pub fn tangency() -> f64 {
        1e-9
    }
    pub fn rank() -> f64 {
        1e-8
    }
    pub fn dedup() -> f64 {
        1e-5
    }
    pub fn degenerate() -> f64 {
        1e-7
    }
    pub fn accept() -> f64 {
        1e-7
    }
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            collinear: defaults::collinear(),
            tangency: defaults::tangency(),
            rank: defaults::rank(),
            dedup: defaults::dedup(),
            degenerate: defaults::degenerate(),
            accept: defaults::accept(),
        }
    }
}

/// Piecewise-constant controls and the instants at which measurements occur.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlInput {
    pub controls: UnicycleControls,
    pub sample_times: Vec<f64>,
}

/// How `rho` was generated, kept for reproducibility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisInfo {
    pub noise_std: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub anchors: Vec<Anchor>,
    pub trajectory: TrajectoryV,
    pub schedule: MeasurementSchedule,
    pub measurements: Option<Measurements>,
    pub tolerances: Tolerances,
    pub controls: Option<ControlInput>,
    pub truth: Option<RigidTransform2>,
    pub synthesis: Option<SynthesisInfo>,
}

/// Measurements collected by one anchor.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorGroup {
    pub anchor_id: AnchorId,
    pub anchor: Point2,
    pub indices: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AnchorSetClass {
    C1,
    C2,
    C3,
}

impl AnchorSetClass {
    /// Number of informative measurements the set is worth (C3 saturates).
    pub fn informative_count(self) -> usize {
        match self {
            AnchorSetClass::C1 => 1,
            AnchorSetClass::C2 => 2,
            AnchorSetClass::C3 => 3,
        }
    }
}

/// Classifies the measurement points collected by one anchor.
///
/// A point lying on the anchor routes the whole set to C3.
pub fn classify_anchor_set(points: &[Point2], anchor: Point2, tol: f64) -> AnchorSetClass {
    let on_anchor = points.iter().any(|p| p.dist(anchor) <= tol);
    classify_points(points, on_anchor, tol)
}

/// Same as [`classify_anchor_set`] when only the "touches the anchor" fact is
/// known (e.g. from a zero range) rather than the anchor position in the
/// points' frame.
pub fn classify_points(points: &[Point2], touches_anchor: bool, tol: f64) -> AnchorSetClass {
    if touches_anchor {
        AnchorSetClass::C3
    } else if geom::coincident(points, tol) {
        AnchorSetClass::C1
    } else if geom::collinear(points, tol) {
        AnchorSetClass::C2
    } else {
        AnchorSetClass::C3
    }
}

impl Scenario {
    pub fn new(
        anchors: Vec<Anchor>,
        points: Vec<Point2>,
        schedule: Vec<AnchorId>,
        rho: Option<Vec<f64>>,
    ) -> Result<Self> {
        let s = Scenario {
            anchors,
            trajectory: TrajectoryV::new(points),
            schedule: MeasurementSchedule::new(schedule),
            measurements: rho.map(|rho| Measurements { rho }),
            tolerances: Tolerances::default(),
            controls: None,
            truth: None,
            synthesis: None,
        };
        s.validate()?;
        Ok(s)
    }

    /// Builds a scenario and fills `rho` with exact ranges under `truth`.
    pub fn synthesized(
        anchors: Vec<Anchor>,
        points: Vec<Point2>,
        schedule: Vec<AnchorId>,
        truth: RigidTransform2,
    ) -> Result<Self> {
        let mut s = Scenario::new(anchors, points, schedule, None)?;
        s.measurements = Some(synthesize_measurements(&s, truth, 0.0, 0));
        s.truth = Some(truth);
        s.synthesis = Some(SynthesisInfo {
            noise_std: 0.0,
            seed: 0,
        });
        Ok(s)
    }

    pub fn n_measurements(&self) -> usize {
        self.schedule.len()
    }

    pub fn point(&self, k: usize) -> Point2 {
        self.trajectory.points[k]
    }

    pub fn anchor(&self, id: AnchorId) -> Option<&Anchor> {
        self.anchors.iter().find(|a| a.id == id)
    }

    /// World position of the anchor measured at index `k`.
    pub fn anchor_at(&self, k: usize) -> Point2 {
        let id = self.schedule.entries[k];
        self.anchor(id)
            .map(|a| a.position)
            .expect("validated schedule refers to known anchors")
    }

    pub fn rho(&self) -> Option<&[f64]> {
        self.measurements.as_ref().map(|m| m.rho.as_slice())
    }

    pub fn require_rho(&self) -> Result<&[f64]> {
        match self.rho() {
            Some(r) if !r.is_empty() => Ok(r),
            _ => Err(Error::MissingMeasurements),
        }
    }

    /// Anchors that collected at least one measurement, in order of first
    /// appearance in the schedule.
    pub fn groups(&self) -> Vec<AnchorGroup> {
        let mut order: Vec<AnchorId> = Vec::new();
        let mut by_id: HashMap<AnchorId, Vec<usize>> = HashMap::new();
        for (k, &id) in self.schedule.entries.iter().enumerate() {
            if !by_id.contains_key(&id) {
                order.push(id);
            }
            by_id.entry(id).or_default().push(k);
        }
        order
            .into_iter()
            .map(|id| AnchorGroup {
                anchor_id: id,
                anchor: self.anchor(id).expect("validated").position,
                indices: by_id.remove(&id).unwrap_or_default(),
            })
            .collect()
    }

    /// Class of each anchor group. Whether a point touches its anchor is read
    /// from the ranges when present, otherwise no point is assumed to.
    pub fn group_classes(&self) -> Vec<(AnchorGroup, AnchorSetClass)> {
        let tol = self.tolerances.collinear;
        let rho = self.rho();
        self.groups()
            .into_iter()
            .map(|g| {
                let pts: Vec<Point2> = g.indices.iter().map(|&k| self.point(k)).collect();
                let touches = rho.is_some_and(|r| g.indices.iter().any(|&k| r[k] <= tol));
                let class = classify_points(&pts, touches, tol);
                (g, class)
            })
            .collect()
    }

    pub fn world_points(&self, t: RigidTransform2) -> Vec<Point2> {
        self.trajectory.points.iter().map(|&p| t.apply(p)).collect()
    }

    /// Copy restricted to the first `n` measurements.
    pub fn prefix(&self, n: usize) -> Scenario {
        let mut s = self.clone();
        s.trajectory.points.truncate(n);
        if let Some(h) = s.trajectory.headings.as_mut() {
            h.truncate(n);
        }
        s.schedule.entries.truncate(n);
        if let Some(m) = s.measurements.as_mut() {
            m.rho.truncate(n);
        }
        s.controls = None;
        s
    }

    /// Copy keeping only the measurement indices in `keep` (in that order).
    pub fn subset(&self, keep: &[usize]) -> Scenario {
        let mut s = self.clone();
        s.trajectory.points = keep.iter().map(|&k| self.point(k)).collect();
        s.trajectory.headings = self
            .trajectory
            .headings
            .as_ref()
            .map(|h| keep.iter().map(|&k| h[k]).collect());
        s.schedule.entries = keep.iter().map(|&k| self.schedule.entries[k]).collect();
        if let Some(m) = s.measurements.as_mut() {
            m.rho = keep.iter().map(|&k| self.measurements.as_ref().unwrap().rho[k]).collect();
        }
        s.controls = None;
        s
    }

    /// Checks every structural invariant; called by the constructors and by
    /// [`load_scenario`].
    pub fn validate(&self) -> Result<()> {
        let schema = |msg: String| Err(Error::Schema(msg));
        if self.anchors.is_empty() {
            return schema("no anchors".into());
        }
        let mut seen = BTreeMap::new();
        for (i, a) in self.anchors.iter().enumerate() {
            if !a.position.is_finite() {
                return schema(format!("anchor {} has non-finite position", a.id));
            }
            if let Some(j) = seen.insert(a.id, i) {
                return schema(format!("duplicate anchor id {} (entries {j} and {i})", a.id));
            }
        }
        for (i, a) in self.anchors.iter().enumerate() {
            for b in &self.anchors[i + 1..] {
                if a.position.dist(b.position) <= self.tolerances.collinear {
                    return schema(format!("anchors {} and {} coincide", a.id, b.id));
                }
            }
        }
        let n = self.trajectory.points.len();
        if n == 0 {
            return schema("trajectory has no points".into());
        }
        if let Some((k, _)) = self.trajectory.points.iter().enumerate().find(|(_, p)| !p.is_finite()) {
            return schema(format!("points_v[{k}] is not finite"));
        }
        if let Some(h) = &self.trajectory.headings {
            if h.len() != n {
                return schema(format!("headings_v has {} entries, points_v has {n}", h.len()));
            }
        }
        if self.schedule.len() != n {
            return schema(format!(
                "schedule has {} entries, points_v has {n}",
                self.schedule.len()
            ));
        }
        for (k, id) in self.schedule.entries.iter().enumerate() {
            if !seen.contains_key(id) {
                return schema(format!("schedule[{k}] refers to unknown anchor {id}"));
            }
        }
        if let Some(m) = &self.measurements {
            if m.rho.len() != n {
                return schema(format!("rho has {} entries, expected N_m = {n}", m.rho.len()));
            }
            if let Some((k, r)) = m.rho.iter().enumerate().find(|(_, r)| !r.is_finite() || **r < 0.0) {
                return schema(format!("rho[{k}] = {r} must be finite and >= 0"));
            }
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("collinear", t.collinear),
            ("tangency", t.tangency),
            ("rank", t.rank),
            ("dedup", t.dedup),
            ("degenerate", t.degenerate),
            ("accept", t.accept),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return schema(format!("tolerance `{name}` must be positive"));
            }
        }
        Ok(())
    }
}

/// Ranges from the scheduled anchors to the trajectory placed by `truth`,
/// plus seeded gaussian noise. Noisy ranges are clamped at zero.
pub fn synthesize_measurements(
    s: &Scenario,
    truth: RigidTransform2,
    noise_std: f64,
    seed: u64,
) -> Measurements {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = (noise_std > 0.0).then(|| Normal::new(0.0, noise_std).expect("finite std"));
    let rho = (0..s.n_measurements())
        .map(|k| {
            let exact = truth.apply(s.point(k)).dist(s.anchor_at(k));
            match &noise {
                Some(n) => (exact + n.sample(&mut rng)).max(0.0),
                None => exact,
            }
        })
        .collect();
    Measurements { rho }
}

// --- JSON file format -------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnchorRecord {
    id: AnchorId,
    x: f64,
    y: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PointRecord {
    x: f64,
    y: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    anchors: Vec<AnchorRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    points_v: Option<Vec<PointRecord>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    headings_v: Option<Vec<f64>>,
    schedule: Vec<AnchorId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rho: Option<Vec<f64>>,
    #[serde(default)]
    tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    controls: Option<Vec<ControlSegment>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sample_times: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    truth: Option<RigidTransform2>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    synthesis: Option<SynthesisInfo>,
}

impl ScenarioFile {
    fn into_scenario(self) -> Result<Scenario> {
        let controls = match (self.controls, self.sample_times) {
            (Some(segments), Some(times)) => Some(ControlInput {
                controls: UnicycleControls::new(segments)?,
                sample_times: times,
            }),
            (None, None) => None,
            (Some(_), None) => return Err(Error::Schema("`controls` given without `sample_times`".into())),
            (None, Some(_)) => return Err(Error::Schema("`sample_times` given without `controls`".into())),
        };
        let trajectory = match (self.points_v, &controls) {
            (Some(points), _) => TrajectoryV {
                points: points.into_iter().map(|p| Point2::new(p.x, p.y)).collect(),
                headings: self.headings_v,
            },
            (None, Some(ci)) => unicycle::controls_to_trajectory_v(&ci.controls, &ci.sample_times)
                .map_err(|e| Error::Schema(format!("cannot generate points_v from controls: {e}")))?,
            (None, None) => return Err(Error::Schema("`points_v` is required when `controls` is absent".into())),
        };
        let s = Scenario {
            anchors: self
                .anchors
                .into_iter()
                .map(|a| Anchor {
                    id: a.id,
                    position: Point2::new(a.x, a.y),
                })
                .collect(),
            trajectory,
            schedule: MeasurementSchedule::new(self.schedule),
            measurements: self.rho.map(|rho| Measurements { rho }),
            tolerances: self.tolerances,
            controls,
            truth: self.truth,
            synthesis: self.synthesis,
        };
        s.validate()?;
        Ok(s)
    }

    fn from_scenario(s: &Scenario) -> Self {
        ScenarioFile {
            anchors: s
                .anchors
                .iter()
                .map(|a| AnchorRecord {
                    id: a.id,
                    x: a.position.x,
                    y: a.position.y,
                })
                .collect(),
            points_v: Some(
                s.trajectory
                    .points
                    .iter()
                    .map(|p| PointRecord { x: p.x, y: p.y })
                    .collect(),
            ),
            headings_v: s.trajectory.headings.clone(),
            schedule: s.schedule.entries.clone(),
            rho: s.measurements.as_ref().map(|m| m.rho.clone()),
            tolerances: s.tolerances,
            controls: s.controls.as_ref().map(|c| c.controls.segments.clone()),
            sample_times: s.controls.as_ref().map(|c| c.sample_times.clone()),
            truth: s.truth,
            synthesis: s.synthesis,
        }
    }
}

pub fn scenario_from_json(text: &str) -> Result<Scenario> {
    let file: ScenarioFile = serde_json::from_str(text).map_err(|e| Error::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    file.into_scenario()
}

pub fn scenario_to_json(s: &Scenario) -> String {
    serde_json::to_string_pretty(&ScenarioFile::from_scenario(s)).expect("scenario serializes")
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    scenario_from_json(&text)
}

pub fn save_scenario(s: &Scenario, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, scenario_to_json(s) + "\n").map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
