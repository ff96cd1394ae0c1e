//! Machine-readable analysis report combining the global and local results.

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geom::RigidTransform2;
use crate::global::{
    analyze, critical_lines_2p2, critical_lines_next_point, ClosedFormRegistry, CriticalLineSet, DegenerateFlags,
    Distribution, TaxonomyClass,
};
use crate::local::{build_gramian, GramianReport};
use crate::scenario::{scenario_to_json, Scenario, Tolerances};
use crate::solver::{IndClass, SolutionSet, SolverConfig};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolutionGramian {
    pub transform: RigidTransform2,
    pub jacobian_rank: usize,
    pub gramian: GramianReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub schema_version: u32,
    pub scenario: serde_json::Value,
    /// SHA-256 of the canonical scenario JSON.
    pub scenario_sha256: String,
    pub taxonomy: TaxonomyClass,
    pub strategy: String,
    pub solutions: SolutionSet,
    pub degenerate: DegenerateFlags,
    /// Lines the last measurement point must avoid, when the prefix before it
    /// has finitely many solutions.
    pub critical_lines: Option<CriticalLineSet>,
    pub gramians: Vec<SolutionGramian>,
    pub seed: u64,
    pub tolerances: Tolerances,
    pub solver: SolverConfig,
}

impl AnalysisReport {
    /// Unique and locally isolated everywhere.
    pub fn is_constructible(&self) -> bool {
        self.taxonomy.ind_count == IndClass::Finite(1) && self.gramians.iter().all(|g| g.gramian.rank == 3)
    }

    /// 0 when constructible, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.is_constructible() {
            0
        } else {
            2
        }
    }
}

pub fn scenario_hash(s: &Scenario) -> String {
    Sha256::digest(scenario_to_json(s).as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Critical lines for the last point: the six 2+2 lines when the scenario is
/// a 2+2 built on a 2+1 prefix, the next-point axes otherwise. `None` when the
/// prefix is unique, a family, or too short.
pub fn last_point_critical_lines(s: &Scenario) -> Option<CriticalLineSet> {
    let n = s.n_measurements();
    if n < 2 {
        return None;
    }
    let prefix = Distribution::of(&s.prefix(n - 1));
    if n == 4 && prefix.0 == [2, 1] && Distribution::of(s).0 == [2, 2] {
        if let Ok(set) = critical_lines_2p2(s) {
            return Some(set);
        }
    }
    critical_lines_next_point(s, n - 1).ok()
}

pub fn build_report(s: &Scenario, cfg: &SolverConfig) -> Result<AnalysisReport> {
    let ga = analyze(s, &ClosedFormRegistry::builtin())?;
    let gramians = ga
        .solutions
        .solutions
        .iter()
        .map(|sol| {
            Ok(SolutionGramian {
                transform: sol.transform,
                jacobian_rank: sol.jacobian_rank,
                gramian: build_gramian(s, sol.transform)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let scenario = serde_json::from_str(&scenario_to_json(s)).map_err(|e| Error::Schema(e.to_string()))?;
    Ok(AnalysisReport {
        schema_version: SCHEMA_VERSION,
        scenario,
        scenario_sha256: scenario_hash(s),
        taxonomy: ga.taxonomy,
        strategy: ga.strategy,
        solutions: ga.solutions,
        degenerate: ga.flags,
        critical_lines: last_point_critical_lines(s),
        gramians,
        seed: cfg.seed,
        tolerances: s.tolerances,
        solver: *cfg,
    })
}
