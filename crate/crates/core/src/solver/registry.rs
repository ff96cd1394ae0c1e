use super::{brute_force_oracle, solve_multistart, SolutionSet, SolverConfig};
use crate::error::{Error, Result};
use crate::global::{analyze, ClosedFormRegistry};
use crate::scenario::Scenario;

pub const MULTISTART: &str = "multistart";
pub const ORACLE: &str = "oracle";
pub const CLOSED_FORM: &str = "closed-form";

/// A way of finding every roto-translation consistent with the ranges.
pub trait Localizer: Send + Sync {
    fn name(&self) -> &'static str;
    fn solve(&self, s: &Scenario, cfg: &SolverConfig) -> Result<SolutionSet>;
}

struct Multistart;

impl Localizer for Multistart {
    fn name(&self) -> &'static str {
        MULTISTART
    }
    fn solve(&self, s: &Scenario, cfg: &SolverConfig) -> Result<SolutionSet> {
        solve_multistart(s, cfg)
    }
}

struct Oracle;

impl Localizer for Oracle {
    fn name(&self) -> &'static str {
        ORACLE
    }
    fn solve(&self, s: &Scenario, cfg: &SolverConfig) -> Result<SolutionSet> {
        brute_force_oracle(s, cfg)
    }
}

/// Closed-form enumeration; tolerances come from the scenario.
struct ClosedForm;

impl Localizer for ClosedForm {
    fn name(&self) -> &'static str {
        CLOSED_FORM
    }
    fn solve(&self, s: &Scenario, _cfg: &SolverConfig) -> Result<SolutionSet> {
        Ok(analyze(s, &ClosedFormRegistry::builtin())?.solutions)
    }
}

pub struct LocalizerRegistry {
    entries: Vec<Box<dyn Localizer>>,
}

impl LocalizerRegistry {
    pub fn empty() -> Self {
        Self { entries: Vec::new() }
    }

    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(Multistart));
        r.register(Box::new(Oracle));
        r.register(Box::new(ClosedForm));
        r
    }

    /// Adds a localizer, replacing any with the same name in place.
    pub fn register(&mut self, l: Box<dyn Localizer>) {
        match self.entries.iter().position(|e| e.name() == l.name()) {
            Some(i) => self.entries[i] = l,
            None => self.entries.push(l),
        }
    }

    pub fn get(&self, name: &str) -> Result<&dyn Localizer> {
        self.entries
            .iter()
            .find(|e| e.name() == name)
            .map(|b| b.as_ref())
            .ok_or_else(|| Error::UnknownStrategy(name.to_string()))
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|e| e.name()).collect()
    }
}

impl Default for LocalizerRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}
