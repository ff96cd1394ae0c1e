use super::{
    enumerate_closed_form, solve_1p1, solve_1p1p1, solve_2p1, solve_3p1, solve_single_anchor, Distribution,
};
use crate::error::Result;
use crate::scenario::Scenario;
use crate::solver::SolutionSet;

pub(crate) const ENUMERATE: &str = "enumerate";

/// A closed-form solver for some family of measurement distributions.
pub trait ClosedFormStrategy: Send + Sync {
    fn name(&self) -> &'static str;
    fn accepts(&self, d: &Distribution) -> bool;
    fn solve(&self, s: &Scenario) -> Result<SolutionSet>;
}

struct SingleAnchor;
struct OnePlusOne;
struct TwoPlusOne;
struct ThreePlusOne;
struct OnePlusOnePlusOne;
struct Enumerate;

impl ClosedFormStrategy for SingleAnchor {
    fn name(&self) -> &'static str {
        "single-anchor"
    }
    fn accepts(&self, d: &Distribution) -> bool {
        d.0.len() == 1
    }
    fn solve(&self, s: &Scenario) -> Result<SolutionSet> {
        solve_single_anchor(s)
    }
}

impl ClosedFormStrategy for OnePlusOne {
    fn name(&self) -> &'static str {
        "1+1"
    }
    fn accepts(&self, d: &Distribution) -> bool {
        d.0 == [1, 1]
    }
    fn solve(&self, s: &Scenario) -> Result<SolutionSet> {
        solve_1p1(s, 720)?.solution_set(s)
    }
}

impl ClosedFormStrategy for TwoPlusOne {
    fn name(&self) -> &'static str {
        "2+1"
    }
    fn accepts(&self, d: &Distribution) -> bool {
        d.0 == [2, 1]
    }
    fn solve(&self, s: &Scenario) -> Result<SolutionSet> {
        solve_2p1(s)
    }
}

impl ClosedFormStrategy for ThreePlusOne {
    fn name(&self) -> &'static str {
        "3+1"
    }
    fn accepts(&self, d: &Distribution) -> bool {
        d.0 == [3, 1]
    }
    fn solve(&self, s: &Scenario) -> Result<SolutionSet> {
        solve_3p1(s)
    }
}

impl ClosedFormStrategy for OnePlusOnePlusOne {
    fn name(&self) -> &'static str {
        "1+1+1"
    }
    fn accepts(&self, d: &Distribution) -> bool {
        d.0 == [1, 1, 1]
    }
    fn solve(&self, s: &Scenario) -> Result<SolutionSet> {
        solve_1p1p1(s)
    }
}

impl ClosedFormStrategy for Enumerate {
    fn name(&self) -> &'static str {
        ENUMERATE
    }
    fn accepts(&self, d: &Distribution) -> bool {
        d.0.len() >= 2 && d.0 != [1, 1]
    }
    fn solve(&self, s: &Scenario) -> Result<SolutionSet> {
        enumerate_closed_form(s)
    }
}

/// Ordered strategy list; the first strategy accepting a distribution wins.
pub struct ClosedFormRegistry {
    entries: Vec<Box<dyn ClosedFormStrategy>>,
}

impl ClosedFormRegistry {
    pub fn empty() -> Self {
        Self { entries: Vec::new() }
    }

    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(SingleAnchor));
        r.register(Box::new(OnePlusOne));
        r.register(Box::new(TwoPlusOne));
        r.register(Box::new(ThreePlusOne));
        r.register(Box::new(OnePlusOnePlusOne));
        r.register(Box::new(Enumerate));
        r
    }

    /// Adds a strategy, replacing any with the same name in place.
    pub fn register(&mut self, s: Box<dyn ClosedFormStrategy>) {
        match self.entries.iter().position(|e| e.name() == s.name()) {
            Some(i) => self.entries[i] = s,
            None => self.entries.push(s),
        }
    }

    pub fn get(&self, name: &str) -> Option<&dyn ClosedFormStrategy> {
        self.entries.iter().find(|e| e.name() == name).map(|b| b.as_ref())
    }

    pub fn for_distribution(&self, d: &Distribution) -> Option<&dyn ClosedFormStrategy> {
        self.entries.iter().find(|e| e.accepts(d)).map(|b| b.as_ref())
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|e| e.name()).collect()
    }
}

impl Default for ClosedFormRegistry {
    fn default() -> Self {
        Self::builtin()
    }
}
