//! Proof traces: which technique processed which guard clause, the solver
//! queries that justified it, and what was added to the partial result.
//!
//! Traces are replayable: re-running the recorded queries reproduces the
//! recorded verdicts (see the replay test in the acceptance suite).

use std::fmt;

use crate::expr::{Atom, Clause, Formula};
use crate::solver::{SolverClient, SolverError, SolverVerdict};

/// Name of an acceleration or non-termination technique.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum TechniqueName {
    MonotonicIncrease,
    MonotonicDecrease,
    EventualDecrease,
    EventualIncrease,
    Metering,
    NtMonotonicIncrease,
    NtEventualIncrease,
    NtFixpoints,
}

impl TechniqueName {
    pub fn as_str(&self) -> &'static str {
        match self {
            TechniqueName::MonotonicIncrease => "monotonic increase",
            TechniqueName::MonotonicDecrease => "monotonic decrease",
            TechniqueName::EventualDecrease => "eventual decrease",
            TechniqueName::EventualIncrease => "eventual increase",
            TechniqueName::Metering => "metering function",
            TechniqueName::NtMonotonicIncrease => "non-termination via monotonic increase",
            TechniqueName::NtEventualIncrease => "non-termination via eventual increase",
            TechniqueName::NtFixpoints => "non-termination via fixpoints",
        }
    }
}

impl fmt::Display for TechniqueName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum QueryKind {
    Implication,
    Satisfiability,
}

/// Condensed solver verdict stored in traces.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum VerdictSummary {
    Proved,
    NotProved,
    Unknown,
}

impl From<&SolverVerdict> for VerdictSummary {
    fn from(v: &SolverVerdict) -> Self {
        match v {
            SolverVerdict::Proved => VerdictSummary::Proved,
            SolverVerdict::NotProved(_) => VerdictSummary::NotProved,
            SolverVerdict::Unknown(_) => VerdictSummary::Unknown,
        }
    }
}

impl fmt::Display for VerdictSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VerdictSummary::Proved => "proved",
            VerdictSummary::NotProved => "not proved",
            VerdictSummary::Unknown => "unknown",
        })
    }
}

/// One recorded solver query.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct QueryRecord {
    pub kind: QueryKind,
    /// Premise of an implication query; `None` for satisfiability checks.
    pub premise: Option<Formula>,
    /// Conclusion of an implication query, or the formula checked for
    /// satisfiability.
    pub formula: Formula,
    pub verdict: VerdictSummary,
}

impl QueryRecord {
    /// Re-run this query and report whether the verdict matches the record.
    pub fn replay(&self, solver: &mut SolverClient) -> Result<bool, SolverError> {
        let verdict = match (self.kind, &self.premise) {
            (QueryKind::Implication, Some(p)) => solver.check_implication(p, &self.formula)?,
            (QueryKind::Implication, None) => {
                solver.check_implication(&Formula::truth(), &self.formula)?
            }
            (QueryKind::Satisfiability, _) => solver.check_sat_poly_exp(&self.formula)?,
        };
        Ok(VerdictSummary::from(&verdict) == self.verdict)
    }
}

impl fmt::Display for QueryRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.kind, &self.premise) {
            (QueryKind::Implication, Some(p)) => {
                write!(f, "{} => {} : {}", p, self.formula, self.verdict)
            }
            (QueryKind::Implication, None) => {
                write!(f, "true => {} : {}", self.formula, self.verdict)
            }
            (QueryKind::Satisfiability, _) => {
                write!(f, "sat? {} : {}", self.formula, self.verdict)
            }
        }
    }
}

/// One step of a derivation: a technique applied to one pending clause.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ProofStep {
    pub technique: TechniqueName,
    pub clause: Clause,
    /// The atom singled out by eventual/fixpoint techniques.
    pub designated: Option<Atom>,
    pub queries: Vec<QueryRecord>,
    /// Constraints this step contributed (conjunctively).
    pub added: Vec<Clause>,
    /// Present when the step was rolled back, with the reason.
    pub discarded: Option<String>,
}

impl ProofStep {
    pub fn accepted(&self) -> bool {
        self.discarded.is_none()
    }
}

impl fmt::Display for ProofStep {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = match &self.discarded {
            Some(reason) => format!(" [discarded: {reason}]"),
            None => String::new(),
        };
        writeln!(f, "{} on `{}`{}", self.technique, self.clause, status)?;
        if let Some(a) = &self.designated {
            writeln!(f, "  designated atom: {a}")?;
        }
        for q in &self.queries {
            writeln!(f, "  query: {q}")?;
        }
        if !self.added.is_empty() {
            let added: Vec<String> = self.added.iter().map(|c| c.to_string()).collect();
            writeln!(f, "  added: {}", added.join(" && "))?;
        }
        Ok(())
    }
}
