//! Proving non-termination: a calculus over the guard clauses that builds a
//! satisfiable formula all of whose models diverge.
//!
//! The problem state mirrors acceleration, but the partial result `psi`
//! speaks about the pre-state only: every model of `psi` is a witness of
//! non-termination for the processed guard part. No closed form is needed,
//! so this also applies to loops whose n-fold update has no symbolic
//! representation.
//!
//! Priorities: monotonic increase > eventual increase > fixpoints. Every
//! accepted step is satisfiability-checked; steps that make `psi`
//! unsatisfiable are rolled back and the next technique is tried on the same
//! clause, so a fruitless derivation is detected early instead of failing
//! the whole analysis.

use std::collections::{BTreeMap, BTreeSet};

use num::bigint::BigInt;
use num::{Signed, Zero};
use thiserror::Error;

use crate::accel::{try_eventual_increase, try_monotonic_increase, StepOutcome};
use crate::expr::{Atom, AtomKind, Clause, EvalError, Formula, PolyExp, Var};
use crate::loop_model::Loop;
use crate::solver::{SolverClient, SolverError, SolverVerdict};
use crate::trace::{ProofStep, QueryKind, QueryRecord, TechniqueName, VerdictSummary};

/// Non-termination techniques in engine priority order.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum NtTechnique {
    MonotonicIncrease,
    EventualIncrease,
    Fixpoints,
}

impl NtTechnique {
    pub const DEFAULT_PRIORITY: [NtTechnique; 3] = [
        NtTechnique::MonotonicIncrease,
        NtTechnique::EventualIncrease,
        NtTechnique::Fixpoints,
    ];

    fn name(&self) -> TechniqueName {
        match self {
            NtTechnique::MonotonicIncrease => TechniqueName::NtMonotonicIncrease,
            NtTechnique::EventualIncrease => TechniqueName::NtEventualIncrease,
            NtTechnique::Fixpoints => TechniqueName::NtFixpoints,
        }
    }
}

#[derive(Clone, Debug)]
pub struct NontermConfig {
    /// Techniques to use, in priority order.
    pub techniques: Vec<NtTechnique>,
    /// Steps to simulate from the witness as a self-check.
    pub simulation_steps: u64,
}

impl Default for NontermConfig {
    fn default() -> Self {
        NontermConfig {
            techniques: NtTechnique::DEFAULT_PRIORITY.to_vec(),
            simulation_steps: 1000,
        }
    }
}

#[derive(Error, Debug)]
pub enum NontermError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(
        "internal error: certificate witness stopped satisfying the guard after {steps} steps"
    )]
    WitnessSimulationFailed { steps: u64 },
}

/// A satisfiable formula over the program variables whose models all
/// diverge, with one concrete witness extracted from the solver.
#[derive(Clone, Debug)]
pub struct Certificate {
    pub formula: Formula,
    pub witness: BTreeMap<Var, BigInt>,
    pub trace: Vec<ProofStep>,
    /// Guard-true steps simulated from the witness as a self-check.
    pub simulated_steps: u64,
}

#[derive(Debug)]
pub enum NontermOutcome {
    Certified(Certificate),
    Failed {
        leftover: Vec<Clause>,
        trace: Vec<ProofStep>,
    },
}

impl NontermOutcome {
    pub fn certificate(&self) -> Option<&Certificate> {
        match self {
            NontermOutcome::Certified(c) => Some(c),
            NontermOutcome::Failed { .. } => None,
        }
    }
}

/// All variables the value of `e` can ever depend on under repeated
/// application of the update: the least set containing the variables of `e`
/// that is closed under taking variables of right-hand sides.
pub fn var_closure(loop_: &Loop, e: &PolyExp) -> BTreeSet<Var> {
    let mut closure: BTreeSet<Var> = e
        .vars()
        .into_iter()
        .filter(|v| loop_.vars().contains(v))
        .collect();
    loop {
        let mut grew = false;
        for v in closure.clone() {
            for dep in loop_.update().rhs(&v).vars() {
                if loop_.vars().contains(&dep) && closure.insert(dep) {
                    grew = true;
                }
            }
        }
        if !grew {
            return closure;
        }
    }
}

/// Fixpoint technique: freeze every variable the designated quantity depends
/// on. One candidate per strict inequality of the clause, in order; the
/// caller must satisfiability-check the result.
pub fn nt_fixpoints(clause: &Clause, loop_: &Loop) -> Vec<StepOutcome> {
    let mut candidates = Vec::new();
    for atom in clause.atoms() {
        if atom.kind() != AtomKind::Gt0 {
            continue;
        }
        let mut atoms = vec![atom.clone()];
        for v in var_closure(loop_, atom.lhs()) {
            atoms.push(Atom::eq0(
                PolyExp::var(v.clone()).sub(loop_.update().rhs(&v)),
            ));
        }
        candidates.push(StepOutcome {
            added: simplify_added(atoms),
            exact: false,
            designated: Some(atom.clone()),
            queries: Vec::new(),
        });
    }
    candidates
}

/// Simplify an added atom set: propagate `v = constant` equalities into the
/// other atoms and fold constants. `x4 + 1 > 0 && x4 = -x4` becomes `x4 = 0`.
fn simplify_added(atoms: Vec<Atom>) -> Vec<Clause> {
    let mut atoms = atoms;
    let mut propagated: BTreeSet<Var> = BTreeSet::new();
    loop {
        let binding = atoms.iter().find_map(|a| {
            constant_binding(a).filter(|(v, _)| !propagated.contains(v))
        });
        let Some((var, value)) = binding else { break };
        propagated.insert(var.clone());
        let sigma: BTreeMap<Var, PolyExp> =
            [(var.clone(), PolyExp::from_bigint(value))].into_iter().collect();
        let keep = Atom::eq0(PolyExp::var(var).sub(&sigma.values().next().unwrap().clone()));
        atoms = atoms
            .into_iter()
            .map(|a| if a == keep { a } else { a.subst(&sigma) })
            .collect();
    }
    let mut out: Vec<Clause> = Vec::new();
    for a in atoms {
        if a.is_trivially_false() {
            return vec![Clause::falsum()];
        }
        if a.is_trivially_true() {
            continue;
        }
        let c = Clause::singleton(a);
        if !out.contains(&c) {
            out.push(c);
        }
    }
    out
}

// `v = c` extracted from a normalized linear single-variable equality, when
// the solution is integral.
fn constant_binding(a: &Atom) -> Option<(Var, BigInt)> {
    if a.kind() != AtomKind::Eq0 {
        return None;
    }
    let vars = a.lhs().vars();
    if vars.len() != 1 {
        return None;
    }
    let v = vars.into_iter().next().unwrap();
    let (coeff, rest) = a.lhs().linear_split(&v)?;
    let offset = rest.as_constant()?;
    if coeff.is_zero() {
        return None;
    }
    let value = -offset / coeff;
    if value.is_integer() {
        Some((v, value.to_integer()))
    } else {
        None
    }
}

/// Prove non-termination of a loop. On success the certificate's formula is
/// satisfiable, every model is a witness of divergence, and the extracted
/// witness has been simulated for the configured number of steps.
pub fn prove_nonterm(
    solver: &mut SolverClient,
    loop_: &Loop,
    config: &NontermConfig,
) -> Result<NontermOutcome, NontermError> {
    let mut psi: Vec<Clause> = Vec::new();
    let mut checked: Vec<Clause> = Vec::new();
    let mut pending: Vec<Clause> = loop_.guard_clauses();
    let mut trace: Vec<ProofStep> = Vec::new();

    'restart: loop {
        if pending.is_empty() {
            break;
        }
        for &technique in &config.techniques {
            for idx in 0..pending.len() {
                let clause = pending[idx].clone();
                let chi = std::slice::from_ref(&clause);
                let candidates: Vec<StepOutcome> = match technique {
                    NtTechnique::MonotonicIncrease => {
                        try_monotonic_increase(solver, chi, &checked, loop_)?
                            .into_iter()
                            .collect()
                    }
                    NtTechnique::EventualIncrease => {
                        try_eventual_increase(solver, &clause, &checked, loop_)?
                            .into_iter()
                            .collect()
                    }
                    NtTechnique::Fixpoints => nt_fixpoints(&clause, loop_),
                };
                for mut outcome in candidates {
                    debug_assert!(outcome.added.iter().all(|c| c
                        .atoms()
                        .all(|a| !a.lhs().contains_counter()
                            && a.vars().iter().all(|v| !v.is_primed()))));

                    let mut candidate_psi = psi.clone();
                    for c in &outcome.added {
                        if !candidate_psi.contains(c) {
                            candidate_psi.push(c.clone());
                        }
                    }
                    let formula = Formula::from_clauses(candidate_psi.iter().cloned());
                    let verdict = solver.check_sat(&formula)?;
                    outcome.queries.push(QueryRecord {
                        kind: QueryKind::Satisfiability,
                        premise: None,
                        formula,
                        verdict: VerdictSummary::from(&verdict),
                    });
                    if !matches!(verdict, SolverVerdict::NotProved(_)) {
                        trace.push(ProofStep {
                            technique: technique.name(),
                            clause: clause.clone(),
                            designated: outcome.designated.clone(),
                            queries: outcome.queries,
                            added: outcome.added,
                            discarded: Some(
                                "certificate candidate has no model; step rolled back".into(),
                            ),
                        });
                        continue;
                    }

                    pending.remove(idx);
                    checked.push(clause.clone());
                    psi = candidate_psi;
                    trace.push(ProofStep {
                        technique: technique.name(),
                        clause,
                        designated: outcome.designated,
                        queries: outcome.queries,
                        added: outcome.added,
                        discarded: None,
                    });
                    continue 'restart;
                }
            }
        }
        break;
    }

    if !pending.is_empty() {
        return Ok(NontermOutcome::Failed {
            leftover: pending,
            trace,
        });
    }

    let formula = Formula::from_clauses(psi.iter().cloned());
    let verdict = solver.check_sat(&formula)?;
    let Some(model) = verdict.model() else {
        // Unreachable in practice: each step was satisfiability-checked.
        return Ok(NontermOutcome::Failed {
            leftover: Vec::new(),
            trace,
        });
    };
    let mut witness = model.clone();
    for v in loop_.vars() {
        witness.entry(v.clone()).or_insert_with(BigInt::zero);
    }
    witness.retain(|v, _| loop_.vars().contains(v));

    let steps = config.simulation_steps;
    simulate_guard_true(loop_, &witness, steps)
        .map_err(|_| NontermError::WitnessSimulationFailed { steps })?;

    Ok(NontermOutcome::Certified(Certificate {
        formula,
        witness,
        trace,
        simulated_steps: steps,
    }))
}

pub(crate) fn simulate_guard_true(
    loop_: &Loop,
    start: &BTreeMap<Var, BigInt>,
    steps: u64,
) -> Result<(), u64> {
    let mut state = start.clone();
    for k in 0..steps {
        if !loop_.guard().eval(&state).map_err(|_| k)? {
            return Err(k);
        }
        state = loop_.update().step(&state).map_err(|_| k)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loop_model::parse_loop;

    fn x(i: usize) -> PolyExp {
        PolyExp::var(Var::new(format!("x{i}")))
    }

    fn solver() -> SolverClient {
        SolverClient::from_env().expect("an SMT solver is required for the test suite")
    }

    fn v(name: &str) -> Var {
        Var::new(name)
    }

    #[test]
    fn closure_of_swapped_variables() {
        let l = parse_loop("vars: x1,x2; guard: x1 > 0; update: x1 := x2; x2 := x1").unwrap();
        let closure = var_closure(&l, &x(1));
        assert_eq!(closure, [v("x1"), v("x2")].into_iter().collect());
    }

    #[test]
    fn closure_under_identity_update_is_the_variable_itself() {
        let l = parse_loop("vars: x1,x2; guard: x1 > 0; update: x1 := x1; x2 := x2").unwrap();
        assert_eq!(var_closure(&l, &x(1)), [v("x1")].into_iter().collect());
    }

    #[test]
    fn closure_of_negated_variable() {
        let l = parse_loop("vars: x4; guard: x4 + 1 > 0; update: x4 := -x4").unwrap();
        assert_eq!(var_closure(&l, &x(4)), [v("x4")].into_iter().collect());
    }

    #[test]
    fn fixpoints_freeze_the_closure() {
        let l = parse_loop("vars: x1,x2; guard: x1 > 0; update: x1 := x2; x2 := x1").unwrap();
        let clause = l.guard_clauses().remove(0);
        let candidates = nt_fixpoints(&clause, &l);
        assert_eq!(candidates.len(), 1);
        let expected = vec![
            Clause::singleton(Atom::gt0(x(1))),
            Clause::singleton(Atom::eq0(x(1).sub(&x(2)))),
        ];
        let got: BTreeSet<_> = candidates[0].added.iter().cloned().collect();
        assert_eq!(got, expected.into_iter().collect());
    }

    #[test]
    fn fixpoints_simplify_constant_bindings() {
        // x4 + 1 > 0 together with x4 = -x4 collapses to x4 = 0
        let l = parse_loop("vars: x4; guard: x4 + 1 > 0; update: x4 := -x4").unwrap();
        let clause = l.guard_clauses().remove(0);
        let candidates = nt_fixpoints(&clause, &l);
        assert_eq!(
            candidates[0].added,
            vec![Clause::singleton(Atom::eq0(x(4)))]
        );
    }

    #[test]
    fn fixpoints_on_strict_growth_are_unsatisfiable() {
        // x > 0 with x := x + 1 freezes to the false constraint 1 = 0
        let l = parse_loop("vars: x; guard: x > 0; update: x := x + 1").unwrap();
        let clause = l.guard_clauses().remove(0);
        let candidates = nt_fixpoints(&clause, &l);
        assert_eq!(candidates[0].added, vec![Clause::falsum()]);
    }

    #[test]
    fn certifies_counting_loop() {
        let l = parse_loop("vars: x; guard: x > 0; update: x := x + 1").unwrap();
        let outcome = prove_nonterm(&mut solver(), &l, &NontermConfig::default()).unwrap();
        let cert = outcome.certificate().expect("diverges for positive x");
        assert_eq!(
            cert.formula,
            Formula::single_atom(Atom::gt0(PolyExp::var(v("x"))))
        );
        assert!(cert.witness[&v("x")].is_positive());
    }

    #[test]
    fn certifies_eventual_growth() {
        let l = parse_loop("vars: x1,x2; guard: x1 > 0; update: x1 := x1 + x2; x2 := x2 + 1")
            .unwrap();
        let outcome = prove_nonterm(&mut solver(), &l, &NontermConfig::default()).unwrap();
        let cert = outcome.certificate().expect("diverges for nonnegative x2");
        let expected = Formula::from_atoms([
            Atom::gt0(x(1)),
            Atom::gt0(x(2).add_int(1)),
        ]);
        assert_eq!(cert.formula, expected);
    }

    #[test]
    fn certifies_swap_loop_via_fixpoints() {
        let l = parse_loop("vars: x1,x2; guard: x1 > 0; update: x1 := x2; x2 := x1").unwrap();
        let outcome = prove_nonterm(&mut solver(), &l, &NontermConfig::default()).unwrap();
        let cert = outcome.certificate().expect("diverges on the diagonal");
        let expected = Formula::from_clauses([
            Clause::singleton(Atom::gt0(x(1))),
            Clause::singleton(Atom::eq0(x(1).sub(&x(2)))),
        ]);
        assert_eq!(cert.formula, expected);
        assert_eq!(cert.witness[&v("x1")], cert.witness[&v("x2")]);
    }

    #[test]
    fn fails_on_terminating_transfer_loop() {
        let l = parse_loop(
            "vars: x1,x2; guard: x1 > 0 && x2 > 0; update: x1 := x1 - 1; x2 := x2 + 1",
        )
        .unwrap();
        let outcome = prove_nonterm(&mut solver(), &l, &NontermConfig::default()).unwrap();
        match outcome {
            NontermOutcome::Failed { leftover, trace } => {
                assert_eq!(leftover.len(), 1);
                // the decreasing conjunct was attempted and rolled back
                assert!(trace.iter().any(|s| !s.accepted()));
            }
            NontermOutcome::Certified(_) => panic!("the loop terminates on every input"),
        }
    }

    #[test]
    fn certifies_four_variable_mixed_loop() {
        let l = parse_loop(
            "vars: x1,x2,x3,x4; guard: x1 > 0 && x3 > 0 && x4 + 1 > 0; \
             update: x1 := 1; x2 := x2 + x1; x3 := x3 + x2; x4 := -x4",
        )
        .unwrap();
        let outcome = prove_nonterm(&mut solver(), &l, &NontermConfig::default()).unwrap();
        let cert = outcome.certificate().expect("diverges from (1, 0, 1, 0)");
        let expected = Formula::from_clauses([
            Clause::singleton(Atom::gt0(x(1))),
            Clause::singleton(Atom::gt0(x(3))),
            Clause::singleton(Atom::gt0(x(2).add_int(1))),
            Clause::singleton(Atom::eq0(x(4))),
        ]);
        assert_eq!(cert.formula, expected);
    }

    #[test]
    fn witnesses_survive_long_simulation() {
        let l = parse_loop("vars: x1,x2; guard: x1 > 0; update: x1 := x1 + x2; x2 := x2 + 1")
            .unwrap();
        let config = NontermConfig {
            simulation_steps: 5000,
            ..NontermConfig::default()
        };
        let outcome = prove_nonterm(&mut solver(), &l, &config).unwrap();
        assert_eq!(outcome.certificate().unwrap().simulated_steps, 5000);
    }
}
