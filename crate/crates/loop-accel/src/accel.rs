//! Conditional acceleration techniques and the calculus engine combining
//! them.
//!
//! An acceleration problem splits the guard into a processed part (`checked`)
//! and a pending part; the partial result `psi` always relates pre-state,
//! counter, and post-state for the processed part. Techniques pick one
//! pending clause, may assume the processed part when discharging their
//! premise, and contribute constraints to `psi`. The engine applies them
//! technique-major: it tries the highest-priority technique on every pending
//! clause before falling back to the next one, and restarts from the top
//! after every accepted step, so clauses that failed earlier get retried
//! once more of the guard has been processed.
//!
//! Priorities: monotonic increase > monotonic decrease > eventual decrease >
//! eventual increase. Results of eventual increase are satisfiability-checked
//! and rolled back when no model is found, to avoid empty
//! under-approximations.

use num::Zero;
use thiserror::Error;

use crate::closed_form::{solve_closed_form, ClosedForm, ClosedFormError};
use crate::expr::{Atom, AtomKind, Clause, Formula, PolyExp, Var};
use crate::loop_model::Loop;
use crate::solver::{SolverClient, SolverError, SolverVerdict};
use crate::trace::{ProofStep, QueryKind, QueryRecord, TechniqueName, VerdictSummary};

/// Acceleration techniques in engine priority order.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Technique {
    MonotonicIncrease,
    MonotonicDecrease,
    EventualDecrease,
    EventualIncrease,
}

impl Technique {
    pub const DEFAULT_PRIORITY: [Technique; 4] = [
        Technique::MonotonicIncrease,
        Technique::MonotonicDecrease,
        Technique::EventualDecrease,
        Technique::EventualIncrease,
    ];

    fn name(&self) -> TechniqueName {
        match self {
            Technique::MonotonicIncrease => TechniqueName::MonotonicIncrease,
            Technique::MonotonicDecrease => TechniqueName::MonotonicDecrease,
            Technique::EventualDecrease => TechniqueName::EventualDecrease,
            Technique::EventualIncrease => TechniqueName::EventualIncrease,
        }
    }
}

#[derive(Clone, Debug)]
pub struct AccelConfig {
    /// Techniques to use, in priority order.
    pub techniques: Vec<Technique>,
}

impl Default for AccelConfig {
    fn default() -> Self {
        AccelConfig {
            techniques: Technique::DEFAULT_PRIORITY.to_vec(),
        }
    }
}

#[derive(Error, Debug)]
pub enum AccelError {
    #[error("no closed form for the update: {0}")]
    ClosedFormUnavailable(#[from] ClosedFormError),
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// In-progress acceleration of one loop.
#[derive(Clone, Debug)]
pub struct AccelProblem {
    loop_: Loop,
    cf: ClosedForm,
    bindings: Vec<(Var, PolyExp)>,
    constraints: Vec<Clause>,
    checked: Vec<Clause>,
    pending: Vec<Clause>,
    exact: bool,
    trace: Vec<ProofStep>,
}

impl AccelProblem {
    pub fn loop_(&self) -> &Loop {
        &self.loop_
    }

    pub fn closed_form(&self) -> &ClosedForm {
        &self.cf
    }

    /// Post-state bindings `v' = v(n)`, one per program variable.
    pub fn bindings(&self) -> &[(Var, PolyExp)] {
        &self.bindings
    }

    pub fn constraints(&self) -> &[Clause] {
        &self.constraints
    }

    pub fn checked(&self) -> &[Clause] {
        &self.checked
    }

    pub fn pending(&self) -> &[Clause] {
        &self.pending
    }

    pub fn exact(&self) -> bool {
        self.exact
    }

    /// The partial result as a formula over pre-state, counter, post-state.
    pub fn psi_formula(&self) -> Formula {
        psi_formula(&self.bindings, &self.constraints)
    }
}

fn psi_formula(bindings: &[(Var, PolyExp)], constraints: &[Clause]) -> Formula {
    let binding_atoms = bindings
        .iter()
        .map(|(v, cf)| Atom::eq0(PolyExp::var(v.clone()).sub(cf)));
    Formula::from_atoms(binding_atoms).and(&Formula::from_clauses(constraints.iter().cloned()))
}

/// Result of accelerating a loop. When `leftover` is empty, the formula
/// under-approximates the n-fold transition relation for all `n > 0`, and is
/// equivalent to it when `exact` is set.
#[derive(Clone, Debug)]
pub struct AccelResult {
    pub bindings: Vec<(Var, PolyExp)>,
    pub constraints: Vec<Clause>,
    pub exact: bool,
    pub trace: Vec<ProofStep>,
    /// Guard clauses no technique could process (empty on success).
    pub leftover: Vec<Clause>,
}

impl AccelResult {
    pub fn accelerated(&self) -> bool {
        self.leftover.is_empty()
    }

    /// The synthesized formula `x' = a^n(x) && constraints`.
    pub fn formula(&self) -> Formula {
        psi_formula(&self.bindings, &self.constraints)
    }
}

/// The canonical acceleration problem of a loop: post-state bound to the
/// closed form, nothing checked, the whole guard pending.
pub fn canonical_problem(loop_: &Loop) -> Result<AccelProblem, ClosedFormError> {
    let cf = solve_closed_form(loop_)?;
    let bindings = cf
        .components()
        .map(|(v, e)| (v.primed(), e.clone()))
        .collect();
    Ok(AccelProblem {
        loop_: loop_.clone(),
        cf,
        bindings,
        constraints: Vec::new(),
        checked: Vec::new(),
        pending: loop_.guard_clauses(),
        exact: true,
        trace: Vec::new(),
    })
}

/// What a successful technique application contributes.
#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub added: Vec<Clause>,
    pub exact: bool,
    pub designated: Option<Atom>,
    pub queries: Vec<QueryRecord>,
}

fn conjunction(parts: &[&[Clause]]) -> Formula {
    Formula::from_clauses(parts.iter().flat_map(|cs| cs.iter().cloned()))
}

fn implication_query(
    solver: &mut SolverClient,
    premise: Formula,
    conclusion: Formula,
    queries: &mut Vec<QueryRecord>,
) -> Result<bool, SolverError> {
    let verdict = solver.check_implication(&premise, &conclusion)?;
    let proved = verdict.is_proved();
    queries.push(QueryRecord {
        kind: QueryKind::Implication,
        premise: Some(premise),
        formula: conclusion,
        verdict: VerdictSummary::from(&verdict),
    });
    Ok(proved)
}

/// Monotonic increase: if `checked && chi` implies `chi` after one step,
/// then `chi` holds throughout the run once it holds initially; the clause
/// set itself is added. Exact.
pub fn try_monotonic_increase(
    solver: &mut SolverClient,
    chi: &[Clause],
    checked: &[Clause],
    loop_: &Loop,
) -> Result<Option<StepOutcome>, SolverError> {
    let mut queries = Vec::new();
    let premise = conjunction(&[checked, chi]);
    let stepped = step_clauses(loop_, chi);
    if implication_query(solver, premise, stepped, &mut queries)? {
        Ok(Some(StepOutcome {
            added: chi.to_vec(),
            exact: true,
            designated: None,
            queries,
        }))
    } else {
        Ok(None)
    }
}

/// Monotonic decrease: if `checked && chi-after-one-step` implies `chi`,
/// then `chi` held at every earlier step provided it holds before the last
/// one; `chi` at iteration `n - 1` is added, via the shifted closed form.
/// Exact.
pub fn try_monotonic_decrease(
    solver: &mut SolverClient,
    chi: &[Clause],
    checked: &[Clause],
    loop_: &Loop,
    cf: &ClosedForm,
) -> Result<Option<StepOutcome>, SolverError> {
    let mut queries = Vec::new();
    let stepped = step_clauses(loop_, chi);
    let premise = conjunction(&[checked]).and(&stepped);
    let conclusion = conjunction(&[chi]);
    if implication_query(solver, premise, conclusion, &mut queries)? {
        let at_previous = cf.subst_shifted(-1);
        let added = chi
            .iter()
            .filter_map(|c| c.map_atoms(|a| a.subst(&at_previous)))
            .collect();
        Ok(Some(StepOutcome {
            added,
            exact: true,
            designated: None,
            queries,
        }))
    } else {
        Ok(None)
    }
}

fn step_clauses(loop_: &Loop, clauses: &[Clause]) -> Formula {
    Formula::from_clauses(
        clauses
            .iter()
            .filter_map(|c| loop_.update().apply_clause(c, 1)),
    )
}

/// Designated-atom candidates of a clause: its strict inequalities, in
/// canonical order.
fn designated_candidates(clause: &Clause) -> Vec<&Atom> {
    clause
        .atoms()
        .filter(|a| a.kind() == AtomKind::Gt0)
        .collect()
}

/// Eventual decrease: once the designated quantity stops growing it never
/// grows again, so positivity initially and before the last step covers the
/// whole run. Adds `e > 0 && e(n-1) > 0`. Exact when the clause is exactly
/// the designated atom.
pub fn try_eventual_decrease(
    solver: &mut SolverClient,
    clause: &Clause,
    checked: &[Clause],
    loop_: &Loop,
    cf: &ClosedForm,
) -> Result<Option<StepOutcome>, SolverError> {
    let mut queries = Vec::new();
    for atom in designated_candidates(clause) {
        if eventual_premise_holds(solver, atom, checked, loop_, Direction::Decrease, &mut queries)?
        {
            let e = atom.lhs();
            let at_previous = Atom::gt0(e.subst(&cf.subst_shifted(-1)));
            let added = singleton_clauses([atom.clone(), at_previous]);
            return Ok(Some(StepOutcome {
                added,
                exact: clause.len() == 1,
                designated: Some(atom.clone()),
                queries,
            }));
        }
    }
    Ok(None)
}

/// Eventual increase: once the designated quantity starts growing it never
/// shrinks again, so it stays positive when it is positive and non-shrinking
/// initially. Adds `0 < e <= e-after-one-step`. Never exact, and the result
/// can be unsatisfiable; the engine satisfiability-checks it.
pub fn try_eventual_increase(
    solver: &mut SolverClient,
    clause: &Clause,
    checked: &[Clause],
    loop_: &Loop,
) -> Result<Option<StepOutcome>, SolverError> {
    let mut queries = Vec::new();
    for atom in designated_candidates(clause) {
        if eventual_premise_holds(solver, atom, checked, loop_, Direction::Increase, &mut queries)?
        {
            let e = atom.lhs();
            let e1 = loop_.update().apply_expr(e, 1);
            let non_shrinking = Atom::ge0(e1.sub(e));
            let added = singleton_clauses([atom.clone(), non_shrinking]);
            return Ok(Some(StepOutcome {
                added,
                exact: false,
                designated: Some(atom.clone()),
                queries,
            }));
        }
    }
    Ok(None)
}

#[derive(Clone, Copy)]
enum Direction {
    Decrease,
    Increase,
}

// Premise of the eventual techniques: under `checked`, monotonicity of the
// designated quantity in the given direction persists for one more step.
fn eventual_premise_holds(
    solver: &mut SolverClient,
    atom: &Atom,
    checked: &[Clause],
    loop_: &Loop,
    direction: Direction,
    queries: &mut Vec<QueryRecord>,
) -> Result<bool, SolverError> {
    let e = atom.lhs();
    let e1 = loop_.update().apply_expr(e, 1);
    let e2 = loop_.update().apply_expr(e, 2);
    let (hypothesis, conclusion) = match direction {
        Direction::Decrease => (Atom::ge0(e.sub(&e1)), Atom::ge0(e1.sub(&e2))),
        Direction::Increase => (Atom::ge0(e1.sub(e)), Atom::ge0(e2.sub(&e1))),
    };
    let premise = conjunction(&[checked]).and(&Formula::single_atom(hypothesis));
    implication_query(solver, premise, Formula::single_atom(conclusion), queries)
}

fn singleton_clauses(atoms: impl IntoIterator<Item = Atom>) -> Vec<Clause> {
    atoms
        .into_iter()
        .filter_map(|a| Clause::normalized([a]))
        .collect()
}

/// Validate a caller-supplied iteration lower bound `mf` for the clause set
/// `chi` under `checked`: the bound may drop by at most one per step while
/// `chi` holds, and must be nonpositive once `chi` fails. On success the
/// constraint `n < mf + 1` is added. Sound, not exact.
pub fn validate_metering(
    solver: &mut SolverClient,
    loop_: &Loop,
    chi: &[Clause],
    checked: &[Clause],
    mf: &PolyExp,
) -> Result<Option<StepOutcome>, SolverError> {
    let mut queries = Vec::new();
    let mf_stepped = loop_.update().apply_expr(mf, 1);

    // checked && chi implies mf - mf(a(x)) <= 1, with denominators cleared.
    let slack = PolyExp::one().sub(&mf.sub(&mf_stepped));
    let (slack_int, _) = slack.clear_denominators();
    let bounded_descent = implication_query(
        solver,
        conjunction(&[checked, chi]),
        Formula::single_atom(Atom::ge0(slack_int)),
        &mut queries,
    )?;
    if !bounded_descent {
        return Ok(None);
    }

    // checked && !chi implies mf <= 0, checked in contrapositive form:
    // checked && mf > 0 implies chi.
    let (mf_int, _) = mf.clear_denominators();
    let positive_implies_guard = implication_query(
        solver,
        conjunction(&[checked]).and(&Formula::single_atom(Atom::gt0(mf_int))),
        conjunction(&[chi]),
        &mut queries,
    )?;
    if !positive_implies_guard {
        return Ok(None);
    }

    let bound = Atom::gt0(mf.sub(&PolyExp::counter()).add_int(1));
    Ok(Some(StepOutcome {
        added: singleton_clauses([bound]),
        exact: false,
        designated: None,
        queries,
    }))
}

/// Accelerate a loop by repeatedly applying the configured techniques.
///
/// Returns the synthesized formula together with its proof trace. Guard
/// clauses that no technique could process are reported in `leftover`; the
/// formula only speaks about the processed part in that case.
pub fn accelerate(
    solver: &mut SolverClient,
    loop_: &Loop,
    config: &AccelConfig,
) -> Result<AccelResult, AccelError> {
    let mut problem = canonical_problem(loop_)?;
    'restart: loop {
        if problem.pending.is_empty() {
            break;
        }
        for &technique in &config.techniques {
            for idx in 0..problem.pending.len() {
                let clause = problem.pending[idx].clone();
                let chi = std::slice::from_ref(&clause);
                let outcome = match technique {
                    Technique::MonotonicIncrease => {
                        try_monotonic_increase(solver, chi, &problem.checked, &problem.loop_)?
                    }
                    Technique::MonotonicDecrease => try_monotonic_decrease(
                        solver,
                        chi,
                        &problem.checked,
                        &problem.loop_,
                        &problem.cf,
                    )?,
                    Technique::EventualDecrease => try_eventual_decrease(
                        solver,
                        &clause,
                        &problem.checked,
                        &problem.loop_,
                        &problem.cf,
                    )?,
                    Technique::EventualIncrease => {
                        try_eventual_increase(solver, &clause, &problem.checked, &problem.loop_)?
                    }
                };
                let Some(mut outcome) = outcome else {
                    continue;
                };

                if technique == Technique::EventualIncrease {
                    // The added constraints can contradict psi; roll the
                    // step back when no model is found.
                    let mut constraints = problem.constraints.clone();
                    constraints.extend(outcome.added.iter().cloned());
                    let candidate = psi_formula(&problem.bindings, &constraints);
                    let verdict = solver.check_sat_poly_exp(&candidate)?;
                    outcome.queries.push(QueryRecord {
                        kind: QueryKind::Satisfiability,
                        premise: None,
                        formula: candidate,
                        verdict: VerdictSummary::from(&verdict),
                    });
                    if !matches!(verdict, SolverVerdict::NotProved(_)) {
                        problem.trace.push(ProofStep {
                            technique: technique.name(),
                            clause: clause.clone(),
                            designated: outcome.designated.clone(),
                            queries: outcome.queries,
                            added: outcome.added,
                            discarded: Some(
                                "result formula has no model; step rolled back".into(),
                            ),
                        });
                        continue;
                    }
                }

                problem.pending.remove(idx);
                problem.checked.push(clause.clone());
                for added in &outcome.added {
                    if !problem.constraints.contains(added) {
                        problem.constraints.push(added.clone());
                    }
                }
                problem.exact &= outcome.exact;
                problem.trace.push(ProofStep {
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
        break;
    }

    Ok(AccelResult {
        bindings: problem.bindings,
        constraints: problem.constraints,
        exact: problem.exact,
        trace: problem.trace,
        leftover: problem.pending,
    })
}
