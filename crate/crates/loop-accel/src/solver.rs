//! Implication-validity and satisfiability checking over integer arithmetic
//! via an external SMT-LIB2 solver process.
//!
//! One [`SolverClient`] owns one solver process and talks to it over pipes.
//! Each query is preceded by `(reset)`, so queries are independent; the
//! process is only kept alive to amortize startup. The binary is taken from
//! the configuration, the `LOOPACCEL_SMT_BIN` environment variable, or a
//! `PATH` search for `z3`, `cvc5`, `yices-smt2` (in that order).
//!
//! Models returned by the solver are never trusted blindly: every model is
//! re-evaluated with exact arithmetic before it is handed to callers.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{Receiver, RecvTimeoutError};
use std::time::{Duration, Instant};

use num::bigint::BigInt;
use num::{One, Zero};
use thiserror::Error;

use crate::expr::{Atom, AtomKind, Clause, Formula, PolyExp, Var};

/// Outcome of a solver query.
///
/// For implication checks, `Proved` means the implication is valid and
/// `NotProved` carries a countermodel. For satisfiability checks the same
/// constructors are reused: `Proved` means unsatisfiable and `NotProved`
/// carries a satisfying assignment.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum SolverVerdict {
    Proved,
    NotProved(BTreeMap<Var, BigInt>),
    Unknown(UnknownReason),
}

impl SolverVerdict {
    pub fn is_proved(&self) -> bool {
        matches!(self, SolverVerdict::Proved)
    }

    pub fn model(&self) -> Option<&BTreeMap<Var, BigInt>> {
        match self {
            SolverVerdict::NotProved(m) => Some(m),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum UnknownReason {
    Timeout,
    Incomplete,
    Io,
}

#[derive(Error, Debug)]
pub enum SolverError {
    #[error(
        "no SMT solver available: {0}; install z3/cvc5/yices-smt2, set LOOPACCEL_SMT_BIN, \
         or pass --solver"
    )]
    Unavailable(String),
    #[error("malformed solver reply: {0}")]
    Protocol(String),
    #[error("cannot express term in QF_NIA: {0}")]
    UnsupportedTerm(String),
}

/// Configuration for spawning the solver process.
#[derive(Clone, Debug)]
pub struct SolverConfig {
    /// Explicit solver binary; overrides the environment and PATH probing.
    pub binary: Option<PathBuf>,
    /// Extra arguments appended to the binary's default arguments.
    pub args: Vec<String>,
    /// Per-query timeout.
    pub timeout: Duration,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            binary: None,
            args: Vec::new(),
            timeout: Duration::from_millis(10_000),
        }
    }
}

pub const SMT_BIN_ENV: &str = "LOOPACCEL_SMT_BIN";

fn find_in_path(name: &str) -> Option<PathBuf> {
    let path = std::env::var_os("PATH")?;
    for dir in std::env::split_paths(&path) {
        let candidate = dir.join(name);
        if candidate.is_file() {
            return Some(candidate);
        }
    }
    None
}

fn default_args(binary: &Path) -> Vec<String> {
    let stem = binary
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or_default();
    match stem {
        "z3" => vec!["-in".into()],
        "yices-smt2" | "yices_smt2" => vec!["--incremental".into()],
        _ => Vec::new(),
    }
}

struct Process {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<String>,
}

/// Client owning one external solver process.
pub struct SolverClient {
    binary: PathBuf,
    args: Vec<String>,
    timeout: Duration,
    process: Option<Process>,
}

const MARKER: &str = "::ready::";

impl SolverClient {
    /// Resolve the solver binary and prepare a client. The process itself is
    /// spawned lazily on the first query.
    pub fn new(config: &SolverConfig) -> Result<SolverClient, SolverError> {
        let binary = match &config.binary {
            Some(p) => p.clone(),
            None => match std::env::var_os(SMT_BIN_ENV) {
                Some(p) => PathBuf::from(p),
                None => ["z3", "cvc5", "yices-smt2"]
                    .iter()
                    .find_map(|name| find_in_path(name))
                    .ok_or_else(|| {
                        SolverError::Unavailable(
                            "no solver found on PATH".to_string(),
                        )
                    })?,
            },
        };
        let mut args = default_args(&binary);
        args.extend(config.args.iter().cloned());
        Ok(SolverClient {
            binary,
            args,
            timeout: config.timeout,
            process: None,
        })
    }

    /// Client with default configuration.
    pub fn from_env() -> Result<SolverClient, SolverError> {
        SolverClient::new(&SolverConfig::default())
    }

    pub fn binary(&self) -> &Path {
        &self.binary
    }

    fn ensure_process(&mut self) -> Result<&mut Process, SolverError> {
        if self.process.is_none() {
            let mut child = Command::new(&self.binary)
                .args(&self.args)
                .stdin(Stdio::piped())
                .stdout(Stdio::piped())
                .stderr(Stdio::null())
                .spawn()
                .map_err(|e| {
                    SolverError::Unavailable(format!(
                        "failed to start `{}`: {e}",
                        self.binary.display()
                    ))
                })?;
            let stdin = child.stdin.take().expect("stdin is piped");
            let stdout = child.stdout.take().expect("stdout is piped");
            let (tx, rx) = std::sync::mpsc::channel();
            std::thread::spawn(move || {
                let reader = BufReader::new(stdout);
                for line in reader.lines() {
                    match line {
                        Ok(l) => {
                            if tx.send(l).is_err() {
                                break;
                            }
                        }
                        Err(_) => break,
                    }
                }
            });
            self.process = Some(Process {
                child,
                stdin,
                lines: rx,
            });
        }
        Ok(self.process.as_mut().expect("process was just spawned"))
    }

    fn drop_process(&mut self) {
        if let Some(mut p) = self.process.take() {
            let _ = p.child.kill();
            let _ = p.child.wait();
        }
    }

    /// Send commands and collect output lines until the exchange marker.
    fn exchange(&mut self, commands: &str) -> Result<Exchange, SolverError> {
        let deadline = Instant::now() + self.timeout;
        self.ensure_process()?;
        let outcome = {
            let proc = self.process.as_mut().expect("process was ensured above");
            let payload = format!("{commands}(echo \"{MARKER}\")\n");
            if proc.stdin.write_all(payload.as_bytes()).is_err()
                || proc.stdin.flush().is_err()
            {
                Exchange::Died
            } else {
                let mut lines = Vec::new();
                loop {
                    let remaining = deadline.saturating_duration_since(Instant::now());
                    match proc.lines.recv_timeout(remaining) {
                        Ok(line) if line.trim() == MARKER => break Exchange::Lines(lines),
                        Ok(line) => lines.push(line),
                        Err(RecvTimeoutError::Timeout) => break Exchange::Timeout,
                        Err(RecvTimeoutError::Disconnected) => break Exchange::Died,
                    }
                }
            }
        };
        if !matches!(outcome, Exchange::Lines(_)) {
            self.drop_process();
        }
        Ok(outcome)
    }

    /// Run one query: reset, declare `vars`, assert everything in `asserts`,
    /// check satisfiability, and parse a model on `sat`.
    fn raw_check(
        &mut self,
        vars: &BTreeSet<Var>,
        asserts: &[String],
    ) -> Result<RawOutcome, SolverError> {
        let mut script = String::new();
        script.push_str("(reset)\n");
        script.push_str("(set-option :produce-models true)\n");
        script.push_str("(set-logic QF_NIA)\n");
        for v in vars {
            script.push_str(&format!("(declare-const {} Int)\n", smt_symbol(v)));
        }
        for a in asserts {
            script.push_str(a);
            script.push('\n');
        }
        script.push_str("(check-sat)\n");

        let verdict_lines = match self.exchange(&script)? {
            Exchange::Lines(lines) => lines,
            Exchange::Timeout => return Ok(RawOutcome::Unknown(UnknownReason::Timeout)),
            Exchange::Died => return Ok(RawOutcome::Unknown(UnknownReason::Io)),
        };
        let verdict = verdict_lines
            .iter()
            .map(|l| l.trim())
            .find(|l| !l.is_empty())
            .ok_or_else(|| SolverError::Protocol("no verdict line".into()))?;
        match verdict {
            "unsat" => Ok(RawOutcome::Unsat),
            "unknown" => Ok(RawOutcome::Unknown(UnknownReason::Incomplete)),
            "sat" => {
                let model_lines = match self.exchange("(get-model)\n")? {
                    Exchange::Lines(lines) => lines,
                    Exchange::Timeout => {
                        return Ok(RawOutcome::Unknown(UnknownReason::Timeout))
                    }
                    Exchange::Died => return Ok(RawOutcome::Unknown(UnknownReason::Io)),
                };
                let text = model_lines.join("\n");
                let mut model = parse_model(&text)?;
                for v in vars {
                    model.entry(v.clone()).or_insert_with(BigInt::zero);
                }
                model.retain(|v, _| vars.contains(v));
                Ok(RawOutcome::Sat(model))
            }
            other => Err(SolverError::Protocol(format!(
                "unexpected check-sat answer `{other}`"
            ))),
        }
    }

    /// Check validity of `premise => conclusion` over the integers.
    ///
    /// `Proved` means valid; `NotProved` carries a countermodel (a model of
    /// `premise && !conclusion`). `Unknown` must be treated by callers as
    /// "technique not applicable".
    pub fn check_implication(
        &mut self,
        premise: &Formula,
        conclusion: &Formula,
    ) -> Result<SolverVerdict, SolverError> {
        let mut vars: BTreeSet<Var> = premise.vars();
        vars.extend(conclusion.vars());
        let mut asserts = Vec::new();
        for clause in premise.clauses() {
            asserts.push(format!("(assert {})", clause_term(clause)?));
        }
        asserts.push(format!("(assert (not {}))", formula_term(conclusion)?));
        match self.raw_check(&vars, &asserts)? {
            RawOutcome::Unsat => Ok(SolverVerdict::Proved),
            RawOutcome::Unknown(r) => Ok(SolverVerdict::Unknown(r)),
            RawOutcome::Sat(model) => {
                let premise_holds = premise
                    .eval(&model)
                    .map_err(|e| SolverError::Protocol(format!("model evaluation failed: {e}")))?;
                let conclusion_holds = conclusion
                    .eval(&model)
                    .map_err(|e| SolverError::Protocol(format!("model evaluation failed: {e}")))?;
                if !premise_holds || conclusion_holds {
                    return Err(SolverError::Protocol(
                        "solver returned a spurious countermodel".into(),
                    ));
                }
                Ok(SolverVerdict::NotProved(model))
            }
        }
    }

    /// Check satisfiability of an exponential-free formula. `NotProved`
    /// carries a satisfying assignment; `Proved` means unsatisfiable.
    pub fn check_sat(&mut self, formula: &Formula) -> Result<SolverVerdict, SolverError> {
        self.check_sat_blocking(formula, &[])
    }

    /// Like [`check_sat`](Self::check_sat), additionally excluding the given
    /// assignments (used to sample several distinct models).
    pub fn check_sat_blocking(
        &mut self,
        formula: &Formula,
        blocked: &[BTreeMap<Var, BigInt>],
    ) -> Result<SolverVerdict, SolverError> {
        let vars = formula.vars();
        let mut asserts = Vec::new();
        for clause in formula.clauses() {
            asserts.push(format!("(assert {})", clause_term(clause)?));
        }
        for model in blocked {
            let eqs: Vec<String> = model
                .iter()
                .filter(|(v, _)| vars.contains(*v))
                .map(|(v, val)| format!("(= {} {})", smt_symbol(v), smt_int(val)))
                .collect();
            if !eqs.is_empty() {
                asserts.push(format!("(assert (not (and {})))", eqs.join(" ")));
            }
        }
        match self.raw_check(&vars, &asserts)? {
            RawOutcome::Unsat => Ok(SolverVerdict::Proved),
            RawOutcome::Unknown(r) => Ok(SolverVerdict::Unknown(r)),
            RawOutcome::Sat(model) => {
                let holds = formula
                    .eval(&model)
                    .map_err(|e| SolverError::Protocol(format!("model evaluation failed: {e}")))?;
                if !holds {
                    return Err(SolverError::Protocol(
                        "solver returned a spurious model".into(),
                    ));
                }
                Ok(SolverVerdict::NotProved(model))
            }
        }
    }

    /// Satisfiability for formulas that may mention the counter or carry
    /// exponentials: checked on the instantiations `n = 1, 2, 3`, which fold
    /// every exponential into a constant. Finding a model at any concrete
    /// `n` proves satisfiability; finding none is only `Unknown`, never
    /// unsat.
    pub fn check_sat_poly_exp(
        &mut self,
        formula: &Formula,
    ) -> Result<SolverVerdict, SolverError> {
        if !formula.contains_counter() {
            return self.check_sat(formula);
        }
        for n in [1u64, 2, 3] {
            let instantiated = formula.map_atoms(|a| a.map_lhs(|e| e.instantiate_counter(n)));
            match self.check_sat(&instantiated)? {
                SolverVerdict::NotProved(mut model) => {
                    model.insert(Var::counter(), BigInt::from(n));
                    return Ok(SolverVerdict::NotProved(model));
                }
                _ => continue,
            }
        }
        Ok(SolverVerdict::Unknown(UnknownReason::Incomplete))
    }
}

impl Drop for SolverClient {
    fn drop(&mut self) {
        if let Some(p) = &mut self.process {
            let _ = p.stdin.write_all(b"(exit)\n");
            let _ = p.stdin.flush();
        }
        self.drop_process();
    }
}

enum RawOutcome {
    Unsat,
    Sat(BTreeMap<Var, BigInt>),
    Unknown(UnknownReason),
}

enum Exchange {
    Lines(Vec<String>),
    Timeout,
    Died,
}

/// Deterministic SMT-LIB2 script for a satisfiability check of an
/// exponential-free formula: byte-identical scripts for equal formulas.
pub fn to_smtlib(formula: &Formula) -> Result<String, SolverError> {
    let mut out = String::new();
    out.push_str("(set-option :produce-models true)\n");
    out.push_str("(set-logic QF_NIA)\n");
    for v in formula.vars() {
        out.push_str(&format!("(declare-const {} Int)\n", smt_symbol(&v)));
    }
    for clause in formula.clauses() {
        out.push_str(&format!("(assert {})\n", clause_term(clause)?));
    }
    out.push_str("(check-sat)\n(get-model)\n");
    Ok(out)
}

fn smt_symbol(v: &Var) -> String {
    let name = v.name();
    let simple = name
        .chars()
        .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.' || c == '!');
    if simple {
        name.to_string()
    } else {
        format!("|{name}|")
    }
}

fn smt_int(v: &BigInt) -> String {
    if v.sign() == num::bigint::Sign::Minus {
        format!("(- {})", -v)
    } else {
        v.to_string()
    }
}

/// Render a poly-exponential as an SMT integer term. Fails on exponentials;
/// rational coefficients must have been cleared by the caller.
fn poly_term(e: &PolyExp) -> Result<String, SolverError> {
    if e.has_exponential() {
        return Err(SolverError::UnsupportedTerm(format!(
            "`{e}` contains an exponential"
        )));
    }
    let (cleared, factor) = e.clear_denominators();
    debug_assert!(factor.is_one(), "caller must clear denominators first");
    let mut terms = Vec::new();
    for (monomial, _, coeff) in cleared.terms() {
        let c = coeff.numer().clone();
        let mut factors = Vec::new();
        for (v, exp) in monomial.exponents() {
            for _ in 0..exp {
                factors.push(smt_symbol(v));
            }
        }
        let term = if factors.is_empty() {
            smt_int(&c)
        } else if c.is_one() && factors.len() == 1 {
            factors[0].clone()
        } else {
            let mut parts = Vec::new();
            if !c.is_one() {
                parts.push(smt_int(&c));
            }
            parts.extend(factors);
            if parts.len() == 1 {
                parts.pop().unwrap()
            } else {
                format!("(* {})", parts.join(" "))
            }
        };
        terms.push(term);
    }
    Ok(match terms.len() {
        0 => "0".to_string(),
        1 => terms.pop().unwrap(),
        _ => format!("(+ {})", terms.join(" ")),
    })
}

fn atom_term(a: &Atom) -> Result<String, SolverError> {
    // e > 0 is equivalent to D*e > 0 for any positive D, so clearing
    // denominators preserves the atom.
    let (cleared, _) = a.lhs().clear_denominators();
    let term = poly_term(&cleared)?;
    Ok(match a.kind() {
        AtomKind::Gt0 => format!("(> {term} 0)"),
        AtomKind::Eq0 => format!("(= {term} 0)"),
    })
}

fn clause_term(c: &Clause) -> Result<String, SolverError> {
    let mut atoms = Vec::new();
    for a in c.atoms() {
        atoms.push(atom_term(a)?);
    }
    Ok(match atoms.len() {
        0 => "false".to_string(),
        1 => atoms.pop().unwrap(),
        _ => format!("(or {})", atoms.join(" ")),
    })
}

fn formula_term(f: &Formula) -> Result<String, SolverError> {
    let mut clauses = Vec::new();
    for c in f.clauses() {
        clauses.push(clause_term(c)?);
    }
    Ok(match clauses.len() {
        0 => "true".to_string(),
        1 => clauses.pop().unwrap(),
        _ => format!("(and {})", clauses.join(" ")),
    })
}

// ---- model parsing ----------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
enum Sexp {
    Atom(String),
    List(Vec<Sexp>),
}

fn tokenize_sexp(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        match c {
            '(' | ')' => {
                tokens.push(c.to_string());
                chars.next();
            }
            '|' => {
                chars.next();
                let mut s = String::new();
                for c in chars.by_ref() {
                    if c == '|' {
                        break;
                    }
                    s.push(c);
                }
                tokens.push(s);
            }
            '"' => {
                chars.next();
                let mut s = String::from("\"");
                for c in chars.by_ref() {
                    if c == '"' {
                        break;
                    }
                    s.push(c);
                }
                tokens.push(s);
            }
            c if c.is_whitespace() => {
                chars.next();
            }
            _ => {
                let mut s = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' {
                        break;
                    }
                    s.push(c);
                    chars.next();
                }
                tokens.push(s);
            }
        }
    }
    tokens
}

fn parse_sexps(tokens: &[String]) -> Result<Vec<Sexp>, SolverError> {
    let mut stack: Vec<Vec<Sexp>> = vec![Vec::new()];
    for t in tokens {
        match t.as_str() {
            "(" => stack.push(Vec::new()),
            ")" => {
                let done = stack
                    .pop()
                    .ok_or_else(|| SolverError::Protocol("unbalanced parentheses".into()))?;
                stack
                    .last_mut()
                    .ok_or_else(|| SolverError::Protocol("unbalanced parentheses".into()))?
                    .push(Sexp::List(done));
            }
            _ => stack
                .last_mut()
                .expect("stack is never empty")
                .push(Sexp::Atom(t.clone())),
        }
    }
    if stack.len() != 1 {
        return Err(SolverError::Protocol("unterminated s-expression".into()));
    }
    Ok(stack.pop().unwrap())
}

fn sexp_int(s: &Sexp) -> Option<BigInt> {
    match s {
        Sexp::Atom(a) => a.parse::<BigInt>().ok(),
        Sexp::List(items) => match items.as_slice() {
            [Sexp::Atom(op), inner] if op == "-" => sexp_int(inner).map(|v| -v),
            _ => None,
        },
    }
}

/// Extract `define-fun <name> () Int <value>` entries from solver output.
fn parse_model(text: &str) -> Result<BTreeMap<Var, BigInt>, SolverError> {
    let sexps = parse_sexps(&tokenize_sexp(text))?;
    let mut model = BTreeMap::new();
    let mut stack: Vec<&Sexp> = sexps.iter().collect();
    while let Some(s) = stack.pop() {
        if let Sexp::List(items) = s {
            if let [Sexp::Atom(kw), Sexp::Atom(name), Sexp::List(args), Sexp::Atom(sort), value] =
                items.as_slice()
            {
                if kw == "define-fun" && args.is_empty() && sort == "Int" {
                    if let Some(v) = sexp_int(value) {
                        model.insert(Var::new(name.clone()), v);
                        continue;
                    }
                    return Err(SolverError::Protocol(format!(
                        "uninterpretable model value for `{name}`"
                    )));
                }
            }
            stack.extend(items.iter());
        }
    }
    Ok(model)
}
