//! Loop representation, the text input format, and update application.
//!
//! The input format is one loop per file:
//!
//! ```text
//! # comments run to end of line
//! vars: x1, x2;
//! guard: x1 > 0 && (x2 > 0 || x1 > 5);
//! update: x1 := x1 - 1; x2 := x2 + 1;
//! ```
//!
//! Guards are conjunctions of clauses; a clause is a single atom or a
//! parenthesized disjunction of atoms. Relations `>`, `>=`, `<`, `<=`, `==`
//! are normalized to strict `> 0` atoms over the integers at parse time
//! (`e >= f` becomes `e - f + 1 > 0`, equalities split into two bounds).
//! Updates are simultaneous assignments; variables without an assignment
//! keep their value.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num::bigint::BigInt;
use num::One;
use thiserror::Error;

use crate::expr::{Atom, Clause, Formula, PolyExp, Var};

/// Simultaneous update of all program variables; right-hand sides are
/// integer-coefficient polynomials over the program variables.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Update {
    assignments: BTreeMap<Var, PolyExp>,
}

impl Update {
    pub fn new(assignments: BTreeMap<Var, PolyExp>) -> Self {
        Update { assignments }
    }

    pub fn rhs(&self, v: &Var) -> &PolyExp {
        &self.assignments[v]
    }

    pub fn assignments(&self) -> &BTreeMap<Var, PolyExp> {
        &self.assignments
    }

    /// Substitution map realizing one application of the update.
    pub fn as_subst(&self) -> &BTreeMap<Var, PolyExp> {
        &self.assignments
    }

    /// `e` after `k` applications of the update.
    pub fn apply_expr(&self, e: &PolyExp, k: u32) -> PolyExp {
        let mut out = e.clone();
        for _ in 0..k {
            out = out.subst(&self.assignments);
        }
        out
    }

    pub fn apply_atom(&self, a: &Atom, k: u32) -> Atom {
        a.map_lhs(|e| self.apply_expr(e, k))
    }

    /// The clause image under `k` applications; `None` when it becomes
    /// trivially true.
    pub fn apply_clause(&self, c: &Clause, k: u32) -> Option<Clause> {
        c.map_atoms(|a| self.apply_atom(a, k))
    }

    pub fn apply_formula(&self, f: &Formula, k: u32) -> Formula {
        f.map_atoms(|a| self.apply_atom(a, k))
    }

    /// One concrete step: evaluate every right-hand side in `state`.
    pub fn step(
        &self,
        state: &BTreeMap<Var, BigInt>,
    ) -> Result<BTreeMap<Var, BigInt>, crate::expr::EvalError> {
        let mut out = BTreeMap::new();
        for (v, rhs) in &self.assignments {
            out.insert(v.clone(), rhs.eval(state)?);
        }
        Ok(out)
    }
}

/// A single-path integer loop: `while guard { vars := update }`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Loop {
    vars: Vec<Var>,
    guard: Formula,
    update: Update,
}

impl Loop {
    pub fn new(vars: Vec<Var>, guard: Formula, update: Update) -> Self {
        Loop {
            vars,
            guard,
            update,
        }
    }

    pub fn vars(&self) -> &[Var] {
        &self.vars
    }

    pub fn guard(&self) -> &Formula {
        &self.guard
    }

    pub fn update(&self) -> &Update {
        &self.update
    }

    pub fn dimension(&self) -> usize {
        self.vars.len()
    }

    /// Guard clauses in deterministic order.
    pub fn guard_clauses(&self) -> Vec<Clause> {
        self.guard.clauses().cloned().collect()
    }

    /// Render in the input format; `parse_loop` accepts the output.
    pub fn render(&self) -> String {
        let vars = self
            .vars
            .iter()
            .map(|v| v.name().to_string())
            .collect::<Vec<_>>()
            .join(", ");
        let guard = if self.guard.is_truth() {
            "1 > 0".to_string()
        } else {
            self.guard.to_string()
        };
        let update = self
            .vars
            .iter()
            .map(|v| format!("{} := {}", v, self.update.rhs(v)))
            .collect::<Vec<_>>()
            .join("; ");
        format!("vars: {vars};\nguard: {guard};\nupdate: {update};\n")
    }
}

impl fmt::Display for Loop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum ParseError {
    #[error("syntax error at line {line}, column {col}: {message}")]
    Syntax {
        line: usize,
        col: usize,
        message: String,
    },
    #[error("undeclared variable `{name}` at line {line}, column {col}")]
    UndeclaredVariable {
        name: String,
        line: usize,
        col: usize,
    },
    #[error("update of `{var}` is not an integer polynomial: {message}")]
    NonPolynomialUpdate { var: String, message: String },
    #[error("disallowed construct at line {line}, column {col}: {message}")]
    DisallowedConstruct {
        line: usize,
        col: usize,
        message: String,
    },
}

#[derive(Clone, PartialEq, Eq, Debug)]
enum Token {
    Ident(String),
    Int(BigInt),
    Sym(&'static str),
}

#[derive(Clone, Debug)]
struct Spanned {
    token: Token,
    line: usize,
    col: usize,
}

fn tokenize(text: &str) -> Result<Vec<Spanned>, ParseError> {
    let mut out = Vec::new();
    let mut line = 1usize;
    let mut col = 1usize;
    let mut chars = text.chars().peekable();
    while let Some(&c) = chars.peek() {
        let (tl, tc) = (line, col);
        let mut bump = |chars: &mut std::iter::Peekable<std::str::Chars>| {
            let c = chars.next().unwrap();
            if c == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            c
        };
        if c.is_whitespace() {
            bump(&mut chars);
            continue;
        }
        if c == '#' {
            while let Some(&c) = chars.peek() {
                bump(&mut chars);
                if c == '\n' {
                    break;
                }
            }
            continue;
        }
        if c.is_ascii_digit() {
            let mut s = String::new();
            while let Some(&c) = chars.peek() {
                if c.is_ascii_digit() {
                    s.push(bump(&mut chars));
                } else {
                    break;
                }
            }
            let v = s.parse::<BigInt>().expect("digits parse as an integer");
            out.push(Spanned {
                token: Token::Int(v),
                line: tl,
                col: tc,
            });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let mut s = String::new();
            while let Some(&c) = chars.peek() {
                if c.is_ascii_alphanumeric() || c == '_' {
                    s.push(bump(&mut chars));
                } else {
                    break;
                }
            }
            out.push(Spanned {
                token: Token::Ident(s),
                line: tl,
                col: tc,
            });
            continue;
        }
        let two: String = {
            let mut it = chars.clone();
            let a = it.next().unwrap();
            match it.next() {
                Some(b) => format!("{a}{b}"),
                None => a.to_string(),
            }
        };
        let sym2 = ["&&", "||", ":=", ">=", "<=", "=="].iter().find(|s| **s == two);
        if let Some(s) = sym2 {
            bump(&mut chars);
            bump(&mut chars);
            out.push(Spanned {
                token: Token::Sym(s),
                line: tl,
                col: tc,
            });
            continue;
        }
        let sym1 = match c {
            ':' => ":",
            ';' => ";",
            ',' => ",",
            '(' => "(",
            ')' => ")",
            '+' => "+",
            '-' => "-",
            '*' => "*",
            '^' => "^",
            '>' => ">",
            '<' => "<",
            _ => {
                return Err(ParseError::Syntax {
                    line: tl,
                    col: tc,
                    message: format!("unexpected character `{c}`"),
                })
            }
        };
        bump(&mut chars);
        out.push(Spanned {
            token: Token::Sym(sym1),
            line: tl,
            col: tc,
        });
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<Spanned>,
    pos: usize,
    vars: BTreeSet<Var>,
}

impl Parser {
    fn peek(&self) -> Option<&Spanned> {
        self.tokens.get(self.pos)
    }

    fn here(&self) -> (usize, usize) {
        match self.tokens.get(self.pos) {
            Some(t) => (t.line, t.col),
            None => self
                .tokens
                .last()
                .map(|t| (t.line, t.col + 1))
                .unwrap_or((1, 1)),
        }
    }

    fn syntax(&self, message: impl Into<String>) -> ParseError {
        let (line, col) = self.here();
        ParseError::Syntax {
            line,
            col,
            message: message.into(),
        }
    }

    fn eat_sym(&mut self, s: &str) -> Result<(), ParseError> {
        match self.peek() {
            Some(Spanned {
                token: Token::Sym(t),
                ..
            }) if *t == s => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.syntax(format!("expected `{s}`"))),
        }
    }

    fn try_sym(&mut self, s: &str) -> bool {
        if matches!(self.peek(), Some(Spanned { token: Token::Sym(t), .. }) if *t == s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_ident(&mut self) -> Result<(String, usize, usize), ParseError> {
        match self.peek().cloned() {
            Some(Spanned {
                token: Token::Ident(name),
                line,
                col,
            }) => {
                self.pos += 1;
                Ok((name, line, col))
            }
            _ => Err(self.syntax("expected an identifier")),
        }
    }

    fn eat_keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        let (name, line, col) = self.eat_ident()?;
        if name == kw {
            self.eat_sym(":")
        } else {
            Err(ParseError::Syntax {
                line,
                col,
                message: format!("expected `{kw}:`"),
            })
        }
    }

    fn lookup_var(&self, name: &str, line: usize, col: usize) -> Result<Var, ParseError> {
        if name == "forall" || name == "exists" {
            return Err(ParseError::DisallowedConstruct {
                line,
                col,
                message: "quantifiers are not part of the input language".into(),
            });
        }
        let v = Var::new(name);
        if self.vars.contains(&v) {
            Ok(v)
        } else {
            Err(ParseError::UndeclaredVariable {
                name: name.to_string(),
                line,
                col,
            })
        }
    }

    // poly := term (('+'|'-') term)* ; term := factor ('*' factor)* ;
    // factor := ('-')* base ('^' nat)? ; base := ident | int | '(' poly ')'
    fn parse_poly(&mut self) -> Result<PolyExp, ParseError> {
        let mut acc = self.parse_term()?;
        loop {
            if self.try_sym("+") {
                acc = acc.add(&self.parse_term()?);
            } else if self.try_sym("-") {
                acc = acc.sub(&self.parse_term()?);
            } else {
                return Ok(acc);
            }
        }
    }

    fn parse_term(&mut self) -> Result<PolyExp, ParseError> {
        let mut acc = self.parse_factor()?;
        while self.try_sym("*") {
            acc = acc.mul(&self.parse_factor()?);
        }
        Ok(acc)
    }

    fn parse_factor(&mut self) -> Result<PolyExp, ParseError> {
        if self.try_sym("-") {
            return Ok(self.parse_factor()?.neg());
        }
        let base = match self.peek().cloned() {
            Some(Spanned {
                token: Token::Int(v),
                ..
            }) => {
                self.pos += 1;
                PolyExp::from_bigint(v)
            }
            Some(Spanned {
                token: Token::Ident(name),
                line,
                col,
            }) => {
                self.pos += 1;
                PolyExp::var(self.lookup_var(&name, line, col)?)
            }
            Some(Spanned {
                token: Token::Sym("("),
                ..
            }) => {
                self.pos += 1;
                let inner = self.parse_poly()?;
                self.eat_sym(")")?;
                inner
            }
            _ => return Err(self.syntax("expected a variable, integer, or `(`")),
        };
        if self.try_sym("^") {
            match self.peek().cloned() {
                Some(Spanned {
                    token: Token::Int(v),
                    ..
                }) => {
                    self.pos += 1;
                    let e: u32 = (&v).try_into().map_err(|_| {
                        self.syntax("exponent is too large")
                    })?;
                    Ok(base.pow(e))
                }
                _ => Err(self.syntax("exponent must be a nonnegative integer literal")),
            }
        } else {
            Ok(base)
        }
    }

    // One relational atom, normalized over the integers to a conjunction of
    // strict atoms (one for inequalities, two for `==`).
    fn parse_atom(&mut self) -> Result<Vec<Atom>, ParseError> {
        let lhs = self.parse_poly()?;
        let rel = match self.peek() {
            Some(Spanned {
                token: Token::Sym(s @ (">" | ">=" | "<" | "<=" | "==")),
                ..
            }) => {
                let s = *s;
                self.pos += 1;
                s
            }
            _ => return Err(self.syntax("expected a relation (`>`, `>=`, `<`, `<=`, `==`)")),
        };
        let rhs = self.parse_poly()?;
        let diff = lhs.sub(&rhs);
        Ok(match rel {
            ">" => vec![Atom::gt0(diff)],
            ">=" => vec![Atom::ge0(diff)],
            "<" => vec![Atom::gt0(diff.neg())],
            "<=" => vec![Atom::ge0(diff.neg())],
            "==" => vec![Atom::ge0(diff.clone()), Atom::ge0(diff.neg())],
            _ => unreachable!(),
        })
    }

    // clause := '(' atom ('||' atom)* ')' | atom
    // Each disjunct is a conjunction of 1-2 strict atoms (from `==`), so a
    // clause distributes into a cross product of CNF clauses.
    fn parse_clause(&mut self) -> Result<Vec<Clause>, ParseError> {
        let mut disjuncts: Vec<Vec<Atom>> = Vec::new();
        let saved = self.pos;
        if self.try_sym("(") {
            match self.parse_atom() {
                Ok(first) if matches!(
                    self.peek(),
                    Some(Spanned { token: Token::Sym("||" | ")"), .. })
                ) =>
                {
                    disjuncts.push(first);
                    while self.try_sym("||") {
                        disjuncts.push(self.parse_atom()?);
                    }
                    self.eat_sym(")")?;
                }
                _ => {
                    // Not a disjunction group: a parenthesized polynomial.
                    self.pos = saved;
                    disjuncts.push(self.parse_atom()?);
                }
            }
        } else {
            disjuncts.push(self.parse_atom()?);
        }
        let mut clauses: Vec<Vec<Atom>> = vec![Vec::new()];
        for conj in &disjuncts {
            let mut next = Vec::new();
            for choice in conj {
                for partial in &clauses {
                    let mut c = partial.clone();
                    c.push(choice.clone());
                    next.push(c);
                }
            }
            clauses = next;
        }
        Ok(clauses
            .into_iter()
            .filter_map(Clause::normalized)
            .collect())
    }

    fn parse_guard(&mut self) -> Result<Formula, ParseError> {
        let mut clauses = self.parse_clause()?;
        while self.try_sym("&&") {
            clauses.extend(self.parse_clause()?);
        }
        Ok(Formula::from_clauses(clauses))
    }
}

/// Parse a loop from the text input format.
pub fn parse_loop(text: &str) -> Result<Loop, ParseError> {
    let tokens = tokenize(text)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        vars: BTreeSet::new(),
    };

    p.eat_keyword("vars")?;
    let mut vars = Vec::new();
    loop {
        let (name, line, col) = p.eat_ident()?;
        if name == crate::expr::COUNTER_NAME {
            return Err(ParseError::DisallowedConstruct {
                line,
                col,
                message: "`n` is the reserved iteration counter and cannot be a program variable"
                    .into(),
            });
        }
        let v = Var::new(&name);
        if !p.vars.insert(v.clone()) {
            return Err(ParseError::DisallowedConstruct {
                line,
                col,
                message: format!("variable `{name}` is declared twice"),
            });
        }
        vars.push(v);
        if !p.try_sym(",") {
            break;
        }
    }
    p.eat_sym(";")?;

    p.eat_keyword("guard")?;
    let guard = p.parse_guard()?;
    p.eat_sym(";")?;

    p.eat_keyword("update")?;
    let mut assignments: BTreeMap<Var, PolyExp> = BTreeMap::new();
    loop {
        let (name, line, col) = p.eat_ident()?;
        let v = p.lookup_var(&name, line, col)?;
        p.eat_sym(":=")?;
        let rhs = p.parse_poly()?;
        if assignments.insert(v, rhs).is_some() {
            return Err(ParseError::DisallowedConstruct {
                line,
                col,
                message: format!("variable `{name}` is assigned twice"),
            });
        }
        if !p.try_sym(";") {
            break;
        }
        // Trailing `;` before end of input is allowed.
        if p.peek().is_none() {
            break;
        }
    }
    if let Some(t) = p.peek() {
        return Err(ParseError::Syntax {
            line: t.line,
            col: t.col,
            message: "trailing input after the update section".into(),
        });
    }

    for v in &vars {
        assignments
            .entry(v.clone())
            .or_insert_with(|| PolyExp::var(v.clone()));
    }
    for (v, rhs) in &assignments {
        for coeff in [rhs] {
            if coeff.has_exponential() || coeff.contains_counter() {
                return Err(ParseError::NonPolynomialUpdate {
                    var: v.name().to_string(),
                    message: "right-hand side must be a polynomial over the program variables"
                        .into(),
                });
            }
        }
        let (_, denom) = rhs.clear_denominators();
        if !denom.is_one() {
            return Err(ParseError::NonPolynomialUpdate {
                var: v.name().to_string(),
                message: "right-hand side must have integer coefficients".into(),
            });
        }
    }

    Ok(Loop::new(vars, guard, Update::new(assignments)))
}

/// Parse a single polynomial over the given variables (used for supplying
/// candidate bound functions and in examples).
pub fn parse_poly(text: &str, vars: &[Var]) -> Result<PolyExp, ParseError> {
    let tokens = tokenize(text)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        vars: vars.iter().cloned().collect(),
    };
    let poly = p.parse_poly()?;
    if let Some(t) = p.peek() {
        return Err(ParseError::Syntax {
            line: t.line,
            col: t.col,
            message: "trailing input after the polynomial".into(),
        });
    }
    Ok(poly)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::Var;

    fn x(i: usize) -> PolyExp {
        PolyExp::var(Var::new(format!("x{i}")))
    }

    #[test]
    fn parses_counting_loop() {
        let l = parse_loop("vars: x; guard: x > 0; update: x := x + 1").unwrap();
        assert_eq!(l.vars(), &[Var::new("x")]);
        let expected = Formula::single_atom(Atom::gt0(PolyExp::var(Var::new("x"))));
        assert_eq!(l.guard(), &expected);
        assert_eq!(
            l.update().rhs(&Var::new("x")),
            &PolyExp::var(Var::new("x")).add_int(1)
        );
    }

    #[test]
    fn parses_two_variable_loop() {
        let l = parse_loop(
            "vars: x1,x2; guard: x1 > 0 && x2 > 0; update: x1 := x1 - 1; x2 := x2 + 1",
        )
        .unwrap();
        assert_eq!(l.guard().len(), 2);
        assert_eq!(l.update().rhs(&Var::new("x1")), &x(1).add_int(-1));
        assert_eq!(l.update().rhs(&Var::new("x2")), &x(2).add_int(1));
    }

    #[test]
    fn normalizes_non_strict_relations() {
        let l = parse_loop("vars: x; guard: x >= 0; update: x := x").unwrap();
        let expected =
            Formula::single_atom(Atom::gt0(PolyExp::var(Var::new("x")).add_int(1)));
        assert_eq!(l.guard(), &expected);
    }

    #[test]
    fn splits_equalities_into_two_bounds() {
        let l = parse_loop("vars: x; guard: x == 3; update: x := x").unwrap();
        assert_eq!(l.guard().len(), 2);
        let x = PolyExp::var(Var::new("x"));
        let expected = Formula::from_atoms([
            Atom::ge0(x.sub(&PolyExp::from_int(3))),
            Atom::ge0(PolyExp::from_int(3).sub(&x)),
        ]);
        assert_eq!(l.guard(), &expected);
    }

    #[test]
    fn distributes_equality_inside_disjunction() {
        let l = parse_loop("vars: x, y; guard: (x == 0 || y > 1); update: x := x").unwrap();
        // (x == 0 || y > 1) becomes two clauses, each pairing one bound with y > 1
        assert_eq!(l.guard().len(), 2);
        for clause in l.guard().clauses() {
            assert_eq!(clause.len(), 2);
        }
    }

    #[test]
    fn parses_parenthesized_polynomial_atoms() {
        let l = parse_loop("vars: x, y; guard: (x + 1) * y > 2; update: x := x").unwrap();
        assert_eq!(l.guard().len(), 1);
        let l2 = parse_loop("vars: x, y; guard: (x > 0 || y > 0); update: x := x").unwrap();
        assert_eq!(l2.guard().len(), 1);
        assert_eq!(l2.guard().clauses().next().unwrap().len(), 2);
    }

    #[test]
    fn trivially_true_guard_is_truth() {
        let l = parse_loop("vars: x; guard: 1 > 0; update: x := x + 1").unwrap();
        assert!(l.guard().is_truth());
    }

    #[test]
    fn rejects_undeclared_and_reserved_variables() {
        assert!(matches!(
            parse_loop("vars: x; guard: y > 0; update: x := x"),
            Err(ParseError::UndeclaredVariable { name, .. }) if name == "y"
        ));
        assert!(matches!(
            parse_loop("vars: n; guard: n > 0; update: n := n"),
            Err(ParseError::DisallowedConstruct { .. })
        ));
        assert!(matches!(
            parse_loop("vars: x; guard: forall > 0; update: x := x"),
            Err(ParseError::DisallowedConstruct { .. })
        ));
    }

    #[test]
    fn reports_syntax_error_position() {
        let err = parse_loop("vars: x;\nguard: x >;\nupdate: x := x").unwrap_err();
        match err {
            ParseError::Syntax { line, col, .. } => {
                assert_eq!(line, 2);
                assert!(col >= 10);
            }
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn round_trips_through_render() {
        let sources = [
            "vars: x; guard: x > 0; update: x := x + 1",
            "vars: x1,x2; guard: x1 > 0 && x2 > 0; update: x1 := x1 - 1; x2 := x2 + 1",
            "vars: x1,x2,x3; guard: x1 > 0 && (x2 > 0 || x3 > 2); update: x1 := x1 - x2; x2 := x2 + 1; x3 := x3",
        ];
        for src in sources {
            let l = parse_loop(src).unwrap();
            let l2 = parse_loop(&l.render()).unwrap();
            assert_eq!(l, l2, "render round-trip changed the loop for {src}");
        }
    }

    #[test]
    fn applies_update_to_formulas() {
        let l = parse_loop(
            "vars: x1,x2; guard: x1 > 0 && x2 > 0; update: x1 := x1 - 1; x2 := x2 + 1",
        )
        .unwrap();
        let phi = Formula::single_atom(Atom::gt0(x(1)));
        let once = l.update().apply_formula(&phi, 1);
        assert_eq!(
            once,
            Formula::single_atom(Atom::gt0(x(1).add_int(-1)))
        );
        assert_eq!(l.update().apply_formula(&phi, 0), phi);
    }

    #[test]
    fn applies_update_twice() {
        // x1 under (x1 := x1 + x2; x2 := x2 + 1) twice is x1 + 2*x2 + 1
        let l = parse_loop("vars: x1,x2; guard: x1 > 0; update: x1 := x1 + x2; x2 := x2 + 1")
            .unwrap();
        let e = l.update().apply_expr(&x(1), 2);
        let expected = x(1)
            .add(&x(2).scale(&num::rational::BigRational::from_integer(2.into())))
            .add_int(1);
        assert_eq!(e, expected);
    }

    #[test]
    fn update_application_composes() {
        let l = parse_loop("vars: x1,x2; guard: x1 > 0; update: x1 := x1 + x2; x2 := x2 - 1")
            .unwrap();
        let e = x(1).mul(&x(2)).add(&x(2).pow(2));
        for (j, k) in [(1u32, 1u32), (2, 1), (1, 2), (2, 3)] {
            let a = l.update().apply_expr(&l.update().apply_expr(&e, j), k);
            let b = l.update().apply_expr(&e, j + k);
            assert_eq!(a, b);
        }
    }

    #[test]
    fn missing_assignments_default_to_identity() {
        let l = parse_loop("vars: x1,x2; guard: x1 > 0; update: x1 := x1 - 1").unwrap();
        assert_eq!(l.update().rhs(&Var::new("x2")), &x(2));
    }
}
