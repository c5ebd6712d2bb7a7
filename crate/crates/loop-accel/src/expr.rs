//! Exact symbolic algebra for poly-exponential expressions and the formulas
//! built from them.
//!
//! A [`PolyExp`] is a finite sum of terms `c * m * b^n` where `c` is a
//! rational constant, `m` is a monomial over variables (program variables
//! and the designated iteration counter `n`), and `b` is a nonzero integer
//! base; `b = 1` encodes the purely polynomial part. This fragment is closed
//! under addition, multiplication, substitution of program variables, and
//! shifting of the counter, which is everything the recurrence solver and
//! the acceleration techniques need.
//!
//! Formulas are kept in conjunctive normal form: a [`Formula`] is a set of
//! [`Clause`]s (conjunction), a clause is a set of [`Atom`]s (disjunction),
//! and an atom is either `e > 0` or `e = 0` for a poly-exponential `e`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Signed, Zero};
use thiserror::Error;

/// Name of the designated iteration counter.
pub const COUNTER_NAME: &str = "n";

/// A variable: a program variable, the iteration counter `n`, or a primed
/// post-state variable such as `x1'`.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Var(String);

impl Var {
    pub fn new(name: impl Into<String>) -> Self {
        Var(name.into())
    }

    /// The designated iteration counter `n`.
    pub fn counter() -> Self {
        Var(COUNTER_NAME.to_string())
    }

    /// The primed (post-state) version of this variable.
    pub fn primed(&self) -> Self {
        Var(format!("{}'", self.0))
    }

    pub fn name(&self) -> &str {
        &self.0
    }

    pub fn is_counter(&self) -> bool {
        self.0 == COUNTER_NAME
    }

    pub fn is_primed(&self) -> bool {
        self.0.ends_with('\'')
    }

    // Program variables sort before the counter, primed variables last, so
    // that rendered terms read in pre-state-first order.
    fn rank(&self) -> u8 {
        if self.is_primed() {
            2
        } else if self.is_counter() {
            1
        } else {
            0
        }
    }
}

impl Ord for Var {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.rank(), &self.0).cmp(&(other.rank(), &other.0))
    }
}

impl PartialOrd for Var {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A power product of variables with positive integer exponents.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct Monomial(BTreeMap<Var, u32>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(BTreeMap::new())
    }

    pub fn var(v: Var) -> Self {
        let mut m = BTreeMap::new();
        m.insert(v, 1);
        Monomial(m)
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let mut out = self.0.clone();
        for (v, e) in &other.0 {
            *out.entry(v.clone()).or_insert(0) += e;
        }
        Monomial(out)
    }

    pub fn degree_of(&self, v: &Var) -> u32 {
        self.0.get(v).copied().unwrap_or(0)
    }

    pub fn vars(&self) -> impl Iterator<Item = &Var> {
        self.0.keys()
    }

    pub fn exponents(&self) -> impl Iterator<Item = (&Var, u32)> {
        self.0.iter().map(|(v, e)| (v, *e))
    }

    /// The monomial with `v` removed entirely.
    fn without(&self, v: &Var) -> Monomial {
        let mut m = self.0.clone();
        m.remove(v);
        Monomial(m)
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (v, e) in &self.0 {
            if !first {
                f.write_str("*")?;
            }
            first = false;
            if *e == 1 {
                write!(f, "{v}")?;
            } else {
                write!(f, "{v}^{e}")?;
            }
        }
        Ok(())
    }
}

/// Key of one term: the monomial and the base of the exponential factor
/// `base^n`. Base 1 means the term carries no exponential.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
struct TermKey {
    monomial: Monomial,
    base: BigInt,
}

/// Exact poly-exponential expression: a finite sum of rational multiples of
/// `monomial * base^n`, kept in canonical form (no zero coefficients, all
/// bases nonzero).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct PolyExp {
    terms: BTreeMap<TermKey, BigRational>,
}

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("variable {0} is not bound in the evaluation environment")]
    UnboundVariable(Var),
    #[error("exact value {0} is not an integer")]
    NonIntegerResult(BigRational),
    #[error("counter value {0} is negative but the expression contains an exponential")]
    NegativeCounter(BigInt),
}

impl PolyExp {
    pub fn zero() -> Self {
        PolyExp::default()
    }

    pub fn one() -> Self {
        PolyExp::from_int(1)
    }

    pub fn from_int(v: i64) -> Self {
        PolyExp::from_bigint(BigInt::from(v))
    }

    pub fn from_bigint(v: BigInt) -> Self {
        PolyExp::from_rational(BigRational::from_integer(v))
    }

    pub fn from_rational(c: BigRational) -> Self {
        let mut e = PolyExp::zero();
        e.add_term(Monomial::one(), BigInt::one(), c);
        e
    }

    pub fn var(v: Var) -> Self {
        let mut e = PolyExp::zero();
        e.add_term(Monomial::var(v), BigInt::one(), BigRational::one());
        e
    }

    pub fn counter() -> Self {
        PolyExp::var(Var::counter())
    }

    /// The exponential `base^n`. The base must be nonzero.
    pub fn exponential(base: BigInt) -> Self {
        assert!(!base.is_zero(), "exponential base must be nonzero");
        let mut e = PolyExp::zero();
        e.add_term(Monomial::one(), base, BigRational::one());
        e
    }

    fn add_term(&mut self, monomial: Monomial, base: BigInt, coeff: BigRational) {
        debug_assert!(!base.is_zero());
        if coeff.is_zero() {
            return;
        }
        let key = TermKey { monomial, base };
        let entry = self.terms.entry(key);
        match entry {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(coeff);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let sum = o.get() + coeff;
                if sum.is_zero() {
                    o.remove();
                } else {
                    *o.get_mut() = sum;
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// `Some(c)` when the expression is the constant `c`.
    pub fn as_constant(&self) -> Option<BigRational> {
        if self.terms.is_empty() {
            return Some(BigRational::zero());
        }
        if self.terms.len() == 1 {
            let (key, coeff) = self.terms.iter().next().unwrap();
            if key.monomial.is_one() && key.base.is_one() {
                return Some(coeff.clone());
            }
        }
        None
    }

    pub fn add(&self, other: &PolyExp) -> PolyExp {
        let mut out = self.clone();
        for (key, coeff) in &other.terms {
            out.add_term(key.monomial.clone(), key.base.clone(), coeff.clone());
        }
        out
    }

    pub fn neg(&self) -> PolyExp {
        let mut out = PolyExp::zero();
        for (key, coeff) in &self.terms {
            out.add_term(key.monomial.clone(), key.base.clone(), -coeff.clone());
        }
        out
    }

    pub fn sub(&self, other: &PolyExp) -> PolyExp {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &PolyExp) -> PolyExp {
        let mut out = PolyExp::zero();
        for (ka, ca) in &self.terms {
            for (kb, cb) in &other.terms {
                // b1^n * b2^n = (b1*b2)^n keeps the fragment closed.
                out.add_term(
                    ka.monomial.mul(&kb.monomial),
                    &ka.base * &kb.base,
                    ca * cb,
                );
            }
        }
        out
    }

    pub fn scale(&self, c: &BigRational) -> PolyExp {
        let mut out = PolyExp::zero();
        for (key, coeff) in &self.terms {
            out.add_term(key.monomial.clone(), key.base.clone(), coeff * c);
        }
        out
    }

    pub fn pow(&self, e: u32) -> PolyExp {
        let mut out = PolyExp::one();
        for _ in 0..e {
            out = out.mul(self);
        }
        out
    }

    pub fn add_int(&self, v: i64) -> PolyExp {
        self.add(&PolyExp::from_int(v))
    }

    /// Iterate terms as `(monomial, base, coefficient)` in canonical order.
    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &BigInt, &BigRational)> {
        self.terms.iter().map(|(k, c)| (&k.monomial, &k.base, c))
    }

    /// All variables occurring in the expression.
    pub fn vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        for key in self.terms.keys() {
            out.extend(key.monomial.vars().cloned());
        }
        out
    }

    pub fn contains_var(&self, v: &Var) -> bool {
        self.terms.keys().any(|k| k.monomial.degree_of(v) > 0)
    }

    pub fn has_exponential(&self) -> bool {
        self.terms.keys().any(|k| !k.base.is_one())
    }

    pub fn contains_counter(&self) -> bool {
        self.contains_var(&Var::counter()) || self.has_exponential()
    }

    pub fn degree_of(&self, v: &Var) -> u32 {
        self.terms
            .keys()
            .map(|k| k.monomial.degree_of(v))
            .max()
            .unwrap_or(0)
    }

    /// Exact evaluation to a rational.
    pub fn eval_rational(
        &self,
        env: &BTreeMap<Var, BigInt>,
    ) -> Result<BigRational, EvalError> {
        let mut acc = BigRational::zero();
        for (key, coeff) in &self.terms {
            let mut term = coeff.clone();
            for (v, e) in key.monomial.exponents() {
                let val = env
                    .get(v)
                    .ok_or_else(|| EvalError::UnboundVariable(v.clone()))?;
                term *= BigRational::from_integer(val.pow(e));
            }
            if !key.base.is_one() {
                let n = env
                    .get(&Var::counter())
                    .ok_or_else(|| EvalError::UnboundVariable(Var::counter()))?;
                if n.is_negative() {
                    return Err(EvalError::NegativeCounter(n.clone()));
                }
                let exp: u32 = n
                    .try_into()
                    .map_err(|_| EvalError::NegativeCounter(n.clone()))?;
                term *= BigRational::from_integer(key.base.pow(exp));
            }
            acc += term;
        }
        Ok(acc)
    }

    /// Exact evaluation; the result must be an integer.
    pub fn eval(&self, env: &BTreeMap<Var, BigInt>) -> Result<BigInt, EvalError> {
        let r = self.eval_rational(env)?;
        if r.is_integer() {
            Ok(r.to_integer())
        } else {
            Err(EvalError::NonIntegerResult(r))
        }
    }

    /// Simultaneous substitution of program variables. The counter and any
    /// variable not mentioned in `sigma` are left untouched. The fragment is
    /// closed under this operation: substituting a poly-exponential into a
    /// monomial position only ever multiplies bases and monomials.
    pub fn subst(&self, sigma: &BTreeMap<Var, PolyExp>) -> PolyExp {
        let mut out = PolyExp::zero();
        for (key, coeff) in &self.terms {
            let mut term = PolyExp::from_rational(coeff.clone());
            let mut residual = Monomial::one();
            for (v, e) in key.monomial.exponents() {
                match sigma.get(v) {
                    Some(repl) => term = term.mul(&repl.pow(e)),
                    None => residual = residual.mul(&Monomial::var(v.clone()).pow_mono(e)),
                }
            }
            let mut shifted = PolyExp::zero();
            for (k2, c2) in term.terms {
                shifted.add_term(k2.monomial.mul(&residual), &k2.base * &key.base, c2);
            }
            out = out.add(&shifted);
        }
        out
    }

    /// Replace the counter `n` by `n + k`. Polynomial occurrences are
    /// expanded binomially; an exponential `b^n` becomes `b^k * b^n`, with a
    /// rational coefficient when `k < 0`.
    pub fn shift_counter(&self, k: i64) -> PolyExp {
        let n_shifted = PolyExp::counter().add_int(k);
        let counter = Var::counter();
        let mut out = PolyExp::zero();
        for (key, coeff) in &self.terms {
            let deg = key.monomial.degree_of(&counter);
            let rest = key.monomial.without(&counter);
            let mut term = PolyExp::from_rational(coeff.clone());
            if deg > 0 {
                term = term.mul(&n_shifted.pow(deg));
            }
            if !key.base.is_one() {
                let factor = if k >= 0 {
                    BigRational::from_integer(key.base.pow(k as u32))
                } else {
                    BigRational::from_integer(key.base.pow((-k) as u32))
                        .recip()
                };
                term = term.scale(&factor);
            }
            let mut placed = PolyExp::zero();
            for (k2, c2) in term.terms {
                placed.add_term(k2.monomial.mul(&rest), &k2.base * &key.base, c2);
            }
            out = out.add(&placed);
        }
        out
    }

    /// Replace the counter by the concrete value `v`, folding exponentials
    /// into constants. The result mentions program variables only.
    pub fn instantiate_counter(&self, v: u64) -> PolyExp {
        let counter = Var::counter();
        let mut out = PolyExp::zero();
        for (key, coeff) in &self.terms {
            let deg = key.monomial.degree_of(&counter);
            let rest = key.monomial.without(&counter);
            let mut c = coeff.clone();
            if deg > 0 {
                c *= BigRational::from_integer(BigInt::from(v).pow(deg));
            }
            if !key.base.is_one() {
                c *= BigRational::from_integer(key.base.pow(v as u32));
            }
            out.add_term(rest, BigInt::one(), c);
        }
        out
    }

    /// Multiply by the positive least common denominator of all coefficients,
    /// returning the integer-coefficient expression and the multiplier.
    pub fn clear_denominators(&self) -> (PolyExp, BigInt) {
        let mut lcm = BigInt::one();
        for coeff in self.terms.values() {
            lcm = num::integer::lcm(lcm, coeff.denom().clone());
        }
        let factor = BigRational::from_integer(lcm.clone());
        (self.scale(&factor), lcm)
    }

    /// Decompose into `base -> q` with `q` the polynomial factor of all terms
    /// carrying that exponential base (base folded out).
    pub fn split_by_base(&self) -> BTreeMap<BigInt, PolyExp> {
        let mut out: BTreeMap<BigInt, PolyExp> = BTreeMap::new();
        for (key, coeff) in &self.terms {
            out.entry(key.base.clone()).or_default().add_term(
                key.monomial.clone(),
                BigInt::one(),
                coeff.clone(),
            );
        }
        out
    }

    /// Coefficients of the counter viewed as the distinguished indeterminate:
    /// index `i` holds the coefficient of `n^i` (a poly-exponential free of
    /// the counter monomial). Exponentials must have been split off first.
    pub fn counter_coefficients(&self) -> Vec<PolyExp> {
        let counter = Var::counter();
        let deg = self.degree_of(&counter) as usize;
        let mut out = vec![PolyExp::zero(); deg + 1];
        for (key, coeff) in &self.terms {
            let d = key.monomial.degree_of(&counter) as usize;
            out[d].add_term(key.monomial.without(&counter), key.base.clone(), coeff.clone());
        }
        out
    }

    /// The coefficient of the plain linear occurrence of `v` (monomial `v`,
    /// no exponential), together with the remainder of the expression.
    /// Returns `None` when `v` occurs in any other shape (higher power, mixed
    /// monomial, or under an exponential), i.e. when the expression is not of
    /// the form `c*v + rest` with constant `c` and `v`-free `rest`.
    pub fn linear_split(&self, v: &Var) -> Option<(BigRational, PolyExp)> {
        let mut coeff = BigRational::zero();
        let mut rest = PolyExp::zero();
        for (key, c) in &self.terms {
            let d = key.monomial.degree_of(v);
            if d == 0 {
                rest.add_term(key.monomial.clone(), key.base.clone(), c.clone());
            } else if d == 1
                && key.monomial.vars().count() == 1
                && key.base.is_one()
            {
                coeff = c.clone();
            } else {
                return None;
            }
        }
        Some((coeff, rest))
    }
}

impl Monomial {
    fn pow_mono(&self, e: u32) -> Monomial {
        let mut m = BTreeMap::new();
        for (v, d) in &self.0 {
            m.insert(v.clone(), d * e);
        }
        Monomial(m)
    }
}

fn fmt_coeff_prefix(
    f: &mut fmt::Formatter<'_>,
    coeff: &BigRational,
    first: bool,
    has_symbol: bool,
) -> fmt::Result {
    let mag = coeff.abs();
    if first {
        if coeff.is_negative() {
            f.write_str("-")?;
        }
    } else if coeff.is_negative() {
        f.write_str(" - ")?;
    } else {
        f.write_str(" + ")?;
    }
    if mag.is_one() && has_symbol {
        Ok(())
    } else if has_symbol {
        write!(f, "{mag}*")
    } else {
        write!(f, "{mag}")
    }
}

impl fmt::Display for PolyExp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        let mut first = true;
        for (key, coeff) in &self.terms {
            let has_base = !key.base.is_one();
            let has_symbol = has_base || !key.monomial.is_one();
            fmt_coeff_prefix(f, coeff, first, has_symbol)?;
            first = false;
            if has_base {
                if key.base.is_negative() {
                    write!(f, "({})^n", key.base)?;
                } else {
                    write!(f, "{}^n", key.base)?;
                }
                if !key.monomial.is_one() {
                    f.write_str("*")?;
                }
            }
            if !key.monomial.is_one() {
                write!(f, "{}", key.monomial)?;
            }
        }
        Ok(())
    }
}

/// Relation kind of an atom.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum AtomKind {
    /// `lhs > 0`
    Gt0,
    /// `lhs = 0`
    Eq0,
}

/// An atomic constraint `e > 0` or `e = 0` over poly-exponentials.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Atom {
    kind: AtomKind,
    lhs: PolyExp,
}

impl Atom {
    pub fn gt0(lhs: PolyExp) -> Self {
        Atom {
            kind: AtomKind::Gt0,
            lhs,
        }
    }

    /// `e >= 0` over the integers, encoded as `e + 1 > 0`. Only valid for
    /// integer-valued `e`.
    pub fn ge0(lhs: PolyExp) -> Self {
        Atom::gt0(lhs.add_int(1))
    }

    /// Equality atom, normalized: denominators cleared, coefficients divided
    /// by their content, sign fixed so the leading coefficient is positive.
    pub fn eq0(lhs: PolyExp) -> Self {
        let (cleared, _) = lhs.clear_denominators();
        let mut content = BigInt::zero();
        for c in cleared.terms.values() {
            content = num::integer::gcd(content, c.numer().clone());
        }
        let mut normalized = if content.is_zero() || content.is_one() {
            cleared
        } else {
            cleared.scale(&BigRational::from_integer(content).recip())
        };
        if let Some((_, c)) = normalized.terms.iter().next() {
            if c.is_negative() {
                normalized = normalized.neg();
            }
        }
        Atom {
            kind: AtomKind::Eq0,
            lhs: normalized,
        }
    }

    pub fn kind(&self) -> AtomKind {
        self.kind
    }

    pub fn lhs(&self) -> &PolyExp {
        &self.lhs
    }

    pub fn is_trivially_true(&self) -> bool {
        match self.lhs.as_constant() {
            Some(c) => match self.kind {
                AtomKind::Gt0 => c.is_positive(),
                AtomKind::Eq0 => c.is_zero(),
            },
            None => false,
        }
    }

    pub fn is_trivially_false(&self) -> bool {
        match self.lhs.as_constant() {
            Some(c) => match self.kind {
                AtomKind::Gt0 => !c.is_positive(),
                AtomKind::Eq0 => !c.is_zero(),
            },
            None => false,
        }
    }

    pub fn eval(&self, env: &BTreeMap<Var, BigInt>) -> Result<bool, EvalError> {
        let v = self.lhs.eval_rational(env)?;
        Ok(match self.kind {
            AtomKind::Gt0 => v.is_positive(),
            AtomKind::Eq0 => v.is_zero(),
        })
    }

    /// Apply `f` to the left-hand side, re-normalizing equalities.
    pub fn map_lhs(&self, f: impl FnOnce(&PolyExp) -> PolyExp) -> Atom {
        let lhs = f(&self.lhs);
        match self.kind {
            AtomKind::Gt0 => Atom::gt0(lhs),
            AtomKind::Eq0 => Atom::eq0(lhs),
        }
    }

    pub fn subst(&self, sigma: &BTreeMap<Var, PolyExp>) -> Atom {
        self.map_lhs(|e| e.subst(sigma))
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        self.lhs.vars()
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            AtomKind::Gt0 => write!(f, "{} > 0", self.lhs),
            AtomKind::Eq0 => write!(f, "{} == 0", self.lhs),
        }
    }
}

/// A disjunction of atoms. Normalized clauses never contain trivially false
/// atoms; the canonical false clause is `{0 > 0}`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Clause {
    atoms: BTreeSet<Atom>,
}

impl Clause {
    /// Build a clause from disjuncts, dropping trivially false atoms.
    /// Returns `None` when the clause is trivially true.
    pub fn normalized(atoms: impl IntoIterator<Item = Atom>) -> Option<Clause> {
        let mut set = BTreeSet::new();
        for atom in atoms {
            if atom.is_trivially_true() {
                return None;
            }
            if !atom.is_trivially_false() {
                set.insert(atom);
            }
        }
        if set.is_empty() {
            Some(Clause::falsum())
        } else {
            Some(Clause { atoms: set })
        }
    }

    /// A clause holding exactly this atom, without normalization.
    pub fn singleton(atom: Atom) -> Clause {
        let mut atoms = BTreeSet::new();
        atoms.insert(atom);
        Clause { atoms }
    }

    fn is_trivially_true(&self) -> bool {
        self.atoms.iter().any(|a| a.is_trivially_true())
    }

    /// The canonical false clause `{0 > 0}`.
    pub fn falsum() -> Clause {
        let mut atoms = BTreeSet::new();
        atoms.insert(Atom::gt0(PolyExp::zero()));
        Clause { atoms }
    }

    pub fn atoms(&self) -> impl Iterator<Item = &Atom> {
        self.atoms.iter()
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn is_falsum(&self) -> bool {
        self == &Clause::falsum()
    }

    pub fn eval(&self, env: &BTreeMap<Var, BigInt>) -> Result<bool, EvalError> {
        for atom in &self.atoms {
            if atom.eval(env)? {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// Apply `f` to every atom and re-normalize. A clause that becomes
    /// trivially true maps to `None`.
    pub fn map_atoms(&self, mut f: impl FnMut(&Atom) -> Atom) -> Option<Clause> {
        Clause::normalized(self.atoms.iter().map(|a| f(a)))
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        for a in &self.atoms {
            out.extend(a.vars());
        }
        out
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.atoms.len() == 1 {
            write!(f, "{}", self.atoms.iter().next().unwrap())
        } else {
            f.write_str("(")?;
            for (i, a) in self.atoms.iter().enumerate() {
                if i > 0 {
                    f.write_str(" || ")?;
                }
                write!(f, "{a}")?;
            }
            f.write_str(")")
        }
    }
}

/// A conjunction of clauses; the empty set is logical truth.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct Formula {
    clauses: BTreeSet<Clause>,
}

impl Formula {
    pub fn truth() -> Formula {
        Formula::default()
    }

    pub fn falsum() -> Formula {
        Formula::from_clauses([Clause::falsum()])
    }

    pub fn from_clauses(clauses: impl IntoIterator<Item = Clause>) -> Formula {
        let mut set = BTreeSet::new();
        for c in clauses {
            if c.is_falsum() {
                let mut only = BTreeSet::new();
                only.insert(Clause::falsum());
                return Formula { clauses: only };
            }
            if !c.is_trivially_true() {
                set.insert(c);
            }
        }
        Formula { clauses: set }
    }

    pub fn from_atoms(atoms: impl IntoIterator<Item = Atom>) -> Formula {
        Formula::from_clauses(atoms.into_iter().filter_map(|a| Clause::normalized([a])))
    }

    pub fn single_atom(atom: Atom) -> Formula {
        Formula::from_atoms([atom])
    }

    pub fn and(&self, other: &Formula) -> Formula {
        Formula::from_clauses(self.clauses.iter().chain(other.clauses.iter()).cloned())
    }

    pub fn is_truth(&self) -> bool {
        self.clauses.is_empty()
    }

    pub fn is_falsum(&self) -> bool {
        self.clauses.iter().any(|c| c.is_falsum())
    }

    pub fn clauses(&self) -> impl Iterator<Item = &Clause> {
        self.clauses.iter()
    }

    pub fn len(&self) -> usize {
        self.clauses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clauses.is_empty()
    }

    pub fn eval(&self, env: &BTreeMap<Var, BigInt>) -> Result<bool, EvalError> {
        for c in &self.clauses {
            if !c.eval(env)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        for c in &self.clauses {
            out.extend(c.vars());
        }
        out
    }

    pub fn map_atoms(&self, mut f: impl FnMut(&Atom) -> Atom) -> Formula {
        Formula::from_clauses(
            self.clauses
                .iter()
                .filter_map(|c| c.map_atoms(|a| f(a))),
        )
    }

    pub fn has_exponential(&self) -> bool {
        self.clauses
            .iter()
            .any(|c| c.atoms().any(|a| a.lhs().has_exponential()))
    }

    pub fn contains_counter(&self) -> bool {
        self.clauses
            .iter()
            .any(|c| c.atoms().any(|a| a.lhs().contains_counter()))
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.clauses.is_empty() {
            return f.write_str("true");
        }
        for (i, c) in self.clauses.iter().enumerate() {
            if i > 0 {
                f.write_str(" && ")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn env(pairs: &[(&str, i64)]) -> BTreeMap<Var, BigInt> {
        pairs
            .iter()
            .map(|(name, v)| (Var::new(*name), BigInt::from(*v)))
            .collect()
    }

    fn x(i: usize) -> PolyExp {
        PolyExp::var(Var::new(format!("x{i}")))
    }

    #[test]
    fn eval_linear() {
        // x1 - n at x1=5, n=3
        let e = x(1).sub(&PolyExp::counter());
        assert_eq!(e.eval(&env(&[("x1", 5), ("n", 3)])).unwrap(), BigInt::from(2));
    }

    #[test]
    fn eval_exponential() {
        // 2^n * x2 at x2=3, n=4
        let e = PolyExp::exponential(BigInt::from(2)).mul(&x(2));
        assert_eq!(
            e.eval(&env(&[("x2", 3), ("n", 4)])).unwrap(),
            BigInt::from(48)
        );
    }

    #[test]
    fn eval_rational_coefficients() {
        // (n - n^2)/2 + x2*n + x1 at x1=1, x2=0, n=3 -> -2
        let n = PolyExp::counter();
        let half = BigRational::new(BigInt::from(1), BigInt::from(2));
        let e = n
            .sub(&n.pow(2))
            .scale(&half)
            .add(&x(2).mul(&n))
            .add(&x(1));
        assert_eq!(
            e.eval(&env(&[("x1", 1), ("x2", 0), ("n", 3)])).unwrap(),
            BigInt::from(-2)
        );
    }

    #[test]
    fn eval_unbound_and_non_integer() {
        let e = x(1);
        assert!(matches!(
            e.eval(&env(&[])),
            Err(EvalError::UnboundVariable(_))
        ));
        let half = PolyExp::from_rational(BigRational::new(1.into(), 2.into()));
        let bad = x(1).mul(&half);
        assert!(matches!(
            bad.eval(&env(&[("x1", 1)])),
            Err(EvalError::NonIntegerResult(_))
        ));
    }

    #[test]
    fn subst_simple() {
        // x1 under {x1 -> x1 + x2, x2 -> x2 - 1} is x1 + x2
        let mut sigma = BTreeMap::new();
        sigma.insert(Var::new("x1"), x(1).add(&x(2)));
        sigma.insert(Var::new("x2"), x(2).add_int(-1));
        assert_eq!(x(1).subst(&sigma), x(1).add(&x(2)));

        // applying the substitution twice to x1 composes the update with
        // itself: x1 -> x1 + x2 -> x1 + 2*x2 - 1
        let twice = x(1).subst(&sigma).subst(&sigma);
        let expected = x(1)
            .add(&x(2).scale(&BigRational::from_integer(2.into())))
            .add_int(-1);
        assert_eq!(twice, expected);

        // constants are fixed by substitution
        assert_eq!(PolyExp::from_int(5).subst(&sigma), PolyExp::from_int(5));
    }

    #[test]
    fn subst_into_powers_multiplies_bases() {
        // (x1^2 * 3^n) with x1 -> 2^n * y gives y^2 * 12^n
        let mut sigma = BTreeMap::new();
        sigma.insert(
            Var::new("x1"),
            PolyExp::exponential(2.into()).mul(&PolyExp::var(Var::new("y"))),
        );
        let e = x(1).pow(2).mul(&PolyExp::exponential(3.into()));
        let expected = PolyExp::var(Var::new("y"))
            .pow(2)
            .mul(&PolyExp::exponential(12.into()));
        assert_eq!(e.subst(&sigma), expected);
    }

    #[test]
    fn shift_counter_linear() {
        // x1 - n shifted by -1 is x1 - n + 1
        let e = x(1).sub(&PolyExp::counter());
        assert_eq!(e.shift_counter(-1), x(1).sub(&PolyExp::counter()).add_int(1));
    }

    #[test]
    fn shift_counter_exponential() {
        // 2^n * x2 shifted by -1 is (1/2) * 2^n * x2
        let e = PolyExp::exponential(2.into()).mul(&x(2));
        let expected = e.scale(&BigRational::new(1.into(), 2.into()));
        assert_eq!(e.shift_counter(-1), expected);
    }

    #[test]
    fn shift_counter_quadratic() {
        // (n - n^2)/2 + x2*n + x1 shifted by -1, checked by evaluation
        let n = PolyExp::counter();
        let half = BigRational::new(1.into(), 2.into());
        let e = n
            .sub(&n.pow(2))
            .scale(&half)
            .add(&x(2).mul(&n))
            .add(&x(1));
        let shifted = e.shift_counter(-1);
        for nv in 0..6 {
            for x2 in -3..3 {
                let a = shifted
                    .eval(&env(&[("x1", 7), ("x2", x2), ("n", nv + 1)]))
                    .unwrap();
                let b = e.eval(&env(&[("x1", 7), ("x2", x2), ("n", nv)])).unwrap();
                assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn atom_normalization() {
        // equalities are divided by their content and sign-normalized
        let a = Atom::eq0(x(1).scale(&BigRational::from_integer(2.into())));
        assert_eq!(a, Atom::eq0(x(1)));
        let b = Atom::eq0(x(1).neg());
        assert_eq!(b, Atom::eq0(x(1)));
    }

    #[test]
    fn clause_and_formula_normalization() {
        let t = Atom::gt0(PolyExp::from_int(1));
        let f = Atom::gt0(PolyExp::from_int(0));
        assert!(Clause::normalized([t.clone()]).is_none());
        assert_eq!(Clause::normalized([f.clone()]), Some(Clause::falsum()));
        let mixed = Clause::normalized([f, Atom::gt0(x(1))]).unwrap();
        assert_eq!(mixed.len(), 1);
        assert!(Formula::from_clauses([Clause::falsum()]).is_falsum());
        assert!(Formula::truth().is_truth());
    }

    #[test]
    fn display_canonical() {
        let e = x(1).sub(&PolyExp::counter());
        assert_eq!(e.to_string(), "x1 - n");
        let e2 = PolyExp::exponential(2.into()).mul(&x(2));
        assert_eq!(e2.to_string(), "2^n*x2");
        let e3 = PolyExp::exponential(BigInt::from(-1)).mul(&x(4));
        assert_eq!(e3.to_string(), "(-1)^n*x4");
        assert_eq!(Atom::gt0(e).to_string(), "x1 - n > 0");
    }

    prop_compose! {
        fn small_rational()(numer in -6i64..7, denom in 1i64..4) -> BigRational {
            BigRational::new(numer.into(), denom.into())
        }
    }

    fn arb_polyexp() -> impl Strategy<Value = PolyExp> {
        let var = prop_oneof![
            Just(Var::new("x1")),
            Just(Var::new("x2")),
            Just(Var::counter())
        ];
        let term = (small_rational(), proptest::collection::vec((var, 1u32..3), 0..3), -2i64..3)
            .prop_map(|(c, vars, base)| {
                let base = if base == 0 { 1 } else { base };
                let mut m = Monomial::one();
                for (v, e) in vars {
                    m = m.mul(&Monomial::var(v).pow_mono(e));
                }
                let mut p = PolyExp::zero();
                p.add_term(m, base.into(), c);
                p
            });
        proptest::collection::vec(term, 0..5)
            .prop_map(|ts| ts.iter().fold(PolyExp::zero(), |acc, t| acc.add(t)))
    }

    proptest! {
        #[test]
        fn ring_laws_on_random_points(a in arb_polyexp(), b in arb_polyexp(), c in arb_polyexp(),
                                      x1 in -4i64..5, x2 in -4i64..5, n in 0i64..6) {
            let env = env(&[("x1", x1), ("x2", x2), ("n", n)]);
            let ev = |e: &PolyExp| e.eval_rational(&env).unwrap();
            prop_assert_eq!(ev(&a.add(&b)), ev(&b.add(&a)));
            prop_assert_eq!(ev(&a.mul(&b)), ev(&b.mul(&a)));
            prop_assert_eq!(ev(&a.add(&b).add(&c)), ev(&a.add(&b.add(&c))));
            prop_assert_eq!(ev(&a.mul(&b).mul(&c)), ev(&a.mul(&b.mul(&c))));
            prop_assert_eq!(ev(&a.mul(&b.add(&c))), ev(&a.mul(&b).add(&a.mul(&c))));
        }

        #[test]
        fn structural_equality_is_semantic(a in arb_polyexp(), b in arb_polyexp(),
                                           x1 in -4i64..5, x2 in -4i64..5, n in 0i64..6) {
            // canonical forms are equal exactly when subtracting gives zero
            let env = env(&[("x1", x1), ("x2", x2), ("n", n)]);
            let diff = a.sub(&b);
            if diff.is_zero() {
                prop_assert_eq!(a.eval_rational(&env).unwrap(), b.eval_rational(&env).unwrap());
            }
            prop_assert!(a.sub(&a).is_zero());
        }

        #[test]
        fn shift_round_trip(a in arb_polyexp(), k in -3i64..4) {
            prop_assert_eq!(a.shift_counter(k).shift_counter(-k), a);
        }

        #[test]
        fn subst_commutes_with_eval(a in arb_polyexp(), x1 in -3i64..4, x2 in -3i64..4, n in 0i64..5) {
            // eval(subst(e, sigma), env) = eval(e, env') with env' the evaluated sigma
            let mut sigma = BTreeMap::new();
            sigma.insert(Var::new("x1"), x(1).add(&x(2)));
            sigma.insert(Var::new("x2"), x(2).add_int(-1));
            let env0 = env(&[("x1", x1), ("x2", x2), ("n", n)]);
            let mut env1 = BTreeMap::new();
            for (v, e) in &sigma {
                env1.insert(v.clone(), e.eval(&env0).unwrap());
            }
            env1.insert(Var::counter(), BigInt::from(n));
            prop_assert_eq!(
                a.subst(&sigma).eval_rational(&env0).unwrap(),
                a.eval_rational(&env1).unwrap()
            );
        }
    }
}
