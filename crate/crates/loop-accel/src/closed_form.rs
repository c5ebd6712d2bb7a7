//! Closed forms for the n-fold application of triangular updates.
//!
//! An update is triangular when the variables can be ordered so that every
//! right-hand side has the shape `c*v + p` with an integer constant `c` and
//! `p` a polynomial over strictly earlier variables. Each component is then
//! solved by unrolling `v(n) = c^n*v + sum_{k=0}^{n-1} c^(n-1-k) * p(k)`,
//! where `p(k)` is expanded with the already-solved closed forms. The
//! resulting poly-exponentials are valid for every `n >= 0`, including the
//! initial state.

use std::collections::{BTreeMap, BTreeSet};

use num::bigint::BigInt;
use num::rational::BigRational;
use num::{One, Zero};
use thiserror::Error;

use crate::expr::{PolyExp, Var};
use crate::loop_model::Loop;

/// Per-variable closed forms `v -> v(n)` with `v(0) = v`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ClosedForm {
    components: BTreeMap<Var, PolyExp>,
    order: Vec<Var>,
}

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum ClosedFormError {
    #[error(
        "the update is not triangular: dependency cycle {}; closed forms for general linear \
         systems (via a matrix normal form) are not supported",
        render_cycle(.cycle)
    )]
    NonTriangular { cycle: Vec<Var> },
    #[error("no supported closed form for `{var}`: {reason}")]
    UnsupportedRecurrence { var: Var, reason: String },
}

fn render_cycle(cycle: &[Var]) -> String {
    let mut names: Vec<String> = cycle.iter().map(|v| v.to_string()).collect();
    if let Some(first) = names.first().cloned() {
        names.push(first);
    }
    names.join(" -> ")
}

impl ClosedForm {
    pub fn component(&self, v: &Var) -> &PolyExp {
        &self.components[v]
    }

    pub fn components(&self) -> impl Iterator<Item = (&Var, &PolyExp)> {
        self.order.iter().map(move |v| (v, &self.components[v]))
    }

    /// Substitution map `v -> v(n + k)`, used to build constraints about the
    /// state reached after `n + k` iterations (typically `k = -1`).
    pub fn subst_shifted(&self, k: i64) -> BTreeMap<Var, PolyExp> {
        self.components
            .iter()
            .map(|(v, e)| (v.clone(), e.shift_counter(k)))
            .collect()
    }

    /// Substitution map `v -> v(n)`.
    pub fn as_subst(&self) -> &BTreeMap<Var, PolyExp> {
        &self.components
    }
}

/// Compute the closed form of a loop's update, in dependency order.
pub fn solve_closed_form(loop_: &Loop) -> Result<ClosedForm, ClosedFormError> {
    let order = triangular_order(loop_)?;
    let mut solved: BTreeMap<Var, PolyExp> = BTreeMap::new();
    for v in &order {
        let rhs = loop_.update().rhs(v);
        let (coeff, rest) = rhs.linear_split(v).ok_or_else(|| {
            ClosedFormError::UnsupportedRecurrence {
                var: v.clone(),
                reason: format!(
                    "the update `{rhs}` is not of the form c*{v} + p with a constant c"
                ),
            }
        })?;
        if !coeff.is_integer() {
            return Err(ClosedFormError::UnsupportedRecurrence {
                var: v.clone(),
                reason: "the self-coefficient is not an integer".into(),
            });
        }
        let c = coeff.to_integer();
        if c.is_zero() {
            return Err(ClosedFormError::UnsupportedRecurrence {
                var: v.clone(),
                reason: format!(
                    "the update `{rhs}` does not mention `{v}`; the n-fold value is \
                     eventually a function of the other variables only and has no \
                     poly-exponential representation valid for all n >= 0"
                ),
            });
        }

        // p(k) with earlier variables replaced by their closed forms at k.
        let p = rest.subst(&solved);
        let mut cf = homogeneous_part(v, &c);
        for (base, q) in p.split_by_base() {
            cf = cf.add(&sum_mixed(&q, &base, &c));
        }

        debug_assert_eq!(cf.instantiate_counter(0), PolyExp::var(v.clone()));
        debug_assert_eq!(cf.instantiate_counter(1), rhs.clone());
        solved.insert(v.clone(), cf);
    }
    Ok(ClosedForm {
        components: solved,
        order: loop_.vars().to_vec(),
    })
}

fn homogeneous_part(v: &Var, c: &BigInt) -> PolyExp {
    let var = PolyExp::var(v.clone());
    if c.is_one() {
        var
    } else {
        PolyExp::exponential(c.clone()).mul(&var)
    }
}

/// An ordering of the loop's variables in which every update only depends on
/// earlier variables (plus itself). Ties are broken by declaration order.
fn triangular_order(loop_: &Loop) -> Result<Vec<Var>, ClosedFormError> {
    let vars = loop_.vars();
    let deps: BTreeMap<&Var, BTreeSet<Var>> = vars
        .iter()
        .map(|v| {
            let mut d = loop_.update().rhs(v).vars();
            d.remove(v);
            (v, d)
        })
        .collect();

    let mut order = Vec::new();
    let mut placed: BTreeSet<Var> = BTreeSet::new();
    while order.len() < vars.len() {
        let next = vars.iter().find(|v| {
            !placed.contains(v) && deps[v].iter().all(|d| placed.contains(d))
        });
        match next {
            Some(v) => {
                placed.insert(v.clone());
                order.push(v.clone());
            }
            None => {
                return Err(ClosedFormError::NonTriangular {
                    cycle: extract_cycle(vars, &deps, &placed),
                })
            }
        }
    }
    Ok(order)
}

fn extract_cycle(
    vars: &[Var],
    deps: &BTreeMap<&Var, BTreeSet<Var>>,
    placed: &BTreeSet<Var>,
) -> Vec<Var> {
    let start = vars
        .iter()
        .find(|v| !placed.contains(v))
        .expect("a blocked variable exists when ordering fails");
    let mut path = vec![start.clone()];
    let mut seen: BTreeSet<Var> = path.iter().cloned().collect();
    let mut current = start.clone();
    loop {
        let next = deps[&current]
            .iter()
            .find(|d| !placed.contains(*d))
            .expect("a blocked variable depends on another blocked variable")
            .clone();
        if let Some(pos) = path.iter().position(|v| v == &next) {
            return path[pos..].to_vec();
        }
        seen.insert(next.clone());
        path.push(next.clone());
        current = next;
    }
}

/// Closed form of `sum_{k=0}^{n-1} q(k) * b^k`, valid for all `n >= 0` (the
/// empty sum is 0). `q` must be a polynomial in the counter (coefficients may
/// mention program variables) and `b` must be nonzero.
pub fn sum_polyexp(q: &PolyExp, b: &BigInt) -> PolyExp {
    assert!(!b.is_zero(), "exponential base must be nonzero");
    assert!(
        !q.has_exponential(),
        "summand must be polynomial in the counter"
    );
    let result = if b.is_one() {
        let coeffs = q.counter_coefficients();
        let mut acc = PolyExp::zero();
        for (m, coeff) in coeffs.iter().enumerate() {
            if !coeff.is_zero() {
                acc = acc.add(&coeff.mul(&power_sum(m)));
            }
        }
        acc
    } else {
        // Ansatz r(n)*b^n + s with deg r = deg q, determined by the
        // difference equation b*r(n+1) - r(n) = q(n) and r(0) + s = 0.
        let r = solve_difference(q, b, &BigInt::one());
        let s = r.first().cloned().unwrap_or_default().neg();
        poly_in_counter(&r)
            .mul(&PolyExp::exponential(b.clone()))
            .add(&s)
    };
    verify_sum(&result, q, b, &BigInt::one());
    result
}

/// Closed form of `sum_{k=0}^{n-1} q(k) * b^k * c^(n-1-k)`, the building
/// block for unrolling `v := c*v + p`.
fn sum_mixed(q: &PolyExp, b: &BigInt, c: &BigInt) -> PolyExp {
    let result = if c.is_one() {
        return sum_polyexp(q, b);
    } else if b == c {
        // b^(n-1) * sum q(k) = (1/b) * (sum q) * b^n
        let plain = sum_polyexp(q, &BigInt::one());
        plain
            .mul(&PolyExp::exponential(b.clone()))
            .scale(&BigRational::from_integer(b.clone()).recip())
    } else {
        // Ansatz u(n)*b^n + w*c^n from T(n+1) = c*T(n) + q(n)*b^n, T(0) = 0.
        let u = solve_difference(q, b, c);
        let w = u.first().cloned().unwrap_or_default().neg();
        poly_in_counter(&u)
            .mul(&PolyExp::exponential(b.clone()))
            .add(&w.mul(&PolyExp::exponential(c.clone())))
    };
    verify_sum(&result, q, b, c);
    result
}

/// Coefficients of the polynomial `u` with `b*u(n+1) - c*u(n) = q(n)`,
/// solved top-down; requires `b != c`.
fn solve_difference(q: &PolyExp, b: &BigInt, c: &BigInt) -> Vec<PolyExp> {
    let q_coeffs = q.counter_coefficients();
    let deg = q_coeffs.len() - 1;
    let b_rat = BigRational::from_integer(b.clone());
    let gap = BigRational::from_integer(b - c);
    let mut u = vec![PolyExp::zero(); deg + 1];
    for m in (0..=deg).rev() {
        let mut rhs = q_coeffs[m].clone();
        for j in (m + 1)..=deg {
            let corr = u[j]
                .scale(&(&b_rat * binomial(j, m)));
            rhs = rhs.sub(&corr);
        }
        u[m] = rhs.scale(&gap.clone().recip());
    }
    u
}

/// `sum_{k=0}^{n-1} k^m` as a polynomial in the counter, computed by exact
/// interpolation through the first m+2 prefix sums.
fn power_sum(m: usize) -> PolyExp {
    let points = m + 2;
    let mut values = Vec::with_capacity(points + 1);
    let mut acc = BigRational::zero();
    values.push(acc.clone());
    for k in 0..points {
        acc += BigRational::from_integer(BigInt::from(k).pow(m as u32));
        values.push(acc.clone());
    }
    let coeffs = interpolate(&values);
    poly_in_counter(
        &coeffs
            .into_iter()
            .map(PolyExp::from_rational)
            .collect::<Vec<_>>(),
    )
}

/// Power-basis coefficients of the unique polynomial of degree < len taking
/// `values[i]` at `i`, by Newton forward differences.
fn interpolate(values: &[BigRational]) -> Vec<BigRational> {
    let mut diffs = values.to_vec();
    let mut result = vec![BigRational::zero(); values.len()];
    // falling factorial n(n-1)...(n-j+1)/j! accumulated in power basis
    let mut falling = vec![BigRational::one()];
    let mut factorial = BigRational::one();
    for j in 0..values.len() {
        if j > 0 {
            factorial *= BigRational::from_integer(BigInt::from(j));
            // multiply by (n - (j-1))
            let shift = BigRational::from_integer(BigInt::from(j as i64 - 1));
            let mut next = vec![BigRational::zero(); falling.len() + 1];
            for (i, c) in falling.iter().enumerate() {
                next[i + 1] += c;
                next[i] -= c * &shift;
            }
            falling = next;
            for k in (j..diffs.len()).rev() {
                let prev = diffs[k - 1].clone();
                diffs[k] -= prev;
            }
        }
        let lead = &diffs[j] / &factorial;
        for (i, c) in falling.iter().enumerate() {
            result[i] += &lead * c;
        }
    }
    result
}

fn poly_in_counter(coeffs: &[PolyExp]) -> PolyExp {
    let n = PolyExp::counter();
    let mut acc = PolyExp::zero();
    for (i, c) in coeffs.iter().enumerate() {
        acc = acc.add(&c.mul(&n.pow(i as u32)));
    }
    acc
}

fn binomial(j: usize, m: usize) -> BigRational {
    let mut num = BigInt::one();
    let mut den = BigInt::one();
    for i in 0..(j - m) {
        num *= BigInt::from(j - i);
        den *= BigInt::from(i + 1);
    }
    BigRational::new(num, den)
}

// Every synthesized sum is checked against direct summation at small n; a
// mismatch is a solver bug, not an input error.
fn verify_sum(result: &PolyExp, q: &PolyExp, b: &BigInt, c: &BigInt) {
    let counter = Var::counter();
    let deg = q.degree_of(&counter) as u64;
    for n in 0..=(deg + 2) {
        let mut direct = PolyExp::zero();
        for k in 0..n {
            let coeff = BigRational::from_integer(b.pow(k as u32))
                * BigRational::from_integer(c.pow((n - 1 - k) as u32));
            direct = direct.add(&q.instantiate_counter(k).scale(&coeff));
        }
        assert_eq!(
            result.instantiate_counter(n),
            direct,
            "closed-form sum disagrees with direct summation at n = {n}"
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loop_model::parse_loop;
    use num::ToPrimitive;

    fn x(i: usize) -> PolyExp {
        PolyExp::var(Var::new(format!("x{i}")))
    }

    fn rat(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn sums_constant_series() {
        assert_eq!(sum_polyexp(&PolyExp::one(), &BigInt::one()), PolyExp::counter());
    }

    #[test]
    fn sums_arithmetic_series() {
        // sum k = (n^2 - n)/2
        let n = PolyExp::counter();
        let expected = n.pow(2).sub(&n).scale(&rat(1, 2));
        assert_eq!(sum_polyexp(&PolyExp::counter(), &BigInt::one()), expected);
    }

    #[test]
    fn sums_geometric_series_with_polynomial_factor() {
        // sum k*2^k = (n-2)*2^n + 2, checked against brute force first
        let q = PolyExp::counter();
        let b = BigInt::from(2);
        let result = sum_polyexp(&q, &b);
        for n in 0..=10u64 {
            let direct: i64 = (0..n).map(|k| (k as i64) * 2i64.pow(k as u32)).sum();
            let got = result
                .instantiate_counter(n)
                .as_constant()
                .unwrap();
            assert_eq!(got.to_integer().to_i64().unwrap(), direct);
        }
        let expected = PolyExp::counter()
            .add_int(-2)
            .mul(&PolyExp::exponential(2.into()))
            .add_int(2);
        assert_eq!(result, expected);
    }

    #[test]
    fn sum_difference_recovers_summand() {
        // value(n+1) - value(n) = q(n) * b^n, symbolically
        let cases = [
            (PolyExp::counter().pow(2).add(&x(1)), BigInt::from(1)),
            (PolyExp::counter().mul(&x(2)).add_int(3), BigInt::from(2)),
            (PolyExp::counter().pow(3), BigInt::from(-2)),
        ];
        for (q, b) in cases {
            let s = sum_polyexp(&q, &b);
            let diff = s.shift_counter(1).sub(&s);
            let expected = q.mul(&PolyExp::exponential(b.clone()));
            assert_eq!(diff, expected, "difference mismatch for q = {q}, b = {b}");
        }
    }

    #[test]
    fn solves_decrement_and_double() {
        let l = parse_loop("vars: x1,x2; guard: x1 > 0; update: x1 := x1 - 1; x2 := 2*x2")
            .unwrap();
        let cf = solve_closed_form(&l).unwrap();
        assert_eq!(
            cf.component(&Var::new("x1")),
            &x(1).sub(&PolyExp::counter())
        );
        assert_eq!(
            cf.component(&Var::new("x2")),
            &PolyExp::exponential(2.into()).mul(&x(2))
        );
    }

    #[test]
    fn solves_quadratic_coupling() {
        let l = parse_loop("vars: x1,x2; guard: x1 > 0; update: x1 := x1 + x2; x2 := x2 - 1")
            .unwrap();
        let cf = solve_closed_form(&l).unwrap();
        // x1(n) = (n - n^2)/2 + x2*n + x1
        let n = PolyExp::counter();
        let expected = n
            .sub(&n.pow(2))
            .scale(&rat(1, 2))
            .add(&x(2).mul(&n))
            .add(&x(1));
        assert_eq!(cf.component(&Var::new("x1")), &expected);
        assert_eq!(cf.component(&Var::new("x2")), &x(2).sub(&n));
    }

    #[test]
    fn solves_cubic_chain() {
        let l = parse_loop(
            "vars: x1,x2,x3; guard: x3 > 0; update: x1 := x1 + 1; x2 := x2 - x1; x3 := x3 + x2",
        )
        .unwrap();
        let cf = solve_closed_form(&l).unwrap();
        // x3(n) = -n^3/6 + ((1 - x1)/2)*n^2 + (x1/2 + x2 - 1/3)*n + x3
        let n = PolyExp::counter();
        let expected = n
            .pow(3)
            .scale(&rat(-1, 6))
            .add(&PolyExp::one().sub(&x(1)).scale(&rat(1, 2)).mul(&n.pow(2)))
            .add(
                &x(1)
                    .scale(&rat(1, 2))
                    .add(&x(2))
                    .add(&PolyExp::from_rational(rat(-1, 3)))
                    .mul(&n),
            )
            .add(&x(3));
        assert_eq!(cf.component(&Var::new("x3")), &expected);
    }

    #[test]
    fn closed_forms_match_interpreter_iterates() {
        let sources = [
            "vars: x; guard: x > 0; update: x := x + 1",
            "vars: x1,x2; guard: x1 > 0; update: x1 := x1 - 1; x2 := 2*x2",
            "vars: x1,x2; guard: x1 > 0 && x2 > 0; update: x1 := x1 - 1; x2 := x2 + 1",
            "vars: x1,x2; guard: x1 > 0; update: x1 := x1 + x2; x2 := x2 + 1",
            "vars: x1,x2,x3; guard: x1 > 0; update: x1 := x1 - 1; x2 := x2 + x1; x3 := x3 - x2",
            "vars: x1,x2; guard: x1 > 0; update: x1 := -x1 + x2; x2 := x2 - 2",
            "vars: x1,x2; guard: x1 > 0; update: x1 := 3*x1 + 2*x2; x2 := 2*x2 + 1",
        ];
        for src in sources {
            let l = parse_loop(src).unwrap();
            let cf = solve_closed_form(&l).unwrap();
            let grid: Vec<i64> = (-3..=3).collect();
            let dim = l.vars().len();
            let mut point = vec![0usize; dim];
            loop {
                let mut state: BTreeMap<Var, BigInt> = l
                    .vars()
                    .iter()
                    .enumerate()
                    .map(|(i, v)| (v.clone(), BigInt::from(grid[point[i]])))
                    .collect();
                let initial = state.clone();
                for n in 0..=8u64 {
                    for v in l.vars() {
                        let mut env = initial.clone();
                        env.insert(Var::counter(), BigInt::from(n));
                        let symbolic = cf.component(v).eval(&env).unwrap();
                        assert_eq!(symbolic, state[v], "loop {src}, var {v}, n = {n}");
                    }
                    state = l.update().step(&state).unwrap();
                }
                let mut i = 0;
                while i < dim {
                    point[i] += 1;
                    if point[i] < grid.len() {
                        break;
                    }
                    point[i] = 0;
                    i += 1;
                }
                if i == dim {
                    break;
                }
            }
        }
    }

    #[test]
    fn rejects_cyclic_dependencies() {
        let l = parse_loop("vars: x1,x2; guard: x1 > 0; update: x1 := x2; x2 := x1").unwrap();
        match solve_closed_form(&l) {
            Err(ClosedFormError::NonTriangular { cycle }) => {
                assert!(cycle.len() >= 2);
            }
            other => panic!("expected a dependency cycle, got {other:?}"),
        }
    }

    #[test]
    fn rejects_self_free_updates() {
        // x := 1 jumps to a constant; no closed form is valid at n = 0
        let l = parse_loop("vars: x; guard: x > 0; update: x := 1").unwrap();
        assert!(matches!(
            solve_closed_form(&l),
            Err(ClosedFormError::UnsupportedRecurrence { .. })
        ));
    }

    #[test]
    fn rejects_nonlinear_self_dependence() {
        let l = parse_loop("vars: x; guard: x > 0; update: x := x*x").unwrap();
        assert!(matches!(
            solve_closed_form(&l),
            Err(ClosedFormError::UnsupportedRecurrence { .. })
        ));
    }

    #[test]
    fn negative_self_coefficient_uses_alternating_base() {
        let l = parse_loop("vars: x4; guard: x4 + 1 > 0; update: x4 := -x4").unwrap();
        let cf = solve_closed_form(&l).unwrap();
        let expected = PolyExp::exponential(BigInt::from(-1)).mul(&PolyExp::var(Var::new("x4")));
        assert_eq!(cf.component(&Var::new("x4")), &expected);
    }

    #[test]
    fn random_sums_match_direct_summation() {
        // deterministic xorshift; 50 random (q, b) pairs
        let mut state = 0x243f_6a88_85a3_08d3u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            state
        };
        for _ in 0..50 {
            let deg = (next() % 5) as u32;
            let mut b = (next() % 7) as i64 - 3;
            if b == 0 {
                b = 1;
            }
            let mut q = PolyExp::zero();
            for d in 0..=deg {
                let num = (next() % 11) as i64 - 5;
                let den = (next() % 3) as i64 + 1;
                q = q.add(&PolyExp::counter().pow(d).scale(&rat(num, den)));
            }
            let s = sum_polyexp(&q, &BigInt::from(b));
            for n in 0..=10u64 {
                let mut direct = BigRational::zero();
                for k in 0..n {
                    direct += q.instantiate_counter(k).as_constant().unwrap()
                        * BigRational::from_integer(BigInt::from(b).pow(k as u32));
                }
                assert_eq!(s.instantiate_counter(n).as_constant().unwrap(), direct);
            }
        }
    }
}
