//! Loop acceleration and non-termination proving for single-path integer
//! loops.
//!
//! Given a loop `while phi { x := a(x) }` over integer variables, this crate
//! can:
//!
//! - compute exact closed forms `x(n) = a^n(x)` for triangular updates
//!   ([`closed_form`]);
//! - synthesize a first-order formula relating pre-state, iteration count
//!   `n`, and post-state, equivalent to (or under-approximating) the n-fold
//!   transition relation, by combining per-clause acceleration techniques
//!   ([`accel`]);
//! - prove non-termination, producing a certificate formula together with a
//!   concrete diverging witness state ([`nonterm`]);
//! - cross-check every result against a brute-force interpreter over bounded
//!   grids ([`oracle`]).
//!
//! Implication and satisfiability checks are discharged by an external
//! SMT-LIB2 solver process ([`solver`]); point it at a `z3`, `cvc5`, or
//! `yices-smt2` binary via `$LOOPACCEL_SMT_BIN` or the CLI `--solver` flag.
//!
//! The `examples/` directory walks through each capability end to end:
//!
//! ```text
//! examples/
//! ├── accelerate.rs      # loop -> formula over (x, n, x'), with proof trace
//! ├── nonterminate.rs    # loop -> certificate + witness of divergence
//! ├── closed_forms.rs    # triangular updates -> exact closed forms
//! ├── oracle_verify.rs   # grid-check an accelerated formula
//! ├── metering.rs        # validate a caller-supplied iteration lower bound
//! └── smtlib_export.rs   # render formulas as SMT-LIB2 scripts
//! ```
//!
//! Run one with `cargo run --example accelerate`. The thin `loop-accel`
//! binary drives the same pipeline from loop files; see the README.

pub mod accel;
pub mod closed_form;
pub mod solver;
pub mod trace;
pub mod expr;
pub mod loop_model;
pub mod nonterm;
pub mod cli;
