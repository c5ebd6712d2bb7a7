use loop_accel::accel::*;
use loop_accel::expr::*;
use loop_accel::loop_model::parse_loop;
use loop_accel::solver::*;

fn main() {
    let l = parse_loop("vars: x1,x2; guard: x1 > 0; update: x1 := x1 - 1; x2 := 2*x2").unwrap();
    let mut s = SolverClient::from_env().unwrap();
    let chi = l.guard_clauses();
    let mf = PolyExp::var(Var::new("x1"));

    // condition 1 manually
    let mf_stepped = l.update().apply_expr(&mf, 1);
    println!("mf_stepped = {mf_stepped}");
    let slack = PolyExp::one().sub(&mf.sub(&mf_stepped));
    println!("slack = {slack}");
    let conclusion = Formula::single_atom(Atom::ge0(slack));
    println!("conclusion = {conclusion}");
    let premise = Formula::from_clauses(chi.clone());
    let v = s.check_implication(&premise, &conclusion).unwrap();
    println!("cond1 verdict = {v:?}");

    let out = validate_metering(&mut s, &l, &chi, &[], &mf).unwrap();
    println!("outcome = {out:?}");
}
