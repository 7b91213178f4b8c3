//! Doubling, changing-center and interior estimates on a lifted quartic, with
//! the implied constant of every inequality.

use freqlab::inequalities::{
    caccioppoli_check, changing_center, check_h_H_lower, check_h_H_upper, doubling_exponent, doubling_reports,
    h_doubling, h_doubling_lower, sup_bound_check, Budgets,
};
use freqlab::solutions::{builtin_case, DEFAULT_SEED};

fn main() -> freqlab::Result<()> {
    let sys = builtin_case("quartic")?.lifted_system(1.0, 1.0 / 64.0, 1.0)?;
    let z = [0.0, 0.0];
    let b = Budgets::default();
    println!("alpha = {}, doubling exponent on [0.15, 0.45] = {:.4}", sys.params().alpha, doubling_exponent(&sys, &z, 0.15, 0.45)?);

    let mut reports = doubling_reports(&sys, &z, 0.15, 0.45, &b)?;
    reports.push(h_doubling(&sys, &z, 0.075, 0.225, b.h_doubling_upper)?);
    reports.extend(h_doubling_lower(&sys, &z, 0.075, 0.225, b.h_doubling_lower)?);
    reports.push(check_h_H_upper(&sys, &z, 0.45)?);
    reports.push(check_h_H_lower(&sys, &z, 0.225, 0.45)?);
    reports.push(changing_center(&sys, &z, 0.8, 8, DEFAULT_SEED, b.changing_center)?);
    reports.push(caccioppoli_check(&sys, &z, 0.225, b.caccioppoli)?);
    reports.push(sup_bound_check(&sys, &z, 0.225, b.sup_bound)?);

    println!("{:<18} {:>12} {:>12} {:>10} {:>8}", "check", "lhs", "rhs", "C", "budget");
    for r in &reports {
        println!(
            "{:<18} {:>12.4e} {:>12.4e} {:>10.4} {:>8} {}",
            r.name,
            r.lhs,
            r.rhs_without_constant,
            r.implied_constant,
            r.budget().map_or("exact".to_string(), |x| x.to_string()),
            if r.pass { "PASS" } else { "FAIL" }
        );
    }
    Ok(())
}
