//! Iterative search for the worst disturbance on IEEE 9-bus branch 2.

use gridcascade::network::cases;
use gridcascade::{iterative_search, SearchConfig};

fn main() {
    let net = cases::ieee9();
    let config = SearchConfig::default();
    let target = net.branch_index(2).unwrap();
    let res = iterative_search(&net, target, &net.injections(), &config).expect("valid config");
    for it in &res.iterations {
        println!(
            "i={:>2} {:?} after {:>2} Newton steps, u0 = {:>10.5}, J = {:.4}, J* = {:.4}",
            it.iteration,
            it.status,
            it.solver_iterations,
            it.u0.unwrap_or(f64::NAN),
            it.cost,
            it.j_star
        );
    }
    println!("|u*| = {:.4}, J* = {:.4}", res.u0().abs(), res.j_star);
}
