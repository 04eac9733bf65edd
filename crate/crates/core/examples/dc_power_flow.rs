//! Base-case DC power flow on the IEEE 14-bus case.

use gridcascade::network::cases;
use gridcascade::powerflow::solve_power_flow;
use gridcascade::Topology;

fn main() {
    let net = cases::ieee14();
    let y = net.nominal_susceptances();
    let p = net.injections();
    let sol = solve_power_flow(&net, &y, &p, &Topology::default()).expect("base case solves");

    println!("bus  angle (rad)");
    for (bus, th) in net.buses().iter().zip(&sol.angles.theta) {
        println!("{:>3}  {:>10.5}", bus.id, th);
    }
    println!("\nbranch  flow     threshold  loading");
    for (br, f) in net.branches().iter().zip(&sol.flows.flows) {
        println!("{:>6}  {:>7.4}  {:>9.2}  {:>6.1}%", br.id, f, br.threshold, 100.0 * f.abs() / br.threshold);
    }
    for b in sol.island_balances(&net, &p) {
        println!("\nslack at bus {} absorbs {:.4} p.u.", b.reference_bus, b.slack);
    }
}
