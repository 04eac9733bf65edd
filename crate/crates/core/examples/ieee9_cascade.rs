//! Cut branch 2 of the IEEE 9-bus case and follow the cascade.

use gridcascade::network::cases;
use gridcascade::report::CascadeReport;
use gridcascade::{simulate, CascadeConfig, DisturbancePlan};

fn main() {
    let net = cases::ieee9();
    let plan = DisturbancePlan::initial(net.branch_index(2).unwrap(), -10.87, 9);
    let traj = simulate(&net, &plan, &CascadeConfig::new(5e4, 9)).expect("cascade runs");

    for (k, out) in traj.outage_events(&net).iter().enumerate() {
        if !out.is_empty() {
            println!("Step {}: branches {:?} out", k + 1, out);
        }
    }
    let last = traj.final_step();
    println!("final islands: {:?}", last.islands.bus_ids());
    println!("flow on branch 8: {:.3e}", last.flows.flows[7]);

    let report = CascadeReport::from_trajectory(&net, &traj, 1e-4).unwrap();
    println!("J = {:.4}, unserved load {:.2} p.u.", report.summary.total_cost, report.summary.unserved_load);
}
