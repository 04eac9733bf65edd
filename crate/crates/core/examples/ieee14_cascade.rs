//! IEEE 14-bus cascade after a 1.95 p.u. susceptance decrement on branch 6,
//! with and without breaker reclosing.

use gridcascade::network::cases;
use gridcascade::report::CascadeReport;
use gridcascade::{simulate, CascadeConfig, DisturbancePlan};

fn main() {
    let net = cases::ieee14();
    let plan = DisturbancePlan::initial(net.branch_index(6).unwrap(), -1.95, 10);
    for reclosing in [false, true] {
        let config = CascadeConfig {
            reclosing,
            ..CascadeConfig::new(5e4, 10)
        };
        let traj = simulate(&net, &plan, &config).expect("cascade runs");
        let rep = CascadeReport::from_trajectory(&net, &traj, 1e-4).unwrap();
        let s = &rep.summary;
        println!(
            "reclosing={reclosing}: last outage at k={}, {} multi-bus islands, {} isolated buses, J = {:.3}",
            s.last_outage_step, s.multi_bus_islands, s.isolated_buses, s.total_cost
        );
        println!("  islands {:?}", traj.final_step().islands.bus_ids());
    }
}
