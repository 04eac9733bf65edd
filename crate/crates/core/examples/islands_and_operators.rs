//! Islands after outages and the reduced-matrix operators on each block.

use gridcascade::gridlinalg::{build_nodal_admittance, inv_star, reference_projector, star};
use gridcascade::network::cases;
use gridcascade::{ReferencePolicy, Topology};

fn main() {
    let net = cases::ieee14();
    let mut y = net.nominal_susceptances();
    // the outage set left behind by the branch-6 cascade
    for id in [1, 2, 3, 4, 5, 6, 7, 8, 9, 11, 13, 14, 15, 16, 18, 20] {
        y[net.branch_index(id).unwrap()] = 0.0;
    }
    for reference in [ReferencePolicy::CaseSlackThenGenerator, ReferencePolicy::LowestId] {
        let topo = Topology { reference, ..Topology::default() };
        let adm = build_nodal_admittance(&net, &y, &topo).unwrap();
        let refs: Vec<usize> = adm.decomposition.islands().iter().map(|i| i.reference + 1).collect();
        println!("{reference:?}: islands {:?}, references {refs:?}", adm.decomposition.bus_ids());
        let x = inv_star(&adm).unwrap();
        let gap = (star(&adm) * &x - reference_projector(&adm.decomposition)).amax();
        println!("  |star(B) inv_star(B) - projector| = {gap:.2e}");
    }
}
