//! Rank every IEEE 9-bus branch by the cost of its worst disturbance.

use gridcascade::network::cases;
use gridcascade::{rank_branches, SearchConfig};

fn main() {
    let net = cases::ieee9();
    let ranked = rank_branches(&net, &net.injections(), &SearchConfig::default()).expect("valid config");
    println!("branch   |u*|       J*");
    for r in &ranked {
        println!("{:>6} {:>7.3} {:>9.4}", r.branch, r.u0().abs(), r.j_star);
    }
}
