//! Analytic derivatives against central differences on a partly degraded
//! IEEE 9-bus state, with a soft line-state function.

use gridcascade::cascade::CascadeModel;
use gridcascade::network::cases;
use gridcascade::sensitivity::{check_gradients, step_jacobian};
use gridcascade::CascadeConfig;

fn main() {
    let net = cases::ieee9();
    let model = CascadeModel::new(&net, &CascadeConfig::new(8.0, 9)).unwrap();
    let mut y = net.nominal_susceptances();
    y[1] *= 0.3;
    let c = check_gradients(&model, &y, 1e-6).unwrap();
    println!("{c:#?}");
    let j = step_jacobian(&model, &y).unwrap();
    println!("step Jacobian diagonal: {:.4}", j.matrix.diagonal().transpose());
}
