mod common;

use common::*;
use qexp::nn::MlpParams;
use qexp::oracles::{finite_diff_gradient, max_relative_error};

/// Backprop against central differences for parameters and inputs on 100
/// random 2×8×8×2 networks.
#[test]
fn backprop_matches_finite_differences() {
    let mut rng = rng(300);
    for _ in 0..100 {
        let net = MlpParams::init(&[2, 8, 8, 2], &mut rng).unwrap();
        let x = [uniform(&mut rng, -2.0, 2.0), uniform(&mut rng, -2.0, 2.0)];
        let gy = [uniform(&mut rng, -1.0, 1.0), uniform(&mut rng, -1.0, 1.0)];
        let (_, tape) = net.forward(&x).unwrap();
        let (g, gx) = net.backward(&tape, &gy).unwrap();
        let objective = |n: &MlpParams, input: &[f64]| {
            let y = n.predict(input).unwrap();
            y[0] * gy[0] + y[1] * gy[1]
        };
        let sizes = net.sizes().to_vec();
        let fd = finite_diff_gradient(
            |p| objective(&MlpParams::from_parts(&sizes, p.to_vec()).unwrap(), &x),
            net.as_slice(),
            1e-6,
        )
        .unwrap();
        let e = max_relative_error(&g, &fd, 1e-3);
        assert!(e < 1e-6, "params: {e}");
        let fdx = finite_diff_gradient(|input| objective(&net, input), &x, 1e-6).unwrap();
        assert!(max_relative_error(&gx, &fdx, 1e-3) < 1e-6);
    }
}

#[test]
fn outputs_finite_for_bounded_inputs() {
    let mut rng = rng(301);
    for _ in 0..200 {
        let net = MlpParams::init(&[5, 16, 16, 3], &mut rng).unwrap();
        let x: Vec<f64> = (0..5).map(|_| uniform(&mut rng, -10.0, 10.0)).collect();
        assert!(net.predict(&x).unwrap().iter().all(|v| v.is_finite()));
    }
}
