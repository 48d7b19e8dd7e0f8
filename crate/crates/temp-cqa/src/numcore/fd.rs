//! Central finite differences over a parameter store.
//!
//! Used by the test suites as an oracle for the tape's reverse-mode
//! gradients; it only evaluates forward closures and never touches the
//! backward pass.

use super::params::ParameterStore;
use super::scalar::Scalar;
use super::tensor::Tensor;

/// Central-difference gradient of `f` with respect to one named parameter.
pub fn grad_central<F: Scalar>(
    store: &ParameterStore<F>,
    name: &str,
    h: f64,
    f: &mut dyn FnMut(&ParameterStore<F>) -> f64,
) -> Tensor<F> {
    let base = store.value(name).expect("parameter exists").clone();
    let (rows, cols) = base.shape();
    let mut scratch = store.clone();
    let mut grad = Tensor::zeros(rows, cols);
    let step = F::from_f64_lossy(h);
    for r in 0..rows {
        for c in 0..cols {
            let orig = base.get(r, c);
            let mut plus = base.clone();
            plus.set(r, c, orig + step);
            scratch.set_value(name, plus).unwrap();
            let f_plus = f(&scratch);

            let mut minus = base.clone();
            minus.set(r, c, orig - step);
            scratch.set_value(name, minus).unwrap();
            let f_minus = f(&scratch);

            grad.set(r, c, F::from_f64_lossy((f_plus - f_minus) / (2.0 * h)));
        }
    }
    grad
}

/// The largest guarded relative error between an analytic gradient and its
/// central-difference estimate, across every coordinate of every parameter.
///
/// The denominator is floored so coordinates whose true gradient is zero are
/// compared on an absolute scale.
pub fn max_relative_error<F: Scalar>(
    store: &ParameterStore<F>,
    analytic: &dyn Fn(&str) -> Tensor<F>,
    h: f64,
    f: &mut dyn FnMut(&ParameterStore<F>) -> f64,
) -> f64 {
    let names: Vec<String> = store.names().map(|s| s.to_string()).collect();
    let mut worst = 0.0f64;
    for name in &names {
        let got = analytic(name);
        let want = grad_central(store, name, h, f);
        assert_eq!(got.shape(), want.shape(), "gradient shape for `{name}`");
        for (a, b) in got.data().iter().zip(want.data().iter()) {
            let a = a.to_f64().unwrap();
            let b = b.to_f64().unwrap();
            let denom = a.abs().max(b.abs()).max(1e-4);
            let rel = (a - b).abs() / denom;
            if rel > worst {
                worst = rel;
            }
        }
    }
    worst
}
