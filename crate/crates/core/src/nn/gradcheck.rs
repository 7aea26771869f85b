//! Central finite differences, the reference every analytic gradient is checked against.

use super::{GradBundle, Mlp};

fn central<F: FnMut(f64) -> f64>(mut f: F, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Central-difference gradient of `loss` with respect to every parameter of `net`.
pub fn finite_diff_grad<F>(mut loss: F, net: &Mlp, h: f64) -> GradBundle
where
    F: FnMut(&Mlp) -> f64,
{
    assert!(h > 0.0, "step must be positive");
    let mut probe = net.clone();
    let mut grad = vec![0.0; net.num_params()];
    for (i, g) in grad.iter_mut().enumerate() {
        let orig = probe.params()[i];
        *g = central(
            |v| {
                probe.params_mut()[i] = v;
                loss(&probe)
            },
            orig,
            h,
        );
        probe.params_mut()[i] = orig;
    }
    GradBundle(grad)
}

/// Central-difference gradient of `loss` over a raw parameter slice.
pub fn finite_diff_slice<F>(mut loss: F, params: &[f64], h: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    assert!(h > 0.0, "step must be positive");
    let mut probe = params.to_vec();
    (0..params.len())
        .map(|i| {
            let orig = probe[i];
            let g = central(
                |v| {
                    probe[i] = v;
                    loss(&probe)
                },
                orig,
                h,
            );
            probe[i] = orig;
            g
        })
        .collect()
}

/// Largest elementwise `|a - n| / max(|a|, |n|, floor)`.
///
/// `floor` keeps entries that are zero up to rounding from dominating the ratio.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}
