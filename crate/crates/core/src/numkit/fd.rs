//! Central finite-difference gradient checking.
//!
//! Used by unit tests and the acceptance suite to verify reverse-mode
//! gradients of arbitrary scalar losses over [`MlpParams`].

use super::mlp::{MlpGradients, MlpParams};

/// Default step for central differences in 64-bit arithmetic.
pub const FD_STEP: f64 = 1e-5;

/// Max relative error between `analytic` and central finite differences of
/// `loss` over every parameter of `params`, using step `h`.
///
/// The relative denominator is `max(|analytic|, |numeric|, 1e-8)` so that
/// near-zero gradients compare absolutely.
pub fn max_relative_fd_error<F>(params: &MlpParams, analytic: &MlpGradients, h: f64, loss: F) -> f64
where
    F: Fn(&MlpParams) -> f64,
{
    let mut probe = params.clone();
    let mut max_rel: f64 = 0.0;
    let mut check = |a: f64, numeric: f64| {
        let denom = a.abs().max(numeric.abs()).max(1e-8);
        max_rel = max_rel.max((a - numeric).abs() / denom);
    };
    for li in 0..params.layers().len() {
        let (rows, cols) = (params.layers()[li].w.rows(), params.layers()[li].w.cols());
        for r in 0..rows {
            for c in 0..cols {
                let orig = probe.layers()[li].w.get(r, c);
                probe.layers_mut()[li].w.set(r, c, orig + h);
                let lp = loss(&probe);
                probe.layers_mut()[li].w.set(r, c, orig - h);
                let lm = loss(&probe);
                probe.layers_mut()[li].w.set(r, c, orig);
                check(analytic.layers[li].dw.get(r, c), (lp - lm) / (2.0 * h));
            }
        }
        for o in 0..params.layers()[li].b.len() {
            let orig = probe.layers()[li].b[o];
            probe.layers_mut()[li].b[o] = orig + h;
            let lp = loss(&probe);
            probe.layers_mut()[li].b[o] = orig - h;
            let lm = loss(&probe);
            probe.layers_mut()[li].b[o] = orig;
            check(analytic.layers[li].db[o], (lp - lm) / (2.0 * h));
        }
    }
    max_rel
}

/// Convenience check for the linear functional `upstream . output`.
pub fn fd_error_linear_functional(params: &MlpParams, input: &[f64], upstream: &[f64]) -> f64 {
    let analytic = params.gradients(input, upstream);
    max_relative_fd_error(params, &analytic, FD_STEP, |p| {
        p.forward(input)
            .iter()
            .zip(upstream)
            .map(|(y, u)| y * u)
            .sum()
    })
}
