//! Finite-difference gradient oracle. Lives in the library (not test code)
//! because the selfcheck command and the acceptance suite both call it.

/// Central difference d f / d x_i with step h for every coordinate.
pub fn central_diff(f: &mut dyn FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let fp = f(&probe);
        probe[i] = x[i] - h;
        let fm = f(&probe);
        probe[i] = x[i];
        out.push((fp - fm) / (2.0 * h));
    }
    out
}

/// Max relative error between analytic and reference gradients, with an
/// absolute floor so near-zero entries compare sanely.
pub fn max_rel_err(analytic: &[f64], reference: &[f64]) -> f64 {
    assert_eq!(analytic.len(), reference.len());
    analytic
        .iter()
        .zip(reference)
        .map(|(&a, &r)| (a - r).abs() / a.abs().max(r.abs()).max(1e-6))
        .fold(0.0, f64::max)
}

/// Convenience: FD-check a scalar function of a flat parameter vector
/// against an analytic gradient. Returns the max relative error.
pub fn gradient_check(
    f: &mut dyn FnMut(&[f64]) -> f64,
    x: &[f64],
    analytic: &[f64],
) -> f64 {
    let fd = central_diff(f, x, 1e-5);
    max_rel_err(analytic, &fd)
}
