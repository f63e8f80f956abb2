use crate::error::{Error, Result};
use crate::numerics::ParamSet;

/// Central-difference gradient of `loss` at `params`, one coordinate at a time.
pub fn finite_diff_grad<F>(loss: F, params: &ParamSet, eps: f64) -> Result<ParamSet>
where
    F: Fn(&ParamSet) -> f64,
{
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::invalid(format!("eps must be > 0, got {eps}")));
    }
    let names: Vec<String> = params.iter().map(|(n, _)| n.to_owned()).collect();
    let mut probe = params.clone();
    let mut grads = params.zeros_like();

    for name in &names {
        let n = probe.get(name).map_or(0, |m| m.len());
        for idx in 0..n {
            let orig = probe.get(name).unwrap().as_slice()[idx];

            probe.get_mut(name).unwrap().as_mut_slice()[idx] = orig + eps;
            let up = loss(&probe);
            probe.get_mut(name).unwrap().as_mut_slice()[idx] = orig - eps;
            let down = loss(&probe);
            probe.get_mut(name).unwrap().as_mut_slice()[idx] = orig;

            if !up.is_finite() || !down.is_finite() {
                return Err(Error::NumericFailure {
                    param: name.clone(),
                    detail: format!("non-finite loss probing coordinate {idx}"),
                });
            }
            grads.get_mut(name).unwrap().as_mut_slice()[idx] = (up - down) / (2.0 * eps);
        }
    }
    Ok(grads)
}

/// Max over coordinates of `|analytic - numeric| / max(1, |numeric|)`.
pub fn max_relative_error(analytic: &ParamSet, numeric: &ParamSet) -> f64 {
    analytic
        .tensors()
        .zip(numeric.tensors())
        .flat_map(|(a, n)| a.as_slice().iter().zip(n.as_slice()))
        .map(|(a, n)| (a - n).abs() / n.abs().max(1.0))
        .fold(0.0, f64::max)
}
