use crate::client::{PredictorParams, PreferenceSignal};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Applies a group predictor to each fused item row: `[p, 1 - p]`.
pub fn map_preference(predictor: &PredictorParams, fused: &Matrix) -> Result<PreferenceSignal> {
    if fused.cols() != predictor.input_dim() {
        return Err(Error::invalid(format!(
            "fused width {} does not match predictor input {}",
            fused.cols(),
            predictor.input_dim()
        )));
    }
    let probs: Vec<f64> = (0..fused.rows()).map(|i| predictor.forward(fused.row(i))).collect();
    Ok(PreferenceSignal::from_probs(&probs))
}
