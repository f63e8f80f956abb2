use rand::distr::Open01;
use rand::Rng;

use crate::client::{ClientState, ClientUpdate};
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// Elementwise clamp bound applied before noising; gives unit sensitivity.
pub const LDP_CLAMP: f64 = 0.5;

/// Draws from `Laplace(0, scale)` by inverting the CDF.
pub fn sample_laplace<R: Rng>(rng: &mut R, scale: f64) -> f64 {
    let u: f64 = rng.sample::<f64, _>(Open01) - 0.5;
    -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

/// Per-coordinate privacy budget for Laplace scale `delta` under unit
/// sensitivity; infinite when no noise is added.
pub fn privacy_budget(delta: f64) -> f64 {
    if delta == 0.0 {
        f64::INFINITY
    } else {
        1.0 / delta
    }
}

/// Packages the shared components for upload. With `delta > 0` every
/// coordinate is clamped to `[-0.5, 0.5]` and perturbed with `Laplace(delta)`.
pub fn make_update(state: &ClientState, delta: f64, seed: u64) -> Result<ClientUpdate> {
    if !delta.is_finite() || delta < 0.0 {
        return Err(Error::invalid(format!("LDP scale must be finite and >= 0, got {delta}")));
    }
    let mut update = ClientUpdate {
        user_id: state.user_id,
        item_embeddings: state.item_embeddings.clone(),
        predictor: state.predictor.clone(),
        sample_count: state.train_items.len(),
    };
    if delta > 0.0 {
        let mut rng = rng_from_seed(seed);
        let mut perturb = |x: &mut f64| {
            *x = x.clamp(-LDP_CLAMP, LDP_CLAMP) + sample_laplace(&mut rng, delta);
        };
        update.item_embeddings.as_mut_slice().iter_mut().for_each(&mut perturb);
        let p = &mut update.predictor;
        p.w1.as_mut_slice().iter_mut().for_each(&mut perturb);
        p.b1.iter_mut().for_each(&mut perturb);
        p.w2.iter_mut().for_each(&mut perturb);
        perturb(&mut p.b2);
    }
    Ok(update)
}
