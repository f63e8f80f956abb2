use crate::engine::{RoundTrace, Schedule};
use crate::error::{Error, Result};
use crate::rng::{stream, Stream};

/// `ceil(beta * n)` distinct client ids, sorted, drawn uniformly for `round`.
pub fn sample_clients(n: usize, beta: f64, round: usize, seed: u64) -> Result<Vec<usize>> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::invalid(format!("sampling ratio {beta} not in (0, 1]")));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    // The small slack keeps exact products such as 0.2 * 200 from rounding up.
    let count = ((beta * n as f64 - 1e-9).ceil() as usize).clamp(1, n);
    let mut rng = stream(seed, Stream::Sampling, &[round as u64]);
    let mut ids = rand::seq::index::sample(&mut rng, n, count).into_vec();
    ids.sort_unstable();
    Ok(ids)
}

/// Knobs shared by the smoothing and warm-up schedules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleParams {
    pub lambda_base: f64,
    pub total_rounds: usize,
    pub smoothing: f64,
    pub warmup: f64,
}

fn ramp(t: usize, p: &ScheduleParams) -> f64 {
    let warm = (p.warmup * p.total_rounds as f64).ceil().max(1.0);
    p.lambda_base * (t as f64 / warm).min(1.0)
}

/// Distillation weight for round `t >= 1` given the traces of rounds
/// `1..t`. The previous coefficient is the one recorded in the last trace.
pub fn lambda_schedule(strategy: Schedule, t: usize, history: &[RoundTrace], p: &ScheduleParams) -> Result<f64> {
    if t == 0 {
        return Err(Error::invalid("rounds are numbered from 1"));
    }
    let prev = history.last();
    let prev_lambda = prev.map_or(0.0, |r| r.lambda);
    let lambda = match strategy {
        Schedule::ScaleAlign => match prev {
            Some(r) => match r.mean_dis_loss {
                Some(dis) => r.mean_rec_loss / (dis + 1e-8),
                None => 0.0,
            },
            None => 0.0,
        },
        Schedule::Smooth => p.smoothing * prev_lambda + (1.0 - p.smoothing) * p.lambda_base,
        Schedule::Progressive => ramp(t, p),
        Schedule::Ours => p.smoothing * prev_lambda + (1.0 - p.smoothing) * ramp(t, p),
    };
    Ok(lambda.max(0.0))
}
