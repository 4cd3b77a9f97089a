//! Univariate slice sampling with stepping out and shrinkage, applied
//! coordinate by coordinate.

use rand::Rng;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SliceConfig {
    /// Initial bracket width.
    pub width: f64,
    /// Maximum number of width-sized expansions per coordinate update.
    pub max_steps: usize,
}

impl Default for SliceConfig {
    fn default() -> Self {
        Self {
            width: 1.0,
            max_steps: 100,
        }
    }
}

/// Shrinkage attempts before a coordinate update gives up and keeps the
/// current value; only reachable when the target is numerically degenerate.
const MAX_SHRINKS: usize = 200;

/// One state of the chain with its log density.
#[derive(Debug, Clone, PartialEq)]
pub struct Draw {
    pub x: Vec<f64>,
    pub log_density: f64,
}

/// Runs `burn_in + n_samples` full sweeps over the coordinates of `init` and
/// returns the state after each of the last `n_samples` sweeps.
pub fn slice_sample<F, R>(
    mut log_target: F,
    init: &[f64],
    n_samples: usize,
    burn_in: usize,
    cfg: SliceConfig,
    rng: &mut R,
) -> Result<Vec<Draw>>
where
    F: FnMut(&[f64]) -> f64,
    R: Rng + ?Sized,
{
    let mut x = init.to_vec();
    let mut fx = log_target(&x);
    if !fx.is_finite() {
        return Err(Error::NonFiniteLogTarget);
    }
    let mut out = Vec::with_capacity(n_samples);
    for sweep in 0..burn_in + n_samples {
        for j in 0..x.len() {
            fx = update_coordinate(&mut log_target, &mut x, fx, j, cfg, rng);
        }
        if sweep >= burn_in {
            out.push(Draw {
                x: x.clone(),
                log_density: fx,
            });
        }
    }
    Ok(out)
}

fn update_coordinate<F, R>(
    log_target: &mut F,
    x: &mut [f64],
    fx: f64,
    j: usize,
    cfg: SliceConfig,
    rng: &mut R,
) -> f64
where
    F: FnMut(&[f64]) -> f64,
    R: Rng + ?Sized,
{
    let x0 = x[j];
    let level = fx + (1.0 - rng.random::<f64>()).ln();
    let mut eval_at = |x: &mut [f64], v: f64| {
        x[j] = v;
        let f = log_target(x);
        if f.is_nan() {
            f64::NEG_INFINITY
        } else {
            f
        }
    };

    let mut left = x0 - cfg.width * rng.random::<f64>();
    let mut right = left + cfg.width;
    let mut steps_left = (cfg.max_steps as f64 * rng.random::<f64>()).floor() as usize;
    let mut steps_right = cfg.max_steps.saturating_sub(1 + steps_left);
    while steps_left > 0 && eval_at(x, left) > level {
        left -= cfg.width;
        steps_left -= 1;
    }
    while steps_right > 0 && eval_at(x, right) > level {
        right += cfg.width;
        steps_right -= 1;
    }

    for _ in 0..MAX_SHRINKS {
        let candidate = left + rng.random::<f64>() * (right - left);
        let f = eval_at(x, candidate);
        if f > level {
            return f;
        }
        if candidate < x0 {
            left = candidate;
        } else {
            right = candidate;
        }
    }
    x[j] = x0;
    fx
}

/// Two-sided Kolmogorov–Smirnov statistic of `samples` against `cdf`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let f = cdf(v);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}
