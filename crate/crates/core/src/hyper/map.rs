//! Maximum-a-posteriori hyper-parameters by coordinate-wise golden-section
//! search in log space, from several starting points.

use rand::Rng;

use super::{CachedTarget, HyperProblem, HyperSample};
use crate::kernel::KernelHypers;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapConfig {
    /// Number of starting points. The first is the warm start when given.
    pub n_starts: usize,
    /// Maximum coordinate sweeps per start.
    pub max_rounds: usize,
    /// Half-width, in log units, of the bracket searched around the current
    /// coordinate value.
    pub bracket: f64,
    /// Bracket length at which a line search stops.
    pub tol: f64,
    /// A start stops when a sweep improves the log posterior by less than this.
    pub min_improvement: f64,
}

impl Default for MapConfig {
    fn default() -> Self {
        Self {
            n_starts: 8,
            max_rounds: 50,
            bracket: 2.0,
            tol: 0.05,
            min_improvement: 1e-3,
        }
    }
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section maximization of `f` on `[lo, hi]`, returning the best
/// point seen (including `x0`) and its value.
fn golden_section(
    mut f: impl FnMut(f64) -> f64,
    x0: f64,
    f0: f64,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> (f64, f64) {
    let (mut best_x, mut best_f) = (x0, f0);
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let mut fc = f(c);
    let mut fd = f(d);
    while hi - lo > tol {
        if fc >= fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INV_PHI * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INV_PHI * (hi - lo);
            fd = f(d);
        }
        for (x, v) in [(c, fc), (d, fd)] {
            if v > best_f {
                best_x = x;
                best_f = v;
            }
        }
    }
    (best_x, best_f)
}

/// One golden-section line search along every coordinate in turn.
fn coordinate_sweep(
    target: &mut CachedTarget<'_>,
    bounds: &[(f64, f64)],
    cfg: &MapConfig,
    u: &mut [f64],
    fu: &mut f64,
) {
    for j in 0..u.len() {
        let (lo, hi) = bounds[j];
        let a = (u[j] - cfg.bracket).max(lo);
        let b = (u[j] + cfg.bracket).min(hi);
        let mut probe = u.to_vec();
        let (x, v) = golden_section(
            |t| {
                probe[j] = t;
                target.eval(&probe)
            },
            u[j],
            *fu,
            a,
            b,
            cfg.tol,
        );
        u[j] = x;
        *fu = v;
    }
}

/// Maximizes the log posterior of `problem`. Additional starts are drawn
/// uniformly from the log-space box of the priors. Every start gets one
/// coordinate sweep; the best of them is then refined until a sweep gains
/// less than `min_improvement` or `max_rounds` sweeps are done.
pub fn fit_map<R: Rng + ?Sized>(
    problem: &HyperProblem,
    warm: Option<&KernelHypers>,
    cfg: MapConfig,
    rng: &mut R,
) -> Result<HyperSample> {
    let layout = problem.layout();
    let bounds = layout.bounds(problem.priors());
    let first = warm.cloned().unwrap_or_else(|| problem.initial());
    let mut first_u = layout.to_coords(&first);
    for (v, &(lo, hi)) in first_u.iter_mut().zip(&bounds) {
        *v = v.clamp(lo, hi);
    }

    let mut target = CachedTarget::new(problem);
    // one sweep from every start, then the remaining rounds from the best
    let mut best: Option<(Vec<f64>, f64, f64)> = None;
    for start in 0..cfg.n_starts.max(1) {
        let mut u = if start == 0 {
            first_u.clone()
        } else {
            bounds.iter().map(|&(lo, hi)| rng.random_range(lo..=hi)).collect()
        };
        let mut fu = target.eval(&u);
        if !fu.is_finite() {
            continue;
        }
        let before = fu;
        coordinate_sweep(&mut target, &bounds, &cfg, &mut u, &mut fu);
        if best.as_ref().is_none_or(|(_, bf, _)| fu > *bf) {
            best = Some((u, fu, fu - before));
        }
    }
    let (mut u, mut fu, mut gain) = best.ok_or(Error::NonFiniteLogTarget)?;
    for _ in 1..cfg.max_rounds {
        if gain < cfg.min_improvement {
            break;
        }
        let before = fu;
        coordinate_sweep(&mut target, &bounds, &cfg, &mut u, &mut fu);
        gain = fu - before;
    }
    Ok(HyperSample {
        hypers: layout.to_hypers(&u),
        log_posterior: fu,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn golden_section_finds_parabola_peak() {
        let (x, v) = golden_section(|t| -(t - 0.3).powi(2), 0.0, -0.09, -2.0, 2.0, 1e-6);
        assert_abs_diff_eq!(x, 0.3, epsilon = 1e-5);
        assert!(v <= 0.0 && v > -1e-9);
    }

    #[test]
    fn golden_section_never_worse_than_start() {
        // peak outside the bracket: the start value must be kept if better
        let (x, v) = golden_section(|t| -(t - 5.0).powi(2), 1.0, -16.0, -1.0, 1.0, 1e-3);
        assert!(v >= -16.0);
        assert!(x <= 1.0);
    }
}
