//! Hyper-parameter priors and posterior inference.
//!
//! All positive hyper-parameters are handled in log space. The coordinate
//! vector is laid out as `[ln σ…, ln β…, ln θ…, ln noise]`.
//!
//! Length scales and the noise variance have priors that are uniform on the
//! log scale. Diffusion rates `β` and order strengths `θ` get the horseshoe
//! prior, whose density has no closed form; we use the usual tight surrogate
//! `p(x) ∝ ln(1 + 2 (τ / x)²)`. Moving those two to log coordinates adds the
//! Jacobian `ln x` to the target.

mod cache;
mod map;
pub mod slice;

pub use cache::CachedTarget;
pub use map::{fit_map, MapConfig};
pub use slice::{slice_sample, Draw, SliceConfig};

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::gp::{log_evidence, standardization};
use crate::kernel::{KernelHypers, KernelKind, PairFeatures, JITTER};
use crate::space::{HybridPoint, SpaceSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperPriorSpec {
    /// Support of the log-uniform length-scale prior.
    pub sigma_bounds: (f64, f64),
    /// Global scale of the horseshoe on `β`.
    pub beta_tau: f64,
    /// Global scale of the horseshoe on `θ`.
    pub theta_tau: f64,
    /// Support of the log-uniform noise-variance prior.
    pub noise_bounds: (f64, f64),
    /// Numerical range for horseshoe-distributed parameters. The surrogate
    /// density is proper on `(0, ∞)`; values outside this range carry
    /// negligible mass and only destabilize the Gram matrix.
    pub horseshoe_bounds: (f64, f64),
}

impl Default for HyperPriorSpec {
    fn default() -> Self {
        Self {
            sigma_bounds: (0.01, 10.0),
            beta_tau: 1.0,
            theta_tau: 1.0,
            noise_bounds: (1e-8, 1e-1),
            horseshoe_bounds: (1e-6, 1e3),
        }
    }
}

/// Log of the horseshoe surrogate density, `ln ln(1 + 2 (τ / x)²)`, without
/// its normalizing constant.
pub fn horseshoe_log_density(x: f64, tau: f64) -> f64 {
    if x.is_nan() || x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let r = tau / x;
    (2.0 * r * r).ln_1p().ln()
}

fn log_uniform_log_density(x: f64, (lo, hi): (f64, f64)) -> f64 {
    if x >= lo && x <= hi {
        -(hi.ln() - lo.ln()).ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// Sum of per-parameter log prior densities: log-uniform densities of
/// `ln σ` and `ln noise`, horseshoe densities of `β` and `θ`. Returns `−∞`
/// outside the support.
pub fn log_prior(h: &KernelHypers, priors: &HyperPriorSpec) -> f64 {
    let (hs_lo, hs_hi) = priors.horseshoe_bounds;
    let mut total = 0.0;
    for &s in &h.sigma {
        total += log_uniform_log_density(s, priors.sigma_bounds);
    }
    for &b in &h.beta {
        if !(hs_lo..=hs_hi).contains(&b) {
            return f64::NEG_INFINITY;
        }
        total += horseshoe_log_density(b, priors.beta_tau);
    }
    for &t in &h.theta {
        if !(hs_lo..=hs_hi).contains(&t) {
            return f64::NEG_INFINITY;
        }
        total += horseshoe_log_density(t, priors.theta_tau);
    }
    total += log_uniform_log_density(h.noise_var, priors.noise_bounds);
    total
}

/// Sizes of the blocks in the log-space coordinate vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HyperLayout {
    pub n_sigma: usize,
    pub n_beta: usize,
    pub n_theta: usize,
}

impl HyperLayout {
    pub fn new(spec: &SpaceSpec, kind: KernelKind, max_order: usize) -> Self {
        Self {
            n_sigma: spec.n(),
            n_beta: spec.m(),
            n_theta: match kind {
                KernelKind::Additive => max_order,
                KernelKind::Product => 1,
            },
        }
    }

    pub fn len(&self) -> usize {
        self.n_sigma + self.n_beta + self.n_theta + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn to_coords(&self, h: &KernelHypers) -> Vec<f64> {
        h.sigma
            .iter()
            .chain(&h.beta)
            .chain(&h.theta)
            .chain(std::iter::once(&h.noise_var))
            .map(|v| v.ln())
            .collect()
    }

    pub fn to_hypers(&self, u: &[f64]) -> KernelHypers {
        let (s, rest) = u.split_at(self.n_sigma);
        let (b, rest) = rest.split_at(self.n_beta);
        let (t, rest) = rest.split_at(self.n_theta);
        KernelHypers {
            sigma: s.iter().map(|v| v.exp()).collect(),
            beta: b.iter().map(|v| v.exp()).collect(),
            theta: t.iter().map(|v| v.exp()).collect(),
            noise_var: rest[0].exp(),
        }
    }

    /// Log-space box implied by the priors, per coordinate.
    pub fn bounds(&self, priors: &HyperPriorSpec) -> Vec<(f64, f64)> {
        let ln = |(a, b): (f64, f64)| (a.ln(), b.ln());
        let mut out = vec![ln(priors.sigma_bounds); self.n_sigma];
        out.extend(vec![ln(priors.horseshoe_bounds); self.n_beta + self.n_theta]);
        out.push(ln(priors.noise_bounds));
        out
    }

    /// Jacobian of the horseshoe block under `x = e^u`.
    fn log_jacobian(&self, u: &[f64]) -> f64 {
        u[self.n_sigma..self.n_sigma + self.n_beta + self.n_theta].iter().sum()
    }
}

/// Unnormalized log posterior of the hyper-parameters given a training set,
/// as a function of log-space coordinates.
#[derive(Debug, Clone)]
pub struct HyperProblem {
    spec: SpaceSpec,
    kind: KernelKind,
    layout: HyperLayout,
    priors: HyperPriorSpec,
    features: PairFeatures,
    y: DVector<f64>,
}

impl HyperProblem {
    pub fn new(
        kind: KernelKind,
        spec: &SpaceSpec,
        max_order: usize,
        x: &[HybridPoint],
        y_raw: &[f64],
        priors: HyperPriorSpec,
    ) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::InvalidPoint("at least one training point is required".into()));
        }
        if x.len() != y_raw.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: y_raw.len(),
            });
        }
        if y_raw.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteTargets);
        }
        if max_order == 0 || max_order > spec.dims() {
            return Err(Error::InvalidHypers(format!(
                "max_order must be in [1, {}], got {max_order}",
                spec.dims()
            )));
        }
        for p in x {
            spec.check_point(p)?;
        }
        let (mean, std) = standardization(y_raw);
        Ok(Self {
            spec: spec.clone(),
            kind,
            layout: HyperLayout::new(spec, kind, max_order),
            priors,
            features: PairFeatures::new(x, spec),
            y: DVector::from_iterator(y_raw.len(), y_raw.iter().map(|v| (v - mean) / std)),
        })
    }

    pub fn layout(&self) -> HyperLayout {
        self.layout
    }

    pub fn priors(&self) -> &HyperPriorSpec {
        &self.priors
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn spec(&self) -> &SpaceSpec {
        &self.spec
    }

    pub fn max_order(&self) -> usize {
        self.layout.n_theta
    }

    /// Default starting point for this problem.
    pub fn initial(&self) -> KernelHypers {
        KernelHypers::initial(&self.spec, self.kind, self.max_order())
    }

    /// Log marginal likelihood of the standardized targets.
    pub fn log_likelihood(&self, h: &KernelHypers) -> f64 {
        let gram = self.features.gram(self.kind, h, &self.spec, JITTER);
        log_evidence(gram, &self.y).unwrap_or(f64::NEG_INFINITY)
    }

    /// Log likelihood plus log prior, in the parameter's own coordinates.
    pub fn log_posterior(&self, h: &KernelHypers) -> f64 {
        let lp = log_prior(h, &self.priors);
        if lp == f64::NEG_INFINITY {
            return lp;
        }
        lp + self.log_likelihood(h)
    }

    /// Log posterior density of the log-space coordinates `u`.
    pub fn log_target(&self, u: &[f64]) -> f64 {
        if u.iter().any(|v| !v.is_finite()) {
            return f64::NEG_INFINITY;
        }
        let h = self.layout.to_hypers(u);
        let v = self.log_posterior(&h);
        if v == f64::NEG_INFINITY {
            return v;
        }
        let v = v + self.layout.log_jacobian(u);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    }
}

/// One posterior draw.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperSample {
    pub hypers: KernelHypers,
    /// Unnormalized log posterior in log-space coordinates.
    pub log_posterior: f64,
}

/// Slice-sampled posterior draws, started at `init` (or the problem's
/// default start).
pub fn posterior_samples<R: Rng + ?Sized>(
    problem: &HyperProblem,
    n_samples: usize,
    burn_in: usize,
    init: Option<&KernelHypers>,
    rng: &mut R,
) -> Result<Vec<HyperSample>> {
    let start = init.cloned().unwrap_or_else(|| problem.initial());
    let layout = problem.layout();
    let mut u0 = layout.to_coords(&start);
    // keep warm starts inside the sampler's box
    for (v, (lo, hi)) in u0.iter_mut().zip(layout.bounds(problem.priors())) {
        *v = v.clamp(lo, hi);
    }
    let mut target = CachedTarget::new(problem);
    let draws = slice_sample(
        |u: &[f64]| target.eval(u),
        &u0,
        n_samples,
        burn_in,
        SliceConfig::default(),
        rng,
    )?;
    Ok(draws
        .into_iter()
        .map(|d| HyperSample {
            hypers: layout.to_hypers(&d.x),
            log_posterior: d.log_density,
        })
        .collect())
}
