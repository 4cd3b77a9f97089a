//! Expected improvement and its average over posterior hyper-parameter
//! samples.
//!
//! The internal convention is maximization: the runner negates objectives
//! before they reach a model.

use nalgebra::DVector;

use crate::gp::GPModel;
use crate::kernel::{self, KernelKind, Scratch};
use crate::space::{HybridPoint, SpaceSpec};
use crate::{Error, Result};

const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

pub fn normal_pdf(z: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * z * z).exp()
}

pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Expected improvement of a Gaussian `N(mean, variance)` over `best`.
pub fn expected_improvement(mean: f64, variance: f64, best: f64) -> Result<f64> {
    if variance < 0.0 || variance.is_nan() {
        return Err(Error::InvalidHypers(format!(
            "predictive variance must be non-negative, got {variance}"
        )));
    }
    Ok(ei_unchecked(mean, variance, best))
}

#[inline]
fn ei_unchecked(mean: f64, variance: f64, best: f64) -> f64 {
    let gain = mean - best;
    let s = variance.sqrt();
    if s == 0.0 {
        return gain.max(0.0);
    }
    let z = gain / s;
    (gain * normal_cdf(z) + s * normal_pdf(z)).max(0.0)
}

/// Models fitted to the same data, one per hyper-parameter sample, and the
/// best value observed so far.
#[derive(Debug, Clone)]
pub struct AcquisitionContext {
    models: Vec<GPModel>,
    incumbent_best: f64,
}

impl AcquisitionContext {
    pub fn new(models: Vec<GPModel>, incumbent_best: f64) -> Result<Self> {
        let Some(first) = models.first() else {
            return Err(Error::InvalidHypers("acquisition needs at least one model".into()));
        };
        if models.iter().any(|m| m.len() != first.len()) {
            return Err(Error::InvalidHypers(
                "all models must share the same training data".into(),
            ));
        }
        Ok(Self {
            models,
            incumbent_best,
        })
    }

    pub fn models(&self) -> &[GPModel] {
        &self.models
    }

    pub fn incumbent_best(&self) -> f64 {
        self.incumbent_best
    }

    pub fn space(&self) -> &SpaceSpec {
        self.models[0].space()
    }

    /// Average expected improvement at `x`.
    pub fn value(&self, x: &HybridPoint) -> f64 {
        let mut kstar = Vec::new();
        let total: f64 = self
            .models
            .iter()
            .map(|model| {
                let mut scratch = Scratch::new(model.hypers().max_order());
                model.cross_covariance(x, &mut kstar, &mut scratch);
                let (m, v) = model.predict_from_cross(&kstar);
                let (m, v) = model.destandardize(m, v);
                ei_unchecked(m, v, self.incumbent_best)
            })
            .sum();
        total / self.models.len() as f64
    }

    /// Average expected improvement at every Hamming neighbor of `x`, in
    /// the order of [`SpaceSpec::hamming_neighbors`].
    ///
    /// Changing one discrete coordinate changes a single base value per
    /// training point, and that value takes only two levels, so every
    /// neighbor sharing a variable costs `O(N)` after `O(N²)` shared work.
    pub fn neighbor_values(&self, x: &HybridPoint) -> Vec<f64> {
        let spec = self.space();
        let mut out = vec![0.0; spec.neighbor_count()];
        for model in &self.models {
            accumulate_neighbor_ei(model, x, self.incumbent_best, &mut out);
        }
        let k = self.models.len() as f64;
        out.iter_mut().for_each(|v| *v /= k);
        out
    }
}

fn accumulate_neighbor_ei(model: &GPModel, x: &HybridPoint, best: f64, out: &mut [f64]) {
    let spec = model.space();
    let h = model.hypers();
    let kind = model.kind();
    let params = model.base_params();
    let train = model.inputs();
    let n_train = train.len();
    let dims = spec.dims();
    let p = h.max_order();
    let linv = model.chol_inv();
    let alpha = model.alpha();

    // base values and elementary polynomials for every training point
    let mut base = vec![0.0; n_train * dims];
    let mut elem = vec![0.0; n_train * (p + 1)];
    let mut s = vec![0.0; p];
    for (i, xi) in train.iter().enumerate() {
        let b = &mut base[i * dims..(i + 1) * dims];
        params.fill(x, xi, b);
        if kind == KernelKind::Additive {
            kernel::elementary_into(b, &mut s, &mut elem[i * (p + 1)..(i + 1) * (p + 1)]);
        }
    }

    let mut loo = vec![0.0; p + 1];
    let mut a = DVector::zeros(n_train);
    let mut bvec = vec![0.0; n_train];
    let mut slot = 0;
    for (j, var) in spec.discrete.iter().enumerate() {
        let off = params.discrete_off[j];
        for i in 0..n_train {
            let (ai, bi) = kernel::split_dimension(
                kind,
                &base[i * dims..(i + 1) * dims],
                &h.theta,
                &elem[i * (p + 1)..(i + 1) * (p + 1)],
                j,
                &mut loo,
            );
            // covariance when training point i disagrees with the candidate
            a[i] = ai + off * bi;
            bvec[i] = bi;
        }
        let u = linv * &a;
        let mean_base = alpha.dot(&a);
        // per-category corrections for training points that agree
        let mut w = vec![DVector::zeros(n_train); var.arity];
        let mut mean_corr = vec![0.0; var.arity];
        for (i, xi) in train.iter().enumerate() {
            let c = xi.discrete[j];
            let scale = (1.0 - off) * bvec[i];
            mean_corr[c] += alpha[i] * scale;
            let wc = &mut w[c];
            for r in i..n_train {
                wc[r] += scale * linv[(r, i)];
            }
        }
        for c in 0..var.arity {
            if c == x.discrete[j] {
                continue;
            }
            let mean = mean_base + mean_corr[c];
            let quad = (&u + &w[c]).norm_squared();
            let var_latent = model.latent_variance(quad);
            let (m, v) = model.destandardize(mean, var_latent);
            out[slot] += ei_unchecked(m, v, best);
            slot += 1;
        }
    }
}

/// Average expected improvement at `x` over the context's models.
pub fn marginalized_af(ctx: &AcquisitionContext, x: &HybridPoint) -> f64 {
    ctx.value(x)
}
