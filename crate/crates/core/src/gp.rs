//! Exact Gaussian-process regression over hybrid points.
//!
//! Targets are standardized inside [`GPModel::fit`] (zero mean, unit
//! variance) and the prior mean is zero on that scale. Predictions are
//! reported in the original units.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::kernel::{self, BaseParams, KernelHypers, KernelKind, PairFeatures, Scratch, JITTER};
use crate::space::{HybridPoint, SpaceSpec};
use crate::{Error, Result};

/// Smallest standard deviation used when standardizing targets.
pub const Y_STD_FLOOR: f64 = 1e-8;

/// Largest jitter tried before a Cholesky failure becomes an error.
pub const MAX_JITTER: f64 = 1e-2;

/// Iterative-refinement steps applied to the GP weights.
const REFINEMENT_STEPS: usize = 2;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone)]
pub struct GPModel {
    space: SpaceSpec,
    kind: KernelKind,
    hypers: KernelHypers,
    x: Vec<HybridPoint>,
    /// Standardized targets.
    y: DVector<f64>,
    y_mean: f64,
    y_std: f64,
    /// Lower Cholesky factor of the jittered Gram matrix.
    chol: DMatrix<f64>,
    /// Inverse of `chol`, lower triangular.
    chol_inv: DMatrix<f64>,
    alpha: DVector<f64>,
    /// `yᵀ (K + jitter)⁻¹ y`, the data-fit term of the evidence.
    fit_term: f64,
    jitter: f64,
    params: BaseParams,
    self_cov: f64,
}

/// Mean and standard deviation with the floor applied.
pub fn standardization(y: &[f64]) -> (f64, f64) {
    let n = y.len() as f64;
    let mean = y.iter().sum::<f64>() / n;
    let var = y.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt().max(Y_STD_FLOOR))
}

/// Cholesky factorization with jitter escalated ×10 from [`JITTER`] up to
/// [`MAX_JITTER`]. `gram` must already carry [`JITTER`] on its diagonal.
pub fn cholesky_with_escalation(gram: DMatrix<f64>) -> Result<(Cholesky<f64, Dyn>, f64)> {
    let mut jitter = JITTER;
    let mut g = gram;
    loop {
        if let Some(c) = Cholesky::new(g.clone()) {
            return Ok((c, jitter));
        }
        let next = jitter * 10.0;
        if next > MAX_JITTER * (1.0 + 1e-9) {
            return Err(Error::NotPositiveDefinite { jitter });
        }
        for i in 0..g.nrows() {
            g[(i, i)] += next - jitter;
        }
        jitter = next;
    }
}

/// Fits the additive-kernel GP.
pub fn fit(
    x: &[HybridPoint],
    y_raw: &[f64],
    h: &KernelHypers,
    spec: &SpaceSpec,
) -> Result<GPModel> {
    GPModel::fit(KernelKind::Additive, spec, x, y_raw, h)
}

impl GPModel {
    pub fn fit(
        kind: KernelKind,
        spec: &SpaceSpec,
        x: &[HybridPoint],
        y_raw: &[f64],
        h: &KernelHypers,
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
        h.validate(spec)?;
        if kind == KernelKind::Product && h.theta.len() != 1 {
            return Err(Error::InvalidHypers("product kernel takes exactly one θ".into()));
        }
        for p in x {
            spec.check_point(p)?;
        }
        let (y_mean, y_std) = standardization(y_raw);
        let y = DVector::from_iterator(y_raw.len(), y_raw.iter().map(|v| (v - y_mean) / y_std));
        let features = PairFeatures::new(x, spec);
        let gram = features.gram(kind, h, spec, JITTER);
        Self::from_factorization(kind, spec, x, y, y_mean, y_std, h, gram)
    }

    #[allow(clippy::too_many_arguments)]
    fn from_factorization(
        kind: KernelKind,
        spec: &SpaceSpec,
        x: &[HybridPoint],
        y: DVector<f64>,
        y_mean: f64,
        y_std: f64,
        h: &KernelHypers,
        gram: DMatrix<f64>,
    ) -> Result<Self> {
        let (chol, jitter) = cholesky_with_escalation(gram.clone())?;
        let alpha0 = chol.solve(&y);
        let fit_term = y.dot(&alpha0);
        // The jitter is numerical only, so the weights target the system
        // without it; the jittered factor serves as a preconditioner. Each
        // step shrinks the error along an eigenvalue λ by jitter / (λ +
        // jitter), and a fixed small number of steps bounds the growth of
        // near-null components.
        let mut alpha = alpha0;
        for _ in 0..REFINEMENT_STEPS {
            let residual = &y - &gram * &alpha + &alpha * JITTER;
            alpha += chol.solve(&residual);
        }
        let l = chol.unpack();
        let n = l.nrows();
        let chol_inv = l
            .solve_lower_triangular(&DMatrix::identity(n, n))
            .expect("Cholesky factor has a positive diagonal");
        Ok(Self {
            space: spec.clone(),
            kind,
            hypers: h.clone(),
            x: x.to_vec(),
            y,
            y_mean,
            y_std,
            chol: l,
            chol_inv,
            alpha,
            fit_term,
            jitter,
            params: BaseParams::new(h, spec),
            self_cov: kernel::self_covariance(kind, spec.dims(), &h.theta),
        })
    }

    pub fn space(&self) -> &SpaceSpec {
        &self.space
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn hypers(&self) -> &KernelHypers {
        &self.hypers
    }

    pub fn inputs(&self) -> &[HybridPoint] {
        &self.x
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn y_mean(&self) -> f64 {
        self.y_mean
    }

    pub fn y_std(&self) -> f64 {
        self.y_std
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn chol(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn chol_inv(&self) -> &DMatrix<f64> {
        &self.chol_inv
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    pub(crate) fn base_params(&self) -> &BaseParams {
        &self.params
    }

    /// Prior covariance `k(x, x)` on the standardized scale (no noise).
    pub fn prior_variance(&self) -> f64 {
        self.self_cov
    }

    /// The jittered Gram matrix the model was factorized from.
    pub fn gram(&self) -> DMatrix<f64> {
        let mut g = PairFeatures::new(&self.x, &self.space).gram(self.kind, &self.hypers, &self.space, JITTER);
        for i in 0..g.nrows() {
            g[(i, i)] += self.jitter - JITTER;
        }
        g
    }

    /// Covariances between `x` and every training input (standardized scale).
    pub fn cross_covariance(&self, x: &HybridPoint, out: &mut Vec<f64>, scratch: &mut Scratch) {
        let mut base = vec![0.0; self.space.dims()];
        out.clear();
        for xi in &self.x {
            self.params.fill(x, xi, &mut base);
            out.push(kernel::combine(self.kind, &base, &self.hypers.theta, scratch));
        }
    }

    /// Standardized-scale predictive mean and latent variance from a
    /// precomputed cross-covariance vector.
    pub fn predict_from_cross(&self, kstar: &[f64]) -> (f64, f64) {
        let n = kstar.len();
        let mean: f64 = kstar.iter().zip(self.alpha.iter()).map(|(a, b)| a * b).sum();
        // ‖L⁻¹ k*‖² by forward substitution.
        let mut v = vec![0.0; n];
        let mut quad = 0.0;
        for i in 0..n {
            let mut acc = kstar[i];
            for j in 0..i {
                acc -= self.chol[(i, j)] * v[j];
            }
            v[i] = acc / self.chol[(i, i)];
            quad += v[i] * v[i];
        }
        (mean, self.latent_variance(quad))
    }

    /// Latent variance given `‖L⁻¹ k*‖²`. The diagonal jitter behaves like
    /// observation noise of the same size, which bounds the variance at a
    /// training input by the jitter; that amount is removed so noiseless
    /// models report zero variance at their data.
    #[inline]
    pub fn latent_variance(&self, quad: f64) -> f64 {
        (self.self_cov - quad - self.jitter).max(0.0)
    }

    /// Converts standardized-scale `(mean, variance)` to original units.
    #[inline]
    pub fn destandardize(&self, mean: f64, var: f64) -> (f64, f64) {
        (self.y_mean + self.y_std * mean, var * self.y_std * self.y_std)
    }

    /// Predictive mean and variance of the latent function at `x`, in
    /// original units. The variance is clamped at zero.
    pub fn predict(&self, x: &HybridPoint) -> (f64, f64) {
        let mut kstar = Vec::with_capacity(self.x.len());
        self.cross_covariance(x, &mut kstar, &mut Scratch::new(self.hypers.max_order()));
        let (m, v) = self.predict_from_cross(&kstar);
        self.destandardize(m, v)
    }

    /// Gaussian evidence of the standardized targets.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.y.len() as f64;
        let fit = self.fit_term;
        let logdet: f64 = (0..self.chol.nrows()).map(|i| self.chol[(i, i)].ln()).sum();
        -0.5 * fit - logdet - 0.5 * n * LN_2PI
    }
}

/// Log evidence of standardized targets `y` under a prebuilt jittered Gram
/// matrix, or `None` when the matrix is not positive definite.
pub fn log_evidence(gram: DMatrix<f64>, y: &DVector<f64>) -> Option<f64> {
    let chol = Cholesky::new(gram)?;
    let alpha = chol.solve(y);
    let l = chol.l_dirty();
    let logdet: f64 = (0..l.nrows()).map(|i| l[(i, i)].ln()).sum();
    Some(-0.5 * y.dot(&alpha) - logdet - 0.5 * y.len() as f64 * LN_2PI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench;
    use crate::rng;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn hybrid_spec() -> SpaceSpec {
        SpaceSpec::from_parts(&[3, 2], &[(0.0, 1.0), (0.0, 1.0)])
    }

    fn random_hypers<R: Rng>(spec: &SpaceSpec, r: &mut R, noise: f64) -> KernelHypers {
        KernelHypers {
            sigma: (0..spec.n()).map(|_| r.random_range(0.2..2.0)).collect(),
            beta: (0..spec.m()).map(|_| r.random_range(0.1..2.0)).collect(),
            theta: (0..spec.dims()).map(|_| r.random_range(0.2..1.0)).collect(),
            noise_var: noise,
        }
    }

    #[test]
    fn single_point_interpolation() {
        let spec = hybrid_spec();
        let mut r = rng::seeded(1);
        let h = random_hypers(&spec, &mut r, 0.0);
        let x = spec.sample_uniform(&mut r);
        let model = fit(std::slice::from_ref(&x), &[3.25], &h, &spec).unwrap();
        let (m, v) = model.predict(&x);
        assert_abs_diff_eq!(m, 3.25, epsilon = 1e-6);
        assert!(v >= 0.0);
    }

    #[test]
    fn constant_targets_give_constant_mean() {
        let spec = hybrid_spec();
        let mut r = rng::seeded(2);
        let h = random_hypers(&spec, &mut r, 1e-4);
        let xs: Vec<_> = (0..8).map(|_| spec.sample_uniform(&mut r)).collect();
        let model = fit(&xs, &[-7.5; 8], &h, &spec).unwrap();
        for _ in 0..20 {
            let (m, _) = model.predict(&spec.sample_uniform(&mut r));
            assert_abs_diff_eq!(m, -7.5, epsilon = 1e-9);
        }
    }

    #[test]
    fn cholesky_reconstructs_gram_on_sphere_data() {
        let b = bench::lookup("mixint_sphere").unwrap();
        let mut r = rng::seeded(3);
        let xs: Vec<_> = (0..30).map(|_| b.spec.sample_uniform(&mut r)).collect();
        let ys: Vec<f64> = xs.iter().map(|x| b.evaluate_normalized(x).unwrap()).collect();
        let h = KernelHypers::initial(&b.spec, KernelKind::Additive, b.spec.dims());
        let model = fit(&xs, &ys, &h, &b.spec).unwrap();
        let recon = model.chol() * model.chol().transpose();
        assert!((recon - model.gram()).abs().max() < 1e-8);
    }

    #[test]
    fn noiseless_training_points_are_reproduced() {
        let spec = hybrid_spec();
        let mut r = rng::seeded(4);
        let h = random_hypers(&spec, &mut r, 0.0);
        let xs: Vec<_> = (0..12).map(|_| spec.sample_uniform(&mut r)).collect();
        let ys: Vec<f64> = (0..12).map(|_| r.random_range(-5.0..5.0)).collect();
        let model = fit(&xs, &ys, &h, &spec).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            let (m, v) = model.predict(x);
            assert_abs_diff_eq!(m, *y, epsilon = 1e-6);
            assert!(v <= model.y_std().powi(2) * h.noise_var + 1e-6);
        }
    }

    #[test]
    fn variance_reverts_to_prior_far_away() {
        let spec = SpaceSpec::from_parts(&[], &[(0.0, 1.0)]);
        let h = KernelHypers {
            sigma: vec![0.01],
            beta: vec![],
            theta: vec![0.8],
            noise_var: 0.0,
        };
        let xs = vec![HybridPoint::new(vec![], vec![-1.0])];
        let model = fit(&xs, &[1.0], &h, &spec).unwrap();
        let (_, v) = model.predict(&HybridPoint::new(vec![], vec![1.0]));
        let prior = 0.64 * model.y_std().powi(2);
        assert_abs_diff_eq!(v, prior, epsilon = 1e-12);
    }

    #[test]
    fn unit_evidence_for_single_standardized_point() {
        let spec = SpaceSpec::from_parts(&[], &[(0.0, 1.0)]);
        let h = KernelHypers {
            sigma: vec![1.0],
            beta: vec![],
            theta: vec![0.9],
            noise_var: 1.0 - 0.81,
        };
        let model = fit(&[HybridPoint::new(vec![], vec![0.0])], &[4.0], &h, &spec).unwrap();
        assert_abs_diff_eq!(model.log_marginal_likelihood(), -0.918939, epsilon = 1e-6);
    }

    #[test]
    fn duplicate_pair_evidence_follows_chain_rule() {
        // log p(y, y_dup) − log p(y) must equal the conditional log density of
        // the duplicate, computed here with an explicit inverse.
        let spec = hybrid_spec();
        let mut r = rng::seeded(5);
        for _ in 0..20 {
            let noise = r.random_range(1e-4..1e-1);
            let h = random_hypers(&spec, &mut r, noise);
            let mut xs: Vec<_> = (0..6).map(|_| spec.sample_uniform(&mut r)).collect();
            let mut y: Vec<f64> = (0..6).map(|_| r.random_range(-1.0..1.0)).collect();
            let small = kernel::gram(&xs, &h, &spec).unwrap();
            let before = log_evidence(small.clone(), &DVector::from_vec(y.clone())).unwrap();
            xs.push(xs[2].clone());
            y.push(y[2]);
            let big = kernel::gram(&xs, &h, &spec).unwrap();
            let after = log_evidence(big.clone(), &DVector::from_vec(y.clone())).unwrap();

            let inv = small.try_inverse().unwrap();
            let k = big.view((6, 0), (1, 6)).transpose();
            let y0 = DVector::from_vec(y[..6].to_vec());
            let mean = (k.transpose() * &inv * &y0)[(0, 0)];
            let var = big[(6, 6)] - (k.transpose() * &inv * &k)[(0, 0)];
            let cond = -0.5 * (y[6] - mean).powi(2) / var - 0.5 * (2.0 * std::f64::consts::PI * var).ln();
            assert_abs_diff_eq!(after - before, cond, epsilon = 1e-6);
        }
    }

    #[test]
    fn predictions_invariant_to_training_order() {
        let spec = hybrid_spec();
        let mut r = rng::seeded(6);
        let h = random_hypers(&spec, &mut r, 1e-3);
        let xs: Vec<_> = (0..10).map(|_| spec.sample_uniform(&mut r)).collect();
        let ys: Vec<f64> = (0..10).map(|_| r.random_range(-2.0..2.0)).collect();
        let a = fit(&xs, &ys, &h, &spec).unwrap();
        let (xr, yr): (Vec<_>, Vec<_>) = xs.iter().cloned().zip(ys.iter().copied()).rev().unzip();
        let b = fit(&xr, &yr, &h, &spec).unwrap();
        for _ in 0..20 {
            let t = spec.sample_uniform(&mut r);
            let (ma, va) = a.predict(&t);
            let (mb, vb) = b.predict(&t);
            assert_abs_diff_eq!(ma, mb, epsilon = 1e-9);
            assert_abs_diff_eq!(va, vb, epsilon = 1e-9);
        }
    }

    #[test]
    fn rejects_nan_targets() {
        let spec = hybrid_spec();
        let h = KernelHypers::initial(&spec, KernelKind::Additive, 2);
        let x = HybridPoint::new(vec![0, 0], vec![0.0, 0.0]);
        assert!(matches!(
            fit(&[x], &[f64::NAN], &h, &spec),
            Err(Error::NonFiniteTargets)
        ));
    }

    #[test]
    fn log_evidence_matches_model() {
        let spec = hybrid_spec();
        let mut r = rng::seeded(8);
        let h = random_hypers(&spec, &mut r, 1e-3);
        let xs: Vec<_> = (0..9).map(|_| spec.sample_uniform(&mut r)).collect();
        let ys: Vec<f64> = (0..9).map(|_| r.random_range(-2.0..2.0)).collect();
        let model = fit(&xs, &ys, &h, &spec).unwrap();
        let (mean, std) = standardization(&ys);
        let y = DVector::from_iterator(9, ys.iter().map(|v| (v - mean) / std));
        let g = PairFeatures::new(&xs, &spec).gram(KernelKind::Additive, &h, &spec, JITTER);
        assert_abs_diff_eq!(
            log_evidence(g, &y).unwrap(),
            model.log_marginal_likelihood(),
            epsilon = 1e-10
        );
    }
}
