//! (μ/μ_w, λ) CMA-ES with cumulative step-size adaptation, maximizing a
//! function over the box `[−1, 1]^dim`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

/// Search stops early once the largest standard deviation of the search
/// distribution falls below this.
const MIN_SCALE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CmaesConfig {
    pub population: usize,
    pub sigma0: f64,
    /// Evaluations spent on sampled candidates.
    pub budget: usize,
}

struct Strategy {
    dim: usize,
    lambda: usize,
    weights: Vec<f64>,
    mu_eff: f64,
    c_sigma: f64,
    d_sigma: f64,
    c_c: f64,
    c_1: f64,
    c_mu: f64,
    chi_n: f64,
}

impl Strategy {
    fn new(dim: usize, lambda: usize) -> Self {
        let n = dim as f64;
        let mu = (lambda / 2).max(1);
        let raw: Vec<f64> = (0..mu)
            .map(|i| (mu as f64 + 0.5).ln() - ((i + 1) as f64).ln())
            .collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
        let c_sigma = (mu_eff + 2.0) / (n + mu_eff + 5.0);
        let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (n + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let c_c = (4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n);
        let c_1 = 2.0 / ((n + 1.3).powi(2) + mu_eff);
        let c_mu = (1.0 - c_1).min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((n + 2.0).powi(2) + mu_eff));
        let chi_n = n.sqrt() * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));
        Self {
            dim,
            lambda,
            weights,
            mu_eff,
            c_sigma,
            d_sigma,
            c_c,
            c_1,
            c_mu,
            chi_n,
        }
    }
}

/// Maximizes `f` starting from the mean `x0`. `x0` itself is evaluated
/// first (outside the budget) so the result is never worse than the start.
/// Returns the best evaluated point and its value.
pub fn cmaes_maximize<F, R>(mut f: F, x0: &[f64], cfg: CmaesConfig, rng: &mut R) -> (Vec<f64>, f64)
where
    F: FnMut(&[f64]) -> f64,
    R: Rng + ?Sized,
{
    let dim = x0.len();
    let clip = |v: f64| v.clamp(-1.0, 1.0);
    let start: Vec<f64> = x0.iter().map(|&v| clip(v)).collect();
    let score = |v: f64| if v.is_nan() { f64::NEG_INFINITY } else { v };
    let mut best_f = score(f(&start));
    let mut best_x = start.clone();
    if dim == 0 {
        return (best_x, best_f);
    }

    let s = Strategy::new(dim, cfg.population.max(2));
    let mut mean = DVector::from_vec(start);
    let mut sigma = cfg.sigma0;
    let mut cov = DMatrix::<f64>::identity(dim, dim);
    let mut p_sigma = DVector::<f64>::zeros(dim);
    let mut p_c = DVector::<f64>::zeros(dim);
    let mut basis = DMatrix::<f64>::identity(dim, dim);
    let mut scales = DVector::<f64>::from_element(dim, 1.0);

    let mut used = 0;
    let mut generation = 0;
    while used < cfg.budget {
        let lambda = s.lambda.min(cfg.budget - used);
        let mut pop: Vec<(DVector<f64>, f64)> = Vec::with_capacity(lambda);
        for _ in 0..lambda {
            let z = DVector::<f64>::from_fn(dim, |_, _| rng.sample(StandardNormal));
            let y = &basis * z.component_mul(&scales);
            let x = (&mean + sigma * y).map(clip);
            let v = score(f(x.as_slice()));
            if v > best_f {
                best_f = v;
                best_x = x.as_slice().to_vec();
            }
            pop.push((x, v));
        }
        used += lambda;
        // stable sort keeps the update deterministic under ties
        pop.sort_by(|a, b| b.1.total_cmp(&a.1));

        let old_mean = mean.clone();
        let mut new_mean = DVector::<f64>::zeros(dim);
        for (w, (x, _)) in s.weights.iter().zip(&pop) {
            new_mean.axpy(*w, x, 1.0);
        }
        mean = new_mean;
        let step = (&mean - &old_mean) / sigma;

        // C^{-1/2} step = B D^{-1} Bᵀ step
        let inv_sqrt_step = &basis * (basis.transpose() * &step).component_div(&scales);
        p_sigma = (1.0 - s.c_sigma) * &p_sigma
            + (s.c_sigma * (2.0 - s.c_sigma) * s.mu_eff).sqrt() * inv_sqrt_step;
        let ps_norm = p_sigma.norm();
        let decay = 1.0 - (1.0 - s.c_sigma).powi(2 * (generation + 1));
        let h_sigma = if ps_norm / decay.sqrt() / s.chi_n < 1.4 + 2.0 / (s.dim as f64 + 1.0) {
            1.0
        } else {
            0.0
        };
        p_c = (1.0 - s.c_c) * &p_c + h_sigma * (s.c_c * (2.0 - s.c_c) * s.mu_eff).sqrt() * &step;

        let mut rank_mu = DMatrix::<f64>::zeros(dim, dim);
        for (w, (x, _)) in s.weights.iter().zip(&pop) {
            let d = (x - &old_mean) / sigma;
            rank_mu.ger(*w, &d, &d, 1.0);
        }
        let rank_one = &p_c * p_c.transpose()
            + (1.0 - h_sigma) * s.c_c * (2.0 - s.c_c) * &cov;
        cov = (1.0 - s.c_1 - s.c_mu) * &cov + s.c_1 * rank_one + s.c_mu * rank_mu;
        cov = (&cov + cov.transpose()) * 0.5;
        sigma *= ((s.c_sigma / s.d_sigma) * (ps_norm / s.chi_n - 1.0)).exp();

        let eig = SymmetricEigen::new(cov.clone());
        if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
            break;
        }
        basis = eig.eigenvectors;
        scales = eig.eigenvalues.map(|v| v.max(1e-300).sqrt());
        generation += 1;
        if !sigma.is_finite() || sigma * scales.max() < MIN_SCALE {
            break;
        }
    }
    (best_x, best_f)
}
