//! Incremental evaluation of the hyper-parameter log posterior.
//!
//! Slice sampling and the MAP line searches move one log-space coordinate at
//! a time. A length scale or diffusion rate touches a single base value per
//! training pair, so the Gram matrix can be rebuilt in `O(P)` per pair from
//! cached elementary symmetric polynomials: with `E⁻` the polynomials
//! without dimension `j`, replacing `k_j` by `k'` gives
//! `E'_q = E⁻_q + k' E⁻_{q−1}`. Product kernels cache the log of each base
//! value and their sum instead.

use nalgebra::DMatrix;

use super::{log_prior, HyperProblem};
use crate::gp::log_evidence;
use crate::kernel::{self, diffusion_off_diagonal, BaseParams, KernelKind, JITTER};

/// Coordinate commits between full recomputations of the cache, bounding
/// round-off accumulated by the incremental updates.
const REFRESH_EVERY: usize = 64;

/// Maps a pair feature to the new base value of one dimension.
type BaseFn = Box<dyn Fn(f64) -> f64>;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Coord {
    Sigma(usize),
    Beta(usize),
    Theta(usize),
    Noise,
}

/// Stateful evaluator of [`HyperProblem::log_target`].
pub struct CachedTarget<'a> {
    problem: &'a HyperProblem,
    u: Vec<f64>,
    valid: bool,
    n_pairs: usize,
    /// Base values (additive) or their logs (product), `dims` per pair.
    base: Vec<f64>,
    /// Elementary polynomials `E_0..=E_P` per pair (additive) or the summed
    /// log base values per pair (product).
    agg: Vec<f64>,
    commits: usize,
    loo: Vec<f64>,
    power: Vec<f64>,
    evaluations: u64,
}

impl<'a> CachedTarget<'a> {
    pub fn new(problem: &'a HyperProblem) -> Self {
        let p = problem.max_order();
        Self {
            problem,
            u: Vec::new(),
            valid: false,
            n_pairs: 0,
            base: Vec::new(),
            agg: Vec::new(),
            commits: 0,
            loo: vec![0.0; p + 1],
            power: vec![0.0; p],
            evaluations: 0,
        }
    }

    /// Number of Gram matrices built so far.
    pub fn evaluations(&self) -> u64 {
        self.evaluations
    }

    fn coord(&self, i: usize) -> Coord {
        let l = self.problem.layout();
        if i < l.n_sigma {
            Coord::Sigma(i)
        } else if i < l.n_sigma + l.n_beta {
            Coord::Beta(i - l.n_sigma)
        } else if i < l.n_sigma + l.n_beta + l.n_theta {
            Coord::Theta(i - l.n_sigma - l.n_beta)
        } else {
            Coord::Noise
        }
    }

    fn agg_width(&self) -> usize {
        match self.problem.kind {
            KernelKind::Additive => self.problem.max_order() + 1,
            KernelKind::Product => 1,
        }
    }

    fn rebuild(&mut self, u: &[f64]) {
        let pr = self.problem;
        self.u = u.to_vec();
        let h = pr.layout.to_hypers(u);
        let params = BaseParams::new(&h, &pr.spec);
        let dims = pr.features.dims();
        pr.features.base_values_into(&params, &mut self.base);
        self.n_pairs = self.base.len() / dims.max(1);
        let w = self.agg_width();
        self.agg.clear();
        self.agg.resize(self.n_pairs * w, 0.0);
        match pr.kind {
            KernelKind::Additive => {
                for (b, e) in self.base.chunks_exact(dims).zip(self.agg.chunks_exact_mut(w)) {
                    kernel::elementary_into(b, &mut self.power, e);
                }
            }
            KernelKind::Product => {
                // logs are taken from the parameters directly so that base
                // values that underflow keep an exact logarithm
                let m = pr.features.m();
                let log_off: Vec<f64> = params.discrete_off.iter().map(|v| v.ln()).collect();
                for ((b, f), a) in self
                    .base
                    .chunks_exact_mut(dims)
                    .zip(pr.features.raw().chunks_exact(dims))
                    .zip(self.agg.iter_mut())
                {
                    let mut total = 0.0;
                    for k in 0..dims {
                        b[k] = if k < m {
                            if f[k] == 0.0 {
                                0.0
                            } else {
                                log_off[k]
                            }
                        } else {
                            -f[k] * params.inv_two_sigma_sq[k - m]
                        };
                        total += b[k];
                    }
                    *a = total;
                }
            }
        }
        self.commits = 0;
        self.valid = true;
    }

    /// Dimension touched by a coordinate and a function giving the new base
    /// value (or its log for product kernels) from a pair feature.
    fn new_base_fn(&self, c: Coord, value: f64) -> Option<(usize, BaseFn)> {
        let pr = self.problem;
        let m = pr.features.m();
        let log = pr.kind == KernelKind::Product;
        match c {
            Coord::Sigma(k) => {
                let s = value.exp();
                let c2 = 0.5 / (s * s);
                Some((
                    m + k,
                    if log {
                        Box::new(move |f| -f * c2)
                    } else {
                        Box::new(move |f| (-f * c2).exp())
                    },
                ))
            }
            Coord::Beta(k) => {
                let off = diffusion_off_diagonal(value.exp(), pr.spec.discrete[k].arity);
                let off = if log { off.ln() } else { off };
                let same = if log { 0.0 } else { 1.0 };
                Some((k, Box::new(move |f| if f == 0.0 { same } else { off })))
            }
            Coord::Theta(_) | Coord::Noise => None,
        }
    }

    fn commit(&mut self, i: usize, value: f64) {
        let c = self.coord(i);
        self.u[i] = value;
        let Some((dim, new_base)) = self.new_base_fn(c, value) else {
            return;
        };
        let dims = self.problem.features.dims();
        let w = self.agg_width();
        let feats = self.problem.features.raw();
        for pair in 0..self.n_pairs {
            let old = self.base[pair * dims + dim];
            let new = new_base(feats[pair * dims + dim]);
            self.base[pair * dims + dim] = new;
            match self.problem.kind {
                KernelKind::Additive => {
                    let e = &mut self.agg[pair * w..(pair + 1) * w];
                    self.loo[0] = 1.0;
                    for q in 1..w {
                        self.loo[q] = e[q] - old * self.loo[q - 1];
                    }
                    for q in 1..w {
                        e[q] = self.loo[q] + new * self.loo[q - 1];
                    }
                }
                KernelKind::Product => self.agg[pair] += new - old,
            }
        }
        self.commits += 1;
    }

    /// Log posterior density of log-space coordinates `u`; equal to
    /// [`HyperProblem::log_target`] up to round-off.
    pub fn eval(&mut self, u: &[f64]) -> f64 {
        let pr = self.problem;
        if u.len() != pr.layout.len() || u.iter().any(|v| !v.is_finite()) {
            return f64::NEG_INFINITY;
        }
        let h = pr.layout.to_hypers(u);
        let lp = log_prior(&h, &pr.priors);
        if lp == f64::NEG_INFINITY {
            return lp;
        }
        let mut pending = None;
        if !self.valid || self.commits >= REFRESH_EVERY {
            self.rebuild(u);
        } else {
            let diffs: Vec<usize> = (0..u.len()).filter(|&i| u[i] != self.u[i]).collect();
            if let Some((&last, rest)) = diffs.split_last() {
                for &i in rest {
                    self.commit(i, u[i]);
                }
                pending = Some(last);
            }
        }

        let gram = self.gram(&h, pending.map(|i| (self.coord(i), u[i])));
        self.evaluations += 1;
        let ll = log_evidence(gram, &pr.y).unwrap_or(f64::NEG_INFINITY);
        let v = lp + ll + pr.layout.log_jacobian(u);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    }

    fn gram(&self, h: &kernel::KernelHypers, pending: Option<(Coord, f64)>) -> DMatrix<f64> {
        let pr = self.problem;
        let n = pr.y.len();
        let dims = pr.features.dims();
        let w = self.agg_width();
        let feats = pr.features.raw();
        let theta_sq: Vec<f64> = h.theta.iter().map(|t| t * t).collect();
        let diag = kernel::self_covariance(pr.kind, dims, &h.theta) + h.noise_var + JITTER;
        let replace = pending.and_then(|(c, v)| self.new_base_fn(c, v));
        let mut loo = vec![0.0; w];
        let mut g = DMatrix::zeros(n, n);
        let mut pair = 0;
        for i in 0..n {
            for j in 0..i {
                let v = match pr.kind {
                    KernelKind::Additive => {
                        let e = &self.agg[pair * w..(pair + 1) * w];
                        match &replace {
                            None => theta_sq.iter().zip(&e[1..]).map(|(t, e)| t * e).sum(),
                            Some((dim, f)) => {
                                let old = self.base[pair * dims + dim];
                                let new = f(feats[pair * dims + dim]);
                                loo[0] = 1.0;
                                let mut acc = 0.0;
                                for q in 1..w {
                                    loo[q] = e[q] - old * loo[q - 1];
                                    acc += theta_sq[q - 1] * (loo[q] + new * loo[q - 1]);
                                }
                                acc
                            }
                        }
                    }
                    KernelKind::Product => {
                        let mut s = self.agg[pair];
                        if let Some((dim, f)) = &replace {
                            s += f(feats[pair * dims + dim]) - self.base[pair * dims + dim];
                        }
                        theta_sq[0] * s.exp()
                    }
                };
                g[(i, j)] = v;
                g[(j, i)] = v;
                pair += 1;
            }
            g[(i, i)] = diag;
        }
        g
    }
}
