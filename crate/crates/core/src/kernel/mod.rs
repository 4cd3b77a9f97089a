//! Base kernels, the additive hybrid diffusion kernel, and Gram matrices.
//!
//! Every input dimension carries its own base kernel with values in `[0, 1]`:
//! a unit-amplitude RBF for continuous dimensions and the closed-form
//! diffusion kernel of a complete graph for categorical dimensions. The
//! order-`p` additive kernel sums the products of all `p`-subsets of base
//! values, weighted by `θ_p²`; the elementary symmetric polynomials involved
//! are obtained from power sums with the Newton-Girard identities, so a full
//! evaluation costs `O(d · max_order)` for `d = m + n` dimensions.
//!
//! Dimensions are always ordered discrete block first, then continuous
//! block, and hyper-parameter vectors follow that order.

pub mod oracle;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::space::{HybridPoint, SpaceSpec};
use crate::{Error, Result};

/// Diagonal jitter added to every Gram matrix.
pub const JITTER: f64 = 1e-6;

/// How per-dimension base values are combined into one covariance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    /// `Σ_p θ_p² E_p(k_1, …, k_d)`: all interaction orders up to `max_order`.
    Additive,
    /// `θ_1² Π_i k_i`: a single product kernel (plain RBF over the inputs).
    Product,
}

/// All kernel hyper-parameters. `theta` holds one strength per interaction
/// order, so `max_order == theta.len()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelHypers {
    pub sigma: Vec<f64>,
    pub beta: Vec<f64>,
    pub theta: Vec<f64>,
    pub noise_var: f64,
}

impl KernelHypers {
    pub fn max_order(&self) -> usize {
        self.theta.len()
    }

    /// Starting point used by samplers and optimizers: unit length scales
    /// and diffusion rates, noise `1e-4`, and order strengths scaled so that
    /// the prior variance `k(x, x)` equals one.
    pub fn initial(spec: &SpaceSpec, kind: KernelKind, max_order: usize) -> Self {
        let d = spec.dims();
        let theta = match kind {
            KernelKind::Additive => (1..=max_order)
                .map(|p| (1.0 / (max_order as f64 * binomial(d, p))).sqrt())
                .collect(),
            KernelKind::Product => vec![1.0],
        };
        Self {
            sigma: vec![1.0; spec.n()],
            beta: vec![1.0; spec.m()],
            theta,
            noise_var: 1e-4,
        }
    }

    pub fn validate(&self, spec: &SpaceSpec) -> Result<()> {
        if self.sigma.len() != spec.n() {
            return Err(Error::InvalidHypers(format!(
                "expected {} length scales, got {}",
                spec.n(),
                self.sigma.len()
            )));
        }
        if self.beta.len() != spec.m() {
            return Err(Error::InvalidHypers(format!(
                "expected {} diffusion rates, got {}",
                spec.m(),
                self.beta.len()
            )));
        }
        if self.theta.is_empty() || self.theta.len() > spec.dims() {
            return Err(Error::InvalidHypers(format!(
                "max_order must be in [1, {}], got {}",
                spec.dims(),
                self.theta.len()
            )));
        }
        let positive = |v: &f64| v.is_finite() && *v > 0.0;
        if !self.sigma.iter().all(positive)
            || !self.beta.iter().all(positive)
            || !self.theta.iter().all(positive)
        {
            return Err(Error::InvalidHypers(
                "sigma, beta and theta must be strictly positive".into(),
            ));
        }
        if !(self.noise_var.is_finite() && self.noise_var >= 0.0) {
            return Err(Error::InvalidHypers(
                "noise variance must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Unit-amplitude RBF, `exp(−(a − b)² / 2σ²)`.
pub fn rbf_base(a: f64, b: f64, sigma: f64) -> Result<f64> {
    if sigma.is_nan() || sigma <= 0.0 {
        return Err(Error::InvalidHypers(format!(
            "length scale must be positive, got {sigma}"
        )));
    }
    let d = a - b;
    Ok((-d * d / (2.0 * sigma * sigma)).exp())
}

/// Off-diagonal value of the diagonal-normalized diffusion kernel on the
/// complete graph with `arity` nodes.
#[inline]
pub fn diffusion_off_diagonal(beta: f64, arity: usize) -> f64 {
    let c = arity as f64;
    let decay = (-c * beta).exp();
    -(-c * beta).exp_m1() / (1.0 + (c - 1.0) * decay)
}

/// Closed-form categorical diffusion kernel: `1` on equal categories,
/// `(1 − e^{−Cβ}) / (1 + (C − 1) e^{−Cβ})` otherwise.
pub fn discrete_diffusion_base(a: usize, b: usize, beta: f64, arity: usize) -> Result<f64> {
    if arity < 2 {
        return Err(Error::InvalidSpace(format!(
            "arity must be ≥ 2, got {arity}"
        )));
    }
    if a >= arity || b >= arity {
        return Err(Error::InvalidPoint(format!(
            "category index out of range for arity {arity}: ({a}, {b})"
        )));
    }
    if beta.is_nan() || beta <= 0.0 {
        return Err(Error::InvalidHypers(format!(
            "diffusion rate must be positive, got {beta}"
        )));
    }
    Ok(if a == b {
        1.0
    } else {
        diffusion_off_diagonal(beta, arity)
    })
}

/// One base-kernel value per input dimension for a fixed pair of points.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseKernelValues(pub Vec<f64>);

impl BaseKernelValues {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

pub fn base_values(
    x: &HybridPoint,
    y: &HybridPoint,
    h: &KernelHypers,
    spec: &SpaceSpec,
) -> Result<BaseKernelValues> {
    spec.check_point(x)?;
    spec.check_point(y)?;
    h.validate(spec)?;
    let mut out = Vec::with_capacity(spec.dims());
    for (i, var) in spec.discrete.iter().enumerate() {
        out.push(discrete_diffusion_base(
            x.discrete[i],
            y.discrete[i],
            h.beta[i],
            var.arity,
        )?);
    }
    for i in 0..spec.n() {
        out.push(rbf_base(x.continuous[i], y.continuous[i], h.sigma[i])?);
    }
    Ok(BaseKernelValues(out))
}

/// Power sums `S_j = Σ_i k_i^j` for `j = 1..=max_order`.
pub fn power_sums(base: &[f64], max_order: usize) -> Vec<f64> {
    let mut s = vec![0.0; max_order];
    power_sums_into(base, &mut s);
    s
}

#[inline]
fn power_sums_into(base: &[f64], s: &mut [f64]) {
    s.iter_mut().for_each(|v| *v = 0.0);
    for &k in base {
        let mut pw = k;
        for sj in s.iter_mut() {
            *sj += pw;
            pw *= k;
        }
    }
}

/// Newton-Girard: unweighted elementary symmetric polynomials
/// `E_0 = 1, E_1, …, E_P` from power sums `S_1..S_P`.
pub fn elementary_from_power_sums(s: &[f64]) -> Vec<f64> {
    let mut e = vec![0.0; s.len() + 1];
    newton_girard_into(s, &mut e);
    e
}

#[inline]
fn newton_girard_into(s: &[f64], e: &mut [f64]) {
    e[0] = 1.0;
    for p in 1..e.len() {
        let mut acc = 0.0;
        for j in 1..=p {
            let term = e[p - j] * s[j - 1];
            if j % 2 == 1 {
                acc += term;
            } else {
                acc -= term;
            }
        }
        e[p] = acc / p as f64;
    }
}

/// Reusable buffers for kernel evaluation on hot paths.
#[derive(Debug, Clone, Default)]
pub struct Scratch {
    s: Vec<f64>,
    e: Vec<f64>,
}

impl Scratch {
    pub fn new(max_order: usize) -> Self {
        Self {
            s: vec![0.0; max_order],
            e: vec![0.0; max_order + 1],
        }
    }

    fn ensure(&mut self, max_order: usize) {
        if self.s.len() != max_order {
            self.s.resize(max_order, 0.0);
            self.e.resize(max_order + 1, 0.0);
        }
    }
}

/// Combines base values into one covariance value.
#[inline]
pub fn combine(kind: KernelKind, base: &[f64], theta: &[f64], scratch: &mut Scratch) -> f64 {
    match kind {
        KernelKind::Additive => {
            scratch.ensure(theta.len());
            power_sums_into(base, &mut scratch.s);
            newton_girard_into(&scratch.s, &mut scratch.e);
            theta
                .iter()
                .zip(&scratch.e[1..])
                .map(|(t, e)| t * t * e)
                .sum()
        }
        KernelKind::Product => theta[0] * theta[0] * base.iter().product::<f64>(),
    }
}

/// Covariance at zero distance, where every base value is one.
pub fn self_covariance(kind: KernelKind, dims: usize, theta: &[f64]) -> f64 {
    match kind {
        KernelKind::Additive => theta
            .iter()
            .enumerate()
            .map(|(i, t)| t * t * binomial(dims, i + 1))
            .sum(),
        KernelKind::Product => theta[0] * theta[0],
    }
}

/// For dimension `j`, writes `(A, B)` such that replacing base value `k_j`
/// by any `k'` gives covariance `A + k' · B`.
pub fn split_dimension(
    kind: KernelKind,
    base: &[f64],
    theta: &[f64],
    elementary: &[f64],
    j: usize,
    loo: &mut [f64],
) -> (f64, f64) {
    match kind {
        KernelKind::Additive => {
            // E with dimension j removed: E⁻_q = E_q − k_j E⁻_{q−1}.
            let kj = base[j];
            loo[0] = 1.0;
            for q in 1..loo.len() {
                loo[q] = elementary[q] - kj * loo[q - 1];
            }
            let mut a = 0.0;
            let mut b = 0.0;
            for (p, t) in theta.iter().enumerate() {
                let w = t * t;
                a += w * loo[p + 1];
                b += w * loo[p];
            }
            (a, b)
        }
        KernelKind::Product => {
            let rest: f64 = base
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != j)
                .map(|(_, k)| k)
                .product();
            (0.0, theta[0] * theta[0] * rest)
        }
    }
}

/// Newton-Girard elementary symmetric polynomials `E_0..=E_P` written into
/// `e`, with `s` as power-sum scratch of length `P`.
pub fn elementary_into(base: &[f64], s: &mut [f64], e: &mut [f64]) {
    power_sums_into(base, s);
    newton_girard_into(s, e);
}

/// Covariance between two points under `kind`.
pub fn kernel(
    kind: KernelKind,
    x: &HybridPoint,
    y: &HybridPoint,
    h: &KernelHypers,
    spec: &SpaceSpec,
) -> Result<f64> {
    let base = base_values(x, y, h, spec)?;
    Ok(combine(kind, &base.0, &h.theta, &mut Scratch::new(h.max_order())))
}

/// The additive hybrid diffusion kernel `Σ_{p ≤ max_order} K_p`.
pub fn additive_kernel(
    x: &HybridPoint,
    y: &HybridPoint,
    h: &KernelHypers,
    spec: &SpaceSpec,
) -> Result<f64> {
    kernel(KernelKind::Additive, x, y, h, spec)
}

/// Per-dimension parameters in the form the hot loops consume.
#[derive(Debug, Clone)]
pub struct BaseParams {
    /// Off-diagonal diffusion value per discrete dimension.
    pub discrete_off: Vec<f64>,
    /// `1 / 2σ²` per continuous dimension.
    pub inv_two_sigma_sq: Vec<f64>,
}

impl BaseParams {
    pub fn new(h: &KernelHypers, spec: &SpaceSpec) -> Self {
        Self {
            discrete_off: h
                .beta
                .iter()
                .zip(&spec.discrete)
                .map(|(&b, v)| diffusion_off_diagonal(b, v.arity))
                .collect(),
            inv_two_sigma_sq: h.sigma.iter().map(|s| 0.5 / (s * s)).collect(),
        }
    }

    /// Base values between two valid points, written into `out`.
    #[inline]
    pub fn fill(&self, x: &HybridPoint, y: &HybridPoint, out: &mut [f64]) {
        let m = self.discrete_off.len();
        for i in 0..m {
            out[i] = if x.discrete[i] == y.discrete[i] {
                1.0
            } else {
                self.discrete_off[i]
            };
        }
        for (i, c) in self.inv_two_sigma_sq.iter().enumerate() {
            let d = x.continuous[i] - y.continuous[i];
            out[m + i] = (-d * d * c).exp();
        }
    }
}

/// Covariance matrix of `points`, with `noise_var + JITTER` on the diagonal.
pub fn gram(points: &[HybridPoint], h: &KernelHypers, spec: &SpaceSpec) -> Result<DMatrix<f64>> {
    gram_with(KernelKind::Additive, points, h, spec, JITTER)
}

pub fn gram_with(
    kind: KernelKind,
    points: &[HybridPoint],
    h: &KernelHypers,
    spec: &SpaceSpec,
    jitter: f64,
) -> Result<DMatrix<f64>> {
    h.validate(spec)?;
    for p in points {
        spec.check_point(p)?;
    }
    let params = BaseParams::new(h, spec);
    let mut base = vec![0.0; spec.dims()];
    let mut scratch = Scratch::new(h.max_order());
    let n = points.len();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            params.fill(&points[i], &points[j], &mut base);
            let v = combine(kind, &base, &h.theta, &mut scratch);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
        g[(i, i)] += h.noise_var + jitter;
    }
    Ok(g)
}

/// Pairwise per-dimension distances of a fixed training set: a mismatch
/// flag for discrete dimensions and the squared difference for continuous
/// ones. Rebuilding the Gram matrix for new hyper-parameters then needs no
/// access to the points themselves.
#[derive(Debug, Clone)]
pub struct PairFeatures {
    n_points: usize,
    m: usize,
    dims: usize,
    /// Row-major over pairs `(i, j)` with `j < i`, then dimensions.
    feats: Vec<f64>,
}

impl PairFeatures {
    pub fn new(points: &[HybridPoint], spec: &SpaceSpec) -> Self {
        let m = spec.m();
        let dims = spec.dims();
        let n_points = points.len();
        let mut feats = Vec::with_capacity(n_points * n_points.saturating_sub(1) / 2 * dims);
        for i in 0..n_points {
            for j in 0..i {
                let (x, y) = (&points[i], &points[j]);
                for k in 0..m {
                    feats.push(if x.discrete[k] == y.discrete[k] { 0.0 } else { 1.0 });
                }
                for k in 0..spec.n() {
                    let d = x.continuous[k] - y.continuous[k];
                    feats.push(d * d);
                }
            }
        }
        Self {
            n_points,
            m,
            dims,
            feats,
        }
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        self.n_points == 0
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    /// Number of discrete dimensions.
    pub(crate) fn m(&self) -> usize {
        self.m
    }

    /// Features of every pair `(i, j)`, `j < i`, row-major, `dims` per pair.
    pub(crate) fn raw(&self) -> &[f64] {
        &self.feats
    }

    /// Base values of every pair `(i, j)`, `j < i`, row-major, into `out`.
    pub fn base_values_into(&self, params: &BaseParams, out: &mut Vec<f64>) {
        out.clear();
        out.reserve(self.feats.len());
        for pair in self.feats.chunks_exact(self.dims.max(1)) {
            for (k, &f) in pair.iter().enumerate().take(self.dims) {
                out.push(if k < self.m {
                    if f == 0.0 {
                        1.0
                    } else {
                        params.discrete_off[k]
                    }
                } else {
                    (-f * params.inv_two_sigma_sq[k - self.m]).exp()
                });
            }
        }
    }

    /// Gram matrix (lower triangle filled, diagonal `k(x,x) + noise + jitter`).
    pub fn gram(&self, kind: KernelKind, h: &KernelHypers, spec: &SpaceSpec, jitter: f64) -> DMatrix<f64> {
        let params = BaseParams::new(h, spec);
        let mut base = Vec::new();
        self.base_values_into(&params, &mut base);
        let diag = self_covariance(kind, self.dims, &h.theta) + h.noise_var + jitter;
        let mut scratch = Scratch::new(h.max_order());
        let n = self.n_points;
        let mut g = DMatrix::zeros(n, n);
        let mut chunks = base.chunks_exact(self.dims.max(1));
        for i in 0..n {
            for j in 0..i {
                let v = combine(kind, chunks.next().unwrap(), &h.theta, &mut scratch);
                g[(i, j)] = v;
                g[(j, i)] = v;
            }
            g[(i, i)] = diag;
        }
        g
    }
}
