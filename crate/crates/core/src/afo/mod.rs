//! Acquisition optimization over hybrid spaces: CMA-ES on the continuous
//! part with the discrete assignment fixed, then restarted steepest-ascent
//! hill climbing on the discrete part with the continuous values fixed.

mod cmaes;

pub use cmaes::{cmaes_maximize, CmaesConfig};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::acq::AcquisitionContext;
use crate::space::{HybridPoint, SpaceSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AfoConfig {
    pub cma_population: usize,
    pub cma_sigma0: f64,
    /// CMA-ES evaluations per alternation round.
    pub cma_budget: usize,
    pub ls_restarts: usize,
    pub alternations: usize,
}

impl Default for AfoConfig {
    fn default() -> Self {
        Self {
            cma_population: 50,
            cma_sigma0: 0.1,
            cma_budget: 2000,
            ls_restarts: 20,
            alternations: 1,
        }
    }
}

impl AfoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.cma_population < 2
            || self.cma_budget == 0
            || self.alternations == 0
            || !(self.cma_sigma0 > 0.0 && self.cma_sigma0.is_finite())
        {
            return Err(Error::Config(format!(
                "invalid acquisition optimizer settings: {self:?}"
            )));
        }
        Ok(())
    }

    pub fn cmaes(&self) -> CmaesConfig {
        CmaesConfig {
            population: self.cma_population,
            sigma0: self.cma_sigma0,
            budget: self.cma_budget,
        }
    }
}

/// A function to maximize over a hybrid space.
pub trait Acquisition {
    fn value(&self, x: &HybridPoint) -> f64;

    /// Values at every Hamming neighbor of `x`, in the order of
    /// [`SpaceSpec::hamming_neighbors`].
    fn neighbor_values(&self, x: &HybridPoint, spec: &SpaceSpec) -> Vec<f64> {
        spec.hamming_neighbors(&x.discrete)
            .into_iter()
            .map(|d| self.value(&HybridPoint::new(d, x.continuous.clone())))
            .collect()
    }
}

impl<F: Fn(&HybridPoint) -> f64> Acquisition for F {
    fn value(&self, x: &HybridPoint) -> f64 {
        self(x)
    }
}

impl Acquisition for AcquisitionContext {
    fn value(&self, x: &HybridPoint) -> f64 {
        AcquisitionContext::value(self, x)
    }

    fn neighbor_values(&self, x: &HybridPoint, _spec: &SpaceSpec) -> Vec<f64> {
        AcquisitionContext::neighbor_values(self, x)
    }
}

/// A function of a discrete assignment, with an optional batched neighbor
/// evaluation.
pub trait DiscreteObjective {
    fn value(&self, x_d: &[usize]) -> f64;

    fn neighbor_values(&self, x_d: &[usize], spec: &SpaceSpec) -> Vec<f64> {
        spec.hamming_neighbors(x_d)
            .iter()
            .map(|d| self.value(d))
            .collect()
    }
}

impl<F: Fn(&[usize]) -> f64> DiscreteObjective for F {
    fn value(&self, x_d: &[usize]) -> f64 {
        self(x_d)
    }
}

/// An acquisition with its continuous coordinates held fixed.
struct Conditioned<'a, A: ?Sized> {
    af: &'a A,
    spec: &'a SpaceSpec,
    continuous: &'a [f64],
}

impl<A: Acquisition + ?Sized> DiscreteObjective for Conditioned<'_, A> {
    fn value(&self, x_d: &[usize]) -> f64 {
        self.af
            .value(&HybridPoint::new(x_d.to_vec(), self.continuous.to_vec()))
    }

    fn neighbor_values(&self, x_d: &[usize], _spec: &SpaceSpec) -> Vec<f64> {
        let x = HybridPoint::new(x_d.to_vec(), self.continuous.to_vec());
        self.af.neighbor_values(&x, self.spec)
    }
}

fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        f64::NEG_INFINITY
    } else {
        v
    }
}

fn hill_climb<O: DiscreteObjective + ?Sized>(
    f: &O,
    spec: &SpaceSpec,
    start: Vec<usize>,
) -> (Vec<usize>, f64) {
    let mut cur = start;
    let mut cur_v = sanitize(f.value(&cur));
    loop {
        let values = f.neighbor_values(&cur, spec);
        let mut best: Option<(usize, f64)> = None;
        for (i, &v) in values.iter().enumerate() {
            let v = sanitize(v);
            if v > cur_v && best.is_none_or(|(_, bv)| v > bv) {
                best = Some((i, v));
            }
        }
        let Some((idx, v)) = best else {
            return (cur, cur_v);
        };
        cur = neighbor_at(spec, &cur, idx);
        cur_v = v;
    }
}

/// The `idx`-th entry of [`SpaceSpec::hamming_neighbors`] without building
/// the whole list.
fn neighbor_at(spec: &SpaceSpec, x_d: &[usize], mut idx: usize) -> Vec<usize> {
    for (j, var) in spec.discrete.iter().enumerate() {
        let k = var.arity - 1;
        if idx < k {
            let mut out = x_d.to_vec();
            out[j] = if idx < x_d[j] { idx } else { idx + 1 };
            return out;
        }
        idx -= k;
    }
    unreachable!("neighbor index out of range")
}

/// Steepest-ascent hill climbing from `init` and from `cfg.ls_restarts`
/// uniformly drawn assignments; returns the best local optimum found
/// (the one from `init` on ties).
pub fn discrete_local_search<O, R>(
    f: &O,
    spec: &SpaceSpec,
    init: &[usize],
    cfg: &AfoConfig,
    rng: &mut R,
) -> (Vec<usize>, f64)
where
    O: DiscreteObjective + ?Sized,
    R: Rng + ?Sized,
{
    let mut best = hill_climb(f, spec, init.to_vec());
    for _ in 0..cfg.ls_restarts {
        let start = spec.sample_discrete(rng);
        let cand = hill_climb(f, spec, start);
        if cand.1 > best.1 {
            best = cand;
        }
    }
    best
}

/// Alternating maximization of `af` starting from `warm_start`. Returns the
/// final point and its value, which is never below `af(warm_start)`.
pub fn optimize_acquisition<A, R>(
    af: &A,
    spec: &SpaceSpec,
    cfg: &AfoConfig,
    rng: &mut R,
    warm_start: &HybridPoint,
) -> Result<(HybridPoint, f64)>
where
    A: Acquisition + ?Sized,
    R: Rng + ?Sized,
{
    cfg.validate()?;
    spec.check_point(warm_start)?;
    let mut x = warm_start.clone();
    let mut v = sanitize(af.value(&x));
    for _ in 0..cfg.alternations {
        if spec.n() > 0 {
            let discrete = x.discrete.clone();
            let (xc, vc) = cmaes_maximize(
                |c: &[f64]| af.value(&HybridPoint::new(discrete.clone(), c.to_vec())),
                &x.continuous,
                cfg.cmaes(),
                rng,
            );
            if vc > v {
                x.continuous = xc;
                v = vc;
            }
        }
        if spec.m() > 0 {
            let cond = Conditioned {
                af,
                spec,
                continuous: &x.continuous,
            };
            let (xd, vd) = discrete_local_search(&cond, spec, &x.discrete, cfg, rng);
            if vd > v {
                x.discrete = xd;
                v = vd;
            }
        }
    }
    Ok((x, v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::oracle::enumerate_assignments;
    use crate::rng;

    #[test]
    fn neighbor_at_matches_list() {
        let spec = SpaceSpec::from_parts(&[3, 2, 4], &[]);
        let x = vec![1, 0, 3];
        for (i, n) in spec.hamming_neighbors(&x).iter().enumerate() {
            assert_eq!(&neighbor_at(&spec, &x, i), n);
        }
    }

    #[test]
    fn linear_pseudo_boolean_matches_exhaustive() {
        let mut r = rng::seeded(21);
        let cfg = AfoConfig::default();
        for draw in 0..100 {
            let m = 1 + draw % 10;
            let spec = SpaceSpec::from_parts(&vec![2; m], &[]);
            let w: Vec<f64> = (0..m).map(|_| r.random_range(-1.0..1.0)).collect();
            let c: f64 = r.random_range(-1.0..1.0);
            let f = |x: &[usize]| c + x.iter().zip(&w).map(|(&b, w)| b as f64 * w).sum::<f64>();
            let exhaustive = enumerate_assignments(&vec![2; m])
                .into_iter()
                .map(|x| f(&x))
                .fold(f64::NEG_INFINITY, f64::max);
            let init = spec.sample_discrete(&mut r);
            let (_, v) = discrete_local_search(&f, &spec, &init, &cfg, &mut r);
            assert!((v - exhaustive).abs() < 1e-12, "draw {draw}: {v} vs {exhaustive}");
        }
    }

    #[test]
    fn constant_objective_returns_init() {
        let spec = SpaceSpec::from_parts(&[3, 3], &[]);
        let f = |_: &[usize]| 1.0;
        let (x, _) = discrete_local_search(&f, &spec, &[2, 1], &AfoConfig::default(), &mut rng::seeded(1));
        assert_eq!(x, vec![2, 1]);
    }

    #[test]
    fn two_binary_exhaustive() {
        let spec = SpaceSpec::from_parts(&[2, 2], &[]);
        let table = [[0.1, 0.7], [0.9, 0.2]];
        let f = |x: &[usize]| table[x[0]][x[1]];
        let (x, v) = discrete_local_search(&f, &spec, &[0, 0], &AfoConfig::default(), &mut rng::seeded(2));
        assert_eq!((x, v), (vec![1, 0], 0.9));
    }

    #[test]
    fn separable_matches_brute_force() {
        let spec = SpaceSpec::from_parts(&[2, 2, 2], &[(0.0, 1.0)]);
        let g = [0.3, -0.2, 0.5];
        let af = |x: &HybridPoint| {
            let d: f64 = x.discrete.iter().zip(&g).map(|(&b, w)| b as f64 * w).sum();
            d - (x.continuous[0] - 0.25).powi(2)
        };
        let brute = enumerate_assignments(&[2, 2, 2])
            .into_iter()
            .map(|d| af(&HybridPoint::new(d, vec![0.25])))
            .fold(f64::NEG_INFINITY, f64::max);
        let warm = HybridPoint::new(vec![0, 1, 0], vec![-0.9]);
        let (x, v) =
            optimize_acquisition(&af, &spec, &AfoConfig::default(), &mut rng::seeded(3), &warm).unwrap();
        assert!((v - brute).abs() < 1e-6, "{v} vs {brute}");
        assert_eq!(x.discrete, vec![1, 0, 1]);
    }

    #[test]
    fn degenerate_subspaces() {
        let cont = SpaceSpec::from_parts(&[], &[(0.0, 1.0)]);
        let af = |x: &HybridPoint| -(x.continuous[0] - 0.5).powi(2);
        let warm = HybridPoint::new(vec![], vec![0.0]);
        let (x, _) =
            optimize_acquisition(&af, &cont, &AfoConfig::default(), &mut rng::seeded(4), &warm).unwrap();
        assert!((x.continuous[0] - 0.5).abs() < 1e-3);

        let disc = SpaceSpec::from_parts(&[4], &[]);
        let af = |x: &HybridPoint| x.discrete[0] as f64;
        let warm = HybridPoint::new(vec![0], vec![]);
        let (x, v) =
            optimize_acquisition(&af, &disc, &AfoConfig::default(), &mut rng::seeded(4), &warm).unwrap();
        assert_eq!((x.discrete, v), (vec![3], 3.0));
    }

    #[test]
    fn never_worse_than_warm_start_and_deterministic() {
        let spec = SpaceSpec::from_parts(&[3, 2], &[(0.0, 1.0), (0.0, 1.0)]);
        let af = |x: &HybridPoint| {
            (x.discrete[0] as f64 * x.continuous[0]).sin() + x.discrete[1] as f64 * x.continuous[1].cos()
        };
        let mut r = rng::seeded(6);
        for _ in 0..10 {
            let warm = spec.sample_uniform(&mut r);
            let cfg = AfoConfig {
                cma_budget: 200,
                ls_restarts: 3,
                ..AfoConfig::default()
            };
            let seed: u64 = r.random();
            let (x, v) = optimize_acquisition(&af, &spec, &cfg, &mut rng::seeded(seed), &warm).unwrap();
            assert!(v >= af(&warm));
            assert!(spec.contains(&x));
            let (x2, v2) = optimize_acquisition(&af, &spec, &cfg, &mut rng::seeded(seed), &warm).unwrap();
            assert_eq!((x, v), (x2, v2));
        }
    }
}
