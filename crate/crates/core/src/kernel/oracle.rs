//! Reference implementations used to check the fast kernel paths.
//!
//! Both oracles are exponential in the problem size and refuse inputs past
//! a fixed limit.

use nalgebra::{DMatrix, SymmetricEigen};

use super::{base_values, KernelHypers};
use crate::space::{HybridPoint, SpaceSpec};
use crate::{Error, Result};

/// Largest `m + n` accepted by [`additive_bruteforce`].
pub const BRUTEFORCE_MAX_DIMS: usize = 16;

/// Largest number of discrete assignments accepted by
/// [`discrete_kernel_spectral_oracle`].
pub const SPECTRAL_MAX_ASSIGNMENTS: usize = 64;

/// Additive kernel by explicit enumeration of every subset of dimensions of
/// size at most `max_order`.
pub fn additive_bruteforce(
    x: &HybridPoint,
    y: &HybridPoint,
    h: &KernelHypers,
    spec: &SpaceSpec,
) -> Result<f64> {
    let d = spec.dims();
    if d > BRUTEFORCE_MAX_DIMS {
        return Err(Error::OracleTooLarge(format!(
            "brute-force enumeration supports at most {BRUTEFORCE_MAX_DIMS} dimensions, got {d}"
        )));
    }
    let k = base_values(x, y, h, spec)?.0;
    let max_order = h.max_order();
    let mut total = 0.0;
    for mask in 1u32..(1u32 << d) {
        let order = mask.count_ones() as usize;
        if order > max_order {
            continue;
        }
        let prod: f64 = (0..d)
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| k[i])
            .product();
        let t = h.theta[order - 1];
        total += t * t * prod;
    }
    Ok(total)
}

/// Every assignment of a discrete space in mixed-radix order (last variable
/// varies fastest).
pub fn enumerate_assignments(arities: &[usize]) -> Vec<Vec<usize>> {
    let total: usize = arities.iter().product();
    let mut out = Vec::with_capacity(total);
    let mut cur = vec![0usize; arities.len()];
    for _ in 0..total {
        out.push(cur.clone());
        for i in (0..arities.len()).rev() {
            cur[i] += 1;
            if cur[i] < arities[i] {
                break;
            }
            cur[i] = 0;
        }
    }
    out
}

/// Diffusion kernel over all discrete assignments of `spec`, computed from
/// the combinatorial graph directly.
///
/// Vertices are assignments and edges join assignments at Hamming distance
/// one; an edge that changes variable `i` has weight `beta[i]`, so with a
/// shared rate this is `exp(−β L(G))`. The matrix exponential is taken
/// through the eigendecomposition `Φ exp(−Π) Φᵀ` and the result is
/// normalized to unit diagonal.
pub fn discrete_kernel_spectral_oracle(
    spec: &SpaceSpec,
    beta: &[f64],
) -> Result<(Vec<Vec<usize>>, DMatrix<f64>)> {
    let arities = spec.arities();
    if beta.len() != arities.len() {
        return Err(Error::DimensionMismatch {
            expected: arities.len(),
            got: beta.len(),
        });
    }
    let total: usize = arities.iter().product();
    if arities.is_empty() || total > SPECTRAL_MAX_ASSIGNMENTS {
        return Err(Error::OracleTooLarge(format!(
            "spectral oracle supports 1..={SPECTRAL_MAX_ASSIGNMENTS} assignments, got {total}"
        )));
    }
    let nodes = enumerate_assignments(&arities);
    let mut laplacian = DMatrix::<f64>::zeros(total, total);
    for (u, a) in nodes.iter().enumerate() {
        for (v, b) in nodes.iter().enumerate().skip(u + 1) {
            let diff: Vec<usize> = (0..a.len()).filter(|&i| a[i] != b[i]).collect();
            if diff.len() == 1 {
                let w = beta[diff[0]];
                laplacian[(u, v)] = -w;
                laplacian[(v, u)] = -w;
                laplacian[(u, u)] += w;
                laplacian[(v, v)] += w;
            }
        }
    }
    let eig = SymmetricEigen::new(laplacian);
    let decay = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| (-l).exp()));
    let k = &eig.eigenvectors * decay * eig.eigenvectors.transpose();
    let normalized = DMatrix::from_fn(total, total, |i, j| k[(i, j)] / (k[(i, i)] * k[(j, j)]).sqrt());
    Ok((nodes, normalized))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{additive_kernel, discrete_diffusion_base};
    use approx::assert_abs_diff_eq;

    #[test]
    fn single_dimension_bruteforce() {
        let spec = SpaceSpec::from_parts(&[], &[(0.0, 1.0)]);
        let h = KernelHypers {
            sigma: vec![0.4],
            beta: vec![],
            theta: vec![1.7],
            noise_var: 0.0,
        };
        let x = HybridPoint::new(vec![], vec![0.1]);
        let y = HybridPoint::new(vec![], vec![-0.3]);
        let k1 = crate::kernel::rbf_base(0.1, -0.3, 0.4).unwrap();
        assert_abs_diff_eq!(
            additive_bruteforce(&x, &y, &h, &spec).unwrap(),
            1.7 * 1.7 * k1,
            epsilon = 1e-15
        );
    }

    #[test]
    fn bruteforce_matches_running_example() {
        let spec = SpaceSpec::from_parts(&[2, 4], &[(0.0, 1.0)]);
        let h = KernelHypers {
            sigma: vec![0.9],
            beta: vec![0.6, 0.2],
            theta: vec![1.0; 3],
            noise_var: 0.0,
        };
        let x = HybridPoint::new(vec![1, 3], vec![0.5]);
        let y = HybridPoint::new(vec![0, 3], vec![-0.1]);
        let k = base_values(&x, &y, &h, &spec).unwrap().0;
        let expansion =
            k.iter().sum::<f64>() + k[0] * k[1] + k[0] * k[2] + k[1] * k[2] + k[0] * k[1] * k[2];
        assert_abs_diff_eq!(
            additive_bruteforce(&x, &y, &h, &spec).unwrap(),
            expansion,
            epsilon = 1e-14
        );
        assert_abs_diff_eq!(
            additive_kernel(&x, &y, &h, &spec).unwrap(),
            expansion,
            epsilon = 1e-14
        );
    }

    #[test]
    fn bruteforce_rejects_large_spaces() {
        let spec = SpaceSpec::from_parts(&[2; 17], &[]);
        let h = KernelHypers {
            sigma: vec![],
            beta: vec![1.0; 17],
            theta: vec![1.0],
            noise_var: 0.0,
        };
        let x = HybridPoint::new(vec![0; 17], vec![]);
        assert!(matches!(
            additive_bruteforce(&x, &x, &h, &spec),
            Err(Error::OracleTooLarge(_))
        ));
    }

    #[test]
    fn spectral_binary_single_variable() {
        let spec = SpaceSpec::from_parts(&[2], &[]);
        let beta = 0.7;
        let (_, k) = discrete_kernel_spectral_oracle(&spec, &[beta]).unwrap();
        let e = (-2.0 * beta).exp();
        assert_abs_diff_eq!(k[(0, 1)], (1.0 - e) / (1.0 + e), epsilon = 1e-12);
        assert_abs_diff_eq!(k[(0, 0)], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn spectral_matches_closed_form() {
        for arities in [vec![2, 2], vec![3], vec![4, 2, 3]] {
            let spec = SpaceSpec::from_parts(&arities, &[]);
            let beta: Vec<f64> = (0..arities.len()).map(|i| 0.3 + 0.4 * i as f64).collect();
            let (nodes, k) = discrete_kernel_spectral_oracle(&spec, &beta).unwrap();
            for (u, a) in nodes.iter().enumerate() {
                for (v, b) in nodes.iter().enumerate() {
                    let closed: f64 = (0..arities.len())
                        .map(|i| discrete_diffusion_base(a[i], b[i], beta[i], arities[i]).unwrap())
                        .product();
                    assert_abs_diff_eq!(k[(u, v)], closed, epsilon = 1e-8);
                }
            }
        }
    }

    #[test]
    fn spectral_rejects_large_spaces() {
        let spec = SpaceSpec::from_parts(&[4, 4, 4, 2], &[]);
        assert!(discrete_kernel_spectral_oracle(&spec, &[1.0; 4]).is_err());
    }
}
