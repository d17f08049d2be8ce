//! Executable sample-complexity and error-probability formulas for the
//! layered best-arm search.
//!
//! For a Gaussian bandit instance with means `mu` and slack `eps`, the
//! characteristic time `T_eps(mu)` — the asymptotic number of samples per
//! unit of `log(1/delta)` needed to certify an eps-optimal arm — follows
//! from the root of
//!
//! `psi(r) = sum_{d != d*} 1 / (r (Delta_d + eps)^2 - 1)^2 - 1`,
//!
//! a convex decreasing function on its domain, via
//! `T_eps = 2 r* / (1 + sum_d 1 / (r* (Delta_d + eps)^2 - 1))`. The layered
//! search splits its targets as `eps' = eps/N`, `delta' = 1-(1-delta)^(1/N)`,
//! and the sample-complexity bound is the sum over layers of the worst-case
//! per-node characteristic time at slack `eps/N`.

mod error_prob;

pub use error_prob::{d_mu, d_mu_index, error_bound, h2, p_small, q_factor};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A Gaussian bandit instance: arm means, the slack `epsilon`, and the
/// derived gap structure (distinct gaps ascending, with their class sizes).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GaussianInstance {
    pub means: Vec<f64>,
    pub epsilon: f64,
    best: usize,
    gaps: Vec<f64>,
    /// Distinct gap values ascending; `ladder[0] == 0` is the best class.
    ladder: Vec<f64>,
    /// Number of arms in each ladder class.
    class_sizes: Vec<usize>,
}

impl GaussianInstance {
    pub fn new(means: Vec<f64>, epsilon: f64) -> Result<Self> {
        if means.is_empty() {
            return Err(Error::InvalidParams("instance needs at least one arm".into()));
        }
        if means.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidParams("means must be finite".into()));
        }
        if !(epsilon >= 0.0) {
            return Err(Error::InvalidParams("epsilon must be non-negative".into()));
        }
        let mut best = 0;
        for (i, &m) in means.iter().enumerate() {
            if m > means[best] {
                best = i;
            }
        }
        let gaps: Vec<f64> = means.iter().map(|&m| means[best] - m).collect();
        let mut ladder: Vec<f64> = gaps.clone();
        ladder.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ladder.dedup();
        let class_sizes = ladder
            .iter()
            .map(|&g| gaps.iter().filter(|&&x| x == g).count())
            .collect();
        Ok(Self { means, epsilon, best, gaps, ladder, class_sizes })
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::new(self.means.clone(), epsilon)
    }

    pub fn n_arms(&self) -> usize {
        self.means.len()
    }

    pub fn best_arm(&self) -> usize {
        self.best
    }

    pub fn unique_best(&self) -> bool {
        self.class_sizes[0] == 1
    }

    /// Suboptimality gap of arm `d`.
    pub fn gap(&self, d: usize) -> f64 {
        self.gaps[d]
    }

    /// Number of distinct mean values (gap classes).
    pub fn c_mu(&self) -> usize {
        self.ladder.len()
    }

    /// The `k`-th smallest distinct gap, 1-based; `ladder_gap(1) == 0`.
    pub fn ladder_gap(&self, k: usize) -> f64 {
        self.ladder[k - 1]
    }

    /// Size of the `k`-th gap class, 1-based.
    pub fn class_size(&self, k: usize) -> usize {
        self.class_sizes[k - 1]
    }

    pub fn delta_max(&self) -> f64 {
        *self.ladder.last().unwrap()
    }

    /// Lower edge of psi's domain, `1 / min_{d != d*} (Delta_d + eps)^2`.
    fn domain_edge(&self) -> Result<f64> {
        let min = self
            .gaps
            .iter()
            .enumerate()
            .filter(|&(d, _)| d != self.best)
            .map(|(_, &g)| g + self.epsilon)
            .fold(f64::INFINITY, f64::min);
        if !(min > 0.0) || !min.is_finite() {
            return Err(Error::Domain {
                term: "psi domain".into(),
                detail: "needs a unique best arm or a positive epsilon".into(),
            });
        }
        Ok(1.0 / (min * min))
    }
}

/// Evaluate `psi(r)`; errors outside the domain `r > domain edge`.
pub fn psi(instance: &GaussianInstance, r: f64) -> Result<f64> {
    let edge = instance.domain_edge()?;
    if r <= edge {
        return Err(Error::Domain {
            term: "psi".into(),
            detail: format!("r = {r} at or below the domain edge {edge}"),
        });
    }
    let sum: f64 = instance
        .gaps
        .iter()
        .enumerate()
        .filter(|&(d, _)| d != instance.best)
        .map(|(_, &g)| {
            let denom = r * (g + instance.epsilon).powi(2) - 1.0;
            1.0 / (denom * denom)
        })
        .sum();
    Ok(sum - 1.0)
}

/// Root of psi and the characteristic time it yields.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CharTime {
    pub r_star: f64,
    pub t_eps: f64,
}

/// Solve `psi(r) = 0` by bisection to a residual of 1e-9 and evaluate the
/// characteristic time at the root.
pub fn characteristic_time(instance: &GaussianInstance) -> Result<CharTime> {
    if instance.n_arms() < 2 {
        return Err(Error::InvalidParams("characteristic time needs at least two arms".into()));
    }
    let edge = instance.domain_edge()?;
    // psi explodes at the edge and tends to -1 at infinity: bracket by
    // doubling until the sign flips.
    let mut lo = edge * (1.0 + 1e-12) + f64::MIN_POSITIVE;
    let mut hi = (edge * 2.0).max(edge + 1.0);
    let mut guard = 0;
    while psi(instance, hi)? > 0.0 {
        lo = hi;
        hi *= 2.0;
        guard += 1;
        if guard > 200 {
            return Err(Error::Domain {
                term: "characteristic_time".into(),
                detail: "no sign change found while bracketing psi".into(),
            });
        }
    }
    let mut root = 0.5 * (lo + hi);
    for _ in 0..500 {
        let value = psi(instance, root)?;
        if value.abs() <= 1e-9 {
            break;
        }
        if value > 0.0 {
            lo = root;
        } else {
            hi = root;
        }
        root = 0.5 * (lo + hi);
    }
    let residual = psi(instance, root)?;
    if residual.abs() > 1e-9 {
        return Err(Error::Domain {
            term: "characteristic_time".into(),
            detail: format!("bisection stalled at residual {residual}"),
        });
    }

    let sum: f64 = instance
        .gaps
        .iter()
        .enumerate()
        .filter(|&(d, _)| d != instance.best)
        .map(|(_, &g)| 1.0 / (root * (g + instance.epsilon).powi(2) - 1.0))
        .sum();
    Ok(CharTime { r_star: root, t_eps: 2.0 * root / (1.0 + sum) })
}

/// Sample-complexity bound: the sum over layers of the worst-case
/// characteristic time, each evaluated at the per-layer slack `eps / N`.
/// `layer_instances[h]` is the caller's worst-case instance for layer `h`.
pub fn theorem1_bound(
    layer_instances: &[GaussianInstance],
    eps: f64,
    n_layers: usize,
) -> Result<f64> {
    if layer_instances.len() != n_layers || n_layers == 0 {
        return Err(Error::InvalidParams(format!(
            "{} layer instances supplied for {} layers",
            layer_instances.len(),
            n_layers
        )));
    }
    let eps_layer = eps / n_layers as f64;
    let mut sum = 0.0;
    for instance in layer_instances {
        let at_layer_eps = instance.with_epsilon(eps_layer)?;
        sum += characteristic_time(&at_layer_eps)?.t_eps;
    }
    Ok(sum)
}

/// Characteristic times per layer plus the assembled bounds, as produced by
/// the `bounds` CLI command.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundReport {
    pub per_layer: Vec<CharTime>,
    pub theorem1_sum: f64,
    /// Error-probability bound, when the caller supplied the layer counts
    /// it needs.
    pub theorem2: Option<f64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_arm(gap: f64, eps: f64) -> GaussianInstance {
        GaussianInstance::new(vec![1.0, 1.0 - gap], eps).unwrap()
    }

    #[test]
    fn psi_matches_the_analytic_two_arm_values() {
        let inst = two_arm(1.0, 0.0);
        // 1/(2*1 - 1)^2 - 1 = 0.
        assert!(psi(&inst, 2.0).unwrap().abs() < 1e-15);
        // Near the domain edge the sum blows up.
        assert!(psi(&inst, 1.0 + 1e-9).unwrap() > 1e10);
        // Far out it approaches -1.
        assert!((psi(&inst, 1e12).unwrap() + 1.0).abs() < 1e-10);
        // Outside the domain: error.
        assert!(psi(&inst, 0.5).is_err());
    }

    #[test]
    fn psi_is_strictly_decreasing_on_a_grid() {
        let inst = GaussianInstance::new(vec![0.9, 0.6, 0.4, 0.1], 0.05).unwrap();
        let edge = 1.0 / (0.3 + 0.05f64).powi(2);
        let mut prev = f64::INFINITY;
        for i in 1..200 {
            let r = edge * (1.0 + i as f64 * 0.25);
            let v = psi(&inst, r).unwrap();
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn two_arm_unit_gap_has_r_two_and_t_two() {
        let ct = characteristic_time(&two_arm(1.0, 0.0)).unwrap();
        assert!((ct.r_star - 2.0).abs() < 1e-7, "r* = {}", ct.r_star);
        assert!((ct.t_eps - 2.0).abs() < 1e-7, "T = {}", ct.t_eps);
        // Residual at the root is within the bisection tolerance.
        assert!(psi(&two_arm(1.0, 0.0), ct.r_star).unwrap().abs() <= 1e-9);
    }

    #[test]
    fn halving_gaps_quadruples_the_characteristic_time() {
        let base = characteristic_time(
            &GaussianInstance::new(vec![1.0, 0.6, 0.3], 0.0).unwrap(),
        )
        .unwrap();
        let halved = characteristic_time(
            &GaussianInstance::new(vec![1.0, 0.8, 0.65], 0.0).unwrap(),
        )
        .unwrap();
        assert!((halved.t_eps / base.t_eps - 4.0).abs() < 1e-6);
    }

    #[test]
    fn characteristic_time_decreases_in_epsilon() {
        let mut prev = f64::INFINITY;
        for eps in [0.0, 0.05, 0.2, 0.5] {
            let t = characteristic_time(&two_arm(0.5, eps)).unwrap().t_eps;
            assert!(t < prev);
            prev = t;
        }
    }

    #[test]
    fn duplicate_best_arms_need_positive_epsilon() {
        let tied = GaussianInstance::new(vec![1.0, 1.0, 0.5], 0.0).unwrap();
        assert!(!tied.unique_best());
        assert!(characteristic_time(&tied).is_err());
        let relaxed = tied.with_epsilon(0.1).unwrap();
        assert!(characteristic_time(&relaxed).is_ok());
    }

    #[test]
    fn single_layer_bound_reduces_to_one_characteristic_time() {
        let inst = two_arm(0.5, 0.0);
        let bound = theorem1_bound(std::slice::from_ref(&inst), 0.1, 1).unwrap();
        let direct = characteristic_time(&inst.with_epsilon(0.1).unwrap()).unwrap();
        assert!((bound - direct.t_eps).abs() < 1e-12);
    }

    #[test]
    fn identical_layers_sum_linearly() {
        let inst = two_arm(0.5, 0.0);
        let one = theorem1_bound(std::slice::from_ref(&inst), 0.12, 1).unwrap();
        // At N layers the per-layer slack shrinks to eps/N, so compare
        // against N copies evaluated at that slack directly.
        let four = theorem1_bound(&vec![inst.clone(); 4], 0.48, 4).unwrap();
        assert!((four - 4.0 * one).abs() < 1e-9);
    }

    #[test]
    fn two_layer_toy_matches_per_layer_hand_computation() {
        // Layer 0: gaps {0, 0.4}; layer 1: gaps {0, 0.25}. Two-arm closed
        // form: r* = 2/(gap+eps')^2 and T = r*.
        let l0 = two_arm(0.4, 0.0);
        let l1 = two_arm(0.25, 0.0);
        let eps = 0.05;
        let bound = theorem1_bound(&[l0, l1], eps, 2).unwrap();
        let hand = 2.0 / (0.4 + 0.025f64).powi(2) + 2.0 / (0.25 + 0.025f64).powi(2);
        assert!((bound - hand).abs() < 1e-6, "bound {bound} vs hand {hand}");
    }
}
