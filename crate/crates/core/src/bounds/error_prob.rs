//! Error-probability machinery: the hardness sums over gap classes, the
//! implicit function `h2`, the per-layer failure factor `Q`, and the
//! assembled anytime error bound for a partially converged search.
//!
//! All formulas are evaluated exactly as printed; max expressions may see
//! negative operands and are squared afterwards, and every logarithm is
//! guarded with a domain error naming the offending term.

use crate::bounds::GaussianInstance;
use crate::error::{Error, Result};

/// `p(x) = x e^{-x}`.
pub fn p_small(x: f64) -> f64 {
    x * (-x).exp()
}

/// `h2(x, y, z) = inf { u > 1 : u - log u - 2 log(2 + log(x u + y)) >= z }`,
/// found by doubling then bisection to 1e-6. Returns 1 when the condition
/// already holds at the lower boundary.
pub fn h2(x: f64, y: f64, z: f64) -> Result<f64> {
    let f = |u: f64| -> Result<f64> {
        let inner = x * u + y;
        if inner <= 0.0 {
            return Err(Error::Domain {
                term: "h2".into(),
                detail: format!("log argument x*u + y = {inner} is non-positive"),
            });
        }
        let mid = 2.0 + inner.ln();
        if mid <= 0.0 {
            return Err(Error::Domain {
                term: "h2".into(),
                detail: format!("log argument 2 + log(x*u + y) = {mid} is non-positive"),
            });
        }
        Ok(u - u.ln() - 2.0 * mid.ln())
    };

    let lo_edge = 1.0 + 1e-12;
    if f(lo_edge)? >= z {
        return Ok(1.0);
    }
    let mut lo = lo_edge;
    let mut hi = 2.0;
    let mut guard = 0;
    while f(hi)? < z {
        lo = hi;
        hi *= 2.0;
        guard += 1;
        if guard > 200 {
            return Err(Error::Domain {
                term: "h2".into(),
                detail: "no crossing found while doubling".into(),
            });
        }
    }
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if f(mid)? >= z {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Class index `d_mu(eps)`: the 1-based ladder class whose gap interval
/// contains `eps`, or `C_mu` when `eps` reaches the largest gap.
pub fn d_mu_index(instance: &GaussianInstance, eps: f64) -> usize {
    let c = instance.c_mu();
    for d in 1..c {
        if eps >= instance.ladder_gap(d) && eps < instance.ladder_gap(d + 1) {
            return d;
        }
    }
    c
}

fn c_single(instance: &GaussianInstance, d: usize, eps0: f64) -> f64 {
    2.0 / instance.ladder_gap(d) - 1.0 / eps0
}

fn c_pair(instance: &GaussianInstance, d: usize, j: usize, eps0: f64) -> f64 {
    2.0 * (instance.ladder_gap(j) / eps0 + 1.0)
        / (instance.ladder_gap(d) - instance.ladder_gap(j))
        + 3.0 / eps0
}

fn class_sum(instance: &GaussianInstance, from: usize, to: usize) -> f64 {
    if from > to {
        return 0.0;
    }
    (from..=to).map(|k| instance.class_size(k) as f64).sum()
}

fn h_bar(instance: &GaussianInstance, d: usize, j: usize, eps0: f64) -> f64 {
    let best = instance.class_size(1) as f64;
    let sqrt2 = std::f64::consts::SQRT_2;
    let cdj = c_pair(instance, d + 1, j, eps0);
    let cj1 = c_single(instance, j + 1, eps0);
    let first = best * (sqrt2 / instance.ladder_gap(j + 1)).max(cdj).powi(2);
    let second =
        cj1.max(cdj).powi(2) * (class_sum(instance, 2, j) + class_sum(instance, d + 1, instance.c_mu()));
    let third: f64 = ((j + 1)..=d)
        .map(|k| {
            instance.class_size(k) as f64
                * cj1.max(cdj).max(sqrt2 / instance.ladder_gap(k)).powi(2)
        })
        .sum();
    first + second + third
}

fn h_tilde(instance: &GaussianInstance, d: usize, j: usize, eps0: f64) -> f64 {
    let best = instance.class_size(1) as f64;
    let sqrt2 = std::f64::consts::SQRT_2;
    let cj1 = c_single(instance, j + 1, eps0);
    let first = 2.0 * best / instance.ladder_gap(j + 1).powi(2);
    let second = 2.0 * class_sum(instance, 1, j)
        / (instance.ladder_gap(d + 1) - instance.ladder_gap(j)).powi(2);
    let third: f64 = (2..=j)
        .map(|k| instance.class_size(k) as f64 * cj1.max(1.0 / eps0).powi(2))
        .sum();
    let fourth: f64 = ((j + 1)..=instance.c_mu())
        .map(|k| {
            instance.class_size(k) as f64
                * cj1.max(1.0 / eps0).max(sqrt2 / instance.ladder_gap(k)).powi(2)
        })
        .sum();
    first + second + third + fourth
}

/// Hardness `H_d = min_{j in [d]} max(Hbar_{d,j}, Htilde_{d,j})`, defined
/// for `d` in `[C_mu - 1]`.
pub fn big_h(instance: &GaussianInstance, d: usize, eps0: f64) -> Result<f64> {
    if !(eps0 > 0.0) {
        return Err(Error::Domain {
            term: "H".into(),
            detail: "eps0 must be positive".into(),
        });
    }
    if d == 0 || d >= instance.c_mu() {
        return Err(Error::Domain {
            term: "H".into(),
            detail: format!("class index {d} outside [1, C_mu - 1 = {}]", instance.c_mu() - 1),
        });
    }
    let value = (1..=d)
        .map(|j| h_bar(instance, d, j, eps0).max(h_tilde(instance, d, j, eps0)))
        .fold(f64::INFINITY, f64::min);
    if !value.is_finite() || value <= 0.0 {
        return Err(Error::Domain {
            term: "H".into(),
            detail: format!("H_{d} evaluated to {value}"),
        });
    }
    Ok(value)
}

/// Sample-count threshold `D_mu` below which the failure factor is not
/// meaningful: `8 H_1 h2(8 H_1, 5K^2/2, 2 + log(K(K+1)/2)) + 5K^2/2`.
pub fn d_mu(instance: &GaussianInstance, eps0: f64) -> Result<f64> {
    let k = instance.n_arms() as f64;
    let h1 = big_h(instance, 1, eps0)?;
    let z = 2.0 + (k * (k + 1.0) / 2.0).ln();
    Ok(8.0 * h1 * h2(8.0 * h1, 5.0 * k * k / 2.0, z)? + 5.0 * k * k / 2.0)
}

/// Per-layer failure factor
/// `Q(K, t, mu, eps) = K(K+1)/2 e^2 (2 + log t)^2 p((t - 5K^2/2) / (8 H_{d_mu(eps)}(mu, eps0)))`.
pub fn q_factor(
    k_arms: usize,
    t: u64,
    instance: &GaussianInstance,
    eps: f64,
    eps0: f64,
) -> Result<f64> {
    if t == 0 {
        return Err(Error::Domain {
            term: "Q".into(),
            detail: "log t undefined at t = 0".into(),
        });
    }
    let d = d_mu_index(instance, eps);
    if d >= instance.c_mu() {
        return Err(Error::Domain {
            term: "Q".into(),
            detail: format!("eps = {eps} reaches the largest gap; H_{d} is undefined"),
        });
    }
    let h = big_h(instance, d, eps0)?;
    let k = k_arms as f64;
    let tf = t as f64;
    let arg = (tf - 5.0 * k * k / 2.0) / (8.0 * h);
    Ok(k * (k + 1.0) / 2.0
        * std::f64::consts::E.powi(2)
        * (2.0 + tf.ln()).powi(2)
        * p_small(arg))
}

/// Anytime error bound for a search that has converged `eta` of `n_layers`
/// layers: the converged-layer mass `1 - (1-delta)^(eta/N)` times the
/// per-layer factors `(1 - Q)/(4 sqrt(2(K-1)))` for the unconverged layers
/// above `eta`, times the eta-layer factor `1 - Q`, clamped to [0, 1]. An
/// indicator zeroes the bound once `eps` reaches the largest gap.
///
/// `t` is the sample count at the active eta-layer node; `layer_counts`
/// supplies the counts for layers `eta+1 .. n_layers-1`. The caller is
/// responsible for the theorem's precondition `t >= D_mu` (see [`d_mu`]).
#[allow(clippy::too_many_arguments)]
pub fn error_bound(
    instance: &GaussianInstance,
    t: u64,
    eps: f64,
    eps0: f64,
    delta: f64,
    eta: usize,
    n_layers: usize,
    layer_counts: &[u64],
) -> Result<f64> {
    if n_layers == 0 || eta >= n_layers {
        return Err(Error::InvalidParams(format!(
            "eta = {eta} must be below n_layers = {n_layers}"
        )));
    }
    if layer_counts.len() != n_layers - 1 - eta {
        return Err(Error::InvalidParams(format!(
            "{} layer counts supplied for layers {}..{}",
            layer_counts.len(),
            eta + 1,
            n_layers - 1
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParams("delta must lie in (0, 1)".into()));
    }
    if eps >= instance.delta_max() {
        return Ok(0.0);
    }

    let k = instance.n_arms();
    let eps_layer = eps / n_layers as f64;
    let mut bound = 1.0 - (1.0 - delta).powf(eta as f64 / n_layers as f64);
    let scale = 1.0 / (4.0 * (2.0 * (k as f64 - 1.0)).sqrt());
    for &count in layer_counts {
        bound *= scale * (1.0 - q_factor(k, count, instance, eps_layer, eps0)?);
    }
    bound *= 1.0 - q_factor(k, t, instance, eps_layer, eps0)?;
    Ok(bound.clamp(0.0, 1.0))
}
