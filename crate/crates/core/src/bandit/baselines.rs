//! Baseline searchers sharing the layered tree mechanics: UCT (UCB1 child
//! selection), DNG-MCTS (Thompson sampling from per-node Normal-Gamma
//! posteriors), and uniform random arm selection. None of them carries a
//! stopping rule; they run to the budget and recommend the empirical-best
//! path.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal};
use serde::{Deserialize, Serialize};

use crate::bandit::tree::{NodeId, Tree};
use crate::bandit::{arm_index_of_choices, RunTrace, SearchOutcome, TraceRow, TreeEnv};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct UctParams {
    /// UCB1 exploration constant; sqrt(2) suits rewards in [0, 1].
    pub exploration: f64,
    pub budget: u64,
}

impl Default for UctParams {
    fn default() -> Self {
        Self { exploration: std::f64::consts::SQRT_2, budget: 1000 }
    }
}

/// Normal-Gamma prior over a node's value.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NormalGammaPrior {
    pub mu0: f64,
    pub lambda0: f64,
    pub alpha0: f64,
    pub beta0: f64,
}

impl Default for NormalGammaPrior {
    fn default() -> Self {
        Self { mu0: 0.5, lambda0: 1.0, alpha0: 1.0, beta0: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DngParams {
    pub prior: NormalGammaPrior,
    pub budget: u64,
}

impl Default for DngParams {
    fn default() -> Self {
        Self { prior: NormalGammaPrior::default(), budget: 1000 }
    }
}

/// Conjugate Normal-Gamma posterior, updated one observation at a time.
#[derive(Debug, Clone, Copy)]
pub struct NormalGamma {
    pub mu: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl Default for NormalGamma {
    fn default() -> Self {
        let p = NormalGammaPrior::default();
        Self::from_prior(&p)
    }
}

impl NormalGamma {
    pub fn from_prior(prior: &NormalGammaPrior) -> Self {
        Self { mu: prior.mu0, lambda: prior.lambda0, alpha: prior.alpha0, beta: prior.beta0 }
    }

    /// Fold in one observation.
    pub fn observe(&mut self, x: f64) {
        let lambda_new = self.lambda + 1.0;
        self.beta += self.lambda * (x - self.mu).powi(2) / (2.0 * lambda_new);
        self.mu = (self.lambda * self.mu + x) / lambda_new;
        self.lambda = lambda_new;
        self.alpha += 0.5;
    }

    /// Draw a plausible mean: precision from the Gamma marginal, then the
    /// mean from its conditional normal.
    pub fn sample_mean(&self, rng: &mut ChaCha8Rng) -> f64 {
        let tau = Gamma::new(self.alpha, 1.0 / self.beta)
            .expect("valid gamma parameters")
            .sample(rng)
            .max(f64::MIN_POSITIVE);
        Normal::new(self.mu, (1.0 / (self.lambda * tau)).sqrt())
            .expect("valid normal parameters")
            .sample(rng)
    }
}

fn validate<E: TreeEnv>(env: &E, budget: u64) -> Result<()> {
    if budget == 0 {
        return Err(Error::InvalidParams("budget must be at least 1".into()));
    }
    if env.arity() < 2 {
        return Err(Error::InvalidParams("environment must offer at least two choices".into()));
    }
    Ok(())
}

/// UCT: descend by UCB1 through fully-visited nodes, expand a random
/// unvisited child elsewhere, roll out uniformly, back-propagate. An
/// unvisited child always outranks any visited one (its index is
/// unbounded), which the random expansion step realises.
pub fn run_uct<E: TreeEnv>(
    env: &E,
    params: &UctParams,
    rng: &mut ChaCha8Rng,
) -> Result<SearchOutcome> {
    validate(env, params.budget)?;
    let start = std::time::Instant::now();
    let mut tree: Tree<()> = Tree::new(env.arity(), env.height());
    let mut trace = RunTrace::default();

    for slot in 1..=params.budget {
        let mut node = Tree::<()>::ROOT;
        while !tree.is_terminal(node) && tree.fully_visited(node) {
            let parent_visits = tree.node(node).visits.max(1) as f64;
            let mut best = (0usize, f64::NEG_INFINITY);
            for (child_slot, child) in tree.node(node).children.iter().enumerate() {
                let cid = child.expect("fully visited");
                let n = tree.node(cid);
                let score =
                    n.mean() + params.exploration * (parent_visits.ln() / n.visits as f64).sqrt();
                if score > best.1 {
                    best = (child_slot, score);
                }
            }
            node = tree.child(node, best.0).expect("fully visited");
        }

        let (pull_node, choices) = expand_and_roll(&mut tree, env, node, rng);
        let sample = env.pull(&choices, rng)?;
        backprop(&mut tree, pull_node, sample.reward, |_, _| {});

        trace.rows.push(TraceRow {
            slot,
            arm: arm_index_of_choices(&choices, env.arity()),
            reward: sample.reward,
            raw_mbps: sample.raw_mbps,
            eta: 0,
            wall_clock_ms: start.elapsed().as_secs_f64() * 1e3,
        });
    }

    Ok(SearchOutcome {
        choices: tree.greedy_completion(Tree::<()>::ROOT),
        trace,
        converged: false,
        stop_slot: None,
    })
}

/// DNG-MCTS: at every node sample a mean for each child from its
/// Normal-Gamma posterior (the bare prior for unvisited children) and
/// descend into the argmax; the first unvisited child reached is expanded
/// and rolled out. Rewards update the posteriors along the path.
pub fn run_dng_mcts<E: TreeEnv>(
    env: &E,
    params: &DngParams,
    rng: &mut ChaCha8Rng,
) -> Result<SearchOutcome> {
    validate(env, params.budget)?;
    let start = std::time::Instant::now();
    let prior = params.prior;
    let mut tree: Tree<NormalGamma> = Tree::new(env.arity(), env.height());
    tree.node_mut(Tree::<NormalGamma>::ROOT).extra = NormalGamma::from_prior(&prior);
    let mut trace = RunTrace::default();

    for slot in 1..=params.budget {
        let mut node = Tree::<NormalGamma>::ROOT;
        let pull_node = loop {
            if tree.is_terminal(node) {
                break node;
            }
            let mut best = (0usize, f64::NEG_INFINITY);
            for child_slot in 0..env.arity() {
                let draw = match tree.child(node, child_slot) {
                    Some(cid) if tree.node(cid).visits > 0 => {
                        tree.node(cid).extra.sample_mean(rng)
                    }
                    _ => NormalGamma::from_prior(&prior).sample_mean(rng),
                };
                if draw > best.1 {
                    best = (child_slot, draw);
                }
            }
            let (child_slot, _) = best;
            let cid = match tree.child(node, child_slot) {
                Some(cid) => cid,
                None => {
                    let cid = tree.materialise_child(node, child_slot);
                    tree.node_mut(cid).extra = NormalGamma::from_prior(&prior);
                    cid
                }
            };
            if tree.node(cid).visits == 0 {
                break cid;
            }
            node = cid;
        };

        let mut choices = tree.path_choices(pull_node);
        while choices.len() < env.height() {
            choices.push(rng.random_range(0..env.arity()));
        }
        let sample = env.pull(&choices, rng)?;
        backprop(&mut tree, pull_node, sample.reward, |node, reward| {
            node.extra.observe(reward);
        });

        trace.rows.push(TraceRow {
            slot,
            arm: arm_index_of_choices(&choices, env.arity()),
            reward: sample.reward,
            raw_mbps: sample.raw_mbps,
            eta: 0,
            wall_clock_ms: start.elapsed().as_secs_f64() * 1e3,
        });
    }

    Ok(SearchOutcome {
        choices: tree.greedy_completion(Tree::<NormalGamma>::ROOT),
        trace,
        converged: false,
        stop_slot: None,
    })
}

/// Uniform random arm per slot. Never converges; the recommendation is the
/// single highest-reward pull observed.
pub fn run_random<E: TreeEnv>(
    env: &E,
    budget: u64,
    rng: &mut ChaCha8Rng,
) -> Result<SearchOutcome> {
    validate(env, budget)?;
    let start = std::time::Instant::now();
    let mut trace = RunTrace::default();
    let mut best: Option<(f64, Vec<usize>)> = None;

    for slot in 1..=budget {
        let choices: Vec<usize> =
            (0..env.height()).map(|_| rng.random_range(0..env.arity())).collect();
        let sample = env.pull(&choices, rng)?;
        if best.as_ref().is_none_or(|(r, _)| sample.reward > *r) {
            best = Some((sample.reward, choices.clone()));
        }
        trace.rows.push(TraceRow {
            slot,
            arm: arm_index_of_choices(&choices, env.arity()),
            reward: sample.reward,
            raw_mbps: sample.raw_mbps,
            eta: 0,
            wall_clock_ms: start.elapsed().as_secs_f64() * 1e3,
        });
    }

    Ok(SearchOutcome {
        choices: best.expect("budget >= 1").1,
        trace,
        converged: false,
        stop_slot: None,
    })
}

/// Expand one unvisited child of `node` (uniformly at random) and complete
/// the path with a uniform rollout; terminal nodes pull in place.
fn expand_and_roll<E: TreeEnv, X: Default>(
    tree: &mut Tree<X>,
    env: &E,
    node: NodeId,
    rng: &mut ChaCha8Rng,
) -> (NodeId, Vec<usize>) {
    if tree.is_terminal(node) {
        let choices = tree.path_choices(node);
        return (node, choices);
    }
    let open = tree.unvisited_slots(node);
    let pick = open[rng.random_range(0..open.len())];
    let new_node = match tree.child(node, pick) {
        Some(existing) => existing,
        None => tree.materialise_child(node, pick),
    };
    let mut choices = tree.path_choices(new_node);
    while choices.len() < env.height() {
        choices.push(rng.random_range(0..env.arity()));
    }
    (new_node, choices)
}

/// Credit a reward to a node and all its ancestors.
fn backprop<X>(
    tree: &mut Tree<X>,
    from: NodeId,
    reward: f64,
    mut on_node: impl FnMut(&mut crate::bandit::tree::Node<X>, f64),
) {
    let mut current = Some(from);
    while let Some(id) = current {
        let node = tree.node_mut(id);
        node.visits += 1;
        node.reward_sum += reward;
        on_node(node, reward);
        current = node.parent;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bandit::synthetic::SyntheticGaussianEnv;
    use rand::SeedableRng;

    fn flat_env(means: Vec<f64>) -> SyntheticGaussianEnv {
        let n = means.len();
        SyntheticGaussianEnv::new(n, 1, means, 0.0).unwrap()
    }

    #[test]
    fn uct_visits_every_arm_before_reselecting() {
        let env = flat_env(vec![0.3, 0.8, 0.5]);
        let params = UctParams { exploration: std::f64::consts::SQRT_2, budget: 3 };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let out = run_uct(&env, &params, &mut rng).unwrap();
        let mut arms: Vec<u128> = out.trace.rows.iter().map(|r| r.arm).collect();
        arms.sort_unstable();
        assert_eq!(arms, vec![0, 1, 2]);
    }

    #[test]
    fn greedy_uct_locks_onto_the_empirical_best() {
        let env = flat_env(vec![0.3, 0.8, 0.5]);
        let params = UctParams { exploration: 0.0, budget: 40 };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let out = run_uct(&env, &params, &mut rng).unwrap();
        for row in &out.trace.rows[3..] {
            assert_eq!(row.arm, 1);
        }
        assert_eq!(out.choices, vec![1]);
    }

    #[test]
    fn uct_solves_the_deterministic_two_layer_toy() {
        let env = SyntheticGaussianEnv::new(2, 2, vec![0.10, 0.15, 0.90, 0.20], 0.0).unwrap();
        let params = UctParams { exploration: std::f64::consts::SQRT_2, budget: 400 };
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let out = run_uct(&env, &params, &mut rng).unwrap();
        assert_eq!(out.choices, vec![0, 1]);
        assert!(!out.converged && out.stop_slot.is_none());
    }

    #[test]
    fn normal_gamma_posterior_mean_matches_the_closed_form() {
        let prior = NormalGammaPrior::default();
        let mut ng = NormalGamma::from_prior(&prior);
        let xs = [0.2, 0.4, 0.9, 0.1, 0.6];
        for &x in &xs {
            ng.observe(x);
        }
        let n = xs.len() as f64;
        let mean: f64 = xs.iter().sum::<f64>() / n;
        let expected = (prior.lambda0 * prior.mu0 + n * mean) / (prior.lambda0 + n);
        assert!((ng.mu - expected).abs() < 1e-12);
        assert_eq!(ng.lambda, prior.lambda0 + n);
        assert_eq!(ng.alpha, prior.alpha0 + n / 2.0);
    }

    #[test]
    fn prior_only_selection_is_exchangeable() {
        let env = flat_env(vec![0.5, 0.5, 0.5]);
        let params = DngParams { prior: NormalGammaPrior::default(), budget: 1 };
        let mut counts = [0u32; 3];
        for rep in 0..3000 {
            let mut rng = ChaCha8Rng::seed_from_u64(rep);
            let out = run_dng_mcts(&env, &params, &mut rng).unwrap();
            counts[out.trace.rows[0].arm as usize] += 1;
        }
        for &c in &counts {
            // 1000 expected; 5 sigma of Binomial(3000, 1/3) is about 129.
            assert!((c as i64 - 1000).abs() < 150, "{counts:?}");
        }
    }

    #[test]
    fn dng_solves_the_deterministic_toy_reliably() {
        let env = SyntheticGaussianEnv::new(2, 2, vec![0.10, 0.15, 0.90, 0.20], 0.0).unwrap();
        let params = DngParams { prior: NormalGammaPrior::default(), budget: 600 };
        let mut hits = 0;
        for rep in 0..100 {
            let mut rng = ChaCha8Rng::seed_from_u64(40_000 + rep);
            let out = run_dng_mcts(&env, &params, &mut rng).unwrap();
            if out.choices == vec![0, 1] {
                hits += 1;
            }
        }
        assert!(hits >= 95, "DNG found the optimum in only {hits}/100 runs");
    }

    #[test]
    fn random_arm_frequencies_are_uniform() {
        let env = flat_env(vec![0.1, 0.2, 0.3, 0.4]);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let out = run_random(&env, 100_000, &mut rng).unwrap();
        let mut counts = [0u64; 4];
        for row in &out.trace.rows {
            counts[row.arm as usize] += 1;
        }
        // 3 sigma of Binomial(1e5, 1/4).
        for &c in &counts {
            assert!((c as i64 - 25_000).abs() <= 3 * 137, "{counts:?}");
        }
        assert!(!out.converged);
        assert!(out.trace.rows.iter().all(|r| r.eta == 0));
    }

    #[test]
    fn random_mean_reward_matches_the_arm_average() {
        let means = vec![0.1, 0.2, 0.3, 0.4];
        let avg: f64 = means.iter().sum::<f64>() / means.len() as f64;
        let env = flat_env(means);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let out = run_random(&env, 100_000, &mut rng).unwrap();
        // Sampling error of the arm draw: sd ~ 0.112 / sqrt(1e5).
        assert!((out.trace.mean_reward() - avg).abs() < 3.0 * 0.112 / (100_000f64).sqrt());
    }
}
