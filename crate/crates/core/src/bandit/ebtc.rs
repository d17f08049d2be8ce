//! Empirical-Best / Transportation-Cost child selection and the GLR layer
//! stopping rule.
//!
//! At a fully-visited node the leader is the child with the best empirical
//! mean. The challenger minimises the deviation-to-swap statistic
//! `(mean_B - mean_c + eps') / sqrt(1/N_B + 1/N_c)` — the child that is
//! cheapest to confuse with the leader at the layer slack `eps'`. A running
//! target proportion keeps leader and challenger visits near balance, and
//! the layer is declared converged once the smallest statistic over all
//! rivals clears the threshold `sqrt(2 g(N, delta'))`.

use std::collections::HashMap;

use crate::bandit::tree::{NodeId, Tree};
use crate::error::{Error, Result};

/// Running state of one (leader, challenger) pair at a node.
#[derive(Debug, Clone, Copy)]
pub struct PairStats {
    /// Times this ordered pair has been the (leader, challenger) choice.
    pub count: u64,
    /// Running mean of the adaptive proportion; starts at 1/2.
    pub beta_bar: f64,
    /// Times the challenger was selected while this pair was active.
    pub challenger_picks: u64,
}

impl Default for PairStats {
    fn default() -> Self {
        Self { count: 0, beta_bar: 0.5, challenger_picks: 0 }
    }
}

/// Per-node bookkeeping for the EB-TC sampling rule.
#[derive(Debug, Clone, Default)]
pub struct EbStats {
    pub pairs: HashMap<(u16, u16), PairStats>,
}

fn child_stats<X>(tree: &Tree<X>, node: NodeId) -> Result<Vec<(usize, f64, u64)>> {
    let mut out = Vec::with_capacity(tree.arity);
    for (slot, child) in tree.node(node).children.iter().enumerate() {
        match child {
            Some(cid) if tree.node(*cid).visits > 0 => {
                out.push((slot, tree.node(*cid).mean(), tree.node(*cid).visits));
            }
            _ => {
                return Err(Error::Contract(format!(
                    "child {slot} of node {node} has no visits; selection requires every child visited"
                )));
            }
        }
    }
    Ok(out)
}

/// The child with the largest empirical mean (lowest slot on ties).
pub fn eb_leader<X>(tree: &Tree<X>, node: NodeId) -> Result<usize> {
    let stats = child_stats(tree, node)?;
    let mut best = stats[0];
    for s in &stats[1..] {
        if s.1 > best.1 {
            best = *s;
        }
    }
    Ok(best.0)
}

/// The transportation-cost statistic of a rival against the leader.
fn tc_score(leader_mean: f64, leader_visits: u64, mean: f64, visits: u64, eps_layer: f64) -> f64 {
    (leader_mean - mean + eps_layer)
        / (1.0 / leader_visits as f64 + 1.0 / visits as f64).sqrt()
}

/// The challenger: the non-leader child minimising the transportation-cost
/// statistic (lowest slot on ties).
pub fn tc_challenger<X>(
    tree: &Tree<X>,
    node: NodeId,
    leader: usize,
    eps_layer: f64,
) -> Result<usize> {
    let stats = child_stats(tree, node)?;
    if stats.len() < 2 {
        return Err(Error::NoChallenger);
    }
    let (_, leader_mean, leader_visits) = stats[leader];
    let mut best: Option<(usize, f64)> = None;
    for &(slot, mean, visits) in &stats {
        if slot == leader {
            continue;
        }
        let score = tc_score(leader_mean, leader_visits, mean, visits, eps_layer);
        if best.is_none_or(|(_, b)| score < b) {
            best = Some((slot, score));
        }
    }
    Ok(best.expect("at least one rival").0)
}

/// Fold one (leader, challenger) round into the pair's running proportion
/// and pick who gets the next sample: the challenger while its conditional
/// count lags `(1 - beta_bar) * T`, the leader otherwise.
pub fn update_proportions(
    tree: &mut Tree<EbStats>,
    node: NodeId,
    leader: usize,
    challenger: usize,
) -> usize {
    debug_assert_ne!(leader, challenger);
    let leader_visits = tree.child(node, leader).map(|c| tree.node(c).visits).unwrap_or(0);
    let challenger_visits =
        tree.child(node, challenger).map(|c| tree.node(c).visits).unwrap_or(0);
    let beta = challenger_visits as f64 / (leader_visits + challenger_visits) as f64;

    let pair = tree
        .node_mut(node)
        .extra
        .pairs
        .entry((leader as u16, challenger as u16))
        .or_default();
    pair.count += 1;
    pair.beta_bar = ((pair.count - 1) as f64 * pair.beta_bar + beta) / pair.count as f64;

    if (pair.challenger_picks as f64) <= (1.0 - pair.beta_bar) * pair.count as f64 {
        pair.challenger_picks += 1;
        challenger
    } else {
        leader
    }
}

/// Threshold exponent `g(n, delta) = 2 Y(log((arity-1)/delta)/2)
/// + 4 log(4 + log(n/2))` with `Y(x) = x + log(x)`.
///
/// Returns `None` whenever an inner logarithm leaves its domain (tiny `n`
/// or degenerate `delta`); callers treat that as "not ready to stop".
pub fn glr_exponent(arity: usize, n: u64, delta: f64) -> Option<f64> {
    if arity < 2 || n < 2 || !(delta > 0.0) {
        return None;
    }
    let x = ((arity as f64 - 1.0) / delta).ln() / 2.0;
    if x <= 0.0 {
        return None;
    }
    let inner = 4.0 + (n as f64 / 2.0).ln();
    if inner <= 0.0 {
        return None;
    }
    Some(2.0 * (x + x.ln()) + 4.0 * inner.ln())
}

/// GLR layer stopping check at `node`: stopped once every rival's
/// transportation-cost statistic against the empirical best clears
/// `sqrt(2 g(N_node, delta_layer))`. Returns the winning child slot, or
/// `None` while the layer is undecided (including every not-ready case:
/// unvisited children, a lone child, or `g` outside its domain).
pub fn glr_stop_check<X>(
    tree: &Tree<X>,
    node: NodeId,
    delta_layer: f64,
    eps_layer: f64,
) -> Option<usize> {
    let stats = child_stats(tree, node).ok()?;
    if stats.len() < 2 {
        return None;
    }
    let g = glr_exponent(stats.len(), tree.node(node).visits, delta_layer)?;
    let threshold = (2.0 * g).sqrt();

    let best = eb_leader(tree, node).expect("children visited");
    let (_, best_mean, best_visits) = stats[best];
    let min_stat = stats
        .iter()
        .filter(|(slot, _, _)| *slot != best)
        .map(|&(_, mean, visits)| tc_score(best_mean, best_visits, mean, visits, eps_layer))
        .fold(f64::INFINITY, f64::min);
    (min_stat >= threshold).then_some(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// A node with the given per-child (mean, visits), all materialised.
    fn scripted_node(children: &[(f64, u64)]) -> (Tree<EbStats>, NodeId) {
        let mut tree: Tree<EbStats> = Tree::new(children.len(), 1);
        for (slot, &(mean, visits)) in children.iter().enumerate() {
            let id = tree.materialise_child(Tree::<EbStats>::ROOT, slot);
            tree.node_mut(id).visits = visits;
            tree.node_mut(id).reward_sum = mean * visits as f64;
        }
        tree.node_mut(Tree::<EbStats>::ROOT).visits =
            children.iter().map(|&(_, v)| v).sum();
        (tree, Tree::<EbStats>::ROOT)
    }

    #[test]
    fn leader_is_the_argmax_with_low_slot_ties() {
        let (tree, node) = scripted_node(&[(0.2, 3), (0.9, 3), (0.4, 3)]);
        assert_eq!(eb_leader(&tree, node).unwrap(), 1);

        let (tree, node) = scripted_node(&[(0.5, 3), (0.5, 3), (0.5, 3)]);
        assert_eq!(eb_leader(&tree, node).unwrap(), 0);
    }

    #[test]
    fn leader_is_invariant_to_a_constant_shift() {
        let (tree, node) = scripted_node(&[(0.1, 4), (0.7, 2), (0.3, 9)]);
        let before = eb_leader(&tree, node).unwrap();
        let (tree, node) = scripted_node(&[(0.3, 4), (0.9, 2), (0.5, 9)]);
        assert_eq!(eb_leader(&tree, node).unwrap(), before);
    }

    #[test]
    fn leader_requires_every_child_visited() {
        let mut tree: Tree<EbStats> = Tree::new(2, 1);
        let id = tree.materialise_child(Tree::<EbStats>::ROOT, 0);
        tree.node_mut(id).visits = 1;
        assert!(matches!(
            eb_leader(&tree, Tree::<EbStats>::ROOT),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn challenger_matches_the_hand_evaluated_scores() {
        // Leader (0.9, 10); rivals (0.2, 5) and (0.4, 5); eps' = 0.01.
        // Scores ~1.296 and ~0.931: the second rival is the challenger.
        let (tree, node) = scripted_node(&[(0.9, 10), (0.2, 5), (0.4, 5)]);
        let leader = eb_leader(&tree, node).unwrap();
        assert_eq!(leader, 0);
        let score1 = tc_score(0.9, 10, 0.2, 5, 0.01);
        let score2 = tc_score(0.9, 10, 0.4, 5, 0.01);
        assert!((score1 - 1.296).abs() < 1e-3, "{score1}");
        assert!((score2 - 0.931).abs() < 1e-3, "{score2}");
        assert_eq!(tc_challenger(&tree, node, leader, 0.01).unwrap(), 2);
    }

    #[test]
    fn challenger_ties_break_to_the_lower_slot() {
        let (tree, node) = scripted_node(&[(0.9, 10), (0.4, 5), (0.4, 5)]);
        assert_eq!(tc_challenger(&tree, node, 0, 0.01).unwrap(), 1);
    }

    #[test]
    fn raising_a_rivals_mean_weakly_favours_it() {
        let (tree, node) = scripted_node(&[(0.9, 10), (0.2, 5), (0.3, 5)]);
        assert_eq!(tc_challenger(&tree, node, 0, 0.01).unwrap(), 2);
        // Rival 1 improves past rival 2: it becomes the challenger.
        let (tree, node) = scripted_node(&[(0.9, 10), (0.5, 5), (0.3, 5)]);
        assert_eq!(tc_challenger(&tree, node, 0, 0.01).unwrap(), 1);
    }

    #[test]
    fn a_single_child_has_no_challenger() {
        let (tree, node) = scripted_node(&[(0.9, 10)]);
        assert!(matches!(tc_challenger(&tree, node, 0, 0.01), Err(Error::NoChallenger)));
    }

    #[test]
    fn proportions_follow_the_recurrence_from_a_half() {
        let (mut tree, node) = scripted_node(&[(0.9, 10), (0.4, 5)]);
        assert_eq!(PairStats::default().beta_bar, 0.5);

        // First pair visit with N_B = 10, N_O = 5: beta = beta_bar = 1/3,
        // challenger count 0 <= (1 - 1/3) * 1, so the challenger is picked.
        let picked = update_proportions(&mut tree, node, 0, 1);
        assert_eq!(picked, 1);
        let pair = tree.node(node).extra.pairs[&(0, 1)];
        assert_eq!(pair.count, 1);
        assert!((pair.beta_bar - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(pair.challenger_picks, 1);
    }

    #[test]
    fn balanced_counts_alternate_between_leader_and_challenger() {
        // Keep both child counts equal by crediting whichever side is
        // picked; the pick sequence must then stay within one of parity.
        let (mut tree, node) = scripted_node(&[(0.9, 1), (0.4, 1)]);
        let mut picks = [0u64; 2];
        for _ in 0..200 {
            let picked = update_proportions(&mut tree, node, 0, 1);
            picks[picked] += 1;
            let cid = tree.child(node, picked).unwrap();
            tree.node_mut(cid).visits += 1;
        }
        assert!((picks[0] as i64 - picks[1] as i64).abs() <= 1, "{picks:?}");
    }

    #[test]
    fn glr_exponent_matches_the_hand_value() {
        // arity 7, delta 0.1, n = 100.
        let g = glr_exponent(7, 100, 0.1).unwrap();
        assert!((g - 13.80).abs() < 5e-3, "{g}");
        assert!(((2.0 * g).sqrt() - 5.254).abs() < 1e-3);
    }

    #[test]
    fn glr_exponent_guards_its_domain() {
        assert!(glr_exponent(7, 1, 0.1).is_none());
        assert!(glr_exponent(1, 100, 0.1).is_none());
        assert!(glr_exponent(2, 100, 0.0).is_none());
        // delta so large the first logarithm goes non-positive.
        assert!(glr_exponent(2, 100, 2.0).is_none());
    }

    #[test]
    fn dominant_child_with_huge_counts_stops_the_layer() {
        let (tree, node) = scripted_node(&[(0.9, 50_000), (0.1, 50_000), (0.2, 50_000)]);
        assert_eq!(glr_stop_check(&tree, node, 0.05, 0.01), Some(0));
    }

    #[test]
    fn undecided_or_not_ready_layers_do_not_stop() {
        // Close means, few samples.
        let (tree, node) = scripted_node(&[(0.52, 10), (0.50, 10)]);
        assert_eq!(glr_stop_check(&tree, node, 0.05, 0.01), None);

        // Tiny node count: g outside its domain.
        let (mut tree, node) = scripted_node(&[(0.9, 1), (0.1, 1)]);
        tree.node_mut(node).visits = 1;
        assert_eq!(glr_stop_check(&tree, node, 0.05, 0.01), None);

        // Winner equals the empirical leader at the stopping slot.
        let (tree, node) = scripted_node(&[(0.3, 40_000), (0.8, 40_000)]);
        assert_eq!(glr_stop_check(&tree, node, 0.05, 0.01), eb_leader(&tree, node).ok());
    }
}
