//! Arena-backed layered search tree.
//!
//! Every internal node has the same arity (one child per configuration of
//! the station at the next layer); terminal nodes sit at the configured
//! height and correspond to complete allocations. Children are materialised
//! lazily on expansion.

pub type NodeId = usize;

#[derive(Debug, Clone)]
pub struct Node<X> {
    pub parent: Option<NodeId>,
    pub depth: usize,
    /// Configuration index chosen at the parent to reach this node
    /// (zero for the root).
    pub choice: usize,
    /// One slot per configuration; `None` until materialised. Empty for
    /// terminal nodes.
    pub children: Vec<Option<NodeId>>,
    pub visits: u64,
    pub reward_sum: f64,
    /// Per-algorithm bookkeeping.
    pub extra: X,
}

impl<X> Node<X> {
    pub fn mean(&self) -> f64 {
        if self.visits == 0 {
            0.0
        } else {
            self.reward_sum / self.visits as f64
        }
    }
}

#[derive(Debug, Clone)]
pub struct Tree<X> {
    pub arity: usize,
    pub height: usize,
    pub nodes: Vec<Node<X>>,
}

impl<X: Default> Tree<X> {
    pub fn new(arity: usize, height: usize) -> Self {
        let root = Node {
            parent: None,
            depth: 0,
            choice: 0,
            children: if height == 0 { Vec::new() } else { vec![None; arity] },
            visits: 0,
            reward_sum: 0.0,
            extra: X::default(),
        };
        Self { arity, height, nodes: vec![root] }
    }

    /// Create the child in `slot`; must not already exist.
    pub fn materialise_child(&mut self, id: NodeId, slot: usize) -> NodeId {
        debug_assert!(self.nodes[id].children[slot].is_none());
        let depth = self.nodes[id].depth + 1;
        let child = Node {
            parent: Some(id),
            depth,
            choice: slot,
            children: if depth == self.height { Vec::new() } else { vec![None; self.arity] },
            visits: 0,
            reward_sum: 0.0,
            extra: X::default(),
        };
        self.nodes.push(child);
        let new_id = self.nodes.len() - 1;
        self.nodes[id].children[slot] = Some(new_id);
        new_id
    }
}

impl<X> Tree<X> {
    pub const ROOT: NodeId = 0;

    pub fn node(&self, id: NodeId) -> &Node<X> {
        &self.nodes[id]
    }

    pub fn node_mut(&mut self, id: NodeId) -> &mut Node<X> {
        &mut self.nodes[id]
    }

    pub fn is_terminal(&self, id: NodeId) -> bool {
        self.nodes[id].depth == self.height
    }

    pub fn child(&self, id: NodeId, slot: usize) -> Option<NodeId> {
        self.nodes[id].children[slot]
    }

    /// Have all children been materialised and visited at least once?
    pub fn fully_visited(&self, id: NodeId) -> bool {
        self.nodes[id]
            .children
            .iter()
            .all(|c| c.is_some_and(|cid| self.nodes[cid].visits > 0))
    }

    /// Slots whose child does not exist yet or has never been visited.
    pub fn unvisited_slots(&self, id: NodeId) -> Vec<usize> {
        self.nodes[id]
            .children
            .iter()
            .enumerate()
            .filter(|(_, c)| c.is_none_or(|cid| self.nodes[cid].visits == 0))
            .map(|(slot, _)| slot)
            .collect()
    }

    /// Choices along the root-to-node path.
    pub fn path_choices(&self, id: NodeId) -> Vec<usize> {
        let mut choices = Vec::with_capacity(self.nodes[id].depth);
        let mut cur = id;
        while let Some(parent) = self.nodes[cur].parent {
            choices.push(self.nodes[cur].choice);
            cur = parent;
        }
        choices.reverse();
        choices
    }

    /// Child slot with the best empirical mean among visited children
    /// (lowest slot on ties); `None` if no child has been visited.
    pub fn best_visited_child(&self, id: NodeId) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (slot, child) in self.nodes[id].children.iter().enumerate() {
            if let Some(cid) = child {
                let node = &self.nodes[*cid];
                if node.visits > 0 && best.is_none_or(|(_, m)| node.mean() > m) {
                    best = Some((slot, node.mean()));
                }
            }
        }
        best.map(|(slot, _)| slot)
    }

    /// Complete a path from `from` down to the terminal layer by
    /// empirical-best descent, taking slot 0 wherever nothing has been
    /// visited yet.
    pub fn greedy_completion(&self, from: NodeId) -> Vec<usize> {
        let mut choices = self.path_choices(from);
        let mut cur = from;
        while choices.len() < self.height {
            match self.best_visited_child(cur) {
                Some(slot) => {
                    choices.push(slot);
                    match self.child(cur, slot) {
                        Some(cid) => cur = cid,
                        None => break,
                    }
                }
                None => break,
            }
        }
        // Anything still missing defaults to the first configuration.
        while choices.len() < self.height {
            choices.push(0);
        }
        choices
    }
}
