//! Integral maximum flow by shortest augmenting paths (Edmonds-Karp).

use std::collections::VecDeque;

#[derive(Clone, Debug)]
pub struct FlowNetwork {
    adj: Vec<Vec<usize>>,
    /// Edge `e` and its reverse `e ^ 1`; `to` and residual capacity.
    to: Vec<usize>,
    residual: Vec<usize>,
}

impl FlowNetwork {
    pub fn new(nodes: usize) -> Self {
        Self {
            adj: vec![Vec::new(); nodes],
            to: Vec::new(),
            residual: Vec::new(),
        }
    }

    pub fn nodes(&self) -> usize {
        self.adj.len()
    }

    /// Adds a directed arc and returns its id.
    pub fn add_edge(&mut self, from: usize, to: usize, capacity: usize) -> usize {
        let id = self.to.len();
        self.to.extend([to, from]);
        self.residual.extend([capacity, 0]);
        self.adj[from].push(id);
        self.adj[to].push(id + 1);
        id
    }

    /// Flow currently carried by arc `edge`.
    pub fn flow_on(&self, edge: usize) -> usize {
        self.residual[edge ^ 1]
    }

    /// Augments until no path remains and returns the total flow pushed.
    pub fn max_flow(&mut self, source: usize, sink: usize) -> usize {
        let mut total = 0;
        loop {
            let mut pred = vec![usize::MAX; self.nodes()];
            let mut seen = vec![false; self.nodes()];
            seen[source] = true;
            let mut queue = VecDeque::from([source]);
            while let Some(u) = queue.pop_front() {
                if u == sink {
                    break;
                }
                for &e in &self.adj[u] {
                    let v = self.to[e];
                    if !seen[v] && self.residual[e] > 0 {
                        seen[v] = true;
                        pred[v] = e;
                        queue.push_back(v);
                    }
                }
            }
            if !seen[sink] {
                return total;
            }
            let mut bottleneck = usize::MAX;
            let mut v = sink;
            while v != source {
                let e = pred[v];
                bottleneck = bottleneck.min(self.residual[e]);
                v = self.to[e ^ 1];
            }
            let mut v = sink;
            while v != source {
                let e = pred[v];
                self.residual[e] -= bottleneck;
                self.residual[e ^ 1] += bottleneck;
                v = self.to[e ^ 1];
            }
            total += bottleneck;
        }
    }

    /// Nodes reachable from `source` in the residual graph: after
    /// [`max_flow`](Self::max_flow) this is the source side of a minimum cut.
    pub fn residual_reachable(&self, source: usize) -> Vec<bool> {
        let mut seen = vec![false; self.nodes()];
        seen[source] = true;
        let mut stack = vec![source];
        while let Some(u) = stack.pop() {
            for &e in &self.adj[u] {
                let v = self.to[e];
                if !seen[v] && self.residual[e] > 0 {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn textbook_instance() {
        // CLRS figure 26.1: max flow 23
        let mut g = FlowNetwork::new(6);
        for (u, v, c) in [
            (0, 1, 16),
            (0, 2, 13),
            (2, 1, 4),
            (1, 3, 12),
            (3, 2, 9),
            (2, 4, 14),
            (4, 3, 7),
            (3, 5, 20),
            (4, 5, 4),
        ] {
            g.add_edge(u, v, c);
        }
        assert_eq!(g.max_flow(0, 5), 23);
    }

    #[test]
    fn disconnected_sink() {
        let mut g = FlowNetwork::new(3);
        g.add_edge(0, 1, 5);
        assert_eq!(g.max_flow(0, 2), 0);
        let side = g.residual_reachable(0);
        assert!(side[0] && side[1] && !side[2]);
    }

    proptest! {
        // max flow equals the capacity of the residual-reachable cut
        #[test]
        fn max_flow_equals_min_cut(edges in prop::collection::vec((0usize..6, 0usize..6, 0usize..7), 0..20)) {
            let mut g = FlowNetwork::new(6);
            let mut arcs = Vec::new();
            for &(u, v, c) in &edges {
                if u != v {
                    g.add_edge(u, v, c);
                    arcs.push((u, v, c));
                }
            }
            let f = g.max_flow(0, 5);
            let side = g.residual_reachable(0);
            prop_assert!(!side[5]);
            let cut: usize = arcs.iter().filter(|(u, v, _)| side[*u] && !side[*v]).map(|a| a.2).sum();
            prop_assert_eq!(f, cut);
        }
    }
}
