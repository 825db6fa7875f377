//! Dinic max-flow on small integer networks.

use std::collections::VecDeque;

#[derive(Debug, Clone)]
struct Edge {
    to: usize,
    rev: usize,
    cap: u64,
}

#[derive(Debug, Clone)]
pub(crate) struct FlowNetwork {
    adj: Vec<Vec<Edge>>,
}

/// Handle for reading back the flow on an edge after `max_flow`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct EdgeRef {
    from: usize,
    index: usize,
    original: u64,
}

impl FlowNetwork {
    pub(crate) fn new(n_nodes: usize) -> Self {
        Self {
            adj: vec![Vec::new(); n_nodes],
        }
    }

    pub(crate) fn add_edge(&mut self, from: usize, to: usize, cap: u64) -> EdgeRef {
        let index = self.adj[from].len();
        let rev = self.adj[to].len() + usize::from(from == to);
        self.adj[from].push(Edge { to, rev, cap });
        self.adj[to].push(Edge {
            to: from,
            rev: index,
            cap: 0,
        });
        EdgeRef {
            from,
            index,
            original: cap,
        }
    }

    pub(crate) fn flow_on(&self, edge: EdgeRef) -> u64 {
        edge.original - self.adj[edge.from][edge.index].cap
    }

    pub(crate) fn max_flow(&mut self, source: usize, sink: usize) -> u64 {
        let n = self.adj.len();
        let mut total = 0;
        loop {
            let mut level = vec![usize::MAX; n];
            level[source] = 0;
            let mut queue = VecDeque::from([source]);
            while let Some(v) = queue.pop_front() {
                for e in &self.adj[v] {
                    if e.cap > 0 && level[e.to] == usize::MAX {
                        level[e.to] = level[v] + 1;
                        queue.push_back(e.to);
                    }
                }
            }
            if level[sink] == usize::MAX {
                return total;
            }
            let mut next = vec![0; n];
            loop {
                let pushed = self.augment(source, sink, u64::MAX, &level, &mut next);
                if pushed == 0 {
                    break;
                }
                total += pushed;
            }
        }
    }

    fn augment(
        &mut self,
        v: usize,
        sink: usize,
        limit: u64,
        level: &[usize],
        next: &mut [usize],
    ) -> u64 {
        if v == sink {
            return limit;
        }
        while next[v] < self.adj[v].len() {
            let i = next[v];
            let Edge { to, rev, cap } = self.adj[v][i];
            if cap > 0 && level[to] == level[v] + 1 {
                let pushed = self.augment(to, sink, limit.min(cap), level, next);
                if pushed > 0 {
                    self.adj[v][i].cap -= pushed;
                    self.adj[to][rev].cap += pushed;
                    return pushed;
                }
            }
            next[v] += 1;
        }
        0
    }
}
