//! Dinic's blocking-flow max-flow on `i128` capacities, iterative throughout so
//! deep level graphs cannot overflow the call stack.

use std::collections::VecDeque;

const UNSEEN: u32 = u32::MAX;

pub(crate) struct Network {
    adj: Vec<Vec<u32>>,
    to: Vec<u32>,
    cap: Vec<i128>,
}

impl Network {
    pub fn new(nodes: usize) -> Network {
        Network {
            adj: vec![Vec::new(); nodes],
            to: Vec::new(),
            cap: Vec::new(),
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.adj.len()
    }

    /// Adds `u → v` with capacity `c_uv` and its reverse arc with `c_vu`.
    /// An undirected edge of capacity `c` is `add_pair(u, v, c, c)`.
    pub fn add_pair(&mut self, u: usize, v: usize, c_uv: i128, c_vu: i128) {
        debug_assert!(c_uv >= 0 && c_vu >= 0);
        let id = self.to.len() as u32;
        self.to.push(v as u32);
        self.cap.push(c_uv);
        self.adj[u].push(id);
        self.to.push(u as u32);
        self.cap.push(c_vu);
        self.adj[v].push(id + 1);
    }

    fn levels(&self, s: usize, t: usize, level: &mut [u32]) -> bool {
        level.fill(UNSEEN);
        level[s] = 0;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &a in &self.adj[u] {
                let v = self.to[a as usize] as usize;
                if self.cap[a as usize] > 0 && level[v] == UNSEEN {
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        level[t] != UNSEEN
    }

    /// Maximum `s → t` flow. Residual capacities are left in place for
    /// [`Network::residual_reachable`].
    pub fn max_flow(&mut self, s: usize, t: usize) -> i128 {
        assert_ne!(s, t);
        let n = self.num_nodes();
        let mut level = vec![UNSEEN; n];
        let mut next = vec![0usize; n];
        let mut path: Vec<u32> = Vec::new();
        let mut total: i128 = 0;
        while self.levels(s, t, &mut level) {
            next.fill(0);
            path.clear();
            let mut u = s;
            loop {
                if u == t {
                    let f = path.iter().map(|&a| self.cap[a as usize]).min().unwrap();
                    let mut cut_at = path.len();
                    for (i, &a) in path.iter().enumerate() {
                        self.cap[a as usize] -= f;
                        self.cap[(a ^ 1) as usize] += f;
                        if self.cap[a as usize] == 0 && cut_at == path.len() {
                            cut_at = i;
                        }
                    }
                    total += f;
                    // retreat to the tail of the first saturated arc
                    path.truncate(cut_at);
                    u = path.last().map(|&a| self.to[a as usize] as usize).unwrap_or(s);
                    continue;
                }
                let mut advanced = false;
                while next[u] < self.adj[u].len() {
                    let a = self.adj[u][next[u]];
                    let v = self.to[a as usize] as usize;
                    if self.cap[a as usize] > 0 && level[v] == level[u] + 1 {
                        path.push(a);
                        u = v;
                        advanced = true;
                        break;
                    }
                    next[u] += 1;
                }
                if advanced {
                    continue;
                }
                // dead end: remove u from the level graph and step back
                level[u] = UNSEEN;
                match path.pop() {
                    None => break,
                    Some(a) => {
                        u = self.to[(a ^ 1) as usize] as usize;
                        next[u] += 1;
                    }
                }
            }
        }
        total
    }

    /// Nodes reachable from `s` through arcs with positive residual capacity.
    pub fn residual_reachable(&self, s: usize) -> Vec<bool> {
        let mut seen = vec![false; self.num_nodes()];
        seen[s] = true;
        let mut stack = vec![s];
        while let Some(u) = stack.pop() {
            for &a in &self.adj[u] {
                let v = self.to[a as usize] as usize;
                if self.cap[a as usize] > 0 && !seen[v] {
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

    #[test]
    fn classic_directed_instance() {
        // CLRS figure 26.1: max flow 23
        let mut g = Network::new(6);
        for (u, v, c) in [
            (0, 1, 16),
            (0, 2, 13),
            (1, 3, 12),
            (2, 1, 4),
            (2, 4, 14),
            (3, 2, 9),
            (3, 5, 20),
            (4, 3, 7),
            (4, 5, 4),
        ] {
            g.add_pair(u, v, c, 0);
        }
        assert_eq!(g.max_flow(0, 5), 23);
        let side = g.residual_reachable(0);
        assert!(side[0] && !side[5]);
    }

    #[test]
    fn undirected_path_and_disconnected() {
        let mut g = Network::new(3);
        g.add_pair(0, 1, 5, 5);
        g.add_pair(1, 2, 3, 3);
        assert_eq!(g.max_flow(2, 0), 3);
        let mut g = Network::new(3);
        g.add_pair(0, 1, 5, 5);
        assert_eq!(g.max_flow(0, 2), 0);
    }
}
