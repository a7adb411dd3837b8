//! Dinic max-flow / min-cut on f64 capacities, used by the expansion moves.

const EPS: f64 = 1e-12;

#[derive(Debug, Clone)]
struct Edge {
    to: u32,
    cap: f64,
}

/// Flow network with implicit residual edges (edge i pairs with i ^ 1).
pub struct FlowGraph {
    edges: Vec<Edge>,
    head: Vec<Vec<u32>>,
    level: Vec<i32>,
    iter: Vec<usize>,
}

impl FlowGraph {
    pub fn new(n: usize) -> FlowGraph {
        FlowGraph {
            edges: Vec::new(),
            head: vec![Vec::new(); n],
            level: vec![0; n],
            iter: vec![0; n],
        }
    }

    pub fn node_count(&self) -> usize {
        self.head.len()
    }

    /// Directed edge u -> v with capacity `cap` (reverse capacity `rev_cap`).
    pub fn add_edge(&mut self, u: u32, v: u32, cap: f64, rev_cap: f64) {
        debug_assert!(cap >= 0.0 && rev_cap >= 0.0);
        let id = self.edges.len() as u32;
        self.edges.push(Edge { to: v, cap });
        self.edges.push(Edge { to: u, cap: rev_cap });
        self.head[u as usize].push(id);
        self.head[v as usize].push(id + 1);
    }

    fn bfs(&mut self, s: u32, t: u32) -> bool {
        self.level.fill(-1);
        let mut queue = std::collections::VecDeque::new();
        self.level[s as usize] = 0;
        queue.push_back(s);
        while let Some(u) = queue.pop_front() {
            for &eid in &self.head[u as usize] {
                let e = &self.edges[eid as usize];
                if e.cap > EPS && self.level[e.to as usize] < 0 {
                    self.level[e.to as usize] = self.level[u as usize] + 1;
                    queue.push_back(e.to);
                }
            }
        }
        self.level[t as usize] >= 0
    }

    fn dfs(&mut self, u: u32, t: u32, pushed: f64) -> f64 {
        if u == t {
            return pushed;
        }
        while self.iter[u as usize] < self.head[u as usize].len() {
            let eid = self.head[u as usize][self.iter[u as usize]] as usize;
            let (to, cap) = (self.edges[eid].to, self.edges[eid].cap);
            if cap > EPS && self.level[to as usize] == self.level[u as usize] + 1 {
                let d = self.dfs(to, t, pushed.min(cap));
                if d > EPS {
                    self.edges[eid].cap -= d;
                    self.edges[eid ^ 1].cap += d;
                    return d;
                }
            }
            self.iter[u as usize] += 1;
        }
        0.0
    }

    /// Runs Dinic to completion; returns the max-flow value.
    pub fn max_flow(&mut self, s: u32, t: u32) -> f64 {
        assert_ne!(s, t);
        let mut flow = 0.0;
        while self.bfs(s, t) {
            self.iter.fill(0);
            loop {
                let f = self.dfs(s, t, f64::INFINITY);
                if f <= EPS {
                    break;
                }
                flow += f;
            }
        }
        flow
    }

    /// After `max_flow`: the source side of the min cut (nodes reachable in
    /// the residual graph).
    pub fn min_cut_source_side(&self, s: u32) -> Vec<bool> {
        let mut side = vec![false; self.head.len()];
        let mut queue = std::collections::VecDeque::new();
        side[s as usize] = true;
        queue.push_back(s);
        while let Some(u) = queue.pop_front() {
            for &eid in &self.head[u as usize] {
                let e = &self.edges[eid as usize];
                if e.cap > EPS && !side[e.to as usize] {
                    side[e.to as usize] = true;
                    queue.push_back(e.to);
                }
            }
        }
        side
    }
}
