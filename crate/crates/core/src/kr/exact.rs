//! Exact transport by the network simplex method on the bipartite
//! transportation graph. The basis is a spanning tree of `P + M − 1` arcs;
//! entering arcs are priced in blocks over the dense cost matrix.

use super::{check_delta, DiscreteMeasurePair, KrMethod, KrResult, PlanEntry};
use crate::{Error, Result};

pub const DEFAULT_SUPPORT_CAP: usize = 4096;

pub fn kr_distance_exact(pair: &DiscreteMeasurePair, delta: f64) -> Result<KrResult> {
    kr_distance_exact_with_cap(pair, delta, DEFAULT_SUPPORT_CAP)
}

pub fn kr_distance_exact_with_cap(pair: &DiscreteMeasurePair, delta: f64, cap: usize) -> Result<KrResult> {
    check_delta(delta)?;
    let size = pair.support_size();
    if size > cap {
        return Err(Error::Capacity { size, cap });
    }
    let (np, nm) = (pair.plus.len(), pair.minus.len());
    if np == 0 || nm == 0 || pair.total_mass == 0.0 {
        return Ok(KrResult {
            value: 0.0,
            delta,
            method: KrMethod::ExactFlow,
            gap: 0.0,
            iterations: Some(0),
            coarsening_error: None,
            converged: true,
            plan: Some(Vec::new()),
        });
    }
    let cost = pair.cost_matrix(delta);
    let supply: Vec<f64> = pair.plus.iter().map(|p| p.1).collect();
    let demand: Vec<f64> = pair.minus.iter().map(|p| p.1).collect();
    let mut tree = Tree::northwest_corner(&supply, &demand);
    let pivots = tree.optimize(&cost)?;

    let mut value = 0.0;
    let mut plan = Vec::new();
    for arc in &tree.arcs {
        if arc.flow > 0.0 {
            value += arc.flow * cost[arc.src * nm + arc.dst];
            plan.push(PlanEntry { src: pair.plus[arc.src].0, dst: pair.minus[arc.dst].0, mass: arc.flow });
        }
    }
    Ok(KrResult {
        value,
        delta,
        method: KrMethod::ExactFlow,
        gap: 0.0,
        iterations: Some(pivots),
        coarsening_error: None,
        converged: true,
        plan: Some(plan),
    })
}

#[derive(Clone, Copy, Debug)]
struct Arc {
    src: usize,
    dst: usize,
    flow: f64,
}

/// Spanning-tree basis. Nodes `0..np` are sources, `np..np+nm` sinks; the
/// tree is rooted at source 0.
struct Tree {
    np: usize,
    nm: usize,
    arcs: Vec<Arc>,
    adj: Vec<Vec<usize>>,
    parent_arc: Vec<usize>,
    depth: Vec<usize>,
    u: Vec<f64>,
    v: Vec<f64>,
    stack: Vec<usize>,
}

impl Tree {
    fn northwest_corner(supply: &[f64], demand: &[f64]) -> Self {
        let (np, nm) = (supply.len(), demand.len());
        let mut arcs = Vec::with_capacity(np + nm - 1);
        let (mut i, mut j) = (0, 0);
        let (mut s, mut d) = (supply[0], demand[0]);
        loop {
            let f = s.min(d);
            arcs.push(Arc { src: i, dst: j, flow: f });
            s -= f;
            d -= f;
            if i + 1 == np && j + 1 == nm {
                break;
            }
            // advance exactly one index so the basis keeps np + nm − 1 arcs
            if (s <= d && i + 1 < np) || j + 1 == nm {
                i += 1;
                s = supply[i];
            } else {
                j += 1;
                d = demand[j];
            }
        }
        let mut adj = vec![Vec::new(); np + nm];
        for (k, a) in arcs.iter().enumerate() {
            adj[a.src].push(k);
            adj[np + a.dst].push(k);
        }
        Tree {
            np,
            nm,
            arcs,
            adj,
            parent_arc: vec![usize::MAX; np + nm],
            depth: vec![0; np + nm],
            u: vec![0.0; np],
            v: vec![0.0; nm],
            stack: Vec::new(),
        }
    }

    fn other(&self, arc: usize, node: usize) -> usize {
        let a = self.arcs[arc];
        if node < self.np {
            self.np + a.dst
        } else {
            a.src
        }
    }

    /// Recomputes parents, depths and potentials `u_i + v_j = c_ij`.
    fn relabel(&mut self, cost: &[f64]) {
        let nm = self.nm;
        self.parent_arc[0] = usize::MAX;
        self.depth[0] = 0;
        self.u[0] = 0.0;
        self.stack.clear();
        self.stack.push(0);
        while let Some(node) = self.stack.pop() {
            for idx in 0..self.adj[node].len() {
                let k = self.adj[node][idx];
                if k == self.parent_arc[node] {
                    continue;
                }
                let next = self.other(k, node);
                self.parent_arc[next] = k;
                self.depth[next] = self.depth[node] + 1;
                let a = self.arcs[k];
                let c = cost[a.src * nm + a.dst];
                if next < self.np {
                    self.u[next] = c - self.v[a.dst];
                } else {
                    self.v[a.dst] = c - self.u[a.src];
                }
                self.stack.push(next);
            }
        }
    }

    fn optimize(&mut self, cost: &[f64]) -> Result<usize> {
        let (np, nm) = (self.np, self.nm);
        let total = np * nm;
        let cmax = cost.iter().cloned().fold(0.0, f64::max);
        let tol = 1e-13 * cmax.max(1e-300);
        let block = ((total as f64).sqrt().ceil() as usize).max(16).min(total);
        let max_pivots = 50 * total + 1000;
        let mut cursor = 0;
        let mut pivots = 0;
        let mut path_q = Vec::new();
        let mut path_p = Vec::new();
        self.relabel(cost);
        loop {
            // block pricing: most negative reduced cost within the first
            // block (cyclically from the cursor) that contains a candidate
            let mut best = -tol;
            let mut entering = usize::MAX;
            let mut scanned = 0;
            while scanned < total {
                let end = (scanned + block).min(total);
                for _ in scanned..end {
                    let i = cursor / nm;
                    let j = cursor % nm;
                    let r = cost[cursor] - self.u[i] - self.v[j];
                    if r < best {
                        best = r;
                        entering = cursor;
                    }
                    cursor += 1;
                    if cursor == total {
                        cursor = 0;
                    }
                }
                scanned = end;
                if entering != usize::MAX {
                    break;
                }
            }
            if entering == usize::MAX {
                return Ok(pivots);
            }
            pivots += 1;
            if pivots > max_pivots {
                return Err(Error::domain("network simplex exceeded its pivot limit"));
            }
            let (p, q) = (entering / nm, entering % nm);

            // tree path between sink q and source p through their common ancestor
            path_q.clear();
            path_p.clear();
            let mut a = np + q;
            let mut b = p;
            while self.depth[a] > self.depth[b] {
                let k = self.parent_arc[a];
                path_q.push(k);
                a = self.other(k, a);
            }
            while self.depth[b] > self.depth[a] {
                let k = self.parent_arc[b];
                path_p.push(k);
                b = self.other(k, b);
            }
            while a != b {
                let k = self.parent_arc[a];
                path_q.push(k);
                a = self.other(k, a);
                let k = self.parent_arc[b];
                path_p.push(k);
                b = self.other(k, b);
            }
            // cycle: entering arc (+), then q → ancestor → p alternating −, +, …
            let cycle: Vec<usize> = path_q.iter().chain(path_p.iter().rev()).copied().collect();
            let mut theta = f64::INFINITY;
            let mut leaving = usize::MAX;
            for (pos, &k) in cycle.iter().enumerate() {
                if pos % 2 == 0 && self.arcs[k].flow < theta {
                    theta = self.arcs[k].flow;
                    leaving = k;
                }
            }
            for (pos, &k) in cycle.iter().enumerate() {
                let f = &mut self.arcs[k].flow;
                if pos % 2 == 0 {
                    *f = if k == leaving { 0.0 } else { (*f - theta).max(0.0) };
                } else {
                    *f += theta;
                }
            }
            // the entering arc reuses the leaving arc's slot
            let old = self.arcs[leaving];
            for node in [old.src, np + old.dst] {
                let list = &mut self.adj[node];
                let pos = list.iter().position(|&k| k == leaving).expect("tree arc");
                list.swap_remove(pos);
            }
            self.arcs[leaving] = Arc { src: p, dst: q, flow: theta };
            self.adj[p].push(leaving);
            self.adj[np + q].push(leaving);
            self.relabel(cost);
        }
    }
}
