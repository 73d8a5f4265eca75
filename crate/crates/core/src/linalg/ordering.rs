//! Fill-reducing ordering by recursive level-structure dissection of the
//! symmetrized sparsity graph.

const LEAF_SIZE: usize = 48;

/// Undirected adjacency of the pattern of `A + A^T` without self loops.
#[derive(Debug, Clone)]
pub struct Graph {
    ptr: Vec<usize>,
    adj: Vec<usize>,
}

impl Graph {
    pub fn from_csc_pattern(n: usize, col_ptr: &[usize], row_idx: &[usize]) -> Self {
        let mut edges: Vec<(usize, usize)> = Vec::with_capacity(2 * row_idx.len());
        for j in 0..n {
            for &i in &row_idx[col_ptr[j]..col_ptr[j + 1]] {
                if i != j {
                    edges.push((i, j));
                    edges.push((j, i));
                }
            }
        }
        edges.sort_unstable();
        edges.dedup();
        let mut ptr = vec![0usize; n + 1];
        for &(i, _) in &edges {
            ptr[i + 1] += 1;
        }
        for i in 0..n {
            ptr[i + 1] += ptr[i];
        }
        let adj = edges.into_iter().map(|(_, j)| j).collect();
        Self { ptr, adj }
    }

    pub fn len(&self) -> usize {
        self.ptr.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn neighbors(&self, v: usize) -> &[usize] {
        &self.adj[self.ptr[v]..self.ptr[v + 1]]
    }
}

struct Dissector<'g> {
    graph: &'g Graph,
    label: Vec<usize>,
    next_label: usize,
    level: Vec<usize>,
    order: Vec<usize>,
}

/// Elimination order: `perm[k]` is the original index eliminated at step `k`.
/// Separators are numbered after the parts they split.
pub fn nested_dissection(graph: &Graph) -> Vec<usize> {
    let n = graph.len();
    let mut d = Dissector {
        graph,
        label: vec![usize::MAX; n],
        next_label: 0,
        level: vec![usize::MAX; n],
        order: Vec::with_capacity(n),
    };
    d.dissect((0..n).collect());
    debug_assert_eq!(d.order.len(), n);
    d.order
}

impl Dissector<'_> {
    fn dissect(&mut self, nodes: Vec<usize>) {
        if nodes.len() <= LEAF_SIZE {
            self.order.extend(nodes);
            return;
        }
        let tag = self.next_label;
        self.next_label += 1;
        for &v in &nodes {
            self.label[v] = tag;
        }

        let start = self.pseudo_peripheral(nodes[0], tag);
        let levels = self.level_structure(start, tag);
        let reached: usize = levels.iter().map(Vec::len).sum();
        if reached < nodes.len() {
            // disconnected: split off the component containing `start`
            let comp_tag = self.next_label;
            self.next_label += 1;
            let in_comp: Vec<usize> = levels.into_iter().flatten().collect();
            for &v in &in_comp {
                self.level[v] = usize::MAX;
                self.label[v] = comp_tag;
            }
            let rest: Vec<usize> = nodes.into_iter().filter(|&v| self.label[v] == tag).collect();
            self.dissect(in_comp);
            self.dissect(rest);
            return;
        }
        for lv in &levels {
            for &v in lv {
                self.level[v] = usize::MAX;
            }
        }
        if levels.len() < 3 {
            self.order.extend(nodes);
            return;
        }
        let half = nodes.len() / 2;
        let mut acc = 0;
        let mut mid = 1;
        for (k, lv) in levels.iter().enumerate() {
            acc += lv.len();
            if acc >= half {
                mid = k;
                break;
            }
        }
        let mid = mid.clamp(1, levels.len() - 2);
        let mut levels = levels;
        let upper: Vec<usize> = levels.drain(mid + 1..).flatten().collect();
        let separator = levels.pop().expect("mid level exists");
        let lower: Vec<usize> = levels.into_iter().flatten().collect();
        self.dissect(lower);
        self.dissect(upper);
        self.order.extend(separator);
    }

    fn level_structure(&mut self, start: usize, tag: usize) -> Vec<Vec<usize>> {
        let mut levels = vec![vec![start]];
        self.level[start] = 0;
        loop {
            let depth = levels.len();
            let mut next = Vec::new();
            for &v in levels.last().unwrap() {
                for &w in self.graph.neighbors(v) {
                    if self.label[w] == tag && self.level[w] == usize::MAX {
                        self.level[w] = depth;
                        next.push(w);
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            levels.push(next);
        }
        levels
    }

    fn pseudo_peripheral(&mut self, seed: usize, tag: usize) -> usize {
        let mut start = seed;
        let mut ecc = 0;
        for _ in 0..6 {
            let levels = self.level_structure(start, tag);
            for lv in &levels {
                for &v in lv {
                    self.level[v] = usize::MAX;
                }
            }
            let depth = levels.len() - 1;
            if depth <= ecc && start != seed {
                break;
            }
            ecc = depth;
            let last = levels.last().unwrap();
            let candidate = *last
                .iter()
                .min_by_key(|&&v| {
                    self.graph
                        .neighbors(v)
                        .iter()
                        .filter(|&&w| self.label[w] == tag)
                        .count()
                })
                .unwrap();
            if candidate == start {
                break;
            }
            start = candidate;
        }
        start
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n0: usize) -> Graph {
        let n = n0 * n0;
        let mut col_ptr = vec![0];
        let mut rows = Vec::new();
        for j in 0..n {
            let (x, y) = (j % n0, j / n0);
            let mut c = vec![j];
            if x > 0 {
                c.push(j - 1);
            }
            if x + 1 < n0 {
                c.push(j + 1);
            }
            if y > 0 {
                c.push(j - n0);
            }
            if y + 1 < n0 {
                c.push(j + n0);
            }
            c.sort();
            rows.extend(c);
            col_ptr.push(rows.len());
        }
        Graph::from_csc_pattern(n, &col_ptr, &rows)
    }

    fn is_permutation(p: &[usize], n: usize) -> bool {
        let mut seen = vec![false; n];
        p.len() == n && p.iter().all(|&v| v < n && !std::mem::replace(&mut seen[v], true))
    }

    #[test]
    fn grid_ordering_is_a_permutation() {
        for n0 in [1, 5, 17, 40] {
            let g = grid(n0);
            assert!(is_permutation(&nested_dissection(&g), n0 * n0));
        }
    }

    #[test]
    fn disconnected_graph_is_fully_ordered() {
        // two separate 10x10 grids side by side plus isolated vertices
        let a = grid(10);
        let n = 2 * a.len() + 7;
        let mut col_ptr = vec![0];
        let mut rows = Vec::new();
        for j in 0..n {
            if j < 2 * a.len() {
                let base = if j < a.len() { 0 } else { a.len() };
                let local = j - base;
                let mut c: Vec<usize> = a.neighbors(local).iter().map(|v| v + base).collect();
                c.push(j);
                c.sort();
                rows.extend(c);
            } else {
                rows.push(j);
            }
            col_ptr.push(rows.len());
        }
        let g = Graph::from_csc_pattern(n, &col_ptr, &rows);
        assert!(is_permutation(&nested_dissection(&g), n));
    }
}
