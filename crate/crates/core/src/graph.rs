//! Finite geometric graphs: clusters, crossing, degrees, signal-weighted order.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{dist2, Window};
use crate::pathloss::PathLoss;
use crate::pointproc::MarkedConfiguration;

/// Disjoint sets with union by size and path halving.
#[derive(Clone, Debug)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Returns the new root if the sets were distinct.
    pub fn union(&mut self, a: usize, b: usize) -> Option<usize> {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return None;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        Some(ra)
    }

    pub fn size_of(&mut self, x: usize) -> usize {
        let r = self.find(x);
        self.size[r]
    }
}

/// Vertices (a subset of a configuration), undirected edges and cluster labels.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphResult {
    dim: usize,
    positions: Vec<f64>,
    origin: Vec<usize>,
    edges: Vec<(usize, usize)>,
    labels: Vec<usize>,
    window: Window,
    touch_distance: f64,
}

impl GraphResult {
    /// `edges` index into `positions`; they are normalized to `i < j`,
    /// sorted and deduplicated. Self-loops are rejected.
    pub fn new(
        positions: Vec<f64>,
        origin: Vec<usize>,
        mut edges: Vec<(usize, usize)>,
        window: Window,
        touch_distance: f64,
    ) -> Result<Self> {
        let dim = window.dim();
        let n = positions.len() / dim;
        if origin.len() != n {
            return Err(invalid("origin", "one origin index per vertex"));
        }
        for e in edges.iter_mut() {
            if e.0 == e.1 {
                return Err(invalid("edges", format!("self-loop at {}", e.0)));
            }
            if e.0.max(e.1) >= n {
                return Err(Error::IndexOutOfRange {
                    index: e.0.max(e.1),
                    len: n,
                });
            }
            if e.0 > e.1 {
                *e = (e.1, e.0);
            }
        }
        edges.sort_unstable();
        edges.dedup();
        let mut g = Self {
            dim,
            positions,
            origin,
            edges,
            labels: Vec::new(),
            window,
            touch_distance,
        };
        g.labels = component_labels(n, &g.edges);
        Ok(g)
    }

    /// Graph on `vertices` (indices into `config`); `edges` use vertex positions
    /// in that list.
    pub fn on_config(
        config: &MarkedConfiguration,
        vertices: Vec<usize>,
        edges: Vec<(usize, usize)>,
        touch_distance: f64,
    ) -> Result<Self> {
        let positions = vertices
            .iter()
            .flat_map(|&i| config.point(i).iter().copied())
            .collect();
        Self::new(
            positions,
            vertices,
            edges,
            config.window().clone(),
            touch_distance,
        )
    }

    pub fn vertex_count(&self) -> usize {
        self.origin.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn position(&self, v: usize) -> &[f64] {
        &self.positions[v * self.dim..(v + 1) * self.dim]
    }

    pub fn origin(&self) -> &[usize] {
        &self.origin
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn window(&self) -> &Window {
        &self.window
    }

    pub fn touch_distance(&self) -> f64 {
        self.touch_distance
    }

    pub fn with_touch_distance(mut self, touch: f64) -> Self {
        self.touch_distance = touch;
        self
    }

    /// Edges expressed in the source configuration's indices, sorted.
    pub fn source_edges(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<_> = self
            .edges
            .iter()
            .map(|&(a, b)| {
                let (x, y) = (self.origin[a], self.origin[b]);
                (x.min(y), x.max(y))
            })
            .collect();
        out.sort_unstable();
        out
    }

    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.vertex_count()];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.vertex_count()];
        for &(a, b) in &self.edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut size = vec![0; self.vertex_count()];
        for &l in &self.labels {
            size[l] += 1;
        }
        size.retain(|&s| s > 0);
        size
    }

    pub fn largest_cluster(&self) -> usize {
        self.cluster_sizes().into_iter().max().unwrap_or(0)
    }
}

fn component_labels(n: usize, edges: &[(usize, usize)]) -> Vec<usize> {
    let mut uf = UnionFind::new(n);
    for &(a, b) in edges {
        uf.union(a, b);
    }
    // canonical label: smallest vertex of the component
    let mut smallest = vec![usize::MAX; n];
    let roots: Vec<usize> = (0..n).map(|v| uf.find(v)).collect();
    for v in 0..n {
        smallest[roots[v]] = smallest[roots[v]].min(v);
    }
    roots.iter().map(|&r| smallest[r]).collect()
}

/// Recomputes the component labels. Idempotent.
pub fn label_clusters(graph: &GraphResult) -> GraphResult {
    let mut g = graph.clone();
    g.labels = component_labels(g.vertex_count(), &g.edges);
    g
}

/// Some cluster has a vertex within `touch_distance` of the low face and one
/// within `touch_distance` of the high face of the observation window.
pub fn crossing_exists(graph: &GraphResult, axis: usize) -> bool {
    let obs = graph.window.observation();
    let lo = obs.low(axis) + graph.touch_distance;
    let hi = obs.high(axis) - graph.touch_distance;
    let n = graph.vertex_count();
    let mut low_hit = vec![false; n];
    let mut high_hit = vec![false; n];
    for v in 0..n {
        let x = graph.position(v)[axis];
        let l = graph.labels[v];
        low_hit[l] |= x <= lo;
        high_hit[l] |= x >= hi;
    }
    (0..n).any(|l| low_hit[l] && high_hit[l])
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeStats {
    /// `histogram[k]` = number of vertices of degree `k`.
    pub histogram: Vec<usize>,
    pub max_degree: usize,
}

pub fn degree_stats(graph: &GraphResult) -> DegreeStats {
    let deg = graph.degrees();
    let max_degree = deg.iter().copied().max().unwrap_or(0);
    let mut histogram = vec![0; max_degree + 1];
    for d in deg {
        histogram[d] += 1;
    }
    if graph.vertex_count() == 0 {
        histogram.clear();
    }
    DegreeStats {
        histogram,
        max_degree,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClusterShape {
    Cycle,
    Path,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterTag {
    pub label: usize,
    pub size: usize,
    pub edges: usize,
    pub shape: ClusterShape,
}

/// Tags every cluster of a graph with maximum degree at most two.
pub fn classify_degree2_components(graph: &GraphResult) -> Result<Vec<ClusterTag>> {
    let deg = graph.degrees();
    if let Some((v, &d)) = deg.iter().enumerate().find(|(_, &d)| d > 2) {
        return Err(Error::DegreeExceeded {
            vertex: v,
            degree: d,
            allowed: 2,
        });
    }
    let n = graph.vertex_count();
    let mut size = vec![0usize; n];
    let mut edges = vec![0usize; n];
    for v in 0..n {
        size[graph.labels[v]] += 1;
    }
    for &(a, _) in &graph.edges {
        edges[graph.labels[a]] += 1;
    }
    Ok((0..n)
        .filter(|&l| size[l] > 0)
        .map(|l| ClusterTag {
            label: l,
            size: size[l],
            edges: edges[l],
            // connected, max degree 2: cycle iff as many edges as vertices
            shape: if edges[l] == size[l] {
                ClusterShape::Cycle
            } else {
                ClusterShape::Path
            },
        })
        .collect())
}

#[derive(Clone, Copy, Debug)]
pub enum Receiver<'a> {
    Index(usize),
    Point(&'a [f64]),
}

/// First `k` transmitters in decreasing received power `P * ell(|x - y|)`,
/// ties broken by smaller distance.
pub fn signal_weighted_neighbors(
    config: &MarkedConfiguration,
    receiver: Receiver<'_>,
    k: usize,
    model: &PathLoss,
) -> Result<Vec<usize>> {
    let powers = config.powers()?;
    let (y, skip) = match receiver {
        Receiver::Index(i) => {
            if i >= config.len() {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    len: config.len(),
                });
            }
            (config.point(i), Some(i))
        }
        Receiver::Point(y) => (y, None),
    };
    let mut cands: Vec<(f64, f64, usize)> = (0..config.len())
        .filter(|&j| Some(j) != skip)
        .map(|j| {
            let d2 = dist2(config.point(j), y);
            (powers[j] * model.eval_sq(d2), d2, j)
        })
        .collect();
    if k > cands.len() {
        return Err(invalid(
            "k",
            format!("asked for {k} neighbors among {} candidates", cands.len()),
        ));
    }
    let order = |a: &(f64, f64, usize), b: &(f64, f64, usize)| -> Ordering {
        b.0.total_cmp(&a.0).then(a.1.total_cmp(&b.1))
    };
    cands.sort_by(order);
    // certify the order up to and including the k-th boundary
    let upto = (k + 1).min(cands.len());
    for w in cands[..upto].windows(2) {
        if w[0].0 == w[1].0 && w[0].1 == w[1].1 {
            return Err(Error::UnresolvedTie(w[0].2, w[1].2));
        }
    }
    Ok(cands[..k].iter().map(|c| c.2).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_graph(n: usize, edges: Vec<(usize, usize)>) -> GraphResult {
        let positions = (0..n).flat_map(|i| [i as f64, 0.0]).collect();
        let w = Window::centered(2, 100.0, 0.0).unwrap();
        GraphResult::new(positions, (0..n).collect(), edges, w, 1.0).unwrap()
    }

    #[test]
    fn edgeless_and_path_clusters() {
        let g = line_graph(5, vec![]);
        assert_eq!(g.cluster_sizes().len(), 5);
        assert_eq!(degree_stats(&g).max_degree, 0);
        let p = line_graph(4, vec![(0, 1), (2, 1), (2, 3)]);
        assert_eq!(p.cluster_sizes(), vec![4]);
        assert_eq!(label_clusters(&p), p);
    }

    #[test]
    fn edges_are_normalized() {
        let g = line_graph(3, vec![(1, 0), (0, 1), (2, 1)]);
        assert_eq!(g.edges(), &[(0, 1), (1, 2)]);
        let w = Window::centered(2, 10.0, 0.0).unwrap();
        assert!(GraphResult::new(vec![0.0, 0.0], vec![0], vec![(0, 0)], w, 1.0).is_err());
    }

    #[test]
    fn triangle_and_path_shapes() {
        let t = line_graph(3, vec![(0, 1), (1, 2), (0, 2)]);
        let st = degree_stats(&t);
        assert_eq!(st.histogram, vec![0, 0, 3]);
        let tags = classify_degree2_components(&t).unwrap();
        assert_eq!(tags.len(), 1);
        assert_eq!(tags[0].shape, ClusterShape::Cycle);

        let p = line_graph(4, vec![(0, 1), (1, 2), (2, 3)]);
        assert_eq!(
            classify_degree2_components(&p).unwrap()[0].shape,
            ClusterShape::Path
        );

        let star = line_graph(4, vec![(0, 1), (0, 2), (0, 3)]);
        assert!(matches!(
            classify_degree2_components(&star),
            Err(Error::DegreeExceeded { degree: 3, .. })
        ));
    }

    #[test]
    fn crossing_cases() {
        let w = Window::centered(2, 10.0, 0.0).unwrap();
        let empty = GraphResult::new(vec![], vec![], vec![], w.clone(), 1.0).unwrap();
        assert!(!crossing_exists(&empty, 0));

        let xs = [-4.5, -2.0, 0.5, 3.0, 4.6];
        let positions: Vec<f64> = xs.iter().flat_map(|&x| [x, 0.0]).collect();
        let spanning = GraphResult::new(
            positions.clone(),
            (0..5).collect(),
            vec![(0, 1), (1, 2), (2, 3), (3, 4)],
            w.clone(),
            1.0,
        )
        .unwrap();
        assert!(crossing_exists(&spanning, 0));
        assert!(!crossing_exists(&spanning, 1));
        let broken =
            GraphResult::new(positions, (0..5).collect(), vec![(0, 1), (2, 3), (3, 4)], w, 1.0)
                .unwrap();
        assert!(!crossing_exists(&broken, 0));
    }

    #[test]
    fn signal_order_examples() {
        let w = Window::centered(2, 10.0, 0.0).unwrap();
        let l = PathLoss::power_law(1.0, 4.0, 2).unwrap();
        let cfg = MarkedConfiguration::from_points(
            &[vec![1.0, 0.0], vec![3.0, 0.0]],
            Some(vec![1.0, 100.0]),
            w.clone(),
        )
        .unwrap();
        let order = signal_weighted_neighbors(&cfg, Receiver::Point(&[0.0, 0.0]), 2, &l).unwrap();
        assert_eq!(order, vec![1, 0]);

        // equal received power 1 * ell(1) = 16 * ell(2); closer wins
        let cfg = MarkedConfiguration::from_points(
            &[vec![0.0, 2.0], vec![1.0, 0.0]],
            Some(vec![16.0, 1.0]),
            w.clone(),
        )
        .unwrap();
        let order = signal_weighted_neighbors(&cfg, Receiver::Point(&[0.0, 0.0]), 2, &l).unwrap();
        assert_eq!(order, vec![1, 0]);

        // identical product and distance: unresolved
        let cfg = MarkedConfiguration::from_points(
            &[vec![0.0, 2.0], vec![2.0, 0.0]],
            Some(vec![1.0, 1.0]),
            w,
        )
        .unwrap();
        assert!(matches!(
            signal_weighted_neighbors(&cfg, Receiver::Point(&[0.0, 0.0]), 1, &l),
            Err(Error::UnresolvedTie(..))
        ));
    }

    #[test]
    fn union_find_basics() {
        let mut uf = UnionFind::new(4);
        assert!(uf.union(0, 1).is_some());
        assert!(uf.union(1, 0).is_none());
        uf.union(2, 3);
        assert_eq!(uf.size_of(3), 2);
        assert_ne!(uf.find(0), uf.find(2));
    }
}
