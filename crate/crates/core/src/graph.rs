//! Undirected simple graphs and the structural queries the estimator needs.
//!
//! [`Graph`] is immutable once built and stores adjacency in compressed
//! sparse rows with sorted neighbor lists. [`SubgraphView`] borrows a graph
//! and restricts it to a vertex subset; induced edges are never copied.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

/// An undirected edge stored as `(u, v)` with `u < v`.
pub type Edge = (usize, usize);

/// Upper bound on configuration-model attempts in [`random_regular`].
pub const MAX_REGULAR_ATTEMPTS: u32 = 1000;

const UNSEEN: usize = usize::MAX;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("vertex {vertex} out of range for a graph on {num_vertices} vertices")]
    VertexOutOfRange { vertex: usize, num_vertices: usize },
    #[error("self-loop at vertex {0}")]
    SelfLoop(usize),
    #[error("duplicate edge {{{0}, {1}}}")]
    DuplicateEdge(usize, usize),
    #[error("no simple {d}-regular graph on {n} vertices")]
    InfeasibleDegree { n: usize, d: usize },
    #[error("no connected simple graph found after {0} attempts")]
    AttemptsExhausted(u32),
    #[error("vertex set does not induce a tree")]
    NotATree,
    #[error("graph is not regular")]
    NotRegular,
}

#[inline]
fn normalize(u: usize, v: usize) -> Edge {
    if u < v {
        (u, v)
    } else {
        (v, u)
    }
}

/// Immutable undirected simple graph on vertices `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    offsets: Vec<usize>,
    targets: Vec<usize>,
}

impl Graph {
    /// Builds a graph from an edge list, rejecting self-loops, duplicates
    /// (in either orientation) and out-of-range endpoints.
    pub fn from_edges<I>(num_vertices: usize, edges: I) -> Result<Self, GraphError>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut adjacency = vec![Vec::new(); num_vertices];
        for (u, v) in edges {
            for vertex in [u, v] {
                if vertex >= num_vertices {
                    return Err(GraphError::VertexOutOfRange {
                        vertex,
                        num_vertices,
                    });
                }
            }
            if u == v {
                return Err(GraphError::SelfLoop(u));
            }
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        for (u, list) in adjacency.iter_mut().enumerate() {
            list.sort_unstable();
            if let Some(w) = list.windows(2).find(|w| w[0] == w[1]) {
                let (a, b) = normalize(u, w[0]);
                return Err(GraphError::DuplicateEdge(a, b));
            }
        }
        Ok(Self::from_sorted_adjacency(adjacency))
    }

    fn from_sorted_adjacency(adjacency: Vec<Vec<usize>>) -> Self {
        let mut offsets = Vec::with_capacity(adjacency.len() + 1);
        offsets.push(0);
        let mut targets = Vec::with_capacity(adjacency.iter().map(Vec::len).sum());
        for list in adjacency {
            targets.extend_from_slice(&list);
            offsets.push(targets.len());
        }
        Self { offsets, targets }
    }

    pub fn path(n: usize) -> Self {
        Self::from_edges(n, (1..n).map(|v| (v - 1, v))).expect("path is simple")
    }

    /// Cycle on `n >= 3` vertices.
    pub fn cycle(n: usize) -> Self {
        assert!(n >= 3, "a simple cycle needs at least 3 vertices");
        Self::from_edges(n, (0..n).map(|v| (v, (v + 1) % n))).expect("cycle is simple")
    }

    pub fn complete(n: usize) -> Self {
        let edges = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v)));
        Self::from_edges(n, edges).expect("complete graph is simple")
    }

    /// Star with center 0 and `leaves` leaves `1..=leaves`.
    pub fn star(leaves: usize) -> Self {
        Self::from_edges(leaves + 1, (1..=leaves).map(|v| (0, v))).expect("star is simple")
    }

    #[inline]
    pub fn num_vertices(&self) -> usize {
        self.offsets.len() - 1
    }

    #[inline]
    pub fn num_edges(&self) -> usize {
        self.targets.len() / 2
    }

    /// Sorted neighbors of `v`.
    #[inline]
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }

    #[inline]
    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    /// All edges as `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        (0..self.num_vertices()).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .copied()
                .filter(move |&v| u < v)
                .map(move |v| (u, v))
        })
    }

    /// The common degree if every vertex has the same degree.
    pub fn regular_degree(&self) -> Option<usize> {
        let d = if self.num_vertices() == 0 { 0 } else { self.degree(0) };
        (0..self.num_vertices())
            .all(|v| self.degree(v) == d)
            .then_some(d)
    }

    pub fn is_connected(&self) -> bool {
        self.view().is_connected()
    }

    /// View over the whole graph.
    pub fn view(&self) -> SubgraphView<'_> {
        SubgraphView {
            parent: self,
            vertices: (0..self.num_vertices()).collect(),
            member: vec![true; self.num_vertices()],
        }
    }

    /// View induced by `vertices` (duplicates are ignored).
    pub fn induced(&self, vertices: &[usize]) -> Result<SubgraphView<'_>, GraphError> {
        let n = self.num_vertices();
        let mut member = vec![false; n];
        for &v in vertices {
            if v >= n {
                return Err(GraphError::VertexOutOfRange {
                    vertex: v,
                    num_vertices: n,
                });
            }
            member[v] = true;
        }
        Ok(SubgraphView::from_member(self, member))
    }

    /// Bridges of the whole graph.
    pub fn bridges(&self) -> Vec<Edge> {
        bridges(&self.view())
    }
}

/// A graph restricted to a vertex subset, with the induced edges.
#[derive(Debug, Clone)]
pub struct SubgraphView<'g> {
    parent: &'g Graph,
    vertices: Vec<usize>,
    member: Vec<bool>,
}

impl<'g> SubgraphView<'g> {
    fn from_member(parent: &'g Graph, member: Vec<bool>) -> Self {
        let vertices = member
            .iter()
            .enumerate()
            .filter_map(|(v, &m)| m.then_some(v))
            .collect();
        Self {
            parent,
            vertices,
            member,
        }
    }

    pub fn parent(&self) -> &'g Graph {
        self.parent
    }

    /// Member vertices in ascending order.
    pub fn vertices(&self) -> &[usize] {
        &self.vertices
    }

    #[inline]
    pub fn contains(&self, v: usize) -> bool {
        self.member.get(v).copied().unwrap_or(false)
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    /// Neighbors of `v` inside the view. `v` itself should be a member.
    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.parent
            .neighbors(v)
            .iter()
            .copied()
            .filter(move |&w| self.member[w])
    }

    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.vertices.iter().flat_map(move |&u| {
            self.neighbors(u)
                .filter(move |&v| u < v)
                .map(move |v| (u, v))
        })
    }

    pub fn num_edges(&self) -> usize {
        self.vertices
            .iter()
            .map(|&u| self.neighbors(u).count())
            .sum::<usize>()
            / 2
    }

    /// True for the empty view as well as for views with one component.
    pub fn is_connected(&self) -> bool {
        let Some(&start) = self.vertices.first() else {
            return true;
        };
        let mut seen = vec![false; self.parent.num_vertices()];
        seen[start] = true;
        let mut stack = vec![start];
        let mut reached = 1;
        while let Some(v) = stack.pop() {
            for w in self.neighbors(v) {
                if !seen[w] {
                    seen[w] = true;
                    reached += 1;
                    stack.push(w);
                }
            }
        }
        reached == self.vertices.len()
    }

    pub fn is_tree(&self) -> bool {
        is_tree(self)
    }
}

/// Distance radius for [`ball`]; `Infinite` reaches every vertex connected
/// to the centers.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Radius {
    Hops(usize),
    Infinite,
}

impl Radius {
    #[inline]
    fn admits(self, distance: usize) -> bool {
        match self {
            Radius::Hops(r) => distance <= r,
            Radius::Infinite => true,
        }
    }
}

/// Subgraph induced by every vertex within `radius` hops of some center.
///
/// # Panics
///
/// If a center is not a vertex of `g`.
pub fn ball<'g>(g: &'g Graph, centers: &[usize], radius: Radius) -> SubgraphView<'g> {
    let n = g.num_vertices();
    let mut distance = vec![UNSEEN; n];
    let mut queue = VecDeque::new();
    for &c in centers {
        if distance[c] == UNSEEN {
            distance[c] = 0;
            queue.push_back(c);
        }
    }
    while let Some(v) = queue.pop_front() {
        let next = distance[v] + 1;
        if !radius.admits(next) {
            continue;
        }
        for &w in g.neighbors(v) {
            if distance[w] == UNSEEN {
                distance[w] = next;
                queue.push_back(w);
            }
        }
    }
    let member = distance.into_iter().map(|d| d != UNSEEN).collect();
    SubgraphView::from_member(g, member)
}

/// Bridges of a view, each as `(u, v)` with `u < v`, sorted.
///
/// Iterative DFS with low-link values; linear in the size of the view and
/// valid for disconnected views.
pub fn bridges(view: &SubgraphView<'_>) -> Vec<Edge> {
    let g = view.parent;
    let n = g.num_vertices();
    let mut discovered = vec![UNSEEN; n];
    let mut low = vec![UNSEEN; n];
    let mut clock = 0;
    let mut found = Vec::new();
    // (vertex, dfs parent, next neighbor slot)
    let mut stack: Vec<(usize, usize, usize)> = Vec::new();

    for &root in &view.vertices {
        if discovered[root] != UNSEEN {
            continue;
        }
        discovered[root] = clock;
        low[root] = clock;
        clock += 1;
        stack.push((root, UNSEEN, 0));

        while let Some(frame) = stack.last_mut() {
            let (v, parent, slot) = *frame;
            let nbrs = g.neighbors(v);
            if slot < nbrs.len() {
                frame.2 += 1;
                let w = nbrs[slot];
                // Simple graphs: skipping the parent vertex skips exactly the tree edge.
                if !view.member[w] || w == parent {
                    continue;
                }
                if discovered[w] == UNSEEN {
                    discovered[w] = clock;
                    low[w] = clock;
                    clock += 1;
                    stack.push((w, v, 0));
                } else {
                    low[v] = low[v].min(discovered[w]);
                }
            } else {
                stack.pop();
                if parent != UNSEEN {
                    low[parent] = low[parent].min(low[v]);
                    if low[v] > discovered[parent] {
                        found.push(normalize(parent, v));
                    }
                }
            }
        }
    }
    found.sort_unstable();
    found
}

/// Connected with exactly one fewer edge than vertices.
pub fn is_tree(view: &SubgraphView<'_>) -> bool {
    let n = view.num_vertices();
    n > 0 && view.num_edges() == n - 1 && view.is_connected()
}

/// Fraction of vertices whose radius-`r` ball induces a tree.
///
/// The graph is `(r, η)`-locally tree-like with `η = 1 - fraction`.
pub fn locally_tree_like_fraction(g: &Graph, radius: Radius) -> f64 {
    let n = g.num_vertices();
    if n == 0 {
        return 1.0;
    }
    // Scratch buffers are reused across centers; `stamp` marks membership in
    // the current ball so nothing is cleared between BFS runs.
    let mut stamp = vec![UNSEEN; n];
    let mut distance = vec![0usize; n];
    let mut order = Vec::new();
    let mut queue = VecDeque::new();
    let mut trees = 0usize;

    for center in 0..n {
        order.clear();
        stamp[center] = center;
        distance[center] = 0;
        queue.push_back(center);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let next = distance[v] + 1;
            if !radius.admits(next) {
                continue;
            }
            for &w in g.neighbors(v) {
                if stamp[w] != center {
                    stamp[w] = center;
                    distance[w] = next;
                    queue.push_back(w);
                }
            }
        }
        // BFS balls are connected, so the edge count decides.
        let degree_sum: usize = order
            .iter()
            .map(|&v| g.neighbors(v).iter().filter(|&&w| stamp[w] == center).count())
            .sum();
        if degree_sum / 2 + 1 == order.len() {
            trees += 1;
        }
    }
    trees as f64 / n as f64
}

/// Number of members of `u_set` with a neighbor outside `u_set`.
///
/// `g` must be `d`-regular and `u_set` must induce a tree; then the count is
/// at least `(1 - 2/d)·|u_set|`, which is asserted.
pub fn boundary_count(g: &Graph, u_set: &[usize]) -> Result<usize, GraphError> {
    let d = g.regular_degree().ok_or(GraphError::NotRegular)?;
    let view = g.induced(u_set)?;
    if !view.is_tree() {
        return Err(GraphError::NotATree);
    }
    let count = view
        .vertices()
        .iter()
        .filter(|&&v| g.neighbors(v).iter().any(|&w| !view.contains(w)))
        .count();
    let size = view.num_vertices() as f64;
    assert!(
        count as f64 >= (1.0 - 2.0 / d as f64) * size,
        "boundary bound violated: {count} < (1 - 2/{d})·{size}"
    );
    Ok(count)
}

/// Uniformly paired random `d`-regular simple connected graph.
///
/// Stubs are paired in shuffled rounds; a pair that would create a loop or
/// a repeated edge is returned to the pool for the next round, and the
/// attempt restarts when the leftover stubs admit no valid pair. Disconnected
/// outcomes are discarded. At most [`MAX_REGULAR_ATTEMPTS`] attempts are made.
pub fn random_regular<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Result<Graph, GraphError> {
    if d == 0 || d >= n || (n * d) % 2 == 1 {
        return Err(GraphError::InfeasibleDegree { n, d });
    }
    for _ in 0..MAX_REGULAR_ATTEMPTS {
        if let Some(mut adjacency) = try_pairing(n, d, rng) {
            for list in &mut adjacency {
                list.sort_unstable();
            }
            let g = Graph::from_sorted_adjacency(adjacency);
            if g.is_connected() {
                return Ok(g);
            }
        }
    }
    Err(GraphError::AttemptsExhausted(MAX_REGULAR_ATTEMPTS))
}

fn try_pairing<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Option<Vec<Vec<usize>>> {
    let mut adjacency: Vec<Vec<usize>> = (0..n).map(|_| Vec::with_capacity(d)).collect();
    let mut stubs: Vec<usize> = (0..n).flat_map(|v| core::iter::repeat_n(v, d)).collect();
    let mut leftover = Vec::new();
    while !stubs.is_empty() {
        stubs.shuffle(rng);
        leftover.clear();
        for pair in stubs.chunks_exact(2) {
            let (u, v) = (pair[0], pair[1]);
            if u != v && !adjacency[u].contains(&v) {
                adjacency[u].push(v);
                adjacency[v].push(u);
            } else {
                leftover.extend_from_slice(pair);
            }
        }
        if !leftover.is_empty() && !pairable(&leftover, &adjacency) {
            return None;
        }
        core::mem::swap(&mut stubs, &mut leftover);
    }
    Some(adjacency)
}

/// Whether some two distinct leftover vertices are still non-adjacent.
fn pairable(stubs: &[usize], adjacency: &[Vec<usize>]) -> bool {
    let mut vertices = stubs.to_vec();
    vertices.sort_unstable();
    vertices.dedup();
    vertices.iter().enumerate().any(|(i, &u)| {
        vertices[i + 1..]
            .iter()
            .any(|&v| !adjacency[u].contains(&v))
    })
}
