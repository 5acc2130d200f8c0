//! Cluster labeling by union-find, with a BFS reference used for cross-checks.

use std::collections::VecDeque;

use thiserror::Error;

use crate::configuration::{BondConfig, SpinConfig};
use crate::graph::LatticeGraph;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ClusterError {
    #[error("configuration has {got} entries, graph expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("stale labeling: configuration or graph changed since it was built")]
    Stale,
    #[error("invalid sign {0}, expected +1 or -1")]
    InvalidSign(i8),
}

/// Disjoint-set forest with union by size and path halving.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<u32>,
    size: Vec<u32>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n as u32).collect(),
            size: vec![1; n],
        }
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn reset(&mut self) {
        for (i, p) in self.parent.iter_mut().enumerate() {
            *p = i as u32;
        }
        self.size.fill(1);
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] as usize != x {
            let grand = self.parent[self.parent[x] as usize];
            self.parent[x] = grand;
            x = grand as usize;
        }
        x
    }

    /// Returns true if the two sets were distinct.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra as u32;
        self.size[ra] += self.size[rb];
        true
    }

    pub fn set_size(&mut self, x: usize) -> usize {
        let r = self.find(x);
        self.size[r] as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Predicate {
    /// Open edges of a bond configuration.
    Open,
    /// Open edges, with all boundary vertices additionally merged into one cluster.
    OpenWired,
    /// Edges whose endpoints both carry the given sign.
    Sign(i8),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Generation {
    pub graph: u64,
    pub snapshot: u64,
    pub predicate: Predicate,
}

/// Immutable cluster labeling. Roots are fully resolved at build time.
#[derive(Debug, Clone)]
pub struct ClusterLabeling {
    root: Vec<u32>,
    size: Vec<u32>,
    touches_boundary: Vec<bool>,
    active: Vec<bool>,
    generation: Generation,
}

impl ClusterLabeling {
    fn from_union_find(
        g: &LatticeGraph,
        uf: &mut UnionFind,
        active: Vec<bool>,
        generation: Generation,
    ) -> Self {
        let n = uf.len();
        let mut root = vec![0u32; n];
        let mut size = vec![0u32; n];
        let mut touches_boundary = vec![false; n];
        for v in 0..n {
            let r = uf.find(v);
            root[v] = r as u32;
            size[r] += 1;
            if g.is_boundary(v) {
                touches_boundary[r] = true;
            }
        }
        ClusterLabeling {
            root,
            size,
            touches_boundary,
            active,
            generation,
        }
    }

    pub fn generation(&self) -> Generation {
        self.generation
    }

    pub fn find(&self, v: usize) -> usize {
        self.root[v] as usize
    }

    pub fn cluster_size(&self, v: usize) -> usize {
        self.size[self.find(v)] as usize
    }

    pub fn touches_boundary(&self, v: usize) -> bool {
        self.touches_boundary[self.find(v)]
    }

    pub fn connected(&self, u: usize, v: usize) -> bool {
        self.root[u] == self.root[v]
    }

    /// Whether `v` satisfies the vertex part of the predicate (always true for bond predicates).
    pub fn is_active(&self, v: usize) -> bool {
        self.active[v]
    }

    pub fn num_clusters(&self) -> usize {
        self.root.iter().enumerate().filter(|&(v, &r)| v == r as usize).count()
    }

    pub fn roots(&self) -> impl Iterator<Item = usize> + '_ {
        self.root
            .iter()
            .enumerate()
            .filter(|&(v, &r)| v == r as usize)
            .map(|(v, _)| v)
    }

    /// Canonical partition: each vertex mapped to the smallest vertex of its cluster.
    pub fn canonical_partition(&self) -> Vec<usize> {
        canonicalize(&self.root.iter().map(|&r| r as usize).collect::<Vec<_>>())
    }

    fn check(&self, g: &LatticeGraph, snapshot: u64) -> Result<(), ClusterError> {
        if self.generation.graph == g.id() && self.generation.snapshot == snapshot {
            Ok(())
        } else {
            Err(ClusterError::Stale)
        }
    }

    pub fn ensure_current_bonds(&self, g: &LatticeGraph, bonds: &BondConfig) -> Result<(), ClusterError> {
        self.check(g, bonds.snapshot())
    }

    pub fn ensure_current_spins(&self, g: &LatticeGraph, spins: &SpinConfig) -> Result<(), ClusterError> {
        self.check(g, spins.snapshot())
    }
}

/// Maps arbitrary component labels to "smallest member" labels.
pub fn canonicalize(labels: &[usize]) -> Vec<usize> {
    let mut first = std::collections::HashMap::new();
    labels
        .iter()
        .enumerate()
        .map(|(v, &l)| *first.entry(l).or_insert(v))
        .collect()
}

fn check_len(expected: usize, got: usize) -> Result<(), ClusterError> {
    if expected == got {
        Ok(())
    } else {
        Err(ClusterError::DimensionMismatch { expected, got })
    }
}

/// Union-find scratch that can be reused across sweeps without reallocating.
#[derive(Debug, Clone)]
pub struct Labeler {
    uf: UnionFind,
}

impl Labeler {
    pub fn new(g: &LatticeGraph) -> Self {
        Labeler {
            uf: UnionFind::new(g.num_vertices()),
        }
    }

    pub fn open_clusters(&mut self, g: &LatticeGraph, bonds: &BondConfig, wired: bool) -> Result<ClusterLabeling, ClusterError> {
        check_len(g.num_edges(), bonds.len())?;
        if self.uf.len() != g.num_vertices() {
            self.uf = UnionFind::new(g.num_vertices());
        } else {
            self.uf.reset();
        }
        for (e, edge) in g.edges().iter().enumerate() {
            if bonds.is_open(e) {
                self.uf.union(edge.a, edge.b);
            }
        }
        if wired {
            if let Some((&first, rest)) = g.boundary().split_first() {
                for &b in rest {
                    self.uf.union(first, b);
                }
            }
        }
        let predicate = if wired { Predicate::OpenWired } else { Predicate::Open };
        Ok(ClusterLabeling::from_union_find(
            g,
            &mut self.uf,
            vec![true; g.num_vertices()],
            Generation {
                graph: g.id(),
                snapshot: bonds.snapshot(),
                predicate,
            },
        ))
    }

    pub fn sign_clusters(&mut self, g: &LatticeGraph, spins: &SpinConfig, sign: i8) -> Result<ClusterLabeling, ClusterError> {
        check_len(g.num_vertices(), spins.len())?;
        if sign != 1 && sign != -1 {
            return Err(ClusterError::InvalidSign(sign));
        }
        self.uf.reset();
        let s = spins.as_slice();
        for edge in g.edges() {
            if s[edge.a] == sign && s[edge.b] == sign {
                self.uf.union(edge.a, edge.b);
            }
        }
        Ok(ClusterLabeling::from_union_find(
            g,
            &mut self.uf,
            s.iter().map(|&x| x == sign).collect(),
            Generation {
                graph: g.id(),
                snapshot: spins.snapshot(),
                predicate: Predicate::Sign(sign),
            },
        ))
    }
}

/// Components of the open subgraph of `bonds`.
pub fn label_open_clusters(g: &LatticeGraph, bonds: &BondConfig) -> Result<ClusterLabeling, ClusterError> {
    Labeler::new(g).open_clusters(g, bonds, false)
}

/// Components of the open subgraph with the boundary shell merged into a single cluster.
pub fn label_open_clusters_wired(g: &LatticeGraph, bonds: &BondConfig) -> Result<ClusterLabeling, ClusterError> {
    Labeler::new(g).open_clusters(g, bonds, true)
}

/// Components of the subgraph induced by vertices carrying `sign`. Vertices of the
/// opposite sign come out as singletons that are not active.
pub fn label_sign_clusters(g: &LatticeGraph, spins: &SpinConfig, sign: i8) -> Result<ClusterLabeling, ClusterError> {
    Labeler::new(g).sign_clusters(g, spins, sign)
}

pub fn connected(lab: &ClusterLabeling, g: &LatticeGraph, bonds: &BondConfig, u: usize, v: usize) -> Result<bool, ClusterError> {
    lab.ensure_current_bonds(g, bonds)?;
    Ok(lab.connected(u, v))
}

pub fn origin_touches_boundary(lab: &ClusterLabeling, g: &LatticeGraph, bonds: &BondConfig) -> Result<bool, ClusterError> {
    lab.ensure_current_bonds(g, bonds)?;
    Ok(lab.touches_boundary(g.origin()))
}

/// Whether the endpoints of `e` are joined by open edges other than `e` itself.
pub fn connected_without_edge(g: &LatticeGraph, bonds: &BondConfig, e: usize) -> bool {
    endpoints_joined(g, bonds, e, false)
}

/// As [`connected_without_edge`], counting any two boundary vertices as joined.
pub fn connected_without_edge_wired(g: &LatticeGraph, bonds: &BondConfig, e: usize) -> bool {
    endpoints_joined(g, bonds, e, true)
}

fn endpoints_joined(g: &LatticeGraph, bonds: &BondConfig, e: usize, wired: bool) -> bool {
    let edge = g.edge(e);
    if wired && g.is_boundary(edge.a) && g.is_boundary(edge.b) {
        return true;
    }
    let mut seen = vec![false; g.num_vertices()];
    let mut queue = VecDeque::new();
    let mut boundary_done = false;
    seen[edge.a] = true;
    queue.push_back(edge.a);
    while let Some(x) = queue.pop_front() {
        if x == edge.b {
            return true;
        }
        if wired && !boundary_done && g.is_boundary(x) {
            boundary_done = true;
            for &b in g.boundary() {
                if !seen[b] {
                    seen[b] = true;
                    queue.push_back(b);
                }
            }
        }
        for &(f, y) in g.neighbors(x) {
            if f != e && bonds.is_open(f) && !seen[y] {
                seen[y] = true;
                queue.push_back(y);
            }
        }
    }
    false
}

/// Reference labeling by breadth-first search. `vertex_ok` restricts which vertices
/// may be entered through an edge; `edge_ok` decides traversable edges.
pub fn bfs_components(
    g: &LatticeGraph,
    edge_ok: impl Fn(usize) -> bool,
    vertex_ok: impl Fn(usize) -> bool,
) -> Vec<usize> {
    let n = g.num_vertices();
    let mut label = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        label[start] = start;
        if !vertex_ok(start) {
            continue;
        }
        queue.push_back(start);
        while let Some(x) = queue.pop_front() {
            for &(e, y) in g.neighbors(x) {
                if label[y] == usize::MAX && edge_ok(e) && vertex_ok(y) {
                    label[y] = start;
                    queue.push_back(y);
                }
            }
        }
    }
    label
}
