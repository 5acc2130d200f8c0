//! Finite lattice graphs: shelled cubic boxes and slab graphs `Z^2 x {0..N-1}`
//! restricted to a square base, optionally with layer-wrapping edges.
//!
//! Every graph carries an explicit boundary shell. Vertices on the shell play the
//! role of the outside of the box: boundary conditions fix their spins, and edges
//! with both endpoints on the shell are the wired edges.

use std::sync::atomic::{AtomicU64, Ordering};

use thiserror::Error;

/// Default cap on `d * V` for cubic boxes.
pub const DEFAULT_VERTEX_BUDGET: usize = 1 << 26;

static NEXT_GRAPH_ID: AtomicU64 = AtomicU64::new(1);

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("graph too large: {requested} exceeds vertex budget {budget}")]
    TooLarge { requested: usize, budget: usize },
    #[error("degenerate periodic edge: layer wrapping needs at least 3 layers, got {layers}")]
    DegeneratePeriodic { layers: usize },
    #[error("invalid graph parameter: {0}")]
    InvalidParameter(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LatticeKind {
    Cubic { dim: usize },
    Slab { layers: usize },
    SlabPeriodic { layers: usize },
}

impl LatticeKind {
    pub fn is_slab(self) -> bool {
        !matches!(self, LatticeKind::Cubic { .. })
    }

    pub fn layers(self) -> Option<usize> {
        match self {
            LatticeKind::Cubic { .. } => None,
            LatticeKind::Slab { layers } | LatticeKind::SlabPeriodic { layers } => Some(layers),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeClass {
    Horizontal,
    Vertical,
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub class: EdgeClass,
}

impl Edge {
    pub fn other(&self, v: usize) -> usize {
        if v == self.a {
            self.b
        } else {
            self.a
        }
    }
}

/// Column structure of a slab graph. Column `c` owns vertices
/// `c * layers .. (c + 1) * layers`, ordered by layer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Columns {
    /// Width of the base square in columns, rim included.
    pub width: usize,
    pub layers: usize,
    rim: Vec<bool>,
    origin: usize,
}

impl Columns {
    pub fn count(&self) -> usize {
        self.width * self.width
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.width + j
    }

    pub fn coords(&self, c: usize) -> (usize, usize) {
        (c / self.width, c % self.width)
    }

    pub fn vertices(&self, c: usize) -> std::ops::Range<usize> {
        c * self.layers..(c + 1) * self.layers
    }

    pub fn vertex(&self, c: usize, layer: usize) -> usize {
        c * self.layers + layer
    }

    pub fn column_of(&self, v: usize) -> usize {
        v / self.layers
    }

    pub fn is_rim(&self, c: usize) -> bool {
        self.rim[c]
    }

    /// The column `c_{0,0}` at the center of the base square.
    pub fn origin(&self) -> usize {
        self.origin
    }

    /// Base-plane nearest neighbours of a column, in (i-1, i+1, j-1, j+1) order.
    pub fn neighbors(&self, c: usize) -> impl Iterator<Item = usize> + '_ {
        let (i, j) = self.coords(c);
        let w = self.width;
        [
            (i > 0).then(|| c - w),
            (i + 1 < w).then(|| c + w),
            (j > 0).then(|| c - 1),
            (j + 1 < w).then(|| c + 1),
        ]
        .into_iter()
        .flatten()
    }
}

#[derive(Debug, Clone)]
pub struct LatticeGraph {
    id: u64,
    kind: LatticeKind,
    dims: Vec<usize>,
    coords: Vec<u32>,
    edges: Vec<Edge>,
    adj_offsets: Vec<usize>,
    adj: Vec<(usize, usize)>,
    boundary: Vec<bool>,
    boundary_list: Vec<usize>,
    columns: Option<Columns>,
    origin: usize,
}

impl PartialEq for LatticeGraph {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
            && self.dims == other.dims
            && self.coords == other.coords
            && self.edges == other.edges
            && self.adj == other.adj
            && self.boundary == other.boundary
            && self.columns == other.columns
            && self.origin == other.origin
    }
}

fn row_major_coords(dims: &[usize]) -> Vec<u32> {
    let n: usize = dims.iter().product();
    let d = dims.len();
    let mut coords = vec![0u32; n * d];
    for v in 0..n {
        let mut rest = v;
        for axis in (0..d).rev() {
            coords[v * d + axis] = (rest % dims[axis]) as u32;
            rest /= dims[axis];
        }
    }
    coords
}

/// Builds a `d`-dimensional box with `side` vertices per axis using the default budget.
pub fn build_cubic_box(dim: usize, side: usize, include_boundary_shell: bool) -> Result<LatticeGraph, GraphError> {
    build_cubic_box_with_budget(dim, side, include_boundary_shell, DEFAULT_VERTEX_BUDGET)
}

pub fn build_cubic_box_with_budget(
    dim: usize,
    side: usize,
    include_boundary_shell: bool,
    budget: usize,
) -> Result<LatticeGraph, GraphError> {
    if dim == 0 {
        return Err(GraphError::InvalidParameter("dimension must be at least 1"));
    }
    if side == 0 {
        return Err(GraphError::InvalidParameter("side must be at least 1"));
    }
    let too_large = GraphError::TooLarge {
        requested: usize::MAX,
        budget,
    };
    // The budget is checked against the shelled size either way.
    let requested = (side + 2)
        .checked_pow(dim as u32)
        .and_then(|v| v.checked_mul(dim))
        .ok_or(too_large)?;
    if requested > budget {
        return Err(GraphError::TooLarge { requested, budget });
    }

    let n = if include_boundary_shell { side + 2 } else { side };
    let dims = vec![n; dim];
    let coords = row_major_coords(&dims);
    let count = coords.len() / dim;

    let mut strides = vec![1usize; dim];
    for axis in (0..dim.saturating_sub(1)).rev() {
        strides[axis] = strides[axis + 1] * n;
    }

    let mut edges = Vec::with_capacity(count * dim);
    for v in 0..count {
        for axis in 0..dim {
            if (coords[v * dim + axis] as usize) + 1 < n {
                edges.push(Edge {
                    a: v,
                    b: v + strides[axis],
                    class: EdgeClass::Horizontal,
                });
            }
        }
    }

    let boundary = (0..count)
        .map(|v| {
            coords[v * dim..(v + 1) * dim]
                .iter()
                .any(|&x| x == 0 || x as usize == n - 1)
        })
        .collect();

    let mid = (n - 1) / 2;
    let origin = (0..dim).map(|axis| mid * strides[axis]).sum();

    Ok(LatticeGraph::assemble(
        LatticeKind::Cubic { dim },
        dims,
        coords,
        edges,
        boundary,
        None,
        origin,
    ))
}

/// Builds the slab `{base square} x {0..layers-1}`. The base square has
/// `base_side + 2` columns per side; the outer ring of columns is the boundary.
pub fn build_slab(layers: usize, base_side: usize, periodic_vertical: bool) -> Result<LatticeGraph, GraphError> {
    if layers == 0 {
        return Err(GraphError::InvalidParameter("layer count must be at least 1"));
    }
    if base_side == 0 {
        return Err(GraphError::InvalidParameter("base side must be at least 1"));
    }
    if periodic_vertical && layers < 3 {
        return Err(GraphError::DegeneratePeriodic { layers });
    }
    let width = base_side + 2;
    let ncols = width
        .checked_mul(width)
        .and_then(|c| c.checked_mul(layers))
        .ok_or(GraphError::TooLarge {
            requested: usize::MAX,
            budget: DEFAULT_VERTEX_BUDGET,
        })?;
    if ncols > DEFAULT_VERTEX_BUDGET {
        return Err(GraphError::TooLarge {
            requested: ncols,
            budget: DEFAULT_VERTEX_BUDGET,
        });
    }

    let count = width * width * layers;
    let mut coords = Vec::with_capacity(count * 3);
    for i in 0..width {
        for j in 0..width {
            for k in 0..layers {
                coords.extend_from_slice(&[i as u32, j as u32, k as u32]);
            }
        }
    }

    let col = |i: usize, j: usize| i * width + j;
    let vertex = |c: usize, k: usize| c * layers + k;
    let mut edges = Vec::new();
    for i in 0..width {
        for j in 0..width {
            let c = col(i, j);
            for k in 0..layers {
                let v = vertex(c, k);
                if k + 1 < layers {
                    edges.push(Edge { a: v, b: v + 1, class: EdgeClass::Vertical });
                }
                if j + 1 < width {
                    edges.push(Edge { a: v, b: vertex(col(i, j + 1), k), class: EdgeClass::Horizontal });
                }
                if i + 1 < width {
                    edges.push(Edge { a: v, b: vertex(col(i + 1, j), k), class: EdgeClass::Horizontal });
                }
            }
            if periodic_vertical {
                edges.push(Edge {
                    a: vertex(c, 0),
                    b: vertex(c, layers - 1),
                    class: EdgeClass::Periodic,
                });
            }
        }
    }

    let rim: Vec<bool> = (0..width * width)
        .map(|c| {
            let (i, j) = (c / width, c % width);
            i == 0 || j == 0 || i == width - 1 || j == width - 1
        })
        .collect();
    let boundary = (0..count).map(|v| rim[v / layers]).collect();
    let mid = (width - 1) / 2;
    let origin_column = col(mid, mid);
    let columns = Columns {
        width,
        layers,
        rim,
        origin: origin_column,
    };
    let kind = if periodic_vertical {
        LatticeKind::SlabPeriodic { layers }
    } else {
        LatticeKind::Slab { layers }
    };

    Ok(LatticeGraph::assemble(
        kind,
        vec![width, width, layers],
        coords,
        edges,
        boundary,
        Some(columns),
        vertex(origin_column, 0),
    ))
}

impl LatticeGraph {
    fn assemble(
        kind: LatticeKind,
        dims: Vec<usize>,
        coords: Vec<u32>,
        mut edges: Vec<Edge>,
        boundary: Vec<bool>,
        columns: Option<Columns>,
        origin: usize,
    ) -> Self {
        for e in edges.iter_mut() {
            if e.a > e.b {
                std::mem::swap(&mut e.a, &mut e.b);
            }
        }
        edges.sort_by_key(|e| (e.a, e.b));
        edges.dedup_by_key(|e| (e.a, e.b));

        let n = boundary.len();
        let mut degree = vec![0usize; n];
        for e in &edges {
            degree[e.a] += 1;
            degree[e.b] += 1;
        }
        let mut adj_offsets = Vec::with_capacity(n + 1);
        adj_offsets.push(0);
        for d in &degree {
            adj_offsets.push(adj_offsets.last().unwrap() + d);
        }
        let mut fill = adj_offsets.clone();
        let mut adj = vec![(0, 0); adj_offsets[n]];
        for (idx, e) in edges.iter().enumerate() {
            adj[fill[e.a]] = (idx, e.b);
            fill[e.a] += 1;
            adj[fill[e.b]] = (idx, e.a);
            fill[e.b] += 1;
        }
        for v in 0..n {
            adj[adj_offsets[v]..adj_offsets[v + 1]].sort_by_key(|&(e, u)| (u, e));
        }
        let boundary_list = (0..n).filter(|&v| boundary[v]).collect();

        LatticeGraph {
            id: NEXT_GRAPH_ID.fetch_add(1, Ordering::Relaxed),
            kind,
            dims,
            coords,
            edges,
            adj_offsets,
            adj,
            boundary,
            boundary_list,
            columns,
            origin,
        }
    }

    /// Process-unique identifier, used to tie cluster labelings to their graph.
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn kind(&self) -> LatticeKind {
        self.kind
    }

    /// Per-axis vertex counts (for slabs: width, width, layers).
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn num_vertices(&self) -> usize {
        self.boundary.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> Edge {
        self.edges[e]
    }

    pub fn coords(&self, v: usize) -> &[u32] {
        let d = self.dims.len();
        &self.coords[v * d..(v + 1) * d]
    }

    /// Incident `(edge, neighbour)` pairs of `v`, sorted by neighbour index.
    pub fn neighbors(&self, v: usize) -> &[(usize, usize)] {
        &self.adj[self.adj_offsets[v]..self.adj_offsets[v + 1]]
    }

    pub fn degree(&self, v: usize) -> usize {
        self.adj_offsets[v + 1] - self.adj_offsets[v]
    }

    pub fn is_boundary(&self, v: usize) -> bool {
        self.boundary[v]
    }

    pub fn boundary(&self) -> &[usize] {
        &self.boundary_list
    }

    pub fn interior(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_vertices()).filter(move |&v| !self.boundary[v])
    }

    /// An edge is wired when both endpoints lie on the boundary shell.
    pub fn is_wired(&self, e: usize) -> bool {
        let edge = self.edges[e];
        self.boundary[edge.a] && self.boundary[edge.b]
    }

    pub fn columns(&self) -> Option<&Columns> {
        self.columns.as_ref()
    }

    /// The origin vertex; for slabs this is layer 0 of the origin column.
    pub fn origin(&self) -> usize {
        self.origin
    }

    /// Degree the origin would have in the infinite lattice.
    pub fn bulk_degree(&self) -> usize {
        match self.kind {
            LatticeKind::Cubic { dim } => 2 * dim,
            LatticeKind::Slab { layers } => 4 + usize::from(layers > 1),
            LatticeKind::SlabPeriodic { .. } => 6,
        }
    }

    /// Short human-readable description, e.g. `cubic(d=2;n=5)`.
    pub fn describe(&self) -> String {
        match self.kind {
            LatticeKind::Cubic { dim } => format!("cubic(d={};n={})", dim, self.dims[0]),
            LatticeKind::Slab { layers } => format!("slab(N={};width={})", layers, self.dims[0]),
            LatticeKind::SlabPeriodic { layers } => {
                format!("slab_periodic(N={};width={})", layers, self.dims[0])
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn handshake(g: &LatticeGraph) -> bool {
        let total: usize = (0..g.num_vertices()).map(|v| g.degree(v)).sum();
        total == 2 * g.num_edges()
    }

    #[test]
    fn path_of_three() {
        let g = build_cubic_box(1, 1, true).unwrap();
        assert_eq!(g.num_vertices(), 3);
        assert_eq!(g.num_edges(), 2);
        assert_eq!(g.boundary(), &[0, 2]);
        assert_eq!(g.origin(), 1);
    }

    #[test]
    fn five_by_five_grid() {
        let g = build_cubic_box(2, 3, true).unwrap();
        assert_eq!(g.num_vertices(), 25);
        // 2 * 5 * 4 edges in a 5x5 grid
        assert_eq!(g.num_edges(), 40);
        assert_eq!(g.degree(g.origin()), 4);
        assert_eq!(g.coords(g.origin()), &[2, 2]);
        assert_eq!(g.boundary().len(), 16);
        assert!(handshake(&g));
    }

    #[test]
    fn unshelled_box_keeps_outer_layer_as_boundary() {
        let g = build_cubic_box(2, 3, false).unwrap();
        assert_eq!(g.num_vertices(), 9);
        assert_eq!(g.degree(g.origin()), 4);
        assert_eq!(g.boundary().len(), 8);
    }

    #[test]
    fn edges_are_unit_and_sorted() {
        let g = build_cubic_box(3, 2, true).unwrap();
        for w in g.edges().windows(2) {
            assert!((w[0].a, w[0].b) < (w[1].a, w[1].b));
        }
        for e in g.edges() {
            let (x, y) = (g.coords(e.a), g.coords(e.b));
            let dist: u32 = x.iter().zip(y).map(|(p, q)| p.abs_diff(*q)).sum();
            assert_eq!(dist, 1);
        }
        assert!(handshake(&g));
    }

    #[test]
    fn budget_is_enforced() {
        let err = build_cubic_box_with_budget(3, 100, true, 1000).unwrap_err();
        assert!(matches!(err, GraphError::TooLarge { .. }));
        assert!(err.to_string().contains("graph too large"));
        assert!(build_cubic_box(0, 3, true).is_err());
        assert!(build_cubic_box(2, 0, true).is_err());
    }

    #[test]
    fn two_layer_slab() {
        let g = build_slab(2, 1, false).unwrap();
        let cols = g.columns().unwrap();
        assert_eq!(cols.count(), 9);
        assert_eq!(g.num_vertices(), 18);
        assert_eq!(cols.vertices(cols.origin()).len(), 2);
        assert!(!cols.is_rim(cols.origin()));
        // layer-0 vertex of the interior column: 4 horizontal + 1 vertical
        assert_eq!(g.degree(g.origin()), 5);
        assert!(handshake(&g));
    }

    #[test]
    fn periodic_three_slab_columns() {
        let g = build_slab(3, 1, true).unwrap();
        let cols = g.columns().unwrap();
        for c in 0..cols.count() {
            let vs = cols.vertices(c);
            let vertical = g
                .edges()
                .iter()
                .filter(|e| vs.contains(&e.a) && vs.contains(&e.b))
                .collect::<Vec<_>>();
            assert_eq!(vertical.len(), 3);
            assert_eq!(vertical.iter().filter(|e| e.class == EdgeClass::Periodic).count(), 1);
            let p = vertical.iter().find(|e| e.class == EdgeClass::Periodic).unwrap();
            assert_eq!((g.coords(p.a)[2], g.coords(p.b)[2]), (0, 2));
        }
        for v in cols.vertices(cols.origin()) {
            assert_eq!(g.degree(v), 6);
        }
        assert!(handshake(&g));
    }

    #[test]
    fn non_periodic_three_slab_has_two_vertical_edges_per_column() {
        let g = build_slab(3, 1, false).unwrap();
        let cols = g.columns().unwrap();
        let vs = cols.vertices(cols.origin());
        let n = g
            .edges()
            .iter()
            .filter(|e| vs.contains(&e.a) && vs.contains(&e.b))
            .count();
        assert_eq!(n, 2);
    }

    #[test]
    fn degenerate_periodic_rejected() {
        assert_eq!(
            build_slab(2, 3, true).unwrap_err(),
            GraphError::DegeneratePeriodic { layers: 2 }
        );
        assert!(build_slab(1, 3, true).is_err());
    }

    #[test]
    fn slab_layers_are_copies_of_base_grid() {
        let g = build_slab(3, 2, false).unwrap();
        let base = build_cubic_box(2, 2, true).unwrap();
        let horizontal: Vec<_> = g.edges().iter().filter(|e| e.class == EdgeClass::Horizontal).collect();
        assert_eq!(horizontal.len(), 3 * base.num_edges());
        for k in 0..3u32 {
            let mut layer: Vec<(Vec<u32>, Vec<u32>)> = horizontal
                .iter()
                .filter(|e| g.coords(e.a)[2] == k)
                .map(|e| (g.coords(e.a)[..2].to_vec(), g.coords(e.b)[..2].to_vec()))
                .collect();
            let mut expected: Vec<_> = base
                .edges()
                .iter()
                .map(|e| (base.coords(e.a).to_vec(), base.coords(e.b).to_vec()))
                .collect();
            layer.sort();
            expected.sort();
            assert_eq!(layer, expected);
            assert!(horizontal.iter().all(|e| g.coords(e.a)[2] == g.coords(e.b)[2]));
        }
    }

    #[test]
    fn rebuild_is_identical() {
        assert_eq!(build_slab(3, 4, true).unwrap(), build_slab(3, 4, true).unwrap());
        assert_eq!(build_cubic_box(3, 3, true).unwrap(), build_cubic_box(3, 3, true).unwrap());
    }

    #[test]
    fn neighbors_are_incident_and_ordered() {
        let g = build_slab(3, 3, true).unwrap();
        for v in 0..g.num_vertices() {
            let ns = g.neighbors(v);
            for w in ns.windows(2) {
                assert!(w[0].1 < w[1].1);
            }
            for &(e, u) in ns {
                assert_eq!(g.edge(e).other(v), u);
            }
        }
    }

    #[test]
    fn wired_edges_join_boundary_vertices() {
        let g = build_cubic_box(2, 3, true).unwrap();
        let wired = (0..g.num_edges()).filter(|&e| g.is_wired(e)).count();
        // the 16-vertex ring has 16 edges
        assert_eq!(wired, 16);
    }
}
