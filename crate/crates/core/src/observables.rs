//! Per-sample indicators: origin spin, boundary-reaching clusters, column
//! majorities and column percolation on slabs.
//!
//! "Reaches infinity" is everywhere replaced by "touches the boundary shell".

use std::collections::VecDeque;
use std::fmt;

use thiserror::Error;

use crate::clusters::ClusterLabeling;
use crate::configuration::{BondConfig, SpinConfig};
use crate::graph::{Columns, LatticeGraph};
use crate::sampler::{Observer, SampleView};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ObservableError {
    #[error("observable requires a slab graph")]
    NotSlab,
    #[error("column set is empty")]
    EmptyColumnSet,
    #[error("column {0} lies on the rim")]
    ColumnOnRim(usize),
    #[error("column set is not connected")]
    DisconnectedColumnSet,
    #[error("column index {0} out of range")]
    ColumnOutOfRange(usize),
    #[error(transparent)]
    Cluster(#[from] crate::clusters::ClusterError),
}

/// CSV column names, in output order.
pub const OBSERVABLE_NAMES: [&str; 7] = [
    "m_origin",
    "fk_span",
    "plus_span",
    "column_sign",
    "column_span",
    "event_a",
    "e_class",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EClass {
    Plus,
    Minus,
    Tie,
}

impl EClass {
    /// +1 for E+, -1 for E-, 0 for a tie.
    pub fn as_sign(self) -> i8 {
        match self {
            EClass::Plus => 1,
            EClass::Minus => -1,
            EClass::Tie => 0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            EClass::Plus => EClass::Minus,
            EClass::Minus => EClass::Plus,
            EClass::Tie => EClass::Tie,
        }
    }
}

impl fmt::Display for EClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EClass::Plus => "E+",
            EClass::Minus => "E-",
            EClass::Tie => "tie",
        })
    }
}

fn columns(g: &LatticeGraph) -> Result<&Columns, ObservableError> {
    g.columns().ok_or(ObservableError::NotSlab)
}

pub fn magnetization_indicator(spins: &SpinConfig, origin: usize) -> i8 {
    spins.get(origin)
}

/// Whether the origin's open cluster touches the boundary, given a labeling of the bonds.
pub fn fk_origin_spans_labeled(g: &LatticeGraph, lab: &ClusterLabeling) -> bool {
    lab.touches_boundary(g.origin())
}

/// Whether the origin's open cluster touches the boundary.
pub fn fk_origin_spans(g: &LatticeGraph, bonds: &BondConfig) -> bool {
    let s = g.origin();
    if g.is_boundary(s) {
        return true;
    }
    bfs_reaches(g.num_vertices(), s, |x| g.is_boundary(x), |x, push| {
        for &(e, y) in g.neighbors(x) {
            if bonds.is_open(e) {
                push(y);
            }
        }
    })
}

/// Whether the origin lies in a cluster of `sign` spins touching the boundary.
pub fn sign_cluster_spans(g: &LatticeGraph, spins: &SpinConfig, sign: i8) -> bool {
    let s = spins.as_slice();
    let o = g.origin();
    if s[o] != sign {
        return false;
    }
    bfs_reaches(g.num_vertices(), o, |x| g.is_boundary(x), |x, push| {
        for &(_, y) in g.neighbors(x) {
            if s[y] == sign {
                push(y);
            }
        }
    })
}

pub fn plus_cluster_spans(g: &LatticeGraph, spins: &SpinConfig) -> bool {
    sign_cluster_spans(g, spins, 1)
}

fn bfs_reaches(
    n: usize,
    start: usize,
    target: impl Fn(usize) -> bool,
    mut expand: impl FnMut(usize, &mut dyn FnMut(usize)),
) -> bool {
    let mut seen = vec![false; n];
    let mut queue = VecDeque::new();
    seen[start] = true;
    queue.push_back(start);
    while let Some(x) = queue.pop_front() {
        if target(x) {
            return true;
        }
        expand(x, &mut |y| {
            if !seen[y] {
                seen[y] = true;
                queue.push_back(y);
            }
        });
    }
    false
}

fn column_sum(cols: &Columns, spins: &[i8], c: usize) -> i32 {
    cols.vertices(c).map(|v| i32::from(spins[v])).sum()
}

/// Sign of the spin sum over a column; 0 only on ties (even layer counts).
pub fn column_majority_sign(g: &LatticeGraph, spins: &SpinConfig, column: usize) -> Result<i8, ObservableError> {
    let cols = columns(g)?;
    if column >= cols.count() {
        return Err(ObservableError::ColumnOutOfRange(column));
    }
    Ok(column_sum(cols, spins.as_slice(), column).signum() as i8)
}

/// Whether the origin column belongs to a cluster of `sign`-majority columns
/// (base-plane adjacency) that reaches a rim column.
pub fn column_sign_spans(g: &LatticeGraph, spins: &SpinConfig, sign: i8) -> Result<bool, ObservableError> {
    let cols = columns(g)?;
    let s = spins.as_slice();
    let good = |c: usize| column_sum(cols, s, c).signum() as i8 == sign;
    let o = cols.origin();
    if !good(o) {
        return Ok(false);
    }
    Ok(bfs_reaches(cols.count(), o, |c| cols.is_rim(c), |c, push| {
        for d in cols.neighbors(c) {
            if good(d) {
                push(d);
            }
        }
    }))
}

pub fn column_percolation_spans(g: &LatticeGraph, spins: &SpinConfig) -> Result<bool, ObservableError> {
    column_sign_spans(g, spins, 1)
}

/// Columns within this base-plane distance of the rim are left out of bulk averages.
pub const BULK_MARGIN: usize = 4;

/// Columns at base-plane distance at least `margin` from the rim, or the origin
/// column alone when none qualify.
pub fn bulk_columns(g: &LatticeGraph, margin: usize) -> Result<Vec<usize>, ObservableError> {
    let cols = columns(g)?;
    let w = cols.width;
    let bulk: Vec<usize> = (0..cols.count())
        .filter(|&c| {
            let (i, j) = cols.coords(c);
            i.min(j).min(w - 1 - i).min(w - 1 - j) >= margin.max(1)
        })
        .collect();
    Ok(if bulk.is_empty() { vec![cols.origin()] } else { bulk })
}

/// Marks the columns lying in a cluster of `sign`-majority columns that contains
/// a rim column.
pub fn spanning_columns(g: &LatticeGraph, spins: &SpinConfig, sign: i8) -> Result<Vec<bool>, ObservableError> {
    let cols = columns(g)?;
    let s = spins.as_slice();
    let good: Vec<bool> = (0..cols.count())
        .map(|c| column_sum(cols, s, c).signum() as i8 == sign)
        .collect();
    let mut reached = vec![false; cols.count()];
    let mut queue: VecDeque<usize> = (0..cols.count()).filter(|&c| cols.is_rim(c) && good[c]).collect();
    for &c in &queue {
        reached[c] = true;
    }
    while let Some(c) = queue.pop_front() {
        for d in cols.neighbors(c) {
            if good[d] && !reached[d] {
                reached[d] = true;
                queue.push_back(d);
            }
        }
    }
    Ok(reached)
}

/// Column-mean spin and spanning counts summed over a window of columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ColumnWindowCounts {
    pub columns: u32,
    pub layers: u32,
    pub spin_sum: i64,
    pub span_plus: u32,
    pub span_minus: u32,
}

impl ColumnWindowCounts {
    pub fn measure(g: &LatticeGraph, spins: &SpinConfig, window: &[usize]) -> Result<Self, ObservableError> {
        let cols = columns(g)?;
        let s = spins.as_slice();
        let plus = spanning_columns(g, spins, 1)?;
        let minus = spanning_columns(g, spins, -1)?;
        Ok(ColumnWindowCounts {
            columns: window.len() as u32,
            layers: cols.layers as u32,
            spin_sum: window.iter().map(|&c| i64::from(column_sum(cols, s, c))).sum(),
            span_plus: window.iter().filter(|&&c| plus[c]).count() as u32,
            span_minus: window.iter().filter(|&&c| minus[c]).count() as u32,
        })
    }

    /// Mean spin over all vertices of the window.
    pub fn magnetization(&self) -> f64 {
        self.spin_sum as f64 / f64::from(self.columns * self.layers)
    }

    /// Fraction of window columns in a rim-reaching cluster of `sign`-majority columns.
    pub fn span_fraction(&self, sign: i8) -> f64 {
        let n = if sign > 0 { self.span_plus } else { self.span_minus };
        f64::from(n) / f64::from(self.columns)
    }
}

/// Whether every vertex of the origin column lies in a boundary-touching open cluster.
pub fn event_a_labeled(g: &LatticeGraph, lab: &ClusterLabeling) -> Result<bool, ObservableError> {
    let cols = columns(g)?;
    Ok(cols.vertices(cols.origin()).all(|v| lab.touches_boundary(v)))
}

pub fn event_a(g: &LatticeGraph, bonds: &BondConfig) -> Result<bool, ObservableError> {
    columns(g)?;
    // touching the boundary does not depend on wiring
    let lab = crate::clusters::label_open_clusters(g, bonds)?;
    event_a_labeled(g, &lab)
}

pub fn e_class(g: &LatticeGraph, spins: &SpinConfig) -> Result<EClass, ObservableError> {
    let cols = columns(g)?;
    Ok(match column_sum(cols, spins.as_slice(), cols.origin()).signum() {
        1 => EClass::Plus,
        -1 => EClass::Minus,
        _ => EClass::Tie,
    })
}

/// A finite connected set of non-rim columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnSet {
    members: Vec<usize>,
    outer: Vec<usize>,
}

impl ColumnSet {
    pub fn new(g: &LatticeGraph, members: &[usize]) -> Result<Self, ObservableError> {
        let cols = columns(g)?;
        if members.is_empty() {
            return Err(ObservableError::EmptyColumnSet);
        }
        let mut inside = vec![false; cols.count()];
        for &c in members {
            if c >= cols.count() {
                return Err(ObservableError::ColumnOutOfRange(c));
            }
            if cols.is_rim(c) {
                return Err(ObservableError::ColumnOnRim(c));
            }
            inside[c] = true;
        }
        let mut members: Vec<usize> = members.to_vec();
        members.sort_unstable();
        members.dedup();
        let reached = {
            let mut seen = vec![false; cols.count()];
            let mut stack = vec![members[0]];
            seen[members[0]] = true;
            let mut count = 0;
            while let Some(c) = stack.pop() {
                count += 1;
                for d in cols.neighbors(c) {
                    if inside[d] && !seen[d] {
                        seen[d] = true;
                        stack.push(d);
                    }
                }
            }
            count
        };
        if reached != members.len() {
            return Err(ObservableError::DisconnectedColumnSet);
        }
        let mut outer: Vec<usize> = members
            .iter()
            .flat_map(|&c| cols.neighbors(c))
            .filter(|&d| !inside[d])
            .collect();
        outer.sort_unstable();
        outer.dedup();
        Ok(ColumnSet { members, outer })
    }

    /// The single origin column.
    pub fn origin(g: &LatticeGraph) -> Result<Self, ObservableError> {
        let c = columns(g)?.origin();
        Self::new(g, &[c])
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    /// Columns outside the set adjacent to it.
    pub fn outer_boundary(&self) -> &[usize] {
        &self.outer
    }
}

/// Whether `y` is exactly a maximal plus-majority column cluster: every member has
/// a strictly positive column sum and every outer neighbour a non-positive one.
pub fn c_y_plus_indicator(g: &LatticeGraph, spins: &SpinConfig, y: &ColumnSet) -> Result<bool, ObservableError> {
    let cols = columns(g)?;
    let s = spins.as_slice();
    Ok(y.members.iter().all(|&c| column_sum(cols, s, c) > 0) && y.outer.iter().all(|&c| column_sum(cols, s, c) <= 0))
}

/// Every observable of one retained sample. Column fields are `None` on cubic graphs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ObservableRecord {
    pub sweep: u64,
    pub m_origin: i8,
    pub fk_span: bool,
    pub plus_span: bool,
    pub minus_span: bool,
    pub column_sign: Option<i8>,
    pub column_span: Option<bool>,
    pub column_span_minus: Option<bool>,
    pub event_a: Option<bool>,
    pub e_class: Option<EClass>,
    /// Bulk-window counts over the columns of [`bulk_columns`] with [`BULK_MARGIN`].
    pub column_window: Option<ColumnWindowCounts>,
}

impl ObservableRecord {
    pub fn measure(g: &LatticeGraph, spins: &SpinConfig, bond_clusters: &ClusterLabeling, sweep: u64) -> Self {
        let slab = g.columns().is_some();
        ObservableRecord {
            sweep,
            m_origin: magnetization_indicator(spins, g.origin()),
            fk_span: fk_origin_spans_labeled(g, bond_clusters),
            plus_span: sign_cluster_spans(g, spins, 1),
            minus_span: sign_cluster_spans(g, spins, -1),
            column_sign: slab.then(|| e_class(g, spins).unwrap().as_sign()),
            column_span: column_sign_spans(g, spins, 1).ok(),
            column_span_minus: column_sign_spans(g, spins, -1).ok(),
            event_a: event_a_labeled(g, bond_clusters).ok(),
            e_class: e_class(g, spins).ok(),
            column_window: bulk_columns(g, BULK_MARGIN)
                .and_then(|w| ColumnWindowCounts::measure(g, spins, &w))
                .ok(),
        }
    }

    pub fn from_view(view: &SampleView<'_>) -> Self {
        Self::measure(view.graph, &view.state.spins, view.bond_clusters, view.state.sweep_count)
    }

    /// Numeric value of a named observable; `e_class` maps to +1/0/-1.
    pub fn value(&self, name: &str) -> Option<f64> {
        let b = |x: bool| if x { 1.0 } else { 0.0 };
        match name {
            "m_origin" => Some(f64::from(self.m_origin)),
            "fk_span" => Some(b(self.fk_span)),
            "plus_span" => Some(b(self.plus_span)),
            "minus_span" => Some(b(self.minus_span)),
            "column_sign" => self.column_sign.map(f64::from),
            "column_span" => self.column_span.map(b),
            "column_span_minus" => self.column_span_minus.map(b),
            "event_a" => self.event_a.map(b),
            "e_class" => self.e_class.map(|c| f64::from(c.as_sign())),
            "e_plus" => self.e_class.map(|c| b(c == EClass::Plus)),
            "e_minus" => self.e_class.map(|c| b(c == EClass::Minus)),
            "bulk_m" => self.column_window.map(|w| w.magnetization()),
            "bulk_column_span" => self.column_window.map(|w| w.span_fraction(1)),
            "bulk_column_span_minus" => self.column_window.map(|w| w.span_fraction(-1)),
            _ => None,
        }
    }
}

/// A named observable usable with [`crate::sampler::run_chain`].
#[derive(Debug, Clone)]
pub struct NamedObservable {
    name: String,
}

impl NamedObservable {
    pub fn new(name: &str) -> Option<Self> {
        let probe = ObservableRecord {
            sweep: 0,
            m_origin: 1,
            fk_span: false,
            plus_span: false,
            minus_span: false,
            column_sign: Some(0),
            column_span: Some(false),
            column_span_minus: Some(false),
            event_a: Some(false),
            e_class: Some(EClass::Tie),
            column_window: Some(ColumnWindowCounts {
                columns: 1,
                layers: 1,
                spin_sum: 0,
                span_plus: 0,
                span_minus: 0,
            }),
        };
        probe.value(name).map(|_| NamedObservable { name: name.to_string() })
    }
}

impl Observer for NamedObservable {
    fn name(&self) -> &str {
        &self.name
    }

    fn observe(&mut self, view: &SampleView<'_>) -> Result<f64, String> {
        ObservableRecord::from_view(view)
            .value(&self.name)
            .ok_or_else(|| format!("{} is undefined on {}", self.name, view.graph.describe()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clusters::{label_open_clusters, label_sign_clusters};
    use crate::graph::{build_cubic_box, build_slab};
    use rand::{Rng, SeedableRng};
    use rand_xoshiro::Xoshiro256PlusPlus;

    fn set_column(spins: &mut SpinConfig, g: &LatticeGraph, c: usize, values: &[i8]) {
        let cols = g.columns().unwrap();
        for (v, &s) in cols.vertices(c).zip(values) {
            spins.set(v, s);
        }
    }

    #[test]
    fn origin_indicator() {
        let g = build_cubic_box(2, 3, true).unwrap();
        assert_eq!(magnetization_indicator(&SpinConfig::uniform(25, 1), g.origin()), 1);
        assert_eq!(magnetization_indicator(&SpinConfig::uniform(25, -1), g.origin()), -1);
    }

    #[test]
    fn fk_span_extremes() {
        let g = build_cubic_box(2, 5, true).unwrap();
        assert!(fk_origin_spans(&g, &BondConfig::open(g.num_edges())));
        assert!(!fk_origin_spans(&g, &BondConfig::closed(g.num_edges())));
    }

    #[test]
    fn plus_span_cases() {
        let g = build_cubic_box(2, 5, true).unwrap();
        let mut spins = SpinConfig::uniform(g.num_vertices(), 1);
        assert!(plus_cluster_spans(&g, &spins));
        spins.set(g.origin(), -1);
        assert!(!plus_cluster_spans(&g, &spins));
        // plus origin enclosed by a ring of minus neighbours
        let mut ring = SpinConfig::uniform(g.num_vertices(), 1);
        for &(_, u) in g.neighbors(g.origin()) {
            ring.set(u, -1);
        }
        assert!(!plus_cluster_spans(&g, &ring));
        assert!(sign_cluster_spans(&g, &ring.flipped(), -1) == plus_cluster_spans(&g, &ring));
    }

    #[test]
    fn span_matches_labelings_on_random_configs() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(2);
        for _ in 0..300 {
            let g = build_cubic_box(2, rng.gen_range(1..6), true).unwrap();
            let p = rng.gen::<f64>();
            let spins = SpinConfig::from_vec((0..g.num_vertices()).map(|_| if rng.gen_bool(p) { 1 } else { -1 }).collect());
            let bonds = BondConfig::from_vec((0..g.num_edges()).map(|_| rng.gen_bool(p)).collect());
            let lab = label_sign_clusters(&g, &spins, 1).unwrap();
            let expected = spins.get(g.origin()) == 1 && lab.touches_boundary(g.origin());
            assert_eq!(plus_cluster_spans(&g, &spins), expected);
            let lab = label_open_clusters(&g, &bonds).unwrap();
            assert_eq!(fk_origin_spans(&g, &bonds), lab.touches_boundary(g.origin()));
        }
    }

    #[test]
    fn column_majorities() {
        let g3 = build_slab(3, 1, false).unwrap();
        let o = g3.columns().unwrap().origin();
        let mut s = SpinConfig::uniform(g3.num_vertices(), 1);
        set_column(&mut s, &g3, o, &[1, 1, -1]);
        assert_eq!(column_majority_sign(&g3, &s, o).unwrap(), 1);
        assert_eq!(e_class(&g3, &s).unwrap(), EClass::Plus);
        set_column(&mut s, &g3, o, &[1, -1, -1]);
        assert_eq!(column_majority_sign(&g3, &s, o).unwrap(), -1);
        set_column(&mut s, &g3, o, &[-1, -1, -1]);
        assert_eq!(e_class(&g3, &s).unwrap(), EClass::Minus);

        let g2 = build_slab(2, 1, false).unwrap();
        let o = g2.columns().unwrap().origin();
        let mut s = SpinConfig::uniform(g2.num_vertices(), 1);
        set_column(&mut s, &g2, o, &[1, -1]);
        assert_eq!(column_majority_sign(&g2, &s, o).unwrap(), 0);
        assert_eq!(e_class(&g2, &s).unwrap(), EClass::Tie);
        assert!(!column_percolation_spans(&g2, &s).unwrap());

        let cubic = build_cubic_box(2, 3, true).unwrap();
        let s = SpinConfig::uniform(25, 1);
        assert_eq!(column_majority_sign(&cubic, &s, 0), Err(ObservableError::NotSlab));
        assert_eq!(column_percolation_spans(&cubic, &s), Err(ObservableError::NotSlab));
        assert_eq!(event_a(&cubic, &BondConfig::closed(40)), Err(ObservableError::NotSlab));
        assert_eq!(e_class(&cubic, &s), Err(ObservableError::NotSlab));
    }

    #[test]
    fn column_percolation_cases() {
        let g = build_slab(2, 3, false).unwrap();
        let cols = g.columns().unwrap();
        let plus = SpinConfig::uniform(g.num_vertices(), 1);
        assert!(column_percolation_spans(&g, &plus).unwrap());
        let mut s = SpinConfig::uniform(g.num_vertices(), -1);
        set_column(&mut s, &g, cols.origin(), &[1, 1]);
        assert!(!column_percolation_spans(&g, &s).unwrap());
        let mut s = plus.clone();
        set_column(&mut s, &g, cols.origin(), &[-1, -1]);
        assert!(!column_percolation_spans(&g, &s).unwrap());
        // a straight path of plus columns from the origin to the rim
        let mut s = SpinConfig::uniform(g.num_vertices(), -1);
        let (i, j) = cols.coords(cols.origin());
        for ii in 0..=i {
            set_column(&mut s, &g, cols.index(ii, j), &[1, -1]);
        }
        assert!(!column_percolation_spans(&g, &s).unwrap());
        for ii in 0..=i {
            set_column(&mut s, &g, cols.index(ii, j), &[1, 1]);
        }
        assert!(column_percolation_spans(&g, &s).unwrap());
    }

    #[test]
    fn event_a_cases() {
        let g = build_slab(2, 3, false).unwrap();
        let cols = g.columns().unwrap();
        assert!(event_a(&g, &BondConfig::open(g.num_edges())).unwrap());
        assert!(!event_a(&g, &BondConfig::closed(g.num_edges())).unwrap());
        // only layer 0 of the origin column connects to the rim
        let mut bonds = BondConfig::closed(g.num_edges());
        let (i, j) = cols.coords(cols.origin());
        for ii in 0..i {
            let a = cols.vertex(cols.index(ii, j), 0);
            let b = cols.vertex(cols.index(ii + 1, j), 0);
            let e = g.neighbors(a).iter().find(|&&(_, y)| y == b).unwrap().0;
            bonds.set(e, true);
        }
        assert!(fk_origin_spans(&g, &bonds));
        assert!(!event_a(&g, &bonds).unwrap());
    }

    #[test]
    fn flip_swaps_classes() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(4);
        for layers in 1..=4 {
            let g = build_slab(layers, 3, false).unwrap();
            let cols = g.columns().unwrap();
            for _ in 0..50 {
                let s = SpinConfig::from_vec((0..g.num_vertices()).map(|_| if rng.gen() { 1 } else { -1 }).collect());
                let f = s.flipped();
                for c in 0..cols.count() {
                    assert_eq!(column_majority_sign(&g, &f, c).unwrap(), -column_majority_sign(&g, &s, c).unwrap());
                }
                let class = e_class(&g, &s).unwrap();
                assert_eq!(e_class(&g, &f).unwrap(), class.flipped());
                if layers % 2 == 1 {
                    assert_ne!(class, EClass::Tie);
                }
                assert_eq!(column_sign_spans(&g, &s, 1).unwrap(), column_sign_spans(&g, &f, -1).unwrap());
            }
        }
    }

    #[test]
    fn c_y_cases() {
        let g = build_slab(2, 3, false).unwrap();
        let cols = g.columns().unwrap();
        let y = ColumnSet::origin(&g).unwrap();
        assert_eq!(y.outer_boundary().len(), 4);
        let mut s = SpinConfig::uniform(g.num_vertices(), -1);
        set_column(&mut s, &g, cols.origin(), &[1, 1]);
        assert!(c_y_plus_indicator(&g, &s, &y).unwrap());
        set_column(&mut s, &g, y.outer_boundary()[0], &[1, 1]);
        assert!(!c_y_plus_indicator(&g, &s, &y).unwrap());
        set_column(&mut s, &g, y.outer_boundary()[0], &[1, -1]);
        assert!(c_y_plus_indicator(&g, &s, &y).unwrap());
        set_column(&mut s, &g, cols.origin(), &[1, -1]);
        assert!(!c_y_plus_indicator(&g, &s, &y).unwrap());

        assert_eq!(ColumnSet::new(&g, &[0]), Err(ObservableError::ColumnOnRim(0)));
        assert_eq!(ColumnSet::new(&g, &[]), Err(ObservableError::EmptyColumnSet));
        let a = cols.index(1, 1);
        let b = cols.index(3, 3);
        assert_eq!(ColumnSet::new(&g, &[a, b]), Err(ObservableError::DisconnectedColumnSet));
        let pair = ColumnSet::new(&g, &[cols.index(1, 1), cols.index(1, 2)]).unwrap();
        assert_eq!(pair.outer_boundary().len(), 6);
    }

    #[test]
    fn spanning_columns_match_per_column_search() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(43);
        for _ in 0..100 {
            let layers = rng.gen_range(1..=3);
            let g = build_slab(layers, rng.gen_range(1..=6), false).unwrap();
            let cols = g.columns().unwrap();
            let bias = rng.gen::<f64>();
            let spins = SpinConfig::from_vec(
                (0..g.num_vertices()).map(|_| if rng.gen_bool(bias) { 1 } else { -1 }).collect(),
            );
            for sign in [1, -1] {
                let marks = spanning_columns(&g, &spins, sign).unwrap();
                assert_eq!(marks[cols.origin()], column_sign_spans(&g, &spins, sign).unwrap());
                let good = |c: usize| column_majority_sign(&g, &spins, c).unwrap() == sign;
                for c in 0..cols.count() {
                    let mut seen = vec![c];
                    let mut i = 0;
                    while i < seen.len() {
                        let x = seen[i];
                        i += 1;
                        if good(x) {
                            for d in cols.neighbors(x) {
                                if good(d) && !seen.contains(&d) {
                                    seen.push(d);
                                }
                            }
                        }
                    }
                    let expected = good(c) && seen.iter().any(|&x| cols.is_rim(x));
                    assert_eq!(marks[c], expected);
                }
            }
        }
    }

    #[test]
    fn bulk_window_sizes_and_counts() {
        let g = build_slab(2, 32, false).unwrap();
        assert_eq!(bulk_columns(&g, BULK_MARGIN).unwrap().len(), 26 * 26);
        assert_eq!(bulk_columns(&g, 1).unwrap().len(), 32 * 32);
        let tiny = build_slab(2, 2, false).unwrap();
        assert_eq!(bulk_columns(&tiny, BULK_MARGIN).unwrap(), vec![tiny.columns().unwrap().origin()]);

        let mut spins = SpinConfig::uniform(g.num_vertices(), 1);
        let window = bulk_columns(&g, BULK_MARGIN).unwrap();
        let w = ColumnWindowCounts::measure(&g, &spins, &window).unwrap();
        assert_eq!((w.magnetization(), w.span_fraction(1), w.span_fraction(-1)), (1.0, 1.0, 0.0));
        let c = window[0];
        set_column(&mut spins, &g, c, &[-1, 1]);
        let w = ColumnWindowCounts::measure(&g, &spins, &window).unwrap();
        assert_eq!(w.spin_sum, 2 * 676 - 2);
        assert_eq!(w.span_plus, 675);
        assert!(ColumnWindowCounts::measure(&build_cubic_box(2, 3, true).unwrap(), &spins, &window).is_err());
    }

    #[test]
    fn record_values() {
        let g = build_slab(3, 2, true).unwrap();
        let spins = SpinConfig::uniform(g.num_vertices(), 1);
        let bonds = BondConfig::open(g.num_edges());
        let lab = label_open_clusters(&g, &bonds).unwrap();
        let r = ObservableRecord::measure(&g, &spins, &lab, 3);
        for name in OBSERVABLE_NAMES {
            assert_eq!(r.value(name), Some(1.0), "{name}");
        }
        assert!(NamedObservable::new("bogus").is_none());
        let cubic = build_cubic_box(2, 2, true).unwrap();
        let lab = label_open_clusters(&cubic, &BondConfig::open(cubic.num_edges())).unwrap();
        let r = ObservableRecord::measure(&cubic, &SpinConfig::uniform(16, 1), &lab, 0);
        assert_eq!(r.value("event_a"), None);
        assert_eq!(r.value("fk_span"), Some(1.0));
    }
}
