//! Samplers for the Edwards-Sokal coupling of the Ising model and the q = 2
//! random-cluster model on a finite graph with a boundary shell.
//!
//! The main chain alternates the two conditional updates of the coupling
//! (Swendsen-Wang). Two independent dynamics are provided for cross-checking:
//! single-edge heat bath on bonds and single-site heat bath on spins.

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use thiserror::Error;

use crate::clusters::{connected_without_edge_wired, ClusterError, ClusterLabeling, Labeler};
use crate::configuration::{BondConfig, SpinConfig};
use crate::graph::{EdgeClass, LatticeGraph};

/// Name of the generator recorded in every output file.
pub const GENERATOR_NAME: &str = "xoshiro256++";

pub type ChainRng = Xoshiro256PlusPlus;

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("inverse temperature must be finite and non-negative, got {0}")]
    InvalidBeta(f64),
    #[error("coupling strengths must be positive and finite, got {0}")]
    InvalidCoupling(f64),
    #[error("invalid schedule: {0}")]
    InvalidSchedule(&'static str),
    #[error("observer `{name}` failed at sweep {sweep}: {message}")]
    Observer { name: String, sweep: u64, message: String },
    #[error("invariant violated at sweep {sweep}: {message}")]
    Invariant { sweep: u64, message: String },
    #[error(transparent)]
    Cluster(#[from] ClusterError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Boundary {
    Plus,
    Minus,
    Free,
    /// Wired bonds with the boundary cluster's sign drawn uniformly each sweep.
    WiredBond,
}

impl Boundary {
    /// The spin forced on the boundary shell, if any.
    pub fn fixed_sign(self) -> Option<i8> {
        match self {
            Boundary::Plus => Some(1),
            Boundary::Minus => Some(-1),
            Boundary::Free | Boundary::WiredBond => None,
        }
    }

    /// Whether edges inside the shell are forced open.
    pub fn is_wired(self) -> bool {
        !matches!(self, Boundary::Free)
    }

    pub fn name(self) -> &'static str {
        match self {
            Boundary::Plus => "plus",
            Boundary::Minus => "minus",
            Boundary::Free => "free",
            Boundary::WiredBond => "wired-bond",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "plus" | "+" => Some(Boundary::Plus),
            "minus" | "-" => Some(Boundary::Minus),
            "free" => Some(Boundary::Free),
            "wired-bond" | "wired" => Some(Boundary::WiredBond),
            _ => None,
        }
    }
}

/// Edge open probability `1 - exp(-2 beta J)`.
pub fn p_from_beta(beta: f64, coupling: f64) -> Result<f64, SamplerError> {
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(SamplerError::InvalidBeta(beta));
    }
    if !(coupling.is_finite() && coupling > 0.0) {
        return Err(SamplerError::InvalidCoupling(coupling));
    }
    Ok(-(-2.0 * beta * coupling).exp_m1())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    beta: f64,
    j_horizontal: f64,
    j_vertical: f64,
    boundary: Boundary,
}

impl ModelParams {
    pub fn new(beta: f64, boundary: Boundary) -> Result<Self, SamplerError> {
        Self::with_couplings(beta, 1.0, 1.0, boundary)
    }

    pub fn with_couplings(beta: f64, j_horizontal: f64, j_vertical: f64, boundary: Boundary) -> Result<Self, SamplerError> {
        p_from_beta(beta, j_horizontal)?;
        p_from_beta(beta, j_vertical)?;
        Ok(ModelParams {
            beta,
            j_horizontal,
            j_vertical,
            boundary,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn coupling(&self, class: EdgeClass) -> f64 {
        match class {
            EdgeClass::Horizontal => self.j_horizontal,
            EdgeClass::Vertical | EdgeClass::Periodic => self.j_vertical,
        }
    }

    pub fn j_horizontal(&self) -> f64 {
        self.j_horizontal
    }

    pub fn j_vertical(&self) -> f64 {
        self.j_vertical
    }

    pub fn edge_probability(&self, class: EdgeClass) -> f64 {
        -(-2.0 * self.beta * self.coupling(class)).exp_m1()
    }

    pub fn edge_probabilities(&self, g: &LatticeGraph) -> Vec<f64> {
        g.edges().iter().map(|e| self.edge_probability(e.class)).collect()
    }

    pub fn edge_couplings(&self, g: &LatticeGraph) -> Vec<f64> {
        g.edges().iter().map(|e| self.coupling(e.class)).collect()
    }

    /// Whether vertex `v` has its spin fixed by the boundary condition.
    pub fn is_fixed(&self, g: &LatticeGraph, v: usize) -> bool {
        self.boundary.fixed_sign().is_some() && g.is_boundary(v)
    }

    /// Whether edge `e` is forced open by the boundary condition.
    pub fn is_forced_open(&self, g: &LatticeGraph, e: usize) -> bool {
        self.boundary.is_wired() && g.is_wired(e)
    }
}

/// A joint spin/bond configuration together with its chain's generator.
#[derive(Debug, Clone)]
pub struct CouplingState {
    pub spins: SpinConfig,
    pub bonds: BondConfig,
    pub rng: ChainRng,
    pub sweep_count: u64,
}

impl CouplingState {
    /// Ordered start: all spins equal to the boundary sign (+1 when unfixed), only
    /// forced edges open.
    pub fn ordered(g: &LatticeGraph, params: &ModelParams, seed: u64) -> Self {
        let sign = params.boundary().fixed_sign().unwrap_or(1);
        let bonds = (0..g.num_edges()).map(|e| params.is_forced_open(g, e)).collect();
        CouplingState {
            spins: SpinConfig::uniform(g.num_vertices(), sign),
            bonds: BondConfig::from_vec(bonds),
            rng: ChainRng::seed_from_u64(seed),
            sweep_count: 0,
        }
    }

    /// Checks the coupling constraint and the boundary forcing.
    pub fn check_invariants(&self, g: &LatticeGraph, params: &ModelParams) -> Result<(), String> {
        let s = self.spins.as_slice();
        for (e, edge) in g.edges().iter().enumerate() {
            let open = self.bonds.is_open(e);
            if open && s[edge.a] != s[edge.b] {
                return Err(format!("open edge {e} joins opposite spins"));
            }
            if params.is_forced_open(g, e) && !open {
                return Err(format!("wired edge {e} is closed"));
            }
        }
        if let Some(sign) = params.boundary().fixed_sign() {
            if let Some(&v) = g.boundary().iter().find(|&&v| s[v] != sign) {
                return Err(format!("boundary vertex {v} has spin {}", s[v]));
            }
        }
        Ok(())
    }
}

/// Resamples every bond given the spins: forced edges open, unequal-spin edges
/// closed, equal-spin edges open with their own probability.
pub fn bond_update_given_spins(g: &LatticeGraph, state: &mut CouplingState, params: &ModelParams) {
    let probs = params.edge_probabilities(g);
    let forced: Vec<bool> = (0..g.num_edges()).map(|e| params.is_forced_open(g, e)).collect();
    bond_update_with(g, state, &probs, &forced);
}

fn bond_update_with(g: &LatticeGraph, state: &mut CouplingState, probs: &[f64], forced: &[bool]) {
    let CouplingState { spins, bonds, rng, .. } = state;
    let s = spins.as_slice();
    let open = bonds.as_mut_slice();
    for (e, edge) in g.edges().iter().enumerate() {
        open[e] = if forced[e] {
            true
        } else if s[edge.a] != s[edge.b] {
            false
        } else {
            rng.gen::<f64>() < probs[e]
        };
    }
}

/// Resamples the spins given the bonds. Clusters touching the boundary take the
/// boundary sign; every other cluster gets an independent uniform sign. Returns
/// the labeling of the bond configuration, which stays valid since bonds are
/// untouched.
pub fn spin_update_given_bonds(
    g: &LatticeGraph,
    state: &mut CouplingState,
    params: &ModelParams,
) -> Result<ClusterLabeling, SamplerError> {
    let mut labeler = Labeler::new(g);
    let mut scratch = vec![0i8; g.num_vertices()];
    spin_update_with(g, state, params, &mut labeler, &mut scratch)
}

fn spin_update_with(
    g: &LatticeGraph,
    state: &mut CouplingState,
    params: &ModelParams,
    labeler: &mut Labeler,
    cluster_sign: &mut [i8],
) -> Result<ClusterLabeling, SamplerError> {
    let boundary = params.boundary();
    let lab = labeler.open_clusters(g, &state.bonds, boundary.is_wired())?;
    cluster_sign.fill(0);
    let boundary_sign = match boundary {
        Boundary::Plus => 1,
        Boundary::Minus => -1,
        Boundary::WiredBond => random_sign(&mut state.rng),
        Boundary::Free => 0,
    };
    let CouplingState { spins, rng, .. } = state;
    let s = spins.as_mut_slice();
    for (v, spin) in s.iter_mut().enumerate() {
        let r = lab.find(v);
        if cluster_sign[r] == 0 {
            cluster_sign[r] = if boundary_sign != 0 && lab.touches_boundary(r) {
                boundary_sign
            } else {
                random_sign(rng)
            };
        }
        *spin = cluster_sign[r];
    }
    state.sweep_count += 1;
    Ok(lab)
}

fn random_sign(rng: &mut ChainRng) -> i8 {
    if rng.gen::<bool>() {
        1
    } else {
        -1
    }
}

/// Swendsen-Wang sweep with cached per-edge probabilities and scratch buffers.
#[derive(Debug, Clone)]
pub struct SwSampler<'g> {
    graph: &'g LatticeGraph,
    params: ModelParams,
    probs: Vec<f64>,
    forced: Vec<bool>,
    labeler: Labeler,
    cluster_sign: Vec<i8>,
}

impl<'g> SwSampler<'g> {
    pub fn new(graph: &'g LatticeGraph, params: ModelParams) -> Self {
        SwSampler {
            graph,
            params,
            probs: params.edge_probabilities(graph),
            forced: (0..graph.num_edges()).map(|e| params.is_forced_open(graph, e)).collect(),
            labeler: Labeler::new(graph),
            cluster_sign: vec![0; graph.num_vertices()],
        }
    }

    pub fn graph(&self) -> &'g LatticeGraph {
        self.graph
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn initial_state(&self, seed: u64) -> CouplingState {
        CouplingState::ordered(self.graph, &self.params, seed)
    }

    /// One bond update followed by one spin update.
    pub fn sweep(&mut self, state: &mut CouplingState) -> Result<ClusterLabeling, SamplerError> {
        bond_update_with(self.graph, state, &self.probs, &self.forced);
        spin_update_with(self.graph, state, &self.params, &mut self.labeler, &mut self.cluster_sign)
    }
}

/// Convenience wrapper around [`SwSampler::sweep`].
pub fn sw_sweep(g: &LatticeGraph, state: &mut CouplingState, params: &ModelParams) -> Result<ClusterLabeling, SamplerError> {
    SwSampler::new(g, *params).sweep(state)
}

/// Open probability of `e` given the rest of a wired configuration: `p` when its
/// endpoints are already joined, `p / (2 - p)` otherwise.
pub fn fk_edge_open_probability(g: &LatticeGraph, bonds: &BondConfig, e: usize, p: f64) -> f64 {
    if connected_without_edge_wired(g, bonds, e) {
        p
    } else {
        p / (2.0 - p)
    }
}

/// Single-edge heat bath for the wired random-cluster measure with q = 2.
pub fn fk_heatbath_edge(g: &LatticeGraph, bonds: &mut BondConfig, e: usize, p: f64, rng: &mut ChainRng) {
    let q = fk_edge_open_probability(g, bonds, e, p);
    let open = rng.gen::<f64>() < q;
    if bonds.is_open(e) != open {
        bonds.set(e, open);
    }
}

/// Heat-bath pass over every non-wired edge in index order.
pub fn fk_heatbath_sweep(g: &LatticeGraph, bonds: &mut BondConfig, probs: &[f64], rng: &mut ChainRng) {
    for e in 0..g.num_edges() {
        if !g.is_wired(e) {
            fk_heatbath_edge(g, bonds, e, probs[e], rng);
        }
    }
}

/// Probability that the single-site heat bath sets `v` to +1.
pub fn glauber_plus_probability(g: &LatticeGraph, spins: &SpinConfig, v: usize, params: &ModelParams) -> f64 {
    let s = spins.as_slice();
    let field: f64 = g
        .neighbors(v)
        .iter()
        .map(|&(e, u)| params.coupling(g.edge(e).class) * f64::from(s[u]))
        .sum();
    1.0 / (1.0 + (-2.0 * params.beta() * field).exp())
}

/// Single-site heat bath for the Ising Gibbs measure.
pub fn glauber_spin_site(g: &LatticeGraph, spins: &mut SpinConfig, v: usize, params: &ModelParams, rng: &mut ChainRng) {
    let plus = glauber_plus_probability(g, spins, v, params);
    let s = if rng.gen::<f64>() < plus { 1 } else { -1 };
    if spins.get(v) != s {
        spins.set(v, s);
    }
}

/// Heat-bath pass over all unfixed vertices in index order.
pub fn glauber_sweep(g: &LatticeGraph, spins: &mut SpinConfig, params: &ModelParams, rng: &mut ChainRng) {
    for v in 0..g.num_vertices() {
        if !(g.is_boundary(v) && params.boundary() != Boundary::Free) {
            glauber_spin_site(g, spins, v, params, rng);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Schedule {
    pub burn_in: u64,
    pub sweeps: u64,
    pub thin: u64,
    pub seed: u64,
    /// Verify the coupling constraint and boundary forcing on every retained sample.
    pub check_invariants: bool,
}

impl Schedule {
    pub fn new(burn_in: u64, sweeps: u64, thin: u64, seed: u64) -> Self {
        Schedule {
            burn_in,
            sweeps,
            thin,
            seed,
            check_invariants: cfg!(debug_assertions),
        }
    }

    /// Burn-in of ten sweeps per unit of box side.
    pub fn default_burn_in(g: &LatticeGraph) -> u64 {
        10 * g.dims()[0] as u64
    }

    pub fn retained(&self) -> u64 {
        if self.thin == 0 {
            0
        } else {
            self.sweeps / self.thin
        }
    }
}

/// What an observer sees after each retained sweep.
pub struct SampleView<'a> {
    pub graph: &'a LatticeGraph,
    pub params: &'a ModelParams,
    pub state: &'a CouplingState,
    /// Labeling of `state.bonds`, wired unless the boundary is free.
    pub bond_clusters: &'a ClusterLabeling,
}

pub trait Observer: Send {
    fn name(&self) -> &str;
    fn observe(&mut self, view: &SampleView<'_>) -> Result<f64, String>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainRecord {
    pub sweep: u64,
    pub values: Vec<f64>,
}

/// Runs one Swendsen-Wang chain and returns one record per retained sweep,
/// holding the observers' values in registration order.
pub fn run_chain(
    g: &LatticeGraph,
    params: &ModelParams,
    schedule: &Schedule,
    observers: &mut [Box<dyn Observer>],
) -> Result<Vec<ChainRecord>, SamplerError> {
    run_chain_with(g, params, schedule, |view| {
        observers
            .iter_mut()
            .map(|o| {
                o.observe(view).map_err(|message| SamplerError::Observer {
                    name: o.name().to_string(),
                    sweep: view.state.sweep_count,
                    message,
                })
            })
            .collect::<Result<Vec<_>, _>>()
            .map(|values| ChainRecord {
                sweep: view.state.sweep_count,
                values,
            })
    })
}

/// Generic form of [`run_chain`] with a single callback per retained sweep.
pub fn run_chain_with<T>(
    g: &LatticeGraph,
    params: &ModelParams,
    schedule: &Schedule,
    mut observe: impl FnMut(&SampleView<'_>) -> Result<T, SamplerError>,
) -> Result<Vec<T>, SamplerError> {
    if schedule.sweeps == 0 {
        return Err(SamplerError::InvalidSchedule("sweeps must be positive"));
    }
    if schedule.thin == 0 {
        return Err(SamplerError::InvalidSchedule("thin must be positive"));
    }
    let mut sampler = SwSampler::new(g, *params);
    let mut state = sampler.initial_state(schedule.seed);
    for _ in 0..schedule.burn_in {
        sampler.sweep(&mut state)?;
    }
    let mut out = Vec::with_capacity(schedule.retained() as usize);
    for k in 1..=schedule.sweeps {
        let lab = sampler.sweep(&mut state)?;
        if k % schedule.thin != 0 {
            continue;
        }
        if schedule.check_invariants {
            state
                .check_invariants(g, params)
                .map_err(|message| SamplerError::Invariant {
                    sweep: state.sweep_count,
                    message,
                })?;
        }
        let view = SampleView {
            graph: g,
            params,
            state: &state,
            bond_clusters: &lab,
        };
        out.push(observe(&view)?);
    }
    Ok(out)
}
