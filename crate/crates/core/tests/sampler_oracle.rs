//! Sampler output against exact enumeration on graphs small enough to enumerate.

use fkslab::exactref::{enumerate_fk, enumerate_gibbs, ExactDistribution};
use fkslab::sampler::{fk_heatbath_sweep, glauber_sweep, ChainRng, SwSampler};
use fkslab::{build_cubic_box, build_slab, BondConfig, Boundary, LatticeGraph, ModelParams, SpinConfig};
use rand::SeedableRng;

const SWEEPS: usize = 200_000;

fn bond_index(fk: &ExactDistribution, bonds: &BondConfig) -> usize {
    fk.variables()
        .iter()
        .enumerate()
        .filter(|&(_, &e)| bonds.is_open(e))
        .map(|(i, _)| 1 << i)
        .sum()
}

fn total_variation(counts: &[u64], exact: &[f64]) -> f64 {
    let n: u64 = counts.iter().sum();
    0.5 * counts
        .iter()
        .zip(exact)
        .map(|(&c, &p)| (c as f64 / n as f64 - p).abs())
        .sum::<f64>()
}

/// Expected TV distance of an i.i.d. sample of size `n` from `exact`.
fn noise_floor(exact: &[f64], n: usize) -> f64 {
    0.5 * exact
        .iter()
        .map(|&p| (2.0 * p * (1.0 - p) / (std::f64::consts::PI * n as f64)).sqrt())
        .sum::<f64>()
}

/// Allows twice the i.i.d. noise floor plus a small absolute slack for autocorrelation.
fn tv_bound(exact: &[f64], n: usize) -> f64 {
    2.0 * noise_floor(exact, n) + 0.002
}

fn tiny_graphs() -> Vec<LatticeGraph> {
    vec![
        build_cubic_box(1, 3, true).unwrap(),
        build_cubic_box(2, 1, true).unwrap(),
        build_slab(2, 1, false).unwrap(),
    ]
}

#[test]
fn sw_spin_marginal_matches_gibbs() {
    for g in tiny_graphs() {
        for boundary in [Boundary::Plus, Boundary::Minus] {
            let params = ModelParams::new(0.7, boundary).unwrap();
            let exact = enumerate_gibbs(&g, &params).unwrap();
            let mut sampler = SwSampler::new(&g, params);
            let mut state = sampler.initial_state(11);
            let mut counts = vec![0u64; exact.len()];
            for _ in 0..SWEEPS {
                sampler.sweep(&mut state).unwrap();
                counts[exact.spin_state_index(state.spins.as_slice())] += 1;
            }
            let tv = total_variation(&counts, exact.weights());
            let bound = tv_bound(exact.weights(), SWEEPS);
            assert!(tv < bound, "{} {boundary:?}: TV {tv} > {bound}", g.describe());
        }
    }
}

#[test]
fn sw_bond_marginal_and_heatbath_match_wired_fk() {
    for g in tiny_graphs() {
        let params = ModelParams::with_couplings(0.6, 1.0, 0.5, Boundary::Plus).unwrap();
        let probs = params.edge_probabilities(&g);
        let fk = enumerate_fk(&g, &probs).unwrap();

        let mut sampler = SwSampler::new(&g, params);
        let mut state = sampler.initial_state(12);
        let mut sw = vec![0u64; fk.len()];
        for _ in 0..SWEEPS {
            sampler.sweep(&mut state).unwrap();
            sw[bond_index(&fk, &state.bonds)] += 1;
        }

        let mut bonds = BondConfig::from_vec((0..g.num_edges()).map(|e| g.is_wired(e)).collect());
        let mut rng = ChainRng::seed_from_u64(13);
        let mut hb = vec![0u64; fk.len()];
        for _ in 0..SWEEPS {
            fk_heatbath_sweep(&g, &mut bonds, &probs, &mut rng);
            hb[bond_index(&fk, &bonds)] += 1;
        }

        let (tv_sw, tv_hb) = (total_variation(&sw, fk.weights()), total_variation(&hb, fk.weights()));
        let bound = tv_bound(fk.weights(), SWEEPS);
        assert!(tv_sw < bound && tv_hb < bound, "{}: sw {tv_sw}, heat bath {tv_hb}, bound {bound}", g.describe());
    }
}

#[test]
fn free_boundary_glauber_and_sw_agree_with_gibbs() {
    let g = build_cubic_box(2, 1, true).unwrap();
    let params = ModelParams::new(0.4, Boundary::Free).unwrap();
    let exact = enumerate_gibbs(&g, &params).unwrap();
    assert_eq!(exact.len(), 1 << 9);

    let mut sampler = SwSampler::new(&g, params);
    let mut state = sampler.initial_state(21);
    let mut sw = vec![0u64; exact.len()];
    let mut spins = SpinConfig::uniform(g.num_vertices(), 1);
    let mut rng = ChainRng::seed_from_u64(22);
    let mut gl = vec![0u64; exact.len()];
    for _ in 0..SWEEPS {
        sampler.sweep(&mut state).unwrap();
        sw[exact.spin_state_index(state.spins.as_slice())] += 1;
        glauber_sweep(&g, &mut spins, &params, &mut rng);
        gl[exact.spin_state_index(spins.as_slice())] += 1;
    }
    let (tv_sw, tv_gl) = (total_variation(&sw, exact.weights()), total_variation(&gl, exact.weights()));
    let bound = tv_bound(exact.weights(), SWEEPS);
    assert!(tv_sw < bound && tv_gl < bound, "sw {tv_sw}, glauber {tv_gl}, bound {bound}");
}
