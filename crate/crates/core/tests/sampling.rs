//! Chi-square goodness-of-fit checks for the exact samplers.

use bpp_core::block::{resample_particle_block, resample_polymer_block, ParticleWindow, PolymerWindow};
use bpp_core::coupling::{cftp_joint, cftp_sample_indexed};
use bpp_core::equilibrium::{exact_measure, ExactMeasure};
use bpp_core::glauber::DynamicsParams;
use bpp_core::model::{particle_count, BoundaryPair, PolymerConfig};
use bpp_core::rng::replica_rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

const P_VALUE: f64 = 1e-3;

/// Pearson statistic against `expected` probabilities, merging cells below 5 expected counts.
fn chi_square_passes(counts: &[u64], expected: &[f64]) -> (bool, f64, f64) {
    let total: u64 = counts.iter().sum();
    let (mut stat, mut cells) = (0.0, 0usize);
    let (mut pooled_obs, mut pooled_exp) = (0.0, 0.0);
    for (&c, &p) in counts.iter().zip(expected) {
        let e = p * total as f64;
        if e < 5.0 {
            pooled_obs += c as f64;
            pooled_exp += e;
            continue;
        }
        stat += (c as f64 - e).powi(2) / e;
        cells += 1;
    }
    if pooled_exp > 0.0 {
        stat += (pooled_obs - pooled_exp).powi(2) / pooled_exp.max(1e-12);
        cells += 1;
    }
    let dof = (cells.max(2) - 1) as f64;
    let critical = ChiSquared::new(dof).unwrap().inverse_cdf(1.0 - P_VALUE);
    (stat <= critical, stat, critical)
}

fn conditional(m: &ExactMeasure, keep: impl Fn(&PolymerConfig) -> bool) -> Vec<f64> {
    let w: Vec<f64> = m.states().iter().zip(m.probabilities()).map(|(s, p)| if keep(s) { *p } else { 0.0 }).collect();
    let z: f64 = w.iter().sum();
    w.into_iter().map(|x| x / z).collect()
}

#[test]
fn cftp_passes_chi_square() {
    for (n, k, alpha) in [(4, 2, 1.0), (6, 2, 0.4), (6, 3, 1.5)] {
        let bounds = BoundaryPair::extremal(n, 0).unwrap();
        let m = exact_measure(&bounds, k, alpha).unwrap();
        let params = DynamicsParams { alpha, bounds, k, seed: 17, horizon: 0.0 };
        let mut counts = vec![0u64; m.len()];
        for i in 0..20_000 {
            let s = cftp_sample_indexed(&params, i).unwrap().state;
            counts[m.index_of(&s).unwrap()] += 1;
        }
        let (ok, stat, crit) = chi_square_passes(&counts, m.probabilities());
        assert!(ok, "(n={n},k={k},α={alpha}): χ² = {stat:.1} > {crit:.1}");
    }
}

#[test]
fn joint_cftp_marginals_and_order() {
    let top = BoundaryPair::extremal(6, 0).unwrap();
    let lower = BoundaryPair::new(
        bpp_core::model::Path::from_increments("+-+-+-").unwrap(),
        top.sigma().clone(),
    )
    .unwrap();
    let (m_top, m_low) = (exact_measure(&top, 2, 1.0).unwrap(), exact_measure(&lower, 2, 1.0).unwrap());
    let (mut c_top, mut c_low) = (vec![0u64; m_top.len()], vec![0u64; m_low.len()]);
    for i in 0..10_000 {
        let out = cftp_joint(&[top.clone(), lower.clone()], 2, 1.0, 5, i, 1 << 30).unwrap();
        assert!(out.states[0].dominates(&out.states[1]).unwrap());
        c_top[m_top.index_of(&out.states[0]).unwrap()] += 1;
        c_low[m_low.index_of(&out.states[1]).unwrap()] += 1;
    }
    assert!(chi_square_passes(&c_top, m_top.probabilities()).0);
    assert!(chi_square_passes(&c_low, m_low.probabilities()).0);
}

#[test]
fn particle_block_resample_is_the_conditional_law() {
    let bounds = BoundaryPair::extremal(8, 0).unwrap();
    let (k, alpha) = (2, 0.8);
    let m = exact_measure(&bounds, k, alpha).unwrap();
    let count = particle_count(8, 0);
    let start = m.states()[m.len() / 3].clone();
    let mut rng = replica_rng(3, 0);
    for window in [ParticleWindow { i: 1, ell: 0 }, ParticleWindow { i: 2, ell: 1 }, ParticleWindow { i: 4, ell: 1 }] {
        let (first, last) = window.labels(count);
        let frozen = start.to_particles();
        let expected = conditional(&m, |s| {
            let p = s.to_particles();
            (1..=k).all(|j| (1..=count).filter(|&v| v < first || v > last).all(|v| p.x(j, v) == frozen.x(j, v)))
        });
        let mut counts = vec![0u64; m.len()];
        for _ in 0..20_000 {
            let s = resample_particle_block(&start, &bounds, window, alpha, &mut rng, 100_000).unwrap();
            counts[m.index_of(&s).unwrap()] += 1;
        }
        let (ok, stat, crit) = chi_square_passes(&counts, &expected);
        assert!(ok, "{window:?}: χ² = {stat:.1} > {crit:.1}");
    }
}

#[test]
fn polymer_block_resample_is_the_conditional_law() {
    let bounds = BoundaryPair::extremal(6, 0).unwrap();
    let (k, alpha) = (3, 1.2);
    let m = exact_measure(&bounds, k, alpha).unwrap();
    let start = m.states()[m.len() / 2].clone();
    let mut rng = replica_rng(4, 0);
    for window in [PolymerWindow { j: 1, s: 0 }, PolymerWindow { j: 2, s: 0 }, PolymerWindow { j: 3, s: 1 }] {
        let (lo, hi) = window.polymers(k);
        let expected = conditional(&m, |s| (1..=k).filter(|&j| j < lo || j > hi).all(|j| s.polymer(j) == start.polymer(j)));
        let mut counts = vec![0u64; m.len()];
        for _ in 0..20_000 {
            let s = resample_polymer_block(&start, &bounds, window, alpha, &mut rng, 100_000).unwrap();
            counts[m.index_of(&s).unwrap()] += 1;
        }
        let (ok, stat, crit) = chi_square_passes(&counts, &expected);
        assert!(ok, "{window:?}: χ² = {stat:.1} > {crit:.1}");
    }
}
