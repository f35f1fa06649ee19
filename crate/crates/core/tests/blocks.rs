use bpp_core::block::{
    block_generator_exact, comparison_check, gap_trend_report, particle_contraction, polymer_contraction,
    smallest_unit_gap_param, BlockKind, TrendKind,
};
use bpp_core::equilibrium::exact_measure;
use bpp_core::model::{BoundaryPair, PolymerConfig};

fn ext(n: usize, h: i32) -> BoundaryPair {
    BoundaryPair::extremal(n, h).unwrap()
}

/// Ordered pairs at unit height distance, higher copy first.
fn unit_pairs(b: &BoundaryPair, k: usize) -> Vec<(PolymerConfig, PolymerConfig)> {
    let m = exact_measure(b, k, 1.0).unwrap();
    let mut out = Vec::new();
    for x in m.states() {
        for y in m.states() {
            let d: Vec<usize> = (0..x.flat().len()).filter(|&t| x.flat()[t] != y.flat()[t]).collect();
            if d.len() == 1 && x.flat()[d[0]] > y.flat()[d[0]] {
                out.push((x.clone(), y.clone()));
            }
        }
    }
    out
}

#[test]
fn comparison_chain_holds_with_unit_block_gaps() {
    for (b, k, s, ell) in [(ext(4, 0), 2, 1, 2), (ext(6, 0), 2, 1, 3), (ext(4, 2), 3, 2, 1)] {
        let slab = block_generator_exact(BlockKind::Polymer { s }, &b, k, 1.0, 100_000).unwrap();
        let part = block_generator_exact(BlockKind::Particle { ell }, &b, k, 1.0, 100_000).unwrap();
        assert!(slab.gap().unwrap() >= 1.0 - 1e-9 && part.gap().unwrap() >= 1.0 - 1e-9);
        let r = comparison_check(&b, k, 1.0, s, ell, 50, 9).unwrap();
        assert!(r.polymer_step >= -1e-9, "{r:?}");
        assert!(r.particle_step >= -1e-9, "{r:?}");
        assert!(r.single_site_step >= -1e-9, "{r:?}");
        assert!(r.c > 0.0);
    }
}

#[test]
fn smallest_unit_gap_parameter_exists() {
    let family = [(ext(4, 0), 1), (ext(6, 0), 1), (ext(4, 0), 2)];
    let rows = gap_trend_report(TrendKind::Particle, &family, &[0, 1, 2, 3], 1.0, 100_000).unwrap();
    let best = smallest_unit_gap_param(&rows);
    assert_eq!(best.len(), 3);
    assert!(best.iter().all(|(_, p)| p.is_some()));
    // the single-particle block never has a unit gap
    assert!(best.iter().all(|(_, p)| p.unwrap() >= 1));
}

#[test]
fn left_block_matching_statistics() {
    let b = ext(8, 0);
    let pairs = unit_pairs(&b, 1);
    let mut seen = 0;
    for (x, y) in pairs.iter().step_by(3) {
        let d = particle_contraction(&b, 1.0, 2, 0.5, x, y, 4000, 21).unwrap();
        if let Some(rate) = d.match_rate {
            seen += 1;
            assert!((0.0..=1.0).contains(&rate));
            assert!(d.failure_by_depth.iter().all(|p| (0.0..=1.0).contains(p)));
            assert!(d.failure_by_depth.windows(2).all(|w| w[1] <= w[0] + 1e-12), "{:?}", d.failure_by_depth);
        }
        assert!(d.ci_high < 0.0, "{d:?}");
    }
    assert!(seen > 0);
}

#[test]
fn slab_contraction_across_rho() {
    let b = ext(4, 0);
    let pairs = unit_pairs(&b, 4);
    let picks: Vec<_> = pairs.iter().step_by((pairs.len() / 8).max(1)).collect();
    let worst = |rho: f64| {
        picks
            .iter()
            .map(|(x, y)| {
                let d = polymer_contraction(&b, 1.0, 1, rho, x, y, 3000, 8).unwrap();
                assert!(d.covering_clocks >= 2);
                d.relative()
            })
            .fold(f64::MIN, f64::max)
    };
    assert!(worst(0.5) < 0.0);
    assert!(worst(1.0) <= -1.0);
    // deep discrepancies are outweighed by the slab above once ρ is large
    assert!(worst(3.0) > 0.0);
}
