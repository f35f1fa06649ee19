use bpp_core::equilibrium::{enumerate_states, exact_measure};
use bpp_core::glauber::{local_update_law, Chain};
use bpp_core::model::{BoundaryPair, Path, PolymerConfig};
use proptest::prelude::*;
use proptest::sample::Index;

fn instance() -> impl Strategy<Value = (BoundaryPair, usize)> {
    (prop_oneof![Just(2usize), Just(4), Just(6), Just(8)], 0usize..=2, 1usize..=3).prop_map(|(n, hh, k)| {
        let h = (2 * hh as i32).min(n as i32 - 2).max(0);
        (BoundaryPair::extremal(n, h).unwrap(), k)
    })
}

fn states(b: &BoundaryPair, k: usize) -> Vec<PolymerConfig> {
    enumerate_states(b, k, 100_000).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn representations_round_trip((b, k) in instance(), pick: Index) {
        let all = states(&b, k);
        let c = pick.get(&all);
        prop_assert_eq!(&PolymerConfig::from_text(&c.to_text()).unwrap(), c);
        prop_assert_eq!(&c.to_particles().to_polymers(), c);
        let pp = c.to_plane_partition();
        prop_assert_eq!(&PolymerConfig::from_plane_partition(&pp, k, b.n(), b.h()).unwrap(), c);
        prop_assert_eq!(pp.volume(), c.excess_volume(b.xi()).unwrap());
        for j in 1..=k {
            prop_assert_eq!(&Path::from_increments(&c.path(j).increments()).unwrap(), &c.path(j));
        }
    }

    #[test]
    fn dominance_matches_plane_partition_order((b, k) in instance(), p: Index, q: Index) {
        let all = states(&b, k);
        let (x, y) = (p.get(&all), q.get(&all));
        // higher polymers leave less excess volume
        prop_assert_eq!(x.dominates(y).unwrap(), x.to_plane_partition().le(&y.to_plane_partition()));
        if x.dominates(y).unwrap() && y.dominates(x).unwrap() {
            prop_assert_eq!(x, y);
        }
    }

    #[test]
    fn cube_sets_round_trip(m in 1usize..=3, pick: Index) {
        let b = BoundaryPair::extremal(2 * m, 0).unwrap();
        let all = states(&b, m);
        let c = pick.get(&all);
        let s = c.to_cube_set().unwrap();
        prop_assert!(s.is_monotone());
        prop_assert_eq!(&PolymerConfig::from_cube_set(&s).unwrap(), c);
    }

    #[test]
    fn heat_bath_update_is_monotone(
        (b, k) in instance(),
        p: Index,
        q: Index,
        sites in proptest::collection::vec((any::<prop::sample::Index>(), any::<Index>(), 0.0f64..1.0), 1..40),
        alpha in 0.1f64..3.0,
    ) {
        let all = states(&b, k);
        let (x, y) = (p.get(&all), q.get(&all));
        let (top, bottom) = if x.dominates(y).unwrap() { (x, y) } else if y.dominates(x).unwrap() { (y, x) } else { return Ok(()) };
        let mut hi = Chain::new(&b, alpha, top).unwrap();
        let mut lo = Chain::new(&b, alpha, bottom).unwrap();
        let rows: Vec<usize> = (1..=k).collect();
        let cols: Vec<usize> = (1..b.n()).collect();
        for (i, xx, u) in sites {
            let (i, xx) = (*i.get(&rows), *xx.get(&cols));
            hi.update(i, xx, u);
            lo.update(i, xx, u);
            prop_assert!(hi.dominates(&lo));
            prop_assert!(hi.state().in_bounds(&b).unwrap());
            prop_assert!(lo.state().in_bounds(&b).unwrap());
        }
    }

    #[test]
    fn local_law_is_the_conditional((b, k) in instance(), pick: Index, alpha in 0.1f64..3.0, site: Index) {
        let m = exact_measure(&b, k, alpha).unwrap();
        let c = pick.get(m.states());
        let sites: Vec<(usize, usize)> = (1..=k).flat_map(|i| (1..b.n()).map(move |x| (i, x))).collect();
        let &(i, x) = site.get(&sites);
        let law = local_update_law(c, i, x, &b, alpha).unwrap();
        // conditional from the exact measure: states agreeing with c off (i, x)
        let at = (i - 1) * (b.n() + 1) + x;
        let mut mass = std::collections::BTreeMap::new();
        for (s, w) in m.states().iter().zip(m.probabilities()) {
            let same = s.flat().iter().zip(c.flat()).enumerate().all(|(t, (a, z))| t == at || a == z);
            if same {
                *mass.entry(s.flat()[at]).or_insert(0.0) += w;
            }
        }
        let total: f64 = mass.values().sum();
        for (y, w) in mass {
            prop_assert!((law.prob(y) - w / total).abs() < 1e-10);
        }
    }
}
