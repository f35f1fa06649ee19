use bpp_core::lab::{
    build_envelope, build_halo, check_envelope_containment, check_halo_confinement, hitting_scaling_experiment,
    random_ceiling,
};
use bpp_core::model::Path;
use bpp_core::rng::replica_rng;

#[test]
fn envelope_reports_are_reproducible_and_ordered_in_c() {
    let loose = build_envelope(8, 0.5).unwrap();
    let a = check_envelope_containment(&loose, 1.0, loose.default_horizon(), 40, 12).unwrap();
    let b = check_envelope_containment(&loose, 1.0, loose.default_horizon(), 40, 12).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.lower_violations, 0);
    let tight = build_envelope(8, 0.01).unwrap();
    let t = check_envelope_containment(&tight, 1.0, loose.default_horizon(), 40, 12).unwrap();
    assert!(t.violation_frequency() >= a.violation_frequency());
}

#[test]
fn halo_contains_the_ground_state() {
    let mut rng = replica_rng(6, 0);
    for m in [4, 8, 16] {
        for _ in 0..5 {
            let xi = random_ceiling(m, &mut rng).unwrap();
            let halo = build_halo(&xi, m).unwrap();
            assert!(halo.confines(halo.ground()));
            assert!(halo.extra_volume() as f64 <= halo.volume_bound());
        }
    }
}

#[test]
fn halo_confinement_grows_with_c() {
    let xi = Path::wedge(32, 0).unwrap();
    let small = check_halo_confinement(&xi, 16, 1.0, 0.005, 20, 3, None).unwrap();
    let large = check_halo_confinement(&xi, 16, 1.0, 0.04, 20, 3, None).unwrap();
    assert!(small.burn_in < large.burn_in);
    assert!(large.frequency() >= small.frequency());
    assert!(large.frequency() >= 0.9);
}

#[test]
fn hitting_times_grow_with_the_side() {
    let r = hitting_scaling_experiment(&[4, 8], 1.0, 40, 2, None).unwrap();
    assert_eq!(r.rows.len(), 2);
    assert!(r.rows[1].quantile > r.rows[0].quantile);
    assert!(r.rows.iter().all(|row| row.median <= row.quantile));
}
