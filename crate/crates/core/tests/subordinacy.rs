use quasispec_core::arithmetic::{Frequency, Precision};
use quasispec_core::potential::{Orbit, Potential};
use quasispec_core::subordinacy::{det_via_beta_scan, geometric_k_list, profile};
use quasispec_core::weyl::WeylOptions;

fn setup() -> (Orbit, Potential) {
    (
        Orbit::new(&Frequency::golden(40, Precision::Extended).unwrap()),
        Potential::amo(0.5).unwrap(),
    )
}

// ||P|| ||P^{-1}||^3 = ||P||^4 / det^3 decays like k^{-2} once ||P|| ~ k and
// det ~ k^2, so only the upper bound is uniform in k
#[test]
fn blabl_ratio_bounded_above_at_band_center() {
    let (orbit, v) = setup();
    let ks = geometric_k_list(1000, 1.5);
    let p = profile(0.0, &v, orbit, 0.0, &ks, &WeylOptions::with_tol(1e-10)).unwrap();
    let sup = p.rows.iter().map(|r| r.ratio_blabl).fold(0.0, f64::max);
    assert!(sup < 1e2, "sup {sup}");
    // frozen: k = 1 gives ||P_(1)||^4 with det P_(1) = 1
    let first = &p.rows[0];
    assert_eq!(first.k, 1);
    assert!((first.ratio_blabl - first.norm_p.powi(4)).abs() < 1e-12 * first.ratio_blabl);
    assert!((first.ratio_blabl - 17.929_373_455_943_68).abs() < 1e-9);
    assert!(p.bracket_violations(0.05).is_empty());
}

#[test]
fn ladder_det_agrees_with_beta_scan_in_band() {
    let (orbit, v) = setup();
    for (e, x) in [(0.0, 0.0), (0.2, 0.31), (-1.6, 0.77)] {
        let ladder = quasispec_core::subordinacy::p_ladder(e, &v, orbit, x, 40).unwrap();
        for k in [1usize, 7, 40] {
            let scan = det_via_beta_scan(e, &v, orbit, x, k, 256).unwrap();
            let d = ladder[k - 1].det();
            assert!((scan.det - d).abs() < 1e-8 * d, "E={e} k={k}: {} vs {d}", scan.det);
        }
    }
}
