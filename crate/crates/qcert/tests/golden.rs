mod common;

use common::*;
use qcert::fcs::char_poly_jets;
use qcert::liouvillian::build_quantum_generator;
use qcert::machines::{build_nic, build_nic_rotated, FridgeParams};
use qcert::Dd;

#[test]
fn amplifier_coefficients_match_closed_forms() {
    let mut r = rng(11);
    for _ in 0..20 {
        let p = amplifier_draw(&mut r);
        let got = amplifier_coeffs(&p);
        let want = amplifier_golden(&p);
        for k in [0, 1, 2, 4] {
            assert!(rel_err(got[k], want[k]) < 1e-10, "{k}: {} vs {}", got[k], want[k]);
        }
        assert!(got[3].abs() <= 1e-10 * got[2].abs());
    }
}

#[test]
fn fridge_coefficients_match_closed_forms() {
    let mut r = rng(12);
    for _ in 0..20 {
        let p = fridge_draw(&mut r);
        let got = fridge_coeffs(&p);
        let want = fridge_golden(&p);
        for (k, w) in [(0, want[0]), (1, want[1]), (3, want[2])] {
            assert!(rel_err(got[k], w) < 1e-10, "{k}: {} vs {w} for {p:?}", got[k]);
        }
    }
}

#[test]
fn fridge_coefficients_survive_degenerate_qubit_gaps() {
    let p = FridgeParams { eps1: 2.5, ..FridgeParams::default() };
    let got = fridge_coeffs(&p);
    let want = fridge_golden(&p);
    assert!(rel_err(got[0], want[0]) < 1e-10);
}

#[test]
fn nic_literal_matrix_matches_closed_forms() {
    let mut r = rng(13);
    for _ in 0..20 {
        let p = nic_draw(&mut r);
        let got = primes(&char_poly_jets(&nic_literal(&p)).unwrap());
        let want = nic_golden(&p);
        for (k, w) in [(0, want[0]), (1, want[1]), (2, want[2]), (3, want[3])] {
            assert!(rel_err(got[k], w) < 1e-10, "{k}: {} vs {w}", got[k]);
        }
    }
}

#[test]
fn rotated_nic_has_the_same_current_as_the_original() {
    let mut r = rng(14);
    for _ in 0..10 {
        let p = nic_draw(&mut r);
        let (a, ha, hb) = nic_rotated_rates(&p);
        let w0 = build_quantum_generator::<Dd>(&build_nic(&p).unwrap()).unwrap().monitor_bath("w").unwrap();
        let w1 = build_quantum_generator::<Dd>(&build_nic_rotated(&p, a, ha, hb).unwrap())
            .unwrap()
            .monitor_bath("w")
            .unwrap();
        let s0 = qcert::fcs::cumulants(&w0).unwrap();
        let s1 = qcert::fcs::cumulants(&w1).unwrap();
        assert!(rel_err(s1.c1, s0.c1) < 1e-9, "{} {}", s1.c1, s0.c1);
        assert!(rel_err(s1.c2, s0.c2) < 1e-9);
    }
}

/// The physical (undoubled) NIC generator reproduces the printed a0', a0''
/// and a1 only up to the factor ½ and the emission/absorption interchange,
/// and its a1' has `γh^α + γh^β` where the printed form has `γh^α`.  This
/// test records the discrepancy; it fails by construction.
#[test]
#[ignore = "printed NIC a1' does not follow from the physical generator"]
fn nic_physical_generator_matches_printed_a1_prime() {
    let mut r = rng(15);
    let p = nic_draw(&mut r);
    let (a, ha, hb) = nic_rotated_rates(&p);
    let w = build_quantum_generator::<Dd>(&build_nic_rotated(&p, a, ha, hb).unwrap())
        .unwrap()
        .monitor_bath("w")
        .unwrap();
    let got = primes(&char_poly_jets(&w).unwrap());
    let want = nic_golden(&p);
    assert!(rel_err(got[3], want[3]) < 1e-10, "{} vs {}", got[3], want[3]);
}
