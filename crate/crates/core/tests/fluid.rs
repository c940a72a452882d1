//! Flow oracles for the penalised Navier-Stokes solver.

use riis_fsi::fluid::FluidParams;

mod common;

#[test]
fn poiseuille_profile() {
    let e = common::poiseuille(30, 20);
    println!("poiseuille relative L2 error {e:.3e}");
    assert!(e <= 0.01, "relative L2 error {e}");
}

#[test]
fn closed_membrane_leaks_at_penalty_rate() {
    let params = FluidParams::default();
    let dp = 10.0 * 133.322;
    let mean = common::leakage(dp, params.resistance);
    let expected = params.epsilon * dp / params.resistance;
    println!("leakage mean {mean:.4e}, expected {expected:.4e}");
    assert!((mean - expected).abs() <= 0.2 * expected, "mean {mean}, expected {expected}");
}
