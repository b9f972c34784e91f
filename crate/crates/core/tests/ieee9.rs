use syncert_core::certificates::{criterion_i, roa_i, roa_ii, DisturbanceBound};
use syncert_core::equilibrium::{solve_power_flow, spreads, verify_equilibrium, Equilibrium, PowerFlowOptions};
use syncert_core::ieee9::{ParameterSet, POWER_PROFILE};
use syncert_core::network::{
    algebraic_connectivity, build_incidence, laplacian, uniform_damping, IncidencePair, PowerNetwork,
};

fn setup(set: ParameterSet, seed: u64) -> (PowerNetwork, IncidencePair) {
    let net = set.network(uniform_damping(9, 0.7, 1.0, seed)).unwrap();
    let pair = build_incidence(&net);
    (net, pair)
}

fn solved(set: ParameterSet, net: &PowerNetwork, pair: &IncidencePair) -> Equilibrium {
    let opts = PowerFlowOptions::with_reference(set.reference_node(), 0.0);
    solve_power_flow(net, pair, &POWER_PROFILE, &opts).unwrap()
}

#[test]
fn incidence_shapes() {
    let (_, pair) = setup(ParameterSet::One, 0);
    assert_eq!((pair.b.rows(), pair.b.cols()), (9, 9));
    assert_eq!((pair.b_complete.rows(), pair.b_complete.cols()), (9, 36));
}

#[test]
fn algebraic_connectivity_both_sets() {
    for (set, expected) in [(ParameterSet::One, 4.0147), (ParameterSet::Two, 4.5773)] {
        let (net, _) = setup(set, 0);
        let l2 = algebraic_connectivity(&laplacian(&net)).unwrap();
        assert!((l2 - expected).abs() < 1e-3, "{set:?}: {l2}");
    }
}

#[test]
fn power_flow_matches_table() {
    for set in [ParameterSet::One, ParameterSet::Two] {
        let (net, pair) = setup(set, 1);
        let eq = solved(set, &net, &pair);
        assert!(eq.secure);
        assert!(eq.residual_inf <= 1e-10);
        for (got, want) in eq.theta.iter().zip(set.table_angles()) {
            assert!((got - want).abs() < 2e-3, "{set:?}: {got} vs {want}");
        }
    }
}

#[test]
fn table_angles_nearly_balance() {
    for set in [ParameterSet::One, ParameterSet::Two] {
        let (net, _) = setup(set, 1);
        let r = verify_equilibrium(&net, set.table_angles(), &POWER_PROFILE);
        assert!(r.max_abs <= 2e-2);
    }
}

#[test]
fn table_spreads() {
    let (_, pair) = setup(ParameterSet::One, 0);
    let s = spreads(ParameterSet::One.table_angles(), &pair);
    assert!((s.edge - 0.1168).abs() < 1e-12);
    assert!((s.all_pairs - 0.2195).abs() < 1e-12);
    assert!((s.combined - 0.2336).abs() < 1e-12);
    let (_, pair) = setup(ParameterSet::Two, 0);
    let s = spreads(ParameterSet::Two.table_angles(), &pair);
    assert!((s.edge - 0.1395).abs() < 1e-12);
}

#[test]
fn roa_ii_radii() {
    for (set, expected) in [(ParameterSet::One, 0.7115), (ParameterSet::Two, 0.9393)] {
        let (net, pair) = setup(set, 3);
        let eq = Equilibrium::from_angles(&net, &pair, set.table_angles().to_vec(), POWER_PROFILE.to_vec());
        let r = roa_ii(&net, &eq).unwrap();
        assert!((r.gamma_r - expected).abs() < 5e-3, "{set:?}: {}", r.gamma_r);
    }
}

#[test]
fn roa_i_radius_range() {
    for (set, published) in [(ParameterSet::One, 2.3044), (ParameterSet::Two, 2.2684)] {
        for seed in 0..20 {
            let (net, pair) = setup(set, seed);
            let eq = solved(set, &net, &pair);
            let r = roa_i(&net, &eq).unwrap();
            let top = std::f64::consts::PI - eq.spreads.combined;
            assert!(r.gamma_r >= 0.7 * top && r.gamma_r <= top);
            assert!(published >= 0.7 * top && published <= top);
        }
    }
}

#[test]
fn criterion_i_window_brackets_quarter_turn() {
    let mut seen = 0;
    for seed in 0..40 {
        let (net, pair) = setup(ParameterSet::One, seed);
        let eq = solved(ParameterSet::One, &net, &pair);
        let r = criterion_i(&net, &pair, &eq, &DisturbanceBound::new(1.0, vec![0])).unwrap();
        if let Some(w) = r.window {
            seen += 1;
            let star = std::f64::consts::FRAC_PI_2 - eq.spreads.edge;
            assert!(w.gamma_min < star && star < w.gamma_max);
            assert!(w.gamma_max < r.gamma_m);
        }
    }
    assert!(seen > 0);
}
