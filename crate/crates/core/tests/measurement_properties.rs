use collneg::linalg::ComplexMatrix;
use collneg::measurement::{
    collective_probability, collective_probability_with, feature_vector, tetrahedral_projectors, MeasurementConfig,
    FEATURE_ORDER,
};
use collneg::states::{build_rho4, random_state, state_rng, DensityMatrix};
use num_complex::Complex64;

#[test]
fn ten_unordered_configurations_exist() {
    let mut configs = Vec::new();
    for x in 1..=4u8 {
        for y in 1..=4u8 {
            let cfg = MeasurementConfig::new(x, y).unwrap();
            if !configs.contains(&cfg) {
                configs.push(cfg);
            }
        }
    }
    assert_eq!(configs.len(), 10);
    for cfg in FEATURE_ORDER {
        assert!(configs.contains(&cfg));
    }
}

#[test]
fn probabilities_are_symmetric_and_in_range() {
    for i in 0..2000 {
        let rho4 = build_rho4(&random_state(&mut state_rng(400, i)));
        for x in 1..=4u8 {
            for y in 1..=4u8 {
                let p = collective_probability(&rho4, MeasurementConfig::new(x, y).unwrap()).unwrap();
                assert!((0.0..=1.0).contains(&p));
            }
        }
        let projectors = tetrahedral_projectors();
        for a in 0..4 {
            for b in (a + 1)..4 {
                let xy = collective_probability_with(&rho4, &projectors[a].mat, &projectors[b].mat).unwrap();
                let yx = collective_probability_with(&rho4, &projectors[b].mat, &projectors[a].mat).unwrap();
                assert!((xy - yx).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn rescaling_local_projections_changes_nothing() {
    let projectors = tetrahedral_projectors();
    for i in 0..500 {
        let rho4 = build_rho4(&random_state(&mut state_rng(401, i)));
        for x in &projectors {
            for y in &projectors {
                let base = collective_probability_with(&rho4, &x.mat, &y.mat).unwrap();
                for c in [0.5, 2.0] {
                    let scaled = x.mat.scale(Complex64::new(c, 0.0));
                    let p = collective_probability_with(&rho4, &scaled, &y.mat).unwrap();
                    assert!((p - base).abs() < 1e-12);
                    // normalized projectors give the same value
                    let normalized_y = y.mat.scale(Complex64::new(2.0 * c, 0.0));
                    let q = collective_probability_with(&rho4, &x.mat, &normalized_y).unwrap();
                    assert!((q - base).abs() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn mixed_state_features_are_one_quarter() {
    let fv = feature_vector(&DensityMatrix::maximally_mixed(), 10).unwrap();
    for v in fv.values() {
        assert!((v - 0.25).abs() < 1e-12);
    }
    // (1/16)/(4/16) evaluated directly from the traces
    let rho4 = build_rho4(&DensityMatrix::maximally_mixed());
    let px = &tetrahedral_projectors()[0].mat;
    let num = px.kron(&collneg::measurement::bell_projector().mat).kron(px);
    let den = px.kron(&ComplexMatrix::identity(4)).kron(px);
    let n = rho4.matrix().trace_of_product(&num).unwrap().re;
    let d = rho4.matrix().trace_of_product(&den).unwrap().re;
    assert!((n - 1.0 / 64.0).abs() < 1e-15 && (d - 1.0 / 16.0).abs() < 1e-15);
}

#[test]
fn singlet_features_follow_entanglement_swapping() {
    // Projecting the inner pair of two singlets onto the singlet leaves the
    // outer pair in a singlet, so P_xy = (1 - n_x·n_y)/4: 0 on the diagonal
    // and 1/3 off it (n_x·n_y = -1/3 for distinct tetrahedron vertices).
    let fv = feature_vector(&DensityMatrix::singlet(), 10).unwrap();
    let expected = [0.0, 0.0, 0.0, 0.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0];
    for (v, e) in fv.values().iter().zip(expected) {
        assert!((v - e).abs() < 1e-12, "{:?}", fv.values());
    }
}

#[test]
fn feature_vector_b7_uses_table_configs() {
    let rho = random_state(&mut state_rng(3, 3));
    let rho4 = build_rho4(&rho);
    let fv = feature_vector(&rho, 7).unwrap();
    let pairs = [(1, 1), (2, 2), (3, 3), (4, 4), (1, 3), (2, 4), (1, 4)];
    for (v, (x, y)) in fv.values().iter().zip(pairs) {
        let p = collective_probability(&rho4, MeasurementConfig::new(x, y).unwrap()).unwrap();
        assert_eq!(*v, p);
    }
}
