mod common;

use common::dip_oracle::dip_oracle;
use proptest::prelude::*;
use spatial_diar::overlap::dip::dip_linear;

fn positions(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64 * 0.25).collect()
}

#[test]
fn oracle_reproduces_closed_forms() {
    assert!((dip_oracle(&[0.0, 1.0], &[1.0, 1.0]) - 0.25).abs() < 1e-9);
    assert!((dip_oracle(&[0.0, 1.0, 2.0], &[1.0, 1.0, 1.0]) - 1.0 / 6.0).abs() < 1e-9);
    assert!(dip_oracle(&[0.0, 1.0, 2.0], &[0.0, 1.0, 0.0]).abs() < 1e-9);
}

#[test]
fn bimodal_mass_matches_oracle() {
    let mut w = vec![0.0; 16];
    w[3] = 0.5;
    w[12] = 0.5;
    let x = positions(16);
    let (d, _) = dip_linear(&x, &w).unwrap();
    assert!((d - 0.25).abs() < 1e-12);
    assert!((dip_oracle(&x, &w) - d).abs() < 1e-9);
}

#[test]
fn triangular_matches_oracle() {
    let w: Vec<f64> = (0..21).map(|i| 11.0 - (i as f64 - 10.0).abs()).collect();
    let x = positions(21);
    let (d, _) = dip_linear(&x, &w).unwrap();
    assert!((dip_oracle(&x, &w) - d).abs() < 1e-9, "{d}");
}

fn weights() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![1 => Just(0.0), 4 => 0.0f64..1.0], 2..=24)
        .prop_filter("positive total", |w| w.iter().sum::<f64>() > 1e-3)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn dip_matches_linear_program(w in weights()) {
        let x = positions(w.len());
        let (d, _) = dip_linear(&x, &w).unwrap();
        let o = dip_oracle(&x, &w);
        prop_assert!((d - o).abs() < 1e-9, "port {d} oracle {o} weights {w:?}");
    }

    #[test]
    fn uneven_spacing_matches_linear_program(w in weights(), seed in 0u64..1000) {
        let mut x = Vec::with_capacity(w.len());
        let mut acc = 0.0;
        for i in 0..w.len() as u64 {
            acc += 0.1 + ((seed.wrapping_mul(31).wrapping_add(i * 17)) % 13) as f64 * 0.07;
            x.push(acc);
        }
        let (d, _) = dip_linear(&x, &w).unwrap();
        let o = dip_oracle(&x, &w);
        prop_assert!((d - o).abs() < 1e-9, "port {d} oracle {o}");
    }
}
