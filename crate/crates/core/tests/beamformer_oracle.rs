//! Beamformer weights against an independent least-norm solve: steering
//! rows rebuilt from first principles, pseudo-inverse via nalgebra's SVD.

use nalgebra::{Complex, DMatrix, DVector};
use proptest::prelude::*;
use spatial_diar::beamformer::{design_cddma, design_cdma, min_norm_solve, ConstraintSpec};
use spatial_diar::geometry::{ArrayGeometry, ElementPattern, FrequencyGrid};
use spatial_diar::linalg::CMatrix;
use spatial_diar::num::C;

const M: usize = 12;
const RADIUS: f64 = 0.04;

fn oracle_row(omega: f64, theta: f64, omni_weight: f64, c: f64) -> Vec<Complex<f64>> {
    (0..M)
        .map(|m| {
            let az = 2.0 * std::f64::consts::PI * m as f64 / M as f64;
            let gain = omni_weight + (1.0 - omni_weight) * (theta - az).cos();
            // row entries are conjugated steering values
            Complex::from_polar(gain, -omega * RADIUS / c * (theta - az).cos())
        })
        .collect()
}

fn oracle_weights(omega: f64, angles: &[f64], values: &[Complex<f64>], omni_weight: f64, c: f64) -> DVector<Complex<f64>> {
    let rows: Vec<Complex<f64>> = angles.iter().flat_map(|&a| oracle_row(omega, a, omni_weight, c)).collect();
    let r = DMatrix::from_row_slice(angles.len(), M, &rows);
    let pinv = r.pseudo_inverse(1e-13).expect("svd converges");
    pinv * DVector::from_column_slice(values)
}

fn max_gap(ours: &[C<f64>], oracle: &DVector<Complex<f64>>) -> f64 {
    ours.iter().zip(oracle.iter()).map(|(a, b)| (a.re - b.re).hypot(a.im - b.im)).fold(0.0, f64::max)
}

#[test]
fn super_cardioid_weights_match_pseudo_inverse() {
    let geom = ArrayGeometry::<f64>::uniform_circular(M, RADIUS, ElementPattern::Cardioid).unwrap();
    let c = geom.speed_of_sound();
    let grid = FrequencyGrid::new(16000.0, 512).unwrap();
    let spec = ConstraintSpec::<f64>::super_cardioid();
    let values: Vec<Complex<f64>> = spec.values().iter().map(|v| Complex::new(v.re, v.im)).collect();
    for (look, design, omni) in [
        (0.0, design_cddma as fn(_, _, _, _) -> _, 0.5),
        (1.1, design_cddma, 0.5),
        (4.0, design_cdma, 1.0),
    ] {
        let beam = design(&geom, &grid, look, &spec).unwrap();
        let angles = spec.absolute_angles(look);
        let mut checked = 0;
        for k in (1..grid.num_bins()).step_by(7) {
            if beam.report().is_flagged(k) {
                continue;
            }
            let h = oracle_weights(grid.omega(k), &angles, &values, omni, c);
            let scale = h.norm().max(1.0);
            let gap = max_gap(beam.weights(k), &h);
            assert!(gap <= 1e-8 * scale, "look {look} bin {k}: gap {gap:e}, norm {scale:e}");
            checked += 1;
        }
        assert!(checked > 20);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn min_norm_solve_matches_svd(
        n in 1usize..=4,
        raw in proptest::collection::vec((0.0f64..std::f64::consts::TAU, -1.0f64..1.0, -1.0f64..1.0), 4),
        omega in 2000.0f64..40000.0,
    ) {
        let geom = ArrayGeometry::<f64>::uniform_circular(M, RADIUS, ElementPattern::Cardioid).unwrap();
        let c = geom.speed_of_sound();
        let mut angles: Vec<f64> = raw.iter().take(n).map(|r| r.0).collect();
        // keep constraint directions well apart so the system stays well posed
        angles.sort_by(f64::total_cmp);
        prop_assume!(angles.windows(2).all(|w| w[1] - w[0] > 0.3) && angles[0] + std::f64::consts::TAU - angles[n - 1] > 0.3);
        let values: Vec<Complex<f64>> = raw.iter().take(n).map(|r| Complex::new(r.1, r.2)).collect();
        let r = geom.constraint_matrix(omega, &angles).unwrap();
        let (h, cond, regularized) = min_norm_solve(&r, &values);
        prop_assume!(!regularized && cond < 1e6);
        let oracle = oracle_weights(omega, &angles, &values, 0.5, c);
        let gap = max_gap(&h, &oracle);
        prop_assert!(gap <= 1e-8 * oracle.norm().max(1.0), "gap {gap:e} cond {cond:e}");
        let residual = CMatrix::mul_vec(&r, &h);
        for (a, b) in residual.iter().zip(&values) {
            prop_assert!((a.re - b.re).hypot(a.im - b.im) < 1e-8);
        }
    }
}
