use nalgebra::DVector;
use proptest::prelude::*;

use generic_mm::diagnostics::fit_order;
use generic_mm::generic::{fenchel_gap, psi};
use generic_mm::oscillator::{energy, onsager_matrix, Oscillator};
use generic_mm::schemes::{
    energy_identity_residual, euler_step, incremental_g, mm_step, MmOptions, Partition,
};
use generic_mm::{OscillatorParams, State};

fn state() -> impl Strategy<Value = State> {
    (-2.0..2.0f64, -2.0..2.0f64, (0.1f64.ln()..10f64.ln())).prop_map(|(q, p, log_theta)| State {
        q,
        p,
        theta: log_theta.exp(),
    })
}

fn params() -> impl Strategy<Value = OscillatorParams> {
    prop::array::uniform5(0.2..5.0f64).prop_map(|[m, nu, kappa, lambda, c]| {
        OscillatorParams::new(m, nu, kappa, lambda, c).unwrap()
    })
}

fn step() -> impl Strategy<Value = f64> {
    (1e-3f64.ln()..0.5f64.ln()).prop_map(f64::exp)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn fenchel_equality(y in state(), xi in prop::array::uniform3(-3.0..3.0f64)) {
        let model = Oscillator::new(OscillatorParams::unit());
        let xi = DVector::from_column_slice(&xi);
        let y = y.to_dvector();
        let pairing = 2.0 * psi(&model, &y, &xi).unwrap();
        let gap = fenchel_gap(&model, &y, &xi).unwrap();
        prop_assert!(pairing >= 0.0);
        prop_assert!(gap.abs() <= 1e-10 * (1.0 + pairing), "gap {}", gap);
    }

    #[test]
    fn onsager_is_psd(params in params(), y in state()) {
        let k = onsager_matrix(&params, &y).unwrap();
        let eig = k.symmetric_eigen().eigenvalues;
        prop_assert!(eig.min() >= -1e-12 * (1.0 + eig.amax()));
    }

    #[test]
    fn mm_step_is_admissible(params in params(), prev in state(), tau in step()) {
        let (next, diag) = mm_step(&prev, tau, &params, &MmOptions::default()).unwrap();
        prop_assert!(next.theta > 0.0);
        let e0 = energy(&params, &prev);
        prop_assert!(energy_identity_residual(&prev, &next, &params).abs() <= 1e-12 * (1.0 + e0.abs()));
        prop_assert!(diag.g_value.le(1e-10), "G {}", diag.g_value);
    }

    #[test]
    fn mm_never_worse_than_euler(params in params(), prev in state(), tau in step()) {
        let euler = euler_step(&prev, tau, &params).unwrap();
        let (mm, _) = mm_step(&prev, tau, &params, &MmOptions::default()).unwrap();
        let g_euler = incremental_g(&prev, &euler, tau, &params).finite().unwrap();
        let g_mm = incremental_g(&prev, &mm, tau, &params).finite().unwrap();
        prop_assert!(g_mm <= g_euler + 1e-12 * (1.0 + g_euler.abs()), "{} > {}", g_mm, g_euler);
    }

    #[test]
    fn uniform_partition_covers_horizon(horizon in 0.1..50.0f64, tau in 0.01..3.0f64) {
        let partition = Partition::uniform(horizon, tau).unwrap();
        let nodes = partition.nodes();
        prop_assert_eq!(nodes[0], 0.0);
        prop_assert_eq!(partition.horizon(), horizon);
        prop_assert!(nodes.windows(2).all(|w| w[1] > w[0]));
        prop_assert!(partition.diameter() <= tau * (1.0 + 1e-12));
    }

    #[test]
    fn fit_recovers_power_laws(order in 0.3..3.0f64, scale in 1e-3..1e3f64) {
        let taus: Vec<f64> = (2..=8).map(|n| 2f64.powi(-n)).collect();
        let errors: Vec<Option<f64>> = taus.iter().map(|t| Some(scale * t.powf(order))).collect();
        let slope = fit_order(&taus, &errors).unwrap();
        prop_assert!((slope - order).abs() < 1e-10);
    }
}
