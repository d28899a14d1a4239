use proptest::prelude::*;
use rephase_core::analysis::{
    fit_lifetime, fit_rabi, hyperfine_grid_search, mode_weights, rabi_curve, window_efficiency, BootstrapOptions,
    EfficiencyTrace, GridOptions, LifetimeModel,
};
use rephase_core::atomics::{velocity_grid, Label};
use rephase_core::presets::paper_main;
use rephase_core::protocol::{build_multimode, SegmentPlan};
use rephase_core::solver::{run, SimulationRecord, SolverConfig};
use rephase_core::Error;
use std::sync::OnceLock;

/// A two-bin multimode run on a small ensemble, computed once.
fn two_bin_record() -> &'static (SimulationRecord, Vec<(f64, f64)>) {
    static REC: OnceLock<(SimulationRecord, Vec<(f64, f64)>)> = OnceLock::new();
    REC.get_or_init(|| {
        let p = paper_main().unwrap();
        let mut cfg = p.solver.clone();
        cfg.velocity = velocity_grid(p.temperature_k, cfg.scheme.mass_kg, 9, 4.0).unwrap();
        cfg.nz = 8;
        let plan = SegmentPlan { storage_ns: 20.0, group_size: 2, ratio: 1.0 };
        let seq = build_multimode(&[0.0, 4.0], &plan, &p.pulses).unwrap();
        let windows = seq.windows.iter().map(|w| (w.start_ns, w.end_ns)).collect();
        (run(&cfg, &seq).unwrap(), windows)
    })
}

fn rabi_data(truth: [f64; 4], n: usize) -> (Vec<f64>, Vec<f64>) {
    let e: Vec<f64> = (0..n).map(|i| 0.1 + 9.0 * i as f64 / (n - 1) as f64).collect();
    let y = e.iter().map(|&x| truth[0] * (1.0 - truth[1] * (truth[2] * x.sqrt() + truth[3]).cos().powi(2))).collect();
    (e, y)
}

#[test]
fn windows_add_up() {
    let (rec, windows) = two_bin_record();
    let e_in = rec.input_energy();
    let (a, c) = windows[0];
    let b = 0.5 * (a + c);
    let whole = window_efficiency(rec, (a, c), e_in).unwrap();
    let parts = window_efficiency(rec, (a, b), e_in).unwrap() + window_efficiency(rec, (b, c), e_in).unwrap();
    assert!(whole > 0.01);
    assert!((whole - parts).abs() < 1e-12 * whole);
}

#[test]
fn empty_window_overlap_gives_zero() {
    let (rec, _) = two_bin_record();
    assert_eq!(window_efficiency(rec, (500.0, 501.0), rec.input_energy()).unwrap(), 0.0);
    assert!(matches!(window_efficiency(rec, (0.0, 1.0), 0.0), Err(Error::Validation(_))));
}

#[test]
fn mode_weights_need_a_first_window_with_energy() {
    let (rec, windows) = two_bin_record();
    assert!(mode_weights(rec, &[]).is_err());
    assert!(mode_weights(rec, &[(500.0, 501.0), windows[0]]).is_err());
    let w = mode_weights(rec, windows).unwrap();
    assert_eq!(w[0], 1.0);
    assert!((w[1] - 1.0).abs() < 0.05, "{w:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn mode_weights_ignore_overall_scale(c in 1e-3f64..1e3) {
        let (rec, windows) = two_bin_record();
        let a = mode_weights(rec, windows).unwrap();
        let b = mode_weights(&rec.scaled(c), windows).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }

    #[test]
    fn noiseless_lifetimes_are_recovered(eta0 in 0.05f64..1.0, t_c in 0.5f64..200.0, gaussian in any::<bool>()) {
        let model = if gaussian { LifetimeModel::Gaussian } else { LifetimeModel::Exponential };
        let t: Vec<f64> = (1..=10).map(|i| t_c * 0.15 * i as f64).collect();
        let y: Vec<f64> = t
            .iter()
            .map(|&x| if gaussian { eta0 * (-(x / t_c).powi(2)).exp() } else { eta0 * (-x / t_c).exp() })
            .collect();
        let trace = EfficiencyTrace::from_columns(&t, &y, &vec![0.0; t.len()]).unwrap();
        let fit = fit_lifetime(&trace, model, BootstrapOptions::new(0, 0)).unwrap();
        prop_assert!((fit.value("t_c_ns") / t_c - 1.0).abs() < 1e-6);
        prop_assert!((fit.value("eta0") / eta0 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn rabi_fit_reproduces_noiseless_curves(eta0 in 0.1f64..1.0, v in 0.5f64..0.99, a in 0.6f64..1.4, phi in 0.0f64..3.0) {
        let (e, y) = rabi_data([eta0, v, a, phi], 25);
        let fit = fit_rabi(&e, &y, &vec![0.0; e.len()], BootstrapOptions::new(0, 0)).unwrap();
        for (&x, &yi) in e.iter().zip(&y) {
            prop_assert!((rabi_curve(&fit, x) - yi).abs() < 1e-6, "E = {x}");
        }
        prop_assert!((fit.value("pi_fidelity") - v).abs() < 1e-6);
    }
}

#[test]
fn bootstrap_intervals_are_stable_across_seeds() {
    let (e, y) = rabi_data([0.8, 0.892, 0.9, 0.3], 30);
    let sigma: Vec<f64> = y.iter().map(|v| 0.03 * v).collect();
    let width = |seed| {
        let f = fit_rabi(&e, &y, &sigma, BootstrapOptions::new(1000, seed)).unwrap();
        let (lo, hi) = f.get("pi_fidelity").unwrap().interval95;
        hi - lo
    };
    let (a, b) = (width(1), width(2));
    assert!(((a - b) / a).abs() < 0.2, "{a} vs {b}");
    assert_eq!(width(1), a);
}

/// A cheap stand-in for the solver: a decaying beat whose frequencies depend
/// on the d-manifold constants, read back from the node configuration.
fn beat_model(cfg: &SolverConfig, t: &[f64]) -> rephase_core::Result<Vec<f64>> {
    let mut levels: Vec<f64> = cfg.scheme.manifold(Label::D).sublevels.iter().map(|s| s.offset_mhz).collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    let (g1, g2) = (levels[1] - levels[0], levels[2] - levels[1]);
    let w = 2e-3 * std::f64::consts::PI;
    Ok(t.iter()
        .map(|&x| 0.5 * (-x / 60.0).exp() * (0.6 + 0.2 * (w * g1 * x).cos() + 0.2 * (w * g2 * x).cos()))
        .collect())
}

#[test]
fn grid_search_finds_the_truth_node() {
    let base = paper_main().unwrap().solver;
    let truth = base.scheme.with_hyperfine_constants(Label::D, 3.4, -4.0).unwrap();
    let times: Vec<f64> = (1..=12).map(|i| 3.0 * i as f64).collect();
    let cfg = SolverConfig { scheme: truth, ..base.clone() };
    let data = beat_model(&cfg, &times).unwrap();
    let trace = EfficiencyTrace::from_columns(&times, &data, &vec![1e-3; times.len()]).unwrap();
    let a_axis = [2.4, 2.9, 3.4, 3.9, 4.4];
    let b_axis = [-6.0, -5.0, -4.0, -3.0, -2.0];
    let grid =
        hyperfine_grid_search(&trace, &a_axis, &b_axis, &base, beat_model, GridOptions { n_resample: 20, seed: 3 })
            .unwrap();
    assert_eq!(grid.best_node, (2, 2));
    assert!(grid.residual[2][2] < 1e-20);
    assert!((grid.minimum.0 - 3.4).abs() < 0.5 && (grid.minimum.1 + 4.0).abs() < 1.0, "{:?}", grid.minimum);
    assert!(grid.failed.is_empty());
    assert!(!grid.flat);
}

fn max_offset(cfg: &SolverConfig) -> f64 {
    cfg.scheme.manifold(Label::D).sublevels.iter().map(|s| s.offset_mhz).fold(f64::NEG_INFINITY, f64::max)
}

#[test]
fn grid_search_tolerates_a_few_failed_nodes_only() {
    let base = paper_main().unwrap().solver;
    let times = [5.0, 10.0, 20.0];
    let data = beat_model(&base, &times).unwrap();
    let trace = EfficiencyTrace::from_columns(&times, &data, &[1e-3; 3]).unwrap();
    let a_axis = [1.0, 2.0, 3.0, 4.0, 5.0];
    let b_axis = [-5.0, -4.0, -3.0, -2.0, -1.0];
    let opts = GridOptions { n_resample: 5, seed: 0 };
    let scheme = base.scheme.with_hyperfine_constants(Label::D, 5.0, -1.0).unwrap();
    let corner = max_offset(&SolverConfig { scheme, ..base.clone() });
    let one_bad = |cfg: &SolverConfig, t: &[f64]| {
        if max_offset(cfg) == corner {
            Err(Error::Divergence { tau_ns: 0.0, msg: "synthetic".into() })
        } else {
            beat_model(cfg, t)
        }
    };
    let g = hyperfine_grid_search(&trace, &a_axis, &b_axis, &base, one_bad, opts).unwrap();
    assert_eq!(g.failed, vec![(4, 4)]);
    assert!(g.residual[4][4].is_nan());

    let always =
        |_: &SolverConfig, _: &[f64]| -> rephase_core::Result<Vec<f64>> { Err(Error::Validation("no".into())) };
    assert!(matches!(hyperfine_grid_search(&trace, &a_axis, &b_axis, &base, always, opts), Err(Error::Fit(_))));
}
