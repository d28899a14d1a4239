use proptest::prelude::*;
use rephase_core::fields::Channel;
use rephase_core::protocol::{build_multimode, build_rephased, validate, PulseSettings, SegmentPlan};

/// Signed time a coherence written at `t_in` and read at `t_out` spends in s
/// minus `r` times the time it spends in d, given sorted transfer times.
fn phase_residual(t_in: f64, t_out: f64, transfers: &[f64], r: f64) -> f64 {
    let mut in_s = true;
    let mut last = t_in;
    let mut acc = 0.0;
    for &t in transfers.iter().filter(|&&t| t > t_in && t < t_out) {
        acc += if in_s { t - last } else { -r * (t - last) };
        in_s = !in_s;
        last = t;
    }
    acc + if in_s { t_out - last } else { -r * (t_out - last) }
}

proptest! {
    #[test]
    fn rephased_timing_closes_the_phase(t in 1.2f64..50.0, r in 0.5f64..2.0) {
        let seq = build_rephased(t, r, &PulseSettings::default()).unwrap();
        let tr = seq.transfer_times();
        let ret = seq.retrieval_times()[0];
        prop_assert_eq!(tr.len(), 2);
        prop_assert!(phase_residual(0.0, ret, &tr, r).abs() < 1e-9 * ret);
        prop_assert!(validate(&seq, None).errors.is_empty());
    }

    #[test]
    fn unit_ratio_sequences_are_time_symmetric(t in 1.2f64..50.0) {
        let seq = build_rephased(t, 1.0, &PulseSettings::default()).unwrap();
        let end = 4.0 * t;
        let mut times: Vec<(Channel, f64)> = seq.events.iter().map(|e| (e.channel, e.center_ns)).collect();
        let mut mirrored: Vec<(Channel, f64)> = times.iter().map(|&(c, x)| (c, end - x)).collect();
        times.sort_by(|a, b| a.1.total_cmp(&b.1));
        mirrored.sort_by(|a, b| a.1.total_cmp(&b.1));
        for (a, b) in times.iter().zip(&mirrored) {
            prop_assert_eq!(a.0, b.0);
            prop_assert!((a.1 - b.1).abs() < 1e-9 * end);
        }
    }

    #[test]
    fn every_multimode_bin_is_rephased(gap in 3.5f64..6.0, storage in 25.0f64..40.0) {
        let bins = [0.0, gap];
        let plan = SegmentPlan { storage_ns: storage, group_size: 2, ratio: 1.0 };
        let seq = build_multimode(&bins, &plan, &PulseSettings::default()).unwrap();
        let tr = seq.transfer_times();
        for (b, w) in bins.iter().zip(&seq.windows) {
            prop_assert!(phase_residual(*b, w.center(), &tr, 1.0).abs() < 1e-9 * storage);
        }
    }
}

#[test]
fn rephased_example_at_25_ns() {
    let seq = build_rephased(6.25, 1.0, &PulseSettings::default()).unwrap();
    let times: Vec<f64> = seq.events.iter().map(|e| e.center_ns).collect();
    assert_eq!(times, vec![0.0, 6.25, 18.75, 25.0]);
    let seq = build_rephased(6.25, 1.009, &PulseSettings::default()).unwrap();
    let tr = seq.transfer_times();
    assert!((tr[1] - tr[0] - 12.5 / 1.009).abs() < 1e-12);
}
