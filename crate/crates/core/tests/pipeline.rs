use berd_core::harness::{self, gamma_trace_trial, Benchmark, MetricRow, Scenario, TruthPolicy};
use berd_core::mcs::Theta;
use berd_core::modem::Modulation;

fn qpsk_half(snr_db: Vec<f64>, trials: usize) -> Scenario {
    Scenario {
        modulations: vec![Modulation::Qpsk],
        codes: vec!["ldpc_648_r12".into()],
        truth: TruthPolicy::Fixed(Theta::new(Modulation::Qpsk, "ldpc_648_r12")),
        snr_db,
        trials,
        benchmarks: Vec::new(),
        ..Scenario::default()
    }
}

fn true_theta_bench(scenario: &Scenario) -> Vec<MetricRow> {
    let s = Scenario {
        benchmarks: vec![Benchmark::PerfectCsiTrueTheta],
        ..scenario.clone()
    };
    harness::run_benchmarks(&s).unwrap().pop().unwrap().1
}

#[test]
fn noiseless_limit_saturates() {
    let s = Scenario {
        modulations: vec![Modulation::Qpsk, Modulation::Qam16],
        ..qpsk_half(vec![60.0], 4)
    };
    let rows = harness::run_scenario(&s).unwrap();
    assert_eq!(rows[0].ber, 0.0);
    assert_eq!(rows[0].pcc_mcs, 1.0);
}

#[test]
fn perfect_csi_with_true_mcs_is_error_free_at_high_snr() {
    let rows = true_theta_bench(&qpsk_half(vec![20.0], 8));
    assert_eq!(rows[0].ber, 0.0);
    assert_eq!(rows[0].pcc_mcs, 1.0);
    assert_eq!(rows[0].mse_channel, 0.0);
}

#[test]
fn zf_and_lmmse_recover_the_channel_at_high_snr() {
    let s = Scenario {
        benchmarks: vec![Benchmark::Zf, Benchmark::Lmmse],
        ..qpsk_half(vec![40.0], 4)
    };
    for (_, rows) in harness::run_benchmarks(&s).unwrap() {
        assert!(rows[0].mse_channel < 1e-5, "{}", rows[0].mse_channel);
    }
}

fn std_dev(xs: &[f64]) -> f64 {
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

#[test]
fn ber_standard_error_scales_as_inverse_root_trials() {
    let repeats = 40;
    let spread = |trials| {
        let bers: Vec<f64> = (0..repeats)
            .map(|seed| {
                let s = Scenario {
                    seed: 1000 + seed,
                    ..qpsk_half(vec![1.0], trials)
                };
                true_theta_bench(&s)[0].ber
            })
            .collect();
        std_dev(&bers)
    };
    let ratio = spread(4) / spread(16);
    assert!(
        (1.4..=2.8).contains(&ratio),
        "quadrupling trials shrank the spread by {ratio}"
    );
}

#[test]
fn ber_falls_with_snr() {
    let rows = true_theta_bench(&qpsk_half(vec![-2.0, 0.0, 2.0, 4.0, 6.0], 200));
    for w in rows.windows(2) {
        let se = (w[0].ber * (1.0 - w[0].ber) / w[0].trials as f64).sqrt();
        assert!(
            w[1].ber <= w[0].ber + 3.0 * se,
            "{} dB {} -> {} dB {}",
            w[0].snr_db,
            w[0].ber,
            w[1].snr_db,
            w[1].ber
        );
    }
    assert!(rows[0].ber > rows[4].ber);
}

#[test]
fn true_gamma_trace_stays_positive_at_high_snr() {
    let s = Scenario {
        modulations: vec![Modulation::Qpsk, Modulation::Qam16],
        codes: vec!["ldpc_648_r12".into(), "ldpc_648_r23".into()],
        ..qpsk_half(vec![20.0], 3)
    };
    for t in 0..3 {
        let (truth, out) = gamma_trace_trial(&s, 0, t).unwrap();
        let rec = out.records.iter().find(|r| r.theta == truth).unwrap();
        assert!(rec.gamma_prefix.iter().all(|&g| g > 0.0), "trial {t}");
        assert_eq!(out.decision.theta_hat, truth);
    }
}
