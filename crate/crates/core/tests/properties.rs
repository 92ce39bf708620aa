use ndarray::Array2;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use etpa_core::absorption::{
    absorbed_jsi, apply_notch, notch_transmission, realized_efficiency, NotchFilterSpec, NotchMode,
};
use etpa_core::biphoton::{
    antidiagonal_width, exchange_asymmetry, jsi, marginals, tilt_angle, BiphotonState, SpectralGrid,
};
use etpa_core::budget::{
    absorbed_rate, corrected_pair_rate, detection_limits, is_detectable, noise_floor,
    photon_budget, DetectorModel, SampleSpec, SourceBudget,
};
use etpa_core::dispersion::{DispersionTable, Process};
use etpa_core::hom::{baseline, coincidence_rate, visibility};
use etpa_core::scenarios::StateSetup;

const C: f64 = 2.997_924_58e8;

fn omega(nm: f64) -> f64 {
    2.0 * std::f64::consts::PI * C / (nm * 1e-9)
}

fn random_state(seed: u64, n: usize, symmetric: bool) -> BiphotonState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = Array2::from_shape_fn((n, n), |_| {
        Complex64::new(rng.gen_range(0.0..1.0), rng.gen_range(-0.3..0.3))
    });
    if symmetric {
        a = &a + &a.t();
    }
    let grid = SpectralGrid::new(n, omega(810.0), 0.05 * omega(810.0)).unwrap();
    BiphotonState::from_amplitude(grid, a, 1e6).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

fn notch(lambda: f64, sigma: f64, eta: f64, amplitude: bool) -> NotchFilterSpec {
    let mode = if amplitude {
        NotchMode::Amplitude
    } else {
        NotchMode::Intensity
    };
    NotchFilterSpec::new(lambda, sigma, eta, mode).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn detectability_verdicts_agree(
        sigma_e in 1e-27f64..1e-21,
        conc_mm in 1e-3f64..100.0,
        path_cm in 0.01f64..10.0,
        r_in in 1e3f64..1e10,
        fano in 0.01f64..1.0,
    ) {
        let s = SampleSpec::new("s", conc_mm * 1e-3, path_cm, sigma_e).unwrap();
        let b = is_detectable(&s, r_in, fano).unwrap();
        let margin = rel(b.r_abs, b.noise_floor);
        prop_assume!(margin > 1e-9);
        prop_assert_eq!(b.detectable, b.r_abs > b.noise_floor);
        prop_assert_eq!(b.detectable, b.eta_e > b.eta_min);
        let lim = detection_limits(r_in, fano, &s).unwrap();
        prop_assert_eq!(b.detectable, sigma_e > lim.sigma_e_min);
    }

    #[test]
    fn absorbed_rate_is_linear_in_each_input(
        sigma_e in 1e-26f64..1e-22,
        conc_mm in 0.1f64..100.0,
        path_cm in 0.1f64..5.0,
        r_in in 1e5f64..1e9,
    ) {
        let r = |s: f64, c: f64, l: f64, r: f64| {
            is_detectable(&SampleSpec::new("s", c * 1e-3, l, s).unwrap(), r, 0.5).unwrap().r_abs
        };
        let base = r(sigma_e, conc_mm, path_cm, r_in);
        for doubled in [
            r(2.0 * sigma_e, conc_mm, path_cm, r_in),
            r(sigma_e, 2.0 * conc_mm, path_cm, r_in),
            r(sigma_e, conc_mm, 2.0 * path_cm, r_in),
            r(sigma_e, conc_mm, path_cm, 2.0 * r_in),
        ] {
            prop_assert!(rel(doubled, 2.0 * base) < 1e-12);
        }
        let split = absorbed_rate(1e-3, r_in);
        prop_assert!(rel(split.r_abs + split.r_out, r_in) < 1e-12);
        prop_assert!(rel(noise_floor(4.0 * r_in, 0.5), 2.0 * noise_floor(r_in, 0.5)) < 1e-12);
    }

    #[test]
    fn photon_budget_inverts_to_average_power(
        power_mw in 0.1f64..1000.0,
        rep_mhz in 1.0f64..1000.0,
        pulse_fs in 10.0f64..1000.0,
        wavelength in 350.0f64..1100.0,
        eff in 1e-12f64..1e-6,
    ) {
        let src = SourceBudget {
            avg_power_w: power_mw * 1e-3,
            rep_rate_hz: rep_mhz * 1e6,
            pulse_duration_s: pulse_fs * 1e-15,
            pump_wavelength_nm: wavelength,
            spdc_efficiency: eff,
            ..Default::default()
        };
        let b = photon_budget(&src);
        let power = b.r2_peak / eff * b.e_photon * src.pulse_duration_s * src.rep_rate_hz;
        prop_assert!(rel(power, src.avg_power_w) < 1e-9);
        prop_assert!(rel(b.r_in, b.pairs_per_pulse * src.rep_rate_hz) < 1e-12);
    }

    #[test]
    fn klyshko_inverts_the_forward_model(
        r_in in 1e4f64..1e9,
        beta1 in 0.01f64..0.9,
        beta2 in 0.01f64..0.9,
        dark1 in 0.0f64..1e3,
        dark2 in 0.0f64..1e3,
        acc in 0.0f64..10.0,
    ) {
        let det = DetectorModel { beta1, beta2, dark1, dark2, accidental: acc, fano: 0.5 };
        let c = corrected_pair_rate(
            beta1 * r_in + dark1,
            beta2 * r_in + dark2,
            beta1 * beta2 * r_in + acc,
            &det,
        ).unwrap();
        prop_assert!(rel(c.r_in, r_in) < 1e-9);
        prop_assert!(rel(c.beta1, beta1) < 1e-9);
        prop_assert!(rel(c.beta2, beta2) < 1e-9);
    }

    #[test]
    fn notch_never_adds_pairs_and_conserves_totals(
        seed in any::<u64>(),
        lambda in 790.0f64..830.0,
        sigma in 0.5f64..40.0,
        eta in 0.0f64..=1.0,
        amplitude in any::<bool>(),
    ) {
        let st = random_state(seed, 24, false);
        let out = apply_notch(&st, &notch(lambda, sigma, eta, amplitude));
        let (ji, jo) = (jsi(&st), jsi(&out));
        prop_assert!(ji.iter().zip(jo.iter()).all(|(i, o)| *o <= *i * (1.0 + 1e-12)));
        let absorbed: f64 = absorbed_jsi(&st, &out).unwrap().sum();
        prop_assert!(rel(absorbed + out.total_rate(), st.total_rate()) < 1e-9);
        prop_assert!(rel(jo.sum(), out.total_rate()) < 1e-6);
    }

    #[test]
    fn realized_efficiency_is_monotone_in_eta(
        seed in any::<u64>(),
        lambda in 800.0f64..820.0,
        sigma in 0.5f64..30.0,
        amplitude in any::<bool>(),
    ) {
        let st = random_state(seed, 20, false);
        let effs: Vec<f64> = (0..=10)
            .map(|k| realized_efficiency(&st, &apply_notch(&st, &notch(lambda, sigma, k as f64 / 10.0, amplitude))).unwrap())
            .collect();
        prop_assert!(effs.windows(2).all(|w| w[1] >= w[0] - 1e-15));
        prop_assert!(effs[0].abs() < 1e-15);
    }

    #[test]
    fn notch_depends_only_on_sum_frequency(
        lambda in 790.0f64..830.0,
        sigma in 0.5f64..40.0,
        eta in 0.0f64..=1.0,
        ws in -0.02f64..0.02,
        wi in -0.02f64..0.02,
        shift in -0.02f64..0.02,
    ) {
        let spec = notch(lambda, sigma, eta, false);
        let w0 = omega(810.0);
        let (a, b, d) = (w0 * (1.0 + ws), w0 * (1.0 + wi), w0 * shift);
        let t = notch_transmission(a, b, &spec);
        prop_assert!((notch_transmission(a + d, b - d, &spec) - t).abs() < 1e-12);
        prop_assert!((notch_transmission(b, a, &spec) - t).abs() < 1e-15);
    }

    #[test]
    fn notch_keeps_symmetric_states_symmetric(
        seed in any::<u64>(),
        lambda in 790.0f64..830.0,
        sigma in 0.5f64..40.0,
        eta in 0.0f64..=1.0,
    ) {
        let st = random_state(seed, 24, true);
        let before = exchange_asymmetry(&st).unwrap();
        let after = exchange_asymmetry(&apply_notch(&st, &notch(lambda, sigma, eta, false))).unwrap();
        prop_assert!((after - before).abs() < 1e-9);
    }

    #[test]
    fn states_are_normalized_and_marginals_consistent(
        sigma_p in 0.2f64..8.0,
        type_ii in any::<bool>(),
    ) {
        let process = if type_ii { Process::TypeII } else { Process::Type0 };
        let st = StateSetup::new(process, sigma_p).with_points(48).build(&DispersionTable::ktp()).unwrap();
        let total = jsi(&st).sum();
        prop_assert!(rel(total, st.pair_rate) < 1e-6);
        let (s, i) = marginals(&st);
        prop_assert!(rel(s.iter().sum(), total) < 1e-9);
        prop_assert!(rel(i.iter().sum(), total) < 1e-9);
        let filtered = apply_notch(&st, &notch(810.0, 2.0, 0.5, false));
        prop_assert!(rel(jsi(&filtered).sum(), filtered.total_rate()) < 1e-6);
    }

    #[test]
    fn dip_is_nonnegative_and_below_baseline(seed in any::<u64>(), tau_fs in -3000.0f64..3000.0) {
        let st = random_state(seed, 20, false);
        let b = baseline(&st);
        prop_assert!(coincidence_rate(&st, tau_fs * 1e-15) >= -1e-9 * b);
        let a = exchange_asymmetry(&st).unwrap();
        prop_assert!((visibility(&st).unwrap() - (1.0 - a) / (1.0 + a)).abs() < 1e-6);
        let real = BiphotonState::from_amplitude(st.grid, st.amplitude.mapv(|z| Complex64::new(z.re.abs(), 0.0)), 1.0).unwrap();
        prop_assert!(coincidence_rate(&real, 0.0) <= baseline(&real) * (1.0 + 1e-12));
    }
}

#[test]
fn klyshko_recovers_poisson_sampled_rates() {
    let (r_in, beta1, beta2, t) = (7.99e5, 0.21, 0.18, 1.0);
    let det = DetectorModel {
        beta1,
        beta2,
        ..Default::default()
    };
    let (m12, m1, m2) = (beta1 * beta2 * r_in * t, beta1 * r_in * t, beta2 * r_in * t);
    let rel_var = 1.0 / m12 - 1.0 / m1 - 1.0 / m2 + 2.0 * m12 / (m1 * m2);
    let sigma = r_in * rel_var.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let trials = 400;
    let mut inside = 0;
    for _ in 0..trials {
        let n12 = Poisson::new(m12).unwrap().sample(&mut rng);
        let n1 = n12 + Poisson::new(m1 - m12).unwrap().sample(&mut rng);
        let n2 = n12 + Poisson::new(m2 - m12).unwrap().sample(&mut rng);
        let c = corrected_pair_rate(n1 / t, n2 / t, n12 / t, &det).unwrap();
        if (c.r_in - r_in).abs() < 3.0 * sigma {
            inside += 1;
        }
    }
    assert!(inside as f64 >= 0.98 * trials as f64, "{inside}/{trials}");
}

fn close(x: f64, y: f64) -> bool {
    (x - y).abs() <= 0.005 * x.abs().max(y.abs()) + 1e-9
}

#[test]
fn grid_refinement_is_stable() {
    let table = DispersionTable::ktp();
    let at =
        |p: Process, s: f64, n: usize| StateSetup::new(p, s).with_points(n).build(&table).unwrap();
    for (process, sigma_p) in [
        (Process::Type0, 5.0),
        (Process::Type0, 0.1),
        (Process::TypeII, 5.0),
        (Process::TypeII, 1.0),
    ] {
        let (a, b) = (at(process, sigma_p, 512), at(process, sigma_p, 1024));
        let (va, vb) = (visibility(&a).unwrap(), visibility(&b).unwrap());
        assert!(close(va, vb), "{process:?} {sigma_p}: V {va} vs {vb}");
        let (ta, tb) = (tilt_angle(&a).unwrap(), tilt_angle(&b).unwrap());
        assert!(
            (ta - tb).abs() <= 0.005 * ta.abs().max(tb.abs()) + 1e-6,
            "{process:?} {sigma_p}: tilt {ta} vs {tb}"
        );
        let (wa, wb) = (antidiagonal_width(&a), antidiagonal_width(&b));
        match process {
            Process::TypeII => assert!(close(wa, wb), "{process:?} {sigma_p}: width {wa} vs {wb}"),
            Process::Type0 => {
                let wc = antidiagonal_width(&at(process, sigma_p, 2048));
                assert!(close(wb, wc), "{process:?} {sigma_p}: width {wb} vs {wc}");
            }
        }
    }
}
