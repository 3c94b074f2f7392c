use fcfb::linksim::{run_link, LinkScenario, Modulation, Processing, SignalSpec, SubbandSpec};
use fcfb::ofdm::OfdmNumerology;
use fcfb::rfmodels::{amplitude_to_dbm, dbm_to_amplitude, PaModel, PolyPa, RappPa};
use fcfb::transforms::C64;
use proptest::prelude::*;

// coefficients of x^0 .. x^9
const AM: [f64; 10] = [
    27.3535, 8.2921e-1, -7.9183e-2, -7.1100e-3, 2.7715e-5, 3.9727e-5, 2.6615e-6, 8.2526e-8, 1.2771e-9, 7.9726e-12,
];
const PM: [f64; 10] = [
    79.1553, -1.6672e-2, -2.7752e-1, -3.6477e-2, -7.5352e-4, 1.9730e-4, 1.8757e-5, 7.2970e-7, 1.3544e-8, 9.8591e-11,
];

fn power_sum(c: &[f64], x: f64) -> f64 {
    c.iter().enumerate().map(|(k, a)| a * x.powi(k as i32)).sum()
}

#[test]
fn polynomial_matches_power_sum() {
    let pa = PolyPa::new();
    for i in 0..100 {
        let x = -30.0 + 39.0 * i as f64 / 99.0;
        assert!((pa.am_am_dbm(x) - power_sum(&AM, x)).abs() < 1e-9, "AM at {x}");
        assert!((pa.am_pm_deg(x) - power_sum(&PM, x)).abs() < 1e-9, "PM at {x}");
    }
}

#[test]
fn rapp_compression_point_closed_form() {
    let pa = RappPa::default();
    // 20 log10 (1 + r^2p)^(1/2p) = 1 dB
    let r = (10f64.powf(pa.p / 10.0) - 1.0).powf(1.0 / (2.0 * pa.p));
    let want = amplitude_to_dbm(r * pa.v_sat / pa.g);
    assert!((pa.p1db_input_dbm() - want).abs() < 1e-6);
    assert!((want - 57.6).abs() < 0.1);
}

#[test]
fn polynomial_compression_point() {
    let pa = PolyPa::new();
    let p1 = pa.p1db_input_dbm();
    let g0 = pa.am_am_dbm(-30.0) + 30.0;
    assert!((g0 - (pa.am_am_dbm(p1) - p1) - 1.0).abs() < 1e-9);
    assert!((p1 - 3.4).abs() < 0.1);
}

#[test]
fn polynomial_peaks_inside_its_range() {
    // the fitted AM curve turns down before the end of its range
    let pa = PolyPa::new();
    let peak = (0..=3900)
        .map(|i| -30.0 + i as f64 * 0.01)
        .max_by(|a, b| pa.am_am_dbm(*a).total_cmp(&pa.am_am_dbm(*b)))
        .unwrap();
    assert!((peak - 3.73).abs() < 0.02, "{peak}");
    assert!(pa.am_am_dbm(9.0) < pa.am_am_dbm(peak));
}

fn fifty(modulation: Modulation, pa: PaModel, ibo: f64) -> LinkScenario {
    let sb = SubbandSpec {
        num: OfdmNumerology::table_row(15, 50).unwrap(),
        center: 0,
        modulation,
        dft_spread: false,
        tx: Processing::Plain,
        rx: Processing::Plain,
    };
    let mut s = LinkScenario::new(1024, SignalSpec { subbands: vec![sb], pa, ibo_db: Some(ibo) });
    s.subframes = 2;
    s.trials = 4;
    s
}

#[test]
fn uplink_output_at_8_db_backoff() {
    let r = run_link(&fifty(Modulation::Qpsk, PaModel::Poly(PolyPa::new()), 8.0)).unwrap();
    let out = r.pa_output_dbm.unwrap();
    assert!((out - 22.5).abs() <= 0.5, "{out}");
}

#[test]
fn deep_backoff_is_linear() {
    for pa in [PaModel::Rapp(RappPa::default()), PaModel::Poly(PolyPa::new())] {
        let r = run_link(&fifty(Modulation::Qam64, pa, 80.0)).unwrap();
        assert!(r.evm_db <= -60.0, "{}", r.evm_db);
    }
}

#[test]
fn compression_raises_evm() {
    let pa = || PaModel::Rapp(RappPa::default());
    let light = run_link(&fifty(Modulation::Qam64, pa(), 12.0)).unwrap().evm_db;
    let heavy = run_link(&fifty(Modulation::Qam64, pa(), 4.0)).unwrap().evm_db;
    assert!(heavy > light + 3.0, "{heavy} vs {light}");
}

proptest! {
    #[test]
    fn rapp_is_monotone(a in 0.0f64..2000.0, b in 0.0f64..2000.0) {
        let pa = RappPa::default();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(pa.am_am(lo) <= pa.am_am(hi));
        prop_assert!(pa.am_am(hi) <= pa.v_sat + 1e-9);
    }

    #[test]
    fn polynomial_is_monotone_below_its_peak(a in -30.0f64..3.7, b in -30.0f64..3.7) {
        let pa = PolyPa::new();
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(pa.am_am_dbm(lo) <= pa.am_am_dbm(hi) + 1e-12);
    }

    #[test]
    fn amplifiers_are_memoryless(
        v in prop::collection::vec((-40.0f64..12.0, -3.1f64..3.1), 2..40),
        seed in any::<u64>(),
    ) {
        let x: Vec<C64> = v.iter().map(|(d, p)| C64::from_polar(dbm_to_amplitude(*d), *p)).collect();
        let mut perm: Vec<usize> = (0..x.len()).collect();
        let n = perm.len();
        let mut s = seed;
        for i in (1..n).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        let xp: Vec<C64> = perm.iter().map(|&i| x[i]).collect();
        for pa in [PaModel::Rapp(RappPa::default()), PaModel::Poly(PolyPa::new())] {
            let y = pa.apply(&x);
            let yp = pa.apply(&xp);
            for (k, &i) in perm.iter().enumerate() {
                prop_assert!((yp[k] - y[i]).norm() <= 1e-12 * (1.0 + y[i].norm()));
            }
        }
    }

    #[test]
    fn amplifiers_keep_phase_below_compression(d in -60.0f64..-35.0, p in -3.1f64..3.1) {
        let x = [C64::from_polar(dbm_to_amplitude(d), p)];
        for pa in [PaModel::Rapp(RappPa::default()), PaModel::Poly(PolyPa::new())] {
            let y = pa.apply(&x)[0];
            let g = pa.small_signal_gain();
            prop_assert!((y - x[0] * g).norm() <= 1e-6 * y.norm());
        }
    }
}
