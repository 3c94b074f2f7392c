use fcfb::fcfb::{AnalysisBank, FcConfig, Subband, SynthesisBank, WeightMask};
use fcfb::transforms::C64;
use proptest::prelude::*;

fn cvec(len: usize) -> impl Strategy<Value = Vec<C64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0).prop_map(|(a, b)| C64::new(a, b)), len)
}

fn mask(l: usize, active: usize, d: &[f64]) -> WeightMask {
    WeightMask::new(l, active, d.to_vec()).unwrap()
}

fn close(a: &[C64], b: &[C64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).norm() < 1e-11)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn synthesis_is_linear(x in cvec(96), y in cvec(96), a in -2.0f64..2.0, c in 0usize..256, d in prop::collection::vec(0.0f64..1.0, 2)) {
        let sub = Subband::new(FcConfig::synthesis(256, 32, 16, c).unwrap(), &mask(32, 12, &d)).unwrap();
        let bank = SynthesisBank::new(&[sub]).unwrap();
        let z: Vec<C64> = x.iter().zip(&y).map(|(p, q)| p * a + q).collect();
        let (fx, fy, fz) = (bank.process(&[&x]).unwrap(), bank.process(&[&y]).unwrap(), bank.process(&[&z]).unwrap());
        let sum: Vec<C64> = fx.iter().zip(&fy).map(|(p, q)| p * a + q).collect();
        prop_assert!(close(&fz, &sum));
    }

    #[test]
    fn delay_by_one_hop_delays_output(x in cvec(80), c in 0usize..256, ls in prop::sample::select(vec![16usize, 24])) {
        let sub = Subband::new(FcConfig::synthesis(256, 32, ls, c).unwrap(), &mask(32, 10, &[0.3, 0.7])).unwrap();
        let ns = sub.cfg.ns;
        let bank = SynthesisBank::new(&[sub]).unwrap();
        let base = bank.process_range(&[(&x, 0)], -2, 10).unwrap();
        let moved = bank.process_range(&[(&x, ls as i64)], -1, 10).unwrap();
        // a translator to bin c: the later copy carries c N_S / N extra turns
        let rot = C64::from_polar(1.0, 2.0 * std::f64::consts::PI * (c * ns) as f64 / 256.0);
        let expect: Vec<C64> = base.iter().map(|v| v * rot).collect();
        prop_assert!(close(&expect, &moved));
        prop_assert!(base.len() == 10 * ns);
    }

    #[test]
    fn banks_superpose_subbands(x in cvec(64), y in cvec(64), c1 in 0usize..128, c2 in 128usize..256) {
        let m = mask(32, 8, &[0.5]);
        let a = Subband::new(FcConfig::synthesis(256, 32, 16, c1).unwrap(), &m).unwrap();
        let b = Subband::new(FcConfig::synthesis(256, 32, 16, c2).unwrap(), &m).unwrap();
        let both = SynthesisBank::new(&[a.clone(), b.clone()]).unwrap().process(&[&x, &y]).unwrap();
        let fa = SynthesisBank::new(&[a]).unwrap().process(&[&x]).unwrap();
        let fb = SynthesisBank::new(&[b]).unwrap().process(&[&y]).unwrap();
        let sum: Vec<C64> = fa.iter().zip(&fb).map(|(p, q)| p + q).collect();
        prop_assert!(close(&both, &sum));

        let ra = AnalysisBank::new(&[Subband::new(FcConfig::analysis(256, 32, 16, c1).unwrap(), &m).unwrap()]).unwrap();
        let rb = AnalysisBank::new(&[Subband::new(FcConfig::analysis(256, 32, 16, c2).unwrap(), &m).unwrap()]).unwrap();
        let rab = AnalysisBank::new(&[
            Subband::new(FcConfig::analysis(256, 32, 16, c1).unwrap(), &m).unwrap(),
            Subband::new(FcConfig::analysis(256, 32, 16, c2).unwrap(), &m).unwrap(),
        ]).unwrap();
        let joint = rab.process(&both).unwrap();
        prop_assert!(close(&joint[0], &ra.process(&both).unwrap()[0]));
        prop_assert!(close(&joint[1], &rb.process(&both).unwrap()[0]));
    }
}

#[test]
fn unit_mask_cascade_passes_bin_tones() {
    // with a full-band rectangle on both sides a tone on a short bin
    // passes unchanged
    let n = 128;
    let m = WeightMask::rectangular(32, 32).unwrap();
    let syn = SynthesisBank::new(&[Subband::new(FcConfig::synthesis(n, 32, 16, 7).unwrap(), &m).unwrap()]).unwrap();
    let ana = AnalysisBank::new(&[Subband::new(FcConfig::analysis(n, 32, 16, 7).unwrap(), &m).unwrap()]).unwrap();
    let x: Vec<C64> = (0..160).map(|t| C64::from_polar(1.0, 2.0 * std::f64::consts::PI * 5.0 * t as f64 / 32.0)).collect();
    let y = syn.process(&[&x]).unwrap();
    let back = &ana.process(&y).unwrap()[0];
    // away from the start-up transient
    for t in 48..112 {
        assert!((back[t] - x[t]).norm() < 1e-9, "{t}");
    }
}
