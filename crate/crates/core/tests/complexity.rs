use fcfb::complexity::{
    comparison_table, fc_muls, plain_ofdm_muls, reference_groups, split_radix_muls, td_filter_muls, FcLoad,
    SubbandGroup,
};
use proptest::prelude::*;

// split-radix real multiplications by recursion: one n/2 and two n/4
// transforms plus the twiddle products of the L-shaped butterfly
fn recursive_count(n: usize) -> f64 {
    if n <= 4 {
        return 0.0;
    }
    // n/4 - 2 general twiddles per branch at 3 real multiplications,
    // the eighth-root twiddle at 2 per branch
    let twiddles = 2.0 * (3.0 * (n / 4 - 2) as f64 + 2.0);
    recursive_count(n / 2) + 2.0 * recursive_count(n / 4) + twiddles
}

#[test]
fn closed_form_matches_recursion() {
    for k in 3..=14 {
        let n = 1usize << k;
        assert_eq!(split_radix_muls(n), recursive_count(n), "n = {n}");
    }
}

#[test]
fn reference_time_domain_entries() {
    // (L, L_CP, taps, QAM symbols per OFDM symbol, reference)
    for (l, cp, taps, symb, reference) in [(128, 9, 73, 48, 128.0), (128, 9, 512, 48, 285.0), (128, 9, 512, 12, 1139.0)] {
        let v = td_filter_muls(l, cp, 1024, taps, symb, true).unwrap().muls_per_qam_symbol;
        assert_eq!(v.round(), reference);
    }
}

#[test]
fn reference_ratios_within_fifteen_percent() {
    let reference = [2.41, 1.64, 2.41, 1.64, 5.36, 3.92, 4.94, 3.59];
    let rows = comparison_table(&reference_groups(), &[0.5, 0.25]).unwrap();
    for (r, p) in rows.iter().zip(reference) {
        assert!((r.fc_ratio / p - 1.0).abs() <= 0.15, "{}: {} vs {p}", r.config, r.fc_ratio);
    }
}

#[test]
fn plain_reference_is_one_transform_per_symbol() {
    assert_eq!(plain_ofdm_muls(1024, 600), 7172.0 / 600.0);
}

#[test]
fn more_subbands_share_the_long_transform() {
    let one = &comparison_table(&[SubbandGroup { count: 1, prbs: 4 }], &[0.5]).unwrap()[0];
    let many = &comparison_table(&[SubbandGroup { count: 12, prbs: 4 }], &[0.5]).unwrap()[0];
    assert!(many.fc_muls < one.fc_muls);
    // time-domain filtering has no shared stage
    assert_eq!(many.cp_uf_muls, one.cp_uf_muls);
    assert_eq!(many.f_ofdm_muls, one.f_ofdm_muls);
}

proptest! {
    #[test]
    fn smaller_hop_costs_more(ns_a in 64usize..1024, ns_b in 64usize..1024, tbw in 0usize..8) {
        let loads = [FcLoad { l_ofdm: 128, l: 128, mask_active: 48, tbw }];
        let cost = |ns| fc_muls(1024, ns, 1096.0, &loads, 48).unwrap().muls_per_qam_symbol;
        let (lo, hi) = if ns_a < ns_b { (ns_a, ns_b) } else { (ns_b, ns_a) };
        prop_assert!(cost(lo) >= cost(hi));
    }

    #[test]
    fn breakdown_is_additive(k in 0usize..4, lambda in 0.0f64..0.9, subbands in 1usize..20) {
        let l = 128 << k;
        let loads = vec![FcLoad { l_ofdm: l, l, mask_active: 12, tbw: 2 }; subbands];
        let ns = ((1.0 - lambda) * 1024.0).round() as usize;
        let r = fc_muls(1024, ns, 1096.0, &loads, 12 * subbands).unwrap();
        let sum: f64 = r.breakdown.iter().map(|b| b.1).sum();
        prop_assert!((sum - r.muls_per_qam_symbol).abs() <= 1e-9 * sum);
        prop_assert!((r.ratio_vs_plain_ofdm - r.muls_per_qam_symbol / plain_ofdm_muls(1024, 12 * subbands)).abs() < 1e-12);
    }
}
