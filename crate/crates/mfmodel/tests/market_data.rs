use std::io::Write;
use std::path::PathBuf;

use chrono::NaiveDate;
use mfmodel::market::datasets::{data_set_i, data_set_ii};
use mfmodel::market::{
    bootstrap_curve, deposit_discount, load_atm_surface, load_curve, load_ratio_cube, read_curve, AtmVolSurface,
    CurveInterpolation, DayCount, Deposit, MarketError, ParSwap, SmileRatioCube, YieldCurve,
};
use proptest::prelude::*;

fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

fn anchor() -> NaiveDate {
    NaiveDate::from_ymd_opt(2004, 5, 28).unwrap()
}

#[test]
fn data_set_i_curve_nodes_and_blend() {
    let d = data_set_i();
    assert_eq!(d.curve.discount_factor(367).unwrap(), 0.977629093);
    assert_eq!(d.curve.discount_factor(0).unwrap(), 1.0);
    let lin = d.curve.clone().with_interpolation(CurveInterpolation::LinearDiscount);
    let want = (0.977629093 * (735.0 - 551.0) + 0.938822503 * (551.0 - 367.0)) / 368.0;
    assert!((lin.discount_factor(551).unwrap() - want).abs() < 1e-15);
    assert!(matches!(d.curve.discount_factor(10962), Err(MarketError::OutOfRange { .. })));
    assert!(d.curve.discount_factor(-1).is_err());
}

#[test]
fn interpolators_exact_and_continuous_at_nodes() {
    for interp in [CurveInterpolation::LinearZeroRate, CurveInterpolation::LinearDiscount] {
        let c = data_set_i().curve.with_interpolation(interp);
        let nodes: Vec<(i64, f64)> = c.points().collect();
        for &(day, df) in &nodes {
            assert!((c.discount_factor(day).unwrap() - df).abs() < 1e-15);
            let below = c.discount_factor(day - 1).unwrap();
            assert!((below - df).abs() < 2e-4, "jump below node {day}");
            if day < c.last_day() {
                let above = c.discount_factor(day + 1).unwrap();
                assert!((above - df).abs() < 2e-4, "jump above node {day}");
                // half-day probes bracket the node value
                let l = c.discount_factor_at(day as f64 - 1e-6).unwrap();
                let r = c.discount_factor_at(day as f64 + 1e-6).unwrap();
                assert!((l - df).abs() < 1e-9 && (r - df).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn atm_surface_examples() {
    let s = data_set_i().surface;
    assert_eq!(s.atm_vol(360.0, 1800.0).unwrap(), 0.244);
    for (ti, &t) in s.tenors().iter().enumerate() {
        for (ei, &e) in s.expiries().iter().enumerate() {
            assert_eq!(s.atm_vol(e, t).unwrap(), s.node(ti, ei));
        }
    }
    // midpoint of the (360,730) x (1800,2520) cell
    let corners = [s.node(4, 4), s.node(4, 5), s.node(5, 4), s.node(5, 5)];
    let mid = s.atm_vol(545.0, 2160.0).unwrap();
    assert!((mid - corners.iter().sum::<f64>() / 4.0).abs() < 1e-15);
    assert!(s.atm_vol(20.0, 1800.0).is_err());
    assert!(s.atm_vol(360.0, 20000.0).is_err());
}

#[test]
fn smile_vol_from_ratio_cube() {
    let d = data_set_ii();
    let cube = d.cube.as_ref().unwrap();
    let (e, t) = (1826.0, 3600.0);
    let atm = d.surface.atm_vol(e, t).unwrap();
    assert_eq!(cube.smile_vol(&d.surface, e, t, 0.0).unwrap(), atm);
    let r100 = cube.ratio(e, t, 100.0).unwrap();
    assert!((cube.smile_vol(&d.surface, e, t, 100.0).unwrap() - atm * r100).abs() < 1e-15);
    let offs = cube.offsets();
    let i = offs.iter().position(|&o| o == 0.0).unwrap();
    let (lo, hi) = (offs[i], offs[i + 1]);
    let mid = 0.5 * (lo + hi);
    let want = 0.5 * (cube.ratio(e, t, lo).unwrap() + cube.ratio(e, t, hi).unwrap());
    assert!((cube.ratio(e, t, mid).unwrap() - want).abs() < 1e-15);
    let top = *offs.last().unwrap();
    assert!(matches!(cube.ratio(e, t, top + 1.0), Err(MarketError::OutOfRange { .. })));
}

#[test]
fn single_deposit_and_deposit_only_curve() {
    let c = bootstrap_curve(anchor(), &[Deposit { days: 365, rate: 0.02 }], &[], CurveInterpolation::LinearDiscount)
        .unwrap();
    let dt = 365.0 / 360.0;
    assert!((c.discount_factor(365).unwrap() - 1.0 / (1.0 + 0.02 * dt)).abs() < 1e-15);
    assert_eq!(c.points().count(), 1);
    assert_eq!(deposit_discount(0.02, 365), 1.0 / (1.0 + 0.02 * dt));
}

#[test]
fn two_swap_chain_reprices_to_par() {
    let deps = [Deposit { days: 30, rate: 0.02 }, Deposit { days: 182, rate: 0.021 }, Deposit { days: 365, rate: 0.023 }];
    let swaps = [ParSwap { years: 2, rate: 0.028 }, ParSwap { years: 3, rate: 0.031 }];
    for interp in [CurveInterpolation::LinearZeroRate, CurveInterpolation::LinearDiscount] {
        let c = bootstrap_curve(anchor(), &deps, &swaps, interp).unwrap();
        for s in &swaps {
            assert!((s.par_rate(anchor(), &c).unwrap() - s.rate).abs() < 1e-12);
        }
        for d in &deps {
            let df = c.discount_factor(d.days).unwrap();
            assert!((df / deposit_discount(d.rate, d.days) - 1.0).abs() < 1e-10);
        }
    }
}

#[test]
fn bootstrap_rejects_bad_inputs() {
    let a = anchor();
    let deps = [Deposit { days: 182, rate: 0.02 }, Deposit { days: 30, rate: 0.02 }];
    assert!(matches!(bootstrap_curve(a, &deps, &[], CurveInterpolation::LinearZeroRate), Err(MarketError::NotIncreasing(_))));
    let swaps = [ParSwap { years: 3, rate: 0.03 }, ParSwap { years: 2, rate: 0.03 }];
    let ok = [Deposit { days: 365, rate: 0.02 }];
    assert!(bootstrap_curve(a, &ok, &swaps, CurveInterpolation::LinearZeroRate).is_err());
    // a rate so high that the final discount factor would have to be negative
    let wild = [ParSwap { years: 2, rate: 2.0 }];
    assert!(matches!(bootstrap_curve(a, &ok, &wild, CurveInterpolation::LinearZeroRate), Err(MarketError::Bootstrap(_))));
}

#[test]
fn act_360_accrual() {
    for n in [1, 30, 91, 360, 365, 731] {
        assert_eq!(DayCount::Act360.year_fraction_days(n), n as f64 / 360.0);
    }
    let from = anchor();
    let to = NaiveDate::from_ymd_opt(2004, 8, 27).unwrap();
    assert_eq!(DayCount::Act360.year_fraction(from, to), 91.0 / 360.0);
}

#[test]
fn csv_loaders_match_embedded_data() {
    let dir = data_dir();
    let c = load_curve(&dir.join("dataset1/curve.csv"), CurveInterpolation::LinearZeroRate).unwrap();
    let embedded = data_set_i().curve;
    assert!(c.points().zip(embedded.points()).all(|(a, b)| a == b));
    let s = load_atm_surface(&dir.join("dataset1/atm_surface.csv")).unwrap();
    assert_eq!(s.atm_vol(360.0, 1800.0).unwrap(), 0.244);
    let cube = load_ratio_cube(&dir.join("dataset2/ratio_cube.csv")).unwrap();
    assert_eq!(&cube, data_set_ii().cube.as_ref().unwrap());
    let s2 = load_atm_surface(&dir.join("dataset2/atm_surface.csv")).unwrap();
    assert_eq!(s2.atm_vol(14612.0, 14400.0).unwrap(), 0.093);
}

#[test]
fn bid_ask_is_averaged() {
    let text = "day,bid,ask\n100,0.99,0.995\n200,0.98,0.982\n";
    let c = read_curve(text.as_bytes(), CurveInterpolation::LinearDiscount).unwrap();
    assert!((c.discount_factor(100).unwrap() - 0.9925).abs() < 1e-15);
    assert!((c.discount_factor(200).unwrap() - 0.981).abs() < 1e-15);
}

#[test]
fn malformed_files_are_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("bad_number.csv", "day,bid,ask\n100,abc,0.99\n"),
        ("fractional_day.csv", "day,df\n100.5,0.99\n"),
        ("decreasing.csv", "day,df\n200,0.98\n100,0.99\n"),
        ("negative_df.csv", "day,df\n100,-0.5\n"),
    ];
    for (name, body) in cases {
        let p = dir.path().join(name);
        std::fs::File::create(&p).unwrap().write_all(body.as_bytes()).unwrap();
        let err = load_curve(&p, CurveInterpolation::LinearZeroRate).unwrap_err();
        assert!(mfmodel::Error::from(err).is_data_error(), "{name}");
    }
    let missing = load_curve(&dir.path().join("nope.csv"), CurveInterpolation::LinearZeroRate);
    assert!(matches!(missing, Err(MarketError::Io { .. })));
    let p = dir.path().join("cube.csv");
    std::fs::write(&p, "expiry_day,tenor_day,offset_bp,ratio\n30,360,-50,1.1\n30,360,0,1.05\n").unwrap();
    assert!(matches!(load_ratio_cube(&p), Err(MarketError::RatioCube(_))));
    let p = dir.path().join("surface.csv");
    std::fs::write(&p, "tenor_day,30,60\n360,0.2\n").unwrap();
    assert!(load_atm_surface(&p).is_err());
}

#[test]
fn surface_rejects_ragged_rows() {
    assert!(AtmVolSurface::new(vec![30.0, 60.0], vec![360.0], vec![vec![0.2]]).is_err());
    assert!(SmileRatioCube::new(&[]).is_err());
}

proptest! {
    #[test]
    fn discount_interpolation_stays_between_nodes(day in 1i64..10961) {
        let c = data_set_i().curve.with_interpolation(CurveInterpolation::LinearDiscount);
        let nodes: Vec<(i64, f64)> = std::iter::once((0, 1.0)).chain(c.points()).collect();
        let i = nodes.iter().rposition(|p| p.0 <= day).unwrap();
        let df = c.discount_factor(day).unwrap();
        let hi = nodes[i].1;
        let lo = nodes.get(i + 1).map_or(hi, |p| p.1);
        prop_assert!(df <= hi + 1e-15 && df >= lo - 1e-15);
    }

    #[test]
    fn zero_rate_curve_is_decreasing(day in 1i64..10960) {
        let c = data_set_i().curve;
        prop_assert!(c.discount_factor(day + 1).unwrap() < c.discount_factor(day).unwrap());
    }

    #[test]
    fn bootstrap_round_trips(r1 in 0.005f64..0.08, r2 in 0.005f64..0.08, s2 in 0.005f64..0.08, s5 in 0.005f64..0.08) {
        let deps = [Deposit { days: 91, rate: r1 }, Deposit { days: 365, rate: r2 }];
        let swaps = [ParSwap { years: 2, rate: s2 }, ParSwap { years: 5, rate: s5 }];
        let c: YieldCurve = bootstrap_curve(anchor(), &deps, &swaps, CurveInterpolation::LinearZeroRate).unwrap();
        for s in &swaps {
            prop_assert!((s.par_rate(anchor(), &c).unwrap() / s.rate - 1.0).abs() < 1e-10);
        }
    }
}
