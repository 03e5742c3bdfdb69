//! Built-in market data sets and their valuation dates.

use chrono::NaiveDate;

use super::{AtmVolSurface, CurveInterpolation, SmileRatioCube, YieldCurve};

/// Curve, ATM surface and optional ratio cube for one valuation date.
#[derive(Debug, Clone)]
pub struct MarketData {
    pub valuation: NaiveDate,
    pub curve: YieldCurve,
    pub surface: AtmVolSurface,
    pub cube: Option<SmileRatioCube>,
}

const CURVE_I: [(i64, f64); 12] = [(34, 0.998367115), (94, 0.995269154), (188, 0.990025493), (367, 0.977629093), (735, 0.938822503), (1098, 0.893023545), (1463, 0.84517874), (1828, 0.796865431), (2562, 0.703583273), (3655, 0.5784443), (5481, 0.40916987), (10961, 0.152839928)];
const EXPIRIES_I: [f64; 9] = [32.0, 63.0, 92.0, 182.0, 360.0, 730.0, 1095.0, 1463.0, 1827.0];
const TENORS_I: [f64; 9] = [360.0, 720.0, 1080.0, 1440.0, 1800.0, 2520.0, 3600.0, 5400.0, 10800.0];
const VOLS_I: [[f64; 9]; 9] = [
    [0.457, 0.4455, 0.434, 0.379, 0.333, 0.261, 0.239, 0.219, 0.204],
    [0.39, 0.3805, 0.371, 0.338, 0.294, 0.25, 0.23, 0.213, 0.2],
    [0.32, 0.32, 0.32, 0.301, 0.271, 0.237, 0.22, 0.206, 0.193],
    [0.29, 0.29, 0.29, 0.279, 0.255, 0.228, 0.213, 0.2, 0.188],
    [0.271, 0.2705, 0.27, 0.263, 0.244, 0.221, 0.208, 0.195, 0.184],
    [0.25, 0.2475, 0.245, 0.242, 0.228, 0.211, 0.2, 0.188, 0.177],
    [0.23, 0.2265, 0.223, 0.223, 0.213, 0.201, 0.19, 0.178, 0.168],
    [0.19, 0.1905, 0.191, 0.191, 0.185, 0.179, 0.17, 0.161, 0.152],
    [0.19, 0.173, 0.156, 0.155, 0.152, 0.152, 0.143, 0.136, 0.129],
];

const CURVE_II: [(i64, f64); 37] = [(4, 0.999658), (11, 0.999057), (35, 0.996992), (40, 0.996575), (66, 0.994276), (96, 0.991506), (131, 0.988237), (221, 0.97932), (222, 0.979217), (313, 0.969993), (314, 0.969891), (404, 0.960723), (405, 0.960621), (495, 0.951481), (586, 0.942281), (677, 0.933159), (678, 0.933059), (769, 0.923968), (1102, 0.891103), (1466, 0.855901), (1830, 0.821377), (2196, 0.787538), (2561, 0.754289), (2926, 0.721887), (3293, 0.690247), (3657, 0.659733), (4022, 0.62999), (4387, 0.601379), (4752, 0.573949), (5120, 0.547413), (5484, 0.522205), (7311, 0.412457), (9135, 0.327908), (10962, 0.262923), (14614, 0.171647), (18267, 0.113148), (21920, 0.073214)];
const EXPIRIES_II: [f64; 19] = [31.0, 94.0, 185.0, 273.0, 367.0, 731.0, 1096.0, 1461.0, 1826.0, 2194.0, 2558.0, 2922.0, 3287.0, 3653.0, 5479.0, 7035.0, 9131.0, 10958.0, 14612.0];
const TENORS_II: [f64; 15] = [360.0, 720.0, 1080.0, 1440.0, 1800.0, 2160.0, 2520.0, 2880.0, 3240.0, 3600.0, 5400.0, 7200.0, 9000.0, 10800.0, 14400.0];
const VOLS_II: [[f64; 19]; 15] = [
    [0.129, 0.136, 0.145, 0.15, 0.153, 0.158, 0.159, 0.156, 0.153, 0.1485, 0.144, 0.1397, 0.1353, 0.131, 0.12, 0.114, 0.11, 0.108, 0.108],
    [0.137, 0.141, 0.147, 0.151, 0.153, 0.156, 0.156, 0.154, 0.15, 0.1455, 0.141, 0.137, 0.133, 0.129, 0.117, 0.112, 0.108, 0.106, 0.106],
    [0.143, 0.147, 0.15, 0.153, 0.153, 0.154, 0.154, 0.151, 0.147, 0.1425, 0.138, 0.1343, 0.1307, 0.127, 0.117, 0.111, 0.108, 0.105, 0.105],
    [0.146, 0.15, 0.151, 0.152, 0.152, 0.152, 0.151, 0.148, 0.144, 0.1395, 0.135, 0.1317, 0.1283, 0.125, 0.116, 0.11, 0.106, 0.103, 0.103],
    [0.146, 0.151, 0.151, 0.151, 0.15, 0.15, 0.148, 0.145, 0.141, 0.1365, 0.132, 0.129, 0.126, 0.123, 0.114, 0.109, 0.105, 0.102, 0.102],
    [0.142, 0.148, 0.149, 0.149, 0.148, 0.148, 0.145, 0.142, 0.138, 0.134, 0.13, 0.1273, 0.1247, 0.122, 0.113, 0.108, 0.104, 0.102, 0.102],
    [0.139, 0.145, 0.146, 0.146, 0.146, 0.145, 0.143, 0.139, 0.136, 0.1325, 0.129, 0.1263, 0.1237, 0.121, 0.113, 0.108, 0.104, 0.102, 0.102],
    [0.136, 0.142, 0.143, 0.144, 0.144, 0.143, 0.14, 0.137, 0.134, 0.131, 0.128, 0.1253, 0.1227, 0.12, 0.112, 0.108, 0.104, 0.102, 0.102],
    [0.132, 0.139, 0.14, 0.141, 0.141, 0.141, 0.139, 0.136, 0.132, 0.129, 0.126, 0.124, 0.122, 0.12, 0.112, 0.108, 0.104, 0.102, 0.102],
    [0.13, 0.136, 0.137, 0.138, 0.139, 0.139, 0.137, 0.134, 0.131, 0.128, 0.125, 0.123, 0.121, 0.119, 0.112, 0.108, 0.104, 0.102, 0.102],
    [0.122, 0.127, 0.129, 0.13, 0.131, 0.131, 0.129, 0.127, 0.124, 0.1215, 0.119, 0.117, 0.115, 0.113, 0.106, 0.101, 0.099, 0.097, 0.097],
    [0.117, 0.122, 0.124, 0.126, 0.126, 0.126, 0.125, 0.122, 0.12, 0.1175, 0.115, 0.113, 0.111, 0.109, 0.103, 0.098, 0.096, 0.094, 0.094],
    [0.114, 0.118, 0.121, 0.122, 0.123, 0.123, 0.122, 0.12, 0.117, 0.115, 0.113, 0.1107, 0.1083, 0.106, 0.1, 0.096, 0.094, 0.093, 0.093],
    [0.112, 0.116, 0.118, 0.12, 0.121, 0.121, 0.12, 0.118, 0.115, 0.113, 0.111, 0.1087, 0.1063, 0.104, 0.099, 0.094, 0.093, 0.093, 0.093],
    [0.112, 0.116, 0.118, 0.12, 0.121, 0.121, 0.12, 0.118, 0.115, 0.113, 0.111, 0.1087, 0.1063, 0.104, 0.099, 0.094, 0.093, 0.093, 0.093],
];

fn build(valuation: NaiveDate, curve: &[(i64, f64)], e: &[f64], t: &[f64], v: Vec<Vec<f64>>) -> MarketData {
    MarketData {
        valuation,
        curve: YieldCurve::new(Some(valuation), curve, CurveInterpolation::LinearZeroRate).expect("embedded curve"),
        surface: AtmVolSurface::new(e.to_vec(), t.to_vec(), v).expect("embedded surface"),
        cube: None,
    }
}

/// Curve and ATM surface of 2002-07-09.
pub fn data_set_i() -> MarketData {
    build(
        NaiveDate::from_ymd_opt(2002, 7, 9).unwrap(),
        &CURVE_I,
        &EXPIRIES_I,
        &TENORS_I,
        VOLS_I.iter().map(|r| r.to_vec()).collect(),
    )
}

const CUBE_II: &str = include_str!("../../../../data/dataset2/ratio_cube.csv");

/// EUR curve and ATM surface of 2006-08-11 with a SABR-shaped smile ratio cube.
pub fn data_set_ii() -> MarketData {
    let mut d = build(
        NaiveDate::from_ymd_opt(2006, 8, 11).unwrap(),
        &CURVE_II,
        &EXPIRIES_II,
        &TENORS_II,
        VOLS_II.iter().map(|r| r.to_vec()).collect(),
    );
    d.cube = Some(super::read_ratio_cube(CUBE_II.as_bytes()).expect("embedded ratio cube"));
    d
}
