use std::fs::File;
use std::io::Read;
use std::path::Path;

use super::{AtmVolSurface, CurveInterpolation, MarketError, SmileRatioCube, YieldCurve};

fn open(path: &Path) -> Result<File, MarketError> {
    File::open(path).map_err(|source| MarketError::Io { path: path.display().to_string(), source })
}

fn num(field: Option<&str>, line: usize, what: &str) -> Result<f64, MarketError> {
    let s = field.ok_or_else(|| MarketError::Parse { line, msg: format!("missing {what}") })?;
    s.trim().parse::<f64>().map_err(|_| MarketError::Parse { line, msg: format!("bad {what} '{s}'") })
}

fn day(field: Option<&str>, line: usize, what: &str) -> Result<i64, MarketError> {
    let v = num(field, line, what)?;
    if v.fract() != 0.0 {
        return Err(MarketError::Parse { line, msg: format!("{what} {v} is not a whole number of days") });
    }
    Ok(v as i64)
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_reader(r)
}

/// `day,bid,ask` rows (bid and ask averaged) or `day,df`.
pub fn read_curve<R: Read>(r: R, interpolation: CurveInterpolation) -> Result<YieldCurve, MarketError> {
    let mut rdr = reader(r);
    let mut points = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let d = day(rec.get(0), line, "day")?;
        let df = match rec.len() {
            2 => num(rec.get(1), line, "discount factor")?,
            3 => 0.5 * (num(rec.get(1), line, "bid")? + num(rec.get(2), line, "ask")?),
            n => return Err(MarketError::Parse { line, msg: format!("expected 2 or 3 columns, got {n}") }),
        };
        points.push((d, df));
    }
    YieldCurve::new(None, &points, interpolation)
}

/// Header `tenor_day,<expiry days...>`, one row per tenor.
pub fn read_atm_surface<R: Read>(r: R) -> Result<AtmVolSurface, MarketError> {
    let mut rdr = reader(r);
    let headers = rdr.headers()?.clone();
    let expiries = headers
        .iter()
        .skip(1)
        .map(|h| num(Some(h), 1, "expiry day"))
        .collect::<Result<Vec<_>, _>>()?;
    let mut tenors = Vec::new();
    let mut vols = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        tenors.push(num(rec.get(0), line, "tenor day")?);
        let row = (1..=expiries.len()).map(|k| num(rec.get(k), line, "vol")).collect::<Result<Vec<_>, _>>()?;
        vols.push(row);
    }
    AtmVolSurface::new(expiries, tenors, vols)
}

/// `expiry_day,tenor_day,offset_bp,ratio` rows.
pub fn read_ratio_cube<R: Read>(r: R) -> Result<SmileRatioCube, MarketError> {
    let mut rdr = reader(r);
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        rows.push((
            day(rec.get(0), line, "expiry day")?,
            day(rec.get(1), line, "tenor day")?,
            num(rec.get(2), line, "offset")?,
            num(rec.get(3), line, "ratio")?,
        ));
    }
    SmileRatioCube::new(&rows)
}

pub fn load_curve(path: &Path, interpolation: CurveInterpolation) -> Result<YieldCurve, MarketError> {
    read_curve(open(path)?, interpolation)
}

pub fn load_atm_surface(path: &Path) -> Result<AtmVolSurface, MarketError> {
    read_atm_surface(open(path)?)
}

pub fn load_ratio_cube(path: &Path) -> Result<SmileRatioCube, MarketError> {
    read_ratio_cube(open(path)?)
}
