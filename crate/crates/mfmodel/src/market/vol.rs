use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{bracket, check_increasing, MarketError};

/// ATM Black vols on an expiry x tenor grid of day offsets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtmVolSurface {
    expiries: Vec<f64>,
    tenors: Vec<f64>,
    /// `vols[tenor][expiry]`
    vols: Vec<Vec<f64>>,
}

impl AtmVolSurface {
    pub fn new(expiries: Vec<f64>, tenors: Vec<f64>, vols: Vec<Vec<f64>>) -> Result<Self, MarketError> {
        if expiries.is_empty() || tenors.is_empty() {
            return Err(MarketError::Empty("vol surface axis"));
        }
        check_increasing(&expiries, "surface expiries")?;
        check_increasing(&tenors, "surface tenors")?;
        if vols.len() != tenors.len() || vols.iter().any(|r| r.len() != expiries.len()) {
            return Err(MarketError::Parse { line: 0, msg: "vol matrix shape does not match axes".into() });
        }
        if let Some(&v) = vols.iter().flatten().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(MarketError::NonPositive { what: "volatility", value: v });
        }
        Ok(Self { expiries, tenors, vols })
    }

    pub fn expiries(&self) -> &[f64] {
        &self.expiries
    }

    pub fn tenors(&self) -> &[f64] {
        &self.tenors
    }

    pub fn node(&self, tenor_idx: usize, expiry_idx: usize) -> f64 {
        self.vols[tenor_idx][expiry_idx]
    }

    fn check_hull(&self, expiry: f64, tenor: f64) -> Result<(), MarketError> {
        let (e0, e1) = (self.expiries[0], *self.expiries.last().unwrap());
        let (t0, t1) = (self.tenors[0], *self.tenors.last().unwrap());
        if !(expiry >= e0 && expiry <= e1) {
            return Err(MarketError::OutOfRange { what: "expiry day", value: expiry, lo: e0, hi: e1 });
        }
        if !(tenor >= t0 && tenor <= t1) {
            return Err(MarketError::OutOfRange { what: "tenor day", value: tenor, lo: t0, hi: t1 });
        }
        Ok(())
    }

    fn bilinear(&self, expiry: f64, tenor: f64) -> f64 {
        let (i, wi) = bracket(&self.expiries, expiry);
        let (j, wj) = bracket(&self.tenors, tenor);
        let at = |j: usize, i: usize| self.vols[j.min(self.tenors.len() - 1)][i.min(self.expiries.len() - 1)];
        let lo = at(j, i) * (1.0 - wi) + if wi > 0.0 { at(j, i + 1) * wi } else { 0.0 };
        if wj == 0.0 {
            return lo;
        }
        let hi = at(j + 1, i) * (1.0 - wi) + if wi > 0.0 { at(j + 1, i + 1) * wi } else { 0.0 };
        lo * (1.0 - wj) + hi * wj
    }

    /// Bilinear interpolation; errors outside the grid hull.
    pub fn atm_vol(&self, expiry_day: f64, tenor_day: f64) -> Result<f64, MarketError> {
        self.check_hull(expiry_day, tenor_day)?;
        Ok(self.bilinear(expiry_day, tenor_day))
    }

    /// Bilinear interpolation with both axes clamped to the grid (flat extension).
    pub fn atm_vol_clamped(&self, expiry_day: f64, tenor_day: f64) -> f64 {
        let e = expiry_day.clamp(self.expiries[0], *self.expiries.last().unwrap());
        let t = tenor_day.clamp(self.tenors[0], *self.tenors.last().unwrap());
        self.bilinear(e, t)
    }

    /// Multiplies every vol by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let vols = self.vols.iter().map(|r| r.iter().map(|v| v * factor).collect()).collect();
        Self { expiries: self.expiries.clone(), tenors: self.tenors.clone(), vols }
    }

    /// Applies `f(expiry_day, tenor_day, vol)` to every node.
    pub fn map_nodes(&self, mut f: impl FnMut(f64, f64, f64) -> f64) -> Self {
        let vols = self
            .vols
            .iter()
            .enumerate()
            .map(|(j, r)| r.iter().enumerate().map(|(i, &v)| f(self.expiries[i], self.tenors[j], v)).collect())
            .collect();
        Self { expiries: self.expiries.clone(), tenors: self.tenors.clone(), vols }
    }
}

/// Vol ratios against ATM for strike offsets, per (expiry, tenor) node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmileRatioCube {
    expiries: Vec<f64>,
    tenors: Vec<f64>,
    slices: BTreeMap<(i64, i64), Vec<(f64, f64)>>,
}

impl SmileRatioCube {
    /// Rows of `(expiry_day, tenor_day, offset_bp, ratio)`; every expiry/tenor pair must be present.
    pub fn new(rows: &[(i64, i64, f64, f64)]) -> Result<Self, MarketError> {
        if rows.is_empty() {
            return Err(MarketError::Empty("ratio cube"));
        }
        let mut slices: BTreeMap<(i64, i64), Vec<(f64, f64)>> = BTreeMap::new();
        for &(e, t, off, r) in rows {
            if !(r > 0.0) {
                return Err(MarketError::NonPositive { what: "ratio", value: r });
            }
            slices.entry((e, t)).or_default().push((off, r));
        }
        let mut expiries: Vec<i64> = slices.keys().map(|k| k.0).collect();
        let mut tenors: Vec<i64> = slices.keys().map(|k| k.1).collect();
        expiries.sort_unstable();
        expiries.dedup();
        tenors.sort_unstable();
        tenors.dedup();
        for &e in &expiries {
            for &t in &tenors {
                let s = slices
                    .get(&(e, t))
                    .ok_or_else(|| MarketError::RatioCube(format!("missing slice expiry {e} tenor {t}")))?;
                let offs: Vec<f64> = s.iter().map(|p| p.0).collect();
                check_increasing(&offs, "ratio offsets")?;
                match s.iter().find(|p| p.0 == 0.0) {
                    Some(p) if (p.1 - 1.0).abs() <= 1e-12 => {}
                    Some(p) => return Err(MarketError::RatioCube(format!("ATM ratio {} at ({e},{t}) is not 1", p.1))),
                    None => return Err(MarketError::RatioCube(format!("no ATM point at ({e},{t})"))),
                }
            }
        }
        Ok(Self {
            expiries: expiries.iter().map(|&e| e as f64).collect(),
            tenors: tenors.iter().map(|&t| t as f64).collect(),
            slices,
        })
    }

    pub fn expiries(&self) -> &[f64] {
        &self.expiries
    }

    pub fn tenors(&self) -> &[f64] {
        &self.tenors
    }

    /// Quoted offsets common to every slice.
    pub fn offsets(&self) -> Vec<f64> {
        let mut it = self.slices.values();
        let mut common: Vec<f64> = it.next().map(|s| s.iter().map(|p| p.0).collect()).unwrap_or_default();
        for s in it {
            common.retain(|o| s.iter().any(|p| p.0 == *o));
        }
        common
    }

    fn slice_ratio(&self, e: f64, t: f64, offset_bp: f64) -> Result<f64, MarketError> {
        let s = &self.slices[&(e as i64, t as i64)];
        let (lo, hi) = (s[0].0, s[s.len() - 1].0);
        if !(offset_bp >= lo && offset_bp <= hi) {
            return Err(MarketError::OutOfRange { what: "strike offset (bp)", value: offset_bp, lo, hi });
        }
        let offs: Vec<f64> = s.iter().map(|p| p.0).collect();
        let (i, w) = bracket(&offs, offset_bp);
        if w == 0.0 {
            return Ok(s[i].1);
        }
        Ok(s[i].1 * (1.0 - w) + s[i + 1].1 * w)
    }

    /// Ratio at an offset, linear in offset and bilinear (clamped) across expiry and tenor.
    pub fn ratio(&self, expiry_day: f64, tenor_day: f64, offset_bp: f64) -> Result<f64, MarketError> {
        let e = expiry_day.clamp(self.expiries[0], *self.expiries.last().unwrap());
        let t = tenor_day.clamp(self.tenors[0], *self.tenors.last().unwrap());
        let (i, wi) = bracket(&self.expiries, e);
        let (j, wj) = bracket(&self.tenors, t);
        let mut acc = 0.0;
        for (di, we) in [(0, 1.0 - wi), (1, wi)] {
            for (dj, wt) in [(0, 1.0 - wj), (1, wj)] {
                let w = we * wt;
                if w == 0.0 {
                    continue;
                }
                acc += w * self.slice_ratio(self.expiries[i + di], self.tenors[j + dj], offset_bp)?;
            }
        }
        Ok(acc)
    }

    /// `atm_vol * ratio`, with the surface queried strictly inside its hull.
    pub fn smile_vol(
        &self,
        surface: &AtmVolSurface,
        expiry_day: f64,
        tenor_day: f64,
        offset_bp: f64,
    ) -> Result<f64, MarketError> {
        Ok(surface.atm_vol(expiry_day, tenor_day)? * self.ratio(expiry_day, tenor_day, offset_bp)?)
    }

    /// As [`smile_vol`](Self::smile_vol) with the ATM surface clamped at its edges.
    pub fn smile_vol_clamped(
        &self,
        surface: &AtmVolSurface,
        expiry_day: f64,
        tenor_day: f64,
        offset_bp: f64,
    ) -> Result<f64, MarketError> {
        Ok(surface.atm_vol_clamped(expiry_day, tenor_day) * self.ratio(expiry_day, tenor_day, offset_bp)?)
    }
}
