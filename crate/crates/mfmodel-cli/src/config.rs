//! Run settings: a JSON config file overlaid by command-line flags.

use std::path::{Path, PathBuf};

use clap::Args;
use mfmodel::market::datasets::{data_set_i, data_set_ii, MarketData};
use mfmodel::market::{load_atm_surface, load_curve, load_ratio_cube, CurveInterpolation, TradeSpec};
use mfmodel::GridSpec;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Every setting is optional here; defaults are filled in per command.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct Settings {
    /// Discount curve CSV (`day,df` or `day,bid,ask`).
    #[arg(long, global = true)]
    pub curve: Option<PathBuf>,
    /// ATM vol surface CSV, tenors down and expiries across.
    #[arg(long, global = true)]
    pub atm_surface: Option<PathBuf>,
    /// Smile ratio cube CSV.
    #[arg(long, global = true)]
    pub ratio_cube: Option<PathBuf>,
    /// `i`, `ii`, `hedge` or a JSON trade file.
    #[arg(long, global = true)]
    pub trade: Option<String>,
    /// Mapping cases 1-8, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    pub case: Option<Vec<u8>>,
    /// Mean reversion levels, comma separated.
    #[arg(long, global = true, value_delimiter = ',', allow_negative_numbers = true)]
    pub mr: Option<Vec<f64>>,
    /// Grid steps per standard deviation.
    #[arg(long, global = true)]
    pub steps: Option<usize>,
    /// Grid half-width in standard deviations.
    #[arg(long, global = true)]
    pub devs: Option<usize>,
    /// Maximum polynomial order of the quadrature.
    #[arg(long, global = true)]
    pub order: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Strikes as decimals, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    pub strikes: Option<Vec<f64>>,
    /// Bermudan exercise dates: `5-10` or `5,7,9`.
    #[arg(long, global = true)]
    pub exercise: Option<String>,
    /// Expiry reset of the European or smile.
    #[arg(long, global = true)]
    pub expiry: Option<usize>,
    /// Conditioning reset for future smiles.
    #[arg(long, global = true)]
    pub from: Option<usize>,
    /// `parallel` (zero-rate shift) or `discount` (the expiry's discount factor only).
    #[arg(long, global = true)]
    pub bump: Option<String>,
    /// Bump size in bp.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub bump_bp: Option<f64>,
    /// `unhedged`, `delta`, `delta-vega`, `delta-vega-monthly`, `delta-vega-mtmodel` or `all`.
    #[arg(long, global = true)]
    pub strategy: Option<String>,
    /// Business days in the hedge scenario.
    #[arg(long, global = true)]
    pub days: Option<usize>,
}

macro_rules! overlay {
    ($a:ident, $b:ident, $($f:ident),*) => {
        Settings { $($f: $a.$f.or($b.$f)),* }
    };
}

impl Settings {
    /// Flags win over the file.
    pub fn overlay(self, file: Settings) -> Settings {
        overlay!(
            self, file, curve, atm_surface, ratio_cube, trade, case, mr, steps, devs, order, seed, out, strikes,
            exercise, expiry, from, bump, bump_bp, strategy, days
        )
    }

    pub fn from_file(path: &Path) -> Result<Settings, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
    }

    pub fn trade_name(&self, default: &str) -> String {
        self.trade.clone().unwrap_or_else(|| default.to_string())
    }

    pub fn trade(&self, default: &str) -> Result<TradeSpec, CliError> {
        match self.trade_name(default).as_str() {
            "i" => Ok(TradeSpec::trade_i()),
            "ii" => Ok(TradeSpec::trade_ii()),
            "hedge" => Ok(TradeSpec::hedge_trade()),
            path => {
                let text = std::fs::read_to_string(path).map_err(|e| CliError::Data(format!("trade {path}: {e}")))?;
                serde_json::from_str(&text).map_err(|e| CliError::Data(format!("trade {path}: {e}")))
            }
        }
    }

    /// Files given on the command line replace the matching part of the built-in data set.
    pub fn market(&self, default_trade: &str) -> Result<MarketData, CliError> {
        let mut data = match self.trade_name(default_trade).as_str() {
            "ii" => Some(data_set_ii()),
            "i" => Some(data_set_i()),
            _ => None,
        };
        match (&mut data, &self.curve, &self.atm_surface) {
            (Some(d), curve, surface) => {
                if let Some(p) = curve {
                    d.curve = load_curve(p, CurveInterpolation::LinearZeroRate).map_err(mfmodel::Error::from)?;
                }
                if let Some(p) = surface {
                    d.surface = load_atm_surface(p).map_err(mfmodel::Error::from)?;
                }
            }
            (None, Some(c), Some(s)) => {
                let trade = self.trade(default_trade)?;
                data = Some(MarketData {
                    valuation: trade.valuation,
                    curve: load_curve(c, CurveInterpolation::LinearZeroRate).map_err(mfmodel::Error::from)?,
                    surface: load_atm_surface(s).map_err(mfmodel::Error::from)?,
                    cube: None,
                });
            }
            (None, _, _) => {
                return Err(CliError::Data("a trade file needs --curve and --atm-surface".into()));
            }
        }
        let mut data = data.unwrap();
        if let Some(p) = &self.ratio_cube {
            data.cube = Some(load_ratio_cube(p).map_err(mfmodel::Error::from)?);
        }
        Ok(data)
    }

    pub fn grid(&self, default_devs: usize) -> Result<GridSpec, CliError> {
        let g = GridSpec {
            steps_per_dev: self.steps.unwrap_or(10),
            deviations: self.devs.unwrap_or(default_devs),
            order: self.order.unwrap_or(3),
        };
        if g.steps_per_dev == 0 || g.deviations == 0 {
            return Err(CliError::Data("--steps and --devs must be positive".into()));
        }
        Ok(g)
    }

    pub fn cases(&self, default: &[u8]) -> Result<Vec<u8>, CliError> {
        let cases = self.case.clone().unwrap_or_else(|| default.to_vec());
        if cases.is_empty() || cases.iter().any(|c| !(1..=8).contains(c)) {
            return Err(CliError::Data(format!("cases must be in 1..=8, got {cases:?}")));
        }
        Ok(cases)
    }

    pub fn mean_reversions(&self, default: &[f64]) -> Vec<f64> {
        self.mr.clone().unwrap_or_else(|| default.to_vec())
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    /// Exercise dates; an empty set is passed through so pricing rejects it.
    pub fn exercise(&self, periods: usize) -> Result<Vec<usize>, CliError> {
        let Some(spec) = &self.exercise else {
            return Ok(((periods / 2).max(1)..=periods).collect());
        };
        let spec = spec.trim();
        if spec.is_empty() {
            return Ok(Vec::new());
        }
        let bad = || CliError::Data(format!("cannot parse exercise set '{spec}'"));
        if let Some((a, b)) = spec.split_once('-') {
            let a: usize = a.trim().parse().map_err(|_| bad())?;
            let b: usize = b.trim().parse().map_err(|_| bad())?;
            return Ok((a..=b).collect());
        }
        spec.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let file = Settings { steps: Some(4), devs: Some(6), ..Default::default() };
        let flags = Settings { steps: Some(8), ..Default::default() };
        let s = flags.overlay(file);
        assert_eq!((s.steps, s.devs), (Some(8), Some(6)));
    }

    #[test]
    fn exercise_parsing() {
        let s = |e: &str| Settings { exercise: Some(e.into()), ..Default::default() };
        assert_eq!(s("5-10").exercise(10).unwrap(), vec![5, 6, 7, 8, 9, 10]);
        assert_eq!(s("2, 4").exercise(10).unwrap(), vec![2, 4]);
        assert!(s("").exercise(10).unwrap().is_empty());
        assert!(s("x").exercise(10).is_err());
        assert_eq!(Settings::default().exercise(10).unwrap(), vec![5, 6, 7, 8, 9, 10]);
    }

    #[test]
    fn config_file_uses_flag_names() {
        let s: Settings = serde_json::from_str(r#"{"atm-surface": "a.csv", "mr": [0.1], "bump-bp": 50}"#).unwrap();
        assert_eq!(s.atm_surface, Some(PathBuf::from("a.csv")));
        assert!(serde_json::from_str::<Settings>(r#"{"nope": 1}"#).is_err());
    }
}
