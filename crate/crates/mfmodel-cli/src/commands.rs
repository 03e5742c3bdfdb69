//! One function per subcommand. Each writes machine-readable files into the output directory
//! and a short human-readable summary to stdout, money in bp of notional with 2 decimals.

use std::fmt::Write as _;
use std::path::Path;

use log::{info, warn};
use mfmodel::calibration::{calibrate_strip, default_offsets, strip_problems, ModelFamily};
use mfmodel::hedging::{
    compute_risk, generate_synthetic_scenario, ledger_csv, run_backtest, scenario_csv, BacktestOptions, BermudanMode,
    HedgeDeal, Liquidation, PnlStats, RiskOptions, ScenarioSpec, Strategy, VegaRoll,
};
use mfmodel::pricing::{bermudan_value, european_value, future_smile as smile_at, smile_dynamics as dynamics};
use mfmodel::toy::ToyLattice;
use mfmodel::{BermudanTrade, GridSpec, MappingCase, MfLattice, Setup};
use serde::Serialize;

use crate::config::Settings;
use crate::CliError;

fn write(path: &Path, body: impl AsRef<[u8]>) -> Result<(), CliError> {
    info!("writing {}", path.display());
    std::fs::write(path, body).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Data(e.to_string()))?;
    write(path, text + "\n")
}

fn case(c: u8) -> MappingCase {
    MappingCase::numbered(c).expect("validated case number")
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| x.to_string())
}

#[derive(Serialize)]
struct PriceRecord {
    trade: String,
    case: u8,
    mean_reversion: f64,
    product: &'static str,
    expiry: Option<usize>,
    exercise: Option<Vec<usize>>,
    strike: f64,
    value_bp: f64,
    analytic_bp: Option<f64>,
    grid_params: GridSpec,
}

pub fn price(s: &Settings, out: &Path) -> Result<(), CliError> {
    let trade = s.trade("i")?;
    let data = s.market("i")?;
    let setup = Setup::new(&trade, &data.curve, &data.surface)?;
    let grid = s.grid(10)?;
    let cases = s.cases(&[1, 2, 3, 4, 5, 6, 7, 8])?;
    let exercise = s.exercise(setup.periods())?;
    let (euro_strikes, berm_strikes) = match &s.strikes {
        Some(k) => (k.clone(), k.clone()),
        None => (vec![0.05], vec![0.035, 0.055, 0.075]),
    };
    let notional = trade.notional;
    let bp = |v: f64| v / notional * 1e4;
    let name = s.trade_name("i");

    let mut records = Vec::new();
    let mut euro_csv = String::from("mean_reversion,case,expiry,strike,analytic_bp,mf_bp\n");
    let mut berm_csv = String::from("mean_reversion,case,strike,value_bp\n");
    for mr in s.mean_reversions(&[0.0]) {
        for &c in &cases {
            info!("case {c}, mean reversion {mr}");
            let lat = setup.lattice(&case(c), mr, grid)?;
            let berm: Vec<f64> = berm_strikes
                .iter()
                .map(|&k| {
                    let t = BermudanTrade { strike: k, kind: trade.kind, notional, exercise: exercise.clone() };
                    bermudan_value(&lat, &t).map(|v| bp(v.value))
                })
                .collect::<Result<_, _>>()?;
            write(&out.join(format!("lattice_case{c}_mr{mr}.json")), lat.to_json()? + "\n")?;
            println!("case {c}  mr {mr}");
            println!("  {:>6} {:>8} {:>10} {:>10}", "expiry", "strike", "analytic", "mf");
            for n in 1..=setup.periods() {
                for &k in &euro_strikes {
                    let analytic = bp(setup.analytic_european(&case(c), n, k, trade.kind)?);
                    let mf = bp(european_value(&lat, n, k, trade.kind, notional)?);
                    println!("  {n:>6} {:>7.2}% {analytic:>10.2} {mf:>10.2}", k * 100.0);
                    writeln!(euro_csv, "{mr},{c},{n},{k},{analytic},{mf}").unwrap();
                    records.push(PriceRecord {
                        trade: name.clone(),
                        case: c,
                        mean_reversion: mr,
                        product: "european",
                        expiry: Some(n),
                        exercise: None,
                        strike: k,
                        value_bp: mf,
                        analytic_bp: Some(analytic),
                        grid_params: grid,
                    });
                }
            }
            for (&k, &v) in berm_strikes.iter().zip(&berm) {
                println!("  bermudan {:>7.2}% {v:>10.2}", k * 100.0);
                writeln!(berm_csv, "{mr},{c},{k},{v}").unwrap();
                records.push(PriceRecord {
                    trade: name.clone(),
                    case: c,
                    mean_reversion: mr,
                    product: "bermudan",
                    expiry: None,
                    exercise: Some(exercise.clone()),
                    strike: k,
                    value_bp: v,
                    analytic_bp: None,
                    grid_params: grid,
                });
            }
        }
    }
    write(&out.join("european.csv"), euro_csv)?;
    write(&out.join("bermudan.csv"), berm_csv)?;
    write_json(&out.join("price.json"), &records)
}

pub fn calibrate(s: &Settings, out: &Path) -> Result<(), CliError> {
    let trade = s.trade("ii")?;
    let data = s.market("ii")?;
    let cube = data.cube.as_ref().ok_or_else(|| CliError::Data("calibration needs --ratio-cube".into()))?;
    let setup = Setup::new(&trade, &data.curve, &data.surface)?;
    let problems = strip_problems(&setup, &data.surface, cube, &default_offsets())?;
    let mut summary = String::from("family,avg_abs_err,failed_expiries\n");
    let mut any = false;
    println!("{:>14} {:>12}", "family", "avg |err|");
    for family in ModelFamily::ALL {
        info!("calibrating {}", family.name());
        let report = calibrate_strip(&problems, family);
        let failed = report.entries.iter().filter(|e| e.fit.is_none()).count();
        for e in report.entries.iter().filter(|e| e.error.is_some()) {
            warn!("{} expiry day {}: {}", family.name(), e.expiry_day, e.error.as_deref().unwrap_or(""));
        }
        let err = report.avg_abs_err();
        any |= err.is_some();
        match err {
            Some(v) => println!("{:>14} {:>11.2}%", family.name(), v * 100.0),
            None => println!("{:>14} {:>12}", family.name(), "failed"),
        }
        writeln!(summary, "{},{},{failed}", family.name(), opt(err)).unwrap();
        write(&out.join(format!("calibration_{}.csv", family.name())), report.to_csv())?;
    }
    write(&out.join("calibration_summary.csv"), summary)?;
    if !any {
        return Err(CliError::Numerical("every model family failed to calibrate".into()));
    }
    Ok(())
}

pub fn future_smile(s: &Settings, out: &Path) -> Result<(), CliError> {
    let trade = s.trade("i")?;
    let data = s.market("i")?;
    let setup = Setup::new(&trade, &data.curve, &data.surface)?;
    let grid = s.grid(10)?;
    let c = s.cases(&[8])?[0];
    let expiry = s.expiry.unwrap_or(setup.periods().saturating_sub(1).max(2));
    let from = s.from.unwrap_or(expiry.saturating_sub(3).max(1));
    let offsets: Vec<f64> = default_offsets().iter().map(|o| o * 1e-4).collect();
    let mut summary = String::from("mean_reversion,avg_atm_vol,states\n");
    for mr in s.mean_reversions(&[0.0, 0.10, 0.30]) {
        let lat = setup.lattice(&case(c), mr, grid)?;
        let date = lat.date(from)?;
        let mut csv = String::from("node,x,forward,strike,implied_vol\n");
        let mut atm = Vec::new();
        for (node, &x) in date.x.iter().enumerate() {
            if x.abs() > 2.0 * date.sd + 1e-12 {
                continue;
            }
            let forward = smile_at(&lat, expiry, Some((from, node)), &[0.05])?.forward;
            let strikes: Vec<f64> = match &s.strikes {
                Some(k) => k.clone(),
                None => offsets.iter().map(|o| forward + o).filter(|k| *k > 0.0).collect(),
            };
            let smile = smile_at(&lat, expiry, Some((from, node)), &strikes)?;
            for p in &smile.points {
                writeln!(csv, "{node},{x},{},{},{}", smile.forward, p.strike, opt(p.implied_vol)).unwrap();
            }
            atm.extend(smile.atm_vol());
        }
        let avg = atm.iter().sum::<f64>() / atm.len().max(1) as f64;
        println!("mr {mr}: average future ATM vol {:.2}% over {} states", avg * 100.0, atm.len());
        writeln!(summary, "{mr},{avg},{}", atm.len()).unwrap();
        write(&out.join(format!("future_smile_mr{mr}.csv")), csv)?;
    }
    write(&out.join("future_smile_summary.csv"), summary)
}

pub fn smile_dynamics(s: &Settings, out: &Path) -> Result<(), CliError> {
    let trade = s.trade("i")?;
    let data = s.market("i")?;
    let setup = Setup::new(&trade, &data.curve, &data.surface)?;
    let grid = s.grid(10)?;
    let c = s.cases(&[6])?[0];
    let mr = s.mean_reversions(&[0.0])[0];
    let expiry = s.expiry.unwrap_or(5.min(setup.periods()));
    let kind = s.bump.clone().unwrap_or_else(|| "parallel".into());
    let bump = |sign: f64| match kind.as_str() {
        "parallel" => Ok(setup.strip.parallel_bump(sign * s.bump_bp.unwrap_or(50.0) * 1e-4)?),
        "discount" => Ok(setup.strip.discount_bump(expiry, sign * s.bump_bp.unwrap_or(100.0) * 1e-4)?),
        other => Err(CliError::Data(format!("unknown bump '{other}', use parallel or discount"))),
    };
    let models = setup.models(&case(c))?;
    let base = MfLattice::build(&setup.strip, &models, mr, grid)?;
    let moneyness: Vec<f64> = (0..13).map(|i| 0.7 + 0.05 * i as f64).collect();
    let up = dynamics(&base, &MfLattice::build(&bump(1.0)?, &models, mr, grid)?, expiry, &moneyness)?;
    let down = dynamics(&base, &MfLattice::build(&bump(-1.0)?, &models, mr, grid)?, expiry, &moneyness)?;
    let mut csv = String::from("moneyness,base_strike,base_vol,up_strike,up_vol,down_strike,down_vol\n");
    for (i, m) in moneyness.iter().enumerate() {
        let (b, u, d) = (&up.base.points[i], &up.bumped.points[i], &down.bumped.points[i]);
        let row = [b.strike.to_string(), opt(b.implied_vol), u.strike.to_string(), opt(u.implied_vol), d.strike.to_string(), opt(d.implied_vol)];
        writeln!(csv, "{m},{}", row.join(",")).unwrap();
    }
    println!(
        "forward {:.2}%  up {:.2}%  down {:.2}%",
        up.base.forward * 100.0,
        up.bumped.forward * 100.0,
        down.bumped.forward * 100.0
    );
    for (label, d) in [("up", &up), ("down", &down)] {
        let bps = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{:.2}", x * 1e4));
        println!("{label:>4}: fixed-strike ATM move {} bp vol, max shift at equal moneyness {} bp vol", bps(d.atm_move()), bps(d.max_moneyness_shift()));
    }
    write(&out.join("smile_dynamics.csv"), csv)?;
    write_json(&out.join("smile_dynamics.json"), &[&up, &down])
}

fn strategies(name: &str) -> Result<Vec<BacktestOptions>, CliError> {
    let dv = BacktestOptions::new(Strategy::DeltaVega);
    let monthly = BacktestOptions { vega_roll: VegaRoll::Monthly, ..dv };
    let mtmodel = BacktestOptions { liquidation: Liquidation::MarkToModel, ..dv };
    Ok(match name {
        "unhedged" => vec![BacktestOptions::new(Strategy::Unhedged)],
        "delta" => vec![BacktestOptions::new(Strategy::Delta)],
        "delta-vega" => vec![dv],
        "delta-vega-monthly" => vec![monthly],
        "delta-vega-mtmodel" => vec![mtmodel],
        "all" => vec![
            BacktestOptions::new(Strategy::Unhedged),
            BacktestOptions::new(Strategy::Delta),
            dv,
            monthly,
            mtmodel,
        ],
        other => return Err(CliError::Data(format!("unknown strategy '{other}'"))),
    })
}

pub fn hedge(s: &Settings, out: &Path) -> Result<(), CliError> {
    let trade = s.trade("hedge")?;
    let options = strategies(s.strategy.as_deref().unwrap_or("all"))?;
    let standard = ScenarioSpec::standard();
    let spec = ScenarioSpec { days: s.days.unwrap_or(standard.days), ..standard };
    let seed = s.seed.unwrap_or(0);
    info!("generating {} days with seed {seed}", spec.days);
    let scenario = generate_synthetic_scenario(seed, &spec, &trade)?;
    let first = scenario.first().ok_or_else(|| CliError::Data("empty scenario".into()))?;
    let curve = first.curve().map_err(mfmodel::Error::from)?;
    let probe = HedgeDeal { trade: trade.clone(), strike: 0.0 };
    let strike = probe.setup(first, &curve)?.strip.swap_rate(1);
    let deal = HedgeDeal { trade, strike };
    let risk_opts = RiskOptions {
        mode: BermudanMode::Smile,
        mean_reversion: s.mean_reversions(&[0.0])[0],
        grid: s.grid(7)?,
        ..RiskOptions::default()
    };
    info!("computing daily sensitivities");
    let risk = compute_risk(&scenario, &deal, &risk_opts)?;
    let results = options
        .iter()
        .map(|o| run_backtest(&scenario, &risk, &deal, BermudanMode::Smile, *o))
        .collect::<Result<Vec<_>, _>>()?;
    let bp = |v: f64| v / deal.trade.notional * 1e4;
    println!("strike {:.2}%, {} days, seed {seed}", strike * 100.0, scenario.len());
    println!("{:>22} {:>10} {:>10} {:>12} {:>10}", "strategy", "pnl mean", "pnl stdev", "terminal npv", "npv range");
    for r in &results {
        let st = &r.stats;
        println!(
            "{:>22} {:>10.2} {:>10.2} {:>12.2} {:>10.2}",
            st.label,
            bp(st.pnl_mean),
            bp(st.pnl_stdev),
            bp(st.terminal_npv),
            bp(st.npv_range())
        );
    }
    let stats: Vec<&PnlStats> = results.iter().map(|r| &r.stats).collect();
    write(&out.join("ledger.csv"), ledger_csv(&results))?;
    write(&out.join("scenario.csv"), scenario_csv(&scenario, &risk))?;
    write_json(&out.join("hedge_stats.json"), &stats)
}

#[derive(Serialize)]
struct ToyRecord {
    tree: &'static str,
    strike: f64,
    bermudan_bp: f64,
}

pub fn fixtures(out: &Path) -> Result<(), CliError> {
    let mut records = Vec::new();
    println!("{:>6} {:>8} {:>8} {:>8}", "tree", "4.50%", "5.50%", "6.50%");
    for (name, tree) in [("base", ToyLattice::base()), ("a", ToyLattice::tree_a()), ("b", ToyLattice::tree_b())] {
        let mut line = format!("{name:>6}");
        for k in [0.045, 0.055, 0.065] {
            let v = tree.bermudan(k).0;
            line += &format!(" {v:>8.2}");
            records.push(ToyRecord { tree: name, strike: k, bermudan_bp: v });
        }
        println!("{line}");
    }
    let swap = ToyLattice::base().swap_tree(0.055);
    println!("swap values at 5.50%, first reset: {}", swap[0].iter().map(|v| format!("{v:.2}")).collect::<Vec<_>>().join(" "));
    write_json(&out.join("fixtures.json"), &serde_json::json!({ "bermudan": records, "swap_tree_base_5.5": swap }))
}
