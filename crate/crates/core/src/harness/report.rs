//! CSV output of experiment reports and per-figure tables.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::experiment::MetricsReport;

pub const SUMMARY_HEADER: [&str; 5] = [
    "strategy",
    "cumulative_energy_kwh",
    "violations",
    "final_coverage",
    "final_mae",
];

pub const DAILY_HEADER: [&str; 9] = [
    "strategy",
    "day",
    "energy_kwh",
    "violations",
    "draws",
    "coverage",
    "fleet_coverage",
    "agent_coverage",
    "mae",
];

/// Formats with 6 significant digits, `%g` style: fixed notation for
/// exponents in `[-5, 6)`, scientific otherwise, trailing zeros removed.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..6).contains(&exp) {
        let decimals = (5 - exp) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_sig).unwrap_or_default()
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))
}

fn finish(mut w: csv::Writer<fs::File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `summary.csv`, `daily.csv` and, when the report carries logged
/// transitions, `transitions_<hid>.csv` (in a per-strategy subdirectory if
/// more than one strategy ran). Returns the written paths.
pub fn write_report(report: &MetricsReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();

    let path = out_dir.join("summary.csv");
    let mut w = writer(&path)?;
    w.write_record(SUMMARY_HEADER).map_err(|e| Error::csv(&path, e))?;
    for s in &report.strategies {
        w.write_record([
            s.strategy.name().to_string(),
            fmt_sig(s.cumulative_energy_kwh),
            s.violations.to_string(),
            fmt_sig(s.final_coverage),
            opt(s.final_mae),
        ])
        .map_err(|e| Error::csv(&path, e))?;
    }
    finish(w, &path)?;
    written.push(path);

    let path = out_dir.join("daily.csv");
    let mut w = writer(&path)?;
    w.write_record(DAILY_HEADER).map_err(|e| Error::csv(&path, e))?;
    for s in &report.strategies {
        for d in &s.daily {
            w.write_record([
                s.strategy.name().to_string(),
                d.day.to_string(),
                fmt_sig(d.energy_kwh),
                d.violations.to_string(),
                d.draws.to_string(),
                fmt_sig(d.coverage),
                fmt_sig(d.fleet_coverage),
                fmt_sig(d.agent_coverage),
                opt(d.mae),
            ])
            .map_err(|e| Error::csv(&path, e))?;
        }
    }
    finish(w, &path)?;
    written.push(path);

    let nested = report.strategies.len() > 1;
    for s in &report.strategies {
        let Some(datasets) = &s.transitions else {
            continue;
        };
        let dir = if nested {
            out_dir.join(s.strategy.name())
        } else {
            out_dir.to_path_buf()
        };
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for (hid, ds) in datasets.iter().enumerate() {
            let path = dir.join(format!("transitions_{hid}.csv"));
            ds.write_csv(&path)?;
            written.push(path);
        }
    }
    Ok(written)
}

struct DailyRow {
    strategy: String,
    day: usize,
    energy: f64,
    violations: f64,
    coverage: String,
    mae: String,
}

fn read_daily(path: &Path) -> Result<Vec<DailyRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let headers = r.headers().map_err(|e| Error::csv(path, e))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::InvalidInput(format!("{}: missing column `{name}`", path.display())))
    };
    let (c_strategy, c_day, c_energy, c_viol, c_cov, c_mae) = (
        col("strategy")?,
        col("day")?,
        col("energy_kwh")?,
        col("violations")?,
        col("coverage")?,
        col("mae")?,
    );
    let bad = |what: &str, v: &str| {
        Error::InvalidInput(format!("{}: invalid {what} `{v}`", path.display()))
    };
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        let get = |i: usize| rec.get(i).unwrap_or("");
        rows.push(DailyRow {
            strategy: get(c_strategy).to_string(),
            day: get(c_day).parse().map_err(|_| bad("day", get(c_day)))?,
            energy: get(c_energy).parse().map_err(|_| bad("energy", get(c_energy)))?,
            violations: get(c_viol).parse().map_err(|_| bad("violations", get(c_viol)))?,
            coverage: get(c_cov).to_string(),
            mae: get(c_mae).to_string(),
        });
    }
    Ok(rows)
}

/// Reads `daily.csv` from `dir` and writes the wide per-figure tables
/// `fig1a.csv` (coverage), `fig1b.csv` (model error), `fig3a.csv`
/// (cumulative energy) and `fig3b.csv` (cumulative violations), one column
/// per strategy.
pub fn write_plot_data(dir: &Path) -> Result<Vec<PathBuf>> {
    let rows = read_daily(&dir.join("daily.csv"))?;
    let mut strategies: Vec<String> = Vec::new();
    for r in &rows {
        if !strategies.contains(&r.strategy) {
            strategies.push(r.strategy.clone());
        }
    }
    let mut days: BTreeMap<usize, BTreeMap<&str, &DailyRow>> = BTreeMap::new();
    for r in &rows {
        days.entry(r.day).or_default().insert(r.strategy.as_str(), r);
    }

    let mut header = vec!["day".to_string()];
    header.extend(strategies.iter().cloned());

    let mut written = Vec::new();
    let mut table = |name: &str, cell: &mut dyn FnMut(&str, Option<&DailyRow>) -> String| -> Result<()> {
        let path = dir.join(name);
        let mut w = writer(&path)?;
        w.write_record(&header).map_err(|e| Error::csv(&path, e))?;
        for (day, by_strategy) in &days {
            let mut rec = vec![day.to_string()];
            for s in &strategies {
                rec.push(cell(s, by_strategy.get(s.as_str()).copied()));
            }
            w.write_record(&rec).map_err(|e| Error::csv(&path, e))?;
        }
        finish(w, &path)?;
        written.push(path);
        Ok(())
    };

    table("fig1a.csv", &mut |_, r| r.map(|r| r.coverage.clone()).unwrap_or_default())?;
    table("fig1b.csv", &mut |_, r| r.map(|r| r.mae.clone()).unwrap_or_default())?;
    let mut energy: BTreeMap<String, f64> = BTreeMap::new();
    table("fig3a.csv", &mut |s, r| match r {
        Some(r) => {
            let acc = energy.entry(s.to_string()).or_insert(0.0);
            *acc += r.energy;
            fmt_sig(*acc)
        }
        None => String::new(),
    })?;
    let mut violations: BTreeMap<String, f64> = BTreeMap::new();
    table("fig3b.csv", &mut |s, r| match r {
        Some(r) => {
            let acc = violations.entry(s.to_string()).or_insert(0.0);
            *acc += r.violations;
            fmt_sig(*acc)
        }
        None => String::new(),
    })?;
    Ok(written)
}
