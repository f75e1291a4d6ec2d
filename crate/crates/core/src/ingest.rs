//! Loading recorded forecasts and outcomes, and calibration tables.
//!
//! Input CSV has the header `date,p,x[,extra...]`:
//!
//! - `date`: ISO-8601 calendar date,
//! - `p`: integer percent (`30`) or decimal probability (`0.3`), told apart
//!   by the presence of a decimal point,
//! - `x`: `0` or `1`,
//! - any further columns are named reals usable as exogenous features.
//!
//! Forecasts of exactly 0 or 1 are replaced by `clamp_eps` and
//! `1 - clamp_eps`, since the logistic strategies are undefined there.
//! Calibration bins are keyed by the announced decile, before clamping.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use chrono::{Days, NaiveDate};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::sim::Observation;

pub const DEFAULT_CLAMP_EPS: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnnouncedForecast {
    Percent(u8),
    Probability(f64),
}

impl AnnouncedForecast {
    fn raw(self) -> f64 {
        match self {
            AnnouncedForecast::Percent(k) => k as f64 / 100.0,
            AnnouncedForecast::Probability(q) => q,
        }
    }

    /// Nearest multiple of 10 percent.
    pub fn decile(self) -> u8 {
        ((self.raw() * 10.0).round() as u8) * 10
    }

    /// Probability in `(0, 1)` with the endpoints clamped.
    pub fn clamped(self, eps: f64) -> f64 {
        let q = self.raw();
        if q <= 0.0 {
            eps
        } else if q >= 1.0 {
            1.0 - eps
        } else {
            q
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastRecord {
    pub date: NaiveDate,
    pub announced: AnnouncedForecast,
    /// Forecast after clamping.
    pub p: f64,
    pub x: bool,
    pub extras: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ForecastSeries {
    pub records: Vec<ForecastRecord>,
    pub extra_names: Vec<String>,
    /// Non-fatal remarks produced while loading.
    pub warnings: Vec<String>,
}

impl ForecastSeries {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn observations(&self) -> Vec<Observation> {
        self.records
            .iter()
            .map(|r| Observation { p: r.p, x: r.x })
            .collect()
    }

    /// Writes the series back out in the input format.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("date,p,x");
        for name in &self.extra_names {
            out.push(',');
            out.push_str(name);
        }
        out.push('\n');
        for r in &self.records {
            let p = match r.announced {
                AnnouncedForecast::Percent(k) => k.to_string(),
                AnnouncedForecast::Probability(q) => format!("{q:?}"),
            };
            let _ = write!(out, "{},{},{}", r.date, p, u8::from(r.x));
            for name in &self.extra_names {
                let _ = write!(out, ",{}", r.extras[name]);
            }
            out.push('\n');
        }
        out
    }
}

fn check_clamp(eps: f64) -> Result<()> {
    if eps > 0.0 && eps < 0.5 {
        Ok(())
    } else {
        Err(Error::InvalidProbability(eps))
    }
}

pub fn load_csv(path: impl AsRef<Path>, clamp_eps: f64) -> Result<ForecastSeries> {
    let file = std::fs::File::open(path)?;
    read_csv(file, clamp_eps)
}

pub fn read_csv<R: Read>(reader: R, clamp_eps: f64) -> Result<ForecastSeries> {
    check_clamp(clamp_eps)?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    let names: Vec<&str> = header.iter().collect();
    if names.len() < 3 || names[0] != "date" || names[1] != "p" || names[2] != "x" {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header `date,p,x[,extra...]`, found `{}`", names.join(",")),
        });
    }
    let extra_names: Vec<String> = names[3..].iter().map(|s| s.to_string()).collect();

    let mut records = Vec::new();
    let mut off_decile = 0usize;
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let bad = |message: String| Error::Parse { line, message };
        if row.len() != names.len() {
            return Err(bad(format!("expected {} fields, found {}", names.len(), row.len())));
        }
        let date = NaiveDate::parse_from_str(&row[0], "%Y-%m-%d")
            .map_err(|e| bad(format!("bad date `{}`: {e}", &row[0])))?;
        let announced = parse_forecast(&row[1]).map_err(bad)?;
        if let AnnouncedForecast::Probability(q) = announced {
            if ((q * 10.0).round() - q * 10.0).abs() > 1e-9 {
                off_decile += 1;
            }
        }
        let x = match &row[2] {
            "0" => false,
            "1" => true,
            other => return Err(bad(format!("outcome `{other}` is not 0 or 1"))),
        };
        let mut extras = BTreeMap::new();
        for (name, raw) in extra_names.iter().zip(row.iter().skip(3)) {
            let v: f64 = raw
                .parse()
                .map_err(|_| bad(format!("column `{name}`: `{raw}` is not a number")))?;
            extras.insert(name.clone(), v);
        }
        records.push(ForecastRecord {
            date,
            announced,
            p: announced.clamped(clamp_eps),
            x,
            extras,
        });
    }
    if records.is_empty() {
        return Err(Error::EmptyData);
    }
    let mut warnings = Vec::new();
    if off_decile > 0 {
        warnings.push(format!(
            "{off_decile} decimal forecast(s) are not multiples of 0.1; binned to the nearest decile"
        ));
    }
    Ok(ForecastSeries {
        records,
        extra_names,
        warnings,
    })
}

fn parse_forecast(raw: &str) -> std::result::Result<AnnouncedForecast, String> {
    if raw.contains('.') {
        let q: f64 = raw
            .parse()
            .map_err(|_| format!("forecast `{raw}` is not a number"))?;
        if !(0.0..=1.0).contains(&q) {
            return Err(format!("forecast probability {q} is outside [0, 1]"));
        }
        Ok(AnnouncedForecast::Probability(q))
    } else {
        let k: u8 = raw
            .parse()
            .ok()
            .filter(|k| *k <= 100)
            .ok_or_else(|| format!("forecast percent `{raw}` is not an integer in 0..=100"))?;
        Ok(AnnouncedForecast::Percent(k))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BinCounts {
    pub rainy: u64,
    pub dry: u64,
}

impl BinCounts {
    pub fn total(&self) -> u64 {
        self.rainy + self.dry
    }

    /// `rainy / total`.
    pub fn ratio(&self) -> f64 {
        self.rainy as f64 / self.total() as f64
    }
}

/// Outcome counts per announced forecast decile.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CalibrationTable {
    pub bins: BTreeMap<u8, BinCounts>,
}

impl CalibrationTable {
    /// From `(percent, count x = 1, count x = 0)` rows.
    pub fn from_counts(rows: &[(u8, u64, u64)]) -> Self {
        let bins = rows
            .iter()
            .map(|&(k, rainy, dry)| (k, BinCounts { rainy, dry }))
            .collect();
        Self { bins }
    }

    pub fn total(&self) -> u64 {
        self.bins.values().map(BinCounts::total).sum()
    }

    /// Aligned plain-text rendering, ratios in percent to one decimal.
    pub fn to_text(&self) -> String {
        let mut out = format!("{:>6} {:>8} {:>8} {:>10}\n", "p(%)", "x=1", "x=0", "ratio(%)");
        for (k, b) in &self.bins {
            let _ = writeln!(out, "{:>6} {:>8} {:>8} {:>10.1}", k, b.rainy, b.dry, 100.0 * b.ratio());
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("p_percent,x1,x0,ratio_percent\n");
        for (k, b) in &self.bins {
            let _ = writeln!(out, "{},{},{},{:.1}", k, b.rainy, b.dry, 100.0 * b.ratio());
        }
        out
    }
}

pub fn calibration_table(series: &ForecastSeries) -> Result<CalibrationTable> {
    if series.is_empty() {
        return Err(Error::EmptyData);
    }
    let mut table = CalibrationTable::default();
    for r in &series.records {
        let bin = table.bins.entry(r.announced.decile()).or_default();
        if r.x {
            bin.rainy += 1;
        } else {
            bin.dry += 1;
        }
    }
    Ok(table)
}

/// First date assigned to synthesised series.
const SYNTH_START: (i32, u32, u32) = (2000, 1, 1);

/// Emits exactly the table's per-bin outcome counts in a seeded random day
/// order, on consecutive dates, clamped with [`DEFAULT_CLAMP_EPS`].
pub fn synth_from_table(table: &CalibrationTable, seed: u64) -> ForecastSeries {
    let mut items: Vec<(u8, bool)> = Vec::with_capacity(table.total() as usize);
    for (&k, b) in &table.bins {
        items.extend(std::iter::repeat_n((k, true), b.rainy as usize));
        items.extend(std::iter::repeat_n((k, false), b.dry as usize));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    items.shuffle(&mut rng);
    let (y, m, d) = SYNTH_START;
    let start = NaiveDate::from_ymd_opt(y, m, d).expect("valid start date");
    let records = items
        .into_iter()
        .enumerate()
        .map(|(i, (k, x))| {
            let announced = AnnouncedForecast::Percent(k);
            ForecastRecord {
                date: start + Days::new(i as u64),
                announced,
                p: announced.clamped(DEFAULT_CLAMP_EPS),
                x,
                extras: BTreeMap::new(),
            }
        })
        .collect();
    ForecastSeries {
        records,
        extra_names: Vec::new(),
        warnings: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ForecastSeries> {
        read_csv(text.as_bytes(), DEFAULT_CLAMP_EPS)
    }

    #[test]
    fn clamping_rules() {
        let s = parse("date,p,x\n2020-01-01,0,0\n2020-01-02,50,1\n2020-01-03,100,1\n2020-01-04,30,0\n")
            .unwrap();
        let ps: Vec<f64> = s.records.iter().map(|r| r.p).collect();
        assert_eq!(ps, vec![0.01, 0.5, 0.99, 0.3]);
        let s = read_csv("date,p,x\n2020-01-01,0,0\n".as_bytes(), 0.05).unwrap();
        assert_eq!(s.records[0].p, 0.05);
    }

    #[test]
    fn decimal_probabilities() {
        let s = parse("date,p,x\n2020-01-01,0.25,1\n2020-01-02,0.7,0\n2020-01-03,1.0,1\n").unwrap();
        assert_eq!(s.records[0].p, 0.25);
        assert_eq!(s.records[2].p, 0.99);
        assert_eq!(s.warnings.len(), 1);
        let t = calibration_table(&s).unwrap();
        assert_eq!(t.bins.keys().copied().collect::<Vec<_>>(), vec![30, 70, 100]);
    }

    #[test]
    fn extras_are_read() {
        let s = parse("date,p,x,temp\n2020-01-01,40,1,12.5\n").unwrap();
        assert_eq!(s.extra_names, vec!["temp".to_string()]);
        assert_eq!(s.records[0].extras["temp"], 12.5);
    }

    #[test]
    fn malformed_rows_report_lines() {
        let err = parse("date,p,x\n2020-01-01,40,1\n2020-01-02,40,2\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = parse("date,p,x\n2020-13-01,40,1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = parse("date,p,x\n2020-01-01,140,1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        assert!(matches!(parse("day,p,x\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse("date,p,x\n"), Err(Error::EmptyData)));
        assert!(parse("").is_err());
    }

    #[test]
    fn single_row_table() {
        let s = parse("date,p,x\n2020-01-01,50,1\n").unwrap();
        let t = calibration_table(&s).unwrap();
        assert_eq!(t.bins[&50], BinCounts { rainy: 1, dry: 0 });
        assert_eq!(t.bins[&50].ratio(), 1.0);
    }

    #[test]
    fn synth_round_trip_and_order() {
        let table = CalibrationTable::from_counts(&[(0, 1, 4), (50, 3, 3), (100, 2, 0)]);
        let a = synth_from_table(&table, 1);
        let b = synth_from_table(&table, 2);
        assert_eq!(calibration_table(&a).unwrap(), table);
        assert_eq!(calibration_table(&b).unwrap(), table);
        assert_ne!(a.observations(), b.observations());
        let mut ka: Vec<(u8, bool)> = a.records.iter().map(|r| (r.announced.decile(), r.x)).collect();
        let mut kb: Vec<(u8, bool)> = b.records.iter().map(|r| (r.announced.decile(), r.x)).collect();
        ka.sort();
        kb.sort();
        assert_eq!(ka, kb);
    }

    #[test]
    fn csv_round_trip() {
        let table = CalibrationTable::from_counts(&[(10, 2, 5), (90, 4, 1)]);
        let s = synth_from_table(&table, 11);
        let back = parse(&s.to_csv()).unwrap();
        assert_eq!(back.records, s.records);
    }
}
