//! CSV inputs and outputs, and the number formatting they share.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use drmtest_core::quantile::{Forecast, GridQuantile, Normal, SkewedT, StudentT};
use drmtest_core::skewt::SkewedTParams;
use drmtest_core::TestResult;
use serde::Deserialize;

/// `x` with `digits` significant digits, fixed notation for moderate
/// magnitudes and scientific otherwise, trailing zeros removed.
pub fn sig(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci
        .split_once('e')
        .expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..digits as i32).contains(&exp) {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

#[derive(Debug, Deserialize)]
struct LossRecord {
    t: i64,
    loss: f64,
}

/// Reads `t,loss`, returning losses ordered by `t`.
pub fn read_losses<R: Read>(reader: R) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows: Vec<LossRecord> = Vec::new();
    for rec in rdr.deserialize() {
        rows.push(rec.context("malformed losses row (expected t,loss)")?);
    }
    rows.sort_by_key(|r| r.t);
    if rows.windows(2).any(|w| w[0].t == w[1].t) {
        bail!("duplicate t in losses");
    }
    Ok(rows.into_iter().map(|r| r.loss).collect())
}

pub fn read_losses_file(path: &Path) -> Result<Vec<f64>> {
    let f = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_losses(f)
}

/// Reads forecasts in either accepted layout, detected from the header:
/// `t,family,param1,param2` with `family` one of `normal` (mean, sd),
/// `student_t` (nu, scale) or `skewed_t` (nu, gamma), or the long grid
/// layout `t,p,quantile`.
///
/// Parametric Student-t rows are centred; skewed-t rows are standardized to
/// mean 0 and variance 1.
pub fn read_forecasts<R: Read>(reader: R) -> Result<Vec<Forecast>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let cols: Vec<&str> = headers.iter().map(String::as_str).collect();
    match cols.as_slice() {
        ["t", "family", "param1", "param2"] => {
            let mut rows = Vec::new();
            for rec in rdr.records() {
                let rec = rec?;
                let t: i64 = rec[0]
                    .parse()
                    .with_context(|| format!("bad t '{}'", &rec[0]))?;
                let a: f64 = rec[2]
                    .parse()
                    .with_context(|| format!("bad param1 '{}'", &rec[2]))?;
                let b: f64 = rec[3]
                    .parse()
                    .with_context(|| format!("bad param2 '{}'", &rec[3]))?;
                let fc = match &rec[1] {
                    "normal" => Forecast::Normal(Normal::new(a, b)?),
                    "student_t" => Forecast::StudentT(StudentT::new(a, 0.0, b)?),
                    "skewed_t" => {
                        Forecast::SkewedT(SkewedT::standardized(SkewedTParams::new(a, b)?)?)
                    }
                    other => bail!("unknown forecast family '{other}' at t = {t}"),
                };
                rows.push((t, fc));
            }
            ordered(rows)
        }
        ["t", "p", "quantile"] => {
            let mut grids: BTreeMap<i64, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
            for rec in rdr.records() {
                let rec = rec?;
                let t: i64 = rec[0]
                    .parse()
                    .with_context(|| format!("bad t '{}'", &rec[0]))?;
                let p: f64 = rec[1]
                    .parse()
                    .with_context(|| format!("bad p '{}'", &rec[1]))?;
                let q: f64 = rec[2]
                    .parse()
                    .with_context(|| format!("bad quantile '{}'", &rec[2]))?;
                let entry = grids.entry(t).or_default();
                entry.0.push(p);
                entry.1.push(q);
            }
            grids
                .into_iter()
                .map(|(t, (p, q))| {
                    GridQuantile::new(p, q)
                        .map(Forecast::Grid)
                        .map_err(|e| anyhow!("grid at t = {t}: {e}"))
                })
                .collect()
        }
        _ => bail!("unrecognised forecast header {headers:?}"),
    }
}

fn ordered(mut rows: Vec<(i64, Forecast)>) -> Result<Vec<Forecast>> {
    rows.sort_by_key(|r| r.0);
    if rows.windows(2).any(|w| w[0].0 == w[1].0) {
        bail!("duplicate t in forecasts");
    }
    Ok(rows.into_iter().map(|r| r.1).collect())
}

pub fn read_forecasts_file(path: &Path) -> Result<Vec<Forecast>> {
    let f = std::fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    read_forecasts(f)
}

/// `test,statistic,pvalue,reject` with six significant digits.
pub fn write_test_results<W: Write>(writer: W, tests: &[TestResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["test", "statistic", "pvalue", "reject"])?;
    for t in tests {
        w.write_record([
            t.kind.name().to_string(),
            sig(t.statistic, 6),
            sig(t.p_value, 6),
            t.reject.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `cell,probability` with fifteen significant digits.
pub fn write_cell_probabilities<W: Write>(writer: W, p: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["cell", "probability"])?;
    for (k, pk) in p.iter().enumerate() {
        w.write_record([k.to_string(), sig(*pk, 15)])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use drmtest_core::QuantileFunction;

    #[test]
    fn significant_digits() {
        assert_eq!(sig(0.98125, 15), "0.98125");
        assert_eq!(sig(0.0125, 15), "0.0125");
        assert_eq!(sig(4.027102710137775, 6), "4.0271");
        assert_eq!(sig(0.04550026389635857, 6), "0.0455003");
        assert_eq!(sig(1.0 / 3.0, 15), "0.333333333333333");
        assert_eq!(sig(1.5e-12, 6), "1.5e-12");
        assert_eq!(sig(123456789.0, 6), "1.23457e8");
        assert_eq!(sig(-2.5, 6), "-2.5");
        assert_eq!(sig(0.0, 6), "0");
    }

    #[test]
    fn losses_are_sorted_by_t() {
        let text = "t,loss\n2,0.5\n1,-1.25\n3,2\n";
        assert_eq!(read_losses(text.as_bytes()).unwrap(), vec![-1.25, 0.5, 2.0]);
        assert!(read_losses("t,loss\n1,0\n1,2\n".as_bytes()).is_err());
        assert!(read_losses("time,value\n1,0\n".as_bytes()).is_err());
    }

    #[test]
    fn parametric_and_grid_forecasts() {
        let text = "t,family,param1,param2\n2,student_t,5,1\n1,normal,0,2\n3,skewed_t,5,1.5\n";
        let fc = read_forecasts(text.as_bytes()).unwrap();
        assert_eq!(fc.len(), 3);
        assert!((fc[0].quantile(0.975).unwrap() - 2.0 * 1.959963984540054).abs() < 1e-9);
        let grid = "t,p,quantile\n1,0,-1\n1,1,1\n2,0,0\n2,0.5,1\n2,1,3\n";
        let fc = read_forecasts(grid.as_bytes()).unwrap();
        assert_eq!(fc.len(), 2);
        assert_eq!(fc[1].quantile(0.75).unwrap(), 2.0);
        assert!(read_forecasts("t,family,param1,param2\n1,cauchy,0,1\n".as_bytes()).is_err());
        assert!(read_forecasts("a,b\n".as_bytes()).is_err());
    }
}
