//! CSV and key/value file formats. Floats are written with Rust's shortest
//! round-trip formatting, so parsing a written file restores every value
//! bit for bit.

use std::fmt::Display;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use cbo_core::MetricsRecord;

use crate::CliError;

const BALL_PREFIX: &str = "ball_mass_";

pub fn metrics_header(radii: &[f64]) -> Vec<String> {
    let mut h: Vec<String> = ["t", "v_func", "variance", "w2_sq", "consensus_dist"]
        .map(String::from)
        .into();
    h.extend(radii.iter().map(|r| format!("{BALL_PREFIX}{r}")));
    h.push("moment4".into());
    h
}

pub fn write_metrics<W: Write>(out: W, records: &[MetricsRecord], radii: &[f64]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(metrics_header(radii))?;
    for r in records {
        let mut row = vec![
            r.t.to_string(),
            r.v_func.to_string(),
            r.variance.to_string(),
            r.w2_sq.to_string(),
            r.consensus_dist.to_string(),
        ];
        row.extend(r.ball_mass.iter().map(|(_, m)| m.to_string()));
        row.push(r.moment4.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_metrics<R: Read>(input: R) -> Result<Vec<MetricsRecord>, CliError> {
    let mut rd = csv::Reader::from_reader(input);
    let header = rd.headers()?.clone();
    let cols: Vec<&str> = header.iter().collect();
    let n = cols.len();
    if n < 6 || cols[..5] != ["t", "v_func", "variance", "w2_sq", "consensus_dist"] || cols[n - 1] != "moment4" {
        return Err(CliError::Format(format!(
            "unexpected metrics header: {}",
            cols.join(",")
        )));
    }
    let radii = cols[5..n - 1]
        .iter()
        .map(|c| {
            c.strip_prefix(BALL_PREFIX)
                .and_then(|r| r.parse::<f64>().ok())
                .ok_or_else(|| CliError::Format(format!("bad ball-mass column '{c}'")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = Vec::new();
    for row in rd.records() {
        let row = row?;
        let v = row
            .iter()
            .map(|x| x.parse::<f64>().map_err(|e| CliError::Format(format!("'{x}': {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        if v.len() != n {
            return Err(CliError::Format(format!("row has {} fields, expected {n}", v.len())));
        }
        out.push(MetricsRecord {
            t: v[0],
            v_func: v[1],
            variance: v[2],
            w2_sq: v[3],
            consensus_dist: v[4],
            ball_mass: radii.iter().copied().zip(v[5..n - 1].iter().copied()).collect(),
            moment4: v[n - 1],
        });
    }
    Ok(out)
}

pub fn write_metrics_file(path: &Path, records: &[MetricsRecord], radii: &[f64]) -> Result<(), CliError> {
    let f = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    write_metrics(std::io::BufWriter::new(f), records, radii)
}

pub fn read_metrics_file(path: &Path) -> Result<Vec<MetricsRecord>, CliError> {
    let f = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    read_metrics(std::io::BufReader::new(f))
}

/// Ordered `key=value` lines.
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Summary {
    entries: Vec<(String, String)>,
}

impl Summary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, key: impl Into<String>, value: impl Display) -> &mut Self {
        self.entries.push((key.into(), value.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn render(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn parse(text: &str) -> Self {
        let entries = text
            .lines()
            .filter_map(|l| l.split_once('='))
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        Self { entries }
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        fs::write(path, self.render()).map_err(|e| CliError::io(path, e))
    }
}

/// Writes rows of displayable cells under `header`.
pub fn write_table<I, R>(path: &Path, header: &[&str], rows: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: Display,
{
    let f = fs::File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(f));
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.into_iter().map(|c| c.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(t: f64) -> MetricsRecord {
        MetricsRecord {
            t,
            v_func: 0.1 + t,
            variance: 1.0 / 3.0,
            w2_sq: 2.0 * (0.1 + t),
            consensus_dist: 1e-300,
            ball_mass: vec![(0.1, 0.25), (1.5, 1.0)],
            moment4: 12345.678901234567,
        }
    }

    #[test]
    fn header_layout() {
        assert_eq!(
            metrics_header(&[0.1, 2.0]).join(","),
            "t,v_func,variance,w2_sq,consensus_dist,ball_mass_0.1,ball_mass_2,moment4"
        );
    }

    #[test]
    fn round_trip_is_exact() {
        let recs: Vec<_> = (0..4).map(|k| record(k as f64 * 0.01)).collect();
        let mut buf = Vec::new();
        write_metrics(&mut buf, &recs, &[0.1, 1.5]).unwrap();
        assert_eq!(read_metrics(&buf[..]).unwrap(), recs);
    }

    #[test]
    fn rejects_foreign_header() {
        assert!(read_metrics("a,b\n1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn summary_round_trip() {
        let mut s = Summary::new();
        s.add("rate", 1.75).add("note", "a=b");
        let back = Summary::parse(&s.render());
        assert_eq!(back, s);
        assert_eq!(back.get("rate"), Some("1.75"));
    }
}
