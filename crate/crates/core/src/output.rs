//! Result rows in CSV and JSON-lines form.
//!
//! CSV column order:
//!
//! ```text
//! scheme, n_users, q_req_watts, nu, avg_sum_rate_bpcu, avg_sum_harvest_watts,
//! jain_index, per_user_rate_0 .. per_user_rate_{N-1},
//! access_freq_0 .. access_freq_{N-1}, feasible_flag
//! ```
//!
//! With [`RateUnit::BitsPerSecond`] every rate is multiplied by the bandwidth
//! and the sum-rate column is named `avg_sum_rate_bps`. Missing values
//! (no `q_req`/`nu` for order-based schemes, no statistics for infeasible
//! points) are empty cells. Floats are written in shortest round-trip form.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulator::{RunStatistics, SweepPoint};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RateUnit {
    BitsPerChannelUse,
    BitsPerSecond { bandwidth_hz: f64 },
}

impl RateUnit {
    fn factor(self) -> f64 {
        match self {
            RateUnit::BitsPerChannelUse => 1.0,
            RateUnit::BitsPerSecond { bandwidth_hz } => bandwidth_hz,
        }
    }

    fn column(self) -> &'static str {
        match self {
            RateUnit::BitsPerChannelUse => "avg_sum_rate_bpcu",
            RateUnit::BitsPerSecond { .. } => "avg_sum_rate_bps",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub scheme: String,
    pub n_users: usize,
    pub q_req_watts: Option<f64>,
    pub nu: Option<f64>,
    pub avg_sum_rate: Option<f64>,
    pub avg_sum_harvest_watts: Option<f64>,
    pub jain_index: Option<f64>,
    pub per_user_rate: Vec<f64>,
    pub access_freq: Vec<f64>,
    pub feasible_flag: bool,
}

impl ResultRow {
    pub fn from_stats(
        scheme: impl Into<String>,
        q_req: Option<f64>,
        nu: Option<f64>,
        stats: &RunStatistics,
        unit: RateUnit,
    ) -> Self {
        let k = unit.factor();
        Self {
            scheme: scheme.into(),
            n_users: stats.per_user_rate.len(),
            q_req_watts: q_req,
            nu,
            avg_sum_rate: Some(stats.avg_sum_rate * k),
            avg_sum_harvest_watts: Some(stats.avg_sum_harvest),
            jain_index: Some(stats.jain_index),
            per_user_rate: stats.per_user_rate.iter().map(|r| r * k).collect(),
            access_freq: stats.access_freq.clone(),
            feasible_flag: true,
        }
    }

    pub fn from_sweep_point(
        scheme: impl Into<String>,
        n_users: usize,
        point: &SweepPoint,
        unit: RateUnit,
    ) -> Self {
        let scheme = scheme.into();
        match (&point.stats, &point.duals) {
            (Some(stats), duals) => Self::from_stats(
                scheme,
                Some(point.q_req),
                duals.as_ref().map(|d| d.nu),
                stats,
                unit,
            ),
            (None, _) => Self {
                scheme,
                n_users,
                q_req_watts: Some(point.q_req),
                nu: None,
                avg_sum_rate: None,
                avg_sum_harvest_watts: None,
                jain_index: None,
                per_user_rate: Vec::new(),
                access_freq: Vec::new(),
                feasible_flag: false,
            },
        }
    }
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

fn header(n_users: usize, unit: RateUnit) -> Vec<String> {
    let mut h: Vec<String> = ["scheme", "n_users", "q_req_watts", "nu", unit.column()]
        .iter()
        .map(|s| s.to_string())
        .collect();
    h.push("avg_sum_harvest_watts".into());
    h.push("jain_index".into());
    h.extend((0..n_users).map(|n| format!("per_user_rate_{n}")));
    h.extend((0..n_users).map(|n| format!("access_freq_{n}")));
    h.push("feasible_flag".into());
    h
}

pub fn write_csv<W: Write>(rows: &[ResultRow], unit: RateUnit, out: W) -> Result<()> {
    let n_users = rows.first().map_or(0, |r| r.n_users);
    if let Some(bad) = rows.iter().find(|r| r.n_users != n_users) {
        return Err(Error::Dimension {
            expected: n_users,
            got: bad.n_users,
        });
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(n_users, unit))?;
    for r in rows {
        let mut rec = vec![
            r.scheme.clone(),
            r.n_users.to_string(),
            cell(r.q_req_watts),
            cell(r.nu),
            cell(r.avg_sum_rate),
            cell(r.avg_sum_harvest_watts),
            cell(r.jain_index),
        ];
        for n in 0..n_users {
            rec.push(cell(r.per_user_rate.get(n).copied()));
        }
        for n in 0..n_users {
            rec.push(cell(r.access_freq.get(n).copied()));
        }
        rec.push(r.feasible_flag.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_jsonl<W: Write>(rows: &[ResultRow], mut out: W) -> Result<()> {
    for r in rows {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

fn parse_opt(s: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        Ok(None)
    } else {
        s.parse::<f64>()
            .map(Some)
            .map_err(|e| Error::Config(format!("bad number `{s}`: {e}")))
    }
}

/// Parses a CSV file written by [`write_csv`]. Rates are returned in the unit
/// they were written in.
pub fn read_csv<R: Read>(input: R) -> Result<Vec<ResultRow>> {
    let mut rdr = csv::Reader::from_reader(input);
    let n_users = rdr
        .headers()?
        .iter()
        .filter(|h| h.starts_with("per_user_rate_"))
        .count();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let get = |i: usize| rec.get(i).unwrap_or("");
        let vec_at = |start: usize| -> Result<Vec<f64>> {
            let vals: Vec<Option<f64>> = (start..start + n_users)
                .map(|i| parse_opt(get(i)))
                .collect::<Result<_>>()?;
            Ok(vals.into_iter().flatten().collect())
        };
        rows.push(ResultRow {
            scheme: get(0).to_string(),
            n_users: get(1)
                .parse()
                .map_err(|e| Error::Config(format!("bad n_users: {e}")))?,
            q_req_watts: parse_opt(get(2))?,
            nu: parse_opt(get(3))?,
            avg_sum_rate: parse_opt(get(4))?,
            avg_sum_harvest_watts: parse_opt(get(5))?,
            jain_index: parse_opt(get(6))?,
            per_user_rate: vec_at(7)?,
            access_freq: vec_at(7 + n_users)?,
            feasible_flag: get(7 + 2 * n_users) == "true",
        });
    }
    Ok(rows)
}

pub fn read_jsonl<R: Read>(input: R) -> Result<Vec<ResultRow>> {
    let text = {
        let mut s = String::new();
        let mut input = input;
        input.read_to_string(&mut s)?;
        s
    };
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| Ok(serde_json::from_str(l)?))
        .collect()
}
