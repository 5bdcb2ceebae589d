use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::metrics::pck_auc;
use crate::error::{Error, Result};

/// Per-sample evaluation outcome feeding a [`MetricReport`].
#[derive(Clone, Debug, PartialEq)]
pub struct SampleResult {
    pub action: String,
    pub joint_errors: Vec<f64>,
    pub pa_mpjpe: f64,
    pub decile: Option<usize>,
}

impl SampleResult {
    pub fn mpjpe(&self) -> f64 {
        self.joint_errors.iter().sum::<f64>() / self.joint_errors.len() as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub name: String,
    pub slice: String,
    pub value: f64,
    pub count: usize,
}

/// Metrics for the whole test set and for its action and rareness slices.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub rows: Vec<MetricRow>,
}

pub const CSV_HEADER: &str = "name,slice,value,count";

fn mean(v: impl Iterator<Item = f64>) -> (f64, usize) {
    let (s, n) = v.fold((0.0, 0), |(s, n), x| (s + x, n + 1));
    (s / n.max(1) as f64, n)
}

impl MetricReport {
    pub fn compute(results: &[SampleResult]) -> Result<Self> {
        if results.is_empty() {
            return Err(Error::Invalid(
                "nothing to report: no evaluated samples".into(),
            ));
        }
        let mut rows = Vec::new();
        let mut push = |name: &str, slice: String, value: f64, count: usize| {
            rows.push(MetricRow {
                name: name.into(),
                slice,
                value,
                count,
            })
        };
        let (m, n) = mean(results.iter().map(SampleResult::mpjpe));
        push("mpjpe", "overall".into(), m, n);
        let (pa, _) = mean(results.iter().map(|r| r.pa_mpjpe));
        push("pa_mpjpe", "overall".into(), pa, n);
        let all_errors: Vec<f64> = results
            .iter()
            .flat_map(|r| r.joint_errors.iter().copied())
            .collect();
        let (pck, auc) = pck_auc(&all_errors)?;
        push("pck150", "overall".into(), pck, n);
        push("auc", "overall".into(), auc, n);

        let mut by_action: BTreeMap<&str, Vec<&SampleResult>> = BTreeMap::new();
        for r in results {
            by_action.entry(&r.action).or_default().push(r);
        }
        for (action, rs) in &by_action {
            let (m, n) = mean(rs.iter().map(|r| r.mpjpe()));
            push("mpjpe", format!("action:{action}"), m, n);
            let (pa, _) = mean(rs.iter().map(|r| r.pa_mpjpe));
            push("pa_mpjpe", format!("action:{action}"), pa, n);
        }
        let mut by_decile: BTreeMap<usize, Vec<&SampleResult>> = BTreeMap::new();
        for r in results {
            if let Some(d) = r.decile {
                by_decile.entry(d).or_default().push(r);
            }
        }
        for (d, rs) in &by_decile {
            let (m, n) = mean(rs.iter().map(|r| r.mpjpe()));
            push("mpjpe", format!("decile:{d}"), m, n);
        }
        Ok(Self { rows })
    }

    pub fn get(&self, name: &str, slice: &str) -> Option<&MetricRow> {
        self.rows
            .iter()
            .find(|r| r.name == name && r.slice == slice)
    }

    pub fn mpjpe(&self) -> f64 {
        self.get("mpjpe", "overall").map_or(f64::NAN, |r| r.value)
    }

    pub fn total(&self) -> usize {
        self.get("mpjpe", "overall").map_or(0, |r| r.count)
    }

    /// Rows whose slice starts with `prefix`, e.g. `"action:"`.
    pub fn slices<'a>(
        &'a self,
        name: &'a str,
        prefix: &'a str,
    ) -> impl Iterator<Item = &'a MetricRow> {
        self.rows
            .iter()
            .filter(move |r| r.name == name && r.slice.starts_with(prefix))
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for r in &self.rows {
            writeln!(s, "{},{},{},{}", r.name, r.slice, r.value, r.count).expect("write to string");
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == CSV_HEADER => {}
            _ => {
                return Err(Error::Parse {
                    line: 1,
                    msg: format!("expected header {CSV_HEADER:?}"),
                })
            }
        }
        let mut rows = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |msg: &str| Error::Parse {
                line: i + 1,
                msg: msg.into(),
            };
            // slice labels may contain commas; value and count never do
            let mut parts = line.rsplitn(3, ',');
            let count = parts.next().ok_or_else(|| bad("missing count"))?;
            let value = parts.next().ok_or_else(|| bad("missing value"))?;
            let head = parts.next().ok_or_else(|| bad("missing name"))?;
            let (name, slice) = head.split_once(',').ok_or_else(|| bad("missing slice"))?;
            rows.push(MetricRow {
                name: name.into(),
                slice: slice.into(),
                value: value.parse().map_err(|_| bad("value is not a number"))?,
                count: count.parse().map_err(|_| bad("count is not an integer"))?,
            });
        }
        Ok(Self { rows })
    }

    pub fn to_table(&self) -> String {
        let w = self
            .rows
            .iter()
            .map(|r| r.slice.len())
            .max()
            .unwrap_or(5)
            .max(5);
        let mut s = format!(
            "{:<9} {:<w$} {:>12} {:>8}\n",
            "metric", "slice", "value", "count"
        );
        for r in &self.rows {
            writeln!(
                s,
                "{:<9} {:<w$} {:>12.4} {:>8}",
                r.name, r.slice, r.value, r.count
            )
            .expect("write to string");
        }
        s
    }
}
