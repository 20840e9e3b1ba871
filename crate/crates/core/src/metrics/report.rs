use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct MetricEntry {
    /// Metric id, e.g. `cd` or `mmd-emd`.
    pub metric: String,
    /// Subject of the value: a shape name or `set`.
    pub name: String,
    pub value: f64,
    /// Display multiplier applied only when formatting tables.
    pub scale: f64,
}

/// Named metric values plus the parameters they were computed with.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricReport {
    pub entries: Vec<MetricEntry>,
    pub params: BTreeMap<String, f64>,
}

impl MetricReport {
    pub fn new() -> Self {
        MetricReport::default()
    }

    /// Conventional table multiplier for a metric id.
    pub fn default_scale(metric: &str) -> f64 {
        match metric {
            "cd" | "mmd-cd" => 100.0,
            "emd" | "hd" | "mmd-emd" | "kid" => 10.0,
            _ => 1.0,
        }
    }

    pub fn push(&mut self, metric: &str, name: &str, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::Numeric(format!("metric {metric} for {name} is {value}")));
        }
        self.entries.push(MetricEntry {
            metric: metric.into(),
            name: name.into(),
            value,
            scale: Self::default_scale(metric),
        });
        Ok(())
    }

    pub fn param(&mut self, key: &str, value: f64) {
        self.params.insert(key.into(), value);
    }

    pub fn get(&self, metric: &str, name: &str) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.metric == metric && e.name == name)
            .map(|e| e.value)
    }

    /// `metric,name,value,scale` rows; parameters appear as `param` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,name,value,scale\n");
        for (k, v) in &self.params {
            let _ = writeln!(out, "param,{k},{v},1");
        }
        for e in &self.entries {
            let _ = writeln!(out, "{},{},{},{}", e.metric, e.name, e.value, e.scale);
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        Ok(std::fs::write(path, self.to_csv())?)
    }

    /// Aligned table with scaled values.
    pub fn to_table(&self) -> String {
        let wm = self.entries.iter().map(|e| e.metric.len()).chain([6]).max().unwrap_or(6);
        let wn = self.entries.iter().map(|e| e.name.len()).chain([4]).max().unwrap_or(4);
        let mut out = format!("{:<wm$}  {:<wn$}  {:>12}  {:>6}\n", "metric", "name", "value", "scale");
        for e in &self.entries {
            let _ = writeln!(
                out,
                "{:<wm$}  {:<wn$}  {:>12.4}  {:>6}",
                e.metric,
                e.name,
                e.value * e.scale,
                format!("x{}", e.scale)
            );
        }
        for (k, v) in &self.params {
            let _ = writeln!(out, "# {k} = {v}");
        }
        out
    }
}
