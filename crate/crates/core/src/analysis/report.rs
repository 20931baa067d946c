//! Analysis reports and their JSON / CSV forms.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Constant,
    NonConstant,
    Inconclusive,
}

impl Verdict {
    /// `Constant` when `deviation <= tol * max(1, |reference|)`, `NonConstant`
    /// when `spread > fail * max(1, |reference|)`, otherwise `Inconclusive`.
    pub fn judge(deviation: f64, spread: f64, reference: f64, tol: f64, fail: f64) -> Self {
        let scale = reference.abs().max(1.0);
        if deviation <= tol * scale {
            Verdict::Constant
        } else if spread > fail * scale {
            Verdict::NonConstant
        } else {
            Verdict::Inconclusive
        }
    }

    /// `NonConstant` if any part is, else `Inconclusive` if any part is.
    pub fn combine(parts: &[Verdict]) -> Self {
        if parts.contains(&Verdict::NonConstant) {
            Verdict::NonConstant
        } else if parts.contains(&Verdict::Inconclusive) {
            Verdict::Inconclusive
        } else {
            Verdict::Constant
        }
    }

    pub fn describe(&self) -> &'static str {
        match self {
            Verdict::Constant => "constant",
            Verdict::NonConstant => "non-constant",
            Verdict::Inconclusive => "inconclusive",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        match text.trim().to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "constant" => Some(Verdict::Constant),
            "nonconstant" => Some(Verdict::NonConstant),
            "inconclusive" => Some(Verdict::Inconclusive),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WitnessEntry {
    pub label: String,
    pub sequence: Vec<f64>,
    pub value: f64,
    /// Exact rational value when available, e.g. `8/155`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact: Option<String>,
}

/// The two evaluations that realize the largest discrepancy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub first: WitnessEntry,
    pub second: WitnessEntry,
}

/// Values of a quantity over a grid, with a constancy verdict.
///
/// Invariant: `verdict == Constant` iff
/// `max_abs_deviation <= tolerance_used * max(1, |reference_value|)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub label: String,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub deviations: Vec<f64>,
    pub max_abs_deviation: f64,
    pub reference_value: f64,
    pub verdict: Verdict,
    pub tolerance_used: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
}

impl AnalysisReport {
    /// Report with explicit per-point deviations from `reference`.
    pub fn new(
        label: impl Into<String>,
        grid: Vec<f64>,
        values: Vec<f64>,
        reference: f64,
        deviations: Vec<f64>,
        tol: f64,
        fail: f64,
    ) -> Self {
        let max_abs_deviation = deviations.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        let max_abs_deviation = if deviations.iter().any(|d| d.is_nan()) {
            f64::NAN
        } else {
            max_abs_deviation
        };
        let (lo, hi) = values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let spread = if values.is_empty() { 0.0 } else { hi - lo };
        let spread = spread.max(max_abs_deviation);
        let verdict = if max_abs_deviation.is_nan() {
            Verdict::Inconclusive
        } else {
            Verdict::judge(max_abs_deviation, spread, reference, tol, fail)
        };
        Self {
            label: label.into(),
            grid,
            values,
            deviations,
            max_abs_deviation,
            reference_value: reference,
            verdict,
            tolerance_used: tol,
            witness: None,
        }
    }

    /// Report whose reference is the mean of `values`.
    pub fn about_mean(label: impl Into<String>, grid: Vec<f64>, values: Vec<f64>, tol: f64, fail: f64) -> Self {
        let reference = values.iter().sum::<f64>() / values.len().max(1) as f64;
        let deviations = values.iter().map(|v| v - reference).collect();
        Self::new(label, grid, values, reference, deviations, tol, fail)
    }

    pub fn with_witness(mut self, witness: Option<Witness>) -> Self {
        self.witness = witness;
        self
    }

    /// `(max - min) / max(1, |reference|)`
    pub fn relative_spread(&self) -> f64 {
        let (lo, hi) = self
            .values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        (hi - lo) / self.reference_value.abs().max(1.0)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidSpec(format!("bad report JSON: {e}")))
    }

    /// CSV with columns `point,value,deviation`. Scalar fields precede the
    /// table as `# key: value` lines. Floats carry 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# label: {}", self.label);
        let _ = writeln!(out, "# reference_value: {}", fmt17(self.reference_value));
        let _ = writeln!(out, "# max_abs_deviation: {}", fmt17(self.max_abs_deviation));
        let _ = writeln!(out, "# tolerance_used: {}", fmt17(self.tolerance_used));
        let _ = writeln!(out, "# verdict: {}", self.verdict.describe());
        if let Some(w) = &self.witness {
            let _ = writeln!(out, "# witness: {}", serde_json::to_string(w).expect("witness serializes"));
        }
        out.push_str("point,value,deviation\n");
        for ((p, v), d) in self.grid.iter().zip(&self.values).zip(&self.deviations) {
            let _ = writeln!(out, "{},{},{}", fmt17(*p), fmt17(*v), fmt17(*d));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::InvalidSpec(format!("bad report CSV: {msg}"));
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad(format!("`{s}` is not a number")));
        let mut report = Self {
            label: String::new(),
            grid: vec![],
            values: vec![],
            deviations: vec![],
            max_abs_deviation: f64::NAN,
            reference_value: f64::NAN,
            verdict: Verdict::Inconclusive,
            tolerance_used: f64::NAN,
            witness: None,
        };
        let mut header_seen = false;
        for line in text.lines() {
            if let Some(meta) = line.strip_prefix("# ") {
                let (key, value) = meta.split_once(": ").ok_or_else(|| bad(format!("metadata `{meta}`")))?;
                match key {
                    "label" => report.label = value.to_string(),
                    "reference_value" => report.reference_value = num(value)?,
                    "max_abs_deviation" => report.max_abs_deviation = num(value)?,
                    "tolerance_used" => report.tolerance_used = num(value)?,
                    "verdict" => {
                        report.verdict = Verdict::parse(value).ok_or_else(|| bad(format!("verdict `{value}`")))?
                    }
                    "witness" => {
                        report.witness =
                            Some(serde_json::from_str(value).map_err(|e| bad(format!("witness: {e}")))?)
                    }
                    _ => return Err(bad(format!("unknown key `{key}`"))),
                }
            } else if line == "point,value,deviation" {
                header_seen = true;
            } else if !line.trim().is_empty() {
                if !header_seen {
                    return Err(bad("rows before the header".into()));
                }
                let cols: Vec<&str> = line.split(',').collect();
                if cols.len() != 3 {
                    return Err(bad(format!("row `{line}`")));
                }
                report.grid.push(num(cols[0])?);
                report.values.push(num(cols[1])?);
                report.deviations.push(num(cols[2])?);
            }
        }
        if !header_seen {
            return Err(bad("missing header".into()));
        }
        Ok(report)
    }
}

/// 17 significant digits, enough to reproduce any `f64` exactly.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_invariant() {
        let r = AnalysisReport::about_mean("x", vec![1.0, 2.0], vec![3.0, 3.0 + 1e-9], 1e-6, 1e-2);
        assert_eq!(r.verdict, Verdict::Constant);
        let r = AnalysisReport::about_mean("x", vec![1.0, 2.0], vec![3.0, 3.1], 1e-6, 1e-2);
        assert_eq!(r.verdict, Verdict::NonConstant);
        let r = AnalysisReport::about_mean("x", vec![1.0, 2.0], vec![3.0, 3.0003], 1e-6, 1e-2);
        assert_eq!(r.verdict, Verdict::Inconclusive);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let values = vec![0.1 + 0.2, std::f64::consts::PI, -1e-300, 12345.678901234567];
        let mut r = AnalysisReport::about_mean("demo: a, b", vec![0.5, 1.0, 2.0, 1e10], values, 1e-4, 1e-2);
        r.witness = Some(Witness {
            first: WitnessEntry {
                label: "a".into(),
                sequence: vec![1.0, 0.0],
                value: 0.05,
                exact: Some("1/20".into()),
            },
            second: WitnessEntry {
                label: "b".into(),
                sequence: vec![0.0, 1.0],
                value: 1.0 / 3.0,
                exact: None,
            },
        });
        assert_eq!(AnalysisReport::from_csv(&r.to_csv()).unwrap(), r);
        assert_eq!(AnalysisReport::from_json(&r.to_json()).unwrap(), r);
    }
}
