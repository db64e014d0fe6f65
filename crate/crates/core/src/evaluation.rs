//! Metrics, per-plot comparisons, tool usage and the ablation matrix.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::agent::CorrectionRecord;
use crate::error::{Error, Result};
use crate::ingest::EntityCollection;
use crate::runner::{build_policy, run_collection, RunConfig};
use crate::scalar::{count, Scalar};
use crate::toolkit::ToolName;
use crate::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricTriple<T> {
    pub mae: T,
    pub rmse: T,
    pub mase: T,
}

/// MAE, RMSE and MASE of `(predicted, actual)` pairs.
pub fn metrics<T: Scalar>(pairs: impl IntoIterator<Item = (T, T)>, naive_scale: T) -> Result<MetricTriple<T>> {
    let (mut abs, mut sq, mut n) = (T::zero(), T::zero(), 0usize);
    for (p, a) in pairs {
        let e = p - a;
        abs = abs + e.abs();
        sq = sq + e * e;
        n += 1;
    }
    if n == 0 {
        return Err(Error::Metric("no predictions to score".into()));
    }
    if !(naive_scale > T::zero()) {
        return Err(Error::Metric(format!("naive scale must be positive, got {naive_scale:?}")));
    }
    let mae = abs / count::<T>(n);
    Ok(MetricTriple { mae, rmse: (sq / count::<T>(n)).sqrt(), mase: mae / naive_scale })
}

/// Pooled in-sample MAE of the lag-1 persistence forecast.
pub fn naive_scale<'a, T: Scalar>(series: impl IntoIterator<Item = &'a [T]>) -> T {
    let (mut sum, mut n) = (T::zero(), 0usize);
    for s in series {
        for w in s.windows(2) {
            sum = sum + (w[1] - w[0]).abs();
            n += 1;
        }
    }
    if n == 0 {
        T::zero()
    } else {
        sum / count::<T>(n)
    }
}

fn scored(records: &[CorrectionRecord]) -> impl Iterator<Item = (&CorrectionRecord, Real)> {
    records.iter().filter_map(|r| r.actual.map(|a| (r, a)))
}

/// Raw and corrected metrics over every record with a known actual.
pub fn metric_pair(
    records: &[CorrectionRecord],
    naive_scale: Real,
) -> Result<(MetricTriple<Real>, MetricTriple<Real>)> {
    let raw = metrics(scored(records).map(|(r, a)| (r.y_raw, a)), naive_scale)?;
    let corrected = metrics(scored(records).map(|(r, a)| (r.y_final, a)), naive_scale)?;
    Ok((raw, corrected))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlotImprovement {
    pub entity_id: String,
    pub predictions: usize,
    pub mae_raw: Real,
    pub mae_corrected: Real,
    /// Percentage reduction in MAE; 0 when the raw MAE is 0.
    pub pct_improvement: Real,
}

/// Per-entity MAE before and after correction, best improvement first.
pub fn per_plot_improvement(records: &[CorrectionRecord]) -> Vec<PlotImprovement> {
    let mut sums: BTreeMap<&str, (Real, Real, usize)> = BTreeMap::new();
    for (r, a) in scored(records) {
        let s = sums.entry(&r.entity_id).or_default();
        s.0 += (r.y_raw - a).abs();
        s.1 += (r.y_final - a).abs();
        s.2 += 1;
    }
    let mut out: Vec<PlotImprovement> = sums
        .into_iter()
        .map(|(id, (raw, corr, n))| {
            let (mae_raw, mae_corrected) = (raw / n as Real, corr / n as Real);
            let pct = if mae_raw > 0.0 { 100.0 * (mae_raw - mae_corrected) / mae_raw } else { 0.0 };
            PlotImprovement { entity_id: id.to_string(), predictions: n, mae_raw, mae_corrected, pct_improvement: pct }
        })
        .collect();
    out.sort_by(|a, b| b.pct_improvement.total_cmp(&a.pct_improvement).then_with(|| a.entity_id.cmp(&b.entity_id)));
    out
}

pub fn per_plot_csv(rows: &[PlotImprovement]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["entity_id", "predictions", "mae_raw", "mae_corrected", "pct_improvement"])?;
    for r in rows {
        w.write_record([
            r.entity_id.clone(),
            r.predictions.to_string(),
            r.mae_raw.to_string(),
            r.mae_corrected.to_string(),
            r.pct_improvement.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToolRate {
    pub tool: ToolName,
    pub predictions: usize,
    /// `None` when no prediction was non-trivial.
    pub rate: Option<Real>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToolUsage {
    pub nontrivial: usize,
    pub rows: Vec<ToolRate>,
}

impl ToolUsage {
    pub fn rate(&self, tool: ToolName) -> Option<Real> {
        self.rows.iter().find(|r| r.tool == tool).and_then(|r| r.rate)
    }

    pub fn to_markdown(&self) -> String {
        let mut s = format!("Tool usage over {} non-trivial predictions\n\n| Tool | Calls | Rate |\n|---|---:|---:|\n", self.nontrivial);
        for r in &self.rows {
            let rate = r.rate.map_or("n/a".to_string(), |v| format!("{:.1}%", 100.0 * v));
            let _ = writeln!(s, "| {} | {} | {} |", r.tool, r.predictions, rate);
        }
        s
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["tool", "predictions", "rate"])?;
        for r in &self.rows {
            w.write_record([r.tool.to_string(), r.predictions.to_string(), r.rate.map_or("n/a".into(), |v| v.to_string())])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Share of non-trivial predictions in which each tool ran.
pub fn tool_usage(records: &[CorrectionRecord]) -> ToolUsage {
    let nontrivial: Vec<_> = records.iter().filter(|r| r.is_nontrivial()).collect();
    let rows = ToolName::ALL
        .into_iter()
        .map(|tool| {
            let predictions = nontrivial.iter().filter(|r| r.tools_run().contains(&tool)).count();
            let rate = (!nontrivial.is_empty()).then(|| predictions as Real / nontrivial.len() as Real);
            ToolRate { tool, predictions, rate }
        })
        .collect();
    ToolUsage { nontrivial: nontrivial.len(), rows }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationMode {
    LeaveOneOut,
    OnlyOne,
}

impl std::str::FromStr for AblationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "leave-one-out" | "loo" => Ok(AblationMode::LeaveOneOut),
            "only-one" | "only" => Ok(AblationMode::OnlyOne),
            other => Err(Error::Argument(format!("unknown ablation mode '{other}'"))),
        }
    }
}

/// Tools toggled together in an ablation. apply_correction is never ablated.
pub fn ablation_units() -> Vec<Vec<ToolName>> {
    use ToolName::*;
    vec![
        vec![FindSimilar],
        vec![LearnBias],
        vec![DetectPhase],
        vec![ValidateRange],
        vec![EvaluateTrajectory, AdjustCorrection],
        vec![VerifyCorrection],
    ]
}

fn unit_label(unit: &[ToolName]) -> String {
    unit.iter().map(|t| t.as_str()).collect::<Vec<_>>().join(" + ")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub condition: String,
    pub disabled: Vec<ToolName>,
    pub metrics: MetricTriple<Real>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationResult {
    pub mode: AblationMode,
    pub dataset: String,
    pub full: MetricTriple<Real>,
    pub baseline: MetricTriple<Real>,
    pub rows: Vec<AblationRow>,
}

impl AblationResult {
    pub fn row(&self, condition: &str) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.condition == condition)
    }

    pub fn to_markdown(&self) -> String {
        let title = match self.mode {
            AblationMode::LeaveOneOut => "Leave-one-out ablation",
            AblationMode::OnlyOne => "Single-tool ablation",
        };
        let mut s = format!("{title} ({})\n\n| Condition | MAE | RMSE | MASE |\n|---|---:|---:|---:|\n", self.dataset);
        let mut line = |name: &str, m: &MetricTriple<Real>| {
            let _ = writeln!(s, "| {name} | {:.4} | {:.4} | {:.4} |", m.mae, m.rmse, m.mase);
        };
        line("full", &self.full);
        for r in &self.rows {
            line(&r.condition, &r.metrics);
        }
        line("baseline", &self.baseline);
        s
    }
}

/// Runs the ablation matrix. Conditions run in parallel, each on its own policy.
pub fn ablate(config: &RunConfig, collection: &EntityCollection, mode: AblationMode) -> Result<AblationResult> {
    let units = ablation_units();
    let all: Vec<ToolName> = units.iter().flatten().copied().collect();
    let mut conditions: Vec<(String, Vec<ToolName>)> = vec![("full".into(), Vec::new())];
    for unit in &units {
        match mode {
            AblationMode::LeaveOneOut => conditions.push((format!("-{}", unit_label(unit)), unit.clone())),
            AblationMode::OnlyOne => conditions.push((
                format!("only {}", unit_label(unit)),
                all.iter().copied().filter(|t| !unit.contains(t)).collect(),
            )),
        }
    }

    let results: Vec<Result<(MetricTriple<Real>, MetricTriple<Real>)>> = std::thread::scope(|scope| {
        let handles: Vec<_> = conditions
            .iter()
            .map(|(_, disabled)| {
                let mut cfg = config.clone();
                cfg.disabled_tools = disabled.clone();
                cfg.output = Default::default();
                scope.spawn(move || -> Result<_> {
                    let mut policy = build_policy(&cfg.policy)?;
                    let report = run_collection(&cfg, collection, policy.as_mut())?;
                    metric_pair(&report.records, report.summary.naive_scale)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("ablation condition panicked")).collect()
    });

    let mut rows = Vec::new();
    let mut full = None;
    for ((name, disabled), res) in conditions.into_iter().zip(results) {
        let (raw, corrected) = res?;
        if name == "full" {
            full = Some((raw, corrected));
        } else {
            rows.push(AblationRow { condition: name, disabled, metrics: corrected });
        }
    }
    let (baseline, full) = full.expect("full condition always runs");
    Ok(AblationResult { mode, dataset: collection.dataset_name.clone(), full, baseline, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn perfect_forecast_scores_zero() {
        let m = metrics([(1.0, 1.0), (2.0, 2.0)], 1.0).unwrap();
        assert_eq!(m, MetricTriple { mae: 0.0, rmse: 0.0, mase: 0.0 });
    }

    #[test]
    fn unit_errors_with_scale_two() {
        let m = metrics([(1.0, 0.0), (3.0, 2.0), (0.0, 1.0)], 2.0).unwrap();
        assert_abs_diff_eq!(m.mae, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.rmse, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.mase, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn zero_and_two_errors() {
        let m = metrics([(1.0f32, 1.0), (2.0, 0.0)], 1.0).unwrap();
        assert_abs_diff_eq!(m.mae, 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(m.rmse, 2.0f32.sqrt(), epsilon = 1e-6);
    }

    #[test]
    fn empty_is_an_error() {
        assert!(matches!(metrics::<f64>([], 1.0), Err(Error::Metric(_))));
    }

    #[test]
    fn persistence_forecast_has_unit_mase() {
        let s = [1.0, 3.0, 2.0, 6.0];
        let scale = naive_scale([&s[..]]);
        let m = metrics(s.windows(2).map(|w| (w[0], w[1])), scale).unwrap();
        assert_abs_diff_eq!(m.mase, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn ablation_units_cover_all_but_apply() {
        let mut tools: Vec<ToolName> = ablation_units().into_iter().flatten().collect();
        tools.sort();
        let expected: Vec<ToolName> = ToolName::ALL.into_iter().filter(|t| *t != ToolName::ApplyCorrection).collect();
        let mut expected = expected;
        expected.sort();
        assert_eq!(tools, expected);
    }

    #[test]
    fn mode_parses() {
        assert_eq!("leave-one-out".parse::<AblationMode>().unwrap(), AblationMode::LeaveOneOut);
        assert_eq!("only_one".parse::<AblationMode>().unwrap(), AblationMode::OnlyOne);
        assert!("sideways".parse::<AblationMode>().is_err());
    }

    proptest! {
        #[test]
        fn rmse_dominates_mae(pairs in prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64), 1..40)) {
            let m = metrics(pairs, 1.0).unwrap();
            prop_assert!(m.mae >= 0.0);
            prop_assert!(m.rmse + 1e-12 >= m.mae);
        }

        #[test]
        fn mae_is_weighted_over_concatenation(
            a in prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 1..20),
            b in prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 1..20),
        ) {
            let ma = metrics(a.clone(), 1.0).unwrap().mae;
            let mb = metrics(b.clone(), 1.0).unwrap().mae;
            let n = (a.len() + b.len()) as f64;
            let all = metrics(a.iter().chain(&b).copied(), 1.0).unwrap().mae;
            prop_assert!((all - (ma * a.len() as f64 + mb * b.len() as f64) / n).abs() < 1e-9);
        }
    }
}
