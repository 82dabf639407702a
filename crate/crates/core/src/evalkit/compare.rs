//! Evaluating predictors against ground truth and assembling the report.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{box_stats, iqr, BoxStats};
use super::signif::signif_lower;
use super::{EvalError, Result};
use crate::plannet::Variant;
use crate::seed;
use crate::simcore::{simulate, FlowKpis, Kpi, MeanKpis};
use crate::trainer::{Dataset, Ensemble};

/// Minimum number of pooled pairs for the significance test to run.
const MIN_SIGNIF_PAIRS: usize = 10;

#[derive(Debug, Clone)]
pub enum PredictorKind {
    /// Returns the ground truth itself.
    GroundTruth,
    /// Mean over `runs` fresh simulator replays of the scenario.
    SimAvg { runs: usize },
    /// Trained ensemble; only scores its own KPI.
    Model(Ensemble),
}

#[derive(Debug, Clone)]
pub struct Predictor {
    pub name: String,
    pub kind: PredictorKind,
}

impl Predictor {
    pub fn ground_truth() -> Self {
        Self { name: "ground-truth".into(), kind: PredictorKind::GroundTruth }
    }

    pub fn sim_avg(runs: usize) -> Self {
        Self { name: format!("sim-avg-{runs}"), kind: PredictorKind::SimAvg { runs } }
    }

    pub fn model(name: impl Into<String>, ensemble: Ensemble) -> Self {
        Self { name: name.into(), kind: PredictorKind::Model(ensemble) }
    }

    fn scores(&self, kpi: Kpi) -> bool {
        match &self.kind {
            PredictorKind::Model(e) => e.kpi() == kpi,
            _ => true,
        }
    }
}

/// A labelled test set; metrics never pool across groups.
#[derive(Debug, Clone, Copy)]
pub struct EvalGroup<'a> {
    pub label: &'a str,
    pub dataset: &'a Dataset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub method: String,
    pub kpi: Kpi,
    pub group: String,
    pub nmae_mean: f64,
    pub nmae_sd: f64,
    pub mae_mean: f64,
    pub mae_sd: f64,
    pub n: usize,
    /// Methods whose errors this one is significantly lower than.
    pub significant_vs: Vec<String>,
    /// Pooled absolute errors in (sample, path) order.
    #[serde(skip)]
    pub errors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxRow {
    pub method: String,
    pub kpi: Kpi,
    pub group: String,
    #[serde(flatten)]
    pub stats: BoxStats,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricReport {
    pub rows: Vec<ReportRow>,
    pub boxes: Vec<BoxRow>,
    /// Skipped predictors and groups, with the reason.
    pub notes: Vec<String>,
}

fn sample_std(values: &[f64], mean: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (values.len() - 1) as f64).sqrt()
}

/// Replays for every sample: run `r` uses seed `derive_seed(sample, "replay") + r`,
/// so the ground-truth run itself is never reused and a K-run average is a
/// prefix of a (K+1)-run one.
fn replays(dataset: &Dataset, runs: usize) -> Result<Vec<Vec<Vec<FlowKpis>>>> {
    let sim = dataset.meta.generator.sim_config();
    dataset
        .samples
        .par_iter()
        .map(|s| {
            let base = seed::derive_seed(s.seed, "replay");
            (0..runs as u64)
                .map(|r| {
                    let cfg = sim.clone().with_seed(base.wrapping_add(r));
                    simulate(&s.scenario.graph, &s.scenario.paths, &s.scenario.traffic, &cfg).map_err(EvalError::from)
                })
                .collect()
        })
        .collect()
}

/// Evaluates every predictor on every group and KPI. Predictors that cannot
/// run on a group are omitted from that group with a note.
pub fn compare(groups: &[EvalGroup], predictors: &[Predictor], kpis: &[Kpi], alpha: f64) -> Result<MetricReport> {
    if predictors.is_empty() {
        return Err(EvalError::InvalidArgument("no predictors to compare".into()));
    }
    let mut report = MetricReport::default();
    for group in groups {
        let data = group.dataset;
        let max_runs = predictors
            .iter()
            .filter_map(|p| match p.kind {
                PredictorKind::SimAvg { runs } => Some(runs),
                _ => None,
            })
            .max()
            .unwrap_or(0);
        if predictors.iter().any(|p| matches!(p.kind, PredictorKind::SimAvg { runs: 0 })) {
            return Err(EvalError::InvalidArgument("simulator averaging needs at least one run".into()));
        }
        let cache = if max_runs > 0 { replays(data, max_runs)? } else { Vec::new() };
        let scenarios = data.scenarios();

        for &kpi in kpis {
            let mut active: Vec<(&Predictor, Vec<Vec<Option<f64>>>)> = Vec::new();
            for p in predictors.iter().filter(|p| p.scores(kpi)) {
                let preds = match &p.kind {
                    PredictorKind::GroundTruth => {
                        data.samples.iter().map(|s| s.kpis.iter().map(|k| kpi.of(k)).collect()).collect()
                    }
                    PredictorKind::SimAvg { runs } => cache
                        .iter()
                        .map(|sample_runs| {
                            (0..sample_runs[0].len())
                                .map(|f| {
                                    let runs: Vec<&FlowKpis> = sample_runs[..*runs].iter().map(|r| &r[f]).collect();
                                    kpi.of_mean(&MeanKpis::average(&runs))
                                })
                                .collect()
                        })
                        .collect(),
                    PredictorKind::Model(ensemble) => {
                        if ensemble.variant() == Variant::GenericGnn {
                            let width = ensemble.members()[0].model.config().gnn_paths;
                            if scenarios.iter().any(|s| s.path_count() != width) {
                                let note = format!(
                                    "{}: skipped on group {}: generic_gnn has a fixed output width of {width} paths",
                                    p.name, group.label
                                );
                                warn!("{note}");
                                report.notes.push(note);
                                continue;
                            }
                        }
                        match ensemble.predict(&scenarios) {
                            Ok(y) => y.into_iter().map(|row| row.into_iter().map(Some).collect()).collect(),
                            Err(e) => {
                                let note = format!("{}: skipped on group {}: {e}", p.name, group.label);
                                warn!("{note}");
                                report.notes.push(note);
                                continue;
                            }
                        }
                    }
                };
                active.push((p, preds));
            }
            score_group(&mut report, group.label, kpi, data, &active, alpha)?;
        }
    }
    Ok(report)
}

fn score_group(
    report: &mut MetricReport,
    label: &str,
    kpi: Kpi,
    data: &Dataset,
    active: &[(&Predictor, Vec<Vec<Option<f64>>>)],
    alpha: f64,
) -> Result<()> {
    if active.is_empty() {
        return Ok(());
    }
    // Listwise: a (sample, path) pair counts only when the truth and every
    // predictor are defined there, so all methods share one pair set.
    let mut truth = Vec::new();
    let mut errors: Vec<Vec<f64>> = vec![Vec::new(); active.len()];
    for (i, s) in data.samples.iter().enumerate() {
        for (f, k) in s.kpis.iter().enumerate() {
            let Some(t) = kpi.of(k) else { continue };
            let preds: Option<Vec<f64>> = active.iter().map(|(_, p)| p[i][f]).collect();
            let Some(preds) = preds else { continue };
            truth.push(t);
            for (e, y) in errors.iter_mut().zip(preds) {
                e.push((t - y).abs());
            }
        }
    }
    let spread = match iqr(&truth) {
        Ok(s) if s > 0.0 => s,
        Ok(_) => {
            report.notes.push(format!("{kpi} on group {label}: ground truth has zero IQR, not scored"));
            return Ok(());
        }
        Err(e) => {
            report.notes.push(format!("{kpi} on group {label}: {e}"));
            return Ok(());
        }
    };
    for (m, (p, _)) in active.iter().enumerate() {
        let e = &errors[m];
        let mae_mean = e.iter().sum::<f64>() / e.len() as f64;
        let mae_sd = sample_std(e, mae_mean);
        let mut significant_vs = Vec::new();
        if e.len() >= MIN_SIGNIF_PAIRS {
            for (o, (q, _)) in active.iter().enumerate() {
                if o != m && signif_lower(e, &errors[o], alpha)? {
                    significant_vs.push(q.name.clone());
                }
            }
        }
        report.rows.push(ReportRow {
            method: p.name.clone(),
            kpi,
            group: label.to_string(),
            nmae_mean: mae_mean / spread,
            nmae_sd: mae_sd / spread,
            mae_mean,
            mae_sd,
            n: e.len(),
            significant_vs,
            errors: e.clone(),
        });
        report.boxes.push(BoxRow { method: p.name.clone(), kpi, group: label.to_string(), stats: box_stats(e)? });
    }
    Ok(())
}

fn csv_string(write: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    write(&mut w).expect("in-memory CSV write");
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV is UTF-8")
}

fn join(values: impl IntoIterator<Item = impl ToString>) -> String {
    values.into_iter().map(|v| v.to_string()).collect::<Vec<_>>().join(";")
}

impl MetricReport {
    pub fn row(&self, method: &str, kpi: Kpi, group: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.method == method && r.kpi == kpi && r.group == group)
    }

    /// `method,kpi,group,nmae_mean,nmae_sd,mae_mean,mae_sd,n,significant_vs`,
    /// with the significance list `;`-separated.
    pub fn to_csv(&self) -> String {
        csv_string(|w| {
            w.write_record(["method", "kpi", "group", "nmae_mean", "nmae_sd", "mae_mean", "mae_sd", "n", "significant_vs"])?;
            for r in &self.rows {
                w.write_record([
                    r.method.clone(),
                    r.kpi.to_string(),
                    r.group.clone(),
                    r.nmae_mean.to_string(),
                    r.nmae_sd.to_string(),
                    r.mae_mean.to_string(),
                    r.mae_sd.to_string(),
                    r.n.to_string(),
                    join(&r.significant_vs),
                ])?;
            }
            Ok(())
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    /// Box-plot data of the absolute errors, one row per method, KPI and group.
    pub fn box_csv(&self) -> String {
        csv_string(|w| {
            w.write_record(["method", "kpi", "group", "lo_whisker", "q1", "median", "q3", "hi_whisker", "outliers"])?;
            for b in &self.boxes {
                let s = &b.stats;
                w.write_record([
                    b.method.clone(),
                    b.kpi.to_string(),
                    b.group.clone(),
                    s.lo_whisker.to_string(),
                    s.q1.to_string(),
                    s.median.to_string(),
                    s.q3.to_string(),
                    s.hi_whisker.to_string(),
                    join(&s.outliers),
                ])?;
            }
            Ok(())
        })
    }

    /// One line per KPI and group listing methods by increasing NMAE.
    pub fn ordering_summary(&self) -> String {
        let mut by_key: BTreeMap<(Kpi, &str), Vec<&ReportRow>> = BTreeMap::new();
        for r in &self.rows {
            by_key.entry((r.kpi, r.group.as_str())).or_default().push(r);
        }
        let mut out = String::new();
        for ((kpi, group), mut rows) in by_key {
            rows.sort_by(|a, b| a.nmae_mean.total_cmp(&b.nmae_mean));
            let order: Vec<String> = rows.iter().map(|r| format!("{} ({:.4})", r.method, r.nmae_mean)).collect();
            let _ = writeln!(out, "{kpi} [{group}]: best {}; {}", rows[0].method, order.join(" < "));
        }
        for n in &self.notes {
            let _ = writeln!(out, "note: {n}");
        }
        out
    }
}
