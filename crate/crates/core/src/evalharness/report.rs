use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::Result;

use super::fusion::FusionVector;
use super::protocol::ScoreRecord;
use super::svm::{svm_train, SvmModel, SvmParams};
use super::threshold::{metrics, threshold_at_fmr, Metrics};
use super::ProtocolId;

/// Dev-tuned threshold applied to Dev and Eval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolReport {
    pub protocol: ProtocolId,
    /// `all`, a finger name or `fusion`.
    pub scope: String,
    pub threshold: f64,
    pub dev: Metrics,
    pub eval: Metrics,
}

/// Threshold at `target_fmr` on Dev impostor scores, applied to both splits.
pub fn evaluate_scores(
    protocol: ProtocolId,
    scope: &str,
    dev: &[(f64, bool)],
    eval: &[(f64, bool)],
    target_fmr: f64,
) -> Result<ProtocolReport> {
    let imp: Vec<f64> = dev.iter().filter(|s| !s.1).map(|s| s.0).collect();
    let threshold = threshold_at_fmr(&imp, target_fmr)?;
    Ok(ProtocolReport {
        protocol,
        scope: scope.to_string(),
        threshold,
        dev: metrics(dev, threshold)?,
        eval: metrics(eval, threshold)?,
    })
}

/// Trains the fusion classifier on Dev vectors and thresholds its decision
/// values exactly as raw scores are.
pub fn evaluate_fusion(
    protocol: ProtocolId,
    dev: &[FusionVector],
    eval: &[FusionVector],
    params: &SvmParams,
    target_fmr: f64,
) -> Result<(SvmModel<f64>, ProtocolReport)> {
    let x: Vec<Vec<f64>> = dev.iter().map(|v| v.scores.to_vec()).collect();
    let y: Vec<bool> = dev.iter().map(|v| v.genuine).collect();
    let model = svm_train(&x, &y, params)?;
    let classify = |vs: &[FusionVector]| -> Vec<(f64, bool)> { vs.iter().map(|v| (model.decision(&v.scores), v.genuine)).collect() };
    let report = evaluate_scores(protocol, "fusion", &classify(dev), &classify(eval), target_fmr)?;
    Ok((model, report))
}

/// Table of protocol rows with the run configuration echoed in its header.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub title: String,
    pub header: Vec<(String, String)>,
    pub rows: Vec<ProtocolReport>,
}

impl Report {
    /// `#`-prefixed header lines, then one row per protocol and scope with
    /// rates in percent at two decimals.
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        writeln!(s, "# {}", self.title).unwrap();
        for (k, v) in &self.header {
            writeln!(s, "# {k}={v}").unwrap();
        }
        s.push_str("protocol,name,scope,threshold,dev_fmr,dev_fnmr,dev_hter,eval_fmr,eval_fnmr,eval_hter,dev_genuine,dev_impostor,eval_genuine,eval_impostor\n");
        for r in &self.rows {
            let (d, e) = (r.dev.rounded(), r.eval.rounded());
            writeln!(
                s,
                "{},{},{},{},{:.2},{:.2},{:.2},{:.2},{:.2},{:.2},{},{},{},{}",
                r.protocol,
                r.protocol.name(),
                r.scope,
                r.threshold,
                d.fmr,
                d.fnmr,
                d.hter,
                e.fmr,
                e.fnmr,
                e.hter,
                d.genuine,
                d.impostor,
                e.genuine,
                e.impostor
            )
            .unwrap();
        }
        s
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{}", self.title).unwrap();
        writeln!(s, "{:<4} {:<14} {:<7} | {:>6} {:>6} {:>6} | {:>6} {:>6} {:>6}", "id", "protocol", "scope", "FMR", "FNMR", "HTER", "FMR", "FNMR", "HTER").unwrap();
        writeln!(s, "{:<27} | {:^20} | {:^20}", "", "Dev", "Eval").unwrap();
        for r in &self.rows {
            let (d, e) = (r.dev.rounded(), r.eval.rounded());
            writeln!(
                s,
                "{:<4} {:<14} {:<7} | {:>6.2} {:>6.2} {:>6.2} | {:>6.2} {:>6.2} {:>6.2}",
                r.protocol.to_string(),
                r.protocol.name(),
                r.scope,
                d.fmr,
                d.fnmr,
                d.hter,
                e.fmr,
                e.fnmr,
                e.hter
            )
            .unwrap();
        }
        s
    }
}

/// `protocol,split,probe_id,enrolled_id,finger,genuine,score` rows.
pub fn scores_csv(records: &[ScoreRecord]) -> String {
    let mut s = String::from("protocol,split,probe_id,enrolled_id,finger,genuine,score\n");
    for r in records {
        writeln!(s, "{},{},{},{},{},{},{}", r.protocol, r.split, r.probe_id(), r.enrolled_id(), r.finger, r.genuine as u8, r.score).unwrap();
    }
    s
}
