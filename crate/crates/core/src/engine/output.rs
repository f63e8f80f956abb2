//! CSV writers for run outputs. Column sets are fixed per schema version.

use std::fmt::Write as _;
use std::path::Path;

use crate::engine::{ExperimentReport, RoundTrace};
use crate::error::{Error, Result};
use crate::evalreport::EfficiencyLedger;

pub const OUTPUT_SCHEMA_VERSION: u32 = 1;

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn ids(v: &[usize]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

pub fn metrics_csv(report: &ExperimentReport) -> String {
    let mut s = String::from("round,k,hr_at_k,ndcg_at_k,evaluated_users,mean_rec_loss,mean_dis_loss,lambda\n");
    for r in &report.metrics.rows {
        let t = &report.traces[r.round - 1];
        writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            r.round,
            report.metrics.k,
            r.hr_at_k,
            r.ndcg_at_k,
            r.evaluated_users,
            t.mean_rec_loss,
            opt(t.mean_dis_loss),
            t.lambda
        )
        .unwrap();
    }
    s
}

pub fn trace_csv(traces: &[RoundTrace]) -> String {
    let mut s = String::from(
        "round,sampled,group_sizes,mean_rec_loss,mean_dis_loss,lambda,agg_loss_initial,agg_loss_final,\
         churn,churn_eligible,churn_rate,signal_source_round,signal_receivers,groups_reduced\n",
    );
    for t in traces {
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            t.round,
            ids(&t.sampled),
            ids(&t.group_sizes),
            t.mean_rec_loss,
            opt(t.mean_dis_loss),
            t.lambda,
            opt(t.agg_loss_initial),
            opt(t.agg_loss_final),
            t.churn,
            t.churn_eligible,
            opt(t.churn_rate()),
            t.signal_source_round.map(|r| r.to_string()).unwrap_or_default(),
            t.signal_receivers,
            t.groups_reduced
        )
        .unwrap();
    }
    s
}

/// `round,user_id,group_id` for every assigned user after each round.
pub fn groups_csv(traces: &[RoundTrace]) -> String {
    let mut s = String::from("round,user_id,group_id\n");
    for t in traces {
        for (u, g) in t.assignments.iter().enumerate() {
            if let Some(g) = g {
                writeln!(s, "{},{u},{g}", t.round).unwrap();
            }
        }
    }
    s
}

/// Byte accounting only; wall times go to [`timing_csv`].
pub fn efficiency_csv(l: &EfficiencyLedger) -> String {
    let mut s = String::from("scope,round,sampled,metric,bytes\n");
    let fixed = [
        ("client_storage", l.client_storage_bytes),
        ("upload_per_client", l.upload_bytes_per_client),
        ("download_per_client", l.download_bytes_per_client),
        ("signal_per_client", l.signal_bytes),
        ("initial_broadcast_per_client", l.initial_broadcast_bytes),
        ("client_side_fusion_broadcast_per_client", l.client_side_fusion_broadcast_bytes),
    ];
    for (name, b) in fixed {
        writeln!(s, "run,,,{name},{b}").unwrap();
    }
    for r in &l.rounds {
        writeln!(s, "round,{},{},upload,{}", r.round, r.sampled, r.upload_bytes).unwrap();
        writeln!(s, "round,{},{},download,{}", r.round, r.sampled, r.download_bytes).unwrap();
    }
    s
}

pub fn timing_csv(l: &EfficiencyLedger) -> String {
    let mut s = String::from("round,client_train_time_ns\n");
    for (i, t) in l.client_train_time_ns.iter().enumerate() {
        writeln!(s, "{},{t}", i + 1).unwrap();
    }
    writeln!(s, "median,{}", l.median_train_time_ns()).unwrap();
    s
}

/// Writes metrics, trace, groups, efficiency and timing CSVs into `dir`.
pub fn write_outputs(dir: &Path, report: &ExperimentReport) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let files = [
        ("metrics.csv", metrics_csv(report)),
        ("trace.csv", trace_csv(&report.traces)),
        ("groups.csv", groups_csv(&report.traces)),
        ("efficiency.csv", efficiency_csv(&report.efficiency)),
        ("timing.csv", timing_csv(&report.efficiency)),
    ];
    for (name, body) in files {
        let p = dir.join(name);
        std::fs::write(&p, body).map_err(|e| Error::io(p, e))?;
    }
    Ok(())
}
