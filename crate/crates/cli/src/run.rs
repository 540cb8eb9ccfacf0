//! Execution of a validated plan and assembly of the result documents.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use cpenv::dual::coupled_duality_estimate;
use cpenv::estimators::*;
use cpenv::oracle::{check_environment_stationarity, exact_duality_check};
use cpenv::*;

use crate::output::{with_hash_column, write_all};
use crate::plan::{Plan, Task};
use crate::{CliError, SCHEMA_VERSION};

/// The JSON result document, `{name}.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultDoc {
    pub schema_version: u32,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub replicates: Vec<Replicates>,
    pub config: Task,
    pub result: Value,
    pub reports: Vec<EstimateReport>,
}

struct Artifacts {
    csv: String,
    result: Value,
    reports: Vec<EstimateReport>,
    summary: String,
}

fn run_err(e: cpenv::Error) -> CliError {
    CliError::Run(e.to_string())
}

fn reports_csv(reports: &[EstimateReport]) -> String {
    let mut out = format!("{}\n", EstimateReport::CSV_HEADER);
    for r in reports {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

fn summarize(reports: &[EstimateReport]) -> String {
    let mut s = String::new();
    for r in reports {
        let (lo, hi) = r.interval(2.0);
        let h = r.horizon.map(|h| format!(" at t = {h}")).unwrap_or_default();
        let _ = writeln!(
            s,
            "{}{h}: {:.6} +- {:.6} (2-sigma [{lo:.6}, {hi:.6}], censoring bracket [{:.6}, {:.6}], {} replicates)",
            r.label, r.estimate, r.stderr, r.lower, r.upper, r.replicates
        );
    }
    s
}

/// CSV of a task whose reports can be merged, computed from the reports alone.
fn mergeable_csv(task: &Task, reports: &[EstimateReport]) -> String {
    match task {
        Task::Sweep { axis, values, horizon, .. } => SweepResult {
            axis: *axis,
            values: values.clone(),
            horizon: *horizon,
            reports: reports.to_vec(),
            pathwise_violations: None,
        }
        .to_csv(),
        _ => reports_csv(reports),
    }
}

fn execute_task(plan: &Plan) -> Result<Artifacts, CliError> {
    let (seed, reps) = (plan.seed, plan.replicates);
    Ok(match &plan.task {
        Task::Simulate { params, geometry, init, horizon, snapshots } => {
            let g = Arc::new(geometry.clone());
            let config = sample_initial(init, params, &g, StreamSeed::new(seed, 0)).map_err(run_err)?;
            let tableau = EventTableau::generate(*params, g, *horizon, seed).map_err(run_err)?;
            let traj = evolve(&tableau, &config, *horizon).map_err(run_err)?;
            let mut result = traj.snapshots_json(snapshots).map_err(run_err)?;
            result["extinction_time"] = json!(traj.extinction_time());
            result["censored"] = json!(traj.censored());
            result["changes"] = json!(traj.changes().len());
            let summary = format!(
                "{} changes; {}\n",
                traj.changes().len(),
                match traj.extinction_time() {
                    Some(t) => format!("extinct at t = {t}"),
                    None => format!("{} sites occupied at t = {horizon}", traj.final_state().occupied().len()),
                }
            );
            Artifacts { csv: traj.to_csv(), result, reports: vec![], summary }
        }
        Task::Survive { params, geometry, mode, times } => {
            let reports =
                survival_curve(*params, Arc::new(geometry.clone()), mode, times, reps, seed).map_err(run_err)?;
            Artifacts {
                csv: reports_csv(&reports),
                result: Value::Null,
                summary: summarize(&reports),
                reports,
            }
        }
        Task::Blocks { params, spec } => {
            let bc = estimate_block_conditions(*params, *spec, reps, seed).map_err(run_err)?;
            let occ = estimate_occupation_events(*params, *spec, reps, seed).map_err(run_err)?;
            let (bc1, bc2) = bc.holds();
            let (count, face) = occ.holds();
            let result = json!({
                "spec": spec,
                "block_conditions_hold": [bc1, bc2],
                "occupation_events_hold": [count, face],
            });
            let reports = vec![bc.first, bc.second, occ.first, occ.second];
            let mut summary = summarize(&reports);
            let _ = writeln!(summary, "exceeds 1 - epsilon: bc1 {bc1}, bc2 {bc2}, count {count}, face {face}");
            Artifacts { csv: reports_csv(&reports), result, summary, reports }
        }
        Task::DualCheck { params, geometry, a, c, d, t } => {
            let est = coupled_duality_estimate(*params, Arc::new(geometry.clone()), a, c, d, *t, reps, seed)
                .map_err(run_err)?;
            let result = json!({ "pathwise_mismatches": est.pathwise_mismatches });
            let reports = vec![est.forward, est.dual, est.self_dual];
            let mut summary = summarize(&reports);
            let _ = writeln!(summary, "pathwise mismatches: {}", est.pathwise_mismatches);
            Artifacts { csv: reports_csv(&reports), result, summary, reports }
        }
        Task::Oracle { params, geometry, a, c, d, t } => {
            let dual = exact_duality_check(params, geometry, a, c, d, *t).map_err(run_err)?;
            let stat = check_environment_stationarity(params, geometry).map_err(run_err)?;
            let rows = [
                ("duality_lhs", dual.lhs),
                ("duality_rhs", dual.rhs),
                ("duality_gap", dual.gap),
                ("stationarity_residual", stat.residual),
                ("detailed_balance_residual", stat.detailed_balance),
            ];
            let mut csv = String::from("quantity,value\n");
            let mut summary = String::new();
            for (k, v) in rows {
                let _ = writeln!(csv, "{k},{v}");
                let _ = writeln!(summary, "{k} = {v:e}");
            }
            let result = json!({ "duality": dual, "stationarity": stat });
            Artifacts { csv, result, reports: vec![], summary }
        }
        Task::Bounds { d, alpha, beta_c_cp } => {
            let b = branching_bound_delta_p(*d).map_err(run_err)?;
            let mut rows = vec![
                ("d", *d as f64),
                ("q_star", b.q_star),
                ("delta_p", b.delta_p),
                ("residual", b.residual),
            ];
            let threshold = match beta_c_cp {
                Some(input) => {
                    let beta = extinction_threshold_beta(*alpha, input).map_err(run_err)?;
                    rows.extend([("alpha", *alpha), ("beta_c_cp", input.beta_c_cp), ("extinction_beta", beta)]);
                    Some(beta)
                }
                None => None,
            };
            let mut csv = String::from("quantity,value\n");
            let mut summary = String::new();
            for (k, v) in &rows {
                let _ = writeln!(csv, "{k},{v}");
                let _ = writeln!(summary, "{k} = {v}");
            }
            if beta_c_cp.is_none() {
                let _ = writeln!(summary, "no beta_c_cp for d = {d}; pass --beta-c-cp for the extinction threshold");
            }
            let result = json!({ "delta_bound": b, "beta_c_cp": beta_c_cp, "extinction_beta": threshold });
            Artifacts { csv, result, reports: vec![], summary }
        }
        Task::Sweep { params, geometry, mode, axis, values, horizon } => {
            let r = monotonicity_sweep(*params, *axis, values, Arc::new(geometry.clone()), mode, *horizon, reps, seed)
                .map_err(run_err)?;
            let result = json!({ "pathwise_violations": r.pathwise_violations });
            let mut summary = String::new();
            for (v, rep) in values.iter().zip(&r.reports) {
                let _ = writeln!(summary, "{} = {v}: {:.6} +- {:.6}", axis.name(), rep.estimate, rep.stderr);
            }
            if let Some(n) = r.pathwise_violations {
                let _ = writeln!(summary, "pathwise violations: {n}");
            }
            Artifacts { csv: r.to_csv(), result, summary, reports: r.reports }
        }
        Task::Bisect { params, geometry, mode, options } => {
            let r = bisect_pseudo_critical(*params, Arc::new(geometry.clone()), mode, options, reps, seed)
                .map_err(run_err)?;
            let mut csv = String::from("step,value,estimate,stderr,replicates\n");
            for (i, s) in r.history.iter().enumerate() {
                let _ = writeln!(csv, "{i},{},{},{},{}", s.value, s.report.estimate, s.report.stderr, s.report.replicates);
            }
            let summary = format!("{}: [{}, {}]\n", r.label, r.lo, r.hi);
            let result = serde_json::to_value(&r).map_err(|e| CliError::Run(e.to_string()))?;
            Artifacts { csv, result, reports: vec![], summary }
        }
        Task::Converge { params, geometry, mu, c, d, options } => {
            let r = convergence_diagnostic(*params, Arc::new(geometry.clone()), mu, c, d, options, reps, seed)
                .map_err(run_err)?;
            let late = r.late();
            let summary = format!(
                "survival {:.6} +- {:.6}\nlate joint {:.6} +- {:.6}, prediction {:.6} +- {:.6}, consistent at 3 sigma: {}\n",
                r.survival.estimate,
                r.survival.stderr,
                late.joint.estimate,
                late.joint.stderr,
                r.prediction.joint.estimate,
                r.prediction.joint.stderr,
                r.consistent(3.0)
            );
            let result = serde_json::to_value(&r).map_err(|e| CliError::Run(e.to_string()))?;
            Artifacts { csv: r.to_csv(), result, reports: vec![], summary }
        }
        Task::Merge { .. } => unreachable!("merge is handled separately"),
    })
}

fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

fn to_json<T: Serialize>(v: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(v)
        .map(|mut s| {
            s.push('\n');
            s
        })
        .map_err(|e| CliError::Run(e.to_string()))
}

fn persist(plan: &Plan, doc: &ResultDoc, csv: &str, started: f64, clock: Instant) -> Result<Vec<PathBuf>, CliError> {
    let meta = json!({
        "schema_version": SCHEMA_VERSION,
        "cpenv_version": env!("CARGO_PKG_VERSION"),
        "command": doc.command,
        "config_hash": doc.config_hash,
        "started_unix": started,
        "finished_unix": unix_now(),
        "elapsed_seconds": clock.elapsed().as_secs_f64(),
        "threads": rayon::current_num_threads(),
    });
    write_all(
        &plan.out_dir,
        &[
            (format!("{}.csv", plan.name), with_hash_column(csv, &doc.config_hash)),
            (format!("{}.json", plan.name), to_json(doc)?),
            (format!("{}.meta.json", plan.name), to_json(&meta)?),
        ],
    )
}

fn footer(summary: String, paths: &[PathBuf]) -> String {
    let mut s = summary;
    for p in paths {
        let _ = writeln!(s, "wrote {}", p.display());
    }
    s
}

fn execute_in_pool(plan: &Plan) -> Result<String, CliError> {
    let started = unix_now();
    let clock = Instant::now();
    if let Task::Merge { files } = &plan.task {
        return merge(plan, files, started, clock);
    }
    let art = execute_task(plan)?;
    let doc = ResultDoc {
        schema_version: SCHEMA_VERSION,
        command: plan.command.to_string(),
        config_hash: plan.config_hash.clone(),
        seed: plan.seed,
        replicates: if plan.task.uses_replicates() { vec![plan.replicates] } else { vec![] },
        config: plan.task.clone(),
        result: art.result,
        reports: art.reports,
    };
    let paths = persist(plan, &doc, &art.csv, started, clock)?;
    Ok(footer(art.summary, &paths))
}

pub fn execute(plan: &Plan) -> Result<String, CliError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.threads)
        .build()
        .map_err(|e| CliError::Run(format!("cannot start worker pool: {e}")))?;
    pool.install(|| execute_in_pool(plan))
}

fn load_doc(path: &PathBuf) -> Result<ResultDoc, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let doc: ResultDoc = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{} is not a result file: {e}", path.display())))?;
    if doc.schema_version != SCHEMA_VERSION {
        return Err(CliError::Config(format!(
            "{} has schema version {}, expected {SCHEMA_VERSION}",
            path.display(),
            doc.schema_version
        )));
    }
    Ok(doc)
}

/// Merge result files of one configuration, report by report.
fn merge(plan: &Plan, files: &[PathBuf], started: f64, clock: Instant) -> Result<String, CliError> {
    let docs = files.iter().map(load_doc).collect::<Result<Vec<_>, _>>()?;
    let first = &docs[0];
    if !first.config.shardable() {
        return Err(CliError::Config(format!("{} results cannot be merged", first.command)));
    }
    for (doc, path) in docs.iter().zip(files) {
        if doc.command != first.command || doc.config_hash != first.config_hash || doc.seed != first.seed {
            return Err(CliError::Config(format!(
                "{} comes from a different run ({} {}, expected {} {})",
                path.display(),
                doc.command,
                doc.config_hash,
                first.command,
                first.config_hash
            )));
        }
        if doc.reports.len() != first.reports.len() {
            return Err(CliError::Config(format!("{} has a different number of reports", path.display())));
        }
    }
    let reports = (0..first.reports.len())
        .map(|i| {
            let parts: Vec<EstimateReport> = docs.iter().map(|d| d.reports[i].clone()).collect();
            EstimateReport::merge(&parts)
        })
        .collect::<Result<Vec<_>>>()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let replicates = reports.first().map(|r| r.shards.clone()).unwrap_or_default();
    let doc = ResultDoc {
        schema_version: SCHEMA_VERSION,
        command: first.command.clone(),
        config_hash: first.config_hash.clone(),
        seed: first.seed,
        replicates,
        config: first.config.clone(),
        result: Value::Null,
        reports,
    };
    let csv = mergeable_csv(&doc.config, &doc.reports);
    let mut merge_plan = plan.clone();
    if merge_plan.name == "merge" {
        merge_plan.name = format!("{}-merged", doc.command);
    }
    let paths = persist(&merge_plan, &doc, &csv, started, clock)?;
    Ok(footer(summarize(&doc.reports), &paths))
}
