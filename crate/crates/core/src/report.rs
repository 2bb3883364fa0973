//! Report assembly: collect run artifacts from sweep or single-run
//! directories, compute the summary metrics and average ranks, and emit
//! `report.csv` plus learning-curve and kappa-trajectory SVGs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::artifacts::{
    fmt_f64, read_kappa, read_metrics, read_summary, KappaRow, KAPPA_FILE, METRICS_FILE,
    REPORT_FILE, REPORT_HEADER, RUN_JSON_FILE, SUMMARY_FILE,
};
use crate::error::ReportError;
use crate::metrics::{aulc, iqm, rank_table, EvalRecord};
use crate::svg::{Band, Chart, Series, PALETTE};

/// One seed's worth of parsed artifacts.
#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub final_return: f64,
    pub aulc: f64,
    pub curve: Vec<EvalRecord>,
    pub kappa: Option<Vec<KappaRow>>,
}

/// All runs grouped by `(env, method)`.
pub type RunTable = BTreeMap<(String, String), Vec<SeedRun>>;

fn io_err(path: &Path, source: std::io::Error) -> ReportError {
    ReportError::Io { path: path.to_path_buf(), source }
}

fn load_seed_run(dir: &Path, seed: u64) -> Result<SeedRun, ReportError> {
    let curve = read_metrics(&dir.join(METRICS_FILE))?;
    if curve.is_empty() {
        return Err(ReportError::Malformed {
            path: dir.join(METRICS_FILE),
            reason: "no evaluation checkpoints".into(),
        });
    }
    let kappa_path = dir.join(KAPPA_FILE);
    let kappa = if kappa_path.exists() { Some(read_kappa(&kappa_path)?) } else { None };
    Ok(SeedRun {
        seed,
        final_return: curve.last().unwrap().mean_return,
        aulc: aulc(&curve),
        curve,
        kappa,
    })
}

/// Identify an input directory (sweep or single run) and load its runs.
fn load_input(dir: &Path, table: &mut RunTable) -> Result<(), ReportError> {
    let summary = dir.join(SUMMARY_FILE);
    if summary.exists() {
        for row in read_summary(&summary)? {
            if row.status != "ok" {
                continue;
            }
            let run = load_seed_run(&dir.join(format!("seed_{}", row.seed)), row.seed)?;
            push_run(table, row.env, row.method, run, dir)?;
        }
        return Ok(());
    }
    let metrics = dir.join(METRICS_FILE);
    if metrics.exists() {
        let run_json = dir.join(RUN_JSON_FILE);
        let text = fs::read_to_string(&run_json).map_err(|e| io_err(&run_json, e))?;
        let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| {
            ReportError::Malformed { path: run_json.clone(), reason: e.to_string() }
        })?;
        let field = |name: &str| -> Result<String, ReportError> {
            value
                .get(name)
                .map(|v| match v {
                    serde_json::Value::String(s) => s.clone(),
                    // The method field may serialize as a tagged object for
                    // non-CLI variants.
                    other => other.to_string(),
                })
                .ok_or_else(|| ReportError::Malformed {
                    path: run_json.clone(),
                    reason: format!("missing {name}"),
                })
        };
        let env = field("env")?;
        let method = field("method")?;
        let seed = value.get("seed").and_then(|v| v.as_u64()).unwrap_or(0);
        let run = load_seed_run(dir, seed)?;
        push_run(table, env, method, run, dir)?;
        return Ok(());
    }
    Err(ReportError::NotARunDir(dir.to_path_buf()))
}

fn push_run(
    table: &mut RunTable,
    env: String,
    method: String,
    run: SeedRun,
    dir: &Path,
) -> Result<(), ReportError> {
    let entry = table.entry((env.clone(), method.clone())).or_default();
    if entry.iter().any(|r| r.seed == run.seed) {
        return Err(ReportError::Inconsistent(format!(
            "duplicate seed {} for ({env}, {method}) found in {}",
            run.seed,
            dir.display()
        )));
    }
    entry.push(run);
    Ok(())
}

/// Load all inputs and check the `(env, method)` grid is complete.
pub fn collect_runs(inputs: &[PathBuf]) -> Result<RunTable, ReportError> {
    let mut table = RunTable::new();
    for dir in inputs {
        load_input(dir, &mut table)?;
    }
    if table.is_empty() {
        return Err(ReportError::Empty);
    }
    let envs: Vec<String> = {
        let mut v: Vec<String> = table.keys().map(|(e, _)| e.clone()).collect();
        v.sort();
        v.dedup();
        v
    };
    let methods: Vec<String> = {
        let mut v: Vec<String> = table.keys().map(|(_, m)| m.clone()).collect();
        v.sort();
        v.dedup();
        v
    };
    let mut missing = Vec::new();
    for e in &envs {
        for m in &methods {
            if !table.contains_key(&(e.clone(), m.clone())) {
                missing.push(format!("({e}, {m})"));
            }
        }
    }
    if !missing.is_empty() {
        return Err(ReportError::Inconsistent(format!(
            "missing combinations: {}",
            missing.join(", ")
        )));
    }
    for run in table.values_mut() {
        run.sort_by_key(|r| r.seed);
    }
    Ok(table)
}

/// Aggregated metrics for one `(env, method)` cell.
#[derive(Debug, Clone)]
pub struct CellSummary {
    pub final_return: f64,
    pub iqm: f64,
    pub aulc: f64,
}

pub fn summarize(table: &RunTable) -> BTreeMap<(String, String), CellSummary> {
    table
        .iter()
        .map(|((env, method), runs)| {
            let finals: Vec<f64> = runs.iter().map(|r| r.final_return).collect();
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            (
                (env.clone(), method.clone()),
                CellSummary {
                    final_return: mean(&finals),
                    iqm: iqm(&finals),
                    aulc: mean(&runs.iter().map(|r| r.aulc).collect::<Vec<f64>>()),
                },
            )
        })
        .collect()
}

fn metric_table(
    cells: &BTreeMap<(String, String), CellSummary>,
    pick: impl Fn(&CellSummary) -> f64,
) -> BTreeMap<String, BTreeMap<String, f64>> {
    let mut out: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for ((env, method), cell) in cells {
        out.entry(method.clone()).or_default().insert(env.clone(), pick(cell));
    }
    out
}

/// Per-env ranks plus cross-env averages for all three metrics.
pub struct Ranks {
    /// `(env, method) -> (rank_final, rank_iqm, rank_aulc)`.
    pub per_env: BTreeMap<(String, String), (f64, f64, f64)>,
    /// `method -> (avg_rank_final, avg_rank_iqm, avg_rank_aulc)`.
    pub average: BTreeMap<String, (f64, f64, f64)>,
}

pub fn compute_ranks(cells: &BTreeMap<(String, String), CellSummary>) -> Result<Ranks, ReportError> {
    let metrics: [fn(&CellSummary) -> f64; 3] =
        [|c| c.final_return, |c| c.iqm, |c| c.aulc];
    let mut per_env: BTreeMap<(String, String), (f64, f64, f64)> = BTreeMap::new();
    let mut average: BTreeMap<String, (f64, f64, f64)> = BTreeMap::new();
    for (slot, pick) in metrics.iter().enumerate() {
        let by_method = metric_table(cells, pick);
        // Average ranks across environments.
        let avg = rank_table(&by_method, true).map_err(ReportError::Inconsistent)?;
        for (method, rank) in avg {
            let entry = average.entry(method).or_insert((0.0, 0.0, 0.0));
            match slot {
                0 => entry.0 = rank,
                1 => entry.1 = rank,
                _ => entry.2 = rank,
            }
        }
        // Per-environment ranks re-use the same machinery one env at a time.
        let envs: Vec<String> = cells.keys().map(|(e, _)| e.clone()).collect();
        for env in envs {
            let single: BTreeMap<String, BTreeMap<String, f64>> = by_method
                .iter()
                .map(|(m, envs_map)| {
                    (m.clone(), BTreeMap::from([(env.clone(), envs_map[&env])]))
                })
                .collect();
            let ranks = rank_table(&single, true).map_err(ReportError::Inconsistent)?;
            for (method, rank) in ranks {
                let entry =
                    per_env.entry((env.clone(), method)).or_insert((0.0, 0.0, 0.0));
                match slot {
                    0 => entry.0 = rank,
                    1 => entry.1 = rank,
                    _ => entry.2 = rank,
                }
            }
        }
    }
    Ok(Ranks { per_env, average })
}

/// Emit `report.csv` and the SVG charts into `out_dir`. Returns the list
/// of written files. Nothing is written if loading or validation fails.
pub fn write_report(inputs: &[PathBuf], out_dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    let table = collect_runs(inputs)?;
    let cells = summarize(&table);
    let ranks = compute_ranks(&cells)?;

    fs::create_dir_all(out_dir).map_err(|e| io_err(out_dir, e))?;
    let mut written = Vec::new();

    let report_path = out_dir.join(REPORT_FILE);
    let mut csv = String::new();
    csv.push_str(REPORT_HEADER);
    csv.push('\n');
    for ((env, method), cell) in &cells {
        let (rf, ri, ra) = ranks.per_env[&(env.clone(), method.clone())];
        csv.push_str(&format!(
            "{env},{method},{},{},{},{},{},{}\n",
            fmt_f64(cell.final_return),
            fmt_f64(cell.iqm),
            fmt_f64(cell.aulc),
            fmt_f64(rf),
            fmt_f64(ri),
            fmt_f64(ra)
        ));
    }
    // Cross-environment average-rank rows; metric columns hold the means
    // over environments.
    for (method, (rf, ri, ra)) in &ranks.average {
        let mut fr = 0.0;
        let mut qi = 0.0;
        let mut au = 0.0;
        let mut count = 0.0;
        for ((_, m), cell) in &cells {
            if m == method {
                fr += cell.final_return;
                qi += cell.iqm;
                au += cell.aulc;
                count += 1.0;
            }
        }
        csv.push_str(&format!(
            "average,{method},{},{},{},{},{},{}\n",
            fmt_f64(fr / count),
            fmt_f64(qi / count),
            fmt_f64(au / count),
            fmt_f64(*rf),
            fmt_f64(*ri),
            fmt_f64(*ra)
        ));
    }
    fs::write(&report_path, csv).map_err(|e| io_err(&report_path, e))?;
    written.push(report_path);

    for path in write_charts(&table, out_dir)? {
        written.push(path);
    }
    Ok(written)
}

fn write_charts(table: &RunTable, out_dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
    let mut written = Vec::new();
    let envs: Vec<String> = {
        let mut v: Vec<String> = table.keys().map(|(e, _)| e.clone()).collect();
        v.sort();
        v.dedup();
        v
    };
    for env in &envs {
        // Learning curves: per method, mean +- std across seeds.
        let mut chart = Chart {
            title: format!("{env}: evaluation return"),
            x_label: "environment steps".into(),
            y_label: "mean evaluation return".into(),
            ..Default::default()
        };
        let mut color_idx = 0;
        for ((e, method), runs) in table {
            if e != env {
                continue;
            }
            let color = PALETTE[color_idx % PALETTE.len()].to_string();
            color_idx += 1;
            let steps: Vec<usize> = runs[0].curve.iter().map(|r| r.step).collect();
            let mut mean_pts = Vec::new();
            let mut upper = Vec::new();
            let mut lower = Vec::new();
            for (i, &step) in steps.iter().enumerate() {
                let vals: Vec<f64> = runs
                    .iter()
                    .filter_map(|r| r.curve.get(i).map(|rec| rec.mean_return))
                    .collect();
                let m = vals.iter().sum::<f64>() / vals.len() as f64;
                let sd = (vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>()
                    / vals.len() as f64)
                    .sqrt();
                mean_pts.push((step as f64, m));
                upper.push((step as f64, m + sd));
                lower.push((step as f64, m - sd));
            }
            chart.bands.push(Band { color: color.clone(), upper, lower });
            chart.series.push(Series { label: method.clone(), color, points: mean_pts });
        }
        let path = out_dir.join(format!("learning_curve_{env}.svg"));
        fs::write(&path, chart.render()).map_err(|e| io_err(&path, e))?;
        written.push(path);

        // Directional-parameter trajectories, when any run logged them.
        let mut kchart = Chart {
            title: format!("{env}: directional aggregation parameters"),
            x_label: "environment steps".into(),
            y_label: "parameter value".into(),
            ..Default::default()
        };
        let mut color_idx = 0;
        for ((e, method), runs) in table {
            if e != env {
                continue;
            }
            for run in runs {
                let Some(kappa) = &run.kappa else { continue };
                if kappa.is_empty() {
                    continue;
                }
                let stride = (kappa.len() / 512).max(1);
                let bar_color = PALETTE[color_idx % PALETTE.len()].to_string();
                let k_color = PALETTE[(color_idx + 1) % PALETTE.len()].to_string();
                color_idx += 2;
                kchart.series.push(Series {
                    label: format!("{method} seed {} kappa_bar", run.seed),
                    color: bar_color,
                    points: kappa
                        .iter()
                        .step_by(stride)
                        .map(|&(s, kb, _, _, _)| (s as f64, kb))
                        .collect(),
                });
                kchart.series.push(Series {
                    label: format!("{method} seed {} kappa", run.seed),
                    color: k_color,
                    points: kappa
                        .iter()
                        .step_by(stride)
                        .map(|&(s, _, k, _, _)| (s as f64, k))
                        .collect(),
                });
            }
        }
        if !kchart.series.is_empty() {
            let path = out_dir.join(format!("kappa_{env}.svg"));
            fs::write(&path, kchart.render()).map_err(|e| io_err(&path, e))?;
            written.push(path);
        }
    }
    Ok(written)
}
