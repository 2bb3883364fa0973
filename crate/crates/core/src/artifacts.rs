//! Artifact schemas: CSV headers, float formatting, streaming writers,
//! and the parsers the report command uses to read runs back.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{ReportError, TrainError};
use crate::metrics::EvalRecord;

pub const METRICS_HEADER: &str = "step,eval_return_mean,eval_return_std";
pub const KAPPA_HEADER: &str = "step,kappa_bar,kappa,delta_mean,delta_bar_mean";
pub const SUMMARY_HEADER: &str = "env,method,seed,status,final_return,aulc";
pub const REPORT_HEADER: &str =
    "env,method,final_return,iqm,aulc,rank_final,rank_iqm,rank_aulc";

pub const METRICS_FILE: &str = "metrics.csv";
pub const KAPPA_FILE: &str = "kappa.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const REPORT_FILE: &str = "report.csv";
pub const RUN_JSON_FILE: &str = "run.json";

/// Format a float with 9 significant digits, plain decimal where the
/// exponent allows it and scientific notation otherwise.
pub fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{:.8e}", x);
    let (mant, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("exponent");
    let neg = mant.starts_with('-');
    let digits: Vec<u8> = mant.bytes().filter(|b| b.is_ascii_digit()).collect();
    debug_assert_eq!(digits.len(), 9);
    let digits = std::str::from_utf8(&digits).unwrap();
    let mut out = String::new();
    if neg {
        out.push('-');
    }
    if (0..9).contains(&exp) {
        let e = exp as usize;
        out.push_str(&digits[..=e]);
        let frac = digits[e + 1..].trim_end_matches('0');
        if !frac.is_empty() {
            out.push('.');
            out.push_str(frac);
        }
    } else if (-4..0).contains(&exp) {
        out.push_str("0.");
        for _ in 0..(-exp - 1) {
            out.push('0');
        }
        out.push_str(digits.trim_end_matches('0'));
    } else {
        let frac = digits[1..].trim_end_matches('0');
        out.push_str(&digits[..1]);
        if !frac.is_empty() {
            out.push('.');
            out.push_str(frac);
        }
        out.push('e');
        out.push_str(&exp.to_string());
    }
    out
}

fn io_err(path: &Path, source: std::io::Error) -> TrainError {
    TrainError::Io { path: path.to_path_buf(), source }
}

/// Streaming writer for one run's artifacts. Rows are appended as the run
/// produces them, so an aborted run leaves a valid prefix behind.
pub struct RunWriter {
    metrics: BufWriter<File>,
    kappa: Option<BufWriter<File>>,
    dir: PathBuf,
}

impl RunWriter {
    pub fn create(dir: &Path, with_kappa: bool) -> Result<Self, TrainError> {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let metrics_path = dir.join(METRICS_FILE);
        let mut metrics =
            BufWriter::new(File::create(&metrics_path).map_err(|e| io_err(&metrics_path, e))?);
        writeln!(metrics, "{METRICS_HEADER}").map_err(|e| io_err(&metrics_path, e))?;
        let kappa = if with_kappa {
            let kappa_path = dir.join(KAPPA_FILE);
            let mut w =
                BufWriter::new(File::create(&kappa_path).map_err(|e| io_err(&kappa_path, e))?);
            writeln!(w, "{KAPPA_HEADER}").map_err(|e| io_err(&kappa_path, e))?;
            Some(w)
        } else {
            None
        };
        Ok(Self { metrics, kappa, dir: dir.to_path_buf() })
    }

    pub fn append_metrics(&mut self, step: usize, mean: f64, std: f64) -> Result<(), TrainError> {
        writeln!(self.metrics, "{step},{},{}", fmt_f64(mean), fmt_f64(std))
            .map_err(|e| io_err(&self.dir.join(METRICS_FILE), e))
    }

    #[allow(clippy::too_many_arguments)]
    pub fn append_kappa(
        &mut self,
        step: usize,
        kappa_bar: f64,
        kappa: f64,
        delta_mean: f64,
        delta_bar_mean: f64,
    ) -> Result<(), TrainError> {
        if let Some(w) = self.kappa.as_mut() {
            writeln!(
                w,
                "{step},{},{},{},{}",
                fmt_f64(kappa_bar),
                fmt_f64(kappa),
                fmt_f64(delta_mean),
                fmt_f64(delta_bar_mean)
            )
            .map_err(|e| io_err(&self.dir.join(KAPPA_FILE), e))?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<(), TrainError> {
        self.metrics.flush().map_err(|e| io_err(&self.dir.join(METRICS_FILE), e))?;
        if let Some(mut w) = self.kappa.take() {
            w.flush().map_err(|e| io_err(&self.dir.join(KAPPA_FILE), e))?;
        }
        Ok(())
    }
}

/// One row of `summary.csv`.
#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub env: String,
    pub method: String,
    pub seed: u64,
    pub status: String,
    pub final_return: f64,
    pub aulc: f64,
}

pub fn write_summary(dir: &Path, rows: &[SummaryRow]) -> Result<(), TrainError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let path = dir.join(SUMMARY_FILE);
    let mut w = BufWriter::new(File::create(&path).map_err(|e| io_err(&path, e))?);
    writeln!(w, "{SUMMARY_HEADER}").map_err(|e| io_err(&path, e))?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.env,
            r.method,
            r.seed,
            r.status,
            fmt_f64(r.final_return),
            fmt_f64(r.aulc)
        )
        .map_err(|e| io_err(&path, e))?;
    }
    w.flush().map_err(|e| io_err(&path, e))
}

fn malformed(path: &Path, reason: impl Into<String>) -> ReportError {
    ReportError::Malformed { path: path.to_path_buf(), reason: reason.into() }
}

fn read_csv_rows(path: &Path, header: &str) -> Result<Vec<Vec<String>>, ReportError> {
    let text = fs::read_to_string(path)
        .map_err(|e| ReportError::Io { path: path.to_path_buf(), source: e })?;
    let mut lines = text.lines();
    match lines.next() {
        Some(first) if first == header => {}
        Some(first) => {
            return Err(malformed(path, format!("expected header {header:?}, found {first:?}")))
        }
        None => return Err(malformed(path, "empty file")),
    }
    let cols = header.split(',').count();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<String> = line.split(',').map(str::to_string).collect();
        if fields.len() != cols {
            return Err(malformed(path, format!("row {} has {} fields, expected {cols}", i + 2, fields.len())));
        }
        rows.push(fields);
    }
    Ok(rows)
}

fn parse_num<T: std::str::FromStr>(path: &Path, field: &str) -> Result<T, ReportError> {
    field.parse().map_err(|_| malformed(path, format!("bad number {field:?}")))
}

pub fn read_metrics(path: &Path) -> Result<Vec<EvalRecord>, ReportError> {
    read_csv_rows(path, METRICS_HEADER)?
        .into_iter()
        .map(|f| {
            Ok(EvalRecord {
                step: parse_num(path, &f[0])?,
                mean_return: parse_num(path, &f[1])?,
                std_return: parse_num(path, &f[2])?,
            })
        })
        .collect()
}

/// Parsed `kappa.csv` row: `(step, kappa_bar, kappa, delta_mean,
/// delta_bar_mean)`.
pub type KappaRow = (usize, f64, f64, f64, f64);

pub fn read_kappa(path: &Path) -> Result<Vec<KappaRow>, ReportError> {
    read_csv_rows(path, KAPPA_HEADER)?
        .into_iter()
        .map(|f| {
            Ok((
                parse_num(path, &f[0])?,
                parse_num(path, &f[1])?,
                parse_num(path, &f[2])?,
                parse_num(path, &f[3])?,
                parse_num(path, &f[4])?,
            ))
        })
        .collect()
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>, ReportError> {
    read_csv_rows(path, SUMMARY_HEADER)?
        .into_iter()
        .map(|f| {
            Ok(SummaryRow {
                env: f[0].clone(),
                method: f[1].clone(),
                seed: parse_num(path, &f[2])?,
                status: f[3].clone(),
                final_return: parse_num(path, &f[4])?,
                aulc: parse_num(path, &f[5])?,
            })
        })
        .collect()
}
