//! CSV writers. Columns ending in `_ms` and the `speedup` column carry
//! wall-clock measurements; everything else is reproducible from seeds.

use std::io::Write;

use super::ablate::AblationRow;
use super::bench::TimingRow;
use super::eval::EvalReport;
use super::robust::{CsiMode, RobustRow};
use super::train::EpochRecord;
use super::HarnessError;

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().from_writer(w)
}

fn f(x: f64) -> String {
    format!("{x}")
}

/// One row per instance: `instance,<method>_rate,<method>_ms,...`.
pub fn write_instances_csv(r: &EvalReport, w: impl Write) -> Result<(), HarnessError> {
    let mut out = writer(w);
    let mut header = vec!["instance".to_string()];
    for m in &r.methods {
        header.push(format!("{}_rate", m.method));
        header.push(format!("{}_ms", m.method));
    }
    out.write_record(&header)?;
    for i in 0..r.meta.instances {
        let mut row = vec![i.to_string()];
        for m in &r.methods {
            row.push(f(m.rates[i]));
            row.push(f(m.times_ms[i]));
        }
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// One row per method with the report metadata repeated on each row.
pub fn write_summary_csv(r: &EvalReport, w: impl Write) -> Result<(), HarnessError> {
    let mut out = writer(w);
    out.write_record([
        "method",
        "mean_rate",
        "ratio",
        "mean_ms",
        "k",
        "setting",
        "data_seed",
        "instances",
        "threads",
        "greedy_fraction",
        "build_id",
    ])?;
    for m in &r.methods {
        out.write_record([
            m.method.name().to_string(),
            f(m.mean_rate),
            f(m.ratio),
            f(m.mean_time_ms()),
            r.meta.k.to_string(),
            r.meta.setting.clone(),
            r.meta.data_seed.to_string(),
            r.meta.instances.to_string(),
            r.meta.threads.to_string(),
            r.greedy_fraction.map(f).unwrap_or_default(),
            r.meta.build_id.clone(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_history_csv(h: &[EpochRecord], w: impl Write) -> Result<(), HarnessError> {
    let mut out = writer(w);
    out.write_record(["epoch", "train_loss", "val_loss"])?;
    for r in h {
        out.write_record([r.epoch.to_string(), f(r.train_loss), f(r.val_loss)])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_robust_csv(
    mode: CsiMode,
    rows: &[RobustRow],
    w: impl Write,
) -> Result<(), HarnessError> {
    let mut out = writer(w);
    out.write_record(["mode", "level", "clean_rate", "corrupted_rate", "relative"])?;
    for r in rows {
        out.write_record([
            mode.to_string(),
            f(r.level),
            f(r.clean_rate),
            f(r.corrupted_rate),
            f(r.relative),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_ablation_csv(rows: &[AblationRow], w: impl Write) -> Result<(), HarnessError> {
    let mut out = writer(w);
    out.write_record([
        "axis",
        "value",
        "igcnet_rate",
        "wmmse_rate",
        "ratio",
        "greedy_ratio",
        "best_epoch",
        "epochs_run",
    ])?;
    for r in rows {
        out.write_record([
            r.axis.to_string(),
            r.value.to_string(),
            f(r.igcnet_rate),
            f(r.wmmse_rate),
            f(r.ratio),
            f(r.greedy_ratio),
            r.best_epoch.to_string(),
            r.epochs_run.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_timing_csv(
    rows: &[TimingRow],
    threads: usize,
    w: impl Write,
) -> Result<(), HarnessError> {
    let mut out = writer(w);
    out.write_record([
        "k",
        "instances",
        "threads",
        "igcnet_ms",
        "wmmse_ms",
        "speedup",
        "wmmse_iterations",
    ])?;
    for r in rows {
        out.write_record([
            r.k.to_string(),
            r.instances.to_string(),
            threads.to_string(),
            f(r.igcnet_ms),
            f(r.wmmse_ms),
            f(r.speedup),
            f(r.wmmse_iterations),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Drops wall-clock columns so two runs can be compared byte for byte.
pub fn strip_timing_columns(text: &str) -> Result<String, HarnessError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(text.as_bytes());
    let mut keep: Option<Vec<bool>> = None;
    let mut out = writer(Vec::new());
    for rec in rdr.records() {
        let rec = rec?;
        let mask = keep.get_or_insert_with(|| {
            rec.iter()
                .map(|h| !(h.ends_with("_ms") || h == "speedup"))
                .collect()
        });
        let row: Vec<&str> = rec
            .iter()
            .zip(mask.iter())
            .filter(|(_, &k)| k)
            .map(|(v, _)| v)
            .collect();
        out.write_record(&row)?;
    }
    let bytes = out
        .into_inner()
        .map_err(|e| HarnessError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv writer emits utf-8"))
}
