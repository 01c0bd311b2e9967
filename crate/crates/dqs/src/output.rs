//! CSV tables, event logs and staged output directories.

use std::fs;
use std::path::{Path, PathBuf};

use dqs_core::netsim::{LogRecord, SimResult, TrialSummary};
use tempfile::TempDir;

use crate::{io_err, Result};

/// Formats with 12 significant digits, dropping trailing zeros. Very large
/// or small magnitudes use exponent notation.
pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent notation");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let fixed = format!("{:.*}", (11 - exp) as usize, x);
        trim_zeros(&fixed).into()
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

pub const RESULT_HEADER: [&str; 8] = ["scenario", "p", "eta", "eta_tilde", "F", "seed", "trials", "eta_qfim"];

/// One results row; undefined figures (no successful trial) are left empty.
pub fn result_row(r: &SimResult) -> Vec<String> {
    vec![
        r.scenario.clone(),
        fmt_float(r.success_prob),
        fmt_opt(r.eta),
        fmt_opt(r.eta_tilde),
        fmt_opt(r.fidelity),
        r.seed.to_string(),
        r.trials.to_string(),
        fmt_opt(r.eta_qfim),
    ]
}

pub fn write_results(path: &Path, results: &[SimResult]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(RESULT_HEADER)?;
    for r in results {
        w.write_record(result_row(r))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_trials(path: &Path, trials: &[TrialSummary]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "trial",
        "success",
        "F",
        "attempts",
        "pairs_generated",
        "purifications",
        "purification_failures",
        "swaps",
        "swap_failures",
        "cutoffs",
        "discarded_at_window_end",
    ])?;
    for t in trials {
        let s = &t.stats;
        let mut row = vec![t.index.to_string(), (t.success as u8).to_string(), fmt_opt(t.fidelity)];
        row.extend(
            [
                s.attempts,
                s.pairs_generated,
                s.purifications,
                s.purification_failures,
                s.swaps,
                s.swap_failures,
                s.cutoffs,
                s.discarded_at_window_end,
            ]
            .map(|c| c.to_string()),
        );
        w.write_record(row)?;
    }
    w.flush().map_err(io_err(path))
}

/// Tab-separated `time_s event link outcome` lines under a header.
pub fn write_log(path: &Path, log: &[LogRecord]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().delimiter(b'\t').from_path(path)?;
    w.write_record(["time_s", "event", "link", "outcome"])?;
    for r in log {
        w.write_record([fmt_float(r.time_s).as_str(), r.event, &r.link, &r.outcome])?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_table(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush().map_err(io_err(path))
}

/// Output directory whose files become visible only on [`Staging::commit`].
///
/// Files are written into a hidden temporary directory inside `out`; dropping
/// the stage without committing deletes them, and removes `out` too if this
/// stage created it and it is still empty.
pub struct Staging {
    out: PathBuf,
    created_out: bool,
    tmp: Option<TempDir>,
    files: Vec<PathBuf>,
}

impl Staging {
    pub fn new(out: &Path) -> Result<Self> {
        let created_out = !out.exists();
        fs::create_dir_all(out).map_err(io_err(out))?;
        let tmp = tempfile::Builder::new()
            .prefix(".dqs-staging-")
            .tempdir_in(out)
            .map_err(io_err(out))?;
        Ok(Self {
            out: out.into(),
            created_out,
            tmp: Some(tmp),
            files: Vec::new(),
        })
    }

    /// Staging path for `relative`, creating parent directories.
    pub fn file(&mut self, relative: impl AsRef<Path>) -> Result<PathBuf> {
        let relative = relative.as_ref();
        let path = self.tmp.as_ref().expect("live stage").path().join(relative);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
        self.files.push(relative.into());
        Ok(path)
    }

    /// Moves every staged file into place and returns the final paths.
    pub fn commit(mut self) -> Result<Vec<PathBuf>> {
        let tmp = self.tmp.take().expect("live stage");
        let mut done = Vec::with_capacity(self.files.len());
        for relative in &self.files {
            let target = self.out.join(relative);
            if let Some(parent) = target.parent() {
                fs::create_dir_all(parent).map_err(io_err(parent))?;
            }
            fs::rename(tmp.path().join(relative), &target).map_err(io_err(&target))?;
            done.push(target);
        }
        tmp.close().map_err(io_err(&self.out))?;
        Ok(done)
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if let Some(tmp) = self.tmp.take() {
            let _ = tmp.close();
            if self.created_out {
                let _ = fs::remove_dir(&self.out);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(fmt_float(0.5096301), "0.5096301");
        assert_eq!(fmt_float(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_float(2.0 / 3.0), "0.666666666667");
        assert_eq!(fmt_float(98.76543210987654), "98.7654321099");
        assert_eq!(fmt_float(3.0), "3");
        assert_eq!(fmt_float(-0.25), "-0.25");
        assert_eq!(fmt_float(1.5e-7), "1.5e-7");
        assert_eq!(fmt_float(6.02214076e23), "6.02214076e23");
        assert_eq!(fmt_float(0.0), "0");
    }

    #[test]
    fn dropped_stage_leaves_nothing() {
        let root = tempfile::tempdir().unwrap();
        let out = root.path().join("run");
        {
            let mut stage = Staging::new(&out).unwrap();
            fs::write(stage.file("logs/a.tsv").unwrap(), "x").unwrap();
        }
        assert!(!out.exists());
        let mut stage = Staging::new(&out).unwrap();
        fs::write(stage.file("logs/a.tsv").unwrap(), "x").unwrap();
        let files = stage.commit().unwrap();
        assert_eq!(files, vec![out.join("logs/a.tsv")]);
        assert_eq!(fs::read_dir(&out).unwrap().count(), 1);
    }
}
