use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::grid::{CellReport, ErrorReport, TrialResult};
use super::trial::{ControllerKind, FlightLog};
use crate::error::{Error, Result};
use crate::indi::ResidualEstimate;

/// Hardware reference result: mean and standard deviation in metres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HardwareResult {
    pub payload: bool,
    pub controller: ControllerKind,
    pub trajectory: &'static str,
    pub mean: f64,
    pub std: f64,
}

const fn hw(payload: bool, controller: ControllerKind, trajectory: &'static str, mean: f64, std: f64) -> HardwareResult {
    HardwareResult { payload, controller, trajectory, mean, std }
}

/// Published hardware flight results, shown next to simulated numbers for
/// context only. Missing cells are flights that failed on hardware.
pub const HARDWARE_RESULTS: [HardwareResult; 25] = {
    use ControllerKind::*;
    [
        hw(false, Lee, "circle", 0.0752, 0.0122),
        hw(false, Lee, "figure8", 0.0729, 0.0031),
        hw(false, IndiPwm, "circle", 0.1827, 0.0097),
        hw(false, IndiPwm, "figure8", 0.1889, 0.0182),
        hw(false, Indi, "circle", 0.0455, 0.0024),
        hw(false, Indi, "figure8", 0.0453, 0.0031),
        hw(false, Indi, "helix", 0.0316, 0.0019),
        hw(false, Ilndi, "circle", 0.0482, 0.0024),
        hw(false, Ilndi, "figure8", 0.0432, 0.0024),
        hw(false, Ilndi, "helix", 0.0290, 0.0015),
        hw(false, NaIndi, "circle", 0.0450, 0.0028),
        hw(false, NaIndi, "figure8", 0.0413, 0.0013),
        hw(false, NaIndi, "helix", 0.0286, 0.0011),
        hw(true, Lee, "circle", 0.1974, 0.0172),
        hw(true, Lee, "figure8", 0.3014, 0.0287),
        hw(true, Lee, "helix", 0.1488, 0.0332),
        hw(true, Indi, "circle", 0.1263, 0.0291),
        hw(true, Indi, "figure8", 0.1731, 0.0223),
        hw(true, Indi, "helix", 0.1144, 0.0462),
        hw(true, Ilndi, "circle", 0.1318, 0.0233),
        hw(true, Ilndi, "figure8", 0.2496, 0.0223),
        hw(true, Ilndi, "helix", 0.1197, 0.0518),
        hw(true, NaIndi, "circle", 0.1554, 0.0396),
        hw(true, NaIndi, "figure8", 0.1829, 0.0306),
        hw(true, NaIndi, "helix", 0.1469, 0.0557),
    ]
};

pub fn hardware_result(controller: ControllerKind, trajectory: &str, payload: bool) -> Option<HardwareResult> {
    HARDWARE_RESULTS.iter().copied().find(|h| h.controller == controller && h.trajectory == trajectory && h.payload == payload)
}

fn fmt_cell(c: Option<&CellReport>) -> String {
    match c {
        Some(c) if !c.crashed() => format!("{:.4} ± {:.4}", c.mean(), c.std()),
        Some(_) => "--".into(),
        None => "".into(),
    }
}

fn fmt_hw(h: Option<HardwareResult>) -> String {
    h.map_or_else(|| "--".into(), |h| format!("{:.4} ± {:.4}", h.mean, h.std))
}

/// One table per payload mode: rows are controllers, columns trajectories.
/// Crashed cells print as `--`.
pub fn markdown(report: &ErrorReport) -> String {
    let mut out = String::new();
    for payload in [false, true] {
        let controllers = report.controllers(payload);
        if controllers.is_empty() {
            continue;
        }
        let trajectories = report.trajectories(payload);
        let title = if payload { "with payload" } else { "no payload" };
        let _ = writeln!(out, "## Mean tracking error (m), {title}\n");
        let _ = writeln!(out, "| controller | {} |", trajectories.join(" | "));
        let _ = writeln!(out, "|---|{}", "---|".repeat(trajectories.len()));
        for &c in &controllers {
            let cells: Vec<String> = trajectories.iter().map(|t| fmt_cell(report.cell(c, t, payload))).collect();
            let _ = writeln!(out, "| {c} | {} |", cells.join(" | "));
        }
        let _ = writeln!(out, "\n### hardware reference, context only\n");
        let _ = writeln!(out, "| controller | {} |", trajectories.join(" | "));
        let _ = writeln!(out, "|---|{}", "---|".repeat(trajectories.len()));
        for &c in &controllers {
            let cells: Vec<String> = trajectories.iter().map(|t| fmt_hw(hardware_result(c, t, payload))).collect();
            let _ = writeln!(out, "| {c} | {} |", cells.join(" | "));
        }
        out.push('\n');
    }
    out
}

const TRIAL_HEADER: [&str; 6] = ["payload", "controller", "trajectory", "seed", "error", "crashed"];
const SUMMARY_HEADER: [&str; 9] =
    ["payload", "controller", "trajectory", "trials", "mean", "std", "crashed", "hardware_mean", "hardware_std"];

/// Per-trial CSV; [`read_trials_csv`] rebuilds the identical report.
pub fn write_trials_csv(report: &ErrorReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(TRIAL_HEADER).map_err(|e| Error::csv(path, e))?;
    for c in &report.cells {
        for t in &c.trials {
            w.write_record([
                u8::from(c.payload).to_string(),
                c.controller.to_string(),
                c.trajectory.clone(),
                t.seed.to_string(),
                t.error.to_string(),
                u8::from(t.crashed).to_string(),
            ])
            .map_err(|e| Error::csv(path, e))?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn parse_flag(path: &Path, s: &str) -> Result<bool> {
    match s {
        "0" => Ok(false),
        "1" => Ok(true),
        _ => Err(Error::parse(path, format!("expected 0 or 1, found '{s}'"))),
    }
}

pub fn read_trials_csv(path: &Path) -> Result<ErrorReport> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let header = r.headers().map_err(|e| Error::csv(path, e))?.clone();
    if header.iter().ne(TRIAL_HEADER) {
        return Err(Error::parse(path, "unexpected trial-table header"));
    }
    let mut cells: Vec<CellReport> = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| Error::csv(path, e))?;
        if rec.len() != TRIAL_HEADER.len() {
            return Err(Error::parse(path, "wrong column count"));
        }
        let payload = parse_flag(path, &rec[0])?;
        let controller: ControllerKind = rec[1].parse()?;
        let trajectory = rec[2].to_string();
        let seed = rec[3].parse().map_err(|_| Error::parse(path, format!("bad seed '{}'", &rec[3])))?;
        let error = rec[4].parse().map_err(|_| Error::parse(path, format!("bad error '{}'", &rec[4])))?;
        let crashed = parse_flag(path, &rec[5])?;
        let trial = TrialResult { seed, error, crashed };
        match cells.iter_mut().find(|c| c.controller == controller && c.trajectory == trajectory && c.payload == payload) {
            Some(c) => c.trials.push(trial),
            None => cells.push(CellReport { controller, trajectory, payload, trials: vec![trial] }),
        }
    }
    let cells = cells.into_iter().map(|c| CellReport::new(c.controller, c.trajectory, c.payload, c.trials)).collect();
    Ok(ErrorReport { cells })
}

pub fn write_summary_csv(report: &ErrorReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    w.write_record(SUMMARY_HEADER).map_err(|e| Error::csv(path, e))?;
    for c in &report.cells {
        let h = hardware_result(c.controller, &c.trajectory, c.payload);
        w.write_record([
            u8::from(c.payload).to_string(),
            c.controller.to_string(),
            c.trajectory.clone(),
            c.trials.len().to_string(),
            c.mean().to_string(),
            c.std().to_string(),
            u8::from(c.crashed()).to_string(),
            h.map_or(String::new(), |h| h.mean.to_string()),
            h.map_or(String::new(), |h| h.std.to_string()),
        ])
        .map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn residual_cols(prefix: &str) -> impl Iterator<Item = String> + '_ {
    ["fx", "fy", "fz", "tx", "ty", "tz"].into_iter().map(move |a| format!("{prefix}_{a}"))
}

fn opt_values(e: Option<ResidualEstimate>) -> [f64; 6] {
    e.map_or([f64::NAN; 6], |e| e.to_array())
}

/// Per-tick trace: tracking error and the residual streams on one timebase.
pub fn write_trace_csv(log: &FlightLog, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut header = vec!["t".to_string(), "error".to_string()];
    for s in ["true", "indi", "nn", "applied"] {
        header.extend(residual_cols(s));
    }
    w.write_record(&header).map_err(|e| Error::csv(path, e))?;
    for r in &log.rows {
        let mut row = vec![r.t, r.error];
        row.extend(r.true_residual.to_array());
        row.extend(opt_values(r.indi));
        row.extend(opt_values(r.nn));
        row.extend(r.applied.to_array());
        w.write_record(row.iter().map(f64::to_string)).map_err(|e| Error::csv(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn trace_file_name(log: &FlightLog) -> String {
    format!("trace_{}_{}_{}.csv", if log.payload { "payload" } else { "free" }, log.controller, log.trajectory)
}

/// Writes `table.md`, `trials.csv`, `summary.csv` and one trace per log.
pub fn emit_report(report: &ErrorReport, logs: &[FlightLog], dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let md = dir.join("table.md");
    fs::write(&md, markdown(report)).map_err(|e| Error::io(&md, e))?;
    written.push(md);
    let trials = dir.join("trials.csv");
    write_trials_csv(report, &trials)?;
    written.push(trials);
    let summary = dir.join("summary.csv");
    write_summary_csv(report, &summary)?;
    written.push(summary);
    for log in logs {
        let p = dir.join(trace_file_name(log));
        write_trace_csv(log, &p)?;
        written.push(p);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report() -> ErrorReport {
        let t = |seed, error, crashed| TrialResult { seed, error, crashed };
        ErrorReport {
            cells: vec![
                CellReport::new(ControllerKind::Lee, "circle".into(), false, vec![t(0, 0.0712345678901, false), t(1, 0.07, false)]),
                CellReport::new(ControllerKind::Lee, "figure8".into(), false, vec![t(0, 0.06, false), t(1, 2.1, true)]),
                CellReport::new(ControllerKind::Indi, "circle".into(), false, vec![t(0, 0.04, false), t(1, 0.041, false)]),
                CellReport::new(ControllerKind::Indi, "figure8".into(), false, vec![t(0, 0.03, false), t(1, 1.0 / 3.0, false)]),
            ],
        }
    }

    #[test]
    fn markdown_layout() {
        let md = markdown(&report());
        let table: Vec<&str> = md.lines().skip_while(|l| !l.starts_with("| controller")).take(4).collect();
        assert_eq!(table[0], "| controller | circle | figure8 |");
        assert!(table[2].starts_with("| lee | 0.0706 ± "));
        assert!(table[2].ends_with("| -- |"));
        assert!(table[3].starts_with("| indi |"));
        assert!(md.contains("hardware reference"));
        assert!(md.contains("0.0729 ± 0.0031"));
    }

    #[test]
    fn csv_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        let r = report();
        write_trials_csv(&r, &p).unwrap();
        assert_eq!(read_trials_csv(&p).unwrap(), r);
    }

    #[test]
    fn hardware_lookup() {
        assert_eq!(hardware_result(ControllerKind::Lee, "figure8", false).unwrap().mean, 0.0729);
        assert_eq!(hardware_result(ControllerKind::Indi, "figure8", false).unwrap().mean, 0.0453);
        assert_eq!(hardware_result(ControllerKind::NaIndi, "figure8", false).unwrap().mean, 0.0413);
        assert_eq!(hardware_result(ControllerKind::Indi, "circle", true).unwrap().mean, 0.1263);
        assert_eq!(hardware_result(ControllerKind::Ilndi, "circle", true).unwrap().mean, 0.1318);
        assert!(hardware_result(ControllerKind::Lee, "helix", false).is_none());
    }
}
