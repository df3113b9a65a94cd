//! CSV artifacts and key=value reports.
//!
//! Every float is written with `{:.16e}`, i.e. 17 significant digits, so files
//! round-trip bit-exactly and compare byte-for-byte across runs.

use std::io::{Read, Write};

use crate::control::{ControlResult, ControlSignal, ControlWindow};
use crate::elliptic::EigenDecomposition;
use crate::error::{Result, SloshError};
use crate::evolution::Trajectory;

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn row<W: Write>(w: &mut csv::Writer<W>, values: impl IntoIterator<Item = f64>) -> Result<()> {
    w.write_record(values.into_iter().map(fmt_f64))?;
    Ok(())
}

/// Columns `t, a_0..a_{N−1}, adot_0..adot_{N−1}, E_total, E_cons`.
pub fn write_trajectory<W: Write>(traj: &Trajectory, out: W) -> Result<()> {
    let size = traj.last().len();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend((0..size).map(|n| format!("a_{n}")));
    header.extend((0..size).map(|n| format!("adot_{n}")));
    header.push("E_total".into());
    header.push("E_cons".into());
    w.write_record(&header)?;
    for (s, e) in traj.states.iter().zip(&traj.energies) {
        row(
            &mut w,
            std::iter::once(s.t)
                .chain(s.a.as_slice().iter().copied())
                .chain(s.adot.as_slice().iter().copied())
                .chain([e.total, e.conserved]),
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `n, lambda, c_0..c_{N−1}`, one row per mode.
pub fn write_modes<W: Write>(eig: &EigenDecomposition, out: W) -> Result<()> {
    let size = eig.vectors.first().map_or(0, |v| v.len());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["n".to_string(), "lambda".to_string()];
    header.extend((0..size).map(|k| format!("c_{k}")));
    w.write_record(&header)?;
    for (n, (lambda, v)) in eig.values.iter().zip(&eig.vectors).enumerate() {
        let mut record = vec![n.to_string(), fmt_f64(*lambda)];
        record.extend(v.as_slice().iter().map(|c| fmt_f64(*c)));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `t, x_0..x_{N−1}`: one row per time sample, values at the grid
/// nodes in grid order.
pub fn write_control<W: Write>(signal: &ControlSignal, out: W) -> Result<()> {
    let size = signal.grid().size();
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend((0..size).map(|j| format!("x_{j}")));
    w.write_record(&header)?;
    for (t, values) in signal.times().iter().zip(signal.values()) {
        row(&mut w, std::iter::once(*t).chain(values.iter().copied()))?;
    }
    w.flush()?;
    Ok(())
}

/// Inverse of [`write_control`]; the window supplies the grid and support.
pub fn read_control<R: Read>(input: R, window: &ControlWindow) -> Result<ControlSignal> {
    let size = window.grid().size();
    let mut r = csv::Reader::from_reader(input);
    let width = r.headers()?.len();
    if width != size + 1 {
        return Err(SloshError::GridMismatch(format!(
            "control file has {} node columns, grid has {size}",
            width.saturating_sub(1)
        )));
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    for record in r.records() {
        let record = record?;
        let parsed = record
            .iter()
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| SloshError::Parse(format!("{s:?}: {e}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        times.push(parsed[0]);
        values.push(parsed[1..].to_vec());
    }
    ControlSignal::new(times, window, values)
}

/// Line-oriented `key=value` report; keys keep insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    entries: Vec<(String, String)>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) -> &mut Self {
        self.entries.push((key.into(), value.to_string()));
        self
    }

    pub fn push_f64(&mut self, key: impl Into<String>, value: f64) -> &mut Self {
        self.push(key, fmt_f64(value))
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .rev()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        for (k, v) in &self.entries {
            writeln!(out, "{k}={v}")?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut report = Self::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| SloshError::Parse(format!("line {}: missing '='", i + 1)))?;
            report.push(k, v);
        }
        Ok(report)
    }
}

/// Summary of a synthesis run, prefixed with `control.`.
pub fn control_report(result: &ControlResult, report: &mut Report) {
    report
        .push("control.converged", result.converged)
        .push("control.iterations", result.iterations())
        .push_f64("control.misfit", result.misfit)
        .push_f64("control.achieved_eps", result.achieved_eps())
        .push_f64("control.norm", result.signal.norm_sq().sqrt());
    if let Some(first) = result.log.first() {
        report.push_f64("control.initial_misfit", first.misfit);
    }
    for r in &result.log {
        report.push(
            format!("control.log.{}", r.iteration),
            format!(
                "residual:{} gradient:{} objective:{} misfit:{}",
                fmt_f64(r.residual),
                fmt_f64(r.gradient),
                fmt_f64(r.objective),
                fmt_f64(r.misfit)
            ),
        );
    }
}
