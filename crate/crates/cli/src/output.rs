//! Trajectory files and fixed-layout numeric printing.

use std::io::{self, BufRead, Write};

use nalgebra::DMatrix;

use geodissip::integrate::{ControlMode, Trajectory, TrajectorySample};

use crate::config::Format;

/// Shortest decimal that parses back to the same f64. Integral values
/// below 1e16 are printed without a fractional part.
pub fn format_real(v: f64) -> String {
    if v.is_finite() && v.fract() == 0.0 && v.abs() < 1e16 {
        format!("{v}")
    } else {
        format!("{v:?}")
    }
}

pub fn format_vector(v: &[f64]) -> String {
    v.iter().map(|x| format_real(*x)).collect::<Vec<_>>().join(" ")
}

/// Row-major, one line per row.
pub fn format_matrix(m: &DMatrix<f64>) -> String {
    (0..m.nrows())
        .map(|i| format_vector(&m.row(i).iter().copied().collect::<Vec<_>>()))
        .collect::<Vec<_>>()
        .join("\n")
}

pub fn csv_header(n: usize, k: usize, rate: bool) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend((1..=n).map(|i| format!("x{i}")));
    h.extend((1..=k).map(|i| format!("F{i}")));
    h.extend(["G", "detSigma_full", "dG_dt_fd"].map(String::from));
    if rate {
        h.push("h".into());
    }
    h
}

fn thinned(traj: &Trajectory, stride: usize) -> impl Iterator<Item = &TrajectorySample> {
    traj.samples.iter().step_by(stride.max(1))
}

pub fn write_csv<W: Write>(traj: &Trajectory, stride: usize, out: W) -> io::Result<()> {
    let rate = traj.mode == ControlMode::Rate;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(csv_header(traj.dim(), traj.k(), rate))?;
    for s in thinned(traj, stride) {
        let mut row = vec![format_real(s.t)];
        row.extend(s.x.iter().map(|v| format_real(*v)));
        row.extend(s.f_values.iter().map(|v| format_real(*v)));
        row.extend([s.g_value, s.det_sigma_full, s.g_rate_fd].map(format_real));
        if rate {
            row.push(s.h_value.map_or_else(String::new, format_real));
        }
        w.write_record(&row)?;
    }
    w.flush()
}

pub fn write_jsonl<W: Write>(traj: &Trajectory, stride: usize, mut out: W) -> io::Result<()> {
    for s in thinned(traj, stride) {
        serde_json::to_writer(&mut out, s)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn write_trajectory<W: Write>(traj: &Trajectory, format: Format, stride: usize, out: W) -> io::Result<()> {
    match format {
        Format::Csv => write_csv(traj, stride, out),
        Format::Jsonl => write_jsonl(traj, stride, out),
    }
}

fn bad(msg: impl Into<String>) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg.into())
}

/// Parses a file written by [`write_csv`]; the dimensions come from the
/// header, and an `h` column marks a rate-mode run.
pub fn read_csv<R: io::Read>(input: R, mode_without_h: ControlMode) -> io::Result<Trajectory> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(String::from).collect();
    let rate = header.last().is_some_and(|h| h == "h");
    let n = header.iter().filter(|c| c.starts_with('x')).count();
    let k = header.iter().filter(|c| c.starts_with('F')).count();
    if header != csv_header(n, k, rate) {
        return Err(bad(format!("unexpected header {header:?}")));
    }
    let mut samples = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let vals = rec
            .iter()
            .map(|f| if f.is_empty() { Ok(f64::NAN) } else { f.parse::<f64>().map_err(|e| bad(e.to_string())) })
            .collect::<io::Result<Vec<f64>>>()?;
        if vals.len() != header.len() {
            return Err(bad("row length differs from header"));
        }
        let at = 1 + n + k;
        samples.push(TrajectorySample {
            t: vals[0],
            x: vals[1..1 + n].to_vec(),
            f_values: vals[1 + n..at].to_vec(),
            g_value: vals[at],
            det_sigma_full: vals[at + 1],
            g_rate_fd: vals[at + 2],
            h_value: if rate { Some(vals[at + 3]) } else { None },
        });
    }
    let mode = if rate { ControlMode::Rate } else { mode_without_h };
    Ok(Trajectory { mode, samples })
}

pub fn read_jsonl<R: BufRead>(input: R, mode: ControlMode) -> io::Result<Trajectory> {
    let mut samples = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        samples.push(serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?);
    }
    Ok(Trajectory { mode, samples })
}
