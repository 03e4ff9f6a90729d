//! Trajectory CSV files: one header row, one row per sample, numbers with
//! 12 significant digits.

use std::fs;
use std::path::Path;

use crate::sim::TrajectoryLog;

use super::CliError;

pub const SIGNIFICANT_DIGITS: usize = 12;

/// Formats `x` with 12 significant digits, fixed-point for moderate
/// magnitudes and scientific otherwise.
pub fn format_number(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..SIGNIFICANT_DIGITS as i32).contains(&exp) {
        let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn trajectory_header(log: &TrajectoryLog) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    fn idx(prefix: &'static str, n: usize) -> impl Iterator<Item = String> {
        (1..=n).map(move |i| format!("{prefix}_{i}"))
    }
    h.extend(idx("y", log.output_dim));
    h.extend(idx("ystar", log.output_dim));
    h.push("err".into());
    h.extend(idx("u", log.input_dim));
    if log.has_barrier() {
        let p = log.constraint_count();
        h.extend(idx("f", p));
        h.extend(idx("lam", p));
        h.push("c".into());
        h.push("s".into());
    }
    h
}

pub fn trajectory_csv(log: &TrajectoryLog) -> Result<String, CliError> {
    if log.is_empty() {
        return Err(CliError::Output("cannot write an empty trajectory log".into()));
    }
    let mut out = trajectory_header(log).join(",");
    out.push('\n');
    for j in 0..log.len() {
        let mut row = vec![log.times[j]];
        row.extend(&log.outputs[j]);
        row.extend(&log.optimum[j]);
        row.push(log.errors[j]);
        row.extend(&log.inputs[j]);
        if log.has_barrier() {
            row.extend(&log.constraint_values[j]);
            row.extend(&log.multipliers[j]);
            row.push(log.barrier_c[j]);
            row.push(log.barrier_s[j]);
        }
        let fields: Vec<String> = row.into_iter().map(format_number).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    Ok(out)
}

pub fn write_trajectory_csv(log: &TrajectoryLog, path: &Path) -> Result<(), CliError> {
    let text = trajectory_csv(log)?;
    fs::write(path, text).map_err(|e| CliError::Output(format!("writing {}: {e}", path.display())))
}

/// A parsed trajectory file.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<String> = lines
            .next()
            .ok_or_else(|| CliError::Config("trajectory file is empty".into()))?
            .split(',')
            .map(|s| s.trim().to_string())
            .collect();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let row = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| CliError::Config(format!("row {}: {e}", i + 2)))?;
            if row.len() != header.len() {
                return Err(CliError::Config(format!(
                    "row {} has {} fields, header has {}",
                    i + 2,
                    row.len(),
                    header.len()
                )));
            }
            rows.push(row);
        }
        Ok(Self { header, rows })
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("reading {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    /// Columns `prefix_1, prefix_2, ..` in order, row by row.
    pub fn indexed(&self, prefix: &str) -> Vec<Vec<f64>> {
        let cols: Vec<usize> = (1..)
            .map_while(|i| self.header.iter().position(|h| *h == format!("{prefix}_{i}")))
            .collect();
        self.rows.iter().map(|r| cols.iter().map(|&c| r[c]).collect()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log(m: usize, mu: usize, p: Option<usize>) -> TrajectoryLog {
        let mut log = TrajectoryLog {
            output_dim: m,
            input_dim: mu,
            ..Default::default()
        };
        for j in 0..3 {
            let t = j as f64 * 0.1;
            log.times.push(t);
            log.outputs.push((0..m).map(|i| (t + i as f64).sin() * 1e3).collect());
            log.optimum.push((0..m).map(|i| (t - i as f64).cos() / 7.0).collect());
            log.errors.push((-t).exp() * 1e-9 / 3.0);
            log.inputs.push((0..mu).map(|i| i as f64 - t * std::f64::consts::PI).collect());
            if let Some(p) = p {
                log.constraint_values.push(vec![-0.5 - t; p]);
                log.multipliers.push(vec![2.0 / 3.0; p]);
                log.barrier_c.push(t.exp());
                log.barrier_s.push(0.0);
            }
        }
        log
    }

    #[test]
    fn twelve_digit_formatting() {
        assert_eq!(format_number(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_number(-2.5), "-2.5");
        assert_eq!(format_number(12.0), "12");
        assert_eq!(format_number(123456789.0123456), "123456789.012");
        assert_eq!(format_number(1.0 / 3.0 * 1e-9), "3.33333333333e-10");
        assert_eq!(format_number(6.02214076e23), "6.02214076e23");
        assert_eq!(format_number(0.0), "0");
    }

    #[test]
    fn integrator_header() {
        assert_eq!(trajectory_header(&log(2, 2, None)).join(","), "t,y_1,y_2,ystar_1,ystar_2,err,u_1,u_2");
    }

    #[test]
    fn constrained_header() {
        let h = trajectory_header(&log(4, 4, Some(1))).join(",");
        assert!(h.ends_with(",u_4,f_1,lam_1,c,s"), "{h}");
    }

    #[test]
    fn round_trip_to_twelve_digits() {
        let l = log(4, 4, Some(2));
        let text = trajectory_csv(&l).unwrap();
        assert!(text.ends_with('\n') && !text.contains('\r'));
        let table = CsvTable::parse(&text).unwrap();
        assert_eq!(table.rows.len(), 3);
        let again = {
            let mut s = table.header.join(",");
            s.push('\n');
            for r in &table.rows {
                s.push_str(&r.iter().map(|x| format_number(*x)).collect::<Vec<_>>().join(","));
                s.push('\n');
            }
            s
        };
        assert_eq!(again, text);
        let err = table.column("err").unwrap();
        for (a, b) in err.iter().zip(&l.errors) {
            assert!((a - b).abs() <= 5e-12 * b.abs());
        }
        assert_eq!(table.indexed("lam")[0], vec![2.0 / 3.0; 2].iter().map(|x| format_number(*x).parse().unwrap()).collect::<Vec<f64>>());
    }

    #[test]
    fn empty_log_is_rejected() {
        assert!(trajectory_csv(&TrajectoryLog::default()).is_err());
    }
}
