//! CSV and JSON output.
//!
//! Run files have one row per time step `k = 0 … T_c` with columns
//! `k, x1…xn, u1…um, N_star, branch, solve_ms`; the input, horizon and branch
//! cells of the final row are empty, as is `solve_ms` unless timing output
//! was requested. Floats use the shortest round-trip representation, so equal
//! runs give byte-identical files.

use std::io::Write;

use serde::Serialize;

use super::campaign::RoaReport;
use crate::controller::RunLog;
use crate::error::Result;

fn float_cells(v: &[f64]) -> impl Iterator<Item = String> + '_ {
    v.iter().map(|x| x.to_string())
}

pub fn write_run_csv<W: Write>(log: &RunLog, out: W, timing: bool) -> Result<()> {
    let n = log.x_hist.first().map_or(0, |x| x.len());
    let m = log.u_hist.first().map_or(0, |u| u.len());
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["k".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    header.extend((1..=m).map(|i| format!("u{i}")));
    header.extend(["N_star", "branch", "solve_ms"].map(String::from));
    w.write_record(&header)?;
    for (k, x) in log.x_hist.iter().enumerate() {
        let mut row = vec![k.to_string()];
        row.extend(float_cells(x.as_slice()));
        match log.u_hist.get(k) {
            Some(u) => {
                row.extend(float_cells(u.as_slice()));
                row.push(log.n_star_hist[k].to_string());
                row.push(log.branch_hist[k].as_str().to_string());
                row.push(if timing {
                    format!("{:.3}", log.solve_ms_hist[k])
                } else {
                    String::new()
                });
            }
            None => row.extend(std::iter::repeat_n(String::new(), m + 3)),
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `x1…xn, feasible, N0_star`.
pub fn write_roa_csv<W: Write>(report: &RoaReport, out: W) -> Result<()> {
    let n = report.points.first().map_or(0, |p| p.x0.len());
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    header.extend(["feasible", "N0_star"].map(String::from));
    w.write_record(&header)?;
    for p in &report.points {
        let mut row: Vec<String> = float_cells(p.x0.as_slice()).collect();
        row.push(p.feasible.to_string());
        row.push(p.n0.map(|n| n.to_string()).unwrap_or_default());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<W: Write, T: Serialize>(value: &T, mut out: W) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::Branch;
    use crate::setalg::{Matrix, Vector};
    use crate::sim::campaign::RoaPoint;

    fn tiny_log() -> RunLog {
        RunLog {
            seed: 1,
            plant_a: Matrix::identity(1, 1),
            plant_b: Matrix::identity(1, 1),
            x_hist: vec![Vector::from_element(1, 2.0), Vector::from_element(1, 0.5)],
            u_hist: vec![Vector::from_element(1, -1.5)],
            n_star_hist: vec![1],
            branch_hist: vec![Branch::Initial],
            terminal_generators_hist: vec![0],
            delta_hist: vec![Vector::zeros(1)],
            solve_ms_hist: vec![1.25],
            candidate_residual_hist: vec![],
            t_l: 0,
            t_c: 1,
        }
    }

    #[test]
    fn run_csv_layout() {
        let mut buf = Vec::new();
        write_run_csv(&tiny_log(), &mut buf, false).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "k,x1,u1,N_star,branch,solve_ms\n0,2,-1.5,1,initial,\n1,0.5,,,,\n");
        let mut buf = Vec::new();
        write_run_csv(&tiny_log(), &mut buf, true).unwrap();
        assert!(String::from_utf8(buf).unwrap().contains("initial,1.250"));
    }

    #[test]
    fn roa_csv_layout() {
        let r = RoaReport {
            points: vec![
                RoaPoint {
                    x0: Vector::from_vec(vec![1.0, 0.0]),
                    feasible: true,
                    n0: Some(3),
                },
                RoaPoint {
                    x0: Vector::from_vec(vec![9.0, 0.0]),
                    feasible: false,
                    n0: None,
                },
            ],
        };
        let mut buf = Vec::new();
        write_roa_csv(&r, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "x1,x2,feasible,N0_star\n1,0,true,3\n9,0,false,\n"
        );
    }
}
