//! Plain-text trajectory logs.
//!
//! Comma-separated, one header line, one row per sensor event. Fields that do
//! not apply to a row are left empty. Floats are written in shortest
//! round-trip form so a log re-read is bit-identical to what was written.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::harness::experiment::{RowKind, TrajectoryRecord};
use crate::kinematics::BodyTwist;
use crate::metrics::{ErrorSeries, Source, Summary};
use crate::odometry::Pose2D;

pub const COLUMNS: [&str; 20] = [
    "t",
    "kind",
    "gt_x",
    "gt_y",
    "gt_theta",
    "twist_vx",
    "twist_vy",
    "twist_omega",
    "odom_x",
    "odom_y",
    "odom_theta",
    "ips_x",
    "ips_y",
    "ekf_x",
    "ekf_y",
    "ekf_theta",
    "p11",
    "p22",
    "p33",
    "nis",
];

fn push_opt(line: &mut String, v: Option<f64>) {
    line.push(',');
    if let Some(v) = v {
        write!(line, "{v}").unwrap();
    }
}

pub fn format_row(r: &TrajectoryRecord) -> String {
    let mut line = format!(
        "{},{},{},{},{}",
        r.t,
        r.kind.label(),
        r.truth.x,
        r.truth.y,
        r.truth.theta
    );
    push_opt(&mut line, r.twist.map(|t| t.vx));
    push_opt(&mut line, r.twist.map(|t| t.vy));
    push_opt(&mut line, r.twist.map(|t| t.omega));
    push_opt(&mut line, r.odometry.map(|p| p.x));
    push_opt(&mut line, r.odometry.map(|p| p.y));
    push_opt(&mut line, r.odometry.map(|p| p.theta));
    push_opt(&mut line, r.ips.map(|p| p.0));
    push_opt(&mut line, r.ips.map(|p| p.1));
    for v in [
        r.ekf.x,
        r.ekf.y,
        r.ekf.theta,
        r.variances[0],
        r.variances[1],
        r.variances[2],
    ] {
        push_opt(&mut line, Some(v));
    }
    push_opt(&mut line, r.nis);
    line
}

pub fn write_log<W: Write>(mut out: W, rows: &[TrajectoryRecord]) -> Result<()> {
    writeln!(out, "{}", COLUMNS.join(","))?;
    for r in rows {
        writeln!(out, "{}", format_row(r))?;
    }
    out.flush()?;
    Ok(())
}

struct RowParser<'a> {
    fields: Vec<&'a str>,
    row: usize,
}

impl RowParser<'_> {
    fn opt(&self, col: usize) -> Result<Option<f64>> {
        let raw = self.fields[col].trim();
        if raw.is_empty() {
            return Ok(None);
        }
        let v: f64 = raw.parse().map_err(|_| Error::Parse {
            row: self.row,
            message: format!(
                "column `{}`: cannot parse {raw:?} as a number",
                COLUMNS[col]
            ),
        })?;
        if !v.is_finite() {
            return Err(Error::Parse {
                row: self.row,
                message: format!("column `{}` is not finite", COLUMNS[col]),
            });
        }
        Ok(Some(v))
    }

    fn req(&self, col: usize) -> Result<f64> {
        self.opt(col)?.ok_or_else(|| Error::Parse {
            row: self.row,
            message: format!("column `{}` is empty", COLUMNS[col]),
        })
    }

    fn all_or_none<const N: usize>(&self, cols: [usize; N]) -> Result<Option<[f64; N]>> {
        let vals: Vec<Option<f64>> = cols.iter().map(|c| self.opt(*c)).collect::<Result<_>>()?;
        if vals.iter().all(Option::is_none) {
            return Ok(None);
        }
        let mut out = [0.0; N];
        for (i, v) in vals.into_iter().enumerate() {
            out[i] = v.ok_or_else(|| Error::Parse {
                row: self.row,
                message: format!(
                    "column `{}` is empty while its group is filled",
                    COLUMNS[cols[i]]
                ),
            })?;
        }
        Ok(Some(out))
    }
}

/// Parses one data line; `row` is its 1-based line number in the file.
pub fn parse_row(line: &str, row: usize) -> Result<TrajectoryRecord> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != COLUMNS.len() {
        return Err(Error::Parse {
            row,
            message: format!("expected {} fields, found {}", COLUMNS.len(), fields.len()),
        });
    }
    let p = RowParser { fields, row };
    let kind = match p.fields[1].trim() {
        "twist" => RowKind::Twist,
        "fix" => RowKind::Fix,
        other => {
            return Err(Error::Parse {
                row,
                message: format!("unknown row kind {other:?}"),
            })
        }
    };
    let twist = p
        .all_or_none([5, 6, 7])?
        .map(|[vx, vy, w]| BodyTwist::new(vx, vy, w));
    let ips = p.all_or_none([11, 12])?.map(|[x, y]| (x, y));
    match (kind, twist, ips) {
        (RowKind::Twist, None, _) => {
            return Err(Error::Parse {
                row,
                message: "twist row without twist columns".into(),
            })
        }
        (RowKind::Fix, _, None) => {
            return Err(Error::Parse {
                row,
                message: "fix row without ips columns".into(),
            })
        }
        _ => {}
    }
    let raw_pose = |[x, y, theta]: [f64; 3]| Pose2D { x, y, theta };
    Ok(TrajectoryRecord {
        t: p.req(0)?,
        kind,
        truth: raw_pose([p.req(2)?, p.req(3)?, p.req(4)?]),
        twist,
        odometry: p.all_or_none([8, 9, 10])?.map(raw_pose),
        ips,
        ekf: raw_pose([p.req(13)?, p.req(14)?, p.req(15)?]),
        variances: [p.req(16)?, p.req(17)?, p.req(18)?],
        nis: p.opt(19)?,
    })
}

/// Reads a log, checking the header and that time never goes backwards.
pub fn read_log<R: BufRead>(input: R) -> Result<Vec<TrajectoryRecord>> {
    let mut lines = input.lines();
    let header = lines.next().transpose()?.ok_or_else(|| Error::Parse {
        row: 1,
        message: "empty log".into(),
    })?;
    if header.trim() != COLUMNS.join(",") {
        return Err(Error::Parse {
            row: 1,
            message: "header does not match the trajectory log columns".into(),
        });
    }
    let mut rows: Vec<TrajectoryRecord> = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let row = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let rec = parse_row(&line, row)?;
        if let Some(prev) = rows.last() {
            if rec.t < prev.t {
                return Err(Error::Parse {
                    row,
                    message: format!("time goes backwards ({} after {})", rec.t, prev.t),
                });
            }
        }
        rows.push(rec);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            row: 2,
            message: "log has no data rows".into(),
        });
    }
    Ok(rows)
}

pub fn write_error_series<W: Write>(mut out: W, series: &[ErrorSeries]) -> Result<()> {
    writeln!(out, "source,t,distance_error")?;
    for s in series {
        for (t, e) in s.timestamps.iter().zip(&s.distance_error) {
            writeln!(out, "{},{t},{e}", s.source)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Fixed-width summary table, one line per estimator.
pub fn format_summary(summaries: &BTreeMap<Source, Summary>) -> String {
    let mut s = format!(
        "{:<10} {:>12} {:>12} {:>12}\n",
        "estimator", "max_m", "rmse_m", "final_m"
    );
    for (src, sum) in summaries {
        writeln!(
            s,
            "{:<10} {:>12.6} {:>12.6} {:>12.6}",
            src.label(),
            sum.max,
            sum.rmse,
            sum.final_error
        )
        .unwrap();
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_rows() -> Vec<TrajectoryRecord> {
        vec![
            TrajectoryRecord {
                t: 0.0,
                kind: RowKind::Twist,
                truth: Pose2D::ORIGIN,
                twist: Some(BodyTwist::ZERO),
                odometry: Some(Pose2D::ORIGIN),
                ips: None,
                ekf: Pose2D::ORIGIN,
                variances: [0.01; 3],
                nis: None,
            },
            TrajectoryRecord {
                t: 0.125,
                kind: RowKind::Fix,
                truth: Pose2D::new(0.0625, 0.0, 0.0),
                twist: None,
                odometry: None,
                ips: Some((0.1 + 0.2, -1.0 / 3.0)),
                ekf: Pose2D::new(0.06, 1e-17, -0.001),
                variances: [0.004, 0.004, 0.0100001],
                nis: Some(0.731),
            },
        ]
    }

    #[test]
    fn logs_read_back_exactly() {
        let rows = sample_rows();
        let mut buf = Vec::new();
        write_log(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,kind,gt_x"));
        assert!(text.lines().nth(1).unwrap().contains(",,"));
        assert_eq!(read_log(buf.as_slice()).unwrap(), rows);
    }

    #[test]
    fn malformed_rows_report_line_number() {
        let mut buf = Vec::new();
        write_log(&mut buf, &sample_rows()).unwrap();
        let text = String::from_utf8(buf).unwrap().replace("0.731", "abc");
        let err = read_log(text.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { row: 3, .. }), "{err}");
        assert_eq!(err.exit_code(), 2);

        let short = format!("{}\n0,twist,1\n", COLUMNS.join(","));
        assert!(matches!(
            read_log(short.as_bytes()),
            Err(Error::Parse { row: 2, .. })
        ));

        assert!(read_log("a,b\n".as_bytes()).is_err());
        assert!(read_log("".as_bytes()).is_err());
    }

    #[test]
    fn backwards_time_is_rejected() {
        let mut rows = sample_rows();
        rows[1].t = -1.0;
        let mut buf = Vec::new();
        write_log(&mut buf, &rows).unwrap();
        assert!(matches!(
            read_log(buf.as_slice()),
            Err(Error::Parse { row: 3, .. })
        ));
    }
}
