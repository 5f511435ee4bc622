use std::io::{self, Write};

use super::convergence::ConvergenceStudy;
use super::sweep::{CellStatus, WorkPrecisionRecord};

/// First line of every CSV file written by this crate.
pub const CSV_SCHEMA: &str = "# schema=1";

/// 17 significant digits, enough to round-trip an `f64`.
pub fn number(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_work_precision_csv<W: Write>(mut out: W, records: &[WorkPrecisionRecord]) -> io::Result<()> {
    writeln!(out, "{CSV_SCHEMA}")?;
    writeln!(out, "method,knob_name,knob,error,f_evals,jac_factorizations,shrinks,wall_ns,status")?;
    for r in records {
        let status = match &r.status {
            CellStatus::Ok => "ok".to_string(),
            CellStatus::Failed(msg) => format!("failed: {}", msg.replace(',', ";")),
        };
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.method,
            r.method.knob_name(),
            number(r.knob),
            number(r.error),
            r.work.f_evals,
            r.work.jacobian_factorizations,
            r.work.step_shrinks,
            r.wall_ns,
            status
        )?;
    }
    Ok(())
}

pub fn write_convergence_csv<W: Write>(mut out: W, study: &ConvergenceStudy) -> io::Result<()> {
    writeln!(out, "{CSV_SCHEMA}")?;
    writeln!(out, "h,err_translational,err_rotational,status")?;
    for r in &study.records {
        let status = match &r.failure {
            None => "ok".to_string(),
            Some(msg) => format!("failed: {}", msg.replace(',', ";")),
        };
        writeln!(
            out,
            "{},{},{},{}",
            number(r.h),
            number(r.err_translational),
            number(r.err_rotational),
            status
        )?;
    }
    Ok(())
}
