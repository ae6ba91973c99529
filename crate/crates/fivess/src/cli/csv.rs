//! Deterministic CSV emission for traces and cycle records.
//!
//! Values are written with 12 significant digits. Summaries are computed
//! from round-tripped values so that metrics recomputed from the emitted
//! files match the in-process numbers bit for bit.

use std::io::Write;
use std::path::Path;

use crate::converter::{CycleRecord, Trace, TracePoint};
use crate::error::{Error, Result};

/// 12-significant-digit scientific representation.
pub fn format_sig(x: f64) -> String {
    format!("{x:.11e}")
}

/// The value the CSV reader will see for `x`.
pub fn roundtrip_sig(x: f64) -> f64 {
    format_sig(x).parse().expect("formatted float reparses")
}

/// Trace with every float rounded to its emitted representation.
pub fn round_trace(trace: &Trace) -> Trace {
    Trace {
        points: trace
            .points
            .iter()
            .map(|p| TracePoint {
                t: roundtrip_sig(p.t),
                v: roundtrip_sig(p.v),
                i_l: roundtrip_sig(p.i_l),
                ..*p
            })
            .collect(),
        cycles: trace
            .cycles
            .iter()
            .map(|c| CycleRecord {
                t_event: roundtrip_sig(c.t_event),
                t_sample: roundtrip_sig(c.t_sample),
                v_sample: roundtrip_sig(c.v_sample),
                i_extreme: roundtrip_sig(c.i_extreme),
                controlled_duration: roundtrip_sig(c.controlled_duration),
                ..*c
            })
            .collect(),
        termination: trace.termination,
        final_state: trace.final_state,
    }
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.display().to_string(),
            source,
        })?;
    }
    Ok(std::io::BufWriter::new(std::fs::File::create(path).map_err(
        |source| Error::Io {
            path: path.display().to_string(),
            source,
        },
    )?))
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Dense trace: `t_s,v_V,iL_A,switch_state,cycle`.
pub fn write_trace_csv(path: &Path, trace: &Trace) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "t_s,v_V,iL_A,switch_state,cycle").map_err(|e| io_err(path, e))?;
    for p in &trace.points {
        writeln!(
            w,
            "{},{},{},{},{}",
            format_sig(p.t),
            format_sig(p.v),
            format_sig(p.i_l),
            p.switch_state,
            p.cycle
        )
        .map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

/// Per-cycle records:
/// `n,t_event_s,t_sample_s,v_sample_V,i_extreme_A,controlled_s,clamped`.
pub fn write_cycles_csv(path: &Path, cycles: &[CycleRecord]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "n,t_event_s,t_sample_s,v_sample_V,i_extreme_A,controlled_s,clamped")
        .map_err(|e| io_err(path, e))?;
    for c in cycles {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            c.n,
            format_sig(c.t_event),
            format_sig(c.t_sample),
            format_sig(c.v_sample),
            format_sig(c.i_extreme),
            format_sig(c.controlled_duration),
            u8::from(c.clamped)
        )
        .map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

/// Sweep results: `step_V,e_w_percent`.
pub fn write_sweep_csv(path: &Path, points: &[crate::scenario::SweepPoint]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "step_V,e_w_percent").map_err(|e| io_err(path, e))?;
    for p in points {
        writeln!(w, "{},{}", format_sig(p.step_v), format_sig(p.e_w_percent))
            .map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| io_err(path, source))
}

/// Parse a trace CSV back (columns as written by [`write_trace_csv`]).
pub fn read_trace_csv(path: &Path) -> Result<Vec<TracePoint>> {
    let text = read_to_string(path)?;
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::Config(format!(
                "{}:{}: expected 5 columns, got {}",
                path.display(),
                idx + 1,
                fields.len()
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|e| Error::Config(format!("{}:{}: {e}", path.display(), idx + 1)))
        };
        out.push(TracePoint {
            t: parse(fields[0])?,
            v: parse(fields[1])?,
            i_l: parse(fields[2])?,
            switch_state: fields[3]
                .parse()
                .map_err(|e| Error::Config(format!("{}:{}: {e}", path.display(), idx + 1)))?,
            cycle: fields[4]
                .parse()
                .map_err(|e| Error::Config(format!("{}:{}: {e}", path.display(), idx + 1)))?,
        });
    }
    Ok(out)
}

/// Parse a cycles CSV back (columns as written by [`write_cycles_csv`]).
pub fn read_cycles_csv(path: &Path) -> Result<Vec<CycleRecord>> {
    let text = read_to_string(path)?;
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(Error::Config(format!(
                "{}:{}: expected 7 columns, got {}",
                path.display(),
                idx + 1,
                fields.len()
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|e| Error::Config(format!("{}:{}: {e}", path.display(), idx + 1)))
        };
        out.push(CycleRecord {
            n: fields[0]
                .parse()
                .map_err(|e| Error::Config(format!("{}:{}: {e}", path.display(), idx + 1)))?,
            t_event: parse(fields[1])?,
            t_sample: parse(fields[2])?,
            v_sample: parse(fields[3])?,
            i_extreme: parse(fields[4])?,
            controlled_duration: parse(fields[5])?,
            clamped: fields[6].trim() == "1",
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formatting_keeps_twelve_significant_digits() {
        let x = std::f64::consts::PI * 1e-7;
        let s = format_sig(x);
        assert_eq!(s, "3.14159265359e-7");
        let back: f64 = s.parse().unwrap();
        assert!((back - x).abs() < 1e-18);
    }

    #[test]
    fn roundtrip_is_idempotent() {
        for x in [1.0 / 3.0, 40.0, -2.7e-9, 0.0] {
            let once = roundtrip_sig(x);
            assert_eq!(once, roundtrip_sig(once));
        }
    }
}
