//! Stable file formats: the per-tick trace as CSV and run summaries as JSON.

use std::io::Write;

use serde::Serialize;

use crate::engine::{ReplanRecord, SimOutcome, TraceRecord};
use crate::error::{CeiError, Result};

/// Column order of the trace CSV.
pub const TRACE_COLUMNS: [&str; 8] = ["time", "side", "s", "v", "a_in", "a_net", "max_risk", "event"];

/// Writes the trace with a header row. Floats use the shortest
/// representation that round-trips, so output is byte-stable.
pub fn write_trace_csv<W: Write>(out: W, trace: &[TraceRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in trace {
        w.serialize(r)?;
    }
    if trace.is_empty() {
        w.write_record(TRACE_COLUMNS)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace_csv<R: std::io::Read>(input: R) -> Result<Vec<TraceRecord>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header != TRACE_COLUMNS {
        return Err(CeiError::Parse(format!("unexpected trace header {header:?}")));
    }
    r.deserialize().map(|row| row.map_err(CeiError::from)).collect()
}

fn write_json<W: Write, T: Serialize + ?Sized>(mut out: W, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| CeiError::Io(e.to_string()))?;
    out.write_all(b"\n")?;
    Ok(())
}

pub fn write_outcome_json<W: Write>(out: W, outcome: &SimOutcome) -> Result<()> {
    write_json(out, outcome)
}

pub fn write_replans_json<W: Write>(out: W, replans: &[ReplanRecord]) -> Result<()> {
    write_json(out, replans)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::TraceEvent;
    use crate::track::Side;

    fn record(time: f64, side: Side) -> TraceRecord {
        TraceRecord {
            time,
            side,
            s: 1.25,
            v: 10.0,
            a_in: 0.1,
            a_net: -0.05,
            max_risk: 0.125,
            event: TraceEvent::ReplanUpper,
        }
    }

    #[test]
    fn header_and_round_trip() {
        let trace = vec![record(0.0, Side::Left), record(0.0, Side::Right), record(0.05, Side::Left)];
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &trace).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().next().unwrap(), "time,side,s,v,a_in,a_net,max_risk,event");
        assert!(text.lines().nth(1).unwrap().starts_with("0.0,left,1.25,10.0,"));
        assert!(text.contains("replan_upper"));
        assert_eq!(read_trace_csv(buf.as_slice()).unwrap(), trace);
    }

    #[test]
    fn empty_trace_still_has_header() {
        let mut buf = Vec::new();
        write_trace_csv(&mut buf, &[]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().trim(), TRACE_COLUMNS.join(","));
    }
}
