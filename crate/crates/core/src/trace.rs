//! Measured channel/queue/power traces and the per-row sample sets derived
//! from them.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evt::SampleSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t_ms: f64,
    pub queue_up_bits: f64,
    pub queue_down_bits: f64,
    pub rate_up_bps: f64,
    pub rate_down_bps: f64,
    pub power_up_mw: f64,
    pub power_down_mw: f64,
}

impl TraceRow {
    fn check(&self, line: usize) -> Result<()> {
        let all = [
            self.t_ms,
            self.queue_up_bits,
            self.queue_down_bits,
            self.rate_up_bps,
            self.rate_down_bps,
            self.power_up_mw,
            self.power_down_mw,
        ];
        if all.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Schema(format!(
                "trace row {line}: values must be finite and nonnegative"
            )));
        }
        if self.rate_up_bps <= 0.0 || self.rate_down_bps <= 0.0 {
            return Err(Error::Schema(format!("trace row {line}: rates must be positive")));
        }
        Ok(())
    }
}

pub fn read_trace(path: impl AsRef<Path>) -> Result<Vec<TraceRow>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_trace_from(file)
}

pub fn read_trace_from<R: std::io::Read>(reader: R) -> Result<Vec<TraceRow>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let mut rows = Vec::new();
    for (i, rec) in rdr.deserialize().enumerate() {
        let row: TraceRow = rec?;
        row.check(i + 2)?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_trace(path: impl AsRef<Path>, rows: &[TraceRow]) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Row-wise realizations: V = (queue + payload)/rate for each direction,
/// J = power_up/rate_up, H = power_down/rate_down.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSamples {
    pub v_up: SampleSet,
    pub v_down: SampleSet,
    pub j: SampleSet,
    pub h: SampleSet,
}

pub fn trace_samples(rows: &[TraceRow], payload_bits: f64) -> Result<TraceSamples> {
    let col = |f: &dyn Fn(&TraceRow) -> f64| rows.iter().map(f).collect::<Vec<_>>();
    Ok(TraceSamples {
        v_up: SampleSet::new(
            col(&|r| (r.queue_up_bits + payload_bits) / r.rate_up_bps),
            "s",
        )?,
        v_down: SampleSet::new(
            col(&|r| (r.queue_down_bits + payload_bits) / r.rate_down_bps),
            "s",
        )?,
        j: SampleSet::new(col(&|r| r.power_up_mw / r.rate_up_bps), "mW*s/bit")?,
        h: SampleSet::new(col(&|r| r.power_down_mw / r.rate_down_bps), "mW*s/bit")?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const CSV: &str = "t_ms,queue_up_bits,queue_down_bits,rate_up_bps,rate_down_bps,power_up_mw,power_down_mw\n\
                       0,100,50,1000,500,20,10\n\
                       1,0,0,2000,1000,40,5\n";

    #[test]
    fn derives_samples() {
        let rows = read_trace_from(CSV.as_bytes()).unwrap();
        assert_eq!(rows.len(), 2);
        let s = trace_samples(&rows, 100.0).unwrap();
        assert_eq!(s.v_up.values, vec![0.2, 0.05]);
        assert_eq!(s.v_down.values, vec![0.3, 0.1]);
        assert_eq!(s.j.values, vec![0.02, 0.02]);
        assert_eq!(s.h.values, vec![0.02, 0.005]);
    }

    #[test]
    fn rejects_bad_rows() {
        let bad = CSV.replace("2000", "0");
        assert!(read_trace_from(bad.as_bytes()).is_err());
        assert!(read_trace_from("t_ms,foo\n1,2\n".as_bytes()).is_err());
    }
}
